//! Grayscale images, aligned HR/LR pairs, patch extraction and the bicubic
//! downsampling baseline.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// std's inherent float methods shadow the trait in test builds.
#[cfg_attr(test, allow(unused_imports))]
use crate::fmath::FloatExt;
use crate::rng::Rng;

/// Errors from image construction and resampling.
#[derive(Clone, Debug, PartialEq)]
pub enum ImageError {
    /// `data` length does not match `height * width`.
    LengthMismatch { expected: usize, got: usize },
    /// An intensity fell outside [0, 1].
    IntensityOutOfRange { index: usize, value: f64 },
    /// Image dimensions are not an integer multiple of the LR dimensions.
    ScaleMismatch,
    /// Requested patch does not fit in the source image.
    PatchTooLarge { patch: usize, height: usize, width: usize },
    /// Patch size is not divisible by the scale.
    PatchNotDivisible { patch: usize, scale: usize },
    /// Image dimensions are not divisible by the downsampling factor.
    NotDivisible { height: usize, width: usize, scale: usize },
    /// Scale factors below 2 do not downsample.
    BadScale(usize),
    EmptyImage,
}

impl fmt::Display for ImageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ImageError::LengthMismatch { expected, got } => {
                write!(f, "data length {got} does not match height*width = {expected}")
            }
            ImageError::IntensityOutOfRange { index, value } => {
                write!(f, "intensity {value} at index {index} outside [0, 1]")
            }
            ImageError::ScaleMismatch => {
                write!(f, "HR dimensions are not an integer multiple of LR dimensions")
            }
            ImageError::PatchTooLarge { patch, height, width } => {
                write!(f, "patch size {patch} exceeds image {height}x{width}")
            }
            ImageError::PatchNotDivisible { patch, scale } => {
                write!(f, "patch size {patch} not divisible by scale {scale}")
            }
            ImageError::NotDivisible { height, width, scale } => {
                write!(f, "image {height}x{width} not divisible by scale {scale}")
            }
            ImageError::BadScale(s) => write!(f, "scale must be >= 2, got {s}"),
            ImageError::EmptyImage => write!(f, "image has zero pixels"),
        }
    }
}

impl core::error::Error for ImageError {}

/// A grayscale image with row-major intensities in [0, 1].
#[derive(Clone, Debug, PartialEq)]
pub struct GrayImage {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

impl GrayImage {
    /// Validates the intensity range and buffer length.
    pub fn new(height: usize, width: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        if height == 0 || width == 0 {
            return Err(ImageError::EmptyImage);
        }
        if data.len() != height * width {
            return Err(ImageError::LengthMismatch {
                expected: height * width,
                got: data.len(),
            });
        }
        for (i, &v) in data.iter().enumerate() {
            if !(0.0..=1.0).contains(&v) {
                return Err(ImageError::IntensityOutOfRange { index: i, value: v });
            }
        }
        Ok(GrayImage { height, width, data })
    }

    /// Builds an image from raw values, clamping each into [0, 1].
    pub fn from_clamped(height: usize, width: usize, data: Vec<f64>) -> Result<Self, ImageError> {
        let clamped = data.into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
        GrayImage::new(height, width, clamped)
    }

    pub fn constant(height: usize, width: usize, value: f64) -> Result<Self, ImageError> {
        GrayImage::new(height, width, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn row(&self, y: usize) -> &[f64] {
        &self.data[y * self.width..(y + 1) * self.width]
    }

    pub fn crop(&self, top: usize, left: usize, height: usize, width: usize) -> GrayImage {
        assert!(top + height <= self.height && left + width <= self.width);
        let mut data = Vec::with_capacity(height * width);
        for y in top..top + height {
            data.extend_from_slice(&self.data[y * self.width + left..y * self.width + left + width]);
        }
        GrayImage { height, width, data }
    }

    pub fn flipped_horizontal(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in 0..self.height {
            data.extend(self.row(y).iter().rev());
        }
        GrayImage { height: self.height, width: self.width, data }
    }

    pub fn flipped_vertical(&self) -> GrayImage {
        let mut data = Vec::with_capacity(self.data.len());
        for y in (0..self.height).rev() {
            data.extend_from_slice(self.row(y));
        }
        GrayImage { height: self.height, width: self.width, data }
    }
}

/// How to cut training patches out of an HR/LR pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PatchSpec {
    /// Side length of the square HR patch; must be divisible by `scale`.
    pub hr_size: usize,
    /// Integer HR:LR size ratio.
    pub scale: usize,
    /// Mirror every extracted patch horizontally.
    pub flip_horizontal: bool,
    /// Mirror every extracted patch vertically.
    pub flip_vertical: bool,
}

/// An aligned HR/LR image pair sharing the same field of view.
#[derive(Clone, Debug, PartialEq)]
pub struct ImagePair {
    pub hr: GrayImage,
    pub lr: GrayImage,
    pub scale: usize,
}

impl ImagePair {
    pub fn new(hr: GrayImage, lr: GrayImage, scale: usize) -> Result<Self, ImageError> {
        if scale < 2 {
            return Err(ImageError::BadScale(scale));
        }
        if hr.height != lr.height * scale || hr.width != lr.width * scale {
            return Err(ImageError::ScaleMismatch);
        }
        Ok(ImagePair { hr, lr, scale })
    }
}

/// Cuts `count` aligned patch pairs at random multiple-of-scale offsets.
///
/// The HR offset is always a multiple of `spec.scale`, so the LR patch at
/// `offset / scale` covers exactly the same field of view. Deterministic for
/// a fixed seed.
pub fn extract_pairs(
    hr: &GrayImage,
    lr: &GrayImage,
    spec: &PatchSpec,
    count: usize,
    rng_seed: u64,
) -> Result<Vec<ImagePair>, ImageError> {
    if spec.hr_size % spec.scale != 0 {
        return Err(ImageError::PatchNotDivisible { patch: spec.hr_size, scale: spec.scale });
    }
    if hr.height != lr.height * spec.scale || hr.width != lr.width * spec.scale {
        return Err(ImageError::ScaleMismatch);
    }
    if spec.hr_size > hr.height || spec.hr_size > hr.width {
        return Err(ImageError::PatchTooLarge {
            patch: spec.hr_size,
            height: hr.height,
            width: hr.width,
        });
    }
    let mut rng = Rng::new(rng_seed);
    let max_oy = (hr.height - spec.hr_size) / spec.scale;
    let max_ox = (hr.width - spec.hr_size) / spec.scale;
    let lr_size = spec.hr_size / spec.scale;
    let mut pairs = Vec::with_capacity(count);
    for _ in 0..count {
        let oy = spec.scale * rng.below(max_oy + 1);
        let ox = spec.scale * rng.below(max_ox + 1);
        let mut hp = hr.crop(oy, ox, spec.hr_size, spec.hr_size);
        let mut lp = lr.crop(oy / spec.scale, ox / spec.scale, lr_size, lr_size);
        if spec.flip_horizontal {
            hp = hp.flipped_horizontal();
            lp = lp.flipped_horizontal();
        }
        if spec.flip_vertical {
            hp = hp.flipped_vertical();
            lp = lp.flipped_vertical();
        }
        pairs.push(ImagePair { hr: hp, lr: lp, scale: spec.scale });
    }
    Ok(pairs)
}

/// Catmull-Rom cubic convolution kernel (a = -0.5), support |t| < 2.
pub fn cubic_kernel(t: f64) -> f64 {
    let a = -0.5;
    let t = t.abs();
    if t < 1.0 {
        (a + 2.0) * t * t * t - (a + 3.0) * t * t + 1.0
    } else if t < 2.0 {
        a * (t * t * t - 5.0 * t * t + 8.0 * t - 4.0)
    } else {
        0.0
    }
}

/// Reflects an index into [0, n) without repeating the boundary sample.
#[inline]
fn reflect_index(i: isize, n: usize) -> usize {
    let n = n as isize;
    if n == 1 {
        return 0;
    }
    let period = 2 * (n - 1);
    let mut i = i.rem_euclid(period);
    if i >= n {
        i = period - i;
    }
    i as usize
}

/// One axis of the antialiased resampler: output tap positions and
/// sum-normalized kernel weights.
fn resample_taps(n_in: usize, scale: usize) -> Vec<(Vec<usize>, Vec<f64>)> {
    let s = scale as f64;
    let n_out = n_in / scale;
    let mut taps = Vec::with_capacity(n_out);
    for m in 0..n_out {
        // Center of output sample m in input coordinates.
        let center = (m as f64 + 0.5) * s - 0.5;
        // Antialiasing widens the kernel support by the scale factor.
        let support = 2.0 * s;
        let lo = (center - support).floor() as isize + 1;
        let hi = (center + support).ceil() as isize - 1;
        let mut idx = Vec::with_capacity((hi - lo + 1) as usize);
        let mut w = Vec::with_capacity(idx.capacity());
        let mut sum = 0.0;
        for i in lo..=hi {
            let weight = cubic_kernel((i as f64 - center) / s);
            if weight != 0.0 {
                idx.push(reflect_index(i, n_in));
                w.push(weight);
                sum += weight;
            }
        }
        for weight in &mut w {
            *weight /= sum;
        }
        taps.push((idx, w));
    }
    taps
}

/// Antialiased bicubic downsampling by an integer factor.
///
/// Catmull-Rom kernel (a = -0.5) with its support scaled by the factor,
/// reflect boundary handling, per-tap weight normalization, output clamped
/// to [0, 1].
pub fn bicubic_downsample(img: &GrayImage, scale: usize) -> Result<GrayImage, ImageError> {
    if scale < 2 {
        return Err(ImageError::BadScale(scale));
    }
    if img.height % scale != 0 || img.width % scale != 0 {
        return Err(ImageError::NotDivisible {
            height: img.height,
            width: img.width,
            scale,
        });
    }
    let out_h = img.height / scale;
    let out_w = img.width / scale;

    // Horizontal pass: width / scale, full height. Intermediate values are
    // kept unclamped (the cubic has negative lobes).
    let col_taps = resample_taps(img.width, scale);
    let mut mid = vec![0.0f64; img.height * out_w];
    for y in 0..img.height {
        let row = img.row(y);
        let out_row = &mut mid[y * out_w..(y + 1) * out_w];
        for (x, (idx, w)) in col_taps.iter().enumerate() {
            let mut acc = 0.0;
            for (&i, &wi) in idx.iter().zip(w.iter()) {
                acc += row[i] * wi;
            }
            out_row[x] = acc;
        }
    }

    // Vertical pass.
    let row_taps = resample_taps(img.height, scale);
    let mut out = vec![0.0f64; out_h * out_w];
    for (y, (idx, w)) in row_taps.iter().enumerate() {
        for x in 0..out_w {
            let mut acc = 0.0;
            for (&i, &wi) in idx.iter().zip(w.iter()) {
                acc += mid[i * out_w + x] * wi;
            }
            out[y * out_w + x] = acc;
        }
    }
    GrayImage::from_clamped(out_h, out_w, out)
}

/// Mean absolute difference, the shared L1 metric over two equal-size images.
pub fn l1_distance(a: &GrayImage, b: &GrayImage) -> Result<f64, ImageError> {
    if a.height != b.height || a.width != b.width {
        return Err(ImageError::ScaleMismatch);
    }
    let sum: f64 = a
        .data
        .iter()
        .zip(b.data.iter())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.data.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(h: usize, w: usize) -> GrayImage {
        let data = (0..h * w)
            .map(|i| {
                let y = i / w;
                let x = i % w;
                (x + y) as f64 / ((h + w) as f64)
            })
            .collect();
        GrayImage::new(h, w, data).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        let err = GrayImage::new(1, 2, vec![0.5, 1.5]).unwrap_err();
        assert!(matches!(err, ImageError::IntensityOutOfRange { index: 1, .. }));
        let err = GrayImage::new(2, 2, vec![0.0; 3]).unwrap_err();
        assert!(matches!(err, ImageError::LengthMismatch { expected: 4, got: 3 }));
    }

    #[test]
    fn pair_invariant() {
        let hr = GrayImage::constant(8, 8, 0.5).unwrap();
        let lr = GrayImage::constant(4, 4, 0.5).unwrap();
        assert!(ImagePair::new(hr.clone(), lr.clone(), 2).is_ok());
        assert_eq!(
            ImagePair::new(hr, lr, 4).unwrap_err(),
            ImageError::ScaleMismatch
        );
    }

    #[test]
    fn extract_single_placement() {
        let hr = ramp(64, 64);
        let lr = bicubic_downsample(&hr, 4).unwrap();
        let spec = PatchSpec { hr_size: 64, scale: 4, flip_horizontal: false, flip_vertical: false };
        let pairs = extract_pairs(&hr, &lr, &spec, 1, 9).unwrap();
        assert_eq!(pairs.len(), 1);
        assert_eq!(pairs[0].hr, hr);
        assert_eq!(pairs[0].lr, lr);
    }

    #[test]
    fn extract_flips_both_members() {
        let hr = ramp(16, 16);
        let lr = bicubic_downsample(&hr, 2).unwrap();
        let base = PatchSpec { hr_size: 8, scale: 2, flip_horizontal: false, flip_vertical: false };
        let flipped = PatchSpec { flip_horizontal: true, ..base };
        let p0 = extract_pairs(&hr, &lr, &base, 3, 5).unwrap();
        let p1 = extract_pairs(&hr, &lr, &flipped, 3, 5).unwrap();
        for (a, b) in p0.iter().zip(p1.iter()) {
            assert_eq!(a.hr.flipped_horizontal(), b.hr);
            assert_eq!(a.lr.flipped_horizontal(), b.lr);
        }
    }

    #[test]
    fn extract_deterministic_and_aligned() {
        let hr = ramp(40, 56);
        let lr = bicubic_downsample(&hr, 4).unwrap();
        let spec = PatchSpec { hr_size: 16, scale: 4, flip_horizontal: false, flip_vertical: false };
        let a = extract_pairs(&hr, &lr, &spec, 10, 123).unwrap();
        let b = extract_pairs(&hr, &lr, &spec, 10, 123).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn extract_too_large_errors() {
        let hr = ramp(16, 16);
        let lr = bicubic_downsample(&hr, 2).unwrap();
        let spec = PatchSpec { hr_size: 32, scale: 2, flip_horizontal: false, flip_vertical: false };
        assert!(matches!(
            extract_pairs(&hr, &lr, &spec, 1, 0),
            Err(ImageError::PatchTooLarge { .. })
        ));
    }

    #[test]
    fn bicubic_preserves_constant() {
        let img = GrayImage::constant(32, 32, 0.5).unwrap();
        let out = bicubic_downsample(&img, 4).unwrap();
        for &v in out.data() {
            assert!((v - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn bicubic_rejects_indivisible() {
        let img = GrayImage::constant(9, 8, 0.1).unwrap();
        assert!(matches!(
            bicubic_downsample(&img, 2),
            Err(ImageError::NotDivisible { .. })
        ));
    }

    #[test]
    fn reflect_index_small() {
        assert_eq!(reflect_index(-1, 8), 1);
        assert_eq!(reflect_index(-2, 8), 2);
        assert_eq!(reflect_index(8, 8), 6);
        assert_eq!(reflect_index(9, 8), 5);
        assert_eq!(reflect_index(3, 8), 3);
    }
}
