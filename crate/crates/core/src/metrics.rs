//! PSNR and SSIM over unit-range grayscale images.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

// std's inherent float methods shadow the trait in test builds.
#[cfg_attr(test, allow(unused_imports))]
use crate::fmath::FloatExt;
use crate::image::GrayImage;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum MetricError {
    DimensionMismatch,
    /// SSIM needs at least one full window.
    TooSmall { height: usize, width: usize, window: usize },
}

impl fmt::Display for MetricError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricError::DimensionMismatch => write!(f, "images have different dimensions"),
            MetricError::TooSmall { height, width, window } => {
                write!(f, "image {height}x{width} smaller than the {window}x{window} SSIM window")
            }
        }
    }
}

impl core::error::Error for MetricError {}

/// Peak signal-to-noise ratio in decibels with peak 1.0; identical images
/// report +infinity.
pub fn psnr(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricError> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(MetricError::DimensionMismatch);
    }
    let mse: f64 = a
        .data()
        .iter()
        .zip(b.data().iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        / a.data().len() as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (1.0 / mse).log10())
}

/// Normalized Gaussian window, row-major `SSIM_WINDOW` squared.
fn gaussian_window() -> Vec<f64> {
    let n = SSIM_WINDOW;
    let c = (n as f64 - 1.0) / 2.0;
    let mut w = vec![0.0; n * n];
    let mut sum = 0.0;
    for y in 0..n {
        for x in 0..n {
            let dy = y as f64 - c;
            let dx = x as f64 - c;
            let v = (-(dx * dx + dy * dy) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
            w[y * n + x] = v;
            sum += v;
        }
    }
    for v in &mut w {
        *v /= sum;
    }
    w
}

/// Structural similarity with the standard 11x11 Gaussian window
/// (sigma 1.5), K1 = 0.01, K2 = 0.03 and dynamic range 1.0, averaged over
/// all fully-valid window positions.
pub fn ssim(a: &GrayImage, b: &GrayImage) -> Result<f64, MetricError> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(MetricError::DimensionMismatch);
    }
    let h = a.height();
    let w = a.width();
    let n = SSIM_WINDOW;
    if h < n || w < n {
        return Err(MetricError::TooSmall { height: h, width: w, window: n });
    }
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let win = gaussian_window();

    let mut total = 0.0;
    let mut windows = 0usize;
    for y0 in 0..=h - n {
        for x0 in 0..=w - n {
            let mut mu_a = 0.0;
            let mut mu_b = 0.0;
            for wy in 0..n {
                let ra = &a.row(y0 + wy)[x0..x0 + n];
                let rb = &b.row(y0 + wy)[x0..x0 + n];
                let wr = &win[wy * n..(wy + 1) * n];
                for i in 0..n {
                    mu_a += wr[i] * ra[i];
                    mu_b += wr[i] * rb[i];
                }
            }
            let mut var_a = 0.0;
            let mut var_b = 0.0;
            let mut cov = 0.0;
            for wy in 0..n {
                let ra = &a.row(y0 + wy)[x0..x0 + n];
                let rb = &b.row(y0 + wy)[x0..x0 + n];
                let wr = &win[wy * n..(wy + 1) * n];
                for i in 0..n {
                    let da = ra[i] - mu_a;
                    let db = rb[i] - mu_b;
                    var_a += wr[i] * da * da;
                    var_b += wr[i] * db * db;
                    cov += wr[i] * da * db;
                }
            }
            let num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            let den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            windows += 1;
        }
    }
    Ok(total / windows as f64)
}
