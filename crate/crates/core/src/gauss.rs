//! Anisotropic Gaussian covariances and their discretization into the fixed
//! kernel bank used by the adaptive blurring layer.
//!
//! A bank kernel is the probability mass of a zero-mean bivariate normal
//! captured in each cell of a fixed region of interest. Axis-aligned
//! covariances use the exact product of 1D CDF differences; correlated
//! covariances are integrated with tensor-product Gauss-Legendre quadrature.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_SQRT_2, PI};
use core::fmt;

// std's inherent float methods shadow the trait in test builds.
#[cfg_attr(test, allow(unused_imports))]
use crate::fmath::{erf, FloatExt};

/// Gauss-Legendre order per axis and per panel used by [`cell_mass`].
pub const QUAD_ORDER: usize = 12;

/// Maximum panel subdivisions per axis inside one cell. Narrow covariances
/// (tiny factors) concentrate the density well below the cell width; panels
/// keep the fixed-order rule accurate there.
const MAX_PANELS: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub enum KernelError {
    NonPositiveFactor(f64),
    NonPositiveAspect(f64),
    AspectAboveOne(f64),
    NotPositiveDefinite { xx: f64, xy: f64, yy: f64 },
    DegenerateCell,
    FactorCountMismatch { expected: usize, got: usize },
    EmptyAngles,
    EmptyFactors,
    KernelSizeTooSmall(usize),
    NonPositiveRoi(f64),
}

impl fmt::Display for KernelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelError::NonPositiveFactor(v) => write!(f, "factor must be > 0, got {v}"),
            KernelError::NonPositiveAspect(v) => write!(f, "aspect must be > 0, got {v}"),
            KernelError::AspectAboveOne(v) => write!(f, "aspect must lie in (0, 1], got {v}"),
            KernelError::NotPositiveDefinite { xx, xy, yy } => {
                write!(f, "covariance [[{xx}, {xy}], [{xy}, {yy}]] is not positive definite")
            }
            KernelError::DegenerateCell => write!(f, "integration cell has no area"),
            KernelError::FactorCountMismatch { expected, got } => {
                write!(f, "expected {expected} factors, got {got}")
            }
            KernelError::EmptyAngles => write!(f, "bank needs at least one angle"),
            KernelError::EmptyFactors => write!(f, "bank needs at least one factor"),
            KernelError::KernelSizeTooSmall(s) => write!(f, "kernel size must be >= 3, got {s}"),
            KernelError::NonPositiveRoi(v) => write!(f, "ROI half-width must be > 0, got {v}"),
        }
    }
}

impl core::error::Error for KernelError {}

/// A 2x2 symmetric positive definite covariance in ROI units squared.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Covariance2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Covariance2 {
    pub fn new(xx: f64, xy: f64, yy: f64) -> Result<Self, KernelError> {
        if !(xx > 0.0 && yy > 0.0 && xx * yy - xy * xy > 0.0) {
            return Err(KernelError::NotPositiveDefinite { xx, xy, yy });
        }
        Ok(Covariance2 { xx, xy, yy })
    }

    pub fn det(&self) -> f64 {
        self.xx * self.yy - self.xy * self.xy
    }

    /// Smallest eigenvalue; strictly positive for an SPD matrix.
    pub fn min_eigenvalue(&self) -> f64 {
        let mean = 0.5 * (self.xx + self.yy);
        let d = 0.5 * (self.xx - self.yy);
        mean - (d * d + self.xy * self.xy).sqrt()
    }
}

/// Builds `factor * R(angle) * diag(1, aspect) * R(angle)^T`.
pub fn covariance(factor: f64, angle: f64, aspect: f64) -> Result<Covariance2, KernelError> {
    if !(factor > 0.0) {
        return Err(KernelError::NonPositiveFactor(factor));
    }
    if !(aspect > 0.0) {
        return Err(KernelError::NonPositiveAspect(aspect));
    }
    let c = angle.cos();
    let s = angle.sin();
    Covariance2::new(
        factor * (c * c + aspect * s * s),
        factor * c * s * (1.0 - aspect),
        factor * (s * s + aspect * c * c),
    )
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z * FRAC_1_SQRT_2))
}

/// Gauss-Legendre nodes and weights on [-1, 1], by Newton iteration on the
/// Legendre recurrence.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = (n + 1) / 2;
    for i in 0..m {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut pp = 0.0;
        for _ in 0..100 {
            let mut p1 = 1.0;
            let mut p2 = 0.0;
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j as f64 + 1.0) * z * p2 - j as f64 * p3) / (j as f64 + 1.0);
            }
            pp = n as f64 * (z * p1 - p2) / (z * z - 1.0);
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() < 1e-15 {
                break;
            }
        }
        nodes[i] = -z;
        nodes[n - 1 - i] = z;
        let w = 2.0 / ((1.0 - z * z) * pp * pp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn density(cov: &Covariance2, x: f64, y: f64) -> f64 {
    let det = cov.det();
    let q = (cov.yy * x * x - 2.0 * cov.xy * x * y + cov.xx * y * y) / det;
    (-0.5 * q).exp() / (2.0 * PI * det.sqrt())
}

/// Rectangle integral of the zero-mean bivariate normal density by
/// tensor-product Gauss-Legendre quadrature ([`QUAD_ORDER`] points per axis
/// per panel; panels subdivide the cell down to about one standard
/// deviation).
pub fn cell_mass_quadrature(cov: &Covariance2, x0: f64, y0: f64, x1: f64, y1: f64) -> f64 {
    let (nodes, weights) = gauss_legendre(QUAD_ORDER);
    let sigma_min = cov.min_eigenvalue().sqrt();
    let extent = (x1 - x0).max(y1 - y0);
    let panels = ((extent / sigma_min).ceil() as usize).clamp(1, MAX_PANELS);

    let px = (x1 - x0) / panels as f64;
    let py = (y1 - y0) / panels as f64;
    let mut total = 0.0;
    for ix in 0..panels {
        let ax = x0 + ix as f64 * px;
        let cx = ax + 0.5 * px;
        for iy in 0..panels {
            let ay = y0 + iy as f64 * py;
            let cy = ay + 0.5 * py;
            let mut acc = 0.0;
            for (xi, wx) in nodes.iter().zip(weights.iter()) {
                let x = cx + 0.5 * px * xi;
                let mut inner = 0.0;
                for (yi, wy) in nodes.iter().zip(weights.iter()) {
                    let y = cy + 0.5 * py * yi;
                    inner += wy * density(cov, x, y);
                }
                acc += wx * inner;
            }
            total += acc * 0.25 * px * py;
        }
    }
    total
}

/// Probability mass of the zero-mean bivariate normal over a rectangle.
///
/// Axis-aligned covariances (`xy == 0`) use the exact product of 1D CDF
/// differences; correlated covariances fall back to quadrature.
pub fn cell_mass(
    cov: &Covariance2,
    x0: f64,
    y0: f64,
    x1: f64,
    y1: f64,
) -> Result<f64, KernelError> {
    if !(x0 < x1 && y0 < y1) {
        return Err(KernelError::DegenerateCell);
    }
    if cov.xy == 0.0 {
        let sx = cov.xx.sqrt();
        let sy = cov.yy.sqrt();
        Ok((normal_cdf(x1 / sx) - normal_cdf(x0 / sx))
            * (normal_cdf(y1 / sy) - normal_cdf(y0 / sy)))
    } else {
        Ok(cell_mass_quadrature(cov, x0, y0, x1, y1))
    }
}

/// Cell masses over the ROI grid, before renormalization.
///
/// The ROI [-h, h) x [-h, h) is split into `size` x `size` half-open cells
/// of width `2h/size`. Row index follows y, column index follows x; entry
/// (r, c) is the mass over its cell.
pub fn discretize_raw(cov: &Covariance2, roi_half_width: f64, size: usize) -> Vec<f64> {
    let h = roi_half_width;
    let w = 2.0 * h / size as f64;
    let mut grid = vec![0.0; size * size];
    for r in 0..size {
        let y0 = -h + r as f64 * w;
        for c in 0..size {
            let x0 = -h + c as f64 * w;
            grid[r * size + c] = cell_mass(cov, x0, y0, x0 + w, y0 + w)
                .expect("grid cells are non-degenerate");
        }
    }
    grid
}

/// Discretized kernel, renormalized so the truncated grid sums to one.
pub fn discretize(cov: &Covariance2, roi_half_width: f64, size: usize) -> Vec<f64> {
    let mut grid = discretize_raw(cov, roi_half_width, size);
    let sum: f64 = grid.iter().sum();
    for v in &mut grid {
        *v /= sum;
    }
    grid
}

/// Parameters of a kernel bank: every (factor, angle) combination becomes
/// one discretized kernel.
#[derive(Clone, Debug, PartialEq)]
pub struct BankSpec {
    /// Kernel orientations in radians.
    pub angles: Vec<f64>,
    /// Minor-to-major axis variance ratio of the base covariance.
    pub aspect: f64,
    /// Covariance scale factors, one kernel group per factor.
    pub factors: Vec<f64>,
    /// ROI half-width in ROI units.
    pub roi_half_width: f64,
    /// Kernel side length in cells (= pixels once applied to an image).
    pub kernel_size: usize,
}

impl BankSpec {
    /// The four default orientations 0, 45, -45 and 90 degrees with the
    /// default aspect 0.3, ROI half-width 4 and 16x16 cells.
    pub fn with_factors(factors: Vec<f64>) -> Self {
        BankSpec {
            angles: vec![0.0, PI / 4.0, -PI / 4.0, PI / 2.0],
            aspect: 0.3,
            factors,
            roi_half_width: 4.0,
            kernel_size: 16,
        }
    }

    pub fn validate(&self) -> Result<(), KernelError> {
        if self.angles.is_empty() {
            return Err(KernelError::EmptyAngles);
        }
        if self.factors.is_empty() {
            return Err(KernelError::EmptyFactors);
        }
        for &f in &self.factors {
            if !(f > 0.0) {
                return Err(KernelError::NonPositiveFactor(f));
            }
        }
        if !(self.aspect > 0.0) {
            return Err(KernelError::NonPositiveAspect(self.aspect));
        }
        if self.aspect > 1.0 {
            return Err(KernelError::AspectAboveOne(self.aspect));
        }
        if self.kernel_size < 3 {
            return Err(KernelError::KernelSizeTooSmall(self.kernel_size));
        }
        if !(self.roi_half_width > 0.0) {
            return Err(KernelError::NonPositiveRoi(self.roi_half_width));
        }
        Ok(())
    }

    pub fn kernel_count(&self) -> usize {
        self.angles.len() * self.factors.len()
    }

    /// True when two specs describe interchangeable banks (same kernel
    /// count, angles, aspect and grid geometry) so learned mixture weights
    /// stay applicable across them.
    pub fn same_topology(&self, other: &BankSpec) -> bool {
        self.angles == other.angles
            && self.aspect == other.aspect
            && self.factors.len() == other.factors.len()
            && self.roi_half_width == other.roi_half_width
            && self.kernel_size == other.kernel_size
    }
}

/// One discretized kernel plus the covariance parameters it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct BankKernel {
    pub factor: f64,
    pub angle: f64,
    grid: Vec<f64>,
}

impl BankKernel {
    pub fn grid(&self) -> &[f64] {
        &self.grid
    }
}

/// The fixed, non-learnable set of discretized Gaussian kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelBank {
    kernels: Vec<BankKernel>,
    spec: BankSpec,
}

impl KernelBank {
    pub fn spec(&self) -> &BankSpec {
        &self.spec
    }

    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn size(&self) -> usize {
        self.spec.kernel_size
    }

    pub fn kernel(&self, k: usize) -> &BankKernel {
        &self.kernels[k]
    }

    pub fn kernels(&self) -> &[BankKernel] {
        &self.kernels
    }
}

/// Discretizes one kernel per (factor, angle) pair, factors-major.
pub fn build_bank(spec: &BankSpec) -> Result<KernelBank, KernelError> {
    spec.validate()?;
    let mut kernels = Vec::with_capacity(spec.kernel_count());
    for &factor in &spec.factors {
        for &angle in &spec.angles {
            let cov = covariance(factor, angle, spec.aspect)?;
            kernels.push(BankKernel {
                factor,
                angle,
                grid: discretize(&cov, spec.roi_half_width, spec.kernel_size),
            });
        }
    }
    Ok(KernelBank { kernels, spec: spec.clone() })
}

/// Rebuilds a bank with new factors but identical angles, aspect, ROI and
/// size, preserving kernel count and ordering so learned mixture weights
/// remain applicable.
pub fn rescale_bank(bank: &KernelBank, new_factors: &[f64]) -> Result<KernelBank, KernelError> {
    if new_factors.len() != bank.spec.factors.len() {
        return Err(KernelError::FactorCountMismatch {
            expected: bank.spec.factors.len(),
            got: new_factors.len(),
        });
    }
    let spec = BankSpec { factors: new_factors.to_vec(), ..bank.spec.clone() };
    build_bank(&spec)
}

/// Discrete second moment sum(p * (x^2 + y^2)) over cell centers; grows
/// strictly with the covariance factor.
pub fn second_moment(grid: &[f64], size: usize, roi_half_width: f64) -> f64 {
    let w = 2.0 * roi_half_width / size as f64;
    let mut acc = 0.0;
    for r in 0..size {
        let y = -roi_half_width + (r as f64 + 0.5) * w;
        for c in 0..size {
            let x = -roi_half_width + (c as f64 + 0.5) * w;
            acc += grid[r * size + c] * (x * x + y * y);
        }
    }
    acc
}
