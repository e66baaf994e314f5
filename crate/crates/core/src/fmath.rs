//! Float math for `no_std` builds.
//!
//! `core` does not provide the transcendental methods of `f64` (and `std`
//! has no `erf` at all), so the crate routes them through [`libm`]. The
//! extension trait keeps call sites reading like ordinary float code.

/// Transcendental `f64` operations backed by `libm`.
// In test builds std is linked by the harness and its inherent methods
// shadow this trait entirely.
#[cfg_attr(test, allow(dead_code))]
pub trait FloatExt {
    fn sqrt(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn log10(self) -> Self;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn floor(self) -> Self;
    fn ceil(self) -> Self;
}

/// Error function. A free function rather than a trait method because `std`
/// has `f64::erf` on the way.
#[inline]
pub fn erf(x: f64) -> f64 {
    libm::erf(x)
}

impl FloatExt for f64 {
    #[inline]
    fn sqrt(self) -> f64 {
        libm::sqrt(self)
    }
    #[inline]
    fn exp(self) -> f64 {
        libm::exp(self)
    }
    #[inline]
    fn ln(self) -> f64 {
        libm::log(self)
    }
    #[inline]
    fn log10(self) -> f64 {
        libm::log10(self)
    }
    #[inline]
    fn sin(self) -> f64 {
        libm::sin(self)
    }
    #[inline]
    fn cos(self) -> f64 {
        libm::cos(self)
    }
    #[inline]
    fn floor(self) -> f64 {
        libm::floor(self)
    }
    #[inline]
    fn ceil(self) -> f64 {
        libm::ceil(self)
    }
}

#[cfg(test)]
mod tests {
    #[allow(unused_imports)]
    use super::{erf, FloatExt};

    #[test]
    fn basic_identities() {
        assert_eq!(4.0f64.sqrt(), 2.0);
        assert_eq!(1.0f64.ln(), 0.0);
        assert_eq!(100.0f64.log10(), 2.0);
        assert!(erf(0.0).abs() < 1e-15);
        assert!((erf(2.0) + erf(-2.0)).abs() < 1e-15);
    }
}
