//! Smoothing kernels.
//!
//! Kernels are evaluated without the `h^{-d}` bandwidth normalization. Every
//! consumer in this crate forms ratios or weighted argmins, where that factor
//! cancels, and dropping it avoids underflow at small bandwidths in high
//! dimension.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{invalid_param, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Kernel {
    /// `(2π)^{-1/2} exp(-u²/2)`
    #[default]
    Gaussian,
    /// `0.75 (1 - u²)` on `|u| ≤ 1`
    Epanechnikov,
    /// `1/2` on `|u| ≤ 1`
    Uniform,
}

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

impl Kernel {
    pub const ALL: [Kernel; 3] = [Kernel::Gaussian, Kernel::Epanechnikov, Kernel::Uniform];

    /// `K(u)` at a scaled scalar distance.
    #[inline]
    pub fn at(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI * (-0.5 * u * u).exp(),
            Kernel::Epanechnikov => {
                if u.abs() <= 1.0 {
                    0.75 * (1.0 - u * u)
                } else {
                    0.0
                }
            }
            Kernel::Uniform => {
                if u.abs() <= 1.0 {
                    0.5
                } else {
                    0.0
                }
            }
        }
    }

    /// `ln K(u)`, `-inf` outside the support.
    #[inline]
    pub fn ln_at(self, u: f64) -> f64 {
        match self {
            Kernel::Gaussian => INV_SQRT_2PI.ln() - 0.5 * u * u,
            _ => self.at(u).ln(),
        }
    }

    pub fn is_compact(self) -> bool {
        !matches!(self, Kernel::Gaussian)
    }

    pub fn name(self) -> &'static str {
        match self {
            Kernel::Gaussian => "gaussian",
            Kernel::Epanechnikov => "epanechnikov",
            Kernel::Uniform => "uniform",
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Kernel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(Kernel::Gaussian),
            "epanechnikov" => Ok(Kernel::Epanechnikov),
            "uniform" | "box" => Ok(Kernel::Uniform),
            other => Err(invalid_param(format!("unknown kernel `{other}`"))),
        }
    }
}

/// Argument of [`kernel_eval`]: a scalar offset or a vector offset (reduced
/// by its Euclidean norm).
#[derive(Debug, Clone, Copy)]
pub enum KernelArg<'a> {
    Scalar(f64),
    Vector(&'a [f64]),
}

impl From<f64> for KernelArg<'_> {
    fn from(u: f64) -> Self {
        KernelArg::Scalar(u)
    }
}

impl<'a> From<&'a [f64]> for KernelArg<'a> {
    fn from(u: &'a [f64]) -> Self {
        KernelArg::Vector(u)
    }
}

/// `K(u / h)`.
pub fn kernel_eval<'a>(k: Kernel, u: impl Into<KernelArg<'a>>, bandwidth: f64) -> Result<f64> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(invalid_param(format!("bandwidth must be positive, got {bandwidth}")));
    }
    let r = match u.into() {
        KernelArg::Scalar(v) => v.abs(),
        KernelArg::Vector(v) => euclidean_norm(v),
    };
    Ok(k.at(r / bandwidth))
}

#[inline]
pub(crate) fn euclidean_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

#[inline]
pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[inline]
pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    squared_distance(a, b).sqrt()
}

/// Standard normal density at the origin, `(2π)^{-1/2}`.
pub fn gaussian_peak() -> f64 {
    1.0 / (2.0 * PI).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_values() {
        let g = kernel_eval(Kernel::Gaussian, 0.0, 1.0).unwrap();
        assert!((g - 0.398_94).abs() < 1e-5);
        assert!((g - gaussian_peak()).abs() < 1e-15);
        assert_eq!(kernel_eval(Kernel::Uniform, 1.5, 1.0).unwrap(), 0.0);
        assert!((kernel_eval(Kernel::Epanechnikov, 0.5, 1.0).unwrap() - 0.5625).abs() < 1e-15);
    }

    #[test]
    fn vector_argument_uses_norm() {
        let v = [0.3, 0.4];
        let a = kernel_eval(Kernel::Epanechnikov, &v[..], 1.0).unwrap();
        let b = kernel_eval(Kernel::Epanechnikov, 0.5, 1.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_bandwidth() {
        for h in [0.0, -1.0, f64::NAN] {
            assert!(matches!(
                kernel_eval(Kernel::Gaussian, 0.1, h),
                Err(Error::InvalidParameter(_))
            ));
        }
    }

    #[test]
    fn parse_roundtrip() {
        for k in Kernel::ALL {
            assert_eq!(k.name().parse::<Kernel>().unwrap(), k);
        }
        assert!("cosine".parse::<Kernel>().is_err());
    }

    fn any_kernel() -> impl Strategy<Value = Kernel> {
        prop_oneof![Just(Kernel::Gaussian), Just(Kernel::Epanechnikov), Just(Kernel::Uniform)]
    }

    proptest! {
        #[test]
        fn symmetric_and_nonnegative(k in any_kernel(), u in -5.0f64..5.0, h in 0.01f64..4.0) {
            let p = kernel_eval(k, u, h).unwrap();
            let m = kernel_eval(k, -u, h).unwrap();
            prop_assert!(p >= 0.0);
            prop_assert_eq!(p, m);
        }

        #[test]
        fn scaling_identity(k in any_kernel(), u in -5.0f64..5.0, h in 0.01f64..4.0) {
            let a = kernel_eval(k, u, h).unwrap();
            let b = kernel_eval(k, u / h, 1.0).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }

        #[test]
        fn compact_support(u in -5.0f64..5.0, h in 0.01f64..4.0) {
            for k in [Kernel::Epanechnikov, Kernel::Uniform] {
                if u.abs() > h * (1.0 + 1e-12) {
                    prop_assert_eq!(kernel_eval(k, u, h).unwrap(), 0.0);
                }
            }
        }

        #[test]
        fn log_kernel_consistent(k in any_kernel(), u in -3.0f64..3.0) {
            let v = k.at(u);
            if v > 0.0 {
                prop_assert!((k.ln_at(u).exp() - v).abs() < 1e-14);
            } else {
                prop_assert_eq!(k.ln_at(u), f64::NEG_INFINITY);
            }
        }
    }
}
