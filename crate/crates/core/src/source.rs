//! Nadaraya-Watson source estimator.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::data::{Dataset, Role};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::kernel::{squared_distance, Kernel};

/// Below this kernel mass a query is treated as outside the data support.
pub const MIN_DENOMINATOR: f64 = 1e-300;

/// Rule for the source bandwidth `h_S`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum SourceBandwidth {
    /// `n^{-1/(2d+β)}`.
    AlgorithmBox,
    /// `n^{-1/(2β+d)}`, the minimax-optimal order for β-Hölder targets.
    #[default]
    AppendixOptimal,
    /// `n^{-1/3}`, the order used throughout the synthetic experiments.
    ExperimentN13,
    Fixed(f64),
}

impl fmt::Display for SourceBandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SourceBandwidth::AlgorithmBox => f.write_str("algorithm-box"),
            SourceBandwidth::AppendixOptimal => f.write_str("appendix-optimal"),
            SourceBandwidth::ExperimentN13 => f.write_str("experiment-n13"),
            SourceBandwidth::Fixed(h) => write!(f, "fixed:{h:?}"),
        }
    }
}

impl FromStr for SourceBandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "algorithm-box" => Ok(Self::AlgorithmBox),
            "appendix-optimal" => Ok(Self::AppendixOptimal),
            "experiment-n13" => Ok(Self::ExperimentN13),
            other => match other.strip_prefix("fixed:") {
                Some(v) => v
                    .parse::<f64>()
                    .map(Self::Fixed)
                    .map_err(|_| invalid_param(format!("bad fixed bandwidth `{v}`"))),
                None => Err(invalid_param(format!("unknown source bandwidth rule `{other}`"))),
            },
        }
    }
}

pub fn bandwidth_rule_source(n_s: usize, d: usize, beta_s: f64, rule: SourceBandwidth) -> Result<f64> {
    if n_s == 0 || d == 0 {
        return Err(invalid_param("sample size and dimension must be positive"));
    }
    if !(beta_s > 0.0) {
        return Err(invalid_param(format!("smoothness must be positive, got {beta_s}")));
    }
    let n = n_s as f64;
    let d = d as f64;
    let h = match rule {
        SourceBandwidth::AlgorithmBox => n.powf(-1.0 / (2.0 * d + beta_s)),
        SourceBandwidth::AppendixOptimal => n.powf(-1.0 / (2.0 * beta_s + d)),
        SourceBandwidth::ExperimentN13 => n.powf(-1.0 / 3.0),
        SourceBandwidth::Fixed(h) => h,
    };
    if !(h > 0.0) || !h.is_finite() {
        return Err(invalid_param(format!("bandwidth must be positive, got {h}")));
    }
    Ok(h)
}

/// A fitted Nadaraya-Watson regressor. Cloning shares the training data.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceModel {
    data: Arc<Dataset>,
    kernel: Kernel,
    bandwidth: f64,
    beta: f64,
}

/// A prediction together with the zero-mass flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub value: f64,
    /// Every kernel weight vanished; `value` is the nearest neighbour's response.
    pub extrapolated: bool,
}

pub fn nw_fit(data: impl Into<Arc<Dataset>>, kernel: Kernel, bandwidth: f64) -> Result<SourceModel> {
    SourceModel::fit(data, kernel, bandwidth, 1.0)
}

impl SourceModel {
    pub fn fit(data: impl Into<Arc<Dataset>>, kernel: Kernel, bandwidth: f64, beta: f64) -> Result<Self> {
        let data = data.into();
        if data.is_empty() {
            return Err(invalid_input("source dataset is empty"));
        }
        if data.role() != Role::Source {
            return Err(invalid_input(format!("expected a source dataset, got {}", data.role())));
        }
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(invalid_param(format!("bandwidth must be positive, got {bandwidth}")));
        }
        if !(beta > 0.0) {
            return Err(invalid_param(format!("smoothness must be positive, got {beta}")));
        }
        Ok(Self { data, kernel, bandwidth, beta })
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn kernel(&self) -> Kernel {
        self.kernel
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dim(&self) -> usize {
        self.data.dim()
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        self.predict_flagged(x).map(|p| p.value)
    }

    pub fn predict_flagged(&self, x: &[f64]) -> Result<Prediction> {
        if x.len() != self.dim() {
            return Err(invalid_input(format!(
                "query of dimension {} for a model of dimension {}",
                x.len(),
                self.dim()
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    /// Prediction without the dimension check.
    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> Prediction {
        match self.kernel {
            Kernel::Gaussian => self.predict_gaussian(x),
            k => self.predict_direct(k, x),
        }
    }

    // Running log-sum-exp over -|X_i - x|²/(2h²). The ratio is identical to
    // the direct form but cannot underflow to 0/0.
    fn predict_gaussian(&self, x: &[f64]) -> Prediction {
        let scale = -0.5 / (self.bandwidth * self.bandwidth);
        let mut max_log = f64::NEG_INFINITY;
        let mut mass = 0.0;
        let mut weighted = 0.0;
        for (xi, yi) in self.data.iter() {
            let l = scale * squared_distance(xi, x);
            if l > max_log {
                let r = (max_log - l).exp();
                mass = mass * r + 1.0;
                weighted = weighted * r + yi;
                max_log = l;
            } else {
                let w = (l - max_log).exp();
                mass += w;
                weighted += w * yi;
            }
        }
        let ln_denominator = Kernel::Gaussian.ln_at(0.0) + max_log + mass.ln();
        if ln_denominator < MIN_DENOMINATOR.ln() {
            return self.nearest(x);
        }
        Prediction { value: weighted / mass, extrapolated: false }
    }

    fn predict_direct(&self, k: Kernel, x: &[f64]) -> Prediction {
        let inv_h = 1.0 / self.bandwidth;
        let mut mass = 0.0;
        let mut weighted = 0.0;
        for (xi, yi) in self.data.iter() {
            let w = k.at(squared_distance(xi, x).sqrt() * inv_h);
            mass += w;
            weighted += w * yi;
        }
        if mass < MIN_DENOMINATOR {
            return self.nearest(x);
        }
        Prediction { value: weighted / mass, extrapolated: false }
    }

    fn nearest(&self, x: &[f64]) -> Prediction {
        let (mut best, mut best_d) = (0, f64::INFINITY);
        for (i, (xi, _)) in self.data.iter().enumerate() {
            let d = squared_distance(xi, x);
            if d < best_d {
                best = i;
                best_d = d;
            }
        }
        Prediction { value: self.data.y(best), extrapolated: true }
    }
}

pub fn nw_predict(model: &SourceModel, x: &[f64]) -> Result<f64> {
    model.predict(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::LabeledSample;
    use proptest::prelude::*;

    fn source(points: &[(f64, f64)]) -> Dataset {
        let s = points.iter().map(|&(x, y)| LabeledSample::new(vec![x], y)).collect();
        Dataset::new(1, Role::Source, s).unwrap()
    }

    #[test]
    fn bandwidth_rules() {
        let a = bandwidth_rule_source(100, 1, 1.0, SourceBandwidth::AlgorithmBox).unwrap();
        assert!((a - 100f64.powf(-1.0 / 3.0)).abs() < 1e-15);
        assert!((a - 0.2154).abs() < 1e-4);
        let b = bandwidth_rule_source(100, 1, 1.0, SourceBandwidth::AppendixOptimal).unwrap();
        assert!((a - b).abs() < 1e-15);
        let c = bandwidth_rule_source(4096, 2, 1.0, SourceBandwidth::AppendixOptimal).unwrap();
        assert!((c - 0.125).abs() < 1e-15);
        assert_eq!(bandwidth_rule_source(7, 3, 1.0, SourceBandwidth::Fixed(0.3)).unwrap(), 0.3);
        assert!(bandwidth_rule_source(0, 1, 1.0, SourceBandwidth::AppendixOptimal).is_err());
        assert!(bandwidth_rule_source(5, 1, 1.0, SourceBandwidth::Fixed(-1.0)).is_err());
    }

    #[test]
    fn rule_parse_roundtrip() {
        for r in [
            SourceBandwidth::AlgorithmBox,
            SourceBandwidth::AppendixOptimal,
            SourceBandwidth::ExperimentN13,
            SourceBandwidth::Fixed(0.125),
        ] {
            assert_eq!(r.to_string().parse::<SourceBandwidth>().unwrap(), r);
        }
    }

    #[test]
    fn constant_data_predicts_constant() {
        let m = nw_fit(source(&[(0.1, 3.7), (0.4, 3.7), (0.9, 3.7)]), Kernel::Gaussian, 0.2).unwrap();
        for x in [0.0, 0.33, 1.0] {
            assert!((m.predict(&[x]).unwrap() - 3.7).abs() < 1e-14);
        }
    }

    #[test]
    fn single_point_and_midpoint() {
        let m = nw_fit(source(&[(0.3, -2.0)]), Kernel::Epanechnikov, 0.5).unwrap();
        assert_eq!(m.predict(&[0.5]).unwrap(), -2.0);
        let m = nw_fit(source(&[(0.0, 0.0), (1.0, 1.0)]), Kernel::Gaussian, 0.5).unwrap();
        assert!((m.predict(&[0.5]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn zero_mass_falls_back_to_nearest() {
        let m = nw_fit(source(&[(0.0, 1.0), (1.0, 5.0)]), Kernel::Uniform, 0.1).unwrap();
        let p = m.predict_flagged(&[0.7]).unwrap();
        assert!(p.extrapolated);
        assert_eq!(p.value, 5.0);
        let p = m.predict_flagged(&[0.05]).unwrap();
        assert!(!p.extrapolated);
        assert_eq!(p.value, 1.0);
        // tiny Gaussian bandwidth: raw weights underflow
        let m = nw_fit(source(&[(0.0, 1.0), (1.0, 5.0)]), Kernel::Gaussian, 1e-3).unwrap();
        let p = m.predict_flagged(&[0.6]).unwrap();
        assert!(p.extrapolated);
        assert_eq!(p.value, 5.0);
    }

    #[test]
    fn errors() {
        let d = source(&[(0.5, 1.0)]);
        assert!(nw_fit(d.clone().with_role(Role::Target), Kernel::Gaussian, 0.1).is_err());
        assert!(nw_fit(d.clone(), Kernel::Gaussian, 0.0).is_err());
        let empty = Dataset::new(1, Role::Source, vec![]).unwrap();
        assert!(matches!(nw_fit(empty, Kernel::Gaussian, 0.1), Err(Error::InvalidInput(_))));
        let m = nw_fit(d, Kernel::Gaussian, 0.1).unwrap();
        assert!(matches!(m.predict(&[0.1, 0.2]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn interpolation_limit_with_compact_kernel() {
        let d = source(&[(0.2, 1.0), (0.2, 3.0), (0.5, 10.0), (0.8, -4.0)]);
        let m = nw_fit(d, Kernel::Epanechnikov, 1e-6).unwrap();
        assert_eq!(m.predict(&[0.2]).unwrap(), 2.0);
        assert_eq!(m.predict(&[0.5]).unwrap(), 10.0);
    }

    fn random_source() -> impl Strategy<Value = Vec<(f64, f64)>> {
        prop::collection::vec((0.0f64..=1.0, -5.0f64..5.0), 1..40)
    }

    fn any_kernel() -> impl Strategy<Value = Kernel> {
        prop_oneof![Just(Kernel::Gaussian), Just(Kernel::Epanechnikov), Just(Kernel::Uniform)]
    }

    proptest! {
        #[test]
        fn range_containment(pts in random_source(), k in any_kernel(), h in 0.01f64..2.0, q in 0.0f64..=1.0) {
            let lo = pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            let hi = pts.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let m = nw_fit(source(&pts), k, h).unwrap();
            let p = m.predict(&[q]).unwrap();
            let tol = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
            prop_assert!(p >= lo - tol && p <= hi + tol);
        }

        #[test]
        fn affine_equivariance(pts in random_source(), k in any_kernel(), h in 0.05f64..2.0,
                               c in -3.0f64..3.0, s in -3.0f64..3.0, q in 0.0f64..=1.0) {
            let base = nw_fit(source(&pts), k, h).unwrap().predict(&[q]).unwrap();
            let moved: Vec<_> = pts.iter().map(|&(x, y)| (x, c * y + s)).collect();
            let p = nw_fit(source(&moved), k, h).unwrap().predict(&[q]).unwrap();
            prop_assert!((p - (c * base + s)).abs() <= 1e-12 * (1.0 + 5.0 * c.abs() + s.abs()));
        }
    }
}
