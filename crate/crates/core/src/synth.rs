//! Synthetic source/target problems on the unit cube.
//!
//! Covariates are uniform on `[0,1]^d`. The source regression function is
//! `‖x‖²`; the two targets switch between `sin(‖x‖)` and `exp(‖x‖)` across a
//! hyperplane (`target1`) or a sphere of radius 1/2 (`target2`).

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::data::{Dataset, Role};
use crate::error::{invalid_param, Error, Result};
use crate::rng::{RngSeed, Stream};
use crate::tessellation::Tessellation;

pub type RegressionFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

pub fn squared_norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

pub fn target1(x: &[f64]) -> f64 {
    let r = squared_norm(x).sqrt();
    if x[0] >= 0.5 {
        r.sin()
    } else {
        r.exp()
    }
}

pub fn target2(x: &[f64]) -> f64 {
    let r = squared_norm(x).sqrt();
    if r >= 0.5 {
        r.sin()
    } else {
        r.exp()
    }
}

#[derive(Clone)]
pub enum TargetFn {
    Target1,
    Target2,
    Custom { name: String, f: RegressionFn },
}

impl TargetFn {
    pub fn custom(name: impl Into<String>, f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        TargetFn::Custom { name: name.into(), f: Arc::new(f) }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            TargetFn::Target1 => target1(x),
            TargetFn::Target2 => target2(x),
            TargetFn::Custom { f, .. } => f(x),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            TargetFn::Target1 => "target1",
            TargetFn::Target2 => "target2",
            TargetFn::Custom { name, .. } => name,
        }
    }
}

impl fmt::Debug for TargetFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TargetFn {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "target1" => Ok(TargetFn::Target1),
            "target2" => Ok(TargetFn::Target2),
            other => Err(invalid_param(format!("unknown target `{other}`"))),
        }
    }
}

/// How the printed noise level is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseConvention {
    /// The level is the variance: `σ = √level`.
    Variance,
    /// The level is the standard deviation.
    #[default]
    StdDev,
}

impl FromStr for NoiseConvention {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "variance" => Ok(Self::Variance),
            "std-dev" | "stddev" | "sd" => Ok(Self::StdDev),
            other => Err(invalid_param(format!("unknown noise convention `{other}`"))),
        }
    }
}

impl fmt::Display for NoiseConvention {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Variance => "variance",
            Self::StdDev => "std-dev",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Noise {
    pub level: f64,
    pub convention: NoiseConvention,
}

impl Default for Noise {
    fn default() -> Self {
        Self { level: 0.1, convention: NoiseConvention::StdDev }
    }
}

impl Noise {
    pub fn none() -> Self {
        Self { level: 0.0, convention: NoiseConvention::StdDev }
    }

    pub fn std_dev(sigma: f64) -> Self {
        Self { level: sigma, convention: NoiseConvention::StdDev }
    }

    pub fn sigma(&self) -> f64 {
        match self.convention {
            NoiseConvention::Variance => self.level.sqrt(),
            NoiseConvention::StdDev => self.level,
        }
    }

    pub fn variance(&self) -> f64 {
        self.sigma().powi(2)
    }
}

#[derive(Clone)]
pub struct SyntheticSpec {
    pub dim: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub target: TargetFn,
    /// `None` means `‖x‖²`.
    pub source_fn: Option<RegressionFn>,
    pub noise: Noise,
    pub seed: RngSeed,
}

impl fmt::Debug for SyntheticSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SyntheticSpec")
            .field("dim", &self.dim)
            .field("n_source", &self.n_source)
            .field("n_target", &self.n_target)
            .field("target", &self.target)
            .field("source_fn", &self.source_fn.as_ref().map(|_| "custom"))
            .field("noise", &self.noise)
            .field("seed", &self.seed)
            .finish()
    }
}

const SOURCE_TAG: u64 = 0x5;
const TARGET_TAG: u64 = 0x7;

impl SyntheticSpec {
    pub fn new(dim: usize, n_source: usize, n_target: usize, target: TargetFn) -> Self {
        Self { dim, n_source, n_target, target, source_fn: None, noise: Noise::default(), seed: RngSeed::default() }
    }

    pub fn with_noise(self, noise: Noise) -> Self {
        Self { noise, ..self }
    }

    pub fn with_seed(self, seed: RngSeed) -> Self {
        Self { seed, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.n_source == 0 || self.n_target == 0 {
            return Err(invalid_param("dimension and sample sizes must be positive"));
        }
        if !(self.noise.level >= 0.0) {
            return Err(invalid_param(format!("noise level must be nonnegative, got {}", self.noise.level)));
        }
        Ok(())
    }

    pub fn source_value(&self, x: &[f64]) -> f64 {
        match &self.source_fn {
            Some(f) => f(x),
            None => squared_norm(x),
        }
    }

    pub fn target_value(&self, x: &[f64]) -> f64 {
        self.target.eval(x)
    }
}

/// `n` uniform points with responses `f(x) + σZ`.
pub fn sample_regression(
    dim: usize,
    n: usize,
    f: impl Fn(&[f64]) -> f64,
    sigma: f64,
    role: Role,
    rng: &mut Stream,
) -> Dataset {
    let mut xs = Vec::with_capacity(n * dim);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let start = xs.len();
        xs.extend((0..dim).map(|_| rng.random::<f64>()));
        let z: f64 = rng.sample(StandardNormal);
        ys.push(f(&xs[start..]) + sigma * z);
    }
    Dataset::from_columns(dim, role, xs, ys).expect("uniform design lies in the cube")
}

pub fn sample_uniform_points(dim: usize, n: usize, rng: &mut Stream) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect()
}

pub fn gen_source_with(spec: &SyntheticSpec, rng: &mut Stream) -> Dataset {
    sample_regression(spec.dim, spec.n_source, |x| spec.source_value(x), spec.noise.sigma(), Role::Source, rng)
}

pub fn gen_target_with(spec: &SyntheticSpec, rng: &mut Stream) -> Dataset {
    sample_regression(spec.dim, spec.n_target, |x| spec.target_value(x), spec.noise.sigma(), Role::Target, rng)
}

/// Source sample drawn from the spec's own seed.
pub fn gen_source(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    Ok(gen_source_with(spec, &mut spec.seed.child(SOURCE_TAG).stream()))
}

/// Target sample drawn from the spec's own seed.
pub fn gen_target(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    Ok(gen_target_with(spec, &mut spec.seed.child(TARGET_TAG).stream()))
}

/// One piece of a piecewise transfer structure: on its region,
/// `f_T(x) = g(f_S(x))`.
#[derive(Clone)]
pub struct OraclePiece {
    pub region: &'static str,
    pub g: RegressionFn,
}

impl fmt::Debug for OraclePiece {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OraclePiece").field("region", &self.region).finish()
    }
}

/// The two-piece transfer structure of `target1` over the source `‖x‖²`:
/// split at `x₁ = 1/2`, with `g = exp∘√` below and `g = sin∘√` above.
#[derive(Debug, Clone)]
pub struct OracleTransfer {
    pub split_axis: usize,
    pub split_at: f64,
    pub pieces: [OraclePiece; 2],
}

impl OracleTransfer {
    /// Piece index at `x`, using the target's own `x₁ ≥ 1/2` convention.
    pub fn piece_index(&self, x: &[f64]) -> usize {
        usize::from(x[self.split_axis] >= self.split_at)
    }

    /// `g*_{ℓ(x)}(y)`.
    pub fn transfer(&self, x: &[f64], y: f64) -> f64 {
        (self.pieces[self.piece_index(x)].g)(&[y])
    }

    /// The split as a grid tessellation; needs an even resolution.
    pub fn tessellation(&self, dim: usize, resolution: u32) -> Result<Tessellation> {
        if resolution % 2 != 0 {
            return Err(Error::Unsupported(format!(
                "the split x₁ = 1/2 is not on the 1/{resolution} grid"
            )));
        }
        let mut bps = vec![Vec::new(); dim];
        bps[self.split_axis] = vec![resolution / 2];
        Tessellation::grid(dim, resolution, bps)
    }
}

/// Oracle partition and cellwise transfer functions for `target1` with the
/// default source. Since `target1` depends on `x` only through `‖x‖ = √f_S(x)`
/// and the side of the split, the pieces are exact in every dimension.
pub fn oracle_transfer_pieces(spec: &SyntheticSpec) -> Result<OracleTransfer> {
    if spec.source_fn.is_some() {
        return Err(Error::Unsupported("oracle pieces are defined for the ‖x‖² source only".into()));
    }
    match spec.target {
        TargetFn::Target1 => Ok(OracleTransfer {
            split_axis: 0,
            split_at: 0.5,
            pieces: [
                OraclePiece { region: "x1 < 1/2", g: Arc::new(|y: &[f64]| y[0].max(0.0).sqrt().exp()) },
                OraclePiece { region: "x1 >= 1/2", g: Arc::new(|y: &[f64]| y[0].max(0.0).sqrt().sin()) },
            ],
        }),
        TargetFn::Target2 => Err(Error::Unsupported(
            "target2 has a spherical discontinuity with no grid-aligned oracle partition".into(),
        )),
        TargetFn::Custom { .. } => Err(Error::Unsupported("no oracle pieces for custom targets".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn target_reference_values() {
        assert!((target1(&[0.75]) - 0.75f64.sin()).abs() < 1e-15);
        assert!((target1(&[0.75]) - 0.6816).abs() < 1e-4);
        assert!((target1(&[0.25]) - 1.2840).abs() < 1e-4);
        assert_eq!(target2(&[0.0, 0.0]), 1.0);
        assert!((target2(&[0.3, 0.4]) - 0.5f64.sin()).abs() < 1e-15);
    }

    #[test]
    fn noiseless_generation() {
        let spec = SyntheticSpec::new(3, 50, 20, TargetFn::Target1).with_noise(Noise::none());
        let s = gen_source(&spec).unwrap();
        for (x, y) in s.iter() {
            assert_eq!(y, squared_norm(x));
        }
        let t = gen_target(&spec).unwrap();
        assert_eq!(t.role(), Role::Target);
        for (x, y) in t.iter() {
            assert_eq!(y, target1(x));
        }
    }

    #[test]
    fn source_mean_matches_uniform_moment() {
        let spec = SyntheticSpec::new(1, 100_000, 1, TargetFn::Target1).with_noise(Noise::none());
        let s = gen_source(&spec).unwrap();
        assert!((s.mean_response() - 1.0 / 3.0).abs() < 0.01);
    }

    #[test]
    fn deterministic_under_seed() {
        let spec = SyntheticSpec::new(2, 30, 10, TargetFn::Target2).with_seed(RngSeed::new(5, 2));
        assert_eq!(gen_source(&spec).unwrap(), gen_source(&spec).unwrap());
        assert_eq!(gen_target(&spec).unwrap(), gen_target(&spec).unwrap());
        let other = spec.clone().with_seed(RngSeed::new(5, 3));
        assert_ne!(gen_source(&spec).unwrap(), gen_source(&other).unwrap());
    }

    #[test]
    fn noise_conventions() {
        assert_eq!(Noise::default().sigma(), 0.1);
        let var = Noise { level: 0.1, convention: NoiseConvention::Variance };
        assert!((var.sigma() - 0.1f64.sqrt()).abs() < 1e-15);
        let sd = Noise::default();
        let spec = SyntheticSpec::new(1, 1, 1, TargetFn::Target1).with_noise(Noise { level: -1.0, ..sd });
        assert!(gen_source(&spec).is_err());
    }

    #[test]
    fn transfer_identity_on_grid() {
        for d in [1usize, 3] {
            let spec = SyntheticSpec::new(d, 1, 1, TargetFn::Target1);
            let oracle = oracle_transfer_pieces(&spec).unwrap();
            for i in 0..=1000 {
                let t = i as f64 / 1000.0;
                let x: Vec<f64> = (0..d).map(|j| if j == 0 { t } else { (t * 7.0 + j as f64 * 0.3) % 1.0 }).collect();
                let lhs = target1(&x);
                let rhs = oracle.transfer(&x, squared_norm(&x));
                assert!((lhs - rhs).abs() < 1e-12, "x = {x:?}");
            }
        }
    }

    #[test]
    fn oracle_partition() {
        let spec = SyntheticSpec::new(2, 1, 1, TargetFn::Target1);
        let o = oracle_transfer_pieces(&spec).unwrap();
        let t = o.tessellation(2, 20).unwrap();
        assert_eq!(t.breakpoints(), &[vec![10], vec![]]);
        assert!(o.tessellation(2, 19).is_err());
        let spec2 = SyntheticSpec::new(2, 1, 1, TargetFn::Target2);
        assert!(matches!(oracle_transfer_pieces(&spec2), Err(Error::Unsupported(_))));
    }
}
