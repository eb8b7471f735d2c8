//! Monte Carlo risk measurement, the error-reduction experiment, the
//! three-term excess-risk decomposition and rate probes.

use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::{Dataset, Role};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::kernel::distance;
use crate::pipeline::{run_tl2, PipelineConfig};
use crate::rng::{RngSeed, Stream};
use crate::source::{bandwidth_rule_source, SourceBandwidth, SourceModel};
use crate::synth::{
    gen_source_with, gen_target_with, sample_regression, sample_uniform_points, squared_norm, Noise,
    SyntheticSpec, TargetFn,
};
use crate::tessellation::Tessellation;
use crate::transfer::{weighted_affine_fit, CellFit, FitConfig, TransferFitter};

/// A Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

impl McEstimate {
    pub fn from_samples(v: &[f64]) -> Self {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        if v.len() < 2 {
            return Self { mean, std_error: 0.0 };
        }
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        Self { mean, std_error: (var / n).sqrt() }
    }
}

/// `E[(predictor(X) - truth(X))²]` for `X` uniform on `[0,1]^d`.
pub fn mse_against_truth(
    predictor: impl Fn(&[f64]) -> f64,
    truth: impl Fn(&[f64]) -> f64,
    dim: usize,
    n_eval: usize,
    rng: &mut Stream,
) -> Result<McEstimate> {
    if n_eval == 0 {
        return Err(invalid_param("need at least one evaluation point"));
    }
    let pts = sample_uniform_points(dim, n_eval, rng);
    let sq: Vec<f64> = pts.iter().map(|x| (predictor(x) - truth(x)).powi(2)).collect();
    Ok(McEstimate::from_samples(&sq))
}

/// Plain median (mean of the two middle values for even counts).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Least-squares slope of `ln y` on `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

pub fn e_red(mse_nw: f64, mse_tl2: f64) -> f64 {
    (mse_nw - mse_tl2) / mse_nw
}

/// Data for an error-reduction experiment.
#[derive(Debug, Clone)]
pub enum ExperimentData {
    /// Fresh synthetic samples per replication; risk against the true target.
    Synthetic(SyntheticSpec),
    /// Fixed data; each replication subsamples `n_train` target rows and
    /// scores on the remaining ones.
    Ingested { source: Dataset, target: Dataset, n_train: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub mse_nw: f64,
    pub mse_tl2: f64,
    pub e_red: f64,
    pub cells: u64,
    pub breakpoints: usize,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub replications: Vec<ReplicationResult>,
    pub median_mse_nw: f64,
    pub median_mse_tl2: f64,
    pub median_e_red: f64,
}

impl ExperimentResult {
    fn from_replications(replications: Vec<ReplicationResult>) -> Self {
        let col = |f: fn(&ReplicationResult) -> f64| median(&replications.iter().map(f).collect::<Vec<_>>());
        Self {
            median_mse_nw: col(|r| r.mse_nw),
            median_mse_tl2: col(|r| r.mse_tl2),
            median_e_red: col(|r| r.e_red),
            replications,
        }
    }

    /// Comma-separated table, one row per replication.
    pub fn table(&self) -> String {
        let mut out = String::from("replication,mse_nw,mse_tl2,e_red,cells,breakpoints,evaluated\n");
        for r in &self.replications {
            let _ = writeln!(
                out,
                "{},{:?},{:?},{:?},{},{},{}",
                r.replication, r.mse_nw, r.mse_tl2, r.e_red, r.cells, r.breakpoints, r.evaluated
            );
        }
        out
    }
}

/// Evaluation points per replication for synthetic experiments.
pub const DEFAULT_EVAL_POINTS: usize = 2000;

/// Median error reduction of the transfer estimator over the target-only
/// Nadaraya-Watson baseline across `replications` seeded replications.
pub fn error_reduction(
    data: &ExperimentData,
    cfg: &PipelineConfig,
    replications: usize,
    n_eval: usize,
    seed: RngSeed,
) -> Result<ExperimentResult> {
    if replications == 0 {
        return Err(invalid_param("need at least one replication"));
    }
    match data {
        ExperimentData::Synthetic(spec) => {
            spec.validate()?;
            if spec.n_target < 4 {
                return Err(invalid_input("target sample too small to split"));
            }
        }
        ExperimentData::Ingested { target, n_train, .. } => {
            if *n_train < 4 || *n_train >= target.len() {
                return Err(invalid_input(format!(
                    "target subsample of {n_train} from {} rows leaves no usable split",
                    target.len()
                )));
            }
        }
    }
    let reps = (0..replications)
        .into_par_iter()
        .map(|r| replicate(data, cfg, n_eval, seed.with_stream(r as u64), r))
        .collect::<Result<Vec<_>>>()?;
    Ok(ExperimentResult::from_replications(reps))
}

fn replicate(
    data: &ExperimentData,
    cfg: &PipelineConfig,
    n_eval: usize,
    seed: RngSeed,
    replication: usize,
) -> Result<ReplicationResult> {
    let (source, target, eval_x, eval_y): (Dataset, Dataset, Vec<Vec<f64>>, Vec<f64>) = match data {
        ExperimentData::Synthetic(spec) => {
            let source = gen_source_with(spec, &mut seed.child(10).stream());
            let target = gen_target_with(spec, &mut seed.child(11).stream());
            let pts = sample_uniform_points(spec.dim, n_eval, &mut seed.child(12).stream());
            let truth = pts.iter().map(|x| spec.target_value(x)).collect();
            (source, target, pts, truth)
        }
        ExperimentData::Ingested { source, target, n_train } => {
            let mut order: Vec<usize> = (0..target.len()).collect();
            order.shuffle(&mut seed.child(13).stream());
            let train = target.subset(&order[..*n_train], Role::Target);
            let held = target.subset(&order[*n_train..], Role::Target);
            let pts = held.iter().map(|(x, _)| x.to_vec()).collect();
            (source.clone(), train, pts, held.ys().to_vec())
        }
    };

    let baseline = cfg.fit_baseline(&target)?;
    let mse_nw = mean_sq(eval_x.iter().map(|x| baseline.predict_unchecked(x).value), &eval_y);
    let run = run_tl2(source, &target, cfg, seed.child(14))?;
    let mse_tl2 = mean_sq(run.predict_many(&eval_x)?.into_iter(), &eval_y);
    let chosen = run.tessellation();
    Ok(ReplicationResult {
        replication,
        mse_nw,
        mse_tl2,
        e_red: e_red(mse_nw, mse_tl2),
        cells: chosen.n_cells(),
        breakpoints: chosen.total_breakpoints(),
        evaluated: run.report.candidates.len(),
    })
}

fn mean_sq(pred: impl Iterator<Item = f64>, truth: &[f64]) -> f64 {
    let s: f64 = pred.zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    s / truth.len() as f64
}

/// Cellwise fits on `tess` with an arbitrary score function in the role of
/// the source estimate.
pub fn fit_cells_with_scores(
    tess: &Tessellation,
    data: &Dataset,
    score: impl Fn(&[f64]) -> f64,
    cfg: &FitConfig,
) -> Vec<CellFit> {
    let scores: Vec<f64> = data.iter().map(|(x, _)| score(x)).collect();
    let assignment = tess.assign(data);
    let global_mean = data.mean_response();
    tess.cells()
        .map(|cell| {
            let y_center = score(&cell.center);
            let pts = data
                .iter()
                .enumerate()
                .filter(|(i, _)| !cfg.restrict_to_cell || assignment[*i] == cell.index)
                .map(|(i, (x, y))| {
                    let z = scores[i] - y_center;
                    (cfg.weight(distance(x, &cell.center), z), z, y)
                });
            weighted_affine_fit(pts, y_center, global_mean, cfg)
        })
        .collect()
}

/// The three error sources of a transfer fit on one tessellation, as
/// squared `L²(uniform)` distances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionReport {
    /// Target vs. population cellwise linearization.
    pub approx: McEstimate,
    /// Population linearization vs. the fit with exact source scores.
    pub fit: McEstimate,
    /// Exact-score fit vs. the plug-in estimator.
    pub plug: McEstimate,
    /// `2 (approx + fit + plug)`.
    pub total_bound: f64,
    /// Target vs. the plug-in estimator.
    pub excess: McEstimate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecompositionSettings {
    /// Noiseless sample used for the population coefficients.
    pub n_oracle: usize,
    /// Evaluation points for the distances.
    pub n_mc: usize,
}

impl Default for DecompositionSettings {
    fn default() -> Self {
        Self { n_oracle: 100_000, n_mc: 20_000 }
    }
}

/// Split the excess risk of the transfer fit on `tess` into approximation,
/// fitting and plug-in parts.
pub fn decompose_risk(
    tess: &Tessellation,
    spec: &SyntheticSpec,
    train: &Dataset,
    source: &SourceModel,
    cfg: &FitConfig,
    settings: DecompositionSettings,
    seed: RngSeed,
) -> Result<DecompositionReport> {
    if train.dim() != spec.dim || tess.dim() != spec.dim {
        return Err(invalid_input("decomposition inputs disagree on dimension"));
    }
    let truth_source = |x: &[f64]| spec.source_value(x);
    let oracle = sample_regression(
        spec.dim,
        settings.n_oracle,
        |x| spec.target_value(x),
        0.0,
        Role::TargetTrain,
        &mut seed.child(1).stream(),
    );
    let population = fit_cells_with_scores(tess, &oracle, truth_source, cfg);
    let exact_score = fit_cells_with_scores(tess, train, truth_source, cfg);
    let plug_in = TransferFitter::new(train, source, *cfg)?.fit(tess)?;

    let pts = sample_uniform_points(spec.dim, settings.n_mc, &mut seed.child(2).stream());
    let mut approx = Vec::with_capacity(pts.len());
    let mut fit = Vec::with_capacity(pts.len());
    let mut plug = Vec::with_capacity(pts.len());
    let mut excess = Vec::with_capacity(pts.len());
    for x in &pts {
        let l = tess.locate_unchecked(x);
        let s = spec.source_value(x);
        let f_t = spec.target_value(x);
        let g_pop = population[l].eval(s);
        let g_exact = exact_score[l].eval(s);
        let estimate = plug_in.fits()[l].eval(source.predict_unchecked(x).value);
        approx.push((f_t - g_pop).powi(2));
        fit.push((g_pop - g_exact).powi(2));
        plug.push((g_exact - estimate).powi(2));
        excess.push((f_t - estimate).powi(2));
    }
    let approx = McEstimate::from_samples(&approx);
    let fit = McEstimate::from_samples(&fit);
    let plug = McEstimate::from_samples(&plug);
    Ok(DecompositionReport {
        approx,
        fit,
        plug,
        total_bound: 2.0 * (approx.mean + fit.mean + plug.mean),
        excess: McEstimate::from_samples(&excess),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateAxis {
    /// Risk vs. target training size on a well-specified two-cell problem
    /// with exact source scores.
    TargetParametric,
    /// Risk vs. source size with a large noiseless target sample.
    SourcePlugIn,
    /// Approximation error vs. number of uniform cells, noiseless.
    CellBias,
}

impl RateAxis {
    pub fn name(self) -> &'static str {
        match self {
            RateAxis::TargetParametric => "n_t-parametric",
            RateAxis::SourcePlugIn => "n_s-plugin",
            RateAxis::CellBias => "l-bias",
        }
    }
}

impl std::str::FromStr for RateAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n_t-parametric" | "nt" => Ok(RateAxis::TargetParametric),
            "n_s-plugin" | "ns" => Ok(RateAxis::SourcePlugIn),
            "l-bias" | "l" => Ok(RateAxis::CellBias),
            other => Err(invalid_param(format!("unknown rate axis `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateProbeResult {
    pub axis: RateAxis,
    pub sizes: Vec<usize>,
    /// Median risk per size.
    pub medians: Vec<f64>,
    pub slope: f64,
}

impl RateProbeResult {
    pub fn table(&self) -> String {
        let mut out = String::from("size,median_risk\n");
        for (n, m) in self.sizes.iter().zip(&self.medians) {
            let _ = writeln!(out, "{n},{m:?}");
        }
        out
    }
}

/// Well-specified two-cell instance: affine in `‖x‖²` on each side of
/// `x₁ = 1/2`.
pub fn piecewise_affine_target() -> TargetFn {
    TargetFn::custom("piecewise-affine", |x: &[f64]| {
        let s = squared_norm(x);
        if x[0] >= 0.5 {
            3.0 - s
        } else {
            1.0 + 2.0 * s
        }
    })
}

/// Smooth target `sin(2π‖x‖²)`, a smooth function of the source score.
pub fn smooth_score_target() -> TargetFn {
    TargetFn::custom("smooth", |x: &[f64]| (2.0 * std::f64::consts::PI * squared_norm(x)).sin())
}

/// Fixed wide windows: every point of a cell gets comparable weight, so each
/// cell fit is close to an ordinary least-squares line.
fn wide_windows() -> FitConfig {
    FitConfig::default().with_bandwidths(1.0, 1.0)
}

/// Run the controlled experiment for `axis` over `sizes`.
pub fn rate_probe(axis: RateAxis, sizes: &[usize], replications: usize, seed: RngSeed) -> Result<RateProbeResult> {
    if sizes.len() < 3 {
        return Err(invalid_param("a rate probe needs at least three sizes"));
    }
    if replications == 0 || sizes.contains(&0) {
        return Err(invalid_param("sizes and replication count must be positive"));
    }
    let medians = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let risks = (0..replications)
                .into_par_iter()
                .map(|r| probe_once(axis, n, seed.child(k as u64).with_stream(r as u64)))
                .collect::<Result<Vec<_>>>()?;
            Ok(median(&risks))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    Ok(RateProbeResult { axis, sizes: sizes.to_vec(), slope: log_log_slope(&xs, &medians), medians })
}

fn probe_once(axis: RateAxis, n: usize, seed: RngSeed) -> Result<f64> {
    let split = Tessellation::grid(1, 2, vec![vec![1]])?;
    let target = piecewise_affine_target();
    match axis {
        RateAxis::TargetParametric => {
            let train = sample_regression(1, n, |x| target.eval(x), 0.1, Role::TargetTrain, &mut seed.stream());
            let fits = fit_cells_with_scores(&split, &train, squared_norm, &wide_windows());
            let est = mse_against_truth(
                |x| fits[split.locate_unchecked(x)].eval(squared_norm(x)),
                |x| target.eval(x),
                1,
                4000,
                &mut seed.child(1).stream(),
            )?;
            Ok(est.mean)
        }
        RateAxis::SourcePlugIn => {
            let spec = SyntheticSpec::new(1, n, 2000, target.clone()).with_noise(Noise::default());
            let source_data = gen_source_with(&spec, &mut seed.stream());
            let h = bandwidth_rule_source(n, 1, 1.0, SourceBandwidth::AppendixOptimal)?;
            let source = SourceModel::fit(source_data, crate::kernel::Kernel::Gaussian, h, 1.0)?;
            let train = sample_regression(1, 2000, |x| target.eval(x), 0.0, Role::TargetTrain, &mut seed.child(1).stream());
            let model = TransferFitter::new(&train, &source, wide_windows())?.fit(&split)?;
            let est = mse_against_truth(
                |x| model.predict(x).expect("query in the cube"),
                |x| target.eval(x),
                1,
                4000,
                &mut seed.child(2).stream(),
            )?;
            Ok(est.mean)
        }
        RateAxis::CellBias => {
            let smooth = smooth_score_target();
            let grid = Tessellation::grid(1, n as u32, vec![(1..n as u32).collect()])?;
            let oracle = sample_regression(1, 20_000, |x| smooth.eval(x), 0.0, Role::TargetTrain, &mut seed.stream());
            let fits = fit_cells_with_scores(&grid, &oracle, squared_norm, &wide_windows());
            let est = mse_against_truth(
                |x| fits[grid.locate_unchecked(x)].eval(squared_norm(x)),
                |x| smooth.eval(x),
                1,
                20_000,
                &mut seed.child(1).stream(),
            )?;
            Ok(est.mean)
        }
    }
}

/// Median Monte Carlo MSE of the source estimator at the minimax bandwidth
/// for each source size, with the fitted log-log slope.
pub fn nw_rate(
    sizes: &[usize],
    replications: usize,
    noise: Noise,
    seed: RngSeed,
) -> Result<RateProbeResult> {
    if sizes.len() < 3 || replications == 0 {
        return Err(invalid_param("need at least three sizes and one replication"));
    }
    let medians = sizes
        .iter()
        .enumerate()
        .map(|(k, &n)| {
            let risks = (0..replications)
                .into_par_iter()
                .map(|r| {
                    let s = seed.child(100 + k as u64).with_stream(r as u64);
                    let data = sample_regression(1, n, squared_norm, noise.sigma(), Role::Source, &mut s.stream());
                    let h = bandwidth_rule_source(n, 1, 1.0, SourceBandwidth::AppendixOptimal)?;
                    let model = SourceModel::fit(data, crate::kernel::Kernel::Gaussian, h, 1.0)?;
                    let est = mse_against_truth(
                        |x| model.predict_unchecked(x).value,
                        squared_norm,
                        1,
                        2000,
                        &mut s.child(1).stream(),
                    )?;
                    Ok(est.mean)
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(median(&risks))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = sizes.iter().map(|&n| n as f64).collect();
    Ok(RateProbeResult {
        axis: RateAxis::SourcePlugIn,
        sizes: sizes.to_vec(),
        slope: log_log_slope(&xs, &medians),
        medians,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mse_reference_cases() {
        let mut rng = RngSeed::new(1, 0).stream();
        let z = mse_against_truth(squared_norm, squared_norm, 2, 100, &mut rng).unwrap();
        assert_eq!(z.mean, 0.0);
        let one = mse_against_truth(|x| squared_norm(x) + 1.0, squared_norm, 2, 100, &mut rng).unwrap();
        assert!((one.mean - 1.0).abs() < 1e-12);
        let e = mse_against_truth(|_| 0.0, squared_norm, 1, 20_000, &mut rng).unwrap();
        assert!((e.mean - 0.2).abs() < 3.0 * e.std_error, "{e:?}");
        assert!(mse_against_truth(|_| 0.0, squared_norm, 1, 0, &mut rng).is_err());
    }

    #[test]
    fn e_red_arithmetic() {
        assert!((e_red(1.0, 0.74) - 0.26).abs() < 1e-15);
        assert_eq!(e_red(0.3, 0.3), 0.0);
        assert!((e_red(2.0, 2.52) + 0.26).abs() < 1e-15);
    }

    #[test]
    fn medians_and_slopes() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        let xs = [10.0, 100.0, 1000.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 5.0 * x.powf(-0.7)).collect();
        assert!((log_log_slope(&xs, &ys) + 0.7).abs() < 1e-12);
    }

    #[test]
    fn rejects_degenerate_experiments() {
        let spec = SyntheticSpec::new(1, 10, 3, TargetFn::Target1);
        let cfg = PipelineConfig::default();
        let data = ExperimentData::Synthetic(spec);
        assert!(error_reduction(&data, &cfg, 1, 10, RngSeed::default()).is_err());
        assert!(rate_probe(RateAxis::CellBias, &[2, 4], 1, RngSeed::default()).is_err());
    }
}
