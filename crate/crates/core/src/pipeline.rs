//! End-to-end estimator: source fit, target split, tessellation search and
//! the final cellwise transfer model.

use crate::data::{split_target, Dataset, Role};
use crate::error::{invalid_input, Result};
use crate::kernel::Kernel;
use crate::rng::RngSeed;
use crate::selection::{anneal_select, AnnealSchedule, SelectionMethod, SelectionReport, TessellationSpace};
use crate::source::{bandwidth_rule_source, SourceBandwidth, SourceModel};
use crate::tessellation::{AdmissibilityConstants, Tessellation};
use crate::transfer::{bandwidth_rule_transfer, FitConfig, TransferBandwidth, TransferFitter, TransferModel};

/// Which sample size feeds the transfer bandwidth rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BandwidthSample {
    /// The full target sample, `n_T`.
    #[default]
    Target,
    /// The training half, `n_{T₁}`.
    TargetTrain,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub source_kernel: Kernel,
    pub source_bandwidth: SourceBandwidth,
    pub beta_s: f64,
    /// Kernels and numerical thresholds; `h`, `h̄` are overwritten by the rule.
    pub fit: FitConfig,
    pub transfer_bandwidth: TransferBandwidth,
    pub bandwidth_sample: BandwidthSample,
    /// Grid denominator `m`; `None` uses the target sample size.
    pub resolution: Option<u32>,
    /// Cell cap `L_max`; `None` uses `m^d`.
    pub max_cells: Option<u64>,
    /// Minimum training points per cell for annealing proposals.
    pub min_cell_count: usize,
    pub schedule: AnnealSchedule,
    pub method: SelectionMethod,
    pub constants: AdmissibilityConstants,
    /// Target-only Nadaraya-Watson baseline.
    pub baseline_kernel: Kernel,
    pub baseline_bandwidth: SourceBandwidth,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            source_kernel: Kernel::Gaussian,
            source_bandwidth: SourceBandwidth::AlgorithmBox,
            beta_s: 1.0,
            fit: FitConfig::default(),
            transfer_bandwidth: TransferBandwidth::ExperimentN13,
            bandwidth_sample: BandwidthSample::Target,
            resolution: None,
            max_cells: None,
            min_cell_count: 3,
            schedule: AnnealSchedule::default(),
            method: SelectionMethod::Erm,
            constants: AdmissibilityConstants::default(),
            baseline_kernel: Kernel::Gaussian,
            baseline_bandwidth: SourceBandwidth::ExperimentN13,
        }
    }
}

impl PipelineConfig {
    pub fn space(&self, dim: usize, n_target: usize) -> TessellationSpace {
        let m = self.resolution.unwrap_or(n_target as u32).max(1);
        let mut space = TessellationSpace::full(dim, m);
        space.min_cell_count = self.min_cell_count;
        if let Some(cap) = self.max_cells {
            space.max_cells = cap;
        }
        space
    }

    /// Local regression settings with bandwidths for this sample.
    pub fn fit_config(&self, dim: usize, n_target: usize) -> Result<FitConfig> {
        let n = match self.bandwidth_sample {
            BandwidthSample::Target => n_target,
            BandwidthSample::TargetTrain => n_target / 2,
        };
        let (h, h_bar) = bandwidth_rule_transfer(n.max(1), dim, self.transfer_bandwidth)?;
        Ok(self.fit.with_bandwidths(h, h_bar))
    }

    pub fn fit_source(&self, source: Dataset) -> Result<SourceModel> {
        let h = bandwidth_rule_source(source.len(), source.dim(), self.beta_s, self.source_bandwidth)?;
        SourceModel::fit(source, self.source_kernel, h, self.beta_s)
    }

    /// Nadaraya-Watson fit of the target sample alone.
    pub fn fit_baseline(&self, target: &Dataset) -> Result<SourceModel> {
        let h = bandwidth_rule_source(target.len(), target.dim(), self.beta_s, self.baseline_bandwidth)?;
        SourceModel::fit(target.clone().with_role(Role::Source), self.baseline_kernel, h, self.beta_s)
    }
}

/// Everything produced by one run of the estimator.
#[derive(Debug, Clone)]
pub struct Tl2Run {
    pub source: SourceModel,
    pub train: Dataset,
    pub validate: Dataset,
    pub fit: FitConfig,
    pub report: SelectionReport,
}

impl Tl2Run {
    pub fn tessellation(&self) -> &Tessellation {
        self.report.chosen_tessellation()
    }

    pub fn fitter(&self) -> Result<TransferFitter<'_>> {
        TransferFitter::new(&self.train, &self.source, self.fit)
    }

    /// Full model on the chosen tessellation.
    pub fn model(&self) -> Result<TransferModel> {
        self.fitter()?.fit(self.tessellation())
    }

    /// Predictions at `points`, fitting only the cells they need.
    pub fn predict_many(&self, points: &[Vec<f64>]) -> Result<Vec<f64>> {
        let fitter = self.fitter()?;
        let sparse = fitter.fit_sparse(self.tessellation(), points.iter().map(Vec::as_slice))?;
        points
            .iter()
            .map(|x| {
                if x.len() != self.source.dim() {
                    return Err(invalid_input("query dimension mismatch"));
                }
                Ok(sparse.predict_with_score(x, self.source.predict_unchecked(x).value))
            })
            .collect()
    }
}

/// Fit the source, split the target, and select a tessellation by annealing.
pub fn run_tl2(source: Dataset, target: &Dataset, cfg: &PipelineConfig, seed: RngSeed) -> Result<Tl2Run> {
    if source.dim() != target.dim() {
        return Err(invalid_input("source and target dimensions differ"));
    }
    let source = cfg.fit_source(source)?;
    let (train, validate) = split_target(target, &mut seed.child(1).stream())?;
    let fit = cfg.fit_config(target.dim(), target.len())?;
    let report = {
        let fitter = TransferFitter::new(&train, &source, fit)?;
        anneal_select(
            cfg.space(target.dim(), target.len()),
            &fitter,
            &validate,
            &cfg.schedule,
            cfg.method,
            cfg.constants,
            seed.child(2),
        )?
    };
    Ok(Tl2Run { source, train, validate, fit, report })
}
