//! Run configuration: a TOML file, `--set key=value` overrides, and defaults.
//!
//! Every field has a default, so an empty file runs the Target-1, `d = 1`
//! experiment with `n_S = 100`, `n_T = 20` and 100 replications.

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use tl2_core::pipeline::BandwidthSample;
use tl2_core::prelude::*;

use crate::error::{CliError, CliResult};

/// Serialize through `Display`, deserialize through `FromStr`.
mod text {
    use super::*;
    use serde::{de::Error, Deserializer, Serializer};

    pub fn serialize<T: Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(v)
    }

    pub fn deserialize<'de, T, D>(d: D) -> std::result::Result<T, D::Error>
    where
        T: FromStr,
        T::Err: Display,
        D: Deserializer<'de>,
    {
        let s = String::deserialize(d)?;
        s.parse().map_err(D::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed; every command derives its streams from it.
    pub seed: u64,
    pub output: OutputConfig,
    pub data: DataConfig,
    pub synth: SynthConfig,
    pub source: SourceConfig,
    pub transfer: TransferConfig,
    pub selection: SelectionConfig,
    pub admissibility: AdmissibilityConfig,
    pub baseline: BaselineConfig,
    pub simulate: SimulateConfig,
    pub fit: FitCommandConfig,
    pub probe: ProbeConfig,
    pub ingest: IngestConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            output: OutputConfig::default(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
            source: SourceConfig::default(),
            transfer: TransferConfig::default(),
            selection: SelectionConfig::default(),
            admissibility: AdmissibilityConfig::default(),
            baseline: BaselineConfig::default(),
            simulate: SimulateConfig::default(),
            fit: FitCommandConfig::default(),
            probe: ProbeConfig::default(),
            ingest: IngestConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory receiving every report and table.
    pub dir: PathBuf,
    /// Write the annealing trace table.
    pub trace: bool,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self { dir: PathBuf::from("tl2-out"), trace: true }
    }
}

/// Delimited data files. When `source` or `target` is empty the synthetic
/// generator in `[synth]` supplies that sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub source: Option<PathBuf>,
    pub target: Option<PathBuf>,
    /// Points to predict at (`fit`, `select`); a response column, if
    /// present, is used to report the prediction MSE.
    pub predict: Option<PathBuf>,
    /// Name of the response column; every other column is a feature.
    pub response: String,
    /// Single-byte field delimiter.
    pub delimiter: char,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { source: None, target: None, predict: None, response: "y".into(), delimiter: ',' }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    /// `target1` or `target2`.
    pub target: String,
    pub dim: usize,
    pub n_source: usize,
    pub n_target: usize,
    pub noise: f64,
    #[serde(with = "text")]
    pub noise_convention: NoiseConvention,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            target: "target1".into(),
            dim: 1,
            n_source: 100,
            n_target: 20,
            noise: 0.1,
            noise_convention: NoiseConvention::StdDev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceConfig {
    #[serde(with = "text")]
    pub kernel: Kernel,
    /// `algorithm-box`, `appendix-optimal`, `experiment-n13` or `fixed:<h>`.
    #[serde(with = "text")]
    pub bandwidth: SourceBandwidth,
    pub beta: f64,
}

impl Default for SourceConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self { kernel: p.source_kernel, bandwidth: p.source_bandwidth, beta: p.beta_s }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TransferConfig {
    #[serde(with = "text")]
    pub kernel_x: Kernel,
    #[serde(with = "text")]
    pub kernel_z: Kernel,
    /// `experiment-n13`, `theory-optimal:<h>:<beta_g>` or `fixed:<h>:<h_bar>`.
    #[serde(with = "text")]
    pub bandwidth: TransferBandwidth,
    /// `target` (all target points) or `target-train` (the training half).
    pub bandwidth_sample: String,
    pub eig_threshold: f64,
    pub ridge: f64,
    /// Use only training points inside the cell.
    pub restrict_to_cell: bool,
}

impl Default for TransferConfig {
    fn default() -> Self {
        let f = FitConfig::default();
        Self {
            kernel_x: f.kernel_x,
            kernel_z: f.kernel_z,
            bandwidth: TransferBandwidth::ExperimentN13,
            bandwidth_sample: "target".into(),
            eig_threshold: f.eig_threshold,
            ridge: f.ridge,
            restrict_to_cell: f.restrict_to_cell,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionConfig {
    /// `erm`, `mom:<B>`, or `mom` to size `B` from `mom_delta`.
    pub method: String,
    pub mom_delta: f64,
    /// Grid denominator `m`; 0 uses the target sample size.
    pub resolution: u32,
    /// Cell cap; 0 means `m^d`.
    pub max_cells: u64,
    pub min_cell_count: usize,
    pub t0: f64,
    pub alpha: f64,
    pub steps: usize,
    pub moves_per_step: usize,
    /// Tessellation records to compare instead of annealing.
    pub candidates: Vec<PathBuf>,
}

impl Default for SelectionConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            method: "erm".into(),
            mom_delta: 0.01,
            resolution: 0,
            max_cells: 0,
            min_cell_count: p.min_cell_count,
            t0: p.schedule.t0,
            alpha: p.schedule.alpha,
            steps: p.schedule.steps,
            moves_per_step: p.schedule.moves_per_step,
            candidates: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdmissibilityConfig {
    pub c_mass: f64,
    pub c_rad: f64,
    pub r_loc: f64,
}

impl Default for AdmissibilityConfig {
    fn default() -> Self {
        let c = AdmissibilityConstants::default();
        Self { c_mass: c.c_mass, c_rad: c.c_rad, r_loc: c.r_loc }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    #[serde(with = "text")]
    pub kernel: Kernel,
    #[serde(with = "text")]
    pub bandwidth: SourceBandwidth,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self { kernel: p.baseline_kernel, bandwidth: p.baseline_bandwidth }
    }
}

/// Grid of synthetic experiments, or one experiment on data files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateConfig {
    pub targets: Vec<String>,
    pub dims: Vec<usize>,
    pub n_source: Vec<usize>,
    pub n_target: Vec<usize>,
    pub replications: usize,
    /// Evaluation points per synthetic replication.
    pub eval_points: usize,
    /// Target rows used for training per replication with data files;
    /// the rest are held out.
    pub n_train: usize,
    /// Also write the `[synth]` source and target samples as CSV.
    pub export_data: bool,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            targets: vec!["target1".into()],
            dims: vec![1],
            n_source: vec![100],
            n_target: vec![20],
            replications: 100,
            eval_points: tl2_core::diagnostics::DEFAULT_EVAL_POINTS,
            n_train: 0,
            export_data: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitCommandConfig {
    /// Tessellation record; overrides `breakpoints`.
    pub tessellation: Option<PathBuf>,
    /// Interior breakpoints per axis, in units of `1/resolution`.
    pub breakpoints: Vec<Vec<u32>>,
    /// Grid denominator for `breakpoints`; 0 uses the target sample size.
    pub resolution: u32,
    /// Saved model record; when set, `fit` only predicts.
    pub model: Option<PathBuf>,
}

impl Default for FitCommandConfig {
    fn default() -> Self {
        Self { tessellation: None, breakpoints: Vec::new(), resolution: 0, model: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    /// `n_t-parametric`, `n_s-plugin`, `l-bias` or `nw`.
    pub axis: String,
    pub sizes: Vec<usize>,
    pub replications: usize,
    /// Noise of the `nw` axis.
    pub noise: f64,
    #[serde(with = "text")]
    pub noise_convention: NoiseConvention,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            axis: "n_t-parametric".into(),
            sizes: vec![50, 200, 800],
            replications: 50,
            noise: 0.1,
            noise_convention: NoiseConvention::StdDev,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IngestConfig {
    pub input: Option<PathBuf>,
    /// Feature columns; empty means every column except response and group.
    pub features: Vec<String>,
    pub response: String,
    /// Column whose value assigns a row to source or target.
    pub group: Option<String>,
    pub source_groups: Vec<String>,
    pub target_groups: Vec<String>,
    /// Without a group column, this many random rows become the source.
    pub source_rows: usize,
    /// Source subsample size; 0 keeps every source row.
    pub n_source: usize,
    /// Target training size; the other target rows go to the held-out file.
    /// 0 keeps every target row for training.
    pub n_target: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            input: None,
            features: Vec::new(),
            response: "y".into(),
            group: None,
            source_groups: Vec::new(),
            target_groups: Vec::new(),
            source_rows: 0,
            n_source: 0,
            n_target: 0,
        }
    }
}

impl RunConfig {
    /// Defaults, then the file, then each `key=value` override in order.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> CliResult<Self> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", p.display())))?;
                text.parse::<toml::Table>()
                    .map_err(|e| CliError::Input(format!("config {}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::deserialize(toml::Value::Table(table)).map_err(|e| CliError::Input(format!("config: {e}")))
    }

    pub fn rng_seed(&self) -> RngSeed {
        RngSeed::new(self.seed, 0)
    }

    pub fn method(&self, n_candidates: usize) -> CliResult<SelectionMethod> {
        if self.selection.method.trim() == "mom" {
            return Ok(SelectionMethod::Mom { blocks: mom_block_rule(n_candidates, self.selection.mom_delta)? });
        }
        Ok(self.selection.method.parse()?)
    }

    pub fn fit_config(&self) -> FitConfig {
        let t = &self.transfer;
        FitConfig {
            kernel_x: t.kernel_x,
            kernel_z: t.kernel_z,
            eig_threshold: t.eig_threshold,
            ridge: t.ridge,
            restrict_to_cell: t.restrict_to_cell,
            ..FitConfig::default()
        }
    }

    pub fn pipeline(&self) -> CliResult<PipelineConfig> {
        let s = &self.selection;
        let bandwidth_sample = match self.transfer.bandwidth_sample.as_str() {
            "target" => BandwidthSample::Target,
            "target-train" => BandwidthSample::TargetTrain,
            other => return Err(CliError::Input(format!("unknown bandwidth sample `{other}`"))),
        };
        let schedule = AnnealSchedule { t0: s.t0, alpha: s.alpha, steps: s.steps, moves_per_step: s.moves_per_step };
        schedule.validate()?;
        let a = &self.admissibility;
        Ok(PipelineConfig {
            source_kernel: self.source.kernel,
            source_bandwidth: self.source.bandwidth,
            beta_s: self.source.beta,
            fit: self.fit_config(),
            transfer_bandwidth: self.transfer.bandwidth,
            bandwidth_sample,
            resolution: (s.resolution > 0).then_some(s.resolution),
            max_cells: (s.max_cells > 0).then_some(s.max_cells),
            min_cell_count: s.min_cell_count,
            schedule,
            // annealing visits an open-ended family; size B for the step budget
            method: self.method(s.steps * s.moves_per_step + 1)?,
            constants: AdmissibilityConstants { c_mass: a.c_mass, c_rad: a.c_rad, r_loc: a.r_loc },
            baseline_kernel: self.baseline.kernel,
            baseline_bandwidth: self.baseline.bandwidth,
        })
    }

    pub fn synthetic_spec(&self) -> CliResult<SyntheticSpec> {
        let s = &self.synth;
        self.spec_for(&s.target, s.dim, s.n_source, s.n_target)
    }

    pub fn spec_for(&self, target: &str, dim: usize, n_source: usize, n_target: usize) -> CliResult<SyntheticSpec> {
        let noise = Noise { level: self.synth.noise, convention: self.synth.noise_convention };
        let spec = SyntheticSpec::new(dim, n_source, n_target, target.parse()?)
            .with_noise(noise)
            .with_seed(self.rng_seed());
        spec.validate()?;
        Ok(spec)
    }

    pub fn delimiter(&self) -> CliResult<u8> {
        let d = self.data.delimiter;
        if d.is_ascii() && d != '"' && d != '\n' && d != '\r' {
            Ok(d as u8)
        } else {
            Err(CliError::Input(format!("delimiter `{d}` must be a single ASCII character")))
        }
    }
}

/// Set a dotted key in `table`; the value is parsed as TOML, falling back
/// to a bare string.
fn apply_override(table: &mut toml::Table, assignment: &str) -> CliResult<()> {
    let (key, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Input(format!("override `{assignment}` is not key=value")))?;
    let value = format!("v = {}", raw.trim())
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.trim().to_string()));
    let parts: Vec<&str> = key.trim().split('.').collect();
    let (last, path) = parts.split_last().expect("split yields one part");
    let mut cur = table;
    for p in path {
        let entry = cur.entry(p.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
        cur = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Input(format!("`{p}` in `{key}` is not a section")))?;
    }
    if last.is_empty() {
        return Err(CliError::Input(format!("empty key in override `{assignment}`")));
    }
    cur.insert(last.to_string(), value);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_the_default() {
        assert_eq!(RunConfig::load(None, &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn default_pipeline_matches_core_default() {
        assert_eq!(RunConfig::default().pipeline().unwrap(), PipelineConfig::default());
    }

    #[test]
    fn serialized_default_reloads() {
        let text = toml::to_string(&RunConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, text).unwrap();
        assert_eq!(RunConfig::load(Some(&p), &[]).unwrap(), RunConfig::default());
    }

    #[test]
    fn overrides_follow_the_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, "seed = 5\n[synth]\ndim = 3\ntarget = \"target2\"\n").unwrap();
        let c = RunConfig::load(
            Some(&p),
            &["synth.dim=2".into(), "source.bandwidth=fixed:0.3".into(), "simulate.dims=[1, 4]".into()],
        )
        .unwrap();
        assert_eq!((c.seed, c.synth.dim, c.synth.target.as_str()), (5, 2, "target2"));
        assert_eq!(c.source.bandwidth, SourceBandwidth::Fixed(0.3));
        assert_eq!(c.simulate.dims, vec![1, 4]);
    }

    #[test]
    fn bad_input_is_rejected() {
        for o in ["nonsense", "synth.bogus=1", "source.kernel=cosine", "seed.x=1", "synth.dim=\"two\""] {
            assert!(matches!(RunConfig::load(None, &[o.into()]), Err(CliError::Input(_))), "{o}");
        }
    }

    #[test]
    fn mom_block_count_from_delta() {
        let c = RunConfig::load(None, &["selection.method=mom".into()]).unwrap();
        assert_eq!(c.method(6).unwrap(), SelectionMethod::Mom { blocks: 7 });
        let c = RunConfig::load(None, &["selection.method=mom:3".into()]).unwrap();
        assert_eq!(c.method(6).unwrap(), SelectionMethod::Mom { blocks: 3 });
    }
}
