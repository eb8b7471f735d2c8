//! The five subcommands. Each writes a TOML summary plus CSV tables into
//! the output directory.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use tl2_core::diagnostics::{nw_rate, ExperimentResult, RateProbeResult};
use tl2_core::prelude::*;

use crate::config::RunConfig;
use crate::error::{ensure_finite, CliError, CliResult};
use crate::ingest::{ingest, FeatureRange};
use crate::table::{dataset_text, read_dataset, read_design, Table};

/// Largest tessellation for which a full model record is written.
const MAX_RECORD_CELLS: u64 = 1 << 20;

#[derive(Serialize)]
struct RunHeader<'a> {
    command: &'a str,
    version: &'a str,
    seed: u64,
}

impl<'a> RunHeader<'a> {
    fn new(command: &'a str, cfg: &RunConfig) -> Self {
        Self { command, version: env!("CARGO_PKG_VERSION"), seed: cfg.seed }
    }
}

struct Output<'a> {
    dir: &'a Path,
}

impl<'a> Output<'a> {
    fn create(cfg: &'a RunConfig) -> CliResult<Self> {
        let dir = cfg.output.dir.as_path();
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self { dir })
    }

    fn write(&self, name: &str, text: &str) -> CliResult<()> {
        let p = self.dir.join(name);
        std::fs::write(&p, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", p.display())))
    }
}

fn to_toml<T: Serialize>(v: &T) -> String {
    toml::to_string(v).expect("report serializes")
}

/// `[run]` header, the command body, then the effective configuration.
fn summary<T: Serialize>(command: &str, cfg: &RunConfig, body: &T) -> String {
    #[derive(Serialize)]
    struct Head<'a> {
        run: RunHeader<'a>,
    }
    #[derive(Serialize)]
    struct Tail<'a> {
        config: &'a RunConfig,
    }
    let mut out = to_toml(&Head { run: RunHeader::new(command, cfg) });
    out.push('\n');
    out.push_str(&to_toml(body));
    out.push('\n');
    out.push_str(&to_toml(&Tail { config: cfg }));
    out
}

fn load_source(cfg: &RunConfig) -> CliResult<Dataset> {
    match &cfg.data.source {
        Some(p) => read_dataset(p, &cfg.data.response, cfg.delimiter()?, Role::Source),
        None => Ok(gen_source(&cfg.synthetic_spec()?)?),
    }
}

fn load_target(cfg: &RunConfig) -> CliResult<Dataset> {
    match &cfg.data.target {
        Some(p) => read_dataset(p, &cfg.data.response, cfg.delimiter()?, Role::Target),
        None => Ok(gen_target(&cfg.synthetic_spec()?)?),
    }
}

#[derive(Serialize)]
struct PredictionSummary {
    points: usize,
    mse: Option<f64>,
}

/// Predict at `data.predict`, writing `predictions.csv`.
fn write_predictions(
    cfg: &RunConfig,
    out: &Output,
    dim: usize,
    predict: impl Fn(&[Vec<f64>]) -> CliResult<Vec<f64>>,
) -> CliResult<Option<PredictionSummary>> {
    let Some(path) = &cfg.data.predict else { return Ok(None) };
    let delim = cfg.delimiter()?;
    let design = read_design(path, &cfg.data.response, delim)?;
    if design.features.len() != dim {
        return Err(CliError::Input(format!(
            "{} has {} features, the model expects {dim}",
            path.display(),
            design.features.len()
        )));
    }
    if let Some(v) = design.points.iter().flatten().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(CliError::Input(format!("{}: coordinate {v} outside [0,1]", path.display())));
    }
    let preds = predict(&design.points)?;
    ensure_finite("prediction", preds.iter().copied())?;
    let d = (delim as char).to_string();
    let mut text = design.features.join(&d);
    let _ = write!(text, "{d}prediction");
    if design.response.is_some() {
        let _ = write!(text, "{d}{}", cfg.data.response);
    }
    text.push('\n');
    for (i, (x, p)) in design.points.iter().zip(&preds).enumerate() {
        for v in x {
            let _ = write!(text, "{v:?}{d}");
        }
        let _ = write!(text, "{p:?}");
        if let Some(ys) = &design.response {
            let _ = write!(text, "{d}{:?}", ys[i]);
        }
        text.push('\n');
    }
    out.write("predictions.csv", &text)?;
    let mse = design.response.as_ref().map(|ys| {
        preds.iter().zip(ys).map(|(p, y)| (p - y) * (p - y)).sum::<f64>() / ys.len().max(1) as f64
    });
    Ok(Some(PredictionSummary { points: preds.len(), mse }))
}

// simulate

#[derive(Serialize)]
struct ExperimentRow {
    data: String,
    target: String,
    dim: usize,
    n_source: usize,
    n_target: usize,
    replications: usize,
    median_mse_nw: f64,
    median_mse_tl2: f64,
    median_e_red: f64,
}

pub fn simulate(cfg: &RunConfig) -> CliResult<()> {
    let p = cfg.pipeline()?;
    let s = &cfg.simulate;
    let seed = cfg.rng_seed();
    let mut rows = Vec::new();
    let mut table = String::from("target,dim,n_source,n_target,replication,mse_nw,mse_tl2,e_red,cells,breakpoints,evaluated\n");
    let mut record = |row: ExperimentRow, res: &ExperimentResult| -> CliResult<()> {
        ensure_finite("error reduction", res.replications.iter().flat_map(|r| [r.mse_nw, r.mse_tl2, r.e_red]))?;
        for r in &res.replications {
            let _ = writeln!(
                table,
                "{},{},{},{},{},{:?},{:?},{:?},{},{},{}",
                row.target, row.dim, row.n_source, row.n_target, r.replication, r.mse_nw, r.mse_tl2, r.e_red,
                r.cells, r.breakpoints, r.evaluated
            );
        }
        rows.push(row);
        Ok(())
    };

    match (&cfg.data.source, &cfg.data.target) {
        (Some(_), Some(_)) => {
            let source = load_source(cfg)?;
            let target = load_target(cfg)?;
            let dim = source.dim();
            let (n_source, n_target) = (source.len(), s.n_train);
            let data = ExperimentData::Ingested { source, target, n_train: s.n_train };
            let res = error_reduction(&data, &p, s.replications, s.eval_points, seed)?;
            let row = summary_row("file", "file", dim, n_source, n_target, s.replications, &res);
            record(row, &res)?;
        }
        (None, None) => {
            if s.targets.is_empty() || s.dims.is_empty() || s.n_source.is_empty() || s.n_target.is_empty() {
                return Err(CliError::Input("the simulation grid is empty".into()));
            }
            for target in &s.targets {
                for &dim in &s.dims {
                    for &n_source in &s.n_source {
                        for &n_target in &s.n_target {
                            let spec = cfg.spec_for(target, dim, n_source, n_target)?;
                            let res =
                                error_reduction(&ExperimentData::Synthetic(spec), &p, s.replications, s.eval_points, seed)?;
                            let row = summary_row("synthetic", target, dim, n_source, n_target, s.replications, &res);
                            record(row, &res)?;
                        }
                    }
                }
            }
        }
        _ => return Err(CliError::Input("simulate needs both data.source and data.target, or neither".into())),
    }

    let out = Output::create(cfg)?;
    if s.export_data {
        let delim = cfg.delimiter()?;
        let spec = cfg.synthetic_spec()?;
        out.write("synth_source.csv", &dataset_text(&gen_source(&spec)?, None, &cfg.data.response, delim))?;
        out.write("synth_target.csv", &dataset_text(&gen_target(&spec)?, None, &cfg.data.response, delim))?;
    }
    #[derive(Serialize)]
    struct Body {
        experiment: Vec<ExperimentRow>,
    }
    out.write("simulate.csv", &table)?;
    out.write("simulate.toml", &summary("simulate", cfg, &Body { experiment: rows }))
}

fn summary_row(
    data: &str,
    target: &str,
    dim: usize,
    n_source: usize,
    n_target: usize,
    replications: usize,
    res: &ExperimentResult,
) -> ExperimentRow {
    ExperimentRow {
        data: data.into(),
        target: target.into(),
        dim,
        n_source,
        n_target,
        replications,
        median_mse_nw: res.median_mse_nw,
        median_mse_tl2: res.median_mse_tl2,
        median_e_red: res.median_e_red,
    }
}

// fit

#[derive(Serialize)]
struct FitSummary {
    fit: FitBody,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<PredictionSummary>,
}

#[derive(Serialize)]
struct FitBody {
    loaded_model: bool,
    dim: usize,
    n_source: usize,
    n_train: usize,
    source_bandwidth: f64,
    h: f64,
    h_bar: f64,
    resolution: u32,
    breakpoints: Vec<Vec<u32>>,
    cells: u64,
    fallback_cells: usize,
    admissible: Option<bool>,
}

pub fn fit(cfg: &RunConfig) -> CliResult<()> {
    let (model, n_train, admissible) = match &cfg.fit.model {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read model {}: {e}", path.display())))?;
            (TransferModel::from_record(&text)?, 0, None)
        }
        None => {
            let p = cfg.pipeline()?;
            let source = p.fit_source(load_source(cfg)?)?;
            let target = load_target(cfg)?;
            if source.dim() != target.dim() {
                return Err(CliError::Input("source and target dimensions differ".into()));
            }
            let tess = match &cfg.fit.tessellation {
                Some(path) => read_tessellation(path)?,
                None => {
                    let m = if cfg.fit.resolution > 0 { cfg.fit.resolution } else { target.len() as u32 };
                    let mut bps = cfg.fit.breakpoints.clone();
                    bps.resize(target.dim(), Vec::new());
                    Tessellation::grid(target.dim(), m, bps)?
                }
            };
            let fit_cfg = p.fit_config(target.dim(), target.len())?;
            let train = target.with_role(Role::TargetTrain);
            let model = fit_transfer(&tess, &train, &source, &fit_cfg)?;
            let report = check_admissible(&tess, &train, &source, &fit_cfg, &p.constants);
            (model, train.len(), Some(report.admissible()))
        }
    };
    ensure_finite("cell fit", model.fits().iter().flat_map(|f| [f.a, f.b]))?;

    let out = Output::create(cfg)?;
    let mut cells = String::from("cell,a,b,y_center,n_window,gram_min_eig,fallback\n");
    for (l, f) in model.fits().iter().enumerate() {
        let _ = writeln!(
            cells,
            "{l},{:?},{:?},{:?},{},{:?},{}",
            f.a,
            f.b,
            f.y_center,
            f.n_window,
            f.gram_min_eig,
            f.fallback.name()
        );
    }
    out.write("cells.csv", &cells)?;
    out.write("model.txt", &model.to_record())?;
    let prediction = write_predictions(cfg, &out, model.tessellation().dim(), |pts| {
        pts.iter().map(|x| Ok(model.predict(x)?)).collect()
    })?;
    let tess = model.tessellation();
    let (h, h_bar) = model.bandwidths();
    let body = FitSummary {
        fit: FitBody {
            loaded_model: cfg.fit.model.is_some(),
            dim: tess.dim(),
            n_source: model.source().data().len(),
            n_train,
            source_bandwidth: model.source().bandwidth(),
            h,
            h_bar,
            resolution: tess.resolution(),
            breakpoints: tess.breakpoints().to_vec(),
            cells: tess.n_cells(),
            fallback_cells: model.fits().iter().filter(|f| f.fallback != Fallback::None).count(),
            admissible,
        },
        prediction,
    };
    out.write("fit.toml", &summary("fit", cfg, &body))
}

fn read_tessellation(path: &Path) -> CliResult<Tessellation> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read tessellation {}: {e}", path.display())))?;
    Tessellation::from_record(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

// select

#[derive(Serialize)]
struct SelectBody {
    dim: usize,
    n_source: usize,
    n_train: usize,
    n_validate: usize,
    source_bandwidth: f64,
    h: f64,
    h_bar: f64,
    mode: &'static str,
    model_written: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    prediction: Option<PredictionSummary>,
}

pub fn select(cfg: &RunConfig) -> CliResult<()> {
    let p = cfg.pipeline()?;
    let source = load_source(cfg)?;
    let target = load_target(cfg)?;
    let seed = cfg.rng_seed();
    let (run, mode) = if cfg.selection.candidates.is_empty() {
        (run_tl2(source, &target, &p, seed)?, "anneal")
    } else {
        let candidates =
            cfg.selection.candidates.iter().map(|c| read_tessellation(c)).collect::<CliResult<Vec<_>>>()?;
        if source.dim() != target.dim() {
            return Err(CliError::Input("source and target dimensions differ".into()));
        }
        let source = p.fit_source(source)?;
        let (train, validate) = split_target(&target, &mut seed.child(1).stream())?;
        let fit = p.fit_config(target.dim(), target.len())?;
        let method = cfg.method(candidates.len())?;
        let report = {
            let fitter = TransferFitter::new(&train, &source, fit)?;
            select_over(&candidates, &fitter, &validate, method, p.constants, seed.child(2))?
        };
        (Tl2Run { source, train, validate, fit, report }, "candidates")
    };
    let report = &run.report;
    ensure_finite("selection risk", report.candidates.iter().map(|c| report.selection_risk(c)))?;

    let out = Output::create(cfg)?;
    let tess = run.tessellation();
    out.write("tessellation.txt", &tess.to_record())?;
    let model_written = tess.n_cells() <= MAX_RECORD_CELLS;
    if model_written {
        out.write("model.txt", &run.model()?.to_record())?;
    }
    let mut cand = String::from("order,cells,breakpoints,mean_risk,mom_risk,blocks,admissible,chosen\n");
    for (i, c) in report.candidates.iter().enumerate() {
        let bps: Vec<String> = c
            .tessellation
            .breakpoints()
            .iter()
            .map(|a| a.iter().map(u32::to_string).collect::<Vec<_>>().join(" "))
            .collect();
        let _ = writeln!(
            cand,
            "{i},{},{},{:?},{:?},{},{},{}",
            c.tessellation.n_cells(),
            bps.join("|"),
            c.risk.mean_risk,
            c.risk.mom_risk,
            c.risk.blocks,
            c.admissibility.admissible(),
            i == report.chosen
        );
    }
    out.write("candidates.csv", &cand)?;
    if cfg.output.trace && !report.trace.is_empty() {
        out.write("trace.csv", &report.trace_table())?;
    }
    let prediction = write_predictions(cfg, &out, target.dim(), |pts| Ok(run.predict_many(pts)?))?;
    #[derive(Serialize)]
    struct Body {
        select: SelectBody,
    }
    let body = Body {
        select: SelectBody {
            dim: target.dim(),
            n_source: run.source.data().len(),
            n_train: run.train.len(),
            n_validate: run.validate.len(),
            source_bandwidth: run.source.bandwidth(),
            h: run.fit.h,
            h_bar: run.fit.h_bar,
            mode,
            model_written,
            prediction,
        },
    };
    let mut text = summary("select", cfg, &body);
    text.push('\n');
    text.push_str(&report.to_text());
    out.write("select.toml", &text)
}

// probe

pub fn probe(cfg: &RunConfig) -> CliResult<()> {
    let pc = &cfg.probe;
    let seed = cfg.rng_seed();
    let res: RateProbeResult = if pc.axis == "nw" {
        nw_rate(&pc.sizes, pc.replications, Noise { level: pc.noise, convention: pc.noise_convention }, seed)?
    } else {
        rate_probe(pc.axis.parse()?, &pc.sizes, pc.replications, seed)?
    };
    ensure_finite("rate probe", res.medians.iter().copied().chain([res.slope]))?;
    #[derive(Serialize)]
    struct Body<'a> {
        probe: ProbeBody<'a>,
    }
    #[derive(Serialize)]
    struct ProbeBody<'a> {
        axis: &'a str,
        replications: usize,
        sizes: &'a [usize],
        medians: &'a [f64],
        slope: f64,
    }
    let body = Body {
        probe: ProbeBody {
            axis: &pc.axis,
            replications: pc.replications,
            sizes: &res.sizes,
            medians: &res.medians,
            slope: res.slope,
        },
    };
    let out = Output::create(cfg)?;
    out.write("probe.csv", &res.table())?;
    out.write("probe.toml", &summary("probe", cfg, &body))
}

// ingest

pub fn ingest_cmd(cfg: &RunConfig) -> CliResult<()> {
    let input = cfg.ingest.input.as_ref().ok_or_else(|| CliError::Input("ingest needs ingest.input".into()))?;
    let delim = cfg.delimiter()?;
    let table = Table::read(input, delim)?;
    let res = ingest(&table, &cfg.ingest, cfg.rng_seed())?;
    let out = Output::create(cfg)?;
    let resp = &cfg.ingest.response;
    let feats = Some(res.features.as_slice());
    out.write("source.csv", &dataset_text(&res.source, feats, resp, delim))?;
    out.write("target.csv", &dataset_text(&res.target, feats, resp, delim))?;
    if let Some((train, held)) = &res.split {
        out.write("target_train.csv", &dataset_text(train, feats, resp, delim))?;
        out.write("heldout.csv", &dataset_text(held, feats, resp, delim))?;
    }
    #[derive(Serialize)]
    struct Body<'a> {
        ingest: IngestBody<'a>,
    }
    #[derive(Serialize)]
    struct IngestBody<'a> {
        rows_read: usize,
        rows_dropped: usize,
        source_rows: usize,
        target_rows: usize,
        target_train_rows: usize,
        heldout_rows: usize,
        feature: &'a [FeatureRange],
    }
    let (tr, ho) = res.split.as_ref().map_or((0, 0), |(a, b)| (a.len(), b.len()));
    let body = Body {
        ingest: IngestBody {
            rows_read: res.rows_read,
            rows_dropped: res.rows_dropped,
            source_rows: res.source.len(),
            target_rows: res.target.len(),
            target_train_rows: tr,
            heldout_rows: ho,
            feature: &res.ranges,
        },
    };
    out.write("ingest.toml", &summary("ingest", cfg, &body))
}
