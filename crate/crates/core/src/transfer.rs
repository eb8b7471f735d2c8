//! Cellwise affine transfer of the source fit.
//!
//! On every cell `ℓ` with representative point `x_ℓ`, the target responses are
//! regressed on the centered source score `ẑ = f̂_S(X) - f̂_S(x_ℓ)` by weighted
//! least squares with weights `K_x(‖X - x_ℓ‖/h) · K_z(|ẑ|/h̄)`. The fitted
//! pair `(a, b)` gives the local transfer function `y ↦ a (y - f̂_S(x_ℓ)) + b`.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use crate::data::{Dataset, LabeledSample, Role};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::kernel::{distance, Kernel};
use crate::record::RecordReader;
use crate::source::SourceModel;
use crate::tessellation::{Cell, Tessellation};

/// Weights at or below this value count as zero.
pub const WEIGHT_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Fallback {
    None,
    /// Near-singular Gram; the slope was ridge-regularized.
    Ridge,
    /// A single point carried weight; `a = 0`, `b` = its response.
    Mean,
    /// No point carried weight; `a = 0`, `b` = global training mean.
    Empty,
}

impl Fallback {
    pub fn name(self) -> &'static str {
        match self {
            Fallback::None => "none",
            Fallback::Ridge => "ridge",
            Fallback::Mean => "mean",
            Fallback::Empty => "empty",
        }
    }
}

impl FromStr for Fallback {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Fallback::None),
            "ridge" => Ok(Fallback::Ridge),
            "mean" => Ok(Fallback::Mean),
            "empty" => Ok(Fallback::Empty),
            other => Err(invalid_input(format!("unknown fallback `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellFit {
    /// Slope on the centered source score.
    pub a: f64,
    /// Intercept: the fitted target value at the cell's representative score.
    pub b: f64,
    /// `f̂_S(x_ℓ)`.
    pub y_center: f64,
    pub n_window: usize,
    pub gram_min_eig: f64,
    pub fallback: Fallback,
}

impl CellFit {
    #[inline]
    pub fn eval(&self, score: f64) -> f64 {
        self.a * (score - self.y_center) + self.b
    }
}

/// Settings of the local weighted regression.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitConfig {
    pub kernel_x: Kernel,
    pub kernel_z: Kernel,
    /// Spatial bandwidth `h`.
    pub h: f64,
    /// Score bandwidth `h̄`.
    pub h_bar: f64,
    /// Ridge is applied when `λ_min(G) < eig_threshold · tr(G)`.
    pub eig_threshold: f64,
    /// Ridge magnitude relative to `tr(G)/2`.
    pub ridge: f64,
    /// Only training points inside the cell enter its regression. When false,
    /// every training point contributes through the kernel windows alone.
    pub restrict_to_cell: bool,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            kernel_x: Kernel::Gaussian,
            kernel_z: Kernel::Gaussian,
            h: 0.5,
            h_bar: 0.5,
            eig_threshold: 1e-10,
            ridge: 1e-8,
            restrict_to_cell: true,
        }
    }
}

impl FitConfig {
    pub fn with_bandwidths(self, h: f64, h_bar: f64) -> Self {
        Self { h, h_bar, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("h", self.h), ("h_bar", self.h_bar)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(invalid_param(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.eig_threshold >= 0.0) || !(self.ridge > 0.0) {
            return Err(invalid_param("ridge settings must be nonnegative / positive"));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, dist: f64, z: f64) -> f64 {
        self.kernel_x.at(dist / self.h) * self.kernel_z.at(z.abs() / self.h_bar)
    }
}

/// Rule for the transfer bandwidths `(h, h̄)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TransferBandwidth {
    /// `h = h̄ = n^{-1/3}`.
    ExperimentN13,
    /// Given `h`; `h̄ = (n h^d)^{-1/(2β_g+1)}`.
    TheoryOptimal { h: f64, beta_g: f64 },
    Fixed { h: f64, h_bar: f64 },
}

impl Default for TransferBandwidth {
    fn default() -> Self {
        TransferBandwidth::ExperimentN13
    }
}

impl fmt::Display for TransferBandwidth {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ExperimentN13 => f.write_str("experiment-n13"),
            Self::TheoryOptimal { h, beta_g } => write!(f, "theory-optimal:{h:?}:{beta_g:?}"),
            Self::Fixed { h, h_bar } => write!(f, "fixed:{h:?}:{h_bar:?}"),
        }
    }
}

impl FromStr for TransferBandwidth {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.trim().split(':').collect();
        let num = |v: &str| v.parse::<f64>().map_err(|_| invalid_param(format!("bad number `{v}`")));
        match parts.as_slice() {
            ["experiment-n13"] => Ok(Self::ExperimentN13),
            ["theory-optimal", h, b] => Ok(Self::TheoryOptimal { h: num(h)?, beta_g: num(b)? }),
            ["fixed", h, hb] => Ok(Self::Fixed { h: num(h)?, h_bar: num(hb)? }),
            _ => Err(invalid_param(format!("unknown transfer bandwidth rule `{s}`"))),
        }
    }
}

pub fn bandwidth_rule_transfer(n: usize, d: usize, mode: TransferBandwidth) -> Result<(f64, f64)> {
    if n == 0 || d == 0 {
        return Err(invalid_param("sample size and dimension must be positive"));
    }
    let n = n as f64;
    let (h, h_bar) = match mode {
        TransferBandwidth::ExperimentN13 => {
            let h = n.powf(-1.0 / 3.0);
            (h, h)
        }
        TransferBandwidth::TheoryOptimal { h, beta_g } => {
            if !(beta_g > 0.0) {
                return Err(invalid_param(format!("β_g must be positive, got {beta_g}")));
            }
            (h, (n * h.powi(d as i32)).powf(-1.0 / (2.0 * beta_g + 1.0)))
        }
        TransferBandwidth::Fixed { h, h_bar } => (h, h_bar),
    };
    for v in [h, h_bar] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(invalid_param(format!("bandwidth must be positive, got {v}")));
        }
    }
    Ok((h, h_bar))
}

/// Weighted affine regression of `y` on `z` from `(weight, z, y)` triples.
///
/// Exposed so that oracle fits (true source scores in place of `f̂_S`) use
/// exactly the same solver as the estimator.
pub fn weighted_affine_fit(
    points: impl IntoIterator<Item = (f64, f64, f64)>,
    y_center: f64,
    global_mean: f64,
    cfg: &FitConfig,
) -> CellFit {
    let pts: Vec<(f64, f64, f64)> = points.into_iter().collect();
    let n_window = pts.iter().filter(|p| p.0 > WEIGHT_FLOOR).count();

    let mut s = 0.0;
    let mut sz = 0.0;
    let mut sy = 0.0;
    let mut szz_raw = 0.0;
    for &(w, z, y) in &pts {
        s += w;
        sz += w * z;
        sy += w * y;
        szz_raw += w * z * z;
    }
    let trace = s + szz_raw;

    if n_window == 0 {
        return CellFit { a: 0.0, b: global_mean, y_center, n_window, gram_min_eig: 0.0, fallback: Fallback::Empty };
    }
    if n_window == 1 {
        let b = sy / s;
        let gram_min_eig = gram_min_eigenvalue(s, sz, szz_raw, 0.0);
        return CellFit { a: 0.0, b, y_center, n_window, gram_min_eig, fallback: Fallback::Mean };
    }

    let z_bar = sz / s;
    let y_bar = sy / s;
    let mut szz = 0.0;
    let mut szy = 0.0;
    for &(w, z, y) in &pts {
        let dz = z - z_bar;
        szz += w * dz * dz;
        szy += w * dz * (y - y_bar);
    }
    let gram_min_eig = gram_min_eigenvalue(s, sz, szz_raw, szz);

    let (a, fallback) = if gram_min_eig < cfg.eig_threshold * trace {
        (szy / (szz + cfg.ridge * trace / 2.0), Fallback::Ridge)
    } else {
        (szy / szz, Fallback::None)
    };
    CellFit { a, b: y_bar - a * z_bar, y_center, n_window, gram_min_eig, fallback }
}

/// Smaller eigenvalue of `[[s, sz], [sz, szz_raw]]`, via `det / λ_max` with
/// `det = s · szz_centered`.
fn gram_min_eigenvalue(s: f64, sz: f64, szz_raw: f64, szz_centered: f64) -> f64 {
    let trace = s + szz_raw;
    let disc = ((s - szz_raw).powi(2) + 4.0 * sz * sz).sqrt();
    let max_eig = 0.5 * (trace + disc);
    if max_eig <= 0.0 {
        return 0.0;
    }
    (s * szz_centered / max_eig).max(0.0)
}

/// Fit one cell from scratch, evaluating the source model as needed.
pub fn fit_cell(cell: &Cell, train: &Dataset, source: &SourceModel, cfg: &FitConfig) -> Result<CellFit> {
    cfg.validate()?;
    check_dims(train, source)?;
    let scores: Vec<f64> = train.iter().map(|(x, _)| source.predict_unchecked(x).value).collect();
    let y_center = source.predict_unchecked(&cell.center).value;
    let pts = train
        .iter()
        .zip(&scores)
        .filter(|((x, _), _)| !cfg.restrict_to_cell || cell.contains(x))
        .map(|((x, y), &s)| {
            let z = s - y_center;
            (cfg.weight(distance(x, &cell.center), z), z, y)
        });
    Ok(weighted_affine_fit(pts, y_center, train.mean_response(), cfg))
}

fn check_dims(train: &Dataset, source: &SourceModel) -> Result<()> {
    if train.dim() != source.dim() {
        return Err(invalid_input(format!(
            "training data of dimension {} with a source of dimension {}",
            train.dim(),
            source.dim()
        )));
    }
    Ok(())
}

/// Training data with cached source scores, reused across many tessellations.
#[derive(Debug, Clone)]
pub struct TransferFitter<'a> {
    train: &'a Dataset,
    source: &'a SourceModel,
    scores: Vec<f64>,
    global_mean: f64,
    cfg: FitConfig,
}

impl<'a> TransferFitter<'a> {
    pub fn new(train: &'a Dataset, source: &'a SourceModel, cfg: FitConfig) -> Result<Self> {
        cfg.validate()?;
        check_dims(train, source)?;
        if train.role() != Role::TargetTrain {
            return Err(invalid_input(format!("expected target-train data, got {}", train.role())));
        }
        let scores = train.iter().map(|(x, _)| source.predict_unchecked(x).value).collect();
        Ok(Self { train, source, scores, global_mean: train.mean_response(), cfg })
    }

    pub fn config(&self) -> &FitConfig {
        &self.cfg
    }

    pub fn source(&self) -> &SourceModel {
        self.source
    }

    pub fn train(&self) -> &Dataset {
        self.train
    }

    pub fn global_mean(&self) -> f64 {
        self.global_mean
    }

    fn fit_members(&self, cell: &Cell, members: &[usize]) -> CellFit {
        let y_center = self.source.predict_unchecked(&cell.center).value;
        let pts = members.iter().map(|&i| {
            let z = self.scores[i] - y_center;
            (self.cfg.weight(distance(self.train.x(i), &cell.center), z), z, self.train.y(i))
        });
        weighted_affine_fit(pts, y_center, self.global_mean, &self.cfg)
    }

    fn members_by_cell(&self, tess: &Tessellation) -> HashMap<usize, Vec<usize>> {
        let mut by_cell: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, (x, _)) in self.train.iter().enumerate() {
            by_cell.entry(tess.locate_unchecked(x)).or_default().push(i);
        }
        by_cell
    }

    fn check_tessellation(&self, tess: &Tessellation) -> Result<()> {
        if tess.dim() != self.train.dim() {
            return Err(invalid_input("tessellation dimension does not match the data"));
        }
        Ok(())
    }

    /// Fit every cell of `tess`.
    pub fn fit(&self, tess: &Tessellation) -> Result<TransferModel> {
        self.check_tessellation(tess)?;
        let all: Vec<usize> = (0..self.train.len()).collect();
        let by_cell = if self.cfg.restrict_to_cell { self.members_by_cell(tess) } else { HashMap::new() };
        let fits = tess
            .cells()
            .map(|cell| {
                let members = if self.cfg.restrict_to_cell {
                    by_cell.get(&cell.index).map(Vec::as_slice).unwrap_or(&[])
                } else {
                    &all
                };
                self.fit_members(&cell, members)
            })
            .collect();
        Ok(TransferModel { source: self.source.clone(), tessellation: tess.clone(), fits, cfg: self.cfg })
    }

    /// Fit only the cells needed to predict at `queries` (plus every
    /// occupied cell). Predictions agree with [`TransferFitter::fit`].
    pub fn fit_sparse<'q>(
        &self,
        tess: &Tessellation,
        queries: impl IntoIterator<Item = &'q [f64]>,
    ) -> Result<SparseTransfer> {
        self.check_tessellation(tess)?;
        let mut fits = HashMap::new();
        if self.cfg.restrict_to_cell {
            for (index, members) in self.members_by_cell(tess) {
                fits.insert(index, self.fit_members(&tess.cell(index), &members));
            }
        } else {
            let all: Vec<usize> = (0..self.train.len()).collect();
            for x in queries {
                let index = tess.locate_unchecked(x);
                fits.entry(index).or_insert_with(|| self.fit_members(&tess.cell(index), &all));
            }
        }
        Ok(SparseTransfer { tessellation: tess.clone(), fits, global_mean: self.global_mean })
    }
}

/// Fitted transfer estimator on one tessellation.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferModel {
    source: SourceModel,
    tessellation: Tessellation,
    fits: Vec<CellFit>,
    cfg: FitConfig,
}

pub fn fit_transfer(
    tess: &Tessellation,
    train: &Dataset,
    source: &SourceModel,
    cfg: &FitConfig,
) -> Result<TransferModel> {
    TransferFitter::new(train, source, *cfg)?.fit(tess)
}

impl TransferModel {
    /// Assemble from parts; `fits` must hold one entry per cell.
    pub fn from_parts(
        source: SourceModel,
        tessellation: Tessellation,
        fits: Vec<CellFit>,
        cfg: FitConfig,
    ) -> Result<Self> {
        if fits.len() as u64 != tessellation.n_cells() {
            return Err(invalid_input(format!(
                "{} cell fits for {} cells",
                fits.len(),
                tessellation.n_cells()
            )));
        }
        if source.dim() != tessellation.dim() {
            return Err(invalid_input("source and tessellation dimensions differ"));
        }
        Ok(Self { source, tessellation, fits, cfg })
    }

    pub fn source(&self) -> &SourceModel {
        &self.source
    }

    pub fn tessellation(&self) -> &Tessellation {
        &self.tessellation
    }

    pub fn fits(&self) -> &[CellFit] {
        &self.fits
    }

    pub fn config(&self) -> &FitConfig {
        &self.cfg
    }

    pub fn bandwidths(&self) -> (f64, f64) {
        (self.cfg.h, self.cfg.h_bar)
    }

    /// `f̂_T^H(x)`.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        let cell = self.tessellation.locate(x)?;
        let score = self.source.predict_unchecked(x).value;
        Ok(self.fits[cell].eval(score))
    }

    /// Prediction given a precomputed source score at `x`.
    pub fn predict_with_score(&self, x: &[f64], score: f64) -> Result<f64> {
        let cell = self.tessellation.locate(x)?;
        Ok(self.fits[cell].eval(score))
    }

    /// Estimated transfer function of the cell containing `x`, at source value `y`.
    pub fn transfer_function_at(&self, x: &[f64], y: f64) -> Result<f64> {
        let cell = self.tessellation.locate(x)?;
        Ok(self.fits[cell].eval(y))
    }

    pub fn to_record(&self) -> String {
        let mut out = String::from("tl2-transfer-model 1\n");
        let c = &self.cfg;
        let _ = writeln!(out, "kernel_x {}", c.kernel_x);
        let _ = writeln!(out, "kernel_z {}", c.kernel_z);
        let _ = writeln!(out, "h {:?}", c.h);
        let _ = writeln!(out, "h_bar {:?}", c.h_bar);
        let _ = writeln!(out, "eig_threshold {:?}", c.eig_threshold);
        let _ = writeln!(out, "ridge {:?}", c.ridge);
        let _ = writeln!(out, "restrict_to_cell {}", c.restrict_to_cell);
        let s = &self.source;
        out.push_str("source\n");
        let _ = writeln!(out, "kernel {}", s.kernel());
        let _ = writeln!(out, "bandwidth {:?}", s.bandwidth());
        let _ = writeln!(out, "beta {:?}", s.beta());
        let _ = writeln!(out, "dim {}", s.dim());
        let _ = writeln!(out, "samples {}", s.data().len());
        for (x, y) in s.data().iter() {
            out.push_str("sample");
            for v in x {
                let _ = write!(out, " {v:?}");
            }
            let _ = writeln!(out, " {y:?}");
        }
        out.push_str("end\n");
        self.tessellation.write_record(&mut out);
        let _ = writeln!(out, "cells {}", self.fits.len());
        for (l, f) in self.fits.iter().enumerate() {
            let _ = writeln!(
                out,
                "cell {l} {:?} {:?} {:?} {} {} {:?}",
                f.a,
                f.b,
                f.y_center,
                f.fallback.name(),
                f.n_window,
                f.gram_min_eig
            );
        }
        out.push_str("end\n");
        out
    }

    pub fn from_record(text: &str) -> Result<Self> {
        let mut r = RecordReader::new(text);
        let version = r.expect_one("tl2-transfer-model")?;
        if version != "1" {
            return Err(r.error(format!("unsupported model record version {version}")));
        }
        let kernel_x: Kernel = r.expect_one("kernel_x")?.parse()?;
        let kernel_z: Kernel = r.expect_one("kernel_z")?.parse()?;
        let h = r.value("h", "h")?;
        let h_bar = r.value("h_bar", "h_bar")?;
        let eig_threshold = r.value("eig_threshold", "threshold")?;
        let ridge = r.value("ridge", "ridge")?;
        let restrict_to_cell = r.value("restrict_to_cell", "flag")?;
        let cfg = FitConfig { kernel_x, kernel_z, h, h_bar, eig_threshold, ridge, restrict_to_cell };

        r.expect("source")?;
        let kernel: Kernel = r.expect_one("kernel")?.parse()?;
        let bandwidth: f64 = r.value("bandwidth", "bandwidth")?;
        let beta: f64 = r.value("beta", "beta")?;
        let dim: usize = r.value("dim", "dimension")?;
        let n: usize = r.value("samples", "sample count")?;
        let mut samples = Vec::with_capacity(n);
        for _ in 0..n {
            let f = r.expect("sample")?;
            if f.len() != dim + 1 {
                return Err(r.error(format!("sample needs {} values", dim + 1)));
            }
            let vals = f.iter().map(|v| r.parse::<f64>(v, "value")).collect::<Result<Vec<_>>>()?;
            samples.push(LabeledSample::new(vals[..dim].to_vec(), vals[dim]));
        }
        r.expect("end")?;
        let data = Dataset::new(dim, Role::Source, samples)?;
        let source = SourceModel::fit(data, kernel, bandwidth, beta)?;

        let tessellation = Tessellation::read_record(&mut r)?;
        let n_cells: usize = r.value("cells", "cell count")?;
        let mut fits = Vec::with_capacity(n_cells);
        for l in 0..n_cells {
            let f = r.expect("cell")?;
            if f.len() != 7 {
                return Err(r.error("cell line needs 7 fields"));
            }
            let index: usize = r.parse(f[0], "cell index")?;
            if index != l {
                return Err(r.error(format!("expected cell {l}, found {index}")));
            }
            fits.push(CellFit {
                a: r.parse(f[1], "slope")?,
                b: r.parse(f[2], "intercept")?,
                y_center: r.parse(f[3], "center score")?,
                fallback: f[4].parse()?,
                n_window: r.parse(f[5], "window count")?,
                gram_min_eig: r.parse(f[6], "eigenvalue")?,
            });
        }
        r.expect("end")?;
        Self::from_parts(source, tessellation, fits, cfg).map_err(|e| r.error(e.to_string()))
    }
}

/// Transfer predictor holding fits only for the cells it has been asked
/// about. Cells without a fit predict the global training mean, which is
/// what the empty-cell rule gives.
#[derive(Debug, Clone)]
pub struct SparseTransfer {
    tessellation: Tessellation,
    fits: HashMap<usize, CellFit>,
    global_mean: f64,
}

impl SparseTransfer {
    pub fn tessellation(&self) -> &Tessellation {
        &self.tessellation
    }

    pub fn fit_for(&self, cell: usize) -> Option<&CellFit> {
        self.fits.get(&cell)
    }

    pub fn n_fitted(&self) -> usize {
        self.fits.len()
    }

    #[inline]
    pub fn predict_with_score(&self, x: &[f64], score: f64) -> f64 {
        match self.fits.get(&self.tessellation.locate_unchecked(x)) {
            Some(f) => f.eval(score),
            None => self.global_mean,
        }
    }
}
