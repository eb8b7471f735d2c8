//! Tessellation selection on the validation half of the target sample.
//!
//! Candidates are scored by squared validation error of their transfer
//! predictor, either as a plain mean (ERM) or as a median of block means
//! (MoM). [`anneal_select`] searches the product-tessellation space with a
//! Metropolis chain and returns the best tessellation it visited.

use std::collections::HashMap;
use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::data::{Dataset, Role};
use crate::error::{invalid_input, invalid_param, Error, Result};
use crate::rng::{RngSeed, Stream};
use crate::tessellation::{AdmissibilityConstants, AdmissibilitySummary, Tessellation};
use crate::transfer::{TransferFitter, TransferModel};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RiskEstimate {
    pub mean_risk: f64,
    /// Median of block means; equals `mean_risk` when `blocks == 1`.
    pub mom_risk: f64,
    pub n_validate: usize,
    pub blocks: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SelectionMethod {
    #[default]
    Erm,
    Mom { blocks: usize },
}

impl SelectionMethod {
    pub fn blocks(self) -> usize {
        match self {
            SelectionMethod::Erm => 1,
            SelectionMethod::Mom { blocks } => blocks,
        }
    }

    pub fn risk(self, r: &RiskEstimate) -> f64 {
        match self {
            SelectionMethod::Erm => r.mean_risk,
            SelectionMethod::Mom { .. } => r.mom_risk,
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SelectionMethod::Erm => f.write_str("erm"),
            SelectionMethod::Mom { blocks } => write!(f, "mom:{blocks}"),
        }
    }
}

impl FromStr for SelectionMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "erm" => Ok(Self::Erm),
            other => match other.strip_prefix("mom:") {
                Some(b) => b
                    .parse()
                    .map(|blocks| Self::Mom { blocks })
                    .map_err(|_| invalid_param(format!("bad block count `{b}`"))),
                None => Err(invalid_param(format!("unknown selection method `{other}`"))),
            },
        }
    }
}

/// Smallest odd `B ≥ max(5, ⌈ln(n_candidates/δ)⌉)`.
pub fn mom_block_rule(n_candidates: usize, delta: f64) -> Result<usize> {
    if n_candidates == 0 {
        return Err(invalid_param("need at least one candidate"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid_param(format!("δ must lie in (0,1), got {delta}")));
    }
    let b = ((n_candidates as f64 / delta).ln().ceil() as usize).max(5);
    Ok(if b % 2 == 0 { b + 1 } else { b })
}

/// Lower median of a non-empty slice.
pub fn lower_median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    v[(v.len() - 1) / 2]
}

/// Block partition: a seeded permutation cut into `blocks` contiguous
/// slices of `floor(n/blocks)`, remainder dropped. Each block is returned in
/// ascending index order, so a single block sums exactly like the plain mean.
pub fn mom_blocks(n: usize, blocks: usize, rng: &mut Stream) -> Result<Vec<Vec<usize>>> {
    if blocks == 0 || blocks > n {
        return Err(invalid_input(format!("{blocks} blocks for {n} validation points")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let size = n / blocks;
    Ok(order
        .chunks_exact(size)
        .take(blocks)
        .map(|c| {
            let mut b = c.to_vec();
            b.sort_unstable();
            b
        })
        .collect())
}

fn mean_over(losses: &[f64], idx: impl ExactSizeIterator<Item = usize>) -> f64 {
    let n = idx.len();
    idx.map(|i| losses[i]).sum::<f64>() / n as f64
}

/// Lower median of block means.
pub fn median_of_means(losses: &[f64], blocks: &[Vec<usize>]) -> f64 {
    let means: Vec<f64> = blocks.iter().map(|b| mean_over(losses, b.iter().copied())).collect();
    lower_median(&means)
}

fn check_validation(validate: &Dataset) -> Result<()> {
    if validate.is_empty() {
        return Err(invalid_input("validation set is empty"));
    }
    if validate.role() != Role::TargetValidate {
        return Err(invalid_input(format!("expected target-validate data, got {}", validate.role())));
    }
    Ok(())
}

fn squared_losses(model: &TransferModel, validate: &Dataset) -> Result<Vec<f64>> {
    validate.iter().map(|(x, y)| model.predict(x).map(|p| (y - p) * (y - p))).collect()
}

/// Mean squared validation error of `model`.
pub fn empirical_risk(model: &TransferModel, validate: &Dataset) -> Result<f64> {
    check_validation(validate)?;
    let losses = squared_losses(model, validate)?;
    Ok(mean_over(&losses, 0..losses.len()))
}

/// Median-of-means validation risk with `blocks` seeded blocks.
pub fn mom_risk(model: &TransferModel, validate: &Dataset, blocks: usize, rng: &mut Stream) -> Result<f64> {
    check_validation(validate)?;
    let b = mom_blocks(validate.len(), blocks, rng)?;
    Ok(median_of_means(&squared_losses(model, validate)?, &b))
}

/// Validation scorer shared by all candidates of one selection run: the
/// source scores of the validation points and the MoM blocks are fixed once.
pub struct Scorer<'a> {
    fitter: &'a TransferFitter<'a>,
    validate: &'a Dataset,
    scores: Vec<f64>,
    blocks: Vec<Vec<usize>>,
    method: SelectionMethod,
    h: f64,
    constants: AdmissibilityConstants,
}

impl<'a> Scorer<'a> {
    pub fn new(
        fitter: &'a TransferFitter<'a>,
        validate: &'a Dataset,
        method: SelectionMethod,
        constants: AdmissibilityConstants,
        rng: &mut Stream,
    ) -> Result<Self> {
        check_validation(validate)?;
        if validate.dim() != fitter.train().dim() {
            return Err(invalid_input("validation and training dimensions differ"));
        }
        let source = fitter.source();
        let scores = validate.iter().map(|(x, _)| source.predict_unchecked(x).value).collect();
        let blocks = mom_blocks(validate.len(), method.blocks(), rng)?;
        Ok(Self { fitter, validate, scores, blocks, method, h: fitter.config().h, constants })
    }

    pub fn method(&self) -> SelectionMethod {
        self.method
    }

    pub fn losses(&self, tess: &Tessellation) -> Result<Vec<f64>> {
        let sparse = self.fitter.fit_sparse(tess, self.validate.iter().map(|(x, _)| x))?;
        Ok(self
            .validate
            .iter()
            .zip(&self.scores)
            .map(|((x, y), &s)| {
                let r = y - sparse.predict_with_score(x, s);
                r * r
            })
            .collect())
    }

    pub fn evaluate(&self, tess: &Tessellation) -> Result<Candidate> {
        let losses = self.losses(tess)?;
        let risk = RiskEstimate {
            mean_risk: mean_over(&losses, 0..losses.len()),
            mom_risk: median_of_means(&losses, &self.blocks),
            n_validate: losses.len(),
            blocks: self.blocks.len(),
        };
        let admissibility = AdmissibilitySummary::quick(tess, self.fitter.train(), self.h, &self.constants);
        Ok(Candidate { tessellation: tess.clone(), risk, admissibility })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub tessellation: Tessellation,
    pub risk: RiskEstimate,
    pub admissibility: AdmissibilitySummary,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub step: usize,
    pub temperature: f64,
    /// `None` when the proposal fell outside the search space and was not scored.
    pub proposal_risk: Option<f64>,
    pub current_risk: f64,
    /// The uniform drawn for a Metropolis test, if one was needed.
    pub uniform: Option<f64>,
    pub accepted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SelectionReport {
    /// Distinct evaluated candidates, in order of first evaluation.
    pub candidates: Vec<Candidate>,
    pub chosen: usize,
    pub method: SelectionMethod,
    pub trace: Vec<TraceStep>,
    pub seed: RngSeed,
}

impl SelectionReport {
    pub fn chosen(&self) -> &Candidate {
        &self.candidates[self.chosen]
    }

    pub fn chosen_tessellation(&self) -> &Tessellation {
        &self.chosen().tessellation
    }

    pub fn selection_risk(&self, c: &Candidate) -> f64 {
        self.method.risk(&c.risk)
    }

    /// Structured text form with stable key order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "[selection]");
        let _ = writeln!(out, "method = \"{}\"", self.method);
        let _ = writeln!(out, "seed = \"{}\"", self.seed.seed);
        let _ = writeln!(out, "stream = {}", self.seed.stream);
        let _ = writeln!(out, "evaluated = {}", self.candidates.len());
        let _ = writeln!(out, "steps = {}", self.trace.len());
        let c = self.chosen();
        let _ = writeln!(out, "\n[selection.chosen]");
        write_candidate(&mut out, c);
        for (i, c) in self.candidates.iter().enumerate() {
            let _ = writeln!(out, "\n[[selection.candidate]]");
            let _ = writeln!(out, "order = {i}");
            write_candidate(&mut out, c);
        }
        out
    }

    /// One line per annealing step.
    pub fn trace_table(&self) -> String {
        let mut out = String::from("step,temperature,proposal_risk,current_risk,uniform,accepted\n");
        for t in &self.trace {
            let pr = t.proposal_risk.map(|v| format!("{v:?}")).unwrap_or_default();
            let u = t.uniform.map(|v| format!("{v:?}")).unwrap_or_default();
            let _ = writeln!(out, "{},{:?},{pr},{:?},{u},{}", t.step, t.temperature, t.current_risk, t.accepted);
        }
        out
    }
}

fn write_candidate(out: &mut String, c: &Candidate) {
    let bps: Vec<String> = c
        .tessellation
        .breakpoints()
        .iter()
        .map(|a| format!("[{}]", a.iter().map(u32::to_string).collect::<Vec<_>>().join(", ")))
        .collect();
    let _ = writeln!(out, "breakpoints = [{}]", bps.join(", "));
    let _ = writeln!(out, "resolution = {}", c.tessellation.resolution());
    let _ = writeln!(out, "cells = {}", c.tessellation.n_cells());
    let _ = writeln!(out, "mean_risk = {:?}", c.risk.mean_risk);
    let _ = writeln!(out, "mom_risk = {:?}", c.risk.mom_risk);
    let _ = writeln!(out, "blocks = {}", c.risk.blocks);
    let _ = writeln!(out, "admissible = {}", c.admissibility.admissible());
}

/// Strictly better under (risk, fewer cells, lexicographic breakpoints).
fn better(risk: f64, tess: &Tessellation, best_risk: f64, best: &Tessellation) -> bool {
    match risk.total_cmp(&best_risk) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => tess.tie_break_key() < best.tie_break_key(),
    }
}

fn argmin(candidates: &[Candidate], method: SelectionMethod) -> usize {
    let mut best = 0;
    for (i, c) in candidates.iter().enumerate().skip(1) {
        let b = &candidates[best];
        if better(method.risk(&c.risk), &c.tessellation, method.risk(&b.risk), &b.tessellation) {
            best = i;
        }
    }
    best
}

/// Score every candidate and pick the minimizer.
pub fn select_over(
    candidates: &[Tessellation],
    fitter: &TransferFitter<'_>,
    validate: &Dataset,
    method: SelectionMethod,
    constants: AdmissibilityConstants,
    seed: RngSeed,
) -> Result<SelectionReport> {
    if candidates.is_empty() {
        return Err(invalid_input("empty candidate list"));
    }
    let scorer = Scorer::new(fitter, validate, method, constants, &mut seed.stream())?;
    let evaluated = candidates.par_iter().map(|t| scorer.evaluate(t)).collect::<Result<Vec<_>>>()?;
    let chosen = argmin(&evaluated, method);
    Ok(SelectionReport { candidates: evaluated, chosen, method, trace: Vec::new(), seed })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnnealSchedule {
    /// Initial temperature as a multiple of the starting risk.
    pub t0: f64,
    /// Geometric cooling factor in `(0, 1)`.
    pub alpha: f64,
    pub steps: usize,
    pub moves_per_step: usize,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        Self { t0: 1.0, alpha: 0.95, steps: 300, moves_per_step: 1 }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.t0 >= 0.0) || !self.t0.is_finite() {
            return Err(invalid_param(format!("initial temperature must be nonnegative, got {}", self.t0)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(invalid_param(format!("cooling factor must lie in (0,1), got {}", self.alpha)));
        }
        if self.moves_per_step == 0 {
            return Err(invalid_param("moves per step must be positive"));
        }
        Ok(())
    }
}

/// The search space: product tessellations of `[0,1]^dim` on the
/// `1/resolution` grid with at most `max_cells` cells, each holding at least
/// `min_cell_count` training points.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TessellationSpace {
    pub dim: usize,
    pub resolution: u32,
    pub max_cells: u64,
    pub min_cell_count: usize,
}

impl TessellationSpace {
    /// Cap at the number of elementary cells, `m^d`.
    pub fn full(dim: usize, resolution: u32) -> Self {
        let max_cells = (resolution as u64).checked_pow(dim as u32).unwrap_or(u64::MAX);
        Self { dim, resolution, max_cells, min_cell_count: 0 }
    }

    /// Whether `tess` lies in the space for this training sample.
    pub fn contains(&self, tess: &Tessellation, train: &Dataset) -> bool {
        if tess.n_cells() > self.max_cells {
            return false;
        }
        if self.min_cell_count == 0 {
            return true;
        }
        let occupancy = tess.occupancy(train);
        occupancy.len() as u64 == tess.n_cells() && occupancy.values().all(|&c| c >= self.min_cell_count)
    }
}

/// Metropolis search from the single-cell tessellation. Returns the best
/// tessellation scored along the chain, not the final state.
pub fn anneal_select(
    space: TessellationSpace,
    fitter: &TransferFitter<'_>,
    validate: &Dataset,
    schedule: &AnnealSchedule,
    method: SelectionMethod,
    constants: AdmissibilityConstants,
    seed: RngSeed,
) -> Result<SelectionReport> {
    schedule.validate()?;
    let mut rng = seed.stream();
    let scorer = Scorer::new(fitter, validate, method, constants, &mut rng)?;

    let mut cache = CandidateCache::default();

    let mut current = Tessellation::single_cell(space.dim, space.resolution)?;
    let (_, mut current_risk) = cache.score(&scorer, &current)?;
    let scale = if current_risk > 0.0 { current_risk } else { 1.0 };
    let mut temperature = schedule.t0 * scale;
    let mut trace = Vec::with_capacity(schedule.steps * schedule.moves_per_step);

    for step in 0..schedule.steps {
        for _ in 0..schedule.moves_per_step {
            let proposal = current.neighbor_move(&mut rng);
            if !space.contains(&proposal, fitter.train()) {
                trace.push(TraceStep {
                    step,
                    temperature,
                    proposal_risk: None,
                    current_risk,
                    uniform: None,
                    accepted: false,
                });
                continue;
            }
            let (_, risk) = cache.score(&scorer, &proposal)?;
            let delta = risk - current_risk;
            let (accepted, uniform) = if delta < 0.0 {
                (true, None)
            } else if temperature > 0.0 {
                let u: f64 = rng.random();
                (u < (-delta / temperature).exp(), Some(u))
            } else {
                (false, None)
            };
            trace.push(TraceStep { step, temperature, proposal_risk: Some(risk), current_risk, uniform, accepted });
            if accepted {
                current = proposal;
                current_risk = risk;
            }
        }
        temperature *= schedule.alpha;
    }
    // every scored proposal counts as visited, so the chosen one is optimal
    // among all evaluated candidates
    let chosen = argmin(&cache.candidates, method);
    Ok(SelectionReport { candidates: cache.candidates, chosen, method, trace, seed })
}

#[derive(Default)]
struct CandidateCache {
    candidates: Vec<Candidate>,
    index: HashMap<Tessellation, usize>,
}

impl CandidateCache {
    fn score(&mut self, scorer: &Scorer<'_>, t: &Tessellation) -> Result<(usize, f64)> {
        let method = scorer.method();
        if let Some(&i) = self.index.get(t) {
            return Ok((i, method.risk(&self.candidates[i].risk)));
        }
        let c = scorer.evaluate(t)?;
        let r = method.risk(&c.risk);
        self.index.insert(t.clone(), self.candidates.len());
        self.candidates.push(c);
        Ok((self.candidates.len() - 1, r))
    }
}
