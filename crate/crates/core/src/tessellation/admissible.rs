//! Admissibility diagnostics for a tessellation.
//!
//! Checks the three geometric clauses (minimum cell mass, locality radius,
//! regular shape) and reports per-cell effective sample sizes and local Gram
//! eigenvalues. Nothing here rejects a tessellation; callers decide.

use crate::data::Dataset;
use crate::kernel::distance;
use crate::source::SourceModel;
use crate::transfer::{weighted_affine_fit, FitConfig};

use super::Tessellation;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilityConstants {
    pub c_mass: f64,
    pub c_rad: f64,
    pub r_loc: f64,
}

impl Default for AdmissibilityConstants {
    fn default() -> Self {
        Self { c_mass: 1.0, c_rad: 4.0, r_loc: 0.25 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellDiagnostics {
    pub index: usize,
    /// Training points inside the cell.
    pub mass: usize,
    pub diameter: f64,
    pub inscribed_radius: f64,
    /// Training points within `h` of the representative point and within
    /// `h̄` of its source score.
    pub effective_size: usize,
    pub gram_min_eig: f64,
    pub gram_max_eig: f64,
}

/// Pass/fail per clause with the thresholds that were applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibilitySummary {
    pub mass_ok: bool,
    pub radius_ok: bool,
    pub shape_ok: bool,
    pub mass_threshold: f64,
    pub radius_threshold: f64,
    pub shape_threshold: f64,
}

impl AdmissibilitySummary {
    pub fn admissible(&self) -> bool {
        self.mass_ok && self.radius_ok && self.shape_ok
    }

    /// Clause checks from cell geometry and occupancy alone. Costs
    /// `O(n + d·m)` regardless of the number of cells.
    pub fn quick(tess: &Tessellation, train: &Dataset, h: f64, constants: &AdmissibilityConstants) -> Self {
        let d = tess.dim() as i32;
        let m = tess.resolution() as f64;
        let mass_threshold = constants.c_mass * train.len() as f64 * h.powi(d);
        let radius_threshold = constants.c_rad * h;
        let shape_threshold = constants.r_loc * h;

        let occupancy = tess.occupancy(train);
        let min_mass = if (occupancy.len() as u64) < tess.n_cells() {
            0
        } else {
            occupancy.values().copied().min().unwrap_or(0)
        };
        let mut max_diam_sq = 0.0;
        let mut min_width = f64::INFINITY;
        for axis in tess.breakpoints() {
            let mut prev = 0u32;
            let mut widest = 0u32;
            for &k in axis.iter().chain(std::iter::once(&tess.resolution())) {
                widest = widest.max(k - prev);
                min_width = min_width.min((k - prev) as f64 / m);
                prev = k;
            }
            max_diam_sq += (widest as f64 / m).powi(2);
        }
        Self {
            mass_ok: min_mass as f64 >= mass_threshold,
            radius_ok: max_diam_sq.sqrt() <= radius_threshold,
            shape_ok: 0.5 * min_width >= shape_threshold,
            mass_threshold,
            radius_threshold,
            shape_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub cells: Vec<CellDiagnostics>,
    pub summary: AdmissibilitySummary,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.summary.admissible()
    }
}

/// Full per-cell diagnostics. Materializes every cell and evaluates the
/// source model at each representative point.
pub fn check_admissible(
    tess: &Tessellation,
    train: &Dataset,
    source: &SourceModel,
    cfg: &FitConfig,
    constants: &AdmissibilityConstants,
) -> AdmissibilityReport {
    let (h, h_bar) = (cfg.h, cfg.h_bar);
    let scores: Vec<f64> = train.iter().map(|(x, _)| source.predict_unchecked(x).value).collect();
    let assignment = tess.assign(train);

    let cells: Vec<CellDiagnostics> = tess
        .cells()
        .map(|cell| {
            let y_center = source.predict_unchecked(&cell.center).value;
            let mut mass = 0;
            let mut effective_size = 0;
            let mut pts = Vec::new();
            for (i, (x, y)) in train.iter().enumerate() {
                let dist = distance(x, &cell.center);
                let z = scores[i] - y_center;
                if dist <= h && z.abs() <= h_bar {
                    effective_size += 1;
                }
                if assignment[i] == cell.index {
                    mass += 1;
                }
                if !cfg.restrict_to_cell || assignment[i] == cell.index {
                    pts.push((cfg.weight(dist, z), z, y));
                }
            }
            let (min_eig, max_eig) = gram_eigenvalues(&pts);
            // cross-check against the solver's own eigenvalue computation
            debug_assert!({
                let fit = weighted_affine_fit(pts.iter().copied(), y_center, 0.0, cfg);
                fit.n_window < 2 || (fit.gram_min_eig - min_eig).abs() <= 1e-9 * (1.0 + max_eig)
            });
            CellDiagnostics {
                index: cell.index,
                mass,
                diameter: cell.diameter(),
                inscribed_radius: cell.inscribed_radius(),
                effective_size,
                gram_min_eig: min_eig,
                gram_max_eig: max_eig,
            }
        })
        .collect();

    let base = AdmissibilitySummary::quick(tess, train, h, constants);
    let summary = AdmissibilitySummary {
        mass_ok: cells.iter().all(|c| c.mass as f64 >= base.mass_threshold),
        radius_ok: cells.iter().all(|c| c.diameter <= base.radius_threshold),
        shape_ok: cells.iter().all(|c| c.inscribed_radius >= base.shape_threshold),
        ..base
    };
    AdmissibilityReport { cells, summary }
}

fn gram_eigenvalues(pts: &[(f64, f64, f64)]) -> (f64, f64) {
    let (mut s, mut sz, mut szz) = (0.0, 0.0, 0.0);
    for &(w, z, _) in pts {
        s += w;
        sz += w * z;
        szz += w * z * z;
    }
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    let z_bar = sz / s;
    let centered: f64 = pts.iter().map(|&(w, z, _)| w * (z - z_bar).powi(2)).sum();
    let trace = s + szz;
    let max_eig = 0.5 * (trace + ((s - szz).powi(2) + 4.0 * sz * sz).sqrt());
    ((s * centered / max_eig).max(0.0), max_eig)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{LabeledSample, Role};
    use crate::kernel::Kernel;
    use crate::rng::RngSeed;
    use crate::source::nw_fit;
    use rand::Rng;

    fn uniform(n: usize, d: usize, seed: u64, role: Role) -> Dataset {
        let mut rng = RngSeed::new(seed, 0).stream();
        let s = (0..n)
            .map(|_| {
                let x: Vec<f64> = (0..d).map(|_| rng.random()).collect();
                let y = x.iter().map(|v| v * v).sum();
                LabeledSample::new(x, y)
            })
            .collect();
        Dataset::new(d, role, s).unwrap()
    }

    #[test]
    fn single_cell_report() {
        let train = uniform(40, 2, 1, Role::TargetTrain);
        let source = nw_fit(uniform(100, 2, 2, Role::Source), Kernel::Gaussian, 0.2).unwrap();
        let tess = Tessellation::single_cell(2, 10).unwrap();
        let cfg = FitConfig::default().with_bandwidths(2f64.sqrt(), 10.0);
        let r = check_admissible(&tess, &train, &source, &cfg, &AdmissibilityConstants::default());
        assert_eq!(r.cells.len(), 1);
        let c = &r.cells[0];
        assert_eq!(c.mass, 40);
        assert!((c.diameter - 2f64.sqrt()).abs() < 1e-15);
        assert!(c.inscribed_radius <= c.diameter / 2.0);
        // windows cover everything
        assert_eq!(c.effective_size, 40);
        assert!(c.gram_min_eig >= 0.0 && c.gram_min_eig <= c.gram_max_eig);
        // h = √2: mass threshold 40·2 = 80 > 40
        assert!(!r.summary.mass_ok);
        assert!(r.summary.radius_ok && r.summary.shape_ok);
    }

    #[test]
    fn empty_cell_fails_mass() {
        let mut train = uniform(30, 1, 3, Role::TargetTrain).samples();
        train.retain(|s| s.x[0] > 0.5);
        let train = Dataset::new(1, Role::TargetTrain, train).unwrap();
        let source = nw_fit(uniform(50, 1, 4, Role::Source), Kernel::Gaussian, 0.2).unwrap();
        let tess = Tessellation::grid(1, 4, vec![vec![2]]).unwrap();
        let cfg = FitConfig::default().with_bandwidths(0.25, 0.5);
        let consts = AdmissibilityConstants { c_mass: 1e-6, ..Default::default() };
        let r = check_admissible(&tess, &train, &source, &cfg, &consts);
        assert_eq!(r.cells[0].mass, 0);
        assert_eq!(r.cells.iter().map(|c| c.mass).sum::<usize>(), train.len());
        assert!(!r.summary.mass_ok);
        assert_eq!(AdmissibilitySummary::quick(&tess, &train, 0.25, &consts), r.summary);
    }

    #[test]
    fn uniform_grid_geometry_passes_with_defaults() {
        let m = 10;
        let train = uniform(2000, 1, 5, Role::TargetTrain);
        let source = nw_fit(uniform(50, 1, 6, Role::Source), Kernel::Gaussian, 0.2).unwrap();
        let tess = Tessellation::finest(1, m).unwrap();
        let h = 1.0 / m as f64;
        let cfg = FitConfig::default().with_bandwidths(h, 0.3);
        let r = check_admissible(&tess, &train, &source, &cfg, &AdmissibilityConstants::default());
        assert!(r.summary.radius_ok && r.summary.shape_ok);
        assert_eq!(r.cells.iter().map(|c| c.mass).sum::<usize>(), 2000);
        assert_eq!(AdmissibilitySummary::quick(&tess, &train, h, &Default::default()), r.summary);
    }
}
