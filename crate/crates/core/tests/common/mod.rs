//! Independent oracles shared by the integration and acceptance tests.

#![allow(dead_code)]

use tl2_core::prelude::*;
use tl2_core::synth::{sample_regression, squared_norm};

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Minimizer of a unimodal `f` on `[lo, hi]` by golden-section search.
pub fn golden_section(mut lo: f64, mut hi: f64, f: impl Fn(f64) -> f64) -> f64 {
    let mut c = hi - INV_PHI * (hi - lo);
    let mut d = lo + INV_PHI * (hi - lo);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if hi - lo < 1e-12 {
            break;
        }
        if fc < fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - INV_PHI * (hi - lo);
            fc = f(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + INV_PHI * (hi - lo);
            fd = f(d);
        }
    }
    0.5 * (lo + hi)
}

/// `argmin_{a,b ∈ [-10,10]} Σ w (y - a z - b)²` by nested golden-section
/// search: outer over the slope on the profile, inner over the intercept.
pub fn brute_force_wls(points: &[(f64, f64, f64)]) -> (f64, f64) {
    let objective = |a: f64, b: f64| points.iter().map(|&(w, z, y)| w * (y - a * z - b).powi(2)).sum::<f64>();
    let best_b = |a: f64| golden_section(-10.0, 10.0, |b| objective(a, b));
    let a = golden_section(-10.0, 10.0, |a| objective(a, best_b(a)));
    (a, best_b(a))
}

/// Gaussian density, written out independently of the crate's kernels.
pub fn gaussian(u: f64) -> f64 {
    (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Random training cell: `n` points inside `cell`, responses affine in the
/// true source score plus noise.
pub fn cell_sample(cell: &Cell, n: usize, a0: f64, b0: f64, sigma: f64, seed: RngSeed) -> Dataset {
    use rand::Rng;
    use rand_distr::StandardNormal;
    let mut rng = seed.stream();
    let d = cell.lo.len();
    let mut xs = Vec::with_capacity(n * d);
    let mut ys = Vec::with_capacity(n);
    for _ in 0..n {
        let x: Vec<f64> = (0..d).map(|j| cell.lo[j] + (cell.hi[j] - cell.lo[j]) * rng.random::<f64>()).collect();
        let e: f64 = rng.sample(StandardNormal);
        ys.push(a0 * squared_norm(&x) + b0 + sigma * e);
        xs.extend(x);
    }
    Dataset::from_columns(d, Role::TargetTrain, xs, ys).expect("points inside the cube")
}

/// Nadaraya-Watson source fit of `‖x‖²` with `n` noisy points.
pub fn norm_source(dim: usize, n: usize, h: f64, seed: RngSeed) -> SourceModel {
    let data = sample_regression(dim, n, squared_norm, 0.1, Role::Source, &mut seed.stream());
    SourceModel::fit(data, Kernel::Gaussian, h, 1.0).expect("valid source")
}

/// `(w, ẑ, y)` triples of `cell`, computed from the public source API.
pub fn oracle_triples(cell: &Cell, train: &Dataset, source: &SourceModel, h: f64, h_bar: f64) -> Vec<(f64, f64, f64)> {
    let yc = source.predict(&cell.center).unwrap();
    train
        .iter()
        .filter(|(x, _)| cell.contains(x))
        .map(|(x, y)| {
            let z = source.predict(x).unwrap() - yc;
            let dist = x.iter().zip(&cell.center).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            (gaussian(dist / h) * gaussian(z.abs() / h_bar), z, y)
        })
        .collect()
}
