//! Monte Carlo checks of the statistical behaviour promised by each module.

mod common;

use rayon::prelude::*;
use tl2_core::diagnostics::{median, rate_probe, RateAxis};
use tl2_core::prelude::*;
use tl2_core::selection::{mom_risk, select_over};
use tl2_core::synth::{gen_source_with, gen_target_with, sample_regression, sample_uniform_points, squared_norm};

#[test]
fn target_size_rate_is_parametric() {
    let r = rate_probe(RateAxis::TargetParametric, &[100, 400, 1600], 30, RngSeed::new(1, 0)).unwrap();
    assert!((-1.3..=-0.6).contains(&r.slope), "{r:?}");
}

#[test]
fn source_size_rate() {
    let r = rate_probe(RateAxis::SourcePlugIn, &[100, 1000, 10_000], 20, RngSeed::new(2, 0)).unwrap();
    assert!((-1.0..=-0.35).contains(&r.slope), "{r:?}");
}

#[test]
fn cell_count_bias_rate() {
    let r = rate_probe(RateAxis::CellBias, &[2, 4, 8, 16], 1, RngSeed::new(3, 0)).unwrap();
    assert!(r.slope <= -2.0, "{r:?}");
}

#[test]
fn rate_probe_is_reproducible() {
    let a = rate_probe(RateAxis::TargetParametric, &[50, 100, 200], 4, RngSeed::new(4, 0)).unwrap();
    let b = rate_probe(RateAxis::TargetParametric, &[50, 100, 200], 4, RngSeed::new(4, 0)).unwrap();
    assert_eq!(a, b);
}

#[test]
fn transfer_function_error_shrinks_with_training_size() {
    // single cell; the target is g(y) = y² of the true score
    let cell_tess = Tessellation::single_cell(1, 4).unwrap();
    let source = common::norm_source(1, 2000, 0.05, RngSeed::new(5, 0));
    let cfg = FitConfig::default().with_bandwidths(0.5, 0.3);
    let yc = source.predict(&[0.5]).unwrap();
    let errors: Vec<f64> = [200usize, 800, 3200]
        .iter()
        .map(|&n| {
            let runs: Vec<f64> = (0..20u64)
                .into_par_iter()
                .map(|r| {
                    let train = sample_regression(1, n, |x| squared_norm(x).powi(2), 0.1, Role::TargetTrain, &mut RngSeed::new(6, r * 7 + n as u64).stream());
                    let model = fit_transfer(&cell_tess, &train, &source, &cfg).unwrap();
                    let grid: Vec<f64> = (0..=20).map(|k| yc - 0.3 + 0.03 * k as f64).collect();
                    grid.iter().map(|&y| (model.transfer_function_at(&[0.5], y).unwrap() - y * y).powi(2)).sum::<f64>()
                        / grid.len() as f64
                })
                .collect();
            median(&runs)
        })
        .collect();
    assert!(errors[0] > errors[1] && errors[1] > errors[2], "{errors:?}");
}

#[test]
fn mom_is_closer_to_clean_risk_under_contamination() {
    let spec = SyntheticSpec::new(1, 300, 160, TargetFn::Target1);
    let closer = (0..100u64)
        .into_par_iter()
        .filter(|&r| {
            let s = RngSeed::new(7, r);
            let source = SourceModel::fit(gen_source_with(&spec, &mut s.child(1).stream()), Kernel::Gaussian, 0.15, 1.0).unwrap();
            let target = gen_target_with(&spec, &mut s.child(2).stream());
            let (train, validate) = split_target(&target, &mut s.child(3).stream()).unwrap();
            let model = fit_transfer(&Tessellation::grid(1, 20, vec![vec![10]]).unwrap(), &train, &source, &FitConfig::default()).unwrap();
            let n_bad = validate.len() / 20;
            let mut k = 0;
            let dirty = validate.map_responses(|_, y| {
                k += 1;
                if k <= n_bad { y + 50.0 } else { y }
            });
            let clean = empirical_risk(&model, &validate).unwrap();
            let mean = empirical_risk(&model, &dirty).unwrap();
            let mom = mom_risk(&model, &dirty, 9, &mut s.child(4).stream()).unwrap();
            (mom - clean).abs() < (mean - clean).abs()
        })
        .count();
    assert!(closer >= 80, "MoM closer in {closer}/100");
}

#[test]
fn erm_oracle_inequality_band() {
    let family: Vec<Tessellation> = [vec![], vec![10], vec![5], vec![15], vec![5, 10, 15], vec![8]]
        .into_iter()
        .map(|b| Tessellation::grid(1, 20, vec![b]).unwrap())
        .collect();
    let sigma: f64 = 0.1;
    let spec = SyntheticSpec::new(1, 300, 80, TargetFn::Target1);
    let test = sample_uniform_points(1, 5000, &mut RngSeed::new(8, 0).stream());
    let runs: Vec<(f64, f64)> = (0..100u64)
        .into_par_iter()
        .map(|r| {
            let s = RngSeed::new(9, r);
            let source = SourceModel::fit(gen_source_with(&spec, &mut s.child(1).stream()), Kernel::Gaussian, 0.15, 1.0).unwrap();
            let target = gen_target_with(&spec, &mut s.child(2).stream());
            let (train, validate) = split_target(&target, &mut s.child(3).stream()).unwrap();
            let fitter = TransferFitter::new(&train, &source, FitConfig::default().with_bandwidths(0.35, 0.35)).unwrap();
            let risks: Vec<f64> = family
                .iter()
                .map(|t| {
                    let m = fitter.fit(t).unwrap();
                    test.iter().map(|x| (m.predict(x).unwrap() - spec.target_value(x)).powi(2)).sum::<f64>() / test.len() as f64
                })
                .collect();
            let report = select_over(&family, &fitter, &validate, SelectionMethod::Erm, Default::default(), s.child(4)).unwrap();
            let best = risks.iter().copied().fold(f64::INFINITY, f64::min);
            let r_max = risks.iter().copied().fold(0.0, f64::max);
            (risks[report.chosen] - best, r_max)
        })
        .collect();
    let regret = runs.iter().map(|r| r.0).sum::<f64>() / runs.len() as f64;
    let r_max = runs.iter().map(|r| r.1).fold(0.0, f64::max);
    let band = 3.0 * (sigma * sigma + r_max) * (family.len() as f64 / 40.0).sqrt();
    assert!(regret <= band, "mean regret {regret} vs band {band}");
}

#[test]
fn mse_against_truth_matches_fourth_moment() {
    let e = mse_against_truth(|_| 0.0, squared_norm, 1, 50_000, &mut RngSeed::new(10, 0).stream()).unwrap();
    assert!((e.mean - 0.2).abs() <= 3.0 * e.std_error);
}

#[test]
fn source_sample_moment() {
    let spec = SyntheticSpec::new(1, 100_000, 1, TargetFn::Target1).with_noise(Noise::none()).with_seed(RngSeed::new(11, 0));
    let s = gen_source(&spec).unwrap();
    assert!((s.mean_response() - 1.0 / 3.0).abs() < 0.01);
}
