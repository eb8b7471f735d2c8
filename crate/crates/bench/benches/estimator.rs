use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tl2_bench::fixture;
use tl2_core::prelude::*;

fn nw(c: &mut Criterion) {
    let mut group = c.benchmark_group("nw_predict");
    for n in [1_000, 10_000] {
        let (source, _, _) = fixture(4, n, 20, 1);
        let model = SourceModel::fit(source, Kernel::Gaussian, 0.3, 1.0).unwrap();
        let x = [0.3, 0.6, 0.1, 0.9];
        group.bench_with_input(BenchmarkId::from_parameter(n), &model, |b, m| {
            b.iter(|| nw_predict(m, black_box(&x)).unwrap())
        });
    }
    group.finish();
}

fn transfer(c: &mut Criterion) {
    let mut group = c.benchmark_group("fit_transfer");
    let (source, train, _) = fixture(2, 2_000, 400, 2);
    let source = SourceModel::fit(source, Kernel::Gaussian, 0.2, 1.0).unwrap();
    let cfg = FitConfig::default().with_bandwidths(0.3, 0.3);
    for cuts in [0u32, 3, 9] {
        let bps = vec![(1..=cuts).map(|k| k * 20 / (cuts + 1)).collect(), vec![10]];
        let tess = Tessellation::grid(2, 20, bps).unwrap();
        group.bench_with_input(BenchmarkId::new("cells", tess.n_cells()), &tess, |b, t| {
            b.iter(|| fit_transfer(t, &train, &source, &cfg).unwrap())
        });
    }
    group.finish();
}

fn anneal(c: &mut Criterion) {
    let (source, train, validate) = fixture(1, 100, 20, 3);
    let source = SourceModel::fit(source, Kernel::Gaussian, 100f64.powf(-1.0 / 3.0), 1.0).unwrap();
    let cfg = FitConfig::default().with_bandwidths(20f64.powf(-1.0 / 3.0), 20f64.powf(-1.0 / 3.0));
    let fitter = TransferFitter::new(&train, &source, cfg).unwrap();
    let schedule = AnnealSchedule::default();
    c.bench_function("anneal_select/300_steps", |b| {
        b.iter(|| {
            anneal_select(
                TessellationSpace::full(1, 20),
                &fitter,
                &validate,
                &schedule,
                SelectionMethod::Erm,
                AdmissibilityConstants::default(),
                RngSeed::new(4, 0),
            )
            .unwrap()
        })
    });
}

fn pipeline(c: &mut Criterion) {
    let spec = SyntheticSpec::new(1, 100, 20, TargetFn::Target1).with_seed(RngSeed::new(5, 0));
    let (source, target) = (gen_source(&spec).unwrap(), gen_target(&spec).unwrap());
    let cfg = PipelineConfig::default();
    c.bench_function("run_tl2/target1_d1", |b| {
        b.iter(|| run_tl2(source.clone(), &target, &cfg, RngSeed::new(6, 0)).unwrap())
    });
}

criterion_group!(benches, nw, transfer, anneal, pipeline);
criterion_main!(benches);
