use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hyperstab_core::fitting::DEFAULT_TOL_RANK;
use hyperstab_core::{
    hyers_limit, jordan_triple_nullspace_dim, random_element, run_experiment, AlgebraConfig, AlgebraDescriptor,
    ControlFunction, ExperimentConfig, IterationScheme, MapUnderTest, PerturbationSpec, RunOptions, ScalarField,
    Theorem,
};

fn norms(c: &mut Criterion) {
    for n in [2usize, 4, 8] {
        let alg = AlgebraDescriptor::full_matrix(n, ScalarField::Complex).unwrap();
        let x = random_element(&alg, 1, 1.0).unwrap();
        c.bench_function(&format!("norm/M{n}(C)"), |b| b.iter(|| black_box(&x).norm().unwrap()));
    }
}

fn limits(c: &mut Criterion) {
    let alg = AlgebraDescriptor::full_matrix(3, ScalarField::Real).unwrap();
    let a = random_element(&alg, 2, 1.0).unwrap();
    let x = random_element(&alg, 3, 1.0).unwrap();
    let exact = MapUnderTest::inner(a.clone());
    let dir = random_element(&alg, 4, 1.0).unwrap();
    let perturbed = MapUnderTest::inner(a)
        .with_perturbation(PerturbationSpec::power_radial(dir, 0.1, 0.5).unwrap())
        .unwrap();
    let scheme = IterationScheme::default();
    let plain = scheme.with_accelerate(false);
    c.bench_function("hyers_limit/exact", |b| b.iter(|| hyers_limit(&exact, black_box(&x), &scheme).unwrap()));
    c.bench_function("hyers_limit/power-radial/accelerated", |b| {
        b.iter(|| hyers_limit(&perturbed, black_box(&x), &scheme).unwrap())
    });
    c.bench_function("hyers_limit/power-radial/plain", |b| b.iter(|| hyers_limit(&perturbed, black_box(&x), &plain).unwrap()));
}

fn nullspace(c: &mut Criterion) {
    let mut g = c.benchmark_group("nullspace");
    g.sample_size(10);
    for n in [2usize, 3] {
        let alg = AlgebraDescriptor::full_matrix(n, ScalarField::Real).unwrap();
        g.bench_function(format!("jordan-triple/M{n}"), |b| {
            b.iter(|| jordan_triple_nullspace_dim(&alg, 3 * n.pow(4), 0, DEFAULT_TOL_RANK).unwrap())
        });
    }
    g.finish();
}

fn pipeline(c: &mut Criterion) {
    let mut cfg = ExperimentConfig::skeleton("bench", Theorem::ThmMain, AlgebraConfig::full(2, ScalarField::Real));
    cfg.controls.phi = ControlFunction::power_sum(0.1, 0.5, 0.5).unwrap();
    cfg.controls.psi = cfg.controls.phi;
    let exp = cfg.build(0).unwrap();
    let mut g = c.benchmark_group("pipeline");
    g.sample_size(20);
    g.bench_function("thm-main/M2(R)", |b| b.iter(|| run_experiment(&exp, &RunOptions::default()).unwrap()));
    g.finish();
}

criterion_group!(benches, norms, limits, nullspace, pipeline);
criterion_main!(benches);
