use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use pesin_bench::{coords, leaf, tilted_pair, PARAMS};
use pesin_core::holonomy::{jacobian_det_ratio, jacobian_measure_ratio, DEFAULT_DEPTH, DEFAULT_RADII};
use pesin_core::linalg::Vector;
use pesin_core::manifold::{evolve_transversal, ManifoldConstants, TransformOptions, TransversalSeed};
use pesin_core::oseledets::lyapunov_spectrum;
use pesin_core::scenarios::ScenarioSpec;

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum");
    for n in [1_000usize, 10_000] {
        let word = ScenarioSpec::s2(0).word(n).unwrap();
        g.bench_with_input(BenchmarkId::new("s2", n), &n, |b, &n| b.iter(|| lyapunov_spectrum(&word, &Vector::zeros(2), n, 1).unwrap()));
    }
    g.finish();
}

fn leaf_chart(c: &mut Criterion) {
    let s3 = coords(&ScenarioSpec::s3(), 60);
    let mut g = c.benchmark_group("leaf_chart");
    for nodes in [17usize, 33] {
        g.bench_with_input(BenchmarkId::new("s3", nodes), &nodes, |b, &m| b.iter(|| leaf(&s3, m)));
    }
    g.finish();
}

fn graph_transform(c: &mut Criterion) {
    let s3 = coords(&ScenarioSpec::s3(), 60);
    let q = ManifoldConstants::new(&PARAMS).q1(&PARAMS, 0.5, 2, 0.25).value;
    let seed = TransversalSeed::tanh(Vector::zeros(1), Vector::zeros(1), q / 4.0, 0.05);
    c.bench_function("graph_transform/s3_20_steps", |b| {
        b.iter(|| evolve_transversal(&s3, &seed, &PARAMS, 0.5, q, 0.25, 20, &TransformOptions::default()).unwrap())
    });
}

fn holonomy_jacobian(c: &mut Criterion) {
    let u = Vector::from_element(1, 0.0);
    let mut g = c.benchmark_group("holonomy_jacobian");
    g.sample_size(20);
    for (name, spec) in [("s3", ScenarioSpec::s3()), ("s4", ScenarioSpec::s4(2))] {
        let pm = tilted_pair(&spec, 0.1);
        let u = &u + Vector::from_element(1, pm.source().center()[0]);
        // fresh maps so the crossing cache does not hide the solver cost
        g.bench_function(BenchmarkId::new("determinant", name), |b| b.iter(|| jacobian_det_ratio(&pm.reversed().reversed(), &u, DEFAULT_DEPTH).unwrap()));
        g.bench_function(BenchmarkId::new("measure_ratio", name), |b| {
            b.iter(|| jacobian_measure_ratio(&pm.reversed().reversed(), &u, &DEFAULT_RADII).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, spectrum, leaf_chart, graph_transform, holonomy_jacobian);
criterion_main!(benches);
