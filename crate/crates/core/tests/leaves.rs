use std::sync::Arc;

use pesin_core::holonomy::graph_volume_bound_check;
use pesin_core::linalg::Vector;
use pesin_core::manifold::{
    evolve_transversal, local_stable_chart, stable_contraction_check, LyapunovCoords, StableChartOptions, ManifoldConstants,
    TransformOptions, TransversalSeed, DEFAULT_DELTA_DELTA, SLACK_TOL,
};
use pesin_core::oseledets::PesinParams;
use pesin_core::scenarios::{skew_leaf_oracle, ScenarioSpec};

const PARAMS: PesinParams = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 2.0, r_prime: 1.0, c_prime: 3.0 };

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

fn coords(spec: &ScenarioSpec, horizon: usize) -> Arc<LyapunovCoords> {
    let word = spec.word(horizon).unwrap();
    Arc::new(LyapunovCoords::build(&word, &Vector::zeros(2), &PARAMS, horizon).unwrap())
}

fn max_leaf_error(spec: &ScenarioSpec) -> f64 {
    let c = coords(spec, 60);
    // Lyapunov units differ between words: size the chart to reach |x| = 1
    let radius = 1.1 / c.metric().e_hat(0)[(0, 0)].abs();
    let chart = local_stable_chart(&c, radius, &StableChartOptions { nodes: 33, n_shoot: None }).unwrap();
    let word = spec.word(60).unwrap();
    (0..21)
        .map(|i| {
            let x = -1.0 + 0.1 * i as f64;
            let p = chart.point(&v1(chart.param_at_coordinate(0, x).unwrap()));
            let oracle = skew_leaf_oracle(spec, &word, (0.0, 0.0), p[0]).unwrap().value;
            (p[1] - oracle).abs()
        })
        .fold(0.0, f64::max)
}

#[test]
fn s3_leaf_matches_the_series_on_the_unit_interval() {
    let err = max_leaf_error(&ScenarioSpec::s3());
    assert!(err < 1e-6, "sup error {err:e}");
}

#[test]
fn s4_leaves_match_the_series_for_five_seeds() {
    for seed in 0..5 {
        let err = max_leaf_error(&ScenarioSpec::s4(seed));
        assert!(err < 1e-5, "seed {seed}: sup error {err:e}");
    }
}

#[test]
fn s4_graph_transform_stays_inside_the_ledger() {
    for seed in [1, 4] {
        let c = coords(&ScenarioSpec::s4(seed), 25);
        let q = ManifoldConstants::new(&PARAMS).q1(&PARAMS, 0.5, 2, DEFAULT_DELTA_DELTA).value;
        let seed_chart = TransversalSeed::tanh(v1(0.0), v1(0.0), q / 4.0, 0.05);
        let ev = evolve_transversal(&c, &seed_chart, &PARAMS, 0.5, q, DEFAULT_DELTA_DELTA, 20, &TransformOptions::default()).unwrap();
        assert_eq!(ev.violations, 0);
        for row in &ev.ledger {
            // bounds recomputed here rather than read back from the row
            let n = row.n as f64;
            let psi_bound = (0.25 + 0.5) * q * ((PARAMS.a + 7.0 * PARAMS.eps) * n).exp();
            let dpsi_bound = 0.5 * (-14.0 * PARAMS.eps * n).exp();
            assert!(row.sup_psi <= psi_bound + SLACK_TOL, "{row:?}");
            assert!(row.sup_dpsi <= dpsi_bound + SLACK_TOL, "{row:?}");
        }
        assert!(ev.max_invariance_residual() < 1e-8);
    }
}

#[test]
fn leaf_charts_satisfy_the_graph_volume_bounds() {
    for spec in [ScenarioSpec::s3(), ScenarioSpec::s4(2)] {
        let c = coords(&spec, 60);
        let chart = local_stable_chart(&c, 3.0, &StableChartOptions { nodes: 33, n_shoot: None }).unwrap();
        let m = graph_volume_bound_check(|t| chart.derivative(&v1(t)), -3.0, 3.0, None);
        assert!(m.lower >= -1e-8 && m.upper >= -1e-8, "{m:?}");
    }
}

#[test]
fn s3_leaf_distances_halve_each_step() {
    let c = coords(&ScenarioSpec::s3(), 60);
    let chart = local_stable_chart(&c, 3.0, &StableChartOptions { nodes: 33, n_shoot: None }).unwrap();
    let rep = stable_contraction_check(&c, &chart, &v1(-1.0), &v1(1.5), 10).unwrap();
    assert!((rep.mean_ratio / 0.5 - 1.0).abs() < 0.02, "{}", rep.mean_ratio);
}
