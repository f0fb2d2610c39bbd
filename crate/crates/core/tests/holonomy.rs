use std::sync::Arc;

use pesin_core::holonomy::{act_verify, intersect_leaf_with_transversal, PoincareMap, Transversal, DEFAULT_DEPTH, DEFAULT_RADII};
use pesin_core::linalg::Vector;
use pesin_core::manifold::{local_stable_chart, LyapunovCoords, StableChart, StableChartOptions};
use pesin_core::oseledets::PesinParams;
use pesin_core::scenarios::{skew_holonomy_oracle, ScenarioSpec};
use pesin_core::Error;

const PARAMS: PesinParams = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 2.0, r_prime: 1.0, c_prime: 3.0 };

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

fn base(spec: &ScenarioSpec) -> (Arc<LyapunovCoords>, StableChart) {
    let word = spec.word(60).unwrap();
    let coords = Arc::new(LyapunovCoords::build(&word, &Vector::zeros(2), &PARAMS, 60).unwrap());
    let leaf = local_stable_chart(&coords, 3.0, &StableChartOptions { nodes: 33, n_shoot: None }).unwrap();
    (coords, leaf)
}

fn tilted(coords: &Arc<LyapunovCoords>, leaf: &StableChart, c: f64, tau: f64) -> Transversal {
    Transversal::from_implicit_on_leaf(coords.clone(), leaf, move |q: &Vector| v1(q[0] - c - tau * q[1].tanh()), 0.2, 33).unwrap()
}

fn grid(w: &Transversal) -> Vec<f64> {
    let c = w.center()[0];
    (0..9).map(|i| c - 0.1 + 0.025 * i as f64).collect()
}

#[test]
fn s4_vertical_pair_slides_by_the_series_offset() {
    let spec = ScenarioSpec::s4(7);
    let word = spec.word(60).unwrap();
    let (coords, leaf) = base(&spec);
    let pm = PoincareMap::new(tilted(&coords, &leaf, 0.0, 0.0), tilted(&coords, &leaf, 0.3, 0.0)).unwrap();
    let delta = skew_holonomy_oracle(&spec, &word, 0.0, 0.3).unwrap().value;
    for u in grid(pm.source()) {
        let y = pm.source().point(&v1(u));
        let image = pm.map(&v1(u)).unwrap().point;
        assert!((image[1] - y[1] - delta).abs() < 1e-8);
    }
    let report = act_verify(&pm, &grid(pm.source()), 1e-6, DEFAULT_DEPTH, &DEFAULT_RADII);
    assert!(report.pass && report.skipped.is_empty(), "{}", report.max_deviation);
}

#[test]
fn s4_jacobian_deviation_shrinks_with_the_tilt() {
    let (coords, leaf) = base(&ScenarioSpec::s4(2));
    let mut previous = f64::INFINITY;
    for tau in [0.2, 0.1, 0.05, 0.025] {
        let pm = PoincareMap::new(tilted(&coords, &leaf, 0.0, tau), tilted(&coords, &leaf, 0.4, tau)).unwrap();
        let report = act_verify(&pm, &grid(pm.source()), 1.0, DEFAULT_DEPTH, &DEFAULT_RADII);
        assert!(report.skipped.is_empty());
        for row in &report.rows {
            assert!(row.discrepancy <= 1e-3f64.max(row.ratio_quadrature_error));
        }
        assert!(report.max_deviation <= previous * 1.1, "tau {tau}: {} after {previous}", report.max_deviation);
        previous = report.max_deviation;
    }
    assert!(previous < 0.05);
}

#[test]
fn a_nearly_tangent_transversal_is_rejected() {
    let (coords, leaf) = base(&ScenarioSpec::s3());
    // almost parallel to E: the cubic base leaf crosses it three times
    let w = Transversal::from_fn(coords.clone(), &v1(0.0), 0.01, 33, |u: &Vector| -1e3 * u).unwrap();
    let err = intersect_leaf_with_transversal(&leaf, &w).unwrap_err();
    assert!(matches!(err, Error::NonUniqueness { solutions: 3, .. }), "{err}");
    // a vertical transversal through the base is crossed exactly once, at the base
    let v = tilted(&coords, &leaf, 0.0, 0.0);
    let (_, _, p) = intersect_leaf_with_transversal(&leaf, &v).unwrap();
    assert!(p.norm() < 1e-10);
}
