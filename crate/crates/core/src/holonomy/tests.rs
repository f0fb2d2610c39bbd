use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Error;
use crate::linalg::{Matrix, Vector};
use crate::manifold::{local_stable_chart, LyapunovCoords, StableChart, StableChartOptions};
use crate::metric::LyapunovMetric;
use crate::oseledets::{stable_splitting, PesinParams};
use crate::rds::OmegaWord;
use crate::scenarios::{skew_holonomy_oracle, skew_leaf_slope_oracle, ScenarioSpec};

const HORIZON: usize = 60;

fn skew_params() -> PesinParams {
    PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 2.0, r_prime: 1.0, c_prime: 3.0 }
}

struct Setup {
    spec: ScenarioSpec,
    word: OmegaWord,
    coords: Arc<LyapunovCoords>,
    leaf: StableChart,
}

fn setup(spec: ScenarioSpec, params: PesinParams) -> Setup {
    let word = spec.word(HORIZON).unwrap();
    let split = stable_splitting(&word, &Vector::zeros(2), &params, HORIZON).unwrap();
    let metric = LyapunovMetric::build(Arc::new(split), params, HORIZON).unwrap();
    let coords = Arc::new(LyapunovCoords::new(&word, Arc::new(metric)).unwrap());
    let leaf = local_stable_chart(&coords, 3.0, &StableChartOptions { nodes: 33, n_shoot: None }).unwrap();
    Setup { spec, word, coords, leaf }
}

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

/// Transversal `x = c + tau tanh(y)` around its crossing with the base leaf.
fn tilted(s: &Setup, c: f64, tau: f64) -> Transversal {
    Transversal::from_implicit_on_leaf(s.coords.clone(), &s.leaf, move |q: &Vector| v1(q[0] - c - tau * q[1].tanh()), 0.2, 33)
        .unwrap()
}

fn grid(w: &Transversal, m: usize, frac: f64) -> Vec<f64> {
    let c = w.center()[0];
    let r = frac * w.radius();
    (0..m).map(|i| c - r + 2.0 * r * i as f64 / (m - 1) as f64).collect()
}

/// Skew leaves are vertical translates of one another, so sliding
/// `(x1(y), y)` to `x = c2` moves `y` by `l(c2) - l(x1)` and
/// `J = (1 - l'(x1) x1'(y)) |t2| / |t1|` with `t = (x', 1)`.
fn skew_jacobian_oracle(s: &Setup, c1: f64, tau1: f64, c2: f64, tau2: f64, y: f64, y2: f64) -> f64 {
    let x1 = c1 + tau1 * y.tanh();
    let dx1 = tau1 / y.cosh().powi(2);
    let dx2 = tau2 / y2.cosh().powi(2);
    let x2 = c2 + tau2 * y2.tanh();
    let l1 = skew_leaf_slope_oracle(&s.spec, &s.word, x1).unwrap().value;
    let l2 = skew_leaf_slope_oracle(&s.spec, &s.word, x2).unwrap().value;
    // dy2 (1 - l'(x2) x2') = dy (1 - l'(x1) x1')
    let dy2_dy = (1.0 - l1 * dx1) / (1.0 - l2 * dx2);
    dy2_dy * (1.0 + dx2 * dx2).sqrt() / (1.0 + dx1 * dx1).sqrt()
}

#[test]
fn vertical_pair_translates_by_the_series_offset() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.0), tilted(&s, 0.4, 0.0)).unwrap();
    let delta = skew_holonomy_oracle(&s.spec, &s.word, 0.0, 0.4).unwrap().value;
    assert!((delta + 0.2610).abs() < 1e-4);
    for u in grid(pm.source(), 9, 0.9) {
        let y = pm.source().point(&v1(u));
        let c = pm.map(&v1(u)).unwrap();
        assert!((c.point[0] - 0.4).abs() < 1e-12);
        assert!((c.point[1] - y[1] - delta).abs() < 1e-9, "u = {u}: {} vs {delta}", c.point[1] - y[1]);
    }
}

#[test]
fn vertical_pair_has_unit_jacobian() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.0), tilted(&s, 0.4, 0.0)).unwrap();
    let report = act_verify(&pm, &grid(pm.source(), 9, 0.5), 1e-6, DEFAULT_DEPTH, &DEFAULT_RADII);
    assert!(report.skipped.is_empty(), "{:?}", report.skipped);
    assert_eq!(report.rows.len(), 9);
    assert!(report.pass, "max |J - 1| = {}", report.max_deviation);
}

#[test]
fn leaf_chart_and_shooting_agree_on_the_crossing() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let w1 = tilted(&s, 0.0, 0.0);
    let w2 = tilted(&s, 0.4, 0.0);
    let (_, u, pt) = intersect_leaf_with_transversal(&s.leaf, &w2).unwrap();
    let pm = PoincareMap::new(w1.clone(), w2).unwrap();
    let (u0, dist) = w1.parameter_of(&Vector::zeros(2)).unwrap();
    assert!(dist < 1e-12);
    let c = pm.map(&u0).unwrap();
    assert!((c.u[0] - u[0]).abs() < 1e-8);
    assert!((&c.point - pt).norm() < 1e-8);
}

#[test]
fn tilted_jacobian_matches_the_leaf_slope_formula() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.1), tilted(&s, 0.4, 0.0)).unwrap();
    for u in grid(pm.source(), 9, 0.5) {
        let e = jacobian_estimate(&pm, u, DEFAULT_DEPTH, &DEFAULT_RADII).unwrap();
        let exact = skew_jacobian_oracle(&s, 0.0, 0.1, 0.4, 0.0, e.point[1], e.image[1]);
        assert!((e.value_det - exact).abs() < 1e-6, "det {} vs {exact}", e.value_det);
        assert!((e.value_ratio - exact).abs() < 1e-6, "ratio {} vs {exact}", e.value_ratio);
        assert!(e.methods_agree());
        assert!((exact - 1.0).abs() > 0.03);
    }
}

#[test]
fn finite_differences_of_the_map_give_the_jacobian() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.1), tilted(&s, 0.4, 0.2)).unwrap();
    let h = 1e-4;
    for u in grid(pm.source(), 5, 0.5) {
        let up = pm.map(&v1(u + h)).unwrap().u[0];
        let um = pm.map(&v1(u - h)).unwrap().u[0];
        let u2 = pm.map(&v1(u)).unwrap().u;
        let t1 = pm.source().tangent(&v1(u)).column(0).norm();
        let t2 = pm.target().tangent(&u2).column(0).norm();
        let fd = t2 * ((up - um) / (2.0 * h)).abs() / t1;
        let e = jacobian_det_ratio(&pm, &v1(u), DEFAULT_DEPTH).unwrap();
        assert!((fd - e.value).abs() < 1e-4, "fd {fd} vs det {}", e.value);
    }
}

#[test]
fn holonomy_is_an_involution() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.1), tilted(&s, 0.4, -0.1)).unwrap();
    for u in grid(pm.source(), 7, 0.8) {
        assert!(pm.involution_error(&v1(u)).unwrap() < 1e-8);
    }
}

#[test]
fn reverse_jacobian_is_reciprocal() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.1), tilted(&s, 0.4, 0.0)).unwrap();
    for u in grid(pm.source(), 5, 0.4) {
        let (d, r) = reciprocity_defect(&pm, u, DEFAULT_DEPTH, &DEFAULT_RADII).unwrap();
        assert!(d.abs() < 1e-9 && r.abs() < 1e-6, "{d} {r}");
    }
}

#[test]
fn identical_transversals_give_the_identity() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let w = tilted(&s, 0.0, 0.1);
    let pm = PoincareMap::new(w.clone(), w).unwrap();
    for u in grid(pm.source(), 5, 0.5) {
        let c = pm.map(&v1(u)).unwrap();
        assert!((c.u[0] - u).abs() < 1e-12);
        let e = jacobian_estimate(&pm, u, DEFAULT_DEPTH, &DEFAULT_RADII).unwrap();
        assert!((e.value_det - 1.0).abs() < 1e-12 && (e.value_ratio - 1.0).abs() < 1e-9);
    }
}

#[test]
fn linear_holonomy_does_not_move_points() {
    // S1 leaves are the vertical lines, horizontal transversals slide straight up
    let params = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
    let s = setup(ScenarioSpec::s1(), params);
    let w1 = Transversal::from_implicit_on_leaf(s.coords.clone(), &s.leaf, |q: &Vector| v1(q[1]), 0.2, 33).unwrap();
    let w2 = Transversal::from_implicit_on_leaf(s.coords.clone(), &s.leaf, |q: &Vector| v1(q[1] - 0.4), 0.2, 33).unwrap();
    let pm = PoincareMap::new(w1, w2).unwrap();
    for u in grid(pm.source(), 5, 0.5) {
        let y = pm.source().point(&v1(u));
        let c = pm.map(&v1(u)).unwrap();
        assert!((c.point[0] - y[0]).abs() < 1e-12 && (c.point[1] - 0.4).abs() < 1e-12);
        let e = jacobian_estimate(&pm, u, DEFAULT_DEPTH, &DEFAULT_RADII).unwrap();
        assert!((e.value_det - 1.0).abs() < 1e-9 && (e.value_ratio - 1.0).abs() < 1e-9);
    }
}

#[test]
fn random_skew_tilts_match_the_leaf_slope_formula() {
    for seed in [0, 3] {
        let s = setup(ScenarioSpec::s4(seed), skew_params());
        for tau in [0.05, 0.15] {
            let pm = PoincareMap::new(tilted(&s, 0.0, tau), tilted(&s, 0.4, tau)).unwrap();
            for u in grid(pm.source(), 3, 0.5) {
                let e = jacobian_estimate(&pm, u, DEFAULT_DEPTH, &DEFAULT_RADII).unwrap();
                let exact = skew_jacobian_oracle(&s, 0.0, tau, 0.4, tau, e.point[1], e.image[1]);
                assert!((e.value_det - exact).abs() < 1e-6 && (e.value_ratio - exact).abs() < 1e-6, "seed {seed} tau {tau}");
            }
        }
    }
}

#[test]
fn steep_transversal_has_several_crossings() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    // psi(u) = -M u meets the cubic leaf three times on a tiny domain
    let w = Transversal::from_fn(s.coords.clone(), &v1(0.0), 0.01, 33, |u: &Vector| -1e3 * u).unwrap();
    match intersect_leaf_with_transversal(&s.leaf, &w) {
        Err(Error::NonUniqueness { solutions, .. }) => assert_eq!(solutions, 3),
        other => panic!("expected non-uniqueness, got {other:?}"),
    }
}

#[test]
fn transversal_missing_the_leaf_is_reported() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let w1 = tilted(&s, 0.0, 0.0);
    let far = Transversal::from_implicit(s.coords.clone(), |q: &Vector| v1(q[0] - 0.4), &v1(1.0), 0.2, 33).unwrap();
    let pm = PoincareMap::new(w1.clone(), far).unwrap();
    assert!(matches!(pm.map(w1.center()), Err(Error::TransversalityFailure(_))));
}

#[test]
fn shrink_schedule_is_checked() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.0), tilted(&s, 0.4, 0.0)).unwrap();
    let edge = pm.source().center()[0] + 0.19;
    assert!(matches!(
        jacobian_measure_ratio(&pm, &v1(edge), &DEFAULT_RADII),
        Err(Error::ShrinkSchedule { .. })
    ));
}

#[test]
fn smallness_is_reported_not_enforced() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    let pm = PoincareMap::new(tilted(&s, 0.0, 0.0), tilted(&s, 0.4, 0.0)).unwrap();
    let flags = smallness(&pm, s.leaf.lip, 1e-3);
    assert!(!flags.transversals_small);
    assert!(flags.norm_w1 > 0.0 && flags.norm_w2 > 0.0);
}

#[test]
fn determinant_bound_holds_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut u = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    for d in 2..=4 {
        for p in 1..d {
            let a = bounds::scaled_matrix(d, d, &u(d * d), 3.0);
            let b = &a + bounds::scaled_matrix(d, d, &u(d * d), 0.1);
            let e1 = bounds::subspace_from(d, p, &u(d * p));
            let e2 = crate::linalg::orth(&(&e1 + bounds::scaled_matrix(d, p, &u(d * p), 0.1)));
            assert!(determinant_perturbation_check(&a, &e1, &b, &e2).unwrap() >= 0.0);
        }
    }
}

#[test]
fn equal_subspaces_and_maps_have_zero_slack_terms() {
    let a = Matrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    let e = Matrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let margin = determinant_perturbation_check(&a, &e, &a, &e).unwrap();
    assert!(margin.abs() < 1e-15);
    assert!((determinant_constant(2) - 2.0 * 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn graph_aperture_is_bounded_by_the_slopes() {
    let a = Matrix::from_row_slice(1, 1, &[0.3]);
    let b = Matrix::from_row_slice(1, 1, &[-0.2]);
    let margin = graph_aperture_bound_check(&a, &b).unwrap();
    // angle between slopes 0.3 and -0.2
    let gamma = (0.3f64.atan() + 0.2f64.atan()).sin();
    assert!((margin - (1.0 - gamma)).abs() < 1e-12);
    assert!(graph_aperture_bound_check(&a, &Matrix::zeros(2, 1)).is_err());
}

#[test]
fn transversal_graphs_satisfy_the_volume_bounds() {
    let s = setup(ScenarioSpec::s3(), skew_params());
    for tau in [0.0, 0.1, 0.3] {
        let w = tilted(&s, 0.4, tau);
        let c = w.center()[0];
        let r = w.radius();
        let m = graph_volume_bound_check(|t| w.chart().derivative(&v1(t)), c - r, c + r, None);
        assert!(m.lower >= -1e-8 && m.upper >= -1e-8, "{m:?}");
    }
    // a straight line of slope 1 sits exactly on the upper bound
    let m = graph_volume_bound_check(|_| Matrix::from_element(1, 1, 1.0), 0.0, 1.0, None);
    assert!(m.upper.abs() < 1e-12 && (m.graph_measure - 2f64.sqrt()).abs() < 1e-12);
}


