use std::sync::Arc;

use approx::assert_relative_eq;

use super::*;
use crate::error::Error;
use crate::linalg::{Matrix, Vector};
use crate::metric::LyapunovMetric;
use crate::oseledets::{stable_splitting, stable_splitting_unchecked, PesinParams};
use crate::scenarios::{skew_leaf_oracle, ScenarioSpec};

const S3_PARAMS: PesinParams = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 2.0, r_prime: 1.0, c_prime: 3.0 };

fn coords_for(spec: &ScenarioSpec, params: PesinParams, horizon: usize) -> LyapunovCoords {
    let w = spec.word(horizon).unwrap();
    let split = stable_splitting(&w, &Vector::zeros(2), &params, horizon).unwrap();
    let m = LyapunovMetric::build(Arc::new(split), params, horizon).unwrap();
    LyapunovCoords::new(&w, Arc::new(m)).unwrap()
}

fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

#[test]
fn q1_is_the_minimum_of_four_terms() {
    let p = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
    let c = 0.5;
    let q1 = ManifoldConstants::new(&p).q1(&p, c, 2, 0.25);
    // direct substitution
    let a_const = 4.0 / (1.0 - (-0.003f64).exp()).sqrt();
    let eps0 = (-0.6 + 0.006f64).exp() - (-0.6 + 0.003f64).exp();
    let c0 = 4.0 * a_const * 0.003f64.exp();
    let r0 = eps0 / c0;
    let t = [
        r0 / (2.0 * a_const),
        ((-0.003f64).exp() - (-0.6 + 0.018f64).exp()) / (2.0 * c0),
        c * ((-0.027f64).exp() - (-0.6 + 0.003f64).exp()) / (4.0 * c0),
        0.25,
    ];
    for (got, want) in q1.terms.iter().zip(&t) {
        assert_relative_eq!(*got, *want, max_relative = 1e-12);
    }
    assert_eq!(q1.value, t.iter().copied().fold(f64::INFINITY, f64::min));
    let shown = q1.to_string();
    for x in t.iter().chain([r0, c0, a_const].iter()) {
        assert!(shown.contains(&format!("{x:.6e}")), "{shown} misses {x:.6e}");
    }
}

#[test]
fn coordinate_remainders_vanish_to_first_order() {
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 20);
    for n in [0, 5, 19] {
        let dec = CoordinateDecomposition::at(&c, n).unwrap();
        let (a0, b0) = dec.remainder(&v1(0.0), &v1(0.0)).unwrap();
        assert_eq!(a0[0], 0.0);
        assert_eq!(b0[0], 0.0);
        let h = 1e-6;
        for (s, u) in [(h, 0.0), (0.0, h)] {
            let (ap, bp) = dec.remainder(&v1(s), &v1(u)).unwrap();
            let (am, bm) = dec.remainder(&v1(-s), &v1(-u)).unwrap();
            let d = ((&ap - &am) / (2.0 * h)).norm().max(((&bp - &bm) / (2.0 * h)).norm());
            assert!(d < 1e-6, "n = {n}: derivative of the remainder {d}");
        }
        assert!(dec.coupling < 1e-8);
    }
}

#[test]
fn vertical_lines_map_to_vertical_lines() {
    // the skew map keeps x = c vertical and halves c; the seed is steeper
    // than any admissible C, so the steps run without the gate
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 10);
    let x0 = 0.3;
    let (_, u0, psi) = line_seed(&c, 0, &Vector::from_vec(vec![x0, 0.0]), &Matrix::from_column_slice(2, 1, &[0.0, 1.0])).unwrap();
    let mut chart = GraphChart::from_fn(0, &u0, 0.5, DEFAULT_NODES, psi).unwrap();
    let opts = TransformOptions::default();
    for n in 0..6 {
        chart = graph_transform_step(&c, &chart, 0.5, &opts).unwrap();
        let want = x0 / 2f64.powi(n + 1);
        for u in chart.sample_points() {
            let p = c.point(chart.n, &chart.eval(&u), &u);
            assert!((p[0] - want).abs() < 1e-12, "step {}: x = {} vs {want}", n + 1, p[0]);
        }
        assert!(chart.invariance_residual < 1e-8);
    }
}

#[test]
fn s1_axis_is_invariant() {
    let p = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
    let c = coords_for(&ScenarioSpec::s1(), p, 25);
    let q = ManifoldConstants::new(&p).q1(&p, 0.5, 2, DEFAULT_DELTA_DELTA).value;
    let seed = TransversalSeed::tanh(v1(0.0), v1(0.0), q / 4.0, 0.0);
    let ev = evolve_transversal(&c, &seed, &p, 0.5, q, DEFAULT_DELTA_DELTA, 20, &TransformOptions::default()).unwrap();
    for ch in &ev.charts {
        assert!(ch.sup_psi == 0.0 && ch.sup_dpsi == 0.0);
    }
}

fn s3_tanh_evolution(kappa: f64) -> crate::Result<Evolution> {
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 25);
    let q = ManifoldConstants::new(&S3_PARAMS).q1(&S3_PARAMS, 0.5, 2, DEFAULT_DELTA_DELTA).value;
    let seed = TransversalSeed::tanh(v1(0.0), v1(0.0), q / 4.0, kappa);
    evolve_transversal(&c, &seed, &S3_PARAMS, 0.5, q, DEFAULT_DELTA_DELTA, 20, &TransformOptions::default())
}

#[test]
fn s3_tanh_seed_respects_the_ledger() {
    let ev = s3_tanh_evolution(0.05).unwrap();
    assert_eq!(ev.violations, 0);
    assert_eq!(ev.ledger.len(), 21);
    for row in &ev.ledger {
        let bound = 0.5 * (-14.0 * S3_PARAMS.eps * row.n as f64).exp();
        assert!(row.sup_dpsi <= bound + SLACK_TOL, "{row:?}");
        assert!(row.anchor_error < 1e-12);
    }
    assert!(ev.max_invariance_residual() < 1e-8);
}

#[test]
fn steep_seed_is_rejected() {
    match s3_tanh_evolution(0.9) {
        Err(Error::Precondition { condition, .. }) => assert_eq!(condition, "sup ||D psi_0||'_0 <= C"),
        other => panic!("expected a precondition error, got {other:?}"),
    }
}

#[test]
fn too_large_q_is_rejected() {
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 25);
    let seed = TransversalSeed::tanh(v1(0.0), v1(0.0), 1e-3, 0.05);
    let err = evolve_transversal(&c, &seed, &S3_PARAMS, 0.5, 1e-2, DEFAULT_DELTA_DELTA, 5, &TransformOptions::default()).unwrap_err();
    assert!(matches!(err, Error::Precondition { condition: "0 < q <= q1_C", .. }));
}

#[test]
fn resolution_does_not_change_the_charts() {
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 25);
    let q = ManifoldConstants::new(&S3_PARAMS).q1(&S3_PARAMS, 0.5, 2, DEFAULT_DELTA_DELTA).value;
    let seed = TransversalSeed::tanh(v1(0.0), v1(0.0), q / 4.0, 0.05);
    let diff = uniqueness_probe(&c, &seed, &S3_PARAMS, 0.5, q, 10, 9).unwrap();
    assert!(diff < 1e-6 * q, "{diff}");
}

/// First coordinate of the chart point is monotone in `xi` on S3; find the
/// `xi` over a given `x` by bisection.
fn xi_over(chart: &StableChart, x: f64) -> f64 {
    let (mut lo, mut hi) = (-chart.radius, chart.radius);
    let f = |t: f64| chart.point(&v1(t))[0] - x;
    let up = f(hi) > f(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == up {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

#[test]
fn s3_chart_matches_the_series_leaf() {
    let spec = ScenarioSpec::s3();
    let c = coords_for(&spec, S3_PARAMS, 60);
    let chart = local_stable_chart(&c, 3.0, &StableChartOptions { nodes: 33, n_shoot: None }).unwrap();
    assert!(chart.beyond_alpha);
    assert_eq!(chart.eval(&v1(0.0))[0], 0.0);
    let word = spec.word(60).unwrap();
    for i in 0..21 {
        let x = -1.0 + 0.1 * i as f64;
        let p = chart.point(&v1(xi_over(&chart, x)));
        assert!((p[0] - x).abs() < 1e-12);
        let oracle = skew_leaf_oracle(&spec, &word, (0.0, 0.0), x).unwrap().value;
        assert!((p[1] - oracle).abs() < 1e-6, "x = {x}: {} vs {oracle}", p[1]);
    }
}

#[test]
fn s1_chart_is_the_axis() {
    let p = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
    let c = coords_for(&ScenarioSpec::s1(), p, 60);
    let chart = local_stable_chart(&c, 1.0, &StableChartOptions::default()).unwrap();
    for v in chart.values() {
        assert!(v[0].abs() < 1e-12);
    }
}

#[test]
fn identity_has_no_stable_chart() {
    let spec = ScenarioSpec::identity(2);
    let w = spec.word(60).unwrap();
    let split = stable_splitting_unchecked(&w, &Vector::zeros(2), -0.6, 0.0, 1, 60).unwrap();
    let m = LyapunovMetric::build(Arc::new(split), S3_PARAMS, 60).unwrap();
    let c = LyapunovCoords::new(&w, Arc::new(m)).unwrap();
    let err = local_stable_chart(&c, 0.5, &StableChartOptions::default()).unwrap_err();
    assert!(matches!(err, Error::ChartDomainTooLarge { .. }), "{err:?}");
}

#[test]
fn later_charts_stay_within_the_lipschitz_schedule() {
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 60);
    let alpha0 = ManifoldConstants::new(&S3_PARAMS).alpha0();
    let c0 = local_stable_chart(&c, alpha0, &StableChartOptions::default()).unwrap();
    assert!(!c0.beyond_alpha);
    let (mut alpha, mut beta, mut gamma) = (c0.alpha, c0.beta, c0.gamma);
    for n in 1..=5 {
        (alpha, beta, gamma) = advance_constants(alpha, beta, gamma, S3_PARAMS.eps);
        let cn = local_stable_chart_at(&c, n, alpha, Some(beta), &StableChartOptions::default()).unwrap();
        assert!(!cn.beyond_alpha);
        assert_relative_eq!(cn.alpha, alpha, max_relative = 1e-12);
        assert_relative_eq!(cn.gamma, gamma, max_relative = 1e-12);
        assert!(cn.lip_ok(), "n = {n}: {} > {}", cn.lip, cn.beta);
    }
}

#[test]
fn s3_leaf_contracts_by_one_half() {
    let c = coords_for(&ScenarioSpec::s3(), S3_PARAMS, 60);
    let chart = local_stable_chart(&c, 3.0, &StableChartOptions::default()).unwrap();
    let rep = stable_contraction_check(&c, &chart, &v1(-1.0), &v1(1.5), 10).unwrap();
    assert!(rep.holds && !rep.truncated);
    assert!((rep.mean_ratio - 0.5).abs() < 0.01, "{}", rep.mean_ratio);
    let same = stable_contraction_check(&c, &chart, &v1(0.7), &v1(0.7), 10).unwrap();
    assert!(same.distances.iter().all(|&d| d == 0.0));
}

#[test]
fn s1_leaf_contracts_exactly() {
    let p = PesinParams { a: -0.6, b: 0.0, k: 1, eps: 0.0015, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
    let c = coords_for(&ScenarioSpec::s1(), p, 60);
    let chart = local_stable_chart(&c, 1.0, &StableChartOptions::default()).unwrap();
    let rep = stable_contraction_check(&c, &chart, &v1(-0.5), &v1(0.8), 8).unwrap();
    for r in &rep.ratios {
        assert_relative_eq!(*r, 0.5, max_relative = 1e-12);
    }
}

#[test]
fn global_membership_on_s3() {
    let spec = ScenarioSpec::s3();
    let w = spec.word(40).unwrap();
    let x = Vector::zeros(2);
    let y_leaf: f64 = -(0..60).map(|k| 0.5f64.powi(k + 1) * 0.5f64.powi(k).sin()).sum::<f64>();
    let on = global_stable_test(&w, &x, &Vector::from_vec(vec![1.0, y_leaf]), 20).unwrap();
    assert!(on.member);
    assert!((on.rate - 0.5f64.ln()).abs() < 0.05, "{}", on.rate);
    let off = global_stable_test(&w, &x, &Vector::from_vec(vec![0.0, 0.1]), 20).unwrap();
    assert!(!off.member && !off.diverged);
    assert_relative_eq!(off.rate, 2f64.ln(), max_relative = 1e-9);
    let same = global_stable_test(&w, &x, &x, 20).unwrap();
    assert!(same.member);
    assert_eq!(same.rate, f64::NEG_INFINITY);
}

#[test]
fn escaping_orbit_is_not_a_member() {
    let spec = ScenarioSpec::s3();
    let w = spec.word(100).unwrap();
    let r = global_stable_test(&w, &Vector::zeros(2), &Vector::from_vec(vec![0.0, 1.0]), 100).unwrap();
    assert!(r.diverged && !r.member);
    assert!(global_stable_test(&w, &Vector::zeros(2), &Vector::zeros(2), 5).is_err());
}
