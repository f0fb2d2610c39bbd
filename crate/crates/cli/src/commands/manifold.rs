//! `pesin manifold`: the local stable leaf of the origin against its oracle,
//! and the graph-transform ledger of an evolved transversal.

use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use pesin_core::linalg::{orth, Vector};
use pesin_core::manifold::{
    evolve_transversal, local_stable_chart, LyapunovCoords, StableChart, StableChartOptions, ManifoldConstants, TransformOptions,
    TransversalSeed,
};
use pesin_core::rds::OmegaWord;
use pesin_core::scenarios::{skew_leaf_oracle, ScenarioSpec};

use super::{collect_ordered, num, par_map, to_vec, v1, write_csv, write_svg};
use crate::config::{ExperimentConfig, ManifoldConfig};
use crate::output::{Cell, RunReport, Table};
use crate::svg::{Plot, Series, Style};
use crate::CliError;

/// Leaf chart of the origin. Without an explicit radius the chart is sized
/// so that the leaf reaches `|x| = reach` (skew maps) or Euclidean length
/// `reach` along `E_0` (everything else).
pub fn base_leaf(spec: &ScenarioSpec, mc: &ManifoldConfig, cfg: &ExperimentConfig) -> Result<(OmegaWord, Arc<LyapunovCoords>, StableChart), CliError> {
    let params = cfg.pesin_params()?;
    let word = spec.word(mc.horizon)?;
    let coords = Arc::new(LyapunovCoords::build(&word, &Vector::zeros(word.dim()), &params, mc.horizon)?);
    let radius = match mc.radius {
        Some(r) => r,
        None => {
            let e = coords.metric().e_hat(0);
            let scale = if spec.is_skew() { e[(0, 0)].abs() } else { e.column(0).norm() };
            1.1 * mc.reach / scale
        }
    };
    let leaf = local_stable_chart(&coords, radius, &StableChartOptions { nodes: mc.nodes, n_shoot: None })?;
    Ok((word, coords, leaf))
}

/// Leaf samples with their oracle points: the closed-form series for skew
/// maps, the linear subspace `E_0` for linear ones.
pub fn leaf_samples(
    spec: &ScenarioSpec,
    word: &OmegaWord,
    coords: &LyapunovCoords,
    leaf: &StableChart,
    mc: &ManifoldConfig,
) -> Result<Vec<(f64, Vector, Vector)>, CliError> {
    let m = mc.oracle_points.max(2);
    let ts: Vec<f64> = (0..m).map(|i| -1.0 + 2.0 * i as f64 / (m - 1) as f64).collect();
    if spec.is_skew() {
        let res = par_map(&ts, |&t| -> pesin_core::Result<(f64, Vector, Vector)> {
            let xi = leaf.param_at_coordinate(0, mc.reach * t)?;
            let p = leaf.point(&v1(xi));
            let y = skew_leaf_oracle(spec, word, (0.0, 0.0), p[0])?.value;
            Ok((xi, p.clone(), Vector::from_vec(vec![p[0], y])))
        });
        collect_ordered(res)
    } else {
        let q = orth(coords.metric().split().e0());
        Ok(ts
            .iter()
            .map(|&t| {
                let xi = leaf.radius * t;
                let p = leaf.point(&v1(xi));
                let r = &q * (q.transpose() * &p);
                (xi, p, r)
            })
            .collect())
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let mc = cfg.section(&cfg.manifold, "manifold")?;
    let spec = cfg.scenario_spec()?;
    let params = cfg.pesin_params()?;
    let (word, coords, leaf) = base_leaf(&spec, mc, cfg)?;
    let samples = leaf_samples(&spec, &word, &coords, &leaf, mc)?;
    let d = word.dim();

    let mut header = vec!["param".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend((1..=d).map(|i| format!("oracle_{i}")));
    header.push("error".into());
    let mut leaf_table = Table::new(&header);
    let mut leaf_error: f64 = 0.0;
    for (xi, p, r) in &samples {
        let err = (p - r).norm();
        leaf_error = leaf_error.max(err);
        let mut row: Vec<Cell> = vec![(*xi).into()];
        row.extend(p.iter().chain(r.iter()).map(|&v| Cell::F(v)));
        row.push(err.into());
        leaf_table.push(row);
    }

    // graph transform of a tanh transversal anchored at the origin
    let tc = &mc.transversal;
    let q1 = ManifoldConstants::new(&params).q1(&params, tc.c, d, tc.delta_delta);
    let q = tc.q_frac * q1.value;
    let seed = TransversalSeed::tanh(Vector::zeros(coords.k()), Vector::zeros(coords.p()), tc.delta0_frac * q, tc.kappa);
    let evo = evolve_transversal(&coords, &seed, &params, tc.c, q, tc.delta_delta, tc.steps, &TransformOptions::default())?;
    let mut ledger = Table::new(&[
        "n",
        "radius",
        "sup_psi",
        "psi_bound",
        "psi_margin",
        "sup_dpsi",
        "dpsi_bound",
        "dpsi_margin",
        "anchor_error",
        "invariance_residual",
        "newton_residual",
    ]);
    for r in &evo.ledger {
        ledger.push(vec![
            r.n.into(),
            r.radius.into(),
            r.sup_psi.into(),
            r.psi_bound.into(),
            r.psi_margin.into(),
            r.sup_dpsi.into(),
            r.dpsi_bound.into(),
            r.dpsi_margin.into(),
            r.anchor_error.into(),
            r.invariance_residual.into(),
            r.newton_residual.into(),
        ]);
    }
    let invariance = evo.max_invariance_residual();
    let min_margin = evo.ledger.iter().map(|r| r.psi_margin.min(r.dpsi_margin)).fold(f64::INFINITY, f64::min);
    let pass = leaf_error <= mc.leaf_tol && evo.violations == 0 && invariance < 1e-8;

    let mut files = Vec::new();
    write_csv(out, "leaf.csv", &leaf_table, &mut files)?;
    write_csv(out, "ledger.csv", &ledger, &mut files)?;

    let dense: Vec<(f64, f64)> = (0..=200)
        .map(|i| leaf.point(&v1(leaf.radius * (-1.0 + i as f64 / 100.0))))
        .map(|p| (p[0], p[1]))
        .collect();
    let oracle: Vec<(f64, f64)> = samples.iter().map(|(_, _, r)| (r[0], r[1])).collect();
    let leaves = Plot::new(format!("{}: local stable leaf of the origin", spec.name), "x", "y")
        .with(Series::new("computed leaf", dense, Style::Line))
        .with(Series::new("oracle", oracle, Style::Markers));
    write_svg(out, "leaf.svg", &leaves, &mut files)?;

    let mut charts = Plot::new("evolved transversals (rescaled to the unit ball)", "u / delta_n", "psi_n / delta_n");
    let picks: Vec<usize> = [0, evo.charts.len() / 4, evo.charts.len() / 2, evo.charts.len() - 1].into_iter().collect();
    for &i in picks.iter().collect::<std::collections::BTreeSet<_>>() {
        let ch = &evo.charts[i];
        let pts = (0..=100)
            .map(|j| {
                let t = -1.0 + j as f64 / 50.0;
                let u = &ch.center + Vector::from_element(ch.center.len(), t * ch.radius);
                (t, ch.eval(&u)[0] / ch.radius)
            })
            .collect();
        charts.series.push(Series::new(format!("n = {}", ch.n), pts, Style::Line));
    }
    write_svg(out, "transversals.svg", &charts, &mut files)?;

    let mut ledger_plot = Plot::new("graph-transform ledger", "n", "value");
    ledger_plot.log_y = true;
    let col = |f: fn(&pesin_core::manifold::LedgerRow) -> f64| evo.ledger.iter().map(|r| (r.n as f64, f(r))).collect::<Vec<_>>();
    ledger_plot = ledger_plot
        .with(Series::new("sup |psi_n|'", col(|r| r.sup_psi), Style::Markers))
        .with(Series::new("psi bound", col(|r| r.psi_bound), Style::Line))
        .with(Series::new("sup |D psi_n|'", col(|r| r.sup_dpsi), Style::Markers))
        .with(Series::new("D psi bound", col(|r| r.dpsi_bound), Style::Line));
    write_svg(out, "ledger.svg", &ledger_plot, &mut files)?;

    let rows = samples
        .iter()
        .map(|(xi, p, r)| json!({"param": xi, "point": to_vec(p), "oracle": to_vec(r), "error": (p - r).norm()}))
        .collect();
    let summary = json!({
        "leaf_radius": leaf.radius,
        "leaf_lip": leaf.lip,
        "leaf_error": leaf_error,
        "leaf_tol": mc.leaf_tol,
        "q1": num(q1.value),
        "q1_terms": q1.terms.iter().map(|&t| num(t)).collect::<Vec<_>>(),
        "q": q,
        "delta0": seed.radius,
        "steps": tc.steps,
        "violations": evo.violations,
        "min_ledger_margin": num(min_margin),
        "max_invariance_residual": invariance,
        "ledger": evo.ledger,
    });
    Ok(RunReport {
        command: "manifold".into(),
        config_hash: cfg.hash(),
        scenario: spec.name.clone(),
        seed: cfg.seed,
        summary,
        rows,
        pass,
        files,
    })
}
