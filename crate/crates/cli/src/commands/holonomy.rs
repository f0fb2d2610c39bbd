//! `pesin holonomy` and `pesin verify-act`: the holonomy map between two
//! transversals of the origin's leaf, and its Jacobian.

use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use pesin_core::holonomy::{
    act_summary, intersect_leaf_with_transversal, jacobian_estimate, smallness, ActReport, PoincareMap, Transversal,
};
use pesin_core::linalg::Vector;
use pesin_core::manifold::{local_stable_chart, LyapunovCoords, StableChart, StableChartOptions};
use pesin_core::rds::OmegaWord;
use pesin_core::scenarios::{skew_holonomy_oracle, ScenarioSpec};

use super::{collect_ordered, num, par_map, to_vec, v1, write_csv, write_svg};
use crate::config::{ExperimentConfig, HolonomyConfig, TransversalConfig};
use crate::output::{RunReport, Table};
use crate::svg::{Plot, Series, Style};
use crate::CliError;

/// Holonomy-map offsets must match the series oracle this closely.
pub const OFFSET_TOL: f64 = 1e-6;
/// Largest accepted `|P^{-1}(P(u)) - u|`.
pub const INVOLUTION_TOL: f64 = 1e-8;

pub struct Setup {
    pub spec: ScenarioSpec,
    pub word: OmegaWord,
    pub coords: Arc<LyapunovCoords>,
    pub leaf: StableChart,
}

pub fn setup(cfg: &ExperimentConfig, hc: &HolonomyConfig) -> Result<Setup, CliError> {
    let spec = cfg.scenario_spec()?;
    let params = cfg.pesin_params()?;
    let word = spec.word(hc.horizon)?;
    let coords = Arc::new(LyapunovCoords::build(&word, &Vector::zeros(word.dim()), &params, hc.horizon)?);
    let leaf = local_stable_chart(&coords, hc.leaf_radius, &StableChartOptions { nodes: hc.nodes, n_shoot: None })?;
    Ok(Setup { spec, word, coords, leaf })
}

pub fn transversal(s: &Setup, tc: &TransversalConfig, nodes: usize) -> Result<Transversal, CliError> {
    if s.coords.k() + s.coords.p() != 2 {
        return Err(CliError::Usage("transversal specs are defined for planar scenarios".into()));
    }
    Ok(match *tc {
        TransversalConfig::Level { axis, c, tilt, radius } => {
            if axis > 1 {
                return Err(CliError::Usage(format!("transversal axis must be 0 or 1, got {axis}")));
            }
            let g = move |q: &Vector| v1(q[axis] - c - tilt * q[1 - axis].tanh());
            Transversal::from_implicit_on_leaf(s.coords.clone(), &s.leaf, g, radius, nodes)?
        }
        TransversalConfig::Line { slope, center, radius } => {
            Transversal::from_fn(s.coords.clone(), &v1(center), radius, nodes, move |u: &Vector| v1(slope * (u[0] - center)))?
        }
    })
}

pub fn grid(w: &Transversal, points: usize, fraction: f64) -> Vec<f64> {
    let (c, r) = (w.center()[0], w.radius() * fraction);
    (0..points).map(|i| c - r + 2.0 * r * i as f64 / (points - 1) as f64).collect()
}

/// Translation offset of the origin's leaf between two vertical lines,
/// when the pair is of that kind and the scenario is a skew map.
fn offset_oracle(s: &Setup, w1: &TransversalConfig, w2: &TransversalConfig) -> Result<Option<f64>, CliError> {
    match (w1, w2) {
        (
            TransversalConfig::Level { axis: 0, c: c1, tilt: t1, .. },
            TransversalConfig::Level { axis: 0, c: c2, tilt: t2, .. },
        ) if *t1 == 0.0 && *t2 == 0.0 && s.spec.is_skew() => Ok(Some(skew_holonomy_oracle(&s.spec, &s.word, *c1, *c2)?.value)),
        _ => Ok(None),
    }
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let hc = cfg.section(&cfg.holonomy, "holonomy")?;
    let s = setup(cfg, hc)?;
    let pm = PoincareMap::new(transversal(&s, &hc.w1, hc.nodes)?, transversal(&s, &hc.w2, hc.nodes)?)?;
    let us = grid(pm.source(), hc.grid_points, hc.grid_fraction);
    let oracle = offset_oracle(&s, &hc.w1, &hc.w2)?;
    let mapped = collect_ordered(par_map(&us, |&u| -> pesin_core::Result<_> {
        let c = pm.map(&v1(u))?;
        let inv = pm.involution_error(&v1(u))?;
        Ok((c, inv))
    }))?;

    let mut table = Table::new(&["u", "x", "y", "image_u", "image_x", "image_y", "offset_y", "oracle_offset_y", "involution_error"]);
    let mut rows = Vec::new();
    let mut pass = true;
    let mut worst_offset: f64 = 0.0;
    for (&u, (c, inv)) in us.iter().zip(&mapped) {
        let y = pm.source().point(&v1(u));
        let dy = c.point[1] - y[1];
        if let Some(o) = oracle {
            worst_offset = worst_offset.max((dy - o).abs());
        }
        pass &= *inv <= INVOLUTION_TOL;
        table.push(vec![
            u.into(),
            y[0].into(),
            y[1].into(),
            c.u[0].into(),
            c.point[0].into(),
            c.point[1].into(),
            dy.into(),
            oracle.unwrap_or(f64::NAN).into(),
            (*inv).into(),
        ]);
        rows.push(json!({"u": u, "point": to_vec(&y), "image_u": c.u[0], "image": to_vec(&c.point), "involution_error": inv}));
    }
    if oracle.is_some() {
        pass &= worst_offset <= OFFSET_TOL;
    }

    let mut files = Vec::new();
    write_csv(out, "holonomy.csv", &table, &mut files)?;
    let plot = transversal_plot(&s, &pm, &mapped.iter().map(|(c, _)| c.point.clone()).collect::<Vec<_>>(), &us);
    write_svg(out, "holonomy.svg", &plot, &mut files)?;

    let small = smallness(&pm, s.leaf.lip, hc.eps_c);
    let summary = json!({
        "points": us.len(),
        "offset_oracle": oracle,
        "max_offset_error": oracle.map(|_| worst_offset),
        "max_involution_error": mapped.iter().map(|m| m.1).fold(0.0, f64::max),
        "smallness": small,
    });
    Ok(RunReport {
        command: "holonomy".into(),
        config_hash: cfg.hash(),
        scenario: s.spec.name.clone(),
        seed: cfg.seed,
        summary,
        rows,
        pass,
        files,
    })
}

fn transversal_plot(s: &Setup, pm: &PoincareMap, images: &[Vector], us: &[f64]) -> Plot {
    let curve = |w: &Transversal| -> Vec<(f64, f64)> {
        let (c, r) = (w.center()[0], w.radius());
        (0..=100).map(|i| w.point(&v1(c - r + 2.0 * r * i as f64 / 100.0))).map(|p| (p[0], p[1])).collect()
    };
    let leaf_r = s.leaf.radius;
    let leaf: Vec<(f64, f64)> =
        (0..=200).map(|i| s.leaf.point(&v1(leaf_r * (-1.0 + i as f64 / 100.0)))).map(|p| (p[0], p[1])).collect();
    let sources = us.iter().map(|&u| pm.source().point(&v1(u))).map(|p| (p[0], p[1])).collect();
    Plot::new(format!("{}: holonomy between transversals", s.spec.name), "x", "y")
        .with(Series::new("leaf of the origin", leaf, Style::Dashed))
        .with(Series::new("W1", curve(pm.source()), Style::Line))
        .with(Series::new("W2", curve(pm.target()), Style::Line))
        .with(Series::new("grid points", sources, Style::Markers))
        .with(Series::new("images", images.iter().map(|p| (p[0], p[1])).collect(), Style::Markers))
}

/// Both Jacobian estimators over the grid, evaluated in parallel and
/// reduced in grid order.
pub fn act_report(pm: &PoincareMap, hc: &HolonomyConfig) -> ActReport {
    let us = grid(pm.source(), hc.grid_points, hc.grid_fraction);
    let results = par_map(&us, |&u| (u, jacobian_estimate(pm, u, hc.depth, &hc.radii)));
    act_summary(pm, results, hc.act_c)
}

/// Transversals must cross the leaf of the origin exactly once and
/// transversally; a violation is reported as a verification failure.
fn precheck(s: &Setup, w: &Transversal) -> Result<(), CliError> {
    intersect_leaf_with_transversal(&s.leaf, w)?;
    Ok(())
}

pub fn verify_act(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let hc = cfg.section(&cfg.holonomy, "holonomy")?;
    let s = setup(cfg, hc)?;
    let (w1, w2) = (transversal(&s, &hc.w1, hc.nodes)?, transversal(&s, &hc.w2, hc.nodes)?);
    precheck(&s, &w1)?;
    precheck(&s, &w2)?;
    let pm = PoincareMap::new(w1, w2)?;
    let report = act_report(&pm, hc);

    let mut table = Table::new(&[
        "u",
        "x",
        "y",
        "image_x",
        "image_y",
        "j_det",
        "j_ratio",
        "discrepancy",
        "ratio_quadrature_error",
        "ratio_extrapolation_error",
        "det_depth",
        "methods_agree",
    ]);
    for r in &report.rows {
        table.push(vec![
            r.u.into(),
            r.point[0].into(),
            r.point[1].into(),
            r.image[0].into(),
            r.image[1].into(),
            r.value_det.into(),
            r.value_ratio.into(),
            r.discrepancy.into(),
            r.ratio_quadrature_error.into(),
            r.ratio_extrapolation_error.into(),
            r.det_depth.into(),
            r.methods_agree().into(),
        ]);
    }
    let agree = report.rows.iter().all(|r| r.methods_agree());
    let mut pass = report.pass && report.skipped.is_empty() && agree;

    let mut files = Vec::new();
    write_csv(out, "verify_act.csv", &table, &mut files)?;
    let us: Vec<f64> = report.rows.iter().map(|r| r.u).collect();
    let (lo, hi) = (us.first().copied().unwrap_or(0.0), us.last().copied().unwrap_or(1.0));
    let plot = Plot::new(format!("{}: holonomy Jacobian", s.spec.name), "u", "J")
        .with(Series::new("J (determinant series)", report.rows.iter().map(|r| (r.u, r.value_det)).collect(), Style::Line))
        .with(Series::new("J (measure ratio)", report.rows.iter().map(|r| (r.u, r.value_ratio)).collect(), Style::Markers))
        .with(Series::new("1 + act_c", vec![(lo, 1.0 + hc.act_c), (hi, 1.0 + hc.act_c)], Style::Dashed))
        .with(Series::new("1 - act_c", vec![(lo, 1.0 - hc.act_c), (hi, 1.0 - hc.act_c)], Style::Dashed));
    write_svg(out, "verify_act.svg", &plot, &mut files)?;

    // tilt sweep: same pair with both transversals tilted alike
    let mut sweep = Vec::new();
    if !hc.tilts.is_empty() {
        let mut t = Table::new(&["tilt", "max_deviation", "max_discrepancy", "skipped"]);
        for &tilt in &hc.tilts {
            let pm_t = PoincareMap::new(transversal(&s, &hc.w1.with_tilt(tilt), hc.nodes)?, transversal(&s, &hc.w2.with_tilt(tilt), hc.nodes)?)?;
            let r = act_report(&pm_t, hc);
            let disc = r.rows.iter().map(|e| e.discrepancy).fold(0.0, f64::max);
            t.push(vec![tilt.into(), r.max_deviation.into(), disc.into(), r.skipped.len().into()]);
            sweep.push((tilt, r));
        }
        write_csv(out, "tilt_sweep.csv", &t, &mut files)?;
        let plot = Plot::new(format!("{}: max |J - 1| against tilt", s.spec.name), "tilt", "max |J - 1|")
            .with(Series::new("max |J - 1|", sweep.iter().map(|(t, r)| (*t, r.max_deviation)).collect(), Style::Line));
        write_svg(out, "tilt_sweep.svg", &plot, &mut files)?;
    }
    // deviations should not grow as the tilt shrinks (10% slack for noise)
    let mut by_tilt: Vec<(f64, f64)> = sweep.iter().map(|(t, r)| (t.abs(), r.max_deviation)).collect();
    by_tilt.sort_by(|a, b| b.0.total_cmp(&a.0));
    let monotone = by_tilt.windows(2).all(|w| w[1].1 <= 1.1 * w[0].1);
    let sweep_clean = sweep.iter().all(|(_, r)| r.skipped.is_empty());
    pass &= monotone && sweep_clean;

    let rows = report.rows.iter().map(|r| serde_json::to_value(r).expect("row serializes")).collect();
    let summary = json!({
        "act_c": hc.act_c,
        "max_deviation": num(report.max_deviation),
        "act_pass": report.pass,
        "methods_agree": agree,
        "skipped": report.skipped,
        "transversal_norms": [report.transversal_norms.0, report.transversal_norms.1],
        "smallness": smallness(&pm, s.leaf.lip, hc.eps_c),
        "tilt_sweep": sweep.iter().map(|(t, r)| json!({"tilt": t, "max_deviation": num(r.max_deviation), "skipped": r.skipped.len()})).collect::<Vec<_>>(),
        "tilt_sweep_monotone": monotone,
    });
    Ok(RunReport {
        command: "verify-act".into(),
        config_hash: cfg.hash(),
        scenario: s.spec.name.clone(),
        seed: cfg.seed,
        summary,
        rows,
        pass,
        files,
    })
}
