//! `pesin spectrum`: running exponents for one or more seeds, checked
//! against the closed-form spectrum when the scenario has one.

use std::path::Path;

use serde_json::json;

use pesin_core::linalg::Vector;
use pesin_core::oseledets::{lyapunov_spectrum_with, SpectrumEstimate, SpectrumOptions};
use pesin_core::scenarios::{ScenarioKind, ScenarioSpec};

use super::{collect_ordered, nums, par_map, write_csv, write_svg};
use crate::config::ExperimentConfig;
use crate::output::{Cell, RunReport, Table};
use crate::svg::{Plot, Series, Style};
use crate::CliError;

/// Exponent `i` (ascending) with its tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub values: Vec<f64>,
    pub tolerances: Vec<f64>,
    pub rule: &'static str,
}

/// Closed-form exponents. Constant maps are exact up to rounding; for
/// i.i.d. diagonal maps the time average is a sample mean, so the
/// tolerance is three standard errors over `n` steps.
pub fn reference(kind: &ScenarioKind, n: usize) -> Option<Reference> {
    let sorted = |mut v: Vec<(f64, f64)>| {
        v.sort_by(|a, b| a.0.total_cmp(&b.0));
        v
    };
    let (pairs, rule) = match kind {
        ScenarioKind::Identity { d } => (vec![(0.0, 1e-12); *d], "exact"),
        ScenarioKind::ConstantDiag { diag } => (diag.iter().map(|v| (v.abs().ln(), 1e-9)).collect(), "exact"),
        ScenarioKind::Skew { a, b, .. } => (vec![(a.abs().ln(), 1e-6), (b.abs().ln(), 1e-6)], "exact"),
        ScenarioKind::IidDiag { ranges } => (
            ranges
                .iter()
                .map(|&(lo, hi)| {
                    let sd = (hi.ln() - lo.ln()) / 12f64.sqrt();
                    (0.5 * (lo.ln() + hi.ln()), 3.0 * sd / (n as f64).sqrt())
                })
                .collect(),
            "3 standard errors",
        ),
        _ => return None,
    };
    let pairs = sorted(pairs);
    Some(Reference { values: pairs.iter().map(|p| p.0).collect(), tolerances: pairs.iter().map(|p| p.1).collect(), rule })
}

pub fn estimate(spec: &ScenarioSpec, x: Option<&[f64]>, horizon: usize, qr_stride: usize, rows: usize) -> pesin_core::Result<SpectrumEstimate> {
    let word = spec.word(horizon)?;
    let x = x.map(Vector::from_column_slice).unwrap_or_else(|| Vector::zeros(word.dim()));
    lyapunov_spectrum_with(&word, &x, horizon, SpectrumOptions { qr_stride, transient: None, history_rows: rows })
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let sc = cfg.section(&cfg.spectrum, "spectrum")?;
    let base = cfg.scenario_spec()?;
    let seeds = if sc.seeds.is_empty() { vec![cfg.seed] } else { sc.seeds.clone() };
    let specs: Vec<ScenarioSpec> = seeds.iter().map(|&s| ScenarioSpec { seed: s, ..base.clone() }).collect();
    let results = collect_ordered(par_map(&specs, |spec| estimate(spec, sc.x.as_deref(), sc.horizon, sc.qr_stride, sc.rows)))?;

    let d = results[0].exponents.len();
    let mut header = vec!["seed".to_string(), "n".to_string()];
    header.extend((1..=d).map(|i| format!("rho_{i}")));
    header.extend((1..=d).map(|i| format!("slope_{i}")));
    let mut table = Table::new(&header);
    let reference = reference(&base.kind, sc.horizon);
    let mut rows = Vec::new();
    let mut pass = true;
    let mut plot = Plot::new(format!("{}: running Lyapunov exponents", base.name), "n", "rho");
    for (spec, est) in specs.iter().zip(&results) {
        for r in &est.history {
            let mut row: Vec<Cell> = vec![spec.seed.into(), r.n.into()];
            row.extend(r.exponents.iter().map(|&v| Cell::F(v)));
            row.extend(r.slopes.iter().map(|&v| Cell::F(v)));
            table.push(row);
        }
        let finite = est.exponents.iter().all(|v| v.is_finite());
        let deviation: Option<Vec<f64>> = reference.as_ref().map(|r| est.exponents.iter().zip(&r.values).map(|(a, b)| (a - b).abs()).collect());
        let within = match (&deviation, &reference) {
            (Some(dev), Some(r)) => dev.iter().zip(&r.tolerances).all(|(e, t)| e <= t),
            _ => true,
        };
        pass &= finite && within;
        rows.push(json!({
            "seed": spec.seed,
            "exponents": nums(&est.exponents),
            "deviation": deviation.as_deref().map(nums),
            "within_tolerance": within,
            "slope_stability": nums(&est.slope_stability),
            "volume_residual": est.volume_residual,
            "underflow": est.underflow,
        }));
        if specs.len() <= 8 {
            for i in 0..d {
                let pts = est.history.iter().map(|r| (r.n as f64, r.exponents[i])).collect();
                plot.series.push(Series::new(format!("seed {} rho_{}", spec.seed, i + 1), pts, Style::Line));
            }
        }
    }
    if let Some(r) = &reference {
        let n_max = sc.horizon as f64;
        for (i, v) in r.values.iter().enumerate() {
            plot.series.push(Series::new(format!("exact rho_{}", i + 1), vec![(0.0, *v), (n_max, *v)], Style::Dashed));
        }
    }

    let mut files = Vec::new();
    write_csv(out, "spectrum.csv", &table, &mut files)?;
    write_svg(out, "spectrum.svg", &plot, &mut files)?;
    let summary = json!({
        "horizon": sc.horizon,
        "qr_stride": sc.qr_stride,
        "seeds": seeds,
        "reference": reference.as_ref().map(|r| json!({"values": nums(&r.values), "tolerances": nums(&r.tolerances), "rule": r.rule})),
    });
    Ok(RunReport {
        command: "spectrum".into(),
        config_hash: cfg.hash(),
        scenario: base.name.clone(),
        seed: cfg.seed,
        summary,
        rows,
        pass,
        files,
    })
}
