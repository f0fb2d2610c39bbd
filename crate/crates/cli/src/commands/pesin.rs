//! `pesin pesin`: Pesin-set certificates over seeds x points.

use std::path::Path;

use serde_json::json;

use pesin_core::linalg::Vector;
use pesin_core::metric::{pesin_membership, PesinCertificate};
use pesin_core::oseledets::PesinParams;
use pesin_core::scenarios::ScenarioSpec;

use super::{collect_ordered, num, par_map, write_csv, write_svg};
use crate::config::{CertificateConfig, ExperimentConfig};
use crate::output::{Cell, RunReport, Table};
use crate::svg::{Plot, Series, Style};
use crate::CliError;

/// Box grid with `points` per axis; an axis with `lo == hi` (or a single
/// point) contributes `lo` only.
pub fn box_grid(lo: &[f64], hi: &[f64], points: usize) -> Vec<Vec<f64>> {
    let axis = |i: usize| -> Vec<f64> {
        if points == 1 || lo[i] == hi[i] {
            vec![lo[i]]
        } else {
            (0..points).map(|j| lo[i] + (hi[i] - lo[i]) * j as f64 / (points - 1) as f64).collect()
        }
    };
    let mut grid = vec![Vec::new()];
    for i in 0..lo.len() {
        grid = grid.into_iter().flat_map(|p| axis(i).into_iter().map(move |v| [p.clone(), vec![v]].concat())).collect();
    }
    grid
}

fn certify(spec: &ScenarioSpec, x: &[f64], params: &PesinParams, horizon: usize) -> pesin_core::Result<PesinCertificate> {
    let word = spec.word(horizon)?;
    pesin_membership(&word, &Vector::from_column_slice(x), params, horizon)
}

pub fn cases(cfg: &ExperimentConfig, cc: &CertificateConfig) -> Result<Vec<(ScenarioSpec, Vec<f64>)>, CliError> {
    let base = cfg.scenario_spec()?;
    let d = base.family()?.dim();
    let points = if cc.lo.is_empty() { vec![vec![0.0; d]] } else { box_grid(&cc.lo, &cc.hi, cc.points) };
    if points[0].len() != d {
        return Err(CliError::Usage(format!("certificate: grid corners have {} coordinates, the scenario has {d}", points[0].len())));
    }
    let seeds = if cc.seeds.is_empty() { vec![cfg.seed] } else { cc.seeds.clone() };
    Ok(seeds
        .iter()
        .flat_map(|&s| points.iter().map(move |x| (s, x.clone())))
        .map(|(s, x)| (ScenarioSpec { seed: s, ..base.clone() }, x))
        .collect())
}

fn fraction(certs: &[PesinCertificate]) -> f64 {
    certs.iter().filter(|c| c.member).count() as f64 / certs.len() as f64
}

pub fn run(cfg: &ExperimentConfig, out: &Path) -> Result<RunReport, CliError> {
    let cc = cfg.section(&cfg.certificate, "certificate")?;
    let params = cfg.pesin_params()?;
    let cases = cases(cfg, cc)?;
    let certs = collect_ordered(par_map(&cases, |(spec, x)| certify(spec, x, &params, cc.horizon)))?;
    let doubled = if cc.check_doubling {
        Some(collect_ordered(par_map(&cases, |(spec, x)| certify(spec, x, &params, 2 * cc.horizon)))?)
    } else {
        None
    };

    let d = cases[0].1.len();
    let mut header = vec!["seed".to_string()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    header.extend(["member", "l", "r", "c_delta"].map(String::from));
    if doubled.is_some() {
        header.extend(["member_2h", "l_2h"].map(String::from));
    }
    let mut table = Table::new(&header);
    let mut rows = Vec::new();
    for (i, c) in certs.iter().enumerate() {
        let mut row: Vec<Cell> = vec![c.seed.into()];
        row.extend(c.x.iter().map(|&v| Cell::F(v)));
        row.extend([c.member.into(), c.l_value.into(), c.r_value.into(), c.c_delta.into()]);
        if let Some(dd) = &doubled {
            row.extend([dd[i].member.into(), dd[i].l_value.into()]);
        }
        table.push(row);
        rows.push(json!({
            "seed": c.seed,
            "x": c.x,
            "member": c.member,
            "l": num(c.l_value),
            "l_infinite": c.l_infinite,
            "r": num(c.r_value),
            "c_delta": num(c.c_delta),
            "reason": c.reason,
        }));
    }

    let frac = fraction(&certs);
    let frac2 = doubled.as_deref().map(fraction);
    let mut pass = true;
    if let Some(f2) = frac2 {
        pass &= (frac - f2).abs() <= cc.doubling_tol;
    }
    if let Some(want) = cc.expect_fraction {
        // fractions are counts over the grid: compare at half a point
        pass &= (frac - want).abs() <= 0.5 / certs.len() as f64;
    }

    let mut files = Vec::new();
    write_csv(out, "pesin.csv", &table, &mut files)?;
    let l_pts: Vec<(f64, f64)> = certs.iter().enumerate().map(|(i, c)| (i as f64, c.l_value)).collect();
    let mut plot = Plot::new(format!("{}: uniform l over the grid", cfg.scenario.name), "grid index", "l")
        .with(Series::new("l", l_pts, Style::Markers))
        .with(Series::new("l'", vec![(0.0, params.l_prime), ((certs.len() - 1) as f64, params.l_prime)], Style::Dashed));
    if let Some(dd) = &doubled {
        plot = plot.with(Series::new("l at 2x horizon", dd.iter().enumerate().map(|(i, c)| (i as f64, c.l_value)).collect(), Style::Markers));
    }
    write_svg(out, "pesin.svg", &plot, &mut files)?;

    let summary = json!({
        "params": params,
        "horizon": cc.horizon,
        "cases": certs.len(),
        "members": certs.iter().filter(|c| c.member).count(),
        "membership_fraction": frac,
        "membership_fraction_doubled": frac2,
        "doubling_tol": cc.doubling_tol,
        "expect_fraction": cc.expect_fraction,
    });
    Ok(RunReport {
        command: "pesin".into(),
        config_hash: cfg.hash(),
        scenario: cfg.scenario.name.clone(),
        seed: cfg.seed,
        summary,
        rows,
        pass,
        files,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_grid_is_row_major() {
        let g = box_grid(&[0.0, 10.0], &[1.0, 20.0], 2);
        assert_eq!(g, vec![vec![0.0, 10.0], vec![0.0, 20.0], vec![1.0, 10.0], vec![1.0, 20.0]]);
        assert_eq!(box_grid(&[0.5], &[2.0], 1), vec![vec![0.5]]);
        assert_eq!(box_grid(&[0.0, -1.0], &[0.0, 1.0], 3).len(), 3);
    }
}
