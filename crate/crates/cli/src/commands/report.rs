//! `pesin report`: collect the JSON run reports of an output directory.

use std::path::Path;

use serde_json::json;

use crate::output::{RunReport, Table};
use crate::CliError;

pub fn load_reports(out: &Path) -> Result<Vec<RunReport>, CliError> {
    let io = |source| CliError::Io { path: out.to_path_buf(), source };
    let mut paths: Vec<_> = std::fs::read_dir(out)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json") && p.file_stem().is_some_and(|s| s != "report"))
        .collect();
    paths.sort();
    paths
        .iter()
        .map(|p| {
            let text = std::fs::read_to_string(p).map_err(|source| CliError::Io { path: p.clone(), source })?;
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{} is not a run report: {e}", p.display())))
        })
        .collect()
}

pub fn run(out: &Path) -> Result<RunReport, CliError> {
    let reports = load_reports(out)?;
    if reports.is_empty() {
        return Err(CliError::Usage(format!("no run reports in {}", out.display())));
    }
    let mut table = Table::new(&["command", "scenario", "seed", "pass", "config_hash"]);
    for r in &reports {
        table.push(vec![r.command.as_str().into(), r.scenario.as_str().into(), r.seed.into(), r.pass.into(), r.config_hash.as_str().into()]);
    }
    table.write(&out.join("report.csv"))?;
    let rows = reports.iter().map(|r| json!({"command": r.command, "scenario": r.scenario, "seed": r.seed, "pass": r.pass, "config_hash": r.config_hash})).collect();
    let passed = reports.iter().filter(|r| r.pass).count();
    Ok(RunReport {
        command: "report".into(),
        config_hash: String::new(),
        scenario: String::new(),
        seed: 0,
        summary: json!({"runs": reports.len(), "passed": passed}),
        rows,
        pass: passed == reports.len(),
        files: vec!["report.csv".into()],
    })
}
