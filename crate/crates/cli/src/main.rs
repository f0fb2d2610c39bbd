use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;

use pesin_cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let start = Instant::now();
    match run(&cli) {
        Ok(report) => {
            let verdict = if report.pass { "PASS" } else { "FAIL" };
            println!("{} {verdict} ({} rows, {:.3} s)", report.command, report.rows.len(), start.elapsed().as_secs_f64());
            for f in &report.files {
                println!("  wrote {f}");
            }
            ExitCode::from(if report.pass { 0 } else { 2 })
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
