//! One module per subcommand. Each returns a [`RunReport`](crate::RunReport)
//! and writes its CSV/SVG files into the output directory.

pub mod holonomy;
pub mod manifold;
pub mod pesin;
pub mod report;
pub mod spectrum;

use std::path::Path;

use rayon::prelude::*;

use pesin_core::linalg::Vector;

use crate::output::write_file;
use crate::svg::Plot;
use crate::CliError;

/// Parallel map whose output order is the input order.
pub(crate) fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    items.par_iter().map(f).collect()
}

/// The first error in index order, so the reported failure does not depend
/// on scheduling.
pub(crate) fn collect_ordered<R>(results: Vec<Result<R, pesin_core::Error>>) -> Result<Vec<R>, CliError> {
    results.into_iter().map(|r| r.map_err(CliError::from)).collect()
}

pub(crate) fn v1(x: f64) -> Vector {
    Vector::from_element(1, x)
}

pub(crate) fn to_vec(v: &Vector) -> Vec<f64> {
    v.iter().copied().collect()
}

pub(crate) fn write_svg(out: &Path, name: &str, plot: &Plot, files: &mut Vec<String>) -> Result<(), CliError> {
    write_file(&out.join(name), &plot.render())?;
    files.push(name.to_string());
    Ok(())
}

pub(crate) fn write_csv(out: &Path, name: &str, table: &crate::output::Table, files: &mut Vec<String>) -> Result<(), CliError> {
    table.write(&out.join(name))?;
    files.push(name.to_string());
    Ok(())
}

/// JSON numbers cannot hold NaN or infinities; those become strings.
pub(crate) fn num(v: f64) -> serde_json::Value {
    if v.is_finite() {
        serde_json::json!(v)
    } else {
        serde_json::json!(crate::output::format_float(v))
    }
}

pub(crate) fn nums(v: &[f64]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|&x| num(x)).collect())
}
