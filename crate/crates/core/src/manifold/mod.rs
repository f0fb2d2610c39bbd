//! Stable manifolds: graph charts over the unstable subspaces, the graph
//! transform that moves them along the orbit, local stable charts and the
//! global membership test.

pub mod chart;
pub mod global;
pub mod interp;
pub mod stable;
pub mod transform;

pub use chart::{line_seed, CoordinateDecomposition, GraphChart, LyapunovCoords, DEFAULT_NODES};
pub use global::{global_stable_test, global_stable_test_with, GlobalStableResult, RATE_MARGIN};
pub use stable::{
    advance_constants, local_stable_chart, local_stable_chart_at, shoot_leaf_point, stable_contraction_check, ContractionReport, StableChart,
    StableChartOptions,
};
pub use transform::{
    evolve_transversal, graph_transform_step, uniqueness_probe, Evolution, LedgerRow, Q1Bound, ManifoldConstants, TransformOptions,
    TransversalSeed, DEFAULT_DELTA_DELTA, SLACK_TOL,
};

#[cfg(test)]
mod tests;
