use thiserror::Error;

/// Errors raised by the numerical machinery.
///
/// Variants map onto the CLI exit-code contract: configuration and
/// precondition problems are usage errors, everything that comes out of a
/// computation going wrong (divergence, singular cocycles, solver failures)
/// is a numerical failure.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("parameter `{name}` = {value} outside declared bounds [{lo}, {hi}] (map index {index})")]
    ParameterOutOfBounds {
        name: String,
        value: f64,
        lo: f64,
        hi: f64,
        index: usize,
    },

    #[error("orbit diverged at step {index} (last finite index {last_finite})")]
    OrbitDivergence { index: usize, last_finite: usize },

    #[error("singular cocycle at step {index}")]
    SingularCocycle { index: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("Lyapunov exponent {exponent} lies inside the gap [{a}, {b}]")]
    GapViolation { exponent: f64, a: f64, b: f64 },

    #[error("precondition `{condition}` violated: {detail}")]
    Precondition {
        condition: &'static str,
        detail: String,
    },

    #[error("graph-transform step failed at node {node}: residual {residual:e}")]
    StepFailure { node: usize, residual: f64 },

    #[error("chart domain too large: no shooting bracket at node {node} (radius {radius}); try a smaller radius")]
    ChartDomainTooLarge { node: usize, radius: f64 },

    #[error("transversality failure: {0}")]
    TransversalityFailure(String),

    #[error("non-unique intersection: {solutions} distinct solutions (separation {separation:e})")]
    NonUniqueness { solutions: usize, separation: f64 },

    #[error("mapped ball leaves the target chart at radius {radius}; shrink the radius schedule")]
    ShrinkSchedule { radius: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// True for errors produced by the dynamics or a solver rather than by
    /// the caller's input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::OrbitDivergence { .. }
                | Error::SingularCocycle { .. }
                | Error::StepFailure { .. }
                | Error::ChartDomainTooLarge { .. }
                | Error::ShrinkSchedule { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
