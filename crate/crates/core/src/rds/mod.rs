//! The random dynamical system: maps, families, words, cocycles and
//! trajectory-centered coordinates.

pub mod assumptions;
pub mod cocycle;
pub mod family;
pub mod frame;
pub mod map;
pub mod word;

pub use assumptions::{validate_assumptions, AssumptionReport, SampleStats, LOG_FLOOR};
pub use cocycle::{cocycle_block, step_jacobians, CocycleBlock};
pub use family::{stream_rng, IdentityFamily, IidDiagFamily, LinearFamily, MapFamily, ParamBound, SkewFamily};
pub use frame::CenteredFrame;
pub use map::{fd_jacobian, Diffeo, IdentityMap, LinearMap, SkewMap};
pub use word::{iterate, sample_word, OmegaWord, OVERFLOW_GUARD};
