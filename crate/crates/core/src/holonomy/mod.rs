//! Holonomy of the stable foliation between transversals and its Jacobian.

pub mod bounds;
pub mod jacobian;
pub mod poincare;
pub mod transversal;

#[cfg(test)]
mod tests;

pub use bounds::{
    determinant_constant, determinant_perturbation_check, graph_aperture_bound_check, graph_subspace,
    graph_volume_bound_check, VolumeMargins,
};
pub use jacobian::{
    act_summary, act_verify, jacobian_det_ratio, jacobian_estimate, jacobian_measure_ratio, reciprocity_defect,
    ActReport, DetEstimate, JacobianEstimate, RatioEstimate, DEFAULT_DEPTH, DEFAULT_RADII, DEPTH_TOL,
};
pub use poincare::{intersect_leaf_with_transversal, leaf_crossing, Crossing, PoincareMap, MULTISTART, PAIR_HORIZON};
pub use transversal::{Transversal, TRANSVERSAL_NODES};

/// Flags for the smallness hypotheses of the absolute continuity statement.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Smallness {
    pub norm_w1: f64,
    pub norm_w2: f64,
    pub eps_c: f64,
    pub transversals_small: bool,
    pub leaf_lip: f64,
    pub leaf_lip_small: bool,
}

/// `||W_i|| <= eps_c` and leaf Lipschitz constant `<= 1/3`. Reported, never
/// enforced: the numerical estimators work outside this regime too.
pub fn smallness(handle: &PoincareMap, leaf_lip: f64, eps_c: f64) -> Smallness {
    let norm_w1 = handle.source().norm();
    let norm_w2 = handle.target().norm();
    Smallness {
        norm_w1,
        norm_w2,
        eps_c,
        transversals_small: norm_w1 <= eps_c && norm_w2 <= eps_c,
        leaf_lip,
        leaf_lip_small: leaf_lip <= 1.0 / 3.0,
    }
}
