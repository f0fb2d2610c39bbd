//! Two independent estimates of the holonomy Jacobian.
//!
//! `value_det` pushes both transversals forward along the pair of orbits:
//! `J(y) = prod_j det(Df|T1_j) / det(Df|T2_j) * alpha_n`, where `alpha_n`
//! is the volume factor of the projection along `E_n` from `T1_n` to `T2_n`.
//! `value_ratio` measures how `P` stretches small arcs around `y` and
//! extrapolates the radius to zero.

use serde::{Deserialize, Serialize};

use super::poincare::PoincareMap;
use crate::error::{Error, Result};
use crate::linalg::{block_det, orth, restricted_det, Vector};
use crate::rds::iterate;

pub const DEFAULT_DEPTH: usize = 40;
pub const DEPTH_TOL: f64 = 1e-6;
pub const DEFAULT_RADII: [f64; 3] = [0.04, 0.02, 0.01];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetEstimate {
    pub value: f64,
    /// Depth at which the estimate was taken.
    pub depth: usize,
    pub converged: bool,
    /// Estimates at depths `1..=depth`.
    pub history: Vec<f64>,
}

/// Product-of-determinants estimate at the point of the source transversal
/// with parameter `u1`.
pub fn jacobian_det_ratio(handle: &PoincareMap, u1: &Vector, max_depth: usize) -> Result<DetEstimate> {
    let coords = handle.coords();
    let split = coords.metric().split();
    let crossing = handle.map(u1)?;
    let y1 = handle.source().point(u1);
    let y2 = crossing.point.clone();
    let word = coords.frame().word().extended(max_depth);
    let depth_cap = max_depth.min(split.stored_len());
    let orbit = |y: &Vector| -> Result<Vec<Vector>> {
        match iterate(&word, y, depth_cap) {
            Ok(o) => Ok(o),
            Err(Error::OrbitDivergence { last_finite, .. }) if last_finite >= 1 => iterate(&word, y, last_finite),
            Err(e) => Err(e),
        }
    };
    let o1 = orbit(&y1)?;
    let o2 = orbit(&y2)?;
    let depth = (o1.len().min(o2.len()) - 1).min(depth_cap);
    let mut t1 = orth(&handle.source().tangent(u1));
    let mut t2 = orth(&handle.target().tangent(&crossing.u));
    let mut log_ratio = 0.0;
    let mut history: Vec<f64> = Vec::with_capacity(depth);
    let mut converged = false;
    for j in 0..depth {
        let f = word.map(j)?;
        let j1 = f.jacobian(&o1[j]);
        let j2 = f.jacobian(&o2[j]);
        log_ratio += restricted_det(&j1, &t1).ln() - restricted_det(&j2, &t2).ln();
        t1 = orth(&(j1 * t1));
        t2 = orth(&(j2 * t2));
        let e = split.e_basis(j + 1);
        let alpha = (block_det(&[&t1, e]) / block_det(&[&t2, e])).abs();
        let value = log_ratio.exp() * alpha;
        if !(value.is_finite() && value > 0.0) {
            return Err(Error::Domain(format!("non-positive Jacobian estimate {value} at depth {}", j + 1)));
        }
        if let Some(&prev) = history.last() {
            let done = (value - prev).abs() < DEPTH_TOL;
            history.push(value);
            if done {
                converged = true;
                break;
            }
        } else {
            history.push(value);
        }
    }
    let value = *history.last().ok_or_else(|| Error::Domain("pair orbit too short for a Jacobian estimate".into()))?;
    Ok(DetEstimate { value, depth: history.len(), converged, history })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioEstimate {
    /// Richardson extrapolation from the two smallest radii.
    pub value: f64,
    pub radii: Vec<f64>,
    /// Raw length ratios per radius.
    pub ratios: Vec<f64>,
    /// Change of the extrapolation when the largest pair of radii is used.
    pub extrapolation_error: f64,
    /// Largest quadrature error (1 against 2 panels) over the arcs.
    pub quadrature_error: f64,
    pub samples: usize,
}

/// Shrinking-arc estimate `lambda_{W2}(P(Q(y, h))) / lambda_{W1}(Q(y, h))`
/// with `Q(y, h)` the parameter interval `[u1 - h, u1 + h]`.
pub fn jacobian_measure_ratio(handle: &PoincareMap, u1: &Vector, radii: &[f64]) -> Result<RatioEstimate> {
    if radii.len() < 2 {
        return Err(Error::Config("the measure-ratio estimate needs at least two radii".into()));
    }
    let mut radii = radii.to_vec();
    radii.sort_by(|a, b| b.total_cmp(a));
    let w1 = handle.source();
    let w2 = handle.target();
    let c = u1[0];
    let mut ratios = Vec::with_capacity(radii.len());
    let mut quad: f64 = 0.0;
    for &h in &radii {
        let (a, b) = (Vector::from_element(1, c - h), Vector::from_element(1, c + h));
        if !w1.contains(&a) || !w1.contains(&b) {
            return Err(Error::ShrinkSchedule { radius: h });
        }
        let pa = handle.map(&a).map_err(|_| Error::ShrinkSchedule { radius: h })?;
        let pb = handle.map(&b).map_err(|_| Error::ShrinkSchedule { radius: h })?;
        let (lo, hi) = if pa.u[0] <= pb.u[0] { (pa.u[0], pb.u[0]) } else { (pb.u[0], pa.u[0]) };
        if !w2.contains(&Vector::from_element(1, lo)) || !w2.contains(&Vector::from_element(1, hi)) {
            return Err(Error::ShrinkSchedule { radius: h });
        }
        let l1 = w1.arc_length(c - h, c + h, 2)?;
        let l1c = w1.arc_length(c - h, c + h, 1)?;
        let l2 = w2.arc_length(lo, hi, 2)?;
        let l2c = w2.arc_length(lo, hi, 1)?;
        quad = quad.max((l1 - l1c).abs() / l1).max((l2 - l2c).abs() / l2.max(f64::MIN_POSITIVE));
        ratios.push(l2 / l1);
    }
    let n = ratios.len();
    // ratios are even in h, so the error is O(h^2) and halving radii
    // extrapolates with weights (4, -1)/3
    let rich = |big: f64, small: f64, hb: f64, hs: f64| {
        let q = (hb / hs).powi(2);
        (q * small - big) / (q - 1.0)
    };
    let value = rich(ratios[n - 2], ratios[n - 1], radii[n - 2], radii[n - 1]);
    let extrapolation_error = if n >= 3 { (rich(ratios[n - 3], ratios[n - 2], radii[n - 3], radii[n - 2]) - value).abs() } else { f64::NAN };
    Ok(RatioEstimate { value, radii, ratios, extrapolation_error, quadrature_error: quad * value.abs(), samples: 2 * n })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JacobianEstimate {
    pub u: f64,
    pub point: Vec<f64>,
    pub image: Vec<f64>,
    pub value_det: f64,
    pub det_depth: usize,
    pub det_converged: bool,
    pub value_ratio: f64,
    pub ratio_extrapolation_error: f64,
    pub ratio_quadrature_error: f64,
    pub h_min: f64,
    pub discrepancy: f64,
}

impl JacobianEstimate {
    /// Cross-method agreement within `max(1e-3, 3 quadrature errors)`.
    pub fn methods_agree(&self) -> bool {
        self.discrepancy <= 1e-3f64.max(3.0 * self.ratio_quadrature_error)
    }
}

pub fn jacobian_estimate(handle: &PoincareMap, u1: f64, depth: usize, radii: &[f64]) -> Result<JacobianEstimate> {
    let u = Vector::from_element(1, u1);
    let det = jacobian_det_ratio(handle, &u, depth)?;
    let ratio = jacobian_measure_ratio(handle, &u, radii)?;
    let image = handle.map(&u)?;
    if !(ratio.value > 0.0) {
        return Err(Error::Domain(format!("non-positive measure-ratio estimate {}", ratio.value)));
    }
    Ok(JacobianEstimate {
        u: u1,
        point: handle.source().point(&u).iter().copied().collect(),
        image: image.point.iter().copied().collect(),
        value_det: det.value,
        det_depth: det.depth,
        det_converged: det.converged,
        value_ratio: ratio.value,
        ratio_extrapolation_error: ratio.extrapolation_error,
        ratio_quadrature_error: ratio.quadrature_error,
        h_min: ratio.radii.last().copied().unwrap_or(f64::NAN),
        discrepancy: (det.value - ratio.value).abs(),
    })
}

/// `J_{W1->W2}(y) J_{W2->W1}(P(y)) - 1` for both estimators.
pub fn reciprocity_defect(handle: &PoincareMap, u1: f64, depth: usize, radii: &[f64]) -> Result<(f64, f64)> {
    let fwd = jacobian_estimate(handle, u1, depth, radii)?;
    let image = handle.map(&Vector::from_element(1, u1))?;
    let back = jacobian_estimate(&handle.reversed(), image.u[0], depth, radii)?;
    Ok((fwd.value_det * back.value_det - 1.0, fwd.value_ratio * back.value_ratio - 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActReport {
    pub rows: Vec<JacobianEstimate>,
    /// Points skipped, with the reason.
    pub skipped: Vec<(f64, String)>,
    /// `max |J - 1|` over rows and both estimators.
    pub max_deviation: f64,
    pub act_c: f64,
    pub pass: bool,
    pub transversal_norms: (f64, f64),
}

/// Evaluate both estimators on a grid of source parameters and compare the
/// largest `|J - 1|` with `act_c`.
pub fn act_verify(handle: &PoincareMap, grid: &[f64], act_c: f64, depth: usize, radii: &[f64]) -> ActReport {
    let results: Vec<(f64, Result<JacobianEstimate>)> = grid.iter().map(|&u| (u, jacobian_estimate(handle, u, depth, radii))).collect();
    act_summary(handle, results, act_c)
}

/// Assemble a report from per-point results computed elsewhere (for example
/// in parallel, in grid order).
pub fn act_summary(handle: &PoincareMap, results: Vec<(f64, Result<JacobianEstimate>)>, act_c: f64) -> ActReport {
    let mut rows = Vec::new();
    let mut skipped = Vec::new();
    for (u, r) in results {
        match r {
            Ok(e) => rows.push(e),
            Err(e) => skipped.push((u, e.to_string())),
        }
    }
    let max_deviation = rows
        .iter()
        .map(|r| (r.value_det - 1.0).abs().max((r.value_ratio - 1.0).abs()))
        .fold(0.0, f64::max);
    let pass = !rows.is_empty() && max_deviation <= act_c;
    ActReport {
        rows,
        skipped,
        max_deviation,
        act_c,
        pass,
        transversal_norms: (handle.source().norm(), handle.target().norm()),
    }
}
