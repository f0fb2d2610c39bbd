//! The Poincare map of the stable foliation between two transversals.
//!
//! Leaves through points other than the base are not charted directly: a
//! point `p` lies on the leaf of `y` when the difference orbit
//! `f^n p - f^n y` does not escape along `H`. The sign of its `H` component,
//! measured with the splitting of the base orbit, changes across the leaf,
//! so the crossing with a transversal is found by bisection.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use super::transversal::Transversal;
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix, Vector};
use crate::manifold::{LyapunovCoords, StableChart};
use crate::rds::iterate;

/// Sub-intervals of the parameter ball scanned for sign changes.
pub const MULTISTART: usize = 8;
/// Pair-orbit horizon.
pub const PAIR_HORIZON: usize = 50;
/// Fewest steps a pair orbit needs before the guard stops it.
const MIN_PAIR_STEPS: usize = 10;

/// Intersection of the base leaf chart with a transversal: `(xi, u, point)`.
pub fn intersect_leaf_with_transversal(leaf: &StableChart, w: &Transversal) -> Result<(Vector, Vector, Vector)> {
    if leaf.n != 0 {
        return Err(Error::Domain("leaf chart must sit at index 0".into()));
    }
    let k = leaf.values()[0].len();
    let chart = w.chart();
    let p = chart.center.len();
    let r = chart.radius;
    let mut found: Vec<(Vector, Vector)> = Vec::new();
    // starts spread over the transversal's parameter ball and over the leaf
    // chart (first axes), so a steep transversal is not missed
    let mut starts = Vec::with_capacity(2 * MULTISTART + 1);
    starts.push((chart.eval(&chart.center), chart.center.clone()));
    for i in 0..MULTISTART {
        let t = -1.0 + (2 * i + 1) as f64 / MULTISTART as f64;
        let mut u = chart.center.clone();
        u[0] += r * t;
        starts.push((chart.eval(&u), u));
        let mut xi = Vector::zeros(k);
        xi[0] = leaf.radius * t;
        starts.push((xi.clone(), leaf.eval(&xi)));
    }
    for (mut xi, mut u) in starts {
        let mut ok = false;
        for _ in 0..50 {
            if !leaf.contains(&xi) || !chart.contains(&u) {
                break;
            }
            let f1 = &xi - chart.eval(&u);
            let f2 = leaf.eval(&xi) - &u;
            let res = f1.norm().max(f2.norm());
            if res < 1e-13 {
                ok = true;
                break;
            }
            let mut jac = Matrix::zeros(k + p, k + p);
            jac.view_mut((0, 0), (k, k)).copy_from(&Matrix::identity(k, k));
            jac.view_mut((0, k), (k, p)).copy_from(&(-chart.derivative(&u)));
            jac.view_mut((k, 0), (p, k)).copy_from(&leaf.derivative(&xi));
            jac.view_mut((k, k), (p, p)).copy_from(&(-Matrix::identity(p, p)));
            let mut rhs = Vector::zeros(k + p);
            rhs.rows_mut(0, k).copy_from(&f1);
            rhs.rows_mut(k, p).copy_from(&f2);
            let Ok(step) = solve(&jac, &rhs) else { break };
            xi -= step.rows(0, k);
            u -= step.rows(k, p);
            if step.norm() < 1e-15 * (1.0 + xi.norm() + u.norm()) {
                let f1 = &xi - chart.eval(&u);
                let f2 = leaf.eval(&xi) - &u;
                ok = f1.norm().max(f2.norm()) < 1e-10;
                break;
            }
        }
        if ok && leaf.contains(&xi) && chart.contains(&u) && !found.iter().any(|(_, v)| (v - &u).norm() < 1e-8) {
            found.push((xi, u));
        }
    }
    match found.len() {
        0 => Err(Error::TransversalityFailure("Newton found no intersection from any start".into())),
        1 => {
            let (xi, u) = found.pop().unwrap();
            let pt = w.point(&u);
            Ok((xi, u, pt))
        }
        n => {
            let sep = found.windows(2).map(|a| (&a[0].1 - &a[1].1).norm()).fold(f64::INFINITY, f64::min);
            Err(Error::NonUniqueness { solutions: n, separation: sep })
        }
    }
}

/// A solved holonomy point.
#[derive(Debug, Clone, PartialEq)]
pub struct Crossing {
    /// Parameter on the target transversal.
    pub u: Vector,
    pub point: Vector,
    /// Parameter width of the final bracket.
    pub width: f64,
    /// Steps of the pair orbit used for the classification.
    pub steps: usize,
}

/// `P_{W1, W2}` with a cache of solved points.
#[derive(Debug)]
pub struct PoincareMap {
    coords: Arc<LyapunovCoords>,
    w1: Transversal,
    w2: Transversal,
    horizon: usize,
    cache: RwLock<HashMap<Vec<u64>, Crossing>>,
}

impl Clone for PoincareMap {
    fn clone(&self) -> Self {
        let cache = self.cache.read().map(|c| c.clone()).unwrap_or_default();
        Self { coords: self.coords.clone(), w1: self.w1.clone(), w2: self.w2.clone(), horizon: self.horizon, cache: RwLock::new(cache) }
    }
}

fn key(u: &Vector) -> Vec<u64> {
    u.iter().map(|x| x.to_bits()).collect()
}

impl PoincareMap {
    pub fn new(w1: Transversal, w2: Transversal) -> Result<Self> {
        let coords = w1.coords().clone();
        if !Arc::ptr_eq(&coords, w2.coords()) {
            return Err(Error::Domain("both transversals must share the base coordinates".into()));
        }
        if coords.p() != 1 {
            return Err(Error::Unsupported("holonomy is implemented for one unstable dimension".into()));
        }
        Ok(Self { coords, w1, w2, horizon: PAIR_HORIZON, cache: RwLock::new(HashMap::new()) })
    }

    pub fn with_horizon(mut self, horizon: usize) -> Self {
        self.horizon = horizon;
        self
    }

    pub fn coords(&self) -> &Arc<LyapunovCoords> {
        &self.coords
    }

    pub fn source(&self) -> &Transversal {
        &self.w1
    }

    pub fn target(&self) -> &Transversal {
        &self.w2
    }

    /// `P_{W2, W1}`.
    pub fn reversed(&self) -> Self {
        Self {
            coords: self.coords.clone(),
            w1: self.w2.clone(),
            w2: self.w1.clone(),
            horizon: self.horizon,
            cache: RwLock::new(HashMap::new()),
        }
    }

    /// Image of the point of `W1` with parameter `u1`.
    pub fn map(&self, u1: &Vector) -> Result<Crossing> {
        if !self.w1.contains(u1) {
            return Err(Error::Domain(format!("parameter {u1} is outside the source transversal")));
        }
        let k = key(u1);
        if let Some(c) = self.cache.read().ok().and_then(|c| c.get(&k).cloned()) {
            return Ok(c);
        }
        let y = self.w1.point(u1);
        let c = leaf_crossing(&self.coords, &y, &self.w2, self.horizon)?;
        if let Ok(mut cache) = self.cache.write() {
            cache.insert(k, c.clone());
        }
        Ok(c)
    }

    /// `|P_{W2,W1}(P_{W1,W2}(u1)) - u1|`.
    pub fn involution_error(&self, u1: &Vector) -> Result<f64> {
        let c = self.map(u1)?;
        let back = self.reversed().map(&c.u)?;
        Ok((&back.u - u1).norm())
    }
}

/// Where the leaf through the ambient point `y` crosses `w`.
pub fn leaf_crossing(coords: &LyapunovCoords, y: &Vector, w: &Transversal, horizon: usize) -> Result<Crossing> {
    let word = coords.frame().word().extended(horizon);
    let split = coords.metric().split();
    let steps = horizon.min(split.stored_len());
    let orbit = match iterate(&word, y, steps) {
        Ok(o) => o,
        Err(Error::OrbitDivergence { last_finite, .. }) if last_finite >= MIN_PAIR_STEPS => iterate(&word, y, last_finite)?,
        Err(e) => return Err(e),
    };
    let steps = orbit.len() - 1;
    let threshold = 10.0 * w.radius().max(1.0);
    let sign = |u: f64| -> Result<f64> {
        let mut v = w.point(&Vector::from_element(1, u)) - y;
        for (j, pt) in orbit.iter().enumerate().take(steps) {
            v = word.map(j)?.increment(pt, &v);
            if v.norm() > threshold || j + 1 == steps {
                let (_, h) = split.decompose(j + 1, &v)?;
                return Ok(h[0].signum());
            }
        }
        let (_, h) = split.decompose(0, &v)?;
        Ok(h[0].signum())
    };
    let c = w.center()[0];
    let r = w.radius();
    let ts: Vec<f64> = (0..=MULTISTART).map(|i| c - r + 2.0 * r * i as f64 / MULTISTART as f64).collect();
    let signs: Vec<f64> = ts.iter().map(|&t| sign(t)).collect::<Result<_>>()?;
    let changes: Vec<usize> = (0..MULTISTART).filter(|&i| signs[i] != signs[i + 1] || signs[i] == 0.0).collect();
    match changes.len() {
        0 => {
            return Err(Error::TransversalityFailure(format!(
                "the leaf through {y} does not cross the transversal inside its chart"
            )))
        }
        1 => {}
        n => {
            let sep = changes.windows(2).map(|a| ts[a[1]] - ts[a[0]]).fold(f64::INFINITY, f64::min);
            return Err(Error::NonUniqueness { solutions: n, separation: sep });
        }
    }
    let i = changes[0];
    let (mut lo, mut hi, sl) = (ts[i], ts[i + 1], signs[i]);
    if sl == 0.0 {
        let u = Vector::from_element(1, lo);
        return Ok(Crossing { point: w.point(&u), u, width: 0.0, steps });
    }
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || hi - lo <= 1e-15 * (1.0 + mid.abs()) {
            break;
        }
        let s = sign(mid)?;
        if s == 0.0 {
            lo = mid;
            hi = mid;
            break;
        }
        if s == sl {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let u = Vector::from_element(1, 0.5 * (lo + hi));
    Ok(Crossing { point: w.point(&u), u, width: hi - lo, steps })
}
