//! Transversal sections: graphs over the unstable subspace at the base point.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::manifold::{GraphChart, LyapunovCoords, StableChart};

/// Default nodes per dimension for transversal charts.
pub const TRANSVERSAL_NODES: usize = 33;
const IMPLICIT_MAX_ITER: usize = 60;

/// `W = {E^ psi(u) + H^ u}` around the base point, `|u - center| <= q`.
#[derive(Debug, Clone)]
pub struct Transversal {
    coords: Arc<LyapunovCoords>,
    chart: GraphChart,
}

impl Transversal {
    pub fn from_chart(coords: Arc<LyapunovCoords>, chart: GraphChart) -> Result<Self> {
        if chart.n != 0 {
            return Err(Error::Domain(format!("transversals live at index 0, got a chart at {}", chart.n)));
        }
        Ok(Self { coords, chart })
    }

    /// Graph of an explicit `psi`.
    pub fn from_fn<F: Fn(&Vector) -> Vector>(coords: Arc<LyapunovCoords>, center: &Vector, radius: f64, nodes: usize, psi: F) -> Result<Self> {
        let chart = GraphChart::from_fn(0, center, radius, nodes, psi)?;
        Self::from_chart(coords, chart)
    }

    /// Zero set of `g: R^d -> R^k` near the base point, solved for `s` at each
    /// node by Newton with difference Jacobians.
    pub fn from_implicit<G: Fn(&Vector) -> Vector>(coords: Arc<LyapunovCoords>, g: G, center: &Vector, radius: f64, nodes: usize) -> Result<Self> {
        let k = coords.k();
        let grid = crate::manifold::interp::TensorGrid::cube(center, radius, nodes);
        let mut values = Vec::with_capacity(grid.len());
        let mut s = Vector::zeros(k);
        for u in grid.nodes() {
            s = solve_implicit(&coords, &g, &u, s)?;
            values.push(s.clone());
        }
        let chart = GraphChart::assemble(0, center.clone(), radius, nodes, values);
        Self::from_chart(coords, chart)
    }

    /// Zero set of `g` with its domain centred where it crosses the leaf of
    /// the base point.
    pub fn from_implicit_on_leaf<G: Fn(&Vector) -> Vector>(coords: Arc<LyapunovCoords>, leaf: &StableChart, g: G, radius: f64, nodes: usize) -> Result<Self> {
        let crossing = leaf_crossing_of_level_set(leaf, &g)?;
        let (_, u) = coords.coords_of_point(0, &crossing)?;
        Self::from_implicit(coords, g, &u, radius, nodes)
    }

    pub fn coords(&self) -> &Arc<LyapunovCoords> {
        &self.coords
    }

    pub fn chart(&self) -> &GraphChart {
        &self.chart
    }

    pub fn center(&self) -> &Vector {
        &self.chart.center
    }

    /// `q`, the radius of the parameter ball.
    pub fn radius(&self) -> f64 {
        self.chart.radius
    }

    /// `||W|| = sup ||psi||' + sup ||D psi||'`.
    pub fn norm(&self) -> f64 {
        self.chart.norm()
    }

    pub fn contains(&self, u: &Vector) -> bool {
        self.chart.contains(u)
    }

    /// Ambient point with parameter `u`.
    pub fn point(&self, u: &Vector) -> Vector {
        self.coords.point(0, &self.chart.eval(u), u)
    }

    /// Ambient tangent vectors `E^ D psi + H^` (`d x p`).
    pub fn tangent(&self, u: &Vector) -> Matrix {
        let m = self.coords.metric();
        m.e_hat(0) * self.chart.derivative(u) + m.h_hat(0)
    }

    /// Parameter of an ambient point of `W`, with the distance of the point
    /// from `W` along `E`.
    pub fn parameter_of(&self, x: &Vector) -> Result<(Vector, f64)> {
        let (s, u) = self.coords.coords_of_point(0, x)?;
        Ok((u.clone(), (self.chart.eval(&u) - s).norm()))
    }

    /// Euclidean arc length of `W` between parameters `a < b` (one
    /// dimensional), composite Gauss-Legendre of order 16 on `panels` panels.
    pub fn arc_length(&self, a: f64, b: f64, panels: usize) -> Result<f64> {
        if self.coords.p() != 1 {
            return Err(Error::Unsupported("arc length needs a one-dimensional transversal".into()));
        }
        let f = |t: f64| {
            let u = Vector::from_element(1, t);
            self.tangent(&u).column(0).norm()
        };
        Ok(crate::quadrature::composite(f, a, b, panels, 16))
    }
}

fn solve_implicit<G: Fn(&Vector) -> Vector>(coords: &LyapunovCoords, g: &G, u: &Vector, mut s: Vector) -> Result<Vector> {
    let k = coords.k();
    let eval = |s: &Vector| -> Vector { g(&coords.point(0, s, u)) };
    let mut r = eval(&s);
    for _ in 0..IMPLICIT_MAX_ITER {
        if r.norm() <= 1e-14 * (1.0 + s.norm()) {
            return Ok(s);
        }
        let mut jac = Matrix::zeros(r.len(), k);
        for j in 0..k {
            let h = 1e-7 * (1.0 + s[j].abs());
            let mut sp = s.clone();
            let mut sm = s.clone();
            sp[j] += h;
            sm[j] -= h;
            jac.set_column(j, &((eval(&sp) - eval(&sm)) / (2.0 * h)));
        }
        let step = crate::linalg::solve(&jac, &r).map_err(|_| Error::TransversalityFailure("level set is tangent to E".into()))?;
        s -= step;
        r = eval(&s);
    }
    if r.norm() <= 1e-10 * (1.0 + s.norm()) {
        Ok(s)
    } else {
        Err(Error::TransversalityFailure(format!("level set not found over u = {u}: residual {:.3e}", r.norm())))
    }
}

/// Point where the base leaf meets `g = 0` (stable dimension one), by sign
/// search and bisection along the leaf chart.
fn leaf_crossing_of_level_set<G: Fn(&Vector) -> Vector>(leaf: &StableChart, g: &G) -> Result<Vector> {
    if leaf.base.len() != 2 || leaf.values()[0].len() != 1 {
        return Err(Error::Unsupported("leaf crossing search needs a planar system".into()));
    }
    let f = |t: f64| g(&leaf.point(&Vector::from_element(1, t)))[0];
    let r = leaf.radius;
    let samples = 64;
    let ts: Vec<f64> = (0..=samples).map(|i| -r + 2.0 * r * i as f64 / samples as f64).collect();
    let vals: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
    let mut found = None;
    for i in 0..samples {
        if vals[i] == 0.0 {
            found = Some(ts[i]);
            break;
        }
        if vals[i].signum() != vals[i + 1].signum() {
            let (mut lo, mut hi, sl) = (ts[i], ts[i + 1], vals[i].signum());
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid <= lo || mid >= hi {
                    break;
                }
                if f(mid).signum() == sl {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            found = Some(0.5 * (lo + hi));
            break;
        }
    }
    let t = found.ok_or_else(|| Error::TransversalityFailure("level set does not cross the base leaf inside its chart".into()))?;
    Ok(leaf.point(&Vector::from_element(1, t)))
}
