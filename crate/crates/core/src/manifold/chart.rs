//! Lyapunov coordinates along a base orbit and graph charts over `H_n`.

use std::sync::Arc;

use super::interp::TensorGrid;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Matrix, Vector};
use crate::metric::LyapunovMetric;
use crate::oseledets::{stable_splitting, PesinParams};
use crate::rds::{CenteredFrame, OmegaWord};

/// Default interpolation nodes per unstable dimension.
pub const DEFAULT_NODES: usize = 17;

/// Centered dynamics written in Lyapunov coordinates `(s, u)`, where the
/// tangent vector is `E^_n s + H^_n u` and its norm is `max(|s|, |u|)`.
#[derive(Debug, Clone)]
pub struct LyapunovCoords {
    metric: Arc<LyapunovMetric>,
    frame: CenteredFrame,
}

impl LyapunovCoords {
    pub fn new(word: &OmegaWord, metric: Arc<LyapunovMetric>) -> Result<Self> {
        let x = metric.split().point(0).clone();
        let frame = CenteredFrame::new(word, &x, metric.horizon())?;
        Ok(Self { metric, frame })
    }

    /// Splitting, metric and coordinates along the orbit of `x` in one go.
    pub fn build(word: &OmegaWord, x: &Vector, params: &PesinParams, horizon: usize) -> Result<Self> {
        let split = stable_splitting(word, x, params, horizon)?;
        let metric = LyapunovMetric::build(Arc::new(split), *params, horizon)?;
        Self::new(word, Arc::new(metric))
    }

    pub fn metric(&self) -> &Arc<LyapunovMetric> {
        &self.metric
    }

    pub fn frame(&self) -> &CenteredFrame {
        &self.frame
    }

    pub fn k(&self) -> usize {
        self.metric.k()
    }

    /// Unstable dimension `d - k`.
    pub fn p(&self) -> usize {
        self.metric.dim() - self.metric.k()
    }

    pub fn horizon(&self) -> usize {
        self.metric.horizon()
    }

    pub fn tangent(&self, n: usize, s: &Vector, u: &Vector) -> Vector {
        self.metric.from_coords(n, s, u)
    }

    pub fn coords(&self, n: usize, v: &Vector) -> Result<(Vector, Vector)> {
        self.metric.coords(n, v)
    }

    /// Point of `R^d` with coordinates `(s, u)` at index `n`.
    pub fn point(&self, n: usize, s: &Vector, u: &Vector) -> Vector {
        self.frame.point(n) + self.tangent(n, s, u)
    }

    /// Coordinates of a point of `R^d` at index `n`.
    pub fn coords_of_point(&self, n: usize, x: &Vector) -> Result<(Vector, Vector)> {
        self.coords(n, &(x - self.frame.point(n)))
    }

    /// `F_n` in coordinates.
    pub fn map(&self, n: usize, s: &Vector, u: &Vector) -> Result<(Vector, Vector)> {
        let v = self.tangent(n, s, u);
        let w = self.frame.apply(n, &v)?;
        self.coords(n + 1, &w)
    }

    /// `D F_n` at `(s, u)` in coordinates, `d x d`.
    pub fn map_derivative(&self, n: usize, s: &Vector, u: &Vector) -> Result<Matrix> {
        let v = self.tangent(n, s, u);
        let j = self.frame.derivative(n, &v)?;
        Ok(self.metric.coords_matrix(n + 1) * j * self.metric.frame_hat(n))
    }
}

/// `F_n(s, u) = (A s + a(s, u), B u + b(s, u))`.
#[derive(Debug, Clone)]
pub struct CoordinateDecomposition<'a> {
    coords: &'a LyapunovCoords,
    pub n: usize,
    pub a: Matrix,
    pub b: Matrix,
    /// Off-diagonal blocks of `D_0 F_n`, zero for an exactly invariant splitting.
    pub coupling: f64,
}

impl<'a> CoordinateDecomposition<'a> {
    pub fn at(coords: &'a LyapunovCoords, n: usize) -> Result<Self> {
        let k = coords.k();
        let p = coords.p();
        let d0 = coords.map_derivative(n, &Vector::zeros(k), &Vector::zeros(p))?;
        let a = d0.view((0, 0), (k, k)).into_owned();
        let b = d0.view((k, k), (p, p)).into_owned();
        let coupling = spectral_norm(&d0.view((0, k), (k, p)).into_owned()).max(spectral_norm(&d0.view((k, 0), (p, k)).into_owned()));
        Ok(Self { coords, n, a, b, coupling })
    }

    /// Nonlinear remainders `(a_n(s, u), b_n(s, u))`.
    pub fn remainder(&self, s: &Vector, u: &Vector) -> Result<(Vector, Vector)> {
        let (s1, u1) = self.coords.map(self.n, s, u)?;
        Ok((s1 - &self.a * s, u1 - &self.b * u))
    }
}

/// Graph of `psi` over the ball `|u - center| <= radius` in `H_n`, with
/// values in `E_n`, both in Lyapunov coordinates.
#[derive(Debug, Clone)]
pub struct GraphChart {
    pub n: usize,
    pub center: Vector,
    pub radius: f64,
    pub nodes_per_dim: usize,
    grid: TensorGrid,
    values: Vec<Vector>,
    /// `sup ||psi||'` over nodes and midpoints inside the ball.
    pub sup_psi: f64,
    /// `sup ||D psi||'` over the same points.
    pub sup_dpsi: f64,
    /// Largest Newton residual of the step that produced the chart.
    pub newton_residual: f64,
    /// Largest distance of interpolated points from the exact image.
    pub invariance_residual: f64,
}

impl GraphChart {
    /// Sample `psi` on an `m`-node grid.
    pub fn from_fn<F: Fn(&Vector) -> Vector>(n: usize, center: &Vector, radius: f64, m: usize, psi: F) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain(format!("chart radius must be positive, got {radius}")));
        }
        let grid = TensorGrid::cube(center, radius, m);
        let values = grid.nodes().iter().map(&psi).collect();
        Ok(Self::from_values(n, center.clone(), radius, m, grid, values))
    }

    fn from_values(n: usize, center: Vector, radius: f64, m: usize, grid: TensorGrid, values: Vec<Vector>) -> Self {
        let mut c = Self {
            n,
            center,
            radius,
            nodes_per_dim: m,
            grid,
            values,
            sup_psi: 0.0,
            sup_dpsi: 0.0,
            newton_residual: 0.0,
            invariance_residual: 0.0,
        };
        c.measure();
        c
    }

    pub(crate) fn assemble(n: usize, center: Vector, radius: f64, m: usize, values: Vec<Vector>) -> Self {
        let grid = TensorGrid::cube(&center, radius, m);
        Self::from_values(n, center, radius, m, grid, values)
    }

    fn measure(&mut self) {
        let mut sp: f64 = 0.0;
        let mut sd: f64 = 0.0;
        for u in self.sample_points() {
            let (v, j) = self.grid.eval(&self.values, &u);
            sp = sp.max(v.norm());
            sd = sd.max(spectral_norm(&j));
        }
        self.sup_psi = sp;
        self.sup_dpsi = sd;
    }

    /// Nodes and midpoints inside the ball.
    pub fn sample_points(&self) -> Vec<Vector> {
        let r = self.radius * (1.0 + 1e-12);
        self.grid
            .nodes()
            .into_iter()
            .chain(self.grid.midpoints())
            .filter(|u| (u - &self.center).norm() <= r)
            .collect()
    }

    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn nodes(&self) -> Vec<Vector> {
        self.grid.nodes()
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn contains(&self, u: &Vector) -> bool {
        (u - &self.center).norm() <= self.radius * (1.0 + 1e-12)
    }

    pub fn eval(&self, u: &Vector) -> Vector {
        self.grid.eval(&self.values, u).0
    }

    pub fn derivative(&self, u: &Vector) -> Matrix {
        self.grid.eval(&self.values, u).1
    }

    /// `psi(eta_n)`.
    pub fn anchor(&self) -> Vector {
        self.eval(&self.center)
    }

    /// Transversal norm `sup ||psi||' + sup ||D psi||'`.
    pub fn norm(&self) -> f64 {
        self.sup_psi + self.sup_dpsi
    }

    /// Graph volume `int sqrt(det(I + D psi^T D psi))` over the domain, for a
    /// one-dimensional domain, with a quadrature error estimate.
    pub fn graph_length(&self) -> Result<(f64, f64)> {
        if self.center.len() != 1 {
            return Err(Error::Unsupported("graph volume quadrature needs a one-dimensional domain".into()));
        }
        let (lo, hi) = (self.center[0] - self.radius, self.center[0] + self.radius);
        let f = |t: f64| {
            let j = self.derivative(&Vector::from_element(1, t));
            (1.0 + (j.transpose() * &j)[(0, 0)]).sqrt()
        };
        let pieces = 2 * (self.nodes_per_dim - 1).max(1);
        let coarse = crate::quadrature::composite(f, lo, hi, pieces, 16);
        let fine = crate::quadrature::composite(f, lo, hi, 2 * pieces, 16);
        Ok((fine, (fine - coarse).abs()))
    }
}

/// Straight transversal through `point` along the columns of `dirs`
/// (a `d x (d-k)` matrix), as a graph over `H_n`.
pub fn line_seed(coords: &LyapunovCoords, n: usize, point: &Vector, dirs: &Matrix) -> Result<(Vector, Vector, impl Fn(&Vector) -> Vector)> {
    let (s0, u0) = coords.coords_of_point(n, point)?;
    let k = coords.k();
    let p = coords.p();
    if dirs.ncols() != p {
        return Err(Error::DimensionMismatch { expected: p, got: dirs.ncols() });
    }
    let c = coords.metric().coords_matrix(n) * dirs;
    let s1 = c.rows(0, k).into_owned();
    let u1 = c.rows(k, p).into_owned();
    let u1inv = crate::linalg::inverse(&u1).map_err(|_| Error::TransversalityFailure("line is not a graph over H".into()))?;
    let slope = s1 * u1inv;
    let (s_anchor, u_anchor) = (s0.clone(), u0.clone());
    Ok((s0, u0, move |u: &Vector| &s_anchor + &slope * (u - &u_anchor)))
}
