//! Linear-algebra and graph-volume inequalities behind the Jacobian
//! comparison, checked numerically.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{aperture, orth, spectral_norm, Matrix, Vector};

pub use crate::linalg::restricted_det;

/// Constant of the determinant perturbation bound
/// `| det A|E1 - det B|E2 | <= C7 a^p (|A - B| + Gamma(E1, E2))` for
/// `a >= max(1, |A|, |B|)`: principal vectors give bases with
/// `|Q1 - Q2| <= sqrt(2) Gamma`, and the volume of `p` columns is
/// Lipschitz in each column with constant `a^(p-1)`.
pub fn determinant_constant(p: usize) -> f64 {
    std::f64::consts::SQRT_2 * p as f64
}

/// Subspace spanned by the graph of `a: R^p -> R^q`, as columns `[I; a]`.
pub fn graph_subspace(a: &Matrix) -> Matrix {
    let (q, p) = a.shape();
    let mut m = Matrix::zeros(p + q, p);
    m.view_mut((0, 0), (p, p)).copy_from(&Matrix::identity(p, p));
    m.view_mut((p, 0), (q, p)).copy_from(a);
    m
}

/// `2(|A| + |B|) - Gamma(graph A, graph B)`.
pub fn graph_aperture_bound_check(a: &Matrix, b: &Matrix) -> Result<f64> {
    if a.shape() != b.shape() {
        return Err(Error::Domain(format!("graphs of maps with shapes {:?} and {:?}", a.shape(), b.shape())));
    }
    let gamma = aperture(&graph_subspace(a), &graph_subspace(b))?;
    Ok(2.0 * (spectral_norm(a) + spectral_norm(b)) - gamma)
}

/// `C7 a^p (|A - B| + Gamma) - | det A|E1 - det B|E2 |`.
pub fn determinant_perturbation_check(a: &Matrix, e1: &Matrix, b: &Matrix, e2: &Matrix) -> Result<f64> {
    let p = e1.ncols();
    let gamma = aperture(e1, e2)?;
    let bound_a = 1f64.max(spectral_norm(a)).max(spectral_norm(b));
    let lhs = (restricted_det(a, e1) - restricted_det(b, e2)).abs();
    Ok(determinant_constant(p) * bound_a.powi(p as i32) * (spectral_norm(&(a - b)) + gamma) - lhs)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VolumeMargins {
    pub volume: f64,
    pub graph_measure: f64,
    pub derivative_bound: f64,
    /// `m_p(graph) - vol`.
    pub lower: f64,
    /// `(1 + a^2)^{p/2} vol - m_p(graph)`.
    pub upper: f64,
    pub quadrature_error: f64,
}

const VOLUME_PANELS: usize = 16;

/// `vol <= m_p(graph psi) <= (1 + a^2)^{p/2} vol` for a graph over the
/// interval `[lo, hi]` with derivative `dpsi` (one-dimensional domain).
/// `a` defaults to the sampled sup of `|D psi|` on a fine grid.
pub fn graph_volume_bound_check<F: Fn(f64) -> Matrix>(dpsi: F, lo: f64, hi: f64, a: Option<f64>) -> VolumeMargins {
    let density = |t: f64| {
        let j = dpsi(t);
        (1.0 + (j.transpose() * &j)[(0, 0)]).sqrt()
    };
    let a = a.unwrap_or_else(|| {
        (0..=4096)
            .map(|i| spectral_norm(&dpsi(lo + (hi - lo) * i as f64 / 4096.0)))
            .fold(0.0, f64::max)
    });
    let fine = crate::quadrature::composite(density, lo, hi, 2 * VOLUME_PANELS, 16);
    let coarse = crate::quadrature::composite(density, lo, hi, VOLUME_PANELS, 16);
    let volume = hi - lo;
    VolumeMargins {
        volume,
        graph_measure: fine,
        derivative_bound: a,
        lower: fine - volume,
        upper: (1.0 + a * a).sqrt() * volume - fine,
        quadrature_error: (fine - coarse).abs(),
    }
}

/// Uniformly distributed `rows x cols` matrix with spectral norm at most
/// `scale`, from the caller's uniform samples in `[-1, 1]`.
pub fn scaled_matrix(rows: usize, cols: usize, entries: &[f64], scale: f64) -> Matrix {
    let m = Matrix::from_column_slice(rows, cols, &entries[..rows * cols]);
    let n = spectral_norm(&m);
    if n > 0.0 {
        m * (scale / n.max(scale))
    } else {
        m
    }
}

/// Random orthonormal `d x p` basis from uniform samples.
pub fn subspace_from(d: usize, p: usize, entries: &[f64]) -> Matrix {
    orth(&Matrix::from_column_slice(d, p, &entries[..d * p]))
}

/// `|v|` of a vector, for symmetry with the matrix helpers.
pub fn length(v: &Vector) -> f64 {
    v.norm()
}
