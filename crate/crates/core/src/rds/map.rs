//! Diffeomorphisms of `R^d` with derivatives.

use std::fmt::Debug;

use crate::linalg::{quasi_random_ball, quasi_random_directions, spectral_norm, Matrix, Vector};

/// Relative central-difference step.
pub fn fd_step(x: &Vector) -> f64 {
    1e-6 * x.amax().max(1.0)
}

/// Central-difference Jacobian of `f` at `x` with step `h_fd = 1e-6 max(1, |x|)`.
pub fn fd_jacobian<F: Fn(&Vector) -> Vector>(f: F, x: &Vector) -> Matrix {
    let d = x.len();
    let h = fd_step(x);
    let mut jac = Matrix::zeros(f(x).len(), d);
    for j in 0..d {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (f(&xp) - f(&xm)) / (2.0 * h);
        jac.set_column(j, &col);
    }
    jac
}

/// A `C^2` diffeomorphism of `R^d`.
///
/// Only `dim`, `forward` and `inverse` are mandatory; everything else has
/// finite-difference or sampled fallbacks.
pub trait Diffeo: Send + Sync + Debug {
    fn dim(&self) -> usize;

    fn forward(&self, x: &Vector) -> Vector;

    fn inverse(&self, y: &Vector) -> Vector;

    fn jacobian(&self, x: &Vector) -> Matrix {
        fd_jacobian(|v| self.forward(v), x)
    }

    /// Derivative of the inverse map at `y`.
    fn inverse_jacobian(&self, y: &Vector) -> Matrix {
        fd_jacobian(|v| self.inverse(v), y)
    }

    /// `f(p + v) - f(p)`. Maps with a closed form should override this so
    /// that tiny increments keep full relative precision.
    fn increment(&self, p: &Vector, v: &Vector) -> Vector {
        self.forward(&(p + v)) - self.forward(p)
    }

    /// `f^{-1}(q + w) - f^{-1}(q)`.
    fn inverse_increment(&self, q: &Vector, w: &Vector) -> Vector {
        self.inverse(&(q + w)) - self.inverse(q)
    }

    /// Sup of the operator norm of the second derivative over the closed
    /// ball of radius `radius` around `center`, when known in closed form.
    fn second_derivative_bound(&self, _center: &Vector, _radius: f64) -> Option<f64> {
        None
    }

    /// The realized parameters, for reproducibility checks.
    fn params(&self) -> Vec<f64> {
        Vec::new()
    }
}

/// Sampled sup of `|D^2 f|` over a ball: central differences of the Jacobian
/// along `2 d^2` quasi-random directions at quasi-random points.
pub fn sampled_second_derivative(map: &dyn Diffeo, center: &Vector, radius: f64, points: usize) -> f64 {
    let d = map.dim();
    let dirs = quasi_random_directions(d, 2 * d * d);
    let mut sup: f64 = 0.0;
    for p in quasi_random_ball(d, points.max(1), radius) {
        let x = center + p;
        let h = 1e-4 * x.amax().max(1.0);
        for v in &dirs {
            let q = (map.jacobian(&(&x + v * h)) - map.jacobian(&(&x - v * h))) / (2.0 * h);
            sup = sup.max(spectral_norm(&q));
        }
    }
    sup
}

#[derive(Debug, Clone)]
pub struct IdentityMap {
    pub d: usize,
}

impl Diffeo for IdentityMap {
    fn dim(&self) -> usize {
        self.d
    }
    fn forward(&self, x: &Vector) -> Vector {
        x.clone()
    }
    fn inverse(&self, y: &Vector) -> Vector {
        y.clone()
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        Matrix::identity(self.d, self.d)
    }
    fn inverse_jacobian(&self, _y: &Vector) -> Matrix {
        Matrix::identity(self.d, self.d)
    }
    fn increment(&self, _p: &Vector, v: &Vector) -> Vector {
        v.clone()
    }
    fn inverse_increment(&self, _q: &Vector, w: &Vector) -> Vector {
        w.clone()
    }
    fn second_derivative_bound(&self, _c: &Vector, _r: f64) -> Option<f64> {
        Some(0.0)
    }
}

/// `x -> M x` for an invertible matrix `M`.
#[derive(Debug, Clone)]
pub struct LinearMap {
    m: Matrix,
    m_inv: Matrix,
}

impl LinearMap {
    /// Returns `None` for a singular matrix.
    pub fn new(m: Matrix) -> Option<Self> {
        let m_inv = m.clone().try_inverse()?;
        Some(Self { m, m_inv })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.m
    }
}

impl Diffeo for LinearMap {
    fn dim(&self) -> usize {
        self.m.nrows()
    }
    fn forward(&self, x: &Vector) -> Vector {
        &self.m * x
    }
    fn inverse(&self, y: &Vector) -> Vector {
        &self.m_inv * y
    }
    fn jacobian(&self, _x: &Vector) -> Matrix {
        self.m.clone()
    }
    fn inverse_jacobian(&self, _y: &Vector) -> Matrix {
        self.m_inv.clone()
    }
    fn increment(&self, _p: &Vector, v: &Vector) -> Vector {
        &self.m * v
    }
    fn inverse_increment(&self, _q: &Vector, w: &Vector) -> Vector {
        &self.m_inv * w
    }
    fn second_derivative_bound(&self, _c: &Vector, _r: f64) -> Option<f64> {
        Some(0.0)
    }
    fn params(&self) -> Vec<f64> {
        self.m.iter().copied().collect()
    }
}

/// Planar skew map `(x, y) -> (a x, b y + c sin x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkewMap {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl SkewMap {
    /// The fibre term `h(x) = c sin x`.
    pub fn h(&self, x: f64) -> f64 {
        self.c * x.sin()
    }
}

/// `sin(x + v) - sin(x)` without cancellation.
fn sin_increment(x: f64, v: f64) -> f64 {
    2.0 * (x + 0.5 * v).cos() * (0.5 * v).sin()
}

impl Diffeo for SkewMap {
    fn dim(&self) -> usize {
        2
    }
    fn forward(&self, p: &Vector) -> Vector {
        Vector::from_vec(vec![self.a * p[0], self.b * p[1] + self.c * p[0].sin()])
    }
    fn inverse(&self, q: &Vector) -> Vector {
        let x = q[0] / self.a;
        Vector::from_vec(vec![x, (q[1] - self.c * x.sin()) / self.b])
    }
    fn jacobian(&self, p: &Vector) -> Matrix {
        Matrix::from_row_slice(2, 2, &[self.a, 0.0, self.c * p[0].cos(), self.b])
    }
    fn inverse_jacobian(&self, q: &Vector) -> Matrix {
        let x = q[0] / self.a;
        Matrix::from_row_slice(
            2,
            2,
            &[1.0 / self.a, 0.0, -self.c * x.cos() / (self.a * self.b), 1.0 / self.b],
        )
    }
    fn increment(&self, p: &Vector, v: &Vector) -> Vector {
        Vector::from_vec(vec![self.a * v[0], self.b * v[1] + self.c * sin_increment(p[0], v[0])])
    }
    fn inverse_increment(&self, q: &Vector, w: &Vector) -> Vector {
        let x = q[0] / self.a;
        let dx = w[0] / self.a;
        Vector::from_vec(vec![dx, (w[1] - self.c * sin_increment(x, dx)) / self.b])
    }
    fn second_derivative_bound(&self, center: &Vector, radius: f64) -> Option<f64> {
        // only d^2/dx^2 of the second component survives: -c sin x
        let lo = center[0] - radius;
        let hi = center[0] + radius;
        let half_pi = std::f64::consts::FRAC_PI_2;
        let k_lo = ((lo - half_pi) / std::f64::consts::PI).ceil();
        let k_hi = ((hi - half_pi) / std::f64::consts::PI).floor();
        let peak = if k_lo <= k_hi { 1.0 } else { lo.sin().abs().max(hi.sin().abs()) };
        Some(self.c.abs() * peak)
    }
    fn params(&self) -> Vec<f64> {
        vec![self.a, self.b, self.c]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn skew_jacobian_matches_differences() {
        let f = SkewMap { a: 0.5, b: 2.0, c: 1.0 };
        let x = Vector::from_vec(vec![1.0, 0.0]);
        let exact = f.jacobian(&x);
        let fd = fd_jacobian(|v| f.forward(v), &x);
        assert!((exact.clone() - fd).norm() <= 1e-5 * exact.norm());
        assert_relative_eq!(exact[(1, 0)], 1f64.cos());
    }

    #[test]
    fn skew_roundtrip_and_increments() {
        let f = SkewMap { a: 0.45, b: 2.1, c: 0.7 };
        let p = Vector::from_vec(vec![0.8, -1.3]);
        let back = f.forward(&f.inverse(&p));
        assert!((back - &p).norm() < 1e-12);
        let v = Vector::from_vec(vec![1e-9, 2e-9]);
        let direct = f.forward(&(&p + &v)) - f.forward(&p);
        assert!((f.increment(&p, &v) - direct).norm() < 1e-15);
        let w = f.increment(&p, &v);
        let q = f.forward(&p);
        assert!((f.inverse_increment(&q, &w) - v).norm() < 1e-22);
    }

    #[test]
    fn skew_hessian_bound() {
        let f = SkewMap { a: 0.5, b: 2.0, c: 1.0 };
        let b = f.second_derivative_bound(&Vector::from_vec(vec![1.0, 0.0]), 1.0).unwrap();
        assert_eq!(b, 1.0);
        let b0 = f.second_derivative_bound(&Vector::from_vec(vec![0.0, 0.0]), 0.5).unwrap();
        assert_relative_eq!(b0, 0.5f64.sin());
        let sampled = sampled_second_derivative(&f, &Vector::from_vec(vec![1.0, 0.0]), 1.0, 64);
        assert!(sampled <= 1.0 + 1e-6 && sampled > 0.9);
    }
}
