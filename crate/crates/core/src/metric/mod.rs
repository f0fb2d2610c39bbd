//! The Lyapunov metric along an orbit and Pesin-set certificates.
//!
//! Gram matrices are stored per index in the orthonormal bases of `E_n` and
//! `H_n`. Their Cholesky factors give Lyapunov-orthonormal bases `E^`, `H^`;
//! in the coordinates `zeta = E^ s + H^ u` the Lyapunov norm is simply
//! `max(|s|, |u|)`.

mod certificate;

pub use certificate::{
    certificate_from_split, estimate_cdelta, estimate_l, estimate_r, pesin_membership, r_growth_check, LEstimate, PesinCertificate, REstimate,
    RGrowthReport, L_CEILING, R_SAFETY,
};

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse, solve, Matrix, Vector};
use crate::oseledets::{series_reserve, OseledetsSplit, PesinParams};
use crate::rds::{iterate, OmegaWord};

/// Stop the stable series once a term is below this fraction of the sum.
pub const SERIES_REL_TOL: f64 = 1e-12;
/// Consecutive non-decreasing terms that count as divergence.
pub const DIVERGENCE_RUN: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricOptions {
    pub rel_tol: f64,
    /// Hard cap on the stable-series length; `None` uses `max(1000, 10 N)`.
    pub cap: Option<usize>,
    /// Terms added after the stopping rule fires (for refinement checks).
    pub extra_terms: usize,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self { rel_tol: SERIES_REL_TOL, cap: None, extra_terms: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Truncation {
    /// Number of stable-series terms summed (`l = 0..K-1`).
    pub terms: usize,
    /// Estimated size of the neglected tail relative to the sum.
    pub tail: f64,
    /// Term ratio stayed `>= 1` for [`DIVERGENCE_RUN`] terms.
    pub diverged: bool,
}

#[derive(Debug, Clone)]
pub struct LyapunovMetric {
    split: Arc<OseledetsSplit>,
    params: PesinParams,
    horizon: usize,
    gram_e: Vec<Matrix>,
    gram_h: Vec<Matrix>,
    truncation: Vec<Truncation>,
    e_hat: Vec<Matrix>,
    h_hat: Vec<Matrix>,
    to_coords: Vec<Matrix>,
}

fn sym(m: Matrix) -> Matrix {
    (&m + m.transpose()) * 0.5
}

fn cholesky_lower(g: &Matrix) -> Result<Matrix> {
    if g.nrows() == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    g.clone()
        .cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::Domain("Gram matrix is not positive definite".into()))
}

impl LyapunovMetric {
    pub fn build(split: Arc<OseledetsSplit>, params: PesinParams, horizon: usize) -> Result<Self> {
        Self::build_with(split, params, horizon, MetricOptions::default())
    }

    pub fn build_with(split: Arc<OseledetsSplit>, params: PesinParams, horizon: usize, opts: MetricOptions) -> Result<Self> {
        if horizon > split.horizon {
            return Err(Error::Domain(format!(
                "metric horizon {horizon} exceeds the splitting horizon {}",
                split.horizon
            )));
        }
        let cap = opts.cap.unwrap_or_else(|| series_reserve(horizon));
        let cap = cap.min(split.stored_len() - horizon);
        let (k, d) = (split.k, split.d);
        let u = d - k;
        let w_s = (-2.0 * (params.a + 2.0 * params.eps)).exp();
        let w_u = (2.0 * (params.b - 2.0 * params.eps)).exp();

        let inv: Vec<Matrix> = (0..horizon).map(|j| inverse(split.jacobian(j))).collect::<Result<_>>()?;

        let mut gram_e = Vec::with_capacity(horizon + 1);
        let mut gram_h = Vec::with_capacity(horizon + 1);
        let mut truncation = Vec::with_capacity(horizon + 1);
        for n in 0..=horizon {
            // stable part: sum_l w_s^l <S^l xi, S^l xi'>
            let mut v = split.e_basis(n).clone();
            let mut g = v.transpose() * &v;
            let mut weight = 1.0;
            let mut prev = g.norm();
            let mut run = 0usize;
            let mut diverged = false;
            let mut last_ratio: f64 = 0.0;
            let mut terms = 1usize;
            let mut extra_left = opts.extra_terms;
            let mut stopped = false;
            for l in 1..=cap {
                v = split.project_e(n + l, &(split.jacobian(n + l - 1) * &v))?;
                weight *= w_s;
                let term = (v.transpose() * &v) * weight;
                let tn = term.norm();
                g += &term;
                terms += 1;
                let ratio = if prev > 0.0 { tn / prev } else { 0.0 };
                last_ratio = ratio;
                prev = tn;
                if ratio >= 1.0 {
                    run += 1;
                    if run >= DIVERGENCE_RUN {
                        diverged = true;
                        break;
                    }
                } else {
                    run = 0;
                }
                if stopped || tn < opts.rel_tol * g.norm() {
                    stopped = true;
                    if extra_left == 0 {
                        break;
                    }
                    extra_left -= 1;
                }
            }
            let tail = if last_ratio < 1.0 { prev * last_ratio / (1.0 - last_ratio) / g.norm() } else { f64::INFINITY };
            truncation.push(Truncation { terms, tail, diverged });
            gram_e.push(sym(g));

            // unstable part: sum_{l <= n} w_u^l <(U^l_{n-l})^{-1} eta, ...>
            let mut wv = split.h_basis(n).clone();
            let mut gh = wv.transpose() * &wv;
            let mut weight = 1.0;
            if u > 0 {
                for l in 1..=n {
                    let j = n - l;
                    wv = split.project_h(j, &(&inv[j] * &wv))?;
                    weight *= w_u;
                    gh += (wv.transpose() * &wv) * weight;
                }
            }
            gram_h.push(sym(gh));
        }

        let mut e_hat = Vec::with_capacity(horizon + 1);
        let mut h_hat = Vec::with_capacity(horizon + 1);
        let mut to_coords = Vec::with_capacity(horizon + 1);
        for n in 0..=horizon {
            let le = cholesky_lower(&gram_e[n])?;
            let lh = cholesky_lower(&gram_h[n])?;
            let eh = split.e_basis(n) * inverse(&le.transpose())?;
            let hh = if u > 0 { split.h_basis(n) * inverse(&lh.transpose())? } else { Matrix::zeros(d, 0) };
            let mut frame = Matrix::zeros(d, d);
            frame.columns_mut(0, k).copy_from(&eh);
            frame.columns_mut(k, u).copy_from(&hh);
            to_coords.push(inverse(&frame)?);
            e_hat.push(eh);
            h_hat.push(hh);
        }
        Ok(Self { split, params, horizon, gram_e, gram_h, truncation, e_hat, h_hat, to_coords })
    }

    pub fn split(&self) -> &Arc<OseledetsSplit> {
        &self.split
    }

    pub fn params(&self) -> &PesinParams {
        &self.params
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn k(&self) -> usize {
        self.split.k
    }

    pub fn dim(&self) -> usize {
        self.split.d
    }

    pub fn gram_e(&self, n: usize) -> &Matrix {
        &self.gram_e[n]
    }

    pub fn gram_h(&self, n: usize) -> &Matrix {
        &self.gram_h[n]
    }

    pub fn truncation(&self, n: usize) -> Truncation {
        self.truncation[n]
    }

    /// `E^_n`: columns are Lyapunov-orthonormal and span `E_n`.
    pub fn e_hat(&self, n: usize) -> &Matrix {
        &self.e_hat[n]
    }

    pub fn h_hat(&self, n: usize) -> &Matrix {
        &self.h_hat[n]
    }

    /// `[E^_n H^_n]`: tangent vector from Lyapunov coordinates.
    pub fn frame_hat(&self, n: usize) -> Matrix {
        let (d, k) = (self.dim(), self.k());
        let mut frame = Matrix::zeros(d, d);
        frame.columns_mut(0, k).copy_from(&self.e_hat[n]);
        frame.columns_mut(k, d - k).copy_from(&self.h_hat[n]);
        frame
    }

    /// Inverse of [`Self::frame_hat`].
    pub fn coords_matrix(&self, n: usize) -> &Matrix {
        &self.to_coords[n]
    }

    /// `A = 4 l'^2 (1 - e^{-2 eps})^{-1/2}`.
    pub fn a_const(&self) -> f64 {
        self.params.a_const()
    }

    fn check_index(&self, n: usize) -> Result<()> {
        if n > self.horizon {
            return Err(Error::Domain(format!("index {n} beyond metric horizon {}", self.horizon)));
        }
        Ok(())
    }

    /// Lyapunov coordinates `(s, u)` of a tangent vector at `f^n x`.
    pub fn coords(&self, n: usize, zeta: &Vector) -> Result<(Vector, Vector)> {
        self.check_index(n)?;
        let c = &self.to_coords[n] * zeta;
        let k = self.k();
        Ok((c.rows(0, k).into_owned(), c.rows(k, self.dim() - k).into_owned()))
    }

    /// Tangent vector `E^_n s + H^_n u`.
    pub fn from_coords(&self, n: usize, s: &Vector, u: &Vector) -> Vector {
        &self.e_hat[n] * s + &self.h_hat[n] * u
    }

    /// `<zeta, zeta'>'_n`; `E_n` and `H_n` are orthogonal by construction.
    pub fn inner(&self, n: usize, zeta: &Vector, zeta_p: &Vector) -> Result<f64> {
        let (s1, u1) = self.coords(n, zeta)?;
        let (s2, u2) = self.coords(n, zeta_p)?;
        Ok(s1.dot(&s2) + u1.dot(&u2))
    }

    /// `||zeta||'_n = max(||xi||'_n, ||eta||'_n)`.
    pub fn norm(&self, n: usize, zeta: &Vector) -> Result<f64> {
        let (s, u) = self.coords(n, zeta)?;
        Ok(s.norm().max(u.norm()))
    }

    /// Stable and unstable parts of the norm separately.
    pub fn norm_parts(&self, n: usize, zeta: &Vector) -> Result<(f64, f64)> {
        let (s, u) = self.coords(n, zeta)?;
        Ok((s.norm(), u.norm()))
    }

    /// Operator norm of a linear map `T_{n -> m}` between Lyapunov norms.
    pub fn operator_norm(&self, n: usize, m: usize, t: &Matrix) -> Result<f64> {
        self.check_index(m)?;
        self.check_index(n)?;
        let c = &self.to_coords[m] * t * self.frame_hat(n);
        Ok(max_norm_operator(&c, self.k()))
    }
}

/// Operator norm of `c` for the norm `max(|s|, |u|)` with `s` the first
/// `k` coordinates. Computed exactly when one block is empty or
/// one-dimensional, and as the larger block-row norm otherwise (a tight
/// upper bound for block-diagonal maps).
fn max_norm_operator(c: &Matrix, k: usize) -> f64 {
    let d = c.nrows();
    let u = d - k;
    if u == 0 || k == 0 {
        return crate::linalg::spectral_norm(c);
    }
    let rows_s = c.rows(0, k).into_owned();
    let rows_u = c.rows(k, u).into_owned();
    // sup over max(|s|,|u|) <= 1 of |A s + B u| <= |A| + |B|; exact on the
    // diagonal blocks, which is the case that matters here
    let block = |m: &Matrix| {
        crate::linalg::spectral_norm(&m.columns(0, k).into_owned()) + crate::linalg::spectral_norm(&m.columns(k, u).into_owned())
    };
    block(&rows_s).max(block(&rows_u))
}

/// Worst margin of `1/2 |zeta| <= ||zeta||'_n <= A e^{2 eps n} |zeta|` over
/// the samples, relative to `|zeta|`. Non-positive means no violation.
pub fn norm_equivalence_check(metric: &LyapunovMetric, n: usize, samples: &[Vector]) -> Result<f64> {
    let upper = metric.a_const() * (2.0 * metric.params.eps * n as f64).exp();
    let mut worst = f64::NEG_INFINITY;
    for z in samples {
        let e = z.norm();
        if e == 0.0 {
            continue;
        }
        let l = metric.norm(n, z)?;
        worst = worst.max((0.5 * e - l) / e).max((l - upper * e) / e);
    }
    Ok(worst)
}

/// One-step contraction of the metric on sampled vectors: returns the
/// largest `||S xi||'_{n+1} / (e^{a+2eps} ||xi||'_n)` and the smallest
/// `||U eta||'_{n+1} / (e^{b-2eps} ||eta||'_n)`.
pub fn contraction_ratios(metric: &LyapunovMetric, n: usize, coeffs: &[Vector]) -> Result<(f64, f64)> {
    if n + 1 > metric.horizon {
        return Err(Error::Domain("contraction needs n + 1 <= horizon".into()));
    }
    let p = metric.params;
    let split = metric.split();
    let j = split.jacobian(n);
    let (k, u) = (metric.k(), metric.dim() - metric.k());
    let mut worst_s: f64 = 0.0;
    let mut worst_u = f64::INFINITY;
    for c in coeffs {
        if k > 0 {
            let xi = split.e_basis(n) * c.rows(0, k);
            let before = metric.norm(n, &xi)?;
            let img = split.project_e(n + 1, &Matrix::from_column_slice(xi.len(), 1, (j * &xi).as_slice()))?;
            let after = metric.norm(n + 1, &img.column(0).into_owned())?;
            if before > 0.0 {
                worst_s = worst_s.max(after / ((p.a + 2.0 * p.eps).exp() * before));
            }
        }
        if u > 0 && c.len() >= k + u {
            let eta = split.h_basis(n) * c.rows(k, u);
            let before = metric.norm(n, &eta)?;
            let after = metric.norm(n + 1, &(j * &eta))?;
            if before > 0.0 {
                worst_u = worst_u.min(after / ((p.b - 2.0 * p.eps).exp() * before));
            }
        }
    }
    Ok((worst_s, worst_u))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormComparison {
    /// `||f^n z1 - f^n z2||'_{z, n}`.
    pub lhs: f64,
    /// `||f^n z1 - f^n z2||'_{z', n}`.
    pub other: f64,
    /// `2 A e^{2 eps n} * other`.
    pub bound: f64,
    pub ratio: f64,
    pub holds: bool,
}

/// Compare the Lyapunov norms at two base points on the same displacement
/// `f^n z1 - f^n z2` (the exponential maps of `R^d` are translations).
pub fn compare_norms_at_points(
    word: &OmegaWord,
    metric_z: &LyapunovMetric,
    metric_zp: &LyapunovMetric,
    n: usize,
    pair: (&Vector, &Vector),
) -> Result<NormComparison> {
    let w = word.extended(n);
    let p1 = iterate(&w, pair.0, n)?;
    let p2 = iterate(&w, pair.1, n)?;
    let v = &p1[n] - &p2[n];
    let lhs = metric_z.norm(n, &v)?;
    let other = metric_zp.norm(n, &v)?;
    let factor = 2.0 * metric_z.a_const() * (2.0 * metric_z.params.eps * n as f64).exp();
    let bound = factor * other;
    let ratio = if other > 0.0 { lhs / other } else if lhs == 0.0 { 1.0 } else { f64::INFINITY };
    Ok(NormComparison { lhs, other, bound, ratio, holds: lhs <= bound * (1.0 + 1e-12) })
}

/// Solve for the decomposition coefficients of `zeta` in `[E_n H_n]`.
pub fn split_coefficients(split: &OseledetsSplit, n: usize, zeta: &Vector) -> Result<Vector> {
    solve(&split.frame(n), zeta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oseledets::{stable_splitting, stable_splitting_unchecked};
    use crate::scenarios::ScenarioSpec;
    use approx::assert_relative_eq;

    fn s1_metric(horizon: usize) -> LyapunovMetric {
        let s = ScenarioSpec::s1();
        let p = PesinParams { a: -0.6, b: 0.6, k: 1, eps: 0.003, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
        let split = stable_splitting(&s.word(horizon).unwrap(), &Vector::zeros(2), &p, horizon).unwrap();
        LyapunovMetric::build(Arc::new(split), p, horizon).unwrap()
    }

    #[test]
    fn s1_inner_products() {
        let m = s1_metric(20);
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let e2 = Vector::from_vec(vec![0.0, 1.0]);
        assert_relative_eq!(m.inner(0, &e1, &e1).unwrap(), 1.0, epsilon = 1e-14);
        let w: f64 = (-2.0 * (-0.6 + 0.006f64)).exp() / 4.0;
        let closed = 1.0 / (1.0 - w);
        assert_relative_eq!(m.inner(0, &e2, &e2).unwrap(), closed, max_relative = 1e-10);
        assert!((closed - 5.5590).abs() < 1e-3);
        assert!((m.norm(0, &e2).unwrap() - 2.3578).abs() < 1e-4);
        assert_eq!(m.inner(0, &e1, &e2).unwrap(), 0.0);
    }

    #[test]
    fn s1_unstable_gram_grows() {
        // ||e1||'^2_n = sum_{l<=n} (e^{2(b-2eps)}/4)^l
        let m = s1_metric(10);
        let e1 = Vector::from_vec(vec![1.0, 0.0]);
        let w: f64 = (2.0 * (0.6 - 0.006f64)).exp() / 4.0;
        let closed: f64 = (0..=10).map(|l| w.powi(l)).sum();
        assert_relative_eq!(m.inner(10, &e1, &e1).unwrap(), closed, max_relative = 1e-12);
    }

    #[test]
    fn truncation_refinement_is_invisible() {
        let s = ScenarioSpec::s1();
        let p = PesinParams { a: -0.6, b: 0.6, k: 1, eps: 0.003, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
        let split = Arc::new(stable_splitting(&s.word(20).unwrap(), &Vector::zeros(2), &p, 20).unwrap());
        let base = LyapunovMetric::build(split.clone(), p, 20).unwrap();
        let opts = MetricOptions { extra_terms: 20, ..Default::default() };
        let more = LyapunovMetric::build_with(split, p, 20, opts).unwrap();
        let z = Vector::from_vec(vec![0.3, -1.1]);
        for n in 0..=20 {
            assert!((base.norm(n, &z).unwrap() - more.norm(n, &z).unwrap()).abs() < 1e-9);
            assert!(!base.truncation(n).diverged);
        }
    }

    #[test]
    fn norm_equivalence_on_s1() {
        let m = s1_metric(30);
        let samples: Vec<Vector> = crate::linalg::quasi_random_directions(2, 64);
        for n in [0, 10, 30] {
            assert!(norm_equivalence_check(&m, n, &samples).unwrap() <= 0.0);
        }
    }

    #[test]
    fn one_step_contraction_on_s1() {
        let m = s1_metric(30);
        let coeffs = crate::linalg::quasi_random_directions(2, 16);
        for n in 0..30 {
            let (s, u) = contraction_ratios(&m, n, &coeffs).unwrap();
            assert!(s <= 1.0 + 1e-8, "stable ratio {s}");
            assert!(u >= 1.0 - 1e-8, "unstable ratio {u}");
        }
    }

    #[test]
    fn s1_l_is_one_and_member() {
        let s = ScenarioSpec::s1();
        let p = PesinParams { a: -0.6, b: 0.6, k: 1, eps: 0.003, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
        let w = s.word(100).unwrap();
        let x = Vector::zeros(2);
        let split = stable_splitting(&w, &x, &p, 100).unwrap();
        let l = estimate_l(&split, &p, 100).unwrap();
        assert_eq!(l.value, 1.0);
        assert!(!l.infinite);
        let cert = pesin_membership(&w, &x, &p, 100).unwrap();
        assert!(cert.member);
        assert_eq!(cert.r_value, 0.0);
        assert_relative_eq!(cert.c_delta, 2.0, epsilon = 1e-14);
        let tight = PesinParams { l_prime: 0.5, ..p };
        assert!(tight.validate(2).is_err());
        let cert = certificate_from_split(&w, &x, &split, &tight, 100).unwrap();
        assert!(!cert.member);
    }

    #[test]
    fn identity_l_is_infinite() {
        let s = ScenarioSpec::identity(2);
        let p = PesinParams { a: -0.6, b: 0.6, k: 1, eps: 0.003, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
        let w = s.word(100).unwrap();
        let x = Vector::zeros(2);
        let split = stable_splitting_unchecked(&w, &x, -0.6, 0.6, 1, 100).unwrap();
        assert!(estimate_l(&split, &p, 100).unwrap().infinite);
        let cert = pesin_membership(&w, &x, &p, 100).unwrap();
        assert!(!cert.member);
        assert_relative_eq!(estimate_cdelta(&w, &x, 0.003, 50).unwrap(), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn s3_r_matches_hessian_sup() {
        let s = ScenarioSpec::s3();
        let w = s.word(60).unwrap();
        let x = Vector::from_vec(vec![0.3, -0.2]);
        let r = estimate_r(&w, &x, 8).unwrap();
        assert!(r.value <= 1.0 + 1e-6);
        assert!(r.value >= 0.9, "r = {}", r.value);
        let g = r_growth_check(&w, &Vector::zeros(2), 0.003, 50, 8, 0.05).unwrap();
        assert!(g.pass, "excess {}", g.max_excess);
    }

    #[test]
    fn comparing_a_point_with_itself() {
        let m = s1_metric(10);
        let w = ScenarioSpec::s1().word(10).unwrap();
        let z1 = Vector::from_vec(vec![0.1, 0.2]);
        let z2 = Vector::from_vec(vec![-0.3, 0.4]);
        let c = compare_norms_at_points(&w, &m, &m, 5, (&z1, &z2)).unwrap();
        assert_eq!(c.ratio, 1.0);
        assert!(c.holds);
    }
}
