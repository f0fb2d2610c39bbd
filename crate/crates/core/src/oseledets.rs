//! Lyapunov spectra and the splitting `E_0 + H_0` at a spectral gap.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{orth, orthonormalize, solve, Matrix, Vector};
use crate::rds::{OmegaWord, OVERFLOW_GUARD};

pub use crate::linalg::subspace_angle;

/// `log R_ii` below this is reported as an underflow.
const UNDERFLOW_LOG: f64 = -690.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    /// Steps accumulated so far.
    pub n: usize,
    /// Running exponents `(1/n) sum log R_ii`, ascending.
    pub exponents: Vec<f64>,
    /// Growth rates over the steps since the previous row, same order.
    pub slopes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    /// `rho^(1) <= ... <= rho^(d)`.
    pub exponents: Vec<f64>,
    /// Distinct exponents `lambda^(i)` with multiplicities.
    pub grouped: Vec<(f64, usize)>,
    pub horizon: usize,
    /// Steps used to relax the initial frame before accumulation.
    pub transient: usize,
    pub qr_stride: usize,
    /// `|rho(n) - rho(n/2)|` per exponent.
    pub slope_stability: Vec<f64>,
    /// `(1/n) log |det|` of the cocycle over the accumulation window.
    pub mean_log_det: f64,
    /// `|sum rho - mean_log_det|`.
    pub volume_residual: f64,
    /// Some diagonal entry came close to underflow; the smallest exponent
    /// may stand in for `-inf`.
    pub underflow: bool,
    pub history: Vec<SpectrumRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectrumOptions {
    pub qr_stride: usize,
    /// Frame-relaxation steps; `None` picks `min(n, 200)`.
    pub transient: Option<usize>,
    /// Maximum number of history rows.
    pub history_rows: usize,
}

impl Default for SpectrumOptions {
    fn default() -> Self {
        Self { qr_stride: 1, transient: None, history_rows: 200 }
    }
}

/// Merge tolerance for grouping exponents: `max(1e-3, 5 / sqrt n)`.
pub fn group_tol(n: usize) -> f64 {
    (5.0 / (n.max(1) as f64).sqrt()).max(1e-3)
}

fn group(exponents: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    let mut start = 0;
    for i in 1..=exponents.len() {
        if i == exponents.len() || exponents[i] - exponents[i - 1] >= tol {
            let block = &exponents[start..i];
            out.push((block.iter().sum::<f64>() / block.len() as f64, block.len()));
            start = i;
        }
    }
    out
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Lyapunov spectrum at `x` with default options and the given QR stride.
pub fn lyapunov_spectrum(word: &OmegaWord, x: &Vector, n: usize, qr_stride: usize) -> Result<SpectrumEstimate> {
    lyapunov_spectrum_with(word, x, n, SpectrumOptions { qr_stride, ..Default::default() })
}

/// Periodically re-orthonormalized cocycle products.
///
/// The frame is first relaxed for `transient` steps, then `log R_ii` is
/// accumulated over the next `n` steps.
pub fn lyapunov_spectrum_with(word: &OmegaWord, x: &Vector, n: usize, opts: SpectrumOptions) -> Result<SpectrumEstimate> {
    let stride = opts.qr_stride;
    if stride == 0 || n < stride {
        return Err(Error::Domain(format!("need n >= qr_stride >= 1, got n = {n}, stride = {stride}")));
    }
    let d = word.dim();
    if x.len() != d {
        return Err(Error::DimensionMismatch { expected: d, got: x.len() });
    }
    let transient = opts.transient.unwrap_or(n.min(200));
    let total = transient + n;
    let word = word.extended(total);
    let record_every = (n / opts.history_rows.max(1)).max(1);

    let mut p = x.clone();
    let mut q = Matrix::identity(d, d);
    let mut acc = vec![0.0; d];
    let mut acc_half: Option<Vec<f64>> = None;
    let mut log_det = 0.0;
    let mut underflow = false;
    let mut history = Vec::new();
    let mut last_row_acc = vec![0.0; d];
    let mut last_row_n = 0usize;
    let mut next_record = record_every;

    for j in 0..total {
        let f = word.map(j)?;
        let jac = f.jacobian(&p);
        if j >= transient {
            let det = jac.determinant().abs();
            if det == 0.0 {
                return Err(Error::SingularCocycle { index: j });
            }
            log_det += det.ln();
        }
        q = jac * q;
        p = f.forward(&p);
        if p.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD) {
            return Err(Error::OrbitDivergence { index: j + 1, last_finite: j });
        }
        let m = (j + 1).saturating_sub(transient);
        let at_qr = (j + 1) % stride == 0 || j + 1 == transient || j + 1 == total;
        if !at_qr {
            continue;
        }
        let (qn, r) = orthonormalize(&q);
        for (i, &ri) in r.iter().enumerate() {
            if ri == 0.0 || !ri.is_finite() {
                return Err(Error::SingularCocycle { index: j });
            }
            let lr = ri.ln();
            if lr < UNDERFLOW_LOG {
                underflow = true;
            }
            if j >= transient {
                acc[i] += lr;
            }
        }
        q = qn;
        if j < transient {
            continue;
        }
        if acc_half.is_none() && 2 * m >= n {
            acc_half = Some(acc.iter().map(|a| a / m as f64).collect());
        }
        if m >= next_record || j + 1 == total {
            let run: Vec<f64> = acc.iter().map(|a| a / m as f64).collect();
            let dm = (m - last_row_n).max(1) as f64;
            let slopes: Vec<f64> = acc.iter().zip(&last_row_acc).map(|(a, b)| (a - b) / dm).collect();
            // order rows by the running exponents so columns stay aligned
            let mut idx: Vec<usize> = (0..d).collect();
            idx.sort_by(|&a, &b| run[a].partial_cmp(&run[b]).unwrap_or(std::cmp::Ordering::Equal));
            history.push(SpectrumRow {
                n: m,
                exponents: idx.iter().map(|&i| run[i]).collect(),
                slopes: idx.iter().map(|&i| slopes[i]).collect(),
            });
            last_row_acc = acc.clone();
            last_row_n = m;
            while next_record <= m {
                next_record += record_every;
            }
        }
    }

    let raw: Vec<f64> = acc.iter().map(|a| a / n as f64).collect();
    let exponents = sorted(&raw);
    let half = sorted(&acc_half.unwrap_or_else(|| raw.clone()));
    let mean_log_det = log_det / n as f64;
    let sum: f64 = exponents.iter().sum();
    Ok(SpectrumEstimate {
        grouped: group(&exponents, group_tol(n)),
        slope_stability: exponents.iter().zip(&half).map(|(a, b)| (a - b).abs()).collect(),
        volume_residual: (sum - mean_log_det).abs(),
        mean_log_det,
        exponents,
        horizon: n,
        transient,
        qr_stride: stride,
        underflow,
        history,
    })
}

/// `min{1, (b - a) / (200 d)}`.
pub fn epsilon_ceiling(a: f64, b: f64, d: usize) -> Result<f64> {
    if !(a < b) {
        return Err(Error::Domain(format!("epsilon ceiling needs a < b, got a = {a}, b = {b}")));
    }
    if d == 0 {
        return Err(Error::Domain("dimension must be positive".into()));
    }
    Ok(((b - a) / (200.0 * d as f64)).min(1.0))
}

/// Gap `(a, b)`, stable dimension `k`, `epsilon` and the Pesin-set bounds
/// `l'`, `r'`, `C'`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PesinParams {
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub eps: f64,
    pub l_prime: f64,
    pub r_prime: f64,
    pub c_prime: f64,
}

impl PesinParams {
    /// Parameters with `eps` set to its ceiling for dimension `d`.
    pub fn with_max_eps(a: f64, b: f64, k: usize, d: usize, l_prime: f64, r_prime: f64, c_prime: f64) -> Result<Self> {
        let eps = epsilon_ceiling(a, b, d)?;
        let p = Self { a, b, k, eps, l_prime, r_prime, c_prime };
        p.validate(d)?;
        Ok(p)
    }

    /// `a < b`, `0 < eps <= min{1, (b - a)/(200 d)}`, `k >= 1`, positive bounds.
    pub fn validate(&self, d: usize) -> Result<()> {
        let ceiling = epsilon_ceiling(self.a, self.b, d)?;
        if !(self.eps > 0.0 && self.eps <= ceiling * (1.0 + 1e-12)) {
            return Err(Error::Precondition {
                condition: "0 < eps <= min{1, (b - a)/(200 d)}",
                detail: format!("eps = {}, ceiling = {ceiling}", self.eps),
            });
        }
        if self.k == 0 || self.k > d {
            return Err(Error::Precondition { condition: "1 <= k <= d", detail: format!("k = {}, d = {d}", self.k) });
        }
        if !(self.l_prime >= 1.0 && self.r_prime > 0.0 && self.c_prime > 0.0) {
            return Err(Error::Precondition {
                condition: "l' >= 1, r' > 0, C' > 0",
                detail: format!("l' = {}, r' = {}, C' = {}", self.l_prime, self.r_prime, self.c_prime),
            });
        }
        Ok(())
    }

    /// `A = 4 l'^2 (1 - e^{-2 eps})^{-1/2}`.
    pub fn a_const(&self) -> f64 {
        4.0 * self.l_prime * self.l_prime / (1.0 - (-2.0 * self.eps).exp()).sqrt()
    }

    /// Pesin sets need `b <= 0`; larger `b` is diagnostic only.
    pub fn b_is_positive(&self) -> bool {
        self.b > 0.0
    }
}

/// Estimated splitting along an orbit.
///
/// `E_n` comes from a backward sweep of the transposed cocycle, so it is
/// accurate for every stored index; `H_0 = E_0^perp` and `H_n` is its
/// forward image, as in the definition of the Lyapunov metric.
#[derive(Debug, Clone)]
pub struct OseledetsSplit {
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub d: usize,
    pub horizon: usize,
    pub spectrum: SpectrumEstimate,
    /// Ratio of boundary singular values below `e^{(b-a) N / 2}`.
    pub low_confidence: bool,
    /// `b > 0`: outside the admissible range, diagnostic use only.
    pub positive_b: bool,
    /// `log` ratio of the boundary singular values over the sweep.
    pub boundary_log_gap: f64,
    orbit: Vec<Vector>,
    jac: Vec<Matrix>,
    e: Vec<Matrix>,
    h: Vec<Matrix>,
}

/// Fixed generic orthonormal frame used to seed the backward sweep.
fn generic_frame(d: usize) -> Matrix {
    let m = Matrix::from_fn(d, d, |i, j| {
        (1.0 + 0.7 * i as f64 + 1.3 * (j * j) as f64).cos() + if i == j { 1.5 } else { 0.0 }
    });
    orth(&m)
}

/// Steps the series in the Lyapunov metric may need beyond `horizon`.
pub fn series_reserve(horizon: usize) -> usize {
    (10 * horizon).max(1000)
}

/// Splitting at the gap `(a, b)`; `k` is the number of exponents below `a`.
pub fn stable_splitting(word: &OmegaWord, x: &Vector, params: &PesinParams, horizon: usize) -> Result<OseledetsSplit> {
    let spectrum = lyapunov_spectrum(word, x, horizon.max(1), 1)?;
    if let Some(&bad) = spectrum.exponents.iter().find(|&&r| r >= params.a && r <= params.b) {
        return Err(Error::GapViolation { exponent: bad, a: params.a, b: params.b });
    }
    let k = spectrum.exponents.iter().filter(|&&r| r < params.a).count();
    if k == 0 {
        return Err(Error::Precondition { condition: "dim E_0 >= 1", detail: "no exponent below a".into() });
    }
    build_split(word, x, params.a, params.b, k, horizon, spectrum)
}

/// Splitting with a prescribed `k` and no gap check, for diagnostics on
/// systems without a gap.
pub fn stable_splitting_unchecked(word: &OmegaWord, x: &Vector, a: f64, b: f64, k: usize, horizon: usize) -> Result<OseledetsSplit> {
    let d = word.dim();
    if k == 0 || k > d {
        return Err(Error::Domain(format!("k = {k} outside 1..={d}")));
    }
    let spectrum = lyapunov_spectrum(word, x, horizon.max(1), 1)?;
    build_split(word, x, a, b, k, horizon, spectrum)
}

fn build_split(word: &OmegaWord, x: &Vector, a: f64, b: f64, k: usize, horizon: usize, spectrum: SpectrumEstimate) -> Result<OseledetsSplit> {
    let d = word.dim();
    let u = d - k;
    // exponent gap at the boundary decides how long the sweep must relax
    let gap = if u > 0 { spectrum.exponents[k] - spectrum.exponents[k - 1] } else { 1.0 };
    let buffer = if gap > 1e-3 { ((40.0 / gap).ceil() as usize).clamp(50, 5000) } else { 5000 };
    let stored = horizon + series_reserve(horizon);
    let total = stored + buffer;
    let word = word.extended(total);
    let orbit = crate::rds::iterate(&word, x, total)?;
    let mut jac = Vec::with_capacity(total);
    for j in 0..total {
        let m = word.map(j)?.jacobian(&orbit[j]);
        if m.determinant() == 0.0 {
            return Err(Error::SingularCocycle { index: j });
        }
        jac.push(m);
    }

    // backward sweep: Q_j = orth(J_j^T Q_{j+1}); the leading d - k columns
    // span the most expanded co-directions, the rest is E_j
    let mut q = generic_frame(d);
    let mut e = vec![Matrix::zeros(d, k); stored + 1];
    let mut logs = vec![0.0; d];
    for j in (0..total).rev() {
        let (qn, r) = orthonormalize(&(jac[j].transpose() * &q));
        if r.iter().any(|&v| v == 0.0) {
            return Err(Error::SingularCocycle { index: j });
        }
        for (l, v) in logs.iter_mut().zip(&r) {
            *l += v.ln();
        }
        q = qn;
        if j <= stored {
            e[j] = q.columns(u, k).into_owned();
        }
    }
    let h0 = q.columns(0, u).into_owned();
    let boundary_log_gap = if u > 0 { logs[u - 1] - logs[u] } else { f64::INFINITY };
    let low_confidence = boundary_log_gap < (b - a) * total as f64 / 2.0;

    let mut h = Vec::with_capacity(stored + 1);
    h.push(h0);
    for j in 0..stored {
        let next = if u > 0 { orth(&(&jac[j] * &h[j])) } else { Matrix::zeros(d, 0) };
        h.push(next);
    }
    jac.truncate(stored);
    let mut orbit = orbit;
    orbit.truncate(stored + 1);
    Ok(OseledetsSplit {
        a,
        b,
        k,
        d,
        horizon,
        spectrum,
        low_confidence,
        positive_b: b > 0.0,
        boundary_log_gap,
        orbit,
        jac,
        e,
        h,
    })
}

impl OseledetsSplit {
    /// Largest index with stored subspaces.
    pub fn stored_len(&self) -> usize {
        self.e.len() - 1
    }

    pub fn e_basis(&self, n: usize) -> &Matrix {
        &self.e[n]
    }

    pub fn h_basis(&self, n: usize) -> &Matrix {
        &self.h[n]
    }

    pub fn e0(&self) -> &Matrix {
        &self.e[0]
    }

    pub fn h0(&self) -> &Matrix {
        &self.h[0]
    }

    pub fn point(&self, n: usize) -> &Vector {
        &self.orbit[n]
    }

    /// `J_n = D f_n(omega)` at `f^n x`.
    pub fn jacobian(&self, n: usize) -> &Matrix {
        &self.jac[n]
    }

    /// `[E_n H_n]`.
    pub fn frame(&self, n: usize) -> Matrix {
        let mut m = Matrix::zeros(self.d, self.d);
        m.columns_mut(0, self.k).copy_from(&self.e[n]);
        m.columns_mut(self.k, self.d - self.k).copy_from(&self.h[n]);
        m
    }

    /// Coefficients of `v` in `E_n` and `H_n`.
    pub fn decompose(&self, n: usize, v: &Vector) -> Result<(Vector, Vector)> {
        let c = solve(&self.frame(n), v)?;
        Ok((c.rows(0, self.k).into_owned(), c.rows(self.k, self.d - self.k).into_owned()))
    }

    /// Projection onto `E_n` along `H_n`, applied column-wise.
    pub fn project_e(&self, n: usize, m: &Matrix) -> Result<Matrix> {
        let f = self.frame(n);
        let lu = f.clone().lu();
        let c = lu.solve(m).ok_or_else(|| Error::Domain("degenerate splitting".into()))?;
        Ok(&self.e[n] * c.rows(0, self.k))
    }

    /// Projection onto `H_n` along `E_n`.
    pub fn project_h(&self, n: usize, m: &Matrix) -> Result<Matrix> {
        let f = self.frame(n);
        let c = f.lu().solve(m).ok_or_else(|| Error::Domain("degenerate splitting".into()))?;
        Ok(&self.h[n] * c.rows(self.k, self.d - self.k))
    }

    /// Angle `gamma(E_n, H_n)`.
    pub fn angle(&self, n: usize) -> Result<f64> {
        subspace_angle(&self.e[n], &self.h[n])
    }

    /// `|orth(J_n E_n) - E_{n+1}|` as an aperture: zero for an exactly
    /// invariant family.
    pub fn invariance_residual(&self, n: usize) -> Result<f64> {
        crate::linalg::aperture(&(&self.jac[n] * &self.e[n]), &self.e[n + 1])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenarios::ScenarioSpec;
    use approx::assert_relative_eq;

    #[test]
    fn s1_exponents_exact() {
        let s = ScenarioSpec::s1();
        let est = lyapunov_spectrum(&s.word(100).unwrap(), &Vector::zeros(2), 100, 1).unwrap();
        assert_relative_eq!(est.exponents[0], -(2f64.ln()), epsilon = 1e-12);
        assert_relative_eq!(est.exponents[1], 2f64.ln(), epsilon = 1e-12);
        assert_eq!(est.grouped.len(), 2);
        assert!(est.volume_residual < 1e-12);
    }

    #[test]
    fn epsilon_ceiling_values() {
        assert_relative_eq!(epsilon_ceiling(-0.6, 0.6, 2).unwrap(), 0.003, epsilon = 1e-15);
        assert_relative_eq!(epsilon_ceiling(-1.0, 0.0, 1).unwrap(), 0.005, epsilon = 1e-15);
        assert_eq!(epsilon_ceiling(-500.0, 0.0, 2).unwrap(), 1.0);
        assert!(matches!(epsilon_ceiling(1.0, 1.0, 2), Err(Error::Domain(_))));
    }

    #[test]
    fn s1_split_is_axis_aligned() {
        let s = ScenarioSpec::s1();
        let p = PesinParams::with_max_eps(-0.6, 0.6, 1, 2, 1.0, 1.0, 2.0).unwrap();
        let split = stable_splitting(&s.word(50).unwrap(), &Vector::zeros(2), &p, 50).unwrap();
        assert_eq!(split.k, 1);
        assert!(split.positive_b);
        assert!(split.e0()[0].abs() < 1e-14 && (split.e0()[1].abs() - 1.0).abs() < 1e-14);
        assert!((split.h0()[0].abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn identity_has_no_gap() {
        let s = ScenarioSpec::identity(2);
        let p = PesinParams { a: -0.6, b: 0.6, k: 1, eps: 0.003, l_prime: 1.0, r_prime: 1.0, c_prime: 1.0 };
        let err = stable_splitting(&s.word(20).unwrap(), &Vector::zeros(2), &p, 20).unwrap_err();
        assert!(matches!(err, Error::GapViolation { .. }));
    }

    #[test]
    fn a_const_closed_form() {
        let p = PesinParams { a: -0.6, b: 0.6, k: 1, eps: 0.003, l_prime: 1.0, r_prime: 1.0, c_prime: 2.0 };
        assert_relative_eq!(p.a_const(), 4.0 / (1.0 - (-0.006f64).exp()).sqrt(), epsilon = 1e-12);
        assert!((p.a_const() - 51.717).abs() < 1e-3);
    }

    #[test]
    fn grouping_merges_close_values() {
        assert_eq!(group(&[-1.0, -0.9995, 0.5], 1e-3), vec![(-0.99975, 2), (0.5, 1)]);
    }
}
