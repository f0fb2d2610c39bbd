//! The constants `l`, `r`, `C_delta` and Pesin-set membership.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{min_singular_value, orthonormalize, quasi_random_ball, quasi_random_directions, spectral_norm, Matrix, Vector};
use crate::oseledets::{stable_splitting, OseledetsSplit, PesinParams};
use crate::rds::{iterate, OmegaWord};

/// `l` above this is reported as infinite.
pub const L_CEILING: f64 = 1e6;
/// Safety multiplier applied to the sampled `r` before comparing with `r'`.
pub const R_SAFETY: f64 = 1.1;
/// Relative slack on membership comparisons (rounding only).
const MEMBER_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LEstimate {
    /// Uniform constant `L` with `l(n) = L e^{eps n}` meeting (i) to (iv).
    pub value: f64,
    pub infinite: bool,
    /// Per-index minimal constants for (i) to (iii).
    pub per_n: Vec<f64>,
    /// Indices `(n, l)` where the per-index constants break (iv).
    pub consistency_violations: usize,
    /// Which inequality drives the value: `"i"`, `"ii"`, `"iii"` or `"none"`.
    pub binding: String,
    pub horizon: usize,
}

/// Rescale a frame so its entries stay in range, tracking the log scale.
fn rescale(m: &mut Matrix, log_scale: &mut f64) {
    let s = m.norm();
    if s > 0.0 && !(1e-100..=1e100).contains(&s) {
        *m /= s;
        *log_scale += s.ln();
    }
}

/// Thin QR with the full triangular factor.
fn qr_full(m: &Matrix) -> (Matrix, Matrix) {
    let (q, _) = orthonormalize(m);
    let r = q.transpose() * m;
    (q, r)
}

/// Smallest uniform `l` over the horizon.
///
/// For each `n <= N` and `l = 1..=N` the three quantities
/// `|S^l_n| e^{-(a+eps) l}`, `e^{(b-eps) l} / sigma_min(U^l_n)` and
/// `e^{-eps l} / gamma(E_{n+l}, H_{n+l})` are evaluated (in logs, so long
/// products neither overflow nor underflow). The per-index constant
/// `lmin(n)` is their maximum; a uniform `L` must dominate
/// `lmin(n) e^{-eps n}` for every `n`, which also gives (iv).
pub fn estimate_l(split: &OseledetsSplit, params: &PesinParams, horizon: usize) -> Result<LEstimate> {
    if 2 * horizon > split.stored_len() {
        return Err(Error::Domain(format!(
            "splitting stores {} steps, l needs {}",
            split.stored_len(),
            2 * horizon
        )));
    }
    let (k, d) = (split.k, split.d);
    let u = d - k;
    let (a, b, eps) = (params.a, params.b, params.eps);
    let log_angle: Vec<f64> = (0..=2 * horizon)
        .map(|j| {
            if u == 0 {
                Ok(0.0)
            } else {
                split.angle(j).map(|g| if g > 0.0 { g.ln() } else { f64::NEG_INFINITY })
            }
        })
        .collect::<Result<_>>()?;

    let mut log_lmin = vec![0.0f64; horizon + 1];
    let mut binding = vec!["none"; horizon + 1];
    for n in 0..=horizon {
        let mut v = split.e_basis(n).clone();
        let mut v_log = 0.0;
        // U^l_n H_n = Q R with Q orthonormal; sigma_min(U^l_n) = sigma_min(R)
        let mut q = split.h_basis(n).clone();
        let mut r_acc = Matrix::identity(u, u);
        let mut r_log = 0.0;
        let mut worst = 0.0f64;
        let mut which = "none";
        if u > 0 && -log_angle[n] > 0.0 {
            worst = -log_angle[n];
            which = "iii";
        }
        for l in 1..=horizon {
            let j = split.jacobian(n + l - 1);
            v = split.project_e(n + l, &(j * &v))?;
            rescale(&mut v, &mut v_log);
            let lf = l as f64;
            let t1 = spectral_norm(&v).ln() + v_log - (a + eps) * lf;
            if t1 > worst {
                worst = t1;
                which = "i";
            }
            if u > 0 {
                let (qn, r) = qr_full(&(j * &q));
                q = qn;
                r_acc = r * &r_acc;
                rescale(&mut r_acc, &mut r_log);
                let t2 = (b - eps) * lf - (min_singular_value(&r_acc).ln() + r_log);
                if t2 > worst {
                    worst = t2;
                    which = "ii";
                }
                let t3 = -eps * lf - log_angle[n + l];
                if t3 > worst {
                    worst = t3;
                    which = "iii";
                }
            }
        }
        if !worst.is_finite() && worst > 0.0 {
            worst = f64::INFINITY;
        }
        log_lmin[n] = worst;
        binding[n] = which;
    }

    // (iv) for the per-index constants themselves
    let mut consistency_violations = 0;
    for n in 0..=horizon {
        for l in 1..=(horizon - n) {
            if log_lmin[n + l] > log_lmin[n] + eps * l as f64 + 1e-12 {
                consistency_violations += 1;
            }
        }
    }

    let need: Vec<f64> = log_lmin.iter().enumerate().map(|(n, &g)| g - eps * n as f64).collect();
    let feasible = |log_l: f64| need.iter().all(|&g| g <= log_l);
    let per_n: Vec<f64> = log_lmin.iter().map(|g| g.exp()).collect();
    let bind_idx = need
        .iter()
        .enumerate()
        .max_by(|x, y| x.1.partial_cmp(y.1).unwrap_or(std::cmp::Ordering::Equal))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let bind = binding[bind_idx].to_string();

    // log-spaced grid, then bisection to 1e-3 relative
    let ceiling = L_CEILING.ln();
    if !feasible(ceiling) {
        return Ok(LEstimate {
            value: f64::INFINITY,
            infinite: true,
            per_n,
            consistency_violations,
            binding: bind,
            horizon,
        });
    }
    let mut hi = 0.0;
    let mut lo = f64::NAN;
    if !feasible(0.0) {
        let mut g = 0.0;
        while !feasible(g) {
            lo = g;
            g += std::f64::consts::LN_2;
        }
        hi = g.min(ceiling);
    }
    if lo.is_finite() {
        while hi - lo > 1e-3f64.ln_1p() {
            let mid = 0.5 * (lo + hi);
            if feasible(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }
    Ok(LEstimate { value: hi.exp(), infinite: false, per_n, consistency_violations, binding: bind, horizon })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct REstimate {
    pub value: f64,
    /// Sup of the quotients for `DF` alone.
    pub forward: f64,
    /// Sup of the quotients for `DF^{-1}` alone.
    pub inverse: f64,
    pub samples: usize,
    /// A quotient was non-finite and was dropped.
    pub violation: bool,
}

/// Lipschitz constants of `xi -> D_xi F` and of the inverse derivative on
/// the unit tangent ball, from central differences of the Jacobian along
/// `2 d^2` quasi-random directions at `sample_count^d` quasi-random points.
pub fn estimate_r(word: &OmegaWord, x: &Vector, sample_count: usize) -> Result<REstimate> {
    let d = word.dim();
    if sample_count < 2 {
        return Err(Error::Precondition { condition: "sample_count >= 2 per dimension", detail: format!("got {sample_count}") });
    }
    let f = word.map(0)?;
    let points = sample_count.saturating_pow(d as u32).min(4096);
    let mut pts = vec![Vector::zeros(d)];
    pts.extend(quasi_random_ball(d, points, 1.0));
    let dirs = quasi_random_directions(d, 2 * d * d);
    let mut fwd: f64 = 0.0;
    let mut inv: f64 = 0.0;
    let mut violation = false;
    let mut count = 0;
    for xi in &pts {
        let p = x + xi;
        let h = 1e-5 * p.norm().max(1.0);
        for dir in &dirs {
            let pp = &p + dir * h;
            let pm = &p - dir * h;
            let q1 = spectral_norm(&(f.jacobian(&pp) - f.jacobian(&pm))) / (2.0 * h);
            // DF^{-1} as a function of the tangent point: (D_p f)^{-1}
            let ip = crate::linalg::inverse(&f.jacobian(&pp));
            let im = crate::linalg::inverse(&f.jacobian(&pm));
            let q2 = match (ip, im) {
                (Ok(ip), Ok(im)) => spectral_norm(&(ip - im)) / (2.0 * h),
                _ => f64::NAN,
            };
            count += 1;
            if q1.is_finite() {
                fwd = fwd.max(q1);
            } else {
                violation = true;
            }
            if q2.is_finite() {
                inv = inv.max(q2);
            } else {
                violation = true;
            }
        }
    }
    // exact zero for constant derivatives instead of rounding noise
    let clean = |v: f64| if v < 1e-9 { 0.0 } else { v };
    let (fwd, inv) = (clean(fwd), clean(inv));
    Ok(REstimate { value: fwd.max(inv), forward: fwd, inverse: inv, samples: count, violation })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RGrowthReport {
    pub values: Vec<f64>,
    /// `max_n r(F^n) e^{-eps n} / r(0) - 1`.
    pub max_excess: f64,
    pub tol: f64,
    pub pass: bool,
}

/// `r(F^n(omega, x)) <= r(omega, x) e^{eps n}` along the orbit, `n <= steps`.
pub fn r_growth_check(word: &OmegaWord, x: &Vector, eps: f64, steps: usize, sample_count: usize, tol: f64) -> Result<RGrowthReport> {
    let w = word.extended(steps + 1);
    let orbit = iterate(&w, x, steps)?;
    let mut values = Vec::with_capacity(steps + 1);
    for (n, p) in orbit.iter().enumerate() {
        values.push(estimate_r(&w.shift_by(n), p, sample_count)?.value);
    }
    let r0 = values[0];
    let mut max_excess: f64 = f64::NEG_INFINITY;
    for (n, &r) in values.iter().enumerate() {
        let scaled = r * (-eps * n as f64).exp();
        let ex = if r0 > 0.0 { scaled / r0 - 1.0 } else if scaled == 0.0 { -1.0 } else { f64::INFINITY };
        max_excess = max_excess.max(ex);
    }
    Ok(RGrowthReport { values, max_excess, tol, pass: max_excess <= tol })
}

/// `C_delta = max_{n <= N} |D_0 F^{-1}_n| e^{-delta n}`.
pub fn estimate_cdelta(word: &OmegaWord, x: &Vector, delta: f64, horizon: usize) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::Precondition { condition: "0 < delta < 1", detail: format!("delta = {delta}") });
    }
    let w = word.extended(horizon + 1);
    let orbit = iterate(&w, x, horizon + 1)?;
    let mut best: f64 = 0.0;
    for n in 0..=horizon {
        let f = w.map(n)?;
        let j = f.jacobian(&orbit[n]);
        if j.determinant() == 0.0 {
            return Err(Error::SingularCocycle { index: n });
        }
        let ji = f.inverse_jacobian(&orbit[n + 1]);
        best = best.max(spectral_norm(&ji) * (-delta * n as f64).exp());
    }
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PesinCertificate {
    pub seed: u64,
    pub x: Vec<f64>,
    pub params: PesinParams,
    pub l_value: f64,
    pub l_infinite: bool,
    pub r_value: f64,
    pub c_delta: f64,
    pub member: bool,
    pub horizon: usize,
    /// Why membership failed before the constants could be computed.
    pub reason: Option<String>,
}

impl PesinCertificate {
    fn rejected(word: &OmegaWord, x: &Vector, params: &PesinParams, horizon: usize, reason: String) -> Self {
        Self {
            seed: word.seed(),
            x: x.iter().copied().collect(),
            params: *params,
            l_value: f64::INFINITY,
            l_infinite: true,
            r_value: f64::NAN,
            c_delta: f64::NAN,
            member: false,
            horizon,
            reason: Some(reason),
        }
    }
}

/// Certificate for `x` over the horizon. Gap violations and a stable
/// dimension different from `params.k` yield a non-member certificate.
pub fn pesin_membership(word: &OmegaWord, x: &Vector, params: &PesinParams, horizon: usize) -> Result<PesinCertificate> {
    params.validate(word.dim())?;
    let split = match stable_splitting(word, x, params, horizon) {
        Ok(s) => s,
        Err(e @ (Error::GapViolation { .. } | Error::Precondition { .. })) => {
            return Ok(PesinCertificate::rejected(word, x, params, horizon, e.to_string()));
        }
        Err(e) => return Err(e),
    };
    if split.k != params.k {
        let why = format!("dim E_0 = {} differs from k = {}", split.k, params.k);
        return Ok(PesinCertificate::rejected(word, x, params, horizon, why));
    }
    certificate_from_split(word, x, &split, params, horizon)
}

/// Certificate when the splitting is already available.
pub fn certificate_from_split(
    word: &OmegaWord,
    x: &Vector,
    split: &OseledetsSplit,
    params: &PesinParams,
    horizon: usize,
) -> Result<PesinCertificate> {
    let l = estimate_l(split, params, horizon)?;
    let r = estimate_r(word, x, 8)?;
    let c = estimate_cdelta(word, x, params.eps, horizon)?;
    let tol = 1.0 + MEMBER_TOL;
    let member = !l.infinite
        && l.value <= params.l_prime * tol
        && R_SAFETY * r.value <= params.r_prime * tol
        && c <= params.c_prime * tol;
    Ok(PesinCertificate {
        seed: word.seed(),
        x: x.iter().copied().collect(),
        params: *params,
        l_value: l.value,
        l_infinite: l.infinite,
        r_value: r.value,
        c_delta: c,
        member,
        horizon,
        reason: None,
    })
}
