//! The graph transform: pushing a transversal graph over `H_n` forward and
//! re-solving it as a graph over `H_{n+1}`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::chart::{GraphChart, LyapunovCoords};
use crate::error::{Error, Result};
use crate::linalg::{solve, Matrix, Vector};
use crate::oseledets::PesinParams;

/// Ledger bounds may be exceeded by this much before a row counts as a
/// violation.
pub const SLACK_TOL: f64 = 1e-6;
/// Default radius of the compact-set neighbourhood entering `q^(1)_C`.
pub const DEFAULT_DELTA_DELTA: f64 = 0.25;
const MAX_NEWTON: usize = 50;

/// `eps_0 = e^{a+4eps} - e^{a+2eps}`, `c_0 = 4 A r' e^{2eps}`, `r_0 = eps_0 / c_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldConstants {
    pub a_const: f64,
    pub eps0: f64,
    pub c0: f64,
    pub r0: f64,
}

impl ManifoldConstants {
    pub fn new(p: &PesinParams) -> Self {
        let a_const = p.a_const();
        let eps0 = (p.a + 4.0 * p.eps).exp() - (p.a + 2.0 * p.eps).exp();
        let c0 = 4.0 * a_const * p.r_prime * (2.0 * p.eps).exp();
        Self { a_const, eps0, c0, r0: eps0 / c0 }
    }

    /// `q^(1)_C`, the minimum of four terms.
    pub fn q1(&self, p: &PesinParams, c: f64, d: usize, delta_delta: f64) -> Q1Bound {
        let (a, b, e) = (p.a, p.b, p.eps);
        let terms = [
            self.r0 / (2.0 * self.a_const),
            ((b - 2.0 * e).exp() - (a + 12.0 * e).exp()) / (2.0 * self.c0),
            c * ((b - 9.0 * d as f64 * e).exp() - (a + 2.0 * e).exp()) / (4.0 * self.c0),
            delta_delta,
        ];
        let value = terms.iter().copied().fold(f64::INFINITY, f64::min);
        Q1Bound { terms, value, r0: self.r0, c0: self.c0, a_const: self.a_const, c }
    }

    /// Radius `alpha_0` of the guaranteed stable-chart domain, in the
    /// Euclidean norm: the Lyapunov ball of radius `r_0 / 2` contains it.
    pub fn alpha0(&self) -> f64 {
        self.r0 / (2.0 * self.a_const)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Q1Bound {
    /// `r0/(2A)`, `(e^{b-2eps} - e^{a+12eps})/(2 c0)`,
    /// `C (e^{b-9d eps} - e^{a+2eps})/(4 c0)`, `delta_Delta`.
    pub terms: [f64; 4],
    pub value: f64,
    pub r0: f64,
    pub c0: f64,
    pub a_const: f64,
    pub c: f64,
}

impl fmt::Display for Q1Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "q1 = min{{r0/(2A) = {:.6e}, (e^(b-2eps) - e^(a+12eps))/(2c0) = {:.6e}, C(e^(b-9d eps) - e^(a+2eps))/(4c0) = {:.6e}, delta = {:.6e}}} = {:.6e} with r0 = {:.6e}, c0 = {:.6e}, A = {:.6e}, C = {}",
            self.terms[0], self.terms[1], self.terms[2], self.terms[3], self.value, self.r0, self.c0, self.a_const, self.c
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformOptions {
    /// Nodes per unstable dimension of the produced chart.
    pub nodes: usize,
    /// Newton residual target, relative to `min(1, radius)`.
    pub newton_tol: f64,
}

impl Default for TransformOptions {
    fn default() -> Self {
        Self { nodes: super::chart::DEFAULT_NODES, newton_tol: 1e-10 }
    }
}

/// Solve `beta_n(u) = target` with `beta_n(u) = u-part of F_n(psi(u), u)`.
/// Returns the solution, the image point and the final residual.
fn invert_beta(
    coords: &LyapunovCoords,
    chart: &GraphChart,
    target: &Vector,
    guess: Vector,
    tol: f64,
    node: usize,
) -> Result<(Vector, Vector, f64)> {
    let n = chart.n;
    let k = coords.k();
    let p = coords.p();
    let eval = |u: &Vector| -> Result<(Vector, Vector)> {
        let s = chart.eval(u);
        coords.map(n, &s, u)
    };
    let mut u = guess;
    let (mut s1, mut u1) = eval(&u)?;
    let mut res = (&u1 - target).norm();
    for _ in 0..MAX_NEWTON {
        // rounding floor: a few ulps of the quantities involved
        let floor = 64.0 * f64::EPSILON * (target.norm() + u1.norm() + u.norm());
        if res <= tol.max(floor) {
            return Ok((u, s1, res));
        }
        let s = chart.eval(&u);
        let dpsi = chart.derivative(&u);
        let d = coords.map_derivative(n, &s, &u)?;
        let dus = d.view((k, 0), (p, k)).into_owned();
        let duu = d.view((k, k), (p, p)).into_owned();
        let jb = dus * dpsi + duu;
        let step = solve(&jb, &(&u1 - target))?;
        let mut lambda = 1.0;
        loop {
            let trial = &u - &step * lambda;
            let (ts, tu) = eval(&trial)?;
            let tr = (&tu - target).norm();
            if tr < res || lambda < 1e-6 {
                u = trial;
                s1 = ts;
                u1 = tu;
                res = tr;
                break;
            }
            lambda *= 0.5;
        }
    }
    let floor = 64.0 * f64::EPSILON * (target.norm() + u1.norm() + u.norm());
    if res <= tol.max(floor) {
        Ok((u, s1, res))
    } else {
        Err(Error::StepFailure { node, residual: res })
    }
}

/// `psi_{n+1} = pi_E o F_n o (psi_n x id) o beta_n^{-1}` on the ball of
/// radius `radius_next` around `eta_{n+1} = beta_n(eta_n)`.
pub fn graph_transform_step(coords: &LyapunovCoords, chart: &GraphChart, radius_next: f64, opts: &TransformOptions) -> Result<GraphChart> {
    let n = chart.n;
    if n + 1 > coords.horizon() {
        return Err(Error::Domain(format!("step {n} beyond the metric horizon {}", coords.horizon())));
    }
    let k = coords.k();
    let p = coords.p();
    // anchor orbit: eta_{n+1} = beta_n(eta_n)
    let (_, center_next) = coords.map(n, &chart.anchor(), &chart.center)?;
    let tol = opts.newton_tol * radius_next.min(1.0);

    // linear seed u0 = eta_n + (D beta_n)^{-1} (target - eta_{n+1})
    let s_c = chart.anchor();
    let d_c = coords.map_derivative(n, &s_c, &chart.center)?;
    let jb_c = d_c.view((k, 0), (p, k)).into_owned() * chart.derivative(&chart.center) + d_c.view((k, k), (p, p)).into_owned();

    let grid = super::interp::TensorGrid::cube(&center_next, radius_next, opts.nodes);
    let mut values = Vec::with_capacity(grid.len());
    let mut newton_residual: f64 = 0.0;
    for (i, target) in grid.nodes().iter().enumerate() {
        let guess = &chart.center + solve(&jb_c, &(target - &center_next))?;
        let (_, s1, res) = invert_beta(coords, chart, target, guess, tol, i)?;
        newton_residual = newton_residual.max(res);
        values.push(s1);
    }
    let mut next = GraphChart::assemble(n + 1, center_next.clone(), radius_next, opts.nodes, values);
    next.newton_residual = newton_residual;

    // invariance: interpolated points against exact images off the nodes
    let mut inv: f64 = newton_residual;
    for (i, target) in next.grid().midpoints().iter().enumerate() {
        if !next.contains(target) {
            continue;
        }
        let guess = &chart.center + solve(&jb_c, &(target - &center_next))?;
        let (_, s1, res) = invert_beta(coords, chart, target, guess, tol, i)?;
        inv = inv.max((next.eval(target) - s1).norm()).max(res);
    }
    next.invariance_residual = inv;
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub n: usize,
    pub radius: f64,
    pub sup_psi: f64,
    pub psi_bound: f64,
    pub sup_dpsi: f64,
    pub dpsi_bound: f64,
    /// `bound + slack - measured`; negative is a violation.
    pub psi_margin: f64,
    pub dpsi_margin: f64,
    /// `|psi_n(eta_n) - xi_n|` against the directly iterated anchor.
    pub anchor_error: f64,
    pub invariance_residual: f64,
    pub newton_residual: f64,
}

impl LedgerRow {
    pub fn violated(&self) -> bool {
        self.psi_margin < 0.0 || self.dpsi_margin < 0.0
    }
}

/// Initial transversal for [`evolve_transversal`].
#[derive(Clone)]
pub struct TransversalSeed {
    /// `eta_0`, centre of the domain ball.
    pub center: Vector,
    /// `delta_0`.
    pub radius: f64,
    pub psi: Arc<dyn Fn(&Vector) -> Vector + Send + Sync>,
}

impl fmt::Debug for TransversalSeed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TransversalSeed").field("center", &self.center).field("radius", &self.radius).finish()
    }
}

impl TransversalSeed {
    pub fn chart(&self, nodes: usize) -> Result<GraphChart> {
        GraphChart::from_fn(0, &self.center, self.radius, nodes, |u| (self.psi)(u))
    }

    /// `psi_0(u) = xi_0 + kappa tanh(u - eta_0)` componentwise on the first
    /// stable coordinate; unstable dimension one.
    pub fn tanh(anchor_s: Vector, anchor_u: Vector, radius: f64, kappa: f64) -> Self {
        let c = anchor_u.clone();
        Self {
            center: anchor_u,
            radius,
            psi: Arc::new(move |u: &Vector| {
                let mut s = anchor_s.clone();
                s[0] += kappa * (u[0] - c[0]).tanh();
                s
            }),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Evolution {
    pub charts: Vec<GraphChart>,
    pub ledger: Vec<LedgerRow>,
    pub q1: Q1Bound,
    pub q: f64,
    pub c: f64,
    pub violations: usize,
}

impl Evolution {
    pub fn max_invariance_residual(&self) -> f64 {
        self.ledger.iter().map(|r| r.invariance_residual).fold(0.0, f64::max)
    }
}

fn precondition(ok: bool, condition: &'static str, detail: String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Precondition { condition, detail })
    }
}

/// Evolve `psi_0` for `steps` graph-transform steps with radii
/// `delta'_n = delta_0 e^{(a+11eps) n}`, checking every hypothesis on the
/// seed first and recording the bound ledger.
#[allow(clippy::too_many_arguments)]
pub fn evolve_transversal(
    coords: &LyapunovCoords,
    seed: &TransversalSeed,
    params: &PesinParams,
    c: f64,
    q: f64,
    delta_delta: f64,
    steps: usize,
    opts: &TransformOptions,
) -> Result<Evolution> {
    let consts = ManifoldConstants::new(params);
    let d = coords.k() + coords.p();
    let q1 = consts.q1(params, c, d, delta_delta);
    let rel = 1.0 + 1e-12;
    precondition(c > 0.0 && c < 1.0, "0 < C < 1", format!("C = {c}"))?;
    precondition(q > 0.0 && q <= q1.value * rel, "0 < q <= q1_C", format!("q = {q:e}; {q1}"))?;
    precondition(
        seed.radius > 0.0 && seed.radius <= q / 4.0 * rel,
        "0 < delta_0 <= q/4",
        format!("delta_0 = {:e}, q/4 = {:e}", seed.radius, q / 4.0),
    )?;
    if steps > coords.horizon() {
        return Err(Error::Domain(format!("{steps} steps exceed the metric horizon {}", coords.horizon())));
    }
    let chart0 = seed.chart(opts.nodes)?;
    let xi0 = chart0.anchor();
    let eta0 = seed.center.clone();
    let anchor_norm = xi0.norm().max(eta0.norm());
    precondition(
        anchor_norm <= q / 4.0 * rel,
        "||(xi_0, eta_0)||'_0 <= q/4",
        format!("||(xi_0, eta_0)||' = {anchor_norm:e}, q/4 = {:e}", q / 4.0),
    )?;
    precondition(
        chart0.sup_psi <= q / 4.0 * rel,
        "sup ||psi_0||'_0 <= q/4",
        format!("sup ||psi_0||' = {:e}, q/4 = {:e}", chart0.sup_psi, q / 4.0),
    )?;
    precondition(
        chart0.sup_dpsi <= c * rel,
        "sup ||D psi_0||'_0 <= C",
        format!("sup ||D psi_0||' = {:e}, C = {c}", chart0.sup_dpsi),
    )?;
    // the anchor must lie on the local stable manifold: its orbit obeys the
    // decay estimate of the local stable manifold theorem
    let rate = (params.a + 6.0 * params.eps).exp();
    let (mut xs, mut xu) = (xi0.clone(), eta0.clone());
    let mut anchors = vec![(xs.clone(), xu.clone())];
    for n in 0..steps {
        let (a, b) = coords.map(n, &xs, &xu)?;
        xs = a;
        xu = b;
        let norm = xs.norm().max(xu.norm());
        let bound = rate.powi(n as i32 + 1) * anchor_norm;
        precondition(
            norm <= bound * (1.0 + 1e-6) + 1e-300,
            "anchor on the local stable manifold",
            format!("||F^{}(xi_0, eta_0)||' = {norm:e} exceeds {bound:e}", n + 1),
        )?;
        anchors.push((xs.clone(), xu.clone()));
    }

    let growth = params.a + 7.0 * params.eps;
    let shrink = params.a + 11.0 * params.eps;
    let ddecay = -7.0 * d as f64 * params.eps;
    let row = |chart: &GraphChart, n: usize| -> LedgerRow {
        let nf = n as f64;
        let psi_bound = (0.25 + c) * q * (growth * nf).exp();
        let dpsi_bound = c * (ddecay * nf).exp();
        let (ax, au) = &anchors[n];
        let anchor_error = (chart.eval(au) - ax).norm().max((&chart.center - au).norm());
        LedgerRow {
            n,
            radius: chart.radius,
            sup_psi: chart.sup_psi,
            psi_bound,
            sup_dpsi: chart.sup_dpsi,
            dpsi_bound,
            psi_margin: psi_bound + SLACK_TOL - chart.sup_psi,
            dpsi_margin: dpsi_bound + SLACK_TOL - chart.sup_dpsi,
            anchor_error,
            invariance_residual: chart.invariance_residual,
            newton_residual: chart.newton_residual,
        }
    };
    let mut ledger = vec![row(&chart0, 0)];
    let mut charts = vec![chart0];
    for n in 0..steps {
        let radius = seed.radius * (shrink * (n + 1) as f64).exp();
        let next = graph_transform_step(coords, &charts[n], radius, opts)?;
        ledger.push(row(&next, n + 1));
        charts.push(next);
    }
    let violations = ledger.iter().filter(|r| r.violated()).count();
    Ok(Evolution { charts, ledger, q1, q, c, violations })
}

/// Evolve the same seed at `m` and `2m - 1` nodes (nested grids) and return
/// the largest difference of the charts on the coarse nodes and midpoints.
#[allow(clippy::too_many_arguments)]
pub fn uniqueness_probe(
    coords: &LyapunovCoords,
    seed: &TransversalSeed,
    params: &PesinParams,
    c: f64,
    q: f64,
    steps: usize,
    m: usize,
) -> Result<f64> {
    let coarse = evolve_transversal(coords, seed, params, c, q, DEFAULT_DELTA_DELTA, steps, &TransformOptions { nodes: m, ..Default::default() })?;
    let fine_m = 2 * m - 1;
    let fine = evolve_transversal(coords, seed, params, c, q, DEFAULT_DELTA_DELTA, steps, &TransformOptions { nodes: fine_m, ..Default::default() })?;
    let mut worst: f64 = 0.0;
    for (a, b) in coarse.charts.iter().zip(&fine.charts) {
        for u in a.sample_points() {
            worst = worst.max((a.eval(&u) - b.eval(&u)).norm());
        }
    }
    Ok(worst)
}

/// Per-axis sampled linear map helper used by the tests of the ledger.
pub fn chart_slope(chart: &GraphChart) -> Matrix {
    chart.derivative(&chart.center)
}
