//! Local stable charts by Lyapunov-Perron shooting, and the contraction
//! estimate along their leaves.

use serde::{Deserialize, Serialize};

use super::chart::LyapunovCoords;
use super::interp::TensorGrid;
use super::transform::{ManifoldConstants, SLACK_TOL};
use crate::error::{Error, Result};
use crate::linalg::{solve, spectral_norm, Matrix, Vector};
use crate::rds::CenteredFrame;

/// Target accuracy of the shooting solve for `eta = h(xi)`.
pub const SHOOT_TOL: f64 = 1e-8;
const MAX_BRACKET_DOUBLINGS: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StableChartOptions {
    /// Nodes per stable dimension.
    pub nodes: usize,
    /// Shooting horizon; `None` picks `max(50, ln(1e16)/gap)`.
    pub n_shoot: Option<usize>,
}

impl Default for StableChartOptions {
    fn default() -> Self {
        Self { nodes: super::chart::DEFAULT_NODES, n_shoot: None }
    }
}

/// `h_n` over the ball `|xi| <= radius` in `E_n`, Lyapunov coordinates.
#[derive(Debug, Clone)]
pub struct StableChart {
    pub n: usize,
    /// `f^n x`.
    pub base: Vector,
    pub radius: f64,
    /// The requested radius exceeds `alpha_n`, where the estimates are not
    /// guaranteed.
    pub beyond_alpha: bool,
    pub alpha: f64,
    /// Lipschitz bound `beta_n`; `beta_0` is the measured Lipschitz constant
    /// of the chart at index 0.
    pub beta: f64,
    pub gamma: f64,
    /// Measured `sup ||D h||'`.
    pub lip: f64,
    pub n_shoot: usize,
    /// Largest bracket width left by the solver.
    pub residual: f64,
    e_hat: Matrix,
    h_hat: Matrix,
    grid: TensorGrid,
    values: Vec<Vector>,
}

/// Constants `(alpha_{n+1}, beta_{n+1}, gamma_{n+1})` from those at `n`.
pub fn advance_constants(alpha: f64, beta: f64, gamma: f64, eps: f64) -> (f64, f64, f64) {
    (alpha * (-5.0 * eps).exp(), beta * (7.0 * eps).exp(), gamma * (2.0 * eps).exp())
}

impl StableChart {
    pub fn grid(&self) -> &TensorGrid {
        &self.grid
    }

    pub fn values(&self) -> &[Vector] {
        &self.values
    }

    pub fn eval(&self, xi: &Vector) -> Vector {
        self.grid.eval(&self.values, xi).0
    }

    pub fn derivative(&self, xi: &Vector) -> Matrix {
        self.grid.eval(&self.values, xi).1
    }

    /// Point `f^n x + E^ xi + H^ h(xi)` of `R^d`.
    pub fn point(&self, xi: &Vector) -> Vector {
        &self.base + &self.e_hat * xi + &self.h_hat * self.eval(xi)
    }

    pub fn contains(&self, xi: &Vector) -> bool {
        xi.norm() <= self.radius * (1.0 + 1e-12)
    }

    /// Parameter `xi` (stable dimension one) at which the leaf point has
    /// ambient coordinate `axis` equal to `value`, by bisection over the chart.
    pub fn param_at_coordinate(&self, axis: usize, value: f64) -> Result<f64> {
        if self.e_hat.ncols() != 1 || axis >= self.base.len() {
            return Err(Error::Unsupported("coordinate search needs a one-dimensional leaf".into()));
        }
        let f = |t: f64| self.point(&Vector::from_element(1, t))[axis] - value;
        let (mut lo, mut hi) = (-self.radius, self.radius);
        let (flo, fhi) = (f(lo), f(hi));
        if flo.signum() == fhi.signum() && flo != 0.0 && fhi != 0.0 {
            return Err(Error::Domain(format!("coordinate {axis} = {value} is not reached on the chart")));
        }
        let up = fhi > flo;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if (f(mid) > 0.0) == up {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    /// Measured Lipschitz constant within its bound.
    pub fn lip_ok(&self) -> bool {
        self.lip <= self.beta + SLACK_TOL
    }

    /// `(alpha_{n+1}, beta_{n+1}, gamma_{n+1})`.
    pub fn next_constants(&self, eps: f64) -> (f64, f64, f64) {
        advance_constants(self.alpha, self.beta, self.gamma, eps)
    }
}

fn default_n_shoot(coords: &LyapunovCoords) -> usize {
    let s = &coords.metric().split().spectrum.exponents;
    let k = coords.k();
    let gap = if k < s.len() { s[k] - s[k - 1] } else { 0.0 };
    if gap > 0.0 {
        ((1e16f64.ln() / gap).ceil() as usize).max(50)
    } else {
        // no measurable gap; any horizon will do to let the decay check fail
        50
    }
}

struct Shooter<'a> {
    coords: &'a LyapunovCoords,
    frame: CenteredFrame,
    n: usize,
    n_shoot: usize,
    threshold: f64,
}

impl<'a> Shooter<'a> {
    fn new(coords: &'a LyapunovCoords, n: usize, n_shoot: usize, radius: f64) -> Result<Self> {
        let split = coords.metric().split();
        if n + n_shoot > split.stored_len() {
            return Err(Error::Domain(format!(
                "shooting to index {} needs a splitting stored that far (have {})",
                n + n_shoot,
                split.stored_len()
            )));
        }
        let frame = CenteredFrame::new(coords.frame().word(), split.point(0), n + n_shoot + 1)?;
        Ok(Self { coords, frame, n, n_shoot, threshold: 10.0 * radius.max(1.0) })
    }

    fn start(&self, xi: &Vector, eta: &Vector) -> Vector {
        self.coords.tangent(self.n, xi, eta)
    }

    /// Sign of the `H` component once the orbit leaves the threshold ball,
    /// `0` when it never does.
    fn escape_sign(&self, xi: &Vector, eta: &Vector) -> Result<f64> {
        let split = self.coords.metric().split();
        let mut v = self.start(xi, eta);
        for j in self.n..self.n + self.n_shoot {
            v = self.frame.apply(j, &v)?;
            if v.norm() > self.threshold {
                let (_, h) = split.decompose(j + 1, &v)?;
                return Ok(h[0].signum());
            }
        }
        Ok(0.0)
    }

    /// `eta` with `(xi, eta)` on the leaf, unstable dimension one.
    fn bisect(&self, xi: &Vector, guess: f64, width0: f64) -> Result<(f64, f64)> {
        let at = |e: f64| self.escape_sign(xi, &Vector::from_element(1, e));
        let mut w = width0;
        let mut bracket = None;
        for _ in 0..=MAX_BRACKET_DOUBLINGS {
            let (lo, hi) = (guess - w, guess + w);
            let (sl, sh) = (at(lo)?, at(hi)?);
            if sl != 0.0 && sh != 0.0 && sl != sh {
                bracket = Some((lo, hi, sl));
                break;
            }
            w *= 2.0;
        }
        let Some((mut lo, mut hi, sl)) = bracket else {
            return Err(Error::ChartDomainTooLarge { node: 0, radius: xi.norm() });
        };
        // relative to |xi|: the decay check amplifies any miss by the expansion
        let tol = SHOOT_TOL * 1e-6 * xi.norm().max(guess.abs());
        while hi - lo > tol {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let s = at(mid)?;
            if s == sl {
                lo = mid;
            } else if s == 0.0 {
                // stays bounded: already on the leaf to working precision
                return Ok((mid, hi - lo));
            } else {
                hi = mid;
            }
        }
        Ok((0.5 * (lo + hi), hi - lo))
    }

    /// `eta` with vanishing `H` coordinate at the end of the horizon, by
    /// Newton with horizon continuation; any unstable dimension.
    fn newton(&self, xi: &Vector, guess: Vector) -> Result<(Vector, f64)> {
        let metric = self.coords.metric();
        let p = self.coords.p();
        let mut eta = guess;
        let mut horizon = 5.min(self.n_shoot);
        let mut last = f64::INFINITY;
        loop {
            for _ in 0..50 {
                let mut v = self.start(xi, &eta);
                let mut t = metric.h_hat(self.n).clone();
                for j in self.n..self.n + horizon {
                    t = self.frame.derivative(j, &v)? * t;
                    v = self.frame.apply(j, &v)?;
                }
                let split = metric.split();
                let g = split.decompose(self.n + horizon, &v)?.1;
                let mut jt = Matrix::zeros(p, p);
                for c in 0..p {
                    let (_, hc) = split.decompose(self.n + horizon, &t.column(c).into_owned())?;
                    jt.set_column(c, &hc);
                }
                let step = solve(&jt, &g)?;
                eta -= &step;
                last = step.norm();
                if last <= SHOOT_TOL * 1e-4 * (1.0 + eta.norm()) {
                    break;
                }
            }
            if horizon == self.n_shoot {
                return Ok((eta, last));
            }
            horizon = (2 * horizon).min(self.n_shoot);
        }
    }

    /// Decay of the solved orbit: `|v_m| <= 2A e^{(a+6eps) m} |v_0|`.
    fn decays(&self, xi: &Vector, eta: &Vector) -> Result<bool> {
        let params = self.coords.metric().params();
        let a_const = self.coords.metric().a_const();
        let m = (self.n_shoot / 2).min(30);
        let mut v = self.start(xi, eta);
        let v0 = v.norm();
        for j in self.n..self.n + m {
            v = self.frame.apply(j, &v)?;
        }
        Ok(v.norm() <= 2.0 * a_const * ((params.a + 6.0 * params.eps) * m as f64).exp() * v0 * (1.0 + 1e-9))
    }
}

/// Local stable chart at index 0. See [`local_stable_chart_at`].
pub fn local_stable_chart(coords: &LyapunovCoords, radius_request: f64, opts: &StableChartOptions) -> Result<StableChart> {
    local_stable_chart_at(coords, 0, radius_request, None, opts)
}

/// `h_n` on `|xi| <= radius_request` with the Lyapunov-Perron method: for
/// each node `xi`, `eta = h(xi)` is the unique value whose forward orbit does
/// not escape along `H`. `beta` is the bound to check the measured
/// Lipschitz constant against; `None` takes the measured value (index 0).
pub fn local_stable_chart_at(
    coords: &LyapunovCoords,
    n: usize,
    radius_request: f64,
    beta: Option<f64>,
    opts: &StableChartOptions,
) -> Result<StableChart> {
    if !(radius_request > 0.0 && radius_request.is_finite()) {
        return Err(Error::Domain(format!("chart radius must be positive, got {radius_request}")));
    }
    if n > coords.horizon() {
        return Err(Error::Domain(format!("index {n} beyond the metric horizon {}", coords.horizon())));
    }
    let metric = coords.metric();
    let params = *metric.params();
    let consts = ManifoldConstants::new(&params);
    let eps = params.eps;
    let nf = n as f64;
    let alpha = consts.alpha0() * (-5.0 * eps * nf).exp();
    let gamma = 2.0 * consts.a_const * (2.0 * eps * nf).exp();
    let k = coords.k();
    let p = coords.p();
    let n_shoot = opts.n_shoot.unwrap_or_else(|| default_n_shoot(coords));
    let shooter = Shooter::new(coords, n, n_shoot, radius_request)?;

    let grid = TensorGrid::cube(&Vector::zeros(k), radius_request, opts.nodes);
    let nodes = grid.nodes();
    let mut values = vec![Vector::zeros(p); nodes.len()];
    let mut residual: f64 = 0.0;
    // sweep outward from the origin so each node is seeded by a solved neighbour
    let mut order: Vec<usize> = (0..nodes.len()).collect();
    order.sort_by(|&i, &j| nodes[i].norm().total_cmp(&nodes[j].norm()));
    let mut solved: Vec<(Vector, Vector)> = Vec::new();
    for &i in &order {
        let xi = &nodes[i];
        if xi.norm() == 0.0 {
            // h(0) = 0: the base point is on its own leaf
            solved.push((xi.clone(), Vector::zeros(p)));
            continue;
        }
        let guess = solved
            .iter()
            .min_by(|a, b| (&a.0 - xi).norm().total_cmp(&(&b.0 - xi).norm()))
            .map(|(_, e)| e.clone())
            .unwrap_or_else(|| Vector::zeros(p));
        let (eta, res) = if p == 1 {
            let width = xi.norm().max(1e-300);
            let (e, r) = shooter.bisect(xi, guess[0], width).map_err(|e| match e {
                Error::ChartDomainTooLarge { .. } => Error::ChartDomainTooLarge { node: i, radius: radius_request },
                other => other,
            })?;
            (Vector::from_element(1, e), r)
        } else {
            shooter.newton(xi, guess)?
        };
        if !shooter.decays(xi, &eta)? {
            return Err(Error::ChartDomainTooLarge { node: i, radius: radius_request });
        }
        residual = residual.max(res);
        solved.push((xi.clone(), eta.clone()));
        values[i] = eta;
    }

    let mut lip: f64 = 0.0;
    let mids = grid.midpoints();
    for u in nodes.iter().chain(&mids) {
        if u.norm() <= radius_request * (1.0 + 1e-12) {
            lip = lip.max(spectral_norm(&grid.eval(&values, u).1));
        }
    }
    Ok(StableChart {
        n,
        base: coords.frame().point(n).clone(),
        radius: radius_request,
        beyond_alpha: radius_request > alpha,
        alpha,
        beta: beta.unwrap_or(lip),
        gamma,
        lip,
        n_shoot,
        residual,
        e_hat: metric.e_hat(n).clone(),
        h_hat: metric.h_hat(n).clone(),
        grid,
        values,
    })
}

/// Exact shooting solve of `h_n(xi)` at a single point, without
/// interpolation.
pub fn shoot_leaf_point(coords: &LyapunovCoords, n: usize, xi: &Vector, n_shoot: Option<usize>) -> Result<Vector> {
    let n_shoot = n_shoot.unwrap_or_else(|| default_n_shoot(coords));
    let shooter = Shooter::new(coords, n, n_shoot, xi.norm())?;
    let p = coords.p();
    if xi.norm() == 0.0 {
        return Ok(Vector::zeros(p));
    }
    let eta = if p == 1 {
        Vector::from_element(1, shooter.bisect(xi, 0.0, xi.norm().max(1e-300))?.0)
    } else {
        shooter.newton(xi, Vector::zeros(p))?.0
    };
    if !shooter.decays(xi, &eta)? {
        return Err(Error::ChartDomainTooLarge { node: 0, radius: xi.norm() });
    }
    Ok(eta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionReport {
    /// `d^s(f^l y, f^l y')` for `l = 0..=steps`.
    pub distances: Vec<f64>,
    /// Consecutive ratios.
    pub ratios: Vec<f64>,
    /// `gamma_0 e^{(a+4eps) l} d^s(y, y')`.
    pub bounds: Vec<f64>,
    /// Polyline points used at each step.
    pub resolution: Vec<usize>,
    pub holds: bool,
    /// Geometric mean of the ratios.
    pub mean_ratio: f64,
    /// The leaf left the domain of the centered maps before `steps`.
    pub truncated: bool,
}

const POLY_START: usize = 64;
const POLY_CAP: usize = 1 << 16;
const POLY_TOL: f64 = 1e-8;

fn polyline(points: &[Vector]) -> f64 {
    points.windows(2).map(|w| (&w[1] - &w[0]).norm()).sum()
}

/// Arc length along the leaf between `h(xi1)` and `h(xi2)` after `l` steps,
/// for every `l <= steps`, checked against the contraction estimate.
pub fn stable_contraction_check(coords: &LyapunovCoords, chart: &StableChart, xi1: &Vector, xi2: &Vector, steps: usize) -> Result<ContractionReport> {
    if !chart.contains(xi1) || !chart.contains(xi2) {
        return Err(Error::Domain("pair is outside the chart domain".into()));
    }
    let params = coords.metric().params();
    let frame = CenteredFrame::new(coords.frame().word(), coords.metric().split().point(0), chart.n + steps + 1)?;
    let rate = params.a + 4.0 * params.eps;
    // orbit of the polyline with `count` segments, truncated on failure
    let evolve = |count: usize| -> (Vec<f64>, bool) {
        let mut pts: Vec<Vector> = (0..=count)
            .map(|i| {
                let t = i as f64 / count as f64;
                let xi = xi1 + (xi2 - xi1) * t;
                chart.point(&xi) - &chart.base
            })
            .collect();
        let mut lens = vec![polyline(&pts)];
        for j in chart.n..chart.n + steps {
            let next: Result<Vec<Vector>> = pts.iter().map(|v| frame.apply(j, v)).collect();
            match next {
                Ok(n) => pts = n,
                Err(_) => return (lens, true),
            }
            lens.push(polyline(&pts));
        }
        (lens, false)
    };
    let mut count = POLY_START;
    let (mut lens, mut truncated) = evolve(count);
    let mut resolution = vec![count; lens.len()];
    let mut converged = vec![false; lens.len()];
    while count < POLY_CAP && converged.iter().any(|c| !c) {
        count *= 2;
        let (finer, t) = evolve(count);
        truncated |= t;
        let m = finer.len().min(lens.len());
        for l in 0..m {
            if converged[l] {
                continue;
            }
            let scale = finer[l].abs().max(f64::MIN_POSITIVE);
            if (finer[l] - lens[l]).abs() <= POLY_TOL * scale || finer[l] == 0.0 {
                converged[l] = true;
            }
            lens[l] = finer[l];
            resolution[l] = count;
        }
        lens.truncate(m);
        resolution.truncate(m);
        converged.truncate(m);
    }
    let bounds: Vec<f64> = (0..lens.len()).map(|l| chart.gamma * (rate * l as f64).exp() * lens[0]).collect();
    let ratios: Vec<f64> = lens.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).collect();
    let holds = lens.iter().zip(&bounds).all(|(d, b)| *d <= b * (1.0 + 1e-9));
    let mean_ratio = if ratios.is_empty() || ratios.iter().any(|&r| r <= 0.0) {
        0.0
    } else {
        (ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64).exp()
    };
    Ok(ContractionReport { distances: lens, ratios, bounds, resolution, holds, mean_ratio, truncated })
}
