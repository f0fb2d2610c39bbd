//! Membership in the global stable manifold by the exponential rate test.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Vector;
use crate::rds::{iterate, OmegaWord};

pub const RATE_MARGIN: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalStableResult {
    pub member: bool,
    /// Largest running slope `(log d_n - log d_{n/2}) / (n - n/2)` over
    /// `n in [N/2, N]`, with `d_n = |f^n x - f^n y|`; `-inf` when the orbits
    /// coincide.
    pub rate: f64,
    /// One of the orbits escaped; `rate` uses the steps before it.
    pub diverged: bool,
    /// `|f^n x - f^n y|` for the iterated steps.
    pub distances: Vec<f64>,
}

fn orbit_until_divergence(word: &OmegaWord, x: &Vector, n: usize) -> (Vec<Vector>, bool) {
    match iterate(word, x, n) {
        Ok(o) => (o, false),
        Err(Error::OrbitDivergence { last_finite, .. }) => (iterate(word, x, last_finite).unwrap_or_else(|_| vec![x.clone()]), true),
        Err(_) => (vec![x.clone()], true),
    }
}

pub fn global_stable_test(word: &OmegaWord, x: &Vector, y: &Vector, horizon: usize) -> Result<GlobalStableResult> {
    global_stable_test_with(word, x, y, horizon, RATE_MARGIN)
}

pub fn global_stable_test_with(word: &OmegaWord, x: &Vector, y: &Vector, horizon: usize, margin: f64) -> Result<GlobalStableResult> {
    if horizon < 10 {
        return Err(Error::Config(format!("global stable test needs horizon >= 10, got {horizon}")));
    }
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let word = word.extended(horizon);
    let (ox, dx) = orbit_until_divergence(&word, x, horizon);
    let (oy, dy) = orbit_until_divergence(&word, y, horizon);
    let m = ox.len().min(oy.len());
    let distances: Vec<f64> = (0..m).map(|n| (&ox[n] - &oy[n]).norm()).collect();
    let diverged = dx || dy;
    let last = m - 1;
    // a secant over the second half of [0, n] removes the constant offset
    // log d_0 that biases (1/n) log d_n at short horizons
    let slope = |n: usize| {
        let m = n / 2;
        let (hi, lo) = (distances[n].ln(), distances[m].ln());
        if hi == f64::NEG_INFINITY {
            f64::NEG_INFINITY
        } else if lo == f64::NEG_INFINITY {
            f64::INFINITY
        } else {
            (hi - lo) / (n - m) as f64
        }
    };
    let rate = (last.div_ceil(2).max(2)..=last).map(slope).fold(f64::NEG_INFINITY, f64::max);
    let member = !diverged && rate < -margin;
    Ok(GlobalStableResult { member, rate, diverged, distances })
}
