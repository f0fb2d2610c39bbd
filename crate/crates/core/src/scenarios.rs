//! Benchmark systems with closed-form stable foliations, and the oracles
//! built on them.
//!
//! * S1: the constant map `diag(2, 1/2)`.
//! * S2: i.i.d. diagonal maps with log-uniform entries.
//! * S3: the skew map `(x/2, 2y + sin x)`.
//! * S4: random skew maps `(a x, b y + c sin x)`.
//!
//! For skew maps `y_{n+1} = b_n y_n + h_n(x_n)` with `x_{n+1} = a_n x_n`,
//! so two points share a stable leaf iff the `y`-difference divided by
//! `b_0 ... b_n` tends to zero. That gives every leaf as a geometric series.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};
use crate::rds::{iterate, IdentityFamily, IidDiagFamily, LinearFamily, MapFamily, OmegaWord, SkewFamily};

/// Series terms are summed until the rigorous tail bound drops below this.
pub const ORACLE_TAIL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ScenarioKind {
    Identity { d: usize },
    Linear { rows: Vec<Vec<f64>> },
    ConstantDiag { diag: Vec<f64> },
    IidDiag { ranges: Vec<(f64, f64)> },
    Skew { a: f64, b: f64, c: f64 },
    RandomSkew { a: (f64, f64), b: (f64, f64), c: (f64, f64) },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub name: String,
    pub kind: ScenarioKind,
    pub seed: u64,
}

impl ScenarioSpec {
    pub fn s1() -> Self {
        Self { name: "S1".into(), kind: ScenarioKind::ConstantDiag { diag: vec![2.0, 0.5] }, seed: 0 }
    }

    pub fn s2(seed: u64) -> Self {
        Self { name: "S2".into(), kind: ScenarioKind::IidDiag { ranges: vec![(0.25, 0.75), (1.5, 3.0)] }, seed }
    }

    pub fn s3() -> Self {
        Self { name: "S3".into(), kind: ScenarioKind::Skew { a: 0.5, b: 2.0, c: 1.0 }, seed: 0 }
    }

    pub fn s4(seed: u64) -> Self {
        Self {
            name: "S4".into(),
            kind: ScenarioKind::RandomSkew { a: (0.4, 0.6), b: (1.8, 2.2), c: (0.5, 1.0) },
            seed,
        }
    }

    pub fn identity(d: usize) -> Self {
        Self { name: "identity".into(), kind: ScenarioKind::Identity { d }, seed: 0 }
    }

    /// Look up a built-in scenario by name (`S1` .. `S4`, `identity`).
    pub fn by_name(name: &str, seed: u64) -> Result<Self> {
        match name.to_ascii_lowercase().as_str() {
            "s1" | "constant-diag" => Ok(Self::s1()),
            "s2" | "iid-diag" => Ok(Self::s2(seed)),
            "s3" | "skew" => Ok(Self::s3()),
            "s4" | "random-skew" => Ok(Self::s4(seed)),
            "identity" => Ok(Self::identity(2)),
            other => Err(Error::Config(format!("unknown scenario `{other}`"))),
        }
    }

    pub fn is_skew(&self) -> bool {
        matches!(self.kind, ScenarioKind::Skew { .. } | ScenarioKind::RandomSkew { .. })
    }

    /// Declared parameter ranges must be sane; skew scenarios must also
    /// satisfy `sup a < 1 < inf b`.
    pub fn validate(&self) -> Result<()> {
        self.family()?;
        if let ScenarioKind::Skew { .. } | ScenarioKind::RandomSkew { .. } = self.kind {
            let (a, b) = self.skew_ranges().expect("skew kind");
            if !(a.1 < 1.0 && 1.0 < b.0) {
                return Err(Error::Config(format!(
                    "skew scenario `{}` needs sup a < 1 < inf b, got a in {a:?}, b in {b:?}",
                    self.name
                )));
            }
        }
        Ok(())
    }

    pub fn family(&self) -> Result<Arc<dyn MapFamily>> {
        Ok(match &self.kind {
            ScenarioKind::Identity { d } => {
                if *d == 0 {
                    return Err(Error::Config("identity scenario needs d >= 1".into()));
                }
                Arc::new(IdentityFamily { d: *d })
            }
            ScenarioKind::Linear { rows } => {
                let d = rows.len();
                if d == 0 || rows.iter().any(|r| r.len() != d) {
                    return Err(Error::Config("linear scenario needs a non-empty square matrix".into()));
                }
                let flat: Vec<f64> = rows.iter().flatten().copied().collect();
                Arc::new(LinearFamily::new(&self.name, Matrix::from_row_slice(d, d, &flat))?)
            }
            ScenarioKind::ConstantDiag { diag } => Arc::new(LinearFamily::diagonal(&self.name, diag)?),
            ScenarioKind::IidDiag { ranges } => Arc::new(IidDiagFamily::new(&self.name, ranges.clone())?),
            ScenarioKind::Skew { a, b, c } => Arc::new(SkewFamily::new(&self.name, (*a, *a), (*b, *b), (*c, *c))?),
            ScenarioKind::RandomSkew { a, b, c } => Arc::new(SkewFamily::new(&self.name, *a, *b, *c)?),
        })
    }

    /// A lazily realized word with declared length `n`.
    pub fn word(&self, n: usize) -> Result<OmegaWord> {
        crate::rds::sample_word(self.family()?, self.seed, n)
    }

    fn skew_ranges(&self) -> Option<((f64, f64), (f64, f64))> {
        match self.kind {
            ScenarioKind::Skew { a, b, .. } => Some(((a, a), (b, b))),
            ScenarioKind::RandomSkew { a, b, .. } => Some((a, b)),
            _ => None,
        }
    }

    fn skew_c_max(&self) -> Option<f64> {
        match self.kind {
            ScenarioKind::Skew { c, .. } => Some(c.abs()),
            ScenarioKind::RandomSkew { c, .. } => Some(c.0.abs().max(c.1.abs())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleResult {
    pub quantity: String,
    pub value: f64,
    /// Number of series terms summed.
    pub truncation: usize,
    /// Rigorous bound on the neglected tail.
    pub error_bound: f64,
}

/// `sin u - sin v` without cancellation.
fn sin_diff(u: f64, v: f64) -> f64 {
    2.0 * (0.5 * (u + v)).cos() * (0.5 * (u - v)).sin()
}

struct SkewSeries {
    a_max: f64,
    b_min: f64,
    c_max: f64,
}

fn skew_series(spec: &ScenarioSpec) -> Result<SkewSeries> {
    let (a, b) = spec
        .skew_ranges()
        .ok_or_else(|| Error::Unsupported(format!("scenario `{}` has no skew structure", spec.name)))?;
    let c_max = spec.skew_c_max().expect("skew kind");
    let ratio = a.1 / b.0;
    if ratio >= 1.0 {
        return Err(Error::Config("skew series needs sup a < inf b".into()));
    }
    Ok(SkewSeries { a_max: a.1, b_min: b.0, c_max })
}

/// `sum_k (b_0..b_k)^{-1} [h_k(x_k) - h_k(x'_k)]` where `x_k`, `x'_k` are the
/// `x`-coordinates of the two orbits. Terms are summed until the tail bound
/// `c |x - x'| / b_min * q^{K+1} / (1 - q)`, `q = a_max / b_min`, is below `tol`,
/// or exactly `terms` terms when given.
fn skew_sum(
    spec: &ScenarioSpec,
    word: &OmegaWord,
    x: f64,
    x_prime: f64,
    tol: f64,
    terms: Option<usize>,
) -> Result<(f64, usize, f64)> {
    let s = skew_series(spec)?;
    let q = s.a_max / s.b_min;
    let dx = (x - x_prime).abs();
    let tail = |k: usize| s.c_max * dx / s.b_min * q.powi(k as i32) / (1.0 - q);
    let mut sum = 0.0;
    let mut xk = x;
    let mut xpk = x_prime;
    let mut bprod = 1.0;
    let mut k = 0usize;
    loop {
        let p = word.params(k)?;
        let (a, b, c) = (p[0], p[1], p[2]);
        bprod *= b;
        sum += c * sin_diff(xk, xpk) / bprod;
        xk *= a;
        xpk *= a;
        k += 1;
        let done = match terms {
            Some(t) => k >= t,
            None => tail(k) < tol,
        };
        if done || k > 100_000 {
            break;
        }
    }
    Ok((sum, k, tail(k)))
}

/// `y` such that `(x, y)` lies on the stable leaf of `base = (x0, y0)`.
pub fn skew_leaf_oracle(spec: &ScenarioSpec, word: &OmegaWord, base: (f64, f64), x: f64) -> Result<OracleResult> {
    let (sum, k, tail) = skew_sum(spec, word, x, base.0, ORACLE_TAIL_TOL, None)?;
    Ok(OracleResult { quantity: "leaf_y".into(), value: base.1 - sum, truncation: k, error_bound: tail })
}

/// Same series with a fixed number of terms.
pub fn skew_leaf_series(spec: &ScenarioSpec, word: &OmegaWord, base: (f64, f64), x: f64, terms: usize) -> Result<OracleResult> {
    let (sum, k, tail) = skew_sum(spec, word, x, base.0, 0.0, Some(terms))?;
    Ok(OracleResult { quantity: "leaf_y".into(), value: base.1 - sum, truncation: k, error_bound: tail })
}

/// `dy/dx` of the stable leaf through any point with first coordinate `x`.
pub fn skew_leaf_slope_oracle(spec: &ScenarioSpec, word: &OmegaWord, x: f64) -> Result<OracleResult> {
    let s = skew_series(spec)?;
    let q = s.a_max / s.b_min;
    let tail = |k: usize| s.c_max / s.b_min * q.powi(k as i32) / (1.0 - q);
    let mut sum = 0.0;
    let mut xk = x;
    let mut aprod = 1.0;
    let mut bprod = 1.0;
    let mut k = 0;
    loop {
        let p = word.params(k)?;
        bprod *= p[1];
        sum += p[2] * xk.cos() * aprod / bprod;
        xk *= p[0];
        aprod *= p[0];
        k += 1;
        if tail(k) < ORACLE_TAIL_TOL || k > 100_000 {
            break;
        }
    }
    Ok(OracleResult { quantity: "leaf_slope".into(), value: -sum, truncation: k, error_bound: tail(k) })
}

/// Translation `Delta` of the holonomy between the vertical lines `x = c1`
/// and `x = c2`: the leaf through `(c1, y)` meets `x = c2` at `y + Delta`.
/// The holonomy Jacobian is identically 1.
pub fn skew_holonomy_oracle(spec: &ScenarioSpec, word: &OmegaWord, c1: f64, c2: f64) -> Result<OracleResult> {
    let (sum, k, tail) = skew_sum(spec, word, c2, c1, ORACLE_TAIL_TOL, None)?;
    Ok(OracleResult { quantity: "holonomy_offset".into(), value: -sum, truncation: k, error_bound: tail })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairClassification {
    pub point: Vec<f64>,
    pub member: bool,
    /// `(1/n) log |f^n x - f^n y|` at the horizon; `-inf` when the orbits coincide.
    pub rate: f64,
    pub diverged: bool,
}

/// Exhaustive forward-iteration classification of `grid` against `x`.
pub fn brute_force_stable_pairs(
    word: &OmegaWord,
    x: &Vector,
    grid: &[Vector],
    horizon: usize,
    margin: f64,
) -> Result<Vec<PairClassification>> {
    let word = word.extended(horizon);
    let ox = iterate(&word, x, horizon)?;
    let fx = &ox[horizon];
    Ok(grid
        .iter()
        .map(|y| match iterate(&word, y, horizon) {
            Ok(oy) => {
                let dist = (&oy[horizon] - fx).norm();
                let rate = if dist == 0.0 { f64::NEG_INFINITY } else { dist.ln() / horizon as f64 };
                PairClassification { point: y.iter().copied().collect(), member: rate < -margin, rate, diverged: false }
            }
            Err(_) => PairClassification { point: y.iter().copied().collect(), member: false, rate: f64::INFINITY, diverged: true },
        })
        .collect())
}
