//! Experiment configuration: a flat TOML file with one section per command.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use pesin_core::oseledets::{epsilon_ceiling, PesinParams};
use pesin_core::scenarios::{ScenarioKind, ScenarioSpec};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    /// Output directory; `--out` takes precedence.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub scenario: ScenarioConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pesin: Option<PesinConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub certificate: Option<CertificateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifold: Option<ManifoldConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub holonomy: Option<HolonomyConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    /// Replaces the built-in parameters of the named scenario.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<ScenarioKind>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Epsilon {
    Value(f64),
    Auto(AutoTag),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AutoTag {
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PesinConfig {
    pub a: f64,
    pub b: f64,
    pub k: usize,
    pub eps: Epsilon,
    pub l_prime: f64,
    pub r_prime: f64,
    pub c_prime: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumConfig {
    pub horizon: usize,
    #[serde(default = "one")]
    pub qr_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Vec<f64>>,
    /// History rows written to the CSV.
    #[serde(default = "default_rows")]
    pub rows: usize,
    /// Extra seeds (one estimate each); the top-level seed is used when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
}

/// Certificates on the product of `seeds` and a box grid of points. Off
/// the stable directions orbits leave the overflow guard quickly, so grids
/// over noise realizations at a fixed point are the usual choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    pub horizon: usize,
    /// Empty means the top-level seed.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// Box corners; empty means the origin.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lo: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub hi: Vec<f64>,
    /// Grid points per axis.
    #[serde(default = "one")]
    pub points: usize,
    /// Also certify at twice the horizon and require the membership
    /// fractions to agree within `doubling_tol`.
    #[serde(default)]
    pub check_doubling: bool,
    #[serde(default = "default_doubling_tol")]
    pub doubling_tol: f64,
    /// Required membership fraction, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifoldConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    /// Leaf chart radius in Lyapunov units; `None` sizes it to reach `|x| = reach`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default = "default_reach")]
    pub reach: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    #[serde(default = "default_oracle_points")]
    pub oracle_points: usize,
    /// Largest accepted distance between the computed leaf and its oracle.
    #[serde(default = "default_leaf_tol")]
    pub leaf_tol: f64,
    #[serde(default)]
    pub transversal: TransversalSeedConfig,
}

/// Graph-transform seed `psi_0(u) = kappa tanh(u)` on the ball of radius
/// `delta0_frac * q` with `q = q_frac * q1_C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransversalSeedConfig {
    pub c: f64,
    pub q_frac: f64,
    pub delta0_frac: f64,
    pub kappa: f64,
    pub steps: usize,
    #[serde(default = "default_delta_delta")]
    pub delta_delta: f64,
}

impl Default for TransversalSeedConfig {
    fn default() -> Self {
        Self { c: 0.5, q_frac: 1.0, delta0_frac: 0.25, kappa: 0.05, steps: 20, delta_delta: default_delta_delta() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TransversalConfig {
    /// `q[axis] = c + tilt tanh(q[1 - axis])` around its crossing with the base leaf.
    Level {
        #[serde(default)]
        axis: usize,
        c: f64,
        #[serde(default)]
        tilt: f64,
        #[serde(default = "default_transversal_radius")]
        radius: f64,
    },
    /// `psi(u) = slope (u - center)` in Lyapunov coordinates.
    Line { slope: f64, center: f64, radius: f64 },
}

impl TransversalConfig {
    pub fn with_tilt(&self, t: f64) -> Self {
        match self.clone() {
            TransversalConfig::Level { axis, c, radius, .. } => TransversalConfig::Level { axis, c, tilt: t, radius },
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HolonomyConfig {
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_leaf_radius")]
    pub leaf_radius: f64,
    #[serde(default = "default_nodes")]
    pub nodes: usize,
    pub w1: TransversalConfig,
    pub w2: TransversalConfig,
    #[serde(default = "default_grid_points")]
    pub grid_points: usize,
    /// Grid half-width as a fraction of the source radius.
    #[serde(default = "default_grid_fraction")]
    pub grid_fraction: f64,
    #[serde(default = "default_depth")]
    pub depth: usize,
    #[serde(default = "default_radii")]
    pub radii: Vec<f64>,
    #[serde(default = "default_act_c")]
    pub act_c: f64,
    #[serde(default = "default_eps_c")]
    pub eps_c: f64,
    /// Tilt sweep applied to both transversals by `verify-act`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tilts: Vec<f64>,
}

fn one() -> usize {
    1
}
fn default_leaf_tol() -> f64 {
    1e-6
}
fn default_doubling_tol() -> f64 {
    0.02
}
fn default_rows() -> usize {
    50
}
fn default_horizon() -> usize {
    60
}
fn default_reach() -> f64 {
    1.0
}
fn default_nodes() -> usize {
    33
}
fn default_oracle_points() -> usize {
    21
}
fn default_delta_delta() -> f64 {
    pesin_core::manifold::DEFAULT_DELTA_DELTA
}
fn default_transversal_radius() -> f64 {
    0.2
}
fn default_leaf_radius() -> f64 {
    3.0
}
fn default_grid_points() -> usize {
    9
}
fn default_grid_fraction() -> f64 {
    0.5
}
fn default_depth() -> usize {
    pesin_core::holonomy::DEFAULT_DEPTH
}
fn default_radii() -> Vec<f64> {
    pesin_core::holonomy::DEFAULT_RADII.to_vec()
}
fn default_act_c() -> f64 {
    0.01
}
fn default_eps_c() -> f64 {
    0.1
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Usage(m) => CliError::Usage(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Parse and validate; errors name the offending line and field.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Usage(format!("invalid config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON form: field order is fixed by the
    /// struct layout and floats print in shortest round-trip form. The
    /// output directory says where results go, not what they are, so it is
    /// left out.
    pub fn hash(&self) -> String {
        let canon = serde_json::to_string(&Self { out: None, ..self.clone() }).expect("config serializes");
        hex::encode(Sha256::digest(canon.as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.scenario_spec()?.validate().map_err(|e| CliError::Usage(format!("scenario: {e}")))?;
        if let Some(p) = &self.pesin {
            self.pesin_params_from(p)?;
        }
        if let Some(s) = &self.spectrum {
            if s.horizon == 0 || s.qr_stride == 0 || s.qr_stride > s.horizon {
                return Err(CliError::Usage("spectrum: need horizon >= qr_stride >= 1".into()));
            }
        }
        if let Some(c) = &self.certificate {
            if c.lo.len() != c.hi.len() || c.points == 0 {
                return Err(CliError::Usage("certificate: lo and hi need equal lengths and points >= 1".into()));
            }
        }
        if let Some(h) = &self.holonomy {
            if h.grid_points < 2 || !(h.grid_fraction > 0.0 && h.grid_fraction <= 1.0) {
                return Err(CliError::Usage("holonomy: need grid_points >= 2 and 0 < grid_fraction <= 1".into()));
            }
            if h.radii.len() < 2 {
                return Err(CliError::Usage("holonomy: radii needs at least two entries".into()));
            }
        }
        Ok(())
    }

    pub fn scenario_spec(&self) -> Result<ScenarioSpec, CliError> {
        let mut spec = ScenarioSpec::by_name(&self.scenario.name, self.seed).or_else(|e| {
            if self.scenario.custom.is_some() {
                Ok(ScenarioSpec { name: self.scenario.name.clone(), kind: ScenarioKind::Identity { d: 2 }, seed: self.seed })
            } else {
                Err(CliError::Usage(format!("scenario: {e}")))
            }
        })?;
        if let Some(kind) = &self.scenario.custom {
            spec.kind = kind.clone();
        }
        spec.seed = self.seed;
        Ok(spec)
    }

    pub fn pesin_params(&self) -> Result<PesinParams, CliError> {
        let p = self.pesin.as_ref().ok_or_else(|| CliError::Usage("missing [pesin] section".into()))?;
        self.pesin_params_from(p)
    }

    fn pesin_params_from(&self, p: &PesinConfig) -> Result<PesinParams, CliError> {
        let d = self.scenario_spec()?.family().map_err(|e| CliError::Usage(e.to_string()))?.dim();
        let eps = match p.eps {
            Epsilon::Value(v) => v,
            Epsilon::Auto(_) => epsilon_ceiling(p.a, p.b, d).map_err(|e| CliError::Usage(format!("pesin: {e}")))?,
        };
        let params = PesinParams { a: p.a, b: p.b, k: p.k, eps, l_prime: p.l_prime, r_prime: p.r_prime, c_prime: p.c_prime };
        params.validate(d).map_err(|e| CliError::Usage(format!("pesin: {e}")))?;
        Ok(params)
    }

    pub fn section<'a, T>(&self, s: &'a Option<T>, name: &str) -> Result<&'a T, CliError> {
        s.as_ref().ok_or_else(|| CliError::Usage(format!("missing [{name}] section")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const S3: &str = r#"
seed = 3

[scenario]
name = "S3"

[pesin]
a = -0.6
b = 0.0
k = 1
eps = "auto"
l_prime = 2.0
r_prime = 1.0
c_prime = 3.0

[holonomy]
w1 = { kind = "level", c = 0.0 }
w2 = { kind = "level", c = 0.4, tilt = 0.1 }
"#;

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::parse(S3).unwrap();
        let again = ExperimentConfig::parse(&cfg.to_toml()).unwrap();
        assert_eq!(cfg, again);
        assert_eq!(cfg.hash(), again.hash());
    }

    #[test]
    fn auto_epsilon_is_the_ceiling() {
        let cfg = ExperimentConfig::parse(S3).unwrap();
        assert!((cfg.pesin_params().unwrap().eps - 0.0015).abs() < 1e-15);
    }

    #[test]
    fn unknown_keys_are_rejected_with_their_location() {
        let bad = S3.replace("k = 1", "k = 1\nkk = 2");
        let err = ExperimentConfig::parse(&bad).unwrap_err().to_string();
        assert!(err.contains("kk") && err.contains("line"), "{err}");
    }

    #[test]
    fn hash_tracks_every_field() {
        let a = ExperimentConfig::parse(S3).unwrap();
        let b = ExperimentConfig::parse(&S3.replace("seed = 3", "seed = 4")).unwrap();
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let moved = ExperimentConfig { out: Some("elsewhere".into()), ..a.clone() };
        assert_eq!(a.hash(), moved.hash());
    }

    #[test]
    fn epsilon_above_the_ceiling_is_a_config_error() {
        let bad = S3.replace("eps = \"auto\"", "eps = 0.01");
        assert!(matches!(ExperimentConfig::parse(&bad), Err(CliError::Usage(_))));
    }
}
