//! Empirical integrability checks on the derivative of a map family.

use serde::{Deserialize, Serialize};

use super::family::MapFamily;
use super::map::sampled_second_derivative;
use super::word::OVERFLOW_GUARD;
use crate::error::{Error, Result};
use crate::linalg::{spectral_norm, Vector};

/// `log 0` is reported as this value.
pub const LOG_FLOOR: f64 = -50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleStats {
    pub mean: f64,
    pub std_error: f64,
}

impl SampleStats {
    fn from(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        Self { mean, std_error: (var / n).sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub samples: usize,
    /// `log+ |D_x f|`
    pub log_plus_df: SampleStats,
    /// `log sup_{|v| <= 1} |D^2_{x+v} f|`, clamped below at [`LOG_FLOOR`]
    pub log_d2f: SampleStats,
    /// `log+ |D_{f x} f^{-1}|`
    pub log_plus_dfinv: SampleStats,
    pub log_floor_engaged: bool,
    pub overflow: bool,
    /// A derivative sample was non-finite and was dropped.
    pub violation: bool,
}

/// Sample `(f, x)` pairs with `f` from the family under `seed` and `x` from
/// `mu`, and estimate the three integrability means.
pub fn validate_assumptions<M>(family: &dyn MapFamily, mu: M, seed: u64, budget: usize) -> Result<AssumptionReport>
where
    M: Fn(u64) -> Vector,
{
    if budget == 0 {
        return Err(Error::Domain("sample budget must be at least 1".into()));
    }
    let mut df = Vec::with_capacity(budget);
    let mut d2 = Vec::with_capacity(budget);
    let mut dinv = Vec::with_capacity(budget);
    let mut floor = false;
    let mut overflow = false;
    let mut violation = false;
    for i in 0..budget as u64 {
        let f = family.build(&family.sample(seed, i))?;
        let x = mu(i);
        let j = spectral_norm(&f.jacobian(&x));
        let ji = spectral_norm(&f.inverse_jacobian(&f.forward(&x)));
        let h = f
            .second_derivative_bound(&x, 1.0)
            .unwrap_or_else(|| sampled_second_derivative(f.as_ref(), &x, 1.0, 16));
        if !(j.is_finite() && ji.is_finite() && h.is_finite()) {
            violation = true;
            continue;
        }
        if j > OVERFLOW_GUARD || ji > OVERFLOW_GUARD || h > OVERFLOW_GUARD {
            overflow = true;
        }
        df.push(j.ln().max(0.0));
        dinv.push(ji.ln().max(0.0));
        let lh = if h > 0.0 { h.ln() } else { LOG_FLOOR };
        if lh <= LOG_FLOOR {
            floor = true;
        }
        d2.push(lh.max(LOG_FLOOR));
    }
    if df.is_empty() {
        return Err(Error::Domain("every derivative sample was non-finite".into()));
    }
    Ok(AssumptionReport {
        samples: df.len(),
        log_plus_df: SampleStats::from(&df),
        log_d2f: SampleStats::from(&d2),
        log_plus_dfinv: SampleStats::from(&dinv),
        log_floor_engaged: floor,
        overflow,
        violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::family::{IidDiagFamily, LinearFamily};

    #[test]
    fn constant_diagonal_report() {
        let fam = LinearFamily::diagonal("s1", &[2.0, 0.5]).unwrap();
        let r = validate_assumptions(&fam, |i| Vector::from_vec(vec![i as f64, 1.0]), 0, 20).unwrap();
        assert!((r.log_plus_df.mean - 2f64.ln()).abs() < 1e-15);
        assert_eq!(r.log_plus_df.std_error, 0.0);
        assert_eq!(r.log_d2f.mean, LOG_FLOOR);
        assert!(r.log_floor_engaged);
        assert!(!r.overflow && !r.violation);
    }

    #[test]
    fn iid_diagonal_mean() {
        let fam = IidDiagFamily::new("s2", vec![(0.25, 0.75), (1.5, 3.0)]).unwrap();
        let r = validate_assumptions(&fam, |_| Vector::zeros(2), 42, 4000).unwrap();
        let expect = fam.mean_log(1);
        assert!((r.log_plus_df.mean - expect).abs() < 3.0 * r.log_plus_df.std_error);
        // |D f^{-1}| = 1/a, so log+ = -log a
        assert!((r.log_plus_dfinv.mean + fam.mean_log(0)).abs() < 3.0 * r.log_plus_dfinv.std_error);
    }

    #[test]
    fn zero_budget_rejected() {
        let fam = LinearFamily::diagonal("s1", &[2.0, 0.5]).unwrap();
        assert!(validate_assumptions(&fam, |_| Vector::zeros(2), 0, 0).is_err());
    }
}
