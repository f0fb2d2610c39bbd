//! Maps centered along a reference trajectory:
//! `F_n(v) = f_n(f^n x + v) - f^{n+1} x`.

use super::word::{iterate, OmegaWord};
use crate::error::{Error, Result};
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone)]
pub struct CenteredFrame {
    word: OmegaWord,
    orbit: Vec<Vector>,
    radius: f64,
}

impl CenteredFrame {
    /// Frame along the orbit of `x` for indices `0..=horizon`; centered maps
    /// are defined for `n < horizon`.
    pub fn new(word: &OmegaWord, x: &Vector, horizon: usize) -> Result<Self> {
        let word = word.extended(horizon);
        let orbit = iterate(&word, x, horizon)?;
        Ok(Self { word, orbit, radius: f64::INFINITY })
    }

    /// Restrict the domain of every centered map to `|v| <= radius`.
    pub fn with_radius(mut self, radius: f64) -> Self {
        self.radius = radius;
        self
    }

    pub fn word(&self) -> &OmegaWord {
        &self.word
    }

    pub fn horizon(&self) -> usize {
        self.orbit.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.orbit[0].len()
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// `f^n x`.
    pub fn point(&self, n: usize) -> &Vector {
        &self.orbit[n]
    }

    pub fn orbit(&self) -> &[Vector] {
        &self.orbit
    }

    fn check(&self, n: usize, v: &Vector) -> Result<()> {
        if n >= self.horizon() {
            return Err(Error::Domain(format!("index {n} beyond frame horizon {}", self.horizon())));
        }
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: v.len() });
        }
        if v.norm() > self.radius {
            return Err(Error::Domain(format!("|v| = {} exceeds frame radius {}", v.norm(), self.radius)));
        }
        Ok(())
    }

    /// `F_n(v)`; exactly `0` at `v = 0`.
    pub fn apply(&self, n: usize, v: &Vector) -> Result<Vector> {
        self.check(n, v)?;
        if v.iter().all(|&c| c == 0.0) {
            return Ok(Vector::zeros(v.len()));
        }
        let out = self.word.map(n)?.increment(&self.orbit[n], v);
        if out.iter().any(|c| !c.is_finite()) {
            return Err(Error::OrbitDivergence { index: n + 1, last_finite: n });
        }
        Ok(out)
    }

    /// `D_v F_n`.
    pub fn derivative(&self, n: usize, v: &Vector) -> Result<Matrix> {
        self.check(n, v)?;
        Ok(self.word.map(n)?.jacobian(&(&self.orbit[n] + v)))
    }

    /// `F_n^{-1}(w) = f_n^{-1}(f^{n+1} x + w) - f^n x`.
    pub fn inverse(&self, n: usize, w: &Vector) -> Result<Vector> {
        if n >= self.horizon() {
            return Err(Error::Domain(format!("index {n} beyond frame horizon {}", self.horizon())));
        }
        if w.iter().all(|&c| c == 0.0) {
            return Ok(Vector::zeros(w.len()));
        }
        let f = self.word.map(n)?;
        // anchor the increment at the exact preimage of the next orbit point
        let back = f.inverse(&self.orbit[n + 1]) - &self.orbit[n];
        Ok(f.inverse_increment(&self.orbit[n + 1], w) + back)
    }

    /// `D_w F_n^{-1}`.
    pub fn inverse_derivative(&self, n: usize, w: &Vector) -> Result<Matrix> {
        if n >= self.horizon() {
            return Err(Error::Domain(format!("index {n} beyond frame horizon {}", self.horizon())));
        }
        Ok(self.word.map(n)?.inverse_jacobian(&(&self.orbit[n + 1] + w)))
    }

    /// Difference quotient `(D F_n(v + h u) - D F_n(v - h u)) / 2h`, a probe
    /// of the second derivative along `u`.
    pub fn second_derivative_probe(&self, n: usize, v: &Vector, u: &Vector, h: f64) -> Result<Matrix> {
        self.check(n, v)?;
        let f = self.word.map(n)?;
        let p = &self.orbit[n] + v;
        Ok((f.jacobian(&(&p + u * h)) - f.jacobian(&(&p - u * h))) / (2.0 * h))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::family::{LinearFamily, SkewFamily};
    use crate::rds::word::sample_word;
    use std::sync::Arc;

    fn s3() -> OmegaWord {
        let fam = SkewFamily::new("s3", (0.5, 0.5), (2.0, 2.0), (1.0, 1.0)).unwrap();
        sample_word(Arc::new(fam), 0, 10).unwrap()
    }

    #[test]
    fn centering_fixes_origin() {
        let f = CenteredFrame::new(&s3(), &Vector::from_vec(vec![0.7, -0.2]), 5).unwrap();
        assert_eq!(f.apply(3, &Vector::zeros(2)).unwrap(), Vector::zeros(2));
    }

    #[test]
    fn linear_map_is_its_own_centered_form() {
        let fam = LinearFamily::diagonal("s1", &[2.0, 0.5]).unwrap();
        let w = sample_word(Arc::new(fam), 0, 4).unwrap();
        let f = CenteredFrame::new(&w, &Vector::from_vec(vec![3.0, 1.0]), 4).unwrap();
        let out = f.apply(2, &Vector::from_vec(vec![1.0, 1.0])).unwrap();
        assert_eq!(out, Vector::from_vec(vec![2.0, 0.5]));
    }

    #[test]
    fn skew_centered_at_origin() {
        let f = CenteredFrame::new(&s3(), &Vector::zeros(2), 2).unwrap();
        let out = f.apply(0, &Vector::from_vec(vec![1.0, 0.0])).unwrap();
        let oracle = Vector::from_vec(vec![0.5, 1f64.sin()]);
        assert!((out - oracle).norm() < 1e-15);
    }

    #[test]
    fn radius_is_enforced() {
        let f = CenteredFrame::new(&s3(), &Vector::zeros(2), 2).unwrap().with_radius(0.5);
        assert!(matches!(f.apply(0, &Vector::from_vec(vec![1.0, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn inverse_undoes_forward() {
        let f = CenteredFrame::new(&s3(), &Vector::from_vec(vec![1.3, 0.4]), 6).unwrap();
        for n in 0..6 {
            let v = Vector::from_vec(vec![0.2 * n as f64 - 0.5, 0.1]);
            let back = f.inverse(n, &f.apply(n, &v).unwrap()).unwrap();
            assert!((back - v).norm() < 1e-12);
        }
    }
}
