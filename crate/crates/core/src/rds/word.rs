//! Realized words `omega = (f_0, f_1, ...)`, the left shift and orbits.

use std::fmt;
use std::sync::{Arc, RwLock};

use super::family::MapFamily;
use super::map::Diffeo;
use crate::error::{Error, Result};
use crate::linalg::Vector;

/// Orbits leaving the sup-norm ball of this radius count as divergent.
pub const OVERFLOW_GUARD: f64 = 1e12;

#[derive(Clone)]
struct Realized {
    params: Vec<f64>,
    map: Arc<dyn Diffeo>,
}

/// A sampled word over a map family.
///
/// Entries are realized on demand and cached by absolute position, so
/// extending a word never resamples a prefix and shifted copies share the
/// cache with their parent.
#[derive(Clone)]
pub struct OmegaWord {
    family: Arc<dyn MapFamily>,
    seed: u64,
    length: usize,
    offset: usize,
    cache: Arc<RwLock<Vec<Realized>>>,
}

impl fmt::Debug for OmegaWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OmegaWord")
            .field("family", &self.family.name())
            .field("seed", &self.seed)
            .field("length", &self.length)
            .field("offset", &self.offset)
            .finish()
    }
}

impl OmegaWord {
    /// A word of declared length `length`; nothing is realized yet.
    pub fn new(family: Arc<dyn MapFamily>, seed: u64, length: usize) -> Self {
        Self { family, seed, length, offset: 0, cache: Arc::new(RwLock::new(Vec::new())) }
    }

    pub fn family(&self) -> &Arc<dyn MapFamily> {
        &self.family
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn offset(&self) -> usize {
        self.offset
    }

    pub fn dim(&self) -> usize {
        self.family.dim()
    }

    /// Same word with declared length at least `n`; realized entries are shared.
    pub fn extended(&self, n: usize) -> Self {
        let mut w = self.clone();
        w.length = w.length.max(n);
        w
    }

    /// Left shift: `shift(w).map(i) == w.map(i + 1)`.
    pub fn shift(&self) -> Self {
        self.shift_by(1)
    }

    pub fn shift_by(&self, n: usize) -> Self {
        let mut w = self.clone();
        w.offset += n;
        w.length = w.length.saturating_sub(n);
        w
    }

    fn realize_to(&self, absolute: usize) -> Result<()> {
        if self.cache.read().map(|c| c.len() > absolute).unwrap_or(false) {
            return Ok(());
        }
        let mut cache = self.cache.write().expect("word cache poisoned");
        let bounds = self.family.parameter_bounds();
        while cache.len() <= absolute {
            let index = cache.len();
            let params = self.family.sample(self.seed, index as u64);
            for (v, b) in params.iter().zip(&bounds) {
                if !b.contains(*v) {
                    return Err(Error::ParameterOutOfBounds {
                        name: b.name.clone(),
                        value: *v,
                        lo: b.lo,
                        hi: b.hi,
                        index,
                    });
                }
            }
            let map = self.family.build(&params)?;
            cache.push(Realized { params, map });
        }
        Ok(())
    }

    /// The map `f_i(omega)` relative to this word's shift.
    pub fn map(&self, i: usize) -> Result<Arc<dyn Diffeo>> {
        let abs = self.offset + i;
        self.realize_to(abs)?;
        Ok(self.cache.read().expect("word cache poisoned")[abs].map.clone())
    }

    /// Realized parameters of `f_i(omega)`.
    pub fn params(&self, i: usize) -> Result<Vec<f64>> {
        let abs = self.offset + i;
        self.realize_to(abs)?;
        Ok(self.cache.read().expect("word cache poisoned")[abs].params.clone())
    }

    /// Realized parameters of the first `len()` entries.
    pub fn realized_params(&self) -> Result<Vec<Vec<f64>>> {
        (0..self.length).map(|i| self.params(i)).collect()
    }
}

/// Draw a word of length `n`, realizing and validating every entry.
pub fn sample_word(family: Arc<dyn MapFamily>, seed: u64, n: usize) -> Result<OmegaWord> {
    let word = OmegaWord::new(family, seed, n);
    if n > 0 {
        word.realize_to(n - 1)?;
    }
    Ok(word)
}

fn diverged(x: &Vector) -> bool {
    x.iter().any(|v| !v.is_finite() || v.abs() > OVERFLOW_GUARD)
}

/// `x, f_0 x, f_1 f_0 x, ...` up to `f^n x`.
pub fn iterate(word: &OmegaWord, x: &Vector, n: usize) -> Result<Vec<Vector>> {
    if n > word.len() {
        return Err(Error::Domain(format!("word of length {} cannot be iterated {n} times", word.len())));
    }
    if x.len() != word.dim() {
        return Err(Error::DimensionMismatch { expected: word.dim(), got: x.len() });
    }
    if diverged(x) {
        return Err(Error::OrbitDivergence { index: 0, last_finite: 0 });
    }
    let mut orbit = Vec::with_capacity(n + 1);
    orbit.push(x.clone());
    for j in 0..n {
        let next = word.map(j)?.forward(&orbit[j]);
        if diverged(&next) {
            return Err(Error::OrbitDivergence { index: j + 1, last_finite: j });
        }
        orbit.push(next);
    }
    Ok(orbit)
}
