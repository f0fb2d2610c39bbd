//! Tangent cocycle `T^l_n(omega, x) = D f^l_n(omega)` at `f^n x`.

use super::word::{iterate, OmegaWord};
use crate::error::Result;
use crate::linalg::{Matrix, Vector};

#[derive(Debug, Clone, PartialEq)]
pub struct CocycleBlock {
    pub base_point: Vector,
    pub start: usize,
    pub length: usize,
    pub matrix: Matrix,
}

/// Product `J_{n+l-1} ... J_n` of step Jacobians along the orbit of `x`.
pub fn cocycle_block(word: &OmegaWord, x: &Vector, n: usize, l: usize) -> Result<CocycleBlock> {
    let orbit = iterate(word, x, n + l)?;
    let d = x.len();
    let mut m = Matrix::identity(d, d);
    for j in n..n + l {
        m = word.map(j)?.jacobian(&orbit[j]) * m;
    }
    Ok(CocycleBlock { base_point: x.clone(), start: n, length: l, matrix: m })
}

/// Step Jacobians `J_j = D f_j(omega)` at `orbit[j]` for `j < orbit.len() - 1`.
pub fn step_jacobians(word: &OmegaWord, orbit: &[Vector]) -> Result<Vec<Matrix>> {
    (0..orbit.len().saturating_sub(1))
        .map(|j| Ok(word.map(j)?.jacobian(&orbit[j])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::family::{LinearFamily, SkewFamily};
    use crate::rds::word::sample_word;
    use std::sync::Arc;

    #[test]
    fn empty_block_is_identity() {
        let fam = SkewFamily::new("s3", (0.5, 0.5), (2.0, 2.0), (1.0, 1.0)).unwrap();
        let w = sample_word(Arc::new(fam), 0, 4).unwrap();
        let b = cocycle_block(&w, &Vector::from_vec(vec![0.3, 0.1]), 2, 0).unwrap();
        assert_eq!(b.matrix, Matrix::identity(2, 2));
    }

    #[test]
    fn diagonal_power() {
        let fam = LinearFamily::diagonal("s1", &[2.0, 0.5]).unwrap();
        let w = sample_word(Arc::new(fam), 0, 3).unwrap();
        let b = cocycle_block(&w, &Vector::from_vec(vec![5.0, -1.0]), 0, 3).unwrap();
        assert_eq!(b.matrix, Matrix::from_row_slice(2, 2, &[8.0, 0.0, 0.0, 0.125]));
    }

    #[test]
    fn skew_single_step() {
        let fam = SkewFamily::new("s3", (0.5, 0.5), (2.0, 2.0), (1.0, 1.0)).unwrap();
        let w = sample_word(Arc::new(fam), 0, 1).unwrap();
        let b = cocycle_block(&w, &Vector::from_vec(vec![1.0, 0.0]), 0, 1).unwrap();
        assert_eq!(b.matrix, Matrix::from_row_slice(2, 2, &[0.5, 0.0, 1f64.cos(), 2.0]));
    }
}
