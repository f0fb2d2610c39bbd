//! Small dense linear-algebra helpers shared across the crate.
//!
//! Everything here works on `nalgebra` dynamic matrices; dimensions are
//! tiny (d <= 10) so clarity wins over blocking or BLAS calls.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Modified Gram-Schmidt with one re-orthogonalisation pass.
///
/// Returns the orthonormal factor and the diagonal of `R`. Orientation is
/// preserved (every `R` diagonal entry is non-negative). A column that
/// collapses to zero gets a zero diagonal entry and a zero column.
pub fn orthonormalize(m: &Matrix) -> (Matrix, Vec<f64>) {
    let (rows, cols) = m.shape();
    let mut q = m.clone();
    let mut diag = vec![0.0; cols];
    for j in 0..cols {
        let mut v = q.column(j).into_owned();
        for _pass in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dot(&v);
                v.axpy(-proj, &qi, 1.0);
            }
        }
        let norm = v.norm();
        diag[j] = norm;
        if norm > 0.0 && norm.is_finite() {
            q.set_column(j, &(v / norm));
        } else {
            q.set_column(j, &Vector::zeros(rows));
        }
    }
    (q, diag)
}

/// Orthonormal basis of the span of the columns (same as [`orthonormalize`]
/// without the diagonal).
pub fn orth(m: &Matrix) -> Matrix {
    orthonormalize(m).0
}

pub fn singular_values(m: &Matrix) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

/// Operator 2-norm.
pub fn spectral_norm(m: &Matrix) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value, i.e. `min |M v|` over unit `v`.
pub fn min_singular_value(m: &Matrix) -> f64 {
    singular_values(m).last().copied().unwrap_or(0.0)
}

/// Orthonormal basis of the orthogonal complement of the column span of an
/// orthonormal `q`.
pub fn orth_complement(q: &Matrix) -> Matrix {
    let d = q.nrows();
    let k = q.ncols();
    let mut stacked = Matrix::zeros(d, k + d);
    stacked.columns_mut(0, k).copy_from(q);
    stacked.columns_mut(k, d).copy_from(&Matrix::identity(d, d));
    let (full, diag) = orthonormalize(&stacked);
    let mut out = Vec::with_capacity(d - k);
    for j in k..k + d {
        if diag[j] > 1e-8 && out.len() < d - k {
            out.push(full.column(j).into_owned());
        }
    }
    Matrix::from_columns(&out)
}

/// Cosines of the principal angles between the spans of two orthonormal
/// bases, largest first.
pub fn principal_cosines(q1: &Matrix, q2: &Matrix) -> Vec<f64> {
    let m = q1.transpose() * q2;
    singular_values(&m).into_iter().map(|c| c.clamp(0.0, 1.0)).collect()
}

/// The angle `inf arccos <u, v>` over unit `u` in `E`, `v` in `F`
/// (the smallest principal angle).
pub fn subspace_angle(e: &Matrix, f: &Matrix) -> Result<f64> {
    if e.ncols() == 0 || f.ncols() == 0 {
        return Err(Error::Domain("subspace angle of a zero-dimensional subspace".into()));
    }
    if e.nrows() != f.nrows() {
        return Err(Error::DimensionMismatch {
            expected: e.nrows(),
            got: f.nrows(),
        });
    }
    let qe = orth(e);
    let qf = orth(f);
    let c = principal_cosines(&qe, &qf).first().copied().unwrap_or(0.0);
    Ok(c.acos())
}

/// `sup_{u in E1, |u| = 1} dist(u, E2)` for arbitrary spanning sets.
pub fn aperture(e1: &Matrix, e2: &Matrix) -> Result<f64> {
    if e1.ncols() != e2.ncols() {
        return Err(Error::Domain(format!(
            "aperture needs equal dimensions, got {} and {}",
            e1.ncols(),
            e2.ncols()
        )));
    }
    if e1.nrows() != e2.nrows() {
        return Err(Error::DimensionMismatch {
            expected: e1.nrows(),
            got: e2.nrows(),
        });
    }
    let q1 = orth(e1);
    let q2 = orth(e2);
    let d = q1.nrows();
    let resid = (Matrix::identity(d, d) - &q2 * q2.transpose()) * q1;
    Ok(spectral_norm(&resid).min(1.0))
}

/// Volume expansion of `a` restricted to the span of the columns of `e`:
/// the product of the singular values of `a` composed with an orthonormal
/// basis of `e`.
pub fn restricted_det(a: &Matrix, e: &Matrix) -> f64 {
    let q = orth(e);
    singular_values(&(a * q)).iter().product()
}

/// Solve `m x = b`; fails on a numerically singular `m`.
pub fn solve(m: &Matrix, b: &Vector) -> Result<Vector> {
    m.clone()
        .lu()
        .solve(b)
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Domain("singular linear system".into()))
}

pub fn inverse(m: &Matrix) -> Result<Matrix> {
    m.clone()
        .try_inverse()
        .filter(|x| x.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Domain("singular matrix".into()))
}

/// Radical inverse of `index` in `base` (van der Corput / Halton component).
pub fn radical_inverse(mut index: u64, base: u64) -> f64 {
    let mut result = 0.0;
    let mut f = 1.0 / base as f64;
    while index > 0 {
        result += f * (index % base) as f64;
        index /= base;
        f /= base as f64;
    }
    result
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// `count` quasi-random unit directions in `R^d`.
///
/// In the plane these are van der Corput angles (the first eight are the
/// multiples of pi/4); in higher dimension Halton points are pushed through
/// the Box-Muller-free normalisation of a cube sample.
pub fn quasi_random_directions(d: usize, count: usize) -> Vec<Vector> {
    let mut out = Vec::with_capacity(count);
    if d == 1 {
        for i in 0..count {
            out.push(Vector::from_element(1, if i % 2 == 0 { 1.0 } else { -1.0 }));
        }
        return out;
    }
    if d == 2 {
        for i in 0..count {
            let t = 2.0 * std::f64::consts::PI * radical_inverse(i as u64, 2);
            out.push(Vector::from_vec(vec![t.cos(), t.sin()]));
        }
        return out;
    }
    let mut i = 1u64;
    while out.len() < count {
        let v = Vector::from_iterator(d, (0..d).map(|j| 2.0 * radical_inverse(i, PRIMES[j % PRIMES.len()]) - 1.0));
        let n = v.norm();
        if n > 1e-3 {
            out.push(v / n);
        }
        i += 1;
    }
    out
}

/// `count` quasi-random points in the closed ball of radius `radius`.
pub fn quasi_random_ball(d: usize, count: usize, radius: f64) -> Vec<Vector> {
    let mut out = vec![Vector::zeros(d)];
    let mut i = 1u64;
    while out.len() < count {
        let v = Vector::from_iterator(d, (0..d).map(|j| 2.0 * radical_inverse(i, PRIMES[j % PRIMES.len()]) - 1.0));
        if v.norm() <= 1.0 {
            out.push(v * radius);
        }
        i += 1;
    }
    out
}

/// Determinant of the square matrix obtained by stacking column blocks.
pub fn block_det(blocks: &[&Matrix]) -> f64 {
    let cols: Vec<Vector> = blocks
        .iter()
        .flat_map(|b| b.column_iter().map(|c| c.into_owned()).collect::<Vec<_>>())
        .collect();
    Matrix::from_columns(&cols).determinant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn span(v: &[f64]) -> Matrix {
        Matrix::from_column_slice(v.len(), 1, v)
    }

    #[test]
    fn angles_in_the_plane() {
        let e1 = span(&[1.0, 0.0]);
        let e2 = span(&[0.0, 1.0]);
        let diag = span(&[1.0, 1.0]);
        assert_eq!(subspace_angle(&e1, &e1).unwrap(), 0.0);
        assert_relative_eq!(subspace_angle(&e1, &e2).unwrap(), std::f64::consts::FRAC_PI_2, epsilon = 1e-15);
        assert_relative_eq!(subspace_angle(&e1, &diag).unwrap(), std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
    }

    #[test]
    fn zero_dimensional_angle_is_a_domain_error() {
        let e1 = span(&[1.0, 0.0]);
        let empty = Matrix::zeros(2, 0);
        assert!(matches!(subspace_angle(&e1, &empty), Err(Error::Domain(_))));
    }

    #[test]
    fn restricted_determinants() {
        let id = Matrix::identity(2, 2);
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 3.0]));
        assert_relative_eq!(restricted_det(&id, &span(&[0.3, -0.7])), 1.0, epsilon = 1e-15);
        assert_relative_eq!(restricted_det(&a, &span(&[1.0, 0.0])), 2.0, epsilon = 1e-15);
        // |(2, 3)| / sqrt 2 computed directly
        let direct = (2.0f64 * 2.0 + 3.0 * 3.0).sqrt() / 2f64.sqrt();
        assert_relative_eq!(restricted_det(&a, &span(&[1.0, 1.0])), direct, epsilon = 1e-14);
        assert_relative_eq!(direct, (13.0f64 / 2.0).sqrt(), epsilon = 1e-15);
    }

    #[test]
    fn aperture_values() {
        let e1 = span(&[1.0, 0.0]);
        let e2 = span(&[0.0, 1.0]);
        assert_eq!(aperture(&e1, &e1).unwrap(), 0.0);
        assert_relative_eq!(aperture(&e1, &e2).unwrap(), 1.0, epsilon = 1e-15);
        let plane = Matrix::identity(3, 2);
        assert!(matches!(aperture(&plane, &span(&[1.0, 0.0, 0.0])), Err(Error::Domain(_))));
    }

    #[test]
    fn complement_is_orthogonal() {
        let q = orth(&span(&[1.0, 2.0, 2.0]));
        let c = orth_complement(&q);
        assert_eq!(c.ncols(), 2);
        assert!((q.transpose() * &c).norm() < 1e-14);
        assert!((c.transpose() * &c - Matrix::identity(2, 2)).norm() < 1e-14);
    }

    #[test]
    fn mgs_keeps_orientation() {
        let m = Matrix::from_row_slice(2, 2, &[3.0, 1.0, 4.0, 2.0]);
        let (q, r) = orthonormalize(&m);
        assert!(r.iter().all(|&x| x > 0.0));
        assert!(q.column(0).dot(&m.column(0)) > 0.0);
    }

    #[test]
    fn planar_directions_start_on_axes() {
        let dirs = quasi_random_directions(2, 8);
        assert_relative_eq!(dirs[0][0], 1.0);
        assert_relative_eq!(dirs[2][1], 1.0, epsilon = 1e-15);
    }
}
