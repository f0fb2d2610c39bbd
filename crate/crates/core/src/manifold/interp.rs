//! Piecewise Chebyshev-Lobatto interpolation on tensor grids.

use crate::linalg::{Matrix, Vector};

/// One axis: `pieces` panels of degree `degree` sharing end nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct Axis {
    lo: f64,
    hi: f64,
    pieces: usize,
    degree: usize,
    nodes: Vec<f64>,
    bary: Vec<f64>,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, pieces: usize, degree: usize) -> Self {
        assert!(pieces >= 1 && degree >= 1 && hi > lo);
        let width = (hi - lo) / pieces as f64;
        let mut nodes = Vec::with_capacity(pieces * degree + 1);
        for p in 0..pieces {
            let a = lo + p as f64 * width;
            let start = if p == 0 { 0 } else { 1 };
            for j in start..=degree {
                let t = 0.5 * (1.0 - (std::f64::consts::PI * j as f64 / degree as f64).cos());
                nodes.push(if j == degree { a + width } else { a + width * t });
            }
        }
        *nodes.last_mut().unwrap() = hi;
        let bary = (0..=degree)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == degree { 0.5 * s } else { s }
            })
            .collect();
        Self { lo, hi, pieces, degree, nodes, bary }
    }

    /// `m` nodes split into panels of degree 8 when possible.
    pub fn with_nodes(lo: f64, hi: f64, m: usize) -> Self {
        let m = m.max(2);
        if (m - 1) % 8 == 0 {
            Self::new(lo, hi, (m - 1) / 8, 8)
        } else {
            Self::new(lo, hi, 1, m - 1)
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    /// Midpoints between consecutive nodes.
    pub fn midpoints(&self) -> Vec<f64> {
        self.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    fn piece(&self, t: f64) -> usize {
        let width = (self.hi - self.lo) / self.pieces as f64;
        (((t - self.lo) / width).floor().max(0.0) as usize).min(self.pieces - 1)
    }

    /// Basis values and derivatives at `t` as `(global index, l, l')`.
    pub fn basis(&self, t: f64) -> Vec<(usize, f64, f64)> {
        let p = self.piece(t);
        let first = p * self.degree;
        let xs = &self.nodes[first..=first + self.degree];
        let scale = (xs[self.degree] - xs[0]).abs();
        if let Some(m) = xs.iter().position(|&x| (t - x).abs() <= 1e-14 * scale) {
            // at a node: value is the Kronecker delta, derivative from the
            // differentiation matrix row
            let mut out = Vec::with_capacity(xs.len());
            let mut diag = 0.0;
            for j in 0..xs.len() {
                if j != m {
                    let d = (self.bary[j] / self.bary[m]) / (xs[m] - xs[j]);
                    diag -= d;
                    out.push((first + j, 0.0, d));
                }
            }
            out.push((first + m, 1.0, diag));
            return out;
        }
        let c: Vec<f64> = xs.iter().zip(&self.bary).map(|(x, w)| w / (t - x)).collect();
        let s: f64 = c.iter().sum();
        let l: Vec<f64> = c.iter().map(|v| v / s).collect();
        // l_j' = l_j (sum_k l_k / (t - x_k) - 1 / (t - x_j)); with sum_k l_k = 1
        // the difference is regrouped term by term, which stays accurate
        // when t is a hair away from a node
        (0..xs.len())
            .map(|j| {
                let d: f64 = (0..xs.len())
                    .filter(|&k| k != j)
                    .map(|k| l[k] * (xs[k] - xs[j]) / ((t - xs[k]) * (t - xs[j])))
                    .sum();
                (first + j, l[j], l[j] * d)
            })
            .collect()
    }
}

/// Tensor product of axes; values are vectors stored in row-major node order
/// (last axis fastest).
#[derive(Debug, Clone, PartialEq)]
pub struct TensorGrid {
    axes: Vec<Axis>,
}

impl TensorGrid {
    pub fn new(axes: Vec<Axis>) -> Self {
        Self { axes }
    }

    /// Box `center +- radius` per axis with `m` nodes each.
    pub fn cube(center: &Vector, radius: f64, m: usize) -> Self {
        Self::new(center.iter().map(|&c| Axis::with_nodes(c - radius, c + radius, m)).collect())
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Axis::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.axes.len()];
        for (i, ax) in self.axes.iter().enumerate().rev() {
            idx[i] = flat % ax.len();
            flat /= ax.len();
        }
        idx
    }

    fn flat(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.axes).fold(0, |acc, (&i, ax)| acc * ax.len() + i)
    }

    pub fn node(&self, flat: usize) -> Vector {
        let idx = self.multi_index(flat);
        Vector::from_iterator(self.axes.len(), idx.iter().zip(&self.axes).map(|(&i, ax)| ax.nodes()[i]))
    }

    pub fn nodes(&self) -> Vec<Vector> {
        (0..self.len()).map(|i| self.node(i)).collect()
    }

    /// Points between nodes (tensor product of axis midpoints).
    pub fn midpoints(&self) -> Vec<Vector> {
        let mids: Vec<Vec<f64>> = self.axes.iter().map(Axis::midpoints).collect();
        let sub = TensorGrid::new(
            mids.iter()
                .map(|m| {
                    let mut a = Axis::new(0.0, 1.0, 1, 1);
                    a.nodes = m.clone();
                    a
                })
                .collect(),
        );
        sub.nodes()
    }

    /// Interpolated value and Jacobian (`values[0].len()` by `dim`).
    pub fn eval(&self, values: &[Vector], u: &Vector) -> (Vector, Matrix) {
        let k = values[0].len();
        let p = self.axes.len();
        let bases: Vec<Vec<(usize, f64, f64)>> = self.axes.iter().zip(u.iter()).map(|(ax, &t)| ax.basis(t)).collect();
        let mut val = Vector::zeros(k);
        let mut jac = Matrix::zeros(k, p);
        let mut counters = vec![0usize; p];
        loop {
            let idx: Vec<usize> = counters.iter().zip(&bases).map(|(&c, b)| b[c].0).collect();
            let f = &values[self.flat(&idx)];
            let w: f64 = counters.iter().zip(&bases).map(|(&c, b)| b[c].1).product();
            val += f * w;
            for a in 0..p {
                let mut wd = 1.0;
                for (i, (&c, b)) in counters.iter().zip(&bases).enumerate() {
                    wd *= if i == a { b[c].2 } else { b[c].1 };
                }
                if wd != 0.0 {
                    let mut col = jac.column_mut(a);
                    col += f * wd;
                }
            }
            // odometer over the local stencils
            let mut i = p;
            loop {
                if i == 0 {
                    return (val, jac);
                }
                i -= 1;
                counters[i] += 1;
                if counters[i] < bases[i].len() {
                    break;
                }
                counters[i] = 0;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_polynomials_and_derivatives() {
        let ax = Axis::with_nodes(-1.0, 2.0, 17);
        assert_eq!(ax.len(), 17);
        let g = TensorGrid::new(vec![ax]);
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t.powi(5);
        let vals: Vec<Vector> = g.nodes().iter().map(|n| Vector::from_element(1, f(n[0]))).collect();
        for t in [-1.0, -0.37, 0.5, 1.13, 2.0] {
            let (v, j) = g.eval(&vals, &Vector::from_element(1, t));
            assert!((v[0] - f(t)).abs() < 1e-12);
            assert!((j[(0, 0)] - (-2.0 + 2.5 * t.powi(4))).abs() < 1e-9);
        }
    }

    #[test]
    fn smooth_function_to_high_accuracy() {
        let g = TensorGrid::cube(&Vector::from_element(1, 0.0), 1.2, 17);
        let vals: Vec<Vector> = g.nodes().iter().map(|n| Vector::from_element(1, n[0].sin())).collect();
        for i in 0..50 {
            let t = -1.2 + 2.4 * i as f64 / 49.0;
            let (v, _) = g.eval(&vals, &Vector::from_element(1, t));
            assert!((v[0] - t.sin()).abs() < 1e-9);
        }
    }

    #[test]
    fn tensor_product_in_two_dimensions() {
        let g = TensorGrid::cube(&Vector::from_vec(vec![0.0, 0.0]), 1.0, 9);
        let f = |p: &Vector| 1.0 + p[0] * p[1] - p[1].powi(3);
        let vals: Vec<Vector> = g.nodes().iter().map(|n| Vector::from_element(1, f(n))).collect();
        let p = Vector::from_vec(vec![0.3, -0.7]);
        let (v, j) = g.eval(&vals, &p);
        assert!((v[0] - f(&p)).abs() < 1e-12);
        assert!((j[(0, 0)] - p[1]).abs() < 1e-10);
        assert!((j[(0, 1)] - (p[0] - 3.0 * p[1] * p[1])).abs() < 1e-10);
    }

    #[test]
    fn derivative_is_stable_just_off_a_node() {
        let g = TensorGrid::cube(&Vector::from_element(1, -0.0047), 0.2, 33);
        let vals: Vec<Vector> = g.nodes().iter().map(|n| Vector::from_element(1, 1.5 * n[0] + 0.25)).collect();
        let node = g.nodes()[16][0];
        for off in [0.0, 1e-16, 3e-14, 1e-12, 1e-10, 1e-8] {
            let (_, j) = g.eval(&vals, &Vector::from_element(1, node + off));
            assert!((j[(0, 0)] - 1.5).abs() < 1e-11, "offset {off}: {}", j[(0, 0)]);
        }
    }
}
