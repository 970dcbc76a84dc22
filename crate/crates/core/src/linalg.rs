//! Small dense linear algebra: row-major matrices and a Cholesky factorization
//! with forward-mode sensitivities.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from row-major data. Panics if the length is wrong.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "row-major data has wrong length");
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [T] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn add_diagonal(&mut self, v: T) {
        let n = self.rows.min(self.cols);
        for i in 0..n {
            self[(i, i)] += v;
        }
    }

    pub fn mul_vec(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), v)).collect()
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols
            && (0..self.rows)
                .all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl<T> Index<(usize, usize)> for Matrix<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Matrix<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// Inner product over the common prefix of `a` and `b`, with four partial sums.
#[inline]
pub fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    let mut acc = [T::zero(); 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let (ra, rb) = (ca.remainder(), cb.remainder());
    for (x, y) in ca.zip(cb) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = T::zero();
    for (&x, &y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Lower-triangular Cholesky factor `A = L Lᵀ` of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky<T> {
    n: usize,
    // full n×n storage, strictly upper part is zero
    l: Vec<T>,
}

impl<T: Real> Cholesky<T> {
    /// Factorizes `a`, reading only its lower triangle.
    pub fn new(a: &Matrix<T>) -> Result<Self> {
        let n = a.rows();
        if n != a.cols() {
            return Err(Error::InvalidInput(format!(
                "cannot factor a {}x{} matrix",
                a.rows(),
                a.cols()
            )));
        }
        let mut l = vec![T::zero(); n * n];
        // pivots at rounding level relative to the diagonal count as singular
        let floor = T::epsilon() * T::lit(n as f64);
        for i in 0..n {
            for j in 0..=i {
                let (ri, rj) = (i * n, j * n);
                let s = dot(&l[ri..ri + j], &l[rj..rj + j]);
                if i == j {
                    let d = a[(i, i)] - s;
                    if !(d > floor * a[(i, i)].abs()) || !d.is_finite() {
                        return Err(Error::CholeskyFailure { order: n });
                    }
                    l[ri + i] = d.sqrt();
                } else {
                    l[ri + j] = (a[(i, j)] - s) / l[rj + j];
                }
            }
        }
        Ok(Self { n, l })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l(&self, i: usize, j: usize) -> T {
        self.l[i * self.n + j]
    }

    pub fn factor(&self) -> Matrix<T> {
        Matrix::from_row_major(self.n, self.n, self.l.clone())
    }

    /// Solves `L x = b` in place.
    pub fn solve_lower_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let row = &self.l[i * n..i * n + i];
            let s = dot(row, &b[..i]);
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    /// Solves `Lᵀ x = b` in place.
    pub fn solve_upper_in_place(&self, b: &mut [T]) {
        let n = self.n;
        for i in (0..n).rev() {
            let mut s = T::zero();
            for k in i + 1..n {
                s += self.l[k * n + i] * b[k];
            }
            b[i] = (b[i] - s) / self.l[i * n + i];
        }
    }

    pub fn solve_lower(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        x
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[T]) -> Vec<T> {
        let mut x = b.to_vec();
        self.solve_lower_in_place(&mut x);
        self.solve_upper_in_place(&mut x);
        x
    }

    /// `L z`.
    pub fn lower_mul(&self, z: &[T]) -> Vec<T> {
        let n = self.n;
        (0..n)
            .map(|i| dot(&self.l[i * n..i * n + i + 1], &z[..i + 1]))
            .collect()
    }

    /// `Lᵀ v`.
    pub fn upper_mul(&self, v: &[T]) -> Vec<T> {
        let n = self.n;
        let mut out = vec![T::zero(); n];
        for i in 0..n {
            for k in 0..=i {
                out[k] += self.l[i * n + k] * v[i];
            }
        }
        out
    }

    pub fn log_det(&self) -> T {
        let two = T::lit(2.0);
        (0..self.n).map(|i| self.l[i * self.n + i].ln()).sum::<T>() * two
    }

    /// Explicit `A⁻¹`. Only for gradient traces; predictions go through solves.
    pub fn inverse(&self) -> Matrix<T> {
        let n = self.n;
        // row j of `m` holds column j of L⁻¹, which is zero before entry j
        let mut m = vec![T::zero(); n * n];
        for j in 0..n {
            let col = &mut m[j * n..(j + 1) * n];
            col[j] = T::one() / self.l[j * n + j];
            for i in j + 1..n {
                let s = dot(&self.l[i * n + j..i * n + i], &col[j..i]);
                col[i] = -s / self.l[i * n + i];
            }
        }
        // A⁻¹ = L⁻ᵀ L⁻¹, entry (i, j) = Σ_k L⁻¹[k][i] L⁻¹[k][j] for k ≥ max(i, j)
        let mut inv = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let s = dot(&m[i * n + i..(i + 1) * n], &m[j * n + i..(j + 1) * n]);
                inv[(i, j)] = s;
                inv[(j, i)] = s;
            }
        }
        inv
    }

    /// Forward-mode sensitivity `dL` of the factor for a symmetric perturbation `dA`.
    pub fn sensitivity(&self, da: &Matrix<T>) -> Matrix<T> {
        let n = self.n;
        let two = T::lit(2.0);
        let mut dl = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let (li, lj) = (&self.l[i * n..i * n + j], &self.l[j * n..j * n + j]);
                let s = dot(&dl.row(i)[..j], lj) + dot(li, &dl.row(j)[..j]);
                if i == j {
                    dl[(i, i)] = (da[(i, i)] - s) / (two * self.l(i, i));
                } else {
                    dl[(i, j)] = (da[(i, j)] - s - self.l(i, j) * dl[(j, j)]) / self.l(j, j);
                }
            }
        }
        dl
    }

    /// Reverse-mode adjoint of the factorization: given `L̄ = ∂φ/∂L` (lower
    /// triangle), returns `Ā` such that `dφ = Σ_{i≥j} Ā[i][j]·dA[i][j]`.
    pub fn adjoint(&self, lbar: &Matrix<T>) -> Matrix<T> {
        let n = self.n;
        let two = T::lit(2.0);
        let mut lb = lbar.clone();
        let mut abar = Matrix::zeros(n, n);
        for i in (0..n).rev() {
            for j in (0..=i).rev() {
                let sbar = if i == j {
                    let lii = self.l(i, i);
                    abar[(i, i)] = lb[(i, i)] / (two * lii);
                    -abar[(i, i)]
                } else {
                    let ljj = self.l(j, j);
                    let g = lb[(i, j)] / ljj;
                    abar[(i, j)] = g;
                    lb[(j, j)] -= g * self.l(i, j);
                    -g
                };
                if sbar == T::zero() {
                    continue;
                }
                if i == j {
                    let row = lb.row_mut(i);
                    for k in 0..j {
                        row[k] += two * sbar * self.l[i * n + k];
                    }
                } else {
                    for k in 0..j {
                        let (lik, ljk) = (self.l[i * n + k], self.l[j * n + k]);
                        lb[(i, k)] += sbar * ljk;
                        lb[(j, k)] += sbar * lik;
                    }
                }
            }
        }
        abar
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize) -> Matrix<f64> {
        let b = Matrix::from_fn(n, n, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.3 - 0.4 + if i == j { 1.0 } else { 0.0 });
        Matrix::from_fn(n, n, |i, j| {
            (0..n).map(|k| b[(i, k)] * b[(j, k)]).sum::<f64>() + if i == j { 0.5 } else { 0.0 }
        })
    }

    #[test]
    fn adjoint_matches_sensitivity() {
        let a = spd(5);
        let c = Cholesky::new(&a).unwrap();
        let da = Matrix::from_fn(5, 5, |i, j| ((i + j) % 3) as f64 - 0.7 + 0.1 * (i * j) as f64);
        let lbar = Matrix::from_fn(5, 5, |i, j| if j <= i { (i as f64 - 2.0) * 0.3 + j as f64 * 0.17 } else { 0.0 });
        let dl = c.sensitivity(&da);
        let forward: f64 = (0..5).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| lbar[(i, j)] * dl[(i, j)]).sum();
        let abar = c.adjoint(&lbar);
        let reverse: f64 = (0..5).flat_map(|i| (0..=i).map(move |j| (i, j))).map(|(i, j)| abar[(i, j)] * da[(i, j)]).sum();
        assert!((forward - reverse).abs() < 1e-12 * forward.abs().max(1.0));
    }

    #[test]
    fn factor_reconstructs_and_solves() {
        let a = spd(6);
        let c = Cholesky::new(&a).unwrap();
        for i in 0..6 {
            for j in 0..6 {
                let s: f64 = (0..6).map(|k| c.l(i, k) * c.l(j, k)).sum();
                assert!((s - a[(i, j)]).abs() < 1e-12);
            }
        }
        let b = vec![1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
        let x = c.solve(&b);
        let ax = a.mul_vec(&x);
        for (u, v) in ax.iter().zip(&b) {
            assert!((u - v).abs() < 1e-10);
        }
        let inv = c.inverse();
        for i in 0..6 {
            for j in 0..6 {
                let s: f64 = (0..6).map(|k| a[(i, k)] * inv[(k, j)]).sum();
                assert!((s - if i == j { 1.0 } else { 0.0 }).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn rejects_indefinite() {
        let a = Matrix::from_row_major(2, 2, vec![1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            Cholesky::new(&a).unwrap_err(),
            Error::CholeskyFailure { order: 2 }
        );
    }

    #[test]
    fn sensitivity_matches_finite_difference() {
        let a = spd(5);
        let da = Matrix::from_fn(5, 5, |i, j| 0.1 * ((i + j) as f64).cos());
        let c = Cholesky::new(&a).unwrap();
        let dl = c.sensitivity(&da);
        let h = 1e-6;
        let plus = Matrix::from_fn(5, 5, |i, j| a[(i, j)] + h * da[(i, j)]);
        let minus = Matrix::from_fn(5, 5, |i, j| a[(i, j)] - h * da[(i, j)]);
        let (cp, cm) = (Cholesky::new(&plus).unwrap(), Cholesky::new(&minus).unwrap());
        for i in 0..5 {
            for j in 0..=i {
                let fd = (cp.l(i, j) - cm.l(i, j)) / (2.0 * h);
                assert!((fd - dl[(i, j)]).abs() < 1e-7, "({i},{j}) {fd} vs {}", dl[(i, j)]);
            }
        }
    }

    #[test]
    fn triangular_products() {
        let c = Cholesky::new(&spd(4)).unwrap();
        let z = vec![0.3, -1.0, 2.0, 0.1];
        let lz = c.lower_mul(&z);
        assert_eq!(c.solve_lower(&lz).iter().zip(&z).filter(|(a, b)| (*a - *b).abs() > 1e-12).count(), 0);
        let ltz = c.upper_mul(&z);
        let mut back = ltz.clone();
        c.solve_upper_in_place(&mut back);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
