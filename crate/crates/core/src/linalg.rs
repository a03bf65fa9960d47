//! Dense complex matrices and the few vector operations the solvers need.

use num_complex::Complex64;
use rayon::prelude::*;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![Complex64::new(0.0, 0.0); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Takes ownership of row-major data.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn diagonal(&self) -> Vec<Complex64> {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).collect()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// `A x`, rows in parallel (each row summed sequentially).
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.cols);
        self.data
            .par_chunks(self.cols.max(1))
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `Aᴴ x` without forming the conjugate transpose.
    pub fn matvec_adjoint(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.rows);
        let mut out = vec![Complex64::new(0.0, 0.0); self.cols];
        out.par_chunks_mut(256).enumerate().for_each(|(blk, chunk)| {
            let j0 = blk * 256;
            for (i, xi) in x.iter().enumerate() {
                let row = &self.row(i)[j0..j0 + chunk.len()];
                for (o, a) in chunk.iter_mut().zip(row) {
                    *o += a.conj() * xi;
                }
            }
        });
        out
    }

    pub fn transpose_conj(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i).conj())
    }
}

/// `⟨a, b⟩ = Σ conj(a_i) b_i`.
pub fn dotc(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// `y ← y + α x`.
pub fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn adjoint_matvec_matches_explicit_transpose() {
        let a = CMatrix::from_fn(7, 300, |i, j| c((i * 3 + j) as f64 * 0.01, (j as f64 - i as f64).sin()));
        let x: Vec<_> = (0..7).map(|i| c(i as f64, 1.0 - i as f64)).collect();
        let y = a.matvec_adjoint(&x);
        let z = a.transpose_conj().matvec(&x);
        for (p, q) in y.iter().zip(&z) {
            assert!((p - q).norm() < 1e-12 * q.norm().max(1.0));
        }
    }

    #[test]
    fn pairing_identity() {
        let a = CMatrix::from_fn(4, 3, |i, j| c(i as f64 + 0.5, j as f64 * 0.25 - 1.0));
        let x = vec![c(1.0, 2.0), c(-0.5, 0.0), c(0.0, 3.0)];
        let y = vec![c(0.1, 0.0), c(1.0, -1.0), c(2.0, 0.5), c(0.0, 1.0)];
        let lhs = dotc(&y, &a.matvec(&x));
        let rhs = dotc(&a.matvec_adjoint(&y), &x);
        assert!((lhs - rhs).norm() < 1e-12);
    }
}
