use super::CsrMatrix;
use crate::error::{GapError, Result};

/// Cholesky factor `A = L L^T` of a symmetric positive definite matrix in
/// envelope (profile) storage: row `i` of `L` is stored from its first
/// nonzero column up to the diagonal.
#[derive(Debug, Clone)]
pub struct EnvelopeCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

impl EnvelopeCholesky {
    /// Factors the lower triangle of `a`.
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let mut first = vec![0usize; n];
        let mut start = vec![0usize; n + 1];
        for i in 0..n {
            first[i] = a.row(i).map(|(j, _)| j).filter(|j| *j <= i).min().unwrap_or(i);
            start[i + 1] = start[i] + (i - first[i] + 1);
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (j, v) in a.row(i) {
                if j <= i {
                    data[start[i] + j - first[i]] = v;
                }
            }
        }
        for i in 0..n {
            let fi = first[i];
            let si = start[i];
            for j in fi..i {
                let fj = first[j];
                let sj = start[j];
                let k0 = fi.max(fj);
                let mut s = data[si + j - fi];
                let a_row = &data[si + k0 - fi..si + j - fi];
                let b_row = &data[sj + k0 - fj..sj + j - fj];
                s -= super::dot(a_row, b_row);
                let ljj = data[sj + j - fj];
                data[si + j - fi] = s / ljj;
            }
            let row = &data[si..si + i - fi];
            let s = data[si + i - fi] - super::dot(row, row);
            if !(s > 0.0) {
                return Err(GapError::LinearSolve(format!(
                    "matrix is not positive definite (pivot {s:e} at row {i})"
                )));
            }
            data[si + i - fi] = s.sqrt();
        }
        Ok(Self { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let si = self.start[i];
            let s = super::dot(&self.data[si..si + i - fi], &b[fi..i]);
            b[i] = (b[i] - s) / self.data[si + i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let si = self.start[i];
            b[i] /= self.data[si + i - fi];
            let xi = b[i];
            for (k, l) in (fi..i).zip(&self.data[si..si + i - fi]) {
                b[k] -= l * xi;
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
