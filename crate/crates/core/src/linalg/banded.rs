use super::CsrMatrix;
use crate::error::{GapError, Result};

/// LU factorisation without pivoting of a banded matrix, intended for
/// diagonally dominant systems where pivoting is unnecessary.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row-major band storage: entry `(i, j)` lives at `i * width + (j + kl - i)`.
    band: Vec<f64>,
}

impl BandedLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let width = kl + ku + 1;
        let mut band = vec![0.0; n * width];
        for i in 0..n {
            for (j, v) in a.row(i) {
                band[i * width + j + kl - i] = v;
            }
        }
        let scale = band.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let pivot = band[k * width + kl];
            if !(pivot.abs() > 1e-14 * scale) {
                return Err(GapError::LinearSolve(format!("zero pivot at row {k}")));
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let idx = i * width + k + kl - i;
                let l = band[idx] / pivot;
                band[idx] = l;
                if l == 0.0 {
                    continue;
                }
                for j in k + 1..=jmax {
                    let u = band[k * width + j + kl - k];
                    band[i * width + j + kl - i] -= l * u;
                }
            }
        }
        Ok(Self { n, kl, ku, band })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let width = self.kl + self.ku + 1;
        let n = self.n;
        for i in 0..n {
            let j0 = i.saturating_sub(self.kl);
            let mut s = b[i];
            for j in j0..i {
                s -= self.band[i * width + j + self.kl - i] * b[j];
            }
            b[i] = s;
        }
        for i in (0..n).rev() {
            let jmax = (i + self.ku).min(n - 1);
            let mut s = b[i];
            for j in i + 1..=jmax {
                s -= self.band[i * width + j + self.kl - i] * b[j];
            }
            b[i] = s / self.band[i * width + self.kl];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn solves_nonsymmetric_dominant_system() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 5.0));
            if i >= 1 {
                t.push((i, i - 1, -1.5));
            }
            if i >= 4 {
                t.push((i, i - 4, -0.7));
            }
            if i + 2 < n {
                t.push((i, i + 2, 1.1));
            }
        }
        let a = CsrMatrix::from_triplets(n, t).unwrap();
        let x: Vec<f64> = (0..n).map(|k| 1.0 + (k as f64).sin()).collect();
        let mut b = a.matvec(&x);
        BandedLu::factor(&a).unwrap().solve_in_place(&mut b);
        for k in 0..n {
            assert_relative_eq!(b[k], x[k], epsilon = 1e-12);
        }
    }
}
