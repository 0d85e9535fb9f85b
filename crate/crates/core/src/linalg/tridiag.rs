use crate::error::{GapError, Result};

/// Symmetric tridiagonal matrix given by its diagonal and off-diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTridiagonal {
    pub diag: Vec<f64>,
    pub off: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        if diag.is_empty() || off.len() + 1 != diag.len() {
            return Err(GapError::Parameter("tridiagonal size mismatch".into()));
        }
        Ok(Self { diag, off })
    }

    pub fn len(&self) -> usize {
        self.diag.len()
    }

    pub fn is_empty(&self) -> bool {
        self.diag.is_empty()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let mut v = self.diag[i] * x[i];
                if i > 0 {
                    v += self.off[i - 1] * x[i - 1];
                }
                if i + 1 < n {
                    v += self.off[i] * x[i + 1];
                }
                v
            })
            .collect()
    }

    /// Number of eigenvalues strictly below `x` (Sturm sequence count).
    pub fn count_below(&self, x: f64) -> usize {
        let scale = self
            .diag
            .iter()
            .chain(self.off.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        let tiny = f64::EPSILON * scale;
        let mut count = 0;
        let mut q = self.diag[0] - x;
        for i in 0..self.len() {
            if i > 0 {
                q = self.diag[i] - x - self.off[i - 1] * self.off[i - 1] / q;
            }
            if q == 0.0 {
                q = -tiny;
            }
            if q < 0.0 {
                count += 1;
            }
        }
        count
    }

    pub fn gershgorin(&self) -> (f64, f64) {
        let n = self.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..n {
            let mut r = 0.0;
            if i > 0 {
                r += self.off[i - 1].abs();
            }
            if i + 1 < n {
                r += self.off[i].abs();
            }
            lo = lo.min(self.diag[i] - r);
            hi = hi.max(self.diag[i] + r);
        }
        (lo, hi)
    }

    /// The `k`-th smallest eigenvalue (0-based) by bisection to full precision.
    pub fn eigenvalue(&self, k: usize) -> f64 {
        let (mut lo, mut hi) = self.gershgorin();
        let pad = (hi - lo).abs().max(1.0) * 1e-12;
        lo -= pad;
        hi += pad;
        loop {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                return mid;
            }
            if self.count_below(mid) > k {
                hi = mid;
            } else {
                lo = mid;
            }
        }
    }

    /// Eigenvector for the (accurate) eigenvalue `lambda` by inverse iteration.
    ///
    /// Returns the vector with unit Euclidean norm and the residual `|T v - lambda v|`.
    pub fn eigenvector(&self, lambda: f64, start: &[f64], iterations: usize) -> Result<(Vec<f64>, f64)> {
        let n = self.len();
        let lu = TridiagonalLu::factor(&self.off, &self.diag, &self.off, lambda)?;
        let mut v = start.to_vec();
        let nrm = super::norm2(&v);
        if nrm == 0.0 {
            return Err(GapError::Parameter("zero start vector".into()));
        }
        v.iter_mut().for_each(|x| *x /= nrm);
        for _ in 0..iterations.max(1) {
            lu.solve_in_place(&mut v);
            let nrm = super::norm2(&v);
            if !nrm.is_finite() || nrm == 0.0 {
                return Err(GapError::SolverNonConvergence {
                    iterations,
                    residual: f64::NAN,
                });
            }
            v.iter_mut().for_each(|x| *x /= nrm);
        }
        let tv = self.matvec(&v);
        let res = (0..n).map(|i| (tv[i] - lambda * v[i]).powi(2)).sum::<f64>().sqrt();
        Ok((v, res))
    }
}

/// LU factorisation with partial pivoting of a general tridiagonal matrix
/// `tridiag(sub, diag - shift, sup)`.
#[derive(Debug, Clone)]
pub struct TridiagonalLu {
    dl: Vec<f64>,
    d: Vec<f64>,
    du: Vec<f64>,
    du2: Vec<f64>,
    ipiv: Vec<usize>,
}

impl TridiagonalLu {
    pub fn factor(sub: &[f64], diag: &[f64], sup: &[f64], shift: f64) -> Result<Self> {
        let n = diag.len();
        if sub.len() + 1 != n || sup.len() + 1 != n {
            return Err(GapError::Parameter("tridiagonal size mismatch".into()));
        }
        let mut dl = sub.to_vec();
        let mut d: Vec<f64> = diag.iter().map(|v| v - shift).collect();
        let mut du = sup.to_vec();
        let mut du2 = vec![0.0; n.saturating_sub(2)];
        let mut ipiv: Vec<usize> = (0..n).collect();
        let scale = d
            .iter()
            .chain(dl.iter())
            .chain(du.iter())
            .fold(0.0f64, |m, v| m.max(v.abs()))
            .max(f64::MIN_POSITIVE);
        for i in 0..n.saturating_sub(1) {
            if d[i].abs() >= dl[i].abs() {
                if d[i] != 0.0 {
                    let fact = dl[i] / d[i];
                    dl[i] = fact;
                    d[i + 1] -= fact * du[i];
                }
            } else {
                let fact = d[i] / dl[i];
                d[i] = dl[i];
                dl[i] = fact;
                let temp = du[i];
                du[i] = d[i + 1];
                d[i + 1] = temp - fact * d[i + 1];
                if i + 2 < n {
                    du2[i] = du[i + 1];
                    du[i + 1] *= -fact;
                }
                ipiv[i] = i + 1;
            }
        }
        // exact zero pivots only arise for singular shifts; inverse iteration tolerates a tiny one
        for v in d.iter_mut() {
            if *v == 0.0 {
                *v = f64::EPSILON * scale;
            }
        }
        Ok(Self { dl, d, du, du2, ipiv })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.d.len();
        for i in 0..n.saturating_sub(1) {
            if self.ipiv[i] == i {
                b[i + 1] -= self.dl[i] * b[i];
            } else {
                let temp = b[i] - self.dl[i] * b[i + 1];
                b[i] = b[i + 1];
                b[i + 1] = temp;
            }
        }
        b[n - 1] /= self.d[n - 1];
        if n > 1 {
            b[n - 2] = (b[n - 2] - self.du[n - 2] * b[n - 1]) / self.d[n - 2];
        }
        for i in (0..n.saturating_sub(2)).rev() {
            b[i] = (b[i] - self.du[i] * b[i + 1] - self.du2[i] * b[i + 2]) / self.d[i];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn laplacian(n: usize) -> SymTridiagonal {
        SymTridiagonal::new(vec![2.0; n], vec![-1.0; n - 1]).unwrap()
    }

    #[test]
    fn bisection_matches_closed_form() {
        let n = 50;
        let t = laplacian(n);
        for k in [0, 1, 7, 49] {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert_relative_eq!(t.eigenvalue(k), exact, epsilon = 1e-13);
        }
    }

    #[test]
    fn lu_solves_general_tridiagonal() {
        let sub = [1.0, -3.0, 0.5, 2.0];
        let diag = [0.1, 0.2, -1.0, 4.0, 1.0];
        let sup = [2.0, 1.0, -2.0, 0.3];
        let x = [1.0, -2.0, 0.5, 3.0, -1.0];
        let mut b = vec![0.0; 5];
        for i in 0..5 {
            b[i] = diag[i] * x[i];
            if i > 0 {
                b[i] += sub[i - 1] * x[i - 1];
            }
            if i < 4 {
                b[i] += sup[i] * x[i + 1];
            }
        }
        let lu = TridiagonalLu::factor(&sub, &diag, &sup, 0.0).unwrap();
        lu.solve_in_place(&mut b);
        for i in 0..5 {
            assert_relative_eq!(b[i], x[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn inverse_iteration_recovers_sine_mode() {
        let n = 99;
        let t = laplacian(n);
        let lam = t.eigenvalue(1);
        let start: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin() + 0.1).collect();
        let (v, res) = t.eigenvector(lam, &start, 3).unwrap();
        assert!(res < 1e-12);
        let s = v[10].signum()
            * (2.0 * std::f64::consts::PI * 11.0 / (n + 1) as f64).sin().signum();
        let nrm = ((n + 1) as f64 / 2.0).sqrt();
        for i in 0..n {
            let exact = (2.0 * std::f64::consts::PI * (i + 1) as f64 / (n + 1) as f64).sin() / nrm;
            assert_relative_eq!(s * v[i], exact, epsilon = 1e-10);
        }
    }
}
