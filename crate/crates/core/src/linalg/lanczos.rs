use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{axpy, dot, norm2, CsrMatrix, EnvelopeCholesky};
use crate::error::{GapError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    /// Target for `|A x - lambda x| / max(|lambda|, 1)` with `|x| = 1`.
    pub tolerance: f64,
    pub max_steps: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-9,
            max_steps: 160,
            max_restarts: 4,
            seed: 0x5eed,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LanczosResult {
    pub eigenvalues: Vec<f64>,
    /// Unit Euclidean norm.
    pub eigenvectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub steps: usize,
    pub restarts: usize,
}

/// Smallest `count` eigenpairs of the symmetric matrix `a` by shift-invert
/// Lanczos with full reorthogonalisation. `shift` must lie strictly below the
/// spectrum so that `a - shift I` is positive definite.
pub fn lowest_eigenpairs(a: &CsrMatrix, count: usize, shift: f64, opts: LanczosOptions) -> Result<LanczosResult> {
    let n = a.dim();
    if count == 0 || count >= n {
        return Err(GapError::Parameter(format!("cannot extract {count} eigenpairs from dimension {n}")));
    }
    let chol = EnvelopeCholesky::factor(&a.scaled_plus_identity(-shift, 1.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut start: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut total_steps = 0;
    let mut worst = f64::INFINITY;
    for restart in 0..=opts.max_restarts {
        let (vals, vecs, res, steps, converged) = lanczos_run(a, &chol, &start, count, shift, opts)?;
        total_steps += steps;
        worst = res.iter().cloned().fold(0.0, f64::max);
        if converged {
            return Ok(LanczosResult {
                eigenvalues: vals,
                eigenvectors: vecs,
                residuals: res,
                steps: total_steps,
                restarts: restart,
            });
        }
        start = vec![0.0; n];
        for v in &vecs {
            axpy(1.0, v, &mut start);
        }
        // keep some energy in the rest of the spectrum
        for s in start.iter_mut() {
            *s += 1e-3 * rng.gen_range(-1.0..1.0) / (n as f64).sqrt();
        }
    }
    Err(GapError::SolverNonConvergence {
        iterations: total_steps,
        residual: worst,
    })
}

type RunOutput = (Vec<f64>, Vec<Vec<f64>>, Vec<f64>, usize, bool);

fn lanczos_run(
    a: &CsrMatrix,
    chol: &EnvelopeCholesky,
    start: &[f64],
    count: usize,
    shift: f64,
    opts: LanczosOptions,
) -> Result<RunOutput> {
    let n = a.dim();
    let max_steps = opts.max_steps.min(n).max(count + 1);
    let mut q = start.to_vec();
    let nrm = norm2(&q);
    if nrm == 0.0 {
        return Err(GapError::Parameter("zero Lanczos start vector".into()));
    }
    q.iter_mut().for_each(|v| *v /= nrm);
    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut best: Option<RunOutput> = None;
    for j in 0..max_steps {
        let mut w = chol.solve(&basis[j]);
        let aj = dot(&w, &basis[j]);
        alpha.push(aj);
        axpy(-aj, &basis[j], &mut w);
        if j > 0 {
            axpy(-beta[j - 1], &basis[j - 1], &mut w);
        }
        for _ in 0..2 {
            for b in &basis {
                let c = dot(&w, b);
                axpy(-c, b, &mut w);
            }
        }
        let bj = norm2(&w);
        let steps = j + 1;
        let exhausted = bj <= 1e-14 * aj.abs().max(f64::MIN_POSITIVE) || steps == max_steps;
        if steps > count && (steps % 5 == 0 || exhausted) {
            let (vals, vecs, res) = ritz(a, &basis, &alpha, &beta, count, shift);
            let converged = res.iter().all(|r| *r <= opts.tolerance);
            let out = (vals, vecs, res, steps, converged);
            if converged || exhausted {
                return Ok(out);
            }
            best = Some(out);
        }
        if exhausted {
            break;
        }
        beta.push(bj);
        w.iter_mut().for_each(|v| *v /= bj);
        basis.push(w);
    }
    best.ok_or(GapError::SolverNonConvergence {
        iterations: max_steps,
        residual: f64::NAN,
    })
}

fn ritz(
    a: &CsrMatrix,
    basis: &[Vec<f64>],
    alpha: &[f64],
    beta: &[f64],
    count: usize,
    shift: f64,
) -> (Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let m = alpha.len();
    let mut t = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        t[(i, i)] = alpha[i];
        if i + 1 < m {
            t[(i, i + 1)] = beta[i];
            t[(i + 1, i)] = beta[i];
        }
    }
    let eig = SymmetricEigen::new(t);
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|x, y| eig.eigenvalues[*y].partial_cmp(&eig.eigenvalues[*x]).unwrap());
    let n = a.dim();
    let mut vals = Vec::with_capacity(count);
    let mut vecs = Vec::with_capacity(count);
    let mut res = Vec::with_capacity(count);
    for &k in order.iter().take(count) {
        let theta = eig.eigenvalues[k];
        let lambda = shift + 1.0 / theta;
        let mut x = vec![0.0; n];
        for (i, b) in basis.iter().take(m).enumerate() {
            axpy(eig.eigenvectors[(i, k)], b, &mut x);
        }
        let nrm = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nrm);
        let mut ax = a.matvec(&x);
        axpy(-lambda, &x, &mut ax);
        res.push(norm2(&ax) / lambda.abs().max(1.0));
        vals.push(lambda);
        vecs.push(x);
    }
    (vals, vecs, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn lowest_modes_of_1d_laplacian() {
        let n = 400;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
                t.push((i - 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, t).unwrap();
        let r = lowest_eigenpairs(&a, 2, 0.0, LanczosOptions::default()).unwrap();
        for k in 0..2 {
            let exact = 2.0 - 2.0 * (std::f64::consts::PI * (k + 1) as f64 / (n + 1) as f64).cos();
            assert_relative_eq!(r.eigenvalues[k], exact, max_relative = 1e-10);
        }
        assert!(r.residuals.iter().all(|v| *v < 1e-9));
    }
}
