//! Dirichlet eigenproblem for `-Laplace + V` on a masked grid.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::geometry::{ConvexDomain, Point};
use crate::grid::{BoundaryScheme, MaskedGrid};
use crate::linalg::{self, CsrMatrix, LanczosOptions, LanczosResult, SymTridiagonal};
use crate::potential::PotentialND;

/// Assembled finite-difference operator with Dirichlet nodes eliminated.
#[derive(Debug, Clone)]
pub struct EllipticOperator {
    pub grid: MaskedGrid,
    pub potential: PotentialND,
    /// Potential sampled at interior nodes.
    pub v: Vec<f64>,
    pub matrix: CsrMatrix,
}

pub fn assemble(domain: &ConvexDomain, potential: &PotentialND, h: f64) -> Result<EllipticOperator> {
    assemble_with(domain, potential, h, BoundaryScheme::NodeElimination)
}

/// As [`assemble`]; with [`BoundaryScheme::Fitted`] a node next to the boundary
/// gets diagonal weight `1/(h a)` for a boundary arm of length `a`, which keeps
/// the matrix symmetric and reproduces linear profiles at the boundary.
pub fn assemble_with(
    domain: &ConvexDomain,
    potential: &PotentialND,
    h: f64,
    scheme: BoundaryScheme,
) -> Result<EllipticOperator> {
    potential.validate()?;
    let grid = MaskedGrid::with_scheme(domain, h, scheme)?;
    let n = grid.len();
    let inv_h2 = 1.0 / (h * h);
    let v: Vec<f64> = (0..n).map(|k| potential.value(grid.position(k))).collect();
    if let Some(k) = v.iter().position(|x| !x.is_finite()) {
        return Err(GapError::InvalidPotential(format!(
            "potential is not finite at {:?}",
            grid.position(k)
        )));
    }
    let mut triplets = Vec::with_capacity(n * (1 + 2 * grid.dim));
    for k in 0..n {
        let mut diag = v[k];
        for a in 0..grid.dim {
            let (hm, hp) = grid.arms(k, a);
            for (dir, arm) in [(-1, hm), (1, hp)] {
                diag += 1.0 / (h * arm);
                if let Some(j) = grid.neighbor(k, a, dir) {
                    triplets.push((k, j, -inv_h2));
                }
            }
        }
        triplets.push((k, k, diag));
    }
    let matrix = CsrMatrix::from_triplets(n, triplets)?;
    Ok(EllipticOperator {
        grid,
        potential: potential.clone(),
        v,
        matrix,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenOptions {
    /// Relative residual target `|A x - lambda x| / lambda` for unit `x`.
    pub tolerance: f64,
    pub max_steps: usize,
    pub max_restarts: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        let l = LanczosOptions::default();
        Self {
            tolerance: l.tolerance,
            max_steps: l.max_steps,
            max_restarts: l.max_restarts,
            seed: l.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDiagnostics {
    pub iterations: usize,
    pub restarts: usize,
    /// `|(-Laplace_h + V) phi_i - lambda_i phi_i| / |lambda_i|` in the discrete `L^2` norm.
    pub residuals: [f64; 2],
    pub orthogonality: f64,
    pub degenerate_gap_warning: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenSolution {
    pub grid: MaskedGrid,
    pub v: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    /// Normalised by `h^dim sum phi^2 = 1`.
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub diagnostics: EigenDiagnostics,
}

pub fn lowest_eigenpairs(op: &EllipticOperator, opts: EigenOptions) -> Result<EigenSolution> {
    let grid = &op.grid;
    let shift = op.v.iter().cloned().fold(f64::INFINITY, f64::min);
    let res = match tridiagonal_eigenpairs(op, opts.tolerance) {
        Some(res) => res,
        None => linalg::lowest_eigenpairs(
            &op.matrix,
            2,
            shift,
            LanczosOptions {
                tolerance: opts.tolerance,
                max_steps: opts.max_steps,
                max_restarts: opts.max_restarts,
                seed: opts.seed,
            },
        )?,
    };
    let scale = grid.h.powf(-0.5 * grid.dim as f64);
    let mut phi1: Vec<f64> = res.eigenvectors[0].iter().map(|x| x * scale).collect();
    let mut phi2: Vec<f64> = res.eigenvectors[1].iter().map(|x| x * scale).collect();
    if phi1.iter().sum::<f64>() < 0.0 {
        phi1.iter_mut().for_each(|x| *x = -*x);
    }
    if let Some(k) = phi1.iter().position(|x| !(*x > 0.0)) {
        return Err(GapError::CorruptEigenfunction(format!(
            "ground state is {:e} at {:?}",
            phi1[k],
            grid.position(k)
        )));
    }
    let peak = phi2.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if let Some(first) = phi2.iter().find(|x| x.abs() > 1e-6 * peak) {
        if *first < 0.0 {
            phi2.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let (lambda1, lambda2) = (res.eigenvalues[0], res.eigenvalues[1]);
    Ok(EigenSolution {
        grid: grid.clone(),
        v: op.v.clone(),
        lambda1,
        lambda2,
        diagnostics: EigenDiagnostics {
            iterations: res.steps,
            restarts: res.restarts,
            residuals: [
                relative_residual(op, &phi1, lambda1),
                relative_residual(op, &phi2, lambda2),
            ],
            orthogonality: grid.inner(&phi1, &phi2),
            degenerate_gap_warning: lambda2 - lambda1 < 1e-8 * lambda1.abs().max(1.0),
        },
        phi1,
        phi2,
    })
}

/// Bisection and inverse iteration for symmetric tridiagonal operators (1D grids).
/// `None` sends the caller to Lanczos.
fn tridiagonal_eigenpairs(op: &EllipticOperator, tolerance: f64) -> Option<LanczosResult> {
    let a = &op.matrix;
    let n = a.dim();
    if op.grid.dim != 1 || n < 3 || a.bandwidths() != (1, 1) || !a.is_symmetric(1e-14) {
        return None;
    }
    let diag = (0..n).map(|i| a.get(i, i)).collect();
    let off = (0..n - 1).map(|i| a.get(i, i + 1)).collect();
    let t = SymTridiagonal::new(diag, off).ok()?;
    let (lo, hi) = t.gershgorin();
    let floor = 64.0 * f64::EPSILON * lo.abs().max(hi.abs()) * (n as f64).sqrt();
    let ramp: Vec<f64> = (0..n).map(|i| i as f64 / n as f64 - 0.49).collect();
    let mut eigenvalues = Vec::with_capacity(2);
    let mut eigenvectors: Vec<Vec<f64>> = Vec::with_capacity(2);
    let mut residuals = Vec::with_capacity(2);
    for (k, start) in [vec![1.0; n], ramp].into_iter().enumerate() {
        let lambda = t.eigenvalue(k);
        let (mut v, _) = t.eigenvector(lambda, &start, 3).ok()?;
        if let Some(prev) = eigenvectors.first() {
            let c = linalg::dot(prev, &v);
            linalg::axpy(-c, prev, &mut v);
            let nv = linalg::norm2(&v);
            v.iter_mut().for_each(|x| *x /= nv);
        }
        let mut r = t.matvec(&v);
        linalg::axpy(-lambda, &v, &mut r);
        let res = linalg::norm2(&r) / lambda.abs().max(1.0);
        if !(res <= tolerance + floor / lambda.abs().max(1.0)) {
            return None;
        }
        eigenvalues.push(lambda);
        eigenvectors.push(v);
        residuals.push(res);
    }
    Some(LanczosResult {
        eigenvalues,
        eigenvectors,
        residuals,
        steps: 3,
        restarts: 0,
    })
}

fn relative_residual(op: &EllipticOperator, phi: &[f64], lambda: f64) -> f64 {
    let mut r = op.matrix.matvec(phi);
    linalg::axpy(-lambda, phi, &mut r);
    op.grid.inner(&r, &r).sqrt() / lambda.abs().max(f64::MIN_POSITIVE)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftResidual {
    pub max_abs: f64,
    /// Root mean square over the evaluated nodes.
    pub rms: f64,
    pub nodes: usize,
    pub collar: f64,
}

impl EigenSolution {
    pub fn gap(&self) -> f64 {
        self.lambda2 - self.lambda1
    }

    /// Centered `grad log phi_1` at node `k`.
    pub fn log_gradient(&self, k: usize) -> Option<Point> {
        self.grid.log_gradient(&self.phi1, k)
    }

    pub fn ratio(&self) -> Vec<f64> {
        self.phi2.iter().zip(&self.phi1).map(|(a, b)| a / b).collect()
    }

    /// CSV with columns `x,y,phi1,phi2` (`y` is zero for intervals).
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,phi1,phi2\n");
        for k in 0..self.grid.len() {
            let p = self.grid.position(k);
            out.push_str(&format!(
                "{:.17e},{:.17e},{:.17e},{:.17e}\n",
                p[0], p[1], self.phi1[k], self.phi2[k]
            ));
        }
        out
    }
}

/// Residual of `Laplace_h v + 2 grad_h log phi_1 . grad_h v + (lambda_2 - lambda_1) v`
/// for `v = phi_2/phi_1`, over nodes with `rho > collar` and a full stencil.
pub fn drift_residual(solution: &EigenSolution, collar: f64) -> DriftResidual {
    drift_residual_for(solution, &solution.ratio(), collar)
}

/// As [`drift_residual`] for an arbitrary node field `v`.
pub fn drift_residual_for(solution: &EigenSolution, v: &[f64], collar: f64) -> DriftResidual {
    let grid = &solution.grid;
    let h = grid.h;
    let gap = solution.gap();
    let mut max_abs: f64 = 0.0;
    let mut sum_sq = 0.0;
    let mut count = 0usize;
    for k in 0..grid.len() {
        if grid.rho(k) <= collar || !grid.has_full_stencil(k) {
            continue;
        }
        let mut r = gap * v[k];
        for a in 0..grid.dim {
            let p = grid.neighbor(k, a, 1).unwrap();
            let m = grid.neighbor(k, a, -1).unwrap();
            r += (v[p] - 2.0 * v[k] + v[m]) / (h * h);
            let dlog = (solution.phi1[p] - solution.phi1[m]) / (2.0 * h * solution.phi1[k]);
            r += 2.0 * dlog * (v[p] - v[m]) / (2.0 * h);
        }
        max_abs = max_abs.max(r.abs());
        sum_sq += r * r;
        count += 1;
    }
    DriftResidual {
        max_abs,
        rms: if count > 0 { (sum_sq / count as f64).sqrt() } else { 0.0 },
        nodes: count,
        collar,
    }
}
