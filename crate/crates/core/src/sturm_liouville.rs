//! The one-dimensional comparison problem `-u'' + V u = lambda u` on `(-d/2, d/2)`
//! with Dirichlet ends, and the profiles derived from its first two eigenpairs.

use serde::{Deserialize, Serialize};

use crate::error::{GapError, Result};
use crate::linalg::SymTridiagonal;
use crate::potential::Potential1D;

const PI: f64 = std::f64::consts::PI;

/// Grid values of `f = phi / (d/2 - t)` and `g = f'/f` on the half `t >= 0`,
/// indexed from the midpoint (`k = 0`) to the endpoint (`k = n/2`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhiTable {
    /// Separations `s = 2 t` from `0` to `d`.
    pub s: Vec<f64>,
    /// `Phi(s) = 2 g(s/2) - 4/(d - s)`; the last entry (s = d) is `-inf` and is stored as `None`.
    pub values: Vec<Option<f64>>,
    /// Smooth factor `g = f'/f` at `t = s/2`.
    pub smooth: Vec<f64>,
    pub c_star: f64,
    /// Largest excess of the directly differenced `Phi` over the envelope
    /// `-c* - 4/(d-s) <= Phi <= c* - 4/(d-s)`; nonpositive when the envelope holds.
    pub envelope_excess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiTable {
    /// Separations `s = 2 t` from `0` to `d`.
    pub s: Vec<f64>,
    pub values: Vec<f64>,
    pub c_bar: f64,
    /// One-sided estimate of `Psi'(d)`.
    pub slope_at_d: f64,
    /// Smallest `Psi'` over interior check points (should be positive).
    pub min_slope: f64,
    /// Largest `Psi''` over interior check points (should be negative).
    pub max_curvature: f64,
    /// Smallest `Psi(s) - c_bar s` over the grid.
    pub min_excess_over_linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimDiagnostics {
    /// `max |(-D2 + V - lambda_i) phi_i| / |lambda_i|` over interior nodes.
    pub residuals: [f64; 2],
    /// Discrete `<phi_1, phi_2>`.
    pub orthogonality: f64,
    pub degenerate_gap_warning: bool,
}

/// Solved comparison problem with its derived profiles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OneDimComparison {
    pub d: f64,
    /// Number of grid cells; nodes are `t_k = -d/2 + k h`, `k = 0..=cells`.
    pub cells: usize,
    pub h: f64,
    pub potential: Potential1D,
    pub nodes: Vec<f64>,
    pub lambda1: f64,
    pub lambda2: f64,
    pub sigma: f64,
    /// Normalised by `h sum phi^2 = 1`, zero at both ends.
    pub phi1: Vec<f64>,
    pub phi2: Vec<f64>,
    pub phi_table: PhiTable,
    pub psi_table: PsiTable,
    pub alpha_tilde: f64,
    /// `inf [(phi_1'/phi_1)^2 - V]` over interior nodes.
    pub inf_q2_minus_v: f64,
    pub c_star: f64,
    pub c_bar: f64,
    pub diagnostics: OneDimDiagnostics,
    /// `g` on the negative half, indexed from the midpoint toward `-d/2`.
    left_smooth: Vec<f64>,
}

/// Fourth-order backward difference for the derivative at the last entry.
fn endpoint_slope(v: &[f64], h: f64) -> f64 {
    let n = v.len() - 1;
    (25.0 * v[n] - 48.0 * v[n - 1] + 36.0 * v[n - 2] - 16.0 * v[n - 3] + 3.0 * v[n - 4]) / (12.0 * h)
}

/// Smooth log-derivative `g` of `f = phi/(d/2 - t)` along `half`, which runs
/// from one node before the midpoint to the endpoint (where `half` vanishes).
fn smooth_log_derivative(half: &[f64], h: f64) -> Result<Vec<f64>> {
    let len = half.len();
    // half[0] sits at distance d/2 + h from the endpoint
    let m = len - 1;
    let mut f = vec![0.0; len];
    for (j, fj) in f.iter_mut().enumerate().take(m) {
        *fj = half[j] / ((m - j) as f64 * h);
    }
    f[m] = -endpoint_slope(half, h);
    if !(f[m] > 0.0) || !f[m].is_finite() {
        return Err(GapError::EndpointExtension(format!(
            "first eigenfunction has nonpositive boundary slope ({})",
            -f[m]
        )));
    }
    let mut g = Vec::with_capacity(len - 1);
    for j in 1..m {
        g.push((f[j + 1] - f[j - 1]) / (2.0 * h * f[j]));
    }
    g.push((3.0 * f[m] - 4.0 * f[m - 1] + f[m - 2]) / (2.0 * h * f[m]));
    Ok(g)
}

/// Solves the comparison problem with `cells` grid cells (even, at least 64).
pub fn solve_1d(potential: &Potential1D, d: f64, cells: usize) -> Result<OneDimComparison> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(GapError::Parameter(format!("diameter must be positive, got {d}")));
    }
    if cells < 64 || !cells.is_multiple_of(2) {
        return Err(GapError::Parameter(format!(
            "need an even number of cells >= 64 so the midpoint is a node, got {cells}"
        )));
    }
    potential.validate(d / 2.0)?;
    let n = cells;
    let h = d / n as f64;
    let nodes: Vec<f64> = (0..=n).map(|k| -d / 2.0 + k as f64 * h).collect();
    let inv_h2 = 1.0 / (h * h);
    let vvals: Vec<f64> = nodes.iter().map(|t| potential.value(*t)).collect();
    let diag: Vec<f64> = (1..n).map(|k| 2.0 * inv_h2 + vvals[k]).collect();
    let t = SymTridiagonal::new(diag, vec![-inv_h2; n - 2])?;

    let lambda1 = t.eigenvalue(0);
    let lambda2 = t.eigenvalue(1);
    let start1 = vec![1.0; n - 1];
    let start2: Vec<f64> = nodes[1..n].iter().map(|t| t + 0.01 * d).collect();
    let (v1, r1) = t.eigenvector(lambda1, &start1, 3)?;
    let (mut v2, _) = t.eigenvector(lambda2, &start2, 3)?;
    let c = crate::linalg::dot(&v1, &v2);
    crate::linalg::axpy(-c, &v1, &mut v2);
    let nv2 = crate::linalg::norm2(&v2);
    v2.iter_mut().for_each(|x| *x /= nv2);
    let r2 = {
        let tv = t.matvec(&v2);
        tv.iter().zip(&v2).map(|(a, b)| (a - lambda2 * b).powi(2)).sum::<f64>().sqrt()
    };
    let tol = 1e-12 * 4.0 * inv_h2 * (n as f64).sqrt() + 1e-8 * lambda2.abs().max(1.0);
    if !(r1 <= tol) || !(r2 <= tol) {
        return Err(GapError::SolverNonConvergence {
            iterations: 3,
            residual: r1.max(r2),
        });
    }

    let scale = 1.0 / h.sqrt();
    let mut phi1 = vec![0.0; n + 1];
    let mut phi2 = vec![0.0; n + 1];
    for k in 1..n {
        phi1[k] = v1[k - 1] * scale;
        phi2[k] = v2[k - 1] * scale;
    }
    let mid = n / 2;
    if phi1.iter().sum::<f64>() < 0.0 {
        phi1.iter_mut().for_each(|x| *x = -*x);
    }
    if phi2[mid + 1..n].iter().sum::<f64>() < 0.0 {
        phi2.iter_mut().for_each(|x| *x = -*x);
    }
    if let Some(k) = (1..n).find(|k| !(phi1[*k] > 0.0)) {
        return Err(GapError::CorruptEigenfunction(format!(
            "first eigenfunction is {} at interior node {k}",
            phi1[k]
        )));
    }

    let residual = |phi: &[f64], lambda: f64| {
        (1..n)
            .map(|k| {
                let lap = (phi[k + 1] - 2.0 * phi[k] + phi[k - 1]) * inv_h2;
                (-lap + vvals[k] * phi[k] - lambda * phi[k]).abs()
            })
            .fold(0.0, f64::max)
            / lambda.abs().max(f64::MIN_POSITIVE)
    };
    let diagnostics = OneDimDiagnostics {
        residuals: [residual(&phi1, lambda1), residual(&phi2, lambda2)],
        orthogonality: h * crate::linalg::dot(&phi1, &phi2),
        degenerate_gap_warning: lambda2 - lambda1 <= 1e-10 * lambda1.abs().max(1.0),
    };

    let mut out = OneDimComparison {
        d,
        cells: n,
        h,
        potential: potential.clone(),
        nodes,
        lambda1,
        lambda2,
        sigma: lambda2 - lambda1,
        phi1,
        phi2,
        phi_table: PhiTable {
            s: Vec::new(),
            values: Vec::new(),
            smooth: Vec::new(),
            c_star: 0.0,
            envelope_excess: 0.0,
        },
        psi_table: PsiTable {
            s: Vec::new(),
            values: Vec::new(),
            c_bar: 0.0,
            slope_at_d: 0.0,
            min_slope: 0.0,
            max_curvature: 0.0,
            min_excess_over_linear: 0.0,
        },
        alpha_tilde: 0.0,
        inf_q2_minus_v: 0.0,
        c_star: 0.0,
        c_bar: 0.0,
        diagnostics,
        left_smooth: Vec::new(),
    };
    out.phi_table = compute_phi(&out)?;
    out.c_star = out.phi_table.c_star;
    let left: Vec<f64> = out.phi1[..=mid + 1].iter().rev().copied().collect();
    let mut left_smooth = smooth_log_derivative(&left, h)?;
    let half = d / 2.0;
    for (j, gj) in left_smooth.iter_mut().enumerate() {
        let t = j as f64 * h;
        if t > 0.5 * half {
            break;
        }
        *gj = 1.0 / (half - t) - out.direct_log_derivative(mid - j);
    }
    out.left_smooth = left_smooth;
    out.psi_table = compute_psi(&out)?;
    out.c_bar = out.psi_table.c_bar;
    out.alpha_tilde = compute_alpha_tilde(&out)?;
    out.inf_q2_minus_v = (1..n)
        .map(|k| out.direct_log_derivative(k).powi(2) - vvals[k])
        .fold(f64::INFINITY, f64::min);
    Ok(out)
}

/// `Phi(s) = 2 (log phi_1)'(s/2)` on `s = 2 t_k`, computed through `f = phi_1/(d/2 - t)`.
pub fn compute_phi(c: &OneDimComparison) -> Result<PhiTable> {
    let n = c.cells;
    let mid = n / 2;
    let h = c.h;
    if let Some(k) = (1..n).find(|k| !(c.phi1[*k] > 0.0)) {
        return Err(GapError::CorruptEigenfunction(format!("phi_1 = {} at node {k}", c.phi1[k])));
    }
    let mut g = smooth_log_derivative(&c.phi1[mid - 1..], h)?;
    // away from the pole the direct quotient is as accurate and keeps Phi(0) = 0 for even V
    let half = c.d / 2.0;
    for (j, gj) in g.iter_mut().enumerate() {
        let t = j as f64 * h;
        if t > 0.5 * half {
            break;
        }
        *gj = c.direct_log_derivative(mid + j) + 1.0 / (half - t);
    }
    let c_star = 2.0 * g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let s: Vec<f64> = (0..=mid).map(|j| 2.0 * j as f64 * h).collect();
    let mut values: Vec<Option<f64>> = (0..=mid)
        .map(|j| if j == mid { None } else { Some(2.0 * g[j] - 4.0 / (c.d - s[j])) })
        .collect();
    if c.potential.is_even() {
        values[0] = Some(0.0);
    }
    let tol = 10.0 * h * h * (c_star + 4.0 / c.d);
    let mut envelope_excess = f64::NEG_INFINITY;
    for j in 0..mid {
        let k = mid + j;
        let direct = (c.phi1[k + 1] - c.phi1[k - 1]) / (h * c.phi1[k]);
        let pole = 4.0 / (c.d - s[j]);
        let excess = (direct - (c_star - pole)).max(-c_star - pole - direct);
        envelope_excess = envelope_excess.max(excess - tol);
    }
    Ok(PhiTable {
        s,
        values,
        smooth: g,
        c_star,
        envelope_excess,
    })
}

/// `Psi(s) = (phi_2/phi_1)(s/2)` on `s = 2 t_k`, with the value at `s = d`
/// taken as the ratio of the one-sided boundary slopes.
pub fn compute_psi(c: &OneDimComparison) -> Result<PsiTable> {
    let n = c.cells;
    let mid = n / 2;
    let h = c.h;
    let mut v: Vec<f64> = (mid..n).map(|k| c.phi2[k] / c.phi1[k]).collect();
    if c.potential.is_even() {
        v[0] = 0.0;
    }
    let d1 = endpoint_slope(&c.phi1[..=n], h);
    let d2 = endpoint_slope(&c.phi2[..=n], h);
    let end = d2 / d1;
    if !(d1 < 0.0) || !end.is_finite() {
        return Err(GapError::EndpointExtension(format!(
            "boundary slope ratio {d2}/{d1} is not usable"
        )));
    }
    v.push(end);
    let m = v.len() - 1;
    let s: Vec<f64> = (0..=m).map(|j| 2.0 * j as f64 * h).collect();
    let c_bar = v[m] / c.d;
    // derivatives in s: d/ds = (1/2) d/dt
    let slope_at_d = 0.5 * (3.0 * v[m] - 4.0 * v[m - 1] + v[m - 2]) / (2.0 * h);
    let mut min_slope = f64::INFINITY;
    let mut max_curvature = f64::NEG_INFINITY;
    for j in 1..m {
        min_slope = min_slope.min(0.5 * (v[j + 1] - v[j - 1]) / (2.0 * h));
        max_curvature = max_curvature.max(0.25 * (v[j + 1] - 2.0 * v[j] + v[j - 1]) / (h * h));
    }
    let min_excess_over_linear = v
        .iter()
        .zip(&s)
        .map(|(p, s)| p - c_bar * s)
        .fold(f64::INFINITY, f64::min);
    Ok(PsiTable {
        s,
        values: v,
        c_bar,
        slope_at_d,
        min_slope,
        max_curvature,
        min_excess_over_linear,
    })
}

/// `-sup (log phi_1)''` through `(log phi_1)'' = V - lambda_1 - (phi_1'/phi_1)^2`.
pub fn compute_alpha_tilde(c: &OneDimComparison) -> Result<f64> {
    let n = c.cells;
    if let Some(k) = (1..n).find(|k| !(c.phi1[*k] > 0.0)) {
        return Err(GapError::CorruptEigenfunction(format!("phi_1 = {} at node {k}", c.phi1[k])));
    }
    let sup = (1..n)
        .map(|k| c.potential.value(c.nodes[k]) - c.lambda1 - c.direct_log_derivative(k).powi(2))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(-sup)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRow {
    pub s: f64,
    /// `4 s (1 - s) pi^2 / d^2 + 2 s alpha`.
    pub gap_bound: f64,
    pub gap_margin: f64,
    /// `(1 + 2s) lambda_1 + 4 s (1 - s) pi^2 / d^2 + 2 s inf[(phi_1'/phi_1)^2 - V]`.
    pub lambda2_bound: f64,
    pub lambda2_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundTable {
    pub d: f64,
    pub sigma: f64,
    pub lambda2: f64,
    pub alpha_tilde: f64,
    pub rows: Vec<BoundRow>,
    /// The `s = 1/2` bound `pi^2/d^2 + alpha`.
    pub half_bound: f64,
}

impl BoundTable {
    pub fn max_gap_bound(&self) -> f64 {
        self.rows.iter().map(|r| r.gap_bound).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,gap_bound,sigma,gap_margin,lambda2_bound,lambda2,lambda2_margin\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{:.6},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.s, r.gap_bound, self.sigma, r.gap_margin, r.lambda2_bound, self.lambda2, r.lambda2_margin
            ));
        }
        out
    }
}

pub fn gap_lower_bounds(c: &OneDimComparison, s_values: &[f64]) -> Result<BoundTable> {
    let pd2 = PI * PI / (c.d * c.d);
    let mut rows = Vec::with_capacity(s_values.len());
    for &s in s_values {
        if !(s > 0.0 && s < 1.0) {
            return Err(GapError::Parameter(format!("bound parameter must lie in (0, 1), got {s}")));
        }
        let base = 4.0 * s * (1.0 - s) * pd2;
        let gap_bound = base + 2.0 * s * c.alpha_tilde;
        let lambda2_bound = (1.0 + 2.0 * s) * c.lambda1 + base + 2.0 * s * c.inf_q2_minus_v;
        rows.push(BoundRow {
            s,
            gap_bound,
            gap_margin: c.sigma - gap_bound,
            lambda2_bound,
            lambda2_margin: c.lambda2 - lambda2_bound,
        });
    }
    Ok(BoundTable {
        d: c.d,
        sigma: c.sigma,
        lambda2: c.lambda2,
        alpha_tilde: c.alpha_tilde,
        rows,
        half_bound: pd2 + c.alpha_tilde,
    })
}

impl OneDimComparison {
    /// Centered `phi_1'/phi_1` at interior node `k`.
    fn direct_log_derivative(&self, k: usize) -> f64 {
        (self.phi1[k + 1] - self.phi1[k - 1]) / (2.0 * self.h * self.phi1[k])
    }

    fn interp(table: &[f64], x: f64) -> f64 {
        let last = table.len() - 1;
        let j = (x.floor().max(0.0) as usize).min(last - 1);
        let w = (x - j as f64).clamp(0.0, 1.0);
        table[j] * (1.0 - w) + table[j + 1] * w
    }

    /// `(log phi_1)'(t)` for `t` in `(-d/2, d/2)`, with the boundary pole restored analytically.
    pub fn log_derivative(&self, t: f64) -> f64 {
        let half = self.d / 2.0;
        if t >= 0.0 {
            Self::interp(&self.phi_table.smooth, t / self.h) - 1.0 / (half - t)
        } else {
            1.0 / (half + t) - Self::interp(&self.left_smooth, -t / self.h)
        }
    }

    /// `Phi(s)`, odd in `s`, `-inf` at and beyond `s = d`.
    pub fn phi(&self, s: f64) -> f64 {
        if s < 0.0 {
            return -self.phi(-s);
        }
        if s >= self.d {
            return f64::NEG_INFINITY;
        }
        let x = 0.5 * s / self.h;
        if s <= 0.5 * self.d {
            let j = x.floor() as usize;
            let w = x - j as f64;
            let at = |i: usize| self.phi_table.values[i].unwrap_or(f64::NEG_INFINITY);
            if w == 0.0 {
                return at(j);
            }
            return at(j) * (1.0 - w) + at(j + 1) * w;
        }
        2.0 * Self::interp(&self.phi_table.smooth, x) - 4.0 / (self.d - s)
    }

    /// `Psi(s)`, odd in `s`, constant beyond `s = d`.
    pub fn psi(&self, s: f64) -> f64 {
        if s < 0.0 {
            return -self.psi(-s);
        }
        Self::interp(&self.psi_table.values, (0.5 * s / self.h).min((self.psi_table.values.len() - 1) as f64))
    }

    /// `c0 = ||V||_C + |lambda_1| + max (phi_1'/phi_1)^2` over `[0, (d - eps1)/2]`
    /// with `eps1 = min(eps0, 4/(c* + 1))`.
    pub fn auxiliary_c0(&self, eps0: f64) -> f64 {
        let eps1 = eps0.min(4.0 / (self.c_star + 1.0));
        let t_max = 0.5 * (self.d - eps1);
        let half = self.d / 2.0;
        let vmax = self.nodes.iter().map(|t| self.potential.value(*t).abs()).fold(0.0, f64::max);
        let q2 = self
            .phi_table
            .smooth
            .iter()
            .enumerate()
            .map(|(j, g)| (j as f64 * self.h, g))
            .filter(|(t, _)| *t <= t_max)
            .map(|(t, g)| (g - 1.0 / (half - t)).powi(2))
            .fold(0.0, f64::max);
        vmax + self.lambda1.abs() + q2
    }

    /// Largest residual of `v''' + 2 q v'' + (2 q' + sigma) v' = 0` for `v = phi_2/phi_1`,
    /// `q = (log phi_1)'`, over nodes with `|t| <= 0.4 d`.
    pub fn drift_identity_residual(&self) -> f64 {
        let n = self.cells;
        let h = self.h;
        let v: Vec<f64> = (0..=n)
            .map(|k| if k == 0 || k == n { f64::NAN } else { self.phi2[k] / self.phi1[k] })
            .collect();
        let mut worst: f64 = 0.0;
        for k in 3..n - 2 {
            if self.nodes[k].abs() > 0.4 * self.d {
                continue;
            }
            let v1 = (v[k + 1] - v[k - 1]) / (2.0 * h);
            let v2 = (v[k + 1] - 2.0 * v[k] + v[k - 1]) / (h * h);
            let v3 = (v[k + 2] - 2.0 * v[k + 1] + 2.0 * v[k - 1] - v[k - 2]) / (2.0 * h * h * h);
            let q = self.direct_log_derivative(k);
            let dq = self.potential.value(self.nodes[k]) - self.lambda1 - q * q;
            worst = worst.max((v3 + 2.0 * q * v2 + (2.0 * dq + self.sigma) * v1).abs());
        }
        worst
    }

    /// CSV with columns `t,phi1,phi2,s,Phi,Psi`; the profile columns are filled for `t >= 0`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,phi1,phi2,s,Phi,Psi\n");
        let mid = self.cells / 2;
        for (k, t) in self.nodes.iter().enumerate() {
            if k >= mid {
                let j = k - mid;
                let phi = self.phi_table.values[j].map_or(String::from("-inf"), |v| format!("{v:.17e}"));
                out.push_str(&format!(
                    "{t:.17e},{:.17e},{:.17e},{:.17e},{phi},{:.17e}\n",
                    self.phi1[k], self.phi2[k], self.phi_table.s[j], self.psi_table.values[j]
                ));
            } else {
                out.push_str(&format!("{t:.17e},{:.17e},{:.17e},,,\n", self.phi1[k], self.phi2[k]));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn flat(n: usize) -> OneDimComparison {
        solve_1d(&Potential1D::zero(), 1.0, n).unwrap()
    }

    #[test]
    fn flat_interval_spectrum() {
        let c = flat(4096);
        assert_relative_eq!(c.lambda1, PI * PI, max_relative = 1e-5);
        assert_relative_eq!(c.lambda2, 4.0 * PI * PI, max_relative = 1e-5);
        assert_relative_eq!(c.sigma, 3.0 * PI * PI, max_relative = 1e-5);
        assert!(c.diagnostics.orthogonality.abs() < 1e-8);
        assert!(c.diagnostics.residuals.iter().all(|r| *r < 10.0 * c.h * c.h));
    }

    #[test]
    fn constant_shift() {
        let a = flat(512);
        let b = solve_1d(&Potential1D::Constant { value: 3.5 }, 1.0, 512).unwrap();
        assert_relative_eq!(b.lambda1 - a.lambda1, 3.5, epsilon = 1e-9);
        assert_relative_eq!(b.sigma, a.sigma, epsilon = 1e-9);
        assert_relative_eq!(b.alpha_tilde, a.alpha_tilde, epsilon = 1e-7);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(solve_1d(&Potential1D::zero(), 1.0, 32).is_err());
        assert!(solve_1d(&Potential1D::zero(), 1.0, 129).is_err());
        assert!(solve_1d(&Potential1D::zero(), -1.0, 128).is_err());
    }

    #[test]
    fn second_order_convergence() {
        let exact = PI * PI;
        let e1 = (flat(256).lambda1 - exact).abs();
        let e2 = (flat(512).lambda1 - exact).abs();
        let ratio = e1 / e2;
        assert!((ratio - 4.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn flat_profiles_match_closed_forms() {
        let c = flat(4096);
        assert_relative_eq!(c.phi(0.5), -2.0 * PI, max_relative = 1e-5);
        assert!(c.phi(0.0).abs() < 1e-9);
        assert_relative_eq!(c.psi(1.0), 2.0, max_relative = 1e-6);
        assert_relative_eq!(c.c_bar, 2.0, max_relative = 1e-6);
        assert!(c.psi_table.slope_at_d.abs() < 1e-4);
        assert!(c.psi_table.min_slope > 0.0);
        assert!(c.psi_table.max_curvature < 0.0);
        assert!(c.psi_table.min_excess_over_linear > -1e-8);
        assert_relative_eq!(c.alpha_tilde, PI * PI, max_relative = 1e-5);
        assert_relative_eq!(c.c_star, 4.0, max_relative = 1e-5);
        assert!(c.phi_table.envelope_excess <= 0.0);
        for s in [0.1, 0.37, 0.8, 0.95] {
            assert_relative_eq!(c.phi(s), -2.0 * PI * (PI * s / 2.0).tan(), max_relative = 1e-4);
            assert_relative_eq!(c.psi(s), 2.0 * (PI * s / 2.0).sin(), max_relative = 1e-5);
        }
        for t in [-0.45, -0.2, 0.1, 0.49] {
            assert_relative_eq!(c.log_derivative(t), -PI * (PI * t).tan(), max_relative = 1e-4);
        }
    }

    #[test]
    fn phi_slope_at_zero() {
        let v = Potential1D::PolynomialEven {
            coefficients: vec![0.3, 1.0],
        };
        let c = solve_1d(&v, 1.5, 4096).unwrap();
        let e = 1e-3;
        let slope = (c.phi(e) - c.phi(-e)) / (2.0 * e);
        assert_relative_eq!(slope, v.value(0.0) - c.lambda1, max_relative = 1e-4);
        // diverges near d
        let a = c.phi(1.5 - 0.02);
        let b = c.phi(1.5 - 0.01);
        assert!(b < a);
    }

    /// Shooting from the left end with `u(0) = 0, u'(0) = 1`, RK4, bisection on `u(d)`.
    fn shooting_eigenvalue(v: impl Fn(f64) -> f64, d: f64, lo: f64, hi: f64) -> f64 {
        let miss = |lam: f64| {
            let steps = 20000;
            let h = d / steps as f64;
            let (mut u, mut p) = (0.0f64, 1.0f64);
            let f = |t: f64, u: f64, p: f64| (p, (v(t) - lam) * u);
            for i in 0..steps {
                let t = -d / 2.0 + i as f64 * h;
                let (k1u, k1p) = f(t, u, p);
                let (k2u, k2p) = f(t + h / 2.0, u + h / 2.0 * k1u, p + h / 2.0 * k1p);
                let (k3u, k3p) = f(t + h / 2.0, u + h / 2.0 * k2u, p + h / 2.0 * k2p);
                let (k4u, k4p) = f(t + h, u + h * k3u, p + h * k3p);
                u += h / 6.0 * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);
                p += h / 6.0 * (k1p + 2.0 * k2p + 2.0 * k3p + k4p);
            }
            u
        };
        let (mut a, mut b) = (lo, hi);
        let fa = miss(a);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if miss(m).signum() == fa.signum() {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    #[test]
    fn quadratic_potential_matches_shooting() {
        let v = Potential1D::PolynomialEven {
            coefficients: vec![0.0, 1.0],
        };
        let c = solve_1d(&v, 2.0, 8192).unwrap();
        let l1 = shooting_eigenvalue(|t| t * t, 2.0, 1.0, 4.0);
        let l2 = shooting_eigenvalue(|t| t * t, 2.0, 8.0, 12.0);
        assert_relative_eq!(c.lambda1, l1, max_relative = 1e-6);
        assert_relative_eq!(c.lambda2, l2, max_relative = 1e-6);
    }

    #[test]
    fn alpha_tilde_against_dense_differencing() {
        let v = Potential1D::PolynomialEven {
            coefficients: vec![0.0, 4.0],
        };
        let c = solve_1d(&v, 2.0, 2048).unwrap();
        let fine = solve_1d(&v, 2.0, 16384).unwrap();
        // second differences of log phi on the fine grid
        let h = fine.h;
        let sup = (1..fine.cells)
            .filter(|k| fine.nodes[*k].abs() < 0.9)
            .map(|k| {
                (fine.phi1[k + 1].ln() - 2.0 * fine.phi1[k].ln() + fine.phi1[k - 1].ln()) / (h * h)
            })
            .fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(c.alpha_tilde, -sup, max_relative = 1e-4);
    }

    #[test]
    fn symmetry_for_even_potential() {
        let v = Potential1D::PolynomialEven {
            coefficients: vec![1.0, 0.0, 2.0],
        };
        let c = solve_1d(&v, 1.0, 1024).unwrap();
        let n = c.cells;
        for k in 0..=n {
            assert!((c.phi1[k] - c.phi1[n - k]).abs() < 1e-9);
            assert!((c.phi2[k] + c.phi2[n - k]).abs() < 1e-9);
        }
    }

    #[test]
    fn bounds_for_flat_interval() {
        let c = flat(4096);
        let svals: Vec<f64> = (1..10).map(|k| k as f64 / 10.0).collect();
        let table = gap_lower_bounds(&c, &svals).unwrap();
        assert_relative_eq!(table.half_bound, 2.0 * PI * PI, max_relative = 1e-5);
        assert!(table.max_gap_bound() <= c.sigma + 1e-6);
        assert!(table.rows.iter().all(|r| r.lambda2_margin >= -1e-6));
        assert!(gap_lower_bounds(&c, &[1.0]).is_err());
        assert!(gap_lower_bounds(&c, &[0.0]).is_err());
    }

    #[test]
    fn drift_identity_is_small() {
        let coarse = flat(512).drift_identity_residual();
        let fine = flat(1024).drift_identity_residual();
        assert!(fine < 1e-2, "{fine}");
        assert!(fine <= coarse * 1.01);
    }

    #[test]
    fn csv_header_and_rows() {
        let c = flat(64);
        let csv = c.to_csv();
        assert!(csv.starts_with("t,phi1,phi2,s,Phi,Psi\n"));
        assert_eq!(csv.lines().count(), 66);
    }
}
