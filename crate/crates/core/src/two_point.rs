//! Two-point calculus on `Omega x Omega` and the pairwise inequality checks built on it.

use serde::{Deserialize, Serialize};

use crate::elliptic::EigenSolution;
use crate::error::{GapError, Result};
use crate::geometry::{dot, norm, sub, ConvexDomain, Point};
use crate::grid::MaskedGrid;
use crate::potential::{Potential1D, PotentialND};
use crate::report::{PairCheckAccumulator, PairCheckReport};
use crate::sampling::{PointPair, RdSequence};
use crate::sturm_liouville::{gap_lower_bounds, BoundTable, OneDimComparison};

const PI: f64 = std::f64::consts::PI;

/// `X = |y - x|` and its derivatives with respect to `y`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPointFrame {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub dist: f64,
    /// `X_i = (y_i - x_i) / X`.
    pub unit: Vec<f64>,
    /// `X_ij = (delta_ij - X_i X_j) / X`, row-major.
    pub hess: Vec<f64>,
    /// `X_ijk = -(X_ik X_j + X_i X_jk + X_ij X_k) / X`, index `(i n + j) n + k`.
    pub third: Vec<f64>,
}

impl TwoPointFrame {
    /// Builds the frame; `reference_length` (usually the diameter) sets the
    /// coincidence threshold `1e-9 * reference_length`.
    pub fn new(x: &[f64], y: &[f64], reference_length: f64) -> Result<Self> {
        if x.len() != y.len() || x.is_empty() {
            return Err(GapError::Parameter("pair points must share a positive dimension".into()));
        }
        let n = x.len();
        let diff: Vec<f64> = y.iter().zip(x).map(|(a, b)| a - b).collect();
        let dist = crate::linalg::norm2(&diff);
        let threshold = 1e-9 * reference_length;
        if !(dist > threshold) {
            return Err(GapError::DegeneratePair {
                separation: dist,
                threshold,
            });
        }
        let unit: Vec<f64> = diff.iter().map(|v| v / dist).collect();
        let mut hess = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                let delta = if i == j { 1.0 } else { 0.0 };
                hess[i * n + j] = (delta - unit[i] * unit[j]) / dist;
            }
        }
        let mut third = vec![0.0; n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    third[(i * n + j) * n + k] = -(hess[i * n + k] * unit[j]
                        + unit[i] * hess[j * n + k]
                        + hess[i * n + j] * unit[k])
                        / dist;
                }
            }
        }
        Ok(Self {
            x: x.to_vec(),
            y: y.to_vec(),
            dist,
            unit,
            hess,
            third,
        })
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

pub fn build_frame(x: &[f64], y: &[f64], reference_length: f64) -> Result<TwoPointFrame> {
    TwoPointFrame::new(x, y, reference_length)
}

/// Stencil width `min(rho(x), rho(y)) / 8`.
pub fn default_stencil(domain: &ConvexDomain, x: Point, y: Point) -> Result<f64> {
    Ok(domain.boundary_distance(x)?.min(domain.boundary_distance(y)?) / 8.0)
}

/// `L F = sum_i (d/dx_i + d/dy_i)^2 F - 4 sum_ij X_i X_j d^2 F / dx_i dy_j` by centered differences.
///
/// When `domain` is given every stencil point must lie strictly inside it.
pub fn apply_coupling_operator(
    f: &dyn Fn(&[f64], &[f64]) -> f64,
    x: &[f64],
    y: &[f64],
    h: f64,
    domain: Option<&ConvexDomain>,
) -> Result<f64> {
    if !(h > 0.0) {
        return Err(GapError::Parameter(format!("stencil width must be positive, got {h}")));
    }
    let n = x.len();
    let reference = domain.map_or_else(|| crate::linalg::norm2(x).max(crate::linalg::norm2(y)).max(1.0), |d| d.diameter());
    let frame = TwoPointFrame::new(x, y, reference)?;
    let check = |p: &[f64]| -> Result<()> {
        if let Some(d) = domain {
            let q = [p[0], if n > 1 { p[1] } else { 0.0 }];
            if !(d.signed_distance(q) > 0.0) {
                return Err(GapError::StencilOutOfDomain(p.to_vec()));
            }
        }
        Ok(())
    };
    let shifted = |base: &[f64], dir: &[f64], t: f64| -> Vec<f64> {
        base.iter().zip(dir).map(|(b, d)| b + t * d).collect()
    };
    let mut evals = Vec::new();
    let mut eval = |a: Vec<f64>, b: Vec<f64>| -> Result<f64> {
        check(&a)?;
        check(&b)?;
        let v = f(&a, &b);
        evals.push(v);
        Ok(v)
    };
    let f0 = eval(x.to_vec(), y.to_vec())?;
    let mut total = 0.0;
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let fp = eval(shifted(x, &e, h), shifted(y, &e, h))?;
        let fm = eval(shifted(x, &e, -h), shifted(y, &e, -h))?;
        total += (fp - 2.0 * f0 + fm) / (h * h);
    }
    let u = &frame.unit;
    let fpp = eval(shifted(x, u, h), shifted(y, u, h))?;
    let fpm = eval(shifted(x, u, h), shifted(y, u, -h))?;
    let fmp = eval(shifted(x, u, -h), shifted(y, u, h))?;
    let fmm = eval(shifted(x, u, -h), shifted(y, u, -h))?;
    total -= 4.0 * (fpp - fpm - fmp + fmm) / (4.0 * h * h);
    Ok(total)
}

/// `|xi + eta|^2 - 4 <xi, X~> <eta, X~>`, the symbol of the coupling operator.
pub fn quadratic_form_check(frame: &TwoPointFrame, xi: &[f64], eta: &[f64]) -> f64 {
    let sum: f64 = xi.iter().zip(eta).map(|(a, b)| (a + b) * (a + b)).sum();
    let a: f64 = xi.iter().zip(&frame.unit).map(|(p, q)| p * q).sum();
    let b: f64 = eta.iter().zip(&frame.unit).map(|(p, q)| p * q).sum();
    sum - 4.0 * a * b
}

/// Margin `2 V~'(X/2) - [grad V(y) - grad V(x)] . X~` per pair.
pub fn verify_modulus(
    potential: &PotentialND,
    modulus: &Potential1D,
    domain: &ConvexDomain,
    pairs: &[PointPair],
    tolerance: f64,
) -> PairCheckReport {
    let mut acc = PairCheckAccumulator::new("modulus", tolerance);
    let threshold = 1e-9 * domain.diameter();
    for p in pairs {
        if !domain.contains(p.x) || !domain.contains(p.y) {
            acc.skip("outside-domain");
            continue;
        }
        let v = sub(p.y, p.x);
        let sep = norm(v);
        if sep <= threshold {
            acc.skip("coincident");
            continue;
        }
        let lhs = 2.0 * modulus.derivative(0.5 * sep);
        let rhs = dot(sub(potential.gradient(p.y), potential.gradient(p.x)), v) / sep;
        acc.record(p.x, p.y, lhs - rhs);
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusEstimate {
    /// Half-separations, from `0` to `d/2`.
    pub s: Vec<f64>,
    /// `(1/2) min [grad V(y) - grad V(x)] . X~` over sampled pairs with `|y - x| = 2s`.
    pub sampled: Vec<Option<f64>>,
    pub pair_counts: Vec<usize>,
    /// Nondecreasing lower envelope of `sampled`.
    pub envelope: Vec<f64>,
    /// Even tabulated modulus built from the envelope, lagged by one node so that
    /// linear interpolation never exceeds the envelope value at the left node.
    pub modulus: Potential1D,
}

/// Number of chord directions tried per half-separation (they include both axes).
const MODULUS_DIRECTIONS: usize = 32;

pub fn estimate_modulus(
    potential: &PotentialND,
    domain: &ConvexDomain,
    s_grid: &[f64],
    samples_per_s: usize,
    seed: u64,
) -> Result<ModulusEstimate> {
    if samples_per_s == 0 {
        return Err(GapError::InsufficientSamples("zero samples per separation".into()));
    }
    let half = 0.5 * domain.diameter();
    let mut s: Vec<f64> = s_grid.iter().map(|v| v.clamp(0.0, half)).filter(|v| v.is_finite()).collect();
    s.push(0.0);
    s.push(half);
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    s.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * half);
    let dim = domain.dim();
    let anchors = crate::sampling::sample_interior(domain, samples_per_s, 0.0, seed)?;
    let mut offsets = RdSequence::new(1, seed ^ 0xa5a5);
    let offset_draws: Vec<f64> = (0..samples_per_s).map(|_| offsets.next_point()[0]).collect();
    let mut sampled = Vec::with_capacity(s.len());
    let mut pair_counts = Vec::with_capacity(s.len());
    for &sk in &s {
        if sk == 0.0 {
            sampled.push(Some(0.0));
            pair_counts.push(0);
            continue;
        }
        let sep = 2.0 * sk;
        let mut best = f64::INFINITY;
        let mut count = 0;
        for (m, p) in anchors.iter().enumerate() {
            let u = if dim == 1 {
                [1.0, 0.0]
            } else {
                let a = PI * (m % MODULUS_DIRECTIONS) as f64 / MODULUS_DIRECTIONS as f64;
                [a.cos(), a.sin()]
            };
            let fwd = domain.ray_exit(*p, u);
            let back = domain.ray_exit(*p, [-u[0], -u[1]]);
            let len = fwd + back;
            if len < sep {
                continue;
            }
            let start = -back + offset_draws[m] * (len - sep);
            let x = [p[0] + start * u[0], p[1] + start * u[1]];
            let y = [x[0] + sep * u[0], x[1] + sep * u[1]];
            let q = dot(sub(potential.gradient(y), potential.gradient(x)), u);
            best = best.min(0.5 * q);
            count += 1;
        }
        sampled.push(if count > 0 { Some(best) } else { None });
        pair_counts.push(count);
    }
    let mut filled = Vec::with_capacity(s.len());
    let mut last = 0.0;
    for v in &sampled {
        if let Some(v) = v {
            last = *v;
        }
        filled.push(last);
    }
    let mut envelope = filled.clone();
    for k in (0..envelope.len().saturating_sub(1)).rev() {
        envelope[k] = envelope[k].min(envelope[k + 1]);
    }
    envelope[0] = envelope[0].min(0.0);
    let derivs: Vec<f64> = (0..s.len()).map(|k| if k == 0 { 0.0 } else { envelope[k - 1].max(0.0).min(envelope[k]) }).collect();
    let mut values = vec![0.0; s.len()];
    for k in 1..s.len() {
        values[k] = values[k - 1] + 0.5 * (derivs[k - 1] + derivs[k]) * (s[k] - s[k - 1]);
    }
    Ok(ModulusEstimate {
        modulus: Potential1D::Tabulated {
            nodes: s.clone(),
            values,
            derivatives: Some(derivs),
            even: true,
        },
        s,
        sampled,
        pair_counts,
        envelope,
    })
}

/// Margin budget `c1 h + c2 h_stencil^2` for discrete two-point checks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceBudget {
    pub c1: f64,
    pub c2: f64,
}

impl Default for ToleranceBudget {
    fn default() -> Self {
        Self { c1: 1.21, c2: 0.0 }
    }
}

impl ToleranceBudget {
    pub fn tolerance(&self, h: f64, stencil: f64) -> f64 {
        self.c1 * h + self.c2 * stencil * stencil
    }
}

/// Fits `c1` on the flat unit interval, where the exact margin is zero for
/// symmetric pairs: the largest positive discrete margin over all node pairs,
/// divided by `h`, with 10% headroom. `c2` is zero because the check's stencil
/// is the grid itself.
pub fn calibrate_budget(spacings: &[f64], collar_factor: f64) -> Result<ToleranceBudget> {
    let iv = ConvexDomain::interval(-0.5, 0.5)?;
    let comparison = crate::sturm_liouville::solve_1d(&Potential1D::zero(), 1.0, 4096)?;
    let mut ratio = 0.0f64;
    for &h in spacings {
        let op = crate::elliptic::assemble(&iv, &PotentialND::zero(), h)?;
        let sol = crate::elliptic::lowest_eigenpairs(&op, crate::elliptic::EigenOptions::default())?;
        let n = sol.grid.len();
        let pairs: Vec<PointPair> = (0..n)
            .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
            .map(|(i, j)| PointPair {
                x: sol.grid.position(i),
                y: sol.grid.position(j),
            })
            .collect();
        let report = log_concavity_margins(
            "calibration",
            LogStencil::Quotient,
            &sol.grid,
            &sol.phi1,
            &comparison,
            &pairs,
            collar_factor * h,
            f64::INFINITY,
        );
        ratio = ratio.max(report.max_margin.unwrap_or(0.0) / h);
    }
    Ok(ToleranceBudget {
        c1: 1.1 * ratio,
        c2: 0.0,
    })
}

/// Margin `[grad log phi_1(y) - grad log phi_1(x)] . X~ - Phi(X)` at grid nodes.
///
/// Pair points are snapped to their nearest interior nodes; nodes inside the
/// collar `rho <= collar` (default `2h`) are skipped.
pub fn check_log_concavity(
    solution: &EigenSolution,
    comparison: &OneDimComparison,
    pairs: &[PointPair],
    collar: Option<f64>,
    budget: ToleranceBudget,
) -> PairCheckReport {
    let h = solution.grid.h;
    log_concavity_margins(
        "log-concavity",
        LogStencil::Quotient,
        &solution.grid,
        &solution.phi1,
        comparison,
        pairs,
        collar.unwrap_or(2.0 * h),
        budget.tolerance(h, h),
    )
}

/// Snaps a pair to interior nodes outside the collar, recording the skip reason otherwise.
pub(crate) fn snap_pair(
    grid: &MaskedGrid,
    pair: &PointPair,
    collar: f64,
    acc: &mut PairCheckAccumulator,
) -> Option<(usize, usize)> {
    let (Some(i), Some(j)) = (grid.nearest_node(pair.x), grid.nearest_node(pair.y)) else {
        acc.skip("off-grid");
        return None;
    };
    if grid.rho(i) <= collar || grid.rho(j) <= collar {
        acc.skip("collar");
        return None;
    }
    if i == j {
        acc.skip("coincident");
        return None;
    }
    Some((i, j))
}

/// How `grad log f` is discretised at a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum LogStencil {
    /// `grad f / f`.
    Quotient,
    /// Differences of `log f`.
    LogDifference,
}

/// `[grad log f(y) - grad log f(x)] . X~ - Phi(X)` for a positive nodal field `f`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn log_concavity_margins(
    check: &str,
    stencil: LogStencil,
    grid: &MaskedGrid,
    field: &[f64],
    comparison: &OneDimComparison,
    pairs: &[PointPair],
    collar: f64,
    tolerance: f64,
) -> PairCheckReport {
    let mut acc = PairCheckAccumulator::new(check, tolerance);
    for p in pairs {
        let Some((i, j)) = snap_pair(grid, p, collar, &mut acc) else {
            continue;
        };
        let (x, y) = (grid.position(i), grid.position(j));
        let v = sub(y, x);
        let sep = norm(v);
        if sep >= comparison.d {
            acc.skip("beyond-comparison-diameter");
            continue;
        }
        let grad = |k| match stencil {
            LogStencil::Quotient => grid.log_gradient(field, k),
            LogStencil::LogDifference => grid.gradient_of_log(field, k),
        };
        let (Some(gx), Some(gy)) = (grad(i), grad(j)) else {
            acc.skip("nonpositive-field");
            continue;
        };
        acc.record(x, y, dot(sub(gy, gx), v) / sep - comparison.phi(sep));
    }
    acc.finish()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub s: f64,
    pub bound: f64,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapComparison {
    pub gap: f64,
    pub comparison_gap: f64,
    /// `(lambda_2 - lambda_1) - (lambda~_2 - lambda~_1)`.
    pub margin: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// `3 pi^2 / d^2`.
    pub diameter_bound: f64,
    pub diameter_margin: f64,
    /// `gap - [4 s (1 - s) pi^2/d^2 + 2 s alpha~]` per `s`.
    pub alpha_bounds: Vec<BoundCheck>,
    pub bound_table: BoundTable,
}

impl GapComparison {
    /// One row per `s`; the diameter bound is repeated as a column for plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("s,alpha_bound,gap,margin,comparison_gap,diameter_bound\n");
        for r in &self.alpha_bounds {
            out.push_str(&format!(
                "{:.6},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
                r.s, r.bound, self.gap, r.margin, self.comparison_gap, self.diameter_bound
            ));
        }
        out
    }
}

/// Compares the domain gap with the comparison gap and the explicit lower bounds.
/// Passes when `margin >= -tolerance`.
pub fn check_gap_comparison(
    solution: &EigenSolution,
    comparison: &OneDimComparison,
    s_values: &[f64],
    tolerance: f64,
) -> Result<GapComparison> {
    let d = solution.grid.domain.diameter();
    if (d - comparison.d).abs() > 1e-9 * d {
        return Err(GapError::Config(format!(
            "comparison diameter {} does not match domain diameter {d}",
            comparison.d
        )));
    }
    let gap = solution.gap();
    let table = gap_lower_bounds(comparison, s_values)?;
    let margin = gap - comparison.sigma;
    let diameter_bound = 3.0 * PI * PI / (d * d);
    Ok(GapComparison {
        gap,
        comparison_gap: comparison.sigma,
        margin,
        tolerance,
        passed: margin >= -tolerance,
        diameter_bound,
        diameter_margin: gap - diameter_bound,
        alpha_bounds: table
            .rows
            .iter()
            .map(|r| BoundCheck {
                s: r.s,
                bound: r.gap_bound,
                margin: gap - r.gap_bound,
            })
            .collect(),
        bound_table: table,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn calibrated_budget_matches_default() {
        let b = calibrate_budget(&[1.0 / 128.0, 1.0 / 256.0], 2.0).unwrap();
        let d = ToleranceBudget::default();
        assert!(b.c1 <= d.c1 && b.c1 > 0.95 * d.c1, "{b:?}");
    }

    #[test]
    fn frame_examples() {
        let f = build_frame(&[0.3], &[0.9], 1.0).unwrap();
        assert_eq!(f.hess, vec![0.0]);
        let f = build_frame(&[0.0, 0.0], &[2.0, 0.0], 2.0).unwrap();
        assert_eq!(f.unit, vec![1.0, 0.0]);
        assert_relative_eq!(f.hess[0], 0.0);
        assert_relative_eq!(f.hess[1], 0.0);
        assert_relative_eq!(f.hess[3], 0.5);
        assert!(matches!(
            build_frame(&[0.0, 0.0], &[0.0, 1e-12], 1.0),
            Err(GapError::DegeneratePair { .. })
        ));
    }

    #[test]
    fn third_tensor_is_derivative_of_hessian() {
        let x = [0.1, -0.3];
        let y = [0.7, 0.2];
        let f = build_frame(&x, &y, 1.0).unwrap();
        let e = 1e-6;
        for k in 0..2 {
            let mut yp = y;
            let mut ym = y;
            yp[k] += e;
            ym[k] -= e;
            let fp = build_frame(&x, &yp, 1.0).unwrap();
            let fm = build_frame(&x, &ym, 1.0).unwrap();
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (fp.hess[i * 2 + j] - fm.hess[i * 2 + j]) / (2.0 * e);
                    assert_relative_eq!(f.third[(i * 2 + j) * 2 + k], fd, epsilon = 1e-6);
                }
            }
        }
    }

    #[test]
    fn coupling_operator_examples() {
        let f = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(p, q)| (q - p) * (q - p)).sum() };
        let v = apply_coupling_operator(&f, &[0.1, 0.2], &[0.6, -0.1], 1e-3, None).unwrap();
        assert_relative_eq!(v, 8.0, epsilon = 1e-6);
        let affine = |a: &[f64], b: &[f64]| 3.0 * a[0] - 2.0 * b[1] + 0.5 * a[1] + 1.0;
        let v = apply_coupling_operator(&affine, &[0.1, 0.2], &[0.6, -0.1], 1e-3, None).unwrap();
        assert!(v.abs() < 1e-6);
        let disk = ConvexDomain::disk([0.0, 0.0], 1.0).unwrap();
        assert!(matches!(
            apply_coupling_operator(&f, &[0.0, 0.0], &[0.9999, 0.0], 1e-3, Some(&disk)),
            Err(GapError::StencilOutOfDomain(_))
        ));
    }

    #[test]
    fn quadratic_form_examples() {
        let f = build_frame(&[0.0, 0.0], &[1.0, 1.0], 2.0).unwrap();
        let u = f.unit.clone();
        assert!(quadratic_form_check(&f, &u, &u).abs() < 1e-14);
        let xi = [0.3, -1.2];
        let eta = [-0.3, 1.2];
        let a = xi[0] * u[0] + xi[1] * u[1];
        assert_relative_eq!(quadratic_form_check(&f, &xi, &eta), 4.0 * a * a, epsilon = 1e-14);
    }

    #[test]
    fn modulus_examples() {
        let disk = ConvexDomain::disk([0.0, 0.0], 1.0).unwrap();
        let pairs = crate::sampling::sample_pairs(&disk, &crate::sampling::PairSampling::uniform(500, 0.0, 1)).unwrap();
        let alpha = 1.5;
        let quad = PotentialND::QuadraticForm {
            matrix: [[alpha, 0.0], [0.0, alpha]],
            center: [0.0, 0.0],
            offset: 0.0,
        };
        let r = verify_modulus(&quad, &Potential1D::zero(), &disk, &pairs, 1e-12);
        assert!(r.passed);
        for rec in &r.records {
            assert_relative_eq!(rec.margin, -alpha * crate::geometry::distance(rec.x, rec.y), epsilon = 1e-12);
        }
        let flat = verify_modulus(&PotentialND::zero(), &Potential1D::zero(), &disk, &pairs, 1e-12);
        assert_eq!(flat.max_margin, Some(0.0));
        let too_strong = Potential1D::PolynomialEven {
            coefficients: vec![0.0, alpha],
        };
        let bad = verify_modulus(&quad, &too_strong, &disk, &pairs, 1e-12);
        assert!(!bad.passed);
        for rec in &bad.records {
            assert_relative_eq!(rec.margin, alpha * crate::geometry::distance(rec.x, rec.y), epsilon = 1e-12);
        }
    }

    #[test]
    fn estimated_modulus_for_quadratic() {
        let disk = ConvexDomain::disk([0.0, 0.0], 1.0).unwrap();
        let alpha = 2.0;
        let quad = PotentialND::QuadraticForm {
            matrix: [[alpha, 0.0], [0.0, alpha]],
            center: [0.0, 0.0],
            offset: 0.0,
        };
        let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
        let est = estimate_modulus(&quad, &disk, &grid, 400, 3).unwrap();
        for k in 0..est.s.len() {
            if est.sampled[k].is_some() {
                assert_relative_eq!(est.envelope[k], alpha * est.s[k], epsilon = 1e-9);
            } else {
                assert_eq!(est.envelope[k], est.envelope[k - 1]);
            }
        }
        assert!(est.modulus.derivative(0.5) <= alpha * 0.5 + 1e-12);
        let flat = estimate_modulus(&PotentialND::Constant { value: 4.0 }, &disk, &grid, 100, 3).unwrap();
        assert!(flat.envelope.iter().all(|v| *v == 0.0));
        assert_eq!(flat.modulus.value(0.7), 0.0);
    }
}
