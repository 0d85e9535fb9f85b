//! Dirichlet heat flow `u_t = Laplace u - V u`, the Neumann drift flow, and the
//! long-time quantities extracted from them.

use serde::{Deserialize, Serialize};

use crate::elliptic::{EigenSolution, EllipticOperator};
use crate::error::{GapError, Result};
use crate::geometry::{norm, sub, Point};
use crate::grid::MaskedGrid;
use crate::linalg::{self, BandedLu, CsrMatrix, EnvelopeCholesky};
use crate::report::{PairCheckAccumulator, PairCheckReport};
use crate::sampling::PointPair;
use crate::sturm_liouville::OneDimComparison;
use crate::two_point::{log_concavity_margins, snap_pair, LogStencil};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeScheme {
    #[default]
    ImplicitEuler,
    Trapezoid,
}

impl TimeScheme {
    /// Per-step factor applied to an eigenmode of `-L` with eigenvalue `lambda`.
    pub fn amplification(self, dt: f64, lambda: f64) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => 1.0 / (1.0 + dt * lambda),
            TimeScheme::Trapezoid => (1.0 - 0.5 * dt * lambda) / (1.0 + 0.5 * dt * lambda),
        }
    }

    /// Inverse of [`TimeScheme::amplification`] in `lambda`.
    pub fn rate_from_amplification(self, dt: f64, r: f64) -> f64 {
        match self {
            TimeScheme::ImplicitEuler => (1.0 / r - 1.0) / dt,
            TimeScheme::Trapezoid => 2.0 * (1.0 - r) / (dt * (1.0 + r)),
        }
    }

    pub fn order(self) -> usize {
        match self {
            TimeScheme::ImplicitEuler => 1,
            TimeScheme::Trapezoid => 2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DriftScheme {
    #[default]
    Upwind,
    Centered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowKind {
    Dirichlet,
    NeumannDrift,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    pub scheme: TimeScheme,
    /// A snapshot is stored every this many steps, plus the final step.
    pub snapshot_every: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self {
            scheme: TimeScheme::ImplicitEuler,
            snapshot_every: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowTrajectory {
    pub kind: FlowKind,
    pub grid: MaskedGrid,
    pub scheme: TimeScheme,
    pub drift: Option<DriftScheme>,
    pub dt: f64,
    pub steps: usize,
    pub times: Vec<f64>,
    /// Step index of each snapshot.
    pub step_index: Vec<usize>,
    pub snapshots: Vec<Vec<f64>>,
}

impl FlowTrajectory {
    pub fn final_time(&self) -> f64 {
        *self.times.last().expect("trajectories store the initial snapshot")
    }

    pub fn last(&self) -> &[f64] {
        self.snapshots.last().expect("trajectories store the initial snapshot")
    }
}

fn step_count(t_final: f64, dt: f64) -> Result<(usize, f64)> {
    if !(t_final > 0.0) || !(dt > 0.0) || !t_final.is_finite() {
        return Err(GapError::Parameter(format!("need T > 0 and dt > 0, got T = {t_final}, dt = {dt}")));
    }
    if dt > t_final / 100.0 * (1.0 + 1e-12) {
        return Err(GapError::Parameter(format!("dt = {dt} exceeds T/100 = {}", t_final / 100.0)));
    }
    let steps = (t_final / dt - 1e-9).ceil() as usize;
    Ok((steps, t_final / steps as f64))
}

fn check_initial(grid: &MaskedGrid, u0: &[f64]) -> Result<()> {
    if u0.len() != grid.len() {
        return Err(GapError::Parameter(format!(
            "initial datum has {} values for {} nodes",
            u0.len(),
            grid.len()
        )));
    }
    if u0.iter().any(|v| !v.is_finite()) {
        return Err(GapError::Parameter("initial datum is not finite".into()));
    }
    Ok(())
}

/// Time stepping of `u_t = -A u` for the assembled operator `A = -Laplace_h + V`.
pub fn evolve_dirichlet(
    op: &EllipticOperator,
    u0: &[f64],
    t_final: f64,
    dt: f64,
    opts: FlowOptions,
) -> Result<FlowTrajectory> {
    check_initial(&op.grid, u0)?;
    let (steps, dt) = step_count(t_final, dt)?;
    let (lhs, explicit) = match opts.scheme {
        TimeScheme::ImplicitEuler => (op.matrix.scaled_plus_identity(1.0, dt), None),
        TimeScheme::Trapezoid => (
            op.matrix.scaled_plus_identity(1.0, 0.5 * dt),
            Some(op.matrix.scaled_plus_identity(1.0, -0.5 * dt)),
        ),
    };
    let factor = EnvelopeCholesky::factor(&lhs)
        .map_err(|e| GapError::LinearSolve(format!("implicit step matrix: {e}")))?;
    let mut u = u0.to_vec();
    let mut tmp = vec![0.0; u.len()];
    run_steps(FlowKind::Dirichlet, &op.grid, opts, None, dt, steps, &mut u, |u| {
        if let Some(m) = &explicit {
            m.matvec_into(u, &mut tmp);
            u.copy_from_slice(&tmp);
        }
        factor.solve_in_place(u);
    })
}

#[allow(clippy::too_many_arguments)]
fn run_steps(
    kind: FlowKind,
    grid: &MaskedGrid,
    opts: FlowOptions,
    drift: Option<DriftScheme>,
    dt: f64,
    steps: usize,
    u: &mut Vec<f64>,
    mut step: impl FnMut(&mut Vec<f64>),
) -> Result<FlowTrajectory> {
    let every = opts.snapshot_every.max(1);
    let mut traj = FlowTrajectory {
        kind,
        grid: grid.clone(),
        scheme: opts.scheme,
        drift,
        dt,
        steps,
        times: vec![0.0],
        step_index: vec![0],
        snapshots: vec![u.clone()],
    };
    for n in 1..=steps {
        step(u);
        if n % every == 0 || n == steps {
            if u.iter().any(|v| !v.is_finite()) {
                return Err(GapError::LinearSolve(format!("non-finite state after step {n}")));
            }
            traj.times.push(n as f64 * dt);
            traj.step_index.push(n);
            traj.snapshots.push(u.clone());
        }
    }
    Ok(traj)
}

/// Generator of `v_t = Laplace_h v + 2 grad_h log phi_1 . grad_h v` with zero-flux
/// closure: a missing neighbour mirrors the node's own value, so rows sum to zero.
pub fn drift_generator(solution: &EigenSolution, drift: DriftScheme) -> Result<CsrMatrix> {
    let grid = &solution.grid;
    let h = grid.h;
    let n = grid.len();
    let mut triplets = Vec::with_capacity(n * (1 + 2 * grid.dim));
    for k in 0..n {
        let b = solution.log_gradient(k).ok_or_else(|| {
            GapError::CorruptEigenfunction(format!("ground state not positive at {:?}", grid.position(k)))
        })?;
        let mut diag = 0.0;
        for a in 0..grid.dim {
            let ba = 2.0 * b[a];
            for dir in [-1i64, 1] {
                let Some(j) = grid.neighbor(k, a, dir) else {
                    continue;
                };
                let adv = match drift {
                    DriftScheme::Upwind => (dir as f64 * ba).max(0.0) / h,
                    DriftScheme::Centered => dir as f64 * ba / (2.0 * h),
                };
                let c = 1.0 / (h * h) + adv;
                triplets.push((k, j, c));
                diag -= c;
            }
        }
        triplets.push((k, k, diag));
    }
    CsrMatrix::from_triplets(n, triplets)
}

pub fn evolve_neumann_drift(
    solution: &EigenSolution,
    v0: &[f64],
    t_final: f64,
    dt: f64,
    drift: DriftScheme,
    opts: FlowOptions,
) -> Result<FlowTrajectory> {
    check_initial(&solution.grid, v0)?;
    let (steps, dt) = step_count(t_final, dt)?;
    let gen = drift_generator(solution, drift)?;
    let (lhs, explicit) = match opts.scheme {
        TimeScheme::ImplicitEuler => (gen.scaled_plus_identity(1.0, -dt), None),
        TimeScheme::Trapezoid => (
            gen.scaled_plus_identity(1.0, -0.5 * dt),
            Some(gen.scaled_plus_identity(1.0, 0.5 * dt)),
        ),
    };
    let factor = BandedLu::factor(&lhs)?;
    let mut v = v0.to_vec();
    let mut tmp = vec![0.0; v.len()];
    run_steps(FlowKind::NeumannDrift, &solution.grid, opts, Some(drift), dt, steps, &mut v, |v| {
        if let Some(m) = &explicit {
            m.matvec_into(v, &mut tmp);
            v.copy_from_slice(&tmp);
        }
        factor.solve_in_place(v);
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecaySample {
    pub t: f64,
    /// `max |R(lambda_1)^{-n} u_n - a_1 phi_1|`.
    pub deviation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    /// Least-squares slope of `log deviation` against `t`; about `-(lambda_2 - lambda_1)`.
    pub exponent: Option<f64>,
    /// `exp` of the fitted intercept.
    pub amplitude: Option<f64>,
    /// Root mean square of the log-linear fit residuals.
    pub residual: Option<f64>,
    /// The gap implied by the fitted per-step ratio under the time scheme's amplification factor.
    pub corrected_gap: Option<f64>,
    pub reference_gap: f64,
    pub a1: f64,
    pub window: (f64, f64),
    pub points: usize,
    pub zero_signal: bool,
    pub warnings: Vec<String>,
    pub series: Vec<DecaySample>,
}

impl DecayFit {
    /// `|(-exponent) / reference_gap - 1|`.
    pub fn relative_error(&self) -> Option<f64> {
        self.exponent.map(|e| (-e / self.reference_gap - 1.0).abs())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,deviation,fitted\n");
        for s in &self.series {
            let fitted = match (self.exponent, self.amplitude) {
                (Some(e), Some(a)) => format!("{:e}", a * (e * s.t).exp()),
                _ => String::new(),
            };
            out.push_str(&format!("{:e},{:e},{}\n", s.t, s.deviation, fitted));
        }
        out
    }
}

/// Relative size below which the normalised deviation is treated as round-off.
const DECAY_FLOOR: f64 = 1e-10;

/// Fits the exponential decay of `R(lambda_1)^{-n} u_n - a_1 phi_1`, where `R` is the
/// scheme's per-step amplification, so the time discretisation of mode one cancels.
/// The default window is the last 60% of the trajectory.
pub fn fit_gap_from_decay(
    traj: &FlowTrajectory,
    solution: &EigenSolution,
    window: Option<(f64, f64)>,
) -> Result<DecayFit> {
    if traj.kind != FlowKind::Dirichlet {
        return Err(GapError::Parameter("decay fits need a Dirichlet trajectory".into()));
    }
    if traj.grid.len() != solution.grid.len() {
        return Err(GapError::Parameter("trajectory and eigen solution use different grids".into()));
    }
    let grid = &solution.grid;
    let a1 = grid.inner(&traj.snapshots[0], &solution.phi1);
    let r1 = traj.scheme.amplification(traj.dt, solution.lambda1);
    let peak = solution.phi1.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = (a1.abs() * peak).max(f64::MIN_POSITIVE);
    let series: Vec<DecaySample> = traj
        .snapshots
        .iter()
        .zip(&traj.times)
        .zip(&traj.step_index)
        .map(|((u, &t), &n)| {
            let norm = r1.powi(-(n as i32));
            let deviation = u
                .iter()
                .zip(&solution.phi1)
                .fold(0.0f64, |m, (uk, pk)| m.max((uk * norm - a1 * pk).abs()));
            DecaySample { t, deviation }
        })
        .collect();
    let gap = solution.gap();
    let t_max = traj.final_time();
    let (t0, mut t1) = window.unwrap_or((0.4 * t_max, t_max));
    let mut warnings = Vec::new();
    if t_max * gap < 5.0 {
        warnings.push(format!("trajectory covers only {:.2} gap time units; 5 are advised", t_max * gap));
    }
    let mut fit = DecayFit {
        exponent: None,
        amplitude: None,
        residual: None,
        corrected_gap: None,
        reference_gap: gap,
        a1,
        window: (t0, t1),
        points: 0,
        zero_signal: false,
        warnings,
        series,
    };
    if fit.series.iter().all(|s| s.deviation <= DECAY_FLOOR * scale) {
        fit.zero_signal = true;
        fit.warnings.push("deviation from the first mode is at round-off level".into());
        return Ok(fit);
    }
    let mut pts = Vec::new();
    for s in &fit.series {
        if s.t < t0 - 1e-12 || s.t > t1 + 1e-12 {
            continue;
        }
        if s.deviation <= DECAY_FLOOR * scale {
            t1 = pts.last().map_or(t0, |p: &(f64, f64)| p.0);
            fit.warnings.push(format!("window shortened to end at t = {t1:.4e}: deviation reached round-off"));
            break;
        }
        pts.push((s.t, s.deviation.ln()));
    }
    fit.window = (t0, t1);
    fit.points = pts.len();
    if pts.len() < 3 {
        fit.warnings.push(format!("only {} usable points in the fit window", pts.len()));
        return Ok(fit);
    }
    let m = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mt;
    let residual = (pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / m).sqrt();
    let r2 = (slope * traj.dt).exp() * r1;
    fit.exponent = Some(slope);
    fit.amplitude = Some(intercept.exp());
    fit.residual = Some(residual);
    fit.corrected_gap = Some(traj.scheme.rate_from_amplification(traj.dt, r2) - solution.lambda1);
    Ok(fit)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogGradientField {
    pub time: f64,
    pub nodes: Vec<usize>,
    pub gradients: Vec<Point>,
    /// Nodes outside the collar skipped because the snapshot was not positive there.
    pub excluded_nonpositive: usize,
    pub warnings: Vec<String>,
}

/// `grad_h log u` of the final snapshot on nodes with `rho > collar` (default `2h`).
pub fn log_gradient_limit(traj: &FlowTrajectory, collar: Option<f64>) -> LogGradientField {
    let grid = &traj.grid;
    let collar = collar.unwrap_or(2.0 * grid.h);
    let u = traj.last();
    let mut field = LogGradientField {
        time: traj.final_time(),
        nodes: Vec::new(),
        gradients: Vec::new(),
        excluded_nonpositive: 0,
        warnings: Vec::new(),
    };
    for k in 0..grid.len() {
        if grid.rho(k) <= collar {
            continue;
        }
        match grid.log_gradient(u, k) {
            Some(g) => {
                field.nodes.push(k);
                field.gradients.push(g);
            }
            None => field.excluded_nonpositive += 1,
        }
    }
    if field.excluded_nonpositive > 0 {
        field
            .warnings
            .push(format!("{} nodes dropped: final snapshot not positive", field.excluded_nonpositive));
    }
    field
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonitorMode {
    LogGradient,
    Ratio,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZStamp {
    pub time: f64,
    pub max_margin: Option<f64>,
    pub violations: usize,
    pub report: PairCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZMonitor {
    pub mode: MonitorMode,
    pub stamps: Vec<ZStamp>,
}

impl ZMonitor {
    pub fn max_margin(&self) -> Option<f64> {
        self.stamps.iter().filter_map(|s| s.max_margin).reduce(f64::max)
    }

    pub fn passed(&self) -> bool {
        !self.stamps.is_empty() && self.stamps.iter().all(|s| s.report.passed)
    }
}

/// Evaluates the evolving two-point quantity at every stored snapshot.
///
/// Log-gradient mode uses `[grad log u(y) - grad log u(x)] . X~ - Phi(X)` on a
/// Dirichlet trajectory; ratio mode uses `|v(y) - v(x)| - exp(-sigma t) Psi(X)`
/// on a drift trajectory, covering both orderings of each pair.
pub fn monitor_z(
    traj: &FlowTrajectory,
    comparison: &OneDimComparison,
    pairs: &[PointPair],
    mode: MonitorMode,
    collar: Option<f64>,
    tolerance: f64,
) -> Result<ZMonitor> {
    let grid = &traj.grid;
    let d = grid.domain.diameter();
    if (d - comparison.d).abs() > 1e-9 * d {
        return Err(GapError::Config(format!(
            "comparison diameter {} does not match domain diameter {d}",
            comparison.d
        )));
    }
    let expected = match mode {
        MonitorMode::LogGradient => FlowKind::Dirichlet,
        MonitorMode::Ratio => FlowKind::NeumannDrift,
    };
    if traj.kind != expected {
        return Err(GapError::Parameter(format!("{mode:?} monitoring needs a {expected:?} trajectory")));
    }
    let collar = collar.unwrap_or(2.0 * grid.h);
    let stamps = traj
        .snapshots
        .iter()
        .zip(&traj.times)
        .map(|(snap, &t)| {
            let report = match mode {
                MonitorMode::LogGradient => {
                    log_concavity_margins("z-log-gradient", LogStencil::LogDifference, grid, snap, comparison, pairs, collar, tolerance)
                }
                MonitorMode::Ratio => ratio_margins(grid, snap, comparison, (-comparison.sigma * t).exp(), pairs, collar, tolerance),
            };
            ZStamp {
                time: t,
                max_margin: report.max_margin,
                violations: report.violations,
                report,
            }
        })
        .collect();
    Ok(ZMonitor { mode, stamps })
}

fn ratio_margins(
    grid: &MaskedGrid,
    v: &[f64],
    comparison: &OneDimComparison,
    weight: f64,
    pairs: &[PointPair],
    collar: f64,
    tolerance: f64,
) -> PairCheckReport {
    let mut acc = PairCheckAccumulator::new("z-ratio", tolerance);
    for p in pairs {
        let Some((i, j)) = snap_pair(grid, p, collar, &mut acc) else {
            continue;
        };
        let (x, y) = (grid.position(i), grid.position(j));
        let sep = norm(sub(y, x));
        if sep > comparison.d {
            acc.skip("beyond-comparison-diameter");
            continue;
        }
        let margin = (v[j] - v[i]).abs() - weight * comparison.psi(sep);
        if v[j] >= v[i] {
            acc.record(x, y, margin);
        } else {
            acc.record(y, x, margin);
        }
    }
    acc.finish()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioScaling {
    pub delta0: f64,
    /// `max - min` of `phi_2 / phi_1` over the nodes.
    pub oscillation: f64,
    /// Largest neighbour difference quotient of `phi_2 / phi_1`.
    pub lipschitz: f64,
    pub c_bar: f64,
}

/// `delta0 = min(c~ d / (2 osc), c~ / (2 Lip))` for `w = phi_2/phi_1`, so that
/// `delta0 (w(y) - w(x)) <= Psi(|y - x|)` holds with factor-2 slack, using `Psi(s) >= c~ s`.
pub fn ratio_scaling(solution: &EigenSolution, comparison: &OneDimComparison) -> Result<RatioScaling> {
    let grid = &solution.grid;
    let w = solution.ratio();
    let (lo, hi) = w.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    let mut lip = 0.0f64;
    for k in 0..grid.len() {
        for a in 0..grid.dim {
            if let Some(j) = grid.neighbor(k, a, 1) {
                lip = lip.max((w[j] - w[k]).abs() / grid.h);
            }
        }
    }
    let osc = hi - lo;
    let c_bar = comparison.c_bar;
    if !(osc > 0.0) || !(c_bar > 0.0) || !osc.is_finite() {
        return Err(GapError::CannotConstruct(format!(
            "ratio scaling undefined (oscillation {osc:e}, c_bar {c_bar:e})"
        )));
    }
    let delta0 = (c_bar * comparison.d / (2.0 * osc)).min(c_bar / (2.0 * lip.max(f64::MIN_POSITIVE)));
    Ok(RatioScaling {
        delta0,
        oscillation: osc,
        lipschitz: lip,
        c_bar,
    })
}

/// `max_k |u_k|`, used by the stability checks.
pub fn max_abs(u: &[f64]) -> f64 {
    u.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Discrete `L^2` norm squared.
pub fn energy(grid: &MaskedGrid, u: &[f64]) -> f64 {
    grid.h.powi(grid.dim as i32) * linalg::dot(u, u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elliptic::{assemble, lowest_eigenpairs, EigenOptions};
    use crate::geometry::ConvexDomain;
    use crate::potential::PotentialND;
    use approx::assert_relative_eq;

    fn unit_interval(h: f64) -> (EllipticOperator, EigenSolution) {
        let iv = ConvexDomain::interval(0.0, 1.0).unwrap();
        let op = assemble(&iv, &PotentialND::zero(), h).unwrap();
        let sol = lowest_eigenpairs(&op, EigenOptions::default()).unwrap();
        (op, sol)
    }

    #[test]
    fn eigenmodes_follow_amplification() {
        let (op, sol) = unit_interval(1.0 / 256.0);
        for scheme in [TimeScheme::ImplicitEuler, TimeScheme::Trapezoid] {
            let opts = FlowOptions { scheme, snapshot_every: 50 };
            for (phi, lambda) in [(&sol.phi1, sol.lambda1), (&sol.phi2, sol.lambda2)] {
                let tr = evolve_dirichlet(&op, phi, 0.1, 1e-4, opts).unwrap();
                let r = scheme.amplification(tr.dt, lambda).powi(tr.steps as i32);
                let err = tr.last().iter().zip(phi.iter()).fold(0.0f64, |m, (u, p)| m.max((u - r * p).abs()));
                assert!(err < 1e-8 * max_abs(phi), "{scheme:?} {err:e}");
            }
        }
    }

    #[test]
    fn dt_limit_enforced() {
        let (op, sol) = unit_interval(1.0 / 64.0);
        assert!(evolve_dirichlet(&op, &sol.phi1, 1.0, 0.02, FlowOptions::default()).is_err());
    }

    #[test]
    fn zero_signal_is_flagged() {
        let (op, sol) = unit_interval(1.0 / 128.0);
        let tr = evolve_dirichlet(&op, &sol.phi1, 0.6, 1e-3, FlowOptions::default()).unwrap();
        let fit = fit_gap_from_decay(&tr, &sol, None).unwrap();
        assert!(fit.zero_signal);
        assert!(fit.exponent.is_none());
    }

    #[test]
    fn decay_rate_of_a_two_mode_datum() {
        let (op, sol) = unit_interval(1.0 / 256.0);
        let u0: Vec<f64> = sol.phi1.iter().zip(&sol.phi2).map(|(a, b)| a + 0.3 * b).collect();
        let tr = evolve_dirichlet(&op, &u0, 0.2, 1e-3, FlowOptions::default()).unwrap();
        let fit = fit_gap_from_decay(&tr, &sol, None).unwrap();
        assert_relative_eq!(fit.corrected_gap.unwrap(), sol.gap(), max_relative = 1e-6);
        assert!(fit.relative_error().unwrap() < 0.2);
    }

    #[test]
    fn drift_flow_keeps_constants_and_decays_ratio() {
        let (_, sol) = unit_interval(1.0 / 256.0);
        let n = sol.grid.len();
        let tr = evolve_neumann_drift(&sol, &vec![1.0; n], 0.05, 1e-4, DriftScheme::Upwind, FlowOptions::default()).unwrap();
        assert!(tr.last().iter().all(|v| (v - 1.0).abs() < 1e-12));
        let w = sol.ratio();
        let t = 1.0 / sol.gap();
        let tr = evolve_neumann_drift(&sol, &w, t, t / 2000.0, DriftScheme::Upwind, FlowOptions::default()).unwrap();
        let f = (-sol.gap() * t).exp();
        let err = tr.last().iter().zip(&w).fold(0.0f64, |m, (v, w0)| m.max((v - f * w0).abs()));
        assert!(err < 0.02 * f * max_abs(&w), "{err:e}");
        let maxes: Vec<f64> = tr.snapshots.iter().map(|s| s.iter().cloned().fold(f64::MIN, f64::max)).collect();
        assert!(maxes.windows(2).all(|p| p[1] <= p[0] + 1e-12));
    }
}
