//! Configuration-driven experiment runs and their reports.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::elliptic::{self, EigenOptions, EigenSolution};
use crate::error::{GapError, Result};
use crate::geometry::{build_auxiliary_data, check_u0_concavity_estimate, AuxiliaryData, ConvexDomain, Theta0Samples};
use crate::grid::BoundaryScheme;
use crate::parabolic::{self, DecayFit, DriftScheme, FlowOptions, MonitorMode, TimeScheme, ZStamp};
use crate::potential::{Potential1D, PotentialND};
use crate::report::PairCheckReport;
use crate::sampling::{sample_pairs, PairSampling, PointPair};
use crate::sturm_liouville::{solve_1d, OneDimComparison};
use crate::two_point::{
    check_gap_comparison, check_log_concavity, estimate_modulus, verify_modulus, GapComparison, ModulusEstimate,
    ToleranceBudget,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub scenarios: Vec<ScenarioConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparisonKeyword {
    Estimate,
}

/// Either the keyword `"estimate"` or an explicit even potential.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComparisonSpec {
    Keyword(ComparisonKeyword),
    Given(Potential1D),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub h: f64,
    #[serde(default)]
    pub boundary: BoundaryScheme,
    #[serde(default = "default_cells")]
    pub comparison_cells: usize,
}

fn default_cells() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PairConfig {
    #[serde(default = "default_pair_count")]
    pub uniform: usize,
    #[serde(default = "default_pair_count")]
    pub stratified: usize,
    #[serde(default = "default_strata")]
    pub strata: usize,
}

fn default_pair_count() -> usize {
    20_000
}

fn default_strata() -> usize {
    16
}

impl Default for PairConfig {
    fn default() -> Self {
        Self {
            uniform: default_pair_count(),
            stratified: default_pair_count(),
            strata: default_strata(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulusConfig {
    #[serde(default = "default_s_points")]
    pub s_points: usize,
    #[serde(default = "default_samples_per_s")]
    pub samples_per_s: usize,
    /// Size of the independent pair set used for verification.
    #[serde(default = "default_pair_count")]
    pub verify_pairs: usize,
}

fn default_s_points() -> usize {
    65
}

fn default_samples_per_s() -> usize {
    512
}

impl Default for ModulusConfig {
    fn default() -> Self {
        Self {
            s_points: default_s_points(),
            samples_per_s: default_samples_per_s(),
            verify_pairs: default_pair_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuxiliaryConfig {
    /// Collar width; the domain default when absent.
    #[serde(default)]
    pub eps0: Option<f64>,
    /// Explicit exponent; otherwise `8 / theta0` from sampling.
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default = "default_pair_count")]
    pub pairs: usize,
}

impl Default for AuxiliaryConfig {
    fn default() -> Self {
        Self {
            eps0: None,
            kappa: None,
            pairs: default_pair_count(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub t_final: f64,
    pub dt: f64,
    /// Grid spacing for the flows; the scenario spacing when absent.
    #[serde(default)]
    pub h: Option<f64>,
    #[serde(default)]
    pub scheme: TimeScheme,
    #[serde(default)]
    pub drift: DriftScheme,
    #[serde(default = "default_snapshot_every")]
    pub snapshot_every: usize,
    #[serde(default = "default_monitor_pairs")]
    pub monitor_pairs: usize,
    #[serde(default)]
    pub fit_window: Option<(f64, f64)>,
}

fn default_snapshot_every() -> usize {
    10
}

fn default_monitor_pairs() -> usize {
    5_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceConfig {
    #[serde(default)]
    pub budget: ToleranceBudget,
    /// Collar in units of `h` for grid-based two-point checks.
    #[serde(default = "default_collar_factor")]
    pub collar_factor: f64,
    /// Gap comparison slack relative to the comparison ground state energy.
    #[serde(default = "default_gap_relative")]
    pub gap_relative: f64,
    #[serde(default = "default_modulus_tol")]
    pub modulus: f64,
    #[serde(default = "default_u0_tol")]
    pub u0: f64,
    /// Allowed relative error of the fitted decay exponent.
    #[serde(default = "default_decay_tol")]
    pub decay: f64,
    /// Slack for `max_s bound <= sigma`.
    #[serde(default = "default_bound_tol")]
    pub bounds: f64,
}

fn default_collar_factor() -> f64 {
    2.0
}
fn default_gap_relative() -> f64 {
    1e-3
}
fn default_modulus_tol() -> f64 {
    1e-9
}
fn default_u0_tol() -> f64 {
    1e-9
}
fn default_decay_tol() -> f64 {
    0.05
}
fn default_bound_tol() -> f64 {
    1e-6
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self {
            budget: ToleranceBudget::default(),
            collar_factor: default_collar_factor(),
            gap_relative: default_gap_relative(),
            modulus: default_modulus_tol(),
            u0: default_u0_tol(),
            decay: default_decay_tol(),
            bounds: default_bound_tol(),
        }
    }
}

/// Reference eigenvalues checked with a relative tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedSpectrum {
    #[serde(default)]
    pub lambda1: Option<f64>,
    #[serde(default)]
    pub lambda2: Option<f64>,
    #[serde(default)]
    pub gap: Option<f64>,
    pub relative: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CheckKind {
    Spectrum,
    GapComparison,
    DiameterBound,
    AlphaBounds,
    Modulus,
    LogConcavity,
    PhiEnvelope,
    PsiShape,
    U0Concavity,
    Decay,
    ZLogGradient,
    ZRatio,
}

impl CheckKind {
    pub fn name(self) -> &'static str {
        match self {
            CheckKind::Spectrum => "spectrum",
            CheckKind::GapComparison => "gap-comparison",
            CheckKind::DiameterBound => "diameter-bound",
            CheckKind::AlphaBounds => "alpha-bounds",
            CheckKind::Modulus => "modulus",
            CheckKind::LogConcavity => "log-concavity",
            CheckKind::PhiEnvelope => "phi-envelope",
            CheckKind::PsiShape => "psi-shape",
            CheckKind::U0Concavity => "u0-concavity",
            CheckKind::Decay => "decay",
            CheckKind::ZLogGradient => "z-log-gradient",
            CheckKind::ZRatio => "z-ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub domain: ConvexDomain,
    #[serde(default = "PotentialND::zero")]
    pub potential: PotentialND,
    pub comparison: ComparisonSpec,
    pub grid: GridConfig,
    #[serde(default)]
    pub pairs: PairConfig,
    #[serde(default)]
    pub modulus: ModulusConfig,
    #[serde(default)]
    pub auxiliary: Option<AuxiliaryConfig>,
    #[serde(default)]
    pub flow: Option<FlowConfig>,
    #[serde(default)]
    pub tolerance: ToleranceConfig,
    #[serde(default)]
    pub expect: Option<ExpectedSpectrum>,
    #[serde(default = "default_bounds_s")]
    pub bounds_s: Vec<f64>,
    /// Checks to run; all applicable ones when absent.
    #[serde(default)]
    pub checks: Option<Vec<CheckKind>>,
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_bounds_s() -> Vec<f64> {
    (1..=9).map(|k| k as f64 / 10.0).collect()
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| GapError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| GapError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = BTreeSet::new();
        for s in &self.scenarios {
            if s.name.is_empty() || !s.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
                return Err(GapError::Config(format!("scenario name {:?} must be nonempty [A-Za-z0-9_-]", s.name)));
            }
            if !names.insert(s.name.as_str()) {
                return Err(GapError::Config(format!("duplicate scenario name {:?}", s.name)));
            }
            s.validate().map_err(|e| {
                let msg = match e {
                    GapError::Config(m) => m,
                    other => other.to_string(),
                };
                GapError::Config(format!("scenario {}: {msg}", s.name))
            })?;
        }
        Ok(())
    }

    pub fn scenario(&self, name: Option<&str>) -> Result<&ScenarioConfig> {
        match name {
            Some(n) => self
                .scenarios
                .iter()
                .find(|s| s.name == n)
                .ok_or_else(|| GapError::Config(format!("no scenario named {n:?}"))),
            None => self
                .scenarios
                .first()
                .ok_or_else(|| GapError::Config("configuration has no scenarios".into())),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(GapError::Config(format!("{name} must be positive, got {v}")))
    }
}

impl ScenarioConfig {
    fn validate(&self) -> Result<()> {
        positive("grid.h", self.grid.h)?;
        if self.grid.comparison_cells < 64 || self.grid.comparison_cells % 2 == 1 {
            return Err(GapError::Config("grid.comparison_cells must be even and >= 64".into()));
        }
        self.potential.validate()?;
        if let ComparisonSpec::Given(p) = &self.comparison {
            p.validate(0.5 * self.domain.diameter())?;
        }
        if self.modulus.s_points < 2 || self.modulus.samples_per_s == 0 {
            return Err(GapError::Config("modulus needs s_points >= 2 and samples_per_s >= 1".into()));
        }
        if self.pairs.uniform + self.pairs.stratified == 0 {
            return Err(GapError::Config("at least one pair must be sampled".into()));
        }
        positive("tolerance.collar_factor", self.tolerance.collar_factor)?;
        if let Some(f) = &self.flow {
            positive("flow.t_final", f.t_final)?;
            positive("flow.dt", f.dt)?;
            if let Some(h) = f.h {
                positive("flow.h", h)?;
            }
            if f.dt > f.t_final / 100.0 * (1.0 + 1e-12) {
                return Err(GapError::Config("flow.dt must not exceed flow.t_final / 100".into()));
            }
        }
        if let Some(e) = &self.expect {
            positive("expect.relative", e.relative)?;
        }
        if self.bounds_s.iter().any(|s| !(*s > 0.0 && *s < 1.0)) {
            return Err(GapError::Config("bounds_s entries must lie in (0, 1)".into()));
        }
        if let Some(checks) = &self.checks {
            let set: BTreeSet<_> = checks.iter().collect();
            if set.len() != checks.len() {
                return Err(GapError::Config("checks are listed more than once".into()));
            }
            for c in checks {
                let needs_flow = matches!(c, CheckKind::Decay | CheckKind::ZLogGradient | CheckKind::ZRatio);
                if needs_flow && self.flow.is_none() {
                    return Err(GapError::Config(format!("check {} needs a flow block", c.name())));
                }
                if *c == CheckKind::Spectrum && self.expect.is_none() {
                    return Err(GapError::Config("check spectrum needs an expect block".into()));
                }
            }
        }
        Ok(())
    }

    pub fn seed(&self, global: u64) -> u64 {
        self.seed.unwrap_or(global)
    }

    /// The configured checks, or every check applicable to this scenario.
    pub fn active_checks(&self) -> Vec<CheckKind> {
        if let Some(c) = &self.checks {
            let mut c = c.clone();
            c.sort();
            return c;
        }
        let mut out = Vec::new();
        if self.expect.is_some() {
            out.push(CheckKind::Spectrum);
        }
        out.extend([CheckKind::GapComparison]);
        if self.potential.is_convex() == Some(true) {
            out.push(CheckKind::DiameterBound);
        }
        out.extend([
            CheckKind::AlphaBounds,
            CheckKind::Modulus,
            CheckKind::LogConcavity,
            CheckKind::PhiEnvelope,
            CheckKind::PsiShape,
        ]);
        if self.auxiliary.is_some() {
            out.push(CheckKind::U0Concavity);
        }
        if self.flow.is_some() {
            out.extend([CheckKind::Decay, CheckKind::ZLogGradient, CheckKind::ZRatio]);
        }
        out
    }
}

/// One pass/fail decision: `value <= threshold` or `value >= threshold`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub check: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub relation: Relation,
    pub passed: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Relation {
    AtMost,
    AtLeast,
}

impl CheckOutcome {
    pub fn new(check: CheckKind, value: Option<f64>, relation: Relation, threshold: f64) -> Self {
        let mut c = Self {
            check: check.name().to_string(),
            value,
            threshold,
            relation,
            passed: false,
            note: None,
        };
        c.passed = c.recompute();
        c
    }

    fn failed(check: CheckKind, note: String) -> Self {
        Self {
            check: check.name().to_string(),
            value: None,
            threshold: 0.0,
            relation: Relation::AtMost,
            passed: false,
            note: Some(note),
        }
    }

    /// The decision implied by the stored value and threshold.
    pub fn recompute(&self) -> bool {
        match (self.value, self.relation) {
            (Some(v), Relation::AtMost) => v <= self.threshold,
            (Some(v), Relation::AtLeast) => v >= self.threshold,
            (None, _) => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalues {
    pub lambda1: f64,
    pub lambda2: f64,
    pub comparison_lambda1: f64,
    pub comparison_lambda2: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModulusSummary {
    pub estimated: bool,
    pub s: Vec<f64>,
    pub derivative: Vec<f64>,
    pub verification: PairCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSummary {
    pub c_star: f64,
    pub c_bar: f64,
    pub alpha_tilde: f64,
    pub phi_envelope_excess: f64,
    pub psi_min_slope: f64,
    pub psi_max_curvature: f64,
    pub psi_min_excess_over_linear: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuxiliarySummary {
    pub theta0: Option<f64>,
    pub eps0: f64,
    pub kappa: f64,
    pub c0: f64,
    pub check: PairCheckReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorSummary {
    pub max_margin: Option<f64>,
    pub tolerance: f64,
    pub stamps: Vec<MonitorStamp>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonitorStamp {
    pub time: f64,
    pub max_margin: Option<f64>,
    pub violations: usize,
    pub evaluated: usize,
}

impl MonitorSummary {
    fn from_stamps(stamps: &[ZStamp], tolerance: f64) -> Self {
        Self {
            max_margin: stamps.iter().filter_map(|s| s.max_margin).reduce(f64::max),
            tolerance,
            stamps: stamps
                .iter()
                .map(|s| MonitorStamp {
                    time: s.time,
                    max_margin: s.max_margin,
                    violations: s.violations,
                    evaluated: s.report.evaluated,
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowSummary {
    pub h: f64,
    pub dt: f64,
    pub steps: usize,
    pub lambda1: f64,
    pub lambda2: f64,
    pub decay: DecayFit,
    pub delta0: f64,
    pub z_log_gradient: MonitorSummary,
    pub z_ratio: MonitorSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: String,
    pub domain: ConvexDomain,
    pub diameter: f64,
    pub grid_nodes: usize,
    pub error: Option<String>,
    pub eigenvalues: Option<Eigenvalues>,
    pub gap: Option<GapComparison>,
    pub modulus: Option<ModulusSummary>,
    pub log_concavity: Option<PairCheckReport>,
    pub profiles: Option<ProfileSummary>,
    pub auxiliary: Option<AuxiliarySummary>,
    pub flow: Option<FlowSummary>,
    pub checks: Vec<CheckOutcome>,
    pub passed: bool,
}

impl ScenarioReport {
    pub fn check(&self, kind: CheckKind) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.check == kind.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub scenarios: Vec<ScenarioReport>,
    pub passed: bool,
}

impl RunReport {
    /// Every stored decision agrees with its stored value and threshold.
    pub fn is_consistent(&self) -> bool {
        self.scenarios.iter().all(|s| {
            s.checks.iter().all(|c| c.passed == c.recompute())
                && s.passed == (s.error.is_none() && s.checks.iter().all(|c| c.passed))
        }) && self.passed == self.scenarios.iter().all(|s| s.passed)
    }
}

/// Large intermediate results kept for file output but left out of the report.
#[derive(Debug, Clone, Default)]
pub struct ScenarioArtifacts {
    pub solution: Option<EigenSolution>,
    pub comparison: Option<OneDimComparison>,
    pub pair_reports: Vec<PairCheckReport>,
    pub decay: Option<DecayFit>,
    pub gap: Option<GapComparison>,
    pub timings: Vec<(String, f64)>,
}

/// Everything a scenario run produced.
#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    pub artifacts: ScenarioArtifacts,
}

/// The potential the comparison problem uses, estimating it when requested.
pub fn resolve_modulus(scenario: &ScenarioConfig, seed: u64) -> Result<(Potential1D, Option<ModulusEstimate>)> {
    match &scenario.comparison {
        ComparisonSpec::Given(p) => Ok((p.clone(), None)),
        ComparisonSpec::Keyword(ComparisonKeyword::Estimate) => {
            let half = 0.5 * scenario.domain.diameter();
            let m = scenario.modulus.s_points;
            let grid: Vec<f64> = (0..m).map(|k| half * k as f64 / (m - 1) as f64).collect();
            let est = estimate_modulus(
                &scenario.potential,
                &scenario.domain,
                &grid,
                scenario.modulus.samples_per_s,
                seed.wrapping_add(1),
            )?;
            Ok((est.modulus.clone(), Some(est)))
        }
    }
}

pub fn solve_comparison(scenario: &ScenarioConfig, modulus: &Potential1D) -> Result<OneDimComparison> {
    solve_1d(modulus, scenario.domain.diameter(), scenario.grid.comparison_cells)
}

pub fn solve_domain(scenario: &ScenarioConfig, h: f64, seed: u64) -> Result<EigenSolution> {
    let op = elliptic::assemble_with(&scenario.domain, &scenario.potential, h, scenario.grid.boundary)?;
    elliptic::lowest_eigenpairs(
        &op,
        EigenOptions {
            seed,
            ..EigenOptions::default()
        },
    )
}

/// The two-point sample set for grid checks, kept `(collar_factor + 1) h` away from the boundary.
pub fn scenario_pairs(scenario: &ScenarioConfig, h: f64, count: Option<usize>, seed: u64) -> Result<Vec<PointPair>> {
    let margin = (scenario.tolerance.collar_factor + 1.0) * h;
    let plan = match count {
        Some(n) => PairSampling {
            uniform: n - n / 2,
            stratified: n / 2,
            strata: scenario.pairs.strata,
            margin,
            seed,
        },
        None => PairSampling {
            uniform: scenario.pairs.uniform,
            stratified: scenario.pairs.stratified,
            strata: scenario.pairs.strata,
            margin,
            seed,
        },
    };
    sample_pairs(&scenario.domain, &plan)
}

pub fn auxiliary_data(scenario: &ScenarioConfig, comparison: &OneDimComparison, seed: u64) -> Result<AuxiliaryData> {
    let cfg = scenario.auxiliary.clone().unwrap_or_default();
    let eps0 = cfg.eps0.unwrap_or_else(|| scenario.domain.default_eps0());
    let c0 = comparison.auxiliary_c0(eps0);
    match cfg.kappa {
        Some(k) => AuxiliaryData::with_kappa(&scenario.domain, eps0, k, c0),
        None => build_auxiliary_data(
            &scenario.domain,
            eps0,
            c0,
            Theta0Samples {
                seed,
                ..Theta0Samples::default()
            },
        ),
    }
}

/// Dirichlet flow from `u0` with its decay fit and log-gradient monitor, then the drift flow
/// with the ratio monitor. `solution` is reused when the flow grid matches the main grid.
pub fn flow_stage(
    sc: &ScenarioConfig,
    flow: &FlowConfig,
    comparison: &OneDimComparison,
    solution: &EigenSolution,
    aux: &AuxiliaryData,
    seed: u64,
) -> Result<(FlowSummary, DecayFit)> {
    let tol = &sc.tolerance;
    let fh = flow.h.unwrap_or(sc.grid.h);
    let op = elliptic::assemble_with(&sc.domain, &sc.potential, fh, sc.grid.boundary)?;
    let fsol = if fh == solution.grid.h {
        solution.clone()
    } else {
        elliptic::lowest_eigenpairs(
            &op,
            EigenOptions {
                seed,
                ..EigenOptions::default()
            },
        )?
    };
    let grid = &fsol.grid;
    let u0 = (0..grid.len()).map(|k| aux.u0(grid.position(k))).collect::<Result<Vec<f64>>>()?;
    let opts = FlowOptions {
        scheme: flow.scheme,
        snapshot_every: flow.snapshot_every,
    };
    let traj = parabolic::evolve_dirichlet(&op, &u0, flow.t_final, flow.dt, opts)?;
    let decay = parabolic::fit_gap_from_decay(&traj, &fsol, flow.fit_window)?;
    let mpairs = scenario_pairs(sc, fh, Some(flow.monitor_pairs), seed.wrapping_add(6))?;
    let ztol = tol.budget.tolerance(fh, fh);
    let collar = Some(tol.collar_factor * fh);
    let zlog = parabolic::monitor_z(&traj, comparison, &mpairs, MonitorMode::LogGradient, collar, ztol)?;
    drop(traj);
    let scaling = parabolic::ratio_scaling(&fsol, comparison)?;
    let v0: Vec<f64> = fsol.ratio().iter().map(|w| scaling.delta0 * w).collect();
    let drift = parabolic::evolve_neumann_drift(&fsol, &v0, flow.t_final, flow.dt, flow.drift, opts)?;
    let zratio = parabolic::monitor_z(&drift, comparison, &mpairs, MonitorMode::Ratio, collar, ztol)?;
    let summary = FlowSummary {
        h: fh,
        dt: drift.dt,
        steps: drift.steps,
        lambda1: fsol.lambda1,
        lambda2: fsol.lambda2,
        decay: DecayFit {
            series: Vec::new(),
            ..decay.clone()
        },
        delta0: scaling.delta0,
        z_log_gradient: MonitorSummary::from_stamps(&zlog.stamps, ztol),
        z_ratio: MonitorSummary::from_stamps(&zratio.stamps, ztol),
    };
    Ok((summary, decay))
}

struct Stopwatch {
    start: Instant,
    laps: Vec<(String, f64)>,
}

impl Stopwatch {
    fn new() -> Self {
        Self {
            start: Instant::now(),
            laps: Vec::new(),
        }
    }

    fn lap(&mut self, name: &str) {
        let now = Instant::now();
        self.laps.push((name.to_string(), (now - self.start).as_secs_f64()));
        self.start = now;
    }
}

/// Runs one scenario. Module errors are recorded in the report, not returned.
pub fn run_scenario(scenario: &ScenarioConfig, global_seed: u64) -> ScenarioRun {
    let mut artifacts = ScenarioArtifacts::default();
    let mut report = ScenarioReport {
        name: scenario.name.clone(),
        domain: scenario.domain.clone(),
        diameter: scenario.domain.diameter(),
        grid_nodes: 0,
        error: None,
        eigenvalues: None,
        gap: None,
        modulus: None,
        log_concavity: None,
        profiles: None,
        auxiliary: None,
        flow: None,
        checks: Vec::new(),
        passed: false,
    };
    let mut watch = Stopwatch::new();
    if let Err(e) = run_stages(scenario, global_seed, &mut report, &mut artifacts, &mut watch) {
        report.error = Some(e.to_string());
    }
    let active = scenario.active_checks();
    let mut checks = Vec::with_capacity(active.len());
    for kind in active {
        let outcome = report.checks.iter().find(|c| c.check == kind.name()).cloned().unwrap_or_else(|| {
            CheckOutcome::failed(
                kind,
                report.error.clone().map_or_else(|| "not evaluated".to_string(), |e| format!("not evaluated: {e}")),
            )
        });
        checks.push(outcome);
    }
    report.checks = checks;
    report.passed = report.error.is_none() && report.checks.iter().all(|c| c.passed);
    artifacts.timings = watch.laps;
    ScenarioRun { report, artifacts }
}

fn run_stages(
    sc: &ScenarioConfig,
    global_seed: u64,
    report: &mut ScenarioReport,
    art: &mut ScenarioArtifacts,
    watch: &mut Stopwatch,
) -> Result<()> {
    let seed = sc.seed(global_seed);
    let active: BTreeSet<CheckKind> = sc.active_checks().into_iter().collect();
    let tol = &sc.tolerance;
    let h = sc.grid.h;

    let (modulus, estimate) = resolve_modulus(sc, seed)?;
    let verify_pairs = sample_pairs(&sc.domain, &PairSampling::uniform(sc.modulus.verify_pairs, 0.0, seed.wrapping_add(2)))?;
    let verification = verify_modulus(&sc.potential, &modulus, &sc.domain, &verify_pairs, tol.modulus);
    report.checks.push(CheckOutcome::new(
        CheckKind::Modulus,
        verification.max_margin,
        Relation::AtMost,
        tol.modulus,
    ));
    report.modulus = Some(match &estimate {
        Some(e) => ModulusSummary {
            estimated: true,
            s: e.s.clone(),
            derivative: e.s.iter().map(|s| modulus.derivative(*s)).collect(),
            verification: verification.clone(),
        },
        None => ModulusSummary {
            estimated: false,
            s: Vec::new(),
            derivative: Vec::new(),
            verification: verification.clone(),
        },
    });
    art.pair_reports.push(verification);
    watch.lap("modulus");

    let comparison = solve_comparison(sc, &modulus)?;
    report.profiles = Some(ProfileSummary {
        c_star: comparison.c_star,
        c_bar: comparison.c_bar,
        alpha_tilde: comparison.alpha_tilde,
        phi_envelope_excess: comparison.phi_table.envelope_excess,
        psi_min_slope: comparison.psi_table.min_slope,
        psi_max_curvature: comparison.psi_table.max_curvature,
        psi_min_excess_over_linear: comparison.psi_table.min_excess_over_linear,
    });
    report.checks.push(CheckOutcome::new(
        CheckKind::PhiEnvelope,
        Some(comparison.phi_table.envelope_excess),
        Relation::AtMost,
        0.0,
    ));
    let psi = &comparison.psi_table;
    let psi_worst = (-psi.min_slope).max(psi.max_curvature).max(-psi.min_excess_over_linear - 1e-8);
    report.checks.push(CheckOutcome::new(CheckKind::PsiShape, Some(psi_worst), Relation::AtMost, 0.0));
    watch.lap("comparison");

    let solution = solve_domain(sc, h, seed)?;
    report.grid_nodes = solution.grid.len();
    report.eigenvalues = Some(Eigenvalues {
        lambda1: solution.lambda1,
        lambda2: solution.lambda2,
        comparison_lambda1: comparison.lambda1,
        comparison_lambda2: comparison.lambda2,
    });
    if let Some(e) = &sc.expect {
        let rel = |got: f64, want: Option<f64>| want.map(|w| (got / w - 1.0).abs());
        let worst = [
            rel(solution.lambda1, e.lambda1),
            rel(solution.lambda2, e.lambda2),
            rel(solution.gap(), e.gap),
        ]
        .into_iter()
        .flatten()
        .reduce(f64::max);
        report.checks.push(CheckOutcome::new(CheckKind::Spectrum, worst, Relation::AtMost, e.relative));
    }
    watch.lap("domain-solve");

    let gap_tol = tol.gap_relative * comparison.lambda1.abs();
    let gap = check_gap_comparison(&solution, &comparison, &sc.bounds_s, gap_tol)?;
    report.checks.push(CheckOutcome::new(CheckKind::GapComparison, Some(gap.margin), Relation::AtLeast, -gap_tol));
    report.checks.push(CheckOutcome::new(
        CheckKind::DiameterBound,
        Some(gap.diameter_margin),
        Relation::AtLeast,
        -gap_tol,
    ));
    let over_sigma = gap.bound_table.rows.iter().map(|r| -r.gap_margin).reduce(f64::max);
    let under_gap = gap.alpha_bounds.iter().map(|r| -r.margin).reduce(f64::max);
    let alpha_worst = match (over_sigma, under_gap) {
        (Some(a), Some(b)) => Some((a - tol.bounds).max(b - gap_tol)),
        _ => None,
    };
    report.checks.push(CheckOutcome::new(CheckKind::AlphaBounds, alpha_worst, Relation::AtMost, 0.0));
    report.gap = Some(gap.clone());
    art.gap = Some(gap);
    watch.lap("bounds");

    let pairs = scenario_pairs(sc, h, None, seed.wrapping_add(3))?;
    let lc = check_log_concavity(&solution, &comparison, &pairs, Some(tol.collar_factor * h), tol.budget);
    report.checks.push(CheckOutcome::new(CheckKind::LogConcavity, lc.max_margin, Relation::AtMost, lc.tolerance));
    report.log_concavity = Some(lc.clone());
    art.pair_reports.push(lc);
    watch.lap("log-concavity");

    let needs_aux = active.contains(&CheckKind::U0Concavity) || sc.flow.is_some();
    let aux = if needs_aux {
        Some(auxiliary_data(sc, &comparison, seed.wrapping_add(4))?)
    } else {
        None
    };
    if let (Some(aux), true) = (&aux, active.contains(&CheckKind::U0Concavity)) {
        let count = sc.auxiliary.as_ref().map_or(default_pair_count(), |a| a.pairs);
        let aux_pairs = sample_pairs(&sc.domain, &PairSampling::uniform(count, 0.0, seed.wrapping_add(5)))?;
        let check = check_u0_concavity_estimate(aux, &comparison, &aux_pairs, tol.u0);
        report.checks.push(CheckOutcome::new(CheckKind::U0Concavity, check.max_margin, Relation::AtMost, tol.u0));
        report.auxiliary = Some(AuxiliarySummary {
            theta0: aux.theta0,
            eps0: aux.eps0,
            kappa: aux.kappa,
            c0: aux.c0,
            check: check.clone(),
        });
        art.pair_reports.push(check);
        watch.lap("u0-concavity");
    }

    if let (Some(flow), Some(aux)) = (&sc.flow, &aux) {
        let (summary, decay) = flow_stage(sc, flow, &comparison, &solution, aux, seed)?;
        report.checks.push(CheckOutcome::new(
            CheckKind::Decay,
            summary.decay.relative_error(),
            Relation::AtMost,
            tol.decay,
        ));
        for (kind, m) in [
            (CheckKind::ZLogGradient, &summary.z_log_gradient),
            (CheckKind::ZRatio, &summary.z_ratio),
        ] {
            report.checks.push(CheckOutcome::new(kind, m.max_margin, Relation::AtMost, m.tolerance));
        }
        report.flow = Some(summary);
        art.decay = Some(decay);
        watch.lap("flows");
    }
    art.solution = Some(solution);
    art.comparison = Some(comparison);
    Ok(())
}

/// Runs every scenario, concurrently, and assembles the report in configuration order.
pub fn run_experiment(config: &ExperimentConfig) -> (RunReport, Vec<ScenarioArtifacts>) {
    let runs: Vec<ScenarioRun> = std::thread::scope(|scope| {
        let handles: Vec<_> = config
            .scenarios
            .iter()
            .map(|sc| scope.spawn(move || run_scenario(sc, config.seed)))
            .collect();
        handles
            .into_iter()
            .zip(&config.scenarios)
            .map(|(h, sc)| {
                h.join().unwrap_or_else(|_| {
                    let mut run = run_scenario_stub(sc);
                    run.report.error = Some("scenario worker panicked".into());
                    run
                })
            })
            .collect()
    });
    let mut reports = Vec::with_capacity(runs.len());
    let mut artifacts = Vec::with_capacity(runs.len());
    for r in runs {
        reports.push(r.report);
        artifacts.push(r.artifacts);
    }
    let passed = reports.iter().all(|r| r.passed);
    (
        RunReport {
            scenarios: reports,
            passed,
        },
        artifacts,
    )
}

fn run_scenario_stub(sc: &ScenarioConfig) -> ScenarioRun {
    ScenarioRun {
        report: ScenarioReport {
            name: sc.name.clone(),
            domain: sc.domain.clone(),
            diameter: sc.domain.diameter(),
            grid_nodes: 0,
            error: None,
            eigenvalues: None,
            gap: None,
            modulus: None,
            log_concavity: None,
            profiles: None,
            auxiliary: None,
            flow: None,
            checks: sc
                .active_checks()
                .into_iter()
                .map(|k| CheckOutcome::failed(k, "scenario worker panicked".into()))
                .collect(),
            passed: false,
        },
        artifacts: ScenarioArtifacts::default(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetadata {
    pub tool_version: String,
    pub config: String,
    pub started_unix_seconds: u64,
    pub timings: Vec<ScenarioTimings>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTimings {
    pub scenario: String,
    pub stages: Vec<(String, f64)>,
    pub total_seconds: f64,
}

/// Writes `report.json`, `metadata.json` and the per-scenario CSV tables.
pub fn write_outputs(
    dir: &Path,
    report: &RunReport,
    artifacts: &[ScenarioArtifacts],
    metadata: &RunMetadata,
) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let path = dir.join(name);
        std::fs::write(&path, body)?;
        written.push(path);
        Ok(())
    };
    put("report.json".into(), serde_json::to_string_pretty(report)? + "\n")?;
    put("metadata.json".into(), serde_json::to_string_pretty(metadata)? + "\n")?;
    for (sc, art) in report.scenarios.iter().zip(artifacts) {
        if let Some(sol) = &art.solution {
            put(format!("eigens_{}.csv", sc.name), sol.to_csv())?;
        }
        for r in &art.pair_reports {
            put(format!("pairs_{}_{}.csv", r.check, sc.name), r.to_csv())?;
        }
        if let Some(d) = &art.decay {
            put(format!("decay_{}.csv", sc.name), d.to_csv())?;
        }
        if let Some(g) = &art.gap {
            put(format!("bounds_{}.csv", sc.name), g.to_csv())?;
        }
    }
    Ok(written)
}

pub fn metadata_for(config_path: &str, artifacts: &[ScenarioArtifacts], report: &RunReport) -> RunMetadata {
    RunMetadata {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config: config_path.to_string(),
        started_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs()),
        timings: report
            .scenarios
            .iter()
            .zip(artifacts)
            .map(|(s, a)| ScenarioTimings {
                scenario: s.name.clone(),
                total_seconds: a.timings.iter().map(|t| t.1).sum(),
                stages: a.timings.clone(),
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_runs() {
        let cfg = ExperimentConfig::from_json(r#"{"scenarios": []}"#).unwrap();
        let (report, art) = run_experiment(&cfg);
        assert!(report.passed && report.scenarios.is_empty() && art.is_empty());
    }

    #[test]
    fn config_errors() {
        assert!(matches!(ExperimentConfig::from_json("{"), Err(GapError::Config(_))));
        let dup = r#"{"scenarios": [
            {"name": "a", "domain": {"kind": "interval", "lo": 0, "hi": 1}, "comparison": "estimate", "grid": {"h": 0.01}},
            {"name": "a", "domain": {"kind": "interval", "lo": 0, "hi": 1}, "comparison": "estimate", "grid": {"h": 0.01}}
        ]}"#;
        assert!(matches!(ExperimentConfig::from_json(dup), Err(GapError::Config(_))));
        let neg = r#"{"scenarios": [
            {"name": "a", "domain": {"kind": "interval", "lo": 0, "hi": 1}, "comparison": "estimate", "grid": {"h": -0.01}}
        ]}"#;
        assert!(matches!(ExperimentConfig::from_json(neg), Err(GapError::Config(_))));
        let flowless = r#"{"scenarios": [
            {"name": "a", "domain": {"kind": "interval", "lo": 0, "hi": 1}, "comparison": "estimate", "grid": {"h": 0.01}, "checks": ["decay"]}
        ]}"#;
        assert!(matches!(ExperimentConfig::from_json(flowless), Err(GapError::Config(_))));
    }

    #[test]
    fn small_interval_scenario() {
        let text = r#"{"seed": 5, "scenarios": [{
            "name": "iv",
            "domain": {"kind": "interval", "lo": -0.5, "hi": 0.5},
            "comparison": {"kind": "constant", "value": 0},
            "grid": {"h": 0.00390625, "comparison_cells": 1024},
            "pairs": {"uniform": 500, "stratified": 500},
            "modulus": {"verify_pairs": 500},
            "expect": {"gap": 29.608813203268074, "relative": 1e-3}
        }]}"#;
        let cfg = ExperimentConfig::from_json(text).unwrap();
        let (report, _) = run_experiment(&cfg);
        let s = &report.scenarios[0];
        assert!(s.error.is_none(), "{:?}", s.error);
        assert!(report.is_consistent());
        for c in &s.checks {
            assert!(c.passed, "{c:?}");
        }
        let names: Vec<&str> = s.checks.iter().map(|c| c.check.as_str()).collect();
        let unique: BTreeSet<&str> = names.iter().copied().collect();
        assert_eq!(names.len(), unique.len());
    }
}
