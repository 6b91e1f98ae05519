//! Config-driven batch runner: each experiment kind maps a TOML file to a
//! deterministic pipeline over the engine, the statistics layer and the
//! Lyapunov checks, and emits CSV tables plus SVG plots.
//!
//! Determinism contract: with a fixed `master_seed` the entire output tree is
//! byte-identical across runs and worker counts. Batches inside one experiment
//! use seeds `master_seed + batch_index`; replicas inside one batch use RNG
//! stream id = replica index and are merged in replica order.

use crate::dist::Distribution1D;
use crate::engine::{
    run, Averaging, EngineError, GradientOracle, RecordPlan, SgdRun, SimpleExampleOracle,
    StepsizeSchedule,
};
use crate::loss::{RobustLoss, SubquadraticParams};
use crate::lyapunov::{check_drift, check_lemma_v, simple_example_grad, LyapunovError, LyapunovSpec};
use crate::models::{
    theory_constants, ConstantsOptions, Covariate, ModelError, Problem, QuantileModel, RobustModel,
};
use crate::plot::{emit_plot, Axes, PlotError, Series};
use crate::report::{f, write_csv};
use crate::stats::{
    bias_regression, clt_check, ks_two_sample, loglog_slope, moment_estimate, quantile_onestep_w1,
    StatsError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid config: {}", diagnostics.join("; "))]
    ConfigInvalid { diagnostics: Vec<String> },
    #[error("kind {kind} requires the [{section}] section")]
    MissingSection { kind: String, section: String },
    #[error("kind {kind} requires a {problem} problem")]
    WrongProblem { kind: String, problem: String },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Lyapunov(#[from] LyapunovError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    RateDiminishing,
    ConstantPlateau,
    Clt,
    BiasRr,
    ParameterSweep,
    LyapunovVerify,
    DriftVerify,
    W1QuantileStep,
    CrlbAverage,
}

impl std::fmt::Display for ExperimentKind {
    fn fmt(&self, out: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ExperimentKind::RateDiminishing => "rate-diminishing",
            ExperimentKind::ConstantPlateau => "constant-plateau",
            ExperimentKind::Clt => "clt",
            ExperimentKind::BiasRr => "bias-rr",
            ExperimentKind::ParameterSweep => "parameter-sweep",
            ExperimentKind::LyapunovVerify => "lyapunov-verify",
            ExperimentKind::DriftVerify => "drift-verify",
            ExperimentKind::W1QuantileStep => "w1-quantile-step",
            ExperimentKind::CrlbAverage => "crlb-average",
        };
        out.write_str(s)
    }
}

/// Problem description as written in config files. Model invariants (centered
/// covariate, quantile level) are enforced when the problem is built, not at
/// parse time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ProblemConfig {
    Robust {
        covariate: Covariate,
        theta_star: Vec<f64>,
        noise: Distribution1D,
        corruption: Distribution1D,
        loss: RobustLoss,
    },
    Quantile {
        covariate: Covariate,
        theta_star: Vec<f64>,
        error: Distribution1D,
        tau: f64,
    },
    SimpleExample {
        beta: f64,
        noise: Distribution1D,
    },
}

/// A built problem: either a data model or the scalar piecewise example.
pub enum BuiltProblem {
    Model(Problem),
    Simple(SimpleExampleOracle),
}

impl BuiltProblem {
    pub fn oracle(&self) -> &dyn GradientOracle {
        match self {
            BuiltProblem::Model(p) => p,
            BuiltProblem::Simple(s) => s,
        }
    }

    pub fn theta_star(&self) -> Vec<f64> {
        match self {
            BuiltProblem::Model(p) => p.theta_star().to_vec(),
            BuiltProblem::Simple(_) => vec![0.0],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            BuiltProblem::Model(p) => p.dim(),
            BuiltProblem::Simple(_) => 1,
        }
    }
}

pub fn build_problem(cfg: &ProblemConfig) -> Result<BuiltProblem, ModelError> {
    match cfg {
        ProblemConfig::Robust { covariate, theta_star, noise, corruption, loss } => {
            let model =
                RobustModel::new(covariate.clone(), theta_star.clone(), noise.clone(), corruption.clone())?;
            Ok(BuiltProblem::Model(Problem::Robust { model, loss: loss.clone() }))
        }
        ProblemConfig::Quantile { covariate, theta_star, error, tau } => {
            let model = QuantileModel::new(covariate.clone(), theta_star.clone(), error.clone(), *tau)?;
            Ok(BuiltProblem::Model(Problem::Quantile { model }))
        }
        ProblemConfig::SimpleExample { beta, noise } => {
            if !(1.0..2.0).contains(beta) {
                return Err(ModelError::InvalidParameter("beta must lie in [1,2)".into()));
            }
            noise.validate()?;
            Ok(BuiltProblem::Simple(SimpleExampleOracle { beta: *beta, noise: noise.clone() }))
        }
    }
}

/// Analysis knobs shared across pipelines. Defaults are recorded in the
/// summary table so every fit is attributable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AnalysisConfig {
    /// Odd sliding-median window for log-log slope fits.
    pub window: usize,
    /// Iteration range for slope fits; defaults to [sqrt(n), n].
    pub fit_range: Option<(f64, f64)>,
    /// Fraction of the trajectory discarded before averaging.
    pub burn_in: f64,
    /// Constant stepsizes for the bias regression.
    pub alphas: Vec<f64>,
    /// Reuse RNG streams across stepsizes (common random numbers), pairing
    /// the replicas so the Richardson-Romberg differences are low-variance.
    /// Off by default: independent streams are the honest default for the
    /// per-stepsize bias estimates themselves.
    pub crn: bool,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig { window: 11, fit_range: None, burn_in: 0.5, alphas: Vec::new(), crn: false }
    }
}

/// Pass/fail thresholds; an experiment with no thresholds reports metrics
/// only and counts as passing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Thresholds {
    /// |slope + xi/2| <= slope_tol per diminishing schedule.
    pub slope_tol: Option<f64>,
    /// Plateau ratio between consecutive constant stepsizes must fall in
    /// [lo, hi].
    pub plateau_ratio: Option<(f64, f64)>,
    /// KS distance to the fitted normal must not exceed this.
    pub ks_max: Option<f64>,
    /// Two-sample KS between the two initializations must reach this.
    pub ks_min: Option<f64>,
    /// Fitted bias slope must match the theoretical coefficient within this
    /// many standard errors.
    pub bias_se_factor: Option<f64>,
    /// |RR-extrapolated bias| <= rr_factor * |tail-averaged bias|.
    pub rr_factor: Option<f64>,
    /// n E|avg - theta*|^2 within [crlb/f, crlb*f].
    pub crlb_factor: Option<f64>,
    /// Sweep metric must be nondecreasing in the listed variant order.
    pub monotone: Option<bool>,
    /// Verification kinds: require every check row to pass.
    pub require_pass: Option<bool>,
}

/// Lemma verification grid for the scalar piecewise example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSection {
    pub p: f64,
    pub radii: Vec<f64>,
    pub tol: f64,
}

/// One-step drift verification sweep for the scalar piecewise example.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriftSection {
    pub p: f64,
    pub alphas: Vec<f64>,
    pub thetas: Vec<f64>,
    pub candidate_mu: f64,
    pub candidate_cs: Vec<f64>,
    pub samples: u64,
    #[serde(default)]
    pub exclude_overflow: bool,
}

/// One-step W1 expansion check for a scalar quantile problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct W1Section {
    pub alpha: f64,
    pub theta_prime: f64,
    pub gaps: Vec<f64>,
    pub mu_tau: f64,
}

/// One sweep entry: a label and a full problem description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepVariant {
    pub label: String,
    pub problem: ProblemConfig,
}

/// Replacement counts for full-scale reproduction; applied by the CLI flag,
/// never by default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleOverride {
    pub n_iters: u64,
    pub replicas: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub name: String,
    pub n_iters: u64,
    pub replicas: u64,
    /// Required: experiments never draw implicit entropy.
    pub master_seed: Option<u64>,
    pub output_dir: String,
    pub theta0: Vec<f64>,
    /// Extra initializations (CLT separation experiments); theta0 is always
    /// the first.
    #[serde(default)]
    pub extra_inits: Vec<Vec<f64>>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub schedules: Vec<StepsizeSchedule>,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub thresholds: Option<Thresholds>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lyapunov: Option<LyapunovSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub drift: Option<DriftSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub w1: Option<W1Section>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<Vec<SweepVariant>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paper_scale: Option<ScaleOverride>,
}

impl ExperimentConfig {
    /// Applies the paper-scale counts in place; no-op without the section.
    pub fn apply_paper_scale(&mut self) {
        if let Some(s) = self.paper_scale {
            self.n_iters = s.n_iters;
            self.replicas = s.replicas;
        }
    }
}

/// Canonical serialization; presets are stored in exactly this form, so
/// parse -> serialize round-trips byte-identically.
pub fn canonical_toml(cfg: &ExperimentConfig) -> String {
    toml::to_string(cfg).expect("config serializes")
}

fn check_distribution(field: &str, d: &Distribution1D, out: &mut Vec<String>) {
    if let Err(e) = d.validate() {
        out.push(format!("{field}: {e}"));
    }
}

fn check_covariate(field: &str, c: &Covariate, theta_star: &[f64], out: &mut Vec<String>) {
    if let Err(e) = c.validate() {
        out.push(format!("{field}: {e}"));
    }
    if theta_star.len() != c.dim() {
        out.push(format!(
            "{field}: theta_star has dimension {}, covariate has dimension {}",
            theta_star.len(),
            c.dim()
        ));
    }
}

fn check_schedule(field: &str, s: &StepsizeSchedule, out: &mut Vec<String>) {
    match *s {
        StepsizeSchedule::Constant { alpha } => {
            if !(alpha > 0.0) {
                out.push(format!("{field}.alpha: must be positive, got {alpha}"));
            }
        }
        StepsizeSchedule::Polynomial { iota, kappa, xi } => {
            if !(iota > 0.0) {
                out.push(format!("{field}.iota: must be positive, got {iota}"));
            }
            if !(kappa >= 0.0) {
                out.push(format!("{field}.kappa: must be nonnegative, got {kappa}"));
            }
            if !(xi > 0.0 && xi <= 1.0) {
                out.push(format!("{field}.xi: must lie in (0,1], got {xi}"));
            }
        }
    }
}

/// All semantic diagnostics for a parsed config, collected rather than
/// first-error-only.
pub fn semantic_diagnostics(cfg: &ExperimentConfig) -> Vec<String> {
    let mut out = Vec::new();
    if cfg.master_seed.is_none() {
        out.push("master_seed: required (no implicit entropy)".to_string());
    }
    if cfg.name.is_empty() {
        out.push("name: must be non-empty".to_string());
    }
    if cfg.output_dir.is_empty() {
        out.push("output_dir: must be non-empty".to_string());
    }
    if cfg.n_iters == 0 {
        out.push("n_iters: must be at least 1".to_string());
    }
    if cfg.replicas == 0 {
        out.push("replicas: must be at least 1".to_string());
    }
    if cfg.theta0.is_empty() {
        out.push("theta0: must be non-empty".to_string());
    }

    match &cfg.problem {
        ProblemConfig::Robust { covariate, theta_star, noise, corruption, .. } => {
            check_covariate("problem.covariate", covariate, theta_star, &mut out);
            check_distribution("problem.noise", noise, &mut out);
            check_distribution("problem.corruption", corruption, &mut out);
        }
        ProblemConfig::Quantile { covariate, theta_star, error, tau } => {
            check_covariate("problem.covariate", covariate, theta_star, &mut out);
            check_distribution("problem.error", error, &mut out);
            if !(*tau > 0.0 && *tau < 1.0) {
                out.push(format!("problem.tau: must lie in (0,1), got {tau}"));
            }
        }
        ProblemConfig::SimpleExample { beta, noise } => {
            if !(1.0..2.0).contains(beta) {
                out.push(format!("problem.beta: must lie in [1,2), got {beta}"));
            }
            check_distribution("problem.noise", noise, &mut out);
        }
    }

    let expected_dim = match &cfg.problem {
        ProblemConfig::Robust { covariate, .. } | ProblemConfig::Quantile { covariate, .. } => {
            covariate.dim()
        }
        ProblemConfig::SimpleExample { .. } => 1,
    };
    if cfg.theta0.len() != expected_dim && !cfg.theta0.is_empty() {
        out.push(format!(
            "theta0: dimension {} does not match the problem dimension {}",
            cfg.theta0.len(),
            expected_dim
        ));
    }
    for (i, init) in cfg.extra_inits.iter().enumerate() {
        if init.len() != expected_dim {
            out.push(format!("extra_inits[{i}]: dimension mismatch"));
        }
    }

    for (i, s) in cfg.schedules.iter().enumerate() {
        check_schedule(&format!("schedules[{i}]"), s, &mut out);
    }
    let needs_schedules = matches!(
        cfg.kind,
        ExperimentKind::RateDiminishing
            | ExperimentKind::ConstantPlateau
            | ExperimentKind::Clt
            | ExperimentKind::ParameterSweep
            | ExperimentKind::CrlbAverage
    );
    if needs_schedules && cfg.schedules.is_empty() {
        out.push(format!("schedules: kind {} needs at least one schedule", cfg.kind));
    }

    if cfg.analysis.window % 2 == 0 || cfg.analysis.window == 0 {
        out.push(format!("analysis.window: must be odd, got {}", cfg.analysis.window));
    }
    if !(0.0..1.0).contains(&cfg.analysis.burn_in) {
        out.push(format!("analysis.burn_in: must lie in [0,1), got {}", cfg.analysis.burn_in));
    }
    if let Some((lo, hi)) = cfg.analysis.fit_range {
        if !(lo > 0.0 && hi > lo) {
            out.push(format!("analysis.fit_range: need 0 < lo < hi, got ({lo}, {hi})"));
        }
    }
    if cfg.kind == ExperimentKind::BiasRr {
        let alphas = &cfg.analysis.alphas;
        if alphas.len() < 3 {
            out.push("analysis.alphas: bias-rr needs at least 3 stepsizes".to_string());
        }
        if alphas.iter().any(|a| !(*a > 0.0)) {
            out.push("analysis.alphas: all stepsizes must be positive".to_string());
        }
        let mut sorted = alphas.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if sorted.windows(2).any(|w| w[0] == w[1]) {
            out.push("analysis.alphas: stepsizes must be distinct".to_string());
        }
    }

    match cfg.kind {
        ExperimentKind::LyapunovVerify => {
            if let Some(l) = &cfg.lyapunov {
                if l.radii.len() < 2 {
                    out.push("lyapunov.radii: need at least 2 radii".to_string());
                }
                if !(l.tol > 0.0) {
                    out.push(format!("lyapunov.tol: must be positive, got {}", l.tol));
                }
                if !(l.p == 0.0 || l.p > 0.0) {
                    out.push(format!("lyapunov.p: must be nonnegative, got {}", l.p));
                }
            } else {
                out.push("lyapunov: section required for kind lyapunov-verify".to_string());
            }
        }
        ExperimentKind::DriftVerify => {
            if let Some(d) = &cfg.drift {
                if d.alphas.iter().any(|a| !(*a > 0.0)) || d.alphas.is_empty() {
                    out.push("drift.alphas: need positive stepsizes".to_string());
                }
                if d.thetas.is_empty() {
                    out.push("drift.thetas: need at least one state".to_string());
                }
                if !(d.candidate_mu > 0.0) {
                    out.push("drift.candidate_mu: must be positive".to_string());
                }
                if d.candidate_cs.is_empty() {
                    out.push("drift.candidate_cs: need at least one candidate".to_string());
                }
                if d.samples < 1000 {
                    out.push("drift.samples: need at least 1000".to_string());
                }
            } else {
                out.push("drift: section required for kind drift-verify".to_string());
            }
        }
        ExperimentKind::W1QuantileStep => {
            if let Some(w) = &cfg.w1 {
                if !(w.alpha > 0.0) {
                    out.push("w1.alpha: must be positive".to_string());
                }
                if w.gaps.iter().any(|g| !(*g > 0.0 && *g < w.alpha / 4.0)) {
                    out.push("w1.gaps: every gap must lie in (0, alpha/4)".to_string());
                }
                if !(w.mu_tau >= 0.0) {
                    out.push("w1.mu_tau: must be nonnegative".to_string());
                }
            } else {
                out.push("w1: section required for kind w1-quantile-step".to_string());
            }
        }
        ExperimentKind::ParameterSweep => match &cfg.sweep {
            Some(variants) if !variants.is_empty() => {
                for (i, v) in variants.iter().enumerate() {
                    if v.label.is_empty() {
                        out.push(format!("sweep[{i}].label: must be non-empty"));
                    }
                }
            }
            _ => out.push("sweep: non-empty variant list required for kind parameter-sweep".to_string()),
        },
        _ => {}
    }

    if let Some(s) = cfg.paper_scale {
        if s.n_iters == 0 || s.replicas == 0 {
            out.push("paper_scale: counts must be positive".to_string());
        }
    }
    out
}

/// Parses and validates a config. Returns either a usable config or the full
/// list of diagnostics.
pub fn validate_config(text: &str) -> Result<ExperimentConfig, Vec<String>> {
    let cfg: ExperimentConfig = match toml::from_str(text) {
        Ok(c) => c,
        Err(e) => return Err(vec![format!("parse error: {}", e.message())]),
    };
    let diags = semantic_diagnostics(&cfg);
    if diags.is_empty() {
        Ok(cfg)
    } else {
        Err(diags)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Metric {
    pub name: String,
    pub value: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NamedCheck {
    pub name: String,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentSummary {
    pub kind: ExperimentKind,
    pub name: String,
    pub metrics: Vec<Metric>,
    pub checks: Vec<NamedCheck>,
    pub files: Vec<PathBuf>,
    /// True when every threshold check passed (vacuously true without
    /// thresholds).
    pub pass: bool,
}

impl ExperimentSummary {
    fn new(kind: ExperimentKind, name: &str) -> Self {
        ExperimentSummary {
            kind,
            name: name.to_string(),
            metrics: Vec::new(),
            checks: Vec::new(),
            files: Vec::new(),
            pass: true,
        }
    }

    fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.push(Metric { name: name.into(), value });
    }

    fn check(&mut self, name: impl Into<String>, pass: bool) {
        self.pass &= pass;
        self.checks.push(NamedCheck { name: name.into(), pass });
    }
}

fn schedule_label(s: &StepsizeSchedule) -> String {
    match *s {
        StepsizeSchedule::Constant { alpha } => format!("constant({})", f(alpha)),
        StepsizeSchedule::Polynomial { iota, kappa, xi } => {
            format!("poly({},{},{})", f(iota), f(kappa), f(xi))
        }
    }
}

/// Runs `replicas` independent trajectories of one configuration; replica r
/// uses RNG stream r, results are merged in replica order.
#[allow(clippy::too_many_arguments)]
fn run_batch(
    oracle: &dyn GradientOracle,
    schedule: &StepsizeSchedule,
    theta0: &[f64],
    n_iters: u64,
    replicas: u64,
    seed: u64,
    record_plan: &RecordPlan,
    averaging: Averaging,
) -> Result<Vec<crate::engine::TrajectoryRecord>, EngineError> {
    (0..replicas)
        .into_par_iter()
        .map(|r| {
            run(&SgdRun {
                oracle,
                schedule: schedule.clone(),
                theta0: theta0.to_vec(),
                n_iters,
                seed,
                stream: r,
                record_plan: record_plan.clone(),
                averaging,
                accumulate: None,
            })
        })
        .collect()
}

/// Cross-replica mean and standard error of the squared error averaged over a
/// set of recorded tail indices.
fn plateau_estimate(
    trajectories: &[crate::engine::TrajectoryRecord],
    theta_star: &[f64],
) -> (f64, f64) {
    let per_replica: Vec<f64> = trajectories
        .iter()
        .map(|t| {
            let vals: Vec<f64> = t
                .recorded
                .iter()
                .map(|p| {
                    let e = crate::loss::norm(&crate::loss::sub(&p.iterate, theta_star));
                    e * e
                })
                .collect();
            vals.iter().sum::<f64>() / vals.len() as f64
        })
        .collect();
    let m = per_replica.len() as f64;
    let mean = per_replica.iter().sum::<f64>() / m;
    let var = per_replica.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
    (mean, (var / m).sqrt())
}

/// Evenly spaced record indices in the tail (burn_in .. 1] of the trajectory.
fn tail_indices(n_iters: u64, burn_in: f64, points: u64) -> Vec<u64> {
    let start = ((burn_in * n_iters as f64).floor() as u64).max(1);
    let span = n_iters - start;
    (1..=points).map(|j| start + span * j / points).collect()
}

fn seed_of(cfg: &ExperimentConfig, batch: u64) -> u64 {
    cfg.master_seed.expect("validated").wrapping_add(batch)
}

fn xi_of(s: &StepsizeSchedule) -> Option<f64> {
    match *s {
        StepsizeSchedule::Polynomial { xi, .. } => Some(xi),
        StepsizeSchedule::Constant { .. } => None,
    }
}

/// Dispatches to the pipeline for the config's kind, writes all artifacts
/// under `output_dir` and returns the summary.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary, ExperimentError> {
    let diags = semantic_diagnostics(config);
    if !diags.is_empty() {
        return Err(ExperimentError::ConfigInvalid { diagnostics: diags });
    }
    let dir = PathBuf::from(&config.output_dir);
    std::fs::create_dir_all(&dir)?;

    let mut summary = ExperimentSummary::new(config.kind, &config.name);
    match config.kind {
        ExperimentKind::RateDiminishing => rate_diminishing(config, &dir, &mut summary)?,
        ExperimentKind::ConstantPlateau => constant_plateau(config, &dir, &mut summary)?,
        ExperimentKind::Clt => clt_pipeline(config, &dir, &mut summary)?,
        ExperimentKind::BiasRr => bias_rr(config, &dir, &mut summary)?,
        ExperimentKind::ParameterSweep => parameter_sweep(config, &dir, &mut summary)?,
        ExperimentKind::LyapunovVerify => lyapunov_verify(config, &dir, &mut summary)?,
        ExperimentKind::DriftVerify => drift_verify(config, &dir, &mut summary)?,
        ExperimentKind::W1QuantileStep => w1_quantile_step(config, &dir, &mut summary)?,
        ExperimentKind::CrlbAverage => crlb_average(config, &dir, &mut summary)?,
    }
    write_summary(config, &dir, &mut summary)?;
    Ok(summary)
}

fn write_summary(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let path = dir.join(format!("{}_summary.csv", config.name));
    let mut rows: Vec<Vec<String>> = summary
        .metrics
        .iter()
        .map(|m| vec!["metric".to_string(), m.name.clone(), f(m.value), String::new()])
        .collect();
    for c in &summary.checks {
        rows.push(vec!["check".to_string(), c.name.clone(), String::new(), c.pass.to_string()]);
    }
    write_csv(&path, &["entry", "name", "value", "pass"], &rows)?;
    summary.files.push(path);
    Ok(())
}

fn rate_diminishing(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let problem = build_problem(&config.problem)?;
    let theta_star = problem.theta_star();
    let plan = RecordPlan::Geometric { base: 1.0, ratio: 1.15 };
    let indices = plan.indices(config.n_iters);
    let fit_range = config
        .analysis
        .fit_range
        .unwrap_or(((config.n_iters as f64).sqrt(), config.n_iters as f64));
    summary.metric("window", config.analysis.window as f64);
    summary.metric("fit_lo", fit_range.0);
    summary.metric("fit_hi", fit_range.1);

    let mut moment_rows = Vec::new();
    let mut plot_series = Vec::new();
    for (bi, schedule) in config.schedules.iter().enumerate() {
        let label = schedule_label(schedule);
        let trajectories = run_batch(
            problem.oracle(),
            schedule,
            &config.theta0,
            config.n_iters,
            config.replicas,
            seed_of(config, bi as u64),
            &plan,
            Averaging::None,
        )?;
        let curve = moment_estimate(&trajectories, &theta_star, &[2], &indices)?;
        // The reproduced figures track the error norm, so the slope target is
        // -xi/2; fit on the root of the second moment.
        let series: Vec<(f64, f64)> =
            curve.points.iter().map(|p| (p.n as f64, p.estimate.sqrt())).collect();
        for p in &curve.points {
            moment_rows.push(vec![
                label.clone(),
                p.n.to_string(),
                p.moment_order.to_string(),
                f(p.estimate),
                f(p.se),
                f(p.estimate.sqrt()),
                p.replicas.to_string(),
            ]);
        }
        let fit = loglog_slope(&series, config.analysis.window, fit_range)?;
        summary.metric(format!("slope[{label}]"), fit.slope);
        summary.metric(format!("residual_rms[{label}]"), fit.residual_rms);
        if let (Some(xi), Some(tol)) =
            (xi_of(schedule), config.thresholds.as_ref().and_then(|t| t.slope_tol))
        {
            let target = -xi / 2.0;
            summary.check(
                format!("slope[{label}] within {tol} of {target}"),
                (fit.slope - target).abs() <= tol,
            );
        }
        plot_series.push(Series { name: label, points: series });
    }
    let moments_path = dir.join(format!("{}_moments.csv", config.name));
    write_csv(
        &moments_path,
        &["schedule", "n", "order", "estimate", "se", "rms", "replicas"],
        &moment_rows,
    )?;
    summary.files.push(moments_path);
    let plot_path = dir.join(format!("{}_rate.svg", config.name));
    emit_plot(&plot_series, Axes::LogLog, &plot_path)?;
    summary.files.push(plot_path);
    Ok(())
}

fn constant_plateau(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let problem = build_problem(&config.problem)?;
    let theta_star = problem.theta_star();
    let plan = RecordPlan::Indices {
        indices: tail_indices(config.n_iters, config.analysis.burn_in, 16),
    };

    let mut rows = Vec::new();
    let mut levels: Vec<(f64, f64)> = Vec::new();
    for (bi, schedule) in config.schedules.iter().enumerate() {
        let trajectories = run_batch(
            problem.oracle(),
            schedule,
            &config.theta0,
            config.n_iters,
            config.replicas,
            seed_of(config, bi as u64),
            &plan,
            Averaging::None,
        )?;
        let (mean, se) = plateau_estimate(&trajectories, &theta_star);
        let label = schedule_label(schedule);
        summary.metric(format!("plateau[{label}]"), mean);
        rows.push(vec![label, f(mean), f(se), config.replicas.to_string()]);
        if let StepsizeSchedule::Constant { alpha } = schedule {
            levels.push((*alpha, mean));
        }
    }
    let path = dir.join(format!("{}_plateau.csv", config.name));
    write_csv(&path, &["schedule", "plateau", "se", "replicas"], &rows)?;
    summary.files.push(path);

    for pair in levels.windows(2) {
        let ratio = pair[0].1 / pair[1].1;
        summary.metric(format!("ratio[{}/{}]", f(pair[0].0), f(pair[1].0)), ratio);
        if let Some((lo, hi)) = config.thresholds.as_ref().and_then(|t| t.plateau_ratio) {
            summary.check(
                format!("ratio[{}/{}] in [{lo},{hi}]", f(pair[0].0), f(pair[1].0)),
                ratio >= lo && ratio <= hi,
            );
        }
    }
    if levels.len() >= 2 {
        let plot_path = dir.join(format!("{}_plateau.svg", config.name));
        emit_plot(
            &[Series { name: "plateau".to_string(), points: levels }],
            Axes::LogLog,
            &plot_path,
        )?;
        summary.files.push(plot_path);
    }
    Ok(())
}

fn clt_pipeline(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let problem = build_problem(&config.problem)?;
    let theta_star = problem.theta_star();
    // Partial sums of the error norm, the test function of the reproduced
    // figures.
    let test_fn = move |theta: &[f64]| crate::loss::norm(&crate::loss::sub(theta, &theta_star));
    let mut inits: Vec<Vec<f64>> = vec![config.theta0.clone()];
    inits.extend(config.extra_inits.iter().cloned());

    let mut rows = Vec::new();
    let mut batch = 0u64;
    // Raw (uncentered) per-replica values, keyed by (init, schedule).
    let mut raw: Vec<Vec<Vec<f64>>> = vec![Vec::new(); inits.len()];
    let mut hist_series = Vec::new();
    for (ii, init) in inits.iter().enumerate() {
        for schedule in &config.schedules {
            let alpha = match *schedule {
                StepsizeSchedule::Constant { alpha } => alpha,
                StepsizeSchedule::Polynomial { .. } => {
                    return Err(ExperimentError::ConfigInvalid {
                        diagnostics: vec!["schedules: clt needs constant stepsizes".to_string()],
                    })
                }
            };
            let report = clt_check(
                problem.oracle(),
                &test_fn,
                alpha,
                config.n_iters,
                config.replicas,
                seed_of(config, batch),
                init,
            )?;
            batch += 1;
            let label = schedule_label(schedule);
            summary.metric(format!("ks[init{ii},{label}]"), report.ks);
            summary.metric(format!("sd[init{ii},{label}]"), report.sd);
            if let Some(ks_max) = config.thresholds.as_ref().and_then(|t| t.ks_max) {
                summary.check(
                    format!("ks[init{ii},{label}] <= {ks_max}"),
                    !report.degenerate && report.ks <= ks_max,
                );
            }
            for (center, density) in &report.histogram {
                rows.push(vec![ii.to_string(), label.clone(), f(*center), f(*density)]);
            }
            if ii == 0 {
                hist_series.push(Series {
                    name: label.clone(),
                    points: report.histogram.clone(),
                });
            }
            raw[ii].push(report.values.iter().map(|v| v + report.mean).collect());
        }
    }
    let hist_path = dir.join(format!("{}_histogram.csv", config.name));
    write_csv(&hist_path, &["init", "schedule", "bin_center", "density"], &rows)?;
    summary.files.push(hist_path);
    if !hist_series.is_empty() {
        let plot_path = dir.join(format!("{}_histogram.svg", config.name));
        emit_plot(&hist_series, Axes::Linear, &plot_path)?;
        summary.files.push(plot_path);
    }

    if inits.len() >= 2 {
        for (si, schedule) in config.schedules.iter().enumerate() {
            let label = schedule_label(schedule);
            let ks = ks_two_sample(&raw[0][si], &raw[1][si]);
            summary.metric(format!("ks_between_inits[{label}]"), ks);
            if let Some(ks_min) = config.thresholds.as_ref().and_then(|t| t.ks_min) {
                summary.check(format!("ks_between_inits[{label}] >= {ks_min}"), ks >= ks_min);
            }
        }
    }
    Ok(())
}

fn bias_rr(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let problem = build_problem(&config.problem)?;
    let theta_star = problem.theta_star();
    let report = bias_regression(
        problem.oracle(),
        &theta_star,
        &config.analysis.alphas,
        config.n_iters,
        config.replicas,
        seed_of(config, 0),
        config.analysis.burn_in,
        &config.theta0,
        config.analysis.crn,
    )?;

    let mut rows = Vec::new();
    for ab in &report.per_alpha {
        for i in 0..ab.bias.len() {
            rows.push(vec![f(ab.alpha), i.to_string(), f(ab.bias[i]), f(ab.se[i])]);
        }
    }
    let bias_path = dir.join(format!("{}_bias.csv", config.name));
    write_csv(&bias_path, &["alpha", "coord", "bias", "se"], &rows)?;
    summary.files.push(bias_path);

    let mut rr_rows = Vec::new();
    for rr in &report.rr {
        for i in 0..rr.bias.len() {
            rr_rows.push(vec![f(rr.alpha), i.to_string(), f(rr.bias[i]), f(rr.se[i])]);
        }
    }
    let rr_path = dir.join(format!("{}_rr.csv", config.name));
    write_csv(&rr_path, &["alpha", "coord", "bias", "se"], &rr_rows)?;
    summary.files.push(rr_path);

    for (i, (b, se)) in report.b_hat.iter().zip(&report.b_hat_se).enumerate() {
        summary.metric(format!("b_hat[{i}]"), *b);
        summary.metric(format!("b_hat_se[{i}]"), *se);
    }

    // Theoretical bias coefficient, when the problem admits one.
    if let BuiltProblem::Model(p) = &problem {
        let constants = theory_constants(p, &ConstantsOptions::default());
        if let crate::models::ConstantValue::Available { value, .. } = &constants.bias_coefficient {
            for (i, b_theory) in value.iter().enumerate() {
                summary.metric(format!("b_theory[{i}]"), *b_theory);
                if let Some(k) = config.thresholds.as_ref().and_then(|t| t.bias_se_factor) {
                    summary.check(
                        format!("b_hat[{i}] within {k} se of theory"),
                        (report.b_hat[i] - b_theory).abs() <= k * report.b_hat_se[i],
                    );
                }
            }
        }
    }

    if let Some(rf) = config.thresholds.as_ref().and_then(|t| t.rr_factor) {
        for rr in &report.rr {
            let ta = report
                .per_alpha
                .iter()
                .find(|a| a.alpha == rr.alpha)
                .expect("rr pairs come from per_alpha");
            for i in 0..rr.bias.len() {
                summary.check(
                    format!("|rr[{}][{i}]| <= {rf} |bias|", f(rr.alpha)),
                    rr.bias[i].abs() <= rf * ta.bias[i].abs(),
                );
            }
        }
    }

    let series: Vec<Series> = (0..theta_star.len())
        .map(|i| Series {
            name: format!("coord{i}"),
            points: report.per_alpha.iter().map(|a| (a.alpha, a.bias[i])).collect(),
        })
        .collect();
    let plot_path = dir.join(format!("{}_bias.svg", config.name));
    emit_plot(&series, Axes::Linear, &plot_path)?;
    summary.files.push(plot_path);
    Ok(())
}

fn parameter_sweep(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let variants = config.sweep.as_ref().expect("validated");
    let schedule = &config.schedules[0];
    let mut rows = Vec::new();
    let mut levels = Vec::new();
    for (bi, variant) in variants.iter().enumerate() {
        let problem = build_problem(&variant.problem)?;
        let theta_star = problem.theta_star();
        // The figure metric: squared error of the running-average iterate at
        // the final index.
        let trajectories = run_batch(
            problem.oracle(),
            schedule,
            &config.theta0,
            config.n_iters,
            config.replicas,
            seed_of(config, bi as u64),
            &RecordPlan::FinalOnly,
            Averaging::Full,
        )?;
        let errs: Vec<f64> = trajectories
            .iter()
            .map(|t| {
                let avg = t.final_average.as_ref().expect("full averaging enabled");
                let e = crate::loss::norm(&crate::loss::sub(avg, &theta_star));
                e * e
            })
            .collect();
        let m = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / m;
        let var = errs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        let se = (var / m).sqrt();
        summary.metric(format!("avg_error[{}]", variant.label), mean);
        rows.push(vec![variant.label.clone(), f(mean), f(se), config.replicas.to_string()]);
        levels.push((bi as f64 + 1.0, mean));
    }
    let path = dir.join(format!("{}_sweep.csv", config.name));
    write_csv(&path, &["label", "avg_error", "se", "replicas"], &rows)?;
    summary.files.push(path);

    if config.thresholds.as_ref().and_then(|t| t.monotone) == Some(true) {
        let monotone = levels.windows(2).all(|w| w[1].1 >= w[0].1);
        summary.check("averaged error nondecreasing across variants", monotone);
    }
    let plot_path = dir.join(format!("{}_sweep.svg", config.name));
    emit_plot(
        &[Series { name: "avg_error".to_string(), points: levels }],
        Axes::Linear,
        &plot_path,
    )?;
    summary.files.push(plot_path);
    Ok(())
}

fn simple_example_of(config: &ExperimentConfig) -> Result<(f64, Distribution1D), ExperimentError> {
    match &config.problem {
        ProblemConfig::SimpleExample { beta, noise } => Ok((*beta, noise.clone())),
        _ => Err(ExperimentError::WrongProblem {
            kind: config.kind.to_string(),
            problem: "simple-example".to_string(),
        }),
    }
}

fn lyapunov_verify(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let (beta, _) = simple_example_of(config)?;
    let section = config.lyapunov.as_ref().expect("validated");
    // The scalar example satisfies the tail conditions with unit constants
    // and strong-convexity window Delta = 1.
    let spec = LyapunovSpec::new(beta, 1.0, section.p, vec![0.0]);
    let params = SubquadraticParams::new(1.0, 1.0, 1.0, 1.0, 1.0, beta);
    let grid: Vec<Vec<f64>> = section.radii.iter().map(|r| vec![*r]).collect();
    let grad = |theta: &[f64]| vec![simple_example_grad(beta, theta[0])];
    let report = check_lemma_v(&spec, grad, &params, &grid, section.tol)?;

    let rows: Vec<Vec<String>> = report
        .checks
        .iter()
        .map(|c| {
            vec![
                c.property.to_string(),
                c.point.map(|p| p.to_string()).unwrap_or_default(),
                f(c.lhs),
                f(c.rhs),
                c.pass.to_string(),
            ]
        })
        .collect();
    let path = dir.join(format!("{}_lemma.csv", config.name));
    write_csv(&path, &["property", "point", "lhs", "rhs", "pass"], &rows)?;
    summary.files.push(path);
    summary.metric("checks", report.checks.len() as f64);
    if config.thresholds.as_ref().and_then(|t| t.require_pass) == Some(true) {
        summary.check("all lemma properties hold on the grid", report.pass);
    }

    let vseries: Vec<(f64, f64)> = section
        .radii
        .iter()
        .filter_map(|r| crate::lyapunov::v_value(&spec, &[*r]).ok().map(|v| (*r, v)))
        .collect();
    let plot_path = dir.join(format!("{}_v.svg", config.name));
    emit_plot(&[Series { name: "V(r)".to_string(), points: vseries }], Axes::Linear, &plot_path)?;
    summary.files.push(plot_path);
    Ok(())
}

fn drift_verify(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let (beta, noise) = simple_example_of(config)?;
    let section = config.drift.as_ref().expect("validated");
    let spec = LyapunovSpec::new(beta, 1.0, section.p, vec![0.0]);
    let grad = |theta: &[f64]| vec![simple_example_grad(beta, theta[0])];
    let sampler = |rng: &mut rand_chacha::ChaCha8Rng, out: &mut [f64]| {
        out[0] = noise.sample(rng);
    };

    let mut rows = Vec::new();
    for &alpha in &section.alphas {
        for &theta in &section.thetas {
            let mut any_pass = false;
            for &c in &section.candidate_cs {
                let est = check_drift(
                    &spec,
                    &grad,
                    sampler,
                    alpha,
                    &[theta],
                    section.candidate_mu,
                    c,
                    section.samples,
                    seed_of(config, 0),
                    section.exclude_overflow,
                )?;
                any_pass |= est.pass;
                rows.push(vec![
                    f(alpha),
                    f(theta),
                    f(c),
                    f(est.mean_v_next),
                    f(est.ci_halfwidth),
                    f(est.rhs_bound),
                    est.excluded.to_string(),
                    est.pass.to_string(),
                ]);
            }
            summary.check(
                format!("drift holds at alpha={} theta={} for some c", f(alpha), f(theta)),
                any_pass,
            );
        }
    }
    let path = dir.join(format!("{}_drift.csv", config.name));
    write_csv(
        &path,
        &["alpha", "theta", "candidate_c", "mean_v_next", "ci", "rhs", "excluded", "pass"],
        &rows,
    )?;
    summary.files.push(path);
    Ok(())
}

fn w1_quantile_step(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let section = config.w1.as_ref().expect("validated");
    let (error, tau, theta_star) = match &config.problem {
        ProblemConfig::Quantile { error, tau, theta_star, covariate } => {
            let unit = matches!(
                covariate,
                Covariate::PerCoordinate { coords }
                    if coords == &vec![Distribution1D::PointMass { value: 1.0 }]
            );
            if !unit {
                return Err(ExperimentError::ConfigInvalid {
                    diagnostics: vec![
                        "problem.covariate: w1-quantile-step needs the unit point-mass covariate"
                            .to_string(),
                    ],
                });
            }
            (error.clone(), *tau, theta_star[0])
        }
        _ => {
            return Err(ExperimentError::WrongProblem {
                kind: config.kind.to_string(),
                problem: "quantile".to_string(),
            })
        }
    };
    // With x = 1 the response CDF is F(t) = P(theta* + eps <= t).
    let cdf = |t: f64| error.cdf(t - theta_star);

    let mut rows = Vec::new();
    let mut all_pass = true;
    for &gap in &section.gaps {
        let (exact, bound) = quantile_onestep_w1(
            section.theta_prime + gap,
            section.theta_prime,
            section.alpha,
            cdf,
            tau,
            section.mu_tau,
        )?;
        let pass = exact >= bound - 1e-12;
        all_pass &= pass;
        rows.push(vec![f(gap), f(exact), f(bound), pass.to_string()]);
    }
    let path = dir.join(format!("{}_w1.csv", config.name));
    write_csv(&path, &["gap", "exact", "bound", "pass"], &rows)?;
    summary.files.push(path);
    summary.metric("points", section.gaps.len() as f64);
    if config.thresholds.as_ref().and_then(|t| t.require_pass) == Some(true) {
        summary.check("one-step W1 dominates the expansion bound", all_pass);
    }
    Ok(())
}

fn crlb_average(
    config: &ExperimentConfig,
    dir: &Path,
    summary: &mut ExperimentSummary,
) -> Result<(), ExperimentError> {
    let problem = build_problem(&config.problem)?;
    let theta_star = problem.theta_star();
    let crlb = match &problem {
        BuiltProblem::Model(p) => {
            theory_constants(p, &ConstantsOptions::default()).crlb_coefficient.scalar()
        }
        BuiltProblem::Simple(_) => None,
    };
    if let Some(c) = crlb {
        summary.metric("crlb_coefficient", c);
    }

    let mut rows = Vec::new();
    for (bi, schedule) in config.schedules.iter().enumerate() {
        let trajectories = run_batch(
            problem.oracle(),
            schedule,
            &config.theta0,
            config.n_iters,
            config.replicas,
            seed_of(config, bi as u64),
            &RecordPlan::FinalOnly,
            Averaging::Full,
        )?;
        let scaled: Vec<f64> = trajectories
            .iter()
            .map(|t| {
                let avg = t.final_average.as_ref().expect("full averaging enabled");
                let e = crate::loss::norm(&crate::loss::sub(avg, &theta_star));
                config.n_iters as f64 * e * e
            })
            .collect();
        let m = scaled.len() as f64;
        let mean = scaled.iter().sum::<f64>() / m;
        let var = scaled.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0).max(1.0);
        let label = schedule_label(schedule);
        summary.metric(format!("scaled_mse[{label}]"), mean);
        let ratio = crlb.map(|c| mean / c);
        rows.push(vec![
            label.clone(),
            config.n_iters.to_string(),
            f(mean),
            f((var / m).sqrt()),
            crlb.map(f).unwrap_or_default(),
            ratio.map(f).unwrap_or_default(),
        ]);
        if let (Some(ratio), Some(factor)) =
            (ratio, config.thresholds.as_ref().and_then(|t| t.crlb_factor))
        {
            summary.metric(format!("crlb_ratio[{label}]"), ratio);
            summary.check(
                format!("scaled_mse[{label}] within factor {factor} of the CRLB"),
                ratio >= 1.0 / factor && ratio <= factor,
            );
        }
    }
    let path = dir.join(format!("{}_crlb.csv", config.name));
    write_csv(&path, &["schedule", "n", "scaled_mse", "se", "crlb", "ratio"], &rows)?;
    summary.files.push(path);
    Ok(())
}

fn robust_problem() -> ProblemConfig {
    ProblemConfig::Robust {
        covariate: Covariate::scalar(Distribution1D::TwoPoint { v1: 3.0, p1: 0.25, v2: -1.0 }),
        theta_star: vec![0.0],
        noise: Distribution1D::StudentT { nu: 1.1, scale: 1.0 },
        corruption: Distribution1D::PointMass { value: 0.01 },
        loss: RobustLoss::PseudoHuber { delta: 1.0 },
    }
}

/// Recursive quantile estimation: unit covariate, so the CRLB and one-step W1
/// results apply verbatim.
fn quantile_problem(z: f64) -> ProblemConfig {
    ProblemConfig::Quantile {
        covariate: Covariate::scalar(Distribution1D::PointMass { value: 1.0 }),
        theta_star: vec![0.0],
        error: Distribution1D::Cauchy { location: -z, scale: z },
        tau: 0.75,
    }
}

/// The quantile regression model of the reproduced figures: standard normal
/// covariate, Cauchy errors with the 0.75 quantile at zero.
fn quantile_regression_problem(z: f64) -> ProblemConfig {
    ProblemConfig::Quantile {
        covariate: Covariate::scalar(Distribution1D::Gaussian { mean: 0.0, std: 1.0 }),
        theta_star: vec![0.0],
        error: Distribution1D::Cauchy { location: -z, scale: z },
        tau: 0.75,
    }
}

fn base(kind: ExperimentKind, name: &str, problem: ProblemConfig) -> ExperimentConfig {
    ExperimentConfig {
        kind,
        name: name.to_string(),
        n_iters: 1_000_000,
        replicas: 100,
        master_seed: Some(20_240_601),
        output_dir: format!("out/{name}"),
        theta0: vec![0.0],
        extra_inits: Vec::new(),
        problem,
        schedules: Vec::new(),
        analysis: AnalysisConfig::default(),
        thresholds: None,
        lyapunov: None,
        drift: None,
        w1: None,
        sweep: None,
        paper_scale: None,
    }
}

fn poly(xi: f64) -> StepsizeSchedule {
    StepsizeSchedule::Polynomial { iota: 1.0, kappa: 0.0, xi }
}

/// The shipped experiment catalog; `presets/<name>.toml` holds the canonical
/// serialization of each entry.
pub fn builtin_presets() -> Vec<(&'static str, ExperimentConfig)> {
    let mut out: Vec<(&'static str, ExperimentConfig)> = Vec::new();

    for (name, problem) in [
        ("fig1-rate-robust", robust_problem()),
        ("fig1-rate-quantile", quantile_regression_problem(1.0)),
    ] {
        let mut cfg = base(ExperimentKind::RateDiminishing, name, problem);
        cfg.theta0 = vec![40.0];
        cfg.schedules = vec![poly(0.4), poly(0.6), poly(0.8)];
        cfg.thresholds = Some(Thresholds { slope_tol: Some(0.1), ..Default::default() });
        cfg.paper_scale = Some(ScaleOverride { n_iters: 10_000_000_000, replicas: 4000 });
        out.push((name, cfg));
    }

    for (name, n_iters) in [("fig2-clt-short", 100u64), ("fig2-clt-long", 100_000u64)] {
        let mut cfg = base(ExperimentKind::Clt, name, robust_problem());
        cfg.n_iters = n_iters;
        cfg.replicas = 500;
        // Initializations 6 and 0: far enough apart that the short horizon
        // keeps the two laws visibly distinct, close enough that by the long
        // horizon the deterministic transient has left the partial sums.
        cfg.theta0 = vec![6.0];
        cfg.extra_inits = vec![vec![0.0]];
        cfg.schedules = vec![
            StepsizeSchedule::Constant { alpha: 0.4 },
            StepsizeSchedule::Constant { alpha: 0.42 },
        ];
        cfg.thresholds = Some(if n_iters < 1000 {
            Thresholds { ks_min: Some(0.2), ..Default::default() }
        } else {
            Thresholds { ks_max: Some(0.1), ks_min: None, ..Default::default() }
        });
        cfg.paper_scale = Some(ScaleOverride { n_iters, replicas: 4000 });
        out.push((name, cfg));
    }

    {
        let mut cfg = base(ExperimentKind::RateDiminishing, "fig3-rate-robust", robust_problem());
        cfg.theta0 = vec![40.0];
        cfg.schedules = vec![poly(0.75), poly(0.9)];
        cfg.thresholds = Some(Thresholds { slope_tol: Some(0.12), ..Default::default() });
        out.push(("fig3-rate-robust", cfg));
    }

    {
        let mut cfg = base(ExperimentKind::BiasRr, "fig3-bias-rr-asymmetric", robust_problem());
        cfg.replicas = 200;
        cfg.analysis.alphas = vec![0.2, 0.4, 0.8];
        cfg.thresholds = Some(Thresholds {
            bias_se_factor: Some(3.0),
            rr_factor: Some(0.5),
            ..Default::default()
        });
        out.push(("fig3-bias-rr-asymmetric", cfg));
    }
    {
        let sym = ProblemConfig::Robust {
            covariate: Covariate::scalar(Distribution1D::Gaussian { mean: 0.0, std: 1.0 }),
            theta_star: vec![0.0],
            noise: Distribution1D::StudentT { nu: 1.1, scale: 1.0 },
            corruption: Distribution1D::PointMass { value: 0.01 },
            loss: RobustLoss::PseudoHuber { delta: 1.0 },
        };
        let mut cfg = base(ExperimentKind::BiasRr, "fig3-bias-rr-symmetric", sym);
        cfg.replicas = 200;
        cfg.analysis.alphas = vec![0.2, 0.4, 0.8];
        cfg.thresholds = Some(Thresholds { bias_se_factor: Some(3.0), ..Default::default() });
        out.push(("fig3-bias-rr-symmetric", cfg));
    }

    {
        let mut cfg =
            base(ExperimentKind::ParameterSweep, "fig4-sweep-noise", robust_problem());
        cfg.n_iters = 200_000;
        cfg.schedules = vec![StepsizeSchedule::Constant { alpha: 0.4 }];
        cfg.sweep = Some(
            [1.0, 30.0, 100.0]
                .iter()
                .map(|&scale| SweepVariant {
                    label: format!("t-scale-{scale}"),
                    problem: ProblemConfig::Robust {
                        covariate: Covariate::scalar(Distribution1D::TwoPoint {
                            v1: 3.0,
                            p1: 0.25,
                            v2: -1.0,
                        }),
                        theta_star: vec![0.0],
                        noise: Distribution1D::StudentT { nu: 1.1, scale },
                        // The noise sweep fixes corruption at zero.
                        corruption: Distribution1D::PointMass { value: 0.0 },
                        loss: RobustLoss::PseudoHuber { delta: 1.0 },
                    },
                })
                .collect(),
        );
        cfg.thresholds = Some(Thresholds { monotone: Some(true), ..Default::default() });
        out.push(("fig4-sweep-noise", cfg));
    }
    {
        let mut cfg =
            base(ExperimentKind::ParameterSweep, "fig4-sweep-corruption", robust_problem());
        cfg.n_iters = 200_000;
        cfg.schedules = vec![StepsizeSchedule::Constant { alpha: 0.4 }];
        cfg.sweep = Some(
            [0.01, 1.0, 2.0]
                .iter()
                .map(|&s| SweepVariant {
                    label: format!("corruption-{s}"),
                    problem: ProblemConfig::Robust {
                        covariate: Covariate::scalar(Distribution1D::TwoPoint {
                            v1: 3.0,
                            p1: 0.25,
                            v2: -1.0,
                        }),
                        theta_star: vec![0.0],
                        noise: Distribution1D::StudentT { nu: 1.1, scale: 1.0 },
                        corruption: Distribution1D::PointMass { value: s },
                        loss: RobustLoss::PseudoHuber { delta: 1.0 },
                    },
                })
                .collect(),
        );
        cfg.thresholds = Some(Thresholds { monotone: Some(true), ..Default::default() });
        out.push(("fig4-sweep-corruption", cfg));
    }
    {
        let mut cfg = base(
            ExperimentKind::ParameterSweep,
            "fig4-sweep-cauchy",
            quantile_regression_problem(1.0),
        );
        cfg.n_iters = 200_000;
        cfg.schedules = vec![StepsizeSchedule::Polynomial { iota: 1.0, kappa: 0.0, xi: 0.5 }];
        cfg.sweep = Some(
            [0.1, 50.0, 100.0]
                .iter()
                .map(|&z| SweepVariant {
                    label: format!("cauchy-{z}"),
                    problem: quantile_regression_problem(z),
                })
                .collect(),
        );
        cfg.thresholds = Some(Thresholds { monotone: Some(true), ..Default::default() });
        out.push(("fig4-sweep-cauchy", cfg));
    }

    for (name, beta) in [("lemma-verify-beta1", 1.0), ("lemma-verify-beta15", 1.5)] {
        let mut cfg = base(
            ExperimentKind::LyapunovVerify,
            name,
            ProblemConfig::SimpleExample {
                beta,
                noise: Distribution1D::Gaussian { mean: 0.0, std: 1.0 },
            },
        );
        cfg.n_iters = 1;
        cfg.replicas = 1;
        cfg.lyapunov = Some(LyapunovSection {
            p: 0.0,
            radii: (1..=40).map(|i| 0.1 * i as f64).collect(),
            tol: 1e-4,
        });
        cfg.thresholds = Some(Thresholds { require_pass: Some(true), ..Default::default() });
        out.push((name, cfg));
    }

    {
        let mut cfg = base(
            ExperimentKind::DriftVerify,
            "drift-verify",
            ProblemConfig::SimpleExample {
                beta: 1.0,
                noise: Distribution1D::Gaussian { mean: 0.0, std: 1.0 },
            },
        );
        cfg.n_iters = 1;
        cfg.replicas = 1;
        cfg.drift = Some(DriftSection {
            p: 0.0,
            alphas: vec![1e-3, 1e-2],
            thetas: vec![0.25, 1.0, 3.0],
            candidate_mu: 0.5,
            candidate_cs: vec![0.5, 1.0, 2.0, 4.0, 8.0],
            samples: 100_000,
            exclude_overflow: false,
        });
        cfg.thresholds = Some(Thresholds { require_pass: Some(true), ..Default::default() });
        out.push(("drift-verify", cfg));
    }

    {
        let mut cfg =
            base(ExperimentKind::W1QuantileStep, "w1-quantile-step", quantile_problem(1.0));
        cfg.n_iters = 1;
        cfg.replicas = 1;
        cfg.w1 = Some(W1Section {
            alpha: 0.1,
            theta_prime: 0.0,
            gaps: (1..=20).map(|i| 0.024 * i as f64 / 20.0).collect(),
            mu_tau: 0.2,
        });
        cfg.thresholds = Some(Thresholds { require_pass: Some(true), ..Default::default() });
        out.push(("w1-quantile-step", cfg));
    }

    {
        let mut cfg = base(ExperimentKind::CrlbAverage, "crlb-average", quantile_problem(1.0));
        cfg.n_iters = 100_000;
        cfg.replicas = 200;
        cfg.schedules = vec![StepsizeSchedule::Polynomial { iota: 1.0, kappa: 0.0, xi: 0.5 }];
        cfg.thresholds = Some(Thresholds { crlb_factor: Some(2.0), ..Default::default() });
        cfg.paper_scale = Some(ScaleOverride { n_iters: 1_000_000, replicas: 4000 });
        out.push(("crlb-average", cfg));
    }

    {
        let mut cfg = base(ExperimentKind::ConstantPlateau, "constant-plateau", robust_problem());
        cfg.n_iters = 200_000;
        cfg.replicas = 200;
        cfg.schedules = vec![
            StepsizeSchedule::Constant { alpha: 0.04 },
            StepsizeSchedule::Constant { alpha: 0.08 },
        ];
        cfg.thresholds = Some(Thresholds { plateau_ratio: Some((0.35, 0.65)), ..Default::default() });
        out.push(("constant-plateau", cfg));
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simple_config(kind: ExperimentKind) -> ExperimentConfig {
        ExperimentConfig {
            kind,
            name: "t".to_string(),
            n_iters: 2000,
            replicas: 4,
            master_seed: Some(7),
            output_dir: "unused".to_string(),
            theta0: vec![3.0],
            extra_inits: Vec::new(),
            problem: ProblemConfig::SimpleExample {
                beta: 1.0,
                noise: Distribution1D::Laplace { mean: 0.0, scale: 0.5 },
            },
            schedules: vec![StepsizeSchedule::Constant { alpha: 0.05 }],
            analysis: AnalysisConfig::default(),
            thresholds: None,
            lyapunov: None,
            drift: None,
            w1: None,
            sweep: None,
            paper_scale: None,
        }
    }

    #[test]
    fn builtin_presets_validate_and_round_trip() {
        let presets = builtin_presets();
        assert!(presets.len() >= 14);
        for (name, cfg) in presets {
            let diags = semantic_diagnostics(&cfg);
            assert!(diags.is_empty(), "{name}: {diags:?}");
            let text = canonical_toml(&cfg);
            let parsed = validate_config(&text).unwrap_or_else(|e| panic!("{name}: {e:?}"));
            assert_eq!(parsed, cfg, "{name}");
            assert_eq!(canonical_toml(&parsed), text, "{name}");
        }
    }

    #[test]
    fn missing_master_seed_is_rejected() {
        let mut cfg = simple_config(ExperimentKind::ConstantPlateau);
        cfg.master_seed = None;
        let diags = semantic_diagnostics(&cfg);
        assert!(diags.iter().any(|d| d.contains("master_seed")), "{diags:?}");
    }

    #[test]
    fn diagnostics_are_collected_not_first_error_only() {
        let text = r#"
kind = "clt"
name = ""
n_iters = 0
replicas = 100
output_dir = "out"
theta0 = [0.0]

[problem]
kind = "quantile"
theta_star = [0.0]
tau = 1.5

[problem.covariate]
variant = "per-coordinate"

[[problem.covariate.coords]]
variant = "point-mass"
value = 1.0

[problem.error]
variant = "cauchy"
location = -1.0
scale = 1.0

[[schedules]]
variant = "constant"
alpha = 0.4
"#;
        let err = validate_config(text).unwrap_err();
        assert!(err.iter().any(|d| d.contains("problem.tau")), "{err:?}");
        assert!(err.iter().any(|d| d.contains("master_seed")), "{err:?}");
        assert!(err.iter().any(|d| d.contains("n_iters")), "{err:?}");
        assert!(err.iter().any(|d| d.contains("name")), "{err:?}");
    }

    #[test]
    fn config_round_trips_byte_identically() {
        let mut cfg = simple_config(ExperimentKind::RateDiminishing);
        cfg.schedules = vec![StepsizeSchedule::Polynomial { iota: 1.0, kappa: 0.0, xi: 0.8 }];
        cfg.thresholds = Some(Thresholds { slope_tol: Some(0.1), ..Default::default() });
        let text = canonical_toml(&cfg);
        let parsed = validate_config(&text).unwrap();
        assert_eq!(parsed, cfg);
        assert_eq!(canonical_toml(&parsed), text);
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut text = canonical_toml(&simple_config(ExperimentKind::ConstantPlateau));
        text.push_str("\nunknown_knob = 3\n");
        assert!(validate_config(&text).is_err());
    }

    #[test]
    fn invalid_config_blocks_run() {
        let mut cfg = simple_config(ExperimentKind::ConstantPlateau);
        cfg.master_seed = None;
        assert!(matches!(
            run_experiment(&cfg),
            Err(ExperimentError::ConfigInvalid { .. })
        ));
    }

    #[test]
    fn plateau_pipeline_end_to_end() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = simple_config(ExperimentKind::ConstantPlateau);
        cfg.output_dir = dir.path().to_str().unwrap().to_string();
        cfg.schedules = vec![
            StepsizeSchedule::Constant { alpha: 0.04 },
            StepsizeSchedule::Constant { alpha: 0.08 },
        ];
        cfg.thresholds = Some(Thresholds { plateau_ratio: Some((0.2, 0.8)), ..Default::default() });
        cfg.replicas = 64;
        cfg.n_iters = 4000;
        let summary = run_experiment(&cfg).unwrap();
        // Constant-stepsize plateau scales roughly linearly in alpha.
        assert!(summary.pass, "{:?}", summary.checks);
        for file in &summary.files {
            assert!(file.exists(), "{file:?}");
        }
    }

    #[test]
    fn reruns_are_byte_identical() {
        let run_once = |dir: &std::path::Path| {
            let mut cfg = simple_config(ExperimentKind::RateDiminishing);
            cfg.output_dir = dir.to_str().unwrap().to_string();
            cfg.schedules =
                vec![StepsizeSchedule::Polynomial { iota: 1.0, kappa: 0.0, xi: 0.8 }];
            cfg.n_iters = 20_000;
            cfg.replicas = 8;
            let summary = run_experiment(&cfg).unwrap();
            summary
                .files
                .iter()
                .map(|p| std::fs::read(p).unwrap())
                .collect::<Vec<_>>()
        };
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        assert_eq!(run_once(d1.path()), run_once(d2.path()));
    }

    #[test]
    fn w1_pipeline_matches_direct_evaluation() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = simple_config(ExperimentKind::W1QuantileStep);
        cfg.output_dir = dir.path().to_str().unwrap().to_string();
        cfg.theta0 = vec![0.0];
        cfg.schedules.clear();
        cfg.problem = ProblemConfig::Quantile {
            covariate: Covariate::scalar(Distribution1D::PointMass { value: 1.0 }),
            theta_star: vec![0.0],
            error: Distribution1D::Cauchy { location: -1.0, scale: 1.0 },
            tau: 0.75,
        };
        cfg.w1 = Some(W1Section {
            alpha: 0.1,
            theta_prime: 0.0,
            gaps: vec![0.005, 0.01, 0.02],
            mu_tau: 0.2,
        });
        cfg.thresholds = Some(Thresholds { require_pass: Some(true), ..Default::default() });
        let summary = run_experiment(&cfg).unwrap();
        assert!(summary.pass, "{:?}", summary.checks);
    }

    #[test]
    fn lyapunov_pipeline_passes_for_the_scalar_example() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = simple_config(ExperimentKind::LyapunovVerify);
        cfg.output_dir = dir.path().to_str().unwrap().to_string();
        cfg.schedules.clear();
        cfg.lyapunov = Some(LyapunovSection {
            p: 0.0,
            radii: (1..=40).map(|i| 0.1 * i as f64).collect(),
            tol: 1e-4,
        });
        cfg.thresholds = Some(Thresholds { require_pass: Some(true), ..Default::default() });
        let summary = run_experiment(&cfg).unwrap();
        assert!(summary.pass, "{:?}", summary.checks);
    }
}
