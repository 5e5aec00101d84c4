//! Seeded batch runs: build, certify, run, check, persist.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::config::{ActionSetSpec, ExperimentConfig};
use super::csv::{emit_regret_csv, format_g12};
use crate::diagnostics::{
    evaluate, regret_bound_value, sublinearity_stat, Trajectory, TrajectoryReport,
    MIN_SUBLINEARITY_HORIZON,
};
use crate::error::{Error, Result};
use crate::model::{
    random_anchor, rho_threshold, write_env, ActionSet, BanditEnvironment, EnvKind, GamSpec,
    NoiseModel, CERT_TOL,
};
use crate::policy::{run_policy, BetaSchedule, PolicyRegistry, RunOptions, ScheduleParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum ExitStatus {
    Ok = 0,
    CheckFailure = 1,
    ConfigError = 2,
    IoError = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }
}

/// Independent seed for one ingredient of a seed's environment.
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(100 + stream);
    rng.next_u64()
}

/// The environment a seed runs against, built with the construction `ρ`.
pub fn build_environment(cfg: &ExperimentConfig, seed: u64) -> Result<BanditEnvironment> {
    let rho = cfg.env.build_rho();
    let (c_b, c_w) = (cfg.bounds.c_b, cfg.bounds.c_w);
    let d = cfg.d;
    let spec = match cfg.env.action_set {
        ActionSetSpec::Fig1(n) => GamSpec::figure1(n, rho)?,
        other => {
            let actions = match other {
                ActionSetSpec::Grid(n) => {
                    ActionSet::grid(d, n, c_b / (d as f64).sqrt(), c_b, false)?
                }
                ActionSetSpec::Sphere(n) => ActionSet::sphere(d, n, c_b, c_b, sub_seed(seed, 1))?,
                ActionSetSpec::Fig1(_) => unreachable!(),
            };
            let w = match &cfg.env.w_star {
                Some(w) => DVector::from_column_slice(w),
                None => random_anchor(d, c_w, sub_seed(seed, 2)),
            };
            GamSpec::new(w, c_w, rho, actions)?
        }
    };
    let noise = NoiseModel::gaussian(cfg.env.noise_sigma);
    match cfg.env.kind {
        EnvKind::Strict => BanditEnvironment::strict(spec, cfg.env.shape, noise, sub_seed(seed, 3)),
        EnvKind::Weak => BanditEnvironment::weak(
            spec,
            cfg.env.offset,
            cfg.env.shape,
            noise,
            sub_seed(seed, 3),
        ),
    }
}

/// The configured radius schedule, with `C_b`, `C_w`, `d` and `F` taken
/// from the built environment.
pub fn schedule_for(cfg: &ExperimentConfig, env: &BanditEnvironment) -> Result<BetaSchedule> {
    let spec = env.spec();
    BetaSchedule::new(
        cfg.policy.schedule,
        ScheduleParams {
            dim: spec.dim(),
            sigma: cfg.policy.sigma,
            c_b: spec.c_b(),
            c_w: spec.c_w(),
            delta: cfg.delta,
            f_bound: env.f_range(),
            rho: cfg.env.rho,
        },
    )
}

/// Largest `ρ` the known-`ρ` radius tolerates for this configuration.
pub fn config_rho_threshold(cfg: &ExperimentConfig) -> Result<f64> {
    let env = build_environment(cfg, cfg.seeds[0])?;
    let spec = env.spec();
    rho_threshold(
        spec.dim(),
        cfg.horizon,
        cfg.policy.sigma,
        spec.c_b(),
        spec.c_w(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedBound {
    pub seed: u64,
    pub certified_rho: f64,
    /// Bound with the declared `ρ`.
    pub declared: f64,
    /// Bound with the certified `ρ`.
    pub certified: f64,
}

/// Theorem right-hand sides per seed, without running the policy.
pub fn config_bounds(cfg: &ExperimentConfig) -> Result<Vec<SeedBound>> {
    if cfg.horizon < 2 {
        return Err(Error::invalid("the regret bound needs horizon >= 2"));
    }
    cfg.seeds
        .iter()
        .map(|&seed| {
            let env = build_environment(cfg, seed)?;
            let schedule = schedule_for(cfg, &env)?;
            let certified_rho = env.certify_own().worst_ratio;
            Ok(SeedBound {
                seed,
                certified_rho,
                declared: regret_bound_value(cfg.horizon, &env, &schedule, cfg.env.rho)?,
                certified: regret_bound_value(cfg.horizon, &env, &schedule, certified_rho)?,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SeedRun {
    pub seed: u64,
    pub env: BanditEnvironment,
    pub schedule: BetaSchedule,
    pub certified_rho: f64,
    pub trajectory: Trajectory,
    pub report: TrajectoryReport,
}

#[derive(Debug, Clone)]
pub enum SeedOutcome {
    Completed(Box<SeedRun>),
    CertificationFailed {
        seed: u64,
        certified_rho: f64,
        declared_rho: f64,
        env: Box<BanditEnvironment>,
    },
    Failed {
        seed: u64,
        message: String,
    },
}

impl SeedOutcome {
    pub fn seed(&self) -> u64 {
        match self {
            SeedOutcome::Completed(r) => r.seed,
            SeedOutcome::CertificationFailed { seed, .. } | SeedOutcome::Failed { seed, .. } => {
                *seed
            }
        }
    }

    pub fn run(&self) -> Option<&SeedRun> {
        match self {
            SeedOutcome::Completed(r) => Some(r),
            _ => None,
        }
    }
}

pub fn run_seed(cfg: &ExperimentConfig, registry: &PolicyRegistry, seed: u64) -> SeedOutcome {
    match try_run_seed(cfg, registry, seed) {
        Ok(o) => o,
        Err(e) => {
            log::error!("seed {seed}: {e}");
            SeedOutcome::Failed {
                seed,
                message: e.to_string(),
            }
        }
    }
}

fn try_run_seed(
    cfg: &ExperimentConfig,
    registry: &PolicyRegistry,
    seed: u64,
) -> Result<SeedOutcome> {
    let env = build_environment(cfg, seed)?;
    let cert = env.certify_own();
    if cert.worst_ratio > cfg.env.rho + CERT_TOL {
        log::warn!(
            "seed {seed}: certified rho {} exceeds declared {} (witness action {})",
            cert.worst_ratio,
            cfg.env.rho,
            cert.witness_index
        );
        return Ok(SeedOutcome::CertificationFailed {
            seed,
            certified_rho: cert.worst_ratio,
            declared_rho: cfg.env.rho,
            env: Box::new(env),
        });
    }

    let schedule = schedule_for(cfg, &env)?;
    let mut policy = registry.create(&cfg.policy.kind)?;
    let opts = RunOptions::derive(&env, &schedule, cfg.horizon, seed, policy.homogenizes());
    let trajectory = run_policy(&env, policy.as_mut(), &schedule, &opts)?;
    let report = evaluate(&trajectory, &env, &schedule, &cfg.checks);
    log::info!(
        "seed {seed}: R_T = {}",
        format_g12(report.cumulative_regret)
    );
    for name in report.deterministic_failures() {
        log::error!("seed {seed}: check {name} failed");
    }
    Ok(SeedOutcome::Completed(Box::new(SeedRun {
        seed,
        env,
        schedule,
        certified_rho: cert.worst_ratio,
        trajectory,
        report,
    })))
}

/// Runs every seed, in parallel across seeds. `jobs = None` uses every core.
/// Results come back in configuration order regardless of scheduling.
pub fn run_seeds(
    cfg: &ExperimentConfig,
    registry: &PolicyRegistry,
    jobs: Option<usize>,
) -> Result<Vec<SeedOutcome>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    Ok(pool.install(|| {
        cfg.seeds
            .par_iter()
            .map(|&seed| run_seed(cfg, registry, seed))
            .collect()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSummary {
    pub seeds: usize,
    pub completed: usize,
    pub certification_failures: usize,
    pub run_failures: usize,
    /// Seeds with at least one failed deterministic check.
    pub deterministic_failures: usize,
    pub regrets: Vec<f64>,
    pub mean_regret: Option<f64>,
    /// Sample standard deviation; zero for a single seed.
    pub std_regret: Option<f64>,
    pub containment_violation_fraction: Option<f64>,
    /// `δ + 2√(δ(1-δ)/n)` over the completed seeds.
    pub containment_threshold: Option<f64>,
    pub bound_satisfaction_fraction: Option<f64>,
    pub sublinearity_ratios: Vec<f64>,
    pub sublinearity_median: Option<f64>,
}

fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Aggregates seed outcomes. Statistics are computed in seed order, so they
/// do not depend on the order outcomes are supplied in.
pub fn summarize(outcomes: &[SeedOutcome], delta: f64) -> ExperimentSummary {
    let mut sorted: Vec<&SeedOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.seed());
    let runs: Vec<&SeedRun> = sorted.iter().filter_map(|o| o.run()).collect();

    let regrets: Vec<f64> = runs.iter().map(|r| r.report.cumulative_regret).collect();
    let n = regrets.len();
    let mean_regret = (n > 0).then(|| regrets.iter().sum::<f64>() / n as f64);
    let std_regret = mean_regret.map(|m| {
        if n < 2 {
            0.0
        } else {
            (regrets.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / (n - 1) as f64).sqrt()
        }
    });
    let violated = runs
        .iter()
        .filter(|r| r.report.containment_violations > 0)
        .count();
    let containment_violation_fraction = (n > 0).then(|| violated as f64 / n as f64);
    let containment_threshold =
        (n > 0).then(|| delta + 2.0 * (delta * (1.0 - delta) / n as f64).sqrt());
    let with_bound: Vec<bool> = runs
        .iter()
        .filter_map(|r| r.report.bound_satisfied)
        .collect();
    let bound_satisfaction_fraction = (!with_bound.is_empty())
        .then(|| with_bound.iter().filter(|&&b| b).count() as f64 / with_bound.len() as f64);
    let sublinearity_ratios: Vec<f64> = runs
        .iter()
        .filter(|r| r.trajectory.steps.len() >= MIN_SUBLINEARITY_HORIZON)
        .filter_map(|r| sublinearity_stat(&r.trajectory.steps).ok())
        .map(|s| s.ratio)
        .collect();

    ExperimentSummary {
        seeds: outcomes.len(),
        completed: n,
        certification_failures: sorted
            .iter()
            .filter(|o| matches!(o, SeedOutcome::CertificationFailed { .. }))
            .count(),
        run_failures: sorted
            .iter()
            .filter(|o| matches!(o, SeedOutcome::Failed { .. }))
            .count(),
        deterministic_failures: runs
            .iter()
            .filter(|r| !r.report.deterministic_failures().is_empty())
            .count(),
        sublinearity_median: median(&sublinearity_ratios),
        regrets,
        mean_regret,
        std_regret,
        containment_violation_fraction,
        containment_threshold,
        bound_satisfaction_fraction,
        sublinearity_ratios,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), format_g12)
}

impl ExperimentSummary {
    pub fn status(&self) -> ExitStatus {
        if self.certification_failures > 0 || self.run_failures > 0 {
            ExitStatus::ConfigError
        } else if self.deterministic_failures > 0 {
            ExitStatus::CheckFailure
        } else {
            ExitStatus::Ok
        }
    }

    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "seeds = {}", self.seeds);
        let _ = writeln!(out, "completed = {}", self.completed);
        let _ = writeln!(
            out,
            "certification_failures = {}",
            self.certification_failures
        );
        let _ = writeln!(out, "run_failures = {}", self.run_failures);
        let _ = writeln!(
            out,
            "deterministic_failures = {}",
            self.deterministic_failures
        );
        let _ = writeln!(out, "mean_regret = {}", opt(self.mean_regret));
        let _ = writeln!(out, "std_regret = {}", opt(self.std_regret));
        let _ = writeln!(
            out,
            "containment_violation_fraction = {}",
            opt(self.containment_violation_fraction)
        );
        let _ = writeln!(
            out,
            "containment_threshold = {}",
            opt(self.containment_threshold)
        );
        let _ = writeln!(
            out,
            "bound_satisfaction_fraction = {}",
            opt(self.bound_satisfaction_fraction)
        );
        let _ = writeln!(
            out,
            "sublinearity_median = {}",
            opt(self.sublinearity_median)
        );
        let ratios: Vec<String> = self
            .sublinearity_ratios
            .iter()
            .map(|&r| format_g12(r))
            .collect();
        let _ = writeln!(out, "sublinearity_ratios = {}", ratios.join(", "));
        out
    }
}

/// Per-seed block of the summary file, keys prefixed with `seed.<k>.`.
pub fn seed_block(outcome: &SeedOutcome) -> String {
    let seed = outcome.seed();
    let mut out = String::new();
    match outcome {
        SeedOutcome::Completed(r) => {
            let _ = writeln!(out, "seed.{seed}.status = ok");
            let _ = writeln!(
                out,
                "seed.{seed}.certified_rho = {}",
                format_g12(r.certified_rho)
            );
            let _ = writeln!(
                out,
                "seed.{seed}.R_T = {}",
                format_g12(r.report.cumulative_regret)
            );
            for line in r.report.to_kv().lines() {
                let _ = writeln!(out, "seed.{seed}.{line}");
            }
        }
        SeedOutcome::CertificationFailed {
            certified_rho,
            declared_rho,
            ..
        } => {
            let _ = writeln!(out, "seed.{seed}.status = certification_failed");
            let _ = writeln!(
                out,
                "seed.{seed}.certified_rho = {}",
                format_g12(*certified_rho)
            );
            let _ = writeln!(
                out,
                "seed.{seed}.declared_rho = {}",
                format_g12(*declared_rho)
            );
        }
        SeedOutcome::Failed { message, .. } => {
            let _ = writeln!(out, "seed.{seed}.status = error");
            let _ = writeln!(out, "seed.{seed}.error = {message}");
        }
    }
    out
}

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub status: ExitStatus,
    pub summary: ExperimentSummary,
    pub seeds: Vec<SeedOutcome>,
    pub io_errors: Vec<Error>,
}

/// Writes every output file; failures are collected rather than aborting.
pub fn write_outputs(
    cfg: &ExperimentConfig,
    outcomes: &[SeedOutcome],
    summary: &ExperimentSummary,
) -> Vec<Error> {
    let dir = &cfg.output_dir;
    let mut errors = Vec::new();
    if let Err(e) = fs::create_dir_all(dir) {
        errors.push(Error::io(dir, e));
        return errors;
    }
    let mut record = |r: Result<()>| {
        if let Err(e) = r {
            log::error!("{e}");
            errors.push(e);
        }
    };

    record(write_text(&dir.join("config.txt"), &cfg.to_text()));
    let mut sorted: Vec<&SeedOutcome> = outcomes.iter().collect();
    sorted.sort_by_key(|o| o.seed());
    for o in &sorted {
        let seed = o.seed();
        match o {
            SeedOutcome::Completed(r) => {
                record(write_env(&r.env, &dir.join(format!("env_seed{seed}.txt"))));
                record(emit_regret_csv(
                    &[&r.trajectory],
                    &dir.join(format!("trace_seed{seed}.csv")),
                ));
                record(write_text(
                    &dir.join(format!("report_seed{seed}.txt")),
                    &r.report.to_kv(),
                ));
            }
            SeedOutcome::CertificationFailed { env, .. } => {
                record(write_env(env, &dir.join(format!("env_seed{seed}.txt"))));
            }
            SeedOutcome::Failed { .. } => {}
        }
    }
    let trajs: Vec<&Trajectory> = sorted
        .iter()
        .filter_map(|o| o.run())
        .map(|r| &r.trajectory)
        .collect();
    record(emit_regret_csv(&trajs, &dir.join("regret.csv")));

    let mut text = summary.to_kv();
    for o in &sorted {
        text.push_str(&seed_block(o));
    }
    record(write_text(&dir.join("summary.txt"), &text));
    errors
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Full batch: run every seed, aggregate, and write the output directory.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    registry: &PolicyRegistry,
    jobs: Option<usize>,
) -> ExperimentOutcome {
    let seeds = match run_seeds(cfg, registry, jobs) {
        Ok(s) => s,
        Err(e) => {
            log::error!("{e}");
            let summary = summarize(&[], cfg.delta);
            return ExperimentOutcome {
                status: ExitStatus::ConfigError,
                summary,
                seeds: Vec::new(),
                io_errors: Vec::new(),
            };
        }
    };
    let summary = summarize(&seeds, cfg.delta);
    let io_errors = write_outputs(cfg, &seeds, &summary);
    let status = if io_errors.is_empty() {
        summary.status()
    } else {
        summary.status().max(ExitStatus::IoError)
    };
    ExperimentOutcome {
        status,
        summary,
        seeds,
        io_errors,
    }
}
