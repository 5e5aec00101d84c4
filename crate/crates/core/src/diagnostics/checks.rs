//! Post-hoc checks of the regret analysis on recorded trajectories.
//!
//! The algebraic checks hold on every trajectory regardless of the noise
//! draw; a failure there points at the implementation. The theorem bound
//! and containment are high-probability statements and are judged across
//! seeds.

use nalgebra::{Cholesky, DVector};

use super::trace::{StepRecord, Trajectory};
use crate::error::{Error, Result};
use crate::linalg::PsdState;
use crate::model::{BanditEnvironment, EnvKind};
use crate::policy::{BetaSchedule, ScheduleKind};

/// Absolute slack on deterministic inequalities.
pub const INEQ_SLACK: f64 = 1e-9;

/// Relative tolerance of the determinant identity.
pub const LOGDET_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaCheck {
    pub passed: bool,
    /// Smallest `rhs - lhs` over the checked rounds; `+∞` when none were checked.
    pub slack: f64,
}

impl LemmaCheck {
    fn from_slacks(slacks: impl Iterator<Item = f64>) -> Self {
        let slack = slacks.fold(f64::INFINITY, f64::min);
        Self {
            passed: slack >= -INEQ_SLACK,
            slack,
        }
    }
}

/// `|Δ_t| <= ρ/(1-ρ) · w*ᵀ(x* - x_t)` on every round.
pub fn check_deviation(steps: &[StepRecord], rho: f64) -> LemmaCheck {
    let coef = rho / (1.0 - rho);
    LemmaCheck::from_slacks(steps.iter().map(|s| coef * s.anchor_gap - s.delta.abs()))
}

/// `w*ᵀ(x* - x_t) <= 2√β_t u_t` on contained rounds.
pub fn check_gap_lemma(steps: &[StepRecord]) -> LemmaCheck {
    LemmaCheck::from_slacks(
        steps
            .iter()
            .filter(|s| s.contained)
            .map(|s| 2.0 * (s.beta * s.u_sq).sqrt() - s.anchor_gap),
    )
}

/// `r_t <= 2√β_t u_t / (1-ρ)` on contained rounds.
pub fn check_instant_regret(steps: &[StepRecord], rho: f64) -> LemmaCheck {
    LemmaCheck::from_slacks(
        steps
            .iter()
            .filter(|s| s.contained)
            .map(|s| 2.0 * (s.beta * s.u_sq).sqrt() / (1.0 - rho) - s.instant_regret),
    )
}

/// The chosen UCB value dominates `θ*ᵀx*` on contained rounds.
pub fn check_optimism(steps: &[StepRecord], theta_star_value: f64) -> LemmaCheck {
    LemmaCheck::from_slacks(
        steps
            .iter()
            .filter(|s| s.contained)
            .map(|s| s.ucb_value - theta_star_value),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EllipticalPotential {
    /// `Σ_t u_t²`.
    pub lhs: f64,
    /// `2d log(1 + T C_b² / (dλ))`.
    pub rhs: f64,
    /// Largest single `u_t²`; the bound's derivation needs it below 1.
    pub max_u_sq: f64,
    pub passed: bool,
}

pub fn elliptical_potential(
    u_sq: &[f64],
    dim: usize,
    c_b: f64,
    lambda: f64,
) -> EllipticalPotential {
    let lhs: f64 = u_sq.iter().sum();
    let d = dim as f64;
    let t = u_sq.len() as f64;
    let rhs = 2.0 * d * (t * c_b * c_b / (d * lambda)).ln_1p();
    EllipticalPotential {
        lhs,
        rhs,
        max_u_sq: u_sq.iter().copied().fold(0.0, f64::max),
        passed: lhs <= rhs + INEQ_SLACK,
    }
}

pub fn check_elliptical_potential(traj: &Trajectory) -> EllipticalPotential {
    let u: Vec<f64> = traj.steps.iter().map(|s| s.u_sq).collect();
    elliptical_potential(&u, traj.dim(), traj.feature_bound, traj.lambda)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeverageSum {
    /// `Σ_i x_iᵀ Σ_t⁻¹ x_i` over the absorbed observations.
    pub lhs: f64,
    /// `d - λ tr(Σ_t⁻¹)`, which equals `lhs` exactly in exact arithmetic.
    pub trace_identity: f64,
    pub passed: bool,
}

pub fn leverage_sum<'a>(
    psd: &PsdState,
    xs: impl IntoIterator<Item = &'a DVector<f64>>,
) -> LeverageSum {
    let lhs: f64 = xs.into_iter().map(|x| psd.mahalanobis_inv_sq(x)).sum();
    let d = psd.dim() as f64;
    LeverageSum {
        lhs,
        trace_identity: d - psd.lambda() * psd.sigma_inv().trace(),
        passed: lhs <= d + INEQ_SLACK,
    }
}

pub fn check_leverage_sum(traj: &Trajectory) -> LeverageSum {
    let mut counts = vec![0usize; traj.features.len()];
    for s in &traj.steps {
        counts[s.action_index] += 1;
    }
    let psd = traj.final_ball.psd();
    let lhs: f64 = counts
        .iter()
        .zip(&traj.features)
        .filter(|(&n, _)| n > 0)
        .map(|(&n, x)| n as f64 * psd.mahalanobis_inv_sq(x))
        .sum();
    let d = psd.dim() as f64;
    LeverageSum {
        lhs,
        trace_identity: d - psd.lambda() * psd.sigma_inv().trace(),
        passed: lhs <= d + INEQ_SLACK,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantIdentity {
    /// `log det Σ_T` as accumulated by the rank-1 updates.
    pub accumulated: f64,
    /// `log det Σ_0 + Σ_t log(1 + u_t²)` from the recorded `u_t²`.
    pub from_trace: f64,
    /// Cholesky log-determinant of the final `Σ_T`.
    pub dense: f64,
    pub passed: bool,
}

pub fn check_determinant_identity(traj: &Trajectory) -> DeterminantIdentity {
    let psd = traj.final_ball.psd();
    let dense = dense_log_det(psd);
    let from_trace = psd.dim() as f64 * traj.lambda.ln()
        + traj.steps.iter().map(|s| s.u_sq.ln_1p()).sum::<f64>();
    let tol = LOGDET_TOL * dense.abs().max(1.0);
    DeterminantIdentity {
        accumulated: psd.log_det(),
        from_trace,
        dense,
        passed: (psd.log_det() - dense).abs() <= tol && (from_trace - dense).abs() <= tol,
    }
}

fn dense_log_det(psd: &PsdState) -> f64 {
    match Cholesky::new(psd.sigma().clone()) {
        Some(c) => 2.0 * c.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>(),
        None => f64::NAN,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegretBound {
    pub regret: f64,
    pub bound: f64,
    pub satisfied: bool,
}

/// Right-hand side of the high-probability regret bound for `T` rounds.
///
/// Strict environments use `F + √(8(T-1)β_{T-1} d/(1-ρ)² · log(1 + T C_b² C_w² / (dσ²)))`;
/// weak environments add `c*` and use `d + 1` and `C_w² + F²`.
pub fn regret_bound_value(
    horizon: u64,
    env: &BanditEnvironment,
    schedule: &BetaSchedule,
    rho: f64,
) -> Result<f64> {
    if horizon < 2 {
        return Err(Error::invalid("the regret bound needs T >= 2"));
    }
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!(
            "certified rho {rho} is outside [0, 1)"
        )));
    }
    let p = schedule.params();
    let t = horizon as f64;
    let d = p.dim as f64;
    let s2 = p.sigma * p.sigma;
    let f = env.f_range();
    let beta = schedule.beta_at(horizon - 1)?;
    let scale = (1.0 - rho) * (1.0 - rho);
    match (schedule.kind(), env.kind()) {
        (ScheduleKind::Theorem1 | ScheduleKind::KnownRho, EnvKind::Strict) => {
            let log = (t * p.c_b * p.c_b * p.c_w * p.c_w / (d * s2)).ln_1p();
            Ok(f + (8.0 * (t - 1.0) * beta * d / scale * log).sqrt())
        }
        (ScheduleKind::Theorem2, EnvKind::Weak) => {
            let log = (t * p.c_b * p.c_b * (p.c_w * p.c_w + f * f) / (d * s2)).ln_1p();
            Ok(f + env.offset_c() + (8.0 * (t - 1.0) * beta * (d + 1.0) / scale * log).sqrt())
        }
        (kind, env_kind) => Err(Error::invalid(format!(
            "schedule {kind} has no regret bound for a {env_kind} environment"
        ))),
    }
}

pub fn check_regret_bound(
    steps: &[StepRecord],
    env: &BanditEnvironment,
    schedule: &BetaSchedule,
) -> Result<RegretBound> {
    let rho = env.certify_own().worst_ratio;
    let bound = regret_bound_value(steps.len() as u64, env, schedule, rho)?;
    let regret: f64 = steps.iter().map(|s| s.instant_regret).sum();
    Ok(RegretBound {
        regret,
        bound,
        satisfied: regret <= bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContainmentStats {
    pub runs: usize,
    pub runs_with_violation: usize,
    pub violation_fraction: f64,
    /// `δ + 2√(δ(1-δ)/n)`.
    pub threshold: f64,
    pub passed: bool,
}

/// Minimum number of runs for a containment verdict.
pub const MIN_CONTAINMENT_RUNS: usize = 20;

pub fn check_containment_stats<'a>(
    runs: impl IntoIterator<Item = &'a [StepRecord]>,
    delta: f64,
) -> Result<ContainmentStats> {
    let mut n = 0usize;
    let mut bad = 0usize;
    for steps in runs {
        n += 1;
        if steps.iter().any(|s| !s.contained) {
            bad += 1;
        }
    }
    if n < MIN_CONTAINMENT_RUNS {
        return Err(Error::invalid(format!(
            "containment statistics need at least {MIN_CONTAINMENT_RUNS} runs, got {n}"
        )));
    }
    let frac = bad as f64 / n as f64;
    let threshold = delta + 2.0 * (delta * (1.0 - delta) / n as f64).sqrt();
    Ok(ContainmentStats {
        runs: n,
        runs_with_violation: bad,
        violation_fraction: frac,
        threshold,
        passed: frac <= threshold,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sublinearity {
    pub avg_regret_early: f64,
    pub avg_regret_late: f64,
    pub ratio: f64,
}

/// Minimum horizon for the early/late comparison.
pub const MIN_SUBLINEARITY_HORIZON: usize = 1000;

/// Average regret over the first tenth of the run divided by the average
/// over the whole run.
pub fn sublinearity_stat(steps: &[StepRecord]) -> Result<Sublinearity> {
    let regrets: Vec<f64> = steps.iter().map(|s| s.instant_regret).collect();
    sublinearity_of(&regrets)
}

pub fn sublinearity_of(instant_regrets: &[f64]) -> Result<Sublinearity> {
    let t = instant_regrets.len();
    if t < MIN_SUBLINEARITY_HORIZON {
        return Err(Error::invalid(format!(
            "sublinearity needs T >= {MIN_SUBLINEARITY_HORIZON}, got {t}"
        )));
    }
    let early_len = t / 10;
    let early: f64 = instant_regrets[..early_len].iter().sum();
    let total: f64 = instant_regrets.iter().sum();
    let avg_regret_early = early / early_len as f64;
    let avg_regret_late = total / t as f64;
    let ratio = if avg_regret_late > 0.0 {
        avg_regret_early / avg_regret_late
    } else if avg_regret_early > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    Ok(Sublinearity {
        avg_regret_early,
        avg_regret_late,
        ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ActionSet, GamSpec, NoiseModel, Shape};
    use crate::policy::run_linucb;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_arm_env(sigma: f64) -> BanditEnvironment {
        let pts = vec![DVector::from_vec(vec![1.0]), DVector::from_vec(vec![2.0])];
        let actions = ActionSet::from_points(pts, 2.0).unwrap();
        let spec = GamSpec::new(DVector::from_vec(vec![0.5]), 1.0, 0.0, actions).unwrap();
        BanditEnvironment::strict(spec, Shape::Anchor, NoiseModel::gaussian(sigma), 0).unwrap()
    }

    #[test]
    fn leverage_sum_without_data_is_zero() {
        let psd = PsdState::new(3, 0.7).unwrap();
        let l = leverage_sum(&psd, std::iter::empty());
        assert_eq!(l.lhs, 0.0);
        assert!(l.trace_identity.abs() < 1e-12);
    }

    #[test]
    fn leverage_sum_scalar_case() {
        for &(lambda, c) in &[(0.5, 2.0), (3.0, 0.1), (1.0, 1.0)] {
            let mut psd = PsdState::new(1, lambda).unwrap();
            let x = DVector::from_vec(vec![f64::sqrt(c)]);
            psd.rank1_update(&x).unwrap();
            let l = leverage_sum(&psd, [&x]);
            assert!((l.lhs - c / (lambda + c)).abs() < 1e-14);
        }
    }

    #[test]
    fn leverage_sum_matches_trace_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for d in [1usize, 2, 5] {
            let mut psd = PsdState::new(d, 0.3).unwrap();
            let xs: Vec<DVector<f64>> = (0..200)
                .map(|_| DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0)))
                .collect();
            for x in &xs {
                psd.rank1_update(x).unwrap();
            }
            let l = leverage_sum(&psd, &xs);
            assert!(l.passed);
            assert!((l.lhs - l.trace_identity).abs() < 1e-8 * d as f64);
        }
    }

    #[test]
    fn elliptical_potential_empty_run() {
        let e = elliptical_potential(&[], 2, 1.0, 1.0);
        assert_eq!(e.lhs, 0.0);
        assert_eq!(e.rhs, 0.0);
        assert!(e.passed);
    }

    #[test]
    fn elliptical_potential_single_step_depends_on_lambda() {
        // one full-norm step: u² = C_b²/λ against 2 log(1 + C_b²/λ)
        for lambda in [1.0, 2.0, 10.0, 100.0] {
            let e = elliptical_potential(&[1.0 / lambda], 1, 1.0, lambda);
            assert!(e.passed, "lambda {lambda}");
        }
        let e = elliptical_potential(&[4.0], 1, 1.0, 0.25);
        assert!(!e.passed);
        assert!((e.rhs - 2.0 * 5f64.ln()).abs() < 1e-15);
        assert_eq!(e.max_u_sq, 4.0);
    }

    #[test]
    fn determinant_identity_on_a_run() {
        let env = two_arm_env(0.3);
        let s = BetaSchedule::theorem1(1, 0.3, 2.0, 1.0, 0.05).unwrap();
        let traj = run_linucb(&env, &s, 2500, 1).unwrap();
        let d = check_determinant_identity(&traj);
        assert!(d.passed, "{d:?}");
    }

    #[test]
    fn containment_needs_twenty_runs() {
        let runs: Vec<Vec<StepRecord>> = vec![Vec::new(); 19];
        assert!(check_containment_stats(runs.iter().map(|r| r.as_slice()), 0.05).is_err());
    }

    #[test]
    fn containment_threshold() {
        let env = two_arm_env(0.0);
        let s = BetaSchedule::theorem1(1, 1.0, 2.0, 1.0, 0.05).unwrap();
        let clean = run_linucb(&env, &s, 3, 0).unwrap().steps;
        let mut dirty = clean.clone();
        dirty[1].contained = false;
        let mut runs = vec![clean; 99];
        runs.push(dirty);
        let st = check_containment_stats(runs.iter().map(|r| r.as_slice()), 0.05).unwrap();
        assert_eq!(st.runs_with_violation, 1);
        assert!((st.threshold - (0.05 + 2.0 * (0.05f64 * 0.95 / 100.0).sqrt())).abs() < 1e-15);
        assert!((st.threshold - 0.0936).abs() < 1e-4);
        assert!(st.passed);
    }

    #[test]
    fn sublinearity_constant_and_sqrt() {
        assert!(sublinearity_of(&[0.0; 999]).is_err());
        let c = sublinearity_of(&[0.25; 5000]).unwrap();
        assert!((c.ratio - 1.0).abs() < 1e-12);
        let r: Vec<f64> = (1..=10_000)
            .map(|t| (t as f64).sqrt() - (t as f64 - 1.0).sqrt())
            .collect();
        let s = sublinearity_of(&r).unwrap();
        assert!((s.ratio - 10f64.sqrt()).abs() < 1e-9);
        assert_eq!(sublinearity_of(&[0.0; 1000]).unwrap().ratio, 1.0);
    }

    #[test]
    fn regret_bound_needs_two_rounds() {
        let env = two_arm_env(0.0);
        let s = BetaSchedule::theorem1(1, 1.0, 2.0, 1.0, 0.05).unwrap();
        assert!(regret_bound_value(1, &env, &s, 0.0).is_err());
        assert!(regret_bound_value(2, &env, &s, 1.0).is_err());
    }

    #[test]
    fn regret_bound_value_matches_reference() {
        // 40-digit evaluation of the strict bound at T = 100
        let env = two_arm_env(0.0);
        assert_eq!(env.f_range(), 0.5);
        let s = BetaSchedule::theorem1(1, 1.0, 2.0, 1.0, 0.05).unwrap();
        assert!((s.beta_at(99).unwrap() - 269.900_601_555_159_3).abs() < 1e-10);
        let b = regret_bound_value(100, &env, &s, 0.0).unwrap();
        assert!((b - 1_132.435_000_600_009_6).abs() < 1e-9);
    }

    #[test]
    fn regret_bound_rejects_mismatched_kind() {
        let env = two_arm_env(0.0);
        let s = BetaSchedule::theorem2(1, 1.0, 2.0, 1.0, 0.5, 0.05).unwrap();
        assert!(regret_bound_value(10, &env, &s, 0.0).is_err());
    }

    #[test]
    fn lemma_checks_on_noiseless_anchor() {
        let env = two_arm_env(0.0);
        let s = BetaSchedule::theorem1(1, 1.0, 2.0, 1.0, 0.05).unwrap();
        let traj = run_linucb(&env, &s, 50, 0).unwrap();
        assert!(check_deviation(&traj.steps, 0.0).passed);
        assert!(check_gap_lemma(&traj.steps).passed);
        assert!(check_instant_regret(&traj.steps, 0.0).passed);
        assert!(check_optimism(&traj.steps, traj.theta_star_value).passed);
        assert!(check_leverage_sum(&traj).passed);
    }
}
