//! The bandit interaction loop shared by every policy.

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ball::ConfidenceBall;
use super::schedule::{BetaSchedule, ScheduleKind};
use super::strategies::{LinUcb, LinUcbW, Policy};
use crate::diagnostics::{StepRecord, Trajectory};
use crate::error::{Error, Result};
use crate::model::{rho_threshold, BanditEnvironment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub horizon: u64,
    pub seed: u64,
    /// Ridge parameter `λ`.
    pub lambda: f64,
    /// Round-0 radius. `λB²` makes `{‖θ - 0‖²_{λI} <= λB²}` the norm ball of radius `B`.
    pub ball0_radius_sq: f64,
    /// Record `ŵ` every this many rounds.
    pub snapshot_every: Option<u64>,
}

impl RunOptions {
    /// `λ = σ²/C_w²` from the schedule; the round-0 ball is the parameter
    /// norm ball, of radius `C_w`, or `√(C_w² + F²)` on homogenized features.
    pub fn derive(
        env: &BanditEnvironment,
        schedule: &BetaSchedule,
        horizon: u64,
        seed: u64,
        homogenized: bool,
    ) -> Self {
        let lambda = schedule.lambda();
        let c_w = env.spec().c_w();
        let bound_sq = if homogenized {
            c_w * c_w + env.f_range() * env.f_range()
        } else {
            c_w * c_w
        };
        Self {
            horizon,
            seed,
            lambda,
            ball0_radius_sq: lambda * bound_sq,
            snapshot_every: None,
        }
    }
}

/// Feature vectors the learner sees, and the true parameter in that space.
fn features_for(
    env: &BanditEnvironment,
    homogenize: bool,
) -> (Vec<DVector<f64>>, DVector<f64>, f64) {
    let spec = env.spec();
    if homogenize {
        let feats = spec
            .actions()
            .points()
            .iter()
            .map(|x| x.clone().insert_row(x.len(), 1.0))
            .collect();
        let theta = spec.w_star().clone().insert_row(spec.dim(), env.offset_c());
        let c_b = spec.c_b();
        (feats, theta, (c_b * c_b + 1.0).sqrt())
    } else {
        (
            spec.actions().points().to_vec(),
            spec.w_star().clone(),
            spec.c_b(),
        )
    }
}

pub fn run_policy(
    env: &BanditEnvironment,
    policy: &mut dyn Policy,
    schedule: &BetaSchedule,
    opts: &RunOptions,
) -> Result<Trajectory> {
    if opts.horizon < 1 {
        return Err(Error::invalid("horizon must be at least 1"));
    }
    if !(opts.ball0_radius_sq > 0.0) {
        return Err(Error::invalid("round-0 radius must be positive"));
    }
    if schedule.kind() == ScheduleKind::KnownRho {
        let p = schedule.params();
        let limit = rho_threshold(p.dim, opts.horizon, p.sigma, p.c_b, p.c_w)?;
        if p.rho >= limit {
            log::warn!(
                "known rho {} is not below the low-misspecification threshold {limit:.6}; the radius guarantee lapses",
                p.rho
            );
        }
    }

    let homogenized = policy.homogenizes();
    let (features, theta_star, feature_bound) = features_for(env, homogenized);
    let x_star = env.x_star_index();
    let theta_star_value = theta_star.dot(&features[x_star]);

    let mut noise_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut policy_rng = ChaCha8Rng::seed_from_u64(opts.seed);
    policy_rng.set_stream(1);

    let mut ball = ConfidenceBall::new(theta_star.len(), opts.lambda, opts.ball0_radius_sq)?;
    let mut steps = Vec::with_capacity(opts.horizon as usize);
    for t in 0..opts.horizon {
        let contained = ball.contains(&theta_star);
        let sel = policy.select(&ball, &features, &mut policy_rng);
        let obs = env.query(sel.index, &mut noise_rng)?;
        let snapshot = opts
            .snapshot_every
            .filter(|&k| k > 0 && t % k == 0)
            .map(|_| ball.w_hat().iter().copied().collect());
        steps.push(StepRecord {
            t,
            action_index: sel.index,
            y: obs.y,
            f0: obs.f0,
            instant_regret: obs.instant_regret,
            u_sq: sel.u_sq,
            beta: ball.beta(),
            delta: obs.delta,
            contained,
            ucb_value: sel.ucb_value,
            anchor_gap: env.anchor_gap(sel.index),
            w_hat_snapshot: snapshot,
        });
        ball.update(&features[sel.index], obs.y, schedule.beta_at(t + 1)?)?;
    }

    Ok(Trajectory {
        policy: policy.name().to_string(),
        seed: opts.seed,
        steps,
        final_ball: ball,
        features,
        theta_star,
        theta_star_value,
        feature_bound,
        lambda: opts.lambda,
        optimistic: policy.optimistic(),
        homogenized,
    })
}

/// LinUCB with `λ = σ²/C_w²` and the norm-ball start.
pub fn run_linucb(
    env: &BanditEnvironment,
    schedule: &BetaSchedule,
    horizon: u64,
    seed: u64,
) -> Result<Trajectory> {
    let opts = RunOptions::derive(env, schedule, horizon, seed, false);
    run_policy(env, &mut LinUcb, schedule, &opts)
}

/// LinUCB on `(x, 1)` features with the homogenized schedule.
pub fn run_linucbw(
    env: &BanditEnvironment,
    schedule: &BetaSchedule,
    horizon: u64,
    seed: u64,
) -> Result<Trajectory> {
    if schedule.kind() != ScheduleKind::Theorem2 {
        return Err(Error::invalid(format!(
            "the homogenized learner needs the theorem2 schedule, got {}",
            schedule.kind()
        )));
    }
    let opts = RunOptions::derive(env, schedule, horizon, seed, true);
    run_policy(env, &mut LinUcbW, schedule, &opts)
}
