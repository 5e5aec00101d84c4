use nalgebra::DVector;

use crate::policy::ConfidenceBall;

/// One round of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: u64,
    pub action_index: usize,
    pub y: f64,
    pub f0: f64,
    /// `r_t = f* - f₀(x_t)`.
    pub instant_regret: f64,
    /// `u_t² = ‖x_t‖²_{Σ_t⁻¹}` against the design matrix before the update.
    pub u_sq: f64,
    /// Radius in force when `x_t` was chosen.
    pub beta: f64,
    /// `Δ_t = f₀(x_t) - w*ᵀx_t - c*`.
    pub delta: f64,
    /// `‖θ* - ŵ_t‖²_{Σ_t} <= β_t`.
    pub contained: bool,
    pub ucb_value: f64,
    /// `w*ᵀ(x* - x_t)`.
    pub anchor_gap: f64,
    pub w_hat_snapshot: Option<Vec<f64>>,
}

/// A completed run: per-round records plus the final learner state.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub policy: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub final_ball: ConfidenceBall,
    /// Feature vector of every action, as seen by the learner.
    pub features: Vec<DVector<f64>>,
    /// True parameter in feature space: `w*`, or `(w*, c*)` when homogenized.
    pub theta_star: DVector<f64>,
    /// `θ*ᵀx*` in feature space.
    pub theta_star_value: f64,
    /// Norm bound on the feature vectors.
    pub feature_bound: f64,
    pub lambda: f64,
    pub optimistic: bool,
    pub homogenized: bool,
}

impl Trajectory {
    pub fn horizon(&self) -> u64 {
        self.steps.len() as u64
    }

    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    /// `R_T`, summed in round order.
    pub fn cumulative_regret(&self) -> f64 {
        self.steps.iter().map(|s| s.instant_regret).sum()
    }

    pub fn containment_violations(&self) -> usize {
        self.steps.iter().filter(|s| !s.contained).count()
    }
}
