use nalgebra::DVector;
use rand::{Rng, RngCore};

use super::ball::{ConfidenceBall, Selection};

/// An action-selection rule driven by the shared ridge/ellipsoid state.
///
/// The run loop owns the `ConfidenceBall` and feeds every observation into
/// it; a policy only decides which action to play next.
pub trait Policy: Send {
    fn name(&self) -> &'static str;

    /// Whether the policy plays on `(x, 1)` features.
    fn homogenizes(&self) -> bool {
        false
    }

    /// Whether the choice maximizes the ellipsoid upper bound, so that the
    /// optimism-based lemmas apply to its trajectories.
    fn optimistic(&self) -> bool {
        false
    }

    fn select(
        &mut self,
        ball: &ConfidenceBall,
        actions: &[DVector<f64>],
        rng: &mut dyn RngCore,
    ) -> Selection;
}

/// Optimism over the confidence ellipsoid.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinUcb;

impl Policy for LinUcb {
    fn name(&self) -> &'static str {
        "linucb"
    }

    fn optimistic(&self) -> bool {
        true
    }

    fn select(
        &mut self,
        ball: &ConfidenceBall,
        actions: &[DVector<f64>],
        _: &mut dyn RngCore,
    ) -> Selection {
        ball.ucb_select(actions)
    }
}

/// LinUCB over homogenized features, learning a free offset alongside `w`.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinUcbW;

impl Policy for LinUcbW {
    fn name(&self) -> &'static str {
        "linucbw"
    }

    fn homogenizes(&self) -> bool {
        true
    }

    fn optimistic(&self) -> bool {
        true
    }

    fn select(
        &mut self,
        ball: &ConfidenceBall,
        actions: &[DVector<f64>],
        _: &mut dyn RngCore,
    ) -> Selection {
        ball.ucb_select(actions)
    }
}

/// Plays `argmax ŵᵀx`, ignoring the radius.
#[derive(Debug, Default, Clone, Copy)]
pub struct Greedy;

impl Policy for Greedy {
    fn name(&self) -> &'static str {
        "greedy"
    }

    fn select(
        &mut self,
        ball: &ConfidenceBall,
        actions: &[DVector<f64>],
        _: &mut dyn RngCore,
    ) -> Selection {
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for (i, x) in actions.iter().enumerate() {
            let v = ball.w_hat().dot(x);
            if v > best_val {
                best = i;
                best_val = v;
            }
        }
        Selection {
            index: best,
            ucb_value: best_val,
            u_sq: ball.psd().mahalanobis_inv_sq(&actions[best]),
        }
    }
}

/// Uniformly random action.
#[derive(Debug, Default, Clone, Copy)]
pub struct UniformRandom;

impl Policy for UniformRandom {
    fn name(&self) -> &'static str {
        "random"
    }

    fn select(
        &mut self,
        ball: &ConfidenceBall,
        actions: &[DVector<f64>],
        rng: &mut dyn RngCore,
    ) -> Selection {
        let index = rng.random_range(0..actions.len());
        let (ucb_value, u_sq) = ball.ucb(&actions[index]);
        Selection {
            index,
            ucb_value,
            u_sq,
        }
    }
}
