use nalgebra::DVector;

use crate::error::Result;
use crate::linalg::{quad_form, PsdState};

/// Ridge estimate `ŵ = Σ⁻¹ Σ yᵢxᵢ`, its design matrix, and the radius `β`
/// of the ellipsoid `{w : ‖w - ŵ‖²_Σ <= β}`.
/// Relative slack of the ellipsoid membership test.
pub const CONTAIN_REL_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfidenceBall {
    w_hat: DVector<f64>,
    psd: PsdState,
    beta: f64,
    sum_xy: DVector<f64>,
}

/// Outcome of one selection step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Selection {
    pub index: usize,
    pub ucb_value: f64,
    /// `‖x‖²_{Σ⁻¹}` of the selected action.
    pub u_sq: f64,
}

impl ConfidenceBall {
    pub fn new(dim: usize, lambda: f64, beta: f64) -> Result<Self> {
        Ok(Self {
            w_hat: DVector::zeros(dim),
            psd: PsdState::new(dim, lambda)?,
            beta,
            sum_xy: DVector::zeros(dim),
        })
    }

    pub fn w_hat(&self) -> &DVector<f64> {
        &self.w_hat
    }

    pub fn psd(&self) -> &PsdState {
        &self.psd
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn sum_xy(&self) -> &DVector<f64> {
        &self.sum_xy
    }

    pub fn dim(&self) -> usize {
        self.w_hat.len()
    }

    /// `ŵᵀx + √β ‖x‖_{Σ⁻¹}`, the maximum of `wᵀx` over the ellipsoid.
    pub fn ucb(&self, x: &DVector<f64>) -> (f64, f64) {
        let u_sq = quad_form(self.psd.sigma_inv(), x.as_slice()).max(0.0);
        (self.w_hat.dot(x) + self.beta.sqrt() * u_sq.sqrt(), u_sq)
    }

    /// Optimistic choice over `actions`; ties go to the lowest index.
    pub fn ucb_select(&self, actions: &[DVector<f64>]) -> Selection {
        let mut best = Selection {
            index: 0,
            ucb_value: f64::NEG_INFINITY,
            u_sq: 0.0,
        };
        for (i, x) in actions.iter().enumerate() {
            let (value, u_sq) = self.ucb(x);
            if value > best.ucb_value {
                best = Selection {
                    index: i,
                    ucb_value: value,
                    u_sq,
                };
            }
        }
        best
    }

    /// `‖θ - ŵ‖²_Σ`.
    pub fn distance_sq(&self, theta: &DVector<f64>) -> f64 {
        self.psd.mahalanobis_sq(&(theta - &self.w_hat))
    }

    /// Membership in the closed ellipsoid, with a relative slack of
    /// [`CONTAIN_REL_TOL`] so boundary points survive rounding.
    pub fn contains(&self, theta: &DVector<f64>) -> bool {
        self.distance_sq(theta) <= self.beta * (1.0 + CONTAIN_REL_TOL)
    }

    /// Absorbs `(x, y)` and moves the radius to `next_beta`. Returns `u²` of
    /// `x` against the design matrix before the update.
    pub fn update(&mut self, x: &DVector<f64>, y: f64, next_beta: f64) -> Result<f64> {
        let u_sq = self.psd.rank1_update(x)?;
        self.sum_xy.axpy(y, x, 1.0);
        self.w_hat = self.psd.sigma_inv() * &self.sum_xy;
        self.beta = next_beta;
        Ok(u_sq)
    }
}
