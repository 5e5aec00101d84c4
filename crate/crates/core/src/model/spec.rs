use nalgebra::DVector;

use super::actions::ActionSet;
use crate::error::{Error, Result};

/// Linear anchor `f_w(x) = w*ᵀx` over a finite action set, together with
/// the misspecification level `ρ` its environments are built against.
#[derive(Debug, Clone, PartialEq)]
pub struct GamSpec {
    w_star: DVector<f64>,
    c_w: f64,
    rho: f64,
    actions: ActionSet,
    anchor_values: Vec<f64>,
    x_star_index: usize,
}

impl GamSpec {
    pub fn new(w_star: DVector<f64>, c_w: f64, rho: f64, actions: ActionSet) -> Result<Self> {
        check_rho(rho)?;
        if !(c_w > 0.0) || !c_w.is_finite() {
            return Err(Error::invalid("C_w must be positive and finite"));
        }
        if w_star.len() != actions.dim() {
            return Err(Error::invalid(format!(
                "w* has dimension {}, actions have dimension {}",
                w_star.len(),
                actions.dim()
            )));
        }
        if w_star.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("w* has non-finite entries"));
        }
        let norm = w_star.norm();
        if norm > c_w * (1.0 + 1e-12) {
            return Err(Error::invalid(format!("‖w*‖ = {norm} exceeds C_w = {c_w}")));
        }
        let anchor_values: Vec<f64> = actions.points().iter().map(|x| w_star.dot(x)).collect();
        let x_star_index = argmax_lowest(&anchor_values);
        Ok(Self {
            w_star,
            c_w,
            rho,
            actions,
            anchor_values,
            x_star_index,
        })
    }

    /// The one-dimensional example anchor `f_w(x) = 0.75x + 0.5` on a
    /// homogenized grid over `[-2, 2]`, maximized at `x = 2`.
    pub fn figure1(per_axis: usize, rho: f64) -> Result<Self> {
        let c_b = 5f64.sqrt();
        let actions = ActionSet::grid(1, per_axis, 2.0, c_b, true)?;
        let w_star = DVector::from_vec(vec![0.75, 0.5]);
        let c_w = w_star.norm();
        Self::new(w_star, c_w, rho, actions)
    }

    pub fn w_star(&self) -> &DVector<f64> {
        &self.w_star
    }

    pub fn c_w(&self) -> f64 {
        self.c_w
    }

    pub fn c_b(&self) -> f64 {
        self.actions.c_b()
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn actions(&self) -> &ActionSet {
        &self.actions
    }

    pub fn dim(&self) -> usize {
        self.actions.dim()
    }

    /// `w*ᵀx` at every action, in action order.
    pub fn anchor_values(&self) -> &[f64] {
        &self.anchor_values
    }

    pub fn x_star_index(&self) -> usize {
        self.x_star_index
    }

    /// `max_x w*ᵀx`.
    pub fn f_star(&self) -> f64 {
        self.anchor_values[self.x_star_index]
    }
}

/// Closed interval of admissible `f₀(x)` values at a point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub lo: f64,
    pub hi: f64,
}

impl Envelope {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && v <= self.hi
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn half_width(&self) -> f64 {
        0.5 * (self.hi - self.lo)
    }
}

/// Slack allowed on the precondition `f_w(x) <= f*`.
const ANCHOR_TOL: f64 = 1e-9;

/// Set of `f₀` values with `|f_w(x) - f₀| <= ρ (f* - f₀)` and `f₀ <= f*`.
pub fn gam_envelope(fw_x: f64, f_star: f64, rho: f64) -> Result<Envelope> {
    check_rho(rho)?;
    if !fw_x.is_finite() || !f_star.is_finite() {
        return Err(Error::invalid("envelope arguments must be finite"));
    }
    if fw_x > f_star + ANCHOR_TOL * f_star.abs().max(1.0) {
        return Err(Error::invalid(format!(
            "anchor value {fw_x} exceeds its own maximum {f_star}"
        )));
    }
    if fw_x >= f_star {
        // at a maximizer the definition pins f₀ to f*
        return Ok(Envelope {
            lo: f_star,
            hi: f_star,
        });
    }
    let lo = (fw_x - rho * f_star) / (1.0 - rho);
    let hi = ((fw_x + rho * f_star) / (1.0 + rho)).min(f_star);
    Ok(Envelope { lo: lo.min(hi), hi })
}

/// Largest `ρ` admitted by the low-misspecification condition
/// `ρ < 1 / (8d √log(1 + T C_b² C_w² / (d σ²)))`.
pub fn rho_threshold(d: usize, horizon: u64, noise_sigma: f64, c_b: f64, c_w: f64) -> Result<f64> {
    if d == 0 || horizon == 0 {
        return Err(Error::invalid("d and T must be positive"));
    }
    for (name, v) in [("sigma", noise_sigma), ("C_b", c_b), ("C_w", c_w)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::invalid(format!(
                "{name} must be positive and finite"
            )));
        }
    }
    let d_f = d as f64;
    let arg = horizon as f64 * c_b * c_b * c_w * c_w / (d_f * noise_sigma * noise_sigma);
    Ok(1.0 / (8.0 * d_f * arg.ln_1p().sqrt()))
}

pub(crate) fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..1.0).contains(&rho) {
        return Err(Error::invalid(format!(
            "rho must satisfy 0 <= rho < 1, got {rho}"
        )));
    }
    Ok(())
}

/// Index of the maximum, ties broken by lowest index.
pub(crate) fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn definition_holds(fw: f64, f_star: f64, rho: f64, f0: f64) -> bool {
        f0 <= f_star && (fw - f0).abs() <= rho * (f_star - f0)
    }

    #[test]
    fn pinned_at_maximizer() {
        let e = gam_envelope(2.0, 2.0, 0.7).unwrap();
        assert_eq!(e, Envelope { lo: 2.0, hi: 2.0 });
    }

    #[test]
    fn realizable_case_is_a_point() {
        let e = gam_envelope(1.25, 2.0, 0.0).unwrap();
        assert_eq!(e, Envelope { lo: 1.25, hi: 1.25 });
    }

    #[test]
    fn envelope_matches_grid_scan() {
        let e = gam_envelope(1.25, 2.0, 0.7).unwrap();
        assert!((e.lo - (-0.5)).abs() < 1e-12);
        assert!((e.hi - 2.65 / 1.7).abs() < 1e-12);

        // scan f₀ in [-5, 2] on a 1e-4 grid and keep the admissible ones
        let n = 70_000;
        let admissible: Vec<f64> = (0..=n)
            .map(|i| -5.0 + i as f64 * 1e-4)
            .filter(|&f0| definition_holds(1.25, 2.0, 0.7, f0))
            .collect();
        let scan_lo = admissible.first().copied().unwrap();
        let scan_hi = admissible.last().copied().unwrap();
        assert!((scan_lo - e.lo).abs() <= 1e-4);
        assert!((scan_hi - e.hi).abs() <= 1e-4);
    }

    #[test]
    fn envelope_rejects_bad_rho() {
        assert!(gam_envelope(0.0, 1.0, 1.0).is_err());
        assert!(gam_envelope(0.0, 1.0, 1.5).is_err());
        assert!(gam_envelope(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn threshold_when_log_term_is_one() {
        let e1 = std::f64::consts::E - 1.0;
        // T C_b² C_w² / (d σ²) = e - 1 with T = 1, d = 1, σ = 1, C_w = 1
        let t = rho_threshold(1, 1, 1.0, e1.sqrt(), 1.0).unwrap();
        assert!((t - 0.125).abs() < 1e-12);
    }

    #[test]
    fn threshold_at_a_trillion_rounds() {
        let t = rho_threshold(1, 1_000_000_000_000, 1.0, 1.0, 1.0).unwrap();
        let log_term = (1e12f64 + 1.0).ln();
        assert!((log_term - 27.631).abs() < 1e-3);
        assert!((1.0 / log_term.sqrt() - 0.19).abs() < 0.005);
        assert!((t - 1.0 / (8.0 * log_term.sqrt())).abs() < 1e-15);
        assert!((t - 0.0238).abs() < 1e-4);
    }

    #[test]
    fn doubling_d_shrinks_threshold() {
        // 1/(8·2d·√log(1 + X/2d)): the leading factor halves the bound, the
        // smaller log argument pushes it back up, so the drop is less than half
        for &(t, s) in &[(100u64, 1.0), (5000, 0.5), (1_000_000, 2.0)] {
            for d in [1usize, 2, 5] {
                let a = rho_threshold(d, t, s, 1.0, 1.0).unwrap();
                let b = rho_threshold(2 * d, t, s, 1.0, 1.0).unwrap();
                let x = t as f64 / (s * s);
                let expect_b = 1.0 / (16.0 * d as f64 * (x / (2.0 * d as f64)).ln_1p().sqrt());
                assert!((b - expect_b).abs() < 1e-15);
                assert!(b < a && b > a / 2.0);
            }
        }
    }

    #[test]
    fn figure1_anchor() {
        let spec = GamSpec::figure1(401, 0.7).unwrap();
        assert_eq!(spec.x_star_index(), 400);
        assert_eq!(spec.f_star(), 2.0);
        assert_eq!(spec.actions().points()[400][0], 2.0);
    }

    #[test]
    fn spec_validation() {
        let actions = ActionSet::grid(2, 3, 0.5, 1.0, false).unwrap();
        let w = DVector::from_vec(vec![0.6, 0.8]);
        assert!(GamSpec::new(w.clone(), 1.0, 1.0, actions.clone()).is_err());
        assert!(GamSpec::new(w.clone(), 0.5, 0.1, actions.clone()).is_err());
        assert!(GamSpec::new(DVector::zeros(3), 1.0, 0.1, actions.clone()).is_err());
        let s = GamSpec::new(w, 1.0, 0.1, actions).unwrap();
        assert_eq!(
            s.actions().points()[s.x_star_index()].as_slice(),
            &[0.5, 0.5]
        );
    }

    #[test]
    fn ties_break_to_lowest_index() {
        assert_eq!(argmax_lowest(&[1.0, 3.0, 3.0, 2.0]), 1);
    }
}
