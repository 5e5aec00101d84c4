//! Confidence radius schedules `β_t`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScheduleKind {
    /// `8σ²(1 + d log(1 + t C_b² C_w² / (dσ²)) + 2 log(π² t² / (3δ)))`.
    Theorem1,
    /// The homogenized variant: `d + 1` leading factor and `C_w² + F²`.
    Theorem2,
    /// `2σ² ι_t` with `ι_t = 4 + 4(d log(1 + t C_b² / (dλ)) + 2 log(π² t² / (3δ)))`.
    KnownRho,
    Constant(f64),
}

impl fmt::Display for ScheduleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScheduleKind::Theorem1 => f.write_str("theorem1"),
            ScheduleKind::Theorem2 => f.write_str("theorem2"),
            ScheduleKind::KnownRho => f.write_str("known-rho"),
            ScheduleKind::Constant(v) => write!(f, "constant({v})"),
        }
    }
}

impl FromStr for ScheduleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "theorem1" => return Ok(ScheduleKind::Theorem1),
            "theorem2" => return Ok(ScheduleKind::Theorem2),
            "known-rho" => return Ok(ScheduleKind::KnownRho),
            _ => {}
        }
        if let Some(inner) = s
            .strip_prefix("constant(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let v: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad constant schedule value '{inner}'")))?;
            return Ok(ScheduleKind::Constant(v));
        }
        Err(Error::invalid(format!("unknown schedule '{s}'")))
    }
}

/// Problem constants a schedule is evaluated with. `dim` is the raw action
/// dimension `d`; the homogenized schedule adds one internally.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleParams {
    pub dim: usize,
    pub sigma: f64,
    pub c_b: f64,
    pub c_w: f64,
    pub delta: f64,
    /// `F`, used by the homogenized schedule only.
    pub f_bound: f64,
    /// Known misspecification level, used by the known-ρ schedule only.
    pub rho: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaSchedule {
    kind: ScheduleKind,
    params: ScheduleParams,
}

impl BetaSchedule {
    pub fn new(kind: ScheduleKind, params: ScheduleParams) -> Result<Self> {
        let p = &params;
        if p.dim == 0 {
            return Err(Error::invalid("schedule dimension must be >= 1"));
        }
        for (name, v) in [("sigma", p.sigma), ("C_b", p.c_b), ("C_w", p.c_w)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!(
                    "schedule {name} must be positive and finite"
                )));
            }
        }
        if !(p.delta > 0.0 && p.delta < 1.0) {
            return Err(Error::invalid("delta must lie in (0, 1)"));
        }
        match kind {
            ScheduleKind::Theorem2 if !(p.f_bound >= 0.0) || !p.f_bound.is_finite() => {
                return Err(Error::invalid("F must be finite and non-negative"));
            }
            ScheduleKind::KnownRho if !(0.0..1.0).contains(&p.rho) => {
                return Err(Error::invalid("known rho must satisfy 0 <= rho < 1"));
            }
            ScheduleKind::Constant(v) if !(v > 0.0) || !v.is_finite() => {
                return Err(Error::invalid("constant schedule value must be positive"));
            }
            _ => {}
        }
        Ok(Self { kind, params })
    }

    pub fn theorem1(dim: usize, sigma: f64, c_b: f64, c_w: f64, delta: f64) -> Result<Self> {
        Self::new(
            ScheduleKind::Theorem1,
            ScheduleParams {
                dim,
                sigma,
                c_b,
                c_w,
                delta,
                f_bound: 0.0,
                rho: 0.0,
            },
        )
    }

    pub fn theorem2(
        dim: usize,
        sigma: f64,
        c_b: f64,
        c_w: f64,
        f_bound: f64,
        delta: f64,
    ) -> Result<Self> {
        Self::new(
            ScheduleKind::Theorem2,
            ScheduleParams {
                dim,
                sigma,
                c_b,
                c_w,
                delta,
                f_bound,
                rho: 0.0,
            },
        )
    }

    pub fn known_rho(
        dim: usize,
        sigma: f64,
        c_b: f64,
        c_w: f64,
        delta: f64,
        rho: f64,
    ) -> Result<Self> {
        Self::new(
            ScheduleKind::KnownRho,
            ScheduleParams {
                dim,
                sigma,
                c_b,
                c_w,
                delta,
                f_bound: 0.0,
                rho,
            },
        )
    }

    pub fn kind(&self) -> ScheduleKind {
        self.kind
    }

    pub fn params(&self) -> &ScheduleParams {
        &self.params
    }

    /// Dimension entering the leading factor: `d`, or `d + 1` when homogenized.
    pub fn d_eff(&self) -> usize {
        match self.kind {
            ScheduleKind::Theorem2 => self.params.dim + 1,
            _ => self.params.dim,
        }
    }

    /// Ridge parameter `λ = σ² / C_w²`.
    pub fn lambda(&self) -> f64 {
        let p = &self.params;
        p.sigma * p.sigma / (p.c_w * p.c_w)
    }

    /// `β_t` for `t >= 1`.
    pub fn beta_at(&self, t: u64) -> Result<f64> {
        if t == 0 {
            return Err(Error::invalid("beta_t is defined for t >= 1 only"));
        }
        let p = &self.params;
        let tf = t as f64;
        let d = p.dim as f64;
        let s2 = p.sigma * p.sigma;
        let union = 2.0 * (PI * PI * tf * tf / (3.0 * p.delta)).ln();
        let beta = match self.kind {
            ScheduleKind::Theorem1 => {
                let growth = d * (tf * p.c_b * p.c_b * p.c_w * p.c_w / (d * s2)).ln_1p();
                8.0 * s2 * (1.0 + growth + union)
            }
            ScheduleKind::Theorem2 => {
                let scale = p.c_b * p.c_b * (p.c_w * p.c_w + p.f_bound * p.f_bound);
                let growth = (d + 1.0) * (tf * scale / (d * s2)).ln_1p();
                8.0 * s2 * (1.0 + growth + union)
            }
            ScheduleKind::KnownRho => 2.0 * s2 * self.iota(t),
            ScheduleKind::Constant(v) => v,
        };
        Ok(beta)
    }

    /// `ι_t` of the known-ρ recursion.
    pub fn iota(&self, t: u64) -> f64 {
        let p = &self.params;
        let tf = t as f64;
        let d = p.dim as f64;
        let growth = d * (tf * p.c_b * p.c_b / (d * self.lambda())).ln_1p();
        4.0 + 4.0 * (growth + 2.0 * (PI * PI * tf * tf / (3.0 * p.delta)).ln())
    }

    /// Per-round failure probability `δ_t = 3δ / (π² t²)`.
    pub fn failure_prob_at(&self, t: u64) -> f64 {
        let tf = t as f64;
        3.0 * self.params.delta / (PI * PI * tf * tf)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theorem1_at_t1() {
        let s = BetaSchedule::theorem1(1, 1.0, 1.0, 1.0, 0.05).unwrap();
        let expect = 8.0 * (1.0 + 2f64.ln() + 2.0 * (PI * PI / 0.15).ln());
        assert!((s.beta_at(1).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn additive_terms_evaluated_separately() {
        // d log(1 + t C_b² C_w² / (dσ²)) = d when the ratio is e - 1
        let sigma = 0.7;
        let d = 3usize;
        let c_b = ((std::f64::consts::E - 1.0) * d as f64).sqrt() * sigma;
        let s = BetaSchedule::theorem1(d, sigma, c_b, 1.0, 0.05).unwrap();
        let union = 2.0 * (PI * PI / 0.15).ln();
        let expect = 8.0 * sigma * sigma * (1.0 + d as f64 + union);
        assert!((s.beta_at(1).unwrap() - expect).abs() < 1e-11 * expect);

        // union term, re-derived from its factors
        for t in [1u64, 17, 4096, 1_000_000] {
            let tf = t as f64;
            let beta = s.beta_at(t).unwrap();
            let growth = d as f64 * (tf * c_b * c_b / (d as f64 * sigma * sigma)).ln_1p();
            let union = 2.0 * (2.0 * PI.ln() + 2.0 * tf.ln() - 3f64.ln() - 0.05f64.ln());
            let expect = 8.0 * sigma * sigma * (1.0 + growth + union);
            assert!((beta - expect).abs() < 1e-12 * expect);
        }
    }

    #[test]
    fn theorem2_uses_d_plus_one() {
        let s = BetaSchedule::theorem2(2, 0.5, 1.0, 1.0, 2.0, 0.05).unwrap();
        let t: f64 = 10.0;
        let expect = 8.0
            * 0.25
            * (1.0
                + 3.0 * (1.0 + t * 5.0 / (2.0 * 0.25)).ln()
                + 2.0 * (PI * PI * t * t / 0.15).ln());
        assert!((s.beta_at(10).unwrap() - expect).abs() < 1e-10);
        assert_eq!(s.d_eff(), 3);
    }

    #[test]
    fn known_rho_is_twice_sigma_sq_iota() {
        let s = BetaSchedule::known_rho(2, 0.5, 1.0, 1.0, 0.05, 0.01).unwrap();
        let lambda: f64 = 0.25;
        let t: f64 = 7.0;
        let iota = 4.0
            + 4.0 * (2.0 * (1.0 + t / (2.0 * lambda)).ln() + 2.0 * (PI * PI * t * t / 0.15).ln());
        assert!((s.beta_at(7).unwrap() - 2.0 * 0.25 * iota).abs() < 1e-10);
    }

    #[test]
    fn t_zero_is_an_error() {
        let s = BetaSchedule::theorem1(1, 1.0, 1.0, 1.0, 0.05).unwrap();
        assert!(s.beta_at(0).is_err());
    }

    #[test]
    fn monotone_and_positive_for_every_kind() {
        let kinds = [
            ScheduleKind::Theorem1,
            ScheduleKind::Theorem2,
            ScheduleKind::KnownRho,
            ScheduleKind::Constant(0.3),
        ];
        let params = ScheduleParams {
            dim: 3,
            sigma: 0.5,
            c_b: 1.0,
            c_w: 1.0,
            delta: 0.05,
            f_bound: 1.5,
            rho: 0.01,
        };
        for kind in kinds {
            let s = BetaSchedule::new(kind, params).unwrap();
            let mut prev = s.beta_at(1).unwrap();
            assert!(prev > 0.0);
            for t in 2..=1_000_000u64 {
                let b = s.beta_at(t).unwrap();
                assert!(b >= prev, "{kind} decreased at t={t}");
                prev = b;
            }
        }
    }

    #[test]
    fn failure_probabilities_sum_below_half_delta() {
        let s = BetaSchedule::theorem1(2, 1.0, 1.0, 1.0, 0.05).unwrap();
        let total: f64 = (1..=1_000_000u64).map(|t| s.failure_prob_at(t)).sum();
        assert!(total < 0.025);
        assert!(total > 0.0249);
    }

    #[test]
    fn parse_round_trip() {
        for k in ["theorem1", "theorem2", "known-rho", "constant(1e-6)"] {
            let kind: ScheduleKind = k.parse().unwrap();
            assert_eq!(kind.to_string().parse::<ScheduleKind>().unwrap(), kind);
        }
        assert!("theorem3".parse::<ScheduleKind>().is_err());
    }

    #[test]
    fn rejects_bad_params() {
        assert!(BetaSchedule::theorem1(2, 0.0, 1.0, 1.0, 0.05).is_err());
        assert!(BetaSchedule::theorem1(2, 1.0, 1.0, 1.0, 1.0).is_err());
        assert!(BetaSchedule::known_rho(2, 1.0, 1.0, 1.0, 0.05, 1.0).is_err());
    }
}
