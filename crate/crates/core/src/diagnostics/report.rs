use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use super::checks::{
    check_determinant_identity, check_deviation, check_elliptical_potential, check_gap_lemma,
    check_instant_regret, check_leverage_sum, check_optimism, check_regret_bound, LemmaCheck,
    LOGDET_TOL,
};
use super::trace::Trajectory;
use crate::error::{Error, Result};
use crate::model::BanditEnvironment;
use crate::policy::BetaSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CheckName {
    Deviation,
    GapLemma,
    InstantRegret,
    Optimism,
    EllipticalPotential,
    LeverageSum,
    Determinant,
    RegretBound,
}

impl CheckName {
    pub const ALL: [CheckName; 8] = [
        CheckName::Deviation,
        CheckName::GapLemma,
        CheckName::InstantRegret,
        CheckName::Optimism,
        CheckName::EllipticalPotential,
        CheckName::LeverageSum,
        CheckName::Determinant,
        CheckName::RegretBound,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CheckName::Deviation => "deviation",
            CheckName::GapLemma => "gap",
            CheckName::InstantRegret => "instant_regret",
            CheckName::Optimism => "optimism",
            CheckName::EllipticalPotential => "elliptical_potential",
            CheckName::LeverageSum => "leverage_sum",
            CheckName::Determinant => "determinant",
            CheckName::RegretBound => "regret_bound",
        }
    }

    /// Algebraic checks that must hold on every trajectory.
    pub fn is_deterministic(self) -> bool {
        self != CheckName::RegretBound
    }
}

impl fmt::Display for CheckName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CheckName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        CheckName::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown check '{s}'")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryReport {
    pub cumulative_regret: f64,
    pub theorem_bound: Option<f64>,
    pub bound_satisfied: Option<bool>,
    pub containment_violations: usize,
    pub lemma_checks: BTreeMap<CheckName, LemmaCheck>,
}

impl TrajectoryReport {
    /// Deterministic checks that failed.
    pub fn deterministic_failures(&self) -> Vec<CheckName> {
        self.lemma_checks
            .iter()
            .filter(|(name, c)| name.is_deterministic() && !c.passed)
            .map(|(name, _)| *name)
            .collect()
    }

    /// Flat `key = value` block.
    pub fn to_kv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "cumulative_regret = {}", self.cumulative_regret);
        match self.theorem_bound {
            Some(b) => {
                let _ = writeln!(out, "theorem_bound = {b}");
            }
            None => out.push_str("theorem_bound = n/a\n"),
        }
        match self.bound_satisfied {
            Some(b) => {
                let _ = writeln!(out, "bound_satisfied = {b}");
            }
            None => out.push_str("bound_satisfied = n/a\n"),
        }
        let _ = writeln!(
            out,
            "containment_violations = {}",
            self.containment_violations
        );
        for (name, c) in &self.lemma_checks {
            let _ = writeln!(out, "check.{name}.passed = {}", c.passed);
            let _ = writeln!(out, "check.{name}.slack = {}", c.slack);
        }
        out
    }
}

/// Runs the requested checks on one trajectory.
///
/// Optimism-based checks are skipped for policies that do not select by the
/// ellipsoid upper bound. `regret_bound` needs `T >= 2` and a schedule that
/// matches the environment kind; otherwise it is left out.
pub fn evaluate(
    traj: &Trajectory,
    env: &BanditEnvironment,
    schedule: &BetaSchedule,
    checks: &[CheckName],
) -> TrajectoryReport {
    let rho = env.certify_own().worst_ratio;
    let steps = &traj.steps;
    let mut lemma_checks = BTreeMap::new();
    let mut theorem_bound = None;
    let mut bound_satisfied = None;

    for &name in checks {
        let result = match name {
            CheckName::Deviation => Some(check_deviation(steps, rho)),
            CheckName::GapLemma if traj.optimistic => Some(check_gap_lemma(steps)),
            CheckName::InstantRegret if traj.optimistic => Some(check_instant_regret(steps, rho)),
            CheckName::Optimism if traj.optimistic => {
                Some(check_optimism(steps, traj.theta_star_value))
            }
            CheckName::GapLemma | CheckName::InstantRegret | CheckName::Optimism => None,
            CheckName::EllipticalPotential => {
                let e = check_elliptical_potential(traj);
                Some(LemmaCheck {
                    passed: e.passed,
                    slack: e.rhs - e.lhs,
                })
            }
            CheckName::LeverageSum => {
                let l = check_leverage_sum(traj);
                Some(LemmaCheck {
                    passed: l.passed,
                    slack: traj.dim() as f64 - l.lhs,
                })
            }
            CheckName::Determinant => {
                let d = check_determinant_identity(traj);
                let err = (d.accumulated - d.dense)
                    .abs()
                    .max((d.from_trace - d.dense).abs());
                Some(LemmaCheck {
                    passed: d.passed,
                    slack: LOGDET_TOL * d.dense.abs().max(1.0) - err,
                })
            }
            CheckName::RegretBound => match check_regret_bound(steps, env, schedule) {
                Ok(b) => {
                    theorem_bound = Some(b.bound);
                    bound_satisfied = Some(b.satisfied);
                    Some(LemmaCheck {
                        passed: b.satisfied,
                        slack: b.bound - b.regret,
                    })
                }
                Err(e) => {
                    log::debug!("regret bound skipped: {e}");
                    None
                }
            },
        };
        if let Some(c) = result {
            lemma_checks.insert(name, c);
        }
    }

    TrajectoryReport {
        cumulative_regret: traj.cumulative_regret(),
        theorem_bound,
        bound_satisfied,
        containment_violations: traj.containment_violations(),
        lemma_checks,
    }
}
