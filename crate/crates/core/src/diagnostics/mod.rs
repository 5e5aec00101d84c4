//! Trajectory records and checks of the regret analysis.

mod checks;
mod report;
mod trace;

pub use checks::{
    check_containment_stats, check_determinant_identity, check_deviation,
    check_elliptical_potential, check_gap_lemma, check_instant_regret, check_leverage_sum,
    check_optimism, check_regret_bound, elliptical_potential, leverage_sum, regret_bound_value,
    sublinearity_of, sublinearity_stat, ContainmentStats, DeterminantIdentity, EllipticalPotential,
    LemmaCheck, LeverageSum, RegretBound, Sublinearity, INEQ_SLACK, LOGDET_TOL,
    MIN_CONTAINMENT_RUNS, MIN_SUBLINEARITY_HORIZON,
};
pub use report::{evaluate, CheckName, TrajectoryReport};
pub use trace::{StepRecord, Trajectory};
