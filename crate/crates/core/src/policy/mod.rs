//! Optimistic learners over the confidence ellipsoid, plus baselines.

mod ball;
mod registry;
mod runner;
mod schedule;
mod strategies;

pub use ball::{ConfidenceBall, Selection, CONTAIN_REL_TOL};
pub use registry::{PolicyFactory, PolicyRegistry};
pub use runner::{run_linucb, run_linucbw, run_policy, RunOptions};
pub use schedule::{BetaSchedule, ScheduleKind, ScheduleParams};
pub use strategies::{Greedy, LinUcb, LinUcbW, Policy, UniformRandom};
