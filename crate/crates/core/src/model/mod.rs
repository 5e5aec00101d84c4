//! Environments under gap-adjusted misspecification.

mod actions;
mod env;
mod envfile;
mod spec;

pub use actions::{ActionKind, ActionSet, MAX_ACTIONS};
pub use env::{
    random_anchor, BanditEnvironment, CertMode, Certification, EnvKind, NoiseKind, NoiseModel,
    Observation, Shape, CERT_TOL,
};
pub use envfile::{env_from_str, env_to_string, read_env, write_env};
pub use spec::{gam_envelope, rho_threshold, Envelope, GamSpec};
