//! Flat `key = value` experiment configuration.
//!
//! ```text
//! d = 2
//! horizon = 5000
//! seeds = 0..100
//! env.kind = strict
//! env.rho = 0.1
//! env.noise_sigma = 0.5
//! policy.kind = linucb
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::path::PathBuf;
use std::str::FromStr;

use crate::diagnostics::CheckName;
use crate::error::{Error, Result};
use crate::model::{EnvKind, Shape};
use crate::policy::{PolicyRegistry, ScheduleKind};

/// Default `δ`.
pub const DEFAULT_DELTA: f64 = 0.05;

const KEYS: &[&str] = &[
    "d",
    "horizon",
    "seeds",
    "delta",
    "output_dir",
    "checks",
    "env.kind",
    "env.rho",
    "env.construction_rho",
    "env.shape",
    "env.offset",
    "env.noise_sigma",
    "env.action_set",
    "env.w_star",
    "policy.kind",
    "policy.schedule",
    "policy.sigma",
    "bounds.c_b",
    "bounds.c_w",
];

/// How the finite action set is generated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionSetSpec {
    /// `n` points per axis on `[-C_b/√d, C_b/√d]^d`.
    Grid(usize),
    /// `n` points on the sphere of radius `C_b`, drawn per seed.
    Sphere(usize),
    /// The fixed one-dimensional example on `[-2, 2]`, homogenized,
    /// with `n` grid points. Overrides `w*`, `C_b` and `C_w`.
    Fig1(usize),
}

impl ActionSetSpec {
    pub fn default_for(d: usize) -> Self {
        match d {
            1 => ActionSetSpec::Grid(401),
            2 => ActionSetSpec::Grid(64),
            _ => ActionSetSpec::Sphere(1000),
        }
    }
}

impl fmt::Display for ActionSetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ActionSetSpec::Grid(n) => write!(f, "grid({n})"),
            ActionSetSpec::Sphere(n) => write!(f, "sphere({n})"),
            ActionSetSpec::Fig1(n) => write!(f, "fig1({n})"),
        }
    }
}

impl FromStr for ActionSetSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (name, rest) = s
            .split_once('(')
            .ok_or_else(|| Error::invalid(format!("unknown action set '{s}'")))?;
        let n: usize = rest
            .strip_suffix(')')
            .and_then(|v| v.trim().parse().ok())
            .filter(|&n| n > 0)
            .ok_or_else(|| Error::invalid(format!("bad action count in '{s}'")))?;
        match name.trim() {
            "grid" => Ok(ActionSetSpec::Grid(n)),
            "sphere" => Ok(ActionSetSpec::Sphere(n)),
            "fig1" => Ok(ActionSetSpec::Fig1(n)),
            other => Err(Error::invalid(format!("unknown action set '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvConfig {
    pub kind: EnvKind,
    /// Declared `ρ`; certification must not exceed it.
    pub rho: f64,
    /// `ρ` the environment is actually built with, when it differs from
    /// the declared one.
    pub construction_rho: Option<f64>,
    pub shape: Shape,
    /// `c*` for weak environments.
    pub offset: f64,
    pub noise_sigma: f64,
    pub action_set: ActionSetSpec,
    /// Fixed `w*`; drawn per seed with norm `C_w` when absent.
    pub w_star: Option<Vec<f64>>,
}

impl EnvConfig {
    pub fn build_rho(&self) -> f64 {
        self.construction_rho.unwrap_or(self.rho)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyConfig {
    pub kind: String,
    pub schedule: ScheduleKind,
    /// Noise level the learner assumes; `λ` and `β_t` are derived from it.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub c_b: f64,
    pub c_w: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub d: usize,
    pub horizon: u64,
    pub seeds: Vec<u64>,
    pub env: EnvConfig,
    pub policy: PolicyConfig,
    pub bounds: Bounds,
    pub delta: f64,
    pub output_dir: PathBuf,
    pub checks: Vec<CheckName>,
}

impl ExperimentConfig {
    /// `λ = σ²/C_w²`.
    pub fn lambda(&self) -> f64 {
        let s = self.policy.sigma;
        s * s / (self.bounds.c_w * self.bounds.c_w)
    }

    /// Serializes every field, defaults included.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: &dyn fmt::Display| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("d", &self.d);
        kv("horizon", &self.horizon);
        kv("seeds", &join(&self.seeds));
        kv("delta", &self.delta);
        kv("output_dir", &self.output_dir.display());
        kv("checks", &join(&self.checks));
        kv("env.kind", &self.env.kind);
        kv("env.rho", &self.env.rho);
        if let Some(r) = self.env.construction_rho {
            kv("env.construction_rho", &r);
        }
        kv("env.shape", &self.env.shape);
        kv("env.offset", &self.env.offset);
        kv("env.noise_sigma", &self.env.noise_sigma);
        kv("env.action_set", &self.env.action_set);
        match &self.env.w_star {
            Some(w) => kv("env.w_star", &join(w)),
            None => kv("env.w_star", &"random"),
        }
        kv("policy.kind", &self.policy.kind);
        kv("policy.schedule", &self.policy.schedule);
        kv("policy.sigma", &self.policy.sigma);
        kv("bounds.c_b", &self.bounds.c_b);
        kv("bounds.c_w", &self.bounds.c_w);
        out
    }
}

fn join<T: fmt::Display>(items: &[T]) -> String {
    items
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Parses `a, b, c` or the half-open range `a..b`.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let s = s.trim();
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad seed range '{s}'")))?;
        let b: u64 = b
            .trim()
            .parse()
            .map_err(|_| Error::invalid(format!("bad seed range '{s}'")))?;
        (a..b).collect()
    } else {
        s.split(',')
            .map(|v| {
                v.trim()
                    .parse()
                    .map_err(|_| Error::invalid(format!("bad seed '{}'", v.trim())))
            })
            .collect::<Result<_>>()?
    };
    if seeds.is_empty() {
        return Err(Error::invalid("seeds must be non-empty"));
    }
    let mut sorted = seeds.clone();
    sorted.sort_unstable();
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::invalid("seeds must be distinct"));
    }
    Ok(seeds)
}

struct Entries {
    map: BTreeMap<String, (usize, String)>,
    last_line: usize,
}

impl Entries {
    fn parse(text: &str) -> Result<Self> {
        let mut map = BTreeMap::new();
        let mut last_line = 0;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            last_line = line;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Config {
                line,
                message: format!("expected 'key = value', got '{content}'"),
            })?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(Error::Config {
                    line,
                    message: format!("unknown key '{key}'"),
                });
            }
            if map
                .insert(key.to_string(), (line, value.trim().to_string()))
                .is_some()
            {
                return Err(Error::Config {
                    line,
                    message: format!("duplicate key '{key}'"),
                });
            }
        }
        Ok(Self { map, last_line })
    }

    fn line_of(&self, key: &str) -> usize {
        self.map.get(key).map_or(self.last_line, |(l, _)| *l)
    }

    fn fail(&self, key: &str, message: impl Into<String>) -> Error {
        Error::Config {
            line: self.line_of(key),
            message: message.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<(usize, &str)> {
        self.map.get(key).map(|(l, v)| (*l, v.as_str()))
    }

    fn get<T: FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => v.parse().map(Some).map_err(|_| Error::Config {
                line,
                message: format!("{key}: expected {what}, got '{v}'"),
            }),
        }
    }

    fn require<T: FromStr>(&self, key: &str, what: &str) -> Result<T> {
        self.get(key, what)?.ok_or_else(|| Error::Config {
            line: self.last_line,
            message: format!("missing required key '{key}'"),
        })
    }

    fn with<T>(&self, key: &str, f: impl FnOnce(&str) -> Result<T>) -> Result<Option<T>> {
        match self.raw(key) {
            None => Ok(None),
            Some((line, v)) => f(v).map(Some).map_err(|e| Error::Config {
                line,
                message: format!("{key}: {}", strip_prefix(e)),
            }),
        }
    }
}

fn strip_prefix(e: Error) -> String {
    match e {
        Error::InvalidArgument(m) => m,
        other => other.to_string(),
    }
}

fn parse_reals(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .ok()
                .filter(|x| x.is_finite())
                .ok_or_else(|| Error::invalid(format!("bad real '{}'", v.trim())))
        })
        .collect()
}

/// Parses and validates a configuration, filling in defaults. Policy names
/// are checked against the built-in registry.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    parse_config_with(text, &PolicyRegistry::with_builtins())
}

pub fn parse_config_with(text: &str, registry: &PolicyRegistry) -> Result<ExperimentConfig> {
    let e = Entries::parse(text)?;

    let d: usize = e.require("d", "a positive integer")?;
    if d == 0 {
        return Err(e.fail("d", "d must be >= 1"));
    }
    let horizon: u64 = e.require("horizon", "a positive integer")?;
    if horizon == 0 {
        return Err(e.fail("horizon", "horizon must be >= 1"));
    }
    let seeds = e
        .with("seeds", parse_seeds)?
        .ok_or_else(|| e.fail("seeds", "missing required key 'seeds'"))?;
    let delta = e.get("delta", "a real")?.unwrap_or(DEFAULT_DELTA);
    if !(delta > 0.0 && delta < 1.0) {
        return Err(e.fail("delta", "delta must lie in (0, 1)"));
    }
    let output_dir = e
        .get::<PathBuf>("output_dir", "a path")?
        .unwrap_or_else(|| PathBuf::from("out"));
    let checks = e
        .with("checks", |v| {
            if v.trim() == "all" {
                return Ok(CheckName::ALL.to_vec());
            }
            let mut out: Vec<CheckName> = v
                .split(',')
                .filter(|c| !c.trim().is_empty())
                .map(|c| c.trim().parse())
                .collect::<Result<_>>()?;
            out.sort();
            out.dedup();
            Ok(out)
        })?
        .unwrap_or_else(|| CheckName::ALL.to_vec());

    let kind = e
        .with("env.kind", EnvKind::from_str)?
        .ok_or_else(|| e.fail("env.kind", "missing required key 'env.kind'"))?;
    let rho: f64 = e.get("env.rho", "a real")?.unwrap_or(0.0);
    validate_rho(&e, "env.rho", rho)?;
    let construction_rho: Option<f64> = e.get("env.construction_rho", "a real")?;
    if let Some(r) = construction_rho {
        validate_rho(&e, "env.construction_rho", r)?;
    }
    let shape = e
        .with("env.shape", Shape::from_str)?
        .unwrap_or(Shape::Random);
    let offset: f64 = e.get("env.offset", "a real")?.unwrap_or(0.0);
    if !offset.is_finite() {
        return Err(e.fail("env.offset", "offset must be finite"));
    }
    if kind == EnvKind::Strict && offset != 0.0 {
        return Err(e.fail("env.offset", "a strict environment has no offset"));
    }
    let noise_sigma: f64 = e.get("env.noise_sigma", "a real")?.unwrap_or(1.0);
    if !(noise_sigma >= 0.0) || !noise_sigma.is_finite() {
        return Err(e.fail("env.noise_sigma", "noise sigma must be finite and >= 0"));
    }
    let action_set = e
        .with("env.action_set", ActionSetSpec::from_str)?
        .unwrap_or_else(|| ActionSetSpec::default_for(d));
    if matches!(action_set, ActionSetSpec::Fig1(_)) && d != 1 {
        return Err(e.fail("env.action_set", "fig1 needs d = 1"));
    }
    let w_star = e.with("env.w_star", |v| {
        if v.trim() == "random" {
            Ok(None)
        } else {
            parse_reals(v).map(Some)
        }
    })?;
    let w_star = w_star.flatten();
    if let Some(w) = &w_star {
        if w.len() != d {
            return Err(e.fail("env.w_star", format!("w* has {} entries, d = {d}", w.len())));
        }
    }

    let policy_kind: String = e.require("policy.kind", "a policy name")?;
    if !registry.contains(&policy_kind) {
        return Err(e.fail("policy.kind", format!("unknown policy '{policy_kind}'")));
    }
    let schedule = e
        .with("policy.schedule", ScheduleKind::from_str)?
        .unwrap_or(if policy_kind == "linucbw" {
            ScheduleKind::Theorem2
        } else {
            ScheduleKind::Theorem1
        });
    if policy_kind == "linucbw" && schedule != ScheduleKind::Theorem2 {
        return Err(e.fail("policy.schedule", "linucbw needs the theorem2 schedule"));
    }
    let default_sigma = if noise_sigma > 0.0 { noise_sigma } else { 1.0 };
    let sigma: f64 = e.get("policy.sigma", "a real")?.unwrap_or(default_sigma);
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(e.fail("policy.sigma", "policy sigma must be positive"));
    }

    let c_b: f64 = e.get("bounds.c_b", "a real")?.unwrap_or(1.0);
    if !(c_b > 0.0) || !c_b.is_finite() {
        return Err(e.fail("bounds.c_b", "C_b must be positive"));
    }
    let c_w: f64 = e.get("bounds.c_w", "a real")?.unwrap_or(1.0);
    if !(c_w > 0.0) || !c_w.is_finite() {
        return Err(e.fail("bounds.c_w", "C_w must be positive"));
    }
    if let Some(w) = &w_star {
        let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > c_w * (1.0 + 1e-12) {
            return Err(e.fail("env.w_star", format!("‖w*‖ = {norm} exceeds C_w = {c_w}")));
        }
    }

    Ok(ExperimentConfig {
        d,
        horizon,
        seeds,
        env: EnvConfig {
            kind,
            rho,
            construction_rho,
            shape,
            offset,
            noise_sigma,
            action_set,
            w_star,
        },
        policy: PolicyConfig {
            kind: policy_kind,
            schedule,
            sigma,
        },
        bounds: Bounds { c_b, c_w },
        delta,
        output_dir,
        checks,
    })
}

fn validate_rho(e: &Entries, key: &str, rho: f64) -> Result<()> {
    if !(rho < 1.0) {
        return Err(e.fail(key, format!("{key} = {rho} violates rho < 1")));
    }
    if !(rho >= 0.0) {
        return Err(e.fail(key, format!("{key} = {rho} violates rho >= 0")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        "d = 2\nhorizon = 100\nseeds = 7\nenv.kind = strict\npolicy.kind = linucb\n";

    #[test]
    fn minimal_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.seeds, [7]);
        assert_eq!(c.delta, 0.05);
        assert_eq!(c.env.shape, Shape::Random);
        assert_eq!(c.env.rho, 0.0);
        assert_eq!(c.env.action_set, ActionSetSpec::Grid(64));
        assert_eq!(c.policy.schedule, ScheduleKind::Theorem1);
        assert_eq!(c.policy.sigma, 1.0);
        assert_eq!(c.lambda(), 1.0);
        assert_eq!(c.checks, CheckName::ALL);
        assert_eq!(c.output_dir, PathBuf::from("out"));
    }

    #[test]
    fn rho_at_least_one_is_rejected() {
        let text = format!("{MINIMAL}env.rho = 1.2\n");
        let err = parse_config(&text).unwrap_err();
        match err {
            Error::Config { line, message } => {
                assert_eq!(line, 6);
                assert!(message.contains("rho < 1"), "{message}");
            }
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn errors_name_the_line() {
        let cases = [
            ("d = 2\nhorizon = x\n", 2),
            ("d = 2\n# c\nbogus = 1\n", 3),
            ("d = 2\nd = 3\n", 2),
            ("d = 2\nhorizon\n", 2),
        ];
        for (text, want) in cases {
            match parse_config(text).unwrap_err() {
                Error::Config { line, .. } => assert_eq!(line, want, "{text:?}"),
                other => panic!("unexpected {other}"),
            }
        }
    }

    #[test]
    fn invariant_violations() {
        for extra in [
            "env.offset = 1\n",
            "policy.sigma = 0\n",
            "delta = 1\n",
            "env.w_star = 3, 0\n",
            "env.w_star = 0.1\n",
            "env.action_set = fig1(9)\n",
            "policy.schedule = theorem3\n",
            "checks = deviation, nope\n",
        ] {
            assert!(
                parse_config(&format!("{MINIMAL}{extra}")).is_err(),
                "{extra}"
            );
        }
        let dup = MINIMAL.replace("seeds = 7", "seeds = 1, 2, 1");
        assert!(parse_config(&dup).is_err());
        let unknown = MINIMAL.replace("linucb", "thompson");
        assert!(parse_config(&unknown).is_err());
    }

    #[test]
    fn seeds_ranges_and_lists() {
        assert_eq!(parse_seeds("0..4").unwrap(), [0, 1, 2, 3]);
        assert_eq!(parse_seeds("5, 3,9").unwrap(), [5, 3, 9]);
        assert!(parse_seeds("3..3").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn round_trip() {
        let texts = [
            MINIMAL.to_string(),
            "d = 1\nhorizon = 50\nseeds = 0..3\nenv.kind = weak\nenv.offset = 1\nenv.rho = 0.1\n\
             env.construction_rho = 0.3\nenv.shape = boundary(-0.25)\nenv.noise_sigma = 0\n\
             env.action_set = fig1(33)\npolicy.kind = linucbw\nchecks = determinant, gap\n\
             output_dir = /tmp/x y\n"
                .to_string(),
            "d = 3\nhorizon = 9\nseeds = 4\nenv.kind = strict\nenv.w_star = 0.1, -0.2, 0.3\n\
             policy.kind = random\npolicy.schedule = constant(0.000001)\nbounds.c_w = 0.5\n\
             env.action_set = sphere(17)\n"
                .to_string(),
        ];
        for t in texts {
            let c = parse_config(&t).unwrap();
            let again = parse_config(&c.to_text()).unwrap();
            assert_eq!(again, c);
            assert_eq!(again.to_text(), c.to_text());
        }
    }
}
