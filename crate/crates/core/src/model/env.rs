//! Concrete bandit environments whose true mean reward `f₀` is certified to
//! be a (weak) gap-adjusted misspecification of a linear anchor.

use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::spec::{gam_envelope, GamSpec};
use crate::error::{Error, Result};

/// Absolute tolerance used when comparing reward values during certification.
pub const CERT_TOL: f64 = 1e-9;

/// Knots of the piecewise-linear true function of the one-dimensional
/// example, as `(x, f₀(x))`.
const FIG1_KNOTS: [(f64, f64); 5] = [
    (-2.0, -1.5),
    (-1.0, 0.5),
    (0.0, -1.0),
    (1.0, 0.0),
    (2.0, 2.0),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnvKind {
    Strict,
    Weak,
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EnvKind::Strict => "strict",
            EnvKind::Weak => "weak",
        })
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "strict" => Ok(EnvKind::Strict),
            "weak" => Ok(EnvKind::Weak),
            other => Err(Error::invalid(format!(
                "unknown environment kind '{other}'"
            ))),
        }
    }
}

/// How `f₀` is placed inside the per-action envelope.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Shape {
    /// `f₀ = f_w`.
    Anchor,
    /// `midpoint + α · half_width`, `α ∈ [-1, 1]`.
    Boundary(f64),
    /// Independent uniform draw inside each envelope.
    Random,
    /// The piecewise-linear one-dimensional example, clamped to the envelope.
    PiecewiseFig1,
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Anchor => f.write_str("anchor"),
            Shape::Boundary(a) => write!(f, "boundary({a})"),
            Shape::Random => f.write_str("random"),
            Shape::PiecewiseFig1 => f.write_str("piecewise-fig1"),
        }
    }
}

impl FromStr for Shape {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "anchor" => return Ok(Shape::Anchor),
            "random" => return Ok(Shape::Random),
            "piecewise-fig1" => return Ok(Shape::PiecewiseFig1),
            _ => {}
        }
        if let Some(inner) = s
            .strip_prefix("boundary(")
            .and_then(|r| r.strip_suffix(')'))
        {
            let alpha: f64 = inner
                .trim()
                .parse()
                .map_err(|_| Error::invalid(format!("bad boundary coefficient '{inner}'")))?;
            if !(-1.0..=1.0).contains(&alpha) {
                return Err(Error::invalid("boundary coefficient must lie in [-1, 1]"));
            }
            return Ok(Shape::Boundary(alpha));
        }
        Err(Error::invalid(format!("unknown shape '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum NoiseKind {
    #[default]
    Gaussian,
    /// Uniform on `[-σ√3, σ√3]`.
    Uniform,
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Uniform => "uniform",
        })
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian" => Ok(NoiseKind::Gaussian),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(Error::invalid(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// Zero-mean σ-sub-Gaussian observation noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    pub sigma: f64,
}

impl NoiseModel {
    pub fn gaussian(sigma: f64) -> Self {
        Self {
            kind: NoiseKind::Gaussian,
            sigma,
        }
    }

    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.sigma == 0.0 {
            return 0.0;
        }
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = StandardNormal.sample(rng);
                self.sigma * z
            }
            NoiseKind::Uniform => {
                let half = self.sigma * 3f64.sqrt();
                rng.random_range(-half..=half)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub y: f64,
    pub f0: f64,
    /// `f₀(x) - w*ᵀx - c*`.
    pub delta: f64,
    /// `f* - f₀(x)`.
    pub instant_regret: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CertMode {
    Strict,
    Weak,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Certification {
    pub worst_ratio: f64,
    pub witness_index: usize,
    pub max_preserved: bool,
    pub argmax_preserved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditEnvironment {
    spec: GamSpec,
    kind: EnvKind,
    f0_values: Vec<f64>,
    noise: NoiseModel,
    f_range: f64,
    offset_c: f64,
}

impl BanditEnvironment {
    /// Environment satisfying the gap-adjusted condition against `w*` itself.
    pub fn strict(spec: GamSpec, shape: Shape, noise: NoiseModel, seed: u64) -> Result<Self> {
        Self::build(spec, EnvKind::Strict, 0.0, shape, noise, seed)
    }

    /// Environment satisfying the weak condition: `f₀` is built around the
    /// shifted anchor `f_w + offset`, so `c* = offset`.
    pub fn weak(
        spec: GamSpec,
        offset: f64,
        shape: Shape,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        let env = Self::build(spec, EnvKind::Weak, offset, shape, noise, seed)?;
        if offset.abs() > env.f_range {
            log::warn!(
                "offset c* = {offset} exceeds the reward range F = {}; the weak regret bound assumes c* <= F",
                env.f_range
            );
        }
        Ok(env)
    }

    fn build(
        spec: GamSpec,
        kind: EnvKind,
        offset: f64,
        shape: Shape,
        noise: NoiseModel,
        seed: u64,
    ) -> Result<Self> {
        if !(noise.sigma >= 0.0) || !noise.sigma.is_finite() {
            return Err(Error::invalid(
                "noise sigma must be finite and non-negative",
            ));
        }
        if !offset.is_finite() {
            return Err(Error::invalid("offset must be finite"));
        }
        if let Shape::Boundary(a) = shape {
            if !(-1.0..=1.0).contains(&a) {
                return Err(Error::invalid("boundary coefficient must lie in [-1, 1]"));
            }
        }
        if shape == Shape::PiecewiseFig1 && spec.actions().raw_dim() != 1 {
            return Err(Error::invalid(format!(
                "piecewise-fig1 needs a one-dimensional action set, got raw dimension {}",
                spec.actions().raw_dim()
            )));
        }

        let rho = spec.rho();
        let f_star = spec.f_star() + offset;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f0_values = Vec::with_capacity(spec.actions().len());
        for (x, &fw) in spec.actions().points().iter().zip(spec.anchor_values()) {
            let env = gam_envelope(fw + offset, f_star, rho)?;
            let v = match shape {
                Shape::Anchor => fw + offset,
                Shape::Boundary(a) => env.midpoint() + a * env.half_width(),
                Shape::Random => {
                    let u: f64 = rng.random();
                    env.lo + u * (env.hi - env.lo)
                }
                Shape::PiecewiseFig1 => fig1_value(x[0]) + offset,
            };
            f0_values.push(v.clamp(env.lo, env.hi));
        }

        let (min, max) = f0_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(Self {
            spec,
            kind,
            f0_values,
            noise,
            f_range: max - min,
            offset_c: offset,
        })
    }

    /// Reassembles an environment from stored parts (used by the file reader).
    pub(crate) fn from_parts(
        spec: GamSpec,
        kind: EnvKind,
        f0_values: Vec<f64>,
        noise: NoiseModel,
        offset_c: f64,
    ) -> Result<Self> {
        if f0_values.len() != spec.actions().len() {
            return Err(Error::invalid("one f₀ value per action is required"));
        }
        if f0_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("f₀ values must be finite"));
        }
        let (min, max) = f0_values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        Ok(Self {
            spec,
            kind,
            f0_values,
            noise,
            f_range: max - min,
            offset_c,
        })
    }

    pub fn spec(&self) -> &GamSpec {
        &self.spec
    }

    pub fn kind(&self) -> EnvKind {
        self.kind
    }

    pub fn f0_values(&self) -> &[f64] {
        &self.f0_values
    }

    pub fn noise(&self) -> NoiseModel {
        self.noise
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise.sigma
    }

    /// `F`, the exact spread of `f₀` over the actions.
    pub fn f_range(&self) -> f64 {
        self.f_range
    }

    /// `c* = f* - f_w*`; zero for strict environments.
    pub fn offset_c(&self) -> f64 {
        self.offset_c
    }

    pub fn num_actions(&self) -> usize {
        self.f0_values.len()
    }

    /// `f* = max f₀`.
    pub fn f0_star(&self) -> f64 {
        self.f0_values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn x_star_index(&self) -> usize {
        self.spec.x_star_index()
    }

    /// `w*ᵀ(x* - x)` for action `index`.
    pub fn anchor_gap(&self, index: usize) -> f64 {
        self.spec.f_star() - self.spec.anchor_values()[index]
    }

    /// Draws one noisy observation of action `index`.
    pub fn query<R: RngCore + ?Sized>(&self, index: usize, rng: &mut R) -> Result<Observation> {
        let Some(&f0) = self.f0_values.get(index) else {
            return Err(Error::invalid(format!(
                "action index {index} out of range (have {})",
                self.f0_values.len()
            )));
        };
        let eta = self.noise.sample(rng);
        Ok(Observation {
            y: f0 + eta,
            f0,
            delta: f0 - self.spec.anchor_values()[index] - self.offset_c,
            instant_regret: self.f0_star() - f0,
        })
    }

    /// Worst-case ratio `|numerator| / (f* - f₀(x))` over the actions, plus
    /// whether the linear anchor preserves the maximum value and maximizers.
    pub fn certify(&self, mode: CertMode) -> Certification {
        let fw = self.spec.anchor_values();
        let fw_star = self.spec.f_star();
        let f_star = self.f0_star();

        let mut worst_ratio = 0.0f64;
        let mut witness_index = 0;
        for (i, (&f0, &fwx)) in self.f0_values.iter().zip(fw).enumerate() {
            let numerator = match mode {
                CertMode::Strict => fwx - f0,
                CertMode::Weak => (fwx - fw_star) + (f_star - f0),
            };
            let gap = f_star - f0;
            let ratio = if gap <= 0.0 {
                if numerator.abs() <= CERT_TOL {
                    0.0
                } else {
                    f64::INFINITY
                }
            } else {
                numerator.abs() / gap
            };
            if ratio > worst_ratio {
                worst_ratio = ratio;
                witness_index = i;
            }
        }

        let argmax_w: Vec<usize> = indices_equal_to(fw, fw_star);
        let argmax_0: Vec<usize> = indices_equal_to(&self.f0_values, f_star);
        Certification {
            worst_ratio,
            witness_index,
            max_preserved: (fw_star - f_star).abs() <= CERT_TOL,
            argmax_preserved: argmax_w == argmax_0,
        }
    }

    /// Certification in the mode matching this environment's kind.
    pub fn certify_own(&self) -> Certification {
        match self.kind {
            EnvKind::Strict => self.certify(CertMode::Strict),
            EnvKind::Weak => self.certify(CertMode::Weak),
        }
    }
}

fn indices_equal_to(values: &[f64], target: f64) -> Vec<usize> {
    values
        .iter()
        .enumerate()
        .filter(|(_, &v)| v == target)
        .map(|(i, _)| i)
        .collect()
}

fn fig1_value(x: f64) -> f64 {
    let x = x.clamp(FIG1_KNOTS[0].0, FIG1_KNOTS[FIG1_KNOTS.len() - 1].0);
    for pair in FIG1_KNOTS.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        if x <= x1 {
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
        }
    }
    FIG1_KNOTS[FIG1_KNOTS.len() - 1].1
}

/// `w*` of norm `c_w` in a seeded uniformly random direction.
pub fn random_anchor(dim: usize, c_w: f64, seed: u64) -> DVector<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
        let n: f64 = v.norm();
        if n > 1e-12 {
            return v * (c_w / n);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::actions::ActionSet;

    fn spec2d(rho: f64) -> GamSpec {
        let actions = ActionSet::grid(2, 9, 0.7, 1.0, false).unwrap();
        GamSpec::new(DVector::from_vec(vec![0.6, -0.3]), 1.0, rho, actions).unwrap()
    }

    fn figure1_env() -> BanditEnvironment {
        let spec = GamSpec::figure1(401, 0.7).unwrap();
        BanditEnvironment::strict(spec, Shape::PiecewiseFig1, NoiseModel::gaussian(0.0), 0).unwrap()
    }

    #[test]
    fn anchor_env_is_realizable() {
        let env =
            BanditEnvironment::strict(spec2d(0.3), Shape::Anchor, NoiseModel::gaussian(0.0), 1)
                .unwrap();
        assert_eq!(env.f0_values(), env.spec().anchor_values());
        let c = env.certify(CertMode::Strict);
        assert_eq!(c.worst_ratio, 0.0);
        assert!(c.max_preserved && c.argmax_preserved);
    }

    #[test]
    fn figure1_environment() {
        let env = figure1_env();
        let c = env.certify(CertMode::Strict);
        assert!(c.worst_ratio <= 0.7 + CERT_TOL, "{}", c.worst_ratio);
        assert!(c.max_preserved && c.argmax_preserved);
        assert_eq!(env.x_star_index(), 400);
        assert_eq!(env.spec().actions().points()[env.x_star_index()][0], 2.0);
        // the piecewise function lies inside the envelope, so clamping is inert
        for (x, &f0) in env.spec().actions().points().iter().zip(env.f0_values()) {
            assert!((f0 - fig1_value(x[0])).abs() < 1e-12);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let obs = env.query(300, &mut rng).unwrap();
        assert_eq!(env.spec().actions().points()[300][0], 1.0);
        assert!((obs.instant_regret - 2.0).abs() < 1e-12);
    }

    #[test]
    fn figure1_requires_one_dimension() {
        let err = BanditEnvironment::strict(
            spec2d(0.7),
            Shape::PiecewiseFig1,
            NoiseModel::gaussian(0.0),
            0,
        );
        assert!(matches!(err, Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn boundary_env_certifies_at_rho() {
        let env = BanditEnvironment::strict(
            spec2d(0.3),
            Shape::Boundary(1.0),
            NoiseModel::gaussian(0.0),
            0,
        )
        .unwrap();
        let c = env.certify(CertMode::Strict);
        assert!((c.worst_ratio - 0.3).abs() < 1e-9);
        assert_ne!(c.witness_index, env.x_star_index());
        // every non-optimal action sits on the edge
        let f_star = env.f0_star();
        for (i, (&f0, &fw)) in env
            .f0_values()
            .iter()
            .zip(env.spec().anchor_values())
            .enumerate()
        {
            if i != env.x_star_index() {
                assert!(((f0 - fw).abs() / (f_star - f0) - 0.3).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn weak_with_zero_offset_matches_strict() {
        let s = BanditEnvironment::strict(spec2d(0.2), Shape::Random, NoiseModel::gaussian(0.5), 4)
            .unwrap();
        let w = BanditEnvironment::weak(
            spec2d(0.2),
            0.0,
            Shape::Random,
            NoiseModel::gaussian(0.5),
            4,
        )
        .unwrap();
        assert_eq!(s.f0_values(), w.f0_values());
        assert_eq!(w.offset_c(), 0.0);
    }

    #[test]
    fn pure_shift_keeps_maximizers() {
        let w = BanditEnvironment::weak(
            spec2d(0.2),
            1.0,
            Shape::Anchor,
            NoiseModel::gaussian(0.0),
            4,
        )
        .unwrap();
        for (&f0, &fw) in w.f0_values().iter().zip(w.spec().anchor_values()) {
            assert_eq!(f0, fw + 1.0);
        }
        let c = w.certify(CertMode::Weak);
        assert!(c.argmax_preserved);
        assert!(c.worst_ratio < 1e-12);
    }

    #[test]
    fn weak_random_certifies_weak_not_strict() {
        let w = BanditEnvironment::weak(
            spec2d(0.2),
            0.5,
            Shape::Random,
            NoiseModel::gaussian(0.0),
            8,
        )
        .unwrap();
        let weak = w.certify(CertMode::Weak);
        let strict = w.certify(CertMode::Strict);
        assert!(weak.worst_ratio <= 0.2 + CERT_TOL);
        assert!(strict.worst_ratio > 0.2);
        assert!(!strict.max_preserved);
    }

    #[test]
    fn query_noiseless_anchor() {
        let env =
            BanditEnvironment::strict(spec2d(0.0), Shape::Anchor, NoiseModel::gaussian(0.0), 0)
                .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for i in [0, 7, 40, env.x_star_index()] {
            let obs = env.query(i, &mut rng).unwrap();
            let fw = env.spec().anchor_values()[i];
            assert_eq!(obs.y, fw);
            assert_eq!(obs.delta, 0.0);
            assert_eq!(obs.instant_regret, env.spec().f_star() - fw);
        }
        let best = env.query(env.x_star_index(), &mut rng).unwrap();
        assert_eq!(best.instant_regret, 0.0);
        assert!(env.query(env.num_actions(), &mut rng).is_err());
    }

    #[test]
    fn uniform_noise_is_bounded() {
        let n = NoiseModel {
            kind: NoiseKind::Uniform,
            sigma: 0.5,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let half = 0.5 * 3f64.sqrt();
        for _ in 0..1000 {
            assert!(n.sample(&mut rng).abs() <= half);
        }
    }

    #[test]
    fn shape_parsing() {
        assert_eq!(
            "boundary(-0.5)".parse::<Shape>().unwrap(),
            Shape::Boundary(-0.5)
        );
        assert!("boundary(2)".parse::<Shape>().is_err());
        assert_eq!(
            Shape::Boundary(1.0).to_string().parse::<Shape>().unwrap(),
            Shape::Boundary(1.0)
        );
        assert_eq!(
            "piecewise-fig1".parse::<Shape>().unwrap(),
            Shape::PiecewiseFig1
        );
    }

    #[test]
    fn random_anchor_has_norm() {
        let w = random_anchor(4, 0.8, 2);
        assert!((w.norm() - 0.8).abs() < 1e-12);
        assert_eq!(w, random_anchor(4, 0.8, 2));
    }
}
