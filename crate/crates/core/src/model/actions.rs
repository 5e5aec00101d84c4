use std::collections::HashSet;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

/// Cap on materialized grid sizes.
pub const MAX_ACTIONS: usize = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ActionKind {
    FiniteList,
    UniformGrid,
    SphereSample,
}

/// A finite, materialized action set. `points` are the feature vectors the
/// learner sees; with `homogenized` set, each point is `(x, 1)` for a raw
/// action `x` of dimension `raw_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    kind: ActionKind,
    points: Vec<DVector<f64>>,
    c_b: f64,
    raw_dim: usize,
    homogenized: bool,
}

impl ActionSet {
    pub fn from_points(points: Vec<DVector<f64>>, c_b: f64) -> Result<Self> {
        let raw_dim = points.first().map_or(0, |p| p.len());
        Self::validated(ActionKind::FiniteList, points, c_b, raw_dim, false)
    }

    /// Regular grid on `[-half_width, half_width]^raw_dim` with `per_axis`
    /// points per axis, optionally homogenized to `(x, 1)`.
    pub fn grid(
        raw_dim: usize,
        per_axis: usize,
        half_width: f64,
        c_b: f64,
        homogenize: bool,
    ) -> Result<Self> {
        if raw_dim == 0 || per_axis == 0 {
            return Err(Error::invalid("grid needs raw_dim >= 1 and per_axis >= 1"));
        }
        if !(half_width >= 0.0) || !half_width.is_finite() {
            return Err(Error::invalid(
                "grid half-width must be finite and non-negative",
            ));
        }
        let total = (per_axis as f64).powi(raw_dim as i32);
        if total > MAX_ACTIONS as f64 {
            return Err(Error::invalid(format!(
                "grid of {per_axis}^{raw_dim} points exceeds the {MAX_ACTIONS} action cap"
            )));
        }
        let axis: Vec<f64> = if per_axis == 1 {
            vec![0.0]
        } else {
            let span = 2.0 * half_width;
            (0..per_axis)
                .map(|i| -half_width + span * i as f64 / (per_axis - 1) as f64)
                .collect()
        };

        let total = total as usize;
        let feat_dim = raw_dim + usize::from(homogenize);
        let mut points = Vec::with_capacity(total);
        let mut idx = vec![0usize; raw_dim];
        for _ in 0..total {
            let mut p = DVector::zeros(feat_dim);
            for (k, &i) in idx.iter().enumerate() {
                p[k] = axis[i];
            }
            if homogenize {
                p[raw_dim] = 1.0;
            }
            points.push(p);
            // odometer increment, first axis fastest
            for slot in idx.iter_mut() {
                *slot += 1;
                if *slot < per_axis {
                    break;
                }
                *slot = 0;
            }
        }
        Self::validated(ActionKind::UniformGrid, points, c_b, raw_dim, homogenize)
    }

    /// `n` points drawn uniformly on the sphere of radius `radius`.
    pub fn sphere(dim: usize, n: usize, radius: f64, c_b: f64, seed: u64) -> Result<Self> {
        if dim == 0 || n == 0 {
            return Err(Error::invalid("sphere sample needs dim >= 1 and n >= 1"));
        }
        if n > MAX_ACTIONS {
            return Err(Error::invalid("too many sphere samples"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = Vec::with_capacity(n);
        while points.len() < n {
            let v = DVector::from_fn(dim, |_, _| StandardNormal.sample(&mut rng));
            let norm: f64 = v.norm();
            if norm > 1e-12 {
                points.push(v * (radius / norm));
            }
        }
        Self::validated(ActionKind::SphereSample, points, c_b, dim, false)
    }

    /// Appends a constant 1 feature to every point.
    pub fn homogenize(&self, c_b: f64) -> Result<Self> {
        if self.homogenized {
            return Err(Error::invalid("action set is already homogenized"));
        }
        let points = self
            .points
            .iter()
            .map(|p| p.clone().insert_row(p.len(), 1.0))
            .collect();
        Self::validated(self.kind, points, c_b, self.raw_dim, true)
    }

    fn validated(
        kind: ActionKind,
        points: Vec<DVector<f64>>,
        c_b: f64,
        raw_dim: usize,
        homogenized: bool,
    ) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::invalid("action set is empty"));
        }
        if !(c_b > 0.0) || !c_b.is_finite() {
            return Err(Error::invalid("C_b must be positive and finite"));
        }
        let dim = points[0].len();
        if dim == 0 {
            return Err(Error::invalid("actions must have dimension >= 1"));
        }
        let mut seen = HashSet::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(Error::invalid(format!(
                    "action {i} has dimension {}, expected {dim}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) {
                return Err(Error::invalid(format!("action {i} has non-finite entries")));
            }
            let norm = p.norm();
            if norm > c_b * (1.0 + 1e-12) {
                return Err(Error::invalid(format!(
                    "action {i} has norm {norm} > C_b = {c_b}"
                )));
            }
            let key: Vec<u64> = p.iter().map(|v| (v + 0.0).to_bits()).collect();
            if !seen.insert(key) {
                return Err(Error::invalid(format!(
                    "action {i} duplicates an earlier action"
                )));
            }
        }
        Ok(Self {
            kind,
            points,
            c_b,
            raw_dim,
            homogenized,
        })
    }

    pub fn kind(&self) -> ActionKind {
        self.kind
    }

    pub fn points(&self) -> &[DVector<f64>] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Feature dimension.
    pub fn dim(&self) -> usize {
        self.points[0].len()
    }

    pub fn raw_dim(&self) -> usize {
        self.raw_dim
    }

    pub fn is_homogenized(&self) -> bool {
        self.homogenized
    }

    pub fn c_b(&self) -> f64 {
        self.c_b
    }
}
