//! Positive-definite design matrix with an incrementally maintained inverse.
//!
//! `PsdState` tracks `Σ = λI + Σ xᵢxᵢᵀ` together with `Σ⁻¹` (kept current by
//! Sherman-Morrison) and `log det Σ` (accumulated through the matrix
//! determinant lemma). Every update costs O(d²).

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{Error, Result};

/// Relative tolerance used by the consistency checks on a `PsdState`.
pub const REL_TOL: f64 = 1e-8;

/// A full dense re-inversion of `Σ` happens after this many rank-1 updates.
pub const REINVERT_EVERY: u64 = 1000;

#[derive(Debug, Clone, PartialEq)]
pub struct PsdState {
    dim: usize,
    lambda: f64,
    sigma: DMatrix<f64>,
    sigma_inv: DMatrix<f64>,
    log_det: f64,
    updates: u64,
}

impl PsdState {
    /// `Σ₀ = λI`.
    pub fn new(dim: usize, lambda: f64) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(Error::invalid(format!(
                "ridge parameter must be positive and finite, got {lambda}"
            )));
        }
        Ok(Self {
            dim,
            lambda,
            sigma: DMatrix::identity(dim, dim) * lambda,
            sigma_inv: DMatrix::identity(dim, dim) / lambda,
            log_det: dim as f64 * lambda.ln(),
            updates: 0,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        &self.sigma_inv
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Number of non-zero rank-1 updates applied so far.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    /// `Σ ← Σ + xxᵀ`, returning `u² = xᵀΣ⁻¹x` measured before the update.
    pub fn rank1_update(&mut self, x: &DVector<f64>) -> Result<f64> {
        self.check_vector(x)?;
        if x.iter().all(|&v| v == 0.0) {
            return Ok(0.0);
        }

        let z = &self.sigma_inv * x;
        let u_sq = x.dot(&z).max(0.0);
        let denom = 1.0 + u_sq;

        self.sigma.ger(1.0, x, x, 1.0);
        self.sigma_inv.ger(-1.0 / denom, &z, &z, 1.0);
        symmetrize(&mut self.sigma_inv);
        self.log_det += denom.ln();
        self.updates += 1;

        if self.updates.is_multiple_of(REINVERT_EVERY) {
            self.reinvert();
        }
        Ok(u_sq)
    }

    /// `xᵀΣ⁻¹x`, the squared norm of `x` in the `Σ⁻¹` geometry.
    pub fn mahalanobis_inv_sq(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        quad_form(&self.sigma_inv, x.as_slice()).max(0.0)
    }

    /// `xᵀΣx`.
    pub fn mahalanobis_sq(&self, x: &DVector<f64>) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        quad_form(&self.sigma, x.as_slice())
    }

    fn reinvert(&mut self) {
        // Σ ⪰ λI, so the factorisation only fails if Σ itself has been corrupted.
        if let Some(chol) = Cholesky::new(self.sigma.clone()) {
            self.sigma_inv = chol.inverse();
            symmetrize(&mut self.sigma_inv);
        }
    }

    fn check_vector(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::invalid(format!(
                "vector has length {}, expected {}",
                x.len(),
                self.dim
            )));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("vector has non-finite entries"));
        }
        Ok(())
    }
}

/// `xᵀMx` for a column-major square `M`, without allocating.
pub fn quad_form(m: &DMatrix<f64>, x: &[f64]) -> f64 {
    let n = x.len();
    let data = m.as_slice();
    let mut acc = 0.0;
    for (j, &xj) in x.iter().enumerate() {
        let col = &data[j * n..(j + 1) * n];
        let mut s = 0.0;
        for (mij, &xi) in col.iter().zip(x) {
            s += mij * xi;
        }
        acc += s * xj;
    }
    acc
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_vec(rng: &mut ChaCha8Rng, d: usize, c_b: f64) -> DVector<f64> {
        let v = DVector::from_fn(d, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > c_b {
            v * (c_b / n)
        } else {
            v
        }
    }

    #[test]
    fn init_identity() {
        let s = PsdState::new(2, 1.0).unwrap();
        assert_eq!(s.sigma(), &DMatrix::<f64>::identity(2, 2));
        assert_eq!(s.log_det(), 0.0);
    }

    #[test]
    fn init_scalar() {
        let s = PsdState::new(1, 4.0).unwrap();
        assert_eq!(s.sigma()[(0, 0)], 4.0);
        assert_eq!(s.sigma_inv()[(0, 0)], 0.25);
        assert_eq!(s.log_det(), 4f64.ln());
    }

    #[test]
    fn init_log_det_matches_dense_determinant() {
        let s = PsdState::new(3, 0.5).unwrap();
        let dense = s.sigma().determinant().ln();
        assert!((s.log_det() - dense).abs() <= REL_TOL * dense.abs());
        assert!((s.log_det() - 3.0 * 0.5f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn init_rejects_bad_arguments() {
        assert!(PsdState::new(0, 1.0).is_err());
        assert!(PsdState::new(2, 0.0).is_err());
        assert!(PsdState::new(2, -1.0).is_err());
        assert!(PsdState::new(2, f64::NAN).is_err());
    }

    #[test]
    fn zero_update_is_noop() {
        let mut s = PsdState::new(3, 2.0).unwrap();
        let before = s.clone();
        let u = s.rank1_update(&DVector::zeros(3)).unwrap();
        assert_eq!(u, 0.0);
        assert_eq!(s, before);
    }

    #[test]
    fn non_finite_update_rejected() {
        let mut s = PsdState::new(2, 1.0).unwrap();
        assert!(s
            .rank1_update(&DVector::from_vec(vec![1.0, f64::INFINITY]))
            .is_err());
        assert!(s.rank1_update(&DVector::from_vec(vec![1.0])).is_err());
    }

    #[test]
    fn mahalanobis_basic_cases() {
        let s = PsdState::new(3, 1.0).unwrap();
        assert_eq!(s.mahalanobis_inv_sq(&DVector::zeros(3)), 0.0);
        let e = DVector::from_vec(vec![0.0, 1.0, 0.0]);
        assert_eq!(s.mahalanobis_inv_sq(&e), 1.0);
    }

    #[test]
    fn mahalanobis_matches_linear_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = rng.random_range(1..=6);
            let mut s = PsdState::new(d, 0.3).unwrap();
            for _ in 0..rng.random_range(0..40) {
                s.rank1_update(&random_vec(&mut rng, d, 1.0)).unwrap();
            }
            let x = random_vec(&mut rng, d, 2.0);
            let z = s.sigma().clone().lu().solve(&x).unwrap();
            let oracle = x.dot(&z);
            let got = s.mahalanobis_inv_sq(&x);
            assert!((got - oracle).abs() <= REL_TOL * oracle.abs().max(1e-12));
        }
    }

    #[test]
    fn reinversion_keeps_inverse_accurate() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut s = PsdState::new(4, 0.1).unwrap();
        for _ in 0..(REINVERT_EVERY + 10) {
            s.rank1_update(&random_vec(&mut rng, 4, 1.0)).unwrap();
        }
        let dense = s.sigma().clone().try_inverse().unwrap();
        let err = (s.sigma_inv() - &dense).norm() / dense.norm();
        assert!(err < REL_TOL, "relative error {err}");
    }
}
