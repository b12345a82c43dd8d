//! Momentum distribution: a symmetric positive definite mass matrix M
//! with its inverse and a factor for sampling r ~ N(0, M).

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct MassMatrix {
    m: DMatrix<f64>,
    inv: DMatrix<f64>,
    factor: DMatrix<f64>,
}

impl MassMatrix {
    pub fn identity(dim: usize) -> Self {
        MassMatrix {
            m: DMatrix::identity(dim, dim),
            inv: DMatrix::identity(dim, dim),
            factor: DMatrix::identity(dim, dim),
        }
    }

    /// Builds from an SPD matrix, caching the inverse and the lower
    /// Cholesky factor.
    pub fn from_spd(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let chol = Cholesky::new(m.clone()).ok_or(Error::NotPositiveDefinite)?;
        let inv = chol.inverse();
        let factor = chol.l();
        Ok(MassMatrix { m, inv, factor })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.inv
    }

    pub fn factor(&self) -> &DMatrix<f64> {
        &self.factor
    }

    /// r ~ N(0, M) via the Cholesky factor.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = DVector::from_iterator(
            self.dim(),
            (0..self.dim()).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        (&self.factor * z).iter().cloned().collect()
    }

    /// Kinetic energy ½ rᵀ M⁻¹ r.
    pub fn kinetic(&self, momentum: &[f64]) -> f64 {
        let r = DVector::from_column_slice(momentum);
        0.5 * (r.transpose() * &self.inv * &r)[(0, 0)]
    }

    /// M⁻¹ r, the velocity of the position drift.
    pub fn velocity(&self, momentum: &[f64]) -> Vec<f64> {
        let r = DVector::from_column_slice(momentum);
        (&self.inv * r).iter().cloned().collect()
    }
}
