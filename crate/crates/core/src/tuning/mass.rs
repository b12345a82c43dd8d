//! Mass matrix and exchange-proposal covariance from the mode.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::Result;
use crate::estimators::{hessian_precision_estimate, AuxiliaryBatch};
use crate::gibbs_models::GibbsModel;
use crate::params::ParamVector;
use crate::prior::Prior;
use crate::samplers::MassMatrix;

/// Default number of draws behind the precision estimate.
pub const HESSIAN_DRAWS: usize = 500;

/// M = estimated posterior precision at the mode: the sample covariance
/// of statistics over `n_hess` draws at θ*, minus the prior's log-density
/// Hessian, repaired to SPD.
pub fn mass_matrix_from_mode<M, R>(
    model: &M,
    theta_star: &ParamVector,
    prior: &Prior,
    n_hess: usize,
    sweeps: usize,
    rng: &mut R,
) -> Result<MassMatrix>
where
    M: GibbsModel,
    R: Rng + ?Sized,
{
    let batch = AuxiliaryBatch::simulate(model, theta_star, n_hess, sweeps, rng);
    let precision = hessian_precision_estimate(theta_star, &batch, prior)?;
    MassMatrix::from_spd(precision)
}

/// Random-walk proposal covariance (2.38²/d) M⁻¹ targeting the optimal
/// Metropolis acceptance rate.
pub fn exchange_proposal_cov(mass: &MassMatrix, dim: usize) -> DMatrix<f64> {
    mass.inverse() * (2.38 * 2.38 / dim as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gibbs_models::ErgmModel;
    use crate::rng;

    #[test]
    fn identity_mass_gives_the_textbook_scale() {
        let mass = MassMatrix::identity(2);
        let cov = exchange_proposal_cov(&mass, 2);
        assert!((cov[(0, 0)] - 2.8322).abs() < 1e-10);
        assert!((cov[(1, 1)] - 2.8322).abs() < 1e-10);
        assert_eq!(cov[(0, 1)], 0.0);
    }

    #[test]
    fn determinant_scales_as_the_power_of_the_factor() {
        let m = DMatrix::from_row_slice(2, 2, &[3.0, 0.4, 0.4, 1.5]);
        let mass = MassMatrix::from_spd(m).unwrap();
        let cov = exchange_proposal_cov(&mass, 2);
        let factor = 2.38 * 2.38 / 2.0;
        let expected = mass.inverse().determinant() * factor * factor;
        assert!((cov.determinant() - expected).abs() < 1e-12);
    }

    #[test]
    fn free_dyads_give_the_bernoulli_variance_scale() {
        // At theta = (0, 0) every dyad is an independent fair coin, so
        // Var(edges) = n(n-1)/8; the (edges, edges) entry of M matches.
        let model = ErgmModel::new(6).unwrap();
        let theta = ParamVector::zeros(2);
        let mut rng = rng::stream(7);
        let mass =
            mass_matrix_from_mode(&model, &theta, &Prior::Flat { dim: 2 }, 2_000, 3, &mut rng)
                .unwrap();
        let expected = 6.0 * 5.0 / 8.0;
        assert!(
            (mass.matrix()[(0, 0)] - expected).abs() < 0.4,
            "{} vs {expected}",
            mass.matrix()[(0, 0)]
        );
    }

    #[test]
    fn independent_seeds_agree_within_pooled_sampling_error() {
        let model = ErgmModel::new(6).unwrap();
        let theta = ParamVector::zeros(2);
        let prior = Prior::Flat { dim: 2 };
        let n = 2_000;
        let a = mass_matrix_from_mode(&model, &theta, &prior, n, 3, &mut rng::stream(100)).unwrap();
        let b = mass_matrix_from_mode(&model, &theta, &prior, n, 3, &mut rng::stream(200)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                // se of a covariance entry ~ sqrt((s_ii s_jj + s_ij^2)/n).
                let se = |m: &MassMatrix| {
                    ((m.matrix()[(i, i)] * m.matrix()[(j, j)] + m.matrix()[(i, j)].powi(2))
                        / n as f64)
                        .sqrt()
                };
                let pooled = (se(&a).powi(2) + se(&b).powi(2)).sqrt();
                let diff = (a.matrix()[(i, j)] - b.matrix()[(i, j)]).abs();
                assert!(diff < 3.0 * pooled, "({i},{j}): diff {diff}, pooled {pooled}");
            }
        }
    }
}
