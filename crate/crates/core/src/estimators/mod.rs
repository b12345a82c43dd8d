//! Monte Carlo estimators built from auxiliary forward draws.
//!
//! All of them consume an [`AuxiliaryBatch`]: N draws from f(·|θ') with
//! their statistic vectors cached. The same batch drawn at a leapfrog
//! point serves both the gradient kick at that point and the
//! importance-sampling factor of the segment arriving there, so the
//! path-wise ratio estimator costs no extra simulation.
//!
//! Ratio estimates are computed and stored in the log domain; the
//! estimators are unbiased in the linear domain, which is what the
//! exhaustive small-instance tests check.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::gibbs_models::GibbsModel;
use crate::math::logsumexp;
use crate::params::{mean_stats, ParamVector, SuffStats};
use crate::prior::Prior;

/// N forward draws anchored at one parameter value, with cached
/// sufficient statistics.
#[derive(Clone, Debug)]
pub struct AuxiliaryBatch<C> {
    anchor: ParamVector,
    draws: Vec<C>,
    stats: Vec<SuffStats>,
}

impl<C> AuxiliaryBatch<C> {
    pub fn anchor(&self) -> &ParamVector {
        &self.anchor
    }

    pub fn n_draws(&self) -> usize {
        self.stats.len()
    }

    pub fn draws(&self) -> &[C] {
        &self.draws
    }

    pub fn stats(&self) -> &[SuffStats] {
        &self.stats
    }

    /// (1/N) Σ s(u⁽ᵏ⁾).
    pub fn mean_stats(&self) -> Vec<f64> {
        mean_stats(&self.stats)
    }

    fn check_anchor(&self, expected: &ParamVector) -> Result<()> {
        if self.anchor.as_slice() != expected.as_slice() {
            return Err(Error::PathMismatch(
                "batch anchored at a different parameter".into(),
            ));
        }
        Ok(())
    }
}

impl<C: Clone + Send + Sync> AuxiliaryBatch<C> {
    /// Draws `n` configurations from f(·|anchor) with the model's
    /// forward sampler and caches their statistics.
    pub fn simulate<M, R>(
        model: &M,
        anchor: &ParamVector,
        n: usize,
        sweeps: usize,
        rng: &mut R,
    ) -> Self
    where
        M: GibbsModel<Config = C>,
        R: Rng + ?Sized,
    {
        let draws = model.forward_sample(anchor, n, sweeps, rng);
        let stats = draws.iter().map(|x| model.stats_unchecked(x)).collect();
        AuxiliaryBatch {
            anchor: anchor.clone(),
            draws,
            stats,
        }
    }

    /// Wraps externally produced draws, recomputing their statistics.
    pub fn from_draws<M>(model: &M, anchor: &ParamVector, draws: Vec<C>) -> Result<Self>
    where
        M: GibbsModel<Config = C>,
    {
        if draws.is_empty() {
            return Err(Error::InvalidConfiguration(
                "an auxiliary batch needs at least one draw".into(),
            ));
        }
        let stats = draws
            .iter()
            .map(|x| model.suff_stats(x))
            .collect::<Result<Vec<_>>>()?;
        Ok(AuxiliaryBatch {
            anchor: anchor.clone(),
            draws,
            stats,
        })
    }

    /// Keeps the first `n` draws; used to reuse one large batch at
    /// several batch sizes.
    pub fn truncated(&self, n: usize) -> Self {
        assert!(n >= 1 && n <= self.n_draws());
        AuxiliaryBatch {
            anchor: self.anchor.clone(),
            draws: self.draws[..n].to_vec(),
            stats: self.stats[..n].to_vec(),
        }
    }
}

/// A log-domain estimate of Z(θ)/Z(θ′).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RatioEstimate {
    /// log of the (linear-domain unbiased) ratio estimate.
    pub log_value: f64,
    /// Draws per batch.
    pub n_draws: usize,
    /// Number of path segments multiplied together (1 for plain
    /// importance sampling).
    pub n_segments: usize,
}

/// log[(1/N) Σₖ q(from, uₖ)/q(to, uₖ)] for a batch drawn at `to`.
///
/// For the linear family each weight is exp((from − to)ᵀ s(uₖ)).
pub fn segment_log_ratio<C>(
    from: &ParamVector,
    to: &ParamVector,
    batch: &AuxiliaryBatch<C>,
) -> f64 {
    let diff = from.minus(to);
    let weights: Vec<f64> = batch.stats.iter().map(|s| diff.dot(s)).collect();
    logsumexp(&weights) - (batch.n_draws() as f64).ln()
}

/// Estimate of ∇ log π(θ | x): s(x_obs) − (1/N) Σ s(u⁽ᵏ⁾) + ∇ log p(θ).
///
/// The batch must be anchored at θ, and θ must lie in the prior support
/// (the gradient is undefined outside it).
pub fn grad_log_post_estimate<M: GibbsModel>(
    model: &M,
    theta: &ParamVector,
    x_obs: &M::Config,
    batch: &AuxiliaryBatch<M::Config>,
    prior: &Prior,
) -> Result<Vec<f64>> {
    theta.check_dim(model.dim())?;
    batch.check_anchor(theta)?;
    if !prior.contains(theta) {
        return Err(Error::OutsideSupport);
    }
    let obs = model.suff_stats(x_obs)?;
    Ok(grad_from_parts(&obs, &batch.mean_stats(), prior, theta))
}

/// Gradient estimate from already-extracted pieces; shared with the
/// samplers, which cache s(x_obs) and tolerate box excursions.
pub(crate) fn grad_from_parts(
    obs_stats: &SuffStats,
    mean_stats: &[f64],
    prior: &Prior,
    theta: &ParamVector,
) -> Vec<f64> {
    let prior_grad = prior.grad_log_density(theta);
    obs_stats
        .iter()
        .zip(mean_stats)
        .zip(prior_grad)
        .map(|((o, m), p)| o - m + p)
        .collect()
}

/// Importance-sampling estimate of Z(θ)/Z(θ′) from one batch at θ′.
pub fn ise_log_ratio<C>(
    theta: &ParamVector,
    other: &ParamVector,
    batch: &AuxiliaryBatch<C>,
) -> Result<RatioEstimate> {
    batch.check_anchor(other)?;
    Ok(RatioEstimate {
        log_value: segment_log_ratio(theta, other, batch),
        n_draws: batch.n_draws(),
        n_segments: 1,
    })
}

/// Path-wise ratio estimate along θ₀ … θ_L: the product of one
/// importance-sampling factor per consecutive pair, each factor using
/// the batch drawn at the segment's far end.
pub fn lfe_log_ratio<C>(
    path: &[ParamVector],
    batches: &[AuxiliaryBatch<C>],
) -> Result<RatioEstimate> {
    if path.len() != batches.len() + 1 {
        return Err(Error::PathMismatch(format!(
            "path of {} points needs {} batches, got {}",
            path.len(),
            path.len().saturating_sub(1),
            batches.len()
        )));
    }
    if batches.is_empty() {
        return Err(Error::PathMismatch("empty integration path".into()));
    }
    let n_draws = batches[0].n_draws();
    let mut log_value = 0.0;
    for (segment, batch) in batches.iter().enumerate() {
        batch.check_anchor(&path[segment + 1])?;
        if batch.n_draws() != n_draws {
            return Err(Error::PathMismatch(
                "batches along a path must have equal draw counts".into(),
            ));
        }
        log_value += segment_log_ratio(&path[segment], &path[segment + 1], batch);
    }
    Ok(RatioEstimate {
        log_value,
        n_draws,
        n_segments: batches.len(),
    })
}

/// Posterior-precision estimate at the mode: the sample covariance of
/// the batch statistics minus ∇² log p(θ*), repaired to symmetric
/// positive definite.
///
/// For the linear family the likelihood contributes Cov_θ*[s(X)], which
/// a flat prior leaves untouched. The repair symmetrises and then adds
/// an escalating diagonal jitter, starting from
/// max(0, 1e−8 − smallest eigenvalue), until a Cholesky factorisation
/// succeeds.
pub fn hessian_precision_estimate<C>(
    theta_star: &ParamVector,
    batch: &AuxiliaryBatch<C>,
    prior: &Prior,
) -> Result<DMatrix<f64>> {
    batch.check_anchor(theta_star)?;
    let d = theta_star.dim();
    let n = batch.n_draws();
    if n < d + 1 {
        return Err(Error::InvalidConfiguration(format!(
            "precision estimate needs at least {} draws, got {n}",
            d + 1
        )));
    }

    let mean = batch.mean_stats();
    let mut cov = DMatrix::<f64>::zeros(d, d);
    for s in batch.stats() {
        for i in 0..d {
            for j in 0..d {
                cov[(i, j)] += (s[i] - mean[i]) * (s[j] - mean[j]);
            }
        }
    }
    cov /= (n - 1) as f64;

    for (i, h) in prior.hessian_log_density_diag(theta_star).iter().enumerate() {
        cov[(i, i)] -= h;
    }
    repair_spd(cov)
}

/// Symmetrises and jitters a matrix until it factors as SPD.
pub(crate) fn repair_spd(mut m: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let d = m.nrows();
    let sym = (m.clone() + m.transpose()) * 0.5;
    m = sym;

    let min_eig = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let mut jitter = (1e-8 - min_eig).max(0.0);
    for _ in 0..60 {
        let mut candidate = m.clone();
        for i in 0..d {
            candidate[(i, i)] += jitter;
        }
        if candidate.clone().cholesky().is_some() {
            return Ok(candidate);
        }
        jitter = (jitter.max(1e-8)) * 10.0;
    }
    Err(Error::SingularPrecision)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_oracle::{
        brute_force_log_z, enumerate_stats, log_z_from_stats, potts_grad_log_z, potts_log_z,
    };
    use crate::gibbs_models::{ErgmModel, LatticeConfig, PottsModel};
    use crate::math::{log_add_exp, mean, sample_variance};
    use crate::rng;

    fn flat_box() -> Prior {
        Prior::uniform_box(vec![-5.0, -5.0], vec![5.0, 5.0])
    }

    #[test]
    fn gradient_vanishes_when_draws_match_the_observation() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let obs = LatticeConfig::constant(2, 2, 2, 1);
        let theta = ParamVector::new(vec![0.1, 0.3]);
        let batch =
            AuxiliaryBatch::from_draws(&model, &theta, vec![obs.clone(); 7]).unwrap();
        let g = grad_log_post_estimate(&model, &theta, &obs, &batch, &flat_box()).unwrap();
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn single_draw_gradient_is_a_statistic_difference() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let obs = LatticeConfig::constant(2, 2, 2, 1);
        let mut other = obs.clone();
        other.set_site(0, 0, 0);
        let theta = ParamVector::new(vec![0.0, 0.2]);
        let batch = AuxiliaryBatch::from_draws(&model, &theta, vec![other.clone()]).unwrap();
        let g = grad_log_post_estimate(&model, &theta, &obs, &batch, &flat_box()).unwrap();
        let s_obs = model.suff_stats(&obs).unwrap();
        let s_other = model.suff_stats(&other).unwrap();
        assert_eq!(g[0], s_obs[0] - s_other[0]);
        assert_eq!(g[1], s_obs[1] - s_other[1]);
    }

    #[test]
    fn gradient_outside_the_support_is_an_error() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let obs = LatticeConfig::constant(2, 2, 2, 1);
        let theta = ParamVector::new(vec![9.0, 0.2]);
        let batch = AuxiliaryBatch::from_draws(&model, &theta, vec![obs.clone()]).unwrap();
        assert!(matches!(
            grad_log_post_estimate(&model, &theta, &obs, &batch, &flat_box()),
            Err(Error::OutsideSupport)
        ));
    }

    #[test]
    fn ratio_at_equal_parameters_is_exactly_zero() {
        let model = PottsModel::new(3, 3, 2).unwrap();
        let theta = ParamVector::new(vec![0.2, 0.5]);
        let mut rng = rng::stream(31);
        let batch = AuxiliaryBatch::simulate(&model, &theta, 16, 5, &mut rng);
        let est = ise_log_ratio(&theta, &theta, &batch).unwrap();
        assert_eq!(est.log_value, 0.0);
        assert_eq!(est.n_segments, 1);
    }

    #[test]
    fn single_draw_ratio_is_the_raw_weight() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let anchor = ParamVector::new(vec![0.0, 0.5]);
        let theta = ParamVector::new(vec![0.3, 0.2]);
        let draw = LatticeConfig::constant(2, 2, 2, 1);
        let batch = AuxiliaryBatch::from_draws(&model, &anchor, vec![draw.clone()]).unwrap();
        let est = ise_log_ratio(&theta, &anchor, &batch).unwrap();
        let s = model.suff_stats(&draw).unwrap();
        assert_eq!(est.log_value, theta.minus(&anchor).dot(&s));
    }

    #[test]
    fn anchor_mismatch_is_rejected() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let anchor = ParamVector::new(vec![0.0, 0.5]);
        let elsewhere = ParamVector::new(vec![0.0, 0.4]);
        let batch =
            AuxiliaryBatch::from_draws(&model, &anchor, vec![LatticeConfig::constant(2, 2, 2, 0)])
                .unwrap();
        assert!(ise_log_ratio(&anchor, &elsewhere, &batch).is_err());
    }

    #[test]
    fn single_segment_path_estimate_bit_matches_plain_importance_sampling() {
        let model = PottsModel::new(3, 3, 2).unwrap();
        let from = ParamVector::new(vec![0.1, 0.2]);
        let to = ParamVector::new(vec![-0.2, 0.6]);
        let mut rng = rng::stream(5);
        let batch = AuxiliaryBatch::simulate(&model, &to, 32, 10, &mut rng);
        let ise = ise_log_ratio(&from, &to, &batch).unwrap();
        let lfe = lfe_log_ratio(&[from.clone(), to.clone()], &[batch]).unwrap();
        assert_eq!(ise.log_value, lfe.log_value);
    }

    #[test]
    fn constant_path_estimate_is_exactly_zero() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let theta = ParamVector::new(vec![0.1, 0.4]);
        let mut rng = rng::stream(6);
        let path = vec![theta.clone(); 4];
        let batches: Vec<_> = (0..3)
            .map(|_| AuxiliaryBatch::simulate(&model, &theta, 8, 5, &mut rng))
            .collect();
        let est = lfe_log_ratio(&path, &batches).unwrap();
        assert_eq!(est.log_value, 0.0);
        assert_eq!(est.n_segments, 3);
    }

    #[test]
    fn path_and_batches_must_line_up() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let a = ParamVector::new(vec![0.0, 0.1]);
        let b = ParamVector::new(vec![0.0, 0.2]);
        let mut rng = rng::stream(7);
        let batch_b = AuxiliaryBatch::simulate(&model, &b, 4, 3, &mut rng);
        assert!(lfe_log_ratio::<LatticeConfig>(std::slice::from_ref(&a), &[]).is_err());
        assert!(lfe_log_ratio::<LatticeConfig>(&[a.clone(), b.clone()], &[]).is_err());
        // Batch anchored at the wrong end of the segment.
        let batch_a = AuxiliaryBatch::simulate(&model, &a, 4, 3, &mut rng);
        assert!(lfe_log_ratio(&[a.clone(), b.clone()], &[batch_a]).is_err());
        assert!(lfe_log_ratio(&[a, b], &[batch_b]).is_ok());
    }

    #[test]
    fn estimates_are_invariant_to_draw_order() {
        let model = PottsModel::new(3, 3, 2).unwrap();
        let anchor = ParamVector::new(vec![0.1, 0.5]);
        let theta = ParamVector::new(vec![-0.2, 0.3]);
        let mut rng = rng::stream(9);
        let batch = AuxiliaryBatch::simulate(&model, &anchor, 16, 5, &mut rng);
        let mut reversed_draws = batch.draws().to_vec();
        reversed_draws.reverse();
        let reversed = AuxiliaryBatch::from_draws(&model, &anchor, reversed_draws).unwrap();

        let a = ise_log_ratio(&theta, &anchor, &batch).unwrap();
        let b = ise_log_ratio(&theta, &anchor, &reversed).unwrap();
        assert!((a.log_value - b.log_value).abs() < 1e-12);

        let ga = mean_stats(batch.stats());
        let gb = mean_stats(reversed.stats());
        for (x, y) in ga.iter().zip(&gb) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    /// Exhaustive expectation of the linear-domain importance weight
    /// equals the true ratio: E_{θ'}[q(θ,U)/q(θ',U)] = Z(θ)/Z(θ').
    #[test]
    fn importance_weight_is_unbiased_by_enumeration() {
        let model = PottsModel::new(3, 3, 2).unwrap();
        let stats = enumerate_stats(&model).unwrap();
        let mut rng = rng::stream(12);
        for _ in 0..5 {
            let theta = ParamVector::new(vec![
                rand::Rng::random_range(&mut rng, -0.5..0.5),
                rand::Rng::random_range(&mut rng, 0.0..1.0),
            ]);
            let other = ParamVector::new(vec![
                rand::Rng::random_range(&mut rng, -0.5..0.5),
                rand::Rng::random_range(&mut rng, 0.0..1.0),
            ]);
            let log_z_other = log_z_from_stats(&stats, &other);
            // log E[w] = logsumexp over x of log f(x|other) + (theta-other)'s(x)
            let diff = theta.minus(&other);
            let mut acc = f64::NEG_INFINITY;
            for s in &stats {
                let log_f = other.dot(s) - log_z_other;
                acc = log_add_exp(acc, log_f + diff.dot(s));
            }
            let expected = log_z_from_stats(&stats, &theta) - log_z_other;
            assert!((acc - expected).abs() < 1e-9, "{acc} vs {expected}");
        }
    }

    /// Monte Carlo check on the 3x3 lattice: the linear-domain mean of
    /// the ratio estimate over independent repetitions lands within
    /// three standard errors of the exact ratio.
    #[test]
    fn importance_sampling_ratio_concentrates_on_the_exact_value() {
        let model = PottsModel::new(3, 3, 2).unwrap();
        let theta = ParamVector::new(vec![0.0, 0.2]);
        let other = ParamVector::new(vec![0.0, 0.5]);
        let exact = (potts_log_z(&model, &theta).unwrap()
            - potts_log_z(&model, &other).unwrap())
        .exp();
        let mut rng = rng::stream(14);
        let reps: Vec<f64> = (0..50)
            .map(|_| {
                let batch = AuxiliaryBatch::simulate(&model, &other, 2_000, 30, &mut rng);
                ise_log_ratio(&theta, &other, &batch)
                    .unwrap()
                    .log_value
                    .exp()
            })
            .collect();
        let m = mean(&reps);
        let se = (sample_variance(&reps) / reps.len() as f64).sqrt();
        assert!(
            (m - exact).abs() < 3.0 * se,
            "mean {m}, exact {exact}, se {se}"
        );
    }

    #[test]
    fn identical_draws_give_the_jitter_floor_precision() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let theta = ParamVector::new(vec![0.0, 0.1]);
        let draws = vec![LatticeConfig::constant(2, 2, 2, 1); 10];
        let batch = AuxiliaryBatch::from_draws(&model, &theta, draws).unwrap();
        let m = hessian_precision_estimate(&theta, &batch, &flat_box()).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j { 1e-8 } else { 0.0 };
                assert!((m[(i, j)] - expected).abs() < 1e-20);
            }
        }
    }

    #[test]
    fn precision_needs_enough_draws() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let theta = ParamVector::zeros(2);
        let batch =
            AuxiliaryBatch::from_draws(&model, &theta, vec![LatticeConfig::constant(2, 2, 2, 0); 2])
                .unwrap();
        assert!(hessian_precision_estimate(&theta, &batch, &flat_box()).is_err());
    }

    /// Sample covariance of statistics over many forward draws at the
    /// free triangle matches the exhaustive covariance.
    #[test]
    fn precision_matches_exhaustive_covariance_on_the_free_triangle() {
        let model = ErgmModel::new(3).unwrap();
        let theta = ParamVector::zeros(2);
        let mut rng = rng::stream(15);
        let batch = AuxiliaryBatch::simulate(&model, &theta, 40_000, 3, &mut rng);
        let m = hessian_precision_estimate(&theta, &batch, &Prior::Flat { dim: 2 }).unwrap();
        let exact = [[0.75, 0.75], [0.75, 0.9375]];
        for i in 0..2 {
            for j in 0..2 {
                assert!(
                    (m[(i, j)] - exact[i][j]).abs() < 0.03,
                    "({i},{j}): {} vs {}",
                    m[(i, j)],
                    exact[i][j]
                );
            }
        }
    }

    #[test]
    fn gaussian_prior_enters_the_precision() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let theta = ParamVector::zeros(2);
        let draws = vec![LatticeConfig::constant(2, 2, 2, 1); 10];
        let batch = AuxiliaryBatch::from_draws(&model, &theta, draws).unwrap();
        let prior = Prior::Gaussian {
            mean: vec![0.0, 0.0],
            variance: vec![4.0, 0.25],
        };
        let m = hessian_precision_estimate(&theta, &batch, &prior).unwrap();
        // Zero covariance plus -hessian of the log prior.
        assert!((m[(0, 0)] - 0.25).abs() < 1e-7);
        assert!((m[(1, 1)] - 4.0).abs() < 1e-7);
    }

    #[test]
    fn gradient_agrees_with_the_exact_oracle_at_moderate_draw_counts() {
        let model = PottsModel::new(4, 4, 2).unwrap();
        let theta = ParamVector::new(vec![0.0, 0.4]);
        let mut rng = rng::stream(18);
        let obs = model.forward_sample(&theta, 1, 100, &mut rng).pop().unwrap();
        let obs_stats = model.suff_stats(&obs).unwrap();
        let exact_grad = potts_grad_log_z(&model, &theta).unwrap();

        let batch = AuxiliaryBatch::simulate(&model, &theta, 4_000, 60, &mut rng);
        let g = grad_log_post_estimate(&model, &theta, &obs, &batch, &flat_box()).unwrap();
        // Standard error per component from the batch itself.
        for j in 0..2 {
            let comp: Vec<f64> = batch.stats().iter().map(|s| s[j]).collect();
            let se = (sample_variance(&comp) / comp.len() as f64).sqrt();
            let expected = obs_stats[j] - exact_grad[j];
            assert!(
                (g[j] - expected).abs() < 3.5 * se,
                "component {j}: {} vs {expected} (se {se})",
                g[j]
            );
        }
    }

    #[test]
    fn brute_force_partition_agrees_with_weight_table() {
        // log_z_from_stats over an enumeration table is the same sum the
        // streaming brute force computes.
        let model = ErgmModel::new(3).unwrap();
        let theta = ParamVector::new(vec![-0.4, 0.3]);
        let stats = enumerate_stats(&model).unwrap();
        let a = log_z_from_stats(&stats, &theta);
        let b = brute_force_log_z(&model, &theta).unwrap();
        assert!((a - b).abs() < 1e-12);
    }
}
