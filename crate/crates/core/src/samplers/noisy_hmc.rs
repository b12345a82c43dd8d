//! Hamiltonian Monte Carlo with estimated gradients and an estimated
//! acceptance ratio, for posteriors whose likelihood normalising
//! constant is intractable.
//!
//! One iteration: draw a momentum, draw an auxiliary batch at the
//! current point for the opening half-kick, then alternate drifts and
//! kicks for L steps. Every drift lands on a new point θ_ℓ, where a
//! fresh batch provides both the kick gradient and the importance
//! sampling factor for the segment (θ_{ℓ−1} → θ_ℓ). The acceptance
//! ratio multiplies the per-segment factors — the path-wise ratio
//! estimate — into the tractable part of the Metropolis ratio:
//!
//! ```text
//! log ρ̂ = (θ_L − θ₀)ᵀ s(x_obs)
//!        + log N(r_L | 0, M) − log N(r | 0, M)
//!        + log p(θ_L) − log p(θ₀)
//!        + Σ_ℓ log Ẑ(θ_{ℓ−1})/Z(θ_ℓ)
//! ```
//!
//! with r the momentum before the opening half-kick. Exchanging the
//! Monte Carlo source for an exact oracle (on instances where Z is
//! computable) makes the iteration coincide with plain HMC, which is
//! how the kernel is validated.

use rand::Rng;

use super::MassMatrix;
use crate::error::{Error, Result};
use crate::estimators::{grad_from_parts, segment_log_ratio, AuxiliaryBatch};
use crate::exact_oracle::{grad_log_z, GRAD_STEP};
use crate::gibbs_models::GibbsModel;
use crate::params::{ParamVector, SuffStats};
use crate::prior::Prior;

/// What a source must deliver at every visited point: an estimate of
/// E_θ[s(X)] for the kick, and for points after the first the log of
/// the arriving segment's ratio estimate.
#[derive(Clone, Debug)]
pub struct SourceStep<C> {
    pub mean_stats: Vec<f64>,
    pub segment_log_ratio: Option<f64>,
    /// The draws behind the estimates, when the caller asked to keep them.
    pub batch: Option<AuxiliaryBatch<C>>,
}

pub trait GradRatioSource<M: GibbsModel>: Sync {
    fn step<R: Rng + ?Sized>(
        &self,
        model: &M,
        prev: Option<&ParamVector>,
        theta: &ParamVector,
        keep_batch: bool,
        rng: &mut R,
    ) -> Result<SourceStep<M::Config>>;

    /// Auxiliary draws consumed per visited point (for cost accounting).
    fn draws_per_point(&self) -> usize;

    /// Gibbs sweeps per auxiliary draw, when the source simulates.
    fn sweeps(&self) -> Option<usize> {
        None
    }
}

/// The production source: N forward draws per visited point.
#[derive(Clone, Copy, Debug)]
pub struct MonteCarloSource {
    pub n_draws: usize,
    pub sweeps: usize,
}

impl<M: GibbsModel> GradRatioSource<M> for MonteCarloSource {
    fn step<R: Rng + ?Sized>(
        &self,
        model: &M,
        prev: Option<&ParamVector>,
        theta: &ParamVector,
        keep_batch: bool,
        rng: &mut R,
    ) -> Result<SourceStep<M::Config>> {
        let batch = AuxiliaryBatch::simulate(model, theta, self.n_draws, self.sweeps, rng);
        Ok(SourceStep {
            mean_stats: batch.mean_stats(),
            segment_log_ratio: prev.map(|p| segment_log_ratio(p, theta, &batch)),
            batch: keep_batch.then_some(batch),
        })
    }

    fn draws_per_point(&self) -> usize {
        self.n_draws
    }

    fn sweeps(&self) -> Option<usize> {
        Some(self.sweeps)
    }
}

/// An oracle-backed source: exact E_θ[s(X)] via finite differences of a
/// log-partition function and exact segment ratios. Available only on
/// instances where log Z is computable; exists to validate the kernel.
#[derive(Clone, Debug)]
pub struct ExactSource<F> {
    log_z: F,
}

impl<F> ExactSource<F>
where
    F: Fn(&ParamVector) -> Result<f64> + Sync,
{
    pub fn new(log_z: F) -> Self {
        ExactSource { log_z }
    }
}

impl<M, F> GradRatioSource<M> for ExactSource<F>
where
    M: GibbsModel,
    F: Fn(&ParamVector) -> Result<f64> + Sync,
{
    fn step<R: Rng + ?Sized>(
        &self,
        _model: &M,
        prev: Option<&ParamVector>,
        theta: &ParamVector,
        _keep_batch: bool,
        _rng: &mut R,
    ) -> Result<SourceStep<M::Config>> {
        let mean_stats = grad_log_z(&self.log_z, theta, GRAD_STEP)?;
        let segment_log_ratio = match prev {
            Some(p) => Some((self.log_z)(p)? - (self.log_z)(theta)?),
            None => None,
        };
        Ok(SourceStep {
            mean_stats,
            segment_log_ratio,
            batch: None,
        })
    }

    fn draws_per_point(&self) -> usize {
        0
    }
}

/// Outcome of one noisy HMC iteration.
#[derive(Clone, Debug)]
pub struct NoisyHmcStep<C> {
    pub next: ParamVector,
    pub accepted: bool,
    /// min(0, log ρ̂).
    pub log_accept: f64,
    /// The endpoint θ_L, whether or not it was accepted.
    pub proposal: ParamVector,
    pub diverged: bool,
    /// Momentum drawn at the start of the iteration (before the first
    /// half-kick).
    pub momentum: Vec<f64>,
    /// Momentum at the endpoint, after the closing half-kick.
    pub final_momentum: Vec<f64>,
    /// Per-segment log ratio factors, one per leapfrog step.
    pub segment_log_factors: Vec<f64>,
    /// θ₀ … θ_L when recording was requested.
    pub path: Option<Vec<ParamVector>>,
    /// Gradient estimates at θ₀ … θ_L when recording was requested.
    pub gradient_estimates: Option<Vec<Vec<f64>>>,
    /// Batches at θ₁ … θ_L when recording was requested (the θ₀ batch
    /// only feeds the first kick and is not part of any segment).
    pub batches: Option<Vec<AuxiliaryBatch<C>>>,
}

/// The noisy HMC transition kernel for one model, observation and prior.
#[derive(Clone, Debug)]
pub struct NoisyHmcKernel<'a, M: GibbsModel, S> {
    model: &'a M,
    obs_stats: SuffStats,
    prior: &'a Prior,
    mass: MassMatrix,
    epsilon: f64,
    steps: usize,
    source: S,
}

impl<'a, M, S> NoisyHmcKernel<'a, M, S>
where
    M: GibbsModel,
    S: GradRatioSource<M>,
{
    pub fn new(
        model: &'a M,
        x_obs: &M::Config,
        prior: &'a Prior,
        mass: MassMatrix,
        epsilon: f64,
        steps: usize,
        source: S,
    ) -> Result<Self> {
        if prior.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: prior.dim(),
            });
        }
        if mass.dim() != model.dim() {
            return Err(Error::DimensionMismatch {
                expected: model.dim(),
                got: mass.dim(),
            });
        }
        assert!(epsilon > 0.0 && steps >= 1);
        Ok(NoisyHmcKernel {
            model,
            obs_stats: model.suff_stats(x_obs)?,
            prior,
            mass,
            epsilon,
            steps,
            source,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn set_step_size(&mut self, epsilon: f64) {
        assert!(epsilon > 0.0);
        self.epsilon = epsilon;
    }

    pub fn set_steps(&mut self, steps: usize) {
        assert!(steps >= 1);
        self.steps = steps;
    }

    pub fn mass(&self) -> &MassMatrix {
        &self.mass
    }

    pub fn obs_stats(&self) -> &SuffStats {
        &self.obs_stats
    }

    pub fn source(&self) -> &S {
        &self.source
    }

    /// Auxiliary draws per iteration: one batch at each of the L+1
    /// visited points.
    pub fn draws_per_iteration(&self) -> usize {
        self.source.draws_per_point() * (self.steps + 1)
    }

    /// One iteration with a fresh momentum.
    pub fn step<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        rng: &mut R,
    ) -> Result<NoisyHmcStep<M::Config>> {
        let momentum = self.mass.sample_momentum(rng);
        self.step_from(theta, momentum, false, rng)
    }

    /// One iteration with a fresh momentum, keeping the path, the
    /// per-point gradient estimates and the batches.
    pub fn step_recorded<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        rng: &mut R,
    ) -> Result<NoisyHmcStep<M::Config>> {
        let momentum = self.mass.sample_momentum(rng);
        self.step_from(theta, momentum, true, rng)
    }

    /// The iteration body, from an explicit starting momentum.
    pub fn step_from<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        momentum: Vec<f64>,
        record: bool,
        rng: &mut R,
    ) -> Result<NoisyHmcStep<M::Config>> {
        theta.check_dim(self.model.dim())?;
        let eps = self.epsilon;

        let mut path = record.then(|| vec![theta.clone()]);
        let mut grads = record.then(Vec::new);
        let mut batches = record.then(Vec::new);

        let opening = self
            .source
            .step(self.model, None, theta, false, rng)?;
        let g0 = grad_from_parts(&self.obs_stats, &opening.mean_stats, self.prior, theta);
        if let Some(gs) = grads.as_mut() {
            gs.push(g0.clone());
        }
        if !g0.iter().all(|g| g.is_finite()) {
            return Ok(self.rejected_step(theta, momentum, f64::NEG_INFINITY, true, rng));
        }

        let mut half: Vec<f64> = momentum
            .iter()
            .zip(&g0)
            .map(|(r, g)| r + 0.5 * eps * g)
            .collect();
        let mut current = theta.clone();
        let mut segment_log_factors = Vec::with_capacity(self.steps);
        let mut final_momentum = Vec::new();

        for step in 1..=self.steps {
            let prev = current.clone();
            current = current.plus_scaled(eps, &self.mass.velocity(&half));
            if !current.is_finite() {
                return Ok(self.rejected_step(theta, momentum, f64::NEG_INFINITY, true, rng));
            }
            let src = self
                .source
                .step(self.model, Some(&prev), &current, record, rng)?;
            segment_log_factors.push(
                src.segment_log_ratio
                    .expect("source must produce a segment factor after the first point"),
            );
            let g = grad_from_parts(&self.obs_stats, &src.mean_stats, self.prior, &current);
            if !g.iter().all(|v| v.is_finite()) {
                return Ok(self.rejected_step(theta, momentum, f64::NEG_INFINITY, true, rng));
            }
            if let Some(ps) = path.as_mut() {
                ps.push(current.clone());
            }
            if let Some(gs) = grads.as_mut() {
                gs.push(g.clone());
            }
            if let Some(bs) = batches.as_mut() {
                bs.push(src.batch.expect("recording source must keep batches"));
            }
            if step < self.steps {
                for (r, gi) in half.iter_mut().zip(&g) {
                    *r += eps * gi;
                }
            } else {
                final_momentum = half
                    .iter()
                    .zip(&g)
                    .map(|(r, gi)| r + 0.5 * eps * gi)
                    .collect();
            }
        }

        let proposal = current;
        let log_rho = self.obs_stats.iter().zip(proposal.iter().zip(theta.iter()))
            .map(|(s, (p, t))| s * (p - t))
            .sum::<f64>()
            + self.mass.kinetic(&momentum)
            - self.mass.kinetic(&final_momentum)
            + self.prior.log_density(&proposal)
            - self.prior.log_density(theta)
            + segment_log_factors.iter().sum::<f64>();
        let log_accept = log_rho.min(0.0);
        let accepted = rng.random::<f64>().ln() < log_accept;

        Ok(NoisyHmcStep {
            next: if accepted {
                proposal.clone()
            } else {
                theta.clone()
            },
            accepted,
            log_accept,
            proposal,
            diverged: false,
            momentum,
            final_momentum,
            segment_log_factors,
            path,
            gradient_estimates: grads,
            batches,
        })
    }

    fn rejected_step<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        momentum: Vec<f64>,
        log_accept: f64,
        diverged: bool,
        rng: &mut R,
    ) -> NoisyHmcStep<M::Config> {
        // Consume the acceptance draw so the stream advances uniformly.
        let _ = rng.random::<f64>();
        NoisyHmcStep {
            next: theta.clone(),
            accepted: false,
            log_accept,
            proposal: theta.clone(),
            diverged,
            momentum,
            final_momentum: Vec::new(),
            segment_log_factors: Vec::new(),
            path: None,
            gradient_estimates: None,
            batches: None,
        }
    }
}
