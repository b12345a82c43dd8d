//! Posterior-mode search by stochastic approximation.
//!
//! Two schemes are provided. The Ruppert-Polyak search uses a slowly
//! decaying step a_n = a₀/n^0.6, projects every iterate into the prior
//! support and returns the average of the trailing half of the iterate
//! sequence; it stops when an update falls below a threshold. The
//! Robbins-Monro scheme uses the harmonic step α/i for a fixed number
//! of iterations and returns the last iterate unaveraged.

use rand::Rng;

use crate::error::{Error, Result};
use crate::estimators::AuxiliaryBatch;
use crate::gibbs_models::GibbsModel;
use crate::params::{mean_stats, ParamVector, SuffStats};
use crate::prior::Prior;

/// Defaults for the Robbins-Monro scheme.
pub const ROBBINS_MONRO_ITERS: usize = 200;
pub const ROBBINS_MONRO_GAIN: f64 = 1.0;

#[derive(Clone, Copy, Debug)]
pub struct RuppertPolyakOptions {
    /// a₀ in a_n = a₀ / n^exponent.
    pub step_scale: f64,
    pub step_exponent: f64,
    /// Stop once ‖θ_{n+1} − θ_n‖ falls below this.
    pub stop_threshold: f64,
    pub max_iterations: usize,
}

impl Default for RuppertPolyakOptions {
    fn default() -> Self {
        RuppertPolyakOptions {
            step_scale: 0.1,
            step_exponent: 0.6,
            stop_threshold: 1e-3,
            max_iterations: 5_000,
        }
    }
}

/// A mode estimate with its stopping status.
#[derive(Clone, Debug)]
pub struct MapEstimate {
    pub theta: ParamVector,
    pub iterations: usize,
    /// False when the iteration cap was hit before the stop threshold.
    pub converged: bool,
}

/// Ruppert-Polyak search over a user-supplied stochastic gradient.
pub fn map_search_ruppert_polyak_with<G, R>(
    mut grad: G,
    prior: &Prior,
    theta_init: &ParamVector,
    options: RuppertPolyakOptions,
    rng: &mut R,
) -> Result<MapEstimate>
where
    G: FnMut(&ParamVector, &mut R) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    let mut current = prior.project(theta_init);
    let mut iterates: Vec<ParamVector> = Vec::new();
    let mut converged = false;

    for n in 1..=options.max_iterations {
        let g = grad(&current, rng)?;
        if !g.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteIterate { step: n });
        }
        let gain = options.step_scale / (n as f64).powf(options.step_exponent);
        let next = prior.project(&current.plus_scaled(gain, &g));
        let moved = next.distance(&current);
        current = next;
        iterates.push(current.clone());
        if moved < options.stop_threshold {
            converged = true;
            break;
        }
    }

    // Polyak average of the trailing half of the iterate sequence.
    let tail = &iterates[iterates.len() / 2..];
    let dim = theta_init.dim();
    let mut avg = vec![0.0; dim];
    for theta in tail {
        for (a, v) in avg.iter_mut().zip(theta.iter()) {
            *a += v / tail.len() as f64;
        }
    }
    Ok(MapEstimate {
        theta: ParamVector::new(avg),
        iterations: iterates.len(),
        converged,
    })
}

/// Ruppert-Polyak search with the gradient estimated from `n_grad`
/// forward draws per step.
#[allow(clippy::too_many_arguments)]
pub fn map_search_ruppert_polyak<M, R>(
    model: &M,
    x_obs: &M::Config,
    prior: &Prior,
    n_grad: usize,
    sweeps: usize,
    theta_init: &ParamVector,
    options: RuppertPolyakOptions,
    rng: &mut R,
) -> Result<MapEstimate>
where
    M: GibbsModel,
    R: Rng + ?Sized,
{
    let obs_stats = model.suff_stats(x_obs)?;
    map_search_ruppert_polyak_with(
        |theta, rng| Ok(noisy_gradient(model, &obs_stats, prior, theta, n_grad, sweeps, rng)),
        prior,
        theta_init,
        options,
        rng,
    )
}

/// Robbins-Monro over a user-supplied stochastic gradient:
/// θ^{(i+1)} = θ^{(i)} + (α/i) ĝ(θ^{(i)}) for i = 1…iters, returning
/// the final iterate.
pub fn map_search_robbins_monro_with<G, R>(
    mut grad: G,
    theta_init: &ParamVector,
    iterations: usize,
    gain: f64,
    rng: &mut R,
) -> Result<ParamVector>
where
    G: FnMut(&ParamVector, &mut R) -> Result<Vec<f64>>,
    R: Rng + ?Sized,
{
    assert!(iterations >= 1);
    let mut current = theta_init.clone();
    for i in 1..=iterations {
        let g = grad(&current, rng)?;
        current = current.plus_scaled(gain / i as f64, &g);
        if !current.is_finite() {
            return Err(Error::NonFiniteIterate { step: i });
        }
    }
    Ok(current)
}

/// Robbins-Monro with the gradient estimated from `n_grad` forward
/// draws per step (flat-prior gradient: s(x_obs) − mean of batch).
#[allow(clippy::too_many_arguments)]
pub fn map_search_robbins_monro<M, R>(
    model: &M,
    x_obs: &M::Config,
    n_grad: usize,
    sweeps: usize,
    theta_init: &ParamVector,
    iterations: usize,
    gain: f64,
    rng: &mut R,
) -> Result<ParamVector>
where
    M: GibbsModel,
    R: Rng + ?Sized,
{
    let obs_stats = model.suff_stats(x_obs)?;
    let flat = Prior::Flat { dim: model.dim() };
    map_search_robbins_monro_with(
        |theta, rng| Ok(noisy_gradient(model, &obs_stats, &flat, theta, n_grad, sweeps, rng)),
        theta_init,
        iterations,
        gain,
        rng,
    )
}

fn noisy_gradient<M, R>(
    model: &M,
    obs_stats: &SuffStats,
    prior: &Prior,
    theta: &ParamVector,
    n_grad: usize,
    sweeps: usize,
    rng: &mut R,
) -> Vec<f64>
where
    M: GibbsModel,
    R: Rng + ?Sized,
{
    let batch = AuxiliaryBatch::simulate(model, theta, n_grad, sweeps, rng);
    let mean = mean_stats(batch.stats());
    let prior_grad = prior.grad_log_density(theta);
    obs_stats
        .iter()
        .zip(&mean)
        .zip(prior_grad)
        .map(|((o, m), p)| o - m + p)
        .collect()
}
