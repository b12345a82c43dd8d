//! Hamiltonian Monte Carlo for targets with tractable log density and
//! gradient. Used to validate the integrator and the accept-reject
//! machinery against known distributions before anything noisy enters.

use rand::Rng;

use super::{leapfrog, MassMatrix, PhasePoint};
use crate::error::{Error, Result};
use crate::params::ParamVector;

/// A target π with exact log density and gradient.
pub trait TractableTarget: Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, theta: &ParamVector) -> f64;
    fn grad_log_density(&self, theta: &ParamVector) -> Vec<f64>;
}

/// Independent normal components; the standard validation target.
#[derive(Clone, Debug)]
pub struct GaussianTarget {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
}

impl GaussianTarget {
    pub fn standard(dim: usize) -> Self {
        GaussianTarget {
            mean: vec![0.0; dim],
            variance: vec![1.0; dim],
        }
    }
}

impl TractableTarget for GaussianTarget {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, theta: &ParamVector) -> f64 {
        theta
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(t, (m, v))| -0.5 * (t - m) * (t - m) / v)
            .sum()
    }

    fn grad_log_density(&self, theta: &ParamVector) -> Vec<f64> {
        theta
            .iter()
            .zip(self.mean.iter().zip(&self.variance))
            .map(|(t, (m, v))| -(t - m) / v)
            .collect()
    }
}

/// Outcome of one Metropolis-adjusted HMC iteration.
#[derive(Clone, Debug)]
pub struct HmcStep {
    pub next: ParamVector,
    pub accepted: bool,
    /// min(0, log ρ).
    pub log_accept: f64,
    /// The proposal θ_L, whether or not it was accepted.
    pub proposal: ParamVector,
    /// True when the integrator failed; counted as a rejection.
    pub diverged: bool,
}

/// One iteration: draw r ~ N(0, M), integrate L leapfrog steps, accept
/// the momentum-flipped endpoint with probability
/// 1 ∧ exp(H(θ₀, r₀) − H(θ_L, −r_L)).
pub fn hmc_iteration<T, R>(
    target: &T,
    mass: &MassMatrix,
    theta: &ParamVector,
    epsilon: f64,
    steps: usize,
    rng: &mut R,
) -> Result<HmcStep>
where
    T: TractableTarget,
    R: Rng + ?Sized,
{
    let momentum = mass.sample_momentum(rng);
    let (proposal, energy_drop) =
        match hmc_proposal(target, mass, &PhasePoint::new(theta.clone(), momentum), epsilon, steps)
        {
            Ok(v) => v,
            Err(Error::IntegrationFailure { .. }) => {
                return Ok(HmcStep {
                    next: theta.clone(),
                    accepted: false,
                    log_accept: f64::NEG_INFINITY,
                    proposal: theta.clone(),
                    diverged: true,
                });
            }
            Err(e) => return Err(e),
        };
    let log_accept = energy_drop.min(0.0);
    let accepted = rng.random::<f64>().ln() < log_accept;
    Ok(HmcStep {
        next: if accepted {
            proposal.theta.clone()
        } else {
            theta.clone()
        },
        accepted,
        log_accept,
        proposal: proposal.theta,
        diverged: false,
    })
}

/// The deterministic part of an iteration: integrate from a given
/// phase point and return the momentum-flipped endpoint with the raw
/// energy difference H(start) − H(end) (cap at 0 for an acceptance
/// probability).
pub fn hmc_proposal<T>(
    target: &T,
    mass: &MassMatrix,
    start: &PhasePoint,
    epsilon: f64,
    steps: usize,
) -> Result<(PhasePoint, f64)>
where
    T: TractableTarget,
{
    let path = leapfrog(
        |t| Ok(target.grad_log_density(t).iter().map(|g| -g).collect()),
        mass,
        start,
        epsilon,
        steps,
    )?;
    let end = path.last().unwrap().clone().flip_momentum();
    let h0 = -target.log_density(&start.theta) + mass.kinetic(&start.momentum);
    let h1 = -target.log_density(&end.theta) + mass.kinetic(&end.momentum);
    Ok((end, h0 - h1))
}
