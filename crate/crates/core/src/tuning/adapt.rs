//! Step-size adaptation drivers for the noisy HMC kernel.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::schedule::leapfrog_steps;
use super::{DualAveraging, DualAveragingOptions};
use crate::error::Result;
use crate::gibbs_models::GibbsModel;
use crate::params::ParamVector;
use crate::samplers::{GradRatioSource, NoisyHmcKernel};

/// Result of the adaptation phase.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StepSizeFit {
    /// Frozen averaged step size.
    pub epsilon: f64,
    /// Steps derived from the frozen ε and the integration time.
    pub leapfrog_steps: usize,
    /// Where the adaptation chain ended.
    pub final_theta: ParamVector,
    /// Mean observed acceptance over the adaptation window.
    pub mean_acceptance: f64,
    pub iterations: usize,
}

/// Bracketing search for a starting step size: from ε = 1, double while
/// single-step acceptance stays above one half, halve while below, until
/// the first crossing.
pub fn find_initial_step_size<M, S, R>(
    kernel: &mut NoisyHmcKernel<'_, M, S>,
    theta: &ParamVector,
    rng: &mut R,
) -> Result<f64>
where
    M: GibbsModel,
    S: GradRatioSource<M>,
    R: Rng + ?Sized,
{
    kernel.set_steps(1);
    let mut eps = 1.0;
    kernel.set_step_size(eps);
    let mut accept = probe_acceptance(kernel, theta, rng)?;
    let going_up = accept > 0.5;
    for _ in 0..30 {
        eps = if going_up { eps * 2.0 } else { eps / 2.0 };
        if !(1e-6..=1e6).contains(&eps) {
            break;
        }
        kernel.set_step_size(eps);
        accept = probe_acceptance(kernel, theta, rng)?;
        if (accept > 0.5) != going_up {
            break;
        }
    }
    Ok(eps)
}

fn probe_acceptance<M, S, R>(
    kernel: &NoisyHmcKernel<'_, M, S>,
    theta: &ParamVector,
    rng: &mut R,
) -> Result<f64>
where
    M: GibbsModel,
    S: GradRatioSource<M>,
    R: Rng + ?Sized,
{
    let trials = 4;
    let mut total = 0.0;
    for _ in 0..trials {
        let step = kernel.step(theta, rng)?;
        total += step.log_accept.exp();
    }
    Ok(total / trials as f64)
}

/// Dual-averaging burn-in: runs the kernel for `iterations` updates,
/// feeding each observed acceptance probability to the recursion and
/// re-deriving the leapfrog step count from the fresh ε every update.
/// Afterwards the kernel is frozen at the averaged step size.
///
/// `max_steps` caps the step count so a transiently tiny ε cannot make
/// single adaptation iterations unboundedly long.
pub fn adapt_step_size<M, S, R>(
    kernel: &mut NoisyHmcKernel<'_, M, S>,
    theta_init: &ParamVector,
    iterations: usize,
    max_steps: usize,
    options: DualAveragingOptions,
    rng: &mut R,
) -> Result<StepSizeFit>
where
    M: GibbsModel,
    S: GradRatioSource<M>,
    R: Rng + ?Sized,
{
    assert!(max_steps >= 1);
    let dim = theta_init.dim();
    let initial = find_initial_step_size(kernel, theta_init, rng)?;
    let mut averaging = DualAveraging::new(initial, options);
    let mut theta = theta_init.clone();
    let mut epsilon = initial;
    let mut accept_sum = 0.0;

    for _ in 0..iterations {
        kernel.set_step_size(epsilon);
        kernel.set_steps(leapfrog_steps(dim, epsilon).min(max_steps));
        let step = kernel.step(&theta, rng)?;
        theta = step.next;
        accept_sum += step.log_accept.exp();
        epsilon = averaging.update(step.log_accept.exp());
    }

    let frozen = averaging.averaged_step();
    let steps = leapfrog_steps(dim, frozen).min(max_steps);
    kernel.set_step_size(frozen);
    kernel.set_steps(steps);
    Ok(StepSizeFit {
        epsilon: frozen,
        leapfrog_steps: steps,
        final_theta: theta,
        mean_acceptance: if iterations == 0 {
            0.0
        } else {
            accept_sum / iterations as f64
        },
        iterations,
    })
}
