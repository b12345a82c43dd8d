//! Leapfrog (Störmer-Verlet) integration of the Hamiltonian flow.

use super::MassMatrix;
use crate::error::{Error, Result};
use crate::params::ParamVector;

/// A point of the augmented state space (θ, r).
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePoint {
    pub theta: ParamVector,
    pub momentum: Vec<f64>,
}

impl PhasePoint {
    pub fn new(theta: ParamVector, momentum: Vec<f64>) -> Self {
        debug_assert_eq!(theta.dim(), momentum.len());
        PhasePoint { theta, momentum }
    }

    pub fn flip_momentum(mut self) -> Self {
        for r in &mut self.momentum {
            *r = -*r;
        }
        self
    }
}

/// Integrates `steps` leapfrog steps of size `epsilon` and returns the
/// full visited path θ₀ … θ_L with the momenta at whole steps.
///
/// `grad` returns ∇V (the gradient of the negative log target). The
/// half-kick closing one step and the half-kick opening the next are
/// fused into a single ε-kick, which is the same map as composing the
/// three-stage step L times. A non-finite gradient aborts with the
/// failing step index.
pub fn leapfrog<G>(
    mut grad: G,
    mass: &MassMatrix,
    start: &PhasePoint,
    epsilon: f64,
    steps: usize,
) -> Result<Vec<PhasePoint>>
where
    G: FnMut(&ParamVector) -> Result<Vec<f64>>,
{
    assert!(epsilon > 0.0 && steps >= 1);
    let mut path = Vec::with_capacity(steps + 1);
    path.push(start.clone());

    let g0 = checked(grad(&start.theta)?, 0)?;
    let mut half_kicked: Vec<f64> = start
        .momentum
        .iter()
        .zip(&g0)
        .map(|(r, g)| r - 0.5 * epsilon * g)
        .collect();
    let mut theta = start.theta.clone();

    for step in 1..=steps {
        theta = theta.plus_scaled(epsilon, &mass.velocity(&half_kicked));
        let g = checked(grad(&theta)?, step)?;
        let whole: Vec<f64> = half_kicked
            .iter()
            .zip(&g)
            .map(|(r, gi)| r - 0.5 * epsilon * gi)
            .collect();
        path.push(PhasePoint::new(theta.clone(), whole));
        if step < steps {
            for (r, gi) in half_kicked.iter_mut().zip(&g) {
                *r -= epsilon * gi;
            }
        }
    }
    Ok(path)
}

fn checked(grad: Vec<f64>, step: usize) -> Result<Vec<f64>> {
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(Error::IntegrationFailure { step })
    }
}
