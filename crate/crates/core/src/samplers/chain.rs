//! Driving kernels for many iterations and persisting the results.
//!
//! A [`ChainTrace`] records everything the diagnostics need: the state
//! path, per-iteration acceptance data, proposal endpoints and wall
//! times. Persistence splits into a deterministic CSV (replayed runs
//! are byte-identical) and a JSON sidecar carrying the kernel
//! configuration, the seed and all timing, which is inherently
//! non-deterministic.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ExchangeKernel, GradRatioSource, NoisyHmcKernel, TractableTarget};
use super::{hmc_iteration, MassMatrix};
use crate::error::Result;
use crate::gibbs_models::GibbsModel;
use crate::params::ParamVector;
use crate::rng;

/// One transition of a Markov kernel.
#[derive(Clone, Debug)]
pub struct KernelStep {
    pub next: ParamVector,
    pub accepted: bool,
    pub log_accept: f64,
    pub proposal: ParamVector,
    pub diverged: bool,
}

/// Kernel configuration echoed into trace sidecars.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KernelInfo {
    pub algorithm: String,
    pub n_draws: Option<usize>,
    pub epsilon: Option<f64>,
    pub leapfrog_steps: Option<usize>,
    pub sweeps: Option<usize>,
}

pub trait TransitionKernel: Sync {
    fn dim(&self) -> usize;
    fn info(&self) -> KernelInfo;
    fn transition<R: Rng + ?Sized>(&self, theta: &ParamVector, rng: &mut R)
        -> Result<KernelStep>;
}

impl<M, S> TransitionKernel for NoisyHmcKernel<'_, M, S>
where
    M: GibbsModel,
    S: GradRatioSource<M>,
{
    fn dim(&self) -> usize {
        self.obs_stats().dim()
    }

    fn info(&self) -> KernelInfo {
        KernelInfo {
            algorithm: "nhmc".into(),
            n_draws: Some(self.source().draws_per_point()),
            epsilon: Some(self.epsilon()),
            leapfrog_steps: Some(self.steps()),
            sweeps: self.source().sweeps(),
        }
    }

    fn transition<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        rng: &mut R,
    ) -> Result<KernelStep> {
        let step = self.step(theta, rng)?;
        Ok(KernelStep {
            next: step.next,
            accepted: step.accepted,
            log_accept: step.log_accept,
            proposal: step.proposal,
            diverged: step.diverged,
        })
    }
}

impl<M: GibbsModel> TransitionKernel for ExchangeKernel<'_, M> {
    fn dim(&self) -> usize {
        self.model_dim()
    }

    fn info(&self) -> KernelInfo {
        KernelInfo {
            algorithm: "nex".into(),
            n_draws: Some(self.n_draws()),
            epsilon: None,
            leapfrog_steps: None,
            sweeps: Some(self.sweeps()),
        }
    }

    fn transition<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        rng: &mut R,
    ) -> Result<KernelStep> {
        let step = self.step(theta, rng)?;
        Ok(KernelStep {
            next: step.next,
            accepted: step.accepted,
            log_accept: step.log_accept,
            proposal: step.proposal,
            diverged: false,
        })
    }
}

/// Plain HMC on a tractable target, as a chain kernel.
#[derive(Clone, Debug)]
pub struct TractableHmcKernel<'a, T: TractableTarget> {
    pub target: &'a T,
    pub mass: MassMatrix,
    pub epsilon: f64,
    pub steps: usize,
}

impl<T: TractableTarget> TransitionKernel for TractableHmcKernel<'_, T> {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn info(&self) -> KernelInfo {
        KernelInfo {
            algorithm: "hmc".into(),
            n_draws: None,
            epsilon: Some(self.epsilon),
            leapfrog_steps: Some(self.steps),
            sweeps: None,
        }
    }

    fn transition<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        rng: &mut R,
    ) -> Result<KernelStep> {
        let step = hmc_iteration(self.target, &self.mass, theta, self.epsilon, self.steps, rng)?;
        Ok(KernelStep {
            next: step.next,
            accepted: step.accepted,
            log_accept: step.log_accept,
            proposal: step.proposal,
            diverged: step.diverged,
        })
    }
}

/// The full record of one chain.
#[derive(Clone, Debug)]
pub struct ChainTrace {
    /// θ₀ … θ_T (length iterations + 1, starting state first).
    pub states: Vec<ParamVector>,
    pub accepted: Vec<bool>,
    pub log_accept: Vec<f64>,
    pub proposals: Vec<ParamVector>,
    pub dt_seconds: Vec<f64>,
    pub diverged: Vec<bool>,
    pub seed: u64,
    pub kernel: KernelInfo,
}

impl ChainTrace {
    pub fn iterations(&self) -> usize {
        self.accepted.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn wall_seconds(&self) -> f64 {
        self.dt_seconds.iter().sum()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
    }

    /// One marginal of the post-burn-in states.
    pub fn marginal(&self, component: usize, burn_in: usize) -> Vec<f64> {
        self.states[(burn_in + 1).min(self.states.len())..]
            .iter()
            .map(|s| s[component])
            .collect()
    }

    /// Post-burn-in states.
    pub fn kept_states(&self, burn_in: usize) -> &[ParamVector] {
        &self.states[(burn_in + 1).min(self.states.len())..]
    }

    /// Deterministic columns only: `iter,theta_*,accepted,log_accept`.
    /// Timing lives in the JSON sidecar.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        let d = self.dim();
        let mut header = String::from("iter");
        for j in 0..d {
            header.push_str(&format!(",theta_{}", j + 1));
        }
        header.push_str(",accepted,log_accept");
        writeln!(out, "{header}")?;
        for i in 0..self.iterations() {
            let mut row = format!("{}", i + 1);
            for j in 0..d {
                row.push_str(&format!(",{}", self.states[i + 1][j]));
            }
            row.push_str(&format!(
                ",{},{}",
                u8::from(self.accepted[i]),
                self.log_accept[i]
            ));
            writeln!(out, "{row}")?;
        }
        Ok(())
    }

    /// Kernel configuration, seed and timing.
    pub fn write_sidecar(&self, path: &Path) -> Result<()> {
        #[derive(Serialize)]
        struct Sidecar<'a> {
            kernel: &'a KernelInfo,
            seed: u64,
            iterations: usize,
            wall_seconds: f64,
            dt_seconds: &'a [f64],
            diverged_count: usize,
        }
        let sidecar = Sidecar {
            kernel: &self.kernel,
            seed: self.seed,
            iterations: self.iterations(),
            wall_seconds: self.wall_seconds(),
            dt_seconds: &self.dt_seconds,
            diverged_count: self.diverged.iter().filter(|d| **d).count(),
        };
        let text = serde_json::to_string_pretty(&sidecar)
            .expect("sidecar serialization cannot fail");
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// Runs one chain for `iterations` steps. The trace is a pure function
/// of (kernel, start, seed).
pub fn run_chain<K: TransitionKernel>(
    kernel: &K,
    theta_init: &ParamVector,
    iterations: usize,
    seed: u64,
) -> Result<ChainTrace> {
    let mut stream = rng::stream(seed);
    let mut states = Vec::with_capacity(iterations + 1);
    states.push(theta_init.clone());
    let mut accepted = Vec::with_capacity(iterations);
    let mut log_accept = Vec::with_capacity(iterations);
    let mut proposals = Vec::with_capacity(iterations);
    let mut dt_seconds = Vec::with_capacity(iterations);
    let mut diverged = Vec::with_capacity(iterations);

    let mut current = theta_init.clone();
    for _ in 0..iterations {
        let t0 = Instant::now();
        let step = kernel.transition(&current, &mut stream)?;
        dt_seconds.push(t0.elapsed().as_secs_f64());
        current = step.next.clone();
        states.push(step.next);
        accepted.push(step.accepted);
        log_accept.push(step.log_accept);
        proposals.push(step.proposal);
        diverged.push(step.diverged);
    }

    Ok(ChainTrace {
        states,
        accepted,
        log_accept,
        proposals,
        dt_seconds,
        diverged,
        seed,
        kernel: kernel.info(),
    })
}

/// Runs independent chains in parallel, one seed each.
pub fn run_chains<K: TransitionKernel>(
    kernel: &K,
    theta_init: &ParamVector,
    iterations: usize,
    seeds: &[u64],
) -> Result<Vec<ChainTrace>> {
    seeds
        .par_iter()
        .map(|seed| run_chain(kernel, theta_init, iterations, *seed))
        .collect()
}
