//! Exponential-family Gibbs random fields and their forward samplers.
//!
//! Every model here has a potential that is linear in the parameter,
//! A(θ, x) = θᵀs(x), so the gradient of the potential in θ is the
//! statistic vector s(x) itself, independent of θ. Two concrete models
//! are provided: a K-state Potts lattice ([`PottsModel`]) and an
//! edge/2-star exponential random graph ([`ErgmModel`]).
//!
//! Forward draws from f(·|θ) are produced by finite-sweep single-site
//! Gibbs sampling: each draw starts from an independent uniform
//! configuration and runs a fixed number of full sweeps in lexicographic
//! scan order. The sweep count is a knob of every caller, not a property
//! of the model.

mod ergm;
mod io;
mod potts;

pub use ergm::{ErgmModel, GraphConfig};
pub use io::{read_graph, read_lattice, write_lattice};
pub use potts::{LatticeConfig, PottsModel};

use rand::Rng;
use rayon::prelude::*;

use crate::error::Result;
use crate::params::{ParamVector, SuffStats};
use crate::rng;

/// An exponential-family random field with potential θᵀs(x).
pub trait GibbsModel: Sync {
    type Config: Clone + Send + Sync;

    /// Dimension d of the parameter space.
    fn dim(&self) -> usize;

    /// Number of single-update units (lattice sites or graph dyads).
    fn unit_count(&self) -> usize;

    /// Checks a configuration against the model's structural invariants.
    fn validate(&self, x: &Self::Config) -> Result<()>;

    /// s(x) without validity checks. Configurations produced by the
    /// model's own samplers are valid by construction.
    fn stats_unchecked(&self, x: &Self::Config) -> SuffStats;

    /// s(x), validating the configuration first.
    fn suff_stats(&self, x: &Self::Config) -> Result<SuffStats> {
        self.validate(x)?;
        Ok(self.stats_unchecked(x))
    }

    /// A(θ, x) = θᵀs(x). Exact dot product, no approximation.
    fn potential(&self, theta: &ParamVector, x: &Self::Config) -> Result<f64> {
        theta.check_dim(self.dim())?;
        Ok(theta.dot(&self.suff_stats(x)?))
    }

    /// Full-conditional distribution of one unit given the rest,
    /// as probabilities over its states.
    fn unit_conditional(&self, theta: &ParamVector, x: &Self::Config, unit: usize) -> Vec<f64>;

    /// Resamples one unit from its full conditional.
    fn gibbs_site_update<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        x: &mut Self::Config,
        unit: usize,
        rng: &mut R,
    );

    /// A configuration drawn uniformly over the configuration space.
    fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> Self::Config;

    /// One full Gibbs sweep in fixed lexicographic scan order.
    fn sweep<R: Rng + ?Sized>(&self, theta: &ParamVector, x: &mut Self::Config, rng: &mut R) {
        for unit in 0..self.unit_count() {
            self.gibbs_site_update(theta, x, unit, rng);
        }
    }

    /// `n` forward draws from f(·|θ), each from an independent chain:
    /// uniform start, `sweeps` full sweeps, final state returned.
    ///
    /// Each draw runs on its own substream seeded from `rng`, so the
    /// result is identical whether the draws run sequentially or in
    /// parallel.
    fn forward_sample<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        n: usize,
        sweeps: usize,
        rng: &mut R,
    ) -> Vec<Self::Config> {
        assert!(n >= 1 && sweeps >= 1);
        let seeds: Vec<u64> = (0..n).map(|_| rng.random()).collect();
        let draw = |seed: &u64| {
            let mut sub = rng::stream(*seed);
            let mut x = self.random_config(&mut sub);
            for _ in 0..sweeps {
                self.sweep(theta, &mut x, &mut sub);
            }
            x
        };
        // Parallelism pays only when there is real work to split.
        let work = n * sweeps * self.unit_count();
        if n >= 4 && work >= 100_000 {
            seeds.par_iter().map(draw).collect()
        } else {
            seeds.iter().map(draw).collect()
        }
    }

    /// Total number of configurations, when it fits in a `u64`.
    fn config_count(&self) -> Option<u64>;

    /// The `idx`-th configuration under a fixed enumeration order.
    fn config_from_index(&self, idx: u64) -> Self::Config;
}

/// Samples a discrete distribution given as probabilities.
pub(crate) fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k;
        }
    }
    probs.len() - 1
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn categorical_sampler_covers_support() {
        let mut rng = rng::stream(1);
        let probs = [0.2, 0.5, 0.3];
        let mut counts = [0usize; 3];
        for _ in 0..30_000 {
            counts[sample_categorical(&probs, &mut rng)] += 1;
        }
        for (c, p) in counts.iter().zip(probs) {
            let freq = *c as f64 / 30_000.0;
            assert!((freq - p).abs() < 0.02, "freq {freq} vs {p}");
        }
    }

    #[test]
    fn forward_sample_is_deterministic_given_the_stream() {
        let model = PottsModel::new(3, 3, 2).unwrap();
        let theta = ParamVector::new(vec![0.0, 0.4]);
        let a = model.forward_sample(&theta, 6, 10, &mut rng::stream(9));
        let b = model.forward_sample(&theta, 6, 10, &mut rng::stream(9));
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(
                model.stats_unchecked(x).as_slice(),
                model.stats_unchecked(y).as_slice()
            );
        }
    }
}
