//! K-state Potts model on a rectangular lattice with the first-order
//! (4-nearest, no wraparound) neighbourhood.
//!
//! The node potentials carry the sum-to-zero constraint Σₖ αₖ = 0, so
//! the free parameter is θ = (α₁, …, α_{K−1}, β) with α₀ = −Σ_{k≥1} αₖ
//! and d = K. The matching statistics are
//!
//! ```text
//! s(x) = (c₁ − c₀, …, c_{K−1} − c₀, Σ_{i∼j} 1{xᵢ = xⱼ})
//! ```
//!
//! where cₖ counts sites in state k. For K = 2 this is the familiar
//! θ = (α, β) with s_α = Σᵢ (1{xᵢ=1} − 1{xᵢ=0}).

use rand::Rng;

use super::{sample_categorical, GibbsModel};
use crate::error::{Error, Result};
use crate::params::{ParamVector, SuffStats};

/// A realization of the lattice field. Sites are stored column-by-column:
/// site (row r, column c) lives at index `c * height + r`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LatticeConfig {
    pub height: usize,
    pub width: usize,
    pub num_states: u8,
    pub states: Vec<u8>,
}

impl LatticeConfig {
    pub fn constant(height: usize, width: usize, num_states: u8, state: u8) -> Self {
        LatticeConfig {
            height,
            width,
            num_states,
            states: vec![state; height * width],
        }
    }

    pub fn site(&self, row: usize, col: usize) -> u8 {
        self.states[col * self.height + row]
    }

    pub fn set_site(&mut self, row: usize, col: usize, state: u8) {
        self.states[col * self.height + row] = state;
    }
}

/// The Potts model on an `height × width` lattice with `num_states` states.
#[derive(Clone, Debug)]
pub struct PottsModel {
    height: usize,
    width: usize,
    num_states: u8,
}

impl PottsModel {
    pub fn new(height: usize, width: usize, num_states: u8) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidConfiguration(
                "lattice dimensions must be positive".into(),
            ));
        }
        if num_states < 2 {
            return Err(Error::InvalidConfiguration(
                "a Potts model needs at least two states".into(),
            ));
        }
        Ok(PottsModel {
            height,
            width,
            num_states,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn num_states(&self) -> u8 {
        self.num_states
    }

    pub fn site_count(&self) -> usize {
        self.height * self.width
    }

    /// Number of first-order edges: h(w−1) horizontal + w(h−1) vertical.
    pub fn edge_count(&self) -> usize {
        self.height * (self.width - 1) + self.width * (self.height - 1)
    }

    /// Node potentials (α₀, …, α_{K−1}) implied by θ under the
    /// sum-to-zero constraint.
    pub fn node_potentials(&self, theta: &ParamVector) -> Vec<f64> {
        let k = self.num_states as usize;
        let mut alphas = Vec::with_capacity(k);
        let free_sum: f64 = theta.as_slice()[..k - 1].iter().sum();
        alphas.push(-free_sum);
        alphas.extend_from_slice(&theta.as_slice()[..k - 1]);
        alphas
    }

    /// Coupling parameter β (the last component of θ).
    pub fn coupling(&self, theta: &ParamVector) -> f64 {
        theta[self.num_states as usize - 1]
    }

    fn neighbors(&self, site: usize) -> impl Iterator<Item = usize> + '_ {
        let h = self.height;
        let row = site % h;
        let col = site / h;
        let mut out = [usize::MAX; 4];
        let mut n = 0;
        if row > 0 {
            out[n] = site - 1;
            n += 1;
        }
        if row + 1 < h {
            out[n] = site + 1;
            n += 1;
        }
        if col > 0 {
            out[n] = site - h;
            n += 1;
        }
        if col + 1 < self.width {
            out[n] = site + h;
            n += 1;
        }
        out.into_iter().take(n)
    }
}

impl GibbsModel for PottsModel {
    type Config = LatticeConfig;

    fn dim(&self) -> usize {
        self.num_states as usize
    }

    fn unit_count(&self) -> usize {
        self.site_count()
    }

    fn validate(&self, x: &LatticeConfig) -> Result<()> {
        if x.height != self.height || x.width != self.width || x.num_states != self.num_states {
            return Err(Error::InvalidConfiguration(format!(
                "lattice shape {}x{} (K={}) does not match model {}x{} (K={})",
                x.height, x.width, x.num_states, self.height, self.width, self.num_states
            )));
        }
        if x.states.len() != self.site_count() {
            return Err(Error::InvalidConfiguration(format!(
                "lattice has {} sites, expected {}",
                x.states.len(),
                self.site_count()
            )));
        }
        if let Some(s) = x.states.iter().find(|s| **s >= self.num_states) {
            return Err(Error::InvalidConfiguration(format!(
                "site state {} out of range 0..{}",
                s, self.num_states
            )));
        }
        Ok(())
    }

    fn stats_unchecked(&self, x: &LatticeConfig) -> SuffStats {
        let k = self.num_states as usize;
        let mut counts = vec![0i64; k];
        for s in &x.states {
            counts[*s as usize] += 1;
        }
        let mut agree = 0i64;
        for col in 0..self.width {
            for row in 0..self.height {
                let s = x.site(row, col);
                if row + 1 < self.height && x.site(row + 1, col) == s {
                    agree += 1;
                }
                if col + 1 < self.width && x.site(row, col + 1) == s {
                    agree += 1;
                }
            }
        }
        let mut values = Vec::with_capacity(k);
        for state in 1..k {
            values.push((counts[state] - counts[0]) as f64);
        }
        values.push(agree as f64);
        SuffStats::new(values)
    }

    fn unit_conditional(&self, theta: &ParamVector, x: &LatticeConfig, site: usize) -> Vec<f64> {
        let k = self.num_states as usize;
        let alphas = self.node_potentials(theta);
        let beta = self.coupling(theta);
        let mut neighbor_counts = vec![0u32; k];
        for nb in self.neighbors(site) {
            neighbor_counts[x.states[nb] as usize] += 1;
        }
        let mut logits: Vec<f64> = (0..k)
            .map(|state| alphas[state] + beta * neighbor_counts[state] as f64)
            .collect();
        let hi = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for l in &mut logits {
            *l = (*l - hi).exp();
            total += *l;
        }
        for l in &mut logits {
            *l /= total;
        }
        logits
    }

    fn gibbs_site_update<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        x: &mut LatticeConfig,
        site: usize,
        rng: &mut R,
    ) {
        let probs = self.unit_conditional(theta, x, site);
        x.states[site] = sample_categorical(&probs, rng) as u8;
    }

    /// Buffer-reusing sweep; the same updates and random stream as
    /// calling `gibbs_site_update` per site, without the per-site
    /// allocations.
    fn sweep<R: Rng + ?Sized>(&self, theta: &ParamVector, x: &mut LatticeConfig, rng: &mut R) {
        let k = self.num_states as usize;
        let alphas = self.node_potentials(theta);
        let beta = self.coupling(theta);
        let mut neighbor_counts = vec![0u32; k];
        let mut probs = vec![0.0f64; k];
        for site in 0..self.site_count() {
            neighbor_counts.fill(0);
            for nb in self.neighbors(site) {
                neighbor_counts[x.states[nb] as usize] += 1;
            }
            for state in 0..k {
                probs[state] = alphas[state] + beta * neighbor_counts[state] as f64;
            }
            let hi = probs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut total = 0.0;
            for p in probs.iter_mut() {
                *p = (*p - hi).exp();
                total += *p;
            }
            for p in probs.iter_mut() {
                *p /= total;
            }
            x.states[site] = sample_categorical(&probs, rng) as u8;
        }
    }

    fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> LatticeConfig {
        let states = (0..self.site_count())
            .map(|_| rng.random_range(0..self.num_states))
            .collect();
        LatticeConfig {
            height: self.height,
            width: self.width,
            num_states: self.num_states,
            states,
        }
    }

    fn config_count(&self) -> Option<u64> {
        let mut total: u64 = 1;
        for _ in 0..self.site_count() {
            total = total.checked_mul(self.num_states as u64)?;
        }
        Some(total)
    }

    fn config_from_index(&self, mut idx: u64) -> LatticeConfig {
        let k = self.num_states as u64;
        let states = (0..self.site_count())
            .map(|_| {
                let s = (idx % k) as u8;
                idx /= k;
                s
            })
            .collect();
        LatticeConfig {
            height: self.height,
            width: self.width,
            num_states: self.num_states,
            states,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::{DMatrix, RowDVector};

    #[test]
    fn stats_on_small_lattices() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let all_ones = LatticeConfig::constant(2, 2, 2, 1);
        let s = model.suff_stats(&all_ones).unwrap();
        assert_eq!(s.as_slice(), &[4.0, 4.0]);

        let theta = ParamVector::new(vec![0.0, 0.5]);
        assert_eq!(model.potential(&theta, &all_ones).unwrap(), 2.0);
        let zero = ParamVector::zeros(2);
        assert_eq!(model.potential(&zero, &all_ones).unwrap(), 0.0);
    }

    #[test]
    fn single_site_lattice_is_degenerate_but_valid() {
        let model = PottsModel::new(1, 1, 2).unwrap();
        assert_eq!(model.edge_count(), 0);
        let x = LatticeConfig::constant(1, 1, 2, 1);
        let s = model.suff_stats(&x).unwrap();
        assert_eq!(s.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn edge_count_matches_hand_count() {
        // 2 rows x 3 columns: 4 horizontal + 3 vertical edges.
        let model = PottsModel::new(2, 3, 2).unwrap();
        assert_eq!(model.edge_count(), 7);
    }

    #[test]
    fn invalid_configurations_are_rejected() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let wrong_shape = LatticeConfig::constant(3, 2, 2, 0);
        assert!(matches!(
            model.suff_stats(&wrong_shape),
            Err(Error::InvalidConfiguration(_))
        ));
        let mut bad_state = LatticeConfig::constant(2, 2, 2, 0);
        bad_state.states[1] = 2;
        assert!(model.suff_stats(&bad_state).is_err());
    }

    #[test]
    fn conditional_is_uniform_without_interaction() {
        let model = PottsModel::new(3, 3, 3).unwrap();
        let x = LatticeConfig::constant(3, 3, 3, 1);
        let probs = model.unit_conditional(&ParamVector::zeros(3), &x, 4);
        for p in probs {
            assert!((p - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn conditional_with_four_agreeing_neighbors() {
        // Interior site, all 4 neighbors in state 1, alpha = 0:
        // p(x = 1) = e^{4 beta} / (e^{4 beta} + 1).
        let model = PottsModel::new(3, 3, 2).unwrap();
        let x = LatticeConfig::constant(3, 3, 2, 1);
        let beta = 0.7;
        let probs = model.unit_conditional(&ParamVector::new(vec![0.0, beta]), &x, 4);
        let expected = (4.0 * beta).exp() / ((4.0 * beta).exp() + 1.0);
        assert!((probs[1] - expected).abs() < 1e-12);
    }

    #[test]
    fn potential_is_linear_and_grad_matches_stats() {
        let model = PottsModel::new(3, 4, 3).unwrap();
        let mut rng = rng::stream(5);
        for _ in 0..20 {
            let x = model.random_config(&mut rng);
            let a = ParamVector::new(vec![0.3, -0.2, 0.6]);
            let b = ParamVector::new(vec![-0.1, 0.4, 0.2]);
            let sum = a.plus_scaled(1.0, b.as_slice());
            let pa = model.potential(&a, &x).unwrap();
            let pb = model.potential(&b, &x).unwrap();
            let ps = model.potential(&sum, &x).unwrap();
            assert!((ps - pa - pb).abs() < 1e-12);

            // Finite differences of the potential recover s(x).
            let s = model.stats_unchecked(&x);
            let h = 1e-6;
            for j in 0..3 {
                let mut up = a.as_slice().to_vec();
                let mut dn = up.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (model.potential(&ParamVector::new(up), &x).unwrap()
                    - model.potential(&ParamVector::new(dn), &x).unwrap())
                    / (2.0 * h);
                assert!((fd - s[j]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn sweep_agrees_with_per_site_updates() {
        let model = PottsModel::new(4, 5, 3).unwrap();
        let theta = ParamVector::new(vec![0.2, -0.3, 0.5]);
        let mut a = LatticeConfig::constant(4, 5, 3, 0);
        let mut b = a.clone();
        let mut rng_a = rng::stream(33);
        let mut rng_b = rng::stream(33);
        for _ in 0..15 {
            model.sweep(&theta, &mut a, &mut rng_a);
            for site in 0..model.unit_count() {
                model.gibbs_site_update(&theta, &mut b, site, &mut rng_b);
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn sampled_statistics_stay_in_bounds() {
        let model = PottsModel::new(4, 4, 2).unwrap();
        let theta = ParamVector::new(vec![0.2, 0.6]);
        let mut rng = rng::stream(11);
        let n_sites = model.site_count() as f64;
        let n_edges = model.edge_count() as f64;
        for x in model.forward_sample(&theta, 50, 20, &mut rng) {
            let s = model.stats_unchecked(&x);
            assert!(s[0] >= -n_sites && s[0] <= n_sites);
            assert!(s[1] >= 0.0 && s[1] <= n_edges);
        }
    }

    #[test]
    fn forward_sample_without_interaction_matches_independence() {
        // theta = 0: every site is uniform, each edge agrees with
        // probability 1/2, so E[s_beta] = edge_count / 2 = 12 on 4x4.
        let model = PottsModel::new(4, 4, 2).unwrap();
        let mut rng = rng::stream(3);
        let draws = model.forward_sample(&ParamVector::zeros(2), 10_000, 1, &mut rng);
        let values: Vec<f64> = draws.iter().map(|x| model.stats_unchecked(x)[1]).collect();
        let mean = crate::math::mean(&values);
        let sd = crate::math::sample_variance(&values).sqrt();
        let se = sd / (values.len() as f64).sqrt();
        assert!(
            (mean - 12.0).abs() < 3.0 * se,
            "mean {mean}, se {se}"
        );
    }

    /// Composing the per-site conditional kernels over one sweep leaves
    /// the exact distribution exp(theta' s(x)) / Z invariant.
    #[test]
    fn one_sweep_kernel_preserves_the_exact_distribution() {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let theta = ParamVector::new(vec![0.3, 0.8]);
        let count = model.config_count().unwrap() as usize;
        let configs: Vec<LatticeConfig> =
            (0..count as u64).map(|i| model.config_from_index(i)).collect();

        // Exact distribution.
        let weights: Vec<f64> = configs
            .iter()
            .map(|x| theta.dot(&model.stats_unchecked(x)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let pi = RowDVector::from_iterator(count, weights.iter().map(|w| w / z));

        // Index of a configuration under the enumeration order.
        let index_of = |x: &LatticeConfig| -> usize {
            x.states
                .iter()
                .rev()
                .fold(0usize, |acc, s| acc * 2 + *s as usize)
        };

        let mut sweep = DMatrix::<f64>::identity(count, count);
        for site in 0..model.unit_count() {
            let mut kernel = DMatrix::<f64>::zeros(count, count);
            for (row, x) in configs.iter().enumerate() {
                let probs = model.unit_conditional(&theta, x, site);
                for (state, p) in probs.iter().enumerate() {
                    let mut y = x.clone();
                    y.states[site] = state as u8;
                    kernel[(row, index_of(&y))] += p;
                }
            }
            sweep *= kernel;
        }

        let after = &pi * &sweep;
        let max_dev = (after - pi).amax();
        assert!(max_dev < 1e-12, "stationarity violated by {max_dev}");
    }
}
