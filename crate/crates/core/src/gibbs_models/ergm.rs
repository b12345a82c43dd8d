//! Exponential random graph model over undirected simple graphs with
//! edge-count and 2-star statistics,
//!
//! ```text
//! s(x) = ( Σ_{i<j} x_ij ,  Σ_i Σ_{j<k} x_ij x_ik )
//! ```
//!
//! The 2-star count equals Σᵢ C(dᵢ, 2) over node degrees, so the change
//! statistic of switching dyad (i, j) on is (1, dᵢ + dⱼ) with degrees
//! taken while the dyad is off. Single-dyad Gibbs updates are therefore
//! a Bernoulli draw with log-odds θᵀΔs.

use rand::Rng;

use super::GibbsModel;
use crate::error::{Error, Result};
use crate::params::{ParamVector, SuffStats};

/// An undirected simple graph stored as a full symmetric adjacency
/// matrix with zero diagonal.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphConfig {
    pub n: usize,
    adjacency: Vec<bool>,
}

impl GraphConfig {
    pub fn empty(n: usize) -> Self {
        GraphConfig {
            n,
            adjacency: vec![false; n * n],
        }
    }

    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = GraphConfig::empty(n);
        for &(i, j) in edges {
            if i == j {
                return Err(Error::InvalidConfiguration(format!("self loop at node {i}")));
            }
            if i >= n || j >= n {
                return Err(Error::InvalidConfiguration(format!(
                    "edge ({i}, {j}) outside 0..{n}"
                )));
            }
            g.set_edge(i, j, true);
        }
        Ok(g)
    }

    pub fn edge(&self, i: usize, j: usize) -> bool {
        self.adjacency[i * self.n + j]
    }

    pub fn set_edge(&mut self, i: usize, j: usize, present: bool) {
        self.adjacency[i * self.n + j] = present;
        self.adjacency[j * self.n + i] = present;
    }

    pub fn degree(&self, i: usize) -> usize {
        (0..self.n).filter(|&j| self.edge(i, j)).count()
    }

    /// Raw adjacency entries, row-major. Exposed for validation.
    pub fn raw(&self) -> &[bool] {
        &self.adjacency
    }

    /// Builds from a raw row-major matrix, validating shape only.
    pub fn from_raw(n: usize, adjacency: Vec<bool>) -> Result<Self> {
        if adjacency.len() != n * n {
            return Err(Error::InvalidConfiguration(format!(
                "adjacency has {} entries, expected {}",
                adjacency.len(),
                n * n
            )));
        }
        Ok(GraphConfig { n, adjacency })
    }
}

/// The two-statistic ERGM on undirected graphs with `n` nodes.
#[derive(Clone, Debug)]
pub struct ErgmModel {
    n: usize,
}

impl ErgmModel {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfiguration(
                "a graph needs at least one node".into(),
            ));
        }
        Ok(ErgmModel { n })
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn dyad_count(&self) -> usize {
        self.n * (self.n - 1) / 2
    }

    /// The (i, j) pair of the `idx`-th dyad in lexicographic order
    /// (0,1), (0,2), …, (0,n−1), (1,2), ….
    pub fn dyad_pair(&self, mut idx: usize) -> (usize, usize) {
        for i in 0..self.n {
            let row = self.n - 1 - i;
            if idx < row {
                return (i, i + 1 + idx);
            }
            idx -= row;
        }
        panic!("dyad index out of range");
    }

    /// Change statistic of switching dyad (i, j) on, with degrees taken
    /// while the dyad is off.
    fn toggle_stats(&self, x: &GraphConfig, i: usize, j: usize) -> [f64; 2] {
        let mut d = 0usize;
        for k in 0..self.n {
            if k != j && x.edge(i, k) {
                d += 1;
            }
            if k != i && x.edge(j, k) {
                d += 1;
            }
        }
        [1.0, d as f64]
    }
}

impl GibbsModel for ErgmModel {
    type Config = GraphConfig;

    fn dim(&self) -> usize {
        2
    }

    fn unit_count(&self) -> usize {
        self.dyad_count()
    }

    fn validate(&self, x: &GraphConfig) -> Result<()> {
        if x.n != self.n || x.adjacency.len() != self.n * self.n {
            return Err(Error::InvalidConfiguration(format!(
                "graph has {} nodes, expected {}",
                x.n, self.n
            )));
        }
        for i in 0..self.n {
            if x.edge(i, i) {
                return Err(Error::InvalidConfiguration(format!(
                    "nonzero diagonal at node {i}"
                )));
            }
            for j in (i + 1)..self.n {
                if x.edge(i, j) != x.edge(j, i) {
                    return Err(Error::InvalidConfiguration(format!(
                        "asymmetric adjacency at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(())
    }

    fn stats_unchecked(&self, x: &GraphConfig) -> SuffStats {
        let mut edges = 0u64;
        let mut two_stars = 0u64;
        for i in 0..self.n {
            let d = x.degree(i) as u64;
            two_stars += d * (d.saturating_sub(1)) / 2;
            for j in (i + 1)..self.n {
                if x.edge(i, j) {
                    edges += 1;
                }
            }
        }
        SuffStats::new(vec![edges as f64, two_stars as f64])
    }

    fn unit_conditional(&self, theta: &ParamVector, x: &GraphConfig, unit: usize) -> Vec<f64> {
        let (i, j) = self.dyad_pair(unit);
        let delta = self.toggle_stats(x, i, j);
        let z = theta[0] * delta[0] + theta[1] * delta[1];
        // Stable logistic.
        let p_on = if z >= 0.0 {
            1.0 / (1.0 + (-z).exp())
        } else {
            let e = z.exp();
            e / (1.0 + e)
        };
        vec![1.0 - p_on, p_on]
    }

    fn gibbs_site_update<R: Rng + ?Sized>(
        &self,
        theta: &ParamVector,
        x: &mut GraphConfig,
        unit: usize,
        rng: &mut R,
    ) {
        let probs = self.unit_conditional(theta, x, unit);
        let (i, j) = self.dyad_pair(unit);
        x.set_edge(i, j, rng.random::<f64>() < probs[1]);
    }

    fn random_config<R: Rng + ?Sized>(&self, rng: &mut R) -> GraphConfig {
        let mut g = GraphConfig::empty(self.n);
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                g.set_edge(i, j, rng.random::<bool>());
            }
        }
        g
    }

    /// Degree-tracking sweep; equivalent to updating dyads one by one
    /// but avoids rescanning adjacency rows per dyad.
    fn sweep<R: Rng + ?Sized>(&self, theta: &ParamVector, x: &mut GraphConfig, rng: &mut R) {
        let mut degrees: Vec<usize> = (0..self.n).map(|i| x.degree(i)).collect();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                let present = x.edge(i, j);
                let di = degrees[i] - usize::from(present);
                let dj = degrees[j] - usize::from(present);
                let z = theta[0] + theta[1] * (di + dj) as f64;
                let p_on = if z >= 0.0 {
                    1.0 / (1.0 + (-z).exp())
                } else {
                    let e = z.exp();
                    e / (1.0 + e)
                };
                let now = rng.random::<f64>() < p_on;
                if now != present {
                    x.set_edge(i, j, now);
                    let shift = if now { 1isize } else { -1 };
                    degrees[i] = (degrees[i] as isize + shift) as usize;
                    degrees[j] = (degrees[j] as isize + shift) as usize;
                }
            }
        }
    }

    fn config_count(&self) -> Option<u64> {
        let dyads = self.dyad_count();
        if dyads >= 64 {
            return None;
        }
        Some(1u64 << dyads)
    }

    fn config_from_index(&self, idx: u64) -> GraphConfig {
        let mut g = GraphConfig::empty(self.n);
        for unit in 0..self.dyad_count() {
            if idx >> unit & 1 == 1 {
                let (i, j) = self.dyad_pair(unit);
                g.set_edge(i, j, true);
            }
        }
        g
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use nalgebra::{DMatrix, RowDVector};

    #[test]
    fn stats_on_small_graphs() {
        let model = ErgmModel::new(4).unwrap();
        let empty = GraphConfig::empty(4);
        assert_eq!(model.suff_stats(&empty).unwrap().as_slice(), &[0.0, 0.0]);

        // Complete graph on 4 nodes: C(4,2) = 6 edges and 4 * C(3,2) = 12 two-stars.
        let complete = GraphConfig::from_edges(
            4,
            &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)],
        )
        .unwrap();
        assert_eq!(model.suff_stats(&complete).unwrap().as_slice(), &[6.0, 12.0]);
    }

    #[test]
    fn single_node_graph_is_degenerate_but_valid() {
        let model = ErgmModel::new(1).unwrap();
        assert_eq!(model.dyad_count(), 0);
        let g = GraphConfig::empty(1);
        assert_eq!(model.suff_stats(&g).unwrap().as_slice(), &[0.0, 0.0]);
    }

    #[test]
    fn asymmetry_and_self_loops_are_rejected() {
        let model = ErgmModel::new(3).unwrap();
        let mut raw = vec![false; 9];
        raw[1] = true; // (0,1) set but not (1,0)
        let g = GraphConfig::from_raw(3, raw).unwrap();
        assert!(matches!(
            model.validate(&g),
            Err(Error::InvalidConfiguration(_))
        ));

        let mut raw = vec![false; 9];
        raw[4] = true; // (1,1) diagonal
        let g = GraphConfig::from_raw(3, raw).unwrap();
        assert!(model.validate(&g).is_err());

        assert!(GraphConfig::from_edges(3, &[(1, 1)]).is_err());
    }

    #[test]
    fn dyad_enumeration_is_a_bijection() {
        let model = ErgmModel::new(5).unwrap();
        let mut seen = Vec::new();
        for unit in 0..model.dyad_count() {
            let (i, j) = model.dyad_pair(unit);
            assert!(i < j && j < 5);
            seen.push((i, j));
        }
        seen.dedup();
        assert_eq!(seen.len(), 10);
    }

    #[test]
    fn conditional_without_interaction_is_a_fair_coin() {
        let model = ErgmModel::new(4).unwrap();
        let g = GraphConfig::empty(4);
        for unit in 0..model.unit_count() {
            let probs = model.unit_conditional(&ParamVector::zeros(2), &g, unit);
            assert!((probs[1] - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn sweep_agrees_with_per_dyad_updates() {
        let model = ErgmModel::new(6).unwrap();
        let theta = ParamVector::new(vec![-0.4, 0.12]);
        let mut a = GraphConfig::empty(6);
        let mut b = GraphConfig::empty(6);
        let mut rng_a = rng::stream(21);
        let mut rng_b = rng::stream(21);
        for _ in 0..20 {
            model.sweep(&theta, &mut a, &mut rng_a);
            for unit in 0..model.unit_count() {
                model.gibbs_site_update(&theta, &mut b, unit, &mut rng_b);
            }
        }
        assert_eq!(a, b);
    }

    #[test]
    fn forward_sample_edge_frequency_without_interaction() {
        // theta = 0: dyads are independent Bernoulli(1/2), so the mean
        // edge count over draws is n(n-1)/4.
        let model = ErgmModel::new(8).unwrap();
        let mut rng = rng::stream(2);
        let draws = model.forward_sample(&ParamVector::zeros(2), 4000, 2, &mut rng);
        let values: Vec<f64> = draws.iter().map(|x| model.stats_unchecked(x)[0]).collect();
        let mean = crate::math::mean(&values);
        let se = (crate::math::sample_variance(&values) / values.len() as f64).sqrt();
        assert!((mean - 14.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn sampled_statistics_stay_in_bounds() {
        let model = ErgmModel::new(6).unwrap();
        let theta = ParamVector::new(vec![-0.3, 0.1]);
        let mut rng = rng::stream(13);
        let max_edges = model.dyad_count() as f64;
        let n = model.node_count() as f64;
        let max_stars = n * (n - 1.0) * (n - 2.0) / 2.0;
        for x in model.forward_sample(&theta, 50, 10, &mut rng) {
            let s = model.stats_unchecked(&x);
            assert!(s[0] >= 0.0 && s[0] <= max_edges);
            assert!(s[1] >= 0.0 && s[1] <= max_stars);
        }
    }

    #[test]
    fn one_sweep_kernel_preserves_the_exact_distribution() {
        let model = ErgmModel::new(4).unwrap();
        let theta = ParamVector::new(vec![-0.5, 0.25]);
        let count = model.config_count().unwrap() as usize;
        let configs: Vec<GraphConfig> =
            (0..count as u64).map(|i| model.config_from_index(i)).collect();

        let weights: Vec<f64> = configs
            .iter()
            .map(|x| theta.dot(&model.stats_unchecked(x)).exp())
            .collect();
        let z: f64 = weights.iter().sum();
        let pi = RowDVector::from_iterator(count, weights.iter().map(|w| w / z));

        let index_of = |x: &GraphConfig| -> usize {
            let mut idx = 0usize;
            for unit in (0..model.dyad_count()).rev() {
                let (i, j) = model.dyad_pair(unit);
                idx = idx * 2 + usize::from(x.edge(i, j));
            }
            idx
        };

        let mut sweep = DMatrix::<f64>::identity(count, count);
        for unit in 0..model.unit_count() {
            let (i, j) = model.dyad_pair(unit);
            let mut kernel = DMatrix::<f64>::zeros(count, count);
            for (row, x) in configs.iter().enumerate() {
                let probs = model.unit_conditional(&theta, x, unit);
                for (state, p) in probs.iter().enumerate() {
                    let mut y = x.clone();
                    y.set_edge(i, j, state == 1);
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
