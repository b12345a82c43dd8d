//! Binned Kullback-Leibler divergence of an empirical sample against a
//! posterior grid.
//!
//! The box is tiled with square bins of side `bin_size`. The empirical
//! measure puts frequency Q_b on each bin; the reference mass of a bin
//! is the grid's normalised density at the bin midpoint times the bin
//! area. Only non-empty bins contribute: KL = Σ_b Q_b log(Q_b / π_b).
//! A bin with samples but zero reference mass (possible only at density
//! underflow) makes the divergence infinite.

use std::collections::BTreeMap;

use super::PosteriorGrid;
use crate::params::ParamVector;

pub const DEFAULT_KL_BIN: f64 = 0.01;

pub fn kl_divergence_binned(
    samples: &[ParamVector],
    posterior: &PosteriorGrid,
    bin_size: f64,
) -> f64 {
    assert!(bin_size > 0.0);
    if samples.is_empty() {
        return 0.0;
    }
    let bins = [
        ((posterior.upper[0] - posterior.lower[0]) / bin_size).ceil() as usize,
        ((posterior.upper[1] - posterior.lower[1]) / bin_size).ceil() as usize,
    ];
    let bin_of = |a: f64, b: f64| -> (usize, usize) {
        let i = ((a - posterior.lower[0]) / bin_size).floor() as isize;
        let j = ((b - posterior.lower[1]) / bin_size).floor() as isize;
        (
            i.clamp(0, bins[0] as isize - 1) as usize,
            j.clamp(0, bins[1] as isize - 1) as usize,
        )
    };

    let mut counts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for s in samples {
        *counts.entry(bin_of(s[0], s[1])).or_insert(0) += 1;
    }

    // Normalised density at the midpoint of a bin, read off the grid
    // cell containing it.
    let cell_size = posterior.cell_size();
    let density_at = |bin: (usize, usize)| -> f64 {
        let mid = [
            posterior.lower[0] + (bin.0 as f64 + 0.5) * bin_size,
            posterior.lower[1] + (bin.1 as f64 + 0.5) * bin_size,
        ];
        let i = (((mid[0] - posterior.lower[0]) / cell_size[0]) as usize)
            .min(posterior.resolution - 1);
        let j = (((mid[1] - posterior.lower[1]) / cell_size[1]) as usize)
            .min(posterior.resolution - 1);
        posterior.log_density(i, j).exp()
    };

    let n = samples.len() as f64;
    let bin_area = bin_size * bin_size;
    let mut kl = 0.0;
    for (bin, count) in &counts {
        let q = *count as f64 / n;
        let p = density_at(*bin) * bin_area;
        if p <= 0.0 {
            return f64::INFINITY;
        }
        kl += q * (q / p).ln();
    }
    kl
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_oracle::potts_log_z;
    use crate::gibbs_models::{GibbsModel, LatticeConfig, PottsModel};
    use crate::rng;

    fn small_grid() -> PosteriorGrid {
        let model = PottsModel::new(2, 2, 2).unwrap();
        let obs = LatticeConfig::constant(2, 2, 2, 1);
        let stats = model.suff_stats(&obs).unwrap();
        PosteriorGrid::compute(
            |theta| Ok(theta.dot(&stats) - potts_log_z(&model, theta)?),
            [-0.5, 0.0],
            [0.5, 1.0],
            100,
        )
        .unwrap()
    }

    #[test]
    fn all_samples_in_one_bin() {
        let grid = small_grid();
        let theta = ParamVector::new(vec![0.105, 0.105]);
        let samples = vec![theta; 1000];
        let kl = kl_divergence_binned(&samples, &grid, 0.01);

        // Reference mass of the single occupied bin, by direct lookup:
        // density at the bin midpoint (0.105, 0.105) times the bin area.
        let (i, j) = (60, 10);
        let mid = grid.midpoint(i, j);
        assert!((mid[0] - 0.105).abs() < 1e-12 && (mid[1] - 0.105).abs() < 1e-12);
        let mass = grid.log_density(i, j).exp() * 1e-4;
        assert!((kl - (1.0 / mass).ln()).abs() < 1e-12);
    }

    #[test]
    fn self_sampling_drives_the_divergence_down() {
        let grid = small_grid();
        let sampler = grid.sampler();
        let mut rng = rng::stream(8);
        let few: Vec<ParamVector> = (0..2_000).map(|_| sampler.sample(&mut rng)).collect();
        let many: Vec<ParamVector> = (0..200_000).map(|_| sampler.sample(&mut rng)).collect();
        let kl_few = kl_divergence_binned(&few, &grid, 0.05);
        let kl_many = kl_divergence_binned(&many, &grid, 0.05);
        assert!(kl_many < kl_few);
        assert!(kl_many < 0.05, "kl {kl_many}");
    }

    #[test]
    fn empty_sample_is_zero_divergence() {
        let grid = small_grid();
        assert_eq!(kl_divergence_binned(&[], &grid, 0.01), 0.0);
    }
}
