//! Exact posterior summaries on a two-dimensional grid.
//!
//! The grid carries the log unnormalised posterior at the midpoints of a
//! uniform `resolution × resolution` mesh over a box, together with the
//! midpoint-rule log evidence. Means, modes, bin masses and samples all
//! come from the same rule, so everything downstream is consistent with
//! the quadrature.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::math::logsumexp;
use crate::params::ParamVector;

#[derive(Clone, Debug)]
pub struct PosteriorGrid {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Cells per axis.
    pub resolution: usize,
    /// Log unnormalised posterior at cell midpoints, row-major in the
    /// first axis: entry `i * resolution + j` is cell (i, j).
    pub log_unnorm: Vec<f64>,
    /// Midpoint-rule log evidence: logsumexp(log_unnorm) + log(cell area).
    pub log_evidence: f64,
}

impl PosteriorGrid {
    /// Evaluates `log_unnorm_posterior` on the grid. The function is
    /// called once per cell, in parallel across rows.
    pub fn compute<F>(
        log_unnorm_posterior: F,
        lower: [f64; 2],
        upper: [f64; 2],
        resolution: usize,
    ) -> Result<Self>
    where
        F: Fn(&ParamVector) -> Result<f64> + Sync,
    {
        if resolution == 0 || lower[0] >= upper[0] || lower[1] >= upper[1] {
            return Err(Error::InvalidConfiguration(
                "posterior grid needs a non-degenerate box and resolution".into(),
            ));
        }
        let step = [
            (upper[0] - lower[0]) / resolution as f64,
            (upper[1] - lower[1]) / resolution as f64,
        ];
        let rows: Vec<Vec<f64>> = (0..resolution)
            .into_par_iter()
            .map(|i| {
                let a = lower[0] + (i as f64 + 0.5) * step[0];
                (0..resolution)
                    .map(|j| {
                        let b = lower[1] + (j as f64 + 0.5) * step[1];
                        log_unnorm_posterior(&ParamVector::new(vec![a, b]))
                    })
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let log_unnorm: Vec<f64> = rows.into_iter().flatten().collect();
        let log_evidence = logsumexp(&log_unnorm) + (step[0] * step[1]).ln();
        Ok(PosteriorGrid {
            lower,
            upper,
            resolution,
            log_unnorm,
            log_evidence,
        })
    }

    pub fn cell_size(&self) -> [f64; 2] {
        [
            (self.upper[0] - self.lower[0]) / self.resolution as f64,
            (self.upper[1] - self.lower[1]) / self.resolution as f64,
        ]
    }

    pub fn cell_area(&self) -> f64 {
        let s = self.cell_size();
        s[0] * s[1]
    }

    /// Midpoint of cell (i, j).
    pub fn midpoint(&self, i: usize, j: usize) -> [f64; 2] {
        let s = self.cell_size();
        [
            self.lower[0] + (i as f64 + 0.5) * s[0],
            self.lower[1] + (j as f64 + 0.5) * s[1],
        ]
    }

    /// Normalised log density at cell (i, j).
    pub fn log_density(&self, i: usize, j: usize) -> f64 {
        self.log_unnorm[i * self.resolution + j] - self.log_evidence
    }

    /// Posterior probability of cell (i, j) under the midpoint rule.
    pub fn cell_mass(&self, i: usize, j: usize) -> f64 {
        (self.log_density(i, j) + self.cell_area().ln()).exp()
    }

    /// Posterior mean by the same midpoint rule that normalised the grid.
    pub fn mean(&self) -> [f64; 2] {
        let mut out = [0.0; 2];
        for i in 0..self.resolution {
            for j in 0..self.resolution {
                let w = self.cell_mass(i, j);
                let mid = self.midpoint(i, j);
                out[0] += w * mid[0];
                out[1] += w * mid[1];
            }
        }
        out
    }

    /// Posterior covariance by the same midpoint rule.
    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let mean = self.mean();
        let mut cov = [[0.0; 2]; 2];
        for i in 0..self.resolution {
            for j in 0..self.resolution {
                let w = self.cell_mass(i, j);
                let mid = self.midpoint(i, j);
                let d = [mid[0] - mean[0], mid[1] - mean[1]];
                for a in 0..2 {
                    for b in 0..2 {
                        cov[a][b] += w * d[a] * d[b];
                    }
                }
            }
        }
        cov
    }

    /// Midpoint of the cell with the highest density.
    pub fn argmax(&self) -> [f64; 2] {
        let (best, _) = self
            .log_unnorm
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        self.midpoint(best / self.resolution, best % self.resolution)
    }

    /// Total mass under the quadrature rule; equals 1 up to rounding by
    /// construction, kept as an explicit self-check.
    pub fn total_mass(&self) -> f64 {
        (0..self.resolution)
            .flat_map(|i| (0..self.resolution).map(move |j| (i, j)))
            .map(|(i, j)| self.cell_mass(i, j))
            .sum()
    }

    /// A reusable sampler over the gridded posterior.
    pub fn sampler(&self) -> GridSampler<'_> {
        let mut cumulative = Vec::with_capacity(self.log_unnorm.len());
        let mut acc = 0.0;
        for idx in 0..self.log_unnorm.len() {
            acc += self.cell_mass(idx / self.resolution, idx % self.resolution);
            cumulative.push(acc);
        }
        GridSampler {
            grid: self,
            cumulative,
        }
    }

    /// Writes `theta_1, theta_2, log_density` rows for offline plotting.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "theta_1,theta_2,log_density")?;
        for i in 0..self.resolution {
            for j in 0..self.resolution {
                let mid = self.midpoint(i, j);
                writeln!(out, "{},{},{}", mid[0], mid[1], self.log_density(i, j))?;
            }
        }
        Ok(())
    }
}

/// Samples the gridded posterior: a cell by its cumulative mass (binary
/// search), then uniform inside the cell.
pub struct GridSampler<'a> {
    grid: &'a PosteriorGrid,
    cumulative: Vec<f64>,
}

impl GridSampler<'_> {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ParamVector {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().unwrap();
        let cell = self.cumulative.partition_point(|c| *c <= u);
        let cell = cell.min(self.cumulative.len() - 1);
        let (i, j) = (cell / self.grid.resolution, cell % self.grid.resolution);
        let s = self.grid.cell_size();
        let mid = self.grid.midpoint(i, j);
        ParamVector::new(vec![
            mid[0] + (rng.random::<f64>() - 0.5) * s[0],
            mid[1] + (rng.random::<f64>() - 0.5) * s[1],
        ])
    }
}
