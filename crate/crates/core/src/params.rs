//! Parameter and sufficient-statistic vectors.
//!
//! Both are thin wrappers over `Vec<f64>`. A [`ParamVector`] is a point
//! θ in the d-dimensional parameter space; a [`SuffStats`] is the
//! statistic vector s(x) of a configuration, so that the potential of
//! every model here is the plain dot product θᵀs(x).

use serde::{Deserialize, Serialize};
use std::ops::Index;

use crate::error::{Error, Result};

/// A point in parameter space, θ ∈ ℝᵈ.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        ParamVector(values)
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// Checks the vector against a model dimension.
    pub fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: self.dim(),
            });
        }
        Ok(())
    }

    pub fn dot(&self, stats: &SuffStats) -> f64 {
        debug_assert_eq!(self.dim(), stats.dim());
        self.0
            .iter()
            .zip(stats.as_slice())
            .map(|(t, s)| t * s)
            .sum()
    }

    /// Component-wise `self - other`.
    pub fn minus(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.dim(), other.dim());
        ParamVector(
            self.0
                .iter()
                .zip(other.iter())
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    /// Component-wise `self + scale * delta`.
    pub fn plus_scaled(&self, scale: f64, delta: &[f64]) -> ParamVector {
        debug_assert_eq!(self.dim(), delta.len());
        ParamVector(
            self.0
                .iter()
                .zip(delta)
                .map(|(a, b)| a + scale * b)
                .collect(),
        )
    }

    /// Euclidean distance to `other`.
    pub fn distance(&self, other: &ParamVector) -> f64 {
        self.0
            .iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }
}

impl Index<usize> for ParamVector {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(values: Vec<f64>) -> Self {
        ParamVector(values)
    }
}

/// The sufficient-statistic vector s(x) of a configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuffStats(Vec<f64>);

impl SuffStats {
    pub fn new(values: Vec<f64>) -> Self {
        SuffStats(values)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.0.iter()
    }
}

impl Index<usize> for SuffStats {
    type Output = f64;

    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Mean of a set of statistic vectors, one component at a time.
pub fn mean_stats(stats: &[SuffStats]) -> Vec<f64> {
    assert!(!stats.is_empty(), "mean of an empty batch");
    let d = stats[0].dim();
    let mut out = vec![0.0; d];
    for s in stats {
        for (acc, v) in out.iter_mut().zip(s.as_slice()) {
            *acc += v;
        }
    }
    let n = stats.len() as f64;
    for v in &mut out {
        *v /= n;
    }
    out
}
