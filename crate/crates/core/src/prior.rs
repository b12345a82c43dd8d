//! Prior specifications over the parameter space.
//!
//! Only ratios and derivatives of the prior enter the samplers, so
//! [`Prior::log_density`] is defined up to an additive constant.

use serde::{Deserialize, Serialize};

use crate::params::ParamVector;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Prior {
    /// Uniform over an axis-aligned box.
    UniformBox { lower: Vec<f64>, upper: Vec<f64> },
    /// Improper flat prior over all of ℝᵈ.
    Flat { dim: usize },
    /// Independent normal components.
    Gaussian { mean: Vec<f64>, variance: Vec<f64> },
}

impl Prior {
    pub fn uniform_box(lower: Vec<f64>, upper: Vec<f64>) -> Self {
        assert_eq!(lower.len(), upper.len());
        assert!(
            lower.iter().zip(&upper).all(|(l, u)| l < u),
            "degenerate prior box"
        );
        Prior::UniformBox { lower, upper }
    }

    pub fn dim(&self) -> usize {
        match self {
            Prior::UniformBox { lower, .. } => lower.len(),
            Prior::Flat { dim } => *dim,
            Prior::Gaussian { mean, .. } => mean.len(),
        }
    }

    pub fn contains(&self, theta: &ParamVector) -> bool {
        match self {
            Prior::UniformBox { lower, upper } => theta
                .iter()
                .zip(lower.iter().zip(upper))
                .all(|(t, (l, u))| *t >= *l && *t <= *u),
            Prior::Flat { .. } | Prior::Gaussian { .. } => theta.is_finite(),
        }
    }

    /// Log density up to an additive constant; −∞ outside the support.
    pub fn log_density(&self, theta: &ParamVector) -> f64 {
        match self {
            Prior::UniformBox { .. } => {
                if self.contains(theta) {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
            Prior::Flat { .. } => 0.0,
            Prior::Gaussian { mean, variance } => theta
                .iter()
                .zip(mean.iter().zip(variance))
                .map(|(t, (m, v))| -0.5 * (t - m) * (t - m) / v)
                .sum(),
        }
    }

    /// Gradient of the log density.
    ///
    /// For the box prior this is zero everywhere: the density is constant
    /// inside, and integrator excursions outside the box deliberately see
    /// no prior force (proposals ending outside are rejected instead).
    pub fn grad_log_density(&self, theta: &ParamVector) -> Vec<f64> {
        match self {
            Prior::UniformBox { .. } | Prior::Flat { .. } => vec![0.0; self.dim()],
            Prior::Gaussian { mean, variance } => theta
                .iter()
                .zip(mean.iter().zip(variance))
                .map(|(t, (m, v))| -(t - m) / v)
                .collect(),
        }
    }

    /// Diagonal of ∇² log p(θ); off-diagonal terms are zero for every
    /// supported form.
    pub fn hessian_log_density_diag(&self, _theta: &ParamVector) -> Vec<f64> {
        match self {
            Prior::UniformBox { .. } | Prior::Flat { .. } => vec![0.0; self.dim()],
            Prior::Gaussian { variance, .. } => variance.iter().map(|v| -1.0 / v).collect(),
        }
    }

    /// Projects a point onto the support (clamps to the box; identity
    /// for the unbounded forms).
    pub fn project(&self, theta: &ParamVector) -> ParamVector {
        match self {
            Prior::UniformBox { lower, upper } => ParamVector::new(
                theta
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .map(|(t, (l, u))| t.clamp(*l, *u))
                    .collect(),
            ),
            Prior::Flat { .. } | Prior::Gaussian { .. } => theta.clone(),
        }
    }

    /// The bounding box, for quadrature and binning. Boxes return
    /// themselves; other priors have none.
    pub fn bounding_box(&self) -> Option<(&[f64], &[f64])> {
        match self {
            Prior::UniformBox { lower, upper } => Some((lower, upper)),
            _ => None,
        }
    }
}
