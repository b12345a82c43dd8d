//! Log-partition computations: exact recursion for Potts lattices and
//! plain enumeration for anything small enough.

use crate::error::{Error, Result};
use crate::gibbs_models::{GibbsModel, PottsModel};
use crate::math::{log_add_exp, logsumexp};
use crate::params::{ParamVector, SuffStats};

/// Default cap on the boundary state space: K^h ≤ 2^22.
pub const MAX_BOUNDARY_BITS: u32 = 22;

/// Default cap on full enumeration: at most 2^22 configurations.
pub const MAX_ENUMERATION: u64 = 1 << 22;

/// Step for the central finite differences in [`grad_log_z`].
pub const GRAD_STEP: f64 = 1e-4;

/// Exact log Z(θ) of a Potts lattice by a column-major sweep.
///
/// The sweep maintains log weights over the K^h joint states of the last
/// h visited sites. Visiting a site multiplies in its node potential and
/// the agreement factors with its left and upper neighbours, then sums
/// out the site that leaves the boundary. Cost is O(w · h · K^{h+1}),
/// exponential in the number of rows and linear in the number of columns.
pub fn potts_log_z(model: &PottsModel, theta: &ParamVector) -> Result<f64> {
    potts_log_z_capped(model, theta, MAX_BOUNDARY_BITS)
}

/// [`potts_log_z`] with an explicit boundary cap (K^h ≤ 2^max_bits).
pub fn potts_log_z_capped(
    model: &PottsModel,
    theta: &ParamVector,
    max_bits: u32,
) -> Result<f64> {
    theta.check_dim(model.dim())?;
    let k = model.num_states() as usize;
    let h = model.height();
    let w = model.width();

    let mut boundary_states: u128 = 1;
    for _ in 0..h {
        boundary_states *= k as u128;
        if boundary_states > 1u128 << max_bits {
            return Err(Error::ResourceLimit(format!(
                "boundary state space {}^{} exceeds 2^{}",
                k, h, max_bits
            )));
        }
    }
    let boundary = boundary_states as usize;

    let alphas = model.node_potentials(theta);
    let beta = model.coupling(theta);

    // First column: every vertical chain of h sites.
    let mut weights = vec![0.0f64; boundary];
    for (idx, weight) in weights.iter_mut().enumerate() {
        let mut rest = idx;
        let mut prev = usize::MAX;
        let mut acc = 0.0;
        for _row in 0..h {
            let state = rest % k;
            rest /= k;
            acc += alphas[state];
            if prev != usize::MAX && state == prev {
                acc += beta;
            }
            prev = state;
        }
        *weight = acc;
    }

    // Remaining columns, site by site. When visiting (row, col) the
    // boundary slot `row` still holds the left neighbour (row, col−1);
    // slot row−1 already holds the upper neighbour (row−1, col).
    let mut old = vec![0.0f64; k];
    for _col in 1..w {
        for row in 0..h {
            let stride = k.checked_pow(row as u32).unwrap();
            let block = stride * k;
            let mut base_lo = 0;
            while base_lo < stride {
                let mut base_hi = 0;
                while base_hi < boundary {
                    let base = base_hi + base_lo;
                    for (v, slot) in old.iter_mut().enumerate() {
                        *slot = weights[base + v * stride];
                    }
                    // Upper neighbour (row−1, col) sits in slot row−1,
                    // the top digit of base_lo.
                    let upper = if row > 0 {
                        Some((base_lo / (stride / k)) % k)
                    } else {
                        None
                    };
                    for new_state in 0..k {
                        let mut acc = f64::NEG_INFINITY;
                        for (v, slot) in old.iter().enumerate() {
                            let bond = if v == new_state { beta } else { 0.0 };
                            acc = log_add_exp(acc, *slot + bond);
                        }
                        let mut local = alphas[new_state];
                        if upper == Some(new_state) {
                            local += beta;
                        }
                        weights[base + new_state * stride] = acc + local;
                    }
                    base_hi += block;
                }
                base_lo += 1;
            }
        }
    }

    Ok(logsumexp(&weights))
}

/// log Z(θ) by summing exp(θᵀs(x)) over every configuration.
///
/// Enumerates by integer counter in the model's fixed order; the running
/// sum stays in the log domain throughout.
pub fn brute_force_log_z<M: GibbsModel>(model: &M, theta: &ParamVector) -> Result<f64> {
    theta.check_dim(model.dim())?;
    let count = enumerable_count(model)?;
    let mut acc = f64::NEG_INFINITY;
    for idx in 0..count {
        let x = model.config_from_index(idx);
        acc = log_add_exp(acc, theta.dot(&model.stats_unchecked(&x)));
    }
    Ok(acc)
}

/// The statistic vectors of every configuration, in enumeration order.
pub fn enumerate_stats<M: GibbsModel>(model: &M) -> Result<Vec<SuffStats>> {
    let count = enumerable_count(model)?;
    Ok((0..count)
        .map(|idx| model.stats_unchecked(&model.config_from_index(idx)))
        .collect())
}

/// log Σ exp(θᵀsᵢ) over a precomputed statistic table.
pub fn log_z_from_stats(stats: &[SuffStats], theta: &ParamVector) -> f64 {
    let mut acc = f64::NEG_INFINITY;
    for s in stats {
        acc = log_add_exp(acc, theta.dot(s));
    }
    acc
}

fn enumerable_count<M: GibbsModel>(model: &M) -> Result<u64> {
    match model.config_count() {
        Some(count) if count <= MAX_ENUMERATION => Ok(count),
        Some(count) => Err(Error::ResourceLimit(format!(
            "{count} configurations exceed the enumeration cap {MAX_ENUMERATION}"
        ))),
        None => Err(Error::ResourceLimit(
            "configuration count overflows u64".into(),
        )),
    }
}

/// ∇ log Z(θ) by central finite differences of a log-partition function.
/// For the linear family this equals E_θ[s(X)].
pub fn grad_log_z<F>(log_z: F, theta: &ParamVector, step: f64) -> Result<Vec<f64>>
where
    F: Fn(&ParamVector) -> Result<f64>,
{
    let mut grad = Vec::with_capacity(theta.dim());
    for i in 0..theta.dim() {
        let mut up = theta.as_slice().to_vec();
        let mut dn = up.clone();
        up[i] += step;
        dn[i] -= step;
        let fu = log_z(&ParamVector::new(up))?;
        let fd = log_z(&ParamVector::new(dn))?;
        grad.push((fu - fd) / (2.0 * step));
    }
    Ok(grad)
}

/// ∇ log Z(θ) of a Potts model via the exact recursion.
pub fn potts_grad_log_z(model: &PottsModel, theta: &ParamVector) -> Result<Vec<f64>> {
    grad_log_z(|t| potts_log_z(model, t), theta, GRAD_STEP)
}

/// log Z(θ) − log Z(θ′) for any log-partition function.
pub fn log_ratio<F>(log_z: F, theta: &ParamVector, other: &ParamVector) -> Result<f64>
where
    F: Fn(&ParamVector) -> Result<f64>,
{
    Ok(log_z(theta)? - log_z(other)?)
}

/// Exhaustive E_θ[s(X)] over an enumerable instance.
pub fn exhaustive_mean_stats<M: GibbsModel>(model: &M, theta: &ParamVector) -> Result<Vec<f64>> {
    let stats = enumerate_stats(model)?;
    let log_z = log_z_from_stats(&stats, theta);
    let d = model.dim();
    let mut mean = vec![0.0; d];
    for s in &stats {
        let p = (theta.dot(s) - log_z).exp();
        for (m, v) in mean.iter_mut().zip(s.as_slice()) {
            *m += p * v;
        }
    }
    Ok(mean)
}

/// Exhaustive Cov_θ[s(X)] over an enumerable instance (population
/// covariance under the exact distribution).
pub fn exhaustive_cov_stats<M: GibbsModel>(
    model: &M,
    theta: &ParamVector,
) -> Result<Vec<Vec<f64>>> {
    let stats = enumerate_stats(model)?;
    let log_z = log_z_from_stats(&stats, theta);
    let d = model.dim();
    let mut mean = vec![0.0; d];
    let mut second = vec![vec![0.0; d]; d];
    for s in &stats {
        let p = (theta.dot(s) - log_z).exp();
        for i in 0..d {
            mean[i] += p * s[i];
            for j in 0..d {
                second[i][j] += p * s[i] * s[j];
            }
        }
    }
    for i in 0..d {
        for j in 0..d {
            second[i][j] -= mean[i] * mean[j];
        }
    }
    Ok(second)
}
