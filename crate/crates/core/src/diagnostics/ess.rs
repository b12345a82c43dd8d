//! Effective sample size by the initial-monotone-positive-sequence
//! truncation of the autocovariance sum.

/// ESS with its truncation diagnostics.
#[derive(Clone, Copy, Debug)]
pub struct EssEstimate {
    pub value: f64,
    /// Number of autocovariance terms summed (always even: paired lags).
    pub truncation_lag: usize,
    /// True for a constant series, where the ESS is defined as 1.
    pub degenerate: bool,
}

/// ESS = n / (1 + 2 Σ ρ̂_k), with autocovariances from direct sums and
/// the sum truncated where the paired-lag sums Γ_m = γ_{2m} + γ_{2m+1}
/// stop being positive; the retained pairs are additionally clipped to
/// be non-increasing.
pub fn effective_sample_size(series: &[f64]) -> EssEstimate {
    let n = series.len();
    assert!(n >= 10, "effective sample size needs at least 10 points");

    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let autocov = |lag: usize| -> f64 {
        centred[..n - lag]
            .iter()
            .zip(&centred[lag..])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    };

    let gamma0 = autocov(0);
    if gamma0 == 0.0 {
        return EssEstimate {
            value: 1.0,
            truncation_lag: 0,
            degenerate: true,
        };
    }

    let mut paired_sum = 0.0;
    let mut previous_pair = f64::INFINITY;
    let mut pairs = 0usize;
    let max_pairs = (n - 1) / 2;
    for m in 0..max_pairs {
        let pair = autocov(2 * m) + autocov(2 * m + 1);
        if pair <= 0.0 {
            break;
        }
        let clipped = pair.min(previous_pair);
        paired_sum += clipped;
        previous_pair = clipped;
        pairs += 1;
    }

    // 2 Σ_{m} Γ_m − γ₀ = γ₀ (1 + 2 Σ_k ρ_k) over the retained window.
    let asymptotic_variance = 2.0 * paired_sum - gamma0;
    let tau = (asymptotic_variance / gamma0).max(f64::MIN_POSITIVE);
    EssEstimate {
        value: n as f64 / tau,
        truncation_lag: 2 * pairs,
        degenerate: false,
    }
}
