//! Integration-time heuristic.
//!
//! The proposal covariance of HMC over one trajectory scales like
//! (εL)² M⁻¹, so fixing the integration time t = εL to the optimal
//! random-walk scale 2.38/√d makes the Hamiltonian proposal directly
//! comparable to the exchange algorithm's tuned random walk. The step
//! count is re-derived from the current ε whenever adaptation moves it.

/// t = 2.38 / √d.
pub fn integration_time(dim: usize) -> f64 {
    assert!(dim >= 1);
    2.38 / (dim as f64).sqrt()
}

/// L = max(1, round(t/ε)), rounding ties to even.
pub fn leapfrog_steps(dim: usize, epsilon: f64) -> usize {
    assert!(epsilon > 0.0);
    let ratio = integration_time(dim) / epsilon;
    (ratio.round_ties_even() as usize).max(1)
}
