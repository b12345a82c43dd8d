//! Accepted-move lengths, per marginal.

use crate::samplers::ChainTrace;

/// |Δθ_j| over the accepted iterations, one series per marginal.
/// Rejected iterations contribute nothing.
pub fn accepted_move_lengths(trace: &ChainTrace) -> Vec<Vec<f64>> {
    let d = trace.dim();
    let mut out = vec![Vec::new(); d];
    for i in 0..trace.iterations() {
        if !trace.accepted[i] {
            continue;
        }
        for (j, series) in out.iter_mut().enumerate() {
            series.push((trace.states[i + 1][j] - trace.states[i][j]).abs());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamVector;
    use crate::samplers::KernelInfo;

    fn trace_from(
        states: Vec<ParamVector>,
        accepted: Vec<bool>,
    ) -> ChainTrace {
        let iters = accepted.len();
        ChainTrace {
            proposals: states[1..].to_vec(),
            log_accept: vec![0.0; iters],
            dt_seconds: vec![0.0; iters],
            diverged: vec![false; iters],
            states,
            accepted,
            seed: 0,
            kernel: KernelInfo {
                algorithm: "test".into(),
                n_draws: None,
                epsilon: None,
                leapfrog_steps: None,
                sweeps: None,
            },
        }
    }

    #[test]
    fn all_rejected_gives_empty_series() {
        let states = vec![ParamVector::zeros(2); 5];
        let trace = trace_from(states, vec![false; 4]);
        for series in accepted_move_lengths(&trace) {
            assert!(series.is_empty());
        }
    }

    #[test]
    fn unit_steps_always_accepted_give_unit_lengths() {
        let states: Vec<ParamVector> = (0..5)
            .map(|i| ParamVector::new(vec![i as f64, -(i as f64)]))
            .collect();
        let trace = trace_from(states, vec![true; 4]);
        for series in accepted_move_lengths(&trace) {
            assert_eq!(series, vec![1.0; 4]);
        }
    }

    #[test]
    fn series_length_equals_the_acceptance_count() {
        let states: Vec<ParamVector> = (0..7)
            .map(|i| ParamVector::new(vec![(i * i) as f64 / 3.0, 0.0]))
            .collect();
        let accepted = vec![true, false, true, true, false, true];
        let trace = trace_from(states, accepted.clone());
        let lengths = accepted_move_lengths(&trace);
        let count = accepted.iter().filter(|a| **a).count();
        assert_eq!(lengths[0].len(), count);
        assert_eq!(lengths[1].len(), count);
    }
}
