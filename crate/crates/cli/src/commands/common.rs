//! Shared experiment machinery: run the chains of one algorithm
//! setting, persist their artifacts, and summarise them.

use std::path::Path;

use anyhow::{Context, Result};

use nhmc::diagnostics::{summarize, ChainSummary, ChainTiming, GroundTruth};
use nhmc::params::ParamVector;
use nhmc::samplers::{run_chains, TransitionKernel};

/// Runs `chains` chains of `iterations` steps with the given seeds,
/// writes `chain_<k>.csv` and `chain_<k>.json` into `dir`, and returns
/// one summary and one timing record per chain.
#[allow(clippy::too_many_arguments)]
pub fn run_setting<K: TransitionKernel>(
    kernel: &K,
    start: &ParamVector,
    iterations: usize,
    burn_in: usize,
    seeds: &[u64],
    truth: Option<&GroundTruth>,
    kl_bin: f64,
    dir: &Path,
) -> Result<(Vec<ChainSummary>, Vec<ChainTiming>)> {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("creating setting directory {}", dir.display()))?;
    let traces = run_chains(kernel, start, iterations, seeds)?;
    let mut summaries = Vec::with_capacity(traces.len());
    let mut timings = Vec::with_capacity(traces.len());
    for (k, trace) in traces.iter().enumerate() {
        trace.write_csv(&dir.join(format!("chain_{k}.csv")))?;
        trace.write_sidecar(&dir.join(format!("chain_{k}.json")))?;
        let (summary, timing) = summarize(trace, &k.to_string(), burn_in, truth, kl_bin);
        summaries.push(summary);
        timings.push(timing);
    }
    Ok((summaries, timings))
}
