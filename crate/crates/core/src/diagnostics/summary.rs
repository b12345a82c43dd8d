//! Per-chain summaries and their CSV persistence.
//!
//! A [`ChainSummary`] carries everything reproducible about a chain;
//! wall-clock derived quantities live in the separate [`ChainTiming`]
//! so summary CSV files stay byte-identical across replayed runs.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{accepted_move_lengths, effective_sample_size};
use crate::error::{Error, Result};
use crate::exact_oracle::{kl_divergence_binned, PosteriorGrid};
use crate::math::quantile;
use crate::samplers::ChainTrace;

/// Iterations discarded from the front of every chain before summaries.
pub const DEFAULT_BURN_IN: usize = 500;

/// Exact reference quantities, when the instance admits them.
pub struct GroundTruth {
    pub grid: PosteriorGrid,
    pub mean: Vec<f64>,
}

/// Deterministic summary of one chain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub algorithm: String,
    pub n_draws: Option<usize>,
    /// Chain index, or an aggregate label ("mean", "sd").
    pub chain: String,
    pub iterations: usize,
    pub burn_in: usize,
    pub acceptance_rate: f64,
    pub epsilon: Option<f64>,
    pub leapfrog_steps: Option<usize>,
    /// ESS per marginal, capped at the kept chain length.
    pub ess: Vec<f64>,
    pub posterior_mean: Vec<f64>,
    /// Squared Euclidean error of this chain's mean against ground truth.
    pub squared_error: Option<f64>,
    /// Binned KL divergence against the ground-truth grid.
    pub kl: Option<f64>,
    /// Per-marginal quartiles (q25, q50, q75) of accepted move lengths.
    pub move_quartiles: Vec<[f64; 3]>,
}

/// Wall-clock quantities of one chain, kept out of the CSVs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChainTiming {
    pub algorithm: String,
    pub n_draws: Option<usize>,
    pub chain: String,
    pub wall_seconds: f64,
    pub ess_per_second: Vec<f64>,
}

/// Summarises a trace against optional ground truth.
pub fn summarize(
    trace: &ChainTrace,
    chain_label: &str,
    burn_in: usize,
    truth: Option<&GroundTruth>,
    kl_bin: f64,
) -> (ChainSummary, ChainTiming) {
    let d = trace.dim();
    let kept = trace.kept_states(burn_in);
    let kept_len = kept.len().max(1);

    let mut ess = Vec::with_capacity(d);
    for j in 0..d {
        let series = trace.marginal(j, burn_in);
        let value = if series.len() >= 10 {
            effective_sample_size(&series).value.min(series.len() as f64)
        } else {
            1.0
        };
        ess.push(value);
    }

    let mut posterior_mean = vec![0.0; d];
    for state in kept {
        for (m, v) in posterior_mean.iter_mut().zip(state.iter()) {
            *m += v;
        }
    }
    for m in &mut posterior_mean {
        *m /= kept_len as f64;
    }

    let squared_error = truth.map(|t| {
        posterior_mean
            .iter()
            .zip(&t.mean)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    });
    let kl = truth.map(|t| kl_divergence_binned(kept, &t.grid, kl_bin));

    let moves = accepted_move_lengths(trace);
    let move_quartiles = moves
        .iter()
        .map(|series| {
            if series.is_empty() {
                [0.0, 0.0, 0.0]
            } else {
                [
                    quantile(series, 0.25),
                    quantile(series, 0.5),
                    quantile(series, 0.75),
                ]
            }
        })
        .collect();

    let wall = trace.wall_seconds();
    let summary = ChainSummary {
        algorithm: trace.kernel.algorithm.clone(),
        n_draws: trace.kernel.n_draws,
        chain: chain_label.to_string(),
        iterations: trace.iterations(),
        burn_in,
        acceptance_rate: trace.acceptance_rate(),
        epsilon: trace.kernel.epsilon,
        leapfrog_steps: trace.kernel.leapfrog_steps,
        ess: ess.clone(),
        posterior_mean,
        squared_error,
        kl,
        move_quartiles,
    };
    let timing = ChainTiming {
        algorithm: summary.algorithm.clone(),
        n_draws: summary.n_draws,
        chain: summary.chain.clone(),
        wall_seconds: wall,
        ess_per_second: ess
            .iter()
            .map(|e| if wall > 0.0 { e / wall } else { f64::NAN })
            .collect(),
    };
    (summary, timing)
}

/// Mean over chains of the squared Euclidean error of each chain's
/// post-burn-in mean against the reference mean.
pub fn posterior_mean_mse(chain_means: &[Vec<f64>], reference: &[f64]) -> f64 {
    assert!(!chain_means.is_empty());
    chain_means
        .iter()
        .map(|m| {
            m.iter()
                .zip(reference)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
        })
        .sum::<f64>()
        / chain_means.len() as f64
}

/// Mean and standard-deviation rows over the chains of one
/// (algorithm, draws) group, labelled "mean" and "sd".
pub fn aggregate(rows: &[ChainSummary]) -> Vec<ChainSummary> {
    assert!(!rows.is_empty());
    let d = rows[0].ess.len();
    let template = rows[0].clone();
    let n = rows.len() as f64;

    let collect = |f: &dyn Fn(&ChainSummary) -> f64| -> (f64, f64) {
        let values: Vec<f64> = rows.iter().map(f).collect();
        let mean = values.iter().sum::<f64>() / n;
        let sd = if rows.len() > 1 {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        (mean, sd)
    };

    let mut mean_row = template.clone();
    let mut sd_row = template;
    mean_row.chain = "mean".into();
    sd_row.chain = "sd".into();

    let (m, s) = collect(&|r| r.acceptance_rate);
    mean_row.acceptance_rate = m;
    sd_row.acceptance_rate = s;
    for j in 0..d {
        let (m, s) = collect(&move |r: &ChainSummary| r.ess[j]);
        mean_row.ess[j] = m;
        sd_row.ess[j] = s;
        let (m, s) = collect(&move |r: &ChainSummary| r.posterior_mean[j]);
        mean_row.posterior_mean[j] = m;
        sd_row.posterior_mean[j] = s;
        for q in 0..3 {
            let (m, s) = collect(&move |r: &ChainSummary| r.move_quartiles[j][q]);
            mean_row.move_quartiles[j][q] = m;
            sd_row.move_quartiles[j][q] = s;
        }
    }
    if rows.iter().all(|r| r.squared_error.is_some()) {
        let (m, s) = collect(&|r| r.squared_error.unwrap());
        mean_row.squared_error = Some(m);
        sd_row.squared_error = Some(s);
    }
    if rows.iter().all(|r| r.kl.is_some()) {
        let (m, s) = collect(&|r| r.kl.unwrap());
        mean_row.kl = Some(m);
        sd_row.kl = Some(s);
    }
    vec![mean_row, sd_row]
}

fn opt_to_field<T: std::fmt::Display>(v: &Option<T>) -> String {
    match v {
        Some(x) => x.to_string(),
        None => String::new(),
    }
}

fn field_to_opt_f64(s: &str) -> Result<Option<f64>> {
    if s.is_empty() {
        Ok(None)
    } else {
        s.parse::<f64>()
            .map(Some)
            .map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
    }
}

/// Writes summary rows. Every row must have the same dimension.
pub fn write_summary_csv(path: &Path, rows: &[ChainSummary]) -> Result<()> {
    assert!(!rows.is_empty());
    let d = rows[0].ess.len();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let mut header =
        String::from("algorithm,n_draws,chain,iterations,burn_in,acceptance_rate,epsilon,leapfrog_steps");
    for j in 1..=d {
        header.push_str(&format!(",ess_{j}"));
    }
    for j in 1..=d {
        header.push_str(&format!(",mean_{j}"));
    }
    header.push_str(",squared_error,kl");
    for j in 1..=d {
        header.push_str(&format!(",move_q25_{j},move_q50_{j},move_q75_{j}"));
    }
    writeln!(out, "{header}")?;
    for row in rows {
        assert_eq!(row.ess.len(), d, "mixed dimensions in summary rows");
        let mut line = format!(
            "{},{},{},{},{},{},{},{}",
            row.algorithm,
            opt_to_field(&row.n_draws),
            row.chain,
            row.iterations,
            row.burn_in,
            row.acceptance_rate,
            opt_to_field(&row.epsilon),
            opt_to_field(&row.leapfrog_steps),
        );
        for v in &row.ess {
            line.push_str(&format!(",{v}"));
        }
        for v in &row.posterior_mean {
            line.push_str(&format!(",{v}"));
        }
        line.push_str(&format!(
            ",{},{}",
            opt_to_field(&row.squared_error),
            opt_to_field(&row.kl)
        ));
        for q in &row.move_quartiles {
            line.push_str(&format!(",{},{},{}", q[0], q[1], q[2]));
        }
        writeln!(out, "{line}")?;
    }
    Ok(())
}

/// Reads rows written by [`write_summary_csv`].
pub fn read_summary_csv(path: &Path) -> Result<Vec<ChainSummary>> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty summary file".into()))?;
    let d = header.split(',').filter(|c| c.starts_with("ess_")).count();
    let mut rows = Vec::new();
    for line in lines {
        let fields: Vec<&str> = line.split(',').collect();
        let expected = 10 + 5 * d;
        if fields.len() != expected {
            return Err(Error::Parse(format!(
                "row has {} fields, expected {expected}",
                fields.len()
            )));
        }
        let parse_usize = |s: &str| -> Result<usize> {
            s.parse()
                .map_err(|e| Error::Parse(format!("bad integer {s:?}: {e}")))
        };
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|e| Error::Parse(format!("bad float {s:?}: {e}")))
        };
        let mut at = 8;
        let mut take = |k: usize| {
            let slice = &fields[at..at + k];
            at += k;
            slice.to_vec()
        };
        let ess = take(d)
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Result<Vec<_>>>()?;
        let posterior_mean = take(d)
            .iter()
            .map(|s| parse_f64(s))
            .collect::<Result<Vec<_>>>()?;
        let tail = take(2 + 3 * d);
        let squared_error = field_to_opt_f64(tail[0])?;
        let kl = field_to_opt_f64(tail[1])?;
        let mut move_quartiles = Vec::with_capacity(d);
        for j in 0..d {
            move_quartiles.push([
                parse_f64(tail[2 + 3 * j])?,
                parse_f64(tail[3 + 3 * j])?,
                parse_f64(tail[4 + 3 * j])?,
            ]);
        }
        rows.push(ChainSummary {
            algorithm: fields[0].to_string(),
            n_draws: if fields[1].is_empty() {
                None
            } else {
                Some(parse_usize(fields[1])?)
            },
            chain: fields[2].to_string(),
            iterations: parse_usize(fields[3])?,
            burn_in: parse_usize(fields[4])?,
            acceptance_rate: parse_f64(fields[5])?,
            epsilon: field_to_opt_f64(fields[6])?,
            leapfrog_steps: if fields[7].is_empty() {
                None
            } else {
                Some(parse_usize(fields[7])?)
            },
            ess,
            posterior_mean,
            squared_error,
            kl,
            move_quartiles,
        });
    }
    Ok(rows)
}
