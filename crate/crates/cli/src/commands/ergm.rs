//! The network experiment: load a graph (or simulate a tiny one), find
//! the mode by the harmonic-gain scheme, build the mass matrix, and run
//! noisy HMC against the exchange baselines. Ground truth comes from
//! full enumeration when the graph is small enough, from a long-run
//! reference trace when one is supplied, and is otherwise absent.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use nhmc::diagnostics::{aggregate, write_summary_csv, ChainSummary, ChainTiming, GroundTruth};
use nhmc::exact_oracle::{enumerate_stats, log_z_from_stats, PosteriorGrid};
use nhmc::gibbs_models::{read_graph, ErgmModel, GibbsModel, GraphConfig};
use nhmc::params::ParamVector;
use nhmc::prior::Prior;
use nhmc::rng::{derive_seed, label, stream};
use nhmc::samplers::{ExchangeKernel, MonteCarloSource, MvnProposal, NoisyHmcKernel};
use nhmc::tuning::{
    adapt_step_size, exchange_proposal_cov, map_search_robbins_monro, mass_matrix_from_mode,
    DualAveragingOptions,
};

use super::common::run_setting;
use crate::config::{fmt_f64, fmt_list, fmt_pair, ConfigMap};
use crate::report::{prepare_out_dir, unix_seconds, write_json, write_metadata, OutDir};

#[derive(Clone, Debug)]
pub struct ErgmConfig {
    /// Edge-list file; absent means simulate a graph with `nodes` nodes.
    pub graph: Option<PathBuf>,
    /// Expected (edges, 2-stars) of the loaded graph; abort on mismatch.
    pub expect_stats: Option<[f64; 2]>,
    pub nodes: usize,
    pub theta_true: [f64; 2],
    /// "flat" or "box"; the box enables exact enumeration ground truth.
    pub prior: String,
    pub prior_low: [f64; 2],
    pub prior_high: [f64; 2],
    pub nhmc_draws: Vec<usize>,
    pub nex_draws: Vec<usize>,
    pub chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub sweeps: usize,
    pub obs_sweeps: usize,
    pub rm_iterations: usize,
    pub rm_gain: f64,
    pub rm_draws: usize,
    pub hessian_draws: usize,
    pub tune_iterations: usize,
    pub max_leapfrog: usize,
    pub target_accept: f64,
    pub grid_resolution: usize,
    pub kl_bin: f64,
    /// Long-run reference trace (chain CSV) for the posterior mean.
    pub reference: Option<PathBuf>,
    pub reference_burn_in: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

impl ErgmConfig {
    pub fn from_map(map: &mut ConfigMap) -> Result<Self> {
        let expect = match map.take("expect_stats") {
            None => None,
            Some(raw) => {
                let parts: Vec<&str> = raw.split(',').map(str::trim).collect();
                if parts.len() != 2 {
                    bail!("expect_stats wants `edges,two_stars`");
                }
                Some([parts[0].parse()?, parts[1].parse()?])
            }
        };
        let config = ErgmConfig {
            graph: map.optional_path("graph"),
            expect_stats: expect,
            nodes: map.parsed("nodes", 5usize)?,
            theta_true: map.pair_f64("theta_true", [-1.0, 0.1])?,
            prior: map.string("prior", "flat"),
            prior_low: map.pair_f64("prior_low", [-3.0, -1.5])?,
            prior_high: map.pair_f64("prior_high", [1.5, 1.5])?,
            nhmc_draws: map.list_usize("nhmc_draws", &[10])?,
            nex_draws: map.list_usize("nex_draws", &[1, 25])?,
            chains: map.parsed("chains", 1usize)?,
            iterations: map.parsed("iterations", 5_000usize)?,
            burn_in: map.parsed("burn_in", 500usize)?,
            sweeps: map.parsed("sweeps", 100usize)?,
            obs_sweeps: map.parsed("obs_sweeps", 300usize)?,
            rm_iterations: map.parsed("rm_iterations", 200usize)?,
            rm_gain: map.parsed("rm_gain", 1.0f64)?,
            rm_draws: map.parsed("rm_draws", 10usize)?,
            hessian_draws: map.parsed("hessian_draws", 500usize)?,
            tune_iterations: map.parsed("tune_iterations", 500usize)?,
            max_leapfrog: map.parsed("max_leapfrog", 1_000usize)?,
            target_accept: map.parsed("target_accept", 0.65f64)?,
            grid_resolution: map.parsed("grid_resolution", 200usize)?,
            kl_bin: map.parsed("kl_bin", 0.01f64)?,
            reference: map.optional_path("reference"),
            reference_burn_in: map.parsed("reference_burn_in", 500usize)?,
            seed: map.parsed("seed", 42u64)?,
            out: PathBuf::from(map.string("out", "runs/ergm")),
            workers: map.parsed("workers", 0usize)?,
        };
        map.finish()?;
        Ok(config)
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        if let Some(path) = &self.graph {
            e.insert("graph".into(), path.display().to_string());
        }
        if let Some(stats) = self.expect_stats {
            e.insert("expect_stats".into(), fmt_pair(stats));
        }
        e.insert("nodes".into(), self.nodes.to_string());
        e.insert("theta_true".into(), fmt_pair(self.theta_true));
        e.insert("prior".into(), self.prior.clone());
        e.insert("prior_low".into(), fmt_pair(self.prior_low));
        e.insert("prior_high".into(), fmt_pair(self.prior_high));
        e.insert("nhmc_draws".into(), fmt_list(&self.nhmc_draws));
        e.insert("nex_draws".into(), fmt_list(&self.nex_draws));
        e.insert("chains".into(), self.chains.to_string());
        e.insert("iterations".into(), self.iterations.to_string());
        e.insert("burn_in".into(), self.burn_in.to_string());
        e.insert("sweeps".into(), self.sweeps.to_string());
        e.insert("obs_sweeps".into(), self.obs_sweeps.to_string());
        e.insert("rm_iterations".into(), self.rm_iterations.to_string());
        e.insert("rm_gain".into(), fmt_f64(self.rm_gain));
        e.insert("rm_draws".into(), self.rm_draws.to_string());
        e.insert("hessian_draws".into(), self.hessian_draws.to_string());
        e.insert("tune_iterations".into(), self.tune_iterations.to_string());
        e.insert("max_leapfrog".into(), self.max_leapfrog.to_string());
        e.insert("target_accept".into(), fmt_f64(self.target_accept));
        e.insert("grid_resolution".into(), self.grid_resolution.to_string());
        e.insert("kl_bin".into(), fmt_f64(self.kl_bin));
        if let Some(path) = &self.reference {
            e.insert("reference".into(), path.display().to_string());
            e.insert(
                "reference_burn_in".into(),
                self.reference_burn_in.to_string(),
            );
        }
        e.insert("seed".into(), self.seed.to_string());
        e.insert("out".into(), self.out.display().to_string());
        e.insert("workers".into(), self.workers.to_string());
        e
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErgmTuning {
    pub mode_theta: Vec<f64>,
    pub mass: Vec<Vec<f64>>,
    pub exchange_proposal_cov: Vec<Vec<f64>>,
    pub settings: Vec<super::potts::SettingTuning>,
}

#[derive(Debug)]
pub struct ErgmOutcome {
    pub graph_stats: [f64; 2],
    pub mode: Vec<f64>,
    pub summaries: Vec<ChainSummary>,
    pub timings: Vec<ChainTiming>,
    pub truth_mean: Option<Vec<f64>>,
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Posterior mean of a long-run reference trace in the chain CSV format.
fn reference_mean(path: &Path, burn_in: usize) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("loading reference trace {}", path.display()))?;
    let mut lines = text.lines();
    let header = lines.next().context("empty reference trace")?;
    let theta_cols: Vec<usize> = header
        .split(',')
        .enumerate()
        .filter(|(_, name)| name.starts_with("theta_"))
        .map(|(idx, _)| idx)
        .collect();
    if theta_cols.is_empty() {
        bail!("reference trace has no theta columns");
    }
    let mut mean = vec![0.0; theta_cols.len()];
    let mut count = 0usize;
    for line in lines.skip(burn_in) {
        let fields: Vec<&str> = line.split(',').collect();
        for (slot, col) in theta_cols.iter().enumerate() {
            mean[slot] += fields[*col].parse::<f64>()?;
        }
        count += 1;
    }
    if count == 0 {
        bail!("reference trace shorter than its burn-in");
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    Ok(mean)
}

pub fn cmd_ergm(config: &ErgmConfig, dry_run: bool) -> Result<Option<ErgmOutcome>> {
    let started = unix_seconds();
    prepare_out_dir(&config.out)?;
    let out = OutDir { root: &config.out };
    out.write_resolved(&config.resolved())?;

    // Graph: loaded or simulated.
    let (model, observed): (ErgmModel, GraphConfig) = match &config.graph {
        Some(path) => {
            let graph =
                read_graph(path).with_context(|| format!("loading graph {}", path.display()))?;
            let model = ErgmModel::new(graph.n)?;
            (model, graph)
        }
        None => {
            let model = ErgmModel::new(config.nodes)?;
            let mut rng = stream(derive_seed(config.seed, &[label("ergm-observation")]));
            let graph = model
                .forward_sample(
                    &ParamVector::new(config.theta_true.to_vec()),
                    1,
                    config.obs_sweeps,
                    &mut rng,
                )
                .pop()
                .unwrap();
            (model, graph)
        }
    };
    let obs_stats = model.suff_stats(&observed)?;
    println!(
        "graph: {} nodes, {} edges, {} 2-stars",
        model.node_count(),
        obs_stats[0],
        obs_stats[1]
    );
    if let Some(expected) = config.expect_stats {
        if obs_stats.as_slice() != expected {
            bail!(
                "graph statistics ({}, {}) do not match the expected ({}, {})",
                obs_stats[0],
                obs_stats[1],
                expected[0],
                expected[1]
            );
        }
    }

    if dry_run {
        for &n in &config.nhmc_draws {
            println!("  nhmc(N={n}): {n} x (L+1) auxiliary draws per iteration");
        }
        for &n in &config.nex_draws {
            println!("  nex(N={n}): {n} auxiliary draws per iteration");
        }
        println!(
            "  {} chains x {} iterations (+{} burn-in) per setting",
            config.chains, config.iterations, config.burn_in
        );
        return Ok(None);
    }

    let prior = match config.prior.as_str() {
        "flat" => Prior::Flat { dim: 2 },
        "box" => Prior::uniform_box(config.prior_low.to_vec(), config.prior_high.to_vec()),
        other => bail!("unknown prior {other:?} (expected flat or box)"),
    };

    // Ground truth: enumeration for small graphs with a box prior,
    // else an optional long-run reference trace.
    let truth: Option<GroundTruth> = if matches!(prior, Prior::UniformBox { .. })
        && model.config_count().is_some_and(|c| c <= 1 << 22)
    {
        let table = enumerate_stats(&model)?;
        let grid = PosteriorGrid::compute(
            |theta| Ok(theta.dot(&obs_stats) - log_z_from_stats(&table, theta)),
            config.prior_low,
            config.prior_high,
            config.grid_resolution,
        )?;
        grid.write_csv(&out.file("posterior_grid.csv"))?;
        let mean = grid.mean();
        println!("exact posterior mean by enumeration: ({:.5}, {:.5})", mean[0], mean[1]);
        Some(GroundTruth {
            grid,
            mean: mean.to_vec(),
        })
    } else {
        None
    };
    let reference = match (&truth, &config.reference) {
        (Some(t), _) => Some(t.mean.clone()),
        (None, Some(path)) => Some(reference_mean(path, config.reference_burn_in)?),
        (None, None) => {
            eprintln!(
                "warning: no enumeration ground truth and no reference trace; \
                 error columns will be empty"
            );
            None
        }
    };

    // Mode by the harmonic-gain scheme, then the mass matrix.
    let mut rm_rng = stream(derive_seed(config.seed, &[label("ergm-mode")]));
    let mode = map_search_robbins_monro(
        &model,
        &observed,
        config.rm_draws,
        config.sweeps,
        &ParamVector::zeros(2),
        config.rm_iterations,
        config.rm_gain,
        &mut rm_rng,
    )?;
    println!("mode estimate: ({:.4}, {:.4})", mode[0], mode[1]);
    let mut hess_rng = stream(derive_seed(config.seed, &[label("ergm-hessian")]));
    let mass = mass_matrix_from_mode(
        &model,
        &mode,
        &prior,
        config.hessian_draws,
        config.sweeps,
        &mut hess_rng,
    )?;
    let proposal_cov = exchange_proposal_cov(&mass, model.dim());

    let mut tuning = ErgmTuning {
        mode_theta: mode.as_slice().to_vec(),
        mass: matrix_rows(mass.matrix()),
        exchange_proposal_cov: matrix_rows(&proposal_cov),
        settings: Vec::new(),
    };

    let mut summaries = Vec::new();
    let mut timings = Vec::new();
    let total_iterations = config.burn_in + config.iterations;
    let truth_ref = truth.as_ref();

    for &n in &config.nhmc_draws {
        let mut kernel = NoisyHmcKernel::new(
            &model,
            &observed,
            &prior,
            mass.clone(),
            0.01,
            1,
            MonteCarloSource {
                n_draws: n,
                sweeps: config.sweeps,
            },
        )?;
        let mut tune_rng = stream(derive_seed(config.seed, &[label("ergm-tune"), n as u64]));
        let fit = adapt_step_size(
            &mut kernel,
            &mode,
            config.tune_iterations,
            config.max_leapfrog,
            DualAveragingOptions {
                target_accept: config.target_accept,
                ..Default::default()
            },
            &mut tune_rng,
        )?;
        println!(
            "nhmc(N={n}): eps = {:.5}, L = {}, tuning acceptance {:.3}",
            fit.epsilon, fit.leapfrog_steps, fit.mean_acceptance
        );
        tuning.settings.push(super::potts::SettingTuning {
            algorithm: "nhmc".into(),
            n_draws: n,
            epsilon: Some(fit.epsilon),
            leapfrog_steps: Some(fit.leapfrog_steps),
            tune_mean_acceptance: Some(fit.mean_acceptance),
        });
        let seeds: Vec<u64> = (0..config.chains)
            .map(|k| derive_seed(config.seed, &[label("ergm-chain"), label("nhmc"), n as u64, k as u64]))
            .collect();
        let (mut rows, mut times) = run_setting(
            &kernel,
            &fit.final_theta,
            total_iterations,
            config.burn_in,
            &seeds,
            truth_ref,
            config.kl_bin,
            &out.file(&format!("nhmc_{n}")),
        )?;
        patch_reference_error(&mut rows, &reference, truth_ref.is_some());
        summaries.append(&mut rows);
        timings.append(&mut times);
    }

    for &n in &config.nex_draws {
        let kernel = ExchangeKernel::new(
            &model,
            &observed,
            &prior,
            MvnProposal::new(proposal_cov.clone())?,
            n,
            config.sweeps,
        )?;
        tuning.settings.push(super::potts::SettingTuning {
            algorithm: "nex".into(),
            n_draws: n,
            epsilon: None,
            leapfrog_steps: None,
            tune_mean_acceptance: None,
        });
        let seeds: Vec<u64> = (0..config.chains)
            .map(|k| derive_seed(config.seed, &[label("ergm-chain"), label("nex"), n as u64, k as u64]))
            .collect();
        let (mut rows, mut times) = run_setting(
            &kernel,
            &mode,
            total_iterations,
            config.burn_in,
            &seeds,
            truth_ref,
            config.kl_bin,
            &out.file(&format!("nex_{n}")),
        )?;
        patch_reference_error(&mut rows, &reference, truth_ref.is_some());
        summaries.append(&mut rows);
        timings.append(&mut times);
    }

    let mut all_rows = summaries.clone();
    for (algorithm, draws) in [("nhmc", &config.nhmc_draws), ("nex", &config.nex_draws)] {
        for &n in draws {
            let group: Vec<ChainSummary> = summaries
                .iter()
                .filter(|s| s.algorithm == algorithm && s.n_draws == Some(n))
                .cloned()
                .collect();
            if !group.is_empty() {
                all_rows.extend(aggregate(&group));
            }
        }
    }
    write_summary_csv(&out.file("summary.csv"), &all_rows)?;
    write_json(&out.file("tuning.json"), &tuning)?;
    write_json(&out.file("timing.json"), &timings)?;
    write_metadata(&out.file("metadata.json"), "ergm", started)?;

    Ok(Some(ErgmOutcome {
        graph_stats: [obs_stats[0], obs_stats[1]],
        mode: mode.as_slice().to_vec(),
        summaries,
        timings,
        truth_mean: reference,
    }))
}

/// When the only reference is a long-run trace (no grid), fill the
/// squared-error column from it; KL stays empty.
fn patch_reference_error(
    rows: &mut [ChainSummary],
    reference: &Option<Vec<f64>>,
    have_grid: bool,
) {
    if have_grid {
        return;
    }
    if let Some(mean) = reference {
        for row in rows {
            row.squared_error = Some(
                row.posterior_mean
                    .iter()
                    .zip(mean)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum(),
            );
        }
    }
}
