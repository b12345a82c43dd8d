//! The lattice experiment: simulate or load an observation, find the
//! mode, build the mass matrix, tune the step size, then race noisy HMC
//! against the exchange algorithms with exact ground truth from the
//! partition recursion.

use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use serde::Serialize;

use nhmc::diagnostics::{aggregate, write_summary_csv, ChainSummary, ChainTiming, GroundTruth};
use nhmc::exact_oracle::{potts_log_z, PosteriorGrid};
use nhmc::gibbs_models::{read_lattice, write_lattice, GibbsModel, PottsModel};
use nhmc::params::ParamVector;
use nhmc::prior::Prior;
use nhmc::rng::{derive_seed, label, stream};
use nhmc::samplers::{ExchangeKernel, MonteCarloSource, MvnProposal, NoisyHmcKernel};
use nhmc::tuning::{
    adapt_step_size, exchange_proposal_cov, map_search_ruppert_polyak, mass_matrix_from_mode,
    DualAveragingOptions, RuppertPolyakOptions,
};

use super::common::run_setting;
use crate::config::{fmt_f64, fmt_list, fmt_pair, ConfigMap};
use crate::report::{prepare_out_dir, unix_seconds, write_json, write_metadata, OutDir};

#[derive(Clone, Debug)]
pub struct PottsConfig {
    pub height: usize,
    pub width: usize,
    pub states: u8,
    pub theta_true: [f64; 2],
    /// Load the observation from a file instead of simulating it.
    pub observation: Option<PathBuf>,
    pub prior_low: [f64; 2],
    pub prior_high: [f64; 2],
    /// Algorithms to run: any of "nhmc", "nex".
    pub algorithms: Vec<String>,
    /// Auxiliary draw counts per algorithm.
    pub draws: Vec<usize>,
    pub chains: usize,
    /// Post-burn-in iterations per chain.
    pub iterations: usize,
    pub burn_in: usize,
    pub sweeps: usize,
    pub obs_sweeps: usize,
    pub map_draws: usize,
    pub hessian_draws: usize,
    pub tune_iterations: usize,
    pub max_leapfrog: usize,
    pub target_accept: f64,
    pub grid_resolution: usize,
    pub kl_bin: f64,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

impl PottsConfig {
    pub fn from_map(map: &mut ConfigMap) -> Result<Self> {
        let config = PottsConfig {
            height: map.parsed("height", 8usize)?,
            width: map.parsed("width", 8usize)?,
            states: map.parsed("states", 2u8)?,
            theta_true: map.pair_f64("theta_true", [0.0, 0.5])?,
            observation: map.optional_path("observation"),
            prior_low: map.pair_f64("prior_low", [-0.5, 0.0])?,
            prior_high: map.pair_f64("prior_high", [0.5, 1.0])?,
            algorithms: map
                .string("algorithms", "nhmc,nex")
                .split(',')
                .map(|s| s.trim().to_string())
                .collect(),
            draws: map.list_usize("draws", &[1, 10])?,
            chains: map.parsed("chains", 4usize)?,
            iterations: map.parsed("iterations", 1_500usize)?,
            burn_in: map.parsed("burn_in", 500usize)?,
            sweeps: map.parsed("sweeps", 150usize)?,
            obs_sweeps: map.parsed("obs_sweeps", 500usize)?,
            map_draws: map.parsed("map_draws", 10usize)?,
            hessian_draws: map.parsed("hessian_draws", 500usize)?,
            tune_iterations: map.parsed("tune_iterations", 500usize)?,
            max_leapfrog: map.parsed("max_leapfrog", 100usize)?,
            target_accept: map.parsed("target_accept", 0.65f64)?,
            grid_resolution: map.parsed("grid_resolution", 200usize)?,
            kl_bin: map.parsed("kl_bin", 0.01f64)?,
            seed: map.parsed("seed", 42u64)?,
            out: PathBuf::from(map.string("out", "runs/potts")),
            workers: map.parsed("workers", 0usize)?,
        };
        map.finish()?;
        Ok(config)
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut e = BTreeMap::new();
        e.insert("height".into(), self.height.to_string());
        e.insert("width".into(), self.width.to_string());
        e.insert("states".into(), self.states.to_string());
        e.insert("theta_true".into(), fmt_pair(self.theta_true));
        if let Some(path) = &self.observation {
            e.insert("observation".into(), path.display().to_string());
        }
        e.insert("prior_low".into(), fmt_pair(self.prior_low));
        e.insert("prior_high".into(), fmt_pair(self.prior_high));
        e.insert("algorithms".into(), self.algorithms.join(","));
        e.insert("draws".into(), fmt_list(&self.draws));
        e.insert("chains".into(), self.chains.to_string());
        e.insert("iterations".into(), self.iterations.to_string());
        e.insert("burn_in".into(), self.burn_in.to_string());
        e.insert("sweeps".into(), self.sweeps.to_string());
        e.insert("obs_sweeps".into(), self.obs_sweeps.to_string());
        e.insert("map_draws".into(), self.map_draws.to_string());
        e.insert("hessian_draws".into(), self.hessian_draws.to_string());
        e.insert("tune_iterations".into(), self.tune_iterations.to_string());
        e.insert("max_leapfrog".into(), self.max_leapfrog.to_string());
        e.insert("target_accept".into(), fmt_f64(self.target_accept));
        e.insert("grid_resolution".into(), self.grid_resolution.to_string());
        e.insert("kl_bin".into(), fmt_f64(self.kl_bin));
        e.insert("seed".into(), self.seed.to_string());
        e.insert("out".into(), self.out.display().to_string());
        e.insert("workers".into(), self.workers.to_string());
        e
    }
}

/// Tuning artefacts echoed to `tuning.json`.
#[derive(Clone, Debug, Serialize)]
pub struct PottsTuning {
    pub map_theta: Vec<f64>,
    pub map_iterations: usize,
    pub map_converged: bool,
    pub mass: Vec<Vec<f64>>,
    pub exchange_proposal_cov: Vec<Vec<f64>>,
    pub settings: Vec<SettingTuning>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SettingTuning {
    pub algorithm: String,
    pub n_draws: usize,
    pub epsilon: Option<f64>,
    pub leapfrog_steps: Option<usize>,
    pub tune_mean_acceptance: Option<f64>,
}

#[derive(Debug)]
pub struct PottsOutcome {
    pub summaries: Vec<ChainSummary>,
    pub timings: Vec<ChainTiming>,
    pub truth_mean: [f64; 2],
    pub tuning: PottsTuning,
}

fn matrix_rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn cmd_potts(config: &PottsConfig, dry_run: bool) -> Result<Option<PottsOutcome>> {
    let started = unix_seconds();
    prepare_out_dir(&config.out)?;
    let out = OutDir { root: &config.out };
    out.write_resolved(&config.resolved())?;

    let model = PottsModel::new(config.height, config.width, config.states)
        .context("invalid lattice")?;
    let theta_probe = ParamVector::new(config.theta_true.to_vec());
    potts_log_z(&model, &theta_probe)
        .context("the exact partition recursion cannot handle this lattice")?;

    if dry_run {
        println!("lattice experiment on {}x{} K={}:", config.height, config.width, config.states);
        for algorithm in &config.algorithms {
            for &n in &config.draws {
                match algorithm.as_str() {
                    "nhmc" => println!(
                        "  nhmc(N={n}): {n} x (L+1) auxiliary draws per iteration, \
                         L set by tuning (integration time 2.38/sqrt(2))"
                    ),
                    _ => println!("  nex(N={n}): {n} auxiliary draws per iteration"),
                }
            }
        }
        println!(
            "  {} chains x {} iterations (+{} burn-in) per setting",
            config.chains, config.iterations, config.burn_in
        );
        return Ok(None);
    }

    // Observation.
    let obs = match &config.observation {
        Some(path) => read_lattice(path, config.height, config.width, config.states)
            .with_context(|| format!("loading observation {}", path.display()))?,
        None => {
            let mut rng = stream(derive_seed(config.seed, &[label("potts-observation")]));
            let obs = model
                .forward_sample(&theta_probe, 1, config.obs_sweeps, &mut rng)
                .pop()
                .unwrap();
            write_lattice(&out.file("observation.txt"), &obs)?;
            obs
        }
    };
    let obs_stats = model.suff_stats(&obs)?;
    let prior = Prior::uniform_box(config.prior_low.to_vec(), config.prior_high.to_vec());

    // Ground truth by quadrature on the exact posterior.
    let grid = PosteriorGrid::compute(
        |theta| Ok(theta.dot(&obs_stats) - potts_log_z(&model, theta)?),
        config.prior_low,
        config.prior_high,
        config.grid_resolution,
    )?;
    grid.write_csv(&out.file("posterior_grid.csv"))?;
    let truth_mean = grid.mean();
    let truth = GroundTruth {
        grid,
        mean: truth_mean.to_vec(),
    };
    println!(
        "exact posterior mean: ({:.5}, {:.5})",
        truth_mean[0], truth_mean[1]
    );

    // Mode, mass matrix, exchange proposal.
    let center = ParamVector::new(vec![
        (config.prior_low[0] + config.prior_high[0]) / 2.0,
        (config.prior_low[1] + config.prior_high[1]) / 2.0,
    ]);
    let mut map_rng = stream(derive_seed(config.seed, &[label("potts-map")]));
    let map = map_search_ruppert_polyak(
        &model,
        &obs,
        &prior,
        config.map_draws,
        config.sweeps,
        &center,
        RuppertPolyakOptions::default(),
        &mut map_rng,
    )?;
    if !map.converged {
        eprintln!("warning: mode search hit its iteration cap before the stop threshold");
    }
    let mut hess_rng = stream(derive_seed(config.seed, &[label("potts-hessian")]));
    let mass = mass_matrix_from_mode(
        &model,
        &map.theta,
        &prior,
        config.hessian_draws,
        config.sweeps,
        &mut hess_rng,
    )?;
    let proposal_cov = exchange_proposal_cov(&mass, model.dim());
    println!(
        "mode ({:.4}, {:.4}) after {} iterations",
        map.theta[0], map.theta[1], map.iterations
    );

    let mut tuning = PottsTuning {
        map_theta: map.theta.as_slice().to_vec(),
        map_iterations: map.iterations,
        map_converged: map.converged,
        mass: matrix_rows(mass.matrix()),
        exchange_proposal_cov: matrix_rows(&proposal_cov),
        settings: Vec::new(),
    };

    let mut summaries = Vec::new();
    let mut timings = Vec::new();
    let total_iterations = config.burn_in + config.iterations;

    for algorithm in &config.algorithms {
        for &n in &config.draws {
            let setting = format!("{algorithm}_{n}");
            let dir = out.file(&setting);
            let seeds: Vec<u64> = (0..config.chains)
                .map(|k| {
                    derive_seed(
                        config.seed,
                        &[label("potts-chain"), label(algorithm), n as u64, k as u64],
                    )
                })
                .collect();

            let (mut rows, mut times) = match algorithm.as_str() {
                "nhmc" => {
                    let mut kernel = NoisyHmcKernel::new(
                        &model,
                        &obs,
                        &prior,
                        mass.clone(),
                        0.1,
                        1,
                        MonteCarloSource {
                            n_draws: n,
                            sweeps: config.sweeps,
                        },
                    )?;
                    let mut tune_rng = stream(derive_seed(
                        config.seed,
                        &[label("potts-tune"), n as u64],
                    ));
                    let fit = adapt_step_size(
                        &mut kernel,
                        &map.theta,
                        config.tune_iterations,
                        config.max_leapfrog,
                        DualAveragingOptions {
                            target_accept: config.target_accept,
                            ..Default::default()
                        },
                        &mut tune_rng,
                    )?;
                    println!(
                        "nhmc(N={n}): eps = {:.4}, L = {}, tuning acceptance {:.3}",
                        fit.epsilon, fit.leapfrog_steps, fit.mean_acceptance
                    );
                    tuning.settings.push(SettingTuning {
                        algorithm: algorithm.clone(),
                        n_draws: n,
                        epsilon: Some(fit.epsilon),
                        leapfrog_steps: Some(fit.leapfrog_steps),
                        tune_mean_acceptance: Some(fit.mean_acceptance),
                    });
                    run_setting(
                        &kernel,
                        &fit.final_theta,
                        total_iterations,
                        config.burn_in,
                        &seeds,
                        Some(&truth),
                        config.kl_bin,
                        &dir,
                    )?
                }
                "nex" => {
                    let kernel = ExchangeKernel::new(
                        &model,
                        &obs,
                        &prior,
                        MvnProposal::new(proposal_cov.clone())?,
                        n,
                        config.sweeps,
                    )?;
                    tuning.settings.push(SettingTuning {
                        algorithm: algorithm.clone(),
                        n_draws: n,
                        epsilon: None,
                        leapfrog_steps: None,
                        tune_mean_acceptance: None,
                    });
                    run_setting(
                        &kernel,
                        &map.theta,
                        total_iterations,
                        config.burn_in,
                        &seeds,
                        Some(&truth),
                        config.kl_bin,
                        &dir,
                    )?
                }
                other => anyhow::bail!("unknown algorithm {other:?} (expected nhmc or nex)"),
            };
            for row in &rows {
                println!(
                    "  {setting} chain {}: acceptance {:.3}, ess ({:.0}, {:.0}), kl {:.3}",
                    row.chain,
                    row.acceptance_rate,
                    row.ess[0],
                    row.ess[1],
                    row.kl.unwrap_or(f64::NAN)
                );
            }
            summaries.append(&mut rows);
            timings.append(&mut times);
        }
    }

    // Summary CSV: per-chain rows then mean/sd aggregates per setting.
    let mut all_rows = summaries.clone();
    for algorithm in &config.algorithms {
        for &n in &config.draws {
            let group: Vec<ChainSummary> = summaries
                .iter()
                .filter(|s| s.algorithm == *algorithm && s.n_draws == Some(n))
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
    write_metadata(&out.file("metadata.json"), "potts", started)?;

    Ok(Some(PottsOutcome {
        summaries,
        timings,
        truth_mean,
        tuning,
    }))
}
