//! Accuracy study of the two ratio estimators along Hamiltonian paths.
//!
//! A noisy HMC chain on a lattice posterior supplies realistic
//! (θ₀ … θ_L) paths. For every collected path and every requested batch
//! size the study computes the absolute error of the endpoint-only
//! importance sampling estimate and of the path-wise estimate against
//! the exact partition ratio, plus a mean-squared-error table per
//! estimator and batch size.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use serde::Serialize;

use nhmc::estimators::{ise_log_ratio, lfe_log_ratio, AuxiliaryBatch};
use nhmc::exact_oracle::potts_log_z;
use nhmc::gibbs_models::{GibbsModel, PottsModel};
use nhmc::params::ParamVector;
use nhmc::prior::Prior;
use nhmc::rng::{derive_seed, label, stream};
use nhmc::samplers::{MonteCarloSource, NoisyHmcKernel};
use nhmc::tuning::{
    adapt_step_size, map_search_ruppert_polyak, mass_matrix_from_mode, DualAveragingOptions,
    RuppertPolyakOptions,
};

use crate::config::{fmt_f64, fmt_list, fmt_pair, ConfigMap};
use crate::report::{prepare_out_dir, unix_seconds, write_json, write_metadata, OutDir};

#[derive(Clone, Debug)]
pub struct RatioStudyConfig {
    pub height: usize,
    pub width: usize,
    pub states: u8,
    pub theta_true: [f64; 2],
    pub prior_low: [f64; 2],
    pub prior_high: [f64; 2],
    /// Number of (θ₀, θ_L) pairs to collect.
    pub pairs: usize,
    /// Batch sizes to evaluate the estimators at.
    pub draws: Vec<usize>,
    /// Batch size of the collection chain itself.
    pub chain_draws: usize,
    pub sweeps: usize,
    pub obs_sweeps: usize,
    pub map_draws: usize,
    pub hessian_draws: usize,
    pub tune_iterations: usize,
    pub max_leapfrog: usize,
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
}

impl RatioStudyConfig {
    pub fn from_map(map: &mut ConfigMap) -> Result<Self> {
        let config = RatioStudyConfig {
            height: map.parsed("height", 10usize)?,
            width: map.parsed("width", 10usize)?,
            states: map.parsed("states", 2u8)?,
            theta_true: map.pair_f64("theta_true", [0.0, 0.5])?,
            prior_low: map.pair_f64("prior_low", [-0.5, 0.0])?,
            prior_high: map.pair_f64("prior_high", [0.5, 1.0])?,
            pairs: map.parsed("pairs", 500usize)?,
            draws: map.list_usize("draws", &[1, 10])?,
            chain_draws: map.parsed("chain_draws", 10usize)?,
            sweeps: map.parsed("sweeps", 100usize)?,
            obs_sweeps: map.parsed("obs_sweeps", 500usize)?,
            map_draws: map.parsed("map_draws", 10usize)?,
            hessian_draws: map.parsed("hessian_draws", 500usize)?,
            tune_iterations: map.parsed("tune_iterations", 150usize)?,
            max_leapfrog: map.parsed("max_leapfrog", 50usize)?,
            seed: map.parsed("seed", 42u64)?,
            out: PathBuf::from(map.string("out", "runs/ratio_study")),
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
        e.insert("prior_low".into(), fmt_pair(self.prior_low));
        e.insert("prior_high".into(), fmt_pair(self.prior_high));
        e.insert("pairs".into(), self.pairs.to_string());
        e.insert("draws".into(), fmt_list(&self.draws));
        e.insert("chain_draws".into(), self.chain_draws.to_string());
        e.insert("sweeps".into(), self.sweeps.to_string());
        e.insert("obs_sweeps".into(), self.obs_sweeps.to_string());
        e.insert("map_draws".into(), self.map_draws.to_string());
        e.insert("hessian_draws".into(), self.hessian_draws.to_string());
        e.insert("tune_iterations".into(), self.tune_iterations.to_string());
        e.insert("max_leapfrog".into(), self.max_leapfrog.to_string());
        e.insert("seed".into(), self.seed.to_string());
        e.insert("out".into(), self.out.display().to_string());
        e.insert("workers".into(), self.workers.to_string());
        e
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioStudyRow {
    /// ‖θ₀ − θ_L‖.
    pub distance: f64,
    pub abs_err_ise: f64,
    pub abs_err_lfe: f64,
    pub n_draws: usize,
    pub leapfrog_steps: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct MseRow {
    pub estimator: String,
    pub n_draws: usize,
    pub mse: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RatioStudyOutcome {
    pub epsilon: f64,
    pub leapfrog_steps: usize,
    pub rows: Vec<RatioStudyRow>,
    pub mse: Vec<MseRow>,
}

pub fn cmd_ratio_study(config: &RatioStudyConfig, dry_run: bool) -> Result<Option<RatioStudyOutcome>> {
    let started = unix_seconds();
    prepare_out_dir(&config.out)?;
    let out = OutDir { root: &config.out };
    out.write_resolved(&config.resolved())?;

    let model = PottsModel::new(config.height, config.width, config.states)
        .context("invalid lattice")?;
    // Refuse instances the exact oracle cannot afford.
    potts_log_z(&model, &ParamVector::new(config.theta_true.to_vec()))
        .context("the exact partition recursion cannot handle this lattice")?;

    if dry_run {
        println!(
            "ratio-study on {}x{} K={}: {} pairs, estimator draws {:?}; \
             collection chain does {} x (L+1) auxiliary draws per iteration",
            config.height,
            config.width,
            config.states,
            config.pairs,
            config.draws,
            config.chain_draws
        );
        return Ok(None);
    }

    let prior = Prior::uniform_box(config.prior_low.to_vec(), config.prior_high.to_vec());
    let theta_true = ParamVector::new(config.theta_true.to_vec());
    let mut obs_rng = stream(derive_seed(config.seed, &[label("ratio-observation")]));
    let obs = model
        .forward_sample(&theta_true, 1, config.obs_sweeps, &mut obs_rng)
        .pop()
        .unwrap();

    // The collection chain mirrors the lattice experiment's pipeline:
    // mode, mass matrix at the mode, then step-size adaptation.
    let mut map_rng = stream(derive_seed(config.seed, &[label("ratio-map")]));
    let map = map_search_ruppert_polyak(
        &model,
        &obs,
        &prior,
        config.map_draws,
        config.sweeps,
        &theta_true,
        RuppertPolyakOptions::default(),
        &mut map_rng,
    )?;
    let mut hess_rng = stream(derive_seed(config.seed, &[label("ratio-hessian")]));
    let mass = mass_matrix_from_mode(
        &model,
        &map.theta,
        &prior,
        config.hessian_draws,
        config.sweeps,
        &mut hess_rng,
    )?;

    let mut kernel = NoisyHmcKernel::new(
        &model,
        &obs,
        &prior,
        mass,
        0.1,
        1,
        MonteCarloSource {
            n_draws: config.chain_draws,
            sweeps: config.sweeps,
        },
    )?;
    let mut tune_rng = stream(derive_seed(config.seed, &[label("ratio-tune")]));
    let fit = adapt_step_size(
        &mut kernel,
        &map.theta,
        config.tune_iterations,
        config.max_leapfrog,
        DualAveragingOptions::default(),
        &mut tune_rng,
    )?;

    let log_z = |theta: &ParamVector| potts_log_z(&model, theta);
    let mut chain_rng = stream(derive_seed(config.seed, &[label("ratio-chain")]));
    let mut theta = fit.final_theta.clone();
    let mut rows: Vec<RatioStudyRow> = Vec::new();
    let mut attempts = 0usize;
    while rows.len() / config.draws.len() < config.pairs {
        attempts += 1;
        if attempts > 20 * config.pairs {
            bail!("too many diverged iterations while collecting pairs");
        }
        let step = kernel.step_recorded(&theta, &mut chain_rng)?;
        let (Some(path), Some(batches)) = (step.path.as_ref(), step.batches.as_ref()) else {
            theta = step.next;
            continue;
        };
        let start = path.first().unwrap();
        let end = path.last().unwrap();
        let exact = log_z(start)? - log_z(end)?;
        let distance = start.distance(end);

        for &n in &config.draws {
            let batches_n: Vec<AuxiliaryBatch<_>> = if n <= config.chain_draws {
                batches.iter().map(|b| b.truncated(n)).collect()
            } else {
                let mut fresh = Vec::with_capacity(batches.len());
                for point in &path[1..] {
                    fresh.push(AuxiliaryBatch::simulate(
                        &model,
                        point,
                        n,
                        config.sweeps,
                        &mut chain_rng,
                    ));
                }
                fresh
            };
            let ise = ise_log_ratio(start, end, batches_n.last().unwrap())?;
            let lfe = lfe_log_ratio(path, &batches_n)?;
            rows.push(RatioStudyRow {
                distance,
                abs_err_ise: (ise.log_value - exact).abs(),
                abs_err_lfe: (lfe.log_value - exact).abs(),
                n_draws: n,
                leapfrog_steps: kernel.steps(),
            });
        }
        theta = step.next;
    }

    let mut mse = Vec::new();
    for &n in &config.draws {
        let of_n: Vec<&RatioStudyRow> = rows.iter().filter(|r| r.n_draws == n).collect();
        let count = of_n.len() as f64;
        mse.push(MseRow {
            estimator: "ise".into(),
            n_draws: n,
            mse: of_n.iter().map(|r| r.abs_err_ise.powi(2)).sum::<f64>() / count,
        });
        mse.push(MseRow {
            estimator: "lfe".into(),
            n_draws: n,
            mse: of_n.iter().map(|r| r.abs_err_lfe.powi(2)).sum::<f64>() / count,
        });
    }

    write_rows_csv(&out.file("ratio_study.csv"), &rows)?;
    write_mse_csv(&out.file("ratio_mse.csv"), &mse)?;
    let outcome = RatioStudyOutcome {
        epsilon: fit.epsilon,
        leapfrog_steps: fit.leapfrog_steps,
        rows,
        mse,
    };
    write_json(
        &out.file("tuning.json"),
        &serde_json::json!({
            "epsilon": outcome.epsilon,
            "leapfrog_steps": outcome.leapfrog_steps,
            "tune_iterations": config.tune_iterations,
        }),
    )?;
    write_metadata(&out.file("metadata.json"), "ratio-study", started)?;
    for row in &outcome.mse {
        println!(
            "{}(N={}): mse of log-ratio error = {:.4}",
            row.estimator, row.n_draws, row.mse
        );
    }
    Ok(Some(outcome))
}

fn write_rows_csv(path: &std::path::Path, rows: &[RatioStudyRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "norm_theta_diff,abs_err_ise,abs_err_lfe,n_draws,leapfrog_steps")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.distance, r.abs_err_ise, r.abs_err_lfe, r.n_draws, r.leapfrog_steps
        )?;
    }
    Ok(())
}

fn write_mse_csv(path: &std::path::Path, rows: &[MseRow]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "estimator,n_draws,mse")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.estimator, r.n_draws, fmt_f64(r.mse))?;
    }
    Ok(())
}
