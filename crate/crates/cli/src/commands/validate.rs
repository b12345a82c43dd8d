//! Self-checks of the numerical core against independent references:
//! the partition recursion against enumeration, estimator unbiasedness
//! by exhaustive expectation, the integrator against closed forms, and
//! plain HMC against known Gaussian moments. Everything runs to
//! completion; any failure makes the command exit nonzero.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::Result;
use rand::Rng;
use serde::Serialize;

use nhmc::exact_oracle::{enumerate_stats, log_z_from_stats, potts_log_z};
use nhmc::estimators::{ise_log_ratio, lfe_log_ratio, AuxiliaryBatch};
use nhmc::gibbs_models::PottsModel;
use nhmc::math::log_add_exp;
use nhmc::params::ParamVector;
use nhmc::rng::{derive_seed, label, stream};
use nhmc::samplers::{
    hmc_iteration, leapfrog, GaussianTarget, MassMatrix, PhasePoint, TractableTarget,
};

use crate::config::ConfigMap;
use crate::report::{prepare_out_dir, unix_seconds, write_json, write_metadata, OutDir};

#[derive(Clone, Debug)]
pub struct ValidateConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub workers: usize,
    /// Name of a check to corrupt deliberately (exercises the failure
    /// path end to end).
    pub inject_fault: Option<String>,
}

impl ValidateConfig {
    pub fn from_map(map: &mut ConfigMap, inject_fault: Option<String>) -> Result<Self> {
        let config = ValidateConfig {
            seed: map.parsed("seed", 42u64)?,
            out: PathBuf::from(map.string("out", "runs/validate")),
            workers: map.parsed("workers", 0usize)?,
            inject_fault,
        };
        map.finish()?;
        Ok(config)
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        let mut entries = BTreeMap::new();
        entries.insert("seed".into(), self.seed.to_string());
        entries.insert("out".into(), self.out.display().to_string());
        entries.insert("workers".into(), self.workers.to_string());
        entries
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

pub fn cmd_validate(config: &ValidateConfig) -> Result<Vec<CheckResult>> {
    let started = unix_seconds();
    prepare_out_dir(&config.out)?;
    let out = OutDir { root: &config.out };
    out.write_resolved(&config.resolved())?;

    let fault = |name: &str| config.inject_fault.as_deref() == Some(name);
    let mut results = Vec::new();
    for (name, run) in checks() {
        let t0 = Instant::now();
        let outcome = run(config.seed, fault(name));
        let (passed, detail) = match outcome {
            Ok(detail) => (true, detail),
            Err(detail) => (false, detail),
        };
        println!(
            "check {name}: {} ({:.2}s) {detail}",
            if passed { "PASS" } else { "FAIL" },
            t0.elapsed().as_secs_f64()
        );
        results.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    write_json(&out.file("report.json"), &results)?;
    write_metadata(&out.file("metadata.json"), "validate", started)?;
    Ok(results)
}

type Check = fn(u64, bool) -> std::result::Result<String, String>;

fn checks() -> Vec<(&'static str, Check)> {
    vec![
        ("recursion_vs_enumeration", check_recursion),
        ("ise_unbiasedness_exhaustive", check_unbiasedness),
        ("leapfrog", check_leapfrog),
        ("hmc_gaussian_moments", check_gaussian_moments),
    ]
}

/// Exact recursion equals full enumeration on five lattice shapes and
/// twenty random parameter points each, to 1e-9.
fn check_recursion(seed: u64, fault: bool) -> std::result::Result<String, String> {
    let mut rng = stream(derive_seed(seed, &[label("recursion")]));
    let corruption = if fault { 1e-3 } else { 0.0 };
    let mut worst: f64 = 0.0;
    for (h, w) in [(2usize, 2usize), (2, 3), (3, 3), (3, 4), (4, 4)] {
        let model = PottsModel::new(h, w, 2).map_err(|e| e.to_string())?;
        let stats = enumerate_stats(&model).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let theta = ParamVector::new(vec![
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            ]);
            let recursion =
                potts_log_z(&model, &theta).map_err(|e| e.to_string())? + corruption;
            let enumeration = log_z_from_stats(&stats, &theta);
            worst = worst.max((recursion - enumeration).abs());
        }
    }
    let detail = format!("max |recursion - enumeration| = {worst:.3e}");
    if worst < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Exhaustive expectation of the importance weight equals the exact
/// partition ratio on the 3x3 lattice, and the single-segment path
/// estimator bit-matches plain importance sampling.
fn check_unbiasedness(seed: u64, fault: bool) -> std::result::Result<String, String> {
    let mut rng = stream(derive_seed(seed, &[label("unbiasedness")]));
    let model = PottsModel::new(3, 3, 2).map_err(|e| e.to_string())?;
    let stats = enumerate_stats(&model).map_err(|e| e.to_string())?;
    let corruption = if fault { 1e-3 } else { 0.0 };

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let theta = ParamVector::new(vec![
            rng.random_range(-0.5..0.5),
            rng.random_range(0.0..1.0),
        ]);
        let other = ParamVector::new(vec![
            rng.random_range(-0.5..0.5),
            rng.random_range(0.0..1.0),
        ]);
        let log_z_other = log_z_from_stats(&stats, &other);
        let diff = theta.minus(&other);
        let mut log_expectation = f64::NEG_INFINITY;
        for s in &stats {
            let log_f = other.dot(s) - log_z_other;
            log_expectation = log_add_exp(log_expectation, log_f + diff.dot(s));
        }
        let exact = log_z_from_stats(&stats, &theta) - log_z_other + corruption;
        worst = worst.max((log_expectation - exact).abs());
    }

    // Bit-for-bit degeneracy of the path estimator with one segment.
    let anchor = ParamVector::new(vec![0.1, 0.6]);
    let theta = ParamVector::new(vec![-0.2, 0.3]);
    let batch = AuxiliaryBatch::simulate(&model, &anchor, 16, 20, &mut rng);
    let ise = ise_log_ratio(&theta, &anchor, &batch).map_err(|e| e.to_string())?;
    let lfe = lfe_log_ratio(&[theta.clone(), anchor.clone()], &[batch])
        .map_err(|e| e.to_string())?;
    if ise.log_value.to_bits() != lfe.log_value.to_bits() {
        return Err("single-segment path estimate differs from importance sampling".into());
    }

    let detail = format!("max |log E[w] - log ratio| = {worst:.3e}");
    if worst < 1e-9 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

/// Integrator checks: the one-step map on a standard Gaussian equals
/// its closed form, a momentum flip reverses the path, and the one-step
/// map preserves phase-space volume.
fn check_leapfrog(seed: u64, fault: bool) -> std::result::Result<String, String> {
    let mut rng = stream(derive_seed(seed, &[label("leapfrog")]));
    let corruption = if fault { 1e-6 } else { 0.0 };
    let mass1 = MassMatrix::identity(1);

    // Closed form of one step on V = theta^2/2.
    let eps = 0.3;
    let mut worst_map: f64 = 0.0;
    for _ in 0..20 {
        let t0: f64 = rng.random_range(-2.0..2.0);
        let r0: f64 = rng.random_range(-2.0..2.0);
        let start = PhasePoint::new(ParamVector::new(vec![t0]), vec![r0]);
        let path = leapfrog(|t| Ok(vec![t[0]]), &mass1, &start, eps, 1)
            .map_err(|e| e.to_string())?;
        let expected_t = (1.0 - eps * eps / 2.0) * t0 + eps * r0;
        let expected_r = (-eps + eps.powi(3) / 4.0) * t0 + (1.0 - eps * eps / 2.0) * r0;
        worst_map = worst_map
            .max((path[1].theta[0] - expected_t).abs() + corruption)
            .max((path[1].momentum[0] - expected_r).abs());
    }
    if worst_map >= 1e-12 {
        return Err(format!("one-step map deviates by {worst_map:.3e}"));
    }

    // Reversibility on a 2-d Gaussian.
    let mass2 = MassMatrix::identity(2);
    let grad = |t: &ParamVector| Ok(vec![t[0], 2.0 * t[1]]);
    let start = PhasePoint::new(
        ParamVector::new(vec![0.7, -0.4]),
        mass2.sample_momentum(&mut rng),
    );
    let forward = leapfrog(grad, &mass2, &start, 0.15, 25).map_err(|e| e.to_string())?;
    let turned = forward.last().unwrap().clone().flip_momentum();
    let back = leapfrog(grad, &mass2, &turned, 0.15, 25).map_err(|e| e.to_string())?;
    let recovered = back.last().unwrap().clone().flip_momentum();
    let reversal = recovered.theta.distance(&start.theta);
    if reversal >= 1e-10 {
        return Err(format!("momentum-flip reversal misses by {reversal:.3e}"));
    }

    // Volume preservation of the one-step map.
    let flow = |z: [f64; 4]| -> std::result::Result<[f64; 4], String> {
        let start = PhasePoint::new(ParamVector::new(vec![z[0], z[1]]), vec![z[2], z[3]]);
        let path = leapfrog(grad, &mass2, &start, 0.21, 1).map_err(|e| e.to_string())?;
        let end = &path[1];
        Ok([end.theta[0], end.theta[1], end.momentum[0], end.momentum[1]])
    };
    let z0 = [0.3, -0.5, 0.8, 0.1];
    let h = 1e-5;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(4, 4);
    for col in 0..4 {
        let mut up = z0;
        let mut dn = z0;
        up[col] += h;
        dn[col] -= h;
        let fu = flow(up)?;
        let fd = flow(dn)?;
        for row in 0..4 {
            jac[(row, col)] = (fu[row] - fd[row]) / (2.0 * h);
        }
    }
    let det_dev = (jac.determinant() - 1.0).abs();
    if det_dev >= 1e-6 {
        return Err(format!("|jacobian det - 1| = {det_dev:.3e}"));
    }

    Ok(format!(
        "map {worst_map:.1e}, reversal {reversal:.1e}, |det-1| {det_dev:.1e}"
    ))
}

/// 50,000 iterations on a 2-d standard Gaussian: sample mean within
/// 0.02 of zero, sample covariance within 0.05 of identity.
fn check_gaussian_moments(seed: u64, fault: bool) -> std::result::Result<String, String> {
    let mut rng = stream(derive_seed(seed, &[label("gaussian-moments")]));
    let target = GaussianTarget::standard(2);
    let mass = MassMatrix::identity(2);
    let iterations = 50_000;
    let mut theta = ParamVector::zeros(target.dim());
    let mut sum = [0.0f64; 2];
    let mut cross = [[0.0f64; 2]; 2];
    for _ in 0..iterations {
        let step =
            hmc_iteration(&target, &mass, &theta, 0.2, 10, &mut rng).map_err(|e| e.to_string())?;
        theta = step.next;
        for i in 0..2 {
            sum[i] += theta[i];
            for j in 0..2 {
                cross[i][j] += theta[i] * theta[j];
            }
        }
    }
    let n = iterations as f64;
    let mean = [sum[0] / n, sum[1] / n];
    let mut worst_mean: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for i in 0..2 {
        worst_mean = worst_mean.max(mean[i].abs() + if fault { 0.05 } else { 0.0 });
        for j in 0..2 {
            let cov = cross[i][j] / n - mean[i] * mean[j];
            let target_cov = if i == j { 1.0 } else { 0.0 };
            worst_cov = worst_cov.max((cov - target_cov).abs());
        }
    }
    let detail = format!("max |mean| = {worst_mean:.4}, max |cov - I| = {worst_cov:.4}");
    if worst_mean < 0.02 && worst_cov < 0.05 {
        Ok(detail)
    } else {
        Err(detail)
    }
}
