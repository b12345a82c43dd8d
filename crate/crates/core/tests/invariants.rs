//! Statistical invariants that take more than a unit test's worth of
//! computation: Monte Carlo convergence rates, mode-search accuracy
//! against exact posterior grids, sampling-error scaling of the
//! posterior-mean error, and exchange convergence with chain length.

use rand::Rng;

use nhmc::estimators::{hessian_precision_estimate, AuxiliaryBatch};
use nhmc::exact_oracle::{kl_divergence_binned, potts_grad_log_z, potts_log_z, PosteriorGrid};
use nhmc::gibbs_models::{GibbsModel, PottsModel};
use nhmc::math::{mean, sample_variance};
use nhmc::params::ParamVector;
use nhmc::prior::Prior;
use nhmc::rng::{derive_seed, label, stream};
use nhmc::samplers::{
    leapfrog, run_chain, ExchangeKernel, MassMatrix, MvnProposal, PhasePoint,
};
use nhmc::tuning::{
    map_search_ruppert_polyak, map_search_ruppert_polyak_with, mass_matrix_from_mode,
    RuppertPolyakOptions,
};

const SEED: u64 = 31_337;

fn seeded(name: &str) -> nhmc::rng::Stream {
    stream(derive_seed(SEED, &[label(name)]))
}

/// The gradient estimate converges at the Monte Carlo rate: the slope
/// of log error against log batch size sits in [-0.7, -0.3].
#[test]
fn gradient_error_shrinks_at_the_monte_carlo_rate() {
    let model = PottsModel::new(8, 8, 2).unwrap();
    let theta = ParamVector::new(vec![0.0, 0.4]);
    let exact = potts_grad_log_z(&model, &theta).unwrap();
    let mut rng = seeded("mc-rate");
    let sizes = [10usize, 100, 1_000, 10_000];
    let sweeps = 120;

    let mut mean_log_error = Vec::new();
    for &n in &sizes {
        let mut errors = Vec::new();
        for _ in 0..20 {
            let batch = AuxiliaryBatch::simulate(&model, &theta, n, sweeps, &mut rng);
            let est = batch.mean_stats();
            let err = est
                .iter()
                .zip(&exact)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            errors.push(err);
        }
        mean_log_error.push(mean(&errors).ln());
    }

    // Least-squares slope over log N.
    let xs: Vec<f64> = sizes.iter().map(|n| (*n as f64).ln()).collect();
    let x_bar = mean(&xs);
    let y_bar = mean(&mean_log_error);
    let slope = xs
        .iter()
        .zip(&mean_log_error)
        .map(|(x, y)| (x - x_bar) * (y - y_bar))
        .sum::<f64>()
        / xs.iter().map(|x| (x - x_bar) * (x - x_bar)).sum::<f64>();
    assert!(
        (-0.7..=-0.3).contains(&slope),
        "error decay slope {slope:.3} outside [-0.7, -0.3]"
    );
}

/// With the exact gradient substituted, the projected Ruppert-Polyak
/// search lands within 0.02 per component of the exact posterior mode.
#[test]
fn mode_search_with_exact_gradients_finds_the_grid_argmax() {
    let model = PottsModel::new(3, 3, 2).unwrap();
    let mut rng = seeded("rp-exact");
    // A fixed observation with an interior, well-curved mode:
    // five sites on, eight of twelve edges agreeing.
    let mut observed = nhmc::gibbs_models::LatticeConfig::constant(3, 3, 2, 0);
    for site in [0usize, 1, 2, 3, 4] {
        observed.states[site] = 1;
    }
    let obs_stats = model.suff_stats(&observed).unwrap();
    assert_eq!(obs_stats.as_slice(), &[1.0, 8.0]);
    let prior = Prior::uniform_box(vec![-0.5, 0.0], vec![0.5, 1.0]);

    let grid = PosteriorGrid::compute(
        |theta| Ok(theta.dot(&obs_stats) - potts_log_z(&model, theta)?),
        [-0.5, 0.0],
        [0.5, 1.0],
        400,
    )
    .unwrap();
    let argmax = grid.argmax();

    let estimate = map_search_ruppert_polyak_with(
        |theta, _rng: &mut nhmc::rng::Stream| {
            let grad_z = potts_grad_log_z(&model, theta)?;
            Ok(obs_stats
                .iter()
                .zip(&grad_z)
                .map(|(o, g)| o - g)
                .collect())
        },
        &prior,
        &ParamVector::new(vec![0.0, 0.5]),
        RuppertPolyakOptions::default(),
        &mut rng,
    )
    .unwrap();

    for j in 0..2 {
        assert!(
            (estimate.theta[j] - argmax[j]).abs() < 0.02,
            "component {j}: {} vs argmax {}",
            estimate.theta[j],
            argmax[j]
        );
    }
}

/// Twenty stochastic mode searches scatter tightly around the exact
/// mode: per-component root-mean-square deviation below 0.05.
#[test]
fn stochastic_mode_searches_concentrate_on_the_exact_mode() {
    let model = PottsModel::new(8, 8, 2).unwrap();
    let mut rng = seeded("rp-stochastic");
    let observed = model
        .forward_sample(&ParamVector::new(vec![0.0, 0.5]), 1, 300, &mut rng)
        .pop()
        .unwrap();
    let obs_stats = model.suff_stats(&observed).unwrap();
    let prior = Prior::uniform_box(vec![-0.5, 0.0], vec![0.5, 1.0]);

    let grid = PosteriorGrid::compute(
        |theta| Ok(theta.dot(&obs_stats) - potts_log_z(&model, theta)?),
        [-0.5, 0.0],
        [0.5, 1.0],
        150,
    )
    .unwrap();
    let argmax = grid.argmax();

    let options = RuppertPolyakOptions {
        max_iterations: 1_200,
        ..Default::default()
    };
    let mut deviations = [Vec::new(), Vec::new()];
    for _ in 0..20 {
        let estimate = map_search_ruppert_polyak(
            &model,
            &observed,
            &prior,
            10,
            80,
            &ParamVector::new(vec![0.0, 0.5]),
            options,
            &mut rng,
        )
        .unwrap();
        for j in 0..2 {
            deviations[j].push(estimate.theta[j] - argmax[j]);
        }
    }
    for (j, devs) in deviations.iter().enumerate() {
        let rms = (devs.iter().map(|d| d * d).sum::<f64>() / devs.len() as f64).sqrt();
        assert!(rms < 0.05, "component {j}: rms deviation {rms:.4}");
    }
}

/// Exchange converges: the binned divergence against the exact grid
/// shrinks as the chain grows.
#[test]
fn exchange_divergence_shrinks_with_chain_length() {
    let model = PottsModel::new(3, 3, 2).unwrap();
    let mut rng = seeded("exchange-shrink");
    let observed = model
        .forward_sample(&ParamVector::new(vec![0.0, 0.5]), 1, 150, &mut rng)
        .pop()
        .unwrap();
    let obs_stats = model.suff_stats(&observed).unwrap();
    let lower = [-0.2, 0.3];
    let upper = [0.2, 0.7];
    let prior = Prior::uniform_box(lower.to_vec(), upper.to_vec());
    let grid = PosteriorGrid::compute(
        |theta| Ok(theta.dot(&obs_stats) - potts_log_z(&model, theta)?),
        lower,
        upper,
        200,
    )
    .unwrap();
    let cov = grid.covariance();
    let proposal = MvnProposal::new(
        nalgebra::DMatrix::from_row_slice(2, 2, &[cov[0][0], cov[0][1], cov[1][0], cov[1][1]])
            * (2.38 * 2.38 / 2.0),
    )
    .unwrap();
    let kernel = ExchangeKernel::new(&model, &observed, &prior, proposal, 1, 30).unwrap();

    let start = ParamVector::new(vec![0.0, 0.5]);
    let trace = run_chain(&kernel, &start, 100_000, derive_seed(SEED, &[label("ex-chain")])).unwrap();
    let short_kl = kl_divergence_binned(&trace.kept_states(500)[..9_500], &grid, 0.01);
    let long_kl = kl_divergence_binned(trace.kept_states(500), &grid, 0.01);
    assert!(
        long_kl < short_kl / 2.0,
        "divergence did not shrink: {short_kl:.4} -> {long_kl:.4}"
    );
}

/// The one-step leapfrog map preserves volume under a posterior-shaped
/// quadratic surrogate gradient (precision from the mass pipeline).
#[test]
fn leapfrog_volume_preserved_under_posterior_surrogate() {
    let model = PottsModel::new(3, 3, 2).unwrap();
    let mut rng = seeded("surrogate");
    let theta_star = ParamVector::new(vec![0.1, 0.45]);
    let mass = mass_matrix_from_mode(
        &model,
        &theta_star,
        &Prior::uniform_box(vec![-0.5, 0.0], vec![0.5, 1.0]),
        500,
        60,
        &mut rng,
    )
    .unwrap();
    let precision = mass.matrix().clone();
    let center = theta_star.clone();
    let grad = move |t: &ParamVector| {
        let d = nalgebra::DVector::from_vec(vec![t[0] - center[0], t[1] - center[1]]);
        let g = &precision * d;
        Ok(vec![g[0], g[1]])
    };

    let flow = |z: [f64; 4]| {
        let start = PhasePoint::new(ParamVector::new(vec![z[0], z[1]]), vec![z[2], z[3]]);
        let path = leapfrog(&grad, &mass, &start, 0.17, 1).unwrap();
        let end = &path[1];
        [end.theta[0], end.theta[1], end.momentum[0], end.momentum[1]]
    };
    let z0 = [0.12, 0.4, 0.6, -0.4];
    let h = 1e-5;
    let mut jac = nalgebra::DMatrix::<f64>::zeros(4, 4);
    for col in 0..4 {
        let mut up = z0;
        let mut dn = z0;
        up[col] += h;
        dn[col] -= h;
        let fu = flow(up);
        let fd = flow(dn);
        for row in 0..4 {
            jac[(row, col)] = (fu[row] - fd[row]) / (2.0 * h);
        }
    }
    let det = jac.determinant();
    assert!((det - 1.0).abs() < 1e-6, "det {det}");
}

/// The precision estimate at the mode matches the finite-difference
/// Hessian of the exact log partition, elementwise within three
/// standard errors of the sample covariance.
#[test]
fn precision_estimate_matches_the_exact_log_partition_hessian() {
    let model = PottsModel::new(8, 8, 2).unwrap();
    let theta = ParamVector::new(vec![0.0, 0.4]);
    let mut rng = seeded("hessian");
    let n = 500;
    let batch = AuxiliaryBatch::simulate(&model, &theta, n, 200, &mut rng);
    let estimate =
        hessian_precision_estimate(&theta, &batch, &Prior::Flat { dim: 2 }).unwrap();

    // Central second differences of the exact log partition.
    let step = 1e-3;
    let log_z = |a: f64, b: f64| potts_log_z(&model, &ParamVector::new(vec![a, b])).unwrap();
    let t = theta.as_slice();
    let hessian = [
        [
            (log_z(t[0] + step, t[1]) - 2.0 * log_z(t[0], t[1]) + log_z(t[0] - step, t[1]))
                / (step * step),
            (log_z(t[0] + step, t[1] + step) - log_z(t[0] + step, t[1] - step)
                - log_z(t[0] - step, t[1] + step)
                + log_z(t[0] - step, t[1] - step))
                / (4.0 * step * step),
        ],
        [0.0, (log_z(t[0], t[1] + step) - 2.0 * log_z(t[0], t[1]) + log_z(t[0], t[1] - step))
            / (step * step)],
    ];
    for i in 0..2 {
        for j in 0..2 {
            let expected = if i == 1 && j == 0 {
                hessian[0][1]
            } else {
                hessian[i][j]
            };
            let se = ((estimate[(i, i)] * estimate[(j, j)] + estimate[(i, j)].powi(2))
                / n as f64)
                .sqrt();
            assert!(
                (estimate[(i, j)] - expected).abs() < 3.0 * se,
                "({i},{j}): {} vs {expected} (se {se})",
                estimate[(i, j)]
            );
        }
    }
}

/// Chains drawn i.i.d. from the exact posterior have posterior-mean MSE
/// near trace(cov)/n — the mean-squared-error column measures sampling
/// noise, nothing else.
#[test]
fn posterior_mean_mse_matches_the_central_limit_scale() {
    let model = PottsModel::new(3, 3, 2).unwrap();
    let mut rng = seeded("mse-clt");
    let observed = model
        .forward_sample(&ParamVector::new(vec![0.0, 0.5]), 1, 150, &mut rng)
        .pop()
        .unwrap();
    let obs_stats = model.suff_stats(&observed).unwrap();
    let grid = PosteriorGrid::compute(
        |theta| Ok(theta.dot(&obs_stats) - potts_log_z(&model, theta)?),
        [-0.5, 0.0],
        [0.5, 1.0],
        150,
    )
    .unwrap();
    let truth = grid.mean();
    let cov = grid.covariance();
    let sampler = grid.sampler();

    let n_per_chain = 500;
    let expected_mse = (cov[0][0] + cov[1][1]) / n_per_chain as f64;
    let mut rep_mse = Vec::new();
    for _ in 0..20 {
        let mut chain_errors = Vec::new();
        for _ in 0..4 {
            let mut sum = [0.0f64; 2];
            for _ in 0..n_per_chain {
                let draw = sampler.sample(&mut rng);
                sum[0] += draw[0];
                sum[1] += draw[1];
            }
            let err = (sum[0] / n_per_chain as f64 - truth[0]).powi(2)
                + (sum[1] / n_per_chain as f64 - truth[1]).powi(2);
            chain_errors.push(err);
        }
        rep_mse.push(mean(&chain_errors));
    }
    let observed_mse = mean(&rep_mse);
    let ratio = observed_mse / expected_mse;
    assert!(
        (0.5..2.0).contains(&ratio),
        "MSE {observed_mse:.3e} vs CLT {expected_mse:.3e} (ratio {ratio:.2})"
    );
    // And the replication noise itself is modest.
    assert!(sample_variance(&rep_mse).sqrt() < expected_mse);
}

/// Forward draws of both models stay inside their statistic bounds
/// across a spread of parameters.
#[test]
fn sampled_statistics_respect_their_bounds_across_parameters() {
    let model = PottsModel::new(5, 5, 3).unwrap();
    let mut rng = seeded("bounds");
    let edges = model.edge_count() as f64;
    let sites = model.site_count() as f64;
    for _ in 0..5 {
        let theta = ParamVector::new(vec![
            rng.random_range(-0.8..0.8),
            rng.random_range(-0.5..0.5),
            rng.random_range(0.0..0.9),
        ]);
        for x in model.forward_sample(&theta, 40, 15, &mut rng) {
            let s = model.stats_unchecked(&x);
            assert!(s[0] >= -sites && s[0] <= sites);
            assert!(s[1] >= -sites && s[1] <= sites);
            assert!(s[2] >= 0.0 && s[2] <= edges);
        }
    }
}
