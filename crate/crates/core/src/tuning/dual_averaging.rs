//! Dual averaging of the step size towards a target acceptance rate.

/// Constants of the dual-averaging recursion.
#[derive(Clone, Copy, Debug)]
pub struct DualAveragingOptions {
    /// Target mean acceptance probability δ.
    pub target_accept: f64,
    pub gamma: f64,
    pub t0: f64,
    pub kappa: f64,
}

impl Default for DualAveragingOptions {
    fn default() -> Self {
        DualAveragingOptions {
            target_accept: 0.65,
            gamma: 0.05,
            t0: 10.0,
            kappa: 0.75,
        }
    }
}

/// Running state of the recursion. Feed it one observed acceptance
/// probability per iteration; read `current_step` while adapting and
/// freeze `averaged_step` afterwards.
#[derive(Clone, Debug)]
pub struct DualAveraging {
    options: DualAveragingOptions,
    /// Shrinkage target μ = log(10 ε₀).
    mu: f64,
    log_step: f64,
    averaged_log_step: f64,
    error_sum: f64,
    iteration: u64,
}

impl DualAveraging {
    pub fn new(initial_step: f64, options: DualAveragingOptions) -> Self {
        assert!(initial_step > 0.0);
        DualAveraging {
            options,
            mu: (10.0 * initial_step).ln(),
            log_step: initial_step.ln(),
            averaged_log_step: initial_step.ln(),
            error_sum: 0.0,
            iteration: 0,
        }
    }

    /// One update from an observed acceptance probability; returns the
    /// step size to use next.
    pub fn update(&mut self, observed_accept: f64) -> f64 {
        debug_assert!((0.0..=1.0).contains(&observed_accept));
        self.iteration += 1;
        let m = self.iteration as f64;
        let w = 1.0 / (m + self.options.t0);
        self.error_sum =
            (1.0 - w) * self.error_sum + w * (self.options.target_accept - observed_accept);
        self.log_step = self.mu - m.sqrt() / self.options.gamma * self.error_sum;
        let eta = m.powf(-self.options.kappa);
        self.averaged_log_step = eta * self.log_step + (1.0 - eta) * self.averaged_log_step;
        self.current_step()
    }

    /// The non-averaged step size of the last update.
    pub fn current_step(&self) -> f64 {
        self.log_step.exp()
    }

    /// The Polyak-averaged step size, the value to freeze after burn-in.
    pub fn averaged_step(&self) -> f64 {
        self.averaged_log_step.exp()
    }

    pub fn iterations(&self) -> u64 {
        self.iteration
    }
}
