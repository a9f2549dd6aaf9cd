//! Seeded Monte Carlo validation of the fusion analysis.
//!
//! Each trial draws independent perturbations `U_i` with variance
//! `1/theta_i`, forms the fused output `Yhat = sum_i w_i (Y + U_i)`, and
//! accumulates the squared error `(Yhat - Y)^2` together with tail-exceedance
//! counts. The report carries the empirical MSE with its standard error and,
//! per requested deviation `eps`, the empirical tail probability next to the
//! two analytic reference bounds for the optimally-weighted estimator:
//!
//! ```text
//! chebyshev   = min(1, 1 / (eps^2 * sum(theta)))
//! subgaussian = 2 * exp(-eps^2 * sum(theta) / 2)
//! ```
//!
//! The sub-Gaussian bound presumes each perturbation is sub-Gaussian with
//! parameter `1/theta_i`. That holds exactly for the Gaussian and Rademacher
//! kinds; the uniform kind (scaled to variance `1/theta`) has bounded support
//! of half-width `sqrt(3/theta)` and hence parameter `3/theta`, so only the
//! variance-based Chebyshev bound is asserted for it.
//!
//! # Determinism
//!
//! Every draw comes from a fresh ChaCha8 stream keyed by
//! `(seed, trial index, unit index)`, so the random values are a pure
//! function of those three integers: serial and parallel execution orders,
//! or re-slicing trials across workers, produce bit-identical reports.
//! Aggregation uses compensated summation in trial order.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion_core::{general_mse, FidelityVector, WeightVector};
use crate::real::{cast, Real};

/// Distribution family of the perturbation `U_theta`; all three have mean 0
/// and variance `1/theta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// `Normal(0, 1/theta)`; sub-Gaussian parameter exactly `1/theta`.
    Gaussian,
    /// `Uniform(-sqrt(3/theta), +sqrt(3/theta))`; sub-Gaussian parameter
    /// `3/theta` (larger than the bound's premise).
    Uniform,
    /// `±theta^(-1/2)` with equal probability; sub-Gaussian parameter exactly
    /// `1/theta`.
    Rademacher,
}

/// One Monte Carlo run: what to draw, how to fuse, how long, and from which
/// seed.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationConfig<T> {
    pub kind: PerturbationKind,
    pub theta: FidelityVector<T>,
    pub weights: WeightVector<T>,
    /// The error-free value `Y`, fixed for the whole run. The MSE of an
    /// unbiased strategy does not depend on it; biased weight vectors expose
    /// the `E[Y^2] * (sum(w) - 1)^2` term.
    pub y_value: T,
    pub trials: u64,
    pub seed: u64,
}

impl<T: Real> SimulationConfig<T> {
    pub fn validate(&self) -> Result<()> {
        self.theta.validate()?;
        if self.weights.len() != self.theta.len() {
            return Err(Error::LengthMismatch(format!(
                "{} weights vs {} fidelities",
                self.weights.len(),
                self.theta.len()
            )));
        }
        if self.trials == 0 {
            return Err(Error::Domain("trials must be >= 1".into()));
        }
        if !self.y_value.is_finite() {
            return Err(Error::Domain(format!(
                "y_value must be finite, got {}",
                self.y_value
            )));
        }
        Ok(())
    }
}

/// Empirical tail probability at one deviation, with its analytic bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate<T> {
    pub epsilon: T,
    pub empirical_prob: T,
    pub chebyshev_bound: T,
    pub subgaussian_bound: T,
}

/// Output of a Monte Carlo run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport<T> {
    pub empirical_mse: T,
    /// Standard error of the empirical MSE (sample std of the squared errors
    /// over sqrt(trials)).
    pub mse_std_err: T,
    /// The MSE the fusion analysis predicts for these weights, with
    /// `E[Y^2] = y_value^2`.
    pub analytic_mse: T,
    pub tail_estimates: Vec<TailEstimate<T>>,
    pub seed: u64,
}

/// Neumaier-compensated accumulator: order-stable summation so parallel
/// re-aggregation in trial order cannot change the report.
struct Compensated<T> {
    sum: T,
    correction: T,
}

impl<T: Real> Compensated<T> {
    fn new() -> Self {
        Compensated {
            sum: T::zero(),
            correction: T::zero(),
        }
    }

    fn add(&mut self, x: T) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.correction = self.correction + ((self.sum - t) + x);
        } else {
            self.correction = self.correction + ((x - t) + self.sum);
        }
        self.sum = t;
    }

    fn value(&self) -> T {
        self.sum + self.correction
    }
}

/// ChaCha8 stream key for one (seed, trial, unit) draw. The tail bytes are a
/// fixed domain separator.
fn stream_key(seed: u64, trial: u64, unit: u64) -> [u8; 32] {
    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&trial.to_le_bytes());
    key[16..24].copy_from_slice(&unit.to_le_bytes());
    key[24..32].copy_from_slice(b"fuseplan");
    key
}

/// Draws the perturbation of one unit in one trial.
fn draw_perturbation<T: Real>(
    kind: PerturbationKind,
    theta: T,
    seed: u64,
    trial: u64,
    unit: u64,
) -> T {
    let mut rng = ChaCha8Rng::from_seed(stream_key(seed, trial, unit));
    match kind {
        PerturbationKind::Gaussian => {
            let z: f64 = StandardNormal.sample(&mut rng);
            cast::<T>(z) / theta.sqrt()
        }
        PerturbationKind::Uniform => {
            let u: f64 = rng.random();
            let half_width = (cast::<T>(3.0) / theta).sqrt();
            cast::<T>(2.0 * u - 1.0) * half_width
        }
        PerturbationKind::Rademacher => {
            let magnitude = T::one() / theta.sqrt();
            if rng.random::<bool>() {
                magnitude
            } else {
                -magnitude
            }
        }
    }
}

/// Runs the trials once, estimating the MSE and the tail probabilities at
/// the given deviations.
fn simulate<T: Real>(cfg: &SimulationConfig<T>, epsilons: &[T]) -> Result<SimulationReport<T>> {
    cfg.validate()?;
    for &eps in epsilons {
        if !(eps > T::zero()) {
            return Err(Error::Domain(format!("epsilon must be > 0, got {eps}")));
        }
    }

    let theta = cfg.theta.as_slice();
    let weights = cfg.weights.as_slice();
    let n_units = theta.len();

    let mut sq_sum = Compensated::new();
    let mut sq_sum_sq = Compensated::new();
    let mut exceed = vec![0u64; epsilons.len()];

    for trial in 0..cfg.trials {
        let mut yhat = T::zero();
        for unit in 0..n_units {
            let u = draw_perturbation(cfg.kind, theta[unit], cfg.seed, trial, unit as u64);
            yhat = yhat + weights[unit] * (cfg.y_value + u);
        }
        let err = yhat - cfg.y_value;
        let sq = err * err;
        sq_sum.add(sq);
        sq_sum_sq.add(sq * sq);
        for (k, &eps) in epsilons.iter().enumerate() {
            if err.abs() >= eps {
                exceed[k] += 1;
            }
        }
    }

    let trials_t = cast::<T>(cfg.trials as f64);
    let mean = sq_sum.value() / trials_t;
    let std_err = if cfg.trials > 1 {
        let var = (sq_sum_sq.value() - sq_sum.value() * sq_sum.value() / trials_t)
            / (trials_t - T::one());
        (var.max(T::zero()) / trials_t).sqrt()
    } else {
        T::zero()
    };

    let sum_theta = cfg.theta.total();
    let two = cast::<T>(2.0);
    let tail_estimates = epsilons
        .iter()
        .zip(&exceed)
        .map(|(&eps, &hits)| TailEstimate {
            epsilon: eps,
            empirical_prob: cast::<T>(hits as f64) / trials_t,
            chebyshev_bound: (T::one() / (eps * eps * sum_theta)).min(T::one()),
            subgaussian_bound: two * (-(eps * eps * sum_theta) / two).exp(),
        })
        .collect();

    let analytic_mse = general_mse(&cfg.weights, &cfg.theta, cfg.y_value * cfg.y_value)?;
    Ok(SimulationReport {
        empirical_mse: mean,
        mse_std_err: std_err,
        analytic_mse,
        tail_estimates,
        seed: cfg.seed,
    })
}

/// Estimates the fused MSE by Monte Carlo. Tail estimates are empty; use
/// [`estimate_tail`] or [`run_with_tails`] when deviations are of interest.
pub fn run_fusion_trials<T: Real>(cfg: &SimulationConfig<T>) -> Result<SimulationReport<T>> {
    simulate(cfg, &[])
}

/// Full report including tail estimates at each requested deviation.
pub fn run_with_tails<T: Real>(
    cfg: &SimulationConfig<T>,
    epsilons: &[T],
) -> Result<SimulationReport<T>> {
    simulate(cfg, epsilons)
}

/// Empirical tail probabilities with their analytic bounds. Requires at
/// least one deviation.
pub fn estimate_tail<T: Real>(
    cfg: &SimulationConfig<T>,
    epsilons: &[T],
) -> Result<Vec<TailEstimate<T>>> {
    if epsilons.is_empty() {
        return Err(Error::Domain("at least one epsilon is required".into()));
    }
    Ok(simulate(cfg, epsilons)?.tail_estimates)
}
