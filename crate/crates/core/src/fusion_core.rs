//! Optimal linear fusion of unreliable outcomes.
//!
//! A unit with fidelity `theta_i` produces `Z_i = Y + U_i`, where `U_i` is a
//! zero-mean perturbation of variance `1/theta_i`, uncorrelated across units
//! and with `Y`. A repetition strategy combines `N` such outcomes linearly,
//! `Yhat = sum_i w_i * Z_i`, and its mean-square error decomposes as
//!
//! ```text
//! MSE(w, theta) = E[Y^2] * (sum(w) - 1)^2 + sum_i w_i^2 / theta_i
//! ```
//!
//! Over unbiased weights (`sum(w) = 1`) the minimum is attained by
//! inverse-variance weighting `w_i = theta_i / sum(theta)` with value
//! `1 / sum(theta)`. Holding the achieved MSE at a target `tau` pins the
//! fidelity budget `sum(theta) = 1/tau`; for convex unit costs the cheapest
//! way to spend that budget over `N` units is the uniform split
//! `theta_i = 1/(tau * N)`, which gives the total-cost function
//!
//! ```text
//! Cost_tau(N) = N * G(1/(tau * N)) + N * c_min + D(N)
//! ```
//!
//! that the planner minimizes over `N`.

use serde::{Deserialize, Serialize};

use crate::cost_model::{CostSpec, FusionCostSpec};
use crate::error::{Error, Result};
use crate::real::{count, Real};

/// Hard cap on the unit count accepted by [`total_cost`]; the planner's
/// minimizers are finite, so anything larger signals a runaway sweep.
pub const MAX_UNITS: usize = 1_000_000;

/// Fidelities `theta` of the units in a strategy: positive, nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FidelityVector<T>(Vec<T>);

impl<T: Real> FidelityVector<T> {
    pub fn new(theta: Vec<T>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::InvalidSpec(
                "fidelity vector must be nonempty".into(),
            ));
        }
        for (i, &t) in theta.iter().enumerate() {
            if !(t > T::zero() && t.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "fidelity theta[{i}] must be positive and finite, got {t}"
                )));
            }
        }
        Ok(FidelityVector(theta))
    }

    /// Validates invariants on an already-deserialized vector.
    pub fn validate(&self) -> Result<()> {
        Self::new(self.0.clone()).map(|_| ())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    /// Total fidelity `sum(theta)`, the reciprocal of the optimal MSE.
    pub fn total(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, &t| acc + t)
    }
}

/// Fusion weights. No sign or sum constraint is imposed at construction;
/// unbiased strategies keep `sum(w) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector<T>(Vec<T>);

impl<T: Real> WeightVector<T> {
    pub fn new(w: Vec<T>) -> Self {
        WeightVector(w)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.0
    }

    pub fn sum(&self) -> T {
        self.0.iter().fold(T::zero(), |acc, &w| acc + w)
    }
}

/// A strategy evaluated under a cost model: its weights, achieved MSE, total
/// cost, and unit count.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyEvaluation<T> {
    pub weights: WeightVector<T>,
    pub mse: T,
    pub total_cost: T,
    pub n: usize,
}

/// Minimum-MSE unbiased weights and their MSE value.
///
/// Weights are renormalized after the `theta / sum(theta)` division so that
/// `sum(w) = 1` holds bit-stably; the bias term of [`general_mse`] then
/// cancels exactly.
pub fn optimal_weights<T: Real>(theta: &FidelityVector<T>) -> (WeightVector<T>, T) {
    let total = theta.total();
    let mut w: Vec<T> = theta.as_slice().iter().map(|&t| t / total).collect();
    let s = w.iter().fold(T::zero(), |acc, &x| acc + x);
    for x in &mut w {
        *x = *x / s;
    }
    (WeightVector(w), T::one() / total)
}

/// MSE of an arbitrary (possibly biased) weight vector:
/// `E[Y^2] * (sum(w) - 1)^2 + sum_i w_i^2 / theta_i`.
///
/// `second_moment_y` is caller-supplied because `Y` may be deterministic or
/// random; it only matters when the weights do not sum to one.
pub fn general_mse<T: Real>(
    weights: &WeightVector<T>,
    theta: &FidelityVector<T>,
    second_moment_y: T,
) -> Result<T> {
    if weights.len() != theta.len() {
        return Err(Error::LengthMismatch(format!(
            "{} weights vs {} fidelities",
            weights.len(),
            theta.len()
        )));
    }
    if !(second_moment_y >= T::zero()) {
        return Err(Error::Domain(format!(
            "second moment of Y must be >= 0, got {second_moment_y}"
        )));
    }
    let bias = weights.sum() - T::one();
    let variance = weights
        .as_slice()
        .iter()
        .zip(theta.as_slice())
        .fold(T::zero(), |acc, (&w, &t)| acc + w * w / t);
    Ok(second_moment_y * bias * bias + variance)
}

/// The uniform fidelity allocation `theta_i = 1/(tau * n)`, which meets the
/// MSE target `tau` exactly and, for convex costs, spends the budget
/// cheapest.
pub fn uniform_fidelities<T: Real>(tau: T, n: usize) -> Result<FidelityVector<T>> {
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
    }
    if n == 0 {
        return Err(Error::Domain("unit count must be >= 1".into()));
    }
    let each = T::one() / (tau * count::<T>(n));
    Ok(FidelityVector(vec![each; n]))
}

/// Total cost of the `N`-unit uniform strategy meeting MSE target `tau`:
/// `N * G(1/(tau*N)) + N * c_min + D(N)`.
pub fn total_cost<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
    n: usize,
) -> Result<T> {
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
    }
    if n == 0 {
        return Err(Error::Domain("unit count must be >= 1".into()));
    }
    if n > MAX_UNITS {
        return Err(Error::Domain(format!(
            "unit count {n} exceeds the cap of {MAX_UNITS}"
        )));
    }
    let n_t = count::<T>(n);
    let per_unit = T::one() / (tau * n_t);
    let g = cost.incremental.eval(per_unit)?;
    Ok(n_t * g + n_t * cost.c_min + fusion.eval(n_t)?)
}

/// Bundles the optimal-weight evaluation of the `n`-unit uniform strategy.
pub fn evaluate_uniform_strategy<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
    n: usize,
) -> Result<StrategyEvaluation<T>> {
    let theta = uniform_fidelities(tau, n)?;
    let (weights, mse) = optimal_weights(&theta);
    let total = total_cost(cost, fusion, tau, n)?;
    Ok(StrategyEvaluation {
        weights,
        mse,
        total_cost: total,
        n,
    })
}
