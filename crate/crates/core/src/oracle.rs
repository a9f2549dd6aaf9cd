//! Brute-force verifiers for the analytic results.
//!
//! Slow, obviously-correct searches that re-derive each closed-form answer on
//! small instances: a simplex grid over weight vectors, an allocation grid
//! over fidelity splits, an exhaustive integer sweep of the total cost, and
//! an independent bisection of the benefit function. They deliberately avoid
//! the arithmetic used by the implementations they check, and they ship in
//! the library (not just the test tree) so the `verify` command can re-run
//! them against any user config.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost_model::{CostSpec, Curvature, FusionCostSpec, IncrementalCostForm};
use crate::error::{Error, Result};
use crate::fusion_core::{FidelityVector, WeightVector};
use crate::planner::{self, Regime, ThresholdTau};
use crate::real::{cast, count, Real};

/// Largest fidelity vector the weight grid search accepts.
pub const MAX_WEIGHT_UNITS: usize = 4;

/// Largest allocation dimension the allocation grid search accepts.
pub const MAX_ALLOCATION_UNITS: usize = 3;

/// Relative tolerance of the independent threshold bisection, ten times
/// tighter than the planner's.
const V_INVERSE_REL_TOL: f64 = 1e-11;

/// Outcome of one verified claim.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleVerdict<T> {
    pub claim: String,
    pub analytic_value: T,
    pub brute_force_value: T,
    pub max_abs_gap: T,
    pub passed: bool,
}

/// One entry of the verification suite: either a verdict or a skip with its
/// reason.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum SuiteItem<T> {
    Verdict(OracleVerdict<T>),
    Skipped { claim: String, reason: String },
}

/// Exhaustive search over the nonnegative weight simplex `sum(w) = 1` on a
/// lattice of the given step. Returns the grid minimizer of the two-term MSE
/// and its value.
///
/// The MSE is recomputed inline rather than through the fusion module, so
/// the search shares no arithmetic with the formulas it validates.
pub fn brute_force_weights<T: Real>(
    theta: &FidelityVector<T>,
    grid_step: T,
    second_moment_y: T,
) -> Result<(WeightVector<T>, T)> {
    let n = theta.len();
    if n > MAX_WEIGHT_UNITS {
        return Err(Error::Domain(format!(
            "weight grid search supports at most {MAX_WEIGHT_UNITS} units, got {n}"
        )));
    }
    if !(grid_step > T::zero() && grid_step <= cast(0.05)) {
        return Err(Error::Domain(format!(
            "grid step must be in (0, 0.05], got {grid_step}"
        )));
    }
    let resolution = (T::one() / grid_step)
        .round()
        .to_usize()
        .ok_or_else(|| Error::Domain("grid step too small".into()))?;

    let theta = theta.as_slice();
    let res_t = count::<T>(resolution);
    let mut best_mse = T::infinity();
    let mut best: Vec<T> = vec![T::zero(); n];
    let mut ticks = vec![0usize; n];

    // Walk every composition of `resolution` into n nonnegative parts.
    walk_compositions(resolution, &mut ticks, 0, &mut |ticks| {
        let mut sum_w = T::zero();
        let mut variance = T::zero();
        for i in 0..n {
            let w = count::<T>(ticks[i]) / res_t;
            sum_w = sum_w + w;
            variance = variance + w * w / theta[i];
        }
        let bias = sum_w - T::one();
        let mse = second_moment_y * bias * bias + variance;
        if mse < best_mse {
            best_mse = mse;
            for i in 0..n {
                best[i] = count::<T>(ticks[i]) / res_t;
            }
        }
    });
    Ok((WeightVector::new(best), best_mse))
}

fn walk_compositions(
    remaining: usize,
    ticks: &mut [usize],
    level: usize,
    visit: &mut impl FnMut(&[usize]),
) {
    if level == ticks.len() - 1 {
        ticks[level] = remaining;
        visit(ticks);
        return;
    }
    for k in 0..=remaining {
        ticks[level] = k;
        walk_compositions(remaining - k, ticks, level + 1, visit);
    }
}

/// Grid search over fidelity allocations `sum(theta) = 1/tau`, `theta_i > 0`,
/// minimizing the summed unit cost. `grid_points` lattice points per
/// dimension.
pub fn brute_force_allocation<T: Real>(
    cost: &CostSpec<T>,
    tau: T,
    n: usize,
    grid_points: usize,
) -> Result<(Vec<T>, T)> {
    if !(n == 2 || n == 3) {
        return Err(Error::Domain(format!(
            "allocation grid search supports n = 2 or 3, got {n}"
        )));
    }
    if grid_points == 0 {
        return Err(Error::Domain("grid_points must be >= 1".into()));
    }
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
    }

    let budget = T::one() / tau;
    let cells = count::<T>(grid_points + 1);
    let mut best_cost = T::infinity();
    let mut best = vec![T::zero(); n];

    let mut consider = |theta: &[T]| -> Result<()> {
        let mut sum = T::zero();
        for &t in theta {
            sum = sum + cost.cost(t)?;
        }
        if sum < best_cost {
            best_cost = sum;
            best.copy_from_slice(theta);
        }
        Ok(())
    };

    if n == 2 {
        for i in 1..=grid_points {
            let t1 = budget * count::<T>(i) / cells;
            let t2 = budget - t1;
            consider(&[t1, t2])?;
        }
    } else {
        for i in 1..=grid_points {
            for j in 1..=grid_points {
                if i + j > grid_points {
                    break;
                }
                let t1 = budget * count::<T>(i) / cells;
                let t2 = budget * count::<T>(j) / cells;
                let t3 = budget - t1 - t2;
                consider(&[t1, t2, t3])?;
            }
        }
    }
    Ok((best, best_cost))
}

/// Evaluates the total cost at every `N = 1..=n_max` and returns the argmin
/// (ties to the smaller count) with the full table.
///
/// Costs are accumulated as `N * C(theta) + D(N)` — per-unit cost times
/// count — rather than through the planner's `N*G + N*c_min + D`
/// decomposition.
pub fn sweep_integer_n<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
    n_max: usize,
) -> Result<(usize, Vec<(usize, T)>)> {
    if n_max == 0 {
        return Err(Error::Domain("n_max must be >= 1".into()));
    }
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
    }
    let mut table = Vec::with_capacity(n_max);
    let mut argmin = 1usize;
    let mut best = T::infinity();
    for n in 1..=n_max {
        let per_unit = T::one() / (tau * count::<T>(n));
        let unit_cost = cost.cost(per_unit)?;
        let total = count::<T>(n) * unit_cost + fusion.eval(count::<T>(n))?;
        if total < best {
            best = total;
            argmin = n;
        }
        table.push((n, total));
    }
    Ok((argmin, table))
}

/// Independent benefit function used by the threshold bisection: per-form
/// closed expressions on a different algebraic route than
/// `planner::fusion_gain`.
fn independent_gain<T: Real>(cost: &CostSpec<T>, tau: T) -> Result<T> {
    let x = T::one() / tau;
    match &cost.incremental {
        // alpha * e^{beta x} (beta x - 1) + alpha
        IncrementalCostForm::Exponential(p) => {
            let bx = p.beta * x;
            Ok(p.alpha * bx.exp() * (bx - T::one()) + p.alpha)
        }
        // alpha (p - 1) x^p
        IncrementalCostForm::Power(p) => {
            if p.p < T::one() {
                return Err(Error::UnsupportedRegime(
                    "benefit inversion needs a convex incremental cost".into(),
                ));
            }
            Ok(p.alpha * (p.p - T::one()) * x.powf(p.p))
        }
        IncrementalCostForm::Linear(_) => Ok(T::zero()),
        _ => Err(Error::UnsupportedRegime(
            "benefit inversion needs a convex incremental cost with a closed form".into(),
        )),
    }
}

/// Inverts the benefit function by bisection: finds `tau` with
/// `V(tau) = target` to a relative value tolerance of 1e-11.
pub fn bisect_v_inverse<T: Real>(cost: &CostSpec<T>, target: T) -> Result<T> {
    if !(target > T::zero() && target.is_finite()) {
        return Err(Error::OutOfRange(format!(
            "target must be > 0, got {target}"
        )));
    }
    // Reject identically-zero benefit up front.
    if independent_gain(cost, T::one())? == T::zero()
        && independent_gain(cost, cast(1e-3))? == T::zero()
    {
        return Err(Error::OutOfRange(
            "the benefit function is identically zero and never reaches the target".into(),
        ));
    }

    let two = cast::<T>(2.0);
    let mut lo = T::one();
    while !gain_exceeds(cost, lo, target)? {
        lo = lo / two;
        if lo < cast(1e-300) {
            return Err(Error::OutOfRange(
                "target exceeds the benefit function over the searchable range".into(),
            ));
        }
    }
    let mut hi = lo;
    while independent_gain(cost, hi)? >= target {
        hi = hi * two;
        if hi > cast(1e300) {
            return Err(Error::OutOfRange(
                "the benefit function never drops below the target".into(),
            ));
        }
    }

    let tol = cast::<T>(V_INVERSE_REL_TOL) * target;
    for _ in 0..2000 {
        let mid = (lo + hi) / two;
        if mid <= lo || mid >= hi {
            break;
        }
        let v = independent_gain(cost, mid)?;
        if (v - target).abs() <= tol {
            return Ok(mid);
        }
        if v > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = (lo + hi) / two;
    if (independent_gain(cost, mid)? - target).abs() <= tol {
        Ok(mid)
    } else {
        Err(Error::Divergence(
            "benefit bisection exhausted float resolution before meeting tolerance".into(),
        ))
    }
}

/// Overflow of the gain at small `tau` counts as exceeding the target.
fn gain_exceeds<T: Real>(cost: &CostSpec<T>, tau: T, target: T) -> Result<bool> {
    let v = independent_gain(cost, tau)?;
    Ok(if v.is_finite() { v > target } else { true })
}

/// Runs every oracle applicable to the config's regime. Deterministic for a
/// fixed seed.
pub fn verification_suite<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
    seed: u64,
) -> Result<Vec<SuiteItem<T>>> {
    if !(tau > T::zero() && tau.is_finite()) {
        return Err(Error::Domain(format!("tau must be > 0, got {tau}")));
    }
    let curvature = cost.classify_curvature(planner::default_probe_range(cost))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();

    // Weight optimality is curvature-independent, so it always runs.
    items.push(SuiteItem::Verdict(weights_verdict(&mut rng)?));

    match curvature {
        Curvature::Concave => {
            items.push(SuiteItem::Verdict(single_unit_allocation_verdict(
                cost, fusion, tau,
            )?));
            items.push(SuiteItem::Verdict(subadditivity_verdict(cost, &mut rng)?));
        }
        _ => {
            items.push(SuiteItem::Verdict(uniform_allocation_verdict(cost, tau)?));
            items.push(SuiteItem::Skipped {
                claim: "concave_subadditivity".into(),
                reason: "incremental cost is not concave".into(),
            });
        }
    }

    items.push(SuiteItem::Verdict(integer_sweep_verdict(
        cost, fusion, tau,
    )?));

    match planner::threshold_tau(cost, fusion)? {
        Regime::ConvexThresholded {
            threshold: ThresholdTau::Finite(t),
        } => {
            let cutoff = cost.c_min + fusion.deriv(T::one(), 1)?;
            let reference = bisect_v_inverse(cost, cutoff)?;
            let gap = (t - reference).abs();
            let passed = gap <= cast::<T>(1e-8) * reference;
            items.push(SuiteItem::Verdict(OracleVerdict {
                claim: "threshold_inverse_bisection".into(),
                analytic_value: t,
                brute_force_value: reference,
                max_abs_gap: gap,
                passed,
            }));
        }
        regime => {
            items.push(SuiteItem::Skipped {
                claim: "threshold_inverse_bisection".into(),
                reason: format!("regime {} has no finite threshold", regime.name()),
            });
        }
    }

    Ok(items)
}

fn weights_verdict<T: Real>(rng: &mut ChaCha8Rng) -> Result<OracleVerdict<T>> {
    let step = cast::<T>(0.02);
    let mut worst_gap = T::zero();
    let mut worst = (T::zero(), T::zero());
    let mut passed = true;
    for _ in 0..5 {
        let n = rng.random_range(2..=4usize);
        let theta_raw: Vec<T> = (0..n).map(|_| cast(rng.random_range(0.25..4.0))).collect();
        let theta = FidelityVector::new(theta_raw.clone())?;
        let (_, grid_mse) = brute_force_weights(&theta, step, T::one())?;

        // Inverse-variance optimum, written out directly.
        let total = theta_raw.iter().fold(T::zero(), |acc, &t| acc + t);
        let analytic = T::one() / total;

        let slack = theta_raw
            .iter()
            .fold(T::zero(), |acc, &t| acc + T::one() / t)
            * step
            * step;
        let gap = (grid_mse - analytic).abs();
        if grid_mse < analytic - cast(1e-12) || gap > slack {
            passed = false;
        }
        if gap > worst_gap {
            worst_gap = gap;
            worst = (analytic, grid_mse);
        }
    }
    Ok(OracleVerdict {
        claim: "optimal_weights_vs_grid".into(),
        analytic_value: worst.0,
        brute_force_value: worst.1,
        max_abs_gap: worst_gap,
        passed,
    })
}

fn uniform_allocation_verdict<T: Real>(cost: &CostSpec<T>, tau: T) -> Result<OracleVerdict<T>> {
    let grid_points = 99;
    let budget = T::one() / tau;
    let cell = budget / count::<T>(grid_points + 1);
    let mut worst_gap = T::zero();
    let mut worst = (T::zero(), T::zero());
    let mut passed = true;
    for n in [2usize, 3] {
        let (best, _) = brute_force_allocation(cost, tau, n, grid_points)?;
        let uniform = budget / count::<T>(n);
        for &t in &best {
            let gap = (t - uniform).abs();
            if gap > cell * cast(1.0 + 1e-9) {
                passed = false;
            }
            if gap > worst_gap {
                worst_gap = gap;
                worst = (uniform, t);
            }
        }
    }
    Ok(OracleVerdict {
        claim: "uniform_allocation_grid".into(),
        analytic_value: worst.0,
        brute_force_value: worst.1,
        max_abs_gap: worst_gap,
        passed,
    })
}

/// For concave costs the grid cannot beat concentrating the budget in one
/// unit: `min_grid sum C(theta_i) + D(2) >= C(budget) + D(1)`.
fn single_unit_allocation_verdict<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
) -> Result<OracleVerdict<T>> {
    let (_, split_cost) = brute_force_allocation(cost, tau, 2, 199)?;
    let split_total = split_cost + fusion.eval(cast(2.0))?;
    let single_total = cost.cost(T::one() / tau)? + fusion.eval(T::one())?;
    let tol = cast::<T>(1e-9) * single_total.abs().max(T::one());
    let passed = split_total >= single_total - tol;
    Ok(OracleVerdict {
        claim: "single_unit_dominates_grid".into(),
        analytic_value: single_total,
        brute_force_value: split_total,
        max_abs_gap: (single_total - split_total).max(T::zero()),
        passed,
    })
}

fn integer_sweep_verdict<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
) -> Result<OracleVerdict<T>> {
    let plan = planner::plan(cost, fusion, tau)?;
    let n_max = (3 * plan.n_o).max(50);
    let (argmin, table) = sweep_integer_n(cost, fusion, tau, n_max)?;
    let planner_cost = plan.total_cost;
    let sweep_cost = table[argmin - 1].1;
    let gap = (planner_cost - sweep_cost).abs();
    let passed = argmin == plan.n_o && gap <= cast::<T>(1e-9) * planner_cost.abs().max(T::one());
    Ok(OracleVerdict {
        claim: "integer_sweep_matches_planner".into(),
        analytic_value: count(plan.n_o),
        brute_force_value: count(argmin),
        max_abs_gap: gap,
        passed,
    })
}

fn subadditivity_verdict<T: Real>(
    cost: &CostSpec<T>,
    rng: &mut ChaCha8Rng,
) -> Result<OracleVerdict<T>> {
    // Keep samples inside tabulated domains.
    let half_domain = match &cost.incremental {
        IncrementalCostForm::Tabulated(t) => t.knots[t.knots.len() - 1].0 / cast(2.0),
        _ => cast(50.0),
    };
    let mut violations = 0usize;
    let mut worst = T::zero();
    for _ in 0..1000 {
        let x = cast::<T>(rng.random_range(0.0..1.0)) * half_domain;
        let y = cast::<T>(rng.random_range(0.0..1.0)) * half_domain;
        let gx = cost.incremental.eval(x)?;
        let gy = cost.incremental.eval(y)?;
        let gxy = cost.incremental.eval(x + y)?;
        let margin = gx + gy - gxy;
        let tol = cast::<T>(1e-12) * gxy.abs().max(T::one());
        if margin < -tol {
            violations += 1;
            if -margin > worst {
                worst = -margin;
            }
        }
    }
    Ok(OracleVerdict {
        claim: "concave_subadditivity".into(),
        analytic_value: T::zero(),
        brute_force_value: count(violations),
        max_abs_gap: worst,
        passed: violations == 0,
    })
}
