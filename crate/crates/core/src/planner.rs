//! Cost-optimal repetition planning.
//!
//! For a target MSE `tau` the planner decides how many units to run, at what
//! fidelity, and with which fusion weights, by minimizing the total cost
//! `Cost_tau(N) = N*G(1/(tau*N)) + N*c_min + D(N)` over the unit count.
//!
//! The curvature of `G` splits the problem into regimes:
//!
//! * **Linear** `G`: `Cost_tau(N) = N*c_min + alpha/tau + D(N)` is strictly
//!   increasing in `N`, so one unit always wins.
//! * **Concave** `G`: concavity with `G(0) = 0` makes `G` sub-additive,
//!   `G(x) + G(y) >= G(x + y)`, so splitting a fidelity budget never saves
//!   incremental cost while baseline and fusion costs grow. One unit wins.
//! * **Convex** `G`: the continuous relaxation `Cost_tau(a)`, `a >= 1`, is
//!   convex, so its slope
//!   `kappa_tau(a) = G(x) - x*G'(x) + c_min + D'(a)` with `x = 1/(tau*a)`
//!   is nondecreasing and a bisection finds the unique minimizer `a_o`.
//!   Whether fusing pays at all reduces to comparing the cutoff
//!   `c_min + D'(1)` against the benefit function
//!   `V(tau) = (1/tau)*G'(1/tau) - G(1/tau)`: the minimizer exceeds 1 exactly
//!   when `V(tau)` exceeds the cutoff. `V` is nonnegative and nonincreasing,
//!   so there is a threshold `T` with single-unit optimality for
//!   `tau >= T` and genuine fusion for `tau < T`; `T` is found by bisecting
//!   the monotone `V`.
//!
//! The convex search path needs `G'` in closed form; tabulated curves are
//! supported on the linear/concave routes only, which never touch
//! derivatives.

use serde::{Deserialize, Serialize};

use crate::cost_model::{CostSpec, Curvature, FusionCostSpec, IncrementalCostForm};
use crate::error::{Error, Result};
use crate::fusion_core::{optimal_weights, total_cost, uniform_fidelities, WeightVector};
use crate::real::{cast, count, Real};

/// Relative tolerance on `kappa` at which the continuous-minimizer bisection
/// stops (scaled by `1 + |c_min + D'(1)|`).
const KAPPA_REL_TOL: f64 = 1e-10;

/// Absolute interval width at which the continuous-minimizer bisection stops.
const A_WIDTH_TOL: f64 = 1e-12;

/// Relative tolerance on `tau` for the threshold bisection.
const TAU_REL_TOL: f64 = 1e-10;

/// `V` is probed at this `tau` to decide whether its limit toward zero is
/// bounded.
const LIMIT_PROBE_TAU: f64 = 1e-8;

/// A probe value above this (and still growing) declares the limit unbounded.
const LIMIT_UNBOUNDED: f64 = 1e15;

/// Doubling past this bracket bound means the cost cannot stop decreasing,
/// which a valid spec cannot produce.
const MAX_BRACKET: f64 = (1u64 << 60) as f64;

/// Threshold below which fusing beats a single unit (convex regime).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged, rename_all = "snake_case")]
pub enum ThresholdTau<T> {
    /// Fusion pays for `tau` strictly below this value.
    Finite(T),
    /// Fusion pays at every target MSE (the cutoff `c_min + D'(1)` is never
    /// reached by `V`).
    Unbounded,
}

/// Which of the regime results applies to a (cost, fusion) pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime<T> {
    /// Convex cost with a threshold: fusion pays below it, one unit at or
    /// above it.
    ConvexThresholded { threshold: ThresholdTau<T> },
    /// Convex cost whose benefit function stays below the cutoff: one unit
    /// for every target.
    ConvexAlwaysSingle,
    /// Linear cost: one unit for every target.
    LinearAlwaysSingle,
    /// Concave cost: one unit for every target.
    ConcaveAlwaysSingle,
}

impl<T> Regime<T> {
    pub fn is_always_single(&self) -> bool {
        !matches!(self, Regime::ConvexThresholded { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Regime::ConvexThresholded { .. } => "convex_thresholded",
            Regime::ConvexAlwaysSingle => "convex_always_single",
            Regime::LinearAlwaysSingle => "linear_always_single",
            Regime::ConcaveAlwaysSingle => "concave_always_single",
        }
    }
}

/// Search diagnostics attached to a plan. Meaningful on the convex path; the
/// always-single regimes report the trivial values `a_o = 1`, `v_tau = 0`,
/// `kappa_at_1 = 0` (linear costs keep their exact `v_tau` and `kappa_at_1`,
/// which need no curvature assumptions).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanDiagnostics<T> {
    /// Minimizer of the continuous relaxation, `>= 1`.
    pub a_o: T,
    /// Benefit function `V(tau)` at the requested target.
    pub v_tau: T,
    /// Slope of the relaxed cost at one unit.
    pub kappa_at_1: T,
}

/// Planner output: the cost-optimal repetition strategy for one target MSE.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StrategyPlan<T> {
    /// Optimal unit count.
    pub n_o: usize,
    /// Fidelity of each unit (uniform allocation).
    pub per_unit_fidelity: T,
    /// Optimal fusion weights.
    pub weights: WeightVector<T>,
    /// Total cost of the strategy.
    pub total_cost: T,
    /// MSE the strategy achieves (equals the target up to rounding).
    pub achieved_mse: T,
    /// Regime of the (cost, fusion) pair.
    pub regime: Regime<T>,
    pub diagnostics: PlanDiagnostics<T>,
}

/// True when the convex search path can differentiate this form.
fn convex_path_form<T: Real>(form: &IncrementalCostForm<T>) -> bool {
    match form {
        IncrementalCostForm::Exponential(_) | IncrementalCostForm::Linear(_) => true,
        IncrementalCostForm::Power(p) => p.p >= T::one(),
        IncrementalCostForm::LogConcave(_) | IncrementalCostForm::Tabulated(_) => false,
    }
}

fn require_convex_path<T: Real>(cost: &CostSpec<T>) -> Result<()> {
    if convex_path_form(&cost.incremental) {
        Ok(())
    } else {
        Err(Error::UnsupportedRegime(
            "the convex search path needs a convex incremental cost with analytic derivatives"
                .into(),
        ))
    }
}

fn require_tau<T: Real>(tau: T) -> Result<()> {
    if tau > T::zero() && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("tau must be > 0, got {tau}")))
    }
}

/// Slope `kappa_tau(a)` of the relaxed total cost:
/// `G(x) - x*G'(x) + c_min + D'(a)` with `x = 1/(tau*a)`.
///
/// Nondecreasing in `a` for convex `G` and `D`. Only defined on the convex
/// search path.
pub fn cost_slope<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
    a: T,
) -> Result<T> {
    require_convex_path(cost)?;
    require_tau(tau)?;
    if !(a >= T::one()) {
        return Err(Error::Domain(format!("a must be >= 1, got {a}")));
    }
    let x = T::one() / (tau * a);
    let g = cost.incremental.eval(x)?;
    let g1 = cost.incremental.deriv(x, 1)?;
    Ok(g - x * g1 + cost.c_min + fusion.deriv(a, 1)?)
}

/// Benefit function `V(tau) = (1/tau) * G'(1/tau) - G(1/tau)`.
///
/// Nonnegative and nonincreasing for convex `G`; comparing it against the
/// cutoff `c_min + D'(1)` decides whether fusion pays at the target `tau`.
pub fn fusion_gain<T: Real>(cost: &CostSpec<T>, tau: T) -> Result<T> {
    require_convex_path(cost)?;
    require_tau(tau)?;
    let x = T::one() / tau;
    let g = cost.incremental.eval(x)?;
    let g1 = cost.incremental.deriv(x, 1)?;
    Ok(x * g1 - g)
}

/// Minimizer `a_o >= 1` of the relaxed total cost.
///
/// Returns 1 immediately when the slope at 1 is already nonnegative;
/// otherwise brackets by doubling and bisects the monotone slope.
pub fn solve_continuous_minimizer<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
) -> Result<T> {
    let kappa_1 = cost_slope(cost, fusion, tau, T::one())?;
    if kappa_1 >= T::zero() {
        return Ok(T::one());
    }

    let scale = T::one() + (cost.c_min + fusion.deriv(T::one(), 1)?).abs();
    let kappa_tol = cast::<T>(KAPPA_REL_TOL) * scale;
    let width_tol = cast::<T>(A_WIDTH_TOL);

    let mut hi = cast::<T>(2.0);
    while cost_slope(cost, fusion, tau, hi)? < T::zero() {
        hi = hi * cast::<T>(2.0);
        if hi > cast::<T>(MAX_BRACKET) {
            return Err(Error::Divergence(
                "cost slope never turned nonnegative while doubling a; the spec cannot have a finite minimizer".into(),
            ));
        }
    }

    let mut lo = T::one();
    let a_o = loop {
        let mid = (lo + hi) / cast::<T>(2.0);
        if mid <= lo || mid >= hi {
            // f64 resolution exhausted.
            break mid;
        }
        let kappa = cost_slope(cost, fusion, tau, mid)?;
        if kappa.abs() <= kappa_tol || hi - lo <= width_tol {
            break mid;
        }
        if kappa < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    };
    // A minimizer beyond the unit cap means the cost keeps decreasing toward
    // its infimum in any usable range: with a zero baseline and a flat fusion
    // cost nothing ever stops the split. Treat it as a malformed spec.
    if a_o > count(crate::fusion_core::MAX_UNITS) {
        return Err(Error::Divergence(format!(
            "the relaxed cost keeps decreasing past the {}-unit cap; a positive baseline cost \
             or an increasing fusion cost is required for a finite optimum",
            crate::fusion_core::MAX_UNITS
        )));
    }
    Ok(a_o)
}

/// Integer unit count minimizing the total cost, chosen between the floor
/// and ceiling of the continuous minimizer. Ties go to the smaller count.
pub fn select_optimal_n<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
    a_o: T,
) -> Result<usize> {
    if !(a_o >= T::one()) {
        return Err(Error::Domain(format!("a_o must be >= 1, got {a_o}")));
    }
    let floor = a_o.floor().to_usize().unwrap_or(1).max(1);
    let ceil = a_o.ceil().to_usize().unwrap_or(floor).max(floor);
    if floor == ceil {
        return Ok(floor);
    }
    let at_floor = total_cost(cost, fusion, tau, floor)?;
    let at_ceil = total_cost(cost, fusion, tau, ceil)?;
    Ok(if at_ceil < at_floor { ceil } else { floor })
}

/// Default curvature probe range: a fixed band spanning three decades for
/// closed forms, the knot domain for tabulated curves.
pub fn default_probe_range<T: Real>(cost: &CostSpec<T>) -> (T, T) {
    match &cost.incremental {
        IncrementalCostForm::Tabulated(t) => {
            let first_positive = t.knots[1].0;
            let last = t.knots[t.knots.len() - 1].0;
            (first_positive / cast::<T>(2.0), last)
        }
        _ => (cast(0.01), cast(10.0)),
    }
}

/// Classifies the regime of a (cost, fusion) pair, computing the fusion
/// threshold where one exists.
pub fn threshold_tau<T: Real>(cost: &CostSpec<T>, fusion: &FusionCostSpec<T>) -> Result<Regime<T>> {
    let curvature = cost.classify_curvature(default_probe_range(cost))?;
    match curvature {
        Curvature::Linear => Ok(Regime::LinearAlwaysSingle),
        Curvature::Concave => Ok(Regime::ConcaveAlwaysSingle),
        Curvature::Indeterminate => Err(Error::UnsupportedRegime(
            "curvature is indeterminate over the probe range; no regime result applies".into(),
        )),
        Curvature::Convex => {
            let cutoff = cost.c_min + fusion.deriv(T::one(), 1)?;
            if cutoff <= T::zero() {
                // V > 0 for strictly convex G, so the comparison never flips.
                return Ok(Regime::ConvexThresholded {
                    threshold: ThresholdTau::Unbounded,
                });
            }

            // Probe the tau -> 0 limit of V along a decreasing sweep.
            let probes: Vec<T> = [1e-2, 1e-4, 1e-6, LIMIT_PROBE_TAU]
                .iter()
                .map(|&t| fusion_gain(cost, cast(t)))
                .collect::<Result<_>>()?;
            let nondecreasing = probes.windows(2).all(|w| !(w[1] < w[0]));
            let last = probes[probes.len() - 1];
            let unbounded = (!last.is_finite() || last > cast(LIMIT_UNBOUNDED)) && nondecreasing;

            if !unbounded && last <= cutoff {
                return Ok(Regime::ConvexAlwaysSingle);
            }
            if last <= cutoff {
                // Unbounded limit but the probe already sits below the
                // cutoff: the flip happens below the probe floor, which is
                // the infimum we can report.
                return Ok(Regime::ConvexThresholded {
                    threshold: ThresholdTau::Finite(cast(LIMIT_PROBE_TAU)),
                });
            }

            // Bracket: V(lo) > cutoff, double hi until V(hi) < cutoff.
            let mut hi = T::one();
            while fusion_gain(cost, hi)? >= cutoff {
                hi = hi * cast::<T>(2.0);
                if hi > cast::<T>(MAX_BRACKET) {
                    return Err(Error::Divergence(
                        "V never dropped below the cutoff while doubling tau".into(),
                    ));
                }
            }
            let mut lo = cast::<T>(LIMIT_PROBE_TAU);
            let tol = cast::<T>(TAU_REL_TOL);
            loop {
                let mid = (lo + hi) / cast::<T>(2.0);
                if mid <= lo || mid >= hi || (hi - lo) <= tol * mid {
                    return Ok(Regime::ConvexThresholded {
                        threshold: ThresholdTau::Finite(mid),
                    });
                }
                if fusion_gain(cost, mid)? > cutoff {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
    }
}

/// Computes the cost-optimal strategy for target MSE `tau`.
pub fn plan<T: Real>(
    cost: &CostSpec<T>,
    fusion: &FusionCostSpec<T>,
    tau: T,
) -> Result<StrategyPlan<T>> {
    require_tau(tau)?;
    let regime = threshold_tau(cost, fusion)?;

    let (n_o, diagnostics) = match regime {
        Regime::LinearAlwaysSingle => {
            let diag = PlanDiagnostics {
                a_o: T::one(),
                v_tau: fusion_gain(cost, tau)?,
                kappa_at_1: cost_slope(cost, fusion, tau, T::one())?,
            };
            (1, diag)
        }
        Regime::ConcaveAlwaysSingle => {
            // Decided by sub-additivity alone; no derivatives touched.
            let diag = PlanDiagnostics {
                a_o: T::one(),
                v_tau: T::zero(),
                kappa_at_1: T::zero(),
            };
            (1, diag)
        }
        Regime::ConvexThresholded { .. } | Regime::ConvexAlwaysSingle => {
            let a_o = solve_continuous_minimizer(cost, fusion, tau)?;
            let n_o = select_optimal_n(cost, fusion, tau, a_o)?;
            let diag = PlanDiagnostics {
                a_o,
                v_tau: fusion_gain(cost, tau)?,
                kappa_at_1: cost_slope(cost, fusion, tau, T::one())?,
            };
            (n_o, diag)
        }
    };

    let theta = uniform_fidelities(tau, n_o)?;
    let (weights, achieved_mse) = optimal_weights(&theta);
    let total = total_cost(cost, fusion, tau, n_o)?;
    Ok(StrategyPlan {
        n_o,
        per_unit_fidelity: theta.as_slice()[0],
        weights,
        total_cost: total,
        achieved_mse,
        regime,
        diagnostics,
    })
}
