//! Cost-optimal redundancy planning for unreliable computational units.
//!
//! A unit of fidelity `theta` returns the true value plus zero-mean noise of
//! variance `1/theta`, at a cost `C(theta) = c_min + G(theta)`. Fusing `N`
//! unit outcomes by a weighted average costs an extra `D(N)` and, with
//! inverse-variance weights, achieves MSE `1/sum(theta)`. Given a cost
//! model and a target MSE, this crate answers: how many units, at what
//! fidelity each, with what weights, and at what total cost?
//!
//! * [`cost_model`] — cost–fidelity laws `C(theta)`, fusion costs `D(N)`,
//!   derivatives and curvature classification.
//! * [`fusion_core`] — optimal weights, the MSE functional, uniform
//!   allocations, and the total-cost function `Cost_tau(N)`.
//! * [`planner`] — the regime split (convex / linear / concave), the fusion
//!   threshold, and the cost-optimal unit count.
//! * [`simulator`] — seeded Monte Carlo validation of the MSE and tail
//!   bounds.
//! * [`oracle`] — brute-force cross-checks of every analytic result.
//!
//! All numeric code is generic over the scalar type through [`Real`]
//! (`f32` or `f64`); the `*64` aliases below fix the common choice.

// Negated comparisons like `!(x > 0)` are deliberate throughout: they treat
// NaN as out of domain, which `x <= 0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cost_model;
pub mod error;
pub mod fusion_core;
pub mod oracle;
pub mod planner;
pub mod real;
pub mod simulator;

pub use error::{Error, Result};
pub use real::Real;

/// `f64` aliases: the working precision of the CLI and test suites.
pub type CostSpec64 = cost_model::CostSpec<f64>;
pub type IncrementalCostForm64 = cost_model::IncrementalCostForm<f64>;
pub type FusionCostSpec64 = cost_model::FusionCostSpec<f64>;
pub type FidelityVector64 = fusion_core::FidelityVector<f64>;
pub type WeightVector64 = fusion_core::WeightVector<f64>;
pub type StrategyEvaluation64 = fusion_core::StrategyEvaluation<f64>;
pub type StrategyPlan64 = planner::StrategyPlan<f64>;
pub type Regime64 = planner::Regime<f64>;
pub type SimulationConfig64 = simulator::SimulationConfig<f64>;
pub type SimulationReport64 = simulator::SimulationReport<f64>;
pub type OracleVerdict64 = oracle::OracleVerdict<f64>;

/// `f32` aliases for callers that trade precision for footprint.
pub type CostSpec32 = cost_model::CostSpec<f32>;
pub type FusionCostSpec32 = cost_model::FusionCostSpec<f32>;
pub type FidelityVector32 = fusion_core::FidelityVector<f32>;
pub type WeightVector32 = fusion_core::WeightVector<f32>;
pub type StrategyPlan32 = planner::StrategyPlan<f32>;
