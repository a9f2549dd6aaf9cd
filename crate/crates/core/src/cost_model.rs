//! Cost–fidelity and fusion-cost functions.
//!
//! A computational unit of fidelity `theta` (perturbation variance
//! `1/theta`) costs
//!
//! ```text
//! C(theta) = c_min + G(theta)
//! ```
//!
//! where `c_min >= 0` is the baseline cost of operating the unit at all and
//! `G` is a strictly increasing incremental cost with `G(0) = 0`. Combining
//! `N` unit outcomes costs `D(N)`, an increasing convex function of the unit
//! count with a twice-differentiable continuous relaxation `D(a)`, `a >= 1`.
//!
//! The curvature of `G` decides everything downstream: convex costs can make
//! fusing several cheap, noisy units cheaper than one good unit, while linear
//! and concave costs never do. [`CostSpec::classify_curvature`] probes the
//! second derivative over a geometric grid and reports the class the planner
//! dispatches on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::real::{cast, count, Real};

/// Number of probe points used by curvature classification.
const CURVATURE_GRID: usize = 64;

/// Relative tolerance for calling a second derivative zero, scaled by
/// `max |G|` over the probe grid: the curvature of `exp(beta * theta)` spans
/// many orders of magnitude, so an absolute tolerance cannot work.
const CURVATURE_REL_TOL: f64 = 1e-9;

/// Parameters of `G(theta) = alpha * (exp(beta * theta) - 1)`, convex.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExponentialCost<T> {
    pub alpha: T,
    pub beta: T,
}

/// Parameters of `G(theta) = alpha * theta^p`; convex for `p >= 1`, concave
/// for `p <= 1`, linear at `p = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerCost<T> {
    pub alpha: T,
    pub p: T,
}

/// Parameters of `G(theta) = alpha * theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearCost<T> {
    pub alpha: T,
}

/// Parameters of `G(theta) = alpha * ln(1 + beta * theta)`, concave.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogConcaveCost<T> {
    pub alpha: T,
    pub beta: T,
}

/// A user-supplied cost curve: monotone piecewise-linear interpolation
/// through `(theta, G(theta))` knots. The first knot must be `(0, 0)` and
/// both coordinates must be strictly increasing. Evaluation beyond the last
/// knot is a hard error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TabulatedCost<T> {
    pub knots: Vec<(T, T)>,
}

/// The incremental cost function `G(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IncrementalCostForm<T> {
    Exponential(ExponentialCost<T>),
    Power(PowerCost<T>),
    Linear(LinearCost<T>),
    LogConcave(LogConcaveCost<T>),
    Tabulated(TabulatedCost<T>),
}

/// A unit's cost–fidelity law `C(theta) = c_min + G(theta)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostSpec<T> {
    pub c_min: T,
    pub incremental: IncrementalCostForm<T>,
}

/// Parameters of `D(N) = gamma * (N - 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearMinusOneFusion<T> {
    pub gamma: T,
}

/// Parameters of `D(N) = sum_j coeffs[j-1] * (N - 1)^j`, convex with
/// `D(1) = 0`. All coefficients nonnegative, at least one positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolynomialFusion<T> {
    pub coeffs: Vec<T>,
}

/// Parameters of `D(N) = d0 + d1 * N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AffineFusion<T> {
    pub d0: T,
    pub d1: T,
}

/// The fusion cost `D(N)` and its continuous relaxation `D(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FusionCostSpec<T> {
    LinearMinusOne(LinearMinusOneFusion<T>),
    Polynomial(PolynomialFusion<T>),
    Affine(AffineFusion<T>),
}

/// Curvature class of an incremental cost function over a probe range.
///
/// `Linear` is reported only when the second derivative is identically zero
/// (within tolerance) over the whole probe grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Curvature {
    Convex,
    Linear,
    Concave,
    Indeterminate,
}

impl std::fmt::Display for Curvature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Curvature::Convex => "convex",
            Curvature::Linear => "linear",
            Curvature::Concave => "concave",
            Curvature::Indeterminate => "indeterminate",
        };
        f.write_str(s)
    }
}

fn require_finite<T: Real>(name: &str, x: T) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!(
            "{name} must be finite, got {x}"
        )))
    }
}

fn require_positive<T: Real>(name: &str, x: T) -> Result<()> {
    require_finite(name, x)?;
    if x > T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be > 0, got {x}")))
    }
}

fn require_nonnegative<T: Real>(name: &str, x: T) -> Result<()> {
    require_finite(name, x)?;
    if x >= T::zero() {
        Ok(())
    } else {
        Err(Error::InvalidSpec(format!("{name} must be >= 0, got {x}")))
    }
}

impl<T: Real> IncrementalCostForm<T> {
    /// Checks shape-parameter and knot invariants.
    pub fn validate(&self) -> Result<()> {
        match self {
            IncrementalCostForm::Exponential(p) => {
                require_positive("alpha", p.alpha)?;
                require_positive("beta", p.beta)
            }
            IncrementalCostForm::Power(p) => {
                require_positive("alpha", p.alpha)?;
                require_positive("p", p.p)
            }
            IncrementalCostForm::Linear(p) => require_positive("alpha", p.alpha),
            IncrementalCostForm::LogConcave(p) => {
                require_positive("alpha", p.alpha)?;
                require_positive("beta", p.beta)
            }
            IncrementalCostForm::Tabulated(t) => {
                if t.knots.len() < 2 {
                    return Err(Error::InvalidSpec(
                        "tabulated curve needs at least two knots".into(),
                    ));
                }
                let (x0, g0) = t.knots[0];
                if x0 != T::zero() || g0 != T::zero() {
                    return Err(Error::InvalidSpec(
                        "tabulated curve must start at the knot (0, 0)".into(),
                    ));
                }
                for w in t.knots.windows(2) {
                    let (x0, g0) = w[0];
                    let (x1, g1) = w[1];
                    require_finite("knot theta", x1)?;
                    require_finite("knot value", g1)?;
                    if x1 <= x0 || g1 <= g0 {
                        return Err(Error::InvalidSpec(
                            "tabulated knots must be strictly increasing in both coordinates"
                                .into(),
                        ));
                    }
                }
                Ok(())
            }
        }
    }

    /// Evaluates `G(theta)` for `theta >= 0` (the `theta > 0` restriction is
    /// enforced by the operations that own it; the limit value `G(0) = 0` is
    /// well defined for every form).
    pub fn eval(&self, theta: T) -> Result<T> {
        match self {
            IncrementalCostForm::Exponential(p) => {
                Ok(p.alpha * ((p.beta * theta).exp() - T::one()))
            }
            IncrementalCostForm::Power(p) => Ok(p.alpha * theta.powf(p.p)),
            IncrementalCostForm::Linear(p) => Ok(p.alpha * theta),
            IncrementalCostForm::LogConcave(p) => Ok(p.alpha * (p.beta * theta).ln_1p()),
            IncrementalCostForm::Tabulated(t) => {
                let last = t.knots[t.knots.len() - 1].0;
                if theta > last {
                    return Err(Error::Extrapolation(format!(
                        "theta = {theta} exceeds the last knot at {last}"
                    )));
                }
                // Binary search for the bracketing segment.
                let idx = t.knots.partition_point(|&(x, _)| x <= theta);
                if idx == t.knots.len() {
                    return Ok(t.knots[idx - 1].1);
                }
                let (x0, g0) = t.knots[idx - 1];
                let (x1, g1) = t.knots[idx];
                let frac = (theta - x0) / (x1 - x0);
                Ok(g0 + frac * (g1 - g0))
            }
        }
    }

    /// Analytic first/second derivative of `G`, or a central finite
    /// difference for tabulated curves (first order only).
    pub fn deriv(&self, theta: T, order: u32) -> Result<T> {
        if order != 1 && order != 2 {
            return Err(Error::Domain(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        match self {
            IncrementalCostForm::Exponential(p) => {
                let e = (p.beta * theta).exp();
                Ok(match order {
                    1 => p.alpha * p.beta * e,
                    _ => p.alpha * p.beta * p.beta * e,
                })
            }
            IncrementalCostForm::Power(p) => Ok(match order {
                1 => p.alpha * p.p * theta.powf(p.p - T::one()),
                _ => p.alpha * p.p * (p.p - T::one()) * theta.powf(p.p - cast(2.0)),
            }),
            IncrementalCostForm::Linear(p) => Ok(match order {
                1 => p.alpha,
                _ => T::zero(),
            }),
            IncrementalCostForm::LogConcave(p) => {
                let denom = T::one() + p.beta * theta;
                Ok(match order {
                    1 => p.alpha * p.beta / denom,
                    _ => -(p.alpha * p.beta * p.beta) / (denom * denom),
                })
            }
            IncrementalCostForm::Tabulated(_) => {
                if order == 2 {
                    return Err(Error::Domain(
                        "second derivative is not defined for tabulated curves".into(),
                    ));
                }
                // Step scales with theta so the difference stays conditioned
                // at both tiny and huge fidelities.
                let h = cast::<T>(1e-6).max(cast::<T>(1e-6) * theta);
                if theta - h < T::zero() {
                    return Err(Error::Domain(format!(
                        "theta = {theta} too close to 0 for a central difference of step {h}"
                    )));
                }
                let hi = self.eval(theta + h)?;
                let lo = self.eval(theta - h)?;
                Ok((hi - lo) / (cast::<T>(2.0) * h))
            }
        }
    }

    /// Analytic second derivative where the form has one.
    fn analytic_second_deriv(&self, theta: T) -> Option<T> {
        match self {
            IncrementalCostForm::Tabulated(_) => None,
            _ => self.deriv(theta, 2).ok(),
        }
    }
}

impl<T: Real> CostSpec<T> {
    pub fn new(c_min: T, incremental: IncrementalCostForm<T>) -> Result<Self> {
        let spec = CostSpec { c_min, incremental };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        require_nonnegative("c_min", self.c_min)?;
        self.incremental.validate()
    }

    /// Parses and validates a spec from its JSON form, e.g.
    /// `{"c_min": 7.0, "incremental": {"kind": "exponential", "alpha": 1.0, "beta": 1.0}}`.
    pub fn from_json(json: &str) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        let spec: CostSpec<T> =
            serde_json::from_str(json).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    /// Total unit cost `C(theta) = c_min + G(theta)`, `theta > 0`.
    pub fn cost(&self, theta: T) -> Result<T> {
        if !(theta > T::zero()) {
            return Err(Error::Domain(format!("theta must be > 0, got {theta}")));
        }
        Ok(self.c_min + self.incremental.eval(theta)?)
    }

    /// Derivative of the incremental part, `G'` or `G''`.
    pub fn incremental_deriv(&self, theta: T, order: u32) -> Result<T> {
        if !(theta > T::zero()) {
            return Err(Error::Domain(format!("theta must be > 0, got {theta}")));
        }
        self.incremental.deriv(theta, order)
    }

    /// Classifies the curvature of `G` over `(theta_lo, theta_hi)`.
    ///
    /// Uses the analytic second derivative where available and second divided
    /// differences of the interpolant otherwise, sampled on a 64-point
    /// geometric grid. The zero tolerance is relative to `max |G|` over the
    /// grid.
    pub fn classify_curvature(&self, probe_range: (T, T)) -> Result<Curvature> {
        let (lo, hi) = probe_range;
        if !(lo > T::zero() && hi > lo) {
            return Err(Error::Domain(format!(
                "probe range must satisfy 0 < lo < hi, got ({lo}, {hi})"
            )));
        }

        let n = CURVATURE_GRID;
        let ratio = hi / lo;
        let grid: Vec<T> = (0..n)
            .map(|i| lo * ratio.powf(count::<T>(i) / count::<T>(n - 1)))
            .collect();

        let mut scale = T::zero();
        let mut values = Vec::with_capacity(n);
        for &x in &grid {
            let g = self.incremental.eval(x)?;
            if g.is_finite() && g.abs() > scale {
                scale = g.abs();
            }
            values.push(g);
        }
        if scale == T::zero() && values.iter().all(|v| !v.is_finite()) {
            return Ok(Curvature::Indeterminate);
        }
        let tol = cast::<T>(CURVATURE_REL_TOL) * scale;

        let mut convex_ok = true;
        let mut concave_ok = true;
        match self.incremental.analytic_second_deriv(grid[0]) {
            Some(_) => {
                for &x in &grid {
                    let g2 = self.incremental.analytic_second_deriv(x).unwrap();
                    if !(g2 >= -tol) {
                        convex_ok = false;
                    }
                    if !(g2 <= tol) {
                        concave_ok = false;
                    }
                }
            }
            None => {
                // Second divided differences of the interpolant; their sign is
                // the sign of the polyline's curvature.
                for i in 1..n - 1 {
                    let (x0, x1, x2) = (grid[i - 1], grid[i], grid[i + 1]);
                    let (f0, f1, f2) = (values[i - 1], values[i], values[i + 1]);
                    let s01 = (f1 - f0) / (x1 - x0);
                    let s12 = (f2 - f1) / (x2 - x1);
                    let curv = cast::<T>(2.0) * (s12 - s01) / (x2 - x0);
                    if !(curv >= -tol) {
                        convex_ok = false;
                    }
                    if !(curv <= tol) {
                        concave_ok = false;
                    }
                }
            }
        }

        Ok(match (convex_ok, concave_ok) {
            (true, true) => Curvature::Linear,
            (true, false) => Curvature::Convex,
            (false, true) => Curvature::Concave,
            (false, false) => Curvature::Indeterminate,
        })
    }
}

impl<T: Real> FusionCostSpec<T> {
    pub fn validate(&self) -> Result<()> {
        match self {
            FusionCostSpec::LinearMinusOne(p) => require_nonnegative("gamma", p.gamma),
            FusionCostSpec::Polynomial(p) => {
                if p.coeffs.is_empty() {
                    return Err(Error::InvalidSpec(
                        "polynomial fusion cost needs at least one coefficient".into(),
                    ));
                }
                let mut any_positive = false;
                for (j, &c) in p.coeffs.iter().enumerate() {
                    require_nonnegative(&format!("coeffs[{j}]"), c)?;
                    if c > T::zero() {
                        any_positive = true;
                    }
                }
                if !any_positive {
                    return Err(Error::InvalidSpec(
                        "polynomial fusion cost needs a positive coefficient".into(),
                    ));
                }
                Ok(())
            }
            FusionCostSpec::Affine(p) => {
                require_nonnegative("d0", p.d0)?;
                require_positive("d1", p.d1)
            }
        }
    }

    pub fn from_json(json: &str) -> Result<Self>
    where
        T: serde::de::DeserializeOwned,
    {
        let spec: FusionCostSpec<T> =
            serde_json::from_str(json).map_err(|e| Error::InvalidSpec(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    fn check_domain(a: T) -> Result<()> {
        if a >= T::one() {
            Ok(())
        } else {
            Err(Error::Domain(format!("fusion cost needs a >= 1, got {a}")))
        }
    }

    /// Continuous relaxation `D(a)`; at integer `a` it equals `D(N)`.
    pub fn eval(&self, a: T) -> Result<T> {
        Self::check_domain(a)?;
        Ok(match self {
            FusionCostSpec::LinearMinusOne(p) => p.gamma * (a - T::one()),
            FusionCostSpec::Polynomial(p) => {
                let x = a - T::one();
                // Horner over ascending powers of (a - 1), no constant term.
                let mut acc = T::zero();
                for &c in p.coeffs.iter().rev() {
                    acc = acc * x + c;
                }
                acc * x
            }
            FusionCostSpec::Affine(p) => p.d0 + p.d1 * a,
        })
    }

    /// First or second derivative of the relaxation.
    pub fn deriv(&self, a: T, order: u32) -> Result<T> {
        Self::check_domain(a)?;
        if order != 1 && order != 2 {
            return Err(Error::Domain(format!(
                "derivative order must be 1 or 2, got {order}"
            )));
        }
        Ok(match self {
            FusionCostSpec::LinearMinusOne(p) => match order {
                1 => p.gamma,
                _ => T::zero(),
            },
            FusionCostSpec::Polynomial(p) => {
                let x = a - T::one();
                let mut acc = T::zero();
                for (j, &c) in p.coeffs.iter().enumerate().rev() {
                    let degree = j + 1;
                    let factor = match order {
                        1 => count::<T>(degree),
                        _ => {
                            if degree < 2 {
                                continue;
                            }
                            count::<T>(degree) * count::<T>(degree - 1)
                        }
                    };
                    let exponent = degree - order as usize;
                    acc = acc + factor * c * x.powi(exponent as i32);
                }
                acc
            }
            FusionCostSpec::Affine(p) => match order {
                1 => p.d1,
                _ => T::zero(),
            },
        })
    }
}
