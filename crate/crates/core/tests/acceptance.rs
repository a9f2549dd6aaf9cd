//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every line.
//!
//! Criterion 9 (CLI byte-determinism) lives in the CLI crate's own
//! `acceptance` target, next to the binary it drives.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fuseplan::cost_model::{
    AffineFusion, CostSpec, ExponentialCost, FusionCostSpec, IncrementalCostForm, LinearCost,
    LinearMinusOneFusion, LogConcaveCost, PolynomialFusion, PowerCost, TabulatedCost,
};
use fuseplan::fusion_core::{optimal_weights, total_cost, FidelityVector};
use fuseplan::oracle::{
    bisect_v_inverse, brute_force_allocation, brute_force_weights, sweep_integer_n,
};
use fuseplan::planner::{
    cost_slope, fusion_gain, plan, solve_continuous_minimizer, threshold_tau, Regime, ThresholdTau,
};
use fuseplan::simulator::{estimate_tail, run_fusion_trials, PerturbationKind, SimulationConfig};

fn exp_model() -> (CostSpec<f64>, FusionCostSpec<f64>) {
    (
        CostSpec::new(
            7.0,
            IncrementalCostForm::Exponential(ExponentialCost {
                alpha: 1.0,
                beta: 1.0,
            }),
        )
        .unwrap(),
        FusionCostSpec::LinearMinusOne(LinearMinusOneFusion { gamma: 1.0 }),
    )
}

fn report(criterion: &str, passed: bool, detail: &str) {
    let status = if passed { "PASS" } else { "FAIL" };
    println!("acceptance {criterion}: {status} — {detail}");
}

/// Criterion 1: golden integers of the worked exponential model.
#[test]
fn criterion_1_golden_integers() {
    let start = Instant::now();
    let (cost, fusion) = exp_model();
    let expected: [(f64, usize); 3] = [(2.0, 1), (0.1, 6), (0.05, 13)];

    let mut got = Vec::new();
    let mut ok = true;
    for &(tau, want) in &expected {
        let n_plan = plan(&cost, &fusion, tau).unwrap().n_o;
        let (n_sweep, _) = sweep_integer_n(&cost, &fusion, tau, 50).unwrap();
        got.push((tau, n_plan, n_sweep));
        if n_plan != want || n_sweep != want {
            ok = false;
        }
    }
    let elapsed = start.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 1.0;
    report(
        "1 (golden integers N_o at tau = 2, 0.1, 0.05)",
        ok,
        &format!("expected [1, 6, 13], planner/sweep returned {got:?}, elapsed {elapsed:?}"),
    );
    assert!(
        ok,
        "expected N_o = 1, 6, 13 for tau = 2, 0.1, 0.05; planner and sweep returned {got:?} \
         (direct evaluation of the cost function puts the minimizers at 1, 5, 10)"
    );
}

/// Criterion 2: planner threshold vs independent bisection, and the
/// benefit-vs-cutoff comparison predicting the minimizer side.
#[test]
fn criterion_2_threshold_consistency() {
    let start = Instant::now();
    let mut ok = true;
    let mut detail = String::new();

    // Exponential example: T against the independent oracle.
    let (cost, fusion) = exp_model();
    let t_exp = match threshold_tau(&cost, &fusion).unwrap() {
        Regime::ConvexThresholded {
            threshold: ThresholdTau::Finite(t),
        } => t,
        other => panic!("expected finite threshold, got {other:?}"),
    };
    let t_oracle = bisect_v_inverse(&cost, 8.0).unwrap();
    if ((t_exp - t_oracle) / t_oracle).abs() > 1e-8 {
        ok = false;
    }
    detail.push_str(&format!("exp: T={t_exp:.12} oracle={t_oracle:.12}; "));

    // Quadratic cost: T = (c_min + D'(1))^(-1/2) algebraically.
    let quad = CostSpec::new(
        3.0,
        IncrementalCostForm::Power(PowerCost { alpha: 1.0, p: 2.0 }),
    )
    .unwrap();
    let t_quad = match threshold_tau(&quad, &fusion).unwrap() {
        Regime::ConvexThresholded {
            threshold: ThresholdTau::Finite(t),
        } => t,
        other => panic!("expected finite threshold, got {other:?}"),
    };
    if ((t_quad - 0.5) / 0.5).abs() > 1e-8 {
        ok = false;
    }
    let t_quad_oracle = bisect_v_inverse(&quad, 4.0).unwrap();
    if ((t_quad - t_quad_oracle) / t_quad_oracle).abs() > 1e-8 {
        ok = false;
    }
    detail.push_str(&format!("quad: T={t_quad:.12} (algebraic 0.5); "));

    // 100-point grids straddling each threshold: the cutoff-vs-benefit
    // comparison must predict (a_o > 1) with zero mismatches.
    let mut mismatches = 0usize;
    for (model, fusion_spec, t, cutoff) in
        [(&cost, &fusion, t_exp, 8.0), (&quad, &fusion, t_quad, 4.0)]
    {
        for i in 0..100 {
            let tau = t * (0.5 + i as f64 / 99.0);
            let fused_predicted = cutoff < fusion_gain(model, tau).unwrap();
            let a_o = solve_continuous_minimizer(model, fusion_spec, tau).unwrap();
            if fused_predicted != (a_o > 1.0) {
                mismatches += 1;
            }
        }
    }
    if mismatches > 0 {
        ok = false;
    }
    detail.push_str(&format!(
        "{mismatches} comparison mismatches over 200 grid points"
    ));

    let elapsed = start.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 5.0;
    report("2 (threshold consistency)", ok, &detail);
    assert!(ok, "{detail}");
}

/// Criterion 3: weight-simplex grid search never beats the closed-form MMSE
/// and lands on the analytic weights.
#[test]
fn criterion_3_weight_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let step = 0.01;
    let mut worst_gap: f64 = 0.0;
    let mut worst_dev: f64 = 0.0;
    let mut ok = true;

    for _ in 0..200 {
        let n = rng.random_range(1..=4usize);
        let theta_raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.25..4.0)).collect();
        let theta = FidelityVector::new(theta_raw.clone()).unwrap();
        let (w_grid, grid_mse) = brute_force_weights(&theta, step, 1.0).unwrap();
        let (w_opt, mmse) = optimal_weights(&theta);

        // No grid point may undercut the analytic minimum.
        if grid_mse < mmse - 1e-12 {
            ok = false;
        }
        // The grid minimum must sit within one cell's quadratic increment.
        let slack: f64 = theta_raw.iter().map(|t| 1.0 / t).sum::<f64>() * step * step;
        let gap = grid_mse - mmse;
        worst_gap = worst_gap.max(gap);
        if gap > slack {
            ok = false;
        }
        // The grid argmin must be within one cell of the analytic weights.
        for (a, b) in w_grid.as_slice().iter().zip(w_opt.as_slice()) {
            let dev = (a - b).abs();
            worst_dev = worst_dev.max(dev);
            if dev > step + 1e-12 {
                ok = false;
            }
        }
    }

    let elapsed = start.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 60.0;
    report(
        "3 (weight grid oracle, 200 instances)",
        ok,
        &format!(
            "worst MSE gap {worst_gap:.3e}, worst weight deviation {worst_dev:.3e}, \
                  elapsed {elapsed:?}"
        ),
    );
    assert!(ok);
}

/// Criterion 4: allocation grid search returns (near-)uniform splits for
/// convex costs.
#[test]
fn criterion_4_allocation_grid_oracle() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let grid_points = 199;
    let mut worst_dev_cells: f64 = 0.0;
    let mut ok = true;

    for i in 0..50 {
        let cost = if i % 2 == 0 {
            CostSpec::new(
                rng.random_range(0.0..3.0),
                IncrementalCostForm::Exponential(ExponentialCost {
                    alpha: rng.random_range(0.5..2.0),
                    beta: rng.random_range(0.3..1.5),
                }),
            )
            .unwrap()
        } else {
            CostSpec::new(
                rng.random_range(0.0..3.0),
                IncrementalCostForm::Power(PowerCost {
                    alpha: rng.random_range(0.5..2.0),
                    p: rng.random_range(1.3..3.0),
                }),
            )
            .unwrap()
        };
        let tau = rng.random_range(0.5..2.0);
        let budget = 1.0 / tau;
        let cell = budget / (grid_points as f64 + 1.0);
        for n in [2usize, 3] {
            let (best, _) = brute_force_allocation(&cost, tau, n, grid_points).unwrap();
            let uniform = budget / n as f64;
            for &t in &best {
                let dev = (t - uniform).abs();
                worst_dev_cells = worst_dev_cells.max(dev / cell);
                if dev > cell * (1.0 + 1e-9) {
                    ok = false;
                }
            }
        }
    }

    let elapsed = start.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 60.0;
    report(
        "4 (allocation grid oracle, 50 convex specs)",
        ok,
        &format!("worst deviation {worst_dev_cells:.3} cells, elapsed {elapsed:?}"),
    );
    assert!(ok);
}

/// Criterion 5: Monte Carlo MSE within 3 standard errors of 1/sum(theta) in
/// at least 19 of 20 random configurations.
#[test]
fn criterion_5_monte_carlo_mse() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let kinds = [
        PerturbationKind::Gaussian,
        PerturbationKind::Uniform,
        PerturbationKind::Rademacher,
    ];
    let mut hits = 0usize;

    for i in 0..20 {
        let n = rng.random_range(1..=5usize);
        let theta_raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..5.0)).collect();
        let theta = FidelityVector::new(theta_raw).unwrap();
        let (weights, mmse) = optimal_weights(&theta);
        let cfg = SimulationConfig {
            kind: kinds[i % 3],
            theta,
            weights,
            y_value: 1.0,
            trials: 1_000_000,
            seed: 1000 + i as u64,
        };
        let r = run_fusion_trials(&cfg).unwrap();
        if (r.empirical_mse - mmse).abs() <= 3.0 * r.mse_std_err {
            hits += 1;
        }
    }

    let elapsed = start.elapsed();
    let ok = hits >= 19 && elapsed.as_secs_f64() < 120.0;
    report(
        "5 (Monte Carlo MSE, 20 configs x 1e6 trials)",
        ok,
        &format!("{hits}/20 within 3 sigma, elapsed {elapsed:?}"),
    );
    assert!(ok, "{hits}/20 within 3 sigma");
}

/// Criterion 6: empirical tails respect the sub-Gaussian bound (Gaussian and
/// Rademacher) and the Chebyshev bound (all three kinds).
#[test]
fn criterion_6_tail_bounds() {
    let start = Instant::now();
    let trials = 1_000_000u64;
    let mut ok = true;
    let mut checked_subg = 0usize;
    let mut checked_cheby = 0usize;

    // (kind, theta, eps multiplier c giving eps = c / sqrt(sum theta)).
    let settings: [(PerturbationKind, &[f64], f64); 10] = [
        (PerturbationKind::Gaussian, &[1.0], 1.0),
        (PerturbationKind::Gaussian, &[1.0, 1.0], 1.5),
        (PerturbationKind::Gaussian, &[0.5, 2.5], 2.0),
        (PerturbationKind::Gaussian, &[2.0, 3.0, 5.0], 2.5),
        (PerturbationKind::Gaussian, &[4.0], 3.0),
        (PerturbationKind::Rademacher, &[1.0], 0.9),
        (PerturbationKind::Rademacher, &[2.0, 2.0], 1.0),
        (PerturbationKind::Rademacher, &[1.0, 2.0, 3.0], 1.5),
        (PerturbationKind::Rademacher, &[0.5, 0.5], 2.0),
        (PerturbationKind::Rademacher, &[3.0, 1.0], 2.5),
    ];

    for (i, (kind, theta_raw, c)) in settings.iter().enumerate() {
        let theta = FidelityVector::new(theta_raw.to_vec()).unwrap();
        let sum_theta = theta.total();
        let eps = c / sum_theta.sqrt();
        let (weights, _) = optimal_weights(&theta);
        let cfg = SimulationConfig {
            kind: *kind,
            theta,
            weights,
            y_value: 1.0,
            trials,
            seed: 2000 + i as u64,
        };
        let tail = &estimate_tail(&cfg, &[eps]).unwrap()[0];
        let sigma = (tail.empirical_prob * (1.0 - tail.empirical_prob) / trials as f64)
            .sqrt()
            .max(1.0 / trials as f64);
        if tail.empirical_prob > tail.subgaussian_bound + 3.0 * sigma {
            ok = false;
        }
        checked_subg += 1;
        if tail.empirical_prob > tail.chebyshev_bound + 3.0 * sigma {
            ok = false;
        }
        checked_cheby += 1;
    }

    // Chebyshev must hold for the uniform kind too.
    for (i, c) in [1.0f64, 1.5, 2.0].iter().enumerate() {
        let theta = FidelityVector::new(vec![1.0f64, 2.0]).unwrap();
        let sum_theta = theta.total();
        let eps = c / sum_theta.sqrt();
        let (weights, _) = optimal_weights(&theta);
        let cfg = SimulationConfig {
            kind: PerturbationKind::Uniform,
            theta,
            weights,
            y_value: 1.0,
            trials,
            seed: 3000 + i as u64,
        };
        let tail = &estimate_tail(&cfg, &[eps]).unwrap()[0];
        let sigma = (tail.empirical_prob * (1.0 - tail.empirical_prob) / trials as f64)
            .sqrt()
            .max(1.0 / trials as f64);
        if tail.empirical_prob > tail.chebyshev_bound + 3.0 * sigma {
            ok = false;
        }
        checked_cheby += 1;
    }

    let elapsed = start.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 120.0;
    report(
        "6 (tail bounds)",
        ok,
        &format!(
            "{checked_subg} sub-Gaussian and {checked_cheby} Chebyshev checks, \
                  elapsed {elapsed:?}"
        ),
    );
    assert!(ok);
}

/// Criterion 7: one unit is strictly cheapest for linear and concave costs;
/// concave incremental costs are sub-additive.
#[test]
fn criterion_7_always_single_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut violations = 0usize;
    let mut subadd_violations = 0usize;

    let mut check_single_unit = |cost: &CostSpec<f64>,
                                 fusion: &FusionCostSpec<f64>,
                                 rng: &mut ChaCha8Rng,
                                 tau_lo: f64,
                                 tau_hi: f64| {
        for _ in 0..10 {
            let tau = rng.random_range(tau_lo..tau_hi);
            let single = total_cost(cost, fusion, tau, 1).unwrap();
            for n in 2..=50 {
                if total_cost(cost, fusion, tau, n).unwrap() <= single {
                    violations += 1;
                }
            }
        }
    };

    // 100 random linear specs.
    for _ in 0..100 {
        let cost = CostSpec::new(
            rng.random_range(0.0..5.0),
            IncrementalCostForm::Linear(LinearCost {
                alpha: rng.random_range(0.1..5.0),
            }),
        )
        .unwrap();
        let fusion = FusionCostSpec::LinearMinusOne(LinearMinusOneFusion {
            gamma: rng.random_range(0.1..2.0),
        });
        check_single_unit(&cost, &fusion, &mut rng, 0.2, 5.0);
    }

    // 100 random concave specs: log, power p < 1, and tabulated samples of a
    // square-root curve.
    for i in 0..100 {
        let incremental = match i % 3 {
            0 => IncrementalCostForm::LogConcave(LogConcaveCost {
                alpha: rng.random_range(0.2..3.0),
                beta: rng.random_range(0.2..3.0),
            }),
            1 => IncrementalCostForm::Power(PowerCost {
                alpha: rng.random_range(0.2..3.0),
                p: rng.random_range(0.3..0.95),
            }),
            _ => {
                let scale = rng.random_range(0.5..2.0);
                let knots: Vec<(f64, f64)> = (0..=12)
                    .map(|j| {
                        let x = j as f64 * 0.5;
                        (x, scale * x.sqrt())
                    })
                    .collect();
                IncrementalCostForm::Tabulated(TabulatedCost { knots })
            }
        };
        let cost = CostSpec::new(rng.random_range(0.0..5.0), incremental).unwrap();
        let fusion = FusionCostSpec::LinearMinusOne(LinearMinusOneFusion {
            gamma: rng.random_range(0.1..2.0),
        });
        check_single_unit(&cost, &fusion, &mut rng, 0.2, 5.0);

        // Sub-additivity on 1000 random pairs, inside the tabulated domain.
        let half = match &cost.incremental {
            IncrementalCostForm::Tabulated(t) => t.knots[t.knots.len() - 1].0 / 2.0,
            _ => 25.0,
        };
        for _ in 0..1000 {
            let x = rng.random_range(0.0..half);
            let y = rng.random_range(0.0..half);
            let gx = cost.incremental.eval(x).unwrap();
            let gy = cost.incremental.eval(y).unwrap();
            let gxy = cost.incremental.eval(x + y).unwrap();
            if gx + gy < gxy - 1e-12 * gxy.abs().max(1.0) {
                subadd_violations += 1;
            }
        }
    }

    let elapsed = start.elapsed();
    let ok = violations == 0 && subadd_violations == 0 && elapsed.as_secs_f64() < 10.0;
    report(
        "7 (linear/concave single-unit optimality and sub-additivity)",
        ok,
        &format!(
            "{violations} cost violations, {subadd_violations} sub-additivity violations, \
                  elapsed {elapsed:?}"
        ),
    );
    assert!(ok);
}

/// Criterion 8: convexity of the relaxed cost and monotonicity of the
/// benefit function across random convex specs.
#[test]
fn criterion_8_convexity_and_benefit_properties() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC8);
    let mut convexity_violations = 0usize;
    let mut v_violations = 0usize;

    for i in 0..100 {
        let cost: CostSpec<f64> = if i % 2 == 0 {
            CostSpec::new(
                rng.random_range(0.0..5.0),
                IncrementalCostForm::Exponential(ExponentialCost {
                    alpha: rng.random_range(0.3..2.0),
                    beta: rng.random_range(0.3..1.5),
                }),
            )
            .unwrap()
        } else {
            CostSpec::new(
                rng.random_range(0.0..5.0),
                IncrementalCostForm::Power(PowerCost {
                    alpha: rng.random_range(0.3..2.0),
                    p: rng.random_range(1.2..3.0),
                }),
            )
            .unwrap()
        };
        let fusion = match i % 3 {
            0 => FusionCostSpec::LinearMinusOne(LinearMinusOneFusion {
                gamma: rng.random_range(0.0..2.0),
            }),
            1 => FusionCostSpec::Polynomial(PolynomialFusion {
                coeffs: vec![rng.random_range(0.1..1.0), rng.random_range(0.0..0.5)],
            }),
            _ => FusionCostSpec::Affine(AffineFusion {
                d0: rng.random_range(0.0..1.0),
                d1: rng.random_range(0.1..1.0),
            }),
        };
        let tau = rng.random_range(0.1..2.0);

        // Second differences of Cost_tau(a) over [1, max(4 a_o, 8)].
        let a_o = solve_continuous_minimizer(&cost, &fusion, tau).unwrap();
        let hi = (4.0 * a_o).max(8.0);
        let m = 64usize;
        let step = (hi - 1.0) / (m as f64 - 1.0);
        let costs: Vec<f64> = (0..m)
            .map(|k| {
                let a = 1.0 + k as f64 * step;
                relaxed_cost(&cost, &fusion, tau, a)
            })
            .collect();
        let scale = costs.iter().fold(0.0f64, |acc, c| acc.max(c.abs()));
        for w in costs.windows(3) {
            if w[2] - 2.0 * w[1] + w[0] < -1e-9 * scale {
                convexity_violations += 1;
            }
        }

        // V nonnegative and nonincreasing over a geometric tau grid.
        let mut prev = f64::INFINITY;
        for k in 0..50 {
            let t = 0.05 * (100.0f64 / 0.05).powf(k as f64 / 49.0);
            let v = fusion_gain(&cost, t).unwrap();
            let tol = 1e-9 * prev.abs().max(1.0);
            if v < -1e-12 || (prev.is_finite() && v > prev + tol) {
                v_violations += 1;
            }
            prev = v;
        }

        // kappa at 1 must equal cutoff - V exactly up to rounding.
        let kappa = cost_slope(&cost, &fusion, tau, 1.0).unwrap();
        let cutoff = cost.c_min + fusion.deriv(1.0, 1).unwrap();
        let v = fusion_gain(&cost, tau).unwrap();
        if (kappa - (cutoff - v)).abs() > 1e-9 * (1.0 + v.abs()) {
            v_violations += 1;
        }
    }

    // The worked example's benefit function vanishes at huge tau.
    let (cost, _) = exp_model();
    let v_far = fusion_gain(&cost, 1e6).unwrap();
    let far_ok = (0.0..=1e-3).contains(&v_far);

    let elapsed = start.elapsed();
    let ok =
        convexity_violations == 0 && v_violations == 0 && far_ok && elapsed.as_secs_f64() < 10.0;
    report(
        "8 (relaxed-cost convexity and benefit monotonicity)",
        ok,
        &format!(
            "{convexity_violations} convexity violations, {v_violations} benefit violations, \
                  V(1e6) = {v_far:.3e}, elapsed {elapsed:?}"
        ),
    );
    assert!(ok);
}

/// Continuous-relaxation cost a*G(1/(tau a)) + a*c_min + D(a), evaluated
/// directly (not through the integer-only total_cost).
fn relaxed_cost(cost: &CostSpec<f64>, fusion: &FusionCostSpec<f64>, tau: f64, a: f64) -> f64 {
    let x = 1.0 / (tau * a);
    a * cost.incremental.eval(x).unwrap() + a * cost.c_min + fusion.eval(a).unwrap()
}
