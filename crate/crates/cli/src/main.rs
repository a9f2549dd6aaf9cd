//! `fuseplan` command line: plan strategies, sweep cost tables, map
//! threshold regions, run simulations, and re-run the oracle suite.
//!
//! Exit codes: 0 success, 1 verification failure, 2 input error, 3 domain
//! error. Every file-producing command writes a sidecar
//! `<out>.manifest.json` with a content digest of the resolved config.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use fuseplan::oracle::{verification_suite, SuiteItem};
use fuseplan::planner::{plan, threshold_tau, Regime, ThresholdTau};
use fuseplan::simulator::run_with_tails;
use fuseplan::{CostSpec64, Error, FusionCostSpec64, SimulationConfig64};

/// Cost-optimal redundancy planning for unreliable computational units.
#[derive(Parser)]
#[command(name = "fuseplan", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compute the cost-optimal strategy for one target MSE.
    Plan {
        /// Model config JSON: {"cost": {...}, "fusion": {...}}.
        #[arg(long)]
        config: PathBuf,
        /// Target mean-square error.
        #[arg(long)]
        tau: f64,
        /// Output path for the strategy plan JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the total cost over unit counts for each target MSE.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated target MSE values, swept in input order.
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
        /// Largest unit count to tabulate.
        #[arg(long)]
        n_max: usize,
        /// Output path for the CSV (tau,n,total_cost,is_argmin).
        #[arg(long)]
        out: PathBuf,
    },
    /// Map single-unit vs fused regions over a grid of target MSEs.
    Threshold {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated target MSE grid.
        #[arg(long, value_delimiter = ',', required = true)]
        tau_list: Vec<f64>,
        /// Output path for the CSV (tau,v_tau,cutoff,region).
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a seeded Monte Carlo fusion simulation.
    Simulate {
        /// Simulation config JSON (kind, theta, weights, y_value, trials, seed).
        #[arg(long)]
        config: PathBuf,
        /// Override the config's trial count.
        #[arg(long)]
        trials: Option<u64>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Deviations at which to estimate tail probabilities.
        #[arg(long, value_delimiter = ',')]
        epsilons: Vec<f64>,
        /// Output path for the report JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-run the brute-force oracle suite against a model config.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Target MSE used by the tau-dependent checks.
        #[arg(long, default_value_t = 0.1)]
        tau: f64,
        /// Seed for the randomized oracle instances.
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

/// Model config wrapping a cost spec and a fusion cost spec.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelConfig {
    cost: CostSpec64,
    fusion: FusionCostSpec64,
}

enum CliError {
    /// Unreadable or malformed input: exit 2.
    Input(String),
    /// Valid input outside an operation's domain: exit 3.
    Domain(String),
    /// Oracle verdicts failed: exit 1.
    VerificationFailed(usize),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidSpec(_) => CliError::Input(e.to_string()),
            other => CliError::Domain(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, message) = match e {
                CliError::Input(m) => (2, m),
                CliError::Domain(m) => (3, m),
                CliError::VerificationFailed(n) => (1, format!("{n} verdict(s) failed")),
            };
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Plan { config, tau, out } => cmd_plan(&config, tau, &out),
        Command::Sweep {
            config,
            tau_list,
            n_max,
            out,
        } => cmd_sweep(&config, &tau_list, n_max, &out),
        Command::Threshold {
            config,
            tau_list,
            out,
        } => cmd_threshold(&config, &tau_list, &out),
        Command::Simulate {
            config,
            trials,
            seed,
            epsilons,
            out,
        } => cmd_simulate(&config, trials, seed, &epsilons, &out),
        Command::Verify { config, tau, seed } => cmd_verify(&config, tau, seed),
    }
}

fn load_model(path: &Path) -> Result<ModelConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let model: ModelConfig = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))?;
    model
        .cost
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    model
        .fusion
        .validate()
        .map_err(|e| CliError::Input(e.to_string()))?;
    Ok(model)
}

fn load_simulation(path: &Path) -> Result<SimulationConfig64, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
    let cfg: SimulationConfig64 = serde_json::from_str(&text)
        .map_err(|e| CliError::Input(format!("cannot parse {}: {e}", path.display())))?;
    Ok(cfg)
}

/// Round-trip-exact float formatting (17 significant digits) for CSV cells.
fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Serialize)]
struct RunManifest {
    command: String,
    config_digest: String,
    seed: u64,
    tool_version: String,
    outputs: Vec<String>,
}

/// Digest of the resolved config: SHA-256 over its canonical JSON bytes.
fn config_digest<S: Serialize>(resolved: &S) -> Result<String, CliError> {
    let bytes = serde_json::to_vec(resolved)
        .map_err(|e| CliError::Input(format!("cannot serialize config: {e}")))?;
    let hash = Sha256::digest(&bytes);
    let mut hex = String::with_capacity(64);
    for b in hash {
        let _ = write!(hex, "{b:02x}");
    }
    Ok(hex)
}

fn write_manifest<S: Serialize>(
    command: String,
    resolved: &S,
    seed: u64,
    out: &Path,
) -> Result<(), CliError> {
    let manifest = RunManifest {
        command,
        config_digest: config_digest(resolved)?,
        seed,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        outputs: vec![out.display().to_string()],
    };
    let mut path = out.as_os_str().to_owned();
    path.push(".manifest.json");
    let body =
        serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(PathBuf::from(path), body + "\n")?;
    Ok(())
}

fn cmd_plan(config: &Path, tau: f64, out: &Path) -> Result<(), CliError> {
    let model = load_model(config)?;
    let strategy = plan(&model.cost, &model.fusion, tau)?;
    let body =
        serde_json::to_string_pretty(&strategy).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(out, body + "\n")?;
    write_manifest(format!("plan --tau {tau}"), &model, 0, out)?;
    Ok(())
}

fn cmd_sweep(config: &Path, tau_list: &[f64], n_max: usize, out: &Path) -> Result<(), CliError> {
    if tau_list.is_empty() {
        return Err(CliError::Input(
            "tau list is empty; nothing to sweep".into(),
        ));
    }
    let model = load_model(config)?;
    let mut csv = String::from("tau,n,total_cost,is_argmin\n");
    for &tau in tau_list {
        let (argmin, table) =
            fuseplan::oracle::sweep_integer_n(&model.cost, &model.fusion, tau, n_max)?;
        for (n, cost) in table {
            let _ = writeln!(
                csv,
                "{},{},{},{}",
                csv_float(tau),
                n,
                csv_float(cost),
                n == argmin
            );
        }
    }
    fs::write(out, csv)?;
    let taus: Vec<String> = tau_list.iter().map(|t| t.to_string()).collect();
    write_manifest(
        format!("sweep --tau-list {} --n-max {n_max}", taus.join(",")),
        &model,
        0,
        out,
    )?;
    Ok(())
}

fn cmd_threshold(config: &Path, tau_list: &[f64], out: &Path) -> Result<(), CliError> {
    if tau_list.is_empty() {
        return Err(CliError::Input("tau grid is empty".into()));
    }
    let model = load_model(config)?;
    let regime = threshold_tau(&model.cost, &model.fusion)?;
    match regime {
        Regime::LinearAlwaysSingle | Regime::ConcaveAlwaysSingle => {
            return Err(CliError::Domain(format!(
                "threshold analysis applies to convex costs only; this config is {}, \
                 where a single unit is optimal at every target",
                regime.name()
            )));
        }
        Regime::ConvexThresholded {
            threshold: ThresholdTau::Finite(t),
        } => {
            println!("threshold_tau = {}", csv_float(t));
        }
        Regime::ConvexThresholded {
            threshold: ThresholdTau::Unbounded,
        } => {
            println!("threshold_tau = unbounded");
        }
        Regime::ConvexAlwaysSingle => {}
    }

    let cutoff = model.cost.c_min + model.fusion.deriv(1.0, 1)?;
    let mut csv = String::from("tau,v_tau,cutoff,region\n");
    for &tau in tau_list {
        let v = fuseplan::planner::fusion_gain(&model.cost, tau)?;
        let region = if cutoff < v { "fused" } else { "single" };
        let _ = writeln!(
            csv,
            "{},{},{},{region}",
            csv_float(tau),
            csv_float(v),
            csv_float(cutoff)
        );
    }
    fs::write(out, csv)?;
    let taus: Vec<String> = tau_list.iter().map(|t| t.to_string()).collect();
    write_manifest(
        format!("threshold --tau-list {}", taus.join(",")),
        &model,
        0,
        out,
    )?;
    Ok(())
}

fn cmd_simulate(
    config: &Path,
    trials: Option<u64>,
    seed: Option<u64>,
    epsilons: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    let mut cfg = load_simulation(config)?;
    if let Some(trials) = trials {
        cfg.trials = trials;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    let report = run_with_tails(&cfg, epsilons)?;
    let body = serde_json::to_string_pretty(&report).map_err(|e| CliError::Input(e.to_string()))?;
    fs::write(out, body + "\n")?;
    let mut command = format!("simulate --trials {} --seed {}", cfg.trials, cfg.seed);
    if !epsilons.is_empty() {
        let eps: Vec<String> = epsilons.iter().map(|e| e.to_string()).collect();
        let _ = write!(command, " --epsilons {}", eps.join(","));
    }
    write_manifest(command, &cfg, cfg.seed, out)?;
    Ok(())
}

fn cmd_verify(config: &Path, tau: f64, seed: u64) -> Result<(), CliError> {
    let model = load_model(config)?;
    let items = verification_suite(&model.cost, &model.fusion, tau, seed)?;
    let mut failures = 0usize;
    for item in &items {
        match item {
            SuiteItem::Verdict(v) => {
                let status = if v.passed { "PASS" } else { "FAIL" };
                println!(
                    "{status} {:<32} analytic={:.9e} brute_force={:.9e} max_abs_gap={:.3e}",
                    v.claim, v.analytic_value, v.brute_force_value, v.max_abs_gap
                );
                if !v.passed {
                    failures += 1;
                }
            }
            SuiteItem::Skipped { claim, reason } => {
                println!("SKIP {claim:<32} ({reason})");
            }
        }
    }
    if failures > 0 {
        Err(CliError::VerificationFailed(failures))
    } else {
        Ok(())
    }
}
