//! `bwsim` — run the Bell-Wigner experiment simulator from the command line.
//!
//! Subcommands: `ideal` (exact predictions), `sample` (finite-statistics
//! emulation), `loophole` (detection-efficiency sweep) and `verify` (the
//! built-in verification suite). Exit codes: 0 success, 2 configuration
//! error, 3 verification failure.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use bellwigner::circuit::Variant;
use bellwigner::experiment::{
    run_ideal, run_loophole, run_sample, write_counts_csv, write_efficiency_csv,
    write_probability_csv, write_report_json, EtaGrid, ExperimentConfig, RunReport,
};
use bellwigner::verify::{run_all, Tolerances};
use bellwigner::Error;

#[derive(Parser)]
#[command(
    name = "bwsim",
    about = "Six-photon Bell-Wigner experiment simulator",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact outcome probabilities and expectation values, no sampling.
    Ideal(RunArgs),
    /// Poisson-sampled counts with analytic and Monte-Carlo uncertainties.
    Sample(RunArgs),
    /// Detection-efficiency sweep S(η) with the violation threshold.
    Loophole(LoopholeArgs),
    /// Run the verification suite; exits 3 on any failing check.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct RunArgs {
    /// JSON configuration file; flags below override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// RNG seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Total six-fold coincidence budget across the four settings.
    #[arg(long)]
    events: Option<u64>,
    /// Protocol variant: main | alt_observables | alt_polarizer_protocol.
    #[arg(long)]
    variant: Option<String>,
    /// Monte-Carlo replica count.
    #[arg(long)]
    mc_samples: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct LoopholeArgs {
    /// JSON configuration file (used for the output directory).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Efficiency grid start:stop:step.
    #[arg(long)]
    eta_grid: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Tolerance for exact double-precision algebra.
    #[arg(long)]
    tol_exact: Option<f64>,
    /// Tolerance for eigenvalue-based checks.
    #[arg(long)]
    tol_eigen: Option<f64>,
    /// Tolerance for root finding against closed forms.
    #[arg(long)]
    tol_root: Option<f64>,
    /// Skip the statistical checks (error machinery, noise plausibility,
    /// inefficiency simulation) for a quick structural pass.
    #[arg(long)]
    skip_statistical: bool,
    /// Directory for the failure manifest, written only on failure.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn init_threads() {
    if let Ok(raw) = std::env::var("BW_SIM_THREADS") {
        if let Ok(n) = raw.parse::<usize>() {
            if n >= 1 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}

fn load_config(args: &RunArgs) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(events) = args.events {
        cfg.total_events = events;
    }
    if let Some(variant) = &args.variant {
        cfg.variant = Variant::from_str(variant)?;
    }
    if let Some(mc) = args.mc_samples {
        cfg.mc_samples = mc;
    }
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn print_summary(report: &RunReport) {
    let s = &report.result_analytic.s;
    println!(
        "S = {:.4} (analytic sigma {:.4})",
        s.value,
        s.sigma_mean()
    );
    if let Some(mc) = &report.result_monte_carlo {
        println!(
            "S = {:.4} +{:.4}/-{:.4} (monte carlo)",
            mc.s.value, mc.s.sigma_plus, mc.s.sigma_minus
        );
    }
    if let Some(d) = report.sigma_distance {
        println!("violation sigma-distance (S-2)/sigma- = {d:.2}");
    }
    println!(
        "no-signalling max marginal discrepancy: alice {:.3e}, bob {:.3e}",
        report.no_signalling.alice_max_discrepancy, report.no_signalling.bob_max_discrepancy
    );
}

fn cmd_ideal(args: RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args)?;
    let report = run_ideal(&cfg)?;
    let dir = cfg.output_dir.clone();
    write_report_json(&dir.join("report.json"), &report)?;
    write_probability_csv(&dir.join("probabilities.csv"), &report.tables)?;
    print_summary(&report);
    println!("wrote {}", dir.join("report.json").display());
    Ok(())
}

fn cmd_sample(args: RunArgs) -> Result<(), Error> {
    let cfg = load_config(&args)?;
    let report = run_sample(&cfg)?;
    let dir = cfg.output_dir.clone();
    write_report_json(&dir.join("report.json"), &report)?;
    write_probability_csv(&dir.join("probabilities.csv"), &report.tables)?;
    if let Some(counts) = &report.counts {
        write_counts_csv(&dir.join("counts.csv"), counts)?;
    }
    print_summary(&report);
    println!("wrote {}", dir.join("report.json").display());
    Ok(())
}

fn cmd_loophole(args: LoopholeArgs) -> Result<(), Error> {
    let dir = match (&args.out, &args.config) {
        (Some(out), _) => out.clone(),
        (None, Some(path)) => ExperimentConfig::load(path)?.output_dir,
        (None, None) => ExperimentConfig::default().output_dir,
    };
    let grid = match &args.eta_grid {
        Some(raw) => EtaGrid::from_str(raw)?,
        None => EtaGrid::default(),
    };
    let curve = run_loophole(&grid)?;
    write_efficiency_csv(&dir.join("efficiency_curve.csv"), &curve)?;
    println!("violation threshold eta = {:.4}", curve.threshold);
    println!(
        "plain-Bell reference eta = {:.4}",
        bellwigner::loopholes::chsh_eta_reference()
    );
    println!("wrote {}", dir.join("efficiency_curve.csv").display());
    Ok(())
}

fn cmd_verify(args: VerifyArgs) -> Result<bool, Error> {
    let defaults = Tolerances::default();
    let tols = Tolerances {
        exact: args.tol_exact.unwrap_or(defaults.exact),
        eigen: args.tol_eigen.unwrap_or(defaults.eigen),
        root: args.tol_root.unwrap_or(defaults.root),
    };
    let results = run_all(&tols, !args.skip_statistical);
    let mut all_passed = true;
    for r in &results {
        let tag = if r.passed { "PASS" } else { "FAIL" };
        println!("{tag} {}: {}", r.name, r.detail);
        all_passed &= r.passed;
    }
    if !all_passed {
        let failures: Vec<serde_json::Value> = results
            .iter()
            .filter(|r| !r.passed)
            .map(|r| serde_json::json!({ "check": r.name, "detail": r.detail }))
            .collect();
        let manifest = serde_json::to_string_pretty(&serde_json::json!({
            "failures": failures
        }))?;
        let dir = args.out.unwrap_or_else(|| PathBuf::from("out"));
        std::fs::create_dir_all(&dir)?;
        let path = dir.join("verify_failures.json");
        std::fs::write(&path, manifest + "\n")?;
        eprintln!("failure manifest written to {}", path.display());
    }
    Ok(all_passed)
}

fn main() -> ExitCode {
    init_threads();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Ideal(args) => cmd_ideal(args).map(|()| true),
        Command::Sample(args) => cmd_sample(args).map(|()| true),
        Command::Loophole(args) => cmd_loophole(args).map(|()| true),
        Command::Verify(args) => cmd_verify(args),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
