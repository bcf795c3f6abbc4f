use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use goursat_lab::harness::{run_experiment, Experiment, ExperimentConfig, HarnessError, CONFIG_KEYS};

#[derive(Parser)]
#[command(name = "goursat-lab", version, about = "Cauchy and characteristic wave solvers on flat tori")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Manufactured-solution Cauchy solves on [-T, T].
    #[command(after_help = key_help())]
    Cauchy(Flags),
    /// Characteristic problem through the λ schedule.
    #[command(after_help = key_help())]
    Goursat(Flags),
    /// Mollification errors and commutator defects.
    #[command(after_help = key_help())]
    MollifyCheck(Flags),
    /// Cauchy refinement study on at least three grids.
    #[command(after_help = key_help())]
    Convergence(Flags),
    /// Trace constants K2, K3 over a seeded ensemble.
    #[command(after_help = key_help())]
    EstimateConstants(Flags),
}

#[derive(Args)]
struct Flags {
    /// key = value file applied before the flags
    #[arg(long)]
    config: Option<PathBuf>,
    /// Catalog problem [default: flat1d]
    #[arg(long)]
    catalog: Option<String>,
    /// Initial surface: cone, flatcone, slice, halfsine [default: cone]
    #[arg(long)]
    surface: Option<String>,
    /// Comma-separated points per axis, ascending [default: 64,128]
    #[arg(long)]
    grid: Option<String>,
    /// Time horizon [default: 1]
    #[arg(long = "T", value_name = "T")]
    t_max: Option<String>,
    /// Comma-separated λ values [default: 1-2^-k, k = 2..8]
    #[arg(long)]
    lambda_schedule: Option<String>,
    /// Ensemble seed [default: 0]
    #[arg(long)]
    seed: Option<String>,
    /// Output directory [default: out]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Any config key, applied last; repeatable
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

fn key_help() -> String {
    let mut s = String::from("Config keys (file, flags, then --set; later wins):\n");
    for (k, v) in CONFIG_KEYS {
        s += &format!("  {k:<18} default {v}\n");
    }
    s
}

fn build(experiment: Experiment, flags: Flags) -> Result<ExperimentConfig, HarnessError> {
    let mut cfg = ExperimentConfig::new(experiment);
    if let Some(path) = &flags.config {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        cfg.apply_text(&text)?;
        cfg.experiment = experiment;
    }
    let pairs = [
        ("catalog", flags.catalog),
        ("surface", flags.surface),
        ("grid", flags.grid),
        ("T", flags.t_max),
        ("lambda_schedule", flags.lambda_schedule),
        ("seed", flags.seed),
    ];
    for (k, v) in pairs {
        if let Some(v) = v {
            cfg.set(k, &v)?;
        }
    }
    if let Some(out) = flags.out {
        cfg.output_dir = out;
    }
    for kv in &flags.set {
        let (k, v) = kv.split_once('=').ok_or_else(|| HarnessError::Config(format!("--set {kv:?}: expected KEY=VALUE")))?;
        if k.trim() == "experiment" {
            return Err(HarnessError::Config("the experiment is chosen by the subcommand".into()));
        }
        cfg.set(k, v)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, flags) = match cli.command {
        Command::Cauchy(f) => (Experiment::Cauchy, f),
        Command::Goursat(f) => (Experiment::Goursat, f),
        Command::MollifyCheck(f) => (Experiment::MollifyCheck, f),
        Command::Convergence(f) => (Experiment::Convergence, f),
        Command::EstimateConstants(f) => (Experiment::EstimateConstants, f),
    };
    let outcome = build(experiment, flags).and_then(|cfg| run_experiment(&cfg));
    match outcome {
        Ok(out) => {
            for a in &out.assertions {
                println!("{} {}: {}", if a.passed { "PASS" } else { "FAIL" }, a.name, a.detail);
            }
            for f in &out.files {
                println!("wrote {}", f.display());
            }
            if out.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
