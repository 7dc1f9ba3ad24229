use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use degpar_cli::{run_file, Command, ExperimentConfig, RunOptions};

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Action {
    /// Parse and validate the config without running anything.
    Validate,
    Solve,
    CheckThm1,
    CheckThm2,
    CheckClassic,
    KernelDecay,
    ProfileCheck,
    EpsSweep,
    OracleCompare,
}

/// Runs one experiment from a TOML config.
///
/// Exit codes: 0 ok, 1 internal error or failed tolerance check,
/// 2 inadmissible hypothesis, 3 invalid config or arguments.
#[derive(Debug, Parser)]
#[command(name = "degpar", version)]
struct Cli {
    #[arg(value_enum)]
    action: Action,
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to `experiment.out` or `out/<name>/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel sweeps.
    #[arg(long)]
    workers: Option<usize>,
    /// Overrides `experiment.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Multiplies every declared tolerance.
    #[arg(long, default_value_t = 1.0)]
    tolerance_scale: f64,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    let name = cli.action.to_possible_value().expect("no skipped variants").get_name().to_string();
    let Some(command) = Command::from_name(&name) else {
        return validate(&cli.config);
    };
    let opts = RunOptions {
        out: cli.out,
        workers: cli.workers,
        seed: cli.seed,
        tolerance_scale: cli.tolerance_scale,
    };
    match run_file(command, &cli.config, &opts) {
        Ok(outcome) => {
            print!("{}", outcome.summary);
            println!("artifacts: {}", outcome.out_dir.display());
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprint!("{e}");
            if !e.to_string().ends_with('\n') {
                eprintln!();
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn validate(path: &std::path::Path) -> ExitCode {
    let diags = match ExperimentConfig::load(path) {
        Ok(cfg) => cfg.validate(),
        Err(d) => d,
    };
    if diags.is_empty() {
        println!("{}: ok", path.display());
        ExitCode::SUCCESS
    } else {
        for d in &diags {
            eprintln!("{d}");
        }
        ExitCode::from(3)
    }
}
