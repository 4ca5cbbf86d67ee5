use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use popcross_cli::config::SCHEMA;
use popcross_cli::output::TOOL;
use popcross_cli::{compare, run_config, CliError, CliResult, CompareOptions};

#[derive(Parser)]
#[command(name = "popcross", version, about = "Living, ever-born and ever-dead populations of birth-death models")]
struct Cli {
    /// Worker threads for Monte Carlo ensembles (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding `output_dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed, overriding `seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compare analytic (pgf) outputs against a stochastic ensemble.
    Compare {
        analytic: PathBuf,
        ensemble: PathBuf,
        /// Directory for verdict.csv and verdict.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 3.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.015)]
        tv: f64,
        /// Comma-separated grid times to which curve checks are restricted.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
    },
    /// Print the annotated config schema.
    Schema,
    /// Print the tool version.
    Version,
}

fn execute(cli: Cli) -> CliResult<ExitCode> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run { config, out, seed } => {
            let (line, _) = run_config(&config, out.as_deref(), seed)?;
            println!("{line}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Compare { analytic, ensemble, out, sigma, tv, times } => {
            let v = compare(&analytic, &ensemble, &CompareOptions { sigma, tv, times })?;
            v.artifacts(&analytic, &ensemble).write(&out)?;
            println!("{}", v.summary_line());
            Ok(if v.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Schema => {
            print!("{SCHEMA}");
            Ok(ExitCode::SUCCESS)
        }
        Command::Version => {
            println!("{TOOL}");
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
