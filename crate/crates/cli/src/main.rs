use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use roqj_cli::commands;
use roqj_cli::config::{Config, LoadError, Overrides};
use roqj_cli::CliError;

/// Quantum jump unravellings of time-local master equations.
#[derive(Debug, Parser)]
#[command(name = "roqj", version)]
struct Cli {
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the trajectory engine and write <prefix>_sim.csv.
    Run(RunArgs),
    /// Integrate the master equation and write <prefix>_exact.csv.
    Exact(RunArgs),
    /// Compare a simulation CSV against a reference CSV.
    Compare {
        sim: PathBuf,
        exact: PathBuf,
        /// Take thresholds from this config instead of the one echoed in SIM.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Sample the P-divisibility criterion and write <prefix>_probe.csv.
    Probe(RunArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Config file, or a CSV written by this tool.
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// mcwf, roqj_p or roqj_general.
    #[arg(long)]
    engine: Option<String>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    n_traj: Option<usize>,
}

fn load(path: &Path) -> Result<Config, CliError> {
    Config::load(path).map_err(|e| match e {
        LoadError::Io(..) => CliError::Usage(e.to_string()),
        LoadError::Invalid(_) => CliError::Validation(e.to_string()),
    })
}

fn prepare(args: &RunArgs) -> Result<Config, CliError> {
    let mut config = load(&args.config)?;
    let overrides = Overrides { seed: args.seed, engine: args.engine.clone(), dt: args.dt, n_traj: args.n_traj };
    config.apply(&overrides).map_err(|e| CliError::Validation(format!("invalid config: {e}")))?;
    std::fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", args.out_dir.display())))?;
    Ok(config)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("--threads: {e}")))?;
    }
    match cli.command {
        Command::Run(args) => {
            let config = prepare(&args)?;
            println!("{}", commands::run(&config, &args.out_dir)?);
        }
        Command::Exact(args) => {
            let config = prepare(&args)?;
            println!("wrote {}", commands::exact(&config, &args.out_dir)?.display());
        }
        Command::Compare { sim, exact, config } => {
            let thresholds = config.map(|p| load(&p).map(|c| c.compare)).transpose()?;
            let report = commands::compare(&sim, &exact, thresholds)?;
            println!("{report}");
            if !report.passed() {
                return Err(CliError::ComparisonFailed(format!("{} threshold violations", report.failures.len())));
            }
        }
        Command::Probe(args) => {
            let config = prepare(&args)?;
            println!("{}", commands::probe(&config, &args.out_dir)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
