//! Command-line front end for batch bandit experiments.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use gapband::harness::{
    config_bounds, config_rho_threshold, format_g12, parse_config, parse_seeds, run_experiment,
    ExitStatus, ExperimentConfig,
};
use gapband::model::{read_env, CertMode, CERT_TOL};
use gapband::policy::PolicyRegistry;
use gapband::Error;

#[derive(Parser)]
#[command(
    name = "gapband",
    version,
    about = "Linear bandits under gap-adjusted misspecification"
)]
struct Cli {
    /// Override the configured output directory.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Override the configured seeds (`0..20` or `1, 5, 9`).
    #[arg(long, global = true)]
    seeds: Option<String>,
    /// Only print errors.
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Worker threads for seed-level parallelism; defaults to all cores.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of an experiment and write traces and a summary.
    Run { config: PathBuf },
    /// Certify a stored environment file.
    Certify { env_file: PathBuf },
    /// Print the regret bound per seed without running.
    Bound { config: PathBuf },
    /// Print the largest misspecification level the confidence radius tolerates.
    Threshold { config: PathBuf },
}

fn exit_for(e: &Error) -> ExitStatus {
    match e {
        Error::Io { .. } => ExitStatus::IoError,
        _ => ExitStatus::ConfigError,
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Error> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut cfg = parse_config(&text)?;
    if let Some(dir) = &cli.output_dir {
        cfg.output_dir = dir.clone();
    }
    if let Some(s) = &cli.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<ExitStatus, Error> {
    match &cli.command {
        Command::Run { config } => {
            let cfg = load_config(config, cli)?;
            let out = run_experiment(&cfg, &PolicyRegistry::with_builtins(), cli.jobs);
            for e in &out.io_errors {
                eprintln!("error: {e}");
            }
            if !cli.quiet {
                print!("{}", out.summary.to_kv());
                println!("output_dir = {}", cfg.output_dir.display());
            }
            Ok(out.status)
        }
        Command::Certify { env_file } => {
            let env = read_env(env_file)?;
            let own = env.certify_own();
            let rho = env.spec().rho();
            let ok = own.worst_ratio <= rho + CERT_TOL;
            println!("kind = {}", env.kind());
            println!("declared_rho = {}", format_g12(rho));
            println!("certified_rho = {}", format_g12(own.worst_ratio));
            println!("witness_index = {}", own.witness_index);
            println!("max_preserved = {}", own.max_preserved);
            println!("argmax_preserved = {}", own.argmax_preserved);
            println!(
                "strict_ratio = {}",
                format_g12(env.certify(CertMode::Strict).worst_ratio)
            );
            println!(
                "weak_ratio = {}",
                format_g12(env.certify(CertMode::Weak).worst_ratio)
            );
            println!("certified = {ok}");
            Ok(if ok {
                ExitStatus::Ok
            } else {
                ExitStatus::ConfigError
            })
        }
        Command::Bound { config } => {
            let cfg = load_config(config, cli)?;
            for b in config_bounds(&cfg)? {
                println!(
                    "seed.{}.certified_rho = {}",
                    b.seed,
                    format_g12(b.certified_rho)
                );
                println!(
                    "seed.{}.bound_declared_rho = {}",
                    b.seed,
                    format_g12(b.declared)
                );
                println!(
                    "seed.{}.bound_certified_rho = {}",
                    b.seed,
                    format_g12(b.certified)
                );
            }
            Ok(ExitStatus::Ok)
        }
        Command::Threshold { config } => {
            let cfg = load_config(config, cli)?;
            let limit = config_rho_threshold(&cfg)?;
            println!("rho_threshold = {}", format_g12(limit));
            println!("rho = {}", format_g12(cfg.env.rho));
            println!("below_threshold = {}", cfg.env.rho < limit);
            Ok(ExitStatus::Ok)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.quiet { "error" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let status = match run(&cli) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            exit_for(&e)
        }
    };
    log::debug!("exit status {status:?}");
    ExitCode::from(status.code() as u8)
}
