use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dampwave::coeffs::ProfileSpec;
use dampwave::error::LabError;
use dampwave::lab::{emit_reports, run_bundle, LabConfig, RunOptions, EXIT_CONFIG, EXIT_IO};

#[derive(Parser)]
#[command(version, about = "Numerical lab for wave equations with time-dependent damping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiments in a configuration file
    Run {
        config: PathBuf,
        /// Output directory (overrides `output_dir` in the file)
        #[arg(long, env = "DAMPWAVE_OUT")]
        out: Option<PathBuf>,
        /// Run only the experiment with this name
        #[arg(long)]
        only: Option<String>,
        /// Worker threads
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed for every experiment, overriding the file
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Parse and check a configuration file without running it
    Validate { config: PathBuf },
    /// List the built-in coefficient profiles
    ListProfiles,
}

fn fail(e: &LabError) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(match e {
        LabError::Io { .. } => EXIT_IO,
        _ => EXIT_CONFIG,
    } as u8)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::ListProfiles => {
            for (kind, params, formula) in ProfileSpec::catalogue() {
                println!("{kind:<16} {params:<24} {formula}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match LabConfig::load(&config) {
            Ok(cfg) => {
                println!("{}: {} experiment(s), ok", config.display(), cfg.experiment.len());
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::Run {
            config,
            out,
            only,
            jobs,
            seed,
        } => {
            let cfg = match LabConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return fail(&e),
            };
            let dir = out.or_else(|| cfg.output_dir.clone()).unwrap_or_else(|| PathBuf::from("lab_out"));
            let opts = RunOptions { only, seed };
            let run = || run_bundle(&cfg, &opts);
            let bundle = match jobs {
                Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
                    Ok(pool) => pool.install(run),
                    Err(e) => {
                        eprintln!("error: cannot start {n} worker threads: {e}");
                        return ExitCode::from(EXIT_CONFIG as u8);
                    }
                },
                None => run(),
            };
            let bundle = match bundle {
                Ok(b) => b,
                Err(e) => return fail(&e),
            };
            if let Err(e) = emit_reports(&bundle, &dir) {
                return fail(&e);
            }
            for e in &bundle.experiments {
                println!("{:<24} {:?}", e.name, e.status);
            }
            println!("reports in {}", dir.display());
            ExitCode::from(bundle.exit_code() as u8)
        }
    }
}
