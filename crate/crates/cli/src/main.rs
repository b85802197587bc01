use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use langevin_runner::{emit_results, run_experiment, CliError, RunConfig, RunOptions};

#[derive(Parser)]
#[command(
    name = "langevin",
    version,
    about = "Run Langevin sampler experiments from a TOML config"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the ensembles described by a config file.
    Run {
        config: PathBuf,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: the config's output.dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the full-scale step and chain counts from `sampler.paper_scale`.
        #[arg(long)]
        paper_scale: bool,
        /// Write every chain's states to <out>/states/.
        #[arg(long)]
        dump_states: bool,
        /// Worker threads (default: one per core).
        #[arg(long)]
        threads: Option<usize>,
    },
}

/// Runs a parsed command and returns the lines to print.
fn execute(command: Command) -> Result<Vec<String>, CliError> {
    let Command::Run {
        config,
        seed,
        out,
        paper_scale,
        dump_states,
        threads,
    } = command;
    let cfg = RunConfig::load(&config)?;
    let out = out.unwrap_or_else(|| PathBuf::from(&cfg.output.dir));
    let opts = RunOptions {
        seed,
        paper_scale,
        threads,
        dump_states: dump_states.then(|| out.join("states")),
        base_dir: config.parent().map(PathBuf::from).unwrap_or_default(),
    };
    let bundle = run_experiment(&cfg, &opts)?;
    let mut lines = Vec::new();
    for k in &bundle.kinds {
        for o in &k.observables {
            lines.push(format!(
                "{:<6} {:<5} E[AVar] = {:<12.6} Std[AVar] = {:<12.6} aborted = {}",
                k.kind, o.name, o.avar_mean, o.avar_std, k.chains_aborted
            ));
        }
        if let Some(ksd) = &k.ksd {
            lines.push(format!("{:<6} KSD slope = {:.3}", k.kind, ksd.slope));
        }
    }
    for f in emit_results(&bundle, &out)? {
        lines.push(format!("wrote {}", f.display()));
    }
    Ok(lines)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(lines) => {
            for l in lines {
                println!("{l}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
