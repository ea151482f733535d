use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use landau_cli::commands::{EXIT_CONFIG, EXIT_OK};
use landau_cli::{cmd_compare, cmd_diagnose, cmd_run, cmd_verify, parse_config, Outcome, RunConfig};
use landau_verify::criteria::Suite;

#[derive(Parser)]
#[command(name = "landau", version, about = "Landau equation solver and estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver; writes snapshots, diagnostics.csv and summary.json.
    Run { config: PathBuf },
    /// Print diagnostics rows for stored snapshots.
    Diagnose {
        config: PathBuf,
        #[arg(required = true)]
        snapshots: Vec<PathBuf>,
    },
    /// Run a verification suite; writes verify.json.
    Verify {
        config: PathBuf,
        #[arg(long)]
        suite: Option<Suite>,
    },
    /// Contraction functional between two run directories.
    Compare { dir_a: PathBuf, dir_b: PathBuf, config: PathBuf },
}

fn load(path: &Path) -> Result<RunConfig, Outcome> {
    let text = std::fs::read_to_string(path).map_err(|e| Outcome {
        code: EXIT_CONFIG,
        message: format!("{}: {e}", path.display()),
    })?;
    let mut cfg = parse_config(&text).map_err(|e| Outcome {
        code: EXIT_CONFIG,
        message: format!("{}:\n{e}", path.display()),
    })?;
    let env = |k: &str| std::env::var(k).ok();
    cfg.apply_env(env("LANDAU_SEED").as_deref(), env("LANDAU_THREADS").as_deref())
        .map_err(|e| Outcome {
            code: EXIT_CONFIG,
            message: e.to_string(),
        })?;
    if cfg.threads > 0 {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    Ok(cfg)
}

fn dispatch(cmd: Command) -> Outcome {
    let with = |path: &Path, f: &dyn Fn(&RunConfig) -> Outcome| match load(path) {
        Ok(cfg) => f(&cfg),
        Err(o) => o,
    };
    match cmd {
        Command::Run { config } => with(&config, &cmd_run),
        Command::Diagnose { config, snapshots } => with(&config, &|c| cmd_diagnose(c, &snapshots)),
        Command::Verify { config, suite } => with(&config, &|c| cmd_verify(c, suite)),
        Command::Compare { dir_a, dir_b, config } => with(&config, &|c| cmd_compare(&dir_a, &dir_b, c)),
    }
}

fn main() -> ExitCode {
    let outcome = dispatch(Cli::parse().command);
    if outcome.code == EXIT_OK {
        println!("{}", outcome.message);
    } else {
        eprintln!("{}", outcome.message);
    }
    ExitCode::from(outcome.code as u8)
}
