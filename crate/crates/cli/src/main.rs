use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};
use vortexlab::commands::{execute, Command};
use vortexlab::config::RunConfig;
use vortexlab::Error;

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Cmd {
    Fields,
    Simulate,
    Law,
    Compare,
    Critical,
    Convergence,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Fields => Command::Fields,
            Cmd::Simulate => Command::Simulate,
            Cmd::Law => Command::Law,
            Cmd::Compare => Command::Compare,
            Cmd::Critical => Command::Critical,
            Cmd::Convergence => Command::Convergence,
        }
    }
}

/// Ginzburg-Landau vortex dynamics under pinning and applied current.
#[derive(Debug, Parser)]
#[command(name = "vortexlab", version)]
struct Args {
    command: Cmd,
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = "VORTEXLAB_THREADS")]
    threads: Option<usize>,
}

fn error_json(e: &Error) -> String {
    let mut v = serde_json::json!({"error": e.name(), "message": e.to_string()});
    if let Error::ConfigError { field, .. } = e {
        v["field"] = field.clone().into();
    }
    v.to_string()
}

fn run(args: &Args) -> Result<bool, Error> {
    if let Some(n) = args.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    let config = RunConfig::load(&args.config)?;
    let outcome = execute(args.command.into(), &config, args.out.as_deref())?;
    let summary = serde_json::json!({
        "command": outcome.command,
        "passed": outcome.passed,
        "config_hash": outcome.config_hash,
        "files": outcome.files,
    });
    println!("{summary}");
    Ok(outcome.passed)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", error_json(&e));
            ExitCode::from(2)
        }
    }
}
