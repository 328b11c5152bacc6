//! `mixedsolve`: run the mixed-problem solver from a JSON configuration.
//!
//! Exit status: 0 when every check passes, 1 on a failed check or a
//! numerical failure, 2 on a configuration error.

mod commands;
mod output;
mod run_config;

use clap::Parser;
use mixedsolve_core::exec;
use output::{sha256_hex, Output};
use run_config::{Command, RunConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser, Debug)]
#[command(name = "mixedsolve", version, about = "Solve and verify the mixed parabolic-hyperbolic problem")]
struct Cli {
    #[arg(value_enum)]
    command: Command,
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides output_dir from the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Refinement ladder for verify/converge, e.g. 64,128,256.
    #[arg(long, value_delimiter = ',')]
    grids: Option<Vec<usize>>,
    /// Single spectral parameter as re,im.
    #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
    lambda: Option<Vec<f64>>,
}

fn config_error(msg: impl std::fmt::Display) -> ExitCode {
    eprintln!("config error: {msg}");
    ExitCode::from(2)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    exec::init_threads_from_env();

    let text = match std::fs::read_to_string(&cli.config) {
        Ok(t) => t,
        Err(e) => return config_error(format!("{}: {e}", cli.config.display())),
    };
    let cfg = match RunConfig::parse(&text) {
        Ok(c) => c,
        Err(e) => return config_error(format!("{}: {e}", cli.config.display())),
    };
    if let Some(c) = cfg.command {
        if c != cli.command {
            return config_error(format!("config is for '{}' but '{}' was requested", c.name(), cli.command.name()));
        }
    }
    let lambdas = match &cli.lambda {
        Some(v) if v.len() == 2 => vec![[v[0], v[1]]],
        Some(v) => return config_error(format!("--lambda takes re,im; got {} values", v.len())),
        None => cfg.spectral.lambdas.clone(),
    };
    let grids = cli.grids.clone().unwrap_or_else(|| cfg.verify.grids.clone());
    if matches!(cli.command, Command::Verify | Command::Converge) && grids.len() < 3 {
        return config_error(format!("a convergence study needs at least 3 grids, got {grids:?}"));
    }
    let spec = match cfg.problem.build() {
        Ok(s) => s,
        Err(e) => return config_error(format!("problem: {e}")),
    };

    let dir = cli.out.clone().unwrap_or_else(|| cfg.output_dir.clone());
    let mut out = match Output::create(&dir) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("cannot create {}: {e}", dir.display());
            return ExitCode::from(1);
        }
    };
    let result = match cli.command {
        Command::Solve => commands::solve(&spec, &mut out),
        Command::Verify => commands::verify(&cfg, &spec, &grids, &mut out),
        Command::Converge => commands::converge(&cfg, &spec, &grids, &mut out),
        Command::Analyze => commands::analyze(&cfg, &spec, &mut out),
        Command::Spectral => commands::spectral(&cfg, &spec, &lambdas, &mut out),
    };
    let err = result.err().map(|e| e.to_string());
    let sha = sha256_hex(text.as_bytes());
    if let Err(e) = out.finish(cli.command.name(), &sha, cfg.seed, err.as_deref()) {
        eprintln!("cannot write manifest: {e}");
        return ExitCode::from(1);
    }
    for c in &out.checks {
        println!("{} {}: {}", if c.passed { "ok  " } else { "FAIL" }, c.name, c.detail);
    }
    if let Some(e) = err {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let failed = out.failed();
    if !failed.is_empty() {
        let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
        eprintln!("failed checks: {}", names.join(", "));
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
