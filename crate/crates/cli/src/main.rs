//! `nlft-lab`: batch experiments for the non-linear Fourier transform.
//!
//! Exit status is 0 when every check passes, 1 when a check fails or a
//! computation errors out, and 2 for configuration errors.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{CommandKind, Overrides};

#[derive(Parser, Debug)]
#[command(name = "nlft-lab", version, about = "Non-linear Fourier transform experiments and identity checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Determinant, Wronskian, unimodularity and propagator invariants
    Verify,
    /// a, b and f_T† over an s grid, plus the linearization slope
    Nlft,
    /// Non-linear Parseval identity with the log|a| profile
    Parseval,
    /// Reproducing-kernel proximity sweep over T
    Kernels,
    /// Zero location, grid oracle, tracking and the phase-speed detector
    Zeros,
    /// Convergence scan, log a identity and the equivalence surface
    Converge,
    /// Closed-form checks of the free case
    Freecase,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Verify => CommandKind::Verify,
            Command::Nlft => CommandKind::Nlft,
            Command::Parseval => CommandKind::Parseval,
            Command::Kernels => CommandKind::Kernels,
            Command::Zeros => CommandKind::Zeros,
            Command::Converge => CommandKind::Converge,
            Command::Freecase => CommandKind::Freecase,
        }
    }
}

#[derive(Args, Debug)]
struct CommonArgs {
    /// TOML experiment file
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Potential spec, e.g. `constant:q=1,T=1` or `piecewise:breaks=0/1/2,values=1/-1`
    #[arg(long, global = true, value_name = "SPEC", allow_hyphen_values = true)]
    potential: Option<String>,
    /// Named preset: free, powerdecay, gaussian, oscillating
    #[arg(long, global = true, value_name = "NAME")]
    preset: Option<String>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    t: Option<f64>,
    #[arg(long, global = true, allow_negative_numbers = true)]
    s: Option<f64>,
    /// Box constant C
    #[arg(long, global = true)]
    c: Option<f64>,
    /// Search rectangle `x0,x1,y0,y1`
    #[arg(long, global = true, value_name = "X0,X1,Y0,Y1", allow_hyphen_values = true)]
    rect: Option<String>,
    /// `[NAME=][log:]start:stop:count`; without NAME the command's main grid
    #[arg(long, global = true, value_name = "GRID", allow_hyphen_values = true)]
    grid: Vec<String>,
    /// Parameter override `key=value`
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", allow_hyphen_values = true)]
    sets: Vec<String>,
    /// Worker threads
    #[arg(long, global = true, env = "NLFT_LAB_THREADS")]
    threads: Option<usize>,
    /// Output directory
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let a = cli.common;
    let overrides = Overrides {
        config: a.config,
        potential: a.potential,
        preset: a.preset,
        t: a.t,
        s: a.s,
        c: a.c,
        rect: a.rect,
        grids: a.grid,
        sets: a.sets,
        threads: a.threads,
        out: a.out,
        seed: a.seed,
    };
    let kind = CommandKind::from(cli.command);
    let cfg = match config::resolve(kind, &overrides) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(n) = cfg.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} worker threads: {e}");
            return ExitCode::from(1);
        }
    }
    let mut reports = match commands::run(&cfg) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = output::apply_tolerances(&mut reports, &cfg.tolerances) {
        eprintln!("config error: {e}");
        return ExitCode::from(2);
    }
    if let Err(e) = output::write_artifacts(&cfg.output_dir, &cfg, &reports) {
        eprintln!("error: writing artifacts to {}: {e}", cfg.output_dir.display());
        return ExitCode::from(1);
    }
    print!("{}", output::render(&reports));
    let pass = reports.iter().all(|r| r.all_pass());
    println!(
        "{} {}: {}",
        if pass { "PASS" } else { "FAIL" },
        kind.name(),
        cfg.output_dir.join("summary.json").display()
    );
    if pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
