//! `kinetic`: stability tables, Vlasov-Poisson and drift-kinetic runs, and
//! the named reproduction targets.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod output;
mod reproduce;
mod runs;
mod stab;

use std::process::ExitCode;

use clap::{Parser, Subcommand};
use kinetic_core::{Error, Result};

#[derive(Debug, Parser)]
#[command(
    name = "kinetic",
    version,
    about = "Lawson / exponential RK kinetic solvers"
)]
struct Cli {
    /// Worker threads (0 = all cores).
    #[arg(long, global = true, env = "KINETIC_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Linear stability analysis.
    #[command(subcommand)]
    Stab(stab::StabCmd),
    /// Vlasov-Poisson runs.
    #[command(subcommand)]
    Vp(VpCmd),
    /// Drift-kinetic runs.
    #[command(subcommand)]
    Dk(DkCmd),
    /// Regenerates the data of a named table or figure.
    Reproduce(reproduce::ReproduceArgs),
    /// Prints a Butcher tableau.
    Tableau { key: String },
}

#[derive(Debug, Subcommand)]
enum VpCmd {
    Run(runs::VpRunArgs),
}

#[derive(Debug, Subcommand)]
enum DkCmd {
    Run(runs::DkRunArgs),
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::InvalidTableau(_)
        | Error::UnknownMethod(_)
        | Error::UnsupportedMethod { .. }
        | Error::ShapeMismatch { .. }
        | Error::InvalidParameter(_)
        | Error::ConfigParse { .. } => 2,
        Error::RayMiss { .. }
        | Error::SingularMode { .. }
        | Error::RejectionCap(_)
        | Error::BlowUp { .. } => 3,
        Error::Io(_) => 1,
    }
}

fn dispatch(cmd: Cmd) -> Result<()> {
    match cmd {
        Cmd::Stab(c) => stab::run(c),
        Cmd::Vp(VpCmd::Run(a)) => runs::vp_run(a),
        Cmd::Dk(DkCmd::Run(a)) => runs::dk_run(a),
        Cmd::Reproduce(a) => reproduce::run(a),
        Cmd::Tableau { key } => {
            print!("{}", stab::tableau_id(&key)?.tableau().dump());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    match dispatch(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
