//! `identities check`: scalar momentum identities, kernel oracle and
//! finite-difference derivatives.

use clap::{Parser, Subcommand};
use ssf_core::cli::{finish_suite, run_main, VerifyArgs};
use ssf_core::harness::identities_check;

#[derive(Parser)]
#[command(name = "identities", version, about = "Scalar identity and divided-difference checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Momentum identities, Peano-kernel oracle and derivative finite differences.
    Check(VerifyArgs),
}

fn main() {
    let Cmd::Check(args) = Cli::parse().cmd;
    run_main(|| {
        args.common.init_threads()?;
        let cfg = args.config()?;
        finish_suite(&args.common, &identities_check(&cfg)?)
    })
}
