//! `moi check`: operator-integral algebra and grid discretisation.

use clap::{Parser, Subcommand};
use ssf_core::cli::{finish_suite, run_main, VerifyArgs};
use ssf_core::harness::moi_check;

#[derive(Parser)]
#[command(name = "moi", version, about = "Multiple operator integral checks")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Adjoint, duality, product and composition properties plus grid convergence.
    Check(VerifyArgs),
}

fn main() {
    let Cmd::Check(args) = Cli::parse().cmd;
    run_main(|| {
        args.common.init_threads()?;
        let cfg = args.config()?;
        finish_suite(&args.common, &moi_check(&cfg)?)
    })
}
