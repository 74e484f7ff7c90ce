//! `ssf compute | verify | gen`

use std::path::PathBuf;

use clap::{Parser, Subcommand};
use ssf_core::cli::{finish_suite, run_main, sibling, CommonArgs, VerifyArgs, EXIT_BREACH, EXIT_OK};
use ssf_core::harness::{emit_curves, generate_instance, run_compute, ssf_verify, GridSpec, ProblemInstance};

#[derive(Parser)]
#[command(name = "ssf", version, about = "Higher-order spectral shift functions of Hermitian matrix pairs")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Compute η_n for one instance and check its trace formula.
    Compute {
        /// Instance JSON file, or inline JSON.
        #[arg(long)]
        input: String,
        /// Override the instance order.
        #[arg(long = "n")]
        n: Option<usize>,
        /// Sample η_n on START:END:COUNT (plus breakpoints) as CSV.
        #[arg(long, allow_hyphen_values = true)]
        samples: Option<String>,
        /// Include wall-clock timings (output is then not reproducible).
        #[arg(long)]
        timing: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Run the trace-formula, moment, closed-form, remainder, homogeneity and continuity suites.
    Verify(VerifyArgs),
    /// Write a seeded random instance.
    Gen {
        #[arg(long, default_value_t = 3)]
        dim: usize,
        #[arg(long, default_value_t = 1.0)]
        spread: f64,
        /// Target Schatten-n norm of V.
        #[arg(long, default_value_t = 0.5)]
        budget: f64,
        #[arg(long = "n", default_value_t = 2)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    run_main(|| match cli.cmd {
        Cmd::Compute {
            input,
            n,
            samples,
            timing,
            common,
        } => {
            common.init_threads()?;
            let mut inst = ProblemInstance::load(&input)?;
            if let Some(n) = n {
                inst.n = n;
            }
            inst.tolerances = common.tolerances(inst.tolerances)?;
            inst.validate()?;
            let grid: Option<GridSpec> = samples.as_deref().map(str::parse).transpose()?;
            let record = run_compute(&inst, timing)?;
            let mut text = serde_json::to_string_pretty(&record).expect("record serializes");
            text.push('\n');
            match (&grid, &common.out) {
                (Some(g), None) => common.write(&emit_curves(&record.eta, g))?,
                (Some(g), Some(out)) => {
                    common.write(&text)?;
                    std::fs::write(sibling(out, "curves"), emit_curves(&record.eta, g))?;
                }
                (None, _) => common.write(&text)?,
            }
            if !record.all_pass {
                let failed: Vec<_> = record
                    .trace_formula
                    .iter()
                    .filter(|t| !t.pass)
                    .map(|t| serde_json::json!({ "residual": t.residual, "tolerance": t.tolerance }))
                    .collect();
                eprintln!(
                    "{}",
                    serde_json::json!({ "breach": { "integral": record.integral, "traceFormula": failed } })
                );
                return Ok(EXIT_BREACH);
            }
            Ok(EXIT_OK)
        }
        Cmd::Verify(args) => {
            args.common.init_threads()?;
            let cfg = args.config()?;
            finish_suite(&args.common, &ssf_verify(&cfg)?)
        }
        Cmd::Gen {
            dim,
            spread,
            budget,
            n,
            seed,
            out,
        } => {
            let inst = generate_instance(dim, spread, budget, n, seed)?;
            let mut text = inst.to_json();
            text.push('\n');
            match out {
                Some(p) => std::fs::write(p, text)?,
                None => print!("{text}"),
            }
            Ok(EXIT_OK)
        }
    })
}
