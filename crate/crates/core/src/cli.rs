//! Plumbing shared by the `ssf`, `moi` and `identities` binaries: exit
//! codes, the stderr error document, thread and tolerance setup.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::{json, Value};

use crate::error::SsfError;
use crate::harness::{SuiteReport, Tolerances, VerifyConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_BREACH: i32 = 3;

/// Flags every subcommand accepts.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Worker threads (default: all cores).
    #[arg(long, env = "SSF_THREADS")]
    pub threads: Option<usize>,
    /// JSON file overriding individual tolerances.
    #[arg(long = "tol-file", env = "SSF_TOL_FILE")]
    pub tol_file: Option<PathBuf>,
    /// Output path; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Flags of the verification subcommands.
#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Highest order exercised.
    #[arg(long = "n")]
    pub n: Option<usize>,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// Machine-readable error written to stderr.
pub fn error_document(e: &SsfError) -> Value {
    let mut doc = json!({ "kind": e.kind(), "message": e.to_string() });
    match e {
        SsfError::Parse { line, column, .. } => {
            doc["line"] = json!(line);
            doc["column"] = json!(column);
        }
        SsfError::NotHermitianInput { matrix, row, col, .. } => {
            doc["matrix"] = json!(matrix);
            doc["row"] = json!(row);
            doc["col"] = json!(col);
        }
        SsfError::NotHermitian { row, col, .. } => {
            doc["row"] = json!(row);
            doc["col"] = json!(col);
        }
        _ => {}
    }
    json!({ "error": doc })
}

/// Consistency failures count as a breach, everything else as bad input.
pub fn exit_code_for(e: &SsfError) -> i32 {
    match e {
        SsfError::Consistency(_) => EXIT_BREACH,
        _ => EXIT_INPUT,
    }
}

pub fn report_error(e: &SsfError) -> i32 {
    eprintln!("{}", error_document(e));
    exit_code_for(e)
}

impl CommonArgs {
    pub fn init_threads(&self) -> Result<(), SsfError> {
        if let Some(t) = self.threads {
            if t == 0 {
                return Err(SsfError::Validation("--threads must be >= 1".into()));
            }
            rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build_global()
                .map_err(|e| SsfError::InvalidArgument(e.to_string()))?;
        }
        Ok(())
    }

    /// `base` overridden field by field by the tolerance file, if any.
    pub fn tolerances(&self, base: Tolerances) -> Result<Tolerances, SsfError> {
        let Some(path) = &self.tol_file else {
            return Ok(base);
        };
        let text = std::fs::read_to_string(path)?;
        let overrides: serde_json::Map<String, Value> = serde_json::from_str(&text).map_err(|e| SsfError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        let mut merged = serde_json::to_value(base).expect("tolerances serialize");
        for (k, v) in overrides {
            merged[k] = v;
        }
        Tolerances::from_json(&merged.to_string())
    }

    pub fn write(&self, text: &str) -> Result<(), SsfError> {
        match &self.out {
            Some(p) => std::fs::write(p, text)?,
            None => std::io::stdout().write_all(text.as_bytes())?,
        }
        Ok(())
    }
}

/// `out.json` → `out.<suffix>.csv`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("out");
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

impl VerifyArgs {
    pub fn config(&self) -> Result<VerifyConfig, SsfError> {
        let mut cfg = VerifyConfig::default();
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(n) = self.n {
            if n == 0 {
                return Err(SsfError::Validation("--n must be >= 1".into()));
            }
            cfg.max_order = n;
        }
        cfg.tolerances = self.common.tolerances(cfg.tolerances)?;
        Ok(cfg)
    }
}

/// Writes the report (and its CSV tables next to `--out`) and returns the
/// exit code.
pub fn finish_suite(args: &CommonArgs, report: &SuiteReport) -> Result<i32, SsfError> {
    let mut text = serde_json::to_string_pretty(report).expect("report serializes");
    text.push('\n');
    args.write(&text)?;
    if let Some(out) = &args.out {
        for (name, csv) in &report.tables {
            std::fs::write(sibling(out, name), csv)?;
        }
    }
    for p in &report.properties {
        eprintln!(
            "{} {:<28} worst={:.3e} tol={:.1e} n={}",
            if p.pass { "PASS" } else { "FAIL" },
            p.name,
            p.worst,
            p.tolerance,
            p.samples
        );
    }
    Ok(if report.pass { EXIT_OK } else { EXIT_BREACH })
}

/// Runs `body`, mapping errors to the stderr document and exit code.
pub fn run_main(body: impl FnOnce() -> Result<i32, SsfError>) -> ! {
    let code = match body() {
        Ok(c) => c,
        Err(e) => report_error(&e),
    };
    std::process::exit(code)
}
