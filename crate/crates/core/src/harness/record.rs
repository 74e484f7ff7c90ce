//! `ssf compute`: one instance in, one result record out.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};
use crate::functions::{factorial, SmoothTestFunction};
use crate::harness::instance::ProblemInstance;
use crate::spectral::trace;
use crate::ssf::{eta_n, norm_report, trace_formula_with, SpectralShiftFunction};
use crate::taylor::PerturbationLine;

pub const LIBRARY_VERSION: &str = env!("CARGO_PKG_VERSION");

/// A value together with the threshold it was compared to.  `tolerance`
/// and `pass` are absent for purely reported quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Checked {
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub expected: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

impl Checked {
    pub fn reported(value: f64) -> Self {
        Self {
            value,
            expected: None,
            residual: None,
            tolerance: None,
            pass: None,
        }
    }

    /// Passes when `|value - expected| < tol · (1 + |expected|)`.
    pub fn against(value: f64, expected: f64, tol: f64) -> Self {
        let residual = (value - expected).abs();
        Self {
            value,
            expected: Some(expected),
            residual: Some(residual),
            tolerance: Some(tol),
            pass: Some(residual < tol * (1.0 + expected.abs())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TraceFormulaRecord {
    pub function: SmoothTestFunction,
    /// `[re, im]` of `τ(Δ_{n,f})`.
    pub lhs: [f64; 2],
    /// `[re, im]` of `∫ f^{(n)} η_n`.
    pub rhs: [f64; 2],
    pub residual: f64,
    /// Threshold relative to `1 + |lhs|`.
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Timing {
    pub eta_ms: f64,
    pub trace_formula_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResultRecord {
    pub instance_id: String,
    pub library_version: String,
    pub seed: Option<u64>,
    pub dim: usize,
    pub n: usize,
    pub eta: SpectralShiftFunction,
    /// `∫ η_n` against `τ(V^n) / n!`.
    pub integral: Checked,
    pub l1_norm: Checked,
    pub schatten_pow: Checked,
    /// `‖η_n‖_1 / ‖V‖_n^n`, absent when `V = 0`.
    pub l1_ratio: Option<Checked>,
    pub trace_formula: Vec<TraceFormulaRecord>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timing: Option<Timing>,
    pub all_pass: bool,
}

/// Computes `η_n`, its moment, norms and the trace formula for every
/// function in the instance.  `with_timing` adds wall-clock timings, which
/// makes the output non-reproducible.
pub fn run_compute(inst: &ProblemInstance, with_timing: bool) -> Result<ResultRecord> {
    inst.validate()?;
    let tol = inst.tolerances;
    let n = inst.n;
    let start = Instant::now();
    let eta = eta_n(&inst.h, &inst.v, n)?;
    let eta_ms = start.elapsed().as_secs_f64() * 1e3;

    let expected = trace(&inst.v.matrix().pow(n as u32)).re / factorial(n);
    let integral = Checked::against(eta.integral(), expected, tol.moment);
    let norms = norm_report(&eta, &inst.v)?;

    let start = Instant::now();
    let line = PerturbationLine::new(inst.h.clone(), inst.v.clone())?;
    let trace_formula = inst
        .functions
        .iter()
        .map(|f| {
            if (f.max_derivative_order as usize) < n {
                return Err(SsfError::Validation(format!("function {f:?} is not differentiable to order {n}")));
            }
            let c = trace_formula_with(&line, &eta, f)?;
            Ok(TraceFormulaRecord {
                function: f.clone(),
                lhs: [c.lhs.re, c.lhs.im],
                rhs: [c.rhs.re, c.rhs.im],
                residual: c.residual,
                tolerance: tol.trace_formula,
                pass: c.residual < tol.trace_formula * (1.0 + c.lhs.norm()),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tf_ms = start.elapsed().as_secs_f64() * 1e3;

    let all_pass = integral.pass == Some(true) && trace_formula.iter().all(|t| t.pass);
    Ok(ResultRecord {
        instance_id: inst.id.clone(),
        library_version: LIBRARY_VERSION.to_string(),
        seed: inst.seed,
        dim: inst.dim(),
        n,
        eta,
        integral,
        l1_norm: Checked::reported(norms.l1_norm),
        schatten_pow: Checked::reported(norms.schatten_pow),
        l1_ratio: norms.ratio.map(Checked::reported),
        trace_formula,
        timing: with_timing.then_some(Timing {
            eta_ms,
            trace_formula_ms: tf_ms,
        }),
        all_pass,
    })
}

/// `a:b:count` sampling grid; `count = 0` (or an empty spec) means
/// breakpoints only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub start: f64,
    pub end: f64,
    pub count: usize,
}

impl std::str::FromStr for GridSpec {
    type Err = SsfError;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(Self {
                start: 0.0,
                end: 0.0,
                count: 0,
            });
        }
        let parts: Vec<&str> = s.split(':').collect();
        let bad = || SsfError::Validation(format!("grid spec {s:?} must look like START:END:COUNT"));
        if parts.len() != 3 {
            return Err(bad());
        }
        let start: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let end: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if !(start.is_finite() && end.is_finite()) || (count > 0 && end < start) {
            return Err(bad());
        }
        Ok(Self { start, end, count })
    }
}

impl GridSpec {
    pub fn points(&self) -> Vec<f64> {
        match self.count {
            0 => Vec::new(),
            1 => vec![self.start],
            k => (0..k)
                .map(|i| self.start + (self.end - self.start) * i as f64 / (k - 1) as f64)
                .collect(),
        }
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn fmt_f64(x: f64) -> String {
    let s = format!("{x:?}");
    s.strip_suffix(".0").map(str::to_string).unwrap_or(s)
}

/// CSV with columns `t,eta,cumulative`, sampled on the grid plus every
/// breakpoint.  Values are left limits; a jump gets a second row with the
/// right limit.
pub fn emit_curves(eta: &SpectralShiftFunction, grid: &GridSpec) -> String {
    let (cum, _) = if eta.eta.breakpoints().len() >= 2 {
        eta.eta.cumulative()
    } else {
        (eta.eta.clone(), 0.0)
    };
    let total = eta.integral();
    let cumulative = |t: f64| -> f64 {
        match eta.eta.support() {
            Some((_, b)) if t > b => total,
            _ => cum.eval(t),
        }
    };
    let mut ts = grid.points();
    ts.extend_from_slice(eta.eta.breakpoints());
    ts.sort_by(f64::total_cmp);
    ts.dedup();
    let mut out = String::from("t,eta,cumulative\n");
    for t in ts {
        let c = cumulative(t);
        out.push_str(&format!("{},{},{}\n", fmt_f64(t), fmt_f64(eta.eval(t)), fmt_f64(c)));
        if eta.jumps.iter().any(|j| j.0 == t) {
            out.push_str(&format!("{},{},{}\n", fmt_f64(t), fmt_f64(eta.eval_right(t)), fmt_f64(c)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::HermitianOperator;

    fn scalar(v: f64, n: usize, functions: Vec<SmoothTestFunction>) -> ProblemInstance {
        ProblemInstance::new(HermitianOperator::diagonal(&[0.0]), HermitianOperator::diagonal(&[v]), n, functions).unwrap()
    }

    #[test]
    fn scalar_krein_record() {
        let inst = scalar(2.0, 1, vec![SmoothTestFunction::polynomial(vec![0.0, 0.0, 1.0])]);
        let r = run_compute(&inst, false).unwrap();
        assert!(r.all_pass);
        assert_eq!(r.eta.eval(1.0), 1.0);
        assert_eq!(r.eta.eval_right(2.0), 0.0);
        assert!((r.integral.value - 2.0).abs() < 1e-15);
        assert!(r.trace_formula[0].residual <= 1e-12);
        assert!((r.trace_formula[0].lhs[0] - 4.0).abs() < 1e-12);
        assert!(r.timing.is_none());
    }

    #[test]
    fn zero_tolerance_fails() {
        let mut inst = scalar(2.0, 1, vec![SmoothTestFunction::gaussian(0.0, 1.0)]);
        inst.tolerances.trace_formula = 0.0;
        assert!(!run_compute(&inst, false).unwrap().all_pass);
    }

    #[test]
    fn curves() {
        let inst = scalar(1.0, 2, vec![]);
        let r = run_compute(&inst, false).unwrap();
        let csv = emit_curves(&r.eta, &"-0.5:1.5:9".parse().unwrap());
        let rows: Vec<Vec<f64>> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').map(|x| x.parse().unwrap()).collect())
            .collect();
        // 9 grid points, both breakpoints are already on the grid, one jump at 0
        assert_eq!(rows.len(), 10);
        for r in &rows {
            let t = r[0];
            if t > 0.0 && t <= 1.0 {
                assert!((r[1] - (1.0 - t)).abs() < 1e-15);
            } else if !(0.0..=1.0).contains(&t) {
                assert_eq!(r[1], 0.0);
            }
        }
        assert_eq!(rows.iter().filter(|r| r[0] == 0.0).count(), 2);
        assert_eq!(rows.last().unwrap()[2], 0.5);

        let only = emit_curves(&r.eta, &"".parse().unwrap());
        assert_eq!(only.lines().count(), 1 + 3);

        let step = run_compute(&scalar(2.0, 1, vec![]), false).unwrap();
        let csv = emit_curves(&step.eta, &GridSpec { start: 0.0, end: 0.0, count: 0 });
        assert_eq!(csv, "t,eta,cumulative\n0,0,0\n0,1,0\n2,1,2\n2,0,2\n");
    }

    #[test]
    fn grid_spec_parsing() {
        assert!("1:0:3".parse::<GridSpec>().is_err());
        assert!("a:b".parse::<GridSpec>().is_err());
        assert_eq!("0:1:3".parse::<GridSpec>().unwrap().points(), vec![0.0, 0.5, 1.0]);
        assert_eq!(fmt_f64(1e-20), "1e-20");
        assert_eq!(fmt_f64(0.1), "0.1");
    }
}
