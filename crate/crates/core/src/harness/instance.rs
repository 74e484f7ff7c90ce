//! Problem instances: JSON interchange, validation and seeded generation.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};
use crate::functions::SmoothTestFunction;
use crate::spectral::{schatten_norm, CMatrix, HermitianOperator};

/// Residual thresholds.  Checks pass when `residual < tol · scale`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct Tolerances {
    pub trace_formula: f64,
    pub moment: f64,
    pub closed_form: f64,
    pub derivative: f64,
    pub remainder: f64,
    pub algebra: f64,
    pub scalar_identity: f64,
    pub kernel: f64,
    pub homogeneity: f64,
    pub continuity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            trace_formula: 1e-8,
            moment: 1e-9,
            closed_form: 1e-12,
            derivative: 1e-5,
            remainder: 1e-8,
            algebra: 1e-10,
            scalar_identity: 1e-7,
            kernel: 1e-8,
            homogeneity: 1e-6,
            continuity: 1e-6,
        }
    }
}

impl Tolerances {
    fn values(&self) -> [(&'static str, f64); 10] {
        [
            ("traceFormula", self.trace_formula),
            ("moment", self.moment),
            ("closedForm", self.closed_form),
            ("derivative", self.derivative),
            ("remainder", self.remainder),
            ("algebra", self.algebra),
            ("scalarIdentity", self.scalar_identity),
            ("kernel", self.kernel),
            ("homogeneity", self.homogeneity),
            ("continuity", self.continuity),
        ]
    }

    /// Zero is accepted so that a run can be forced to fail.
    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.values() {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SsfError::Validation(format!("tolerance {name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Tolerances = serde_json::from_str(text).map_err(parse_error)?;
        t.validate()?;
        Ok(t)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Row-major real and imaginary planes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixPlanes {
    pub re: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub im: Option<Vec<Vec<f64>>>,
}

impl MatrixPlanes {
    pub fn from_matrix(m: &CMatrix) -> Self {
        let rows = |part: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| part(&m[(i, j)])).collect()).collect()
        };
        let has_im = m.iter().any(|z| z.im != 0.0);
        Self {
            re: rows(|z| z.re),
            im: has_im.then(|| rows(|z| z.im)),
        }
    }

    fn to_matrix(&self, name: &str, dim: usize) -> Result<CMatrix> {
        let check = |plane: &[Vec<f64>], part: &str| -> Result<()> {
            if plane.len() != dim {
                return Err(SsfError::Validation(format!("{name}.{part} has {} rows, expected dim = {dim}", plane.len())));
            }
            for (i, row) in plane.iter().enumerate() {
                if row.len() != dim {
                    return Err(SsfError::Validation(format!(
                        "{name}.{part} row {i} has {} entries, expected dim = {dim}",
                        row.len()
                    )));
                }
            }
            Ok(())
        };
        check(&self.re, "re")?;
        if let Some(im) = &self.im {
            check(im, "im")?;
        }
        Ok(DMatrix::from_fn(dim, dim, |i, j| {
            Complex64::new(self.re[i][j], self.im.as_ref().map_or(0.0, |im| im[i][j]))
        }))
    }
}

/// The on-disk form of an instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    id: Option<String>,
    dim: usize,
    #[serde(rename = "H")]
    h: MatrixPlanes,
    #[serde(rename = "V")]
    v: MatrixPlanes,
    n: usize,
    #[serde(default)]
    functions: Vec<SmoothTestFunction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub id: String,
    pub h: HermitianOperator,
    pub v: HermitianOperator,
    pub n: usize,
    pub functions: Vec<SmoothTestFunction>,
    pub tolerances: Tolerances,
    pub seed: Option<u64>,
}

fn parse_error(e: serde_json::Error) -> SsfError {
    SsfError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    }
}

fn hermitian(name: &str, m: CMatrix) -> Result<HermitianOperator> {
    HermitianOperator::new(m).map_err(|e| match e {
        SsfError::NotHermitian { row, col, deviation } => SsfError::NotHermitianInput {
            matrix: name.to_string(),
            row,
            col,
            deviation,
        },
        other => other,
    })
}

impl ProblemInstance {
    pub fn new(h: HermitianOperator, v: HermitianOperator, n: usize, functions: Vec<SmoothTestFunction>) -> Result<Self> {
        let inst = Self {
            id: "instance".into(),
            h,
            v,
            n,
            functions,
            tolerances: Tolerances::default(),
            seed: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn validate(&self) -> Result<()> {
        if self.h.dim() != self.v.dim() {
            return Err(SsfError::Validation(format!(
                "H is {}x{} but V is {}x{}",
                self.h.dim(),
                self.h.dim(),
                self.v.dim(),
                self.v.dim()
            )));
        }
        if self.n == 0 {
            return Err(SsfError::Validation("order n must be >= 1".into()));
        }
        for (i, f) in self.functions.iter().enumerate() {
            f.validate().map_err(|e| SsfError::Validation(format!("functions[{i}]: {e}")))?;
        }
        self.tolerances.validate()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawInstance = serde_json::from_str(text).map_err(parse_error)?;
        if raw.dim == 0 {
            return Err(SsfError::Validation("dim must be >= 1".into()));
        }
        let inst = Self {
            id: raw.id.unwrap_or_else(|| "instance".into()),
            h: hermitian("H", raw.h.to_matrix("H", raw.dim)?)?,
            v: hermitian("V", raw.v.to_matrix("V", raw.dim)?)?,
            n: raw.n,
            functions: raw.functions,
            tolerances: raw.tolerances.unwrap_or_default(),
            seed: raw.seed,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Reads a file, or treats the argument as inline JSON when it starts
    /// with `{`.
    pub fn load(path_or_text: &str) -> Result<Self> {
        if path_or_text.trim_start().starts_with('{') {
            Self::from_json(path_or_text)
        } else {
            Self::from_json(&std::fs::read_to_string(path_or_text)?)
        }
    }

    pub fn to_json(&self) -> String {
        let raw = RawInstance {
            id: Some(self.id.clone()),
            dim: self.dim(),
            h: MatrixPlanes::from_matrix(self.h.matrix()),
            v: MatrixPlanes::from_matrix(self.v.matrix()),
            n: self.n,
            functions: self.functions.clone(),
            tolerances: Some(self.tolerances),
            seed: self.seed,
        };
        serde_json::to_string_pretty(&raw).expect("instance serializes")
    }
}

/// Gaussians at three scales plus a degree `n + 2` polynomial.
pub fn default_functions(n: usize, spread: f64) -> Vec<SmoothTestFunction> {
    let s = spread.max(0.5);
    let coeffs: Vec<f64> = (0..=n + 2).map(|i| 1.0 / (1.0 + i as f64)).collect();
    vec![
        SmoothTestFunction::gaussian(0.0, s),
        SmoothTestFunction::gaussian(0.3 * s, 0.6 * s),
        SmoothTestFunction::gaussian(-0.5 * s, 1.5 * s),
        SmoothTestFunction::polynomial(coeffs),
    ]
}

fn gaussian_matrix(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
    DMatrix::from_fn(dim, dim, |_, _| {
        Complex64::new(rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal))
    })
}

/// Exactly Hermitian part `(A + A*) / 2`.
fn hermitian_part(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    let mut out = CMatrix::zeros(n, n);
    for i in 0..n {
        out[(i, i)] = Complex64::new(a[(i, i)].re, 0.0);
        for j in i + 1..n {
            let z = (a[(i, j)] + a[(j, i)].conj()) * 0.5;
            out[(i, j)] = z;
            out[(j, i)] = z.conj();
        }
    }
    out
}

/// Seeded instance: eigenvalues of `H` uniform in `±spread` rotated by a
/// Haar-like unitary (QR of a complex Gaussian matrix with phase fix), and
/// a Gaussian Hermitian `V` rescaled to `‖V‖_n = schatten_budget`.
pub fn generate_instance(dim: usize, spread: f64, schatten_budget: f64, n: usize, seed: u64) -> Result<ProblemInstance> {
    if dim == 0 || n == 0 {
        return Err(SsfError::invalid("dim and n must be >= 1"));
    }
    if !(spread >= 0.0 && schatten_budget >= 0.0 && spread.is_finite() && schatten_budget.is_finite()) {
        return Err(SsfError::invalid("spread and budget must be finite and non-negative"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eig: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0) * spread).collect();
    let qr = gaussian_matrix(&mut rng, dim).qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..dim {
        let d = r[(j, j)];
        if d.norm() > 0.0 {
            let phase = d / d.norm();
            for z in q.column_mut(j).iter_mut() {
                *z *= phase;
            }
        }
    }
    let diag = CMatrix::from_fn(dim, dim, |i, j| if i == j { Complex64::new(eig[i], 0.0) } else { Complex64::new(0.0, 0.0) });
    let h = hermitian_part(&(&q * diag * q.adjoint()));

    let g = gaussian_matrix(&mut rng, dim);
    let mut v = hermitian_part(&g);
    let norm = schatten_norm(&v, n as f64)?;
    if schatten_budget == 0.0 || norm == 0.0 {
        v = CMatrix::zeros(dim, dim);
    } else {
        v = hermitian_part(&v.scale(schatten_budget / norm));
    }
    Ok(ProblemInstance {
        id: format!("gen-d{dim}-n{n}-s{seed}"),
        h: HermitianOperator::new(h)?,
        v: HermitianOperator::new(v)?,
        n,
        functions: default_functions(n, spread),
        tolerances: Tolerances::default(),
        seed: Some(seed),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const SCALAR: &str = r#"{"dim":1,"H":{"re":[[0]]},"V":{"re":[[2]]},"n":1,"functions":[{"family":"polynomial","coeffs":[0,0,1]}]}"#;

    #[test]
    fn parses_scalar_instance() {
        let p = ProblemInstance::from_json(SCALAR).unwrap();
        assert_eq!(p.dim(), 1);
        assert_eq!(p.v.matrix()[(0, 0)], Complex64::new(2.0, 0.0));
        assert_eq!(p.functions, vec![SmoothTestFunction::polynomial(vec![0.0, 0.0, 1.0])]);
        assert_eq!(p.tolerances, Tolerances::default());
        assert_eq!(p.seed, None);
    }

    #[test]
    fn reports_violations() {
        let bad = r#"{"dim":2,"H":{"re":[[0,0],[0,1]]},"V":{"re":[[0,1],[2,0]]},"n":1}"#;
        match ProblemInstance::from_json(bad) {
            Err(SsfError::NotHermitianInput { matrix, row: 0, col: 1, .. }) => assert_eq!(matrix, "V"),
            other => panic!("{other:?}"),
        }
        let complex = r#"{"dim":2,"H":{"re":[[0,0],[0,1]]},"V":{"re":[[0,1],[1,0]],"im":[[0,1],[1,0]]},"n":1}"#;
        assert!(matches!(
            ProblemInstance::from_json(complex),
            Err(SsfError::NotHermitianInput { row: 0, col: 1, .. })
        ));
        let shape = r#"{"dim":2,"H":{"re":[[0,0],[0,1]]},"V":{"re":[[0]]},"n":1}"#;
        assert!(matches!(ProblemInstance::from_json(shape), Err(SsfError::Validation(_))));
        match ProblemInstance::from_json("{\"dim\": 1,\n \"H\": [}") {
            Err(SsfError::Parse { line: 2, column, .. }) => assert!(column > 0),
            other => panic!("{other:?}"),
        }
        let zero_n = r#"{"dim":1,"H":{"re":[[0]]},"V":{"re":[[2]]},"n":0}"#;
        assert!(matches!(ProblemInstance::from_json(zero_n), Err(SsfError::Validation(_))));
    }

    #[test]
    fn round_trip_is_field_exact() {
        for seed in 0..5 {
            let inst = generate_instance(1 + seed as usize, 1.3, 0.7, 3, seed).unwrap();
            let back = ProblemInstance::from_json(&inst.to_json()).unwrap();
            assert_eq!(inst, back);
            assert_eq!(inst.to_json(), back.to_json());
        }
        let p = ProblemInstance::from_json(SCALAR).unwrap();
        assert_eq!(ProblemInstance::from_json(&p.to_json()).unwrap(), p);
    }

    #[test]
    fn generation_contract() {
        let a = generate_instance(4, 2.0, 0.5, 2, 42).unwrap();
        let b = generate_instance(4, 2.0, 0.5, 2, 42).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, generate_instance(4, 2.0, 0.5, 2, 43).unwrap());
        assert!((schatten_norm(a.v.matrix(), 2.0).unwrap() - 0.5).abs() < 1e-12);
        let d = a.h.decompose().unwrap();
        assert!(d.eigenvalues().iter().all(|x| x.abs() <= 2.0 + 1e-12));
        let z = generate_instance(3, 1.0, 0.0, 2, 1).unwrap();
        assert!(z.v.matrix().iter().all(|x| *x == Complex64::new(0.0, 0.0)));
        let s = generate_instance(1, 1.0, 0.5, 2, 1).unwrap();
        assert_eq!(s.v.matrix()[(0, 0)].re.abs(), 0.5);
    }

    #[test]
    fn tolerance_files() {
        let t = Tolerances::from_json(r#"{"traceFormula": 0}"#).unwrap();
        assert_eq!(t.trace_formula, 0.0);
        assert_eq!(t.algebra, 1e-10);
        assert!(Tolerances::from_json(r#"{"traceFormula": -1}"#).is_err());
        assert!(Tolerances::from_json(r#"{"bogus": 1}"#).is_err());
    }
}
