//! Higher-order spectral shift functions.
//!
//! `η_1 = N_H - N_{H+V}`; for `n ≥ 2`
//! `η_n(t) = μ_{n-1}((-∞, t)) - ∫_{-∞}^t η_{n-1}`, where `μ_k` is the
//! measure with `∫ f^{(k)} dμ_k = (1/k!) τ(d^k/dt^k f(H_t)|_{t=0})`.
//! Everything is assembled exactly as piecewise polynomials over the
//! eigenvalues of `H` and `H + V`.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::divdiff::peano_kernel_sorted;
use crate::error::{Result, SsfError};
use crate::functions::{factorial, SmoothTestFunction};
use crate::piecewise::{merge_breakpoints, PiecewisePolynomial};
use crate::spectral::{check_same_dim, schatten_norm, trace, CMatrix, HermitianOperator, SpectralDecomposition};
use crate::summation::{sum, ComplexSum, NeumaierSum};
use crate::taylor::{remainder_direct, PerturbationLine};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind", content = "order")]
pub enum MeasureSource {
    /// `μ_k`, the derivative measure.
    Mu(usize),
    /// `ν_n = η_n dt`.
    Nu(usize),
}

/// Atoms plus a piecewise-polynomial density.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SplineMeasure {
    /// `(location, weight)`, sorted by location.
    pub atoms: Vec<(f64, f64)>,
    pub density: PiecewisePolynomial,
    pub order: usize,
    pub source: MeasureSource,
    /// Largest imaginary part left over after symmetrisation.
    pub imag_residue: f64,
}

impl SplineMeasure {
    pub fn total_mass(&self) -> f64 {
        sum(self.atoms.iter().map(|a| a.1)) + self.density.integral()
    }

    /// Atom locations and density breakpoints.
    pub fn breakpoints(&self) -> Vec<f64> {
        let locs: Vec<f64> = self.atoms.iter().map(|a| a.0).collect();
        merge_breakpoints(&locs, self.density.breakpoints())
    }

    /// `F(t) = μ((-∞, t))` on `grid`, which must contain every breakpoint
    /// of the measure.  `F` is left-continuous, so `eval` gives `μ((-∞, t))`
    /// and `eval_right` gives `μ((-∞, t])`.
    pub fn cumulative_on(&self, grid: &[f64]) -> PiecewisePolynomial {
        if grid.len() < 2 {
            return PiecewisePolynomial::zero();
        }
        let (dens, _) = if self.density.breakpoints().len() >= 2 {
            self.density.refine(grid).cumulative()
        } else {
            (PiecewisePolynomial::zero().refine(grid), 0.0)
        };
        let mut pieces = dens.pieces().to_vec();
        let mut mass = NeumaierSum::new();
        let mut a = 0;
        for (i, piece) in pieces.iter_mut().enumerate() {
            while a < self.atoms.len() && self.atoms[a].0 <= grid[i] {
                mass.add(self.atoms[a].1);
                a += 1;
            }
            piece[0] += mass.value();
        }
        PiecewisePolynomial::new(grid.to_vec(), pieces).expect("grid is strictly increasing")
    }

    /// `∫ f dμ`; the density part uses `order` Gauss points per piece and
    /// splits pieces longer than `max_len`.
    pub fn integrate_against<F: Fn(f64) -> Complex64>(&self, f: F, order: usize, max_len: f64) -> Complex64 {
        let mut acc = ComplexSum::new();
        for &(x, w) in &self.atoms {
            acc.add(f(x) * w);
        }
        acc.add(self.density.integrate_against(&f, order, max_len));
        acc.value()
    }
}

/// `η_n` with its recorded jumps and support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SpectralShiftFunction {
    pub order: usize,
    pub eta: PiecewisePolynomial,
    /// `(location, right limit - left limit)`.
    pub jumps: Vec<(f64, f64)>,
    pub support: Option<(f64, f64)>,
}

impl SpectralShiftFunction {
    fn from_eta(order: usize, eta: PiecewisePolynomial, jump_tol: f64) -> Self {
        let eta = eta.trim_zero_ends();
        let jumps = eta.jumps(jump_tol);
        let support = eta.support();
        Self {
            order,
            eta,
            jumps,
            support,
        }
    }

    pub fn zero(order: usize) -> Self {
        Self::from_eta(order, PiecewisePolynomial::zero(), 0.0)
    }

    /// Left limit at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        self.eta.eval(t)
    }

    pub fn eval_right(&self, t: f64) -> f64 {
        self.eta.eval_right(t)
    }

    pub fn integral(&self) -> f64 {
        self.eta.integral()
    }

    pub fn l1_norm(&self) -> f64 {
        self.eta.l1_norm()
    }

    /// `η_n dt` as a measure.
    pub fn as_measure(&self) -> SplineMeasure {
        SplineMeasure {
            atoms: Vec::new(),
            density: self.eta.clone(),
            order: self.order,
            source: MeasureSource::Nu(self.order),
            imag_residue: 0.0,
        }
    }

    /// `∫ f η_n` with a rule adapted to `f` (exact for polynomials).
    pub fn integrate_against(&self, f: &SmoothTestFunction, derivative: u32) -> Complex64 {
        let (order, max_len) = quadrature_for(f, self.order);
        self.eta.integrate_against(|t| f.derivative_unchecked(derivative, t), order, max_len)
    }
}

fn quadrature_for(f: &SmoothTestFunction, eta_order: usize) -> (usize, f64) {
    match f.polynomial_degree() {
        Some(d) => (((d + eta_order) / 2 + 2).max(8), f64::INFINITY),
        None => (20, 0.25 * f.natural_scale()),
    }
}

fn cluster_values(d: &SpectralDecomposition) -> Vec<f64> {
    d.clusters().iter().map(|c| c.value).collect()
}

/// `η_1(t) = N_H(t) - N_{H+V}(t)`, right-continuous steps on the union
/// of both spectra.
pub fn krein_eta1(h: &HermitianOperator, v: &HermitianOperator) -> Result<SpectralShiftFunction> {
    check_same_dim(h.dim(), v.dim())?;
    let dh = h.decompose()?;
    let dhv = h.add_scaled(v, 1.0)?.decompose()?;
    Ok(krein_from(&dh, &dhv))
}

fn krein_from(dh: &SpectralDecomposition, dhv: &SpectralDecomposition) -> SpectralShiftFunction {
    let grid = merge_breakpoints(&cluster_values(dh), &cluster_values(dhv));
    if grid.len() < 2 {
        return SpectralShiftFunction::zero(1);
    }
    let pieces: Vec<Vec<f64>> = grid
        .windows(2)
        .map(|w| vec![dh.counting(w[0]) as f64 - dhv.counting(w[0]) as f64])
        .collect();
    let eta = PiecewisePolynomial::new(grid, pieces).expect("sorted union");
    SpectralShiftFunction::from_eta(1, eta, 0.5)
}

/// Cyclic trace weights `Tr(E_{l_0} V E_{l_1} V ⋯ E_{l_{k-1}} V)` summed
/// per multiset of the kernel nodes `(l_0, …, l_{k-1}, l_0)` (sorted
/// cluster indices).  Summing per multiset pairs every tuple with its
/// reversal, whose weight is the complex conjugate.
fn grouped_weights(d: &SpectralDecomposition, v: &CMatrix, k: usize) -> BTreeMap<Vec<usize>, Complex64> {
    let u = d.eigenvectors();
    let y = u.adjoint() * v * u;
    let dim = d.dim();
    let r = d.clusters().len();
    // rows of Y restricted to each cluster: E_l Y in the eigenbasis
    let members: Vec<Vec<usize>> = (0..r)
        .map(|l| (0..dim).filter(|&i| d.clustered_eigenvalue(i) == d.clusters()[l].value).collect())
        .collect();
    let restrict = |m: &CMatrix, l: usize| -> CMatrix {
        let mut out = CMatrix::zeros(dim, dim);
        for &i in &members[l] {
            out.set_row(i, &m.row(i));
        }
        out
    };
    let ey: Vec<CMatrix> = (0..r).map(|l| restrict(&y, l)).collect();

    let partial: Vec<BTreeMap<Vec<usize>, ComplexSum>> = (0..r)
        .into_par_iter()
        .map(|l0| {
            let mut out: BTreeMap<Vec<usize>, ComplexSum> = BTreeMap::new();
            let mut idx = vec![l0];
            walk(&ey, k, &mut idx, ey[l0].clone(), &mut out);
            out
        })
        .collect();

    let mut merged: BTreeMap<Vec<usize>, ComplexSum> = BTreeMap::new();
    for map in partial {
        for (key, s) in map {
            merged.entry(key).or_default().add(s.value());
        }
    }
    merged.into_iter().map(|(k, s)| (k, s.value())).collect()
}

fn walk(ey: &[CMatrix], k: usize, idx: &mut Vec<usize>, prefix: CMatrix, out: &mut BTreeMap<Vec<usize>, ComplexSum>) {
    if idx.len() == k {
        let w = trace(&prefix);
        if w != Complex64::new(0.0, 0.0) {
            let mut key = idx.clone();
            key.push(idx[0]);
            key.sort_unstable();
            out.entry(key).or_default().add(w);
        }
        return;
    }
    for (l, e) in ey.iter().enumerate() {
        let next = &prefix * e;
        if next.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            continue;
        }
        idx.push(l);
        walk(ey, k, idx, next, out);
        idx.pop();
    }
}

/// `μ_k` for the pair `(H, V)` from a precomputed decomposition of `H`.
pub fn mu_measure_from(d: &SpectralDecomposition, v: &HermitianOperator, k: usize) -> Result<SplineMeasure> {
    if k == 0 {
        return Err(SsfError::invalid("μ_k needs k >= 1"));
    }
    check_same_dim(d.dim(), v.dim())?;
    let values = cluster_values(d);
    let weights = grouped_weights(d, v.matrix(), k);
    let kfact = factorial(k);
    let scale = 1.0 + weights.values().map(|w| w.norm()).sum::<f64>();

    let mut atoms = Vec::new();
    let mut kernels = Vec::new();
    let mut imag = 0.0f64;
    for (key, w) in &weights {
        imag = imag.max(w.im.abs());
        let nodes: Vec<f64> = key.iter().map(|&l| values[l]).collect();
        if key.first() == key.last() {
            atoms.push((nodes[0], w.re / kfact));
        } else {
            kernels.push((peano_kernel_sorted(&nodes)?, w.re));
        }
    }
    if imag > 1e-9 * scale {
        return Err(SsfError::Consistency(format!(
            "imaginary residue {imag:e} after symmetrisation exceeds 1e-9 * {scale:e}"
        )));
    }
    atoms.sort_by(|a, b| a.0.total_cmp(&b.0));
    let density = PiecewisePolynomial::sum_scaled(kernels.iter().map(|(p, w)| (p, *w)));
    Ok(SplineMeasure {
        atoms,
        density,
        order: k,
        source: MeasureSource::Mu(k),
        imag_residue: imag,
    })
}

pub fn mu_measure(h: &HermitianOperator, v: &HermitianOperator, k: usize) -> Result<SplineMeasure> {
    check_same_dim(h.dim(), v.dim())?;
    mu_measure_from(&h.decompose()?, v, k)
}

/// Relative threshold of the total-mass cancellation check.
pub const MASS_CANCELLATION_TOL: f64 = 1e-8;

/// `η_1, …, η_n`.
pub fn eta_sequence(h: &HermitianOperator, v: &HermitianOperator, n: usize) -> Result<Vec<SpectralShiftFunction>> {
    if n == 0 {
        return Err(SsfError::invalid("order n must be >= 1"));
    }
    check_same_dim(h.dim(), v.dim())?;
    let dh = h.decompose()?;
    let dhv = h.add_scaled(v, 1.0)?.decompose()?;
    let mut seq = vec![krein_from(&dh, &dhv)];
    let spectra = merge_breakpoints(&cluster_values(&dh), &cluster_values(&dhv));
    for order in 2..=n {
        let prev = seq.last().expect("non-empty");
        let mu = mu_measure_from(&dh, v, order - 1)?;
        let grid = merge_breakpoints(&merge_breakpoints(&spectra, &mu.breakpoints()), prev.eta.breakpoints());
        let prev_measure = prev.as_measure();

        let mu_mass = mu.total_mass();
        let prev_mass = prev.integral();
        let vnorm = schatten_norm(v.matrix(), (order - 1) as f64)?;
        let scale = 1.0 + vnorm.powi(order as i32 - 1) / factorial(order - 1) + prev.l1_norm();
        if (mu_mass - prev_mass).abs() > MASS_CANCELLATION_TOL * scale {
            return Err(SsfError::Consistency(format!(
                "order {order}: μ mass {mu_mass:e} and ∫η mass {prev_mass:e} do not cancel"
            )));
        }
        let eta = mu.cumulative_on(&grid).sub(&prev_measure.cumulative_on(&grid));
        seq.push(SpectralShiftFunction::from_eta(order, eta, 1e-12 * scale));
    }
    Ok(seq)
}

pub fn eta_n(h: &HermitianOperator, v: &HermitianOperator, n: usize) -> Result<SpectralShiftFunction> {
    Ok(eta_sequence(h, v, n)?.pop().expect("n >= 1"))
}

/// Both sides of `τ(Δ_{n,f}(H, V)) = ∫ f^{(n)} η_n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceFormulaCheck {
    pub lhs: Complex64,
    pub rhs: Complex64,
    pub residual: f64,
}

/// Trace formula against an already computed `η_n`.
pub fn trace_formula_with(line: &PerturbationLine, eta: &SpectralShiftFunction, f: &SmoothTestFunction) -> Result<TraceFormulaCheck> {
    let n = eta.order;
    if (n as u32) > f.max_derivative_order {
        return Err(SsfError::invalid(format!("f must be differentiable to order {n}")));
    }
    let lhs = trace(&remainder_direct(line, f, n)?);
    let rhs = eta.integrate_against(f, n as u32);
    Ok(TraceFormulaCheck {
        lhs,
        rhs,
        residual: (lhs - rhs).norm(),
    })
}

pub fn verify_trace_formula(h: &HermitianOperator, v: &HermitianOperator, n: usize, f: &SmoothTestFunction) -> Result<TraceFormulaCheck> {
    let eta = eta_n(h, v, n)?;
    let line = PerturbationLine::new(h.clone(), v.clone())?;
    trace_formula_with(&line, &eta, f)
}

/// `|τ(Δ_{n,f}) - (τ(Δ_{n-1,f}) - ∫ f^{(n-1)} dμ_{n-1})|` for `n ≥ 2`.
pub fn recursion_residual(h: &HermitianOperator, v: &HermitianOperator, n: usize, f: &SmoothTestFunction) -> Result<f64> {
    if n < 2 {
        return Err(SsfError::invalid("recursion starts at n = 2"));
    }
    let line = PerturbationLine::new(h.clone(), v.clone())?;
    let a = trace(&remainder_direct(&line, f, n)?);
    let b = trace(&remainder_direct(&line, f, n - 1)?);
    let mu = mu_measure(h, v, n - 1)?;
    let (order, max_len) = quadrature_for(f, n);
    let m = mu.integrate_against(|t| f.derivative_unchecked(n as u32 - 1, t), order, max_len);
    Ok((a - (b - m)).norm())
}

/// `‖η_n‖_1` against `‖V‖_n^n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct NormReport {
    pub l1_norm: f64,
    pub schatten_pow: f64,
    /// `None` when `V = 0`.
    pub ratio: Option<f64>,
}

pub fn norm_report(eta: &SpectralShiftFunction, v: &HermitianOperator) -> Result<NormReport> {
    let n = eta.order;
    let l1 = eta.l1_norm();
    let sp = schatten_norm(v.matrix(), n as f64)?.powi(n as i32);
    Ok(NormReport {
        l1_norm: l1,
        schatten_pow: sp,
        ratio: (sp > 0.0).then(|| l1 / sp),
    })
}

pub fn l1_norm_and_ratios(h: &HermitianOperator, v: &HermitianOperator, n: usize) -> Result<NormReport> {
    norm_report(&eta_n(h, v, n)?, v)
}

/// One entry of a continuity report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ContinuityEntry {
    pub j: usize,
    pub k: usize,
    pub eta_l1_difference: f64,
    pub v_schatten_difference: f64,
}

fn continuity_entry(a: (usize, &SpectralShiftFunction, &HermitianOperator), b: (usize, &SpectralShiftFunction, &HermitianOperator), n: usize) -> Result<ContinuityEntry> {
    let diff = a.1.eta.sub(&b.1.eta);
    let dv: DMatrix<Complex64> = a.2.matrix() - b.2.matrix();
    Ok(ContinuityEntry {
        j: a.0,
        k: b.0,
        eta_l1_difference: diff.l1_norm(),
        v_schatten_difference: schatten_norm(&dv, n as f64)?,
    })
}

/// `‖η_{n,H,V_j} - η_{n,H,V_{j+1}}‖_1` against `‖V_j - V_{j+1}‖_n` for
/// consecutive members of `vseq`.
pub fn continuity_in_v(h: &HermitianOperator, vseq: &[HermitianOperator], n: usize) -> Result<Vec<ContinuityEntry>> {
    let etas = vseq.iter().map(|v| eta_n(h, v, n)).collect::<Result<Vec<_>>>()?;
    (1..vseq.len())
        .map(|k| continuity_entry((k - 1, &etas[k - 1], &vseq[k - 1]), (k, &etas[k], &vseq[k]), n))
        .collect()
}

/// Distances of every `η_{n,H,V_j}` to `η_{n,H,V}`; `k` in the entries is
/// `usize::MAX` for the limit.
pub fn convergence_to(h: &HermitianOperator, vseq: &[HermitianOperator], limit: &HermitianOperator, n: usize) -> Result<Vec<ContinuityEntry>> {
    let target = eta_n(h, limit, n)?;
    vseq.iter()
        .enumerate()
        .map(|(j, v)| continuity_entry((j, &eta_n(h, v, n)?, v), (usize::MAX, &target, limit), n))
        .collect()
}
