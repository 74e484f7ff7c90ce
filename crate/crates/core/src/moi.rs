//! Multiple operator integrals
//! `T_φ(x_1, …, x_n) = Σ φ(λ_{l_0}, …, λ_{l_n}) E_{l_0} x_1 E_{l_1} ⋯ x_n E_{l_n}`
//! over the clustered spectral family of a Hermitian matrix.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::divdiff::{divided_difference, DEFAULT_NODE_TOL};
use crate::error::{Result, SsfError};
use crate::functions::{FunctionFamily, SmoothTestFunction};
use crate::momentum::{momentum_phi, MomentumSpec};
use crate::quadrature::{GaussLegendre, SimplexQuadratureRule};
use crate::spectral::{frobenius, trace, CMatrix, SpectralDecomposition};
use crate::summation::{ComplexSum, MatrixAccumulator};

type SymbolFn = dyn Fn(&[f64]) -> Complex64 + Send + Sync;

/// Where a symbol came from; informational, evaluation always goes through
/// the stored closure.
#[derive(Debug, Clone)]
pub enum SymbolTag {
    Constant(Complex64),
    DividedDifference { f: SmoothTestFunction, n: usize },
    Momentum(MomentumSpec),
    Product,
    Composition,
    AdjointFlip,
    Cycled,
    Combination,
    Custom(String),
}

/// A function of `arity + 1` real variables.
#[derive(Clone)]
pub struct MoiSymbol {
    arity: usize,
    eval: Arc<SymbolFn>,
    tag: SymbolTag,
}

impl fmt::Debug for MoiSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MoiSymbol").field("arity", &self.arity).field("tag", &self.tag).finish()
    }
}

impl MoiSymbol {
    pub fn from_fn<F>(arity: usize, label: impl Into<String>, f: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self {
            arity,
            eval: Arc::new(f),
            tag: SymbolTag::Custom(label.into()),
        }
    }

    pub fn constant(arity: usize, c: Complex64) -> Self {
        Self {
            arity,
            eval: Arc::new(move |_| c),
            tag: SymbolTag::Constant(c),
        }
    }

    /// `f^{[n]}` as a symbol of arity `n`.
    pub fn divided_difference(f: SmoothTestFunction, n: usize) -> Result<Self> {
        f.validate()?;
        if (n as u32) > f.max_derivative_order {
            return Err(SsfError::invalid(format!(
                "f^[{n}] needs derivatives of order {n}, function declares {}",
                f.max_derivative_order
            )));
        }
        let g = f.clone();
        Ok(Self {
            arity: n,
            eval: Arc::new(move |x| divided_difference(&g, x, DEFAULT_NODE_TOL).expect("order checked on construction")),
            tag: SymbolTag::DividedDifference { f, n },
        })
    }

    /// `φ_{n,h,p}` evaluated with the given simplex rule.
    pub fn momentum(spec: MomentumSpec, rule: SimplexQuadratureRule) -> Result<Self> {
        if rule.dim() != spec.n {
            return Err(SsfError::DimensionMismatch {
                expected: spec.n,
                found: rule.dim(),
            });
        }
        let s = spec.clone();
        Ok(Self {
            arity: spec.n,
            eval: Arc::new(move |x| momentum_phi(&s, x, &rule).expect("shapes checked on construction")),
            tag: SymbolTag::Momentum(spec),
        })
    }

    pub fn arity(&self) -> usize {
        self.arity
    }

    pub fn tag(&self) -> &SymbolTag {
        &self.tag
    }

    pub fn eval(&self, lambda: &[f64]) -> Complex64 {
        assert_eq!(lambda.len(), self.arity + 1, "symbol expects {} variables", self.arity + 1);
        (self.eval)(lambda)
    }

    /// `ψ(λ_0..λ_n) = φ_1(λ_0..λ_k) φ_2(λ_k..λ_n)`.
    pub fn product(phi1: &MoiSymbol, phi2: &MoiSymbol) -> Self {
        let k = phi1.arity;
        let (a, b) = (phi1.eval.clone(), phi2.eval.clone());
        Self {
            arity: phi1.arity + phi2.arity,
            eval: Arc::new(move |x| a(&x[..=k]) * b(&x[k..])),
            tag: SymbolTag::Product,
        }
    }

    /// `ψ(λ_0..λ_n) = φ_1(λ_0..λ_k) φ_2(λ_0, λ_k, …, λ_n)` with `k` the
    /// arity of `φ_1`.
    pub fn composition(phi1: &MoiSymbol, phi2: &MoiSymbol) -> Result<Self> {
        if phi2.arity == 0 {
            return Err(SsfError::invalid("outer symbol of a composition needs arity >= 1"));
        }
        let k = phi1.arity;
        let n = k + phi2.arity - 1;
        let (a, b) = (phi1.eval.clone(), phi2.eval.clone());
        Ok(Self {
            arity: n,
            eval: Arc::new(move |x| {
                let mut outer = Vec::with_capacity(n - k + 2);
                outer.push(x[0]);
                outer.extend_from_slice(&x[k..]);
                a(&x[..=k]) * b(&outer)
            }),
            tag: SymbolTag::Composition,
        })
    }

    /// `φ̄(λ_0..λ_n) = conj φ(λ_n..λ_0)`.
    pub fn adjoint_flip(&self) -> Self {
        let a = self.eval.clone();
        Self {
            arity: self.arity,
            eval: Arc::new(move |x| {
                let rev: Vec<f64> = x.iter().rev().copied().collect();
                a(&rev).conj()
            }),
            tag: SymbolTag::AdjointFlip,
        }
    }

    /// `φ*(a_0, …, a_n) = φ(a_1, …, a_n, a_0)`.
    pub fn cycled(&self) -> Self {
        let a = self.eval.clone();
        Self {
            arity: self.arity,
            eval: Arc::new(move |x| {
                let mut c: Vec<f64> = x[1..].to_vec();
                c.push(x[0]);
                a(&c)
            }),
            tag: SymbolTag::Cycled,
        }
    }

    /// `Σ c_i φ_i`; all symbols must share one arity.
    pub fn linear_combination(terms: &[(Complex64, MoiSymbol)]) -> Result<Self> {
        let arity = terms.first().map(|t| t.1.arity).ok_or_else(|| SsfError::invalid("empty combination"))?;
        if terms.iter().any(|t| t.1.arity != arity) {
            return Err(SsfError::invalid("arity mismatch in combination"));
        }
        let parts: Vec<(Complex64, Arc<SymbolFn>)> = terms.iter().map(|(c, s)| (*c, s.eval.clone())).collect();
        Ok(Self {
            arity,
            eval: Arc::new(move |x| parts.iter().map(|(c, f)| c * f(x)).sum()),
            tag: SymbolTag::Combination,
        })
    }
}

fn check_args(dim: usize, phi: &MoiSymbol, args: &[CMatrix]) -> Result<()> {
    if phi.arity != args.len() {
        return Err(SsfError::invalid(format!(
            "symbol of arity {} applied to {} arguments",
            phi.arity,
            args.len()
        )));
    }
    for a in args {
        if a.nrows() != dim || a.ncols() != dim {
            return Err(SsfError::DimensionMismatch {
                expected: dim,
                found: a.nrows(),
            });
        }
    }
    Ok(())
}

/// Depth-first tuple sum over a projection family `(node, E)`, reusing
/// prefix products.  Work is split by the first index; partial sums are
/// combined in index order so the result does not depend on the thread
/// count.
fn tuple_sum(family: &[(f64, &CMatrix)], phi: &MoiSymbol, args: &[CMatrix], dim: usize) -> CMatrix {
    let n = args.len();
    let partials: Vec<CMatrix> = (0..family.len())
        .into_par_iter()
        .map(|l0| {
            let mut acc = MatrixAccumulator::zeros(dim, dim);
            let mut nodes = vec![0.0; n + 1];
            nodes[0] = family[l0].0;
            descend(family, phi, args, 1, family[l0].1.clone(), &mut nodes, &mut acc);
            acc.value()
        })
        .collect();
    let mut total = MatrixAccumulator::zeros(dim, dim);
    for p in &partials {
        total.add(p);
    }
    total.value()
}

fn descend(
    family: &[(f64, &CMatrix)],
    phi: &MoiSymbol,
    args: &[CMatrix],
    depth: usize,
    prefix: CMatrix,
    nodes: &mut Vec<f64>,
    acc: &mut MatrixAccumulator,
) {
    if depth > args.len() {
        let w = phi.eval(nodes);
        if w != Complex64::new(0.0, 0.0) {
            acc.add_scaled(&prefix, w);
        }
        return;
    }
    let px = &prefix * &args[depth - 1];
    if px.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return;
    }
    for &(node, e) in family {
        nodes[depth] = node;
        let next = &px * e;
        if next.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            continue;
        }
        descend(family, phi, args, depth + 1, next, nodes, acc);
    }
}

/// `T_φ(x_1, …, x_n)` over the clustered spectral family of `d`.
pub fn moi_exact(d: &SpectralDecomposition, phi: &MoiSymbol, args: &[CMatrix]) -> Result<CMatrix> {
    check_args(d.dim(), phi, args)?;
    let family: Vec<(f64, &CMatrix)> = d.clusters().iter().map(|c| (c.value, &c.projection)).collect();
    Ok(tuple_sum(&family, phi, args, d.dim()))
}

/// Grid sum `S_{φ,m}` over the cells `[l/m, (l+1)/m)` with nodes `l/m`.
pub fn moi_discretized(d: &SpectralDecomposition, phi: &MoiSymbol, m: usize, args: &[CMatrix]) -> Result<CMatrix> {
    check_args(d.dim(), phi, args)?;
    let grid = d.grid_projections(m)?;
    let family: Vec<(f64, &CMatrix)> = grid.cells.iter().map(|(&l, e)| (grid.node(l), e)).collect();
    Ok(tuple_sum(&family, phi, args, d.dim()))
}

/// `max |φ|` over all tuples of clustered eigenvalues.
pub fn symbol_sup_on_spectrum(d: &SpectralDecomposition, phi: &MoiSymbol) -> f64 {
    let values: Vec<f64> = d.clusters().iter().map(|c| c.value).collect();
    let r = values.len();
    let mut idx = vec![0usize; phi.arity + 1];
    let mut x = vec![0.0; phi.arity + 1];
    let mut best = 0.0f64;
    loop {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = values[i];
        }
        best = best.max(phi.eval(&x).norm());
        let mut k = idx.len();
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < r {
                break;
            }
            idx[k] = 0;
        }
    }
}

/// Natural error scale `max(1, sup|φ|) · Π (1 + ‖x_j‖_F)` for residuals.
pub fn moi_scale(d: &SpectralDecomposition, phi: &MoiSymbol, args: &[CMatrix]) -> f64 {
    symbol_sup_on_spectrum(d, phi).max(1.0) * args.iter().map(|a| 1.0 + frobenius(a)).product::<f64>()
}

/// Sampled modulus of continuity on the spectrum: the largest
/// `|φ(λ + o) - φ(λ)|` over clustered eigenvalue tuples `λ` and offsets
/// `o ∈ [-δ, δ]^{n+1}` on a grid with `per_axis` points per coordinate.
pub fn modulus_of_continuity(d: &SpectralDecomposition, phi: &MoiSymbol, delta: f64, per_axis: usize) -> f64 {
    let values: Vec<f64> = d.clusters().iter().map(|c| c.value).collect();
    let r = values.len();
    let k = phi.arity + 1;
    let per_axis = per_axis.max(2);
    let offsets: Vec<f64> = (0..per_axis)
        .map(|i| -delta + 2.0 * delta * i as f64 / (per_axis - 1) as f64)
        .collect();
    let mut best = 0.0f64;
    let mut idx = vec![0usize; k];
    let mut x = vec![0.0; k];
    let mut y = vec![0.0; k];
    'tuples: loop {
        for (xi, &i) in x.iter_mut().zip(&idx) {
            *xi = values[i];
        }
        let base = phi.eval(&x);
        let mut o = vec![0usize; k];
        'offsets: loop {
            for j in 0..k {
                y[j] = x[j] + offsets[o[j]];
            }
            best = best.max((phi.eval(&y) - base).norm());
            let mut j = k;
            loop {
                if j == 0 {
                    break 'offsets;
                }
                j -= 1;
                o[j] += 1;
                if o[j] < per_axis {
                    break;
                }
                o[j] = 0;
            }
        }
        let mut j = k;
        loop {
            if j == 0 {
                break 'tuples;
            }
            j -= 1;
            idx[j] += 1;
            if idx[j] < r {
                break;
            }
            idx[j] = 0;
        }
    }
    best
}

/// Frobenius error `‖S_{φ,m} - T_φ‖_2` for each grid resolution.
pub fn discretization_errors(d: &SpectralDecomposition, phi: &MoiSymbol, args: &[CMatrix], ms: &[usize]) -> Result<Vec<(usize, f64)>> {
    let exact = moi_exact(d, phi, args)?;
    ms.iter()
        .map(|&m| Ok((m, frobenius(&(moi_discretized(d, phi, m, args)? - &exact)))))
        .collect()
}

/// Quadrature form of `φ_{n,h,p}(λ) = ∫ g(s) ∫_{S_n} p(s̃) Π_j e^{i s s_j λ_j} dσ_n ds`
/// where `h(t) = ∫ g(s) e^{ist} ds`.
#[derive(Debug, Clone)]
pub struct SeparableRepresentation {
    pub n: usize,
    /// `(s, g(s) · quadrature weight)`.
    pub s_nodes: Vec<(f64, Complex64)>,
    /// `(barycentric point, simplex weight · p(s̃))`.
    pub simplex_nodes: Vec<(Vec<f64>, f64)>,
    /// Truncation window of the `s` integral.
    pub window: (f64, f64),
    /// Measured sup-error of the reconstructed `h` on the requested
    /// interval, times `∫ |p| dσ_n`; bounds the pointwise error in `φ`.
    pub tolerance: f64,
}

/// Knobs for [`SeparableRepresentation::for_momentum`].
#[derive(Debug, Clone, Copy)]
pub struct FourierConfig {
    /// Half-width of the window in standard deviations of the transform.
    pub window_sds: f64,
    /// Trapezoid nodes across the window (gaussian family).
    pub nodes: usize,
    /// Decay lengths kept for resolvents, in units of `1/|Im z|`.
    pub resolvent_decay: f64,
}

impl Default for FourierConfig {
    fn default() -> Self {
        Self {
            window_sds: 8.0,
            nodes: 201,
            resolvent_decay: 40.0,
        }
    }
}

fn factorial_f(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

impl SeparableRepresentation {
    /// Builds the representation of `spec` valid for arguments in
    /// `interval`; the declared tolerance is measured there.
    pub fn for_momentum(spec: &MomentumSpec, rule: &SimplexQuadratureRule, interval: (f64, f64), cfg: FourierConfig) -> Result<Self> {
        if rule.dim() != spec.n {
            return Err(SsfError::DimensionMismatch {
                expected: spec.n,
                found: rule.dim(),
            });
        }
        let d = spec.h_derivative;
        let i = Complex64::i();
        let (s_nodes, window): (Vec<(f64, Complex64)>, (f64, f64)) = match spec.h.family {
            FunctionFamily::Gaussian { center, width, amplitude } => {
                let half = cfg.window_sds / width;
                let count = cfg.nodes.max(3);
                let step = 2.0 * half / (count - 1) as f64;
                let pre = amplitude * width / (2.0 * std::f64::consts::PI).sqrt();
                let nodes = (0..count)
                    .map(|k| {
                        let s = -half + step * k as f64;
                        let trap = if k == 0 || k == count - 1 { 0.5 * step } else { step };
                        let g = pre * (-0.5 * width * width * s * s).exp() * (-i * s * center).exp() * (i * s).powu(d);
                        (s, g * trap)
                    })
                    .collect();
                (nodes, (-half, half))
            }
            FunctionFamily::ResolventPower { pole, power } => {
                if pole.im == 0.0 {
                    return Err(SsfError::invalid("resolvent pole must be off the real axis"));
                }
                let k = power;
                let sign = pole.im.signum();
                let len = cfg.resolvent_decay / pole.im.abs();
                let reach = interval.0.abs().max(interval.1.abs()) + pole.re.abs() + pole.im.abs();
                let panel = (1.0 / pole.im.abs()).min(std::f64::consts::PI / reach.max(1e-300));
                let panels = ((len / panel).ceil() as usize).clamp(1, 20_000);
                let gl = GaussLegendre::new(16);
                let (a, b) = if sign > 0.0 { (-len, 0.0) } else { (0.0, len) };
                let width = (b - a) / panels as f64;
                let pre = if sign > 0.0 { i } else { -i } / factorial_f(k - 1);
                let mut nodes = Vec::with_capacity(panels * gl.len());
                for p in 0..panels {
                    let lo = a + width * p as f64;
                    for (s, w) in gl.on_interval(lo, lo + width) {
                        let g = pre * (-i * s).powu(k - 1) * (-i * s * pole).exp() * (i * s).powu(d);
                        nodes.push((s, g * w));
                    }
                }
                (nodes, (a, b))
            }
            FunctionFamily::ComplexExponential { frequency } => {
                let g = (i * frequency).powu(d);
                (vec![(frequency, g)], (frequency, frequency))
            }
            FunctionFamily::Polynomial { .. } => {
                return Err(SsfError::Unsupported(
                    "polynomials have no integrable Fourier transform".into(),
                ))
            }
        };

        let simplex_nodes: Vec<(Vec<f64>, f64)> = rule
            .iter()
            .map(|(s, w)| (s.to_vec(), w * spec.p.eval(&s[1..])))
            .collect();
        let p_mass: f64 = simplex_nodes.iter().map(|(_, w)| w.abs()).sum();

        // measured reconstruction error of h^{(d)} on the interval
        let (lo, hi) = interval;
        let samples = 257;
        let mut err = 0.0f64;
        for j in 0..samples {
            let t = if hi > lo { lo + (hi - lo) * j as f64 / (samples - 1) as f64 } else { lo };
            let rec: Complex64 = s_nodes.iter().map(|&(s, g)| g * (i * s * t).exp()).sum();
            err = err.max((rec - spec.h.derivative_unchecked(d, t)).norm());
        }
        Ok(Self {
            n: spec.n,
            s_nodes,
            simplex_nodes,
            window,
            tolerance: err * p_mass,
        })
    }

    /// Pointwise evaluation of the represented symbol.
    pub fn eval(&self, lambda: &[f64]) -> Complex64 {
        let i = Complex64::i();
        let mut acc = ComplexSum::new();
        for &(s, g) in &self.s_nodes {
            for (pt, w) in &self.simplex_nodes {
                let x: f64 = pt.iter().zip(lambda).map(|(a, b)| a * b).sum();
                acc.add(g * w * (i * s * x).exp());
            }
        }
        acc.value()
    }
}

/// `Σ g(s) w p(s̃) e^{i s s_0 H} x_1 e^{i s s_1 H} ⋯ x_n e^{i s s_n H}`.
pub fn moi_fourier(d: &SpectralDecomposition, rep: &SeparableRepresentation, args: &[CMatrix]) -> Result<CMatrix> {
    if args.len() != rep.n {
        return Err(SsfError::invalid(format!(
            "representation of arity {} applied to {} arguments",
            rep.n,
            args.len()
        )));
    }
    let dim = d.dim();
    for a in args {
        if a.nrows() != dim || a.ncols() != dim {
            return Err(SsfError::DimensionMismatch {
                expected: dim,
                found: a.nrows(),
            });
        }
    }
    let i = Complex64::i();
    let u = d.eigenvectors();
    let uh = u.adjoint();
    // arguments in the eigenbasis, exponentials become diagonal scalings
    let y: Vec<CMatrix> = args.iter().map(|a| &uh * a * u).collect();
    let lam: Vec<f64> = (0..dim).map(|k| d.clustered_eigenvalue(k)).collect();

    let partials: Vec<CMatrix> = rep
        .s_nodes
        .par_iter()
        .map(|&(s, g)| {
            let mut acc = MatrixAccumulator::zeros(dim, dim);
            for (pt, w) in &rep.simplex_nodes {
                let phase = |j: usize| -> Vec<Complex64> { lam.iter().map(|&l| (i * s * pt[j] * l).exp()).collect() };
                let mut m = CMatrix::from_diagonal(&nalgebra::DVector::from_vec(phase(0)));
                for (j, yj) in y.iter().enumerate() {
                    m = &m * yj;
                    let ph = phase(j + 1);
                    for (c, mut col) in m.column_iter_mut().enumerate() {
                        col *= ph[c];
                    }
                }
                acc.add_scaled(&m, g * w);
            }
            acc.value()
        })
        .collect();
    let mut total = MatrixAccumulator::zeros(dim, dim);
    for p in &partials {
        total.add(p);
    }
    Ok(u * total.value() * uh)
}

/// `‖T_{φ̄}(x_n*, …, x_1*) - T_φ(x_1, …, x_n)*‖_F`.
pub fn adjoint_flip_residual(d: &SpectralDecomposition, phi: &MoiSymbol, args: &[CMatrix]) -> Result<f64> {
    let lhs_args: Vec<CMatrix> = args.iter().rev().map(|a| a.adjoint()).collect();
    let lhs = moi_exact(d, &phi.adjoint_flip(), &lhs_args)?;
    let rhs = moi_exact(d, phi, args)?.adjoint();
    Ok(frobenius(&(lhs - rhs)))
}

/// `(τ(x_0 T_φ(x_1..x_n)), τ(T_{φ*}(x_0..x_{n-1}) x_n))`.
pub fn duality_trace(d: &SpectralDecomposition, phi: &MoiSymbol, x0: &CMatrix, args: &[CMatrix]) -> Result<(Complex64, Complex64)> {
    if args.is_empty() {
        return Err(SsfError::invalid("duality needs at least one argument"));
    }
    let n = args.len();
    let left = trace(&(x0 * moi_exact(d, phi, args)?));
    let mut shifted = vec![x0.clone()];
    shifted.extend_from_slice(&args[..n - 1]);
    let right = trace(&(moi_exact(d, &phi.cycled(), &shifted)? * &args[n - 1]));
    Ok((left, right))
}

/// `‖T_ψ(x) - T_{φ_1}(x_1..x_k) T_{φ_2}(x_{k+1}..x_n)‖_F` for the product
/// symbol.
pub fn product_property(d: &SpectralDecomposition, phi1: &MoiSymbol, phi2: &MoiSymbol, args: &[CMatrix]) -> Result<f64> {
    let k = phi1.arity;
    if args.len() != k + phi2.arity {
        return Err(SsfError::invalid("argument count must equal the sum of arities"));
    }
    let psi = MoiSymbol::product(phi1, phi2);
    let lhs = moi_exact(d, &psi, args)?;
    let rhs = moi_exact(d, phi1, &args[..k])? * moi_exact(d, phi2, &args[k..])?;
    Ok(frobenius(&(lhs - rhs)))
}

/// `‖T_ψ(x) - T_{φ_2}(T_{φ_1}(x_1..x_k), x_{k+1}, …, x_n)‖_F` for the
/// composed symbol; `k` must equal the arity of `φ_1`.
pub fn composition_property(d: &SpectralDecomposition, phi1: &MoiSymbol, phi2: &MoiSymbol, args: &[CMatrix], k: usize) -> Result<f64> {
    if k != phi1.arity {
        return Err(SsfError::invalid(format!("k = {k} but inner symbol has arity {}", phi1.arity)));
    }
    if phi2.arity == 0 || args.len() != k + phi2.arity - 1 {
        return Err(SsfError::invalid("argument count must be k + arity(φ_2) - 1"));
    }
    let psi = MoiSymbol::composition(phi1, phi2)?;
    let lhs = moi_exact(d, &psi, args)?;
    let mut outer = vec![moi_exact(d, phi1, &args[..k])?];
    outer.extend_from_slice(&args[k..]);
    let rhs = moi_exact(d, phi2, &outer)?;
    Ok(frobenius(&(lhs - rhs)))
}

/// Power symbol `1_{λ<μ} (μ - λ)^{is}` of the map `x ↦ Σ_{l<m} (m-l)^{is} E_l x E_m`.
pub fn power_symbol(s: f64) -> MoiSymbol {
    MoiSymbol::from_fn(1, format!("power({s})"), move |x| {
        if x[0] < x[1] {
            Complex64::new(0.0, s * (x[1] - x[0]).ln()).exp()
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// The reduction of a triple to a double operator integral:
/// `T_s(x, y) = R_{-s}(T_{φ_2}(R_s(x)) y)` with `φ_2(l, k) = f^{[2]}(l, k, k)`
/// and `T_s` the operator integral of
/// `1_{l<k} 1_{l<m} (k - l)^{is} (m - l)^{-is} φ_2(l, k)`.
/// Returns `(‖lhs - rhs‖_F, lhs)`.
pub fn reduction_instance(d: &SpectralDecomposition, f: &SmoothTestFunction, s: f64, x: &CMatrix, y: &CMatrix) -> Result<(f64, CMatrix)> {
    let f2 = MoiSymbol::divided_difference(f.clone(), 2)?;
    let phi2 = MoiSymbol::from_fn(1, "phi2", move |v| f2.eval(&[v[0], v[1], v[1]]));
    let rs = power_symbol(s);
    let rms = power_symbol(-s);

    let p2 = phi2.clone();
    let ts = MoiSymbol::from_fn(2, "T_s", move |v| {
        let (l, k, m) = (v[0], v[1], v[2]);
        if l < k && l < m {
            Complex64::new(0.0, s * ((k - l).ln() - (m - l).ln())).exp() * p2.eval(&[l, k])
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let lhs = moi_exact(d, &ts, &[x.clone(), y.clone()])?;
    let inner = moi_exact(d, &phi2, &[moi_exact(d, &rs, std::slice::from_ref(x))?])? * y;
    let rhs = moi_exact(d, &rms, &[inner])?;
    Ok((frobenius(&(&lhs - rhs)), lhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::HermitianOperator;
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, dim: usize) -> CMatrix {
        DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
    }

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize) -> HermitianOperator {
        let a = random_matrix(rng, dim);
        HermitianOperator::new((&a + a.adjoint()).scale(0.5)).unwrap()
    }

    /// Entrywise sum in the eigenbasis over eigenvalues with multiplicity.
    fn brute_force(d: &SpectralDecomposition, phi: &MoiSymbol, args: &[CMatrix]) -> CMatrix {
        let u = d.eigenvectors();
        let y: Vec<CMatrix> = args.iter().map(|a| u.adjoint() * a * u).collect();
        let dim = d.dim();
        let n = args.len();
        let mut out = CMatrix::zeros(dim, dim);
        let total = dim.pow(n as u32 + 1);
        for code in 0..total {
            let mut idx = vec![0; n + 1];
            let mut rem = code;
            for slot in idx.iter_mut().rev() {
                *slot = rem % dim;
                rem /= dim;
            }
            let lam: Vec<f64> = idx.iter().map(|&i| d.clustered_eigenvalue(i)).collect();
            let mut w = phi.eval(&lam);
            for j in 0..n {
                w *= y[j][(idx[j], idx[j + 1])];
            }
            out[(idx[0], idx[n])] += w;
        }
        u * out * u.adjoint()
    }

    #[test]
    fn constant_symbol_telescopes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_hermitian(&mut rng, 3);
        let d = h.decompose().unwrap();
        let xs: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 3)).collect();
        let t = moi_exact(&d, &MoiSymbol::constant(3, c(1.0)), &xs).unwrap();
        let prod = &xs[0] * &xs[1] * &xs[2];
        assert!(frobenius(&(t - prod)) < 1e-12);
    }

    #[test]
    fn daleckii_krein_two_by_two() {
        let d = HermitianOperator::diagonal(&[1.0, 2.0]).decompose().unwrap();
        let f = SmoothTestFunction::gaussian(0.3, 0.9);
        let phi = MoiSymbol::divided_difference(f.clone(), 1).unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]);
        let t = moi_exact(&d, &phi, &[x]).unwrap();
        let dd = (f.value(2.0) - f.value(1.0)) / 1.0;
        assert!(t[(0, 0)].norm() < 1e-15 && t[(1, 1)].norm() < 1e-15);
        assert!((t[(0, 1)] - dd).norm() < 1e-14 && (t[(1, 0)] - dd).norm() < 1e-14);
    }

    #[test]
    fn matches_entrywise_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dim in 1..=4 {
            for n in 1..=3 {
                let h = random_hermitian(&mut rng, dim);
                let d = h.decompose().unwrap();
                let f = SmoothTestFunction::gaussian(rng.random_range(-0.5..0.5), rng.random_range(0.5..1.5));
                let phi = MoiSymbol::divided_difference(f, n).unwrap();
                let xs: Vec<CMatrix> = (0..n).map(|_| random_matrix(&mut rng, dim)).collect();
                let a = moi_exact(&d, &phi, &xs).unwrap();
                let b = brute_force(&d, &phi, &xs);
                assert!(frobenius(&(&a - &b)) <= 1e-11 * (1.0 + frobenius(&b)), "dim={dim} n={n}");
            }
        }
    }

    #[test]
    fn linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let d = random_hermitian(&mut rng, 3).decompose().unwrap();
        let p1 = MoiSymbol::divided_difference(SmoothTestFunction::gaussian(0.0, 1.0), 2).unwrap();
        let p2 = MoiSymbol::from_fn(2, "sum", |x| Complex64::new(x[0], x[1] * x[2]));
        let (a, b) = (Complex64::new(0.7, -0.2), Complex64::new(-1.3, 0.5));
        let combo = MoiSymbol::linear_combination(&[(a, p1.clone()), (b, p2.clone())]).unwrap();
        let x: Vec<CMatrix> = (0..2).map(|_| random_matrix(&mut rng, 3)).collect();
        let lhs = moi_exact(&d, &combo, &x).unwrap();
        let rhs = moi_exact(&d, &p1, &x).unwrap() * a + moi_exact(&d, &p2, &x).unwrap() * b;
        assert!(frobenius(&(lhs - rhs)) < 1e-12);

        let z = random_matrix(&mut rng, 3);
        let x2 = vec![&x[0] * a + &z * b, x[1].clone()];
        let lhs = moi_exact(&d, &p1, &x2).unwrap();
        let rhs = moi_exact(&d, &p1, &x).unwrap() * a + moi_exact(&d, &p1, &[z, x[1].clone()]).unwrap() * b;
        assert!(frobenius(&(lhs - rhs)) < 1e-12);
    }

    #[test]
    fn schur_multiplier_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = random_hermitian(&mut rng, 4).decompose().unwrap();
            let w = rng.random_range(0.2..2.0);
            let phi = MoiSymbol::from_fn(1, "osc", move |x| Complex64::new(0.0, w * x[0] * x[1]).exp() * (x[0] - x[1]).cos());
            let x = random_matrix(&mut rng, 4);
            let t = moi_exact(&d, &phi, std::slice::from_ref(&x)).unwrap();
            assert!(frobenius(&t) <= symbol_sup_on_spectrum(&d, &phi) * frobenius(&x) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn discretization_examples() {
        let d = HermitianOperator::diagonal(&[-1.0, 0.0, 2.0]).decompose().unwrap();
        let f = SmoothTestFunction::gaussian(0.5, 1.0);
        let phi = MoiSymbol::divided_difference(f, 2).unwrap();
        let x = DMatrix::from_fn(3, 3, |i, j| c((i + 2 * j) as f64 - 1.5));
        let args = vec![x.clone(), x.adjoint()];
        let exact = moi_exact(&d, &phi, &args).unwrap();
        let grid = moi_discretized(&d, &phi, 1, &args).unwrap();
        assert!(frobenius(&(exact - grid)) < 1e-14);

        let one = MoiSymbol::constant(2, c(1.0));
        for m in [1, 3, 7] {
            let s = moi_discretized(&d, &one, m, &args).unwrap();
            assert!(frobenius(&(s - &x * x.adjoint())) < 1e-12);
        }
    }

    #[test]
    fn fourier_matches_exact() {
        let h = HermitianOperator::from_real(2, &[0.2, 0.5, 0.5, 1.1]).unwrap();
        let d = h.decompose().unwrap();
        let x = DMatrix::from_row_slice(2, 2, &[c(1.0), Complex64::new(0.5, 0.5), Complex64::new(0.5, -0.5), c(-2.0)]);
        let interval = (d.min_eigenvalue(), d.max_eigenvalue());

        let f = SmoothTestFunction::gaussian(0.4, 0.8);
        let spec = MomentumSpec::divided_difference(f.clone(), 1);
        let rule = SimplexQuadratureRule::new(1, 30).unwrap();
        let rep = SeparableRepresentation::for_momentum(&spec, &rule, interval, FourierConfig::default()).unwrap();
        let t = moi_fourier(&d, &rep, std::slice::from_ref(&x)).unwrap();
        let e = moi_exact(&d, &MoiSymbol::divided_difference(f.clone(), 1).unwrap(), std::slice::from_ref(&x)).unwrap();
        assert!(frobenius(&(&t - &e)) <= 1e-6, "{}", frobenius(&(&t - &e)));
        assert!(rep.tolerance < 1e-6);

        let zero = moi_fourier(&d, &rep, &[CMatrix::zeros(2, 2)]).unwrap();
        assert_eq!(frobenius(&zero), 0.0);

        let spec2 = MomentumSpec::divided_difference(f.clone(), 2);
        let rule2 = SimplexQuadratureRule::new(2, 24).unwrap();
        let rep2 = SeparableRepresentation::for_momentum(&spec2, &rule2, interval, FourierConfig::default()).unwrap();
        let args = vec![x.clone(), x.adjoint()];
        let t2 = moi_fourier(&d, &rep2, &args).unwrap();
        let e2 = moi_exact(&d, &MoiSymbol::divided_difference(f, 2).unwrap(), &args).unwrap();
        assert!(frobenius(&(t2 - e2)) <= 1e-5);

        let r = SmoothTestFunction::resolvent_power(Complex64::new(0.5, 0.7), 2);
        let spec_r = MomentumSpec::divided_difference(r.clone(), 1);
        let rep_r = SeparableRepresentation::for_momentum(&spec_r, &rule, interval, FourierConfig::default()).unwrap();
        let tr = moi_fourier(&d, &rep_r, std::slice::from_ref(&x)).unwrap();
        let er = moi_exact(&d, &MoiSymbol::divided_difference(r, 1).unwrap(), std::slice::from_ref(&x)).unwrap();
        assert!(frobenius(&(tr - er)) <= 1e-6);

        let poly = MomentumSpec::divided_difference(SmoothTestFunction::monomial(2), 1);
        assert!(matches!(
            SeparableRepresentation::for_momentum(&poly, &rule, interval, FourierConfig::default()),
            Err(SsfError::Unsupported(_))
        ));
    }

    #[test]
    fn algebra_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random_hermitian(&mut rng, 3).decompose().unwrap();
        let phi = MoiSymbol::from_fn(2, "rand", |x| Complex64::new(x[0] - 2.0 * x[2], x[1] * x[0]).exp());
        let xs: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 3)).collect();
        assert!(adjoint_flip_residual(&d, &phi, &xs[..2]).unwrap() < 1e-11);
        let (a, b) = duality_trace(&d, &phi, &xs[2], &xs[..2]).unwrap();
        assert!((a - b).norm() < 1e-10);

        let p1 = MoiSymbol::from_fn(1, "p1", |x| Complex64::new(x[0].sin(), x[1]));
        let p2 = MoiSymbol::from_fn(1, "p2", |x| Complex64::new(x[0] * x[1], 1.0));
        assert!(product_property(&d, &p1, &p2, &xs[..2]).unwrap() < 1e-10);
        assert!(composition_property(&d, &p1, &p2, &xs[..1], 1).unwrap() < 1e-10);
        let p3 = MoiSymbol::from_fn(2, "p3", |x| Complex64::new(x[0] - x[2], x[1] * x[1]));
        assert!(composition_property(&d, &p1, &p3, &xs[..2], 1).unwrap() < 1e-10);
        let one = MoiSymbol::constant(2, c(1.0));
        assert!(composition_property(&d, &one, &p2, &xs[..2], 2).unwrap() < 1e-12);
        assert!(composition_property(&d, &p1, &p2, &xs, 2).is_err());
    }

    #[test]
    fn duality_with_linear_symbol() {
        let d = HermitianOperator::diagonal(&[1.0, 2.0]).decompose().unwrap();
        let h = d.reconstruct();
        let phi = MoiSymbol::from_fn(1, "l0", |x| c(x[0]));
        let x0 = DMatrix::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
        let x1 = DMatrix::from_row_slice(2, 2, &[c(0.5), c(-1.0), c(0.0), c(2.0)]);
        let (a, b) = duality_trace(&d, &phi, &x0, std::slice::from_ref(&x1)).unwrap();
        let expect = trace(&(&x0 * &h * &x1));
        assert!((a - expect).norm() < 1e-13 && (b - expect).norm() < 1e-13);
    }

    #[test]
    fn reduction_instance_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = random_hermitian(&mut rng, 4).decompose().unwrap();
        let f = SmoothTestFunction::gaussian(0.1, 0.8);
        let (x, y) = (random_matrix(&mut rng, 4), random_matrix(&mut rng, 4));
        for s in [-1.3, 0.0, 0.4, 2.0] {
            let (res, lhs) = reduction_instance(&d, &f, s, &x, &y).unwrap();
            assert!(res <= 1e-12 * (1.0 + frobenius(&lhs)), "s={s}: {res}");
        }
    }

    #[test]
    fn deterministic_across_thread_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let d = random_hermitian(&mut rng, 5).decompose().unwrap();
        let phi = MoiSymbol::divided_difference(SmoothTestFunction::gaussian(0.0, 0.7), 3).unwrap();
        let xs: Vec<CMatrix> = (0..3).map(|_| random_matrix(&mut rng, 5)).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| moi_exact(&d, &phi, &xs).unwrap())
        };
        assert_eq!(run(1), run(4));
    }
}
