//! Derivatives of `t ↦ f(H + tV)` and the Taylor remainder
//! `Δ_{n,f}(H, V) = f(H + V) - Σ_{k<n} (1/k!) d^k/dt^k f(H_t)|_{t=0}`.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::Result;
use crate::functions::{factorial, SmoothTestFunction};
use crate::moi::{moi_exact, MoiSymbol};
use crate::quadrature::GaussLegendre;
use crate::spectral::{check_same_dim, decompose, schatten_norm, CMatrix, HermitianOperator, SpectralDecomposition};
use crate::summation::MatrixAccumulator;

/// Gauss nodes used by [`remainder_integral`] unless told otherwise.
pub const DEFAULT_REMAINDER_ORDER: usize = 24;

/// The line `H_t = H + tV` with decompositions cached per `t`.
#[derive(Debug)]
pub struct PerturbationLine {
    h: HermitianOperator,
    v: HermitianOperator,
    cluster_tol: Option<f64>,
    cache: Mutex<BTreeMap<u64, Arc<SpectralDecomposition>>>,
}

impl PerturbationLine {
    pub fn new(h: HermitianOperator, v: HermitianOperator) -> Result<Self> {
        check_same_dim(h.dim(), v.dim())?;
        Ok(Self {
            h,
            v,
            cluster_tol: None,
            cache: Mutex::new(BTreeMap::new()),
        })
    }

    pub fn with_cluster_tol(mut self, tol: f64) -> Self {
        self.cluster_tol = Some(tol);
        self.invalidate();
        self
    }

    pub fn h(&self) -> &HermitianOperator {
        &self.h
    }

    pub fn v(&self) -> &HermitianOperator {
        &self.v
    }

    pub fn dim(&self) -> usize {
        self.h.dim()
    }

    pub fn operator_at(&self, t: f64) -> HermitianOperator {
        self.h.add_scaled(&self.v, t).expect("dimensions checked on construction")
    }

    /// Decomposition of `H_t`, computed once per distinct `t`.
    pub fn decomposition_at(&self, t: f64) -> Result<Arc<SpectralDecomposition>> {
        let key = t.to_bits();
        if let Some(d) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(d.clone());
        }
        let d = Arc::new(decompose(&self.operator_at(t), self.cluster_tol)?);
        self.cache.lock().expect("cache lock").insert(key, d.clone());
        Ok(d)
    }

    /// Drops all cached decompositions.
    pub fn invalidate(&self) {
        self.cache.lock().expect("cache lock").clear();
    }

    pub fn cached_points(&self) -> usize {
        self.cache.lock().expect("cache lock").len()
    }
}

fn apply_function(d: &SpectralDecomposition, f: &SmoothTestFunction) -> CMatrix {
    d.apply(|x| f.value(x))
}

/// `d^k/dt^k f(H_t)` at `t0` as `k! T_{f^{[k]}}(V, …, V)`; `k = 0` gives
/// `f(H_{t0})`.
pub fn derivative_order_k(line: &PerturbationLine, f: &SmoothTestFunction, k: usize, t0: f64) -> Result<CMatrix> {
    let d = line.decomposition_at(t0)?;
    if k == 0 {
        return Ok(apply_function(&d, f));
    }
    let phi = MoiSymbol::divided_difference(f.clone(), k)?;
    let args = vec![line.v().matrix().clone(); k];
    Ok(moi_exact(&d, &phi, &args)? * Complex64::new(factorial(k), 0.0))
}

/// Default step `1e-3 / (1 + ‖V‖)`.
pub fn default_fd_step(v: &HermitianOperator) -> f64 {
    let norm = schatten_norm(v.matrix(), f64::INFINITY).unwrap_or(0.0);
    1e-3 / (1.0 + norm)
}

/// Central difference `h^{-k} Σ_j (-1)^j C(k, j) f(H_{t0 + (k/2 - j)h})`,
/// second-order accurate, stencil inside `t0 ± kh/2`.
pub fn derivative_finite_difference(line: &PerturbationLine, f: &SmoothTestFunction, k: usize, t0: f64, h: f64) -> Result<CMatrix> {
    let dim = line.dim();
    if k == 0 {
        return Ok(apply_function(&decompose(&line.operator_at(t0), None)?, f));
    }
    let mut acc = MatrixAccumulator::zeros(dim, dim);
    let mut binom = 1.0;
    for j in 0..=k {
        let t = t0 + (0.5 * k as f64 - j as f64) * h;
        let fm = apply_function(&decompose(&line.operator_at(t), line.cluster_tol)?, f);
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        acc.add_scaled(&fm, Complex64::new(sign * binom, 0.0));
        binom = binom * (k - j) as f64 / (j + 1) as f64;
    }
    Ok(acc.value() / Complex64::new(h.powi(k as i32), 0.0))
}

/// `f(H + V) - Σ_{k<n} (1/k!) d^k/dt^k f(H_t)|_{t=0}`.
pub fn remainder_direct(line: &PerturbationLine, f: &SmoothTestFunction, n: usize) -> Result<CMatrix> {
    let dim = line.dim();
    let mut acc = MatrixAccumulator::zeros(dim, dim);
    acc.add(&apply_function(&*line.decomposition_at(1.0)?, f));
    for k in 0..n {
        let dk = derivative_order_k(line, f, k, 0.0)?;
        acc.add_scaled(&dk, Complex64::new(-1.0 / factorial(k), 0.0));
    }
    Ok(acc.value())
}

/// `(1/(n-1)!) ∫_0^1 (1 - t)^{n-1} d^n/dt^n f(H_t) dt` by Gauss–Legendre
/// with `order` nodes.
pub fn remainder_integral(line: &PerturbationLine, f: &SmoothTestFunction, n: usize, order: usize) -> Result<CMatrix> {
    if n == 0 {
        return Ok(apply_function(&*line.decomposition_at(1.0)?, f));
    }
    let dim = line.dim();
    let gl = GaussLegendre::new(order.max(1));
    let nodes: Vec<(f64, f64)> = gl.on_interval(0.0, 1.0).collect();
    let terms: Vec<Result<(CMatrix, f64)>> = nodes
        .par_iter()
        .map(|&(t, w)| Ok((derivative_order_k(line, f, n, t)?, w * (1.0 - t).powi(n as i32 - 1))))
        .collect();
    let mut acc = MatrixAccumulator::zeros(dim, dim);
    for term in terms {
        let (m, w) = term?;
        acc.add_scaled(&m, Complex64::new(w / factorial(n - 1), 0.0));
    }
    Ok(acc.value())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{frobenius, trace};
    use nalgebra::DMatrix;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(rng: &mut ChaCha8Rng, dim: usize, scale: f64) -> HermitianOperator {
        let a = DMatrix::from_fn(dim, dim, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
        HermitianOperator::new((&a + a.adjoint()).scale(0.5 * scale)).unwrap()
    }

    fn pair(seed: u64, dim: usize) -> PerturbationLine {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_hermitian(&mut rng, dim, 1.0);
        let v = random_hermitian(&mut rng, dim, 0.3);
        PerturbationLine::new(h, v).unwrap()
    }

    #[test]
    fn polynomial_derivatives() {
        let line = pair(1, 3);
        let (h, v) = (line.h().matrix().clone(), line.v().matrix().clone());
        let d1 = derivative_order_k(&line, &SmoothTestFunction::monomial(2), 1, 0.0).unwrap();
        assert!(frobenius(&(d1 - (&h * &v + &v * &h))) < 1e-12);

        let d2 = derivative_order_k(&line, &SmoothTestFunction::monomial(3), 2, 0.0).unwrap();
        let expect = (&h * &v * &v + &v * &h * &v + &v * &v * &h) * Complex64::new(2.0, 0.0);
        assert!(frobenius(&(d2 - expect)) < 1e-12);

        let zero = PerturbationLine::new(line.h().clone(), HermitianOperator::zeros(3)).unwrap();
        for k in 1..4 {
            let g = SmoothTestFunction::gaussian(0.1, 0.7);
            assert_eq!(frobenius(&derivative_order_k(&zero, &g, k, 0.0).unwrap()), 0.0);
        }
    }

    #[test]
    fn remainder_examples() {
        let line = pair(2, 3);
        let (h, v) = (line.h().matrix().clone(), line.v().matrix().clone());
        let sq = SmoothTestFunction::monomial(2);
        let r1 = remainder_direct(&line, &sq, 1).unwrap();
        assert!(frobenius(&(r1 - (&h * &v + &v * &h + &v * &v))) < 1e-12);
        let r2 = remainder_direct(&line, &sq, 2).unwrap();
        assert!(frobenius(&(&r2 - &v * &v)) < 1e-12);
        let r2i = remainder_integral(&line, &sq, 2, 3).unwrap();
        assert!(frobenius(&(r2i - &v * &v)) < 1e-12);

        let cube = SmoothTestFunction::monomial(3);
        let r = remainder_direct(&line, &cube, 2).unwrap();
        let expect = &h * &v * &v + &v * &h * &v + &v * &v * &h + &v * &v * &v;
        assert!(frobenius(&(r - expect)) < 1e-12);
    }

    #[test]
    fn remainder_routes_agree() {
        let p = SmoothTestFunction::polynomial(vec![0.3, -1.0, 0.5, 0.2, -0.1, 0.05]);
        let line = pair(3, 4);
        for n in 1..=4 {
            let a = remainder_direct(&line, &p, n).unwrap();
            let b = remainder_integral(&line, &p, n, 8).unwrap();
            assert!(frobenius(&(a - b)) < 1e-11, "n={n}");
        }
        let g = SmoothTestFunction::gaussian(0.2, 0.8);
        let a = remainder_direct(&line, &g, 3).unwrap();
        let b = remainder_integral(&line, &g, 3, DEFAULT_REMAINDER_ORDER).unwrap();
        assert!(frobenius(&(a - b)) < 1e-9);
    }

    #[test]
    fn finite_differences_converge() {
        let line = pair(4, 4);
        let g = SmoothTestFunction::gaussian(-0.1, 0.9);
        let h = default_fd_step(line.v());
        for k in 1..=3 {
            let exact = derivative_order_k(&line, &g, k, 0.2).unwrap();
            let e1 = frobenius(&(derivative_finite_difference(&line, &g, k, 0.2, 1e-2).unwrap() - &exact));
            let e2 = frobenius(&(derivative_finite_difference(&line, &g, k, 0.2, 5e-3).unwrap() - &exact));
            let ratio = e1 / e2;
            assert!((3.5..4.5).contains(&ratio), "k={k}: ratio {ratio}");
            let fd = derivative_finite_difference(&line, &g, k, 0.2, 1e-3).unwrap();
            assert!(frobenius(&(fd - &exact)) < 1e-5, "k={k}");
            if k < 3 {
                let fd = derivative_finite_difference(&line, &g, k, 0.2, h).unwrap();
                assert!(frobenius(&(fd - exact)) < 1e-6, "k={k}");
            }
        }
        let sq = SmoothTestFunction::monomial(2);
        let exact = derivative_order_k(&line, &sq, 1, 0.0).unwrap();
        let fd = derivative_finite_difference(&line, &sq, 1, 0.0, 0.1).unwrap();
        assert!(frobenius(&(fd - exact)) < 1e-12);
    }

    #[test]
    fn first_order_trace_identity() {
        let line = pair(5, 5);
        let g = SmoothTestFunction::gaussian(0.3, 0.6);
        let d1 = derivative_order_k(&line, &g, 1, 0.4).unwrap();
        let d = line.decomposition_at(0.4).unwrap();
        let fp = d.apply(|x| g.derivative(1, x).unwrap());
        let rhs = trace(&(fp * line.v().matrix()));
        assert!((trace(&d1) - rhs).norm() < 1e-10);
    }

    #[test]
    fn cache_and_invalidate() {
        let line = pair(6, 2);
        line.decomposition_at(0.5).unwrap();
        line.decomposition_at(0.5).unwrap();
        line.decomposition_at(0.25).unwrap();
        assert_eq!(line.cached_points(), 2);
        line.invalidate();
        assert_eq!(line.cached_points(), 0);
    }

    #[test]
    fn trace_derivative_is_homogeneous() {
        let line = pair(7, 3);
        let g = SmoothTestFunction::gaussian(0.0, 1.0);
        let base = trace(&derivative_order_k(&line, &g, 3, 0.0).unwrap());
        for s in [0.25, 0.5, 2.0] {
            let scaled = PerturbationLine::new(line.h().clone(), line.v().scaled(s)).unwrap();
            let t = trace(&derivative_order_k(&scaled, &g, 3, 0.0).unwrap());
            assert!((t - base * s.powi(3)).norm() <= 1e-12 * base.norm().max(1.0));
        }
    }
}
