//! Polynomial integral momenta `φ_{n,h,p}` and the splitting identities that
//! reduce them to lower-dimensional integrals.

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::functions::SmoothTestFunction;
use crate::polynomial::MultivariatePolynomial;
use crate::quadrature::{GaussLegendre, SimplexQuadratureRule};
use crate::summation::ComplexSum;

/// The triple `(n, h, p)`; `h_derivative` selects `h^{(d)}` as the
/// integrand so that `f^{[n]}` is the momentum with `h = f`, `d = n`.
#[derive(Debug, Clone)]
pub struct MomentumSpec {
    pub n: usize,
    pub h: SmoothTestFunction,
    pub h_derivative: u32,
    /// Polynomial in `(s_1, …, s_n)`.
    pub p: MultivariatePolynomial,
}

impl MomentumSpec {
    pub fn new(n: usize, h: SmoothTestFunction, p: MultivariatePolynomial) -> Result<Self> {
        if p.nvars() != n {
            return Err(SsfError::DimensionMismatch {
                expected: n,
                found: p.nvars(),
            });
        }
        Ok(Self {
            n,
            h,
            h_derivative: 0,
            p,
        })
    }

    /// `f^{[n]} = φ_{n, f^{(n)}, 1}`.
    pub fn divided_difference(f: SmoothTestFunction, n: usize) -> Self {
        Self {
            n,
            h: f,
            h_derivative: n as u32,
            p: MultivariatePolynomial::one(n),
        }
    }

    fn h(&self, x: f64) -> Complex64 {
        self.h.derivative_unchecked(self.h_derivative, x)
    }
}

/// `∫_{S_n} p(s̃) h(Σ s_j λ_j) dσ_n` by the given simplex rule.
pub fn momentum_phi(spec: &MomentumSpec, lambda: &[f64], rule: &SimplexQuadratureRule) -> Result<Complex64> {
    if lambda.len() != spec.n + 1 {
        return Err(SsfError::DimensionMismatch {
            expected: spec.n + 1,
            found: lambda.len(),
        });
    }
    if rule.dim() != spec.n {
        return Err(SsfError::DimensionMismatch {
            expected: spec.n,
            found: rule.dim(),
        });
    }
    if spec.h_derivative > spec.h.max_derivative_order {
        return Err(SsfError::invalid("derivative order exceeds the function's declared order"));
    }
    let mut acc = ComplexSum::new();
    for (s, w) in rule.iter() {
        let x: f64 = s.iter().zip(lambda).map(|(a, b)| a * b).sum();
        acc.add(spec.h(x) * (w * spec.p.eval(&s[1..])));
    }
    Ok(acc.value())
}

/// `ψ_{n,h,q}(ζ, μ̃) = ∫_{S_n} q(ζ, s̃) h(Σ s_j μ_j) dσ_n`, `q` a polynomial
/// in `(ζ, s_1, …, s_n)`.  Defined for every real `ζ`.
pub fn psi(h: &SmoothTestFunction, q: &MultivariatePolynomial, zeta: f64, mu: &[f64], rule: &SimplexQuadratureRule) -> Result<Complex64> {
    let n = mu.len().checked_sub(1).ok_or_else(|| SsfError::invalid("empty argument tuple"))?;
    if q.nvars() != n + 1 || rule.dim() != n {
        return Err(SsfError::DimensionMismatch {
            expected: n + 1,
            found: q.nvars(),
        });
    }
    let mut arg = vec![zeta; n + 1];
    let mut acc = ComplexSum::new();
    for (s, w) in rule.iter() {
        arg[1..].copy_from_slice(&s[1..]);
        let x: f64 = s.iter().zip(mu).map(|(a, b)| a * b).sum();
        acc.add(h.value(x) * (w * q.eval(&arg)));
    }
    Ok(acc.value())
}

/// Composite Gauss–Legendre rule for smooth one-dimensional integrands.
struct LineRule {
    gl: GaussLegendre,
}

impl LineRule {
    fn new() -> Self {
        Self { gl: GaussLegendre::new(24) }
    }

    /// `∫_a^b f`, split into panels on which the argument of `h` moves by at
    /// most `reach`.
    fn integrate<F: FnMut(f64) -> Complex64>(&self, a: f64, b: f64, speed: f64, reach: f64, mut f: F) -> Complex64 {
        if a == b {
            return Complex64::new(0.0, 0.0);
        }
        let travel = (b - a).abs() * speed;
        let panels = if reach.is_finite() && reach > 0.0 {
            ((travel / reach).ceil() as usize).clamp(1, 4096)
        } else {
            1
        };
        let width = (b - a) / panels as f64;
        let mut acc = ComplexSum::new();
        for i in 0..panels {
            let lo = a + width * i as f64;
            for (x, w) in self.gl.on_interval(lo, lo + width) {
                acc.add(f(x) * w);
            }
        }
        acc.value()
    }
}

/// `φ_{m,h}(λ, μ) = ∫_0^1 t^{m-1} h(λ + (μ - λ)t) dt`.
pub fn phi_m(h: &SmoothTestFunction, m: u32, lambda: f64, mu: f64) -> Complex64 {
    if m == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let rule = LineRule::new();
    rule.integrate(0.0, 1.0, (mu - lambda).abs(), 0.5 * h.natural_scale(), |t| {
        h.value(lambda + (mu - lambda) * t) * t.powi(m as i32 - 1)
    })
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn check_ordered(lambda: f64, xi: f64, mu: f64) -> Result<()> {
    if lambda == mu {
        return Err(SsfError::invalid("λ and μ must differ"));
    }
    if !(lambda <= xi && xi <= mu) {
        return Err(SsfError::invalid("expected λ ≤ ξ ≤ μ"));
    }
    Ok(())
}

/// Both sides of the three-point splitting of `φ_{m,h}(λ, μ)` at an
/// intermediate point `ξ`.
pub fn phi_mrep_sides(h: &SmoothTestFunction, m: u32, lambda: f64, xi: f64, mu: f64) -> Result<(Complex64, Complex64)> {
    check_ordered(lambda, xi, mu)?;
    if m == 0 {
        return Err(SsfError::invalid("m must be at least 1"));
    }
    let zeta = (lambda - xi) / (lambda - mu);
    let omega = (xi - mu) / (lambda - mu);
    let lhs = phi_m(h, m, lambda, mu);
    let mut rhs = ComplexSum::new();
    rhs.add(phi_m(h, m, lambda, xi) * zeta.powi(m as i32));
    rhs.add(phi_m(h, m, xi, mu) * omega.powi(m as i32));
    for k in 1..m {
        let c = binomial(m - 1, k - 1) * zeta.powi((m - k) as i32) * omega.powi(k as i32);
        rhs.add(phi_m(h, k, xi, mu) * c);
    }
    Ok((lhs, rhs.value()))
}

pub fn check_phi_mrep(h: &SmoothTestFunction, m: u32, lambda: f64, xi: f64, mu: f64) -> Result<f64> {
    let (l, r) = phi_mrep_sides(h, m, lambda, xi, mu)?;
    Ok((l - r).norm())
}

/// Polynomials `q(ζ, κ, θ)` and `r(ζ, κ, σ)` that turn
/// `∫_0^κ t^m ∫_0^t s^k h(κξ + (λ-ξ)t + (μ-λ)s) ds dt` into
/// `∫_0^κ q h(κξ + (λ-ξ)θ) dθ + ∫_0^κ r h(κξ + (μ-ξ)σ) dσ`.
///
/// The first integral collects the points with `u` between `κλ` and
/// `κξ`, where `s = ζ(t - θ)` and `t ≥ θ`; the second those between `κξ`
/// and `κμ`, where `s = (1 - ζ)σ + ζt` and `t ≥ σ`.
pub fn integral_rel_polys(m: u32, k: u32) -> (MultivariatePolynomial, MultivariatePolynomial) {
    // working variables: ζ, κ, θ (or σ), t, s
    let p = MultivariatePolynomial::monomial(&[0, 0, 0, m, k], 1.0);
    let (q, r) = split_two_dimensional(&p, 5, 0, 1, 2, 3, 4);
    (q.project(&[0, 1, 2]).expect("t and s integrated out"), r.project(&[0, 1, 2]).expect("t and s integrated out"))
}

/// Shared core: given `P(t, s, …)` in `nvars` working variables, returns
/// `ζ ∫_θ^κ P(t, ζ(t-θ)) dt` and `(1-ζ) ∫_θ^κ P(t, (1-ζ)θ + ζt) dt`, where
/// `κ` and `θ` are expressions given by variable indices.
fn split_two_dimensional(
    p: &MultivariatePolynomial,
    nvars: usize,
    zeta: usize,
    kappa: usize,
    theta: usize,
    t: usize,
    s: usize,
) -> (MultivariatePolynomial, MultivariatePolynomial) {
    let z = MultivariatePolynomial::var(nvars, zeta);
    let k = MultivariatePolynomial::var(nvars, kappa);
    let th = MultivariatePolynomial::var(nvars, theta);
    let tv = MultivariatePolynomial::var(nvars, t);
    let one = MultivariatePolynomial::one(nvars);
    let one_minus_z = &one - &z;
    split_with(p, &z, &one_minus_z, &k, &th, &tv, t, s)
}

#[allow(clippy::too_many_arguments)]
fn split_with(
    p: &MultivariatePolynomial,
    z: &MultivariatePolynomial,
    one_minus_z: &MultivariatePolynomial,
    kappa: &MultivariatePolynomial,
    theta: &MultivariatePolynomial,
    tv: &MultivariatePolynomial,
    t: usize,
    s: usize,
) -> (MultivariatePolynomial, MultivariatePolynomial) {
    let s_first = z * &(tv - theta);
    let q_inner = p.substitute(s, &s_first).expect("same variable count");
    let q = z * &q_inner.integrate(t, theta, kappa).expect("same variable count");

    let s_second = &(one_minus_z * theta) + &(z * tv);
    let r_inner = p.substitute(s, &s_second).expect("same variable count");
    let r = one_minus_z * &r_inner.integrate(t, theta, kappa).expect("same variable count");
    (q, r)
}

/// Both sides of the two-dimensional splitting for `t^m s^k`.
#[allow(clippy::too_many_arguments)]
pub fn integral_rel_sides(
    h: &SmoothTestFunction,
    m: u32,
    k: u32,
    kappa: f64,
    lambda: f64,
    xi: f64,
    mu: f64,
) -> Result<(Complex64, Complex64)> {
    check_ordered(lambda, xi, mu)?;
    if kappa <= 0.0 || !kappa.is_finite() {
        return Err(SsfError::invalid("κ must be positive"));
    }
    let zeta = (lambda - xi) / (lambda - mu);
    let reach = 0.5 * h.natural_scale();
    let rule = LineRule::new();
    let arg = |t: f64, s: f64| kappa * xi + (lambda - xi) * t + (mu - lambda) * s;

    let lhs = rule.integrate(0.0, kappa, (lambda - xi).abs() + (mu - lambda).abs(), reach, |t| {
        let inner = rule.integrate(0.0, t, (mu - lambda).abs(), reach, |s| h.value(arg(t, s)) * s.powi(k as i32));
        inner * t.powi(m as i32)
    });

    let (q, r) = integral_rel_polys(m, k);
    let first = rule.integrate(0.0, kappa, (lambda - xi).abs(), reach, |th| {
        h.value(kappa * xi + (lambda - xi) * th) * q.eval(&[zeta, kappa, th])
    });
    let second = rule.integrate(0.0, kappa, (mu - xi).abs(), reach, |sg| {
        h.value(kappa * xi + (mu - xi) * sg) * r.eval(&[zeta, kappa, sg])
    });
    Ok((lhs, first + second))
}

#[allow(clippy::too_many_arguments)]
pub fn check_integral_rel(h: &SmoothTestFunction, m: u32, k: u32, kappa: f64, lambda: f64, xi: f64, mu: f64) -> Result<f64> {
    let (l, r) = integral_rel_sides(h, m, k, kappa, lambda, xi, mu)?;
    Ok((l - r).norm())
}

/// Polynomials `q, r` in `(ζ, s_1, …, s_{n-1})` with
/// `φ_{n,h,p}(λ_0, λ_1, λ_2, λ̃) = ψ_{n-1,h,q}(ζ, λ_0, λ_2, λ̃) + ψ_{n-1,h,r}(ζ, λ_1, λ_2, λ̃)`
/// and `ζ = (λ_0 - λ_2)/(λ_0 - λ_1)`.
///
/// For fixed `s_3, …, s_n` the inner integral over `(s_0, s_1, s_2)` is
/// rewritten with `t = s_0 + s_1`, `s = s_1` and split as in
/// [`integral_rel_polys`]; the surviving coordinate is the weight on
/// `λ_2`, i.e. `κ - θ`.
pub fn decomp_ii_polys(p: &MultivariatePolynomial) -> Result<(MultivariatePolynomial, MultivariatePolynomial)> {
    let n = p.nvars();
    if n < 2 {
        return Err(SsfError::invalid("splitting needs n >= 2"));
    }
    // working variables: ζ, u_1..u_{n-1}, t, s
    let nv = n + 2;
    let var = |i: usize| MultivariatePolynomial::var(nv, i);
    let one = MultivariatePolynomial::one(nv);
    let (iz, it, is) = (0, n, n + 1);
    let mut kappa = one.clone();
    for j in 2..n {
        kappa = &kappa - &var(j);
    }
    let theta = &kappa - &var(1);

    // s_1 = s, s_2 = κ - t, s_j = u_{j-1} for j >= 3
    let mut subs = vec![var(is), &kappa - &var(it)];
    subs.extend((3..=n).map(|j| var(j - 1)));
    let p2 = p.compose(&subs)?;

    let z = var(iz);
    let one_minus_z = &one - &z;
    let (q, r) = split_with(&p2, &z, &one_minus_z, &kappa, &theta, &var(it), it, is);
    let keep: Vec<usize> = (0..n).collect();
    Ok((q.project(&keep)?, r.project(&keep)?))
}

/// Both sides of the higher-dimensional splitting, each evaluated with a
/// simplex rule of the given degree plus the polynomial degree.
pub fn decomp_ii_sides(h: &SmoothTestFunction, p: &MultivariatePolynomial, lambda: &[f64], degree: usize) -> Result<(Complex64, Complex64)> {
    let n = p.nvars();
    if lambda.len() != n + 1 {
        return Err(SsfError::DimensionMismatch {
            expected: n + 1,
            found: lambda.len(),
        });
    }
    let (l0, l1, l2) = (lambda[0], lambda[1], lambda[2]);
    if l0 == l1 {
        return Err(SsfError::invalid("λ_0 and λ_1 must differ"));
    }
    if !((l0 <= l2 && l2 <= l1) || (l1 <= l2 && l2 <= l0)) {
        return Err(SsfError::invalid("λ_2 must lie between λ_0 and λ_1"));
    }
    let spec = MomentumSpec::new(n, h.clone(), p.clone())?;
    let rule_n = SimplexQuadratureRule::new(n, degree + p.total_degree())?;
    let lhs = momentum_phi(&spec, lambda, &rule_n)?;

    let (q, r) = decomp_ii_polys(p)?;
    let zeta = (l0 - l2) / (l0 - l1);
    let deg = q.total_degree().max(r.total_degree());
    let rule = SimplexQuadratureRule::new(n - 1, degree + deg)?;
    let mut first = vec![l0, l2];
    first.extend_from_slice(&lambda[3..]);
    let mut second = vec![l1, l2];
    second.extend_from_slice(&lambda[3..]);
    let rhs = psi(h, &q, zeta, &first, &rule)? + psi(h, &r, zeta, &second, &rule)?;
    Ok((lhs, rhs))
}

pub fn check_decomp_ii(h: &SmoothTestFunction, p: &MultivariatePolynomial, lambda: &[f64], degree: usize) -> Result<f64> {
    let (l, r) = decomp_ii_sides(h, p, lambda, degree)?;
    Ok((l - r).norm())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::divdiff::{divided_difference, DEFAULT_NODE_TOL};
    use crate::functions::factorial;

    fn one() -> SmoothTestFunction {
        SmoothTestFunction::polynomial(vec![1.0])
    }

    #[test]
    fn momentum_examples() {
        let f = SmoothTestFunction::gaussian(0.3, 0.8);
        let nodes = [0.0, 0.4, 1.1];
        let spec = MomentumSpec::divided_difference(f.clone(), 2);
        let rule = SimplexQuadratureRule::new(2, 20).unwrap();
        let a = momentum_phi(&spec, &nodes, &rule).unwrap();
        let b = divided_difference(&f, &nodes, DEFAULT_NODE_TOL).unwrap();
        assert!((a - b).norm() < 1e-10);

        for n in 1..5 {
            let spec = MomentumSpec::new(n, one(), MultivariatePolynomial::one(n)).unwrap();
            let rule = SimplexQuadratureRule::new(n, 4).unwrap();
            let lam: Vec<f64> = (0..=n).map(|i| i as f64).collect();
            let v = momentum_phi(&spec, &lam, &rule).unwrap();
            assert!((v.re - 1.0 / factorial(n)).abs() < 1e-14);
        }

        // n = 1, p(s) = s^{m-1} is φ_{m,h}
        let m = 3;
        let spec = MomentumSpec::new(1, f.clone(), MultivariatePolynomial::monomial(&[m - 1], 1.0)).unwrap();
        let rule = SimplexQuadratureRule::new(1, 30).unwrap();
        let v = momentum_phi(&spec, &[0.2, 1.3], &rule).unwrap();
        assert!((v - phi_m(&f, m, 0.2, 1.3)).norm() < 1e-12);
    }

    #[test]
    fn momentum_converges_with_rule_degree() {
        let f = SmoothTestFunction::gaussian(0.0, 0.5);
        let nodes = [-1.0, 0.2, 0.9, 1.5];
        let exact = divided_difference(&f, &nodes, DEFAULT_NODE_TOL).unwrap();
        let spec = MomentumSpec::divided_difference(f, 3);
        let errs: Vec<f64> = [4, 8, 16, 24]
            .iter()
            .map(|&d| (momentum_phi(&spec, &nodes, &SimplexQuadratureRule::new(3, d).unwrap()).unwrap() - exact).norm())
            .collect();
        assert!(errs.windows(2).all(|w| w[1] <= w[0]), "{errs:?}");
        assert!(errs[3] < 1e-9);
    }

    #[test]
    fn phi_mrep_examples() {
        let g = SmoothTestFunction::gaussian(0.4, 0.6);
        assert!(check_phi_mrep(&g, 1, 0.0, 0.5, 1.0).unwrap() <= 1e-10);
        for m in 1..5 {
            assert!(check_phi_mrep(&g, m, 0.0, 0.0, 1.0).unwrap() <= 1e-10);
            let (l, _) = phi_mrep_sides(&one(), m, -0.3, 0.1, 0.8).unwrap();
            assert!((l.re - 1.0 / m as f64).abs() < 1e-12);
            assert!(check_phi_mrep(&one(), m, -0.3, 0.1, 0.8).unwrap() <= 1e-12);
        }
        assert!(check_phi_mrep(&g, 2, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn integral_rel_examples() {
        let (l, _) = integral_rel_sides(&one(), 0, 0, 1.0, 0.0, 0.3, 1.0).unwrap();
        assert!((l.re - 0.5).abs() < 1e-14);
        assert!(check_integral_rel(&one(), 0, 0, 1.0, 0.0, 0.3, 1.0).unwrap() <= 1e-12);
        let g = SmoothTestFunction::gaussian(0.2, 0.7);
        assert!(check_integral_rel(&g, 1, 1, 1.0, 0.0, 0.3, 1.0).unwrap() <= 1e-9);
        assert!(check_integral_rel(&g, 1, 1, 2.0, 0.0, 0.3, 1.0).unwrap() <= 1e-9);
        assert!(check_integral_rel(&g, 3, 2, 1.5, -0.4, 0.6, 0.9).unwrap() <= 1e-9);
        assert!(check_integral_rel(&g, 0, 0, 1.0, 1.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn integral_rel_polys_for_constants() {
        // m = k = 0: q = ζ(κ - θ), r = (1 - ζ)(κ - σ)
        let (q, r) = integral_rel_polys(0, 0);
        let (z, k, x) = (0.3, 1.7, 0.4);
        assert!((q.eval(&[z, k, x]) - z * (k - x)).abs() < 1e-15);
        assert!((r.eval(&[z, k, x]) - (1.0 - z) * (k - x)).abs() < 1e-15);
    }

    #[test]
    fn decomp_ii_examples() {
        let p1 = MultivariatePolynomial::one(2);
        let (l, _) = decomp_ii_sides(&one(), &p1, &[0.0, 1.0, 0.4], 12).unwrap();
        assert!((l.re - 0.5).abs() < 1e-14);
        assert!(check_decomp_ii(&one(), &p1, &[0.0, 1.0, 0.4], 12).unwrap() <= 1e-10);
        let g = SmoothTestFunction::gaussian(0.5, 0.8);
        assert!(check_decomp_ii(&g, &p1, &[0.0, 1.0, 0.4], 12).unwrap() <= 1e-8);
        let s1 = MultivariatePolynomial::var(3, 0);
        assert!(check_decomp_ii(&g, &s1, &[0.0, 1.0, 0.4, 0.7], 12).unwrap() <= 1e-7);
        let p4 = &MultivariatePolynomial::monomial(&[1, 0, 2, 1], 2.0) + &MultivariatePolynomial::var(4, 1);
        assert!(check_decomp_ii(&g, &p4, &[0.1, 0.9, 0.3, -0.2, 0.5], 12).unwrap() <= 1e-7);
        assert!(check_decomp_ii(&g, &p1, &[0.5, 0.5, 0.5], 12).is_err());
    }

    #[test]
    fn psi_accepts_any_zeta() {
        let q = MultivariatePolynomial::var(2, 0);
        let rule = SimplexQuadratureRule::new(1, 4).unwrap();
        let v = psi(&one(), &q, -2.5, &[0.0, 1.0], &rule).unwrap();
        assert!((v.re + 2.5).abs() < 1e-14);
    }
}
