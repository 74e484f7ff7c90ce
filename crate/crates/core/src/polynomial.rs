//! Sparse multivariate polynomials with real coefficients.
//!
//! Used to build the polynomial weights that appear when simplex integrals
//! are split into lower-dimensional pieces, so the only operations needed
//! are ring arithmetic, substitution of polynomials for variables and
//! integration in one variable.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Result, SsfError};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MultivariatePolynomial {
    nvars: usize,
    terms: BTreeMap<Vec<u32>, f64>,
}

impl MultivariatePolynomial {
    pub fn zero(nvars: usize) -> Self {
        Self {
            nvars,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Self::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn one(nvars: usize) -> Self {
        Self::constant(nvars, 1.0)
    }

    /// The coordinate function `x_i`.
    pub fn var(nvars: usize, i: usize) -> Self {
        assert!(i < nvars, "variable index {i} out of range for {nvars} variables");
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Self::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    /// `c · Π x_i^{exps[i]}`.
    pub fn monomial(exps: &[u32], c: f64) -> Self {
        let mut p = Self::zero(exps.len());
        p.add_term(exps.to_vec(), c);
        p
    }

    pub fn from_terms(nvars: usize, terms: impl IntoIterator<Item = (Vec<u32>, f64)>) -> Result<Self> {
        let mut p = Self::zero(nvars);
        for (e, c) in terms {
            if e.len() != nvars {
                return Err(SsfError::DimensionMismatch {
                    expected: nvars,
                    found: e.len(),
                });
            }
            p.add_term(e, c);
        }
        Ok(p)
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(e, &c)| (e.as_slice(), c))
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn total_degree(&self) -> usize {
        self.terms
            .keys()
            .map(|e| e.iter().map(|&a| a as usize).sum())
            .max()
            .unwrap_or(0)
    }

    /// Degree in one variable.
    pub fn degree_in(&self, var: usize) -> u32 {
        self.terms.keys().map(|e| e[var]).max().unwrap_or(0)
    }

    fn add_term(&mut self, e: Vec<u32>, c: f64) {
        if c == 0.0 {
            return;
        }
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.nvars, "argument length");
        crate::summation::sum(self.terms.iter().map(|(e, &c)| {
            c * e
                .iter()
                .zip(x)
                .map(|(&a, &xi)| xi.powi(a as i32))
                .product::<f64>()
        }))
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn pow(&self, k: u32) -> Self {
        let mut acc = Self::one(self.nvars);
        for _ in 0..k {
            acc = &acc * self;
        }
        acc
    }

    /// Replaces every variable `x_i` by `subs[i]`; all substitutes must
    /// share one variable count, which becomes the result's.
    pub fn compose(&self, subs: &[MultivariatePolynomial]) -> Result<Self> {
        if subs.len() != self.nvars {
            return Err(SsfError::DimensionMismatch {
                expected: self.nvars,
                found: subs.len(),
            });
        }
        let target = subs.first().map(|s| s.nvars).unwrap_or(0);
        if subs.iter().any(|s| s.nvars != target) {
            return Err(SsfError::invalid("substitutes must share a variable count"));
        }
        // cache powers of each substitute
        let mut powers: Vec<Vec<Self>> = subs.iter().map(|s| vec![Self::one(s.nvars), s.clone()]).collect();
        let mut out = Self::zero(target);
        for (e, &c) in &self.terms {
            let mut term = Self::constant(target, c);
            for (i, &a) in e.iter().enumerate() {
                while powers[i].len() <= a as usize {
                    let next = powers[i].last().unwrap() * &subs[i];
                    powers[i].push(next);
                }
                if a > 0 {
                    term = &term * &powers[i][a as usize];
                }
            }
            out = &out + &term;
        }
        Ok(out)
    }

    /// Antiderivative in `var` vanishing at `x_var = 0`.
    pub fn antiderivative(&self, var: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            let mut e2 = e.clone();
            e2[var] += 1;
            let d = e2[var] as f64;
            p.add_term(e2, c / d);
        }
        p
    }

    pub fn derivative(&self, var: usize) -> Self {
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if e[var] == 0 {
                continue;
            }
            let mut e2 = e.clone();
            e2[var] -= 1;
            p.add_term(e2, c * e[var] as f64);
        }
        p
    }

    /// Substitutes `x_var := value` (a polynomial in the same variables).
    pub fn substitute(&self, var: usize, value: &MultivariatePolynomial) -> Result<Self> {
        let subs: Vec<Self> = (0..self.nvars)
            .map(|i| if i == var { value.clone() } else { Self::var(self.nvars, i) })
            .collect();
        self.compose(&subs)
    }

    /// `∫_{lower}^{upper} p dx_var`, bounds being polynomials in the same
    /// variables.
    pub fn integrate(&self, var: usize, lower: &Self, upper: &Self) -> Result<Self> {
        let anti = self.antiderivative(var);
        Ok(&anti.substitute(var, upper)? - &anti.substitute(var, lower)?)
    }

    /// Reorders/drops variables: result variable `k` is old variable
    /// `keep[k]`.  Fails if a dropped variable still occurs.
    pub fn project(&self, keep: &[usize]) -> Result<Self> {
        let mut p = Self::zero(keep.len());
        for (e, &c) in &self.terms {
            for (i, &a) in e.iter().enumerate() {
                if a > 0 && !keep.contains(&i) {
                    return Err(SsfError::invalid(format!("variable {i} still present")));
                }
            }
            p.add_term(keep.iter().map(|&i| e[i]).collect(), c);
        }
        Ok(p)
    }

    /// Embeds into a larger variable set: old variable `i` becomes
    /// `positions[i]`.
    pub fn embed(&self, nvars: usize, positions: &[usize]) -> Self {
        let mut p = Self::zero(nvars);
        for (e, &c) in &self.terms {
            let mut e2 = vec![0; nvars];
            for (i, &a) in e.iter().enumerate() {
                e2[positions[i]] += a;
            }
            p.add_term(e2, c);
        }
        p
    }

    /// Drops coefficients below `tol · max|coef|`.
    pub fn prune(&self, tol: f64) -> Self {
        let m = self.terms.values().fold(0.0f64, |a, &c| a.max(c.abs()));
        let mut p = Self::zero(self.nvars);
        for (e, &c) in &self.terms {
            if c.abs() > tol * m {
                p.add_term(e.clone(), c);
            }
        }
        p
    }
}

impl<'a> Add<&'a MultivariatePolynomial> for &'a MultivariatePolynomial {
    type Output = MultivariatePolynomial;
    fn add(self, rhs: &MultivariatePolynomial) -> MultivariatePolynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut p = self.clone();
        for (e, &c) in &rhs.terms {
            p.add_term(e.clone(), c);
        }
        p
    }
}

impl<'a> Sub<&'a MultivariatePolynomial> for &'a MultivariatePolynomial {
    type Output = MultivariatePolynomial;
    fn sub(self, rhs: &MultivariatePolynomial) -> MultivariatePolynomial {
        self + &rhs.scale(-1.0)
    }
}

impl<'a> Mul<&'a MultivariatePolynomial> for &'a MultivariatePolynomial {
    type Output = MultivariatePolynomial;
    fn mul(self, rhs: &MultivariatePolynomial) -> MultivariatePolynomial {
        assert_eq!(self.nvars, rhs.nvars, "variable count mismatch");
        let mut p = MultivariatePolynomial::zero(self.nvars);
        for (e1, &c1) in &self.terms {
            for (e2, &c2) in &rhs.terms {
                let e: Vec<u32> = e1.iter().zip(e2).map(|(a, b)| a + b).collect();
                p.add_term(e, c1 * c2);
            }
        }
        p
    }
}

impl Neg for &MultivariatePolynomial {
    type Output = MultivariatePolynomial;
    fn neg(self) -> MultivariatePolynomial {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_eval() {
        let x = MultivariatePolynomial::var(2, 0);
        let y = MultivariatePolynomial::var(2, 1);
        let p = &(&x + &y).pow(2) - &(&x * &y).scale(2.0); // x² + y²
        assert_eq!(p.eval(&[3.0, 4.0]), 25.0);
        assert_eq!(p.total_degree(), 2);
        let zero = &p - &p;
        assert!(zero.is_zero());
    }

    #[test]
    fn integrate_between_polynomial_bounds() {
        // ∫_y^1 x dx = (1 - y²)/2
        let x = MultivariatePolynomial::var(2, 0);
        let y = MultivariatePolynomial::var(2, 1);
        let one = MultivariatePolynomial::one(2);
        let r = x.integrate(0, &y, &one).unwrap();
        assert_eq!(r.degree_in(0), 0);
        for &v in &[0.0, 0.3, -2.0] {
            assert!((r.eval(&[123.0, v]) - (1.0 - v * v) / 2.0).abs() < 1e-15);
        }
        let projected = r.project(&[1]).unwrap();
        assert!((projected.eval(&[0.5]) - 0.375).abs() < 1e-15);
        assert!(x.project(&[1]).is_err());
    }

    #[test]
    fn compose_changes_variable_count() {
        // p(a,b) = a b² with a = u + 1, b = u - v
        let p = MultivariatePolynomial::monomial(&[1, 2], 1.0);
        let u = MultivariatePolynomial::var(2, 0);
        let v = MultivariatePolynomial::var(2, 1);
        let one = MultivariatePolynomial::one(2);
        let q = p.compose(&[&u + &one, &u - &v]).unwrap();
        let (a, b) = (0.7, -1.1);
        assert!((q.eval(&[a, b]) - (a + 1.0) * (a - b) * (a - b)).abs() < 1e-14);
    }
}
