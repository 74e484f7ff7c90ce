//! Piecewise polynomials on a strictly increasing breakpoint list.
//!
//! Piece `i` lives on `[b_i, b_{i+1}]` and stores ascending coefficients in
//! the local variable `x = t - b_i`.  The function is zero outside
//! `[b_0, b_K]`.  Pieces on adjacent intervals need not agree at the shared
//! breakpoint, so jumps are representable; [`eval`](PiecewisePolynomial::eval)
//! returns the left limit there and [`eval_right`](PiecewisePolynomial::eval_right)
//! the right limit.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SsfError};
use crate::quadrature::GaussLegendre;
use crate::summation::{self, ComplexSum, NeumaierSum};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PiecewisePolynomial {
    breakpoints: Vec<f64>,
    pieces: Vec<Vec<f64>>,
}

/// Horner evaluation of ascending coefficients.
pub fn horner(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

/// Coefficients of `p(x + delta)` given those of `p(x)`.
pub fn taylor_shift(c: &[f64], delta: f64) -> Vec<f64> {
    let mut a = c.to_vec();
    let n = a.len();
    if delta == 0.0 {
        return a;
    }
    for j in 0..n {
        for i in (j..n - 1).rev() {
            a[i] += delta * a[i + 1];
        }
    }
    a
}

fn add_coeffs(a: &[f64], b: &[f64], sb: f64) -> Vec<f64> {
    let n = a.len().max(b.len());
    (0..n)
        .map(|i| a.get(i).copied().unwrap_or(0.0) + sb * b.get(i).copied().unwrap_or(0.0))
        .collect()
}

fn trim(mut c: Vec<f64>) -> Vec<f64> {
    while c.len() > 1 && *c.last().unwrap() == 0.0 {
        c.pop();
    }
    c
}

impl PiecewisePolynomial {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn new(breakpoints: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if breakpoints.is_empty() && pieces.is_empty() {
            return Ok(Self::zero());
        }
        if breakpoints.len() != pieces.len() + 1 {
            return Err(SsfError::invalid(format!(
                "{} breakpoints need {} pieces, got {}",
                breakpoints.len(),
                breakpoints.len().saturating_sub(1),
                pieces.len()
            )));
        }
        if breakpoints.iter().any(|b| !b.is_finite()) || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(SsfError::invalid("breakpoints must be finite and strictly increasing"));
        }
        Ok(Self {
            breakpoints,
            pieces: pieces.into_iter().map(trim).collect(),
        })
    }

    /// Single polynomial (in `t - a`) on `[a, b]`.
    pub fn on_interval(a: f64, b: f64, coeffs: Vec<f64>) -> Result<Self> {
        Self::new(vec![a, b], vec![coeffs])
    }

    pub fn constant(a: f64, b: f64, c: f64) -> Result<Self> {
        Self::on_interval(a, b, vec![c])
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.breakpoints
    }

    pub fn pieces(&self) -> &[Vec<f64>] {
        &self.pieces
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| p.iter().all(|&c| c == 0.0))
    }

    pub fn support(&self) -> Option<(f64, f64)> {
        Some((*self.breakpoints.first()?, *self.breakpoints.last()?))
    }

    pub fn degree(&self) -> usize {
        self.pieces.iter().map(|p| p.len().saturating_sub(1)).max().unwrap_or(0)
    }

    /// Index `i` with `t ∈ (b_i, b_{i+1}]`.
    fn piece_left(&self, t: f64) -> Option<usize> {
        let k = self.breakpoints.len();
        if k < 2 || !(t > self.breakpoints[0]) || t > self.breakpoints[k - 1] {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b < t) - 1)
    }

    /// Index `i` with `t ∈ [b_i, b_{i+1})`.
    fn piece_right(&self, t: f64) -> Option<usize> {
        let k = self.breakpoints.len();
        if k < 2 || t < self.breakpoints[0] || !(t < self.breakpoints[k - 1]) {
            return None;
        }
        Some(self.breakpoints.partition_point(|&b| b <= t) - 1)
    }

    /// Value with the left-limit convention at breakpoints.
    pub fn eval(&self, t: f64) -> f64 {
        self.piece_left(t)
            .map(|i| horner(&self.pieces[i], t - self.breakpoints[i]))
            .unwrap_or(0.0)
    }

    /// Value with the right-limit convention at breakpoints.
    pub fn eval_right(&self, t: f64) -> f64 {
        self.piece_right(t)
            .map(|i| horner(&self.pieces[i], t - self.breakpoints[i]))
            .unwrap_or(0.0)
    }

    /// `(breakpoint, right limit − left limit)` for every nonzero jump.
    pub fn jumps(&self, tol: f64) -> Vec<(f64, f64)> {
        self.breakpoints
            .iter()
            .map(|&b| (b, self.eval_right(b) - self.eval(b)))
            .filter(|(_, j)| j.abs() > tol)
            .collect()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| p.iter().map(|c| c * s).collect())
                .collect(),
        }
    }

    /// Same function on a refined breakpoint set (must contain the
    /// current support's breakpoints and lie within or around them).
    pub fn refine(&self, grid: &[f64]) -> Self {
        let pieces = grid
            .windows(2)
            .map(|w| {
                let mid = 0.5 * (w[0] + w[1]);
                match self.piece_right(mid) {
                    Some(i) if mid > self.breakpoints[i] => {
                        taylor_shift(&self.pieces[i], w[0] - self.breakpoints[i])
                    }
                    _ => vec![0.0],
                }
            })
            .collect();
        Self {
            breakpoints: grid.to_vec(),
            pieces,
        }
    }

    /// `self + s · other` on the union of breakpoints.
    pub fn add_scaled(&self, other: &Self, s: f64) -> Self {
        if other.breakpoints.is_empty() {
            return self.clone();
        }
        if self.breakpoints.is_empty() {
            return other.scale(s);
        }
        let grid = merge_breakpoints(&self.breakpoints, &other.breakpoints);
        let a = self.refine(&grid);
        let b = other.refine(&grid);
        Self {
            breakpoints: grid,
            pieces: a
                .pieces
                .iter()
                .zip(&b.pieces)
                .map(|(p, q)| trim(add_coeffs(p, q, s)))
                .collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.add_scaled(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add_scaled(other, -1.0)
    }

    /// Sum of many functions, assembled in one pass over the union of their
    /// breakpoints with compensated coefficient accumulation.
    pub fn sum_scaled<'a>(items: impl IntoIterator<Item = (&'a PiecewisePolynomial, f64)>) -> Self {
        let items: Vec<(&PiecewisePolynomial, f64)> = items.into_iter().collect();
        let mut grid: Vec<f64> = items.iter().flat_map(|(p, _)| p.breakpoints.iter().copied()).collect();
        grid.sort_by(f64::total_cmp);
        grid.dedup();
        if grid.len() < 2 {
            return Self::zero();
        }
        let degree = items.iter().map(|(p, _)| p.degree()).max().unwrap_or(0);
        let mut acc: Vec<Vec<NeumaierSum>> = vec![vec![NeumaierSum::new(); degree + 1]; grid.len() - 1];
        for (p, s) in &items {
            if p.breakpoints.len() < 2 {
                continue;
            }
            let lo = grid.partition_point(|&g| g < p.breakpoints[0]);
            let hi = grid.partition_point(|&g| g < *p.breakpoints.last().unwrap());
            let mut piece = 0;
            for gi in lo..hi {
                while p.breakpoints[piece + 1] <= grid[gi] {
                    piece += 1;
                }
                let shifted = taylor_shift(&p.pieces[piece], grid[gi] - p.breakpoints[piece]);
                for (k, c) in shifted.iter().enumerate() {
                    acc[gi][k].add(s * c);
                }
            }
        }
        Self {
            breakpoints: grid,
            pieces: acc
                .into_iter()
                .map(|row| trim(row.iter().map(|x| x.value()).collect()))
                .collect(),
        }
    }

    /// Coefficient-level derivative on every piece.
    pub fn derivative(&self) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| {
                    if p.len() <= 1 {
                        vec![0.0]
                    } else {
                        p.iter().enumerate().skip(1).map(|(k, c)| k as f64 * c).collect()
                    }
                })
                .collect(),
        }
    }

    /// Running integral `F(t) = ∫_{b_0}^t p` on `[b_0, b_K]`, together with
    /// the total `F(b_K)`.  `F` is continuous; beyond `b_K` it equals the
    /// total, which the zero-outside representation does not carry.
    pub fn cumulative(&self) -> (Self, f64) {
        let mut offset = NeumaierSum::new();
        let mut pieces = Vec::with_capacity(self.pieces.len());
        for (i, p) in self.pieces.iter().enumerate() {
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            let mut anti = Vec::with_capacity(p.len() + 1);
            anti.push(offset.value());
            for (k, c) in p.iter().enumerate() {
                anti.push(c / (k as f64 + 1.0));
            }
            offset.add(horner(&anti[1..], h) * h);
            pieces.push(anti);
        }
        (
            Self {
                breakpoints: self.breakpoints.clone(),
                pieces,
            },
            offset.value(),
        )
    }

    /// Exact integral over the real line.
    pub fn integral(&self) -> f64 {
        summation::sum(self.pieces.iter().enumerate().map(|(i, p)| {
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            piece_integral(p, 0.0, h)
        }))
    }

    /// `∫ f(t) p(t) dt` with an `order`-point Gauss rule per sub-interval;
    /// pieces longer than `max_len` are split evenly.
    pub fn integrate_against<F>(&self, f: F, order: usize, max_len: f64) -> Complex64
    where
        F: Fn(f64) -> Complex64,
    {
        let gl = GaussLegendre::new(order);
        let mut acc = ComplexSum::new();
        for (i, p) in self.pieces.iter().enumerate() {
            let (a, b) = (self.breakpoints[i], self.breakpoints[i + 1]);
            let parts = if max_len.is_finite() && max_len > 0.0 {
                ((b - a) / max_len).ceil().max(1.0) as usize
            } else {
                1
            };
            let h = (b - a) / parts as f64;
            for k in 0..parts {
                let lo = a + k as f64 * h;
                let hi = if k + 1 == parts { b } else { lo + h };
                for (x, w) in gl.on_interval(lo, hi) {
                    acc.add(f(x) * (w * horner(p, x - a)));
                }
            }
        }
        acc.value()
    }

    /// Exact L1 norm; sign changes inside each piece are located by
    /// recursive root isolation.
    pub fn l1_norm(&self) -> f64 {
        summation::sum(self.pieces.iter().enumerate().map(|(i, p)| {
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            let mut cuts = vec![0.0];
            cuts.extend(real_roots_in(p, 0.0, h));
            cuts.push(h);
            summation::sum(cuts.windows(2).map(|w| piece_integral(p, w[0], w[1]).abs()))
        }))
    }

    /// `max |p|` sampled on breakpoints (both limits) and `per_piece`
    /// interior points of each piece.
    pub fn sup_norm_sampled(&self, per_piece: usize) -> f64 {
        let mut m = 0.0f64;
        for (i, p) in self.pieces.iter().enumerate() {
            let h = self.breakpoints[i + 1] - self.breakpoints[i];
            for k in 0..=per_piece + 1 {
                let x = h * k as f64 / (per_piece + 1) as f64;
                m = m.max(horner(p, x).abs());
            }
        }
        m
    }

    /// Drops pieces at either end that are identically zero.
    pub fn trim_zero_ends(&self) -> Self {
        let nonzero = |p: &Vec<f64>| p.iter().any(|&c| c != 0.0);
        let Some(first) = self.pieces.iter().position(nonzero) else {
            return Self::zero();
        };
        let last = self.pieces.iter().rposition(nonzero).unwrap();
        Self {
            breakpoints: self.breakpoints[first..=last + 1].to_vec(),
            pieces: self.pieces[first..=last].to_vec(),
        }
    }

    /// Sets coefficients with magnitude below `tol` to zero.
    pub fn chop(&self, tol: f64) -> Self {
        Self {
            breakpoints: self.breakpoints.clone(),
            pieces: self
                .pieces
                .iter()
                .map(|p| trim(p.iter().map(|&c| if c.abs() <= tol { 0.0 } else { c }).collect()))
                .collect(),
        }
    }
}

/// `∫_a^b p(x) dx` for local coefficients.
pub fn piece_integral(c: &[f64], a: f64, b: f64) -> f64 {
    let anti = |x: f64| {
        let mut acc = 0.0;
        for (k, &ck) in c.iter().enumerate().rev() {
            acc = acc * x + ck / (k as f64 + 1.0);
        }
        acc * x
    };
    anti(b) - anti(a)
}

/// Sorted union of two sorted lists, exact duplicates removed.
pub fn merge_breakpoints(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = a.iter().chain(b).copied().collect();
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

/// Real roots of a polynomial strictly inside `(a, b)`, ascending.
pub fn real_roots_in(c: &[f64], a: f64, b: f64) -> Vec<f64> {
    let c = trim(c.to_vec());
    if c.len() <= 1 {
        return Vec::new();
    }
    let deriv: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
    let mut cuts = vec![a];
    cuts.extend(real_roots_in(&deriv, a, b));
    cuts.push(b);
    let mut roots = Vec::new();
    for w in cuts.windows(2) {
        let (mut lo, mut hi) = (w[0], w[1]);
        let (mut flo, fhi) = (horner(&c, lo), horner(&c, hi));
        if flo == 0.0 || fhi == 0.0 || flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let fm = horner(&c, mid);
            if fm == 0.0 {
                lo = mid;
                hi = mid;
                break;
            }
            if fm.signum() == flo.signum() {
                lo = mid;
                flo = fm;
            } else {
                hi = mid;
            }
        }
        let r = 0.5 * (lo + hi);
        if r > a && r < b {
            roots.push(r);
        }
    }
    roots
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn hat() -> PiecewisePolynomial {
        PiecewisePolynomial::new(vec![0.0, 1.0, 2.0], vec![vec![0.0, 0.5], vec![0.5, -0.5]]).unwrap()
    }

    #[test]
    fn evaluation_conventions() {
        let step = PiecewisePolynomial::constant(0.0, 2.0, 1.0).unwrap();
        assert_eq!(step.eval(0.0), 0.0);
        assert_eq!(step.eval_right(0.0), 1.0);
        assert_eq!(step.eval(2.0), 1.0);
        assert_eq!(step.eval_right(2.0), 0.0);
        assert_eq!(step.eval(1.0), 1.0);
        assert_eq!(step.jumps(0.0), vec![(0.0, 1.0), (2.0, -1.0)]);
        let h = hat();
        assert!((h.eval(1.5) - 0.25).abs() < 1e-15);
        assert!((h.integral() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_breakpoints() {
        assert!(PiecewisePolynomial::new(vec![0.0, 0.0], vec![vec![1.0]]).is_err());
        assert!(PiecewisePolynomial::new(vec![0.0, 1.0], vec![]).is_err());
    }

    #[test]
    fn cumulative_of_hat() {
        let (f, total) = hat().cumulative();
        assert!((total - 0.5).abs() < 1e-15);
        assert!((f.eval(1.0) - 0.25).abs() < 1e-15);
        assert!((f.eval(2.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn l1_with_sign_change() {
        // t - 1 on [0, 3]: |.| integral = 1/2 + 2 = 2.5
        let p = PiecewisePolynomial::on_interval(0.0, 3.0, vec![-1.0, 1.0]).unwrap();
        assert!((p.l1_norm() - 2.5).abs() < 1e-14);
        // (x-0.5)(x-1.5) on [0,2]
        let q = PiecewisePolynomial::on_interval(0.0, 2.0, vec![0.75, -2.0, 1.0]).unwrap();
        // three lobes of area 1/6 each
        let exact = 0.5;
        assert!((q.l1_norm() - exact).abs() < 1e-13, "{} vs {}", q.l1_norm(), exact);
    }

    #[test]
    fn integrate_against_polynomial_is_exact() {
        let h = hat();
        let v = h.integrate_against(|t| Complex64::new(t * t, 0.0), 4, f64::INFINITY);
        // ∫ t² hat = ∫_0^1 t³/2 + ∫_1^2 t²(2-t)/2 = 1/8 + 11/24
        assert!((v.re - (1.0 / 8.0 + 11.0 / 24.0)).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn antiderivative_then_derivative_is_identity(
            coeffs in proptest::collection::vec(-5.0f64..5.0, 1..5),
            coeffs2 in proptest::collection::vec(-5.0f64..5.0, 1..5),
        ) {
            let p = PiecewisePolynomial::new(vec![-1.0, 0.5, 2.0], vec![coeffs.clone(), coeffs2.clone()]).unwrap();
            let (f, _) = p.cumulative();
            let d = f.derivative();
            for (a, b) in d.pieces().iter().zip(p.pieces()) {
                let n = a.len().max(b.len());
                for k in 0..n {
                    let x = a.get(k).copied().unwrap_or(0.0);
                    let y = b.get(k).copied().unwrap_or(0.0);
                    prop_assert!((x - y).abs() <= 1e-15 * y.abs().max(1.0));
                }
            }
        }

        #[test]
        fn l1_triangle_inequality(
            a in proptest::collection::vec(-3.0f64..3.0, 1..4),
            b in proptest::collection::vec(-3.0f64..3.0, 1..4),
            s in -1.0f64..1.0,
        ) {
            let p = PiecewisePolynomial::on_interval(0.0, 1.5, a).unwrap();
            let q = PiecewisePolynomial::on_interval(s, s + 2.0, b).unwrap();
            let sum = p.add(&q);
            prop_assert!(sum.l1_norm() <= p.l1_norm() + q.l1_norm() + 1e-12);
            let direct = PiecewisePolynomial::sum_scaled([(&p, 1.0), (&q, 1.0)]);
            for t in [0.1, 0.7, 1.2, s + 1.9] {
                prop_assert!((direct.eval(t) - sum.eval(t)).abs() < 1e-12);
            }
        }
    }
}
