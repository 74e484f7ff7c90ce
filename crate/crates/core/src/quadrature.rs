//! Gauss–Legendre rules and the iterated (collapsed-coordinate) rule on the
//! unit corner simplex.

use crate::error::{Result, SsfError};
use crate::functions::factorial;

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    /// `n`-point rule, exact for polynomials of degree `2n - 1`.
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let nf = n as f64;
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n
            let mut x = ((i as f64 + 0.75) / (nf + 0.5) * std::f64::consts::PI).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                    dp = legendre_with_derivative(n, x).1;
                    break;
                }
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Number of nodes needed to integrate degree `d` exactly.
    pub fn for_degree(d: usize) -> Self {
        Self::new(d / 2 + 1)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Nodes and weights mapped to `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (mid + half * x, half * w))
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, a: f64, b: f64, mut f: F) -> f64 {
        crate::summation::sum(self.on_interval(a, b).map(|(x, w)| w * f(x)))
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Quadrature on `R_n = {(s_1..s_n) : s_j ≥ 0, Σ s_j ≤ 1}`.
///
/// Each node stores the full barycentric tuple `(s_0, s_1, …, s_n)` with
/// `s_0 = 1 - Σ_{j≥1} s_j`.  The rule is built from the ordered variables
/// `1 ≥ t_1 ≥ t_2 ≥ … ≥ t_n ≥ 0` with `s_0 = t_n`, `s_j = t_{n-j} - t_{n-j+1}`
/// and `s_n = 1 - t_1`, each level mapped to `[0, t_{k-1}]` and integrated
/// with a Gauss–Legendre rule.
#[derive(Debug, Clone)]
pub struct SimplexQuadratureRule {
    dim: usize,
    degree: usize,
    points: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Exactness degree used when callers do not choose one.
pub const DEFAULT_SIMPLEX_DEGREE: usize = 12;

impl SimplexQuadratureRule {
    /// Rule exact for polynomials of total degree `degree` on `R_dim`.
    pub fn new(dim: usize, degree: usize) -> Result<Self> {
        if dim == 0 {
            return Ok(Self {
                dim,
                degree,
                points: vec![vec![1.0]],
                weights: vec![1.0],
            });
        }
        if dim > 8 {
            return Err(SsfError::invalid(format!("simplex dimension {dim} too large")));
        }
        // the collapsed Jacobian adds at most dim-1 to the per-level degree
        let per_level = (degree + dim) / 2 + 1;
        let gl = GaussLegendre::new(per_level);
        let unit: Vec<(f64, f64)> = gl.on_interval(0.0, 1.0).collect();

        let total = per_level.pow(dim as u32);
        let mut points = Vec::with_capacity(total);
        let mut weights = Vec::with_capacity(total);
        let mut idx = vec![0usize; dim];
        loop {
            // t_k = x_1 x_2 … x_k
            let mut t = Vec::with_capacity(dim);
            let mut w = 1.0;
            let mut prod = 1.0;
            for &i in &idx {
                let (x, wx) = unit[i];
                w *= wx * prod;
                prod *= x;
                t.push(prod);
            }
            let mut s = vec![0.0; dim + 1];
            s[0] = t[dim - 1];
            for j in 1..dim {
                s[j] = t[dim - 1 - j] - t[dim - j];
            }
            s[dim] = 1.0 - t[0];
            points.push(s);
            weights.push(w);

            let mut k = dim;
            loop {
                if k == 0 {
                    return Ok(Self {
                        dim,
                        degree,
                        points,
                        weights,
                    });
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < per_level {
                    break;
                }
                idx[k] = 0;
            }
        }
    }

    pub fn with_default_degree(dim: usize) -> Result<Self> {
        Self::new(dim, DEFAULT_SIMPLEX_DEGREE)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// `(barycentric point (s_0..s_n), weight)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (&[f64], f64)> {
        self.points.iter().map(|p| p.as_slice()).zip(self.weights.iter().copied())
    }

    /// Exact volume of `R_n`.
    pub fn volume(&self) -> f64 {
        1.0 / factorial(self.dim)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exactness() {
        for n in 1..12 {
            let gl = GaussLegendre::new(n);
            for d in 0..2 * n {
                let exact = if d % 2 == 0 { 2.0 / (d as f64 + 1.0) } else { 0.0 };
                let got: f64 = gl.integrate(-1.0, 1.0, |x| x.powi(d as i32));
                assert!((got - exact).abs() < 1e-14, "n={n} d={d}: {got} vs {exact}");
            }
        }
    }

    fn monomial_integral(exps: &[usize]) -> f64 {
        // Dirichlet integral over S_n in (s_0..s_n) coordinates:
        // Π a_j! / (Σ a_j + n)!
        let n = exps.len() - 1;
        let num: f64 = exps.iter().map(|&a| factorial(a)).product();
        num / factorial(exps.iter().sum::<usize>() + n)
    }

    #[test]
    fn simplex_rule_volume_and_exactness() {
        for dim in 1..=4 {
            let rule = SimplexQuadratureRule::new(dim, 12).unwrap();
            let vol: f64 = rule.iter().map(|(_, w)| w).sum();
            assert!((vol - 1.0 / factorial(dim)).abs() < 1e-14);
            assert!(rule.iter().all(|(_, w)| w > 0.0));
            // some monomials of total degree <= 12 in all n+1 barycentric coordinates
            let cases: Vec<Vec<usize>> = match dim {
                1 => vec![vec![3, 9], vec![12, 0], vec![5, 7]],
                2 => vec![vec![2, 3, 7], vec![0, 0, 12], vec![4, 4, 4]],
                3 => vec![vec![1, 2, 3, 6], vec![3, 3, 3, 3]],
                _ => vec![vec![2, 2, 2, 3, 3], vec![0, 12, 0, 0, 0]],
            };
            for exps in cases {
                let got: f64 = rule
                    .iter()
                    .map(|(s, w)| w * s.iter().zip(&exps).map(|(x, &a)| x.powi(a as i32)).product::<f64>())
                    .sum();
                let exact = monomial_integral(&exps);
                assert!((got - exact).abs() < 1e-13 * exact.max(1e-300) + 1e-18, "{exps:?}: {got} vs {exact}");
            }
        }
    }
}
