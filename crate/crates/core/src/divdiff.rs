//! Divided differences with confluent nodes, their Hermite–Genocchi simplex
//! representation and the Peano (B-spline) kernel.

use num_complex::Complex64;

use crate::error::{Result, SsfError};
use crate::functions::{factorial, SmoothTestFunction};
use crate::piecewise::PiecewisePolynomial;
use crate::quadrature::SimplexQuadratureRule;
use crate::summation::ComplexSum;

/// Node clustering tolerance used when callers do not supply one.
pub const DEFAULT_NODE_TOL: f64 = 1e-10;

/// Taylor terms used when a node group is expanded around its midpoint.
const TAYLOR_TERMS: usize = 60;

/// Sorts the nodes and snaps runs whose consecutive gaps are within
/// `tol · (1 + max|node|)` onto their mean.  Returns the snapped nodes and
/// the largest multiplicity.
pub fn cluster_nodes(nodes: &[f64], tol: f64) -> (Vec<f64>, usize) {
    let mut z: Vec<f64> = nodes.to_vec();
    z.sort_by(f64::total_cmp);
    let scale = 1.0 + z.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let thr = tol * scale;
    let mut out = Vec::with_capacity(z.len());
    let mut max_mult = 0;
    let mut i = 0;
    while i < z.len() {
        let mut j = i + 1;
        while j < z.len() && z[j] - z[j - 1] <= thr {
            j += 1;
        }
        let mean = z[i..j].iter().sum::<f64>() / (j - i) as f64;
        let rep = if z[i..j].iter().all(|&v| v == z[i]) { z[i] } else { mean };
        out.extend(std::iter::repeat_n(rep, j - i));
        max_mult = max_mult.max(j - i);
        i = j;
    }
    (out, max_mult)
}

/// Complete homogeneous symmetric polynomials `h_0..h_{m_max}` of `w`.
fn complete_homogeneous(w: &[f64], m_max: usize) -> Vec<f64> {
    let mut h = vec![0.0; m_max + 1];
    h[0] = 1.0;
    for &x in w {
        for m in 1..=m_max {
            h[m] += x * h[m - 1];
        }
    }
    h
}

/// `f^{[j]}(z)` by expanding `f` around the midpoint of `z`:
/// `Σ_m g_{j+m}(c) h_m(z - c)`.  Exact for polynomials; for the analytic
/// families the caller keeps the spread well inside the natural scale.
fn taylor_divided_difference(f: &SmoothTestFunction, z: &[f64]) -> Complex64 {
    let j = z.len() - 1;
    let lo = z.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let c = 0.5 * (lo + hi);
    let terms = if hi == lo {
        1
    } else if let Some(d) = f.polynomial_degree() {
        (d + 1).saturating_sub(j).max(1)
    } else {
        TAYLOR_TERMS
    };
    let g = f.taylor_coefficients(c, j + terms);
    if terms == 1 {
        return g[j];
    }
    let w: Vec<f64> = z.iter().map(|&x| x - c).collect();
    let h = complete_homogeneous(&w, terms - 1);
    let mut acc = ComplexSum::new();
    for m in (0..terms).rev() {
        acc.add(g[j + m] * h[m]);
    }
    acc.value()
}

/// Divided difference `f^{[n]}(nodes)` of order `nodes.len() - 1`.
///
/// Nodes are sorted and clustered (see [`cluster_nodes`]); clustered nodes
/// are treated as exactly equal, which uses the derivative branch
/// `f^{[n]}(λ,…,λ) = f^{(n)}(λ)/n!`.  Node groups whose spread is below
/// half of the function's natural scale are evaluated by a Taylor
/// expansion, all wider groups by the Newton recursion, so nearly
/// coincident nodes never divide by small differences.
pub fn divided_difference(f: &SmoothTestFunction, nodes: &[f64], tol: f64) -> Result<Complex64> {
    if nodes.is_empty() {
        return Err(SsfError::invalid("divided difference needs at least one node"));
    }
    if nodes.iter().any(|x| !x.is_finite()) {
        return Err(SsfError::invalid("nodes must be finite"));
    }
    let (z, mult) = cluster_nodes(nodes, tol);
    if (mult - 1) as u32 > f.max_derivative_order {
        return Err(SsfError::invalid(format!(
            "node multiplicity {mult} needs derivatives of order {}, function declares {}",
            mult - 1,
            f.max_derivative_order
        )));
    }
    Ok(divided_difference_sorted(f, &z))
}

/// Core evaluation on already sorted and clustered nodes.
pub(crate) fn divided_difference_sorted(f: &SmoothTestFunction, z: &[f64]) -> Complex64 {
    let n = z.len() - 1;
    let reach = 0.5 * f.natural_scale();
    if z[n] - z[0] <= reach {
        return taylor_divided_difference(f, z);
    }
    // Newton tableau, column by column; entry i of column j covers z_i..z_{i+j}
    let mut col: Vec<Complex64> = z.iter().map(|&x| f.value(x)).collect();
    for j in 1..=n {
        let mut next = Vec::with_capacity(n + 1 - j);
        for i in 0..=n - j {
            let span = z[i + j] - z[i];
            if span <= reach {
                next.push(taylor_divided_difference(f, &z[i..=i + j]));
            } else {
                next.push((col[i + 1] - col[i]) / span);
            }
        }
        col = next;
    }
    col[0]
}

/// Hermite–Genocchi value `∫_{S_n} f^{(n)}(Σ s_j λ_j) dσ_n` by simplex
/// quadrature.
pub fn hermite_genocchi(f: &SmoothTestFunction, nodes: &[f64], rule: &SimplexQuadratureRule) -> Result<Complex64> {
    let n = nodes.len().checked_sub(1).ok_or_else(|| SsfError::invalid("no nodes"))?;
    if rule.dim() != n {
        return Err(SsfError::DimensionMismatch {
            expected: n,
            found: rule.dim(),
        });
    }
    let mut acc = ComplexSum::new();
    for (s, w) in rule.iter() {
        let x: f64 = s.iter().zip(nodes).map(|(a, b)| a * b).sum();
        acc.add(f.derivative(n as u32, x)? * w);
    }
    Ok(acc.value())
}

/// Multiplies local coefficients by `(a0 + a1 x)`.
fn mul_linear(p: &[f64], a0: f64, a1: f64) -> Vec<f64> {
    let mut out = vec![0.0; p.len() + 1];
    for (k, &c) in p.iter().enumerate() {
        out[k] += a0 * c;
        out[k + 1] += a1 * c;
    }
    out
}

fn add_into(acc: &mut Vec<f64>, p: &[f64]) {
    if acc.len() < p.len() {
        acc.resize(p.len(), 0.0);
    }
    for (a, &c) in acc.iter_mut().zip(p) {
        *a += c;
    }
}

/// Peano kernel `M` of order `n = nodes.len() - 1`:
/// `f^{[n]}(nodes) = ∫ f^{(n)}(t) M(t) dt`, supported on the node hull, of
/// degree `n - 1` and total mass `1/n!`.
///
/// `M` is the B-spline of degree `n - 1` on the (sorted, clustered) knots,
/// normalised by `1/((x_n - x_0)(n-1)!)`, built with the Cox–de Boor
/// recurrence interval by interval so repeated knots need no special
/// treatment.
pub fn peano_kernel(nodes: &[f64], tol: f64) -> Result<PiecewisePolynomial> {
    if nodes.len() < 2 {
        return Err(SsfError::invalid("Peano kernel needs order n >= 1"));
    }
    let (x, _) = cluster_nodes(nodes, tol);
    peano_kernel_sorted(&x)
}

pub(crate) fn peano_kernel_sorted(x: &[f64]) -> Result<PiecewisePolynomial> {
    let n = x.len() - 1;
    if x[n] == x[0] {
        return Err(SsfError::DegenerateKernel(x.len()));
    }
    let mut u: Vec<f64> = x.to_vec();
    u.dedup();
    let intervals = u.len() - 1;

    // b[i][q]: local coefficients of B_{i,k} on interval q
    let mut b: Vec<Vec<Vec<f64>>> = (0..n)
        .map(|i| {
            (0..intervals)
                .map(|q| {
                    if x[i] < x[i + 1] && u[q] >= x[i] && u[q + 1] <= x[i + 1] {
                        vec![1.0]
                    } else {
                        vec![0.0]
                    }
                })
                .collect()
        })
        .collect();

    for k in 1..n {
        let mut next = Vec::with_capacity(n - k);
        for i in 0..n - k {
            let mut row = Vec::with_capacity(intervals);
            let d1 = x[i + k] - x[i];
            let d2 = x[i + k + 1] - x[i + 1];
            for q in 0..intervals {
                let mut acc = vec![0.0];
                if d1 > 0.0 {
                    // (t - x_i)/d1 with t = u_q + local
                    let term = mul_linear(&b[i][q], (u[q] - x[i]) / d1, 1.0 / d1);
                    add_into(&mut acc, &term);
                }
                if d2 > 0.0 {
                    let term = mul_linear(&b[i + 1][q], (x[i + k + 1] - u[q]) / d2, -1.0 / d2);
                    add_into(&mut acc, &term);
                }
                row.push(acc);
            }
            next.push(row);
        }
        b = next;
    }

    let norm = 1.0 / ((x[n] - x[0]) * factorial(n - 1));
    let pieces: Vec<Vec<f64>> = b[0].iter().map(|p| p.iter().map(|c| c * norm).collect()).collect();
    PiecewisePolynomial::new(u, pieces)
}

/// `∫ f^{(n)}(t) M(t) dt` for the Peano kernel of `nodes`, via per-interval
/// Gauss quadrature.  All-equal nodes fall back to the atom
/// `f^{(n)}(λ)/n!`.
pub fn kernel_divided_difference(f: &SmoothTestFunction, nodes: &[f64], tol: f64, order: usize) -> Result<Complex64> {
    let n = nodes.len() - 1;
    let (x, _) = cluster_nodes(nodes, tol);
    if x[n] == x[0] {
        return Ok(f.derivative(n as u32, x[0])? / factorial(n));
    }
    let k = peano_kernel_sorted(&x)?;
    let scale = f.natural_scale();
    Ok(k.integrate_against(|t| f.derivative_unchecked(n as u32, t), order, 0.25 * scale))
}
