//! Hermitian matrices, their spectral families, Schatten norms and
//! functional calculus.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Result, SsfError};

pub type CMatrix = DMatrix<Complex64>;

/// Relative tolerance used when checking Hermitian symmetry on construction.
pub const HERMITIAN_TOL: f64 = 1e-12;

/// A d×d complex Hermitian matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct HermitianOperator {
    matrix: CMatrix,
}

impl HermitianOperator {
    /// Validates Hermitian symmetry within `1e-12 · max|entry|` and stores
    /// the exactly symmetrized matrix `(A + A*) / 2`.
    pub fn new(matrix: CMatrix) -> Result<Self> {
        if !matrix.is_square() {
            return Err(SsfError::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(SsfError::invalid("empty matrix"));
        }
        if let Some((row, col, deviation)) = hermitian_violation(&matrix) {
            return Err(SsfError::NotHermitian { row, col, deviation });
        }
        let sym = (&matrix + matrix.adjoint()).scale(0.5);
        Ok(Self { matrix: sym })
    }

    pub fn from_real(dim: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != dim * dim {
            return Err(SsfError::DimensionMismatch {
                expected: dim * dim,
                found: row_major.len(),
            });
        }
        Self::new(DMatrix::from_row_iterator(
            dim,
            dim,
            row_major.iter().map(|&x| Complex64::new(x, 0.0)),
        ))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let n = values.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &v) in values.iter().enumerate() {
            m[(i, i)] = Complex64::new(v, 0.0);
        }
        Self { matrix: m }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            matrix: CMatrix::zeros(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    /// `self + t · other`, which stays Hermitian for real `t`.
    pub fn add_scaled(&self, other: &HermitianOperator, t: f64) -> Result<HermitianOperator> {
        check_same_dim(self.dim(), other.dim())?;
        Ok(Self {
            matrix: &self.matrix + other.matrix.scale(t),
        })
    }

    pub fn scaled(&self, s: f64) -> HermitianOperator {
        Self {
            matrix: self.matrix.scale(s),
        }
    }

    /// Largest absolute entry.
    pub fn max_abs_entry(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn decompose(&self) -> Result<SpectralDecomposition> {
        decompose(self, None)
    }
}

pub(crate) fn check_same_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(SsfError::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// First entry (row-major scan of the upper triangle) violating Hermitian
/// symmetry, with its deviation.
pub fn hermitian_violation(m: &CMatrix) -> Option<(usize, usize, f64)> {
    let scale = m.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let tol = HERMITIAN_TOL * scale;
    let n = m.nrows();
    for i in 0..n {
        for j in i..n {
            let dev = (m[(i, j)] - m[(j, i)].conj()).norm();
            if dev > tol {
                return Some((i, j, dev));
            }
        }
    }
    None
}

/// One distinct (clustered) eigenvalue with its orthogonal projection.
#[derive(Debug, Clone)]
pub struct SpectralCluster {
    pub value: f64,
    pub rank: usize,
    pub projection: CMatrix,
}

/// Eigenvalues plus the projection family `{E_l}` of a Hermitian matrix.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    dim: usize,
    eigenvalues: Vec<f64>,
    eigenvectors: CMatrix,
    cluster_of: Vec<usize>,
    clusters: Vec<SpectralCluster>,
    cluster_tol: f64,
}

/// Default clustering tolerance `1e-10 · (1 + spectral radius)`.
pub fn default_cluster_tol(spectral_radius: f64) -> f64 {
    1e-10 * (1.0 + spectral_radius)
}

/// Eigendecomposition with eigenvalues within `cluster_tol` of their
/// neighbour merged into a single projection.  `None` selects
/// [`default_cluster_tol`].
pub fn decompose(a: &HermitianOperator, cluster_tol: Option<f64>) -> Result<SpectralDecomposition> {
    if let Some(tol) = cluster_tol {
        if !(tol >= 0.0) {
            return Err(SsfError::invalid(format!("cluster tolerance must be >= 0, got {tol}")));
        }
    }
    let n = a.dim();
    if a.matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(SsfError::Eigensolver("matrix has non-finite entries".into()));
    }
    let eig = SymmetricEigen::try_new(a.matrix.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| SsfError::Eigensolver(format!("no convergence for {n}x{n} matrix")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = CMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);

    let radius = eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = cluster_tol.unwrap_or_else(|| default_cluster_tol(radius));

    let mut groups: Vec<Vec<usize>> = Vec::new();
    for (i, &v) in eigenvalues.iter().enumerate() {
        match groups.last_mut() {
            Some(g) if v - eigenvalues[*g.last().unwrap()] <= tol => g.push(i),
            _ => groups.push(vec![i]),
        }
    }

    let mut cluster_of = vec![0; n];
    let clusters = groups
        .iter()
        .enumerate()
        .map(|(ci, g)| {
            let value = g.iter().map(|&i| eigenvalues[i]).sum::<f64>() / g.len() as f64;
            let mut projection = CMatrix::zeros(n, n);
            for &i in g {
                cluster_of[i] = ci;
                let u = eigenvectors.column(i);
                projection += u * u.adjoint();
            }
            SpectralCluster {
                value,
                rank: g.len(),
                projection,
            }
        })
        .collect();

    Ok(SpectralDecomposition {
        dim: n,
        eigenvalues,
        eigenvectors,
        cluster_of,
        clusters,
        cluster_tol: tol,
    })
}

impl SpectralDecomposition {
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// All eigenvalues, ascending, with multiplicity.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Unitary whose columns are the eigenvectors, ordered like
    /// [`eigenvalues`](Self::eigenvalues).
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn clusters(&self) -> &[SpectralCluster] {
        &self.clusters
    }

    /// Clustered value of the `i`-th eigenvalue (with multiplicity).
    pub fn clustered_eigenvalue(&self, i: usize) -> f64 {
        self.clusters[self.cluster_of[i]].value
    }

    pub fn cluster_tol(&self) -> f64 {
        self.cluster_tol
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigenvalues[self.dim - 1]
    }

    pub fn spectral_radius(&self) -> f64 {
        self.min_eigenvalue().abs().max(self.max_eigenvalue().abs())
    }

    /// `Σ_l f(λ_l) E_l`.
    pub fn apply<F>(&self, f: F) -> CMatrix
    where
        F: Fn(f64) -> Complex64,
    {
        let u = &self.eigenvectors;
        let mut scaled = u.clone();
        for (c, mut col) in scaled.column_iter_mut().enumerate() {
            let w = f(self.clustered_eigenvalue(c));
            col *= w;
        }
        scaled * u.adjoint()
    }

    /// Fallible variant of [`apply`](Self::apply).
    pub fn try_apply<F>(&self, f: F) -> Result<CMatrix>
    where
        F: Fn(f64) -> Result<Complex64>,
    {
        let values = self
            .clusters
            .iter()
            .map(|c| f(c.value))
            .collect::<Result<Vec<_>>>()?;
        Ok(self.apply(|x| {
            let idx = self
                .clusters
                .iter()
                .position(|c| c.value == x)
                .expect("value comes from the cluster list");
            values[idx]
        }))
    }

    /// Reassembles `Σ λ_l E_l`.
    pub fn reconstruct(&self) -> CMatrix {
        self.apply(|x| Complex64::new(x, 0.0))
    }

    /// Number of eigenvalues `≤ t`, counted with multiplicity.
    pub fn counting(&self, t: f64) -> usize {
        self.clusters
            .iter()
            .filter(|c| c.value <= t)
            .map(|c| c.rank)
            .sum()
    }

    /// Spectral projections of the cells `[l/m, (l+1)/m)`.
    pub fn grid_projections(&self, m: usize) -> Result<GridProjectionFamily> {
        if m == 0 {
            return Err(SsfError::invalid("grid resolution m must be >= 1"));
        }
        let mut cells: BTreeMap<i64, CMatrix> = BTreeMap::new();
        for c in &self.clusters {
            let l = (m as f64 * c.value).floor() as i64;
            cells
                .entry(l)
                .and_modify(|p| *p += &c.projection)
                .or_insert_with(|| c.projection.clone());
        }
        Ok(GridProjectionFamily { m, cells })
    }
}

/// Projections `E_{l,m} = E[l/m, (l+1)/m)`; empty cells are omitted.
#[derive(Debug, Clone)]
pub struct GridProjectionFamily {
    pub m: usize,
    pub cells: BTreeMap<i64, CMatrix>,
}

impl GridProjectionFamily {
    /// Left endpoint `l/m` of a cell.
    pub fn node(&self, l: i64) -> f64 {
        l as f64 / self.m as f64
    }
}

/// Schatten-`p` norm from singular values; `p = f64::INFINITY` gives the
/// operator norm.
pub fn schatten_norm(a: &CMatrix, p: f64) -> Result<f64> {
    if p.is_nan() || p < 1.0 {
        return Err(SsfError::invalid(format!("Schatten exponent must be >= 1, got {p}")));
    }
    if a.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
        return Ok(0.0);
    }
    let sv = a.clone().singular_values();
    if p.is_infinite() {
        return Ok(sv.iter().fold(0.0f64, |m, &s| m.max(s)));
    }
    let smax = sv.iter().fold(0.0f64, |m, &s| m.max(s));
    // scale by the largest value to keep s^p representable
    let total = crate::summation::sum(sv.iter().map(|&s| (s / smax).powf(p)));
    Ok(smax * total.powf(1.0 / p))
}

/// Trace of a square matrix.
pub fn trace(a: &CMatrix) -> Complex64 {
    crate::summation::complex_sum((0..a.nrows()).map(|i| a[(i, i)]))
}

/// Largest absolute deviation between two matrices.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Frobenius norm.
pub fn frobenius(a: &CMatrix) -> f64 {
    crate::summation::sum(a.iter().map(|z| z.norm_sqr())).sqrt()
}
