//! The simplicial Gaussian model: joint precision matrix over vertex, edge
//! and triangle variables, its edge-level marginal and factorized form, the
//! conditional-regression view, and a Cholesky-based sampler.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Result, SgmError};
use crate::simplicial::SimplicialComplex;

/// Model parameters: per-vertex weights `d_v > 0`, per-candidate-triangle
/// weights `d_t >= 0` (zero marks a hollow candidate), and the common edge
/// precision `k > 0`.
///
/// Feasibility additionally requires the edge marginal
/// `k I - B1^T diag(d_v) B1 - B2 diag(d_t) B2^T` to be positive definite,
/// which is equivalent to positive definiteness of the joint precision.
#[derive(Debug, Clone, PartialEq)]
pub struct SgmParams {
    pub d_v: DVector<f64>,
    pub d_t: DVector<f64>,
    pub k: f64,
}

impl SgmParams {
    /// Checks dimensions against a complex and the sign constraints.
    /// Positive definiteness is checked where the matrices are built.
    pub fn validate(&self, complex: &SimplicialComplex) -> Result<()> {
        if self.d_v.len() != complex.n_vertices() {
            return Err(SgmError::DimensionMismatch {
                expected: complex.n_vertices(),
                got: self.d_v.len(),
            });
        }
        if self.d_t.len() != complex.n_triangles() {
            return Err(SgmError::DimensionMismatch {
                expected: complex.n_triangles(),
                got: self.d_t.len(),
            });
        }
        if !self.d_v.iter().all(|&v| v > 0.0 && v.is_finite()) {
            return Err(SgmError::InvalidInput(
                "d_V must be strictly positive".into(),
            ));
        }
        if !self.d_t.iter().all(|&v| v >= 0.0 && v.is_finite()) {
            return Err(SgmError::InvalidInput("d_T must be nonnegative".into()));
        }
        if !(self.k > 0.0 && self.k.is_finite()) {
            return Err(SgmError::InvalidInput("k must be strictly positive".into()));
        }
        Ok(())
    }
}

/// Which variables a precision matrix ranges over.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrecisionScope {
    /// Joint precision in block order vertices, edges, triangles. The
    /// triangle count covers only modeled (positive-weight) triangles.
    Full {
        n_vertices: usize,
        n_edges: usize,
        n_triangles: usize,
    },
    /// Marginal precision over the edge variables.
    Edge { n_edges: usize },
    /// Marginal over an arbitrary kept index set.
    Subset,
}

/// A validated symmetric positive definite precision matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionMatrix {
    matrix: DMatrix<f64>,
    scope: PrecisionScope,
}

impl PrecisionMatrix {
    /// Validates symmetry and positive definiteness, then stores the
    /// symmetrized matrix. Near-singular matrices are rejected: the smallest
    /// Cholesky pivot must exceed `1e-12 * trace / dim`.
    pub fn new(matrix: DMatrix<f64>, scope: PrecisionScope) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SgmError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = matrix.amax().max(1.0);
        let asymmetry = (&matrix - matrix.transpose()).amax();
        if asymmetry > 1e-12 * scale {
            return Err(SgmError::InvalidInput(format!(
                "matrix is not symmetric: max asymmetry {asymmetry:e}"
            )));
        }
        let matrix = 0.5 * (&matrix + matrix.transpose());
        if matrix.nrows() > 0 {
            cholesky_with_margin(&matrix)?;
        }
        Ok(Self { matrix, scope })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn scope(&self) -> &PrecisionScope {
        &self.scope
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    /// Column range of the edge variables, when the scope identifies one.
    pub fn edge_range(&self) -> Option<std::ops::Range<usize>> {
        match self.scope {
            PrecisionScope::Full {
                n_vertices,
                n_edges,
                ..
            } => Some(n_vertices..n_vertices + n_edges),
            PrecisionScope::Edge { n_edges } => Some(0..n_edges),
            PrecisionScope::Subset => None,
        }
    }
}

/// Cholesky factorization that also rejects numerically near-singular
/// matrices: the smallest pivot must exceed `1e-12 * trace / dim`.
pub(crate) fn cholesky_with_margin(matrix: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(matrix.clone())
        .ok_or_else(|| SgmError::NotPositiveDefinite("Cholesky factorization failed".into()))?;
    let dim = matrix.nrows();
    let min_pivot = (0..dim)
        .map(|i| chol.l_dirty()[(i, i)].powi(2))
        .fold(f64::INFINITY, f64::min);
    let floor = 1e-12 * matrix.trace() / dim as f64;
    if min_pivot < floor {
        return Err(SgmError::NotPositiveDefinite(format!(
            "near-singular: smallest pivot {min_pivot:e} below {floor:e}"
        )));
    }
    Ok(chol)
}

/// Assembles the joint precision over vertex, edge and triangle variables:
/// diagonal blocks `diag(d_v)^-1`, `k I`, `diag(d_t)^-1` and off-diagonal
/// coupling `-B1` (vertexedge) and `-B2` (edgetriangle).
///
/// Candidates with `d_t = 0` carry no latent variable: their rows and
/// columns are dropped so the triangle block stays invertible. The edge
/// marginal is unchanged because the marginal form is continuous at zero.
pub fn assemble_full_precision(
    complex: &SimplicialComplex,
    params: &SgmParams,
) -> Result<PrecisionMatrix> {
    params.validate(complex)?;
    let inc = complex.incidence_matrices();
    let b1 = inc.b1_real();
    let b2 = inc.b2_real();

    let active: Vec<usize> = (0..complex.n_triangles())
        .filter(|&t| params.d_t[t] > 0.0)
        .collect();
    let (n_v, n_e, n_t) = (complex.n_vertices(), complex.n_edges(), active.len());

    let mut omega = DMatrix::zeros(n_v + n_e + n_t, n_v + n_e + n_t);
    for v in 0..n_v {
        omega[(v, v)] = 1.0 / params.d_v[v];
    }
    for e in 0..n_e {
        omega[(n_v + e, n_v + e)] = params.k;
    }
    for (slot, &t) in active.iter().enumerate() {
        omega[(n_v + n_e + slot, n_v + n_e + slot)] = 1.0 / params.d_t[t];
    }
    for v in 0..n_v {
        for e in 0..n_e {
            omega[(v, n_v + e)] = -b1[(v, e)];
            omega[(n_v + e, v)] = -b1[(v, e)];
        }
    }
    for e in 0..n_e {
        for (slot, &t) in active.iter().enumerate() {
            omega[(n_v + e, n_v + n_e + slot)] = -b2[(e, t)];
            omega[(n_v + n_e + slot, n_v + e)] = -b2[(e, t)];
        }
    }

    PrecisionMatrix::new(
        omega,
        PrecisionScope::Full {
            n_vertices: n_v,
            n_edges: n_e,
            n_triangles: n_t,
        },
    )
}

/// Exact precision of the Gaussian marginal over `keep`:
/// `O_YY - O_YW O_WW^-1 O_WY`, with W the complement of `keep`.
pub fn schur_complement(omega: &PrecisionMatrix, keep: &[usize]) -> Result<PrecisionMatrix> {
    let dim = omega.dim();
    if keep.is_empty() {
        return Err(SgmError::InvalidInput("keep set must be nonempty".into()));
    }
    let mut seen = vec![false; dim];
    for &i in keep {
        if i >= dim {
            return Err(SgmError::IndexOutOfRange {
                index: i,
                n_vertices: dim,
            });
        }
        if seen[i] {
            return Err(SgmError::InvalidInput(format!("duplicate kept index {i}")));
        }
        seen[i] = true;
    }
    let drop: Vec<usize> = (0..dim).filter(|&i| !seen[i]).collect();

    let full = omega.matrix();
    let yy = full.select_rows(keep).select_columns(keep);
    if drop.is_empty() {
        return PrecisionMatrix::new(yy, PrecisionScope::Subset);
    }
    let yw = full.select_rows(keep).select_columns(&drop);
    let ww = full.select_rows(&drop).select_columns(&drop);
    let chol = Cholesky::new(ww).ok_or(SgmError::SingularBlock)?;
    let reduced = &yy - &yw * chol.solve(&yw.transpose());
    PrecisionMatrix::new(reduced, PrecisionScope::Subset)
}

/// The edge-level marginal precision in closed form:
/// `k I - B1^T diag(d_v) B1 - B2 diag(d_t) B2^T`, no inversion involved.
pub fn edge_marginal_precision(
    complex: &SimplicialComplex,
    params: &SgmParams,
) -> Result<PrecisionMatrix> {
    params.validate(complex)?;
    let inc = complex.incidence_matrices();
    let b1 = inc.b1_real();
    let b2 = inc.b2_real();
    let n_e = complex.n_edges();

    let mut omega = DMatrix::identity(n_e, n_e) * params.k;
    omega -= b1.transpose() * DMatrix::from_diagonal(&params.d_v) * &b1;
    omega -= &b2 * DMatrix::from_diagonal(&params.d_t) * b2.transpose();
    PrecisionMatrix::new(omega, PrecisionScope::Edge { n_edges: n_e })
}

/// Edge precision in scale-separated form:
/// `k (I - B1^T diag(dv_tilde) B1) (I - B2 diag(dt_tilde) B2^T)`.
///
/// Equals the marginal form at `d = k * d_tilde`: the cross term of the
/// product vanishes because `B1 B2 = 0`. Each factor must be positive
/// definite; these are the two feasibility constraints of the reparameterized
/// likelihood problem.
pub fn factorized_edge_precision(
    complex: &SimplicialComplex,
    dv_tilde: &DVector<f64>,
    dt_tilde: &DVector<f64>,
    k: f64,
) -> Result<PrecisionMatrix> {
    let factors = edge_precision_factors(complex, dv_tilde, dt_tilde)?;
    if !(k > 0.0 && k.is_finite()) {
        return Err(SgmError::InvalidInput("k must be strictly positive".into()));
    }
    if Cholesky::new(factors.vertex_factor.clone()).is_none() {
        return Err(SgmError::ConstraintViolated('a'));
    }
    if Cholesky::new(factors.triangle_factor.clone()).is_none() {
        return Err(SgmError::ConstraintViolated('b'));
    }
    let omega = k * &factors.vertex_factor * &factors.triangle_factor;
    PrecisionMatrix::new(
        omega,
        PrecisionScope::Edge {
            n_edges: complex.n_edges(),
        },
    )
}

/// The two edge-space factors `I - B1^T diag(dv_tilde) B1` and
/// `I - B2 diag(dt_tilde) B2^T`, without positive definiteness checks.
pub(crate) struct EdgeFactors {
    pub vertex_factor: DMatrix<f64>,
    pub triangle_factor: DMatrix<f64>,
}

pub(crate) fn edge_precision_factors(
    complex: &SimplicialComplex,
    dv_tilde: &DVector<f64>,
    dt_tilde: &DVector<f64>,
) -> Result<EdgeFactors> {
    if dv_tilde.len() != complex.n_vertices() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_vertices(),
            got: dv_tilde.len(),
        });
    }
    if dt_tilde.len() != complex.n_triangles() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_triangles(),
            got: dt_tilde.len(),
        });
    }
    let inc = complex.incidence_matrices();
    let b1 = inc.b1_real();
    let b2 = inc.b2_real();
    let n_e = complex.n_edges();
    let vertex_factor =
        DMatrix::identity(n_e, n_e) - b1.transpose() * DMatrix::from_diagonal(dv_tilde) * &b1;
    let triangle_factor =
        DMatrix::identity(n_e, n_e) - &b2 * DMatrix::from_diagonal(dt_tilde) * b2.transpose();
    Ok(EdgeFactors {
        vertex_factor,
        triangle_factor,
    })
}

/// The model written as three conditional regressions with independent
/// Gaussian innovations:
///
/// `X_V = vertex_from_edge X_E + Z_V`,
/// `X_E = edge_from_vertex X_V + edge_from_triangle X_T + Z_E`,
/// `X_T = triangle_from_edge X_E + Z_T`,
///
/// with `Cov(Z_V) = diag(vertex_noise)`, `Cov(Z_E) = edge_noise I`, and
/// `Cov(Z_T) = diag(triangle_noise)`. Triangle rows cover only modeled
/// (positive-weight) candidates, matching the joint precision.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionDecomposition {
    pub vertex_from_edge: DMatrix<f64>,
    pub edge_from_vertex: DMatrix<f64>,
    pub edge_from_triangle: DMatrix<f64>,
    pub triangle_from_edge: DMatrix<f64>,
    pub vertex_noise: DVector<f64>,
    pub edge_noise: f64,
    pub triangle_noise: DVector<f64>,
}

pub fn regression_decomposition(
    complex: &SimplicialComplex,
    params: &SgmParams,
) -> Result<RegressionDecomposition> {
    params.validate(complex)?;
    let inc = complex.incidence_matrices();
    let b1 = inc.b1_real();
    let b2 = inc.b2_real();
    let active: Vec<usize> = (0..complex.n_triangles())
        .filter(|&t| params.d_t[t] > 0.0)
        .collect();
    let b2_active = b2.select_columns(&active);
    let triangle_noise =
        DVector::from_iterator(active.len(), active.iter().map(|&t| params.d_t[t]));

    Ok(RegressionDecomposition {
        vertex_from_edge: DMatrix::from_diagonal(&params.d_v) * &b1,
        edge_from_vertex: b1.transpose() / params.k,
        edge_from_triangle: &b2_active / params.k,
        triangle_from_edge: DMatrix::from_diagonal(&triangle_noise) * b2_active.transpose(),
        vertex_noise: params.d_v.clone(),
        edge_noise: 1.0 / params.k,
        triangle_noise,
    })
}

/// Zero-mean Gaussian draws stored one sample per row.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleMatrix {
    pub data: DMatrix<f64>,
    pub scope: PrecisionScope,
}

impl SampleMatrix {
    pub fn n_samples(&self) -> usize {
        self.data.nrows()
    }

    /// The edge columns as their own sample matrix.
    pub fn edge_block(&self) -> Result<SampleMatrix> {
        let range = match self.scope {
            PrecisionScope::Full {
                n_vertices,
                n_edges,
                ..
            } => n_vertices..n_vertices + n_edges,
            PrecisionScope::Edge { n_edges } => 0..n_edges,
            PrecisionScope::Subset => {
                return Err(SgmError::InvalidInput(
                    "subset samples carry no edge-block labeling".into(),
                ))
            }
        };
        Ok(SampleMatrix {
            data: self.data.columns_range(range.clone()).into(),
            scope: PrecisionScope::Edge {
                n_edges: range.len(),
            },
        })
    }
}

/// Draws `m` independent samples from `N(0, omega^-1)`.
///
/// Factors `omega = L L^T` and solves `L^T x = z` per standard normal vector
/// `z`, so the inverse is never formed. Normal variates are consumed in
/// row-major sample order, which makes the first rows of a longer run
/// coincide with a shorter run under the same seed.
pub fn sample(omega: &PrecisionMatrix, m: usize, seed: u64) -> Result<SampleMatrix> {
    if m == 0 {
        return Err(SgmError::InvalidInput(
            "sample count must be at least 1".into(),
        ));
    }
    let dim = omega.dim();
    let chol = cholesky_with_margin(omega.matrix())?;
    let lt = chol.l().transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut data = DMatrix::zeros(m, dim);
    let chunk_rows = 8192;
    let mut start = 0;
    while start < m {
        let rows = chunk_rows.min(m - start);
        let mut z = DMatrix::zeros(dim, rows);
        for c in 0..rows {
            for i in 0..dim {
                z[(i, c)] = rng.sample(StandardNormal);
            }
        }
        let x = lt
            .solve_upper_triangular(&z)
            .ok_or_else(|| SgmError::NotPositiveDefinite("triangular solve failed".into()))?;
        for c in 0..rows {
            for i in 0..dim {
                data[(start + c, i)] = x[(i, c)];
            }
        }
        start += rows;
    }

    Ok(SampleMatrix {
        data,
        scope: omega.scope().clone(),
    })
}
