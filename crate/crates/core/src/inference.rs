//! Maximum-likelihood recovery of `(k, d_V, d_T)` from edge observations:
//! the scale-separated objective, the closed-form scale update, concave
//! vertex/triangle subproblems solved by projected gradient ascent, the
//! block-coordinate outer loop, and triangle pruning.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Result, SgmError};
use crate::model::{edge_marginal_precision, edge_precision_factors, SampleMatrix, SgmParams};
use crate::simplicial::SimplicialComplex;

/// Strict-feasibility margin: iterates keep the smallest eigenvalue of each
/// likelihood factor above this value.
const FEASIBILITY_MARGIN: f64 = 1e-10;

/// Armijo sufficient-increase parameter for the backtracking line search.
const ARMIJO_SLOPE: f64 = 1e-4;

/// Second-moment matrix of edge observations, `C = (1/M) sum x x^T`.
/// The model is zero mean, so no mean is subtracted. `n_samples = 0` marks
/// an exact population covariance rather than an empirical one.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleCovariance {
    matrix: DMatrix<f64>,
    n_samples: usize,
}

impl SampleCovariance {
    /// Empirical covariance of the rows of a sample matrix.
    pub fn from_samples(samples: &SampleMatrix) -> Result<Self> {
        let m = samples.n_samples();
        if m == 0 {
            return Err(SgmError::EmptySample);
        }
        let matrix = samples.data.transpose() * &samples.data / m as f64;
        Self::checked(matrix, m)
    }

    /// Wraps an exact covariance, e.g. the inverse of a known precision.
    pub fn population(matrix: DMatrix<f64>) -> Result<Self> {
        Self::checked(matrix, 0)
    }

    fn checked(matrix: DMatrix<f64>, n_samples: usize) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(SgmError::DimensionMismatch {
                expected: matrix.nrows(),
                got: matrix.ncols(),
            });
        }
        let scale = matrix.amax().max(1.0);
        if (&matrix - matrix.transpose()).amax() > 1e-12 * scale {
            return Err(SgmError::InvalidInput("covariance is not symmetric".into()));
        }
        let matrix = 0.5 * (&matrix + matrix.transpose());
        // Eigenvalues must not dip below -1e-10 * trace; shifting by that
        // amount and factoring certifies the bound without an eigensolve.
        let dim = matrix.nrows();
        if dim > 0 {
            let shift = 1e-10 * matrix.trace().abs().max(1e-300);
            let shifted = &matrix + DMatrix::identity(dim, dim) * shift;
            if Cholesky::new(shifted).is_none() {
                return Err(SgmError::InvalidInput(
                    "covariance has a negative eigenvalue beyond tolerance".into(),
                ));
            }
        }
        Ok(Self { matrix, n_samples })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }
}

/// Empirical covariance of the rows of a sample matrix.
pub fn sample_covariance(samples: &SampleMatrix) -> Result<SampleCovariance> {
    SampleCovariance::from_samples(samples)
}

/// Tolerances and limits for the solver. All values must be positive.
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceOptions {
    /// Cap on block-coordinate sweeps.
    pub max_outer_iterations: usize,
    /// Relative objective-change threshold that ends the outer loop.
    pub objective_tolerance: f64,
    /// Projected-gradient stationarity residual accepted per subproblem.
    pub kkt_tolerance: f64,
    /// Cap on projected-gradient steps per subproblem solve.
    pub max_inner_iterations: usize,
    /// Pruning levels applied to the rescaled triangle weights.
    pub thresholds: Vec<f64>,
    /// Uniform starting value for both reparameterized weight vectors.
    pub init_scale: f64,
    /// Lower bound keeping the vertex weights strictly positive.
    pub d_v_floor: f64,
}

impl Default for InferenceOptions {
    fn default() -> Self {
        Self {
            max_outer_iterations: 500,
            objective_tolerance: 1e-8,
            kkt_tolerance: 1e-7,
            max_inner_iterations: 2000,
            thresholds: vec![0.01, 0.05, 0.1],
            init_scale: 1e-3,
            d_v_floor: 1e-8,
        }
    }
}

impl InferenceOptions {
    pub fn validate(&self) -> Result<()> {
        let positives = [
            ("objective_tolerance", self.objective_tolerance),
            ("kkt_tolerance", self.kkt_tolerance),
            ("init_scale", self.init_scale),
            ("d_v_floor", self.d_v_floor),
        ];
        for (name, value) in positives {
            if !(value > 0.0 && value.is_finite()) {
                return Err(SgmError::InvalidInput(format!("{name} must be positive")));
            }
        }
        if self.max_outer_iterations == 0 || self.max_inner_iterations == 0 {
            return Err(SgmError::InvalidInput(
                "iteration caps must be at least 1".into(),
            ));
        }
        if self
            .thresholds
            .iter()
            .any(|t| t.is_nan() || *t < 0.0 || !t.is_finite())
        {
            return Err(SgmError::InvalidInput(
                "thresholds must be nonnegative".into(),
            ));
        }
        if self.thresholds.windows(2).any(|w| w[0] > w[1]) {
            return Err(SgmError::InvalidInput(
                "thresholds must be sorted ascending".into(),
            ));
        }
        Ok(())
    }
}

/// Outcome of one subproblem solve. `converged = false` means the iteration
/// cap was reached or the line search stalled; `values` is then the best
/// iterate found rather than a certified stationary point.
#[derive(Debug, Clone, PartialEq)]
pub struct SubproblemSolution {
    pub values: DVector<f64>,
    pub converged: bool,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Output of the block-coordinate solver, with estimates already rescaled
/// back to the model parameterization (`d = k * d_tilde`).
#[derive(Debug, Clone, PartialEq)]
pub struct InferenceResult {
    pub k_hat: f64,
    pub d_v_hat: DVector<f64>,
    pub d_t_hat: DVector<f64>,
    /// Objective value after each completed sweep; nondecreasing.
    pub objective_trace: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Surviving candidate indices per pruning threshold, ascending order.
    pub active_triangles: Vec<(f64, Vec<usize>)>,
    /// The candidate universe the triangle estimates refer to: every
    /// 3-clique of the 1-skeleton, lexicographic.
    pub candidate_triangles: Vec<[usize; 3]>,
}

/// Log-likelihood (up to constants) in the scale-separated parameterization:
/// `N_E log k + log det(I - A) + log det(I - B) - k tr(C) + k tr(C A) + k tr(C B)`
/// with `A = B1^T diag(dv_tilde) B1` and `B = B2 diag(dt_tilde) B2^T`.
///
/// Equals `log det O_E - tr(C O_E)` at `d = k d_tilde`: the trace terms keep
/// the `+` sign that this expansion produces.
pub fn objective(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    dv_tilde: &DVector<f64>,
    dt_tilde: &DVector<f64>,
    k: f64,
) -> Result<f64> {
    if c.dim() != complex.n_edges() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_edges(),
            got: c.dim(),
        });
    }
    if !(k > 0.0 && k.is_finite()) {
        return Err(SgmError::InvalidInput("k must be strictly positive".into()));
    }
    let factors = edge_precision_factors(complex, dv_tilde, dt_tilde)?;
    let chol_a =
        Cholesky::new(factors.vertex_factor.clone()).ok_or(SgmError::ConstraintViolated('a'))?;
    let chol_b =
        Cholesky::new(factors.triangle_factor.clone()).ok_or(SgmError::ConstraintViolated('b'))?;
    let tr_c = c.matrix().trace();
    let tr_c_fa = c.matrix().component_mul(&factors.vertex_factor).sum();
    let tr_c_fb = c.matrix().component_mul(&factors.triangle_factor).sum();
    // tr(C A) = tr(C) - tr(C (I - A)), and likewise for B.
    Ok(
        complex.n_edges() as f64 * k.ln() + log_det(&chol_a) + log_det(&chol_b) - k * tr_c
            + k * (tr_c - tr_c_fa)
            + k * (tr_c - tr_c_fb),
    )
}

/// The unfactorized log-likelihood `log det O_E - tr(C O_E)` evaluated on
/// the marginal precision built from model parameters.
pub fn marginal_objective(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    params: &SgmParams,
) -> Result<f64> {
    if c.dim() != complex.n_edges() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_edges(),
            got: c.dim(),
        });
    }
    let omega = edge_marginal_precision(complex, params)?;
    let chol = Cholesky::new(omega.matrix().clone())
        .ok_or_else(|| SgmError::NotPositiveDefinite("edge marginal not PD".into()))?;
    Ok(log_det(&chol) - c.matrix().component_mul(omega.matrix()).sum())
}

/// Closed-form maximizer of the objective over `k` with the weights fixed:
/// `k* = N_E / tr(C (I - A - B))`.
pub fn update_k(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    dv_tilde: &DVector<f64>,
    dt_tilde: &DVector<f64>,
) -> Result<f64> {
    let pieces = ProblemPieces::new(complex, c)?;
    pieces.scale_update(dv_tilde, dt_tilde)
}

/// Maximizes the vertex block `log det(I - A) + k tr(C A)` over
/// `dv_tilde >= d_v_floor` with the factor kept positive definite.
pub fn solve_vertex_subproblem(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    k: f64,
    init: &DVector<f64>,
    opts: &InferenceOptions,
) -> Result<SubproblemSolution> {
    opts.validate()?;
    let pieces = ProblemPieces::new(complex, c)?;
    pieces.vertex_spec(k, opts).solve(init, opts)
}

/// Maximizes the triangle block `log det(I - B) + k tr(C B)` over
/// `dt_tilde >= 0` with the factor kept positive definite.
pub fn solve_triangle_subproblem(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    k: f64,
    init: &DVector<f64>,
    opts: &InferenceOptions,
) -> Result<SubproblemSolution> {
    opts.validate()?;
    let pieces = ProblemPieces::new(complex, c)?;
    pieces.triangle_spec(k).solve(init, opts)
}

/// Gradient of the vertex block `log det(I - A) + k tr(C A)` with respect to
/// `dv_tilde`; the direction the vertex subproblem ascends.
pub fn vertex_block_gradient(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    k: f64,
    dv_tilde: &DVector<f64>,
) -> Result<DVector<f64>> {
    if dv_tilde.len() != complex.n_vertices() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_vertices(),
            got: dv_tilde.len(),
        });
    }
    let pieces = ProblemPieces::new(complex, c)?;
    let opts = InferenceOptions::default();
    let spec = pieces.vertex_spec(k, &opts);
    let (_, gradient) = spec
        .value_and_gradient(dv_tilde)
        .ok_or(SgmError::ConstraintViolated('a'))?;
    Ok(gradient)
}

/// Gradient of the triangle block `log det(I - B) + k tr(C B)` with respect
/// to `dt_tilde`; the direction the triangle subproblem ascends.
pub fn triangle_block_gradient(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    k: f64,
    dt_tilde: &DVector<f64>,
) -> Result<DVector<f64>> {
    if dt_tilde.len() != complex.n_triangles() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_triangles(),
            got: dt_tilde.len(),
        });
    }
    let pieces = ProblemPieces::new(complex, c)?;
    let spec = pieces.triangle_spec(k);
    let (_, gradient) = spec
        .value_and_gradient(dt_tilde)
        .ok_or(SgmError::ConstraintViolated('b'))?;
    Ok(gradient)
}

/// Candidate indices whose estimated weight exceeds the threshold.
pub fn prune_triangles(d_t_hat: &DVector<f64>, threshold: f64) -> Vec<usize> {
    d_t_hat
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > threshold)
        .map(|(i, _)| i)
        .collect()
}

/// Runs the block-coordinate loop (scale update, vertex block, triangle
/// block) from an edge-sample covariance until the relative objective change
/// drops below `objective_tolerance` or the sweep cap is hit.
///
/// Candidate triangles are the 3-cliques of the complex's 1-skeleton; any
/// triangles stored in the complex are ignored, so the estimates cover every
/// structurally possible triangle.
pub fn infer(
    c: &SampleCovariance,
    complex: &SimplicialComplex,
    opts: &InferenceOptions,
) -> Result<InferenceResult> {
    opts.validate()?;
    if complex.n_edges() == 0 {
        return Err(SgmError::InvalidInput(
            "inference requires at least one edge".into(),
        ));
    }
    if c.dim() != complex.n_edges() {
        return Err(SgmError::DimensionMismatch {
            expected: complex.n_edges(),
            got: c.dim(),
        });
    }
    if c.matrix().trace() <= 0.0 {
        return Err(SgmError::DegenerateCovariance);
    }

    let candidates = complex.three_cliques();
    let work = if complex.triangles() == candidates.as_slice() {
        complex.clone()
    } else {
        SimplicialComplex::new(
            complex.n_vertices(),
            complex.edges().iter().copied(),
            candidates.iter().copied(),
        )?
    };
    let pieces = ProblemPieces::new(&work, c)?;

    // Small uniform weights are strictly feasible; guard the scale so this
    // holds for any complex size (Gershgorin bounds the factor spectra).
    let init_scale = opts
        .init_scale
        .min(0.25 / pieces.vertex_quadratic_bound().max(1e-300))
        .min(match pieces.n_triangles() {
            0 => f64::INFINITY,
            _ => 0.25 / pieces.triangle_quadratic_bound().max(1e-300),
        });
    let mut dv_tilde = DVector::from_element(work.n_vertices(), init_scale.max(opts.d_v_floor));
    let mut dt_tilde = DVector::from_element(pieces.n_triangles(), init_scale);
    let mut k = work.n_edges() as f64 / c.matrix().trace();

    let mut trace: Vec<f64> = Vec::new();
    let mut converged = false;
    while trace.len() < opts.max_outer_iterations {
        k = pieces.scale_update(&dv_tilde, &dt_tilde)?;
        dv_tilde = pieces.vertex_spec(k, opts).solve(&dv_tilde, opts)?.values;
        if pieces.n_triangles() > 0 {
            dt_tilde = pieces.triangle_spec(k).solve(&dt_tilde, opts)?.values;
        }
        let objective = pieces.objective(&dv_tilde, &dt_tilde, k)?;
        let done = trace.last().is_some_and(|&previous| {
            (objective - previous).abs() <= opts.objective_tolerance * previous.abs().max(1.0)
        });
        trace.push(objective);
        if done {
            converged = true;
            break;
        }
    }

    let d_t_hat = &dt_tilde * k;
    let mut thresholds = opts.thresholds.clone();
    thresholds.sort_by(|a, b| a.partial_cmp(b).expect("validated finite thresholds"));
    thresholds.dedup();
    let active_triangles = thresholds
        .iter()
        .map(|&t| (t, prune_triangles(&d_t_hat, t)))
        .collect();

    Ok(InferenceResult {
        k_hat: k,
        d_v_hat: &dv_tilde * k,
        d_t_hat,
        iterations: trace.len(),
        objective_trace: trace,
        converged,
        active_triangles,
        candidate_triangles: candidates,
    })
}

/// Convenience wrapper: extracts the edge block, forms the covariance, and
/// runs `infer`.
pub fn infer_from_samples(
    samples: &SampleMatrix,
    complex: &SimplicialComplex,
    opts: &InferenceOptions,
) -> Result<InferenceResult> {
    let edge = samples.edge_block()?;
    infer(&SampleCovariance::from_samples(&edge)?, complex, opts)
}

/// Whether `(k, d_V, d_T)` is recoverable from the edge marginal: the map
/// from parameters to the upper triangle of `O_E` is affine with an integer
/// Jacobian, and the parameters are identifiable exactly when that Jacobian
/// has full column rank. The rank is computed exactly by fraction-free
/// elimination (falling back to pivoted QR if the integers overflow).
///
/// Triangle parameters range over the 3-cliques of the 1-skeleton, matching
/// what `infer` estimates.
pub fn parameters_identifiable(complex: &SimplicialComplex) -> bool {
    let candidates = complex.three_cliques();
    let work = SimplicialComplex::new(
        complex.n_vertices(),
        complex.edges().iter().copied(),
        candidates,
    )
    .expect("cliques of a valid complex form a valid complex");
    let inc = work.incidence_matrices();
    let (n_v, n_e, n_t) = (work.n_vertices(), work.n_edges(), work.n_triangles());
    let n_cols = 1 + n_v + n_t;

    let mut rows = Vec::with_capacity(n_e * (n_e + 1) / 2);
    for e in 0..n_e {
        for f in e..n_e {
            let mut row = Vec::with_capacity(n_cols);
            row.push(i128::from(e == f));
            for v in 0..n_v {
                row.push(-i128::from(inc.b1[(v, e)]) * i128::from(inc.b1[(v, f)]));
            }
            for t in 0..n_t {
                row.push(-i128::from(inc.b2[(e, t)]) * i128::from(inc.b2[(f, t)]));
            }
            rows.push(row);
        }
    }
    if rows.len() < n_cols {
        return false;
    }
    match integer_rank(rows.clone()) {
        Some(rank) => rank == n_cols,
        None => float_rank(&rows) == n_cols,
    }
}

/// Exact rank by Bareiss fraction-free elimination; `None` on overflow.
fn integer_rank(mut m: Vec<Vec<i128>>) -> Option<usize> {
    let n_rows = m.len();
    let n_cols = m[0].len();
    let mut rank = 0;
    let mut previous_pivot: i128 = 1;
    for col in 0..n_cols {
        let Some(pivot_row) = (rank..n_rows).find(|&r| m[r][col] != 0) else {
            continue;
        };
        m.swap(rank, pivot_row);
        let pivot = m[rank][col];
        for r in (rank + 1)..n_rows {
            for c in (col + 1)..n_cols {
                let numerator = m[r][c]
                    .checked_mul(pivot)?
                    .checked_sub(m[r][col].checked_mul(m[rank][c])?)?;
                m[r][c] = numerator / previous_pivot;
            }
            m[r][col] = 0;
        }
        previous_pivot = pivot;
        rank += 1;
        if rank == n_cols {
            break;
        }
    }
    Some(rank)
}

fn float_rank(rows: &[Vec<i128>]) -> usize {
    let matrix = DMatrix::from_fn(rows.len(), rows[0].len(), |i, j| rows[i][j] as f64);
    let qr = matrix.col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    if lead == 0.0 {
        return 0;
    }
    (0..r.nrows().min(r.ncols()))
        .take_while(|&i| r[(i, i)].abs() > lead * 1e-8)
        .count()
}

fn log_det(chol: &Cholesky<f64, Dyn>) -> f64 {
    let l = chol.l_dirty();
    (0..l.nrows()).map(|i| l[(i, i)].ln()).sum::<f64>() * 2.0
}

/// Quantities shared by every block update for a fixed covariance: the
/// incidence maps and the per-coordinate data terms
/// `c_vertex[v] = [B1 C B1^T]_vv` and `c_triangle[t] = [B2^T C B2]_tt`.
struct ProblemPieces {
    b1t: DMatrix<f64>,
    b2: DMatrix<f64>,
    c_vertex: DVector<f64>,
    c_triangle: DVector<f64>,
    tr_c: f64,
    n_edges: usize,
}

impl ProblemPieces {
    fn new(complex: &SimplicialComplex, c: &SampleCovariance) -> Result<Self> {
        if c.dim() != complex.n_edges() {
            return Err(SgmError::DimensionMismatch {
                expected: complex.n_edges(),
                got: c.dim(),
            });
        }
        let inc = complex.incidence_matrices();
        let b1t = inc.b1_real().transpose();
        let b2 = inc.b2_real();
        let cb1t = c.matrix() * &b1t;
        let c_vertex = DVector::from_fn(b1t.ncols(), |v, _| b1t.column(v).dot(&cb1t.column(v)));
        let cb2 = c.matrix() * &b2;
        let c_triangle = DVector::from_fn(b2.ncols(), |t, _| b2.column(t).dot(&cb2.column(t)));
        Ok(Self {
            b1t,
            b2,
            c_vertex,
            c_triangle,
            tr_c: c.matrix().trace(),
            n_edges: complex.n_edges(),
        })
    }

    fn n_triangles(&self) -> usize {
        self.b2.ncols()
    }

    /// `tr(C (I - A - B))` and the closed-form scale `N_E / trace`.
    fn scale_update(&self, dv_tilde: &DVector<f64>, dt_tilde: &DVector<f64>) -> Result<f64> {
        self.check_lengths(dv_tilde, dt_tilde)?;
        let trace = self.tr_c - dv_tilde.dot(&self.c_vertex) - dt_tilde.dot(&self.c_triangle);
        if trace <= 0.0 {
            return Err(SgmError::NonpositiveCurvatureTrace(trace));
        }
        Ok(self.n_edges as f64 / trace)
    }

    fn objective(&self, dv_tilde: &DVector<f64>, dt_tilde: &DVector<f64>, k: f64) -> Result<f64> {
        self.check_lengths(dv_tilde, dt_tilde)?;
        let factor_a = factor_matrix(&self.b1t, dv_tilde, self.n_edges);
        let factor_b = factor_matrix(&self.b2, dt_tilde, self.n_edges);
        let chol_a = Cholesky::new(factor_a).ok_or(SgmError::ConstraintViolated('a'))?;
        let chol_b = Cholesky::new(factor_b).ok_or(SgmError::ConstraintViolated('b'))?;
        Ok(
            self.n_edges as f64 * k.ln() + log_det(&chol_a) + log_det(&chol_b)
                - k * (self.tr_c - dv_tilde.dot(&self.c_vertex) - dt_tilde.dot(&self.c_triangle)),
        )
    }

    fn vertex_spec<'p>(&'p self, k: f64, opts: &InferenceOptions) -> SubproblemSpec<'p> {
        SubproblemSpec {
            w: &self.b1t,
            linear: k * &self.c_vertex,
            floor: opts.d_v_floor,
            n_edges: self.n_edges,
            constraint: 'a',
        }
    }

    fn triangle_spec(&self, k: f64) -> SubproblemSpec<'_> {
        SubproblemSpec {
            w: &self.b2,
            linear: k * &self.c_triangle,
            floor: 0.0,
            n_edges: self.n_edges,
            constraint: 'b',
        }
    }

    /// Gershgorin bound on the spectrum of `B1^T B1`.
    fn vertex_quadratic_bound(&self) -> f64 {
        gershgorin_bound(&(self.b1t.transpose() * &self.b1t))
    }

    /// Gershgorin bound on the spectrum of `B2^T B2`.
    fn triangle_quadratic_bound(&self) -> f64 {
        gershgorin_bound(&(self.b2.transpose() * &self.b2))
    }

    fn check_lengths(&self, dv_tilde: &DVector<f64>, dt_tilde: &DVector<f64>) -> Result<()> {
        if dv_tilde.len() != self.b1t.ncols() {
            return Err(SgmError::DimensionMismatch {
                expected: self.b1t.ncols(),
                got: dv_tilde.len(),
            });
        }
        if dt_tilde.len() != self.b2.ncols() {
            return Err(SgmError::DimensionMismatch {
                expected: self.b2.ncols(),
                got: dt_tilde.len(),
            });
        }
        Ok(())
    }
}

fn gershgorin_bound(m: &DMatrix<f64>) -> f64 {
    (0..m.nrows())
        .map(|i| m.row(i).iter().map(|v| v.abs()).sum())
        .fold(0.0f64, f64::max)
}

/// One concave block: maximize `log det(I - W diag(x) W^T) + linear . x`
/// over the box `x >= floor`, intersected with positive definiteness of the
/// factor. Both blocks of the likelihood have this shape (vertex block with
/// `W = B1^T`, triangle block with `W = B2`).
struct SubproblemSpec<'p> {
    w: &'p DMatrix<f64>,
    linear: DVector<f64>,
    floor: f64,
    n_edges: usize,
    constraint: char,
}

impl SubproblemSpec<'_> {
    fn dim(&self) -> usize {
        self.w.ncols()
    }

    fn factor(&self, x: &DVector<f64>) -> DMatrix<f64> {
        factor_matrix(self.w, x, self.n_edges)
    }

    /// Strict feasibility: box bound plus a positive definite factor with
    /// its smallest eigenvalue above the margin.
    fn strictly_feasible(&self, x: &DVector<f64>) -> bool {
        let margin = DMatrix::identity(self.n_edges, self.n_edges) * FEASIBILITY_MARGIN;
        x.iter().all(|&v| v >= self.floor) && Cholesky::new(self.factor(x) - margin).is_some()
    }

    fn value(&self, x: &DVector<f64>) -> Option<f64> {
        let chol = Cholesky::new(self.factor(x))?;
        Some(log_det(&chol) + self.linear.dot(x))
    }

    fn value_and_gradient(&self, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
        let chol = Cholesky::new(self.factor(x))?;
        // d/dx_i log det(I - W diag(x) W^T) = -w_i^T (I - W diag(x) W^T)^-1 w_i.
        let solved = chol.solve(self.w);
        let gradient = DVector::from_fn(self.dim(), |i, _| {
            self.linear[i] - self.w.column(i).dot(&solved.column(i))
        });
        Some((log_det(&chol) + self.linear.dot(x), gradient))
    }

    fn project(&self, x: DVector<f64>) -> DVector<f64> {
        x.map(|v| v.max(self.floor))
    }

    /// Residual of the projected-gradient fixed point, `|P(x + g) - x|_inf`.
    /// The spectral constraint never binds at an optimum (the log-det
    /// barrier diverges there), so the box projection alone is the test.
    fn kkt_residual(&self, x: &DVector<f64>, gradient: &DVector<f64>) -> f64 {
        (self.project(x + gradient) - x).amax()
    }

    /// Projected gradient ascent with a Barzilai-Borwein initial step and
    /// Armijo backtracking along the projection arc. Backtracking also
    /// enforces strict feasibility, which plays the fraction-to-boundary
    /// role. Hitting the iteration cap returns the best iterate found with
    /// `converged = false`.
    fn solve(&self, init: &DVector<f64>, opts: &InferenceOptions) -> Result<SubproblemSolution> {
        if init.len() != self.dim() {
            return Err(SgmError::DimensionMismatch {
                expected: self.dim(),
                got: init.len(),
            });
        }
        if !self.strictly_feasible(init) {
            return Err(SgmError::InfeasibleStart(format!(
                "initial point violates constraint ({})",
                self.constraint
            )));
        }
        let mut x = init.clone();
        let (mut value, mut gradient) = self
            .value_and_gradient(&x)
            .expect("factor is positive definite at a strictly feasible point");
        let mut kkt = self.kkt_residual(&x, &gradient);
        let mut step = 1.0f64;
        let mut previous: Option<(DVector<f64>, DVector<f64>)> = None;

        let mut iterations = 0;
        while kkt > opts.kkt_tolerance && iterations < opts.max_inner_iterations {
            if let Some((prev_x, prev_gradient)) = &previous {
                let s = &x - prev_x;
                let y = prev_gradient - &gradient;
                let curvature = s.dot(&y);
                step = if curvature > 0.0 {
                    (s.dot(&s) / curvature).clamp(1e-12, 1e12)
                } else {
                    (step * 2.0).min(1e12)
                };
            }

            let mut accepted = None;
            let mut alpha = step;
            for _ in 0..80 {
                let candidate = self.project(&x + alpha * &gradient);
                let direction = &candidate - &x;
                if direction.amax() <= f64::MIN_POSITIVE {
                    break;
                }
                if self.strictly_feasible(&candidate) {
                    if let Some(candidate_value) = self.value(&candidate) {
                        if candidate_value >= value + ARMIJO_SLOPE * gradient.dot(&direction) {
                            accepted = Some(candidate);
                            break;
                        }
                    }
                }
                alpha *= 0.5;
            }
            let Some(next) = accepted else {
                break; // stalled at numerical precision; report best iterate
            };

            previous = Some((x.clone(), gradient.clone()));
            let (next_value, next_gradient) = self
                .value_and_gradient(&next)
                .expect("accepted candidates are strictly feasible");
            x = next;
            value = next_value;
            gradient = next_gradient;
            kkt = self.kkt_residual(&x, &gradient);
            iterations += 1;
        }

        Ok(SubproblemSolution {
            values: x,
            converged: kkt <= opts.kkt_tolerance,
            kkt_residual: kkt,
            iterations,
        })
    }
}

/// `I - W diag(x) W^T`, the positive definite factor of one block.
fn factor_matrix(w: &DMatrix<f64>, x: &DVector<f64>, n_edges: usize) -> DMatrix<f64> {
    let mut factor = DMatrix::identity(n_edges, n_edges);
    if !x.is_empty() {
        factor -= w * DMatrix::from_diagonal(x) * w.transpose();
    }
    factor
}
