//! Python bindings: complexes, parameters, ground-truth generation, Gaussian
//! sampling, edge-marginal inference and the evaluation metrics. Matrices
//! cross the boundary as plain lists of rows so no array library is pinned.

use nalgebra::{DMatrix, DVector};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use sgm_core::model::{assemble_full_precision, sample, PrecisionScope, SampleMatrix};
use sgm_core::{InferenceOptions, InferenceResult, SgmError, SgmParams, SimplicialComplex};

fn py_err(e: SgmError) -> PyErr {
    match e {
        SgmError::IndexOutOfRange { .. }
        | SgmError::DuplicateSimplex { .. }
        | SgmError::DanglingFace { .. }
        | SgmError::DimensionMismatch { .. }
        | SgmError::InvalidInput(_)
        | SgmError::ZeroTruthNorm
        | SgmError::EmptySample => PyValueError::new_err(e.to_string()),
        other => PyRuntimeError::new_err(other.to_string()),
    }
}

fn rows_to_matrix(rows: &[Vec<f64>]) -> PyResult<DMatrix<f64>> {
    let n_rows = rows.len();
    if n_rows == 0 {
        return Err(PyValueError::new_err("expected at least one row"));
    }
    let n_cols = rows[0].len();
    if rows.iter().any(|r| r.len() != n_cols) {
        return Err(PyValueError::new_err("rows must all have the same length"));
    }
    Ok(DMatrix::from_fn(n_rows, n_cols, |i, j| rows[i][j]))
}

fn matrix_to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// A 2-dimensional simplicial complex: vertices, edges, and triangles whose
/// edge faces are all present.
#[pyclass(frozen, name = "SimplicialComplex", module = "sgm")]
struct PyComplex {
    inner: SimplicialComplex,
}

#[pymethods]
impl PyComplex {
    #[new]
    fn new(
        n_vertices: usize,
        edges: Vec<[usize; 2]>,
        triangles: Vec<[usize; 3]>,
    ) -> PyResult<Self> {
        Ok(Self {
            inner: SimplicialComplex::new(n_vertices, edges, triangles).map_err(py_err)?,
        })
    }

    /// Erdos-Renyi 1-skeleton with edge probability `edge_probability`; every
    /// 3-clique becomes a candidate triangle and is filled with probability
    /// `fill_fraction`. Returns the complex and the per-candidate fill flags.
    #[staticmethod]
    fn random(
        n_vertices: usize,
        edge_probability: f64,
        fill_fraction: f64,
        seed: u64,
    ) -> PyResult<(Self, Vec<bool>)> {
        let (inner, flags) =
            SimplicialComplex::random(n_vertices, edge_probability, fill_fraction, seed)
                .map_err(py_err)?;
        Ok((Self { inner }, flags))
    }

    #[getter]
    fn n_vertices(&self) -> usize {
        self.inner.n_vertices()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.n_edges()
    }

    #[getter]
    fn n_triangles(&self) -> usize {
        self.inner.n_triangles()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges().iter().map(|&[u, v]| (u, v)).collect()
    }

    fn triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .triangles()
            .iter()
            .map(|&[i, j, k]| (i, j, k))
            .collect()
    }

    fn three_cliques(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .three_cliques()
            .iter()
            .map(|&[i, j, k]| (i, j, k))
            .collect()
    }

    /// Signed vertex-edge and edge-triangle incidence matrices as row lists.
    fn incidence_matrices(&self) -> (Vec<Vec<i32>>, Vec<Vec<i32>>) {
        let inc = self.inner.incidence_matrices();
        let rows = |m: &DMatrix<i32>| -> Vec<Vec<i32>> {
            (0..m.nrows())
                .map(|i| m.row(i).iter().copied().collect())
                .collect()
        };
        (rows(&inc.b1), rows(&inc.b2))
    }

    /// Splits an edge signal into its gradient, solenoidal and harmonic parts.
    fn hodge_decompose(&self, x: Vec<f64>) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
        let parts = self
            .inner
            .hodge_decompose(&DVector::from_vec(x))
            .map_err(py_err)?;
        Ok((
            parts.gradient.iter().copied().collect(),
            parts.solenoidal.iter().copied().collect(),
            parts.harmonic.iter().copied().collect(),
        ))
    }

    fn __repr__(&self) -> String {
        format!(
            "SimplicialComplex(n_vertices={}, n_edges={}, n_triangles={})",
            self.inner.n_vertices(),
            self.inner.n_edges(),
            self.inner.n_triangles(),
        )
    }
}

/// Model parameters: one weight per vertex (`d_v`), one per triangle (`d_t`),
/// and the shared edge scale `k`.
#[pyclass(frozen, name = "SgmParams", module = "sgm")]
struct PyParams {
    inner: SgmParams,
}

#[pymethods]
impl PyParams {
    #[new]
    fn new(k: f64, d_v: Vec<f64>, d_t: Vec<f64>) -> Self {
        Self {
            inner: SgmParams {
                d_v: DVector::from_vec(d_v),
                d_t: DVector::from_vec(d_t),
                k,
            },
        }
    }

    #[getter]
    fn k(&self) -> f64 {
        self.inner.k
    }

    #[getter]
    fn d_v(&self) -> Vec<f64> {
        self.inner.d_v.iter().copied().collect()
    }

    #[getter]
    fn d_t(&self) -> Vec<f64> {
        self.inner.d_t.iter().copied().collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "SgmParams(k={}, |d_v|={}, |d_t|={})",
            self.inner.k,
            self.inner.d_v.len(),
            self.inner.d_t.len(),
        )
    }
}

/// Outcome of `infer`: the recovered parameters, the objective trace, and the
/// candidate triangles surviving each pruning threshold.
#[pyclass(frozen, name = "InferenceResult", module = "sgm")]
struct PyInferenceResult {
    inner: InferenceResult,
}

#[pymethods]
impl PyInferenceResult {
    #[getter]
    fn k_hat(&self) -> f64 {
        self.inner.k_hat
    }

    #[getter]
    fn d_v_hat(&self) -> Vec<f64> {
        self.inner.d_v_hat.iter().copied().collect()
    }

    #[getter]
    fn d_t_hat(&self) -> Vec<f64> {
        self.inner.d_t_hat.iter().copied().collect()
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.objective_trace.clone()
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    /// `(threshold, surviving candidate indices)` pairs, ascending threshold.
    #[getter]
    fn active_triangles(&self) -> Vec<(f64, Vec<usize>)> {
        self.inner.active_triangles.clone()
    }

    /// Candidate triangles, index-aligned with `d_t_hat`.
    #[getter]
    fn candidate_triangles(&self) -> Vec<(usize, usize, usize)> {
        self.inner
            .candidate_triangles
            .iter()
            .map(|&[i, j, k]| (i, j, k))
            .collect()
    }

    /// The point estimate as `SgmParams`.
    fn params(&self) -> PyParams {
        PyParams {
            inner: SgmParams {
                d_v: self.inner.d_v_hat.clone(),
                d_t: self.inner.d_t_hat.clone(),
                k: self.inner.k_hat,
            },
        }
    }

    fn __repr__(&self) -> String {
        format!(
            "InferenceResult(k_hat={}, converged={}, iterations={})",
            self.inner.k_hat, self.inner.converged, self.inner.iterations,
        )
    }
}

/// Draws feasible ground-truth parameters: vertex and filled-triangle weights
/// uniform over `d_range`, unfilled triangles zero, and `k` set `k_margin`
/// times the spectral bound so the joint precision stays positive definite.
#[pyfunction]
#[pyo3(signature = (complex, flags, seed, d_range = (0.2, 1.0), k_margin = 1.5))]
fn generate_ground_truth(
    complex: PyRef<'_, PyComplex>,
    flags: Vec<bool>,
    seed: u64,
    d_range: (f64, f64),
    k_margin: f64,
) -> PyResult<PyParams> {
    let inner = sgm_core::generate_ground_truth(
        &complex.inner,
        &flags,
        [d_range.0, d_range.1],
        k_margin,
        seed,
    )
    .map_err(py_err)?;
    Ok(PyParams { inner })
}

/// Draws `m` joint Gaussian samples and returns the edge block, one row per
/// sample with columns in edge order.
#[pyfunction]
fn sample_edges(
    complex: PyRef<'_, PyComplex>,
    params: PyRef<'_, PyParams>,
    m: usize,
    seed: u64,
) -> PyResult<Vec<Vec<f64>>> {
    let omega = assemble_full_precision(&complex.inner, &params.inner).map_err(py_err)?;
    let draws = sample(&omega, m, seed).map_err(py_err)?;
    let edge = draws.edge_block().map_err(py_err)?;
    Ok(matrix_to_rows(&edge.data))
}

/// The precision matrix of the edge variables after the closed-form
/// marginalization of vertices and triangles, as a row list.
#[pyfunction]
fn edge_marginal_precision(
    complex: PyRef<'_, PyComplex>,
    params: PyRef<'_, PyParams>,
) -> PyResult<Vec<Vec<f64>>> {
    let omega =
        sgm_core::model::edge_marginal_precision(&complex.inner, &params.inner).map_err(py_err)?;
    Ok(matrix_to_rows(omega.matrix()))
}

/// Maximum-likelihood recovery of `(k, d_v, d_t)` and the active triangles
/// from edge observations (rows of edge samples). Candidate triangles are the
/// 3-cliques of the complex's edge graph.
#[pyfunction]
#[pyo3(signature = (
    complex,
    rows,
    objective_tolerance = None,
    kkt_tolerance = None,
    max_outer_iterations = None,
    max_inner_iterations = None,
    thresholds = None,
))]
fn infer(
    complex: PyRef<'_, PyComplex>,
    rows: Vec<Vec<f64>>,
    objective_tolerance: Option<f64>,
    kkt_tolerance: Option<f64>,
    max_outer_iterations: Option<usize>,
    max_inner_iterations: Option<usize>,
    thresholds: Option<Vec<f64>>,
) -> PyResult<PyInferenceResult> {
    let data = rows_to_matrix(&rows)?;
    let samples = SampleMatrix {
        scope: PrecisionScope::Edge {
            n_edges: data.ncols(),
        },
        data,
    };

    let mut opts = InferenceOptions::default();
    if let Some(v) = objective_tolerance {
        opts.objective_tolerance = v;
    }
    if let Some(v) = kkt_tolerance {
        opts.kkt_tolerance = v;
    }
    if let Some(v) = max_outer_iterations {
        opts.max_outer_iterations = v;
    }
    if let Some(v) = max_inner_iterations {
        opts.max_inner_iterations = v;
    }
    if let Some(v) = thresholds {
        opts.thresholds = v;
    }

    let inner = sgm_core::infer_from_samples(&samples, &complex.inner, &opts).map_err(py_err)?;
    Ok(PyInferenceResult { inner })
}

/// F1 score between two index sets; both empty counts as perfect.
#[pyfunction]
fn f1_score(truth: Vec<usize>, predicted: Vec<usize>) -> f64 {
    sgm_core::f1_score(&truth, &predicted)
}

/// Normalized mean squared error between two parameter sets.
#[pyfunction]
fn nmse(estimate: PyRef<'_, PyParams>, truth: PyRef<'_, PyParams>) -> PyResult<f64> {
    sgm_core::nmse(&estimate.inner, &truth.inner).map_err(py_err)
}

/// Whether `(k, d_v, d_t)` is exactly recoverable from the edge marginal.
#[pyfunction]
fn parameters_identifiable(complex: PyRef<'_, PyComplex>) -> bool {
    sgm_core::parameters_identifiable(&complex.inner)
}

#[pymodule]
fn _sgm(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_class::<PyComplex>()?;
    m.add_class::<PyParams>()?;
    m.add_class::<PyInferenceResult>()?;
    m.add_function(wrap_pyfunction!(generate_ground_truth, m)?)?;
    m.add_function(wrap_pyfunction!(sample_edges, m)?)?;
    m.add_function(wrap_pyfunction!(edge_marginal_precision, m)?)?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(f1_score, m)?)?;
    m.add_function(wrap_pyfunction!(nmse, m)?)?;
    m.add_function(wrap_pyfunction!(parameters_identifiable, m)?)?;
    Ok(())
}
