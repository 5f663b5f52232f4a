//! Independent oracles for the acceptance gate. Everything here rebuilds the
//! quantities under test from first principles (simplex lists, dense linear
//! algebra, generic numeric routines) rather than calling the library paths
//! being verified.

use nalgebra::{Cholesky, DMatrix, DVector};
use sgm_core::{SgmParams, SimplicialComplex};

/// Signed incidence matrices rebuilt from the simplex lists alone.
/// Edge (u, v) with u < v leaves u (entry -1) and enters v (entry +1);
/// triangle (i, j, k) with i < j < k has boundary +(i,j) + (j,k) - (i,k).
pub fn incidence_from_lists(complex: &SimplicialComplex) -> (DMatrix<f64>, DMatrix<f64>) {
    let edges = complex.edges();
    let triangles = complex.triangles();
    let mut b1 = DMatrix::zeros(complex.n_vertices(), edges.len());
    for (e, &[u, v]) in edges.iter().enumerate() {
        b1[(u, e)] = -1.0;
        b1[(v, e)] = 1.0;
    }
    let edge_position = |u: usize, v: usize| -> usize {
        edges
            .iter()
            .position(|&pair| pair == [u, v])
            .expect("closure guarantees the face")
    };
    let mut b2 = DMatrix::zeros(edges.len(), triangles.len());
    for (t, &[i, j, k]) in triangles.iter().enumerate() {
        b2[(edge_position(i, j), t)] = 1.0;
        b2[(edge_position(j, k), t)] = 1.0;
        b2[(edge_position(i, k), t)] = -1.0;
    }
    (b1, b2)
}

/// `O_E = k I - B1^T diag(d_V) B1 - B2 diag(d_T) B2^T` assembled directly.
pub fn edge_precision_direct(complex: &SimplicialComplex, params: &SgmParams) -> DMatrix<f64> {
    let (b1, b2) = incidence_from_lists(complex);
    let n = complex.n_edges();
    DMatrix::identity(n, n) * params.k
        - b1.transpose() * DMatrix::from_diagonal(&params.d_v) * &b1
        - &b2 * DMatrix::from_diagonal(&params.d_t) * b2.transpose()
}

/// Exact edge covariance `O_E^{-1}`, symmetrized against inversion noise.
pub fn population_edge_covariance(complex: &SimplicialComplex, params: &SgmParams) -> DMatrix<f64> {
    let sigma = edge_precision_direct(complex, params)
        .try_inverse()
        .expect("ground-truth parameters keep the marginal positive definite");
    0.5 * (&sigma + sigma.transpose())
}

/// Gaussian log-likelihood (up to constants) `log det O_E - tr(C O_E)` at
/// the given parameters, evaluated with the oracle's own assembly.
pub fn gaussian_objective(
    complex: &SimplicialComplex,
    c: &DMatrix<f64>,
    params: &SgmParams,
) -> f64 {
    let omega = edge_precision_direct(complex, params);
    let chol = Cholesky::new(omega.clone()).expect("evaluation point must be feasible");
    log_det(&chol) - c.component_mul(&omega).sum()
}

fn log_det(chol: &Cholesky<f64, nalgebra::Dyn>) -> f64 {
    chol.l_dirty().diagonal().map(f64::ln).sum() * 2.0
}

/// Golden-section maximizer over `[lo, hi]` driven by a pairwise comparison
/// `prefer_right(x1, x2) = f(x2) > f(x1)` for `x1 < x2`. Taking comparisons
/// instead of values lets callers evaluate objective differences in an
/// analytically cancelled form, so the bracket stays informative far below
/// the sqrt(machine-epsilon) floor of value-based search.
pub fn golden_section_argmax(
    prefer_right: impl Fn(f64, f64) -> bool,
    mut lo: f64,
    mut hi: f64,
    tol: f64,
) -> f64 {
    let phi = (5.0f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - phi * (hi - lo);
    let mut x2 = lo + phi * (hi - lo);
    while (hi - lo) > tol * hi.abs().max(1.0) {
        if prefer_right(x1, x2) {
            lo = x1;
            x1 = x2;
            x2 = lo + phi * (hi - lo);
        } else {
            hi = x2;
            x2 = x1;
            x1 = hi - phi * (hi - lo);
        }
    }
    0.5 * (lo + hi)
}

/// Central finite-difference gradient of `f` at `x` with step `h`.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut up = x.clone();
        up[i] += h;
        let mut down = x.clone();
        down[i] -= h;
        (f(&up) - f(&down)) / (2.0 * h)
    })
}

pub struct MonolithicSolution {
    pub params: SgmParams,
    pub objective: f64,
    pub kkt_residual: f64,
}

/// Reference maximizer of `log det O_E - tr(C O_E)` over all parameters
/// jointly: projected gradient ascent on the concatenated vector
/// `(d_V, d_T, k)` with nonnegativity bounds and a positive-definiteness
/// margin, Barzilai-Borwein steps, and Armijo backtracking. The objective is
/// concave in these parameters (`O_E` is affine in them), so the projected
/// stationary point it reaches is the global maximum.
pub fn monolithic_mle(
    complex: &SimplicialComplex,
    c: &DMatrix<f64>,
    kkt_tolerance: f64,
    max_iterations: usize,
) -> MonolithicSolution {
    let (b1, b2) = incidence_from_lists(complex);
    let n_v = complex.n_vertices();
    let n_t = complex.n_triangles();
    let n_e = complex.n_edges();
    let dim = n_v + n_t + 1;
    let identity = DMatrix::identity(n_e, n_e);

    let omega_at = |x: &DVector<f64>| -> DMatrix<f64> {
        let d_v = x.rows(0, n_v).into_owned();
        let d_t = x.rows(n_v, n_t).into_owned();
        let k = x[dim - 1];
        &identity * k
            - b1.transpose() * DMatrix::from_diagonal(&d_v) * &b1
            - &b2 * DMatrix::from_diagonal(&d_t) * b2.transpose()
    };
    let value_at = |x: &DVector<f64>| -> Option<f64> {
        let omega = omega_at(x);
        let chol = Cholesky::new(omega.clone())?;
        Some(log_det(&chol) - c.component_mul(&omega).sum())
    };
    // df/dd_v[i] = -r_i^T O^-1 r_i + r_i^T C r_i with r_i the i-th row of B1
    // (as a column); triangles likewise with B2 columns; df/dk = tr(O^-1) - tr(C).
    let gradient_at = |x: &DVector<f64>| -> Option<DVector<f64>> {
        let omega = omega_at(x);
        let inverse = Cholesky::new(omega)?.inverse();
        let mut g = DVector::zeros(dim);
        for i in 0..n_v {
            let r = b1.row(i).transpose();
            g[i] = -r.dot(&(&inverse * &r)) + r.dot(&(c * &r));
        }
        for j in 0..n_t {
            let col = b2.column(j).into_owned();
            g[n_v + j] = -col.dot(&(&inverse * &col)) + col.dot(&(c * &col));
        }
        g[dim - 1] = inverse.trace() - c.trace();
        Some(g)
    };
    let project = |x: DVector<f64>| -> DVector<f64> {
        let mut p = x;
        for i in 0..dim - 1 {
            p[i] = p[i].max(0.0);
        }
        p[dim - 1] = p[dim - 1].max(1e-10);
        p
    };
    let feasible = |x: &DVector<f64>| -> bool {
        x.iter().take(dim - 1).all(|&v| v >= 0.0)
            && x[dim - 1] > 0.0
            && Cholesky::new(omega_at(x) - &identity * 1e-10).is_some()
    };

    // Small weights with k = N / tr(C) are strictly feasible at these scales.
    let k0 = n_e as f64 / c.trace();
    let mut x = DVector::from_element(dim, 1e-3 * k0);
    x[dim - 1] = k0;
    assert!(feasible(&x), "monolithic start infeasible");

    let mut value = value_at(&x).expect("feasible start");
    let mut gradient = gradient_at(&x).expect("feasible start");
    let kkt = |x: &DVector<f64>, g: &DVector<f64>| (project(x + g) - x).amax();
    let mut residual = kkt(&x, &gradient);
    let mut step = 1.0f64;
    let mut previous: Option<(DVector<f64>, DVector<f64>)> = None;

    for _ in 0..max_iterations {
        if residual <= kkt_tolerance {
            break;
        }
        if let Some((px, pg)) = &previous {
            let s = &x - px;
            let y = pg - &gradient;
            let curvature = s.dot(&y);
            step = if curvature > 0.0 {
                (s.dot(&s) / curvature).clamp(1e-12, 1e12)
            } else {
                (step * 2.0).min(1e12)
            };
        }
        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..90 {
            let candidate = project(&x + alpha * &gradient);
            let direction = &candidate - &x;
            if direction.amax() <= f64::MIN_POSITIVE {
                break;
            }
            if feasible(&candidate) {
                if let Some(candidate_value) = value_at(&candidate) {
                    if candidate_value >= value + 1e-4 * gradient.dot(&direction) {
                        accepted = Some((candidate, candidate_value));
                        break;
                    }
                }
            }
            alpha *= 0.5;
        }
        let Some((next, next_value)) = accepted else {
            break;
        };
        previous = Some((x.clone(), gradient.clone()));
        x = next;
        value = next_value;
        gradient = gradient_at(&x).expect("accepted step is feasible");
        residual = kkt(&x, &gradient);
    }

    MonolithicSolution {
        params: SgmParams {
            d_v: x.rows(0, n_v).into_owned(),
            d_t: x.rows(n_v, n_t).into_owned(),
            k: x[dim - 1],
        },
        objective: value,
        kkt_residual: residual,
    }
}
