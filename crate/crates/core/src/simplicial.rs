//! 2-dimensional simplicial complexes: validated construction, signed
//! incidence matrices, Hodge Laplacians, edge-signal decomposition, 3-clique
//! enumeration, and the random generator used by the experiment harness.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Result, SgmError};

/// A finite complex on vertices `0..n_vertices` with edges and triangles.
///
/// Canonical form: each simplex lists its vertices in increasing order and
/// the simplex sequences are sorted lexicographically. Closure holds: every
/// edge face of every triangle is itself an edge of the complex.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimplicialComplex {
    n_vertices: usize,
    edges: Vec<[usize; 2]>,
    triangles: Vec<[usize; 3]>,
    edge_index: HashMap<[usize; 2], usize>,
}

/// Signed boundary matrices of a complex.
///
/// `b1` has shape `|V| x |E|` and `b2` shape `|E| x |T|`; rows index faces.
/// Entries are in `{-1, 0, +1}` and `b1 * b2 = 0` holds exactly in integer
/// arithmetic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrices {
    pub b1: DMatrix<i32>,
    pub b2: DMatrix<i32>,
}

impl IncidenceMatrices {
    pub fn b1_real(&self) -> DMatrix<f64> {
        self.b1.map(|v| v as f64)
    }

    pub fn b2_real(&self) -> DMatrix<f64> {
        self.b2.map(|v| v as f64)
    }
}

/// Hodge Laplacians of a complex, all symmetric positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeLaplacians {
    /// `B1 * B1^T`, the graph Laplacian (size `|V|`).
    pub l0: DMatrix<f64>,
    /// `B1^T * B1` (size `|E|`).
    pub l1_down: DMatrix<f64>,
    /// `B2 * B2^T` (size `|E|`).
    pub l1_up: DMatrix<f64>,
    /// `l1_down + l1_up`.
    pub l1: DMatrix<f64>,
    /// `B2^T * B2` (size `|T|`).
    pub l2: DMatrix<f64>,
}

/// Orthogonal split of an edge signal into gradient, solenoidal and harmonic
/// parts, together with the minimizing potentials.
///
/// `gradient` lies in the column span of `B1^T`, `solenoidal` in the span of
/// `B2`, and `harmonic` in the kernel of `L1`; the three parts are pairwise
/// orthogonal and sum to the input.
#[derive(Debug, Clone, PartialEq)]
pub struct HodgeDecomposition {
    pub gradient: DVector<f64>,
    pub solenoidal: DVector<f64>,
    pub harmonic: DVector<f64>,
    /// Least-squares vertex potential: `gradient = B1^T * vertex_potential`.
    pub vertex_potential: DVector<f64>,
    /// Least-squares triangle potential: `solenoidal = B2 * triangle_potential`.
    pub triangle_potential: DVector<f64>,
}

impl SimplicialComplex {
    /// Builds a validated complex from raw simplex lists.
    ///
    /// Input pairs and triples may be in any vertex order; they are sorted
    /// into canonical form. Fails on out-of-range indices, repeated vertices
    /// within a simplex, duplicate simplices, or a triangle with a missing
    /// edge face.
    pub fn new(
        n_vertices: usize,
        edges: impl IntoIterator<Item = [usize; 2]>,
        triangles: impl IntoIterator<Item = [usize; 3]>,
    ) -> Result<Self> {
        if n_vertices == 0 {
            return Err(SgmError::InvalidInput(
                "complex must have at least one vertex".into(),
            ));
        }

        let check_index = |index: usize| {
            if index >= n_vertices {
                Err(SgmError::IndexOutOfRange { index, n_vertices })
            } else {
                Ok(())
            }
        };

        let mut edges: Vec<[usize; 2]> = edges.into_iter().collect();
        for edge in &mut edges {
            edge.sort_unstable();
            check_index(edge[1])?;
            if edge[0] == edge[1] {
                return Err(SgmError::InvalidInput(format!(
                    "edge ({}, {}) repeats a vertex",
                    edge[0], edge[1]
                )));
            }
        }
        edges.sort_unstable();
        if let Some(pair) = edges.windows(2).find(|w| w[0] == w[1]) {
            return Err(SgmError::DuplicateSimplex {
                kind: "edge",
                vertices: pair[0].to_vec(),
            });
        }

        let mut triangles: Vec<[usize; 3]> = triangles.into_iter().collect();
        for triangle in &mut triangles {
            triangle.sort_unstable();
            check_index(triangle[2])?;
            if triangle[0] == triangle[1] || triangle[1] == triangle[2] {
                return Err(SgmError::InvalidInput(format!(
                    "triangle ({}, {}, {}) repeats a vertex",
                    triangle[0], triangle[1], triangle[2]
                )));
            }
        }
        triangles.sort_unstable();
        if let Some(pair) = triangles.windows(2).find(|w| w[0] == w[1]) {
            return Err(SgmError::DuplicateSimplex {
                kind: "triangle",
                vertices: pair[0].to_vec(),
            });
        }

        let edge_index: HashMap<[usize; 2], usize> =
            edges.iter().enumerate().map(|(i, &e)| (e, i)).collect();

        for &[i, j, k] in &triangles {
            for (u, v) in [(i, j), (j, k), (i, k)] {
                if !edge_index.contains_key(&[u, v]) {
                    return Err(SgmError::DanglingFace {
                        triangle: [i, j, k],
                        u,
                        v,
                    });
                }
            }
        }

        Ok(Self {
            n_vertices,
            edges,
            triangles,
            edge_index,
        })
    }

    /// Draws a random complex: a graph with independent edge probability `q`,
    /// with every 3-clique of the result included as a candidate triangle.
    ///
    /// A uniformly random `floor(p * K)`-subset of the `K` cliques is marked
    /// filled in the returned flag vector; unflagged candidates represent
    /// hollow triangles. Deterministic in `seed`.
    pub fn random(n_vertices: usize, q: f64, p: f64, seed: u64) -> Result<(Self, Vec<bool>)> {
        if !(0.0..=1.0).contains(&q) {
            return Err(SgmError::InvalidInput(format!(
                "edge probability {q} outside [0, 1]"
            )));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(SgmError::InvalidInput(format!(
                "fill fraction {p} outside [0, 1]"
            )));
        }

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges = Vec::new();
        for i in 0..n_vertices {
            for j in (i + 1)..n_vertices {
                if rng.random::<f64>() < q {
                    edges.push([i, j]);
                }
            }
        }

        let skeleton = Self::new(n_vertices, edges, [])?;
        let cliques = skeleton.three_cliques();

        // Nudge past float representation error so e.g. 0.3 * 10 counts as 3.
        let n_filled = ((p * cliques.len() as f64 + 1e-9).floor() as usize).min(cliques.len());
        let mut flags = vec![false; cliques.len()];
        for index in rand::seq::index::sample(&mut rng, cliques.len(), n_filled) {
            flags[index] = true;
        }

        let complex = Self::new(n_vertices, skeleton.edges, cliques)?;
        Ok((complex, flags))
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    /// Position of edge `{u, v}` in the canonical edge order, if present.
    pub fn edge_position(&self, u: usize, v: usize) -> Option<usize> {
        let key = if u < v { [u, v] } else { [v, u] };
        self.edge_index.get(&key).copied()
    }

    /// Signed incidence matrices under the increasing-vertex orientation.
    ///
    /// Edge `(i, j)` with `i < j` is oriented `i -> j`, so column `e` of `b1`
    /// holds `-1` at row `i` and `+1` at row `j`. Triangle `(i, j, k)` is
    /// oriented `i -> j -> k`, giving `+1` on edges `(i, j)` and `(j, k)` and
    /// `-1` on `(i, k)`.
    pub fn incidence_matrices(&self) -> IncidenceMatrices {
        let mut b1 = DMatrix::zeros(self.n_vertices, self.edges.len());
        for (e, &[i, j]) in self.edges.iter().enumerate() {
            b1[(i, e)] = -1;
            b1[(j, e)] = 1;
        }

        let mut b2 = DMatrix::zeros(self.edges.len(), self.triangles.len());
        for (t, &[i, j, k]) in self.triangles.iter().enumerate() {
            for (u, v, sign) in [(i, j, 1), (j, k, 1), (i, k, -1)] {
                let e = self.edge_index[&[u, v]];
                b2[(e, t)] = sign;
            }
        }

        IncidenceMatrices { b1, b2 }
    }

    pub fn hodge_laplacians(&self) -> HodgeLaplacians {
        let inc = self.incidence_matrices();
        let b1 = inc.b1_real();
        let b2 = inc.b2_real();
        let l1_down = b1.transpose() * &b1;
        let l1_up = &b2 * b2.transpose();
        HodgeLaplacians {
            l0: &b1 * b1.transpose(),
            l1: &l1_down + &l1_up,
            l1_down,
            l1_up,
            l2: b2.transpose() * &b2,
        }
    }

    /// Splits an edge signal into gradient, solenoidal and harmonic parts.
    ///
    /// The potentials are least-squares solutions of `B1^T x_V ~ x_E` and
    /// `B2 x_T ~ x_E`; the two image spaces are orthogonal because
    /// `B1 * B2 = 0`, so projecting both against the raw input is exact.
    pub fn hodge_decompose(&self, x_e: &DVector<f64>) -> Result<HodgeDecomposition> {
        if x_e.len() != self.edges.len() {
            return Err(SgmError::DimensionMismatch {
                expected: self.edges.len(),
                got: x_e.len(),
            });
        }

        let inc = self.incidence_matrices();
        let vertex_potential = least_squares(&inc.b1_real().transpose(), x_e);
        let triangle_potential = least_squares(&inc.b2_real(), x_e);
        let gradient = inc.b1_real().transpose() * &vertex_potential;
        let solenoidal = inc.b2_real() * &triangle_potential;
        let harmonic = x_e - &gradient - &solenoidal;

        Ok(HodgeDecomposition {
            gradient,
            solenoidal,
            harmonic,
            vertex_potential,
            triangle_potential,
        })
    }

    /// Every vertex triple of the 1-skeleton whose three pairwise edges are
    /// present, in lexicographic order. Existing triangles are ignored.
    pub fn three_cliques(&self) -> Vec<[usize; 3]> {
        let mut adjacent = vec![vec![false; self.n_vertices]; self.n_vertices];
        for &[i, j] in &self.edges {
            adjacent[i][j] = true;
            adjacent[j][i] = true;
        }

        // Each clique (i, j, k) is found once, from its lowest edge (i, j);
        // edge order plus ascending k yields lexicographic output.
        let mut cliques = Vec::new();
        for &[i, j] in &self.edges {
            let shared = adjacent[i].iter().zip(&adjacent[j]).enumerate().skip(j + 1);
            for (k, (&near_i, &near_j)) in shared {
                if near_i && near_j {
                    cliques.push([i, j, k]);
                }
            }
        }
        cliques
    }
}

/// A least-squares solution of `a * x ~ b` via rank-revealing column-pivoted
/// Householder QR, with iterative refinement of the projection residual.
///
/// Pivoted-out columns get weight zero (basic solution). Householder QR is
/// preferred over the iterative SVD here: the latter delivers singular
/// vectors only to ~1e-9 on these matrices, which leaks across the
/// orthogonality contract of the decomposition.
fn least_squares(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return DVector::zeros(n);
    }
    let qr = a.clone().col_piv_qr();
    let r = qr.r();
    let lead = r[(0, 0)].abs();
    let rank = (0..m.min(n))
        .take_while(|&i| r[(i, i)].abs() > lead * 1e-10)
        .count();
    let q = qr.q();

    let solve = |rhs: &DVector<f64>| -> DVector<f64> {
        let qtb = q.transpose() * rhs;
        let mut z = DVector::zeros(n);
        for i in (0..rank).rev() {
            let mut s = qtb[i];
            for j in (i + 1)..rank {
                s -= r[(i, j)] * z[j];
            }
            z[i] = s / r[(i, i)];
        }
        qr.p().inv_permute_rows(&mut z);
        z
    };

    let mut x = solve(b);
    for _ in 0..2 {
        let residual = b - a * &x;
        x += solve(&residual);
    }
    x
}
