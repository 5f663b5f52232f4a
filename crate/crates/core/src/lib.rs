//! Simplicial Gaussian models on 2-dimensional simplicial complexes.
//!
//! The crate covers the full pipeline: complex construction and random
//! generation (`simplicial`), assembly of the joint vertex/edge/triangle
//! precision matrix with its edge-level marginal and a Gaussian sampler
//! (`model`), maximum-likelihood recovery of the parameters and the latent
//! triangle set from edge observations (`inference`), detection and
//! estimation metrics plus the experiment sweep (`evaluation`), and file
//! formats shared with the command-line tool (`io`).

pub mod error;
pub mod evaluation;
pub mod inference;
pub mod io;
pub mod model;
pub mod simplicial;

pub use error::{Result, SgmError};
pub use evaluation::{
    emit_plot_data, f1_score, generate_ground_truth, nmse, run_experiment, summarize, CellSummary,
    ExperimentConfig, ExperimentReport, TrialFailure, TrialRecord,
};
pub use inference::{
    infer, infer_from_samples, marginal_objective, objective, parameters_identifiable,
    prune_triangles, sample_covariance, solve_triangle_subproblem, solve_vertex_subproblem,
    triangle_block_gradient, update_k, vertex_block_gradient, InferenceOptions, InferenceResult,
    SampleCovariance, SubproblemSolution,
};
pub use model::{
    assemble_full_precision, edge_marginal_precision, factorized_edge_precision,
    regression_decomposition, sample, schur_complement, PrecisionMatrix, PrecisionScope,
    RegressionDecomposition, SampleMatrix, SgmParams,
};
pub use simplicial::{HodgeDecomposition, HodgeLaplacians, IncidenceMatrices, SimplicialComplex};
