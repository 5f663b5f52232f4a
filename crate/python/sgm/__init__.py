"""Gaussian models on 2-dimensional simplicial complexes.

Joint Gaussian variables live on vertices, edges and triangles with a
block-structured precision matrix; the edge marginal has a closed form whose
parameters (vertex weights, triangle weights, edge scale) are recovered from
edge observations alone by block-coordinate maximum likelihood. Thresholding
the recovered triangle weights detects which candidate triangles are filled.
"""

from ._sgm import (
    InferenceResult,
    SgmParams,
    SimplicialComplex,
    __version__,
    edge_marginal_precision,
    f1_score,
    generate_ground_truth,
    infer,
    nmse,
    parameters_identifiable,
    sample_edges,
)

__all__ = [
    "InferenceResult",
    "SgmParams",
    "SimplicialComplex",
    "__version__",
    "edge_marginal_precision",
    "f1_score",
    "generate_ground_truth",
    "infer",
    "nmse",
    "parameters_identifiable",
    "sample_edges",
]
