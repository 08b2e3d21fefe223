"""Tensor decompositions, their arithmetic-circuit forms, and rank experiments."""

from tensorcircuits.circuits import (
    RepresentationFamily,
    classify,
    cp_forward,
    ht_forward,
    representation_layer,
    score_via_tensor,
)
from tensorcircuits.decompositions import (
    CpDecomposition,
    HtDecomposition,
    cp_reconstruct,
    embed_cp_in_ht,
    ht_reconstruct,
    make_shared,
    param_count,
    sample_random,
)
from tensorcircuits.experiments import (
    ExperimentConfig,
    ExperimentReport,
    run_experiment,
)
from tensorcircuits.logspace import logspace_forward, mex
from tensorcircuits.tensors import (
    RANK_REL_TOL,
    cp_rank_lower_bound,
    is_symmetric,
    kronecker,
    low_rank_residual,
    matricize,
    numerical_rank,
    squeeze,
    tensor_product,
)

__version__ = "0.1.0"

__all__ = [
    "CpDecomposition",
    "ExperimentConfig",
    "ExperimentReport",
    "HtDecomposition",
    "RANK_REL_TOL",
    "RepresentationFamily",
    "classify",
    "cp_forward",
    "cp_rank_lower_bound",
    "cp_reconstruct",
    "embed_cp_in_ht",
    "ht_forward",
    "ht_reconstruct",
    "is_symmetric",
    "kronecker",
    "logspace_forward",
    "low_rank_residual",
    "make_shared",
    "matricize",
    "mex",
    "numerical_rank",
    "param_count",
    "representation_layer",
    "run_experiment",
    "sample_random",
    "score_via_tensor",
    "squeeze",
    "tensor_product",
    "__version__",
]
