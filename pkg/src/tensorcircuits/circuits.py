"""End-to-end network evaluation of the decomposition models.

An instance is a stack of N input vectors in R^s (an (N, s) array).  The
representation layer applies a bank of M parametric channel functions to
every input vector, producing an (M, N) activation grid: entry (d, i) is
channel d evaluated on vector i.  Scores are then computed either

* directly from a full coefficient tensor by enumerating all M^N channel
  assignments (:func:`score_via_tensor`, the O(M^N) reference path), or
* through the factorized circuits (:func:`cp_forward`, :func:`ht_forward`):
  per-position 1x1 linear mixing (weighted channel sums, position-unshared
  unless the decomposition is shared), product pooling, and a dense linear
  output layer.  These run in time polynomial in the decomposition size and
  never touch the M^N enumeration space.

All evaluation is pure; batches of instances may be processed concurrently
without coordination.
"""

from __future__ import annotations

import numpy as np

from tensorcircuits.decompositions import CpDecomposition, HtDecomposition

__all__ = [
    "RepresentationFamily",
    "representation_layer",
    "score_via_tensor",
    "cp_forward",
    "ht_forward",
    "classify",
    "ENUMERATION_CAP",
]

#: Default cap on the M^N enumeration size of the reference scoring path.
ENUMERATION_CAP = 10**7

_ACTIVATIONS = ("threshold", "relu", "sigmoid")


def _stable_sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class RepresentationFamily:
    """Bank of M per-channel representation functions.

    Construct with :meth:`gaussian` (diagonal-covariance densities, one mean
    and variance vector per channel) or :meth:`neuron` (affine map followed
    by a pointwise activation; the threshold activation is 1 for strictly
    positive pre-activations and 0 at the boundary).
    """

    def __init__(self, kind: str, **params):
        self.kind = kind
        self.params = params

    @classmethod
    def gaussian(cls, means, variances) -> "RepresentationFamily":
        means = np.atleast_2d(np.asarray(means, dtype=float))
        variances = np.atleast_2d(np.asarray(variances, dtype=float))
        if means.shape != variances.shape:
            raise ValueError(
                f"means shape {means.shape} differs from variances shape "
                f"{variances.shape}"
            )
        if np.any(variances <= 0.0):
            raise ValueError("all variances must be strictly positive")
        return cls("gaussian", means=means, variances=variances)

    @classmethod
    def neuron(cls, weights, biases, activation: str = "relu") -> "RepresentationFamily":
        weights = np.atleast_2d(np.asarray(weights, dtype=float))
        biases = np.atleast_1d(np.asarray(biases, dtype=float))
        if weights.shape[0] != biases.shape[0]:
            raise ValueError(
                f"{weights.shape[0]} weight vectors but {biases.shape[0]} biases"
            )
        if activation not in _ACTIVATIONS:
            raise ValueError(
                f"unknown activation {activation!r}; expected one of {_ACTIVATIONS}"
            )
        return cls("neuron", weights=weights, biases=biases, activation=activation)

    @property
    def n_channels(self) -> int:
        key = "means" if self.kind == "gaussian" else "weights"
        return self.params[key].shape[0]

    @property
    def input_dim(self) -> int:
        key = "means" if self.kind == "gaussian" else "weights"
        return self.params[key].shape[1]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Apply all channels to all vectors of an (N, s) instance."""
        if self.kind == "gaussian":
            means = self.params["means"]          # (M, s)
            variances = self.params["variances"]  # (M, s)
            diff = x[None, :, :] - means[:, None, :]
            log_density = -0.5 * np.sum(
                diff * diff / variances[:, None, :]
                + np.log(2.0 * np.pi * variances[:, None, :]),
                axis=2,
            )
            return np.exp(log_density)
        pre = self.params["weights"] @ x.T + self.params["biases"][:, None]
        activation = self.params["activation"]
        if activation == "threshold":
            return (pre > 0.0).astype(float)
        if activation == "relu":
            return np.maximum(pre, 0.0)
        return _stable_sigmoid(pre)


def representation_layer(x, family: RepresentationFamily) -> np.ndarray:
    """Activation grid of the family on an instance: entry (d, i) is channel
    d applied to input vector i."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != family.input_dim:
        raise ValueError(
            f"instance vectors have dimension {x.shape[1]}, family expects "
            f"{family.input_dim}"
        )
    grid = family.evaluate(x)
    if not np.all(np.isfinite(grid)):
        raise ValueError("representation layer produced non-finite activations")
    return grid


def _check_grid(grid, n_modes: int, mode_dim: int) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.shape != (mode_dim, n_modes):
        raise ValueError(
            f"grid shape {grid.shape} does not match expected "
            f"(mode_dim={mode_dim}, n_modes={n_modes})"
        )
    return grid


def score_via_tensor(a, grid, enumeration_cap: int = ENUMERATION_CAP) -> float:
    """Score of one class by direct enumeration of the defining sum.

    Contracts the full coefficient tensor against the rank-1 tensor of all
    channel-assignment products.  O(M^N) reference path, usable only at desk
    scale; sizes above ``enumeration_cap`` are refused.
    """
    a = np.asarray(a, dtype=float)
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2:
        raise ValueError(f"grid must be 2-D, got shape {grid.shape}")
    m, n = grid.shape
    if a.shape != (m,) * n:
        raise ValueError(
            f"tensor shape {a.shape} does not match grid shape {grid.shape}"
        )
    if m**n > enumeration_cap:
        raise ValueError(
            f"enumeration of {m}^{n} terms exceeds the cap of {enumeration_cap}"
        )
    basis = grid[:, 0]
    for i in range(1, n):
        basis = np.multiply.outer(basis, grid[:, i])
    return float(np.dot(a.ravel(), basis.ravel()))


def cp_forward(cp: CpDecomposition, grid) -> np.ndarray:
    """All class scores of the single-hidden-layer circuit.

    1x1 mixing with Z channels at every position, global product pooling,
    dense output.  O(Z*N*M + Z*Y); equals the tensor path on the
    reconstructed coefficient tensors.
    """
    grid = _check_grid(grid, cp.n_modes, cp.mode_dim)
    conv = np.einsum("znm,mn->zn", cp.factors_expanded(), grid)
    pooled = conv.prod(axis=1)
    return cp.class_weights @ pooled


def ht_forward(ht: HtDecomposition, grid) -> np.ndarray:
    """All class scores of the deep circuit.

    Alternates 1x1 mixing with size-2 product pooling for each built level;
    a truncated decomposition ends with a premature global product pool over
    the remaining positions before the dense output layer.
    """
    grid = _check_grid(grid, ht.n_modes, ht.mode_dim)
    values = np.einsum("jgm,mj->jg", ht.leaf_array(), grid)  # (N, r0)
    for weights in ht.level_weight_arrays():
        pooled = values[0::2] * values[1::2]
        values = np.einsum("jga,ja->jg", weights, pooled)
    pooled_top = values.prod(axis=0)
    return ht.top_weights @ pooled_top


def classify(scores) -> int:
    """Index of the maximal score; ties break toward the lowest index."""
    scores = np.asarray(scores, dtype=float)
    if scores.size == 0:
        raise ValueError("cannot classify an empty score vector")
    return int(np.argmax(scores))
