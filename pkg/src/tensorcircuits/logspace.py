"""Numerically stable log-space evaluation of the circuits.

The primitive is the MEX operator

    mex(beta, x, b) = (1/beta) * log( (1/n) * sum_j exp(beta * (x_j + b_j)) )

computed with the usual max-shift so only non-positive numbers are ever
exponentiated.  ``beta = 0`` is handled as its limit, the plain mean of
``x + b``.  MEX interpolates between mean (beta -> 0), max (beta -> +inf)
and min (beta -> -inf).

:func:`logspace_forward` evaluates a forward pass entirely on logarithms of
activations.  Both circuit operations reduce to MEX:

* a weighted sum of n activations becomes log-sum-exp over the log-weights
  plus log-activations, i.e. ``mex(1, terms, 0) + log(n)`` (the added
  ``log n`` cancels MEX's 1/n normalization);
* product pooling over n activations becomes the sum of their logs, which is
  exactly ``n * mex(0, logs, 0)``; the code sums directly, which is the same
  quantity.

A weight of exactly 0 would contribute ``log 0``; it is carried as a -inf
sentinel that drops out of every log-sum-exp (exp maps it to 0).  If all
terms of a sum are absent, the sum itself is the sentinel, and ``exp`` of the
final log-score correctly reports a 0 score.  Requires all decomposition
weights to be non-negative and all grid activations to be strictly positive,
which is checked up front with the offending parameter named.
"""

from __future__ import annotations

import numpy as np

from tensorcircuits.decompositions import CpDecomposition, HtDecomposition

__all__ = ["mex", "logspace_forward"]


def _log_sum_exp(a: np.ndarray, axis: int) -> np.ndarray:
    """Max-shifted log(sum(exp(a))) along an axis, -inf rows staying -inf."""
    top = np.max(a, axis=axis, keepdims=True)
    shift = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - shift), axis=axis))
    return out + np.squeeze(shift, axis=axis)


def mex(beta: float, x, b) -> float:
    """The MEX operator with max-shift stabilization.

    ``beta = 0`` returns the mean of ``x + b`` (the limit value).
    """
    x = np.asarray(x, dtype=float)
    b = np.asarray(b, dtype=float)
    if x.ndim != 1 or b.ndim != 1:
        raise ValueError("mex expects 1-D inputs")
    if x.size == 0:
        raise ValueError("mex of an empty vector is undefined")
    if x.shape != b.shape:
        raise ValueError(
            f"offsets length {b.size} does not match input length {x.size}"
        )
    total = x + b
    if beta == 0.0:
        return float(np.mean(total))
    scaled = beta * total
    return float((_log_sum_exp(scaled, axis=0) - np.log(x.size)) / beta)


def _checked_log(values: np.ndarray, describe) -> np.ndarray:
    """Elementwise log of non-negative weights, 0 -> -inf sentinel.

    ``describe`` maps the index tuple of an offending entry to its name.
    """
    if np.any(values < 0.0):
        idx = tuple(int(k) for k in np.argwhere(values < 0.0)[0])
        raise ValueError(
            f"log-space evaluation requires non-negative weights, but "
            f"{describe(idx)} = {values[idx]}"
        )
    with np.errstate(divide="ignore"):
        return np.log(values)


def _checked_log_grid(grid: np.ndarray) -> np.ndarray:
    if np.any(~(grid > 0.0)):
        d, i = (int(k) for k in np.argwhere(~(grid > 0.0))[0])
        raise ValueError(
            f"log-space evaluation requires strictly positive activations, "
            f"but grid[d={d}, i={i}] = {grid[d, i]}"
        )
    return np.log(grid)


def logspace_forward(decomp, grid) -> np.ndarray:
    """Log of the class scores, computed without ever leaving log space.

    ``exp`` of the result equals the direct forward scores whenever those are
    representable; the log-space value stays finite for any depth at which
    the individual log-activations are finite.
    """
    grid = np.asarray(grid, dtype=float)
    if isinstance(decomp, CpDecomposition):
        return _logspace_cp(decomp, grid)
    if isinstance(decomp, HtDecomposition):
        return _logspace_ht(decomp, grid)
    raise TypeError(f"unsupported decomposition type {type(decomp).__name__}")


def _logspace_cp(cp: CpDecomposition, grid: np.ndarray) -> np.ndarray:
    if grid.shape != (cp.mode_dim, cp.n_modes):
        raise ValueError(
            f"grid shape {grid.shape} does not match expected "
            f"(mode_dim={cp.mode_dim}, n_modes={cp.n_modes})"
        )
    log_factors = _checked_log(
        np.asarray(cp.factors_expanded()),
        lambda k: f"factors[z={k[0]}, i={k[1]}, d={k[2]}]",
    )
    log_weights = _checked_log(
        cp.class_weights, lambda k: f"class_weights[y={k[0]}, z={k[1]}]"
    )
    log_grid = _checked_log_grid(grid)
    # (Z, N, M) terms: log factor + log activation; sum over channels.
    conv = _log_sum_exp(log_factors + log_grid.T[None, :, :], axis=2)  # (Z, N)
    pooled = conv.sum(axis=1)  # product pooling: sum of logs
    return _log_sum_exp(log_weights + pooled[None, :], axis=1)


def _logspace_ht(ht: HtDecomposition, grid: np.ndarray) -> np.ndarray:
    if grid.shape != (ht.mode_dim, ht.n_modes):
        raise ValueError(
            f"grid shape {grid.shape} does not match expected "
            f"(mode_dim={ht.mode_dim}, n_modes={ht.n_modes})"
        )
    log_leaf = _checked_log(
        np.asarray(ht.leaf_array()),
        lambda k: f"leaf_vectors[j={k[0]}, channel={k[1]}, d={k[2]}]",
    )
    log_levels = [
        _checked_log(
            np.asarray(w),
            lambda k, level=l: (
                f"level_weights[l={level}][j={k[0]}, channel={k[1]}, alpha={k[2]}]"
            ),
        )
        for l, w in enumerate(ht.level_weight_arrays(), start=1)
    ]
    log_top = _checked_log(
        ht.top_weights, lambda k: f"top_weights[y={k[0]}, alpha={k[1]}]"
    )
    log_grid = _checked_log_grid(grid)

    values = _log_sum_exp(log_leaf + log_grid.T[:, None, :], axis=2)  # (N, r0)
    for log_w in log_levels:
        pooled = values[0::2] + values[1::2]  # size-2 product pooling
        values = _log_sum_exp(log_w + pooled[:, None, :], axis=2)
    pooled_top = values.sum(axis=0)  # premature/global pooling
    return _log_sum_exp(log_top + pooled_top[None, :], axis=1)
