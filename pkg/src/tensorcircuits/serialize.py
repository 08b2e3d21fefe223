"""JSON schemas for tensors, activation grids and decompositions.

All documents carry a ``schema_version`` field (currently 1) and store
parameters as flat lists in a documented order:

* tensor: ``shape`` header plus row-major ``values``;
* grid: nested ``values`` rows, one per channel (M rows of N activations);
* cp decomposition: ``class_weights`` by (class, term), ``factors`` by
  (term, position, channel) -- the position axis is dropped when shared;
* ht decomposition: ``leaf_vectors`` by (position, channel, dim),
  ``level_weights`` as one flat list per level ordered by (position, channel,
  lower channel), ``top_weights`` by (class, channel) -- position axes are
  dropped when shared.

Malformed documents raise :class:`SchemaError` naming the offending field.
"""

from __future__ import annotations

import numpy as np

from tensorcircuits.decompositions import CpDecomposition, HtDecomposition

__all__ = [
    "SCHEMA_VERSION",
    "SchemaError",
    "tensor_to_dict",
    "tensor_from_dict",
    "grid_to_dict",
    "grid_from_dict",
    "decomposition_to_dict",
    "decomposition_from_dict",
]

SCHEMA_VERSION = 1


class SchemaError(ValueError):
    """A JSON document does not match the expected schema."""


def _require(doc: dict, field: str, kind=None):
    if field not in doc:
        raise SchemaError(f"missing required field '{field}'")
    value = doc[field]
    if kind is not None and not isinstance(value, kind):
        raise SchemaError(
            f"field '{field}' has type {type(value).__name__}, expected "
            f"{kind.__name__}"
        )
    return value


def _as_float_array(field: str, values) -> np.ndarray:
    try:
        return np.asarray(values, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field '{field}' is not a numeric array: {exc}") from None


def _reshape(field: str, flat, shape) -> np.ndarray:
    arr = _as_float_array(field, flat)
    expected = int(np.prod(shape))
    if arr.ndim != 1 or arr.size != expected:
        raise SchemaError(
            f"field '{field}' holds {arr.size} values, expected {expected} "
            f"for shape {tuple(shape)}"
        )
    return arr.reshape(shape)


def tensor_to_dict(a) -> dict:
    arr = np.asarray(a, dtype=float)
    return {
        "schema_version": SCHEMA_VERSION,
        "shape": [int(m) for m in arr.shape],
        "values": arr.ravel().tolist(),
    }


def tensor_from_dict(doc: dict) -> np.ndarray:
    shape = _require(doc, "shape", list)
    if not shape or any((not isinstance(m, int)) or m < 1 for m in shape):
        raise SchemaError(f"field 'shape' must list positive integers, got {shape}")
    return _reshape("values", _require(doc, "values", list), shape)


def grid_to_dict(grid) -> dict:
    arr = np.asarray(grid, dtype=float)
    return {
        "schema_version": SCHEMA_VERSION,
        "n_channels": int(arr.shape[0]),
        "n_positions": int(arr.shape[1]),
        "values": [row.tolist() for row in arr],
    }


def grid_from_dict(doc: dict) -> np.ndarray:
    rows = _require(doc, "values", list)
    arr = _as_float_array("values", rows)
    if arr.ndim != 2:
        raise SchemaError("field 'values' must be a list of equal-length rows")
    for field, expected in (("n_channels", arr.shape[0]), ("n_positions", arr.shape[1])):
        if field in doc and doc[field] != expected:
            raise SchemaError(
                f"field '{field}' is {doc[field]} but 'values' implies {expected}"
            )
    return arr


def decomposition_to_dict(decomp) -> dict:
    if isinstance(decomp, CpDecomposition):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "cp",
            "n_modes": decomp.n_modes,
            "mode_dim": decomp.mode_dim,
            "n_terms": decomp.n_terms,
            "n_classes": decomp.n_classes,
            "shared": decomp.shared,
            "class_weights": decomp.class_weights.ravel().tolist(),
            "factors": decomp.factors.ravel().tolist(),
        }
    if isinstance(decomp, HtDecomposition):
        return {
            "schema_version": SCHEMA_VERSION,
            "kind": "ht",
            "n_modes": decomp.n_modes,
            "mode_dim": decomp.mode_dim,
            "n_levels_built": decomp.n_levels_built,
            "ranks": [int(r) for r in decomp.ranks],
            "n_classes": decomp.n_classes,
            "shared": decomp.shared,
            "leaf_vectors": decomp.leaf_vectors.ravel().tolist(),
            "level_weights": [w.ravel().tolist() for w in decomp.level_weights],
            "top_weights": decomp.top_weights.ravel().tolist(),
        }
    raise TypeError(f"unsupported decomposition type {type(decomp).__name__}")


def decomposition_from_dict(doc: dict):
    kind = _require(doc, "kind", str)
    if kind == "cp":
        return _cp_from_dict(doc)
    if kind == "ht":
        return _ht_from_dict(doc)
    raise SchemaError(f"field 'kind' must be 'cp' or 'ht', got {kind!r}")


def _cp_from_dict(doc: dict) -> CpDecomposition:
    n = _require(doc, "n_modes", int)
    m = _require(doc, "mode_dim", int)
    z = _require(doc, "n_terms", int)
    y = _require(doc, "n_classes", int)
    shared = _require(doc, "shared", bool)
    factor_shape = (z, m) if shared else (z, n, m)
    factors = _reshape("factors", _require(doc, "factors", list), factor_shape)
    weights = _reshape(
        "class_weights", _require(doc, "class_weights", list), (y, z)
    )
    try:
        return CpDecomposition(
            class_weights=weights, factors=factors, shared=shared,
            n_modes=n if shared else None,
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc


def _ht_from_dict(doc: dict) -> HtDecomposition:
    n = _require(doc, "n_modes", int)
    m = _require(doc, "mode_dim", int)
    y = _require(doc, "n_classes", int)
    shared = _require(doc, "shared", bool)
    ranks = _require(doc, "ranks", list)
    if not ranks or any((not isinstance(r, int)) or r < 1 for r in ranks):
        raise SchemaError(f"field 'ranks' must list positive integers, got {ranks}")
    levels_built = _require(doc, "n_levels_built", int)
    if levels_built != len(ranks):
        raise SchemaError(
            f"field 'n_levels_built' is {levels_built} but 'ranks' lists "
            f"{len(ranks)} levels"
        )
    leaf_shape = (ranks[0], m) if shared else (n, ranks[0], m)
    leaf = _reshape("leaf_vectors", _require(doc, "leaf_vectors", list), leaf_shape)
    raw_levels = _require(doc, "level_weights", list)
    if len(raw_levels) != len(ranks) - 1:
        raise SchemaError(
            f"field 'level_weights' lists {len(raw_levels)} levels, expected "
            f"{len(ranks) - 1}"
        )
    levels = []
    for l, flat in enumerate(raw_levels, start=1):
        shape = (
            (ranks[l], ranks[l - 1]) if shared else (n >> l, ranks[l], ranks[l - 1])
        )
        levels.append(_reshape(f"level_weights[{l - 1}]", flat, shape))
    top = _reshape("top_weights", _require(doc, "top_weights", list), (y, ranks[-1]))
    try:
        return HtDecomposition(
            leaf_vectors=leaf, level_weights=levels, top_weights=top,
            shared=shared, n_modes=n if shared else None,
        )
    except ValueError as exc:
        raise SchemaError(str(exc)) from exc
