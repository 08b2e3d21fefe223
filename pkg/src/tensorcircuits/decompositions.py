"""CP and hierarchical tensor decompositions.

Two factorized representations of a stack of order-N coefficient tensors
(one per class) are provided:

* :class:`CpDecomposition` -- a joint sum of Z elementary tensors whose
  factor vectors are shared across classes, with per-class combination
  weights.
* :class:`HtDecomposition` -- a level-structured factorization that builds
  tensors bottom-up by pairwise tensor products.  With ``log2(N)`` built
  levels the construction is the full hierarchical decomposition; with fewer
  levels it is the truncated variant whose top stage combines all remaining
  blocks at once.  A single built level is structurally the CP form (the top
  stage is an N-ary product of leaf vectors); the two types are nevertheless
  kept distinct.

"Shared" variants store one parameter vector per (level, channel) instead of
per (level, position, channel); views expanded over positions are produced
on demand.  Decomposition values are immutable after construction and all
operations here are pure, so cross-thread use needs no coordination.

Class, position, level and channel indices are 0-based.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "CpDecomposition",
    "HtDecomposition",
    "cp_reconstruct",
    "ht_reconstruct",
    "embed_cp_in_ht",
    "param_count",
    "sample_random",
    "make_shared",
    "RECONSTRUCT_ENTRY_CAP",
]

#: Default cap on the total number of scalar entries materialized during a
#: reconstruction (result tensor plus memoized intermediate blocks).
RECONSTRUCT_ENTRY_CAP = 10**7

_DISTRIBUTIONS = ("normal", "uniform", "uniform01")


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


def _check_class(decomp, y: int) -> None:
    if not 0 <= y < decomp.n_classes:
        raise ValueError(
            f"class index {y} out of range for {decomp.n_classes} classes"
        )


class CpDecomposition:
    """Joint rank-Z CP factorization of Y coefficient tensors.

    Parameters
    ----------
    class_weights:
        Array of shape (Y, Z); row y holds the combination weights of class y.
    factors:
        Array of shape (Z, N, M) with the factor vector of term z at position
        i in ``factors[z, i]``.  For a shared decomposition, shape (Z, M)
        together with ``n_modes`` (the single stored vector applies at every
        position).
    """

    def __init__(self, class_weights, factors, *, shared: bool = False,
                 n_modes: int | None = None):
        self.class_weights = _readonly(np.atleast_2d(class_weights))
        self.factors = _readonly(factors)
        self.shared = bool(shared)
        expected_ndim = 2 if self.shared else 3
        if self.factors.ndim != expected_ndim:
            raise ValueError(
                f"factors must be {expected_ndim}-D for shared={self.shared}, "
                f"got shape {self.factors.shape}"
            )
        if self.shared:
            if n_modes is None:
                raise ValueError("shared decomposition requires n_modes")
            self.n_modes = int(n_modes)
        else:
            self.n_modes = self.factors.shape[1]
            if n_modes is not None and int(n_modes) != self.n_modes:
                raise ValueError(
                    f"n_modes={n_modes} conflicts with factors shape "
                    f"{self.factors.shape}"
                )
        self.n_terms = self.factors.shape[0]
        self.mode_dim = self.factors.shape[-1]
        self.n_classes = self.class_weights.shape[0]
        if self.n_modes < 2:
            raise ValueError(f"n_modes must be >= 2, got {self.n_modes}")
        if self.mode_dim < 1 or self.n_terms < 1 or self.n_classes < 1:
            raise ValueError("mode_dim, n_terms and n_classes must be >= 1")
        if self.class_weights.shape[1] != self.n_terms:
            raise ValueError(
                f"class_weights has {self.class_weights.shape[1]} columns, "
                f"expected n_terms={self.n_terms}"
            )

    def factor(self, z: int, i: int) -> np.ndarray:
        """Factor vector of term z at position i (shared: position ignored)."""
        return self.factors[z] if self.shared else self.factors[z, i]

    def factors_expanded(self) -> np.ndarray:
        """Factors as a (Z, N, M) array, broadcasting shared vectors."""
        if not self.shared:
            return self.factors
        return np.broadcast_to(
            self.factors[:, None, :],
            (self.n_terms, self.n_modes, self.mode_dim),
        )

    def __repr__(self):
        return (
            f"CpDecomposition(n_modes={self.n_modes}, mode_dim={self.mode_dim}, "
            f"n_terms={self.n_terms}, n_classes={self.n_classes}, "
            f"shared={self.shared})"
        )


class HtDecomposition:
    """Level-structured hierarchical factorization of Y coefficient tensors.

    Parameters
    ----------
    leaf_vectors:
        Array of shape (N, r0, M): vector of channel gamma at position j in
        ``leaf_vectors[j, gamma]``.  Shared: shape (r0, M) plus ``n_modes``.
    level_weights:
        One array per built level l = 1 .. Lc-1, of shape
        (N / 2^l, r_l, r_{l-1}) (shared: (r_l, r_{l-1})).  An empty list
        means a single built level.
    top_weights:
        Array of shape (Y, r_{Lc-1}); row y combines the remaining
        N / 2^(Lc-1) blocks of channel alpha into the class-y tensor.

    N must be a power of 2 and the number of built levels Lc (= number of
    level-weight arrays + 1) must satisfy 1 <= Lc <= log2(N).  Lc = log2(N)
    is the full decomposition; smaller Lc is the truncated variant.
    """

    def __init__(self, leaf_vectors, level_weights, top_weights, *,
                 shared: bool = False, n_modes: int | None = None):
        self.leaf_vectors = _readonly(leaf_vectors)
        self.level_weights = tuple(_readonly(w) for w in level_weights)
        self.top_weights = _readonly(np.atleast_2d(top_weights))
        self.shared = bool(shared)

        expected_ndim = 2 if self.shared else 3
        if self.leaf_vectors.ndim != expected_ndim:
            raise ValueError(
                f"leaf_vectors must be {expected_ndim}-D for shared="
                f"{self.shared}, got shape {self.leaf_vectors.shape}"
            )
        if self.shared:
            if n_modes is None:
                raise ValueError("shared decomposition requires n_modes")
            self.n_modes = int(n_modes)
        else:
            self.n_modes = self.leaf_vectors.shape[0]
            if n_modes is not None and int(n_modes) != self.n_modes:
                raise ValueError(
                    f"n_modes={n_modes} conflicts with leaf_vectors shape "
                    f"{self.leaf_vectors.shape}"
                )
        n = self.n_modes
        if n < 2 or n & (n - 1):
            raise ValueError(f"n_modes must be a power of 2 with N >= 2, got {n}")
        self.n_levels = n.bit_length() - 1  # log2(N)
        self.n_levels_built = len(self.level_weights) + 1
        if self.n_levels_built > self.n_levels:
            raise ValueError(
                f"{self.n_levels_built} built levels exceed log2({n}) = "
                f"{self.n_levels}"
            )
        self.mode_dim = self.leaf_vectors.shape[-1]
        self.n_classes = self.top_weights.shape[0]

        ranks = [self.leaf_vectors.shape[-2]]
        for l, w in enumerate(self.level_weights, start=1):
            if w.ndim != expected_ndim:
                raise ValueError(
                    f"level_weights[{l - 1}] must be {expected_ndim}-D, got "
                    f"shape {w.shape}"
                )
            if not self.shared and w.shape[0] != n >> l:
                raise ValueError(
                    f"level {l} expects {n >> l} positions, got {w.shape[0]}"
                )
            if w.shape[-1] != ranks[-1]:
                raise ValueError(
                    f"level {l} mixes {w.shape[-1]} channels, expected "
                    f"rank {ranks[-1]}"
                )
            ranks.append(w.shape[-2])
        self.ranks = tuple(ranks)
        if any(r < 1 for r in self.ranks) or self.mode_dim < 1:
            raise ValueError("all ranks and mode_dim must be >= 1")
        if self.top_weights.shape[1] != self.ranks[-1]:
            raise ValueError(
                f"top_weights has {self.top_weights.shape[1]} columns, "
                f"expected rank {self.ranks[-1]}"
            )

    @property
    def is_full(self) -> bool:
        return self.n_levels_built == self.n_levels

    def leaf_vector(self, j: int, gamma: int) -> np.ndarray:
        return self.leaf_vectors[gamma] if self.shared else self.leaf_vectors[j, gamma]

    def level_weight(self, level: int, j: int, gamma: int) -> np.ndarray:
        w = self.level_weights[level - 1]
        return w[gamma] if self.shared else w[j, gamma]

    def leaf_array(self) -> np.ndarray:
        """Leaf vectors as an (N, r0, M) array, broadcasting shared storage."""
        if not self.shared:
            return self.leaf_vectors
        return np.broadcast_to(
            self.leaf_vectors[None],
            (self.n_modes,) + self.leaf_vectors.shape,
        )

    def level_weight_arrays(self) -> list[np.ndarray]:
        """Per-level weights as (N/2^l, r_l, r_{l-1}) arrays."""
        out = []
        for l, w in enumerate(self.level_weights, start=1):
            if self.shared:
                w = np.broadcast_to(w[None], (self.n_modes >> l,) + w.shape)
            out.append(w)
        return out

    def __repr__(self):
        return (
            f"HtDecomposition(n_modes={self.n_modes}, mode_dim={self.mode_dim}, "
            f"ranks={self.ranks}, n_levels_built={self.n_levels_built}, "
            f"n_classes={self.n_classes}, shared={self.shared})"
        )


def cp_reconstruct(cp: CpDecomposition, y: int) -> np.ndarray:
    """Build the full order-N coefficient tensor of class y from a CP form."""
    _check_class(cp, y)
    _check_entry_budget(cp.mode_dim**cp.n_modes)
    factors = cp.factors_expanded()
    out = np.zeros((cp.mode_dim,) * cp.n_modes)
    for z in range(cp.n_terms):
        term = factors[z, 0]
        for i in range(1, cp.n_modes):
            term = np.tensordot(term, factors[z, i], axes=0)
        out += cp.class_weights[y, z] * term
    return out


def _check_entry_budget(entries: int, cap: int = RECONSTRUCT_ENTRY_CAP) -> None:
    if entries > cap:
        raise ValueError(
            f"reconstruction needs {entries} scalar entries, above the cap of "
            f"{cap}; refusing to build"
        )


def _ht_entry_budget(ht: HtDecomposition) -> int:
    total = ht.mode_dim**ht.n_modes
    for l in range(1, ht.n_levels_built):
        total += (ht.n_modes >> l) * ht.ranks[l] * ht.mode_dim ** (2**l)
    return total


def ht_reconstruct(ht: HtDecomposition, y: int,
                   max_entries: int = RECONSTRUCT_ENTRY_CAP) -> np.ndarray:
    """Build the full order-N coefficient tensor of class y, bottom-up.

    Intermediate block tensors are memoized per (level, position, channel).
    The total entry count is checked against ``max_entries`` before any
    allocation.
    """
    _check_class(ht, y)
    _check_entry_budget(_ht_entry_budget(ht), max_entries)

    # blocks[j][gamma]: block tensor of channel gamma at position j.
    leaf = ht.leaf_array()
    blocks = [[leaf[j, g] for g in range(ht.ranks[0])] for j in range(ht.n_modes)]
    for l, weights in enumerate(ht.level_weight_arrays(), start=1):
        next_blocks = []
        for j in range(ht.n_modes >> l):
            pairs = [
                np.tensordot(blocks[2 * j][a], blocks[2 * j + 1][a], axes=0)
                for a in range(ht.ranks[l - 1])
            ]
            next_blocks.append(
                [
                    sum(weights[j, g, a] * pairs[a] for a in range(ht.ranks[l - 1]))
                    for g in range(ht.ranks[l])
                ]
            )
        blocks = next_blocks

    out = np.zeros((ht.mode_dim,) * ht.n_modes)
    for alpha in range(ht.ranks[-1]):
        term = blocks[0][alpha]
        for j in range(1, len(blocks)):
            term = np.tensordot(term, blocks[j][alpha], axes=0)
        out += ht.top_weights[y, alpha] * term
    return out


def embed_cp_in_ht(cp: CpDecomposition) -> HtDecomposition:
    """Rewrite a CP decomposition as a full hierarchical one, exactly.

    All level ranks equal the CP term count Z: the leaf vectors are the CP
    factor vectors, intermediate weights are indicator vectors (channel z
    only ever combines blocks of channel z), and the top weights are the CP
    class weights.  Reconstructions agree entrywise.
    """
    n = cp.n_modes
    if n < 2 or n & (n - 1):
        raise ValueError(f"embedding requires n_modes to be a power of 2, got {n}")
    z = cp.n_terms
    eye = np.eye(z)
    if cp.shared:
        levels = [eye for _ in range(1, n.bit_length() - 1)]
        return HtDecomposition(
            leaf_vectors=cp.factors,
            level_weights=levels,
            top_weights=cp.class_weights,
            shared=True,
            n_modes=n,
        )
    leaf = cp.factors.transpose(1, 0, 2)  # (N, Z, M)
    levels = [
        np.broadcast_to(eye, (n >> l, z, z)).copy()
        for l in range(1, n.bit_length() - 1)
    ]
    return HtDecomposition(
        leaf_vectors=leaf, level_weights=levels, top_weights=cp.class_weights
    )


def param_count(decomp) -> int:
    """Parameter count of a decomposition under the models' standard accounting.

    CP counts N*M*Z factor scalars plus Z*Y class weights.  The hierarchical
    count is N*M*r0 for the leaves, position-weighted rank products for the
    level weights with the halving geometry carried through the final pooled
    stage (an (N/2^(Lc-1)) * r_top^2 block), and Y*r_top for the top; with
    equal ranks r this closes to N*M*r + N*r^2 + Y*r, so embedding a CP
    decomposition costs exactly N*Z^2 extra.  Shared variants count each
    distinct stored vector once.
    """
    if isinstance(decomp, CpDecomposition):
        factor_block = decomp.n_terms * decomp.mode_dim
        if not decomp.shared:
            factor_block *= decomp.n_modes
        return factor_block + decomp.n_terms * decomp.n_classes
    if isinstance(decomp, HtDecomposition):
        n, ranks = decomp.n_modes, decomp.ranks
        top = decomp.n_classes * ranks[-1]
        if decomp.shared:
            leaf = decomp.mode_dim * ranks[0]
            levels = sum(ranks[l - 1] * ranks[l] for l in range(1, len(ranks)))
            return leaf + levels + top
        leaf = n * decomp.mode_dim * ranks[0]
        levels = sum(
            (n >> l) * ranks[l - 1] * ranks[l] for l in range(1, len(ranks))
        )
        tail = (n >> (decomp.n_levels_built - 1)) * ranks[-1] ** 2
        return leaf + levels + tail + top
    raise TypeError(f"unsupported decomposition type {type(decomp).__name__}")


def _draw(rng: np.random.Generator, shape, distribution: str) -> np.ndarray:
    if distribution == "normal":
        return rng.standard_normal(shape)
    if distribution == "uniform":
        return rng.uniform(-1.0, 1.0, size=shape)
    if distribution == "uniform01":
        return rng.uniform(0.0, 1.0, size=shape)
    raise ValueError(
        f"unknown distribution {distribution!r}; expected one of {_DISTRIBUTIONS}"
    )


def sample_random(kind: str, *, n_modes: int, mode_dim: int,
                  n_terms: int | None = None, ranks=None, n_classes: int = 1,
                  shared: bool = False, seed: int = 0,
                  distribution: str = "normal"):
    """Draw a decomposition with i.i.d. parameters from a continuous law.

    ``kind`` is "cp" (requires ``n_terms``) or "ht" (requires ``ranks``, one
    entry per built level).  The same seed always produces the same
    decomposition: parameters are drawn from a single ``default_rng(seed)``
    stream in a fixed order (CP: factors then class weights; HT: leaves, then
    levels bottom-up, then top weights).
    """
    rng = np.random.default_rng(seed)
    if kind == "cp":
        if n_terms is None:
            raise ValueError("kind 'cp' requires n_terms")
        factor_shape = (
            (n_terms, mode_dim) if shared else (n_terms, n_modes, mode_dim)
        )
        factors = _draw(rng, factor_shape, distribution)
        weights = _draw(rng, (n_classes, n_terms), distribution)
        return CpDecomposition(
            class_weights=weights, factors=factors, shared=shared,
            n_modes=n_modes if shared else None,
        )
    if kind == "ht":
        if ranks is None or len(ranks) < 1:
            raise ValueError("kind 'ht' requires a non-empty ranks sequence")
        ranks = tuple(int(r) for r in ranks)
        leaf_shape = (
            (ranks[0], mode_dim) if shared else (n_modes, ranks[0], mode_dim)
        )
        leaf = _draw(rng, leaf_shape, distribution)
        levels = []
        for l in range(1, len(ranks)):
            shape = (
                (ranks[l], ranks[l - 1])
                if shared
                else (n_modes >> l, ranks[l], ranks[l - 1])
            )
            levels.append(_draw(rng, shape, distribution))
        top = _draw(rng, (n_classes, ranks[-1]), distribution)
        return HtDecomposition(
            leaf_vectors=leaf, level_weights=levels, top_weights=top,
            shared=shared, n_modes=n_modes if shared else None,
        )
    raise ValueError(f"unknown decomposition kind {kind!r}; expected 'cp' or 'ht'")


def make_shared(decomp):
    """Constrain a decomposition to position-independent parameters.

    Every position-dependent vector is replaced by its position-0 copy.
    Already-shared inputs are returned unchanged.
    """
    if decomp.shared:
        return decomp
    if isinstance(decomp, CpDecomposition):
        return CpDecomposition(
            class_weights=decomp.class_weights,
            factors=decomp.factors[:, 0, :],
            shared=True,
            n_modes=decomp.n_modes,
        )
    if isinstance(decomp, HtDecomposition):
        return HtDecomposition(
            leaf_vectors=decomp.leaf_vectors[0],
            level_weights=[w[0] for w in decomp.level_weights],
            top_weights=decomp.top_weights,
            shared=True,
            n_modes=decomp.n_modes,
        )
    raise TypeError(f"unsupported decomposition type {type(decomp).__name__}")
