"""Log-space evaluation contract tests."""

import math

import numpy as np
import pytest

from tensorcircuits.circuits import cp_forward, ht_forward
from tensorcircuits.decompositions import (
    CpDecomposition,
    HtDecomposition,
    sample_random,
)
from tensorcircuits.logspace import logspace_forward, mex


# ----------------------------------------------------------------------
# mex
# ----------------------------------------------------------------------


def test_mex_single_element_cancels():
    for beta in (1.0, -2.5, 100.0):
        assert mex(beta, [3.0], [0.25]) == pytest.approx(3.25, rel=1e-12)


def test_mex_two_zeros():
    assert mex(1.0, [0.0, 0.0], [0.0, 0.0]) == pytest.approx(0.0, abs=1e-15)


def test_mex_zero_beta_is_mean():
    assert mex(0.0, [1.0, 2.0, 3.0], [0.0, 0.0, 0.0]) == pytest.approx(2.0)
    assert mex(0.0, [1.0, 2.0], [1.0, 0.0]) == pytest.approx(2.0)


def test_mex_large_beta_approaches_max():
    x, b = [1.0, 5.0, 2.0], [0.0, 0.0, 0.0]
    # Closed-form sandwich for beta > 0: max - log(n)/beta <= mex <= max.
    value = mex(1e3, x, b)
    assert value <= 5.0
    assert 5.0 - value <= math.log(3.0) / 1e3 + 1e-12
    assert abs(mex(2e6, x, b) - 5.0) <= 1e-6


def test_mex_rejects_empty_and_mismatch():
    with pytest.raises(ValueError, match="empty"):
        mex(1.0, [], [])
    with pytest.raises(ValueError, match="length"):
        mex(1.0, [1.0, 2.0], [0.0])


def test_mex_monotone_in_inputs():
    rng = np.random.default_rng(60)
    for _ in range(50):
        beta = float(rng.standard_normal())
        x = rng.standard_normal(4)
        b = rng.standard_normal(4)
        bumped = x.copy()
        bumped[int(rng.integers(0, 4))] += abs(rng.standard_normal())
        assert mex(beta, bumped, b) >= mex(beta, x, b) - 1e-12


def test_mex_bounds_and_shift():
    rng = np.random.default_rng(61)
    for _ in range(50):
        x = rng.standard_normal(5)
        b = rng.standard_normal(5)
        beta = abs(float(rng.standard_normal())) + 0.1
        value = mex(beta, x, b)
        assert np.min(x + b) - 1e-12 <= value <= np.max(x + b) + 1e-12
        assert np.max(x + b) - value <= math.log(5.0) / beta + 1e-12
        shift = 3.75
        assert mex(beta, x + shift, b) == pytest.approx(value + shift, rel=1e-12)


def test_mex_all_absent_terms_stay_absent():
    assert mex(1.0, [-np.inf, -np.inf], [0.0, 0.0]) == -np.inf


# ----------------------------------------------------------------------
# logspace_forward
# ----------------------------------------------------------------------


def _positive_grid(rng, m, n):
    return rng.uniform(0.1, 2.0, size=(m, n))


def test_logspace_single_path_is_sum_of_logs():
    leaf = np.zeros((4, 1, 2))
    leaf[:, 0, 0] = 1.0
    ht = HtDecomposition(
        leaf_vectors=leaf,
        level_weights=[np.ones((2, 1, 1))],
        top_weights=[[1.0]],
    )
    rng = np.random.default_rng(62)
    grid = _positive_grid(rng, 2, 4)
    expected = float(np.sum(np.log(grid[0])))
    assert logspace_forward(ht, grid)[0] == pytest.approx(expected, rel=1e-12)


def test_logspace_matches_direct_cp():
    rng = np.random.default_rng(63)
    for seed in range(20):
        cp = sample_random(
            "cp", n_modes=4, mode_dim=3, n_terms=3, n_classes=2,
            seed=seed, distribution="uniform01",
        )
        grid = _positive_grid(rng, 3, 4)
        direct = cp_forward(cp, grid)
        log_scores = logspace_forward(cp, grid)
        np.testing.assert_allclose(np.exp(log_scores), direct, rtol=1e-6)


def test_logspace_matches_direct_ht():
    rng = np.random.default_rng(64)
    for seed in range(20):
        ht = sample_random(
            "ht", n_modes=8, mode_dim=2, ranks=(2, 2, 2), n_classes=2,
            seed=seed, distribution="uniform01", shared=bool(seed % 2),
        )
        grid = _positive_grid(rng, 2, 8)
        direct = ht_forward(ht, grid)
        log_scores = logspace_forward(ht, grid)
        np.testing.assert_allclose(np.exp(log_scores), direct, rtol=1e-6)


def test_logspace_survives_underflow_chain():
    # 256 positions with activations 1e-3: the direct product is below the
    # smallest subnormal double and collapses to exactly 0, while the
    # log-space path returns the analytic 256*log(1e-3).
    n = 256
    leaf = np.ones((n, 1, 1))
    levels = [np.ones((n >> l, 1, 1)) for l in range(1, 8)]
    ht = HtDecomposition(
        leaf_vectors=leaf, level_weights=levels, top_weights=[[1.0]]
    )
    grid = np.full((1, n), 1e-3)
    direct = ht_forward(ht, grid)[0]
    assert direct == 0.0
    log_score = logspace_forward(ht, grid)[0]
    assert np.isfinite(log_score)
    assert log_score == pytest.approx(n * math.log(1e-3), abs=1e-9)


def test_logspace_survives_overflow_chain():
    n = 256
    leaf = np.ones((n, 1, 1))
    levels = [np.ones((n >> l, 1, 1)) for l in range(1, 8)]
    ht = HtDecomposition(
        leaf_vectors=leaf, level_weights=levels, top_weights=[[1.0]]
    )
    grid = np.full((1, n), 1e3)
    with np.errstate(over="ignore"):
        assert ht_forward(ht, grid)[0] == np.inf
    log_score = logspace_forward(ht, grid)[0]
    assert np.isfinite(log_score)
    assert log_score == pytest.approx(n * math.log(1e3), abs=1e-9)


def test_logspace_zero_weight_is_absent_term():
    cp = CpDecomposition(
        class_weights=[[0.0, 2.0], [0.0, 0.0]],
        factors=np.ones((2, 2, 2)),
    )
    grid = np.full((2, 2), 0.5)
    log_scores = logspace_forward(cp, grid)
    direct = cp_forward(cp, grid)
    # Class 0 keeps its nonzero term; class 1 is all-absent -> -inf -> 0.
    assert np.exp(log_scores[0]) == pytest.approx(direct[0], rel=1e-9)
    assert log_scores[1] == -np.inf
    assert np.exp(log_scores[1]) == 0.0 == direct[1]


def test_logspace_rejects_negative_weight_with_location():
    factors = np.ones((1, 2, 2))
    factors[0, 1, 0] = -0.5
    cp = CpDecomposition(class_weights=[[1.0]], factors=factors)
    with pytest.raises(ValueError, match=r"factors\[z=0, i=1, d=0\]"):
        logspace_forward(cp, np.ones((2, 2)))


def test_logspace_rejects_nonpositive_grid_with_location():
    cp = CpDecomposition(class_weights=[[1.0]], factors=np.ones((1, 2, 2)))
    grid = np.ones((2, 2))
    grid[1, 0] = 0.0
    with pytest.raises(ValueError, match=r"grid\[d=1, i=0\]"):
        logspace_forward(cp, grid)


def test_logspace_rejects_negative_ht_weight_with_location():
    leaf = np.ones((4, 1, 2))
    levels = [np.ones((2, 1, 1))]
    levels[0][1, 0, 0] = -1.0
    ht = HtDecomposition(leaf_vectors=leaf, level_weights=levels, top_weights=[[1.0]])
    with pytest.raises(ValueError, match=r"level_weights\[l=1\]\[j=1, channel=0, alpha=0\]"):
        logspace_forward(ht, np.ones((2, 4)))
