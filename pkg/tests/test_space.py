import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedy.errors import DimensionMismatchError, ZeroVectorError
from greedy.space import (
    SmoothnessParams,
    SpaceLp,
    lp_norm,
    norm,
    norming_functional,
    norming_functionals,
    smoothness_inequality_check,
    smoothness_params,
    xi_solve,
)


def test_norm_examples():
    assert norm(SpaceLp(2, 2.0), [3.0, 4.0]) == pytest.approx(5.0, abs=1e-15)
    assert norm(SpaceLp(3, 3.0), [0.0, 0.0, 0.0]) == 0.0
    assert norm(SpaceLp(2, 4.0), [1.0, 1.0]) == pytest.approx(2.0 ** 0.25, rel=1e-14)


def test_norm_survives_extreme_scales():
    x = np.array([1e-200, 2e-200])
    assert lp_norm(x, 2.0) == pytest.approx(math.sqrt(5.0) * 1e-200, rel=1e-12)
    y = np.array([1e200, 1e200])
    assert lp_norm(y, 3.0) == pytest.approx(2.0 ** (1 / 3) * 1e200, rel=1e-12)


def test_space_validation():
    with pytest.raises(ValueError):
        SpaceLp(dim=4, p=1.0)
    with pytest.raises(ValueError):
        SpaceLp(dim=0, p=2.0)
    with pytest.raises(ValueError):
        SpaceLp(dim=4, p=math.inf)
    with pytest.raises(DimensionMismatchError):
        SpaceLp(dim=3, p=2.0).element([1.0, 2.0])


def test_norming_functional_examples():
    F = norming_functional(SpaceLp(2, 2.0), [3.0, 4.0])
    np.testing.assert_allclose(F.coords, [0.6, 0.8], rtol=1e-15)
    assert F([3.0, 4.0]) == pytest.approx(5.0)

    G = norming_functional(SpaceLp(2, 4.0), [1.0, 1.0])
    np.testing.assert_allclose(G.coords, [2.0 ** -0.75] * 2, rtol=1e-14)
    assert G([1.0, 1.0]) == pytest.approx(2.0 ** 0.25, rel=1e-14)


def test_norming_functional_of_zero_raises():
    with pytest.raises(ZeroVectorError):
        norming_functional(SpaceLp(3, 3.0), np.zeros(3))
    with pytest.raises(ZeroVectorError):
        norming_functionals(SpaceLp(3, 3.0), np.zeros((2, 3)))


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.5, 2.0, 3.0, 4.0]), st.floats(1e-3, 1e3))
@settings(max_examples=200, deadline=None)
def test_norming_functional_has_unit_dual_norm(seed, p, scale):
    space = SpaceLp(dim=6, p=p)
    f = scale * np.random.default_rng(seed).standard_normal(6)
    F = norming_functional(space, f)
    assert F.dual_norm(space) == pytest.approx(1.0, abs=1e-9)
    assert float(F(f)) == pytest.approx(norm(space, f), rel=1e-9)


def test_norming_functionals_match_rowwise(rng):
    space = SpaceLp(dim=5, p=3.0)
    rows = rng.standard_normal((4, 5))
    stacked = norming_functionals(space, rows)
    for row, expected in zip(rows, stacked):
        np.testing.assert_allclose(norming_functional(space, row).coords, expected, rtol=1e-13)


@pytest.mark.parametrize("p,gamma,q", [
    (2.0, 0.5, 2.0),
    (4.0, 1.5, 2.0),
    (1.5, 2.0 / 3.0, 1.5),
])
def test_smoothness_params(p, gamma, q):
    params = smoothness_params(SpaceLp(4, p))
    assert params.gamma == pytest.approx(gamma)
    assert params.q == q


def test_conjugate_exponent():
    assert SmoothnessParams(0.5, 2.0).conjugate == 2.0
    assert SmoothnessParams(2.0 / 3.0, 1.5).conjugate == pytest.approx(3.0)


def test_xi_solve_examples():
    assert xi_solve(SmoothnessParams(0.5, 2.0), 1.0, 0.5) == pytest.approx(1.0)
    assert xi_solve(SmoothnessParams(0.5, 2.0), 0.1, 0.25) == pytest.approx(0.05)
    # the unclamped root would be 50
    assert xi_solve(SmoothnessParams(0.01, 2.0), 1.0, 0.5) == 2.0


@pytest.mark.parametrize("t,theta", [(0.0, 0.5), (1.5, 0.5), (0.5, 0.0), (0.5, 0.75)])
def test_xi_solve_rejects_out_of_range(t, theta):
    with pytest.raises(ValueError):
        xi_solve(SmoothnessParams(0.5, 2.0), t, theta)


def test_smoothness_sandwich_examples():
    space = SpaceLp(2, 2.0)
    assert smoothness_inequality_check(space, [1.0, 2.0], [3.0, -1.0], 0.0) == (0.0, 0.0)
    lhs, rhs = smoothness_inequality_check(space, [1.0, 0.0], [0.0, 1.0], 1.0)
    assert lhs == pytest.approx(math.sqrt(2.0) - 1.0, rel=1e-12)
    assert rhs == pytest.approx(1.0)


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.5, 2.0, 3.0, 4.0]), st.floats(-3.0, 3.0))
@settings(max_examples=300, deadline=None)
def test_smoothness_sandwich_holds(seed, p, u):
    space = SpaceLp(dim=5, p=p)
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(5) + 0.1
    y = rng.standard_normal(5)
    lhs, rhs = smoothness_inequality_check(space, x, y, u)
    scale = 1e-12 * max(1.0, lp_norm(x, p) + abs(u) * lp_norm(y, p))
    assert lhs >= -scale
    assert lhs <= rhs + scale
