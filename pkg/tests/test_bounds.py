import math

import numpy as np
import pytest

from greedy.algorithms import run_wcga
from greedy.bounds import (
    BOUNDS,
    EXISTENTIAL,
    EXPLICIT,
    BoundContext,
    exponential_phase_constant,
    get_bound,
    lebesgue_iterations,
    qoga_recovery_limit,
    threshold_iterations,
    wbga_constant,
)
from greedy.dictionary import make_random_unit, sample_A1
from greedy.oracle import check_theorem_bound
from greedy.schedules import weakness
from greedy.space import SmoothnessParams, SpaceLp, smoothness_params

HILBERT = SmoothnessParams(0.5, 2.0)


def test_registry():
    assert {"wbga", "wga_hilbert", "pga_sixth", "initial_norm", "gawr"} <= set(BOUNDS)
    assert get_bound("wbga").kind == EXPLICIT
    assert get_bound("gawr").kind == EXISTENTIAL
    assert get_bound("wbga").to_dict()["algorithms"] == ["WCGA", "WGAFR", "RWRGA"]
    with pytest.raises(ValueError, match="unknown bound"):
        get_bound("omp")


@pytest.mark.parametrize("bound_id", sorted(BOUNDS))
def test_bounds_are_positive(bound_id):
    ctx = BoundContext(params=smoothness_params(SpaceLp(4, 3.0)), weakness=weakness(0.5), epsilon=0.1)
    values = get_bound(bound_id).evaluate(50, ctx)
    assert values.shape == (50,)
    assert np.all(values > 0.0)
    assert np.all(np.isfinite(values))


def test_constants():
    assert wbga_constant(HILBERT) == 4.0
    assert exponential_phase_constant(HILBERT, 1.0, 1.0) == pytest.approx(1.0 / 16.0)
    assert lebesgue_iterations(HILBERT, U=1.0, K=4, r=0.5) == math.ceil(4.0 * math.log(2.0))
    assert threshold_iterations(HILBERT, 0.5) == pytest.approx(4.0 * math.log(2.0))


@pytest.mark.parametrize("delta", [0.0, 1.0, -0.5])
def test_threshold_iterations_range(delta):
    with pytest.raises(ValueError):
        threshold_iterations(HILBERT, delta)


def test_qoga_recovery_limit():
    assert qoga_recovery_limit(0.1, 1.0) == pytest.approx(5.5)
    assert qoga_recovery_limit(0.0) == math.inf


def test_wbga_bound_shape():
    ctx = BoundContext(params=HILBERT, scale=2.0)
    m = np.arange(1, 11)
    np.testing.assert_allclose(get_bound("wbga").evaluate(10, ctx), 2.0 * 4.0 * (1.0 + m) ** -0.5)
    np.testing.assert_allclose(get_bound("wga_hilbert").evaluate(10, ctx), 2.0 * (1.0 + m) ** (-1.0 / 6.0))
    np.testing.assert_allclose(get_bound("pga_improved").evaluate(10, ctx), 8.0 * m ** (-11.0 / 62.0))


def test_noisy_bound_floor():
    ctx = BoundContext(params=HILBERT, epsilon=0.3)
    values = get_bound("wbga_noisy").evaluate(10_000, ctx)
    assert values[-1] == pytest.approx(0.6)
    assert np.all(values >= 0.6)


def test_weakness_sums():
    ctx = BoundContext(params=HILBERT, weakness=weakness(0.5))
    t, sums = ctx.weakness_sums(3)
    np.testing.assert_array_equal(t, [0.5, 0.5, 0.5])
    np.testing.assert_allclose(sums, [1.25, 1.5, 1.75])


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_wcga_meets_wbga_bound_on_convex_hull(p):
    space = SpaceLp(10, p)
    d = make_random_unit(space, 30, seed=12)
    f, _ = sample_A1(d, 6, seed=3)
    trace = run_wcga(space, d, f, 12)
    check = check_theorem_bound(trace, get_bound("wbga"), BoundContext(params=smoothness_params(space)))
    assert check.passed
    assert check.max_ratio <= 1.0
