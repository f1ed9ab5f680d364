import math

import numpy as np
import pytest

from greedy.constants import (
    l1_incoherence_constant,
    l1_sphere_grid,
    nikolskii_constant,
    rip_delta,
    rip_unconditionality_bound,
    structural_constants,
    unconditionality_constant,
)
from greedy.dictionary import Dictionary, make_canonical, make_random_unit
from greedy.errors import GuardExceededError
from greedy.space import SpaceLp


def _pair(c):
    return Dictionary(SpaceLp(2, 2.0), np.array([[1.0, 0.0], [c, math.sqrt(1.0 - c * c)]]), label="pair")


def test_l1_sphere_grid():
    grid = l1_sphere_grid(2, 2)
    assert grid.shape == (6, 2)
    np.testing.assert_allclose(np.abs(grid).sum(axis=1), 1.0)
    assert np.all(grid[:, 0] >= 0.0)
    np.testing.assert_array_equal(l1_sphere_grid(1, 4), [[1.0]])
    with pytest.raises(ValueError):
        l1_sphere_grid(0, 3)


def test_orthonormal_basis_constants_are_one():
    d = make_canonical(SpaceLp(4, 2.0))
    sc = structural_constants(d, K=2, depth=3, r=0.5)
    assert sc.coherence == 0.0
    assert sc.rip_delta == pytest.approx(0.0, abs=1e-14)
    assert sc.U.value == pytest.approx(1.0, abs=1e-12)
    assert sc.U.exact
    assert sc.C1.value == pytest.approx(1.0, rel=1e-12)
    assert sc.C1.kind == "lower"
    assert sc.V.value == pytest.approx(1.0, rel=1e-12)


def test_canonical_lp_constants():
    d = make_canonical(SpaceLp(4, 3.0))
    sc = structural_constants(d, K=2, depth=3, r=2.0 / 3.0)
    assert sc.rip_delta is None
    assert sc.U.value == pytest.approx(1.0, rel=1e-9)
    assert sc.C1.value == pytest.approx(1.0, rel=1e-9)
    assert sc.V.value <= sc.C1.value * sc.U.value + 1e-9


@pytest.mark.parametrize("c", [0.0, 0.3, 0.5, -0.8])
def test_rip_delta_of_a_pair(c):
    assert rip_delta(_pair(c), 2) == pytest.approx(abs(c), abs=1e-12)


def test_unconditionality_of_a_pair():
    u = unconditionality_constant(_pair(0.5), K=1, depth=2)
    assert u.exact
    assert u.value == pytest.approx(2.0 / math.sqrt(3.0), rel=1e-12)
    assert u.value <= rip_unconditionality_bound(0.5) + 1e-12


def test_single_element_constants_are_exact():
    d = make_random_unit(SpaceLp(5, 3.0), 4, seed=1)
    c1 = nikolskii_constant(d, K=1, r=0.5)
    assert c1.exact
    assert c1.value == pytest.approx(1.0)
    v = l1_incoherence_constant(d, K=1, depth=1, r=0.5)
    assert v.value == pytest.approx(1.0)


def test_rip_bound():
    assert rip_unconditionality_bound(0.0) == 1.0
    assert rip_unconditionality_bound(0.5) == pytest.approx(math.sqrt(3.0))
    with pytest.raises(ValueError):
        rip_unconditionality_bound(1.0)


def test_parameter_checks():
    d = make_canonical(SpaceLp(4, 2.0))
    with pytest.raises(ValueError):
        nikolskii_constant(d, K=0, r=0.5)
    with pytest.raises(ValueError):
        unconditionality_constant(d, K=3, depth=2)
    with pytest.raises(ValueError):
        rip_delta(make_canonical(SpaceLp(4, 3.0)), 2)


def test_guard():
    d = make_random_unit(SpaceLp(64, 2.0), 40, seed=2)
    with pytest.raises(GuardExceededError):
        rip_delta(d, 10)


def test_to_dict():
    sc = structural_constants(_pair(0.5), K=1, depth=2, r=0.5)
    out = sc.to_dict()
    assert out["U"]["kind"] == "exact"
    assert out["K"] == 1
    assert out["coherence"] == pytest.approx(0.5)
