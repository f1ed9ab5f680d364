import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedy.dictionary import (
    Dictionary,
    check_ll2,
    check_ll3,
    coherence,
    d_norm,
    d_seminorm,
    evaluate,
    make_canonical,
    make_coherent,
    make_haar_grid,
    make_random_unit,
    make_trig_grid,
    sample_A1,
    sample_sparse,
    select_weak,
    signed_position,
)
from greedy.errors import DimensionMismatchError, ZeroFunctionalError
from greedy.space import SpaceLp, lp_norm


def _unit_norms(dictionary):
    return lp_norm(dictionary.elements, dictionary.space.p, axis=1)


# ---------------------------------------------------------------------------
# Construction
# ---------------------------------------------------------------------------

def test_canonical():
    d = make_canonical(SpaceLp(3, 3.0))
    np.testing.assert_array_equal(d.elements, np.eye(3))
    np.testing.assert_array_equal(_unit_norms(d), 1.0)
    assert len(make_canonical(SpaceLp(1, 1.5))) == 1


def test_elements_are_read_only():
    d = make_canonical(SpaceLp(3, 2.0))
    with pytest.raises(ValueError):
        d.elements[0, 0] = 2.0


def test_rejects_non_unit_elements():
    with pytest.raises(ValueError):
        Dictionary(SpaceLp(2, 2.0), np.array([[1.0, 1.0]]))
    with pytest.raises(DimensionMismatchError):
        Dictionary(SpaceLp(3, 2.0), np.eye(2))


def test_random_unit_is_seeded(space):
    a = make_random_unit(space, 10, seed=3)
    b = make_random_unit(space, 10, seed=3)
    np.testing.assert_array_equal(a.elements, b.elements)
    assert a.fingerprint == b.fingerprint
    assert a.fingerprint != make_random_unit(space, 10, seed=4).fingerprint
    norms = _unit_norms(a)
    assert np.all((norms >= 1.0 - 1e-9) & (norms <= 1.0 + 1e-12))


def test_random_dictionary_coherence_below_one():
    d = make_random_unit(SpaceLp(64, 2.0), 32, seed=11)
    assert 0.0 < coherence(d) < 1.0


def test_trig_grid_orthogonal_at_p2():
    d = make_trig_grid(SpaceLp(16, 2.0), 3)
    assert d.size == 7
    gram = d.elements @ d.elements.T
    np.testing.assert_allclose(gram, np.eye(7), atol=1e-9)


def test_trig_grid_unit_norm_at_p3():
    d = make_trig_grid(SpaceLp(16, 3.0), 5)
    np.testing.assert_allclose(_unit_norms(d), 1.0, atol=1e-9)


def test_trig_grid_needs_room():
    with pytest.raises(ValueError):
        make_trig_grid(SpaceLp(6, 2.0), 3)


def test_haar_grid_orthogonal():
    d = make_haar_grid(SpaceLp(8, 2.0), 3)
    assert d.size == 8
    np.testing.assert_allclose(d.elements @ d.elements.T, np.eye(8), atol=1e-12)
    with pytest.raises(ValueError):
        make_haar_grid(SpaceLp(6, 2.0), 3)


def test_coherent_mix_raises_coherence():
    space = SpaceLp(24, 2.0)
    low = coherence(make_coherent(space, 32, 0.0, seed=5))
    high = coherence(make_coherent(space, 32, 0.8, seed=5))
    assert high > low
    with pytest.raises(ValueError):
        make_coherent(space, 4, 1.0, seed=5)


def test_signed_position():
    assert signed_position(0) == (0, 1)
    assert signed_position(1) == (0, -1)
    assert signed_position(5) == (2, -1)
    d = make_canonical(SpaceLp(3, 2.0))
    np.testing.assert_array_equal(d.signed_elements[3], -d.elements[1])


# ---------------------------------------------------------------------------
# D-norm and selection
# ---------------------------------------------------------------------------

F_EXAMPLE = np.array([0.2, -0.7, 0.1])


def test_d_norm_example():
    d = make_canonical(SpaceLp(3, 2.0))
    dn = d_norm(F_EXAMPLE, d)
    assert dn.value == pytest.approx(0.7)
    assert (dn.index, dn.sign) == (1, -1)
    assert d_norm(np.zeros(3), d).value == 0.0


def test_d_norm_matches_loop(random_dict, rng):
    F = rng.standard_normal(random_dict.space.dim)
    best = max(abs(float(np.dot(F, g))) for g in random_dict.elements)
    assert d_norm(F, random_dict).value == pytest.approx(best, rel=1e-14)


def test_evaluate_checks_dimension(random_dict):
    with pytest.raises(DimensionMismatchError):
        evaluate(np.ones(3), random_dict)


def test_select_weak_examples():
    d = make_canonical(SpaceLp(3, 2.0))
    full = select_weak(F_EXAMPLE, d, 1.0)
    assert (full.index, full.sign) == (1, -1)
    # lowest index with |F(g)| ≥ 0.35
    half = select_weak(F_EXAMPLE, d, 0.5)
    assert (half.index, half.sign) == (1, -1)
    assert select_weak(F_EXAMPLE, d, 0.25).index == 0
    with pytest.raises(ZeroFunctionalError):
        select_weak(np.zeros(3), d, 1.0)


def test_select_weak_tie_rules():
    d = make_canonical(SpaceLp(4, 2.0))
    F = np.array([0.5, 0.9, -1.0, 0.6])
    assert select_weak(F, d, 0.5, tie_rule="lowest-index").index == 0
    assert select_weak(F, d, 0.5, tie_rule="exact-max").index == 2
    picks = {select_weak(F, d, 0.5, "randomized", np.random.default_rng(s)).index for s in range(40)}
    assert picks == {0, 1, 2, 3}
    with pytest.raises(ValueError):
        select_weak(F, d, 0.5, tie_rule="randomized")
    with pytest.raises(ValueError):
        select_weak(F, d, 0.5, tie_rule="first")


@given(st.integers(0, 2**32 - 1), st.floats(0.05, 1.0))
@settings(max_examples=100, deadline=None)
def test_select_weak_is_admissible(seed, t):
    d = make_random_unit(SpaceLp(6, 3.0), 10, seed=1)
    F = np.random.default_rng(seed).standard_normal(6)
    sel = select_weak(F, d, t)
    values = d.elements @ F
    assert sel.value >= t * np.max(np.abs(values)) - 1e-15
    assert sel.sign * values[sel.index] >= 0.0


# ---------------------------------------------------------------------------
# Coherence and seminorm
# ---------------------------------------------------------------------------

def test_coherence_examples():
    assert coherence(make_canonical(SpaceLp(5, 3.0))) == 0.0
    pair = Dictionary(SpaceLp(2, 2.0), np.array([[1.0, 0.0], [0.5, math.sqrt(3.0) / 2.0]]))
    assert coherence(pair) == pytest.approx(0.5, abs=1e-12)
    single = Dictionary(SpaceLp(2, 2.0), np.array([[1.0, 0.0]]))
    assert coherence(single) == 0.0


def test_coherence_matches_pairwise_loop():
    d = make_random_unit(SpaceLp(6, 3.0), 8, seed=2)
    best = 0.0
    for i in range(d.size):
        for j in range(d.size):
            if i != j:
                best = max(best, abs(float(d.dual_elements[i] @ d.elements[j])))
    assert coherence(d) == pytest.approx(best, rel=1e-14)


def test_d_seminorm_of_element_is_at_least_one(random_dict):
    for g in random_dict.elements:
        assert d_seminorm(random_dict, g) >= 1.0 - 1e-9


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------

def test_sample_A1_single_term():
    d = make_random_unit(SpaceLp(5, 2.0), 6, seed=0)
    f, rep = sample_A1(d, 1, seed=9)
    assert len(rep.terms) == 1
    index, sign, coef = rep.terms[0]
    assert coef == 1.0
    np.testing.assert_array_equal(f, sign * d.elements[index])


@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
@settings(max_examples=60, deadline=None)
def test_sample_A1_mass_is_one(seed, k):
    d = make_random_unit(SpaceLp(6, 3.0), 12, seed=4)
    f, rep = sample_A1(d, k, seed=seed)
    assert rep.l1_mass == pytest.approx(1.0, abs=1e-12)
    assert rep.in_A1
    assert len(rep.support) == k
    np.testing.assert_allclose(rep.to_element(d), f)
    np.testing.assert_allclose(d.combine(rep.coefficient_vector(d.size)), f, atol=1e-13)


def test_sample_sparse_magnitudes():
    d = make_random_unit(SpaceLp(8, 2.0), 16, seed=4)
    _, rep = sample_sparse(d, 5, seed=1)
    assert all(1.0 <= c <= 2.0 for _, _, c in rep.terms)
    with pytest.raises(ValueError):
        sample_sparse(d, 17, seed=1)


def test_sup_over_A1_attained_by_dictionary(random_dict, rng):
    F = rng.standard_normal(random_dict.space.dim)
    sampled, sup = check_ll2(F, random_dict, samples=300, seed=1)
    assert sampled <= sup + 1e-12
    sampled_hull, sup_hull = check_ll3(F, random_dict, samples=300, seed=1)
    assert sampled_hull <= sup_hull + 1e-12
