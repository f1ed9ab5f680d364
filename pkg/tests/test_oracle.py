import math
from types import SimpleNamespace

import numpy as np
import pytest

from greedy.bounds import EXISTENTIAL, EXPLICIT, BoundContext, BoundSpec, get_bound
from greedy.dictionary import make_canonical, make_random_unit
from greedy.errors import GuardExceededError, ProjectionError
from greedy.oracle import (
    best_m_term,
    best_m_term_seminorm,
    check_dominance,
    check_theorem_bound,
    sigma_profile,
    stable_constant,
    svd_tail,
)
from greedy.space import SmoothnessParams, SpaceLp, lp_norm
from greedy.trace import IterationRecord, StopReason, Trace

HILBERT = SmoothnessParams(0.5, 2.0)


def _trace(norms):
    records = [IterationRecord(m=m, residual_norm=float(n)) for m, n in enumerate(norms)]
    return Trace(algorithm="WCGA", records=records, stop_reason=StopReason.M_MAX)


# ---------------------------------------------------------------------------
# Best m-term
# ---------------------------------------------------------------------------

def test_best_one_term_example():
    space = SpaceLp(3, 2.0)
    res = best_m_term(space, make_canonical(space), [1.0, 0.5, 0.25], 1)
    assert res.value == pytest.approx(0.559017, abs=1e-6)
    assert res.support == (0,)
    assert res.exact


def test_best_m_term_of_sparse_signal_is_zero():
    space = SpaceLp(5, 3.0)
    f = np.array([0.0, 2.0, 0.0, -1.0, 0.0])
    d = make_canonical(space)
    assert best_m_term(space, d, f, 2).value == pytest.approx(0.0, abs=1e-12)
    assert best_m_term(space, d, f, 4).value == pytest.approx(0.0, abs=1e-12)


def test_best_m_term_zero_terms():
    space = SpaceLp(3, 3.0)
    res = best_m_term(space, make_canonical(space), [1.0, 1.0, 1.0], 0)
    assert res.value == pytest.approx(3.0 ** (1.0 / 3.0))
    with pytest.raises(ValueError):
        best_m_term(space, make_canonical(space), [1.0, 1.0, 1.0], -1)


def test_best_m_term_canonical_lp_certificate(rng):
    space = SpaceLp(8, 3.0)
    f = rng.standard_normal(8)
    res = best_m_term(space, make_canonical(space), f, 2)
    assert res.certificate["subsets"] == 28
    assert res.certificate["max_kkt"] <= 1e-8
    keep = np.argsort(-np.abs(f))[2:]
    assert res.value == pytest.approx(lp_norm(f[keep], 3.0), rel=1e-9)
    assert set(res.support) == set(np.argsort(-np.abs(f))[:2].tolist())


def test_best_m_term_guard():
    space = SpaceLp(4, 2.0)
    d = make_random_unit(space, 60, seed=1)
    with pytest.raises(GuardExceededError):
        best_m_term(space, d, np.ones(4), 5)


def test_sigma_profile_non_increasing(rng):
    space = SpaceLp(4, 3.0)
    d = make_random_unit(space, 6, seed=2)
    f = rng.standard_normal(4)
    sigma = sigma_profile(space, d, f, 4)
    assert sigma[0] == pytest.approx(lp_norm(f, 3.0))
    assert np.all(np.diff(sigma) <= 0.0)
    assert sigma[4] == pytest.approx(0.0, abs=1e-9)


def test_seminorm_oracle():
    d = make_canonical(SpaceLp(3, 2.0))
    f = [1.0, 0.5, 0.25]
    assert best_m_term_seminorm(d, f, 0).value == pytest.approx(1.0)
    res = best_m_term_seminorm(d, f, 1)
    assert res.value == pytest.approx(0.5, abs=1e-9)
    assert res.support == (0,)


def test_seminorm_oracle_raises_on_failed_lp(monkeypatch):
    failed = SimpleNamespace(success=False, message="iteration limit", fun=math.nan, x=None)
    monkeypatch.setattr("greedy.oracle.linprog", lambda *a, **k: failed)
    d = make_canonical(SpaceLp(3, 2.0))
    with pytest.raises(ProjectionError, match="LP failed"):
        best_m_term_seminorm(d, [1.0, 0.5, 0.25], 1)
    # m = 0 needs no LP
    assert best_m_term_seminorm(d, [1.0, 0.5, 0.25], 0).value == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# SVD tail
# ---------------------------------------------------------------------------

def test_svd_tail_examples():
    assert svd_tail(np.eye(3), 1) == pytest.approx(math.sqrt(2.0))
    assert svd_tail(np.eye(3), 0) == pytest.approx(math.sqrt(3.0))
    assert svd_tail(np.outer([1.0, 2.0], [3.0, 1.0, 1.0]), 1) == pytest.approx(0.0, abs=1e-12)
    assert svd_tail(np.eye(3), 5) == 0.0
    with pytest.raises(ValueError):
        svd_tail(np.eye(3), -1)


def test_svd_tail_non_increasing(rng):
    a = rng.standard_normal((5, 4))
    tails = [svd_tail(a, m) for m in range(5)]
    assert tails[0] == pytest.approx(np.linalg.norm(a))
    assert all(x >= y for x, y in zip(tails, tails[1:]))


# ---------------------------------------------------------------------------
# Bound checks
# ---------------------------------------------------------------------------

def test_stable_constant():
    c, growth = stable_constant(np.full(20, 3.0))
    assert (c, growth) == (3.0, 1.0)
    c, growth = stable_constant(np.sqrt(np.arange(1.0, 21.0)))
    assert c == pytest.approx(math.sqrt(10.0))
    assert growth == pytest.approx(math.sqrt(2.0))


def test_explicit_bound_check():
    ctx = BoundContext(params=HILBERT, initial_norm=1.0)
    ok = check_theorem_bound(_trace([1.0, 0.5, 0.25]), get_bound("initial_norm"), ctx)
    assert ok.passed
    assert ok.first_violation is None
    bad = check_theorem_bound(_trace([1.0, 0.5, 1.5, 0.2]), get_bound("initial_norm"), ctx)
    assert not bad.passed
    assert bad.first_violation == 2
    assert bad.max_ratio == pytest.approx(1.5)
    assert bad.argmax == 2


def test_existential_bound_check():
    ctx = BoundContext(params=HILBERT)
    m = np.arange(0, 41, dtype=float)
    good = _trace(np.concatenate([[5.0], 3.0 * m[1:] ** -0.5]))
    check = check_theorem_bound(good, get_bound("gawr"), ctx)
    assert check.passed
    assert check.fitted_constant == pytest.approx(3.0)
    flat = _trace(np.ones(41))
    assert not check_theorem_bound(flat, get_bound("gawr"), ctx).passed


def test_bound_must_be_positive():
    zero = BoundSpec("zero", EXPLICIT, "0", lambda m, ctx: np.zeros_like(m))
    with pytest.raises(ValueError):
        check_theorem_bound(_trace([1.0, 0.5]), zero, BoundContext(params=HILBERT))


def test_empty_trace_passes():
    check = check_theorem_bound(_trace([1.0]), get_bound("wbga"), BoundContext(params=HILBERT))
    assert check.passed
    assert check.kind == EXPLICIT
    assert get_bound("rrxga").kind == EXISTENTIAL


def test_dominance():
    trace = _trace([1.0, 0.5, 0.2])
    assert check_dominance(trace, [1.0, 0.4, 0.1]) is None
    assert check_dominance(trace, [1.0, 0.6, 0.1]) == 1
