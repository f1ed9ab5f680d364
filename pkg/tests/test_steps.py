import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from greedy.dictionary import make_canonical, make_random_unit
from greedy.errors import ZeroVectorError
from greedy.space import SpaceLp, lp_norm
from greedy.steps import (
    SolverOptions,
    chebyshev_project,
    fixed_relax,
    free_relax,
    free_relax_batch,
    is_best_approximation,
    line_search_1d,
    line_search_interval,
    project_batch,
    threshold_select,
    x_greedy_select,
)


def _grid_line(space, f, g, lo=-6.0, hi=6.0, n=600_001):
    lams = np.linspace(lo, hi, n)
    res = lp_norm(f[None, :] - lams[:, None] * g[None, :], space.p, axis=1)
    j = int(np.argmin(res))
    return lams[j], float(res[j])


# ---------------------------------------------------------------------------
# Line search
# ---------------------------------------------------------------------------

def test_line_search_hilbert_examples():
    space = SpaceLp(2, 2.0)
    lam, res = line_search_1d(space, np.array([1.0, 0.0]), np.array([1.0, 0.0]))
    assert lam == 1.0
    assert res == 0.0
    lam, res = line_search_1d(space, np.array([0.0, 2.0]), np.array([1.0, 0.0]))
    assert lam == 0.0
    assert res == pytest.approx(2.0)


def test_line_search_p3_matches_grid():
    space = SpaceLp(2, 3.0)
    f = np.array([1.0, 2.0])
    lam, res = line_search_1d(space, f, np.array([0.0, 1.0]))
    assert lam == pytest.approx(2.0, abs=1e-9)
    assert res == pytest.approx(1.0, abs=1e-12)

    g = np.array([0.6, -0.8])
    lam, res = line_search_1d(space, f, g)
    lam_grid, res_grid = _grid_line(space, f, g)
    assert lam == pytest.approx(lam_grid, abs=1e-4)
    assert res <= res_grid + 1e-12


@given(st.integers(0, 2**32 - 1), st.sampled_from([1.5, 3.0, 4.0]))
@settings(max_examples=50, deadline=None)
def test_line_search_is_stationary(seed, p):
    space = SpaceLp(5, p)
    rng = np.random.default_rng(seed)
    f, g = rng.standard_normal(5), rng.standard_normal(5)
    lam, res = line_search_1d(space, f, g)
    for step in (1e-6, -1e-6):
        assert res <= lp_norm(f - (lam + step) * g, p) + 1e-12
    assert res <= lp_norm(f, p) + 1e-15


def test_line_search_zero_direction():
    with pytest.raises(ZeroVectorError):
        line_search_1d(SpaceLp(2, 3.0), np.ones(2), np.zeros(2))


def test_line_search_interval_clips():
    space = SpaceLp(2, 2.0)
    lam, res = line_search_interval(space, np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 0.0, 1.0)
    assert lam == 0.0
    assert res == pytest.approx(1.0)


# ---------------------------------------------------------------------------
# Chebyshev projection
# ---------------------------------------------------------------------------

def test_projection_of_member_of_span(space, rng):
    span = rng.standard_normal((3, space.dim))
    f = np.array([0.5, -1.0, 2.0]) @ span
    proj = chebyshev_project(space, f, list(span))
    assert proj.residual_norm <= 1e-9
    np.testing.assert_allclose(proj.coefficients, [0.5, -1.0, 2.0], atol=1e-8)


def test_projection_hilbert_orthonormal(canonical8, rng):
    space = canonical8.space
    f = rng.standard_normal(space.dim)
    proj = chebyshev_project(space, f, canonical8.elements[[1, 4]].T)
    np.testing.assert_allclose(proj.coefficients, f[[1, 4]], rtol=1e-12, atol=1e-14)


def test_projection_p3_is_certified_and_beats_grid(rng):
    space = SpaceLp(4, 3.0)
    f = rng.standard_normal(4)
    y1, y2 = rng.standard_normal(4), rng.standard_normal(4)
    proj = chebyshev_project(space, f, [y1, y2])
    assert proj.converged
    assert proj.kkt_violation <= 1e-8
    assert is_best_approximation(space, f, [y1, y2], proj.coefficients)

    a, b = np.meshgrid(np.linspace(-4, 4, 801), np.linspace(-4, 4, 801))
    cand = f[None, :] - a.reshape(-1, 1) * y1[None, :] - b.reshape(-1, 1) * y2[None, :]
    grid_best = float(np.min(lp_norm(cand, 3.0, axis=1)))
    assert proj.residual_norm <= grid_best + 1e-6


def test_projection_drops_dependent_elements():
    space = SpaceLp(3, 3.0)
    y = np.array([1.0, 2.0, 0.0])
    proj = chebyshev_project(space, np.array([1.0, 1.0, 1.0]), [y, 2.0 * y])
    assert proj.dropped == [1]
    assert proj.coefficients[1] == 0.0


def test_projection_needs_span():
    with pytest.raises(ValueError):
        chebyshev_project(SpaceLp(3, 3.0), np.ones(3), [])


def test_project_batch_matches_single(rng):
    space = SpaceLp(5, 4.0)
    targets = rng.standard_normal((3, 5))
    bases = rng.standard_normal((3, 5, 2))
    c, res, kkt, converged = project_batch(space, targets, bases)
    for s in range(3):
        single = chebyshev_project(space, targets[s], bases[s])
        np.testing.assert_allclose(c[s], single.coefficients, atol=1e-7)
        assert res[s] == pytest.approx(single.residual_norm, rel=1e-9)
    assert converged.all()
    assert np.all(kkt <= 1e-8)


def _forbid_lapack(monkeypatch):
    def boom(*args, **kwargs):
        raise AssertionError("LAPACK factorization called")
    for name in ("qr", "solve", "lstsq", "inv", "pinv"):
        monkeypatch.setattr(np.linalg, name, boom)


@pytest.mark.parametrize("p", [2.0, 3.0])
def test_project_batch_uses_in_repo_kernels(monkeypatch, rng, p):
    space = SpaceLp(6, p)
    targets = rng.standard_normal((4, 6))
    bases = rng.standard_normal((4, 6, 3))
    _forbid_lapack(monkeypatch)
    c, _, _, converged = project_batch(space, targets, bases)
    assert converged.all()
    for s in range(4):
        single = chebyshev_project(space, targets[s], bases[s])
        if space.is_hilbert:
            np.testing.assert_array_equal(c[s], single.coefficients)
        else:
            np.testing.assert_allclose(c[s], single.coefficients, atol=1e-7)


def test_best_m_term_hilbert_without_lapack(monkeypatch):
    from greedy.oracle import best_m_term

    space = SpaceLp(3, 2.0)
    _forbid_lapack(monkeypatch)
    result = best_m_term(space, make_canonical(space), np.array([1.0, 0.5, 0.25]), 1)
    assert result.value == pytest.approx(np.sqrt(0.3125), rel=1e-12)


def test_solver_options_validation():
    with pytest.raises(ValueError):
        SolverOptions(tol_grad=0.0)
    with pytest.raises(ValueError):
        SolverOptions(bracket_growth=1.0)


# ---------------------------------------------------------------------------
# Relaxation
# ---------------------------------------------------------------------------

def test_free_relax_with_zero_approximant_is_line_search(rng):
    space = SpaceLp(4, 3.0)
    f, phi = rng.standard_normal(4), rng.standard_normal(4)
    w, lam, res = free_relax(space, f, np.zeros(4), phi)
    lam_line, res_line = line_search_1d(space, f, phi)
    assert w == 0.0
    assert lam == lam_line
    assert res == res_line


def test_free_relax_exact_fit():
    space = SpaceLp(3, 3.0)
    G = np.array([1.0, 0.0, 0.0])
    phi = np.array([0.0, 1.0, 0.0])
    f = 0.3 * G + 0.7 * phi
    w, lam, res = free_relax(space, f, G, phi)
    assert res <= 1e-12
    assert w == pytest.approx(0.7, abs=1e-12)
    assert lam == pytest.approx(0.7, abs=1e-12)


def test_free_relax_hilbert_normal_equations(rng):
    space = SpaceLp(6, 2.0)
    f, G, phi = rng.standard_normal(6), rng.standard_normal(6), rng.standard_normal(6)
    w, lam, res = free_relax(space, f, G, phi)
    B = np.column_stack([G, phi])
    a, l = np.linalg.solve(B.T @ B, B.T @ f)
    assert 1.0 - w == pytest.approx(a, abs=1e-9)
    assert lam == pytest.approx(l, abs=1e-9)


def test_free_relax_batch_matches_single(rng):
    space = SpaceLp(5, 3.0)
    d = make_random_unit(space, 6, seed=3)
    f, G = rng.standard_normal(5), rng.standard_normal(5)
    w, lam, res = free_relax_batch(space, f, G, d.elements)
    for i, phi in enumerate(d.elements):
        wi, li, ri = free_relax(space, f, G, phi)
        assert res[i] == pytest.approx(ri, rel=1e-8)


def test_fixed_relax_zero_is_line_search(rng):
    space = SpaceLp(4, 4.0)
    f, G, phi = rng.standard_normal(4), rng.standard_normal(4), rng.standard_normal(4)
    lam, res = fixed_relax(space, f, G, phi, 0.0)
    assert (lam, res) == line_search_1d(space, f - G, phi)
    with pytest.raises(ValueError):
        fixed_relax(space, f, G, phi, 1.0)


# ---------------------------------------------------------------------------
# Selection
# ---------------------------------------------------------------------------

def test_x_greedy_select_picks_best_line():
    space = SpaceLp(3, 3.0)
    d = make_canonical(space)
    xs = x_greedy_select(space, np.array([0.2, -0.9, 0.4]), d)
    assert xs.index == 1
    assert xs.sign == -1
    assert xs.lam == pytest.approx(-0.9, abs=1e-9)
    with pytest.raises(ZeroVectorError):
        x_greedy_select(space, np.zeros(3), d)


def test_threshold_select():
    d = make_canonical(SpaceLp(3, 2.0))
    F = np.array([0.1, -0.4, 0.5])
    sel = threshold_select(F, d, 0.3)
    assert (sel.index, sel.sign) == (1, -1)
    assert threshold_select(F, d, 0.6) is None
    with pytest.raises(ValueError):
        threshold_select(F, d, 0.0)
