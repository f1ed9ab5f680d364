"""
Greedy-selection and approximation primitives.

  line_search_1d      — argmin_λ ‖f − λg‖ by bisection on the derivative
  chebyshev_project   — best approximation of f from span{y_j}
  free_relax          — best (1 − w)G + λφ
  fixed_relax         — (1 − r)G + λφ with λ from a line search
  x_greedy_select     — argmin over D of inf_λ ‖f − λg‖
  threshold_select    — first element with |F(g)| ≥ δ

Most kernels come in a batched form (leading axis = independent problems) so
that X-greedy steps, oracles and constant estimators can sweep a whole
dictionary or a whole family of subsets in one numpy pass.  The scalar
entry points are thin wrappers over the batched ones.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Union

import numpy as np

from greedy.dictionary import Dictionary, Selection, evaluate
from greedy.errors import SingularSystemError, ZeroVectorError
from greedy.linalg import back_substitute, householder_qr, solve_partial_pivot
from greedy.space import DualFunctional, SpaceLp, lp_norm

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps

_DEFAULT_TOL_GRAD   = 1e-10
_DEFAULT_MAX_ITER   = 500
_BRACKET_GROWTH     = 2.0
_HUBER_EPS          = 1e-12
_BISECTION_STEPS    = 200
_ARMIJO_C           = 1e-4
_ARMIJO_HALVINGS    = 60
_RIDGE              = 1e-14
_EXACT_FIT          = 1e-13
_RANK_TOL           = 1e-10


@dataclass(frozen=True)
class SolverOptions:
    tol_grad:       float = _DEFAULT_TOL_GRAD     # KKT target, scaled by max(1, ‖f‖)
    max_iter:       int   = _DEFAULT_MAX_ITER     # Newton iterations per projection
    bracket_growth: float = _BRACKET_GROWTH       # line-search bracket expansion factor
    huber_eps:      float = _HUBER_EPS            # Hessian smoothing near zero coordinates (p < 2)

    def __post_init__(self) -> None:
        if self.tol_grad <= 0.0:
            raise ValueError("tol_grad must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be ≥ 1")
        if self.bracket_growth <= 1.0:
            raise ValueError("bracket_growth must exceed 1")


_DEFAULT_OPTIONS = SolverOptions()


@dataclass
class ProjectionResult:
    coefficients:  np.ndarray          # one per span element; dropped elements get 0
    residual:      np.ndarray
    residual_norm: float
    kkt_violation: float               # max_j |F_residual(y_j)|
    converged:     bool = True
    iterations:    int = 0
    dropped:       List[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "coefficients":  self.coefficients.tolist(),
            "residual_norm": self.residual_norm,
            "kkt_violation": self.kkt_violation,
            "converged":     self.converged,
            "iterations":    self.iterations,
            "dropped":       list(self.dropped),
        }


@dataclass(frozen=True)
class XSelection:
    index:         int
    lam:           float
    residual_norm: float

    @property
    def sign(self) -> int:
        return 1 if self.lam >= 0.0 else -1


# ---------------------------------------------------------------------------
# Line search
# ---------------------------------------------------------------------------

def _derivative(p: float, f: np.ndarray, g: np.ndarray, lam: np.ndarray) -> np.ndarray:
    """d/dλ of ‖f − λg‖_p^p / p, row-wise."""
    r = f - lam[:, None] * g
    return -np.sum(np.sign(r) * np.abs(r) ** (p - 1.0) * g, axis=1)


def line_search_batch(
    space: SpaceLp,
    f: np.ndarray,
    g: np.ndarray,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Row-wise argmin_λ ‖f_s − λg_s‖_p.

    *f* may be a single vector shared by every row of *g*.

    Returns
    -------
    (lambdas, residual_norms), each of shape (S,)
    """
    g = np.atleast_2d(np.asarray(g, dtype=float))
    f = np.broadcast_to(np.asarray(f, dtype=float), g.shape)
    p = space.p
    g_norm = np.atleast_1d(lp_norm(g, p, axis=1))
    if np.any(g_norm == 0.0):
        raise ZeroVectorError("line search direction must be non-zero")
    f_norm = np.atleast_1d(lp_norm(f, p, axis=1))

    if space.is_hilbert:
        lam = np.sum(f * g, axis=1) / np.sum(g * g, axis=1)
    else:
        half = f_norm / g_norm
        lo, hi = -half, half.copy()
        for _ in range(64):
            low_bad = _derivative(p, f, g, lo) > 0.0
            high_bad = _derivative(p, f, g, hi) < 0.0
            if not (low_bad.any() or high_bad.any()):
                break
            lo = np.where(low_bad, lo * options.bracket_growth, lo)
            hi = np.where(high_bad, hi * options.bracket_growth, hi)
        for _ in range(_BISECTION_STEPS):
            mid = 0.5 * (lo + hi)
            if np.all(hi - lo <= 4.0 * _EPS * np.maximum(1.0, np.abs(mid))):
                break
            h = _derivative(p, f, g, mid)
            lo = np.where(h < 0.0, mid, lo)
            hi = np.where(h > 0.0, mid, hi)
            exact = h == 0.0
            lo = np.where(exact, mid, lo)
            hi = np.where(exact, mid, hi)
        lam = 0.5 * (lo + hi)

    lam = np.where(f_norm == 0.0, 0.0, lam)
    res = np.atleast_1d(lp_norm(f - lam[:, None] * g, p, axis=1))
    worse = res > f_norm
    if np.any(worse):
        lam = np.where(worse, 0.0, lam)
        res = np.where(worse, f_norm, res)
    return lam, res


def line_search_1d(
    space: SpaceLp,
    f: np.ndarray,
    g: np.ndarray,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[float, float]:
    """
    λ* = argmin_λ ‖f − λg‖_p and the attained residual norm.

    Raises
    ------
    ZeroVectorError
        If g = 0.
    """
    fv = space.element(f)
    gv = space.element(g)
    lam, res = line_search_batch(space, fv, gv[None, :], options)
    return float(lam[0]), float(res[0])


def line_search_interval(
    space: SpaceLp,
    f: np.ndarray,
    g: np.ndarray,
    lo: float = 0.0,
    hi: float = np.inf,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[float, float]:
    """Minimizer of ‖f − λg‖ over lo ≤ λ ≤ hi (convexity makes clipping exact)."""
    lam, res = line_search_1d(space, f, g, options)
    clipped = min(max(lam, lo), hi)
    if clipped != lam:
        res = lp_norm(np.asarray(f, dtype=float) - clipped * np.asarray(g, dtype=float), space.p)
    return clipped, res


# ---------------------------------------------------------------------------
# Chebyshev projection
# ---------------------------------------------------------------------------

def _residual_functionals(p: float, r: np.ndarray) -> np.ndarray:
    """Row-wise norming functionals; zero rows map to zero."""
    norms = np.atleast_1d(lp_norm(r, p, axis=1))
    safe = np.where(norms > 0.0, norms, 1.0)
    return np.sign(r) * (np.abs(r) / safe[:, None]) ** (p - 1.0)


def kkt_violation_batch(space: SpaceLp, r: np.ndarray, bases: np.ndarray) -> np.ndarray:
    """max_j |F_{r_s}(b_sj)| for r of shape (S, n) and bases (S, n, k)."""
    fr = _residual_functionals(space.p, r)
    if bases.shape[2] == 0:
        return np.zeros(r.shape[0])
    return np.max(np.abs(np.einsum("sn,snk->sk", fr, bases)), axis=1)


def _newton_steps(hess: np.ndarray, grad: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Newton directions −H⁻¹g per problem; unsolvable systems get a zero step."""
    step = np.zeros_like(grad)
    solved = np.ones(grad.shape[0], dtype=bool)
    for s in range(grad.shape[0]):
        scale = float(np.max(np.abs(hess[s])))
        try:
            step[s] = -solve_partial_pivot(hess[s], grad[s], pivot_tol=_EPS * max(scale, np.finfo(float).tiny))
        except SingularSystemError as exc:
            logger.debug("newton step skipped: %s", exc)
            solved[s] = False
    return step, solved


def _newton_batch(
    space: SpaceLp,
    targets: np.ndarray,
    bases: np.ndarray,
    c0: np.ndarray,
    options: SolverOptions,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Damped Newton on Σ|t − Bc|^p for a stack of independent problems.

    Returns
    -------
    (coefficients, iterations, converged, kkt)
    """
    p = space.p
    n_prob, _, k = bases.shape
    c = np.array(c0, dtype=float, copy=True)
    iterations = np.zeros(n_prob, dtype=int)
    t_norm = np.atleast_1d(lp_norm(targets, p, axis=1))
    goal = options.tol_grad * np.maximum(1.0, t_norm)

    r = targets - np.einsum("snk,sk->sn", bases, c)
    kkt = kkt_violation_batch(space, r, bases)
    zero = np.atleast_1d(lp_norm(r, p, axis=1)) == 0.0
    converged = (kkt <= goal) | zero
    active = ~converged
    eye = np.eye(k)

    for _ in range(options.max_iter):
        if not active.any():
            break
        idx = np.flatnonzero(active)
        b = bases[idx]
        t = targets[idx]
        cc = c[idx]
        r = t - np.einsum("snk,sk->sn", b, cc)
        a = np.abs(r)
        phi0 = np.sum(a ** p, axis=1)
        grad = -p * np.einsum("snk,sn->sk", b, np.sign(r) * a ** (p - 1.0))
        if p < 2.0:
            w = np.maximum(a, options.huber_eps) ** (p - 2.0)
        else:
            w = a ** (p - 2.0)
        hess = p * (p - 1.0) * np.einsum("snk,sn,snl->skl", b, w, b)
        ridge = _RIDGE * np.trace(hess, axis1=1, axis2=2) / k + np.finfo(float).tiny
        hess = hess + ridge[:, None, None] * eye
        step, solved = _newton_steps(hess, grad)
        slope = np.sum(grad * step, axis=1)

        alpha = np.ones(idx.size)
        accepted = np.zeros(idx.size, dtype=bool)
        for _ in range(_ARMIJO_HALVINGS):
            trial = cc + alpha[:, None] * step
            phi = np.sum(np.abs(t - np.einsum("snk,sk->sn", b, trial)) ** p, axis=1)
            ok = ~accepted & (phi <= phi0 + _ARMIJO_C * alpha * slope + 4.0 * _EPS * phi0)
            cc[ok] = trial[ok]
            accepted |= ok
            if accepted.all():
                break
            alpha = np.where(accepted, alpha, 0.5 * alpha)

        c[idx] = cc
        iterations[idx] += 1
        r = t - np.einsum("snk,sk->sn", b, cc)
        kkt[idx] = kkt_violation_batch(space, r, b)
        done = (kkt[idx] <= goal[idx]) | (np.atleast_1d(lp_norm(r, p, axis=1)) == 0.0)
        converged[idx] = done
        active[idx[done | ~accepted | ~solved]] = False

    return c, iterations, converged, kkt


def _stack_span(space: SpaceLp, span: Union[Sequence[np.ndarray], np.ndarray]) -> np.ndarray:
    """Span elements as the columns of an (n, k) array."""
    if isinstance(span, np.ndarray) and span.ndim == 2:
        cols = span
    else:
        cols = np.column_stack([space.element(y) for y in span]) if len(span) else np.zeros((space.dim, 0))
    if cols.shape[0] != space.dim:
        raise ValueError(f"span columns have length {cols.shape[0]}, space has dim {space.dim}")
    return np.asarray(cols, dtype=float)


def chebyshev_project(
    space: SpaceLp,
    f: np.ndarray,
    span: Union[Sequence[np.ndarray], np.ndarray],
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> ProjectionResult:
    """
    Best approximation of *f* from the span of the given elements.

    *span* is a sequence of elements or an (n, k) array whose columns are
    the elements.  Numerically dependent elements (QR tolerance 1e-10) are
    dropped, reported in ``dropped`` and given coefficient 0.

    At p = 2 the least-squares solution is returned.  Otherwise the
    least-squares solution seeds a damped Newton iteration on ‖·‖_p^p which
    stops once the KKT violation max_j |F_residual(y_j)| is at most
    ``tol_grad · max(1, ‖f‖)``.  ``converged=False`` marks a run that hit
    ``max_iter`` or stalled in the line search.
    """
    fv = space.element(f)
    cols = _stack_span(space, span)
    k = cols.shape[1]
    if k == 0:
        raise ValueError("chebyshev_project needs a non-empty span")

    qr = householder_qr(cols, tol=_RANK_TOL)
    coefficients = np.zeros(k)
    if qr.dependent:
        logger.warning("chebyshev_project: dropped dependent span elements %s", qr.dependent)
    if qr.rank == 0:
        nrm = lp_norm(fv, space.p)
        return ProjectionResult(coefficients, fv.copy(), nrm, 0.0, True, 0, list(qr.dependent))

    basis = cols[:, qr.independent]
    c = back_substitute(qr.r, qr.q.T @ fv)
    residual = fv - basis @ c
    res_norm = lp_norm(residual, space.p)
    iterations = 0
    converged = True

    if space.is_hilbert:
        kkt = float(kkt_violation_batch(space, residual[None, :], basis[None, :, :])[0])
    elif res_norm <= _EXACT_FIT * max(1.0, lp_norm(fv, space.p)):
        # f already lies in the span
        kkt = 0.0
    else:
        c_b, it_b, conv_b, kkt_b = _newton_batch(
            space, fv[None, :], basis[None, :, :], c[None, :], options,
        )
        c = c_b[0]
        iterations = int(it_b[0])
        converged = bool(conv_b[0])
        kkt = float(kkt_b[0])
        residual = fv - basis @ c
        res_norm = lp_norm(residual, space.p)
        if not converged:
            logger.warning(
                "chebyshev_project: KKT %.3e after %d iterations (target %.1e)",
                kkt, iterations, options.tol_grad,
            )

    coefficients[qr.independent] = c
    logger.debug("projection onto %d elements: residual %.6g, kkt %.2e", k, res_norm, kkt)
    return ProjectionResult(
        coefficients=coefficients,
        residual=residual,
        residual_norm=res_norm,
        kkt_violation=kkt,
        converged=converged,
        iterations=iterations,
        dropped=list(qr.dependent),
    )


def project_batch(
    space: SpaceLp,
    targets: np.ndarray,
    bases: np.ndarray,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """
    Chebyshev projections of targets[s] onto the columns of bases[s].

    *targets* is (S, n) or a single (n,) vector shared by all problems;
    *bases* is (S, n, k).  Problems whose basis is numerically rank
    deficient are routed through :func:`chebyshev_project` one by one.

    Returns
    -------
    (coefficients (S, k), residual_norms (S,), kkt (S,), converged (S,))
    """
    bases = np.asarray(bases, dtype=float)
    n_prob, n, k = bases.shape
    targets = np.array(np.broadcast_to(np.asarray(targets, dtype=float), (n_prob, n)))
    p = space.p

    c = np.zeros((n_prob, k))
    deficient = np.ones(n_prob, dtype=bool)
    if k <= n:
        for s in range(n_prob):
            qr = householder_qr(bases[s], tol=_RANK_TOL)
            if qr.dependent:
                continue
            c[s] = back_substitute(qr.r, qr.q.T @ targets[s])
            deficient[s] = False
    ok = ~deficient

    converged = np.ones(n_prob, dtype=bool)
    residual = targets - np.einsum("snk,sk->sn", bases, c)
    res_norm = np.atleast_1d(lp_norm(residual, p, axis=1))
    kkt = np.zeros(n_prob)

    if space.is_hilbert:
        kkt[ok] = kkt_violation_batch(space, residual[ok], bases[ok])
    else:
        t_norm = np.atleast_1d(lp_norm(targets, p, axis=1))
        newton = ok & (res_norm > _EXACT_FIT * np.maximum(1.0, t_norm))
        if newton.any():
            c_n, _, conv_n, kkt_n = _newton_batch(
                space, targets[newton], bases[newton], c[newton], options,
            )
            c[newton] = c_n
            converged[newton] = conv_n
            kkt[newton] = kkt_n
            residual[newton] = targets[newton] - np.einsum("snk,sk->sn", bases[newton], c_n)
            res_norm[newton] = np.atleast_1d(lp_norm(residual[newton], p, axis=1))

    for s in np.flatnonzero(deficient):
        single = chebyshev_project(space, targets[s], bases[s], options)
        c[s] = single.coefficients
        res_norm[s] = single.residual_norm
        kkt[s] = single.kkt_violation
        converged[s] = single.converged

    return c, res_norm, kkt, converged


def is_best_approximation(
    space: SpaceLp,
    f: np.ndarray,
    span: Union[Sequence[np.ndarray], np.ndarray],
    coefficients: np.ndarray,
    tol: float = 1e-8,
) -> bool:
    """Biorthogonality test: F_{f − Σc_jy_j}(y_j) = 0 for every j certifies a best approximation."""
    fv = space.element(f)
    cols = _stack_span(space, span)
    residual = fv - cols @ np.asarray(coefficients, dtype=float)
    if lp_norm(residual, space.p) == 0.0:
        return True
    kkt = kkt_violation_batch(space, residual[None, :], cols[None, :, :])[0]
    return bool(kkt <= tol)


# ---------------------------------------------------------------------------
# Relaxation steps
# ---------------------------------------------------------------------------

def free_relax(
    space: SpaceLp,
    f: np.ndarray,
    G: np.ndarray,
    phi: np.ndarray,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[float, float, float]:
    """
    inf over (w, λ) of ‖f − ((1 − w)G + λφ)‖.

    Returns
    -------
    (w, lambda, residual_norm)
    """
    gv = space.element(G)
    if lp_norm(gv, space.p) == 0.0:
        lam, res = line_search_1d(space, f, phi, options)
        return 0.0, lam, res
    proj = chebyshev_project(space, f, np.column_stack([gv, space.element(phi)]), options)
    a, lam = proj.coefficients
    return 1.0 - float(a), float(lam), proj.residual_norm


def free_relax_batch(
    space: SpaceLp,
    f: np.ndarray,
    G: np.ndarray,
    candidates: np.ndarray,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """:func:`free_relax` for every row of *candidates* with shared f and G."""
    candidates = np.atleast_2d(candidates)
    if lp_norm(np.asarray(G, dtype=float), space.p) == 0.0:
        lam, res = line_search_batch(space, f, candidates, options)
        return np.zeros_like(lam), lam, res
    bases = np.stack(
        [np.broadcast_to(G, candidates.shape), candidates], axis=2,
    )
    c, res, _, _ = project_batch(space, f, bases, options)
    return 1.0 - c[:, 0], c[:, 1], res


def fixed_relax(
    space: SpaceLp,
    f: np.ndarray,
    G: np.ndarray,
    phi: np.ndarray,
    r: float,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> tuple[float, float]:
    """
    λ* minimizing ‖f − (1 − r)G − λφ‖ for a fixed relaxation r ∈ [0, 1).

    The new approximant is (1 − r)G + λ*φ.
    """
    if not (0.0 <= r < 1.0):
        raise ValueError(f"relaxation r must lie in [0, 1), got {r}")
    shifted = space.element(f) - (1.0 - r) * space.element(G)
    return line_search_1d(space, shifted, phi, options)


# ---------------------------------------------------------------------------
# Selection steps
# ---------------------------------------------------------------------------

def x_greedy_select(
    space: SpaceLp,
    f: np.ndarray,
    dictionary: Dictionary,
    options: SolverOptions = _DEFAULT_OPTIONS,
) -> XSelection:
    """
    argmin over g ∈ D of inf_λ ‖f − λg‖; lowest index wins ties.

    Raises
    ------
    ZeroVectorError
        If f = 0.
    """
    fv = space.element(f)
    if lp_norm(fv, space.p) == 0.0:
        raise ZeroVectorError("X-greedy selection needs a non-zero residual")
    lam, res = line_search_batch(space, fv, dictionary.elements, options)
    idx = int(np.argmin(res))
    return XSelection(index=idx, lam=float(lam[idx]), residual_norm=float(res[idx]))


def threshold_select(
    functional: Union[DualFunctional, np.ndarray],
    dictionary: Dictionary,
    delta: float,
) -> Optional[Selection]:
    """Lowest-index element with |F(g)| ≥ δ, signed so that F(σg) ≥ 0; None if there is none."""
    if delta <= 0.0:
        raise ValueError(f"threshold must be positive, got {delta}")
    values = evaluate(functional, dictionary)
    passing = np.flatnonzero(np.abs(values) >= delta)
    if passing.size == 0:
        return None
    idx = int(passing[0])
    val = float(values[idx])
    return Selection(index=idx, sign=1 if val >= 0.0 else -1, value=abs(val))
