"""
Certified reference computations.

  best_m_term           — σ_m(f, D) by exhaustive subset enumeration
  best_m_term_seminorm  — σ_m(f)_D in the seminorm ‖x‖_D = max_g |F_g(x)| (linear programs)
  svd_tail              — (Σ_{j>m} s_j²)^{1/2} from the in-repo Jacobi SVD
  check_theorem_bound   — a trace against a rate bound
  check_dominance       — no residual may fall below σ_m
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations, islice
from typing import Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog

from greedy.bounds import EXPLICIT, BoundContext, BoundSpec
from greedy.dictionary import Dictionary
from greedy.errors import GuardExceededError, ProjectionError
from greedy.linalg import jacobi_svd
from greedy.space import SpaceLp, lp_norm
from greedy.steps import SolverOptions, project_batch
from greedy.trace import Trace

logger = logging.getLogger(__name__)

_MAX_SUBSETS   = 10**6
_CHUNK         = 2048
_KKT_TOL       = 1e-8
_ORACLE_SLACK  = 1e-7
_GROWTH_LIMIT  = 1.05


@dataclass
class OracleResult:
    value:        float
    exact:        bool
    certificate:  Dict[str, float] = field(default_factory=dict)
    support:      Tuple[int, ...] = ()
    coefficients: Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "value":       self.value,
            "exact":       self.exact,
            "certificate": dict(self.certificate),
            "support":     list(self.support),
        }


@dataclass
class BoundCheck:
    bound_id:        str
    kind:            str
    max_ratio:       float
    argmax:          int
    first_violation: Optional[int] = None
    passed:          bool = True
    fitted_constant: Optional[float] = None
    growth:          Optional[float] = None
    ratios:          Optional[np.ndarray] = None

    def to_dict(self) -> dict:
        return {
            "bound_id":        self.bound_id,
            "kind":            self.kind,
            "max_ratio":       self.max_ratio,
            "argmax":          self.argmax,
            "first_violation": self.first_violation,
            "passed":          self.passed,
            "fitted_constant": self.fitted_constant,
            "growth":          self.growth,
        }


# ---------------------------------------------------------------------------
# Best m-term approximation
# ---------------------------------------------------------------------------

def _chunks(it: Iterator[Tuple[int, ...]], size: int) -> Iterator[List[Tuple[int, ...]]]:
    while True:
        block = list(islice(it, size))
        if not block:
            return
        yield block


def _subset_count(dictionary: Dictionary, m: int) -> int:
    count = math.comb(dictionary.size, m)
    if count > _MAX_SUBSETS:
        raise GuardExceededError(
            f"C({dictionary.size}, {m}) = {count} subsets exceed the limit of {_MAX_SUBSETS}"
        )
    return count


def best_m_term(
    space: SpaceLp,
    dictionary: Dictionary,
    f: np.ndarray,
    m: int,
    options: SolverOptions = SolverOptions(),
) -> OracleResult:
    """
    σ_m(f, D) = min over m-subsets of the Chebyshev projection residual.

    Every subset solve is certified by its KKT violation; the minimum is
    exact at p = 2 (least squares) and convex-solve certified otherwise.

    Raises
    ------
    GuardExceededError
        If C(N, m) > 10^6.
    ProjectionError
        If a subset projection misses the KKT tolerance 1e-8.
    """
    f = space.element(f)
    if m < 0:
        raise ValueError("m must be ≥ 0")
    f_norm = float(lp_norm(f, space.p))
    if m == 0 or f_norm == 0.0:
        return OracleResult(f_norm, True, {"subsets": 1, "m": m})
    m_eff = min(m, dictionary.size)
    count = _subset_count(dictionary, m_eff)

    best, best_support, best_coef = math.inf, (), None
    worst_kkt = 0.0
    elements = dictionary.elements
    for block in _chunks(combinations(range(dictionary.size), m_eff), _CHUNK):
        idx = np.array(block)
        bases = np.transpose(elements[idx], (0, 2, 1))
        coef, res, kkt, _ = project_batch(space, f, bases, options)
        # exact fits have no meaningful KKT residual
        scaled = np.where(res > 1e-12 * f_norm, kkt, 0.0)
        worst_kkt = max(worst_kkt, float(scaled.max()))
        j = int(np.argmin(res))
        if res[j] < best:
            best, best_support, best_coef = float(res[j]), tuple(block[j]), coef[j].copy()

    if worst_kkt > _KKT_TOL:
        raise ProjectionError(
            f"best_m_term: subset projection KKT violation {worst_kkt:.3g} exceeds {_KKT_TOL:g}",
            worst_kkt,
        )
    logger.debug("σ_%d = %.10g over %d subsets (KKT ≤ %.2g)", m, best, count, worst_kkt)
    return OracleResult(
        value=best,
        exact=True,
        certificate={"subsets": count, "m": m_eff, "max_kkt": worst_kkt},
        support=best_support,
        coefficients=best_coef,
    )


def best_m_term_seminorm(dictionary: Dictionary, f: np.ndarray, m: int) -> OracleResult:
    """
    σ_m(f)_D = min over m-subsets S and c of max_i |F_{g_i}(f − Σ_S c_j g_j)|.

    Each subset is one linear program: minimize s subject to
    −s ≤ F_{g_i}(f) − Σ_j c_j F_{g_i}(g_j) ≤ s.

    Raises
    ------
    ProjectionError
        If any subset LP fails, since the minimum is then uncertified.
    """
    f = dictionary.space.element(f)
    duals = dictionary.dual_elements
    target = duals @ f
    if m == 0:
        return OracleResult(float(np.max(np.abs(target))), True, {"subsets": 1, "m": 0})
    m_eff = min(m, dictionary.size)
    count = _subset_count(dictionary, m_eff)
    cross = duals @ dictionary.elements.T          # cross[i, j] = F_{g_i}(g_j)
    n_rows = dictionary.size

    best, best_support, best_coef = math.inf, (), None
    cost = np.zeros(m_eff + 1)
    cost[-1] = 1.0
    bounds = [(None, None)] * m_eff + [(0.0, None)]
    ones = np.ones((n_rows, 1))
    for S in combinations(range(dictionary.size), m_eff):
        A = cross[:, list(S)]
        a_ub = np.vstack([np.hstack([-A, -ones]), np.hstack([A, -ones])])
        b_ub = np.concatenate([-target, target])
        sol = linprog(cost, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not sol.success:
            raise ProjectionError(
                f"best_m_term_seminorm: LP failed on subset {S}: {sol.message}",
                math.inf,
            )
        if sol.fun < best:
            best, best_support, best_coef = float(sol.fun), S, sol.x[:-1].copy()
    return OracleResult(
        value=max(best, 0.0),
        exact=True,
        certificate={"subsets": count, "m": m_eff},
        support=best_support,
        coefficients=best_coef,
    )


def sigma_profile(
    space: SpaceLp,
    dictionary: Dictionary,
    f: np.ndarray,
    m_max: int,
    options: SolverOptions = SolverOptions(),
) -> np.ndarray:
    """σ_0 … σ_{m_max}, made non-increasing against solver noise."""
    values = np.array([best_m_term(space, dictionary, f, m, options).value for m in range(m_max + 1)])
    return np.minimum.accumulate(values)


# ---------------------------------------------------------------------------
# Bilinear tail
# ---------------------------------------------------------------------------

def svd_tail(matrix: np.ndarray, m: int) -> float:
    """(Σ_{j>m} s_j²)^{1/2}; svd_tail(·, 0) is the Frobenius norm."""
    if m < 0:
        raise ValueError("m must be ≥ 0")
    _, s, _ = jacobi_svd(np.asarray(matrix, dtype=float))
    return float(np.sqrt(np.sum(s[m:] ** 2)))


# ---------------------------------------------------------------------------
# Trace audits
# ---------------------------------------------------------------------------

def stable_constant(ratios: np.ndarray) -> Tuple[float, float]:
    """
    Fit C = max ratio on m ∈ [M/2, M] and measure the growth of the ratio
    on (M, 2M] relative to it, with 2M the last available iteration.

    Returns (C, growth); growth ≤ 1.05 counts as bounded.
    """
    total = len(ratios)
    M = total // 2
    if M < 2:
        c = float(np.max(ratios)) if total else 0.0
        return c, 1.0
    fit = ratios[M // 2 - 1:M]
    tail = ratios[M:]
    c = float(np.max(fit))
    if c == 0.0:
        return 0.0, 1.0 if float(np.max(tail)) == 0.0 else math.inf
    return c, float(np.max(tail)) / c


def check_theorem_bound(
    trace: Trace,
    bound: BoundSpec,
    ctx: BoundContext,
    tol: float = 1e-9,
) -> BoundCheck:
    """
    max_m ‖f_m‖/bound(m) over the iterations of *trace*.

    Explicit bounds fail on the first ratio above 1 + tol.  Existential
    bounds fail when the fitted constant grows by more than 5% over the
    second half of the run.
    """
    norms = trace.residual_norms()[1:]
    if norms.size == 0:
        return BoundCheck(bound.id, bound.kind, 0.0, 0)
    values = bound.evaluate(norms.size, ctx)
    if np.any(values <= 0.0):
        raise ValueError(f"bound {bound.id} is not positive on 1..{norms.size}")
    ratios = norms / values
    j = int(np.argmax(ratios))
    check = BoundCheck(bound.id, bound.kind, float(ratios[j]), j + 1, ratios=ratios)

    if bound.kind == EXPLICIT:
        over = np.flatnonzero(ratios > 1.0 + tol)
        if over.size:
            check.first_violation = int(over[0]) + 1
            check.passed = False
    else:
        c, growth = stable_constant(ratios)
        check.fitted_constant = c
        check.growth = growth
        check.passed = growth <= _GROWTH_LIMIT
        if not check.passed:
            check.first_violation = int(np.argmax(ratios > c * _GROWTH_LIMIT)) + 1
    if not check.passed:
        logger.warning(
            "%s vs %s: ratio %.6g at m=%d (%s)",
            trace.algorithm, bound.id, check.max_ratio, check.argmax, bound.kind,
        )
    return check


def check_dominance(trace: Trace, sigma: Sequence[float], slack: float = _ORACLE_SLACK) -> Optional[int]:
    """First m with ‖f_m‖ < σ_m − slack, or None."""
    norms = trace.residual_norms()
    for m in range(min(len(norms), len(sigma))):
        if norms[m] < sigma[m] - slack:
            return m
    return None
