"""
Structural constants of a finite dictionary.

  rip_delta                  — restricted isometry δ at a given depth (p = 2)
  nikolskii_constant         — C1: Σ_{A}|x_i| ≤ C1|A|^r‖f_A‖ for |A| ≤ K
  unconditionality_constant  — U:  ‖f_A − Σ_Λ c_ig_i‖ ≥ U^{-1}‖f_A‖, |A| + |Λ| ≤ D
  l1_incoherence_constant    — V:  Σ_{A}|x_i| ≤ V|A|^r‖f_A − Σ_Λ c_ig_i‖

Subsets are enumerated exhaustively.  Because enlarging Λ can only shrink
the distance from f_A to span Λ, only Λ of maximal size min(D − |A|, N − |A|)
is visited.

The supremum over coefficient vectors x is taken over a lattice on the unit
ℓ1 sphere (compositions of ``resolution`` into |A| parts, all sign patterns
up to a global sign).  A lattice maximum never exceeds the true supremum, so
those values are LOWER estimates (``kind="lower"``).  U at p = 2 is exact
(principal angles), and every constant is exact when K = 1.  V ≤ C1·U holds
for the returned values because all three share one lattice.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import combinations
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from greedy.dictionary import Dictionary, coherence
from greedy.errors import GuardExceededError
from greedy.linalg import householder_qr, jacobi_eigh, jacobi_svd
from greedy.space import lp_norm
from greedy.steps import SolverOptions, project_batch

logger = logging.getLogger(__name__)

_MAX_SUBSETS      = 10**6
_MAX_PROJECTIONS  = 2 * 10**6
_DEFAULT_RESOLUTION = 6
_ANGLE_TOL        = 1e-15


@dataclass
class ConstantEstimate:
    value:       float
    exact:       bool
    kind:        str                  # "exact" | "lower"
    certificate: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "value":       self.value,
            "exact":       self.exact,
            "kind":        self.kind,
            "certificate": dict(self.certificate),
        }


@dataclass
class StructuralConstants:
    coherence: float
    rip_delta: Optional[float]        # at depth D_depth, p = 2 only
    U:         ConstantEstimate
    C1:        ConstantEstimate
    V:         ConstantEstimate
    K:         int
    D_depth:   int
    r:         float

    def to_dict(self) -> dict:
        return {
            "coherence": self.coherence,
            "rip_delta": self.rip_delta,
            "U":         self.U.to_dict(),
            "C1":        self.C1.to_dict(),
            "V":         self.V.to_dict(),
            "K":         self.K,
            "D_depth":   self.D_depth,
            "r":         self.r,
        }


# ---------------------------------------------------------------------------
# Internal helpers
# ---------------------------------------------------------------------------

def _guard(count: int, what: str, limit: int = _MAX_SUBSETS) -> None:
    if count > limit:
        raise GuardExceededError(f"{what}: {count} cases exceed the limit of {limit}")


def l1_sphere_grid(size: int, resolution: int) -> np.ndarray:
    """Points x with Σ|x_i| = 1 on a lattice of step 1/resolution, first sign fixed +."""
    if size < 1 or resolution < 1:
        raise ValueError("grid needs size ≥ 1 and resolution ≥ 1")
    parts = []
    for bars in combinations(range(resolution + size - 1), size - 1):
        edges = np.array((-1,) + bars + (resolution + size - 1,))
        parts.append(np.diff(edges) - 1)
    mags = np.array(parts, dtype=float) / resolution
    signs = np.array([(1.0,) + s for s in _sign_patterns(size - 1)])
    return (mags[:, None, :] * signs[None, :, :]).reshape(-1, size)


def _sign_patterns(k: int) -> List[Tuple[float, ...]]:
    if k == 0:
        return [()]
    return [tuple(1.0 if (bits >> j) & 1 == 0 else -1.0 for j in range(k)) for bits in range(2 ** k)]


def _pairs(n_elements: int, K: int, depth: int) -> Iterator[Tuple[Tuple[int, ...], Tuple[int, ...]]]:
    """(A, Λ) with 1 ≤ |A| ≤ K and Λ ⊂ complement of maximal size."""
    for a in range(1, K + 1):
        lam = min(depth - a, n_elements - a)
        if lam < 0:
            continue
        for A in combinations(range(n_elements), a):
            rest = [i for i in range(n_elements) if i not in A]
            for L in combinations(rest, lam):
                yield A, L


def _pair_count(n_elements: int, K: int, depth: int) -> int:
    total = 0
    for a in range(1, K + 1):
        lam = min(depth - a, n_elements - a)
        if lam >= 0:
            total += math.comb(n_elements, a) * math.comb(n_elements - a, lam)
    return total


def _check_params(dictionary: Dictionary, K: int, depth: Optional[int] = None) -> None:
    if not (1 <= K <= dictionary.size):
        raise ValueError(f"K must lie in [1, {dictionary.size}], got {K}")
    if depth is not None and depth < K:
        raise ValueError(f"depth D={depth} must be ≥ K={K}")


def _principal_u(qa: np.ndarray, ql: np.ndarray) -> float:
    """1/sin of the smallest principal angle between two orthonormal column sets."""
    if ql.shape[1] == 0:
        return 1.0
    _, s, _ = jacobi_svd(ql.T @ qa)
    cos_max = float(s[0]) if s.size else 0.0
    gap = 1.0 - cos_max * cos_max
    if gap <= _ANGLE_TOL:
        return math.inf
    return 1.0 / math.sqrt(gap)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def rip_delta(dictionary: Dictionary, depth: int) -> float:
    """
    Smallest δ with (1 − δ)‖a‖² ≤ ‖Σa_ig_i‖² ≤ (1 + δ)‖a‖² on every
    *depth*-subset, from the extreme eigenvalues of each subset Gram matrix.

    Raises
    ------
    ValueError
        Unless p = 2.
    GuardExceededError
        If C(N, depth) > 10^6.
    """
    if not dictionary.space.is_hilbert:
        raise ValueError("rip_delta is defined for p = 2 only")
    if not (1 <= depth <= dictionary.size):
        raise ValueError(f"depth must lie in [1, {dictionary.size}], got {depth}")
    _guard(math.comb(dictionary.size, depth), "rip_delta subsets")
    gram = dictionary.elements @ dictionary.elements.T
    delta = 0.0
    for S in combinations(range(dictionary.size), depth):
        eig, _ = jacobi_eigh(gram[np.ix_(S, S)])
        delta = max(delta, 1.0 - float(eig[0]), float(eig[-1]) - 1.0)
    return delta


def rip_unconditionality_bound(delta: float) -> float:
    """U ≤ ((1 + δ)/(1 − δ))^{1/2} for a dictionary with RIP constant δ < 1."""
    if not (0.0 <= delta < 1.0):
        raise ValueError(f"RIP constant must lie in [0, 1), got {delta}")
    return math.sqrt((1.0 + delta) / (1.0 - delta))


def nikolskii_constant(
    dictionary: Dictionary,
    K: int,
    r: float,
    resolution: int = _DEFAULT_RESOLUTION,
) -> ConstantEstimate:
    """C1 = sup over |A| ≤ K and x of Σ|x_i| / (|A|^r ‖Σ_A x_ig_i‖)."""
    _check_params(dictionary, K)
    p = dictionary.space.p
    subsets = sum(math.comb(dictionary.size, a) for a in range(1, K + 1))
    _guard(subsets, "nikolskii_constant subsets")
    best = 0.0
    points = 0
    for a in range(1, K + 1):
        grid = l1_sphere_grid(a, resolution)
        points += grid.shape[0]
        for A in combinations(range(dictionary.size), a):
            norms = np.atleast_1d(lp_norm(grid @ dictionary.elements[list(A)], p, axis=1))
            smallest = float(norms.min())
            if smallest == 0.0:
                best = math.inf
                break
            best = max(best, 1.0 / (a ** r * smallest))
    exact = K == 1
    return ConstantEstimate(
        value=best,
        exact=exact,
        kind="exact" if exact else "lower",
        certificate={"subsets": subsets, "grid_points": points, "resolution": resolution},
    )


def _distance_table(
    dictionary: Dictionary,
    K: int,
    depth: int,
    resolution: int,
    options: SolverOptions,
) -> Iterator[Tuple[int, np.ndarray, np.ndarray, float]]:
    """
    For every (A, Λ): (|A|, ‖f_A‖ on the grid, dist(f_A, span Λ) on the grid,
    exact U of the pair at p = 2 or NaN).
    """
    space = dictionary.space
    p = space.p
    elements = dictionary.elements
    grids = {a: l1_sphere_grid(a, resolution) for a in range(1, K + 1)}
    for A, L in _pairs(dictionary.size, K, depth):
        a = len(A)
        y = grids[a] @ elements[list(A)]
        norms = np.atleast_1d(lp_norm(y, p, axis=1))
        if not L:
            yield a, norms, norms, 1.0 if space.is_hilbert else math.nan
            continue
        basis = elements[list(L)].T
        if space.is_hilbert:
            ql = householder_qr(basis).q
            qa = householder_qr(elements[list(A)].T).q
            resid = y - (y @ ql) @ ql.T
            dists = np.linalg.norm(resid, axis=1)
            yield a, norms, dists, _principal_u(qa, ql)
        else:
            bases = np.broadcast_to(basis, (y.shape[0],) + basis.shape)
            _, dists, _, _ = project_batch(space, y, bases, options)
            yield a, norms, dists, math.nan


def _pair_estimates(
    dictionary: Dictionary,
    K: int,
    depth: int,
    r: float,
    resolution: int,
    options: SolverOptions,
) -> Tuple[float, float, Dict[str, float]]:
    _check_params(dictionary, K, depth)
    pairs = _pair_count(dictionary.size, K, depth)
    _guard(pairs, "subset pairs")
    grid_sizes = {a: l1_sphere_grid(a, resolution).shape[0] for a in range(1, K + 1)}
    if not dictionary.space.is_hilbert:
        projections = sum(
            math.comb(dictionary.size, a) * math.comb(dictionary.size - a, max(0, min(depth - a, dictionary.size - a)))
            * grid_sizes[a]
            for a in range(1, K + 1)
        )
        _guard(projections, "grid projections", _MAX_PROJECTIONS)

    u_best, v_best = 1.0, 0.0
    for a, norms, dists, u_exact in _distance_table(dictionary, K, depth, resolution, options):
        safe = np.where(dists > 0.0, dists, np.nan)
        with np.errstate(invalid="ignore", divide="ignore"):
            ratio_u = np.nanmax(norms / safe) if np.any(dists > 0.0) else math.inf
            ratio_v = np.nanmax(1.0 / (a ** r * safe)) if np.any(dists > 0.0) else math.inf
        if np.any(dists == 0.0):
            ratio_u = ratio_v = math.inf
        u_best = max(u_best, u_exact if not math.isnan(u_exact) else float(ratio_u))
        v_best = max(v_best, float(ratio_v))
    cert = {"pairs": pairs, "resolution": resolution, "grid_points": sum(grid_sizes.values())}
    return u_best, v_best, cert


def unconditionality_constant(
    dictionary: Dictionary,
    K: int,
    depth: int,
    resolution: int = _DEFAULT_RESOLUTION,
    options: SolverOptions = SolverOptions(),
) -> ConstantEstimate:
    """Smallest U with ‖f_A − Σ_Λ c_ig_i‖ ≥ U^{-1}‖f_A‖ over |A| ≤ K, |A| + |Λ| ≤ depth."""
    u, _, cert = _pair_estimates(dictionary, K, depth, 1.0, resolution, options)
    exact = dictionary.space.is_hilbert or K == 1
    return ConstantEstimate(u, exact, "exact" if exact else "lower", cert)


def l1_incoherence_constant(
    dictionary: Dictionary,
    K: int,
    depth: int,
    r: float,
    resolution: int = _DEFAULT_RESOLUTION,
    options: SolverOptions = SolverOptions(),
) -> ConstantEstimate:
    """Smallest V with Σ_A|x_i| ≤ V|A|^r‖f_A − Σ_Λ c_ig_i‖."""
    _, v, cert = _pair_estimates(dictionary, K, depth, r, resolution, options)
    exact = K == 1
    return ConstantEstimate(v, exact, "exact" if exact else "lower", cert)


def structural_constants(
    dictionary: Dictionary,
    K: int,
    depth: int,
    r: float,
    resolution: int = _DEFAULT_RESOLUTION,
    options: SolverOptions = SolverOptions(),
) -> StructuralConstants:
    """Coherence, RIP δ (p = 2), U, C1 and V for one parameter set."""
    u, v, cert = _pair_estimates(dictionary, K, depth, r, resolution, options)
    exact_u = dictionary.space.is_hilbert or K == 1
    c1 = nikolskii_constant(dictionary, K, r, resolution)
    rip = None
    if dictionary.space.is_hilbert and depth <= dictionary.size:
        rip = rip_delta(dictionary, depth)
    logger.info(
        "constants for %s (K=%d, D=%d, r=%g): M=%.4g U=%.4g C1=%.4g V=%.4g",
        dictionary.label or "dictionary", K, depth, r, coherence(dictionary), u, c1.value, v,
    )
    return StructuralConstants(
        coherence=coherence(dictionary),
        rip_delta=rip,
        U=ConstantEstimate(u, exact_u, "exact" if exact_u else "lower", cert),
        C1=c1,
        V=ConstantEstimate(v, K == 1, "exact" if K == 1 else "lower", cert),
        K=K,
        D_depth=depth,
        r=r,
    )
