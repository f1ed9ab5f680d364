"""
Rank-one greedy approximation of matrices in the Frobenius norm.

A matrix f(x, y) on an n₁ × n₂ grid is approximated by sums of products
c·u(x)v(y) with unit u and v.  Each greedy step takes the dominant singular
triple of the current residual, so after m steps the residual norm equals
the singular-value tail (Σ_{j>m} s_j²)^{1/2}.
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from greedy.dictionary import Seed, as_rng
from greedy.errors import DimensionMismatchError
from greedy.linalg import jacobi_svd
from greedy.trace import IterationRecord, StopReason, Trace

logger = logging.getLogger(__name__)

_POWER_TOL       = 1e-12
_POWER_MAX_ITER  = 5000
_SQUARINGS       = 60
_RESTARTS        = 5
_ZERO_TOL        = 1e-14


@dataclass(frozen=True, eq=False)
class MatrixSignal:
    entries: np.ndarray
    label:   str = ""

    def __post_init__(self) -> None:
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or 0 in a.shape:
            raise DimensionMismatchError(f"matrix signal must be a non-empty 2-D array, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError("matrix signal has non-finite entries")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.entries.shape

    @property
    def frobenius(self) -> float:
        return float(np.linalg.norm(self.entries))

    @property
    def fingerprint(self) -> str:
        h = hashlib.sha256(f"GREEDYMAT {self.shape[0]} {self.shape[1]}".encode())
        h.update(self.entries.astype("<f8").tobytes())
        return h.hexdigest()


@dataclass
class RankOneTerm:
    u: np.ndarray
    v: np.ndarray
    c: float

    def outer(self) -> np.ndarray:
        return self.c * np.outer(self.u, self.v)

    def aligned_with(self, other: "RankOneTerm") -> "RankOneTerm":
        """Copy with factor signs flipped to match *other*."""
        sign = 1.0 if float(self.u @ other.u) >= 0.0 else -1.0
        return RankOneTerm(sign * self.u, sign * self.v, self.c)


@dataclass
class BilinearResult:
    terms: List[RankOneTerm] = field(default_factory=list)
    trace: Optional[Trace] = None
    residual: Optional[np.ndarray] = None


def _as_matrix(matrix) -> np.ndarray:
    if isinstance(matrix, MatrixSignal):
        return np.array(matrix.entries)
    return np.array(MatrixSignal(matrix).entries)


def _leading_start(gram: np.ndarray) -> np.ndarray:
    col = int(np.argmax(np.linalg.norm(gram, axis=0)))
    v = gram[:, col].copy()
    return v / np.linalg.norm(v)


def _power(gram: np.ndarray, v: np.ndarray) -> Tuple[np.ndarray, float, bool]:
    lam = float(v @ gram @ v)
    for _ in range(_POWER_MAX_ITER):
        w = gram @ v
        nw = float(np.linalg.norm(w))
        if nw == 0.0:
            return v, 0.0, False
        v = w / nw
        new = float(v @ gram @ v)
        if abs(new - lam) <= _POWER_TOL * max(new, _ZERO_TOL):
            return v, new, True
        lam = new
    return v, lam, False


def _squared_start(gram: np.ndarray) -> np.ndarray:
    """Leading column of a high power of *gram*, by repeated normalized squaring."""
    g = gram / np.linalg.norm(gram)
    for _ in range(_SQUARINGS):
        g2 = g @ g
        n2 = float(np.linalg.norm(g2))
        if n2 == 0.0:
            break
        g = g2 / n2
    return _leading_start(g)


def dominant_triple(residual: np.ndarray, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, float]:
    """(u, v, s) with s the largest singular value of *residual*."""
    gram = residual.T @ residual
    v, lam, ok = _power(gram, _leading_start(gram))
    if not ok:
        logger.debug("power iteration stagnated; squaring the Gram matrix")
        v, lam, ok = _power(gram, _squared_start(gram))
    restarts = 0
    while not ok and restarts < _RESTARTS:
        restarts += 1
        start = rng.standard_normal(gram.shape[0])
        v, lam, ok = _power(gram, start / np.linalg.norm(start))
    if not ok:
        logger.warning("dominant singular triple not converged to %.0e", _POWER_TOL)
    w = residual @ v
    s = float(np.linalg.norm(w))
    u = w / s if s > 0.0 else np.zeros(residual.shape[0])
    return u, v, s


def pga_rank_one(matrix, m: int, seed: Seed = 0) -> BilinearResult:
    """
    m greedy rank-one steps on *matrix*.

    A zero residual ends the run early; later steps would only append zero
    terms, so the trace stops with ``zero_residual`` instead.
    """
    if m < 1:
        raise ValueError("m must be ≥ 1")
    a = _as_matrix(matrix)
    rng = as_rng(seed)
    total = float(np.linalg.norm(a))
    trace = Trace(algorithm="PGA_BILINEAR", metadata={"shape": list(a.shape), "m_max": m})
    trace.records.append(IterationRecord(m=0, residual_norm=total))
    residual = a.copy()
    terms: List[RankOneTerm] = []
    trace.stop_reason = StopReason.M_MAX

    for k in range(1, m + 1):
        if float(np.linalg.norm(residual)) <= _ZERO_TOL * max(total, 1.0):
            trace.stop_reason = StopReason.ZERO_RESIDUAL
            break
        u, v, c = dominant_triple(residual, rng)
        term = RankOneTerm(u=u, v=v, c=c)
        residual = residual - term.outer()
        terms.append(term)
        norm = float(np.linalg.norm(residual))
        trace.records.append(IterationRecord(m=k, residual_norm=norm, c=c))
        logger.debug("rank-one step %d: c=%.10g residual=%.10g", k, c, norm)

    trace.residual = residual
    trace.log()
    return BilinearResult(terms=terms, trace=trace, residual=residual)


def schmidt_expansion(matrix) -> List[RankOneTerm]:
    """Full SVD as rank-one terms with s₁ ≥ s₂ ≥ … > 0."""
    a = _as_matrix(matrix)
    u, s, vt = jacobi_svd(a)
    return [RankOneTerm(u=u[:, j].copy(), v=vt[j].copy(), c=float(s[j])) for j in range(len(s)) if s[j] > 0.0]


def reconstruct(terms: List[RankOneTerm], shape: Tuple[int, int]) -> np.ndarray:
    out = np.zeros(shape)
    for term in terms:
        out += term.outer()
    return out
