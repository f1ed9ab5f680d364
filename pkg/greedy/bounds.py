"""
Closed-form rate bounds evaluated along a trace.

Each bound is a function of the iteration number m ≥ 1 and a
:class:`BoundContext` (smoothness parameters, weakness schedule, the scale
A with f/A ∈ A_1(D), noise level ε, ...).  A bound is either

  explicit     — the constant is known; exceeding it is a hard failure
  existential  — only the shape is known ("there exists C"); it is checked
                 with the stable-fitted-constant protocol in ``oracle``
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np

from greedy.schedules import Schedule, weakness as constant_weakness
from greedy.space import SmoothnessParams

logger = logging.getLogger(__name__)

EXPLICIT    = "explicit"
EXISTENTIAL = "existential"


@dataclass(frozen=True)
class BoundContext:
    params:      SmoothnessParams
    weakness:    Schedule = field(default_factory=constant_weakness)
    scale:       float = 1.0           # A with f/A ∈ A_1(D)
    epsilon:     float = 0.0           # ‖f − f^ε‖
    b:           float = 0.5           # DGA(τ, b, μ) / MDGA
    s:           Optional[float] = None    # exponent of the coefficient schedule k^{-s}
    initial_norm: float = 1.0

    def weakness_sums(self, m_max: int) -> Tuple[np.ndarray, np.ndarray]:
        """(t_m, 1 + Σ_{k≤m} t_k^{q'}) for m = 1 … m_max."""
        t = self.weakness.take(m_max)
        return t, 1.0 + np.cumsum(t ** self.params.conjugate)


BoundFn = Callable[[np.ndarray, BoundContext], np.ndarray]


@dataclass(frozen=True)
class BoundSpec:
    id:          str
    kind:        str
    description: str
    fn:          BoundFn
    algorithms:  Tuple[str, ...] = ()

    def evaluate(self, m_max: int, ctx: BoundContext) -> np.ndarray:
        """Bound values for m = 1 … m_max."""
        m = np.arange(1, m_max + 1, dtype=float)
        return np.asarray(self.fn(m, ctx), dtype=float)

    def to_dict(self) -> dict:
        return {
            "id":          self.id,
            "kind":        self.kind,
            "description": self.description,
            "algorithms":  list(self.algorithms),
        }


# ---------------------------------------------------------------------------
# Constants
# ---------------------------------------------------------------------------

def wbga_constant(params: SmoothnessParams) -> float:
    """C(q, γ) = 4(2γ)^{1/q}."""
    return 4.0 * (2.0 * params.gamma) ** (1.0 / params.q)


def approximate_constant(params: SmoothnessParams) -> float:
    """C(q, γ) = 4q(2γ)^q(2/(q − 1))^{1/q'} of the approximate-class bound."""
    q = params.q
    return 4.0 * q * (2.0 * params.gamma) ** q * (2.0 / (q - 1.0)) ** (1.0 / params.conjugate)


def exponential_phase_constant(params: SmoothnessParams, t: float, V: float) -> float:
    """c₁ = t^{q'}/(2(16γ)^{1/(q−1)}V^{q'}) of the exponential decay phase."""
    q_conj = params.conjugate
    return t ** q_conj / (2.0 * (16.0 * params.gamma) ** (1.0 / (params.q - 1.0)) * V ** q_conj)


def lebesgue_iterations(params: SmoothnessParams, U: float, K: int, r: float, C: float = 1.0) -> int:
    """S = ⌈C·U^{q'}·ln(U + 1)·K^{rq'}⌉."""
    q_conj = params.conjugate
    return int(math.ceil(C * U ** q_conj * math.log(U + 1.0) * K ** (r * q_conj)))


def threshold_iterations(params: SmoothnessParams, delta: float) -> float:
    """δ^{-q'}·ln(1/δ), the shape of the stopping count of DGART and CGAT."""
    if not (0.0 < delta < 1.0):
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    return delta ** (-params.conjugate) * math.log(1.0 / delta)


def qoga_recovery_limit(M: float, t: float = 1.0) -> float:
    """Sparsity limit t/(1 + t)·(1 + 1/M) below which QOGA recovers exactly."""
    if M <= 0.0:
        return math.inf
    return t / (1.0 + t) * (1.0 + 1.0 / M)


# ---------------------------------------------------------------------------
# Bound functions
# ---------------------------------------------------------------------------

def _wbga(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    _, sums = ctx.weakness_sums(len(m))
    return ctx.scale * wbga_constant(ctx.params) * sums ** (-1.0 / ctx.params.conjugate)


def _approximate(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    _, sums = ctx.weakness_sums(len(m))
    return ctx.scale * approximate_constant(ctx.params) * sums ** (-1.0 / ctx.params.conjugate)


def _noisy(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    _, sums = ctx.weakness_sums(len(m))
    decay = wbga_constant(ctx.params) * (ctx.scale + ctx.epsilon) * sums ** (-1.0 / ctx.params.conjugate)
    return np.maximum(2.0 * ctx.epsilon, decay)


def _wga_hilbert(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    t = ctx.weakness.take(len(m))
    sums = 1.0 + np.cumsum(t ** 2)
    return ctx.scale * sums ** (-t / (2.0 * (2.0 + t)))


def _pga_sixth(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    return ctx.scale * m ** (-1.0 / 6.0)


def _pga_improved(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    return 4.0 * ctx.scale * m ** (-11.0 / 62.0)


def _dga_bmu(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    t, sums = ctx.weakness_sums(len(m))
    a = t * (1.0 - ctx.b)
    return ctx.scale * sums ** (-a / (ctx.params.conjugate * (1.0 + a)))


def _dga_coefficients(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    s = ctx.s if ctx.s is not None else (1.0 + 1.0 / ctx.params.q) / 2.0
    t = float(ctx.weakness.at(1))
    # any r strictly below t(1 − s)
    r = 0.9 * t * (1.0 - s)
    return m ** (-r)


def _gawr(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    return ctx.scale * m ** (-1.0 + 1.0 / ctx.params.q)


def _incremental(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    return ctx.params.gamma ** (1.0 / ctx.params.q) * m ** (-1.0 / ctx.params.conjugate)


def _power_weakness(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    _, sums = ctx.weakness_sums(len(m))
    return ctx.scale * sums ** (-1.0 / ctx.params.conjugate)


def _rrxga(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    return ctx.scale * (1.0 + m) ** (-1.0 / ctx.params.conjugate)


def _initial_norm(m: np.ndarray, ctx: BoundContext) -> np.ndarray:
    return np.full_like(m, ctx.initial_norm)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

BOUNDS: Dict[str, BoundSpec] = {
    spec.id: spec for spec in (
        BoundSpec("wbga", EXPLICIT,
                  "A·4(2γ)^{1/q}(1 + Σt_k^{q'})^{-1/q'}",
                  _wbga, ("WCGA", "WGAFR", "RWRGA")),
        BoundSpec("wbga_approximate", EXPLICIT,
                  "A·4q(2γ)^q(2/(q−1))^{1/q'}(1 + Σt_k^{q'})^{-1/q'}",
                  _approximate, ("AWCGA", "AWGAFR", "ARWRGA")),
        BoundSpec("wbga_noisy", EXPLICIT,
                  "max{2ε, 4(2γ)^{1/q}(A + ε)(1 + Σt_k^{q'})^{-1/q'}}",
                  _noisy, ("WCGA", "WGAFR", "RWRGA")),
        BoundSpec("wga_hilbert", EXPLICIT,
                  "A·(1 + Σt_k²)^{-t_m/(2(2 + t_m))}, p = 2, non-increasing τ",
                  _wga_hilbert, ("WGA", "PGA")),
        BoundSpec("pga_sixth", EXPLICIT,
                  "A·m^{-1/6}", _pga_sixth, ("PGA",)),
        BoundSpec("pga_improved", EXPLICIT,
                  "4A·m^{-11/62}", _pga_improved, ("PGA",)),
        BoundSpec("initial_norm", EXPLICIT,
                  "‖f_0‖", _initial_norm, ()),
        BoundSpec("dga_bmu", EXISTENTIAL,
                  "C·(1 + Σt_k^{q'})^{-t_m(1−b)/(q'(1 + t_m(1−b)))}",
                  _dga_bmu, ("DGA_BMU", "MDGA")),
        BoundSpec("dga_coefficients", EXISTENTIAL,
                  "C·m^{-r}, r = 0.9·t(1 − s)", _dga_coefficients, ("DGA_C", "XGA_C")),
        BoundSpec("gawr", EXISTENTIAL,
                  "C·m^{-1+1/q}", _gawr, ("GAWR",)),
        BoundSpec("incremental", EXISTENTIAL,
                  "C·γ^{1/q}m^{-1/q'}", _incremental, ("IA_EPS",)),
        BoundSpec("power_weakness", EXISTENTIAL,
                  "C·(1 + Σt_k^{q'})^{-1/q'}", _power_weakness, ("WRGA", "RWRGA", "WCGA", "WGAFR")),
        BoundSpec("rrxga", EXISTENTIAL,
                  "C·(1 + m)^{-1/q'}", _rrxga, ("RRXGA",)),
    )
}


def get_bound(bound_id: str) -> BoundSpec:
    try:
        return BOUNDS[bound_id]
    except KeyError:
        raise ValueError(f"unknown bound {bound_id!r}; known: {', '.join(sorted(BOUNDS))}") from None
