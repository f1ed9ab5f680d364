"""
Finite-dimensional ℓ_p geometry.

The ambient Banach space is real ℓ_p^n with 1 < p < ∞.  Elements are plain
``numpy`` vectors; this module supplies the norm, the norming (peak)
functional, and the power-type bound ρ(u) ≤ γu^q on the modulus of
smoothness that every rate statement is written in terms of:

    p ≥ 2 :  q = 2,  γ = (p − 1)/2
    p ≤ 2 :  q = p,  γ = 1/p

All types are immutable and the functions are pure.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from greedy.errors import DimensionMismatchError, ZeroVectorError

logger = logging.getLogger(__name__)

Element = np.ndarray
ArrayLike = Union[np.ndarray, list, tuple]

_XI_CAP = 2.0


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpaceLp:
    """Real ℓ_p^n."""
    dim: int
    p:   float

    def __post_init__(self) -> None:
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        if not (1.0 < float(self.p) < math.inf):
            raise ValueError(f"p must satisfy 1 < p < inf, got {self.p!r}")

    @property
    def dual_exponent(self) -> float:
        """p' = p/(p − 1)."""
        return self.p / (self.p - 1.0)

    @property
    def is_hilbert(self) -> bool:
        return self.p == 2.0

    def element(self, x: ArrayLike) -> Element:
        """Return *x* as a float vector, checking its length."""
        arr = np.asarray(x, dtype=float)
        if arr.ndim != 1 or arr.shape[0] != self.dim:
            raise DimensionMismatchError(
                f"expected a vector of length {self.dim}, got shape {arr.shape}"
            )
        return arr

    def __str__(self) -> str:
        return f"l_{self.p:g}^{self.dim}"


@dataclass(frozen=True)
class SmoothnessParams:
    """Power-type bound ρ(u) ≤ γu^q with q ∈ (1, 2]."""
    gamma: float
    q:     float

    @property
    def conjugate(self) -> float:
        """q' = q/(q − 1), the exponent that appears in every rate bound."""
        return self.q / (self.q - 1.0)

    def rho(self, u: float | np.ndarray) -> float | np.ndarray:
        return self.gamma * np.abs(u) ** self.q


@dataclass(frozen=True, eq=False)
class DualFunctional:
    """A functional on ℓ_p^n, stored by its coordinates; evaluation is a dot product."""
    coords: np.ndarray

    def __call__(self, x: ArrayLike) -> float | np.ndarray:
        # A 2-D argument is read as a stack of row vectors.
        return np.asarray(x, dtype=float) @ self.coords

    def dual_norm(self, space: SpaceLp) -> float:
        return lp_norm(self.coords, space.dual_exponent)


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def lp_norm(x: np.ndarray, p: float, axis: int = -1) -> float | np.ndarray:
    """(Σ|x_i|^p)^{1/p}, computed on the max-scaled vector to avoid under/overflow."""
    a = np.abs(np.asarray(x, dtype=float))
    scale = np.max(a, axis=axis, keepdims=True)
    safe = np.where(scale > 0.0, scale, 1.0)
    total = np.sum((a / safe) ** p, axis=axis) ** (1.0 / p)
    out = np.squeeze(scale, axis=axis) * total
    return float(out) if np.ndim(out) == 0 else out


def norm(space: SpaceLp, x: ArrayLike) -> float:
    """‖x‖_p in *space*."""
    return lp_norm(space.element(x), space.p)


def norming_functional(space: SpaceLp, f: ArrayLike) -> DualFunctional:
    """
    The unique F with ‖F‖_{p'} = 1 and F(f) = ‖f‖_p.

    F_i = sign(f_i)(|f_i|/‖f‖)^{p−1}

    Raises
    ------
    ZeroVectorError
        If *f* is the zero vector.
    """
    x = space.element(f)
    nrm = lp_norm(x, space.p)
    if nrm == 0.0:
        raise ZeroVectorError("the zero vector has no norming functional")
    return DualFunctional(np.sign(x) * (np.abs(x) / nrm) ** (space.p - 1.0))


def norming_functionals(space: SpaceLp, rows: np.ndarray) -> np.ndarray:
    """Row-wise norming functionals of a stack of non-zero vectors, shape (N, n)."""
    rows = np.asarray(rows, dtype=float)
    norms = lp_norm(rows, space.p, axis=1)
    norms = np.atleast_1d(norms)
    if np.any(norms == 0.0):
        raise ZeroVectorError("the zero vector has no norming functional")
    return np.sign(rows) * (np.abs(rows) / norms[:, None]) ** (space.p - 1.0)


def smoothness_params(space: SpaceLp) -> SmoothnessParams:
    p = space.p
    if p >= 2.0:
        return SmoothnessParams(gamma=(p - 1.0) / 2.0, q=2.0)
    return SmoothnessParams(gamma=1.0 / p, q=p)


def xi_solve(params: SmoothnessParams, t: float, theta: float) -> float:
    """
    Solution ξ of γu^q = θtu, clamped to (0, 2].

    The clamp keeps the contract total when a small γ would push the root
    past 2.
    """
    if not (0.0 < t <= 1.0):
        raise ValueError(f"t must lie in (0, 1], got {t}")
    if not (0.0 < theta <= 0.5):
        raise ValueError(f"theta must lie in (0, 1/2], got {theta}")
    root = (theta * t / params.gamma) ** (1.0 / (params.q - 1.0))
    return min(_XI_CAP, root)


def smoothness_inequality_check(
    space: SpaceLp,
    x: ArrayLike,
    y: ArrayLike,
    u: float,
) -> tuple[float, float]:
    """
    Both sides of the smoothness sandwich

        0 ≤ ‖x + uy‖ − ‖x‖ − uF_x(y) ≤ 2‖x‖ γ(|u|‖y‖/‖x‖)^q.

    Returns
    -------
    (lhs, rhs)
    """
    xv = space.element(x)
    yv = space.element(y)
    nx = lp_norm(xv, space.p)
    if nx == 0.0:
        raise ZeroVectorError("x must be non-zero")
    fx = norming_functional(space, xv)
    lhs = lp_norm(xv + u * yv, space.p) - nx - u * float(fx(yv))
    params = smoothness_params(space)
    rhs = 2.0 * nx * float(params.rho(abs(u) * lp_norm(yv, space.p) / nx))
    return lhs, rhs
