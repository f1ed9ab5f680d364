"""
Finite dictionaries of unit-norm elements.

A :class:`Dictionary` stores its elements as the rows of an (N, n) array.
Selection always happens over the symmetrized dictionary D^± = {±g}: a
selection is an (index, sign) pair and ``sign * elements[index]`` is the
chosen element.  When a routine needs D^± as an ordered list it uses the
interleaved order +g_0, −g_0, +g_1, −g_1, … so "lowest index" is well defined.

Generators
----------
  make_canonical     — e_1 … e_n
  make_random_unit   — i.i.d. Gaussian rows normalized in ℓ_p (seeded)
  make_trig_grid     — 1, cos kx, sin kx sampled on a uniform grid
  make_haar_grid     — Haar system on 2^levels grid points
  make_coherent      — random dictionary rescaled towards a common direction
                       to hit a target coherence (recovery experiments)
"""

from __future__ import annotations

import hashlib
import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional, Tuple, Union

import numpy as np

from greedy.errors import DimensionMismatchError, ZeroFunctionalError
from greedy.space import (
    DualFunctional,
    SpaceLp,
    lp_norm,
    norming_functionals,
)

logger = logging.getLogger(__name__)

Seed = Union[int, np.random.Generator, None]

_NORM_LOW  = 1.0 - 1e-9
_NORM_HIGH = 1.0 + 1e-12

TIE_LOWEST     = "lowest-index"
TIE_EXACT_MAX  = "exact-max"
TIE_RANDOMIZED = "randomized"
_TIE_RULES = (TIE_LOWEST, TIE_EXACT_MAX, TIE_RANDOMIZED)


def as_rng(seed: Seed) -> np.random.Generator:
    """Seeded generator; an existing Generator is passed through untouched."""
    return np.random.default_rng(seed)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class Dictionary:
    space:    SpaceLp
    elements: np.ndarray        # (N, n), row = element
    label:    str = ""

    def __post_init__(self) -> None:
        rows = np.array(self.elements, dtype=float, copy=True)
        if rows.ndim != 2 or rows.shape[0] < 1:
            raise ValueError("a dictionary needs at least one element")
        if rows.shape[1] != self.space.dim:
            raise DimensionMismatchError(
                f"elements have length {rows.shape[1]}, space has dim {self.space.dim}"
            )
        norms = lp_norm(rows, self.space.p, axis=1)
        bad = np.flatnonzero((norms < _NORM_LOW) | (norms > _NORM_HIGH))
        if bad.size:
            raise ValueError(
                f"element {int(bad[0])} has norm {float(norms[bad[0]]):.12g}; "
                "dictionary elements must have norm in [1 - 1e-9, 1]"
            )
        rows.setflags(write=False)
        object.__setattr__(self, "elements", rows)

    def __len__(self) -> int:
        return self.elements.shape[0]

    @property
    def size(self) -> int:
        return self.elements.shape[0]

    def signed(self, index: int, sign: int) -> np.ndarray:
        return sign * self.elements[index]

    @cached_property
    def dual_elements(self) -> np.ndarray:
        """Row i holds the norming functional F_{g_i}."""
        return norming_functionals(self.space, self.elements)

    @cached_property
    def signed_elements(self) -> np.ndarray:
        """D^± in interleaved order, shape (2N, n)."""
        out = np.empty((2 * self.size, self.space.dim))
        out[0::2] = self.elements
        out[1::2] = -self.elements
        return out

    @cached_property
    def fingerprint(self) -> str:
        """SHA-256 over shape, p and the little-endian float64 bytes."""
        h = hashlib.sha256()
        h.update(f"GREEDYDICT v1 n={self.space.dim} p={self.space.p!r} N={self.size}".encode())
        h.update(np.ascontiguousarray(self.elements, dtype="<f8").tobytes())
        return h.hexdigest()

    def combine(self, coefficients: np.ndarray) -> np.ndarray:
        """Σ a_i g_i for a coefficient vector of length N."""
        return np.asarray(coefficients, dtype=float) @ self.elements

    def __repr__(self) -> str:
        return f"Dictionary({self.label or 'unnamed'!r}, N={self.size}, space={self.space})"


def signed_position(j: int) -> Tuple[int, int]:
    """Map a position in the interleaved D^± order to (index, sign)."""
    return j // 2, (1 if j % 2 == 0 else -1)


@dataclass(frozen=True)
class Selection:
    index: int
    sign:  int
    value: float        # F(sign * g_index) ≥ 0


@dataclass(frozen=True)
class DNorm:
    value: float
    index: int
    sign:  int


@dataclass
class SparseRepresentation:
    """f = Σ coefficient · sign · g_index, coefficients ≥ 0."""
    terms: List[Tuple[int, int, float]] = field(default_factory=list)
    residual_target: Optional[np.ndarray] = None

    @property
    def l1_mass(self) -> float:
        return float(sum(c for _, _, c in self.terms))

    @property
    def in_A1(self) -> bool:
        return self.l1_mass <= 1.0 + 1e-12

    @property
    def support(self) -> List[int]:
        return sorted(i for i, _, _ in self.terms)

    def to_element(self, dictionary: Dictionary) -> np.ndarray:
        out = np.zeros(dictionary.space.dim)
        for index, sign, coef in self.terms:
            out += coef * sign * dictionary.elements[index]
        return out

    def coefficient_vector(self, size: int) -> np.ndarray:
        a = np.zeros(size)
        for index, sign, coef in self.terms:
            a[index] += sign * coef
        return a


# ---------------------------------------------------------------------------
# Generators
# ---------------------------------------------------------------------------

def _normalize_rows(space: SpaceLp, rows: np.ndarray) -> np.ndarray:
    norms = lp_norm(rows, space.p, axis=1)
    out = rows / np.atleast_1d(norms)[:, None]
    # a second pass pulls rounding back under 1 + 1e-12
    again = np.atleast_1d(lp_norm(out, space.p, axis=1))
    return out / np.maximum(again, 1.0)[:, None]


def make_canonical(space: SpaceLp) -> Dictionary:
    return Dictionary(space, np.eye(space.dim), label="canonical")


def make_random_unit(space: SpaceLp, count: int, seed: Seed = None) -> Dictionary:
    if count < 1:
        raise ValueError("count must be ≥ 1")
    rng = as_rng(seed)
    rows = rng.standard_normal((count, space.dim))
    while True:
        zero = lp_norm(rows, space.p, axis=1) == 0.0
        if not np.any(zero):
            break
        rows[zero] = rng.standard_normal((int(zero.sum()), space.dim))
    return Dictionary(space, _normalize_rows(space, rows), label=f"random-{count}")


def make_trig_grid(space: SpaceLp, frequencies: int) -> Dictionary:
    """
    Real trigonometric system {1, cos kx, sin kx : 1 ≤ k ≤ K} on n uniform points.

    Samples are weighted by the counting measure n^{-1/p} and normalized, which
    makes the elements unit vectors of ℓ_p^n.  Orthogonality at p = 2 needs
    K < n/2.
    """
    n = space.dim
    if frequencies < 0 or 2 * frequencies + 1 > n or 2 * frequencies >= n:
        raise ValueError(
            f"trig grid needs 2K + 1 ≤ n and K < n/2; got K={frequencies}, n={n}"
        )
    x = 2.0 * np.pi * np.arange(n) / n
    rows = [np.ones(n)]
    for k in range(1, frequencies + 1):
        rows.append(np.cos(k * x))
        rows.append(np.sin(k * x))
    weighted = np.array(rows) * n ** (-1.0 / space.p)
    return Dictionary(space, _normalize_rows(space, weighted), label=f"trig-{frequencies}")


def make_haar_grid(space: SpaceLp, levels: int) -> Dictionary:
    """Haar system (constant + 2^levels − 1 wavelets) on n = 2^levels points."""
    n = space.dim
    if levels < 0 or 2 ** levels != n:
        raise ValueError(f"haar grid needs n = 2^levels; got n={n}, levels={levels}")
    rows = [np.ones(n)]
    for j in range(levels):
        width = n // 2 ** j
        half = width // 2
        for k in range(2 ** j):
            h = np.zeros(n)
            h[k * width:k * width + half] = 1.0
            h[k * width + half:(k + 1) * width] = -1.0
            rows.append(h)
    return Dictionary(space, _normalize_rows(space, np.array(rows)), label=f"haar-{levels}")


def make_coherent(
    space: SpaceLp,
    count: int,
    mix: float,
    seed: Seed = None,
) -> Dictionary:
    """
    Random dictionary pulled towards a shared random direction.

    ``mix`` ∈ [0, 1) blends every Gaussian row with a common unit vector;
    larger values raise the coherence.  The realized coherence is measured,
    not promised.
    """
    if not (0.0 <= mix < 1.0):
        raise ValueError("mix must lie in [0, 1)")
    rng = as_rng(seed)
    common = rng.standard_normal(space.dim)
    common /= np.linalg.norm(common)
    rows = rng.standard_normal((count, space.dim))
    rows /= np.linalg.norm(rows, axis=1, keepdims=True)
    rows = (1.0 - mix) * rows + mix * common
    return Dictionary(space, _normalize_rows(space, rows), label=f"coherent-{count}-{mix:g}")


# ---------------------------------------------------------------------------
# Norms and selection
# ---------------------------------------------------------------------------

def _coords(functional: Union[DualFunctional, np.ndarray]) -> np.ndarray:
    if isinstance(functional, DualFunctional):
        return functional.coords
    return np.asarray(functional, dtype=float)


def evaluate(functional: Union[DualFunctional, np.ndarray], dictionary: Dictionary) -> np.ndarray:
    """F(g_i) for every element."""
    coords = _coords(functional)
    if coords.shape != (dictionary.space.dim,):
        raise DimensionMismatchError(
            f"functional has shape {coords.shape}, space has dim {dictionary.space.dim}"
        )
    return dictionary.elements @ coords


def d_norm(functional: Union[DualFunctional, np.ndarray], dictionary: Dictionary) -> DNorm:
    """‖F‖_D = max_i |F(g_i)| with the lowest achieving index and the sign making F(σg) ≥ 0."""
    values = evaluate(functional, dictionary)
    idx = int(np.argmax(np.abs(values)))
    val = float(values[idx])
    return DNorm(value=abs(val), index=idx, sign=1 if val >= 0.0 else -1)


def select_weak(
    functional: Union[DualFunctional, np.ndarray],
    dictionary: Dictionary,
    t: float,
    tie_rule: str = TIE_LOWEST,
    rng: Optional[np.random.Generator] = None,
) -> Selection:
    """
    Weak dual greedy selection |F(g)| ≥ t‖F‖_D.

    ``lowest-index`` returns the first admissible element, ``exact-max`` the
    argmax, ``randomized`` a uniformly drawn admissible element.

    Raises
    ------
    ZeroFunctionalError
        If ‖F‖_D = 0.
    """
    return select_from_values(evaluate(functional, dictionary), t, tie_rule, rng)


def select_from_values(
    values: np.ndarray,
    t: float,
    tie_rule: str = TIE_LOWEST,
    rng: Optional[np.random.Generator] = None,
) -> Selection:
    """Weak selection over precomputed values v_i; the sign makes σv_i ≥ 0."""
    if not (0.0 < t <= 1.0):
        raise ValueError(f"weakness t must lie in (0, 1], got {t}")
    if tie_rule not in _TIE_RULES:
        raise ValueError(f"unknown tie rule {tie_rule!r}")
    values = np.asarray(values, dtype=float)
    mags = np.abs(values)
    top = float(mags.max())
    if top == 0.0:
        raise ZeroFunctionalError("functional vanishes on the dictionary")

    if tie_rule == TIE_EXACT_MAX or t == 1.0:
        idx = int(np.argmax(mags))
    else:
        admissible = np.flatnonzero(mags >= t * top)
        if tie_rule == TIE_RANDOMIZED:
            if rng is None:
                raise ValueError("randomized realization needs a generator")
            idx = int(rng.choice(admissible))
        else:
            idx = int(admissible[0])
    val = float(values[idx])
    return Selection(index=idx, sign=1 if val >= 0.0 else -1, value=abs(val))


def coherence(dictionary: Dictionary) -> float:
    """M(D) = max_{i≠j} |F_{g_i}(g_j)|; 0 for a single element."""
    if dictionary.size < 2:
        return 0.0
    cross = np.abs(dictionary.dual_elements @ dictionary.elements.T)
    np.fill_diagonal(cross, 0.0)
    return float(cross.max())


def d_seminorm(dictionary: Dictionary, x: np.ndarray) -> float:
    """‖x‖_D = max_i |F_{g_i}(x)|, the seminorm built from the elements' functionals."""
    return float(np.max(np.abs(dictionary.dual_elements @ np.asarray(x, dtype=float))))


# ---------------------------------------------------------------------------
# A_1(D) sampling and the sup identities
# ---------------------------------------------------------------------------

def sample_A1(
    dictionary: Dictionary,
    sparsity: int,
    seed: Seed = None,
) -> tuple[np.ndarray, SparseRepresentation]:
    """
    Random element of A_1(D) with *sparsity* terms and coefficients summing to 1.

    Coefficients are normalized exponentials (uniform on the simplex).
    """
    if sparsity < 1 or sparsity > dictionary.size:
        raise ValueError(f"sparsity must lie in [1, {dictionary.size}], got {sparsity}")
    rng = as_rng(seed)
    indices = np.sort(rng.choice(dictionary.size, size=sparsity, replace=False))
    signs = rng.choice(np.array([-1, 1]), size=sparsity)
    weights = rng.exponential(size=sparsity)
    coefs = weights / weights.sum()
    coefs[-1] = max(0.0, 1.0 - float(coefs[:-1].sum()))
    rep = SparseRepresentation(
        terms=[(int(i), int(s), float(c)) for i, s, c in zip(indices, signs, coefs)]
    )
    f = rep.to_element(dictionary)
    rep.residual_target = f
    return f, rep


def sample_sparse(
    dictionary: Dictionary,
    sparsity: int,
    seed: Seed = None,
) -> tuple[np.ndarray, SparseRepresentation]:
    """S-sparse signal with coefficient magnitudes in [1, 2] (recovery experiments)."""
    if sparsity < 1 or sparsity > dictionary.size:
        raise ValueError(f"sparsity must lie in [1, {dictionary.size}], got {sparsity}")
    rng = as_rng(seed)
    indices = np.sort(rng.choice(dictionary.size, size=sparsity, replace=False))
    signs = rng.choice(np.array([-1, 1]), size=sparsity)
    mags = rng.uniform(1.0, 2.0, size=sparsity)
    rep = SparseRepresentation(
        terms=[(int(i), int(s), float(c)) for i, s, c in zip(indices, signs, mags)]
    )
    f = rep.to_element(dictionary)
    rep.residual_target = f
    return f, rep


def check_sup_over_A1(
    functional: Union[DualFunctional, np.ndarray],
    dictionary: Dictionary,
    samples: int = 200,
    seed: Seed = None,
    positive_hull: bool = False,
) -> tuple[float, float]:
    """
    Compare sup_{f ∈ A_1(D)} |F(f)| over random samples with ‖F‖_D.

    With ``positive_hull`` the samples come from conv(D) and the comparison
    is against sup_g F(g) (no absolute value).

    Returns
    -------
    (largest sampled value, dictionary supremum)
    """
    rng = as_rng(seed)
    values = evaluate(functional, dictionary)
    best = -np.inf
    for _ in range(samples):
        k = int(rng.integers(1, dictionary.size + 1))
        idx = rng.choice(dictionary.size, size=k, replace=False)
        w = rng.exponential(size=k)
        w /= w.sum()
        if positive_hull:
            best = max(best, float(w @ values[idx]))
        else:
            signs = rng.choice(np.array([-1.0, 1.0]), size=k)
            best = max(best, abs(float((w * signs) @ values[idx])))
    sup = float(values.max()) if positive_hull else float(np.abs(values).max())
    return best, sup


def check_ll2(
    functional: Union[DualFunctional, np.ndarray],
    dictionary: Dictionary,
    samples: int = 200,
    seed: Seed = None,
) -> tuple[float, float]:
    """sup over sampled A_1(D) of |F(f)| against ‖F‖_D."""
    return check_sup_over_A1(functional, dictionary, samples=samples, seed=seed)


def check_ll3(
    functional: Union[DualFunctional, np.ndarray],
    dictionary: Dictionary,
    samples: int = 200,
    seed: Seed = None,
) -> tuple[float, float]:
    """sup over sampled conv(D) of F(f) against sup_g F(g)."""
    return check_sup_over_A1(
        functional, dictionary, samples=samples, seed=seed, positive_hull=True,
    )
