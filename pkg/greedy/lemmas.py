"""
Simulators for the numerical-sequence lemmas behind the rate theorems.

Each lemma is a recursive inequality a_m ≤ U(a_{m-1}, m) plus a conclusion
bound.  A simulation draws a sequence that satisfies the hypotheses:

  adversarial  takes the largest admissible value at every step
  randomized   draws a_m uniformly in [0, U(a_{m-1}, m)]

and reports the largest ratio a_m / bound(m) over the horizon.  All
replications of one spec advance together as a numpy vector.

Lemmas whose conclusion has an unspecified constant (LeL8, LeL10, LeL11)
are read through the envelope of the adversarial sequence: its constant
C = max a_m·m^{q−1} must stay stable over the second half of the horizon,
and randomized sequences must stay under C·m^{1−q}.  For those lemmas the
upper map is non-decreasing in a_{m-1} on the reachable range, so the
adversarial sequence dominates every admissible one.  LeL9 only asserts a
limit; its report records the first m with a_m below a threshold.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Tuple

import numpy as np
from scipy.special import zeta

from greedy.dictionary import Seed, as_rng
from greedy.errors import HypothesisViolationError

logger = logging.getLogger(__name__)

LEMMAS = ("LeL1", "HL1", "LeL2", "LeL3", "LeL4", "LeL5", "LeL6",
          "LeL8", "LeL9", "LeL10", "LeL11", "LeL12")

EXPLICIT    = "explicit"
EXISTENTIAL = "existential"
LIMIT       = "limit"

_RATIO_TOL     = 1e-9
_GROWTH_LIMIT  = 1.25
_TREND_FACTOR  = 2.0

_DEFAULTS: Dict[str, Dict[str, float]] = {
    "LeL1":  {"C1": 1.0, "C2": 1.0},
    "HL1":   {"C1": 1.0, "y": 1.0, "y_exponent": 0.5},
    "LeL2":  {"A": 1.0},
    "LeL3":  {"alpha": 0.25, "gamma": 0.5, "A": 2.0},
    "LeL4":  {"A": 1.0, "r": 0.5},
    "LeL5":  {"A": 1.0, "s": 2.0},
    "LeL6":  {"A": 1.0},
    "LeL8":  {"q": 2.0, "v": 1.0, "B": 1.0, "delta": 1e-8, "a0": 1.0},
    "LeL9":  {"v": 1.0, "B": 1.0, "s": 2.0, "delta_scale": 1.0, "delta_exponent": 2.0,
              "a0": 1.0, "threshold": 1e-3},
    "LeL10": {"q": 2.0, "v": 1.0, "B": 1.0, "c": 1.0, "a0": 1.0},
    "LeL11": {"q": 2.0, "w": 0.25, "c": 0.1, "a0": 1.0},
    "LeL12": {"alpha": 0.5, "beta": 1.0, "A": 1.0, "a0": 0.5},
}

# φ families for LeL5 / LeL6: (φ, φ^{-1}, φ'(0+))
_PHI: Dict[str, Tuple[Callable, Callable, Callable]] = {
    "power": (
        lambda x, s: x ** s,
        lambda y, s: y ** (1.0 / s),
        lambda s: 1.0 if s == 1.0 else 0.0,
    ),
    "exp": (
        lambda x, s: np.expm1(x) / math.expm1(1.0),
        lambda y, s: np.log1p(y * math.expm1(1.0)),
        lambda s: 1.0 / math.expm1(1.0),
    ),
    "mixed": (
        lambda x, s: (x + x * x) / 2.0,
        lambda y, s: (np.sqrt(1.0 + 8.0 * y) - 1.0) / 2.0,
        lambda s: 0.5,
    ),
}


@dataclass(frozen=True)
class RecursionSpec:
    lemma:   str
    params:  Dict[str, float] = field(default_factory=dict)
    horizon: int = 1000
    phi:     str = "power"          # LeL5 / LeL6 family

    def __post_init__(self) -> None:
        if self.lemma not in LEMMAS:
            raise ValueError(f"unknown lemma {self.lemma!r}; expected one of {', '.join(LEMMAS)}")
        unknown = set(self.params) - set(_DEFAULTS[self.lemma])
        if unknown:
            raise ValueError(f"{self.lemma} has no parameter(s) {', '.join(sorted(unknown))}")
        if self.horizon < 2:
            raise ValueError("horizon must be ≥ 2")
        if self.phi not in _PHI:
            raise ValueError(f"unknown φ family {self.phi!r}")

    def value(self, name: str) -> float:
        return float(self.params.get(name, _DEFAULTS[self.lemma][name]))

    def with_params(self, **params: float) -> "RecursionSpec":
        merged = dict(self.params)
        merged.update(params)
        return RecursionSpec(self.lemma, merged, self.horizon, self.phi)

    def to_dict(self) -> dict:
        full = dict(_DEFAULTS[self.lemma])
        full.update(self.params)
        return {"lemma": self.lemma, "params": full, "horizon": self.horizon, "phi": self.phi}


@dataclass
class LemmaReport:
    lemma:         str
    kind:          str
    adversarial:   bool
    replications:  int
    max_ratio:     float
    argmax:        int
    violations:    int
    passed:        bool
    sequence:      np.ndarray                 # first replication
    bound:         np.ndarray
    start:         int                        # index of sequence[0]
    extra:         Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "lemma":        self.lemma,
            "kind":         self.kind,
            "adversarial":  self.adversarial,
            "replications": self.replications,
            "max_ratio":    self.max_ratio,
            "argmax":       self.argmax,
            "violations":   self.violations,
            "passed":       self.passed,
            "horizon":      self.start + len(self.sequence) - 1,
            "extra":        dict(self.extra),
        }


# ---------------------------------------------------------------------------
# Per-lemma dynamics
# ---------------------------------------------------------------------------

def _fail(lemma: str, message: str) -> HypothesisViolationError:
    return HypothesisViolationError(f"{lemma}: {message}")


def _inf_power(a: np.ndarray, v: float, B: float, s: float) -> np.ndarray:
    """inf_{0≤λ≤1} (−λva + Bλ^s) in closed form."""
    lam = np.clip((v * np.maximum(a, 0.0) / (s * B)) ** (1.0 / (s - 1.0)), 0.0, 1.0)
    return -lam * v * a + B * lam ** s


@dataclass
class _Dynamics:
    start:  int                                        # first index
    a0:     float                                      # largest admissible start value
    upper:  Callable[[np.ndarray, int], np.ndarray]    # U(a_{m-1}, m)
    bound:  Callable[[np.ndarray], np.ndarray]         # conclusion bound on indices
    kind:   str = EXPLICIT
    rate:   float = 0.0                                # envelope exponent for existential lemmas
    positive: bool = False
    limit:  Optional[int] = None                       # last index the hypotheses cover

    def horizon(self, requested: int) -> int:
        return requested if self.limit is None else max(self.start + 1, min(requested, self.limit))


def _dynamics(spec: RecursionSpec) -> _Dynamics:
    lemma = spec.lemma
    g = spec.value

    if lemma == "LeL1":
        C1, C2 = g("C1"), g("C2")
        if C1 <= 0.0 or C2 <= 0.0:
            raise _fail(lemma, "C1 and C2 must be positive")
        if C1 * C2 > 1.0:
            raise _fail(lemma, "C1·C2 > 1 leaves no non-negative a_1")
        return _Dynamics(
            start=0, a0=C1,
            upper=lambda a, m: np.maximum(a * (1.0 - C2 * a), 0.0),
            bound=lambda m: 1.0 / (1.0 / C1 + C2 * m),
        )

    if lemma == "HL1":
        C1, y, e = g("C1"), g("y"), g("y_exponent")
        if C1 <= 0.0 or y < 0.0 or e < 0.0:
            raise _fail(lemma, "need C1 > 0, y ≥ 0, y_exponent ≥ 0")
        if C1 * y > 1.0:
            raise _fail(lemma, "C1·y_1 > 1 leaves no non-negative a_1")

        def y_at(k):
            return y * np.asarray(k, dtype=float) ** (-e)

        def hl1_bound(m):
            k = np.arange(1, int(m.max()) + 1)
            sums = np.concatenate([[0.0], np.cumsum(y_at(k))])
            return 1.0 / (1.0 / C1 + sums[m.astype(int)])

        return _Dynamics(
            start=0, a0=C1,
            upper=lambda a, m: np.maximum(a * (1.0 - a * y_at(m)), 0.0),
            bound=hl1_bound,
        )

    if lemma == "LeL2":
        A = g("A")
        if A <= 0.0:
            raise _fail(lemma, "A must be positive")
        return _Dynamics(
            start=1, a0=A,
            upper=lambda a, m: np.maximum(a - 2.0 * a / m + A / m ** 2, 0.0),
            bound=lambda m: A / m,
        )

    if lemma == "LeL3":
        alpha, gamma, A = g("alpha"), g("gamma"), g("A")
        if not (0.0 < alpha < gamma <= 1.0) or A <= 1.0:
            raise _fail(lemma, "need 0 < α < γ ≤ 1 and A > 1")
        B = A * (2.0 ** (1.0 + alpha / (gamma - alpha))) ** alpha

        def lel3_upper(a, m):
            nu = m - 1
            triggered = a >= A * nu ** (-alpha)
            return np.where(triggered, a * (1.0 - gamma / nu), a)

        return _Dynamics(
            start=1, a0=1.0, upper=lel3_upper,
            bound=lambda m: B * m ** (-alpha), positive=True,
        )

    if lemma == "LeL4":
        A, r = g("A"), g("r")
        if A <= 0.0 or r <= 0.0:
            raise _fail(lemma, "A and r must be positive")
        const = A if r <= 1.0 else A * r ** r
        return _Dynamics(
            start=1, a0=A,
            upper=lambda a, m: np.maximum(a * (1.0 - (np.maximum(a, 0.0) / A) ** (1.0 / r)), 0.0),
            bound=lambda m: const * m ** (-r),
        )

    if lemma in ("LeL5", "LeL6"):
        A = g("A")
        s = g("s") if lemma == "LeL5" else 1.0
        if A <= 0.0:
            raise _fail(lemma, "A must be positive")
        if spec.phi == "power" and s < 1.0:
            raise _fail(lemma, "φ(x) = x^s is convex only for s ≥ 1")
        phi, phi_inv, slope0 = _PHI[spec.phi]
        beta = 1.0
        if lemma == "LeL6":
            # β = inf_x xφ'(0+)/φ(x); φ' is increasing, so θ → 0 is the worst case
            x = np.linspace(1e-6, 1.0, 10_001)
            beta = float(np.min(x * slope0(s) / phi(x, s)))
            if beta <= 0.0:
                raise _fail(lemma, f"φ family {spec.phi!r} has no β > 0 with xφ'(θ) ≥ βφ(x)")
        return _Dynamics(
            start=1, a0=A,
            upper=lambda a, m: a * (1.0 - phi(np.clip(a / A, 0.0, 1.0), s)),
            bound=lambda m: A * phi_inv(np.minimum(1.0, 1.0 / (beta * m)), s),
        )

    if lemma in ("LeL8", "LeL10"):
        q, v, B, a0 = g("q"), g("v"), g("B"), g("a0")
        if not (1.0 < q <= 2.0) or not (0.0 < v <= 1.0) or B <= 0.0 or a0 < 0.0:
            raise _fail(lemma, "need q ∈ (1, 2], v ∈ (0, 1], B > 0, a0 ≥ 0")
        if lemma == "LeL8":
            delta = g("delta")
            if not (0.0 < delta <= 1.0):
                raise _fail(lemma, "δ must lie in (0, 1]")

            def slack(m):
                return delta
        else:
            c = g("c")
            if c < 0.0:
                raise _fail(lemma, "c must be ≥ 0")

            def slack(m):
                return c * float(m) ** (-q)

        return _Dynamics(
            start=0, a0=a0,
            upper=lambda a, m: np.maximum(a + _inf_power(a, v, B, q) + slack(m), 0.0),
            bound=lambda m: np.maximum(m, 1.0) ** (1.0 - q),
            kind=EXISTENTIAL, rate=q - 1.0,
            limit=int(delta ** (-1.0 / q)) if lemma == "LeL8" else None,
        )

    if lemma == "LeL9":
        v, B, s = g("v"), g("B"), g("s")
        d_scale, d_exp, a0 = g("delta_scale"), g("delta_exponent"), g("a0")
        if v <= 0.0 or B <= 0.0 or s <= 1.0 or d_scale < 0.0 or d_exp <= 0.0 or a0 < 0.0:
            raise _fail(lemma, "need v, B > 0, ρ(u) = u^s with s > 1, δ_k → 0")
        return _Dynamics(
            start=0, a0=a0,
            upper=lambda a, m: np.maximum(a + _inf_power(a, v, B, s) + d_scale * float(m) ** (-d_exp), 0.0),
            bound=lambda m: np.ones_like(m, dtype=float),
            kind=LIMIT,
        )

    if lemma == "LeL11":
        q, w, c, a0 = g("q"), g("w"), g("c"), g("a0")
        if not (1.0 < q <= 2.0) or not (0.0 < w <= 1.0) or c < 0.0 or a0 < 0.0:
            raise _fail(lemma, "need q ∈ (1, 2], w ∈ (0, 1], c ≥ 0, a0 ≥ 0")
        p = q / (q - 1.0)
        reach = a0 + c * float(zeta(q))
        if p * w * reach ** (p - 1.0) > 1.0:
            raise _fail(lemma, "a − wa^p must be non-decreasing on [0, a0 + cζ(q)]")
        return _Dynamics(
            start=0, a0=a0,
            upper=lambda a, m: np.maximum(a - w * np.maximum(a, 0.0) ** p + c * float(m) ** (-q), 0.0),
            bound=lambda m: np.maximum(m, 1.0) ** (1.0 - q),
            kind=EXISTENTIAL, rate=q - 1.0,
        )

    # LeL12
    alpha, beta, A, a0 = g("alpha"), g("beta"), g("A"), g("a0")
    if not (0.0 < alpha < beta <= 1.0) or A <= 0.0 or not (0.0 <= a0 < A):
        raise _fail(lemma, "need 0 < α < β ≤ 1, A > 0 and 0 ≤ a0 < A")
    C = 2.0 * (2.0 ** (1.0 + (1.0 + alpha) / (beta - alpha))) ** alpha

    def lel12_upper(a, m):
        grow = a + A * float(m) ** (-alpha)
        nu = m - 1
        if nu < 1:
            return grow
        triggered = a >= A * float(nu) ** (-alpha)
        return np.where(triggered, np.minimum(grow, a * (1.0 - beta / nu)), grow)

    return _Dynamics(
        start=0, a0=a0, upper=lel12_upper,
        bound=lambda m: C * A * np.maximum(m, 1.0) ** (-alpha),
    )


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _run(dyn: _Dynamics, horizon: int, adversarial: bool, replications: int, rng) -> np.ndarray:
    """Sequences of shape (replications, horizon − start + 1)."""
    steps = horizon - dyn.start + 1
    out = np.empty((replications, steps))
    if adversarial:
        a = np.full(replications, dyn.a0)
    else:
        a = dyn.a0 * (1.0 - rng.random(replications)) if dyn.positive else dyn.a0 * rng.random(replications)
    out[:, 0] = a
    for i in range(1, steps):
        m = dyn.start + i
        hi = dyn.upper(a, m)
        if adversarial:
            a = hi
        elif dyn.positive:
            a = hi * (1.0 - rng.random(replications))
        else:
            a = hi * rng.random(replications)
        out[:, i] = a
    return out


def _envelope(dyn: _Dynamics, horizon: int) -> Tuple[np.ndarray, float, float]:
    """Adversarial sequence, its fitted constant and its second-half growth."""
    seq = _run(dyn, horizon, True, 1, None)[0]
    m = np.arange(dyn.start, horizon + 1, dtype=float)
    scaled = seq * np.maximum(m, 1.0) ** dyn.rate
    half = len(scaled) // 2
    c_first = float(np.max(scaled[:half + 1]))
    c_all = float(np.max(scaled))
    growth = c_all / c_first if c_first > 0.0 else 1.0
    return seq, c_all, growth


def simulate_recursion(
    spec: RecursionSpec,
    adversarial: bool = True,
    seed: Seed = None,
    replications: int = 1,
) -> LemmaReport:
    """
    Generate sequences satisfying *spec*'s recursive inequality and compare
    them with the lemma's conclusion up to ``spec.horizon``.

    Raises
    ------
    HypothesisViolationError
        If the parameters fall outside the lemma's hypotheses.
    """
    if replications < 1:
        raise ValueError("replications must be ≥ 1")
    dyn = _dynamics(spec)
    horizon = dyn.horizon(spec.horizon)
    rng = as_rng(seed)
    seqs = _run(dyn, horizon, adversarial, replications, rng)
    m = np.arange(dyn.start, horizon + 1, dtype=float)
    extra: Dict[str, float] = {}

    if dyn.kind == LIMIT:
        threshold = spec.value("threshold")
        below = seqs < threshold
        reached = below.any(axis=1)
        first = np.where(reached, np.argmax(below, axis=1), -1)
        extra["threshold"] = threshold
        extra["first_below"] = float(first[0] + dyn.start) if reached[0] else math.nan
        extra["final"] = float(seqs[0, -1])
        violations = int(np.count_nonzero(~reached))
        ratio = seqs.min(axis=1) / threshold
        j = int(np.argmax(ratio))
        return LemmaReport(
            spec.lemma, LIMIT, adversarial, replications,
            max_ratio=float(ratio[j]), argmax=int(first[j] + dyn.start) if reached[j] else horizon,
            violations=violations, passed=violations == 0,
            sequence=seqs[0], bound=np.full_like(m, threshold), start=dyn.start, extra=extra,
        )

    if dyn.kind == EXISTENTIAL:
        _, c_env, growth = _envelope(dyn, horizon)
        bound = c_env * dyn.bound(m)
        extra["fitted_constant"] = c_env
        extra["growth"] = growth
    else:
        bound = dyn.bound(m)

    ratios = seqs / bound[None, :]
    flat = int(np.argmax(ratios))
    rep, col = divmod(flat, ratios.shape[1])
    max_ratio = float(ratios[rep, col])
    violations = int(np.count_nonzero(np.any(ratios > 1.0 + _RATIO_TOL, axis=1)))
    passed = violations == 0
    if dyn.kind == EXISTENTIAL:
        passed = passed and extra["growth"] <= _GROWTH_LIMIT
    if not passed:
        logger.warning("%s: max ratio %.6g at m=%d (%d violating sequences)",
                       spec.lemma, max_ratio, col + dyn.start, violations)
    else:
        logger.debug("%s: max ratio %.6g at m=%d", spec.lemma, max_ratio, col + dyn.start)
    return LemmaReport(
        spec.lemma, dyn.kind, adversarial, replications,
        max_ratio=max_ratio, argmax=col + dyn.start, violations=violations, passed=passed,
        sequence=seqs[0], bound=bound, start=dyn.start, extra=extra,
    )


def scaling_trend(
    spec: RecursionSpec,
    factors: Tuple[float, ...] = (1.0, 0.5, 0.25),
) -> Dict[str, object]:
    """
    v-dependence (w for LeL11) of the fitted constant of an existential lemma,
    with the parameter set to its spec value times each factor.

    The constant should scale like v^{-q} (w^{-1/(p−1)} for LeL11); the trend
    passes when the rescaled constants stay within a factor 2 of the first.
    """
    if spec.lemma not in ("LeL8", "LeL10", "LeL11"):
        raise ValueError(f"{spec.lemma} has no scaling parameter")
    name = "w" if spec.lemma == "LeL11" else "v"
    q = spec.value("q")
    exponent = q - 1.0 if spec.lemma == "LeL11" else q     # 1/(p − 1) = q − 1
    base = spec.value(name)
    values = [base * k for k in factors]
    scaled = []
    for x in values:
        dyn = _dynamics(spec.with_params(**{name: x}))
        _, c, _ = _envelope(dyn, dyn.horizon(spec.horizon))
        scaled.append(c * x ** exponent)
    passed = max(scaled) <= _TREND_FACTOR * scaled[0]
    return {"parameter": name, "values": values, "scaled_constants": scaled, "passed": passed}
