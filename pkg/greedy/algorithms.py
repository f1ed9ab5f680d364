"""
Greedy algorithms with respect to a finite dictionary in ℓ_p^n.

Every procedure has the same shape

    run_<id>(space, dictionary, f, m_max, schedules=None, options=None) -> Trace

and is built from the primitives in :mod:`greedy.steps`.  A run never raises
for step-level trouble (zero functional, singular system, empty threshold
set, …); it stops and records the reason on the trace instead.  Invalid
arguments (bad dimensions, out-of-range parameters) still raise before the
first iteration.

Element selection always works over D^± and is reported as an
(index, sign) pair.  "Any element satisfying …" is resolved to the lowest
index unless ``RunOptions.tie_rule`` asks for the exact maximizer or a
seeded random realization.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable, Dict, List, Optional, Protocol

import numpy as np

from greedy.dictionary import (
    TIE_EXACT_MAX,
    TIE_LOWEST,
    TIE_RANDOMIZED,
    Dictionary,
    Selection,
    select_from_values,
    signed_position,
)
from greedy.errors import GreedyError, SingularSystemError, ZeroFunctionalError
from greedy.linalg import solve_partial_pivot
from greedy.schedules import (
    Schedule,
    ScheduleRole,
    coefficients_power,
    constant,
    incremental_eps,
    relaxation_default,
    weakness,
)
from greedy.space import SmoothnessParams, SpaceLp, lp_norm, smoothness_params
from greedy.steps import (
    SolverOptions,
    chebyshev_project,
    free_relax,
    free_relax_batch,
    line_search_1d,
    line_search_interval,
    threshold_select,
    x_greedy_select,
)
from greedy.trace import IterationRecord, StopReason, Trace

logger = logging.getLogger(__name__)

_DEFAULT_ZERO_TOL  = 1e-12
_DEFAULT_THRESHOLD = 0.25
_DEFAULT_B         = 0.5


class AlgorithmId(str, Enum):
    PGA     = "PGA"
    WGA     = "WGA"
    WDGA    = "WDGA"
    WCGA    = "WCGA"
    WGAFR   = "WGAFR"
    XGA     = "XGA"
    XGAFR1  = "XGAFR1"
    XGAFR2  = "XGAFR2"
    GAWR    = "GAWR"
    XGAR    = "XGAR"
    XGA_C   = "XGA_C"
    DGA_C   = "DGA_C"
    DGA_BMU = "DGA_BMU"
    MDGA    = "MDGA"
    DGART   = "DGART"
    CGAT    = "CGAT"
    IA_EPS  = "IA_EPS"
    WRGA    = "WRGA"
    RWRGA   = "RWRGA"
    RRXGA   = "RRXGA"
    QOGA    = "QOGA"
    WQOGA   = "WQOGA"
    TGA     = "TGA"
    AWCGA   = "AWCGA"
    AWGAFR  = "AWGAFR"
    ARWRGA  = "ARWRGA"


# Residuals of these never increase.  GAWR and XGAR shrink G_{m-1} before the
# step and may grow the residual.
MONOTONE = frozenset({
    AlgorithmId.PGA, AlgorithmId.WGA, AlgorithmId.WDGA, AlgorithmId.WCGA,
    AlgorithmId.WGAFR, AlgorithmId.WRGA, AlgorithmId.RWRGA, AlgorithmId.RRXGA,
    AlgorithmId.XGA, AlgorithmId.XGAFR1, AlgorithmId.XGAFR2,
    AlgorithmId.DGART, AlgorithmId.CGAT,
})

# Weak biorthogonal class: selection, biorthogonality and error reduction are audited.
BIORTHOGONAL = frozenset({
    AlgorithmId.WCGA, AlgorithmId.WGAFR, AlgorithmId.RWRGA,
    AlgorithmId.AWCGA, AlgorithmId.AWGAFR, AlgorithmId.ARWRGA,
})


@dataclass(frozen=True)
class RunOptions:
    zero_tol:  float = _DEFAULT_ZERO_TOL
    tie_rule:  str = TIE_LOWEST              # lowest-index | exact-max | randomized
    seed:      Optional[int] = None          # randomized realization stream
    snapshots: bool = True                   # keep approximant coefficients per iteration
    solver:    SolverOptions = field(default_factory=SolverOptions)


@dataclass(frozen=True)
class RunSchedules:
    weakness:     Schedule = field(default_factory=weakness)
    relaxation:   Schedule = field(default_factory=relaxation_default)
    coefficients: Optional[Schedule] = None   # XGA_C / DGA_C; defaults to k^{-s}, s = (1 + 1/q)/2
    epsilon:      Optional[Schedule] = None   # IA_EPS; defaults to γ^{1/q} n^{-1/q'}
    threshold:    float = _DEFAULT_THRESHOLD  # DGART / CGAT δ ∈ (0, 1/2]
    b:            float = _DEFAULT_B          # DGA_BMU / MDGA, b ∈ (0, 1]
    delta:        Optional[Schedule] = None   # functional perturbations δ_m (approximate wrappers)
    eta:          Optional[Schedule] = None   # approximation perturbations η_m

    def __post_init__(self) -> None:
        for name, role in (("weakness", ScheduleRole.WEAKNESS), ("relaxation", ScheduleRole.RELAXATION)):
            if getattr(self, name).role is not role:
                raise ValueError(f"{name} schedule has role {getattr(self, name).role.value}")
        if not (0.0 < self.threshold <= 0.5):
            raise ValueError(f"threshold must lie in (0, 1/2], got {self.threshold}")
        if not (0.0 < self.b <= 1.0):
            raise ValueError(f"b must lie in (0, 1], got {self.b}")

    def to_dict(self) -> dict:
        out: dict = {
            "weakness":   self.weakness.to_dict(),
            "relaxation": self.relaxation.to_dict(),
            "threshold":  self.threshold,
            "b":          self.b,
        }
        for name in ("coefficients", "epsilon", "delta", "eta"):
            sched = getattr(self, name)
            if sched is not None:
                out[name] = sched.to_dict()
        return out


class Perturbation(Protocol):
    """Controlled errors injected by the approximate wrappers."""

    def functional(self, state: "_RunState", m: int) -> np.ndarray:
        """Approximate norming functional F_m of the residual f_m."""

    def approximant(
        self, state: "_RunState", m: int, coefficients: np.ndarray, directions: List[np.ndarray],
    ) -> np.ndarray:
        """Coefficients of an approximant within (1 + η_m) of the reference one."""

    def slack(self, state: "_RunState", m: int) -> float:
        """Admissible biorthogonality slack ε_m."""


RunFn = Callable[..., Trace]


# ---------------------------------------------------------------------------
# Run state
# ---------------------------------------------------------------------------

class _Stop(Exception):
    def __init__(self, reason: StopReason) -> None:
        super().__init__(reason.value)
        self.reason = reason


@dataclass
class _RunState:
    space:        SpaceLp
    dictionary:   Dictionary
    f:            np.ndarray
    schedules:    RunSchedules
    options:      RunOptions
    trace:        Trace
    params:       SmoothnessParams
    rng:          np.random.Generator
    residual:     np.ndarray
    approximant:  np.ndarray
    coefficients: np.ndarray
    selected:     List[int] = field(default_factory=list)
    perturb:      Optional[Perturbation] = None
    f_norm:       float = 0.0
    signed_counts: Optional[np.ndarray] = None   # IA_EPS picks per D^± position

    @property
    def residual_norm(self) -> float:
        return lp_norm(self.residual, self.space.p)

    def exact_functional(self) -> np.ndarray:
        """Coordinates of F_{f_m}; zero when the residual vanishes."""
        nrm = self.residual_norm
        if nrm == 0.0:
            return np.zeros_like(self.residual)
        return np.sign(self.residual) * (np.abs(self.residual) / nrm) ** (self.space.p - 1.0)

    def selection_functional(self, m: int) -> np.ndarray:
        """Functional steering the selection of iteration m (built on f_{m-1})."""
        if self.perturb is not None:
            return self.perturb.functional(self, m - 1)
        return self.exact_functional()

    def weakness(self, m: int) -> float:
        t = self.schedules.weakness.at(m)
        if t == 0.0:
            raise _Stop(StopReason.STALLED)
        return t

    def weak_select(self, m: int) -> Selection:
        t = self.weakness(m)
        values = self.dictionary.elements @ self.selection_functional(m)
        return select_from_values(values, t, self.options.tie_rule, self.rng)

    def set_coefficients(self, a: np.ndarray) -> None:
        """Approximant from coefficients; residual recomputed as f − G."""
        self.coefficients = a
        self.approximant = a @ self.dictionary.elements
        self.residual = self.f - self.approximant

    def adjust(self, m: int, a_ref: np.ndarray, directions: List[np.ndarray]) -> np.ndarray:
        if self.perturb is None:
            return a_ref
        return self.perturb.approximant(self, m, a_ref, directions)

    def record(self, m: int, **fields) -> IterationRecord:
        extra = fields.pop("extra", {})
        norm = self.residual_norm
        if norm > 0.0:
            fx = self.exact_functional()
            dn = float(np.max(np.abs(self.dictionary.elements @ fx)))
            extra["F_G"] = float(fx @ self.approximant)
        else:
            dn = 0.0
            extra["F_G"] = 0.0
        if self.perturb is not None:
            fm = self.perturb.functional(self, m)
            extra["Fm_G"] = float(fm @ self.approximant)
            extra["eps_slack"] = self.perturb.slack(self, m)
        rec = IterationRecord(
            m=m,
            residual_norm=norm,
            dnorm_F=dn,
            coefficients=self.coefficients.copy() if self.options.snapshots else None,
            extra=extra,
            **fields,
        )
        self.trace.records.append(rec)
        logger.debug("%s m=%d ‖f_m‖=%.6g", self.trace.algorithm, m, norm)
        return rec


StepFn = Callable[[_RunState, int], Optional[StopReason]]


def _default_schedules(space: SpaceLp, schedules: Optional[RunSchedules]) -> RunSchedules:
    return schedules if schedules is not None else RunSchedules()


def _drive(
    algorithm: AlgorithmId,
    space: SpaceLp,
    dictionary: Dictionary,
    f: np.ndarray,
    m_max: int,
    schedules: Optional[RunSchedules],
    options: Optional[RunOptions],
    step: StepFn,
    perturb: Optional[Perturbation] = None,
    label: Optional[str] = None,
) -> Trace:
    """Shared iteration loop: bookkeeping, stop rules and error capture."""
    if dictionary.space.dim != space.dim:
        raise ValueError(f"dictionary lives in {dictionary.space}, run space is {space}")
    fv = space.element(f)
    if not np.all(np.isfinite(fv)):
        raise ValueError("f must be finite")
    if m_max < 0:
        raise ValueError("m_max must be ≥ 0")
    schedules = _default_schedules(space, schedules)
    options = options or RunOptions()
    if options.tie_rule not in (TIE_LOWEST, TIE_EXACT_MAX, TIE_RANDOMIZED):
        raise ValueError(f"unknown tie rule {options.tie_rule!r}")

    trace = Trace(algorithm=label or algorithm.value)
    trace.metadata.update({
        "algorithm":   label or algorithm.value,
        "space":       str(space),
        "p":           space.p,
        "dim":         space.dim,
        "dictionary":  dictionary.label,
        "fingerprint": dictionary.fingerprint,
        "schedules":   schedules.to_dict(),
        "seed":        options.seed,
        "tie_rule":    options.tie_rule,
        "m_max":       m_max,
    })
    state = _RunState(
        space=space,
        dictionary=dictionary,
        f=fv.copy(),
        schedules=schedules,
        options=options,
        trace=trace,
        params=smoothness_params(space),
        rng=np.random.default_rng(options.seed),
        residual=fv.copy(),
        approximant=np.zeros(space.dim),
        coefficients=np.zeros(dictionary.size),
        perturb=perturb,
    )
    state.f_norm = state.residual_norm
    state.record(0)

    reason = StopReason.M_MAX
    if state.f_norm <= options.zero_tol:
        reason = StopReason.ZERO_RESIDUAL
    else:
        for m in range(1, m_max + 1):
            try:
                outcome = step(state, m)
            except _Stop as stop:
                outcome = stop.reason
            except ZeroFunctionalError:
                outcome = StopReason.ZERO_FUNCTIONAL
            except SingularSystemError as exc:
                logger.info("%s: singular system at m=%d (%s)", trace.algorithm, m, exc)
                outcome = StopReason.SINGULAR_SYSTEM
            except GreedyError as exc:
                logger.warning("%s: step %d failed: %s", trace.algorithm, m, exc)
                trace.error = str(exc)
                outcome = StopReason.ERROR
            if outcome is not None:
                reason = outcome
                break
            if trace.final_norm <= options.zero_tol:
                reason = StopReason.ZERO_RESIDUAL
                break

    trace.stop_reason = reason
    trace.approximant = state.approximant.copy()
    trace.residual = state.residual.copy()
    trace.metadata["selected"] = list(state.selected)
    trace.log()
    return trace


def _line_audit(state: _RunState, phi: np.ndarray) -> Dict[str, float]:
    """Unconstrained line search from f_{m-1} along φ_m (error-reduction reference)."""
    lam, res = line_search_1d(state.space, state.residual, phi, state.options.solver)
    return {"lambda_line": lam, "line_residual": res}


def _unit(size: int, index: int, value: float = 1.0) -> np.ndarray:
    e = np.zeros(size)
    e[index] = value
    return e


# ---------------------------------------------------------------------------
# Dual greedy with line search: WDGA / WGA / PGA
# ---------------------------------------------------------------------------

def _step_wdga(state: _RunState, m: int) -> Optional[StopReason]:
    sel = state.weak_select(m)
    phi = sel.sign * state.dictionary.elements[sel.index]
    lam, _ = line_search_1d(state.space, state.residual, phi, state.options.solver)
    state.residual = state.residual - lam * phi
    state.approximant = state.approximant + lam * phi
    state.coefficients[sel.index] += lam * sel.sign
    state.selected.append(sel.index)
    state.record(m, index=sel.index, sign=sel.sign, lam=lam, extra={"lambda_line": lam})
    return None


def run_wdga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Weak dual greedy algorithm: f_m = f_{m-1} − λ_mφ_m with λ_m from a line search."""
    return _drive(AlgorithmId.WDGA, space, dictionary, f, m_max, schedules, options, _step_wdga)


def run_wga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    return _drive(AlgorithmId.WGA, space, dictionary, f, m_max, schedules, options, _step_wdga)


def run_pga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """t_m = 1 with the exact maximizer."""
    base = _default_schedules(space, schedules)
    pinned = replace(base, weakness=weakness(1.0))
    opts = replace(options or RunOptions(), tie_rule=TIE_EXACT_MAX)
    return _drive(AlgorithmId.PGA, space, dictionary, f, m_max, pinned, opts, _step_wdga)


# ---------------------------------------------------------------------------
# Chebyshev: WCGA
# ---------------------------------------------------------------------------

def _project_selected(state: _RunState, m: int) -> tuple[np.ndarray, float, list]:
    cols = state.dictionary.elements[state.selected].T
    proj = chebyshev_project(state.space, state.f, cols, state.options.solver)
    if proj.dropped:
        state.trace.flag("dropped_dependent")
    if not proj.converged:
        state.trace.flag("projection_unconverged")
    a = np.zeros(state.dictionary.size)
    a[state.selected] = proj.coefficients
    return a, proj.kkt_violation, proj.dropped


def _step_wcga(state: _RunState, m: int) -> Optional[StopReason]:
    sel = state.weak_select(m)
    phi = sel.sign * state.dictionary.elements[sel.index]
    audit = _line_audit(state, phi)
    if sel.index in state.selected:
        state.trace.flag("duplicate_selection")
    else:
        state.selected.append(sel.index)
    a_ref, kkt, _ = _project_selected(state, m)
    directions = [_unit(state.dictionary.size, i) for i in state.selected]
    a = state.adjust(m, a_ref, directions)
    state.set_coefficients(a)
    if a is not a_ref:
        audit["reference_residual"] = lp_norm(state.f - a_ref @ state.dictionary.elements, state.space.p)
    audit["kkt"] = kkt
    state.record(m, index=sel.index, sign=sel.sign, c=float(a[sel.index]) * sel.sign, extra=audit)
    return None


def run_wcga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Weak Chebyshev greedy algorithm: G_m is the best approximation from span{φ_1 … φ_m}."""
    return _drive(AlgorithmId.WCGA, space, dictionary, f, m_max, schedules, options, _step_wcga)


# ---------------------------------------------------------------------------
# Free relaxation: WGAFR / XGAFR1 / XGAFR2
# ---------------------------------------------------------------------------

def _apply_relaxed(state: _RunState, m: int, index: int, sign: int, w: float, lam: float) -> np.ndarray:
    """Coefficients of (1 − w)G_{m-1} + λσg_index."""
    a = (1.0 - w) * state.coefficients
    a[index] += lam * sign
    return a


def _step_wgafr(state: _RunState, m: int) -> Optional[StopReason]:
    sel = state.weak_select(m)
    phi = sel.sign * state.dictionary.elements[sel.index]
    audit = _line_audit(state, phi)
    w, lam, _ = free_relax(state.space, state.f, state.approximant, phi, state.options.solver)
    previous = state.coefficients.copy()
    a_ref = _apply_relaxed(state, m, sel.index, sel.sign, w, lam)
    a = state.adjust(m, a_ref, [previous, _unit(state.dictionary.size, sel.index, sel.sign)])
    if a is not a_ref:
        audit["reference_residual"] = lp_norm(state.f - a_ref @ state.dictionary.elements, state.space.p)
    state.set_coefficients(a)
    if sel.index not in state.selected:
        state.selected.append(sel.index)
    state.record(m, index=sel.index, sign=sel.sign, w=w, lam=lam, extra=audit)
    return None


def run_wgafr(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Weak greedy algorithm with free relaxation."""
    return _drive(AlgorithmId.WGAFR, space, dictionary, f, m_max, schedules, options, _step_wgafr)


def _step_xgafr2(state: _RunState, m: int) -> Optional[StopReason]:
    xs = x_greedy_select(state.space, state.residual, state.dictionary, state.options.solver)
    phi = xs.sign * state.dictionary.elements[xs.index]
    w, lam, _ = free_relax(state.space, state.f, state.approximant, phi, state.options.solver)
    state.set_coefficients(_apply_relaxed(state, m, xs.index, xs.sign, w, lam))
    if xs.index not in state.selected:
        state.selected.append(xs.index)
    state.record(m, index=xs.index, sign=xs.sign, w=w, lam=lam)
    return None


def run_xgafr2(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """X-greedy selection on the residual followed by free relaxation."""
    return _drive(AlgorithmId.XGAFR2, space, dictionary, f, m_max, schedules, options, _step_xgafr2)


def _step_xgafr1(state: _RunState, m: int) -> Optional[StopReason]:
    w, lam, res = free_relax_batch(
        state.space, state.f, state.approximant, state.dictionary.elements, state.options.solver,
    )
    idx = int(np.argmin(res))
    sign = 1 if lam[idx] >= 0.0 else -1
    state.set_coefficients(_apply_relaxed(state, m, idx, 1, float(w[idx]), float(lam[idx])))
    if idx not in state.selected:
        state.selected.append(idx)
    state.record(m, index=idx, sign=sign, w=float(w[idx]), lam=abs(float(lam[idx])))
    return None


def run_xgafr1(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Joint minimization over the element, λ and w."""
    return _drive(AlgorithmId.XGAFR1, space, dictionary, f, m_max, schedules, options, _step_xgafr1)


# ---------------------------------------------------------------------------
# X-greedy and fixed relaxation: XGA / GAWR / XGAR
# ---------------------------------------------------------------------------

def _step_xga(state: _RunState, m: int) -> Optional[StopReason]:
    xs = x_greedy_select(state.space, state.residual, state.dictionary, state.options.solver)
    g = state.dictionary.elements[xs.index]
    state.residual = state.residual - xs.lam * g
    state.approximant = state.approximant + xs.lam * g
    state.coefficients[xs.index] += xs.lam
    state.selected.append(xs.index)
    state.record(m, index=xs.index, sign=xs.sign, lam=abs(xs.lam))
    return None


def run_xga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """X-greedy algorithm: the element and λ minimizing ‖f_{m-1} − λg‖."""
    return _drive(AlgorithmId.XGA, space, dictionary, f, m_max, schedules, options, _step_xga)


def _relaxed_update(state: _RunState, m: int, index: int, sign: int, r: float, lam: float, shifted: np.ndarray) -> None:
    phi = sign * state.dictionary.elements[index]
    state.residual = shifted - lam * phi
    state.approximant = (1.0 - r) * state.approximant + lam * phi
    state.coefficients = (1.0 - r) * state.coefficients
    state.coefficients[index] += lam * sign


def _step_gawr(state: _RunState, m: int) -> Optional[StopReason]:
    sel = state.weak_select(m)
    r = state.schedules.relaxation.at(m)
    phi = sel.sign * state.dictionary.elements[sel.index]
    shifted = state.residual + r * state.approximant
    lam, _ = line_search_1d(state.space, shifted, phi, state.options.solver)
    _relaxed_update(state, m, sel.index, sel.sign, r, lam, shifted)
    state.selected.append(sel.index)
    state.record(m, index=sel.index, sign=sel.sign, lam=lam, w=r, extra={"G_norm": lp_norm(state.approximant, state.space.p)})
    return None


def run_gawr(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Dual weak selection, then G_m = (1 − r_m)G_{m-1} + λ_mφ_m."""
    return _drive(AlgorithmId.GAWR, space, dictionary, f, m_max, schedules, options, _step_gawr)


def _step_xgar(state: _RunState, m: int) -> Optional[StopReason]:
    r = state.schedules.relaxation.at(m)
    shifted = state.residual + r * state.approximant
    xs = x_greedy_select(state.space, shifted, state.dictionary, state.options.solver)
    _relaxed_update(state, m, xs.index, xs.sign, r, abs(xs.lam), shifted)
    state.selected.append(xs.index)
    state.record(m, index=xs.index, sign=xs.sign, lam=abs(xs.lam), w=r)
    return None


def run_xgar(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """X-greedy selection on f − (1 − r_m)G_{m-1} with fixed relaxation."""
    return _drive(AlgorithmId.XGAR, space, dictionary, f, m_max, schedules, options, _step_xgar)


# ---------------------------------------------------------------------------
# Prescribed coefficients: XGA(𝒞) / DGA(t, 𝒞) / DGA(τ, b, μ) / MDGA
# ---------------------------------------------------------------------------

def _coefficient(state: _RunState, m: int) -> float:
    sched = state.schedules.coefficients or coefficients_power(state.params.q)
    return sched.at(m)


def _subtract(state: _RunState, m: int, index: int, sign: int, c: float) -> None:
    phi = sign * state.dictionary.elements[index]
    state.residual = state.residual - c * phi
    state.approximant = state.approximant + c * phi
    state.coefficients[index] += c * sign
    state.selected.append(index)


def _step_xga_c(state: _RunState, m: int) -> Optional[StopReason]:
    c = _coefficient(state, m)
    candidates = state.residual[None, :] - c * state.dictionary.signed_elements
    norms = lp_norm(candidates, state.space.p, axis=1)
    index, sign = signed_position(int(np.argmin(norms)))
    _subtract(state, m, index, sign, c)
    state.record(m, index=index, sign=sign, c=c)
    return None


def run_xga_c(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Minimize ‖f_{m-1} − c_mg‖ over g ∈ D^± for prescribed c_m."""
    trace = _drive(AlgorithmId.XGA_C, space, dictionary, f, m_max, schedules, options, _step_xga_c)
    trace.flag("non_monotone_allowed")
    return trace


def _step_dga_c(state: _RunState, m: int) -> Optional[StopReason]:
    sel = state.weak_select(m)
    c = _coefficient(state, m)
    _subtract(state, m, sel.index, sel.sign, c)
    state.record(m, index=sel.index, sign=sel.sign, c=c)
    return None


def run_dga_c(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Dual weak selection, then f_m = f_{m-1} − c_mφ_m."""
    trace = _drive(AlgorithmId.DGA_C, space, dictionary, f, m_max, schedules, options, _step_dga_c)
    trace.flag("non_monotone_allowed")
    return trace


def _step_dga_bmu(state: _RunState, m: int) -> Optional[StopReason]:
    t = state.weakness(m)
    fx = state.selection_functional(m)
    values = state.dictionary.elements @ fx
    sel = select_from_values(values, t, state.options.tie_rule, state.rng)
    dn = float(np.max(np.abs(values)))
    gamma, q = state.params.gamma, state.params.q
    c = state.residual_norm * (t * state.schedules.b * dn / (2.0 * gamma)) ** (1.0 / (q - 1.0))
    _subtract(state, m, sel.index, sel.sign, c)
    state.record(m, index=sel.index, sign=sel.sign, c=c)
    return None


def run_dga_bmu(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """
    Dual greedy step with c_m from ‖f‖μ(c/‖f‖) = (t_m b/2)c‖F‖_D, μ(u) = γu^q:

        c_m = ‖f_{m-1}‖ (t_m b ‖F_{f_{m-1}}‖_D / (2γ))^{1/(q−1)}
    """
    trace = _drive(AlgorithmId.DGA_BMU, space, dictionary, f, m_max, schedules, options, _step_dga_bmu)
    trace.flag("non_monotone_allowed")
    return trace


def _step_mdga(state: _RunState, m: int) -> Optional[StopReason]:
    t = state.weakness(m)
    mass = 1.0 + sum(r.c for r in state.trace.records[1:] if r.c is not None)
    f_norm = state.residual_norm
    sel = threshold_select(state.selection_functional(m), state.dictionary, t * f_norm / mass)
    if sel is None:
        return StopReason.THRESHOLD_EMPTY
    gamma, q = state.params.gamma, state.params.q
    c = (t * state.schedules.b * f_norm ** q / (2.0 * gamma * mass)) ** (1.0 / (q - 1.0))
    _subtract(state, m, sel.index, sel.sign, c)
    state.record(m, index=sel.index, sign=sel.sign, c=c, extra={"threshold": t * f_norm / mass})
    return None


def run_mdga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """
    Thresholding variant of DGA(τ, b, μ) for f ∈ A_1(D).

    Iteration m uses the data-driven threshold t_m‖f_{m-1}‖/S_m with
    S_m = 1 + Σ_{j<m} c_j and c_m = (t_m b ‖f_{m-1}‖^q / (2γS_m))^{1/(q−1)}.
    """
    trace = _drive(AlgorithmId.MDGA, space, dictionary, f, m_max, schedules, options, _step_mdga)
    trace.flag("non_monotone_allowed")
    return trace


# ---------------------------------------------------------------------------
# Thresholding: DGART / CGAT
# ---------------------------------------------------------------------------

def _threshold_pick(state: _RunState, m: int) -> Optional[Selection]:
    return threshold_select(state.selection_functional(m), state.dictionary, state.schedules.threshold)


def _step_dgart(state: _RunState, m: int) -> Optional[StopReason]:
    sel = _threshold_pick(state, m)
    if sel is None:
        return StopReason.THRESHOLD_EMPTY
    phi = sel.sign * state.dictionary.elements[sel.index]
    w, lam, _ = free_relax(state.space, state.f, state.approximant, phi, state.options.solver)
    state.set_coefficients(_apply_relaxed(state, m, sel.index, sel.sign, w, lam))
    if sel.index not in state.selected:
        state.selected.append(sel.index)
    rec = state.record(m, index=sel.index, sign=sel.sign, w=w, lam=lam)
    if rec.residual_norm <= state.schedules.threshold * state.f_norm:
        return StopReason.RESIDUAL_BELOW_DELTA_F
    return None


def run_dgart(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Dual greedy algorithm with relaxation and thresholding F(φ) ≥ δ."""
    return _drive(AlgorithmId.DGART, space, dictionary, f, m_max, schedules, options, _step_dgart)


def _step_cgat(state: _RunState, m: int) -> Optional[StopReason]:
    sel = _threshold_pick(state, m)
    if sel is None:
        return StopReason.THRESHOLD_EMPTY
    if sel.index not in state.selected:
        state.selected.append(sel.index)
    a, kkt, _ = _project_selected(state, m)
    state.set_coefficients(a)
    rec = state.record(m, index=sel.index, sign=sel.sign, extra={"kkt": kkt})
    if rec.residual_norm <= state.schedules.threshold * state.f_norm:
        return StopReason.RESIDUAL_BELOW_DELTA_F
    return None


def run_cgat(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Chebyshev greedy algorithm with thresholding."""
    return _drive(AlgorithmId.CGAT, space, dictionary, f, m_max, schedules, options, _step_cgat)


# ---------------------------------------------------------------------------
# Convex-hull algorithms: IA(ε) / WRGA / RWRGA / RRXGA
# ---------------------------------------------------------------------------

def _step_ia_eps(state: _RunState, m: int) -> Optional[StopReason]:
    sched = state.schedules.epsilon or incremental_eps(state.params.q, state.params.gamma)
    eps = sched.at(m)
    fx = state.selection_functional(m)
    # F_{f_{m-1}}(φ − f) over D^± in interleaved order
    values = state.dictionary.signed_elements @ fx - float(fx @ state.f)
    passing = np.flatnonzero(values >= -eps)
    if passing.size == 0:
        return StopReason.THRESHOLD_EMPTY
    position = int(passing[0])
    index, sign = signed_position(position)
    if state.signed_counts is None:
        state.signed_counts = np.zeros(2 * state.dictionary.size, dtype=np.int64)
    state.signed_counts[position] += 1
    # G_m = (1/m) Σ φ_j, one weight count/m per signed atom
    counts = state.signed_counts
    state.set_coefficients((counts[0::2] - counts[1::2]) / m)
    state.selected.append(index)
    weights: Dict[str, float] = {}
    for j in np.flatnonzero(counts):
        i, s = signed_position(int(j))
        weights[f"{'+' if s > 0 else '-'}{i}"] = int(counts[j]) / m
    state.trace.metadata["convex_weights"] = weights
    state.record(m, index=index, sign=sign, lam=1.0 / m,
                 extra={"epsilon": eps, "convex_mass": int(counts.sum()) / m})
    return None


def run_ia_eps(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """
    Incremental algorithm over conv(D^±): pick the first φ with
    F_{f_{m-1}}(φ − f) ≥ −ε_m and set G_m = (1 − 1/m)G_{m-1} + φ/m.
    """
    return _drive(AlgorithmId.IA_EPS, space, dictionary, f, m_max, schedules, options, _step_ia_eps)


def _step_wrga(state: _RunState, m: int) -> Optional[StopReason]:
    t = state.weakness(m)
    fx = state.selection_functional(m)
    fg = float(fx @ state.approximant)
    gains = state.dictionary.signed_elements @ fx - fg
    top = float(gains.max())
    if top <= 0.0:
        return StopReason.STALLED
    admissible = np.flatnonzero(gains >= t * top)
    if state.options.tie_rule == TIE_EXACT_MAX or t == 1.0:
        pos = int(np.argmax(gains))
    elif state.options.tie_rule == TIE_RANDOMIZED:
        pos = int(state.rng.choice(admissible))
    else:
        pos = int(admissible[0])
    index, sign = signed_position(pos)
    phi = sign * state.dictionary.elements[index]
    direction = phi - state.approximant
    if lp_norm(direction, state.space.p) == 0.0:
        return StopReason.STALLED
    lam, _ = line_search_interval(state.space, state.residual, direction, 0.0, 1.0, state.options.solver)
    state.set_coefficients(_apply_relaxed(state, m, index, sign, lam, lam))
    if index not in state.selected:
        state.selected.append(index)
    state.record(m, index=index, sign=sign, lam=lam)
    return None


def run_wrga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """
    Weak relaxed greedy algorithm: F_{f_{m-1}}(φ − G_{m-1}) ≥ t_m sup, then
    G_m = (1 − λ)G_{m-1} + λφ with λ ∈ [0, 1] minimizing the residual.
    """
    return _drive(AlgorithmId.WRGA, space, dictionary, f, m_max, schedules, options, _step_wrga)


def _rescale(state: _RunState, m: int, index: int, sign: int, lam: float, audit: dict) -> float:
    """G_m = μ(G_{m-1} + λφ) with μ from an unconstrained line search; returns μ."""
    phi = sign * state.dictionary.elements[index]
    h = state.approximant + lam * phi
    if lp_norm(h, state.space.p) == 0.0:
        raise _Stop(StopReason.STALLED)
    mu, _ = line_search_1d(state.space, state.f, h, state.options.solver)
    a_h = state.coefficients.copy()
    a_h[index] += lam * sign
    a_ref = mu * a_h
    a = state.adjust(m, a_ref, [a_h])
    if a is not a_ref:
        audit["reference_residual"] = lp_norm(state.f - a_ref @ state.dictionary.elements, state.space.p)
    state.set_coefficients(a)
    if index not in state.selected:
        state.selected.append(index)
    return mu


def _step_rwrga(state: _RunState, m: int) -> Optional[StopReason]:
    sel = state.weak_select(m)
    phi = sel.sign * state.dictionary.elements[sel.index]
    audit = _line_audit(state, phi)
    lam, _ = line_search_interval(state.space, state.residual, phi, 0.0, np.inf, state.options.solver)
    mu = _rescale(state, m, sel.index, sel.sign, lam, audit)
    state.record(m, index=sel.index, sign=sel.sign, lam=lam, mu=mu, extra=audit)
    return None


def run_rwrga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Rescaled weak relaxed greedy algorithm."""
    return _drive(AlgorithmId.RWRGA, space, dictionary, f, m_max, schedules, options, _step_rwrga)


def _step_rrxga(state: _RunState, m: int) -> Optional[StopReason]:
    xs = x_greedy_select(state.space, state.residual, state.dictionary, state.options.solver)
    mu = _rescale(state, m, xs.index, xs.sign, abs(xs.lam), {})
    state.record(m, index=xs.index, sign=xs.sign, lam=abs(xs.lam), mu=mu)
    return None


def run_rrxga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Rescaled relaxed X-greedy algorithm."""
    return _drive(AlgorithmId.RRXGA, space, dictionary, f, m_max, schedules, options, _step_rrxga)


# ---------------------------------------------------------------------------
# Quasi-orthogonal greedy: QOGA / WQOGA
# ---------------------------------------------------------------------------

def _step_qoga(state: _RunState, m: int) -> Optional[StopReason]:
    t = state.weakness(m)
    values = state.dictionary.dual_elements @ state.residual
    sel = select_from_values(values, t, state.options.tie_rule, state.rng)
    if sel.index in state.selected:
        state.trace.flag("duplicate_selection")
        return StopReason.STALLED
    state.selected.append(sel.index)
    idx = state.selected
    # A[j, i] = F_{φ_j}(φ_i)
    system = state.dictionary.dual_elements[idx] @ state.dictionary.elements[idx].T
    rhs = state.dictionary.dual_elements[idx] @ state.f
    coef = solve_partial_pivot(system, rhs)
    a = np.zeros(state.dictionary.size)
    a[idx] = coef
    state.set_coefficients(a)
    state.record(m, index=sel.index, sign=sel.sign, c=float(coef[-1]))
    return None


def run_qoga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """
    Quasi-orthogonal greedy algorithm with t_m = 1.

    Selection maximizes |F_g(f_{m-1})| using the norming functionals of the
    dictionary elements; the coefficients solve F_{φ_j}(f − Σc_iφ_i) = 0.
    """
    base = _default_schedules(space, schedules)
    pinned = replace(base, weakness=weakness(1.0))
    return _drive(AlgorithmId.QOGA, space, dictionary, f, m_max, pinned, options, _step_qoga)


def run_wqoga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """Weak quasi-orthogonal greedy algorithm."""
    return _drive(AlgorithmId.WQOGA, space, dictionary, f, m_max, schedules, options, _step_qoga)


# ---------------------------------------------------------------------------
# Thresholding over a basis: TGA
# ---------------------------------------------------------------------------

def _tga_step(expansion: dict) -> StepFn:
    """Step closure; the expansion is solved once, on the first iteration."""

    def step(state: _RunState, m: int) -> Optional[StopReason]:
        if not expansion:
            coef = solve_partial_pivot(state.dictionary.elements.T, state.f)
            expansion["coef"] = coef
            expansion["order"] = np.lexsort((np.arange(coef.size), -np.abs(coef)))
        coef, order = expansion["coef"], expansion["order"]
        if m > order.size:
            return StopReason.STALLED
        index = int(order[m - 1])
        a = state.coefficients.copy()
        a[index] = coef[index]
        state.set_coefficients(a)
        state.selected.append(index)
        sign = 1 if coef[index] >= 0.0 else -1
        state.record(m, index=index, sign=sign, c=abs(float(coef[index])))
        return None

    return step


def run_tga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    """
    Thresholding greedy algorithm over a basis: keep the m largest expansion
    coefficients (ties to the lower index).
    """
    if dictionary.size != space.dim:
        raise ValueError(f"TGA needs a basis: N={dictionary.size}, n={space.dim}")
    expansion: dict = {}
    trace = _drive(AlgorithmId.TGA, space, dictionary, f, m_max, schedules, options, _tga_step(expansion))
    if expansion:
        trace.metadata["expansion"] = expansion["coef"].tolist()
    return trace


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

RUNNERS: Dict[AlgorithmId, RunFn] = {
    AlgorithmId.PGA:     run_pga,
    AlgorithmId.WGA:     run_wga,
    AlgorithmId.WDGA:    run_wdga,
    AlgorithmId.WCGA:    run_wcga,
    AlgorithmId.WGAFR:   run_wgafr,
    AlgorithmId.XGA:     run_xga,
    AlgorithmId.XGAFR1:  run_xgafr1,
    AlgorithmId.XGAFR2:  run_xgafr2,
    AlgorithmId.GAWR:    run_gawr,
    AlgorithmId.XGAR:    run_xgar,
    AlgorithmId.XGA_C:   run_xga_c,
    AlgorithmId.DGA_C:   run_dga_c,
    AlgorithmId.DGA_BMU: run_dga_bmu,
    AlgorithmId.MDGA:    run_mdga,
    AlgorithmId.DGART:   run_dgart,
    AlgorithmId.CGAT:    run_cgat,
    AlgorithmId.IA_EPS:  run_ia_eps,
    AlgorithmId.WRGA:    run_wrga,
    AlgorithmId.RWRGA:   run_rwrga,
    AlgorithmId.RRXGA:   run_rrxga,
    AlgorithmId.QOGA:    run_qoga,
    AlgorithmId.WQOGA:   run_wqoga,
    AlgorithmId.TGA:     run_tga,
}


def runner(algorithm: AlgorithmId | str) -> RunFn:
    """Run procedure for *algorithm*, including the approximate wrappers."""
    algorithm = AlgorithmId(algorithm)
    if algorithm in RUNNERS:
        return RUNNERS[algorithm]
    from greedy.approximate import APPROXIMATE_RUNNERS  # noqa: PLC0415
    return APPROXIMATE_RUNNERS[algorithm]


def run(
    algorithm: AlgorithmId | str,
    space: SpaceLp,
    dictionary: Dictionary,
    f: np.ndarray,
    m_max: int,
    schedules: Optional[RunSchedules] = None,
    options: Optional[RunOptions] = None,
) -> Trace:
    return runner(algorithm)(space, dictionary, f, m_max, schedules, options)


def constant_weakness(t: float) -> RunSchedules:
    """Schedules with τ = {t} and the remaining defaults."""
    return RunSchedules(weakness=constant(ScheduleRole.WEAKNESS, t))
