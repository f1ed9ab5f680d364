"""
Experiment orchestration: turns an :class:`ExperimentConfig` into a :class:`Report`.

Experiment kinds
----------------
  rate_sweep          residual norms against closed-form rate bounds, fitted exponents
  convergence_probe   terminal residuals under several weakness schedules
  lebesgue            WCGA after S(m) iterations against ε and σ_K, exponential phase
  recovery            QOGA exact-recovery table and the D-seminorm constant 13.5
  noise_approx        noisy data and approximate algorithms against their bounds
  lemmas              sequence-lemma simulations
  bilinear            rank-one greedy against the singular-value tail

Each replication draws from its own seed stream (root seed, experiment
seed, experiment id and replication index), so replications can run on a
thread pool while the report stays ordered and reproducible.  A replication
that raises is logged with its traceback and recorded with status "error";
the others still run.

Checks with an explicit constant are hard pass/fail; existential ones are
trend checks and descriptive ones are reported only.
"""

from __future__ import annotations

import hashlib
import logging
import math
import traceback
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from greedy.algorithms import MONOTONE, AlgorithmId, RunOptions, RunSchedules, constant_weakness, runner
from greedy.approximate import APPROXIMATE_RUNNERS, make_noise, run_with_noise, wrap_approximate
from greedy.bilinear import pga_rank_one, schmidt_expansion
from greedy.bounds import (
    EXISTENTIAL,
    EXPLICIT,
    BoundContext,
    BoundSpec,
    exponential_phase_constant,
    get_bound,
    lebesgue_iterations,
    qoga_recovery_limit,
    threshold_iterations,
)
from greedy.cache import ConstantCache
from greedy.config import ExperimentConfig, LebesgueConfig, ScheduleConfig
from greedy.constants import StructuralConstants, structural_constants
from greedy.dictionary import (
    Dictionary,
    coherence,
    d_seminorm,
    make_canonical,
    make_coherent,
    make_haar_grid,
    make_random_unit,
    make_trig_grid,
    sample_A1,
    sample_sparse,
)
from greedy.errors import DimensionMismatchError
from greedy.fileio import read_dictionary, read_signal
from greedy.lemmas import LIMIT, RecursionSpec, scaling_trend, simulate_recursion
from greedy.oracle import best_m_term, best_m_term_seminorm, check_dominance, check_theorem_bound
from greedy.schedules import ScheduleRole
from greedy.space import SpaceLp, lp_norm, smoothness_params
from greedy.trace import StopReason, Trace

logger = logging.getLogger(__name__)

ProgressCallback = Callable[[str, int, int], None]   # (message, current, total)

Experiment = ExperimentConfig

DESCRIPTIVE = "descriptive"
_HARD_KINDS = (EXPLICIT, LIMIT)

_MIN_FIT_POINTS    = 8
_EXACT_TOL         = 1e-9
_RECOVERY_TOL      = 1e-8
_BILINEAR_TOL      = 1e-8
_SEMINORM_CONSTANT = 13.5
_THRESHOLD_SPREAD  = 2.0
_CONVERGED_RATIO   = 0.1

_APPROXIMATE_INNER = {
    AlgorithmId.AWCGA:  AlgorithmId.WCGA,
    AlgorithmId.AWGAFR: AlgorithmId.WGAFR,
    AlgorithmId.ARWRGA: AlgorithmId.RWRGA,
}


# ---------------------------------------------------------------------------
# Report types
# ---------------------------------------------------------------------------

@dataclass
class Verdict:
    """One check; ``value`` is the worst observed quantity (larger is worse)."""
    rule:     str
    bound_id: str
    kind:     str                    # explicit | existential | limit | descriptive
    label:    str
    passed:   bool
    value:    float
    count:    int = 1
    failures: int = 0
    detail:   Dict[str, Any] = field(default_factory=dict)

    @property
    def hard(self) -> bool:
        return self.kind in _HARD_KINDS

    def to_dict(self) -> dict:
        return {
            "rule":     self.rule,
            "bound_id": self.bound_id,
            "kind":     self.kind,
            "hard":     self.hard,
            "label":    self.label,
            "passed":   self.passed,
            "value":    self.value,
            "count":    self.count,
            "failures": self.failures,
            "detail":   dict(self.detail),
        }


@dataclass
class ReplicationResult:
    index:         int
    seed:          int
    status:        str = "ok"                      # "ok" | "error"
    metrics:       Dict[str, Any] = field(default_factory=dict)
    checks:        List[Verdict] = field(default_factory=list)
    traces:        Dict[str, Trace] = field(default_factory=dict)
    error_message: str = ""

    def check(self, rule: str, bound_id: str, kind: str, label: str, passed: bool, value: float, **detail) -> None:
        self.checks.append(Verdict(rule, bound_id, kind, label, bool(passed), float(value),
                                   failures=0 if passed else 1, detail=detail))

    def to_dict(self) -> dict:
        return {
            "index":         self.index,
            "seed":          self.seed,
            "status":        self.status,
            "error_message": self.error_message,
            "metrics":       self.metrics,
            "checks":        [c.to_dict() for c in self.checks],
            "traces":        {label: t.to_dict() for label, t in self.traces.items()},
        }


def aggregate_verdicts(results: Sequence[ReplicationResult]) -> List[Verdict]:
    """Merge the checks of successful replications by (rule, bound, label), keeping the worst value."""
    merged: Dict[Tuple[str, str, str], Verdict] = {}
    for res in results:
        if res.status != "ok":
            continue
        for v in res.checks:
            key = (v.rule, v.bound_id, v.label)
            cur = merged.get(key)
            if cur is None:
                merged[key] = replace(v, detail=dict(v.detail))
                continue
            cur.count += v.count
            cur.failures += v.failures
            cur.passed = cur.passed and v.passed
            if not math.isnan(v.value) and (math.isnan(cur.value) or v.value > cur.value):
                cur.value = v.value
                cur.detail = dict(v.detail)
    return list(merged.values())


@dataclass
class Report:
    experiment:   str
    kind:         str
    config:       Dict[str, Any] = field(default_factory=dict)
    replications: List[ReplicationResult] = field(default_factory=list)
    verdicts:     List[Verdict] = field(default_factory=list)
    tables:       Dict[str, List[dict]] = field(default_factory=dict)
    summary:      Dict[str, Any] = field(default_factory=dict)

    @property
    def errors(self) -> int:
        return sum(1 for r in self.replications if r.status != "ok")

    @property
    def hard_violation(self) -> bool:
        return any(v.hard and not v.passed for v in self.verdicts)

    @property
    def passed(self) -> bool:
        return self.errors == 0 and not self.hard_violation

    def traces(self) -> Iterator[Tuple[int, str, Trace]]:
        for res in self.replications:
            for label, trace in res.traces.items():
                yield res.index, label, trace

    def finalize(self) -> "Report":
        self.verdicts = aggregate_verdicts(self.replications)
        hard = [v for v in self.verdicts if v.hard]
        trend = [v for v in self.verdicts if v.kind == EXISTENTIAL]
        self.summary.update({
            "replications":    len(self.replications),
            "errors":          self.errors,
            "hard_checks":     len(hard),
            "hard_failures":   sum(1 for v in hard if not v.passed),
            "trend_checks":    len(trend),
            "trend_failures":  sum(1 for v in trend if not v.passed),
            "passed":          self.passed,
        })
        return self

    def to_dict(self) -> dict:
        return {
            "experiment":     self.experiment,
            "kind":           self.kind,
            "passed":         self.passed,
            "hard_violation": self.hard_violation,
            "summary":        self.summary,
            "verdicts":       [v.to_dict() for v in self.verdicts],
            "tables":         self.tables,
            "config":         self.config,
            "replications":   [r.to_dict() for r in self.replications],
        }


# ---------------------------------------------------------------------------
# Exponent fit
# ---------------------------------------------------------------------------

@dataclass
class ExponentFit:
    slope:          float
    stderr:         float
    residual:       float                # ‖log‖f_m‖ − fitted line‖₂ over the window
    points:         int
    exact_recovery: bool = False

    def to_dict(self) -> dict:
        return {
            "slope":          self.slope,
            "stderr":         self.stderr,
            "residual":       self.residual,
            "points":         self.points,
            "exact_recovery": self.exact_recovery,
        }


def fit_exponent(trace: Trace, window: Optional[Tuple[int, int]] = None) -> ExponentFit:
    """
    Least-squares slope of log‖f_m‖ against log m.

    The default window is the last half of the iterations, m ∈ [M/2, M].
    A zero residual inside the window is reported as exact recovery
    (slope NaN) instead of a fit.
    """
    norms = trace.residual_norms()
    last = len(norms) - 1
    lo, hi = window if window is not None else (max(1, last // 2), last)
    if lo < 1 or hi > last or hi < lo:
        raise ValueError(f"window [{lo}, {hi}] outside the iterations 1..{last}")
    points = hi - lo + 1
    if points < _MIN_FIT_POINTS:
        raise ValueError(f"exponent fit needs at least {_MIN_FIT_POINTS} points, got {points}")
    y = norms[lo:hi + 1]
    if np.any(y <= 0.0):
        return ExponentFit(math.nan, math.nan, math.nan, points, exact_recovery=True)
    x = np.log(np.arange(lo, hi + 1, dtype=float))
    ly = np.log(y)
    xc = x - x.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (ly - ly.mean())) / sxx
    resid = ly - ly.mean() - slope * xc
    rss = float(resid @ resid)
    stderr = math.sqrt(rss / (points - 2) / sxx)
    return ExponentFit(slope, stderr, math.sqrt(rss), points)


# ---------------------------------------------------------------------------
# Seeds and builders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SeedStreams:
    """Named streams: seed(i, name) depends only on the root entropy, the experiment id, i and name."""
    entropy:    Tuple[int, ...]
    experiment: str

    def seed(self, replication: int, name: str = "") -> int:
        digest = hashlib.sha256(f"{self.experiment}/{replication}/{name}".encode()).digest()
        words = [int.from_bytes(digest[i:i + 4], "little") for i in range(0, 16, 4)]
        root = [int(e) % 2**63 for e in self.entropy]
        ss = np.random.SeedSequence(root + words)
        return int(ss.generate_state(1, dtype=np.uint64)[0])


def build_space(exp: Experiment) -> SpaceLp:
    if exp.space is None:
        raise ValueError(f"experiment {exp.id!r} has no space")
    return SpaceLp(dim=exp.space.dim, p=exp.space.p)


def build_dictionary(exp: Experiment, space: SpaceLp, seed: int, mix: Optional[float] = None) -> Dictionary:
    cfg = exp.dictionary
    if cfg.kind == "canonical":
        return make_canonical(space)
    if cfg.kind == "random":
        return make_random_unit(space, cfg.size, seed)
    if cfg.kind == "trig":
        return make_trig_grid(space, cfg.frequencies)
    if cfg.kind == "haar":
        return make_haar_grid(space, cfg.levels)
    if cfg.kind == "coherent":
        return make_coherent(space, cfg.size, cfg.mix if mix is None else mix, seed)
    dictionary = read_dictionary(cfg.path)
    if dictionary.space.dim != space.dim or dictionary.space.p != space.p:
        raise DimensionMismatchError(f"{cfg.path} holds a dictionary in {dictionary.space}, experiment space is {space}")
    return dictionary


def build_schedules(exp: Experiment, weakness_cfg: Optional[ScheduleConfig] = None) -> RunSchedules:
    s = exp.schedules
    kwargs: Dict[str, Any] = {
        "weakness":  (weakness_cfg or s.weakness).build(ScheduleRole.WEAKNESS),
        "threshold": s.threshold,
        "b":         s.b,
    }
    optional = (
        ("relaxation",   s.relaxation,   ScheduleRole.RELAXATION),
        ("coefficients", s.coefficients, ScheduleRole.COEFFICIENTS),
        ("epsilon",      s.epsilon,      ScheduleRole.EPSILON),
        ("delta",        s.delta,        ScheduleRole.PERTURBATION),
        ("eta",          s.eta,          ScheduleRole.PERTURBATION),
    )
    for name, cfg, role in optional:
        if cfg is not None:
            kwargs[name] = cfg.build(role)
    return RunSchedules(**kwargs)


def draw_signal(exp: Experiment, dictionary: Dictionary, seed: int) -> Tuple[np.ndarray, float]:
    """(f, A) with f/A ∈ A_1(D); A is the configured scale for signals read from a file."""
    data = exp.data
    if data.generator == "file":
        return dictionary.space.element(read_signal(data.path)), data.scale
    sparsity = min(data.sparsity, dictionary.size)
    if data.generator == "sparse":
        f, rep = sample_sparse(dictionary, sparsity, seed)
    else:
        f, rep = sample_A1(dictionary, sparsity, seed)
    return data.scale * f, data.scale * rep.l1_mass


def bound_context(
    exp: Experiment,
    space: SpaceLp,
    schedules: RunSchedules,
    scale: float,
    initial_norm: float,
    epsilon: float = 0.0,
) -> BoundContext:
    s = None
    coef = exp.schedules.coefficients
    if coef is not None and coef.kind == "formula" and "s" in coef.params:
        s = coef.params["s"]
    return BoundContext(
        params=smoothness_params(space),
        weakness=schedules.weakness,
        scale=scale,
        epsilon=epsilon,
        b=schedules.b,
        s=s,
        initial_norm=initial_norm,
    )


def _applies(bound: BoundSpec, algorithm: str) -> bool:
    return not bound.algorithms or algorithm in bound.algorithms


def _trace_metrics(trace: Trace) -> Dict[str, Any]:
    return {
        "iterations":  trace.iterations,
        "final_norm":  trace.final_norm,
        "final_ratio": trace.final_norm / trace.initial_norm if trace.initial_norm > 0.0 else 0.0,
        "stop_reason": trace.stop_reason.value if trace.stop_reason else None,
        "monotone":    trace.is_monotone(),
        "flags":       list(trace.flags),
    }


def exponential_rate(norms: np.ndarray, epsilon: float, K: int, r: float, q_conj: float) -> Optional[float]:
    """
    Largest c with ‖f_m‖ ≤ ‖f_k‖·exp(−c(m − k)/K^{rq'}) + 2ε for every k < m
    inside the run (pairs with ‖f_m‖ ≤ 2ε hold for any c).
    """
    scale = float(K) ** (r * q_conj)
    excess = norms - 2.0 * epsilon
    best = math.inf
    for k in range(len(norms) - 1):
        if norms[k] <= 0.0:
            break
        m = np.arange(k + 1, len(norms))
        ok = excess[k + 1:] > 0.0
        if not np.any(ok):
            continue
        c = -np.log(excess[k + 1:][ok] / norms[k]) * scale / (m[ok] - k)
        best = min(best, float(c.min()))
    return None if math.isinf(best) else best


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------

class ExperimentRunner:
    """
    Run experiments of every kind.

    Parameters
    ----------
    seed      : int   root seed shared by all experiments of a batch.
    workers   : int   replications run on a thread pool of this size (1 = in order).
    cache     : optional :class:`ConstantCache` for structural constants and σ_m.
    progress  : optional callback(message, current, total).
    """

    def __init__(
        self,
        seed:     int = 0,
        workers:  int = 1,
        cache:    Optional[ConstantCache] = None,
        progress: Optional[ProgressCallback] = None,
    ) -> None:
        if workers < 1:
            raise ValueError("workers must be ≥ 1")
        self.seed     = seed
        self.workers  = workers
        self.cache    = cache
        self.progress = progress

    # ------------------------------------------------------------------
    # Public API
    # ------------------------------------------------------------------

    def run(self, exp: Experiment) -> Report:
        handlers = {
            "rate_sweep":        self.rate_sweep,
            "convergence_probe": self.convergence_probe,
            "lebesgue":          self.lebesgue_experiment,
            "recovery":          self.recovery_table,
            "noise_approx":      self.noise_and_approx_study,
            "lemmas":            self.lemma_suite,
            "bilinear":          self.bilinear_study,
        }
        logger.info("Experiment %s (%s)", exp.id, exp.kind)
        return handlers[exp.kind](exp)

    def run_all(self, experiments: Sequence[Experiment]) -> List[Report]:
        return [self.run(exp) for exp in experiments]

    def streams(self, exp: Experiment) -> SeedStreams:
        return SeedStreams((self.seed, exp.seed), exp.id)

    # ------------------------------------------------------------------
    # Rate sweep
    # ------------------------------------------------------------------

    def rate_sweep(self, exp: Experiment) -> Report:
        space = build_space(exp)
        streams = self.streams(exp)
        dictionary = build_dictionary(exp, space, streams.seed(-1, "dictionary"))
        schedules = build_schedules(exp)
        bounds = [get_bound(b) for b in exp.bounds]
        params = smoothness_params(space)

        def body(res: ReplicationResult) -> None:
            f, scale = draw_signal(exp, dictionary, streams.seed(res.index, "signal"))
            sigma = self._sigma_profile(space, dictionary, f, exp.oracle_m) if exp.oracle_m else None
            for alg in exp.algorithms:
                trace = self._run_one(exp, alg, space, dictionary, f, schedules, streams.seed(res.index, alg))
                res.traces[alg] = trace
                metrics = _trace_metrics(trace)
                ctx = bound_context(exp, space, schedules, scale, trace.initial_norm)
                for bound in bounds:
                    if _applies(bound, alg):
                        self._bound_check(res, trace, bound, ctx, alg)
                if sigma is not None:
                    self._dominance_check(res, trace, sigma, alg)
                if trace.iterations >= 2 * _MIN_FIT_POINTS:
                    metrics["exponent"] = fit_exponent(trace).to_dict()
                if AlgorithmId(alg) is AlgorithmId.IA_EPS and trace.iterations > 0:
                    mass = float(trace.records[-1].extra["convex_mass"])
                    metrics["coefficient_mass"] = mass
                    res.check("convex_mass", "ia_convex_combination", EXPLICIT, alg, mass == 1.0, mass)
                res.metrics[alg] = metrics
                if AlgorithmId(alg) in (AlgorithmId.DGART, AlgorithmId.CGAT) and exp.threshold_grid:
                    self._threshold_counts(exp, res, alg, space, dictionary, f, schedules, params, streams)

        report = self._report(exp, self._replicate(exp, exp.replications, body))
        report.tables["exponents"] = self._exponent_table(report, exp.algorithms)
        return report

    def _threshold_counts(self, exp, res, alg, space, dictionary, f, schedules, params, streams) -> None:
        constants = []
        stopped = True
        for delta in exp.threshold_grid:
            sched = replace(schedules, threshold=delta)
            trace = self._run_one(exp, alg, space, dictionary, f, sched, streams.seed(res.index, f"{alg}/{delta}"))
            res.traces[f"{alg}-delta{delta:g}"] = trace
            stopped &= trace.stop_reason in (StopReason.RESIDUAL_BELOW_DELTA_F, StopReason.THRESHOLD_EMPTY)
            constants.append(trace.iterations / threshold_iterations(params, delta))
        spread = max(constants) / min(constants) if min(constants) > 0.0 else math.inf
        res.metrics[f"{alg}-threshold"] = {"deltas": list(exp.threshold_grid), "constants": constants}
        res.check("threshold_count", "threshold_iterations", EXISTENTIAL, alg,
                  stopped and spread <= _THRESHOLD_SPREAD, spread, stopped=stopped, constants=constants)

    def _exponent_table(self, report: Report, algorithms: Sequence[str]) -> List[dict]:
        rows = []
        for alg in algorithms:
            slopes = [r.metrics[alg]["exponent"]["slope"] for r in report.replications
                      if r.status == "ok" and "exponent" in r.metrics.get(alg, {})]
            slopes = [s for s in slopes if not math.isnan(s)]
            if slopes:
                rows.append({
                    "algorithm": alg,
                    "fits":      len(slopes),
                    "median":    float(np.median(slopes)),
                    "max":       float(np.max(slopes)),
                })
        return rows

    # ------------------------------------------------------------------
    # Convergence probe
    # ------------------------------------------------------------------

    def convergence_probe(self, exp: Experiment) -> Report:
        space = build_space(exp)
        streams = self.streams(exp)
        dictionary = build_dictionary(exp, space, streams.seed(-1, "dictionary"))
        grid = list(exp.weakness_grid) or [exp.schedules.weakness]
        schedule_sets = [build_schedules(exp, cfg) for cfg in grid]

        def body(res: ReplicationResult) -> None:
            f, _ = draw_signal(exp, dictionary, streams.seed(res.index, "signal"))
            for schedules in schedule_sets:
                tau = schedules.weakness
                tag = str(tau)
                weak_sum = float(np.sum(tau.take(exp.m_max) / np.arange(1, exp.m_max + 1)))
                for alg in exp.algorithms:
                    trace = self._run_one(exp, alg, space, dictionary, f, schedules, streams.seed(res.index, alg))
                    label = f"{alg}/{tag}"
                    res.traces[label] = trace
                    metrics = _trace_metrics(trace)
                    metrics["weakness_sum"] = weak_sum
                    metrics["stalled"] = trace.stop_reason is StopReason.STALLED
                    res.metrics[label] = metrics
                    res.check("terminal_residual", "weakness_divergence", DESCRIPTIVE, label,
                              metrics["final_ratio"] < _CONVERGED_RATIO, metrics["final_ratio"],
                              weakness_sum=weak_sum, stop_reason=metrics["stop_reason"])
                    if AlgorithmId(alg) in MONOTONE and tau.kind.value == "constant":
                        res.check("monotone", "monotone_residual", EXPLICIT, label,
                                  metrics["monotone"], float(np.max(np.diff(trace.residual_norms()), initial=0.0)))

        report = self._report(exp, self._replicate(exp, exp.replications, body))
        rows = []
        for res in report.replications:
            for label, m in res.metrics.items():
                rows.append({"replication": res.index, "run": label, "weakness_sum": m["weakness_sum"],
                             "final_ratio": m["final_ratio"], "stop_reason": m["stop_reason"],
                             "stalled": m["stalled"]})
        report.tables["terminal"] = rows
        return report

    # ------------------------------------------------------------------
    # Lebesgue-type inequalities
    # ------------------------------------------------------------------

    def lebesgue_experiment(self, exp: Experiment) -> Report:
        lc: LebesgueConfig = exp.lebesgue
        space = build_space(exp)
        streams = self.streams(exp)
        dictionary = build_dictionary(exp, space, streams.seed(-1, "dictionary"))
        constants = self._constants(dictionary, lc)
        params = smoothness_params(space)
        schedules = build_schedules(exp)
        t = schedules.weakness.at(1)
        U, V, K = constants.U.value, constants.V.value, lc.K
        steps = [max(K, lebesgue_iterations(params, U, K, lc.r, c)) for c in lc.c_grid]
        c1 = exponential_phase_constant(params, t, V)
        logger.info("%s: U=%.4g V=%.4g, S over the C grid = %s, c1=%.4g", exp.id, U, V, steps, c1)

        def body(res: ReplicationResult) -> None:
            f_eps, _ = sample_sparse(dictionary, K, streams.seed(res.index, "signal"))
            noise = make_noise(space, lc.epsilon, streams.seed(res.index, "noise"))
            f0 = f_eps + noise
            eps = lp_norm(noise, space.p)
            sigma_k = self._sigma(space, dictionary, f0, K)
            for alg in exp.algorithms:
                trace = self._run_one(exp, alg, space, dictionary, f0, schedules,
                                      streams.seed(res.index, alg), m_max=max(steps))
                res.traces[alg] = trace
                norms = trace.residual_norms()
                rows = []
                for c, s in zip(lc.c_grid, steps):
                    r_s = float(norms[min(s, len(norms) - 1)])
                    rows.append({
                        "C":         c,
                        "S":         s,
                        "residual":  r_s,
                        "vs_sigma":  r_s / sigma_k if sigma_k > 0.0 else (0.0 if r_s <= _EXACT_TOL else math.inf),
                        "vs_eps":    r_s / eps if eps > 0.0 else None,
                    })
                rate = exponential_rate(norms, eps, K, lc.r, params.conjugate)
                res.metrics[alg] = {**_trace_metrics(trace), "sigma_K": sigma_k, "epsilon": eps,
                                    "steps": rows, "fitted_c": rate, "c1": c1}
                if rate is not None:
                    res.check("exponential_phase", "exponential_phase", EXISTENTIAL, alg,
                              rate > 0.0, 1.0 / rate if rate > 0.0 else math.inf, fitted_c=rate, c1=c1)
                if lc.epsilon == 0.0 and constants.coherence <= 1e-12:
                    r_k = float(norms[min(K, len(norms) - 1)])
                    res.check("exact_recovery", "sparse_exact", EXPLICIT, alg,
                              r_k <= _EXACT_TOL * max(1.0, trace.initial_norm), r_k, K=K)

        report = self._report(exp, self._replicate(exp, exp.replications, body))
        report.summary["constants"] = constants.to_dict()
        report.summary["c1"] = c1
        rows = []
        for alg in exp.algorithms:
            for j, (c, s) in enumerate(zip(lc.c_grid, steps)):
                ratios = [r.metrics[alg]["steps"][j]["vs_sigma"] for r in report.replications
                          if r.status == "ok" and alg in r.metrics]
                if ratios:
                    rows.append({"algorithm": alg, "C": c, "S": s, "observed_constant": float(max(ratios))})
        report.tables["lebesgue"] = rows
        observed = [row["observed_constant"] for row in rows if math.isfinite(row["observed_constant"])]
        report.summary["smallest_observed_constant"] = min(observed) if observed else None
        return report

    # ------------------------------------------------------------------
    # Exact recovery
    # ------------------------------------------------------------------

    def recovery_table(self, exp: Experiment) -> Report:
        rc = exp.recovery
        space = build_space(exp)
        streams = self.streams(exp)
        if exp.dictionary.kind == "coherent":
            cells = [(mix, build_dictionary(exp, space, streams.seed(-1, f"dictionary/{mix}"), mix=mix))
                     for mix in rc.mixes]
        else:
            cells = [(None, build_dictionary(exp, space, streams.seed(-1, "dictionary")))]
        measured = [(mix, d, coherence(d)) for mix, d in cells]
        for mix, d, M in measured:
            logger.info("%s: dictionary %s, coherence %.4g", exp.id, d.label, M)

        def body(res: ReplicationResult) -> None:
            for c, (mix, dictionary, M) in enumerate(measured):
                cell = dictionary.label if mix is None else f"mix={mix:g}"
                for t in rc.weakness:
                    limit = qoga_recovery_limit(M, t)
                    for S in rc.sparsities:
                        if S > dictionary.size:
                            continue
                        f, _ = sample_sparse(dictionary, S, streams.seed(res.index, f"{c}/{t}/{S}"))
                        trace = self._qoga(space, dictionary, f, S, t, streams.seed(res.index, f"run/{c}/{t}/{S}"))
                        label = f"{cell}/t={t:g}/S={S}"
                        if res.index == 0:
                            res.traces[label] = trace
                        residual = trace.final_norm
                        success = residual <= _RECOVERY_TOL
                        res.metrics[label] = {"M": M, "limit": limit, "residual": residual, "success": success}
                        kind = EXPLICIT if S < limit else DESCRIPTIVE
                        res.check("exact_recovery", "qoga_recovery_limit", kind, label, success, residual,
                                  M=M, limit=limit)
                if rc.lebesgue:
                    self._seminorm_checks(res, space, dictionary, M, cell, rc.seminorm_m, streams, c)

        report = self._report(exp, self._replicate(exp, rc.trials, body))
        rows: Dict[str, dict] = {}
        for res in report.replications:
            if res.status != "ok":
                continue
            for label, m in res.metrics.items():
                if "success" not in m:
                    continue
                row = rows.setdefault(label, {"cell": label, "M": m["M"], "limit": m["limit"],
                                              "below_limit": None, "trials": 0, "successes": 0})
                row["trials"] += 1
                row["successes"] += int(m["success"])
        for label, row in rows.items():
            S = int(label.rsplit("S=", 1)[1])
            row["below_limit"] = S < row["limit"]
            row["rate"] = row["successes"] / row["trials"]
        report.tables["recovery"] = list(rows.values())
        return report

    def _seminorm_checks(self, res, space, dictionary, M, cell, m_cap, streams, c) -> None:
        top = min(m_cap, dictionary.size)
        if M > 0.0:
            top = min(top, math.floor(1.0 / (3.0 * M)))
        if top < 1:
            return
        rng = np.random.default_rng(streams.seed(res.index, f"seminorm/{c}"))
        f = rng.standard_normal(space.dim)
        f /= lp_norm(f, space.p)
        trace = self._qoga(space, dictionary, f, top, 1.0, streams.seed(res.index, f"seminorm-run/{c}"))
        for m in range(1, top + 1):
            rec = trace.records[min(m, trace.iterations)]
            if rec.coefficients is None:
                break
            residual = f - rec.coefficients @ dictionary.elements
            lhs = d_seminorm(dictionary, residual)
            sigma = best_m_term_seminorm(dictionary, f, m).value
            ratio = lhs / sigma if sigma > 0.0 else (0.0 if lhs <= _EXACT_TOL else math.inf)
            res.check("seminorm_lebesgue", "qoga_seminorm", EXPLICIT, f"{cell}/m={m}",
                      lhs <= _SEMINORM_CONSTANT * sigma + _EXACT_TOL, ratio, constant=_SEMINORM_CONSTANT)

    @staticmethod
    def _qoga(space, dictionary, f, m, t, seed) -> Trace:
        alg = AlgorithmId.QOGA if t >= 1.0 else AlgorithmId.WQOGA
        return runner(alg)(space, dictionary, f, m, constant_weakness(t), RunOptions(seed=seed))

    # ------------------------------------------------------------------
    # Noise and approximate algorithms
    # ------------------------------------------------------------------

    def noise_and_approx_study(self, exp: Experiment) -> Report:
        space = build_space(exp)
        streams = self.streams(exp)
        dictionary = build_dictionary(exp, space, streams.seed(-1, "dictionary"))
        schedules = build_schedules(exp)
        explicit = [get_bound(b) for b in exp.bounds]

        def bounds_for(alg: str) -> List[BoundSpec]:
            if explicit:
                return [b for b in explicit if _applies(b, alg)]
            approximate = AlgorithmId(alg) in APPROXIMATE_RUNNERS
            return [get_bound("wbga_approximate" if approximate else "wbga_noisy")]

        def body(res: ReplicationResult) -> None:
            f_clean, scale = draw_signal(exp, dictionary, streams.seed(res.index, "signal"))
            for eps in exp.data.noise:
                noise = make_noise(space, eps, streams.seed(res.index, f"noise/{eps}"))
                for alg in exp.algorithms:
                    fn = self._runner(exp, alg, streams.seed(res.index, f"perturb/{alg}"))
                    options = RunOptions(tie_rule=exp.tie_rule, seed=streams.seed(res.index, alg))
                    trace = run_with_noise(fn, space, dictionary, f_clean, noise, exp.m_max, schedules, options)
                    label = f"{alg}/eps={eps:g}"
                    res.traces[label] = trace
                    metrics = _trace_metrics(trace)
                    metrics["epsilon"] = eps
                    res.metrics[label] = metrics
                    ctx = bound_context(exp, space, schedules, scale, trace.initial_norm,
                                        epsilon=trace.metadata["epsilon"])
                    for bound in bounds_for(alg):
                        self._bound_check(res, trace, bound, ctx, label)
                    res.check("terminal_residual", "convergence", DESCRIPTIVE, label,
                              metrics["final_ratio"] < _CONVERGED_RATIO, metrics["final_ratio"])

        report = self._report(exp, self._replicate(exp, exp.replications, body))
        report.tables["ratios"] = [
            {"run": v.label, "bound": v.bound_id, "kind": v.kind, "max_ratio": v.value, "passed": v.passed}
            for v in report.verdicts if v.rule == "rate_bound"
        ]
        return report

    # ------------------------------------------------------------------
    # Sequence lemmas
    # ------------------------------------------------------------------

    def lemma_suite(self, exp: Experiment) -> Report:
        streams = self.streams(exp)

        def body(res: ReplicationResult) -> None:
            lc = exp.lemmas[res.index]
            spec = RecursionSpec(lc.lemma, dict(lc.params), lc.horizon, lc.phi)
            adversarial = simulate_recursion(spec, adversarial=True)
            randomized = simulate_recursion(spec, adversarial=False,
                                            seed=streams.seed(res.index, lc.lemma), replications=lc.replications)
            res.metrics[lc.lemma] = {
                "spec":        spec.to_dict(),
                "adversarial": adversarial.to_dict(),
                "randomized":  randomized.to_dict(),
            }
            for mode, rep in (("adversarial", adversarial), ("randomized", randomized)):
                res.check(f"lemma_{mode}", lc.lemma, rep.kind, lc.lemma, rep.passed, rep.max_ratio,
                          argmax=rep.argmax, violations=rep.violations)
            if adversarial.kind == EXISTENTIAL:
                trend = scaling_trend(spec)
                res.metrics[lc.lemma]["scaling"] = trend
                scaled = trend["scaled_constants"]
                res.check("scaling_trend", lc.lemma, EXISTENTIAL, lc.lemma, trend["passed"],
                          max(scaled) / scaled[0] if scaled[0] > 0.0 else math.inf)

        return self._report(exp, self._replicate(exp, len(exp.lemmas), body))

    # ------------------------------------------------------------------
    # Bilinear approximation
    # ------------------------------------------------------------------

    def bilinear_study(self, exp: Experiment) -> Report:
        bc = exp.bilinear
        streams = self.streams(exp)

        def body(res: ReplicationResult) -> None:
            rows, cols = bc.shapes[res.index // bc.count]
            rng = np.random.default_rng(streams.seed(res.index, "matrix"))
            matrix = rng.standard_normal((rows, cols))
            m = bc.m or min(rows, cols)
            result = pga_rank_one(matrix, m, seed=streams.seed(res.index, "power"))
            label = f"PGA_BILINEAR-{rows}x{cols}"
            res.traces[label] = result.trace
            s = np.array([term.c for term in schmidt_expansion(matrix)])
            tails = np.sqrt(np.cumsum((s ** 2)[::-1])[::-1])
            tails = np.append(tails, 0.0)
            norms = result.trace.residual_norms()
            k = min(len(norms), len(tails))
            frob = float(np.linalg.norm(matrix))
            deviation = float(np.max(np.abs(norms[:k] - tails[:k]))) / frob
            res.metrics[label] = {"m": m, "rank": int(s.size), "max_relative_deviation": deviation}
            res.check("svd_tail", "svd_tail", EXPLICIT, f"{rows}x{cols}", deviation <= _BILINEAR_TOL, deviation)

        return self._report(exp, self._replicate(exp, len(bc.shapes) * bc.count, body))

    # ------------------------------------------------------------------
    # Internal
    # ------------------------------------------------------------------

    def _runner(self, exp: Experiment, alg: str, seed: int):
        algorithm = AlgorithmId(alg)
        adaptive = exp.schedules.adaptive_scale
        if algorithm in _APPROXIMATE_INNER and adaptive is not None:
            return wrap_approximate(_APPROXIMATE_INNER[algorithm], adaptive_scale=adaptive, seed=seed)
        return runner(algorithm)

    def _run_one(self, exp, alg, space, dictionary, f, schedules, seed, m_max: Optional[int] = None) -> Trace:
        options = RunOptions(tie_rule=exp.tie_rule, seed=seed)
        fn = self._runner(exp, alg, seed)
        return fn(space, dictionary, f, m_max or exp.m_max, schedules, options)

    @staticmethod
    def _bound_check(res: ReplicationResult, trace: Trace, bound: BoundSpec, ctx: BoundContext, label: str) -> None:
        check = check_theorem_bound(trace, bound, ctx)
        res.check("rate_bound", bound.id, bound.kind, label, check.passed, check.max_ratio,
                  argmax=check.argmax, first_violation=check.first_violation,
                  fitted_constant=check.fitted_constant, growth=check.growth)

    @staticmethod
    def _dominance_check(res: ReplicationResult, trace: Trace, sigma: np.ndarray, label: str) -> None:
        norms = trace.residual_norms()
        k = min(len(norms), len(sigma))
        gap = float(np.max(sigma[:k] - norms[:k]))
        first = check_dominance(trace, sigma)
        res.check("oracle_dominance", "sigma_m", EXPLICIT, label, first is None, gap, first_violation=first)

    def _sigma(self, space: SpaceLp, dictionary: Dictionary, f: np.ndarray, m: int) -> float:
        if self.cache is not None:
            hit = self.cache.get_sigma(dictionary.fingerprint, f, m)
            if hit is not None:
                return hit
        result = best_m_term(space, dictionary, f, m)
        if self.cache is not None:
            self.cache.put_sigma(dictionary.fingerprint, f, m, result)
        return result.value

    def _sigma_profile(self, space: SpaceLp, dictionary: Dictionary, f: np.ndarray, m_max: int) -> np.ndarray:
        values = np.array([self._sigma(space, dictionary, f, m) for m in range(m_max + 1)])
        return np.minimum.accumulate(values)

    def _constants(self, dictionary: Dictionary, lc: LebesgueConfig) -> StructuralConstants:
        params = {"K": lc.K, "depth": lc.depth, "r": lc.r, "resolution": lc.resolution}
        if self.cache is not None:
            hit = self.cache.get_constants(dictionary.fingerprint, **params)
            if hit is not None:
                return hit
        constants = structural_constants(dictionary, lc.K, lc.depth, lc.r, lc.resolution)
        if self.cache is not None:
            self.cache.put_constants(dictionary.fingerprint, constants, **params)
        return constants

    def _one(self, exp: Experiment, index: int, body: Callable[[ReplicationResult], None]) -> ReplicationResult:
        res = ReplicationResult(index=index, seed=self.streams(exp).seed(index))
        try:
            body(res)
        except Exception as exc:   # noqa: BLE001
            msg = traceback.format_exc()
            logger.error("Error in %s replication %d:\n%s", exp.id, index, msg)
            res.status = "error"
            res.error_message = str(exc)
            res.checks = []
        return res

    def _announce(self, exp: Experiment, index: int, total: int, verb: str) -> None:
        logger.info("[%d/%d] %s: %s", index + 1, total, verb, exp.id)
        if self.progress:
            self.progress(f"{verb}: {exp.id}", index + 1, total)

    def _replicate(self, exp: Experiment, count: int, body: Callable[[ReplicationResult], None]) -> List[ReplicationResult]:
        if self.workers == 1 or count == 1:
            results = []
            for idx in range(count):
                self._announce(exp, idx, count, "Running")
                results.append(self._one(exp, idx, body))
            return results
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            futures = [pool.submit(self._one, exp, idx, body) for idx in range(count)]
            results = []
            for idx, fut in enumerate(futures):
                results.append(fut.result())
                self._announce(exp, idx, count, "Finished")
        return results

    def _report(self, exp: Experiment, results: List[ReplicationResult]) -> Report:
        report = Report(
            experiment=exp.id,
            kind=exp.kind,
            config=exp.model_dump(mode="json"),
            replications=results,
        )
        report.finalize()
        if report.errors:
            logger.warning("%s: %d replication(s) failed", exp.id, report.errors)
        for v in report.verdicts:
            if v.hard and not v.passed:
                logger.warning("%s: %s %s [%s] failed (%d of %d), worst %.6g",
                               exp.id, v.rule, v.bound_id, v.label, v.failures, v.count, v.value)
        return report


# ---------------------------------------------------------------------------
# Convenience wrappers
# ---------------------------------------------------------------------------

def rate_sweep(exp: Experiment, seed: int = 0, **kwargs) -> Report:
    return ExperimentRunner(seed, **kwargs).rate_sweep(exp)


def convergence_probe(exp: Experiment, seed: int = 0, **kwargs) -> Report:
    return ExperimentRunner(seed, **kwargs).convergence_probe(exp)


def lebesgue_experiment(exp: Experiment, seed: int = 0, **kwargs) -> Report:
    return ExperimentRunner(seed, **kwargs).lebesgue_experiment(exp)


def recovery_table(exp: Experiment, seed: int = 0, **kwargs) -> Report:
    return ExperimentRunner(seed, **kwargs).recovery_table(exp)


def noise_and_approx_study(exp: Experiment, seed: int = 0, **kwargs) -> Report:
    return ExperimentRunner(seed, **kwargs).noise_and_approx_study(exp)
