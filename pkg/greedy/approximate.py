"""
Approximate and noisy variants of the weak biorthogonal algorithms.

The wrappers AWCGA, AWGAFR and ARWRGA run the WCGA, WGAFR and RWRGA steps
with two kinds of controlled error:

  * the selection functional F_m is the exact norming functional of f_m,
    pushed off by random noise and renormalized, accepted only when
    F_m(f_m) ≥ (1 − δ_m)‖f_m‖ (the noise is halved until it is);
  * every approximant G_m is moved by Δ = η_m‖f − G_ref‖·u/‖u‖ for a random
    u inside the family the step optimizes over, so that
    ‖f − G_m‖ ≤ (1 + η_m)‖f − G_ref‖.

With δ_m = η_m = 0 no random numbers are drawn and the inner trace is
reproduced exactly.  ``reference_residual`` in a record's extras is the
high-precision value the perturbed one is measured against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Union

import numpy as np

from greedy.algorithms import (
    AlgorithmId,
    RunFn,
    RunOptions,
    RunSchedules,
    _drive,
    _RunState,
    _step_rwrga,
    _step_wcga,
    _step_wgafr,
    runner,
)
from greedy.dictionary import Dictionary, as_rng
from greedy.schedules import Schedule
from greedy.space import SmoothnessParams, SpaceLp, lp_norm, smoothness_params
from greedy.trace import Trace

logger = logging.getLogger(__name__)

_REJECTION_HALVINGS = 60

_INNER_STEPS = {
    AlgorithmId.WCGA:  (AlgorithmId.AWCGA, _step_wcga),
    AlgorithmId.WGAFR: (AlgorithmId.AWGAFR, _step_wgafr),
    AlgorithmId.RWRGA: (AlgorithmId.ARWRGA, _step_rwrga),
}


def biorthogonality_slack(params: SmoothnessParams, delta: float, eta: float, g_norm: float) -> float:
    """
    ε = inf_{λ>0} (δ + η + 2γ(λ‖G‖)^q)/λ in closed form.

    With a = δ + η and b = 2γ‖G‖^q the minimizer is λ* = (a/(b(q − 1)))^{1/q}
    and ε = a/λ* + bλ*^{q−1}.  ε = 0 when a = 0 or G = 0.
    """
    a = delta + eta
    b = 2.0 * params.gamma * g_norm ** params.q
    if a <= 0.0 or b <= 0.0:
        return 0.0
    lam = (a / (b * (params.q - 1.0))) ** (1.0 / params.q)
    return a / lam + b * lam ** (params.q - 1.0)


@dataclass
class ControlledPerturbation:
    """
    Error injector for one run.

    Either fixed schedules (``delta``, ``eta``) or the adaptive rule
    δ_m = η_{m+1} = scale · t_{m+1}^{q'} · min(1, ‖f_m‖^{q'}).
    """
    params:         SmoothnessParams
    rng:            np.random.Generator
    delta:          Optional[Schedule] = None
    eta:            Optional[Schedule] = None
    adaptive_scale: Optional[float] = None
    _functionals:   Dict[int, np.ndarray] = field(default_factory=dict)

    def _adaptive(self, state: _RunState, m: int, norm: float) -> float:
        t = state.schedules.weakness.at(m + 1)
        q_conj = self.params.conjugate
        return self.adaptive_scale * t ** q_conj * min(1.0, norm ** q_conj)

    def delta_at(self, state: _RunState, m: int) -> float:
        """δ_m; called while the state holds f_m."""
        if self.adaptive_scale is not None:
            return self._adaptive(state, m, state.residual_norm)
        return self.delta.at(max(m, 1)) if self.delta is not None else 0.0

    def eta_at(self, state: _RunState, m: int) -> float:
        if self.adaptive_scale is not None:
            return self._adaptive(state, m - 1, state.trace.records[m - 1].residual_norm)
        return self.eta.at(m) if self.eta is not None else 0.0

    # ----------------------------------------------------------------------

    def functional(self, state: _RunState, m: int) -> np.ndarray:
        cached = self._functionals.get(m)
        if cached is not None:
            return cached
        exact = state.exact_functional()
        delta = self.delta_at(state, m)
        norm = state.residual_norm
        if delta == 0.0 or norm == 0.0:
            self._functionals[m] = exact
            return exact

        p_dual = state.space.dual_exponent
        noise = self.rng.standard_normal(exact.shape)
        noise /= lp_norm(noise, p_dual)
        scale = 1.0
        chosen = exact
        for _ in range(_REJECTION_HALVINGS):
            cand = exact + scale * delta * noise
            cand = cand / lp_norm(cand, p_dual)
            if float(cand @ state.residual) >= (1.0 - delta) * norm:
                chosen = cand
                break
            scale *= 0.5
        else:
            logger.warning("%s m=%d: no perturbed functional within δ=%.3g, using the exact one",
                           state.trace.algorithm, m, delta)
            state.trace.metadata.setdefault("exact_functional_steps", []).append(m)
        self._functionals.pop(m - 2, None)
        self._functionals[m] = chosen
        return chosen

    def approximant(
        self,
        state: _RunState,
        m: int,
        coefficients: np.ndarray,
        directions: List[np.ndarray],
    ) -> np.ndarray:
        eta = self.eta_at(state, m)
        if eta == 0.0 or not directions:
            return coefficients
        elements = state.dictionary.elements
        weights = self.rng.standard_normal(len(directions))
        z = np.sum([w * d for w, d in zip(weights, directions)], axis=0)
        u = z @ elements
        u_norm = lp_norm(u, state.space.p)
        if u_norm == 0.0:
            return coefficients
        ref = lp_norm(state.f - coefficients @ elements, state.space.p)
        return coefficients + (eta * ref / u_norm) * z

    def slack(self, state: _RunState, m: int) -> float:
        if m == 0:
            return 0.0
        return biorthogonality_slack(
            self.params,
            self.delta_at(state, m),
            self.eta_at(state, m),
            lp_norm(state.approximant, state.space.p),
        )


# ---------------------------------------------------------------------------
# Public API
# ---------------------------------------------------------------------------

def wrap_approximate(
    inner: Union[AlgorithmId, str],
    delta: Optional[Schedule] = None,
    eta: Optional[Schedule] = None,
    adaptive_scale: Optional[float] = None,
    seed: Optional[int] = None,
) -> RunFn:
    """
    Approximate version of WCGA, WGAFR or RWRGA.

    Perturbation schedules given here take precedence over
    ``RunSchedules.delta`` / ``RunSchedules.eta``.  The perturbation stream is
    seeded by *seed*, else by ``RunOptions.seed``.
    """
    inner = AlgorithmId(inner)
    if inner not in _INNER_STEPS:
        raise ValueError(f"no approximate version of {inner.value}; expected WCGA, WGAFR or RWRGA")
    label, step = _INNER_STEPS[inner]

    def run_approximate(
        space: SpaceLp,
        dictionary: Dictionary,
        f: np.ndarray,
        m_max: int,
        schedules: Optional[RunSchedules] = None,
        options: Optional[RunOptions] = None,
    ) -> Trace:
        sched = schedules or RunSchedules()
        opts = options or RunOptions()
        perturb = ControlledPerturbation(
            params=smoothness_params(space),
            rng=as_rng(seed if seed is not None else opts.seed),
            delta=delta if delta is not None else sched.delta,
            eta=eta if eta is not None else sched.eta,
            adaptive_scale=adaptive_scale,
        )
        trace = _drive(label, space, dictionary, f, m_max, sched, opts, step, perturb=perturb)
        trace.metadata["inner"] = inner.value
        if adaptive_scale is not None:
            trace.metadata["adaptive_scale"] = adaptive_scale
        return trace

    run_approximate.__name__ = f"run_{label.value.lower()}"
    return run_approximate


def run_awcga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    return wrap_approximate(AlgorithmId.WCGA)(space, dictionary, f, m_max, schedules, options)


def run_awgafr(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    return wrap_approximate(AlgorithmId.WGAFR)(space, dictionary, f, m_max, schedules, options)


def run_arwrga(space, dictionary, f, m_max, schedules=None, options=None) -> Trace:
    return wrap_approximate(AlgorithmId.RWRGA)(space, dictionary, f, m_max, schedules, options)


APPROXIMATE_RUNNERS: Dict[AlgorithmId, RunFn] = {
    AlgorithmId.AWCGA:  run_awcga,
    AlgorithmId.AWGAFR: run_awgafr,
    AlgorithmId.ARWRGA: run_arwrga,
}


def make_noise(space: SpaceLp, epsilon: float, seed=None) -> np.ndarray:
    """Random direction scaled to ‖noise‖_p = ε (zero vector for ε = 0)."""
    if epsilon < 0.0:
        raise ValueError("noise level must be ≥ 0")
    if epsilon == 0.0:
        return np.zeros(space.dim)
    v = as_rng(seed).standard_normal(space.dim)
    return epsilon * v / lp_norm(v, space.p)


def run_with_noise(
    inner: Union[AlgorithmId, str, Callable[..., Trace]],
    space: SpaceLp,
    dictionary: Dictionary,
    f_clean: np.ndarray,
    noise: np.ndarray,
    m_max: int,
    schedules: Optional[RunSchedules] = None,
    options: Optional[RunOptions] = None,
) -> Trace:
    """
    Run *inner* on f = f^ε + noise.

    ``f_clean`` is the element with f^ε/A(ε) ∈ A_1(D); ``‖noise‖`` is the ε of
    the noisy-data bound and is stored as ``epsilon`` in the metadata.
    """
    fn = inner if callable(inner) else runner(inner)
    clean = space.element(f_clean)
    nv = space.element(noise)
    trace = fn(space, dictionary, clean + nv, m_max, schedules, options)
    trace.metadata["epsilon"] = lp_norm(nv, space.p)
    trace.metadata["clean_norm"] = lp_norm(clean, space.p)
    return trace
