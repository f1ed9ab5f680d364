"""
Parameter schedules indexed by the iteration number k = 1, 2, ….

A schedule is constant, an explicit sequence (the last value repeats past
its end) or a named formula.  Each schedule carries a role that fixes its
admissible range:

    weakness      t_k ∈ (0, 1]     ("zero" formula allowed as a degenerate probe)
    relaxation    r_k ∈ [0, 1)
    coefficients  c_k > 0
    epsilon       ε_k > 0
    perturbation  δ_k, η_k ≥ 0
    threshold     δ ∈ (0, 1/2]
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

import numpy as np

logger = logging.getLogger(__name__)


class ScheduleKind(str, Enum):
    CONSTANT = "constant"
    SEQUENCE = "sequence"
    FORMULA  = "formula"


class ScheduleRole(str, Enum):
    WEAKNESS     = "weakness"
    RELAXATION   = "relaxation"
    COEFFICIENTS = "coefficients"
    EPSILON      = "epsilon"
    PERTURBATION = "perturbation"
    THRESHOLD    = "threshold"


FORMULAS = (
    "relaxation_2_over_k_plus_2",
    "coefficients_power",
    "incremental_eps",
    "inverse_log",
    "harmonic",
    "zero",
)


def _in_range(role: ScheduleRole, v: float, formula: str = "") -> bool:
    if not math.isfinite(v):
        return False
    if role is ScheduleRole.WEAKNESS:
        return 0.0 < v <= 1.0 or (formula == "zero" and v == 0.0)
    if role is ScheduleRole.RELAXATION:
        return 0.0 <= v < 1.0
    if role in (ScheduleRole.COEFFICIENTS, ScheduleRole.EPSILON):
        return v > 0.0
    if role is ScheduleRole.PERTURBATION:
        return v >= 0.0
    return 0.0 < v <= 0.5


@dataclass(frozen=True)
class Schedule:
    role:    ScheduleRole
    kind:    ScheduleKind
    value:   float = 0.0                          # constant kind
    values:  Tuple[float, ...] = ()               # sequence kind
    formula: str = ""                             # formula kind
    params:  Dict[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind is ScheduleKind.CONSTANT:
            self._check(self.value, 1)
        elif self.kind is ScheduleKind.SEQUENCE:
            if not self.values:
                raise ValueError(f"{self.role.value} sequence is empty")
            for k, v in enumerate(self.values, start=1):
                self._check(v, k)
        else:
            if self.formula not in FORMULAS:
                raise ValueError(f"unknown {self.role.value} formula {self.formula!r}")
            # formulas are monotone in k; checking the first terms catches bad params
            for k in (1, 2, 1000):
                self._check(self.at(k), k)

    def _check(self, v: float, k: int) -> None:
        if not _in_range(self.role, float(v), self.formula):
            raise ValueError(f"{self.role.value} value {v!r} at k={k} is out of range")

    # ----------------------------------------------------------------------

    def at(self, k: int) -> float:
        """Value for iteration k ≥ 1."""
        if k < 1:
            raise ValueError("schedules are indexed from k = 1")
        if self.kind is ScheduleKind.CONSTANT:
            return float(self.value)
        if self.kind is ScheduleKind.SEQUENCE:
            return float(self.values[min(k, len(self.values)) - 1])
        return _formula(self.formula, k, self.params)

    def take(self, m: int) -> np.ndarray:
        """Values for k = 1 … m."""
        return np.array([self.at(k) for k in range(1, m + 1)], dtype=float)

    def is_non_increasing(self, m: int) -> bool:
        vals = self.take(m)
        return bool(np.all(np.diff(vals) <= 0.0))

    def to_dict(self) -> dict:
        out: dict = {"role": self.role.value, "kind": self.kind.value}
        if self.kind is ScheduleKind.CONSTANT:
            out["value"] = self.value
        elif self.kind is ScheduleKind.SEQUENCE:
            out["values"] = list(self.values)
        else:
            out["formula"] = self.formula
            out["params"] = dict(self.params)
        return out

    def __str__(self) -> str:
        if self.kind is ScheduleKind.CONSTANT:
            return f"{self.role.value}={self.value:g}"
        if self.kind is ScheduleKind.SEQUENCE:
            return f"{self.role.value}=seq[{len(self.values)}]"
        return f"{self.role.value}={self.formula}"


def _formula(name: str, k: int, params: Dict[str, float]) -> float:
    if name == "relaxation_2_over_k_plus_2":
        return 2.0 / (k + 2.0)
    if name == "coefficients_power":
        if "s" in params:
            s = params["s"]
        else:
            s = (1.0 + 1.0 / params.get("q", 2.0)) / 2.0
        return float(k) ** (-s)
    if name == "incremental_eps":
        q = params.get("q", 2.0)
        k1 = params.get("K1", 1.0)
        gamma = params.get("gamma", 0.5)
        q_conj = q / (q - 1.0)
        return k1 * gamma ** (1.0 / q) * float(k) ** (-1.0 / q_conj)
    if name == "inverse_log":
        return 1.0 / math.log(k + 2.0)
    if name == "harmonic":
        return 1.0 / k
    return 0.0


# ---------------------------------------------------------------------------
# Constructors
# ---------------------------------------------------------------------------

def constant(role: ScheduleRole, value: float) -> Schedule:
    return Schedule(role=role, kind=ScheduleKind.CONSTANT, value=float(value))


def sequence(role: ScheduleRole, values) -> Schedule:
    return Schedule(role=role, kind=ScheduleKind.SEQUENCE, values=tuple(float(v) for v in values))


def formula(role: ScheduleRole, name: str, **params: float) -> Schedule:
    return Schedule(role=role, kind=ScheduleKind.FORMULA, formula=name, params=dict(params))


def weakness(t: float = 1.0) -> Schedule:
    return constant(ScheduleRole.WEAKNESS, t)


def relaxation_default() -> Schedule:
    return formula(ScheduleRole.RELAXATION, "relaxation_2_over_k_plus_2")


def coefficients_power(q: float) -> Schedule:
    return formula(ScheduleRole.COEFFICIENTS, "coefficients_power", q=q)


def incremental_eps(q: float, gamma: float, K1: float = 1.0) -> Schedule:
    return formula(ScheduleRole.EPSILON, "incremental_eps", q=q, gamma=gamma, K1=K1)


def zero_perturbation() -> Schedule:
    return constant(ScheduleRole.PERTURBATION, 0.0)
