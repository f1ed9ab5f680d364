"""
Per-iteration record of a greedy run.

Record 0 holds the initial residual ‖f‖; record m ≥ 1 describes iteration m.
Step quantities that an algorithm does not use are left as ``None`` and are
written as empty CSV fields.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional

import numpy as np

logger = logging.getLogger(__name__)

CSV_COLUMNS = (
    "m", "index", "sign", "lambda", "w", "mu", "c",
    "residual_norm", "dnorm_F", "stop_reason",
)


class StopReason(str, Enum):
    ZERO_RESIDUAL          = "zero_residual"
    ZERO_FUNCTIONAL        = "zero_functional"
    THRESHOLD_EMPTY        = "threshold_empty"
    RESIDUAL_BELOW_DELTA_F = "residual_below_delta_f"
    SINGULAR_SYSTEM        = "singular_system"
    STALLED                = "stalled"
    M_MAX                  = "m_max"
    ERROR                  = "error"


@dataclass
class IterationRecord:
    m:             int
    residual_norm: float
    index:         Optional[int] = None      # selected element (0-based)
    sign:          Optional[int] = None
    lam:           Optional[float] = None
    w:             Optional[float] = None
    mu:            Optional[float] = None
    c:             Optional[float] = None
    dnorm_F:       Optional[float] = None    # ‖F_{f_m}‖_D after the step
    coefficients:  Optional[np.ndarray] = None   # signed approximant coefficients over D
    extra:         Dict[str, float] = field(default_factory=dict)

    def to_row(self, stop_reason: str = "") -> dict:
        def fmt(v: Any) -> str:
            if v is None:
                return ""
            if isinstance(v, float):
                return repr(float(v))
            return str(v)

        return {
            "m":             str(self.m),
            "index":         fmt(self.index),
            "sign":          fmt(self.sign),
            "lambda":        fmt(self.lam),
            "w":             fmt(self.w),
            "mu":            fmt(self.mu),
            "c":             fmt(self.c),
            "residual_norm": fmt(float(self.residual_norm)),
            "dnorm_F":       fmt(self.dnorm_F),
            "stop_reason":   stop_reason,
        }


@dataclass
class Trace:
    algorithm:    str
    records:      List[IterationRecord] = field(default_factory=list)
    stop_reason:  Optional[StopReason] = None
    metadata:     Dict[str, Any] = field(default_factory=dict)
    flags:        List[str] = field(default_factory=list)
    approximant:  Optional[np.ndarray] = None
    residual:     Optional[np.ndarray] = None
    error:        Optional[str] = None

    # ----------------------------------------------------------------------

    @property
    def iterations(self) -> int:
        return len(self.records) - 1 if self.records else 0

    @property
    def initial_norm(self) -> float:
        return float(self.records[0].residual_norm)

    @property
    def final_norm(self) -> float:
        return float(self.records[-1].residual_norm)

    def residual_norms(self) -> np.ndarray:
        """‖f_m‖ for m = 0 … iterations."""
        return np.array([r.residual_norm for r in self.records], dtype=float)

    def selected(self) -> List[int]:
        return [r.index for r in self.records[1:] if r.index is not None]

    def is_monotone(self, tol: float = 1e-9) -> bool:
        norms = self.residual_norms()
        return bool(np.all(np.diff(norms) <= tol * np.maximum(1.0, norms[:-1])))

    def flag(self, name: str) -> None:
        if name not in self.flags:
            self.flags.append(name)

    def to_rows(self) -> List[dict]:
        """CSV rows for m ≥ 1; the last row carries the stop reason."""
        rows = []
        last = len(self.records) - 1
        for i, rec in enumerate(self.records[1:], start=1):
            reason = self.stop_reason.value if (i == last and self.stop_reason) else ""
            rows.append(rec.to_row(reason))
        return rows

    def to_dict(self) -> dict:
        return {
            "algorithm":     self.algorithm,
            "iterations":    self.iterations,
            "initial_norm":  self.initial_norm if self.records else None,
            "final_norm":    self.final_norm if self.records else None,
            "stop_reason":   self.stop_reason.value if self.stop_reason else None,
            "flags":         list(self.flags),
            "metadata":      dict(self.metadata),
            "error":         self.error,
        }

    def log(self) -> None:
        logger.info(
            "%s: %d iterations, ‖f_0‖=%.6g → ‖f_m‖=%.6g (%s)",
            self.algorithm,
            self.iterations,
            self.initial_norm,
            self.final_norm,
            self.stop_reason.value if self.stop_reason else "running",
        )
