"""
Experiment configuration schema.

A config file is one JSON document:

    {
      "seed": 7,
      "cache": "data/constants.db",
      "experiments": [ { "id": "wcga-l3", "kind": "rate_sweep", ... }, ... ]
    }

Every model forbids unknown keys, and schedule values are range-checked
against their role, so a validation error names the offending key.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from greedy.algorithms import AlgorithmId
from greedy.bounds import BOUNDS
from greedy.dictionary import _TIE_RULES
from greedy.lemmas import LEMMAS
from greedy.schedules import Schedule, ScheduleKind, ScheduleRole

logger = logging.getLogger(__name__)

ExperimentKind = Literal[
    "rate_sweep", "convergence_probe", "lebesgue", "recovery", "noise_approx", "lemmas", "bilinear",
]


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class ScheduleConfig(_Strict):
    kind:    Literal["constant", "sequence", "formula"] = "constant"
    value:   float = 1.0
    values:  List[float] = Field(default_factory=list)
    formula: str = ""
    params:  Dict[str, float] = Field(default_factory=dict)

    def build(self, role: ScheduleRole) -> Schedule:
        return Schedule(
            role=role,
            kind=ScheduleKind(self.kind),
            value=self.value,
            values=tuple(self.values),
            formula=self.formula,
            params=dict(self.params),
        )


def _check_schedule(cfg: Optional[ScheduleConfig], role: ScheduleRole) -> Optional[ScheduleConfig]:
    if cfg is not None:
        cfg.build(role)          # raises ValueError on out-of-range values
    return cfg


class SchedulesConfig(_Strict):
    weakness:       ScheduleConfig = Field(default_factory=ScheduleConfig)
    relaxation:     Optional[ScheduleConfig] = None
    coefficients:   Optional[ScheduleConfig] = None
    epsilon:        Optional[ScheduleConfig] = None
    delta:          Optional[ScheduleConfig] = None
    eta:            Optional[ScheduleConfig] = None
    threshold:      float = Field(0.25, gt=0.0, le=0.5)
    b:              float = Field(0.5, gt=0.0, le=1.0)
    adaptive_scale: Optional[float] = Field(None, ge=0.0)

    @field_validator("weakness")
    @classmethod
    def _weakness(cls, v):
        return _check_schedule(v, ScheduleRole.WEAKNESS)

    @field_validator("relaxation")
    @classmethod
    def _relaxation(cls, v):
        return _check_schedule(v, ScheduleRole.RELAXATION)

    @field_validator("coefficients")
    @classmethod
    def _coefficients(cls, v):
        return _check_schedule(v, ScheduleRole.COEFFICIENTS)

    @field_validator("epsilon")
    @classmethod
    def _epsilon(cls, v):
        return _check_schedule(v, ScheduleRole.EPSILON)

    @field_validator("delta", "eta")
    @classmethod
    def _perturbation(cls, v):
        return _check_schedule(v, ScheduleRole.PERTURBATION)


class SpaceConfig(_Strict):
    dim: int = Field(..., ge=1, le=4096)
    p:   float = Field(..., gt=1.0)


class DictionaryConfig(_Strict):
    kind:        Literal["canonical", "random", "trig", "haar", "coherent", "file"] = "random"
    size:        Optional[int] = Field(None, ge=1)
    frequencies: Optional[int] = Field(None, ge=0)
    levels:      Optional[int] = Field(None, ge=1)
    mix:         float = Field(0.2, ge=0.0, lt=1.0)
    path:        Optional[str] = None

    @model_validator(mode="after")
    def _required(self):
        needs = {"random": "size", "coherent": "size", "trig": "frequencies", "haar": "levels", "file": "path"}
        key = needs.get(self.kind)
        if key is not None and getattr(self, key) is None:
            raise ValueError(f"dictionary kind {self.kind!r} needs {key!r}")
        return self


class DataConfig(_Strict):
    generator: Literal["A1", "sparse", "file"] = "A1"
    sparsity:  int = Field(4, ge=1)
    scale:     float = Field(1.0, gt=0.0)
    noise:     List[float] = Field(default_factory=lambda: [0.0])
    path:      Optional[str] = None

    @field_validator("noise")
    @classmethod
    def _noise(cls, v):
        if any(x < 0.0 for x in v):
            raise ValueError("noise levels must be ≥ 0")
        return v

    @model_validator(mode="after")
    def _path(self):
        if self.generator == "file" and not self.path:
            raise ValueError("data generator 'file' needs 'path'")
        return self


class LebesgueConfig(_Strict):
    K:          int = Field(2, ge=1, le=4)
    depth:      int = Field(6, ge=1)
    r:          float = Field(0.5, ge=0.0, le=1.0)
    resolution: int = Field(6, ge=1)
    c_grid:     List[float] = Field(default_factory=lambda: [0.25, 0.5, 1.0, 2.0])
    epsilon:    float = Field(0.0, ge=0.0)


class RecoveryConfig(_Strict):
    mixes:      List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2])
    weakness:   List[float] = Field(default_factory=lambda: [1.0, 0.5])
    sparsities: List[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    trials:     int = Field(20, ge=1)
    lebesgue:   bool = True
    seminorm_m: int = Field(2, ge=1, le=4)


class LemmaConfig(_Strict):
    lemma:        str
    params:       Dict[str, float] = Field(default_factory=dict)
    horizon:      int = Field(1000, ge=2)
    phi:          str = "power"
    replications: int = Field(100, ge=1)

    @field_validator("lemma")
    @classmethod
    def _lemma(cls, v):
        if v not in LEMMAS:
            raise ValueError(f"unknown lemma {v!r}; expected one of {', '.join(LEMMAS)}")
        return v


class BilinearConfig(_Strict):
    shapes: List[Tuple[int, int]] = Field(default_factory=lambda: [(8, 6)])
    count:  int = Field(5, ge=1)
    m:      Optional[int] = Field(None, ge=1)


class ExperimentConfig(_Strict):
    id:             str
    kind:           ExperimentKind = "rate_sweep"
    algorithms:     List[str] = Field(default_factory=lambda: ["WCGA"])
    space:          Optional[SpaceConfig] = None
    dictionary:     DictionaryConfig = Field(default_factory=DictionaryConfig)
    data:           DataConfig = Field(default_factory=DataConfig)
    schedules:      SchedulesConfig = Field(default_factory=SchedulesConfig)
    m_max:          int = Field(64, ge=1, le=100_000)
    replications:   int = Field(1, ge=1)
    seed:           int = 0
    tie_rule:       str = "lowest-index"
    bounds:         List[str] = Field(default_factory=list)
    oracle_m:       int = Field(0, ge=0, le=4, description="σ_m dominance check up to this m (0 = off)")
    threshold_grid: List[float] = Field(default_factory=list, description="δ values for DGART / CGAT stop counts")
    weakness_grid:  List[ScheduleConfig] = Field(default_factory=list, description="τ schedules of a convergence probe")
    lebesgue:       Optional[LebesgueConfig] = None
    recovery:       Optional[RecoveryConfig] = None
    lemmas:         List[LemmaConfig] = Field(default_factory=list)
    bilinear:       Optional[BilinearConfig] = None

    @field_validator("threshold_grid")
    @classmethod
    def _threshold_grid(cls, v):
        bad = [d for d in v if not (0.0 < d <= 0.5)]
        if bad:
            raise ValueError(f"threshold values must lie in (0, 1/2], got {bad}")
        return v

    @field_validator("algorithms")
    @classmethod
    def _algorithms(cls, v):
        for name in v:
            AlgorithmId(name)
        return v

    @field_validator("bounds")
    @classmethod
    def _bounds(cls, v):
        unknown = [b for b in v if b not in BOUNDS]
        if unknown:
            raise ValueError(f"unknown bound(s) {', '.join(unknown)}")
        return v

    @field_validator("tie_rule")
    @classmethod
    def _tie_rule(cls, v):
        if v not in _TIE_RULES:
            raise ValueError(f"tie_rule must be one of {', '.join(_TIE_RULES)}")
        return v

    @field_validator("weakness_grid")
    @classmethod
    def _weakness_grid(cls, v):
        for cfg in v:
            _check_schedule(cfg, ScheduleRole.WEAKNESS)
        return v

    @model_validator(mode="after")
    def _needs_space(self):
        if self.kind not in ("lemmas", "bilinear") and self.space is None:
            raise ValueError(f"experiment {self.id!r} of kind {self.kind!r} needs 'space'")
        if "wga_hilbert" in self.bounds and self.space is not None and self.space.p != 2.0:
            raise ValueError("bound 'wga_hilbert' holds for p = 2 only")
        sections = {"lebesgue": self.lebesgue, "recovery": self.recovery, "bilinear": self.bilinear}
        if self.kind in sections and sections[self.kind] is None:
            raise ValueError(f"experiment {self.id!r} of kind {self.kind!r} needs a {self.kind!r} section")
        if self.kind == "lemmas" and not self.lemmas:
            raise ValueError(f"experiment {self.id!r} lists no lemmas")
        return self


class RunConfig(_Strict):
    seed:        Optional[int] = None
    cache:       Optional[str] = None
    out:         Optional[str] = None
    experiments: List[ExperimentConfig] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _unique_ids(self):
        ids = [e.id for e in self.experiments]
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        if dupes:
            raise ValueError(f"duplicate experiment id(s): {', '.join(dupes)}")
        return self


def load_config(path: Path) -> RunConfig:
    """Read and validate a JSON config (raises pydantic.ValidationError or ValueError)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"config not found: {path}")
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from None
    cfg = RunConfig.model_validate(raw)
    logger.info("Loaded %d experiment(s) from %s", len(cfg.experiments), path)
    return cfg
