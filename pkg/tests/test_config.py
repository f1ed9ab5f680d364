import json
from pathlib import Path

import pytest
from pydantic import ValidationError

from greedy.config import ExperimentConfig, RunConfig, ScheduleConfig, load_config
from greedy.schedules import ScheduleRole

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


def _experiment(**overrides):
    base = {
        "id":         "exp",
        "kind":       "rate_sweep",
        "algorithms": ["WCGA"],
        "space":      {"dim": 8, "p": 2.0},
        "dictionary": {"kind": "random", "size": 12},
    }
    base.update(overrides)
    return base


def test_defaults():
    exp = ExperimentConfig.model_validate(_experiment())
    assert exp.m_max == 64
    assert exp.tie_rule == "lowest-index"
    assert exp.schedules.weakness.build(ScheduleRole.WEAKNESS).at(1) == 1.0
    assert exp.data.noise == [0.0]


@pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.json")), ids=lambda p: p.stem)
def test_shipped_configs_validate(path):
    cfg = load_config(path)
    assert cfg.experiments


def test_weakness_out_of_range_names_the_key():
    with pytest.raises(ValidationError) as info:
        ExperimentConfig.model_validate(_experiment(schedules={"weakness": {"value": 1.5}}))
    assert "weakness" in str(info.value)


@pytest.mark.parametrize("overrides", [
    {"colour": "red"},
    {"algorithms": ["NOT_AN_ALGORITHM"]},
    {"bounds": ["no_such_bound"]},
    {"tie_rule": "first"},
    {"threshold_grid": [0.7]},
    {"space": None},
    {"space": {"dim": 8, "p": 1.0}},
    {"dictionary": {"kind": "random"}},
    {"dictionary": {"kind": "haar"}},
    {"data": {"generator": "file"}},
    {"data": {"noise": [-0.1]}},
    {"kind": "lebesgue"},
    {"kind": "lemmas"},
    {"m_max": 0},
    {"schedules": {"threshold": 0.75}},
    {"schedules": {"relaxation": {"kind": "formula", "formula": "harmonic"}}},
])
def test_invalid_experiments(overrides):
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(_experiment(**overrides))


def test_wga_hilbert_bound_needs_p2():
    ExperimentConfig.model_validate(_experiment(bounds=["wga_hilbert"]))
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(_experiment(space={"dim": 8, "p": 3.0}, bounds=["wga_hilbert"]))


def test_lemma_and_bilinear_kinds_need_no_space():
    lemmas = ExperimentConfig.model_validate({"id": "l", "kind": "lemmas", "lemmas": [{"lemma": "LeL1"}]})
    assert lemmas.space is None
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate({"id": "l", "kind": "lemmas", "lemmas": [{"lemma": "LeL99"}]})
    bilinear = ExperimentConfig.model_validate({"id": "b", "kind": "bilinear", "bilinear": {}})
    assert bilinear.bilinear.shapes == [(8, 6)]


def test_weakness_grid_is_range_checked():
    ok = ExperimentConfig.model_validate(_experiment(
        kind="convergence_probe",
        weakness_grid=[{"kind": "formula", "formula": "zero", "value": 0.0}, {"value": 0.5}],
    ))
    assert len(ok.weakness_grid) == 2
    with pytest.raises(ValidationError):
        ExperimentConfig.model_validate(_experiment(weakness_grid=[{"kind": "sequence", "values": [0.5, 2.0]}]))


def test_schedule_config_build():
    sched = ScheduleConfig(kind="sequence", values=[0.5, 0.25]).build(ScheduleRole.WEAKNESS)
    assert [sched.at(k) for k in (1, 2, 3)] == [0.5, 0.25, 0.25]


def test_duplicate_ids():
    with pytest.raises(ValidationError) as info:
        RunConfig.model_validate({"experiments": [_experiment(), _experiment()]})
    assert "duplicate" in str(info.value)
    with pytest.raises(ValidationError):
        RunConfig.model_validate({"experiments": []})


def test_load_config_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ValueError):
        load_config(bad)
    good = tmp_path / "good.json"
    good.write_text(json.dumps({"seed": 3, "experiments": [_experiment()]}))
    assert load_config(good).seed == 3
