import math

import numpy as np
import pytest

from greedy.schedules import (
    Schedule,
    ScheduleKind,
    ScheduleRole,
    coefficients_power,
    constant,
    formula,
    incremental_eps,
    relaxation_default,
    sequence,
    weakness,
    zero_perturbation,
)


def test_constant_weakness():
    tau = weakness(0.5)
    assert tau.at(1) == tau.at(1000) == 0.5
    assert tau.is_non_increasing(20)


@pytest.mark.parametrize("t", [0.0, 1.5, -0.1, math.nan])
def test_weakness_out_of_range(t):
    with pytest.raises(ValueError, match="weakness"):
        weakness(t)


def test_zero_weakness_formula_is_allowed():
    tau = formula(ScheduleRole.WEAKNESS, "zero")
    assert tau.at(1) == 0.0


def test_relaxation_range():
    with pytest.raises(ValueError, match="relaxation"):
        constant(ScheduleRole.RELAXATION, 1.0)
    assert constant(ScheduleRole.RELAXATION, 0.0).at(3) == 0.0
    r = relaxation_default()
    np.testing.assert_allclose(r.take(3), [2 / 3, 2 / 4, 2 / 5])


def test_threshold_and_perturbation_ranges():
    with pytest.raises(ValueError):
        constant(ScheduleRole.THRESHOLD, 0.6)
    assert constant(ScheduleRole.THRESHOLD, 0.5).at(1) == 0.5
    assert zero_perturbation().at(7) == 0.0
    with pytest.raises(ValueError):
        constant(ScheduleRole.PERTURBATION, -1e-3)
    with pytest.raises(ValueError):
        constant(ScheduleRole.EPSILON, 0.0)


def test_sequence_repeats_last_value():
    tau = sequence(ScheduleRole.WEAKNESS, [1.0, 0.5, 0.25])
    np.testing.assert_array_equal(tau.take(5), [1.0, 0.5, 0.25, 0.25, 0.25])
    assert tau.kind is ScheduleKind.SEQUENCE
    assert tau.is_non_increasing(5)
    assert not sequence(ScheduleRole.WEAKNESS, [0.5, 1.0]).is_non_increasing(2)


def test_sequence_validation():
    with pytest.raises(ValueError, match="empty"):
        sequence(ScheduleRole.WEAKNESS, [])
    with pytest.raises(ValueError, match="k=2"):
        sequence(ScheduleRole.WEAKNESS, [1.0, 2.0])


def test_indexing_starts_at_one():
    with pytest.raises(ValueError):
        weakness(1.0).at(0)


def test_formulas():
    assert formula(ScheduleRole.WEAKNESS, "inverse_log").at(1) == pytest.approx(1.0 / math.log(3.0))
    assert formula(ScheduleRole.WEAKNESS, "harmonic").at(4) == 0.25
    # s = (1 + 1/2)/2 = 3/4
    assert coefficients_power(2.0).at(16) == pytest.approx(0.125)
    assert formula(ScheduleRole.COEFFICIENTS, "coefficients_power", s=1.0).at(5) == pytest.approx(0.2)
    eps = incremental_eps(q=2.0, gamma=0.5)
    assert eps.at(4) == pytest.approx(math.sqrt(0.5) / 2.0)


def test_unknown_formula():
    with pytest.raises(ValueError, match="formula"):
        formula(ScheduleRole.WEAKNESS, "geometric")


def test_formula_params_checked():
    # r_1 = 1 is outside [0, 1)
    with pytest.raises(ValueError):
        formula(ScheduleRole.RELAXATION, "harmonic")


def test_to_dict():
    assert weakness(0.5).to_dict() == {"role": "weakness", "kind": "constant", "value": 0.5}
    assert sequence(ScheduleRole.WEAKNESS, [1.0, 0.5]).to_dict()["values"] == [1.0, 0.5]
    d = incremental_eps(q=2.0, gamma=0.5).to_dict()
    assert d["formula"] == "incremental_eps"
    assert d["params"]["gamma"] == 0.5
    assert str(weakness(0.5)) == "weakness=0.5"


def test_schedule_is_frozen():
    tau = weakness(1.0)
    with pytest.raises(Exception):
        tau.value = 0.5  # type: ignore[misc]
    assert isinstance(tau, Schedule)
