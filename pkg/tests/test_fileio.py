import csv
import io
import json

import numpy as np
import pytest

from greedy.algorithms import run_wcga
from greedy.dictionary import make_random_unit
from greedy.errors import FormatError
from greedy.fileio import (
    SCHEMA_VERSION,
    read_dictionary,
    read_matrix,
    read_report_json,
    read_signal,
    read_trace_csv,
    report_json,
    rows_to_csv,
    write_dictionary,
    write_matrix,
    write_report_json,
    write_signal,
    write_trace_csv,
)
from greedy.space import SpaceLp
from greedy.trace import CSV_COLUMNS, StopReason


def test_dictionary_file(tmp_path, random_dict):
    path = write_dictionary(random_dict, tmp_path / "d" / "dict.txt")
    header = path.read_text().splitlines()[0]
    assert header == f"GREEDYDICT v1 n=8 p={random_dict.space.p:.17g} N=12"
    back = read_dictionary(path)
    np.testing.assert_array_equal(back.elements, random_dict.elements)
    assert back.space.p == random_dict.space.p
    assert back.fingerprint == random_dict.fingerprint
    assert back.label == "dict"


def test_dictionary_renormalized_within_tolerance(tmp_path):
    path = tmp_path / "near.txt"
    path.write_text("GREEDYDICT v1 n=2 p=2 N=2\n1.0000001 0\n0 0.9999999\n")
    d = read_dictionary(path, label="near")
    np.testing.assert_allclose(d.elements, np.eye(2), rtol=1e-15)
    assert d.label == "near"


@pytest.mark.parametrize("body", [
    "GREEDYDICT v1 n=2 p=2 N=2\n1.1 0\n0 1\n",       # norm off by more than 1e-6
    "GREEDYDICT v1 n=2 p=2 N=2\n1 0\n",              # missing row
    "GREEDYDICT v1 n=2 p=2 N=1\n1 0 0\n",            # wrong width
    "GREEDYDICT v1 n=2 p=1 N=1\n1 0\n",              # p out of range
    "GREEDYDICT v2 n=2 p=2 N=1\n1 0\n",              # header
    "GREEDYDICT v1 n=2 p=2 N=1\n1 x\n",              # not numeric
    "",
])
def test_dictionary_format_errors(tmp_path, body):
    path = tmp_path / "bad.txt"
    path.write_text(body)
    with pytest.raises(FormatError):
        read_dictionary(path)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        read_dictionary(tmp_path / "nope.txt")
    with pytest.raises(FileNotFoundError):
        read_signal(tmp_path / "nope.txt")


def test_matrix_and_signal_files(tmp_path, rng):
    a = rng.standard_normal((3, 4))
    np.testing.assert_array_equal(read_matrix(write_matrix(a, tmp_path / "a.mat")), a)
    f = rng.standard_normal(5) * 1e-300
    np.testing.assert_array_equal(read_signal(write_signal(f, tmp_path / "f.sig")), f)
    assert (tmp_path / "f.sig").read_text().startswith("GREEDYSIG v1 n=5\n")
    with pytest.raises(ValueError):
        write_matrix(np.ones(3), tmp_path / "v.mat")
    (tmp_path / "bad.mat").write_text("GREEDYMAT v1 rows=1 cols=2\n1 nan\n")
    with pytest.raises(FormatError):
        read_matrix(tmp_path / "bad.mat")


def test_trace_csv(tmp_path):
    space = SpaceLp(6, 3.0)
    d = make_random_unit(space, 9, seed=1)
    trace = run_wcga(space, d, np.arange(1.0, 7.0), 4)
    rows = read_trace_csv(write_trace_csv(trace, tmp_path / "t.csv"))
    assert len(rows) == trace.iterations
    assert tuple(rows[0]) == CSV_COLUMNS
    assert [int(r["m"]) for r in rows] == list(range(1, trace.iterations + 1))
    assert [float(r["residual_norm"]) for r in rows] == trace.residual_norms()[1:].tolist()
    assert rows[-1]["stop_reason"] == trace.stop_reason.value


def test_trace_csv_wrong_columns(tmp_path):
    path = tmp_path / "t.csv"
    path.write_text("m,index\n1,0\n")
    with pytest.raises(FormatError):
        read_trace_csv(path)


def test_report_json(tmp_path):
    payload = {
        "ratio": np.float64(0.5),
        "count": np.int64(3),
        "flags": np.array([True, False]),
        "bound": float("inf"),
        "stop": StopReason.STALLED,
        "nested": {"values": (1, 2)},
    }
    doc = json.loads(report_json(payload))
    assert doc["schema_version"] == SCHEMA_VERSION
    assert doc["ratio"] == 0.5
    assert doc["count"] == 3
    assert doc["flags"] == [True, False]
    assert doc["bound"] == "inf"
    assert doc["stop"] == "stalled"
    assert doc["nested"] == {"values": [1, 2]}

    path = write_report_json(payload, tmp_path / "r" / "report.json")
    assert read_report_json(path)["count"] == 3
    path.write_text(json.dumps({"schema_version": 99}))
    with pytest.raises(FormatError):
        read_report_json(path)


def test_rows_to_csv():
    text = rows_to_csv([{"a": 1, "b": 0.5, "c": None}, {"a": 2, "b": 1.0, "c": "x,y"}])
    assert text.splitlines() == ["a,b,c", "1,0.5,", '2,1.0,"x,y"']
    quoted = rows_to_csv([{"label": 'say "hi", twice', "n": 3}])
    assert quoted.splitlines() == ["label,n", '"say ""hi"", twice",3']
    assert next(csv.reader(io.StringIO(quoted.splitlines()[1]))) == ['say "hi", twice', "3"]
    assert rows_to_csv([]) == ""
