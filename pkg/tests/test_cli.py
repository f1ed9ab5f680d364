import csv
import json

import numpy as np
import pytest

from greedy.dictionary import make_canonical
from greedy.fileio import write_dictionary, write_matrix, write_signal
from greedy.space import SpaceLp
from main import EXIT_ERROR, EXIT_OK, EXIT_VIOLATION, main


MINIMAL = {
    "seed": 1,
    "experiments": [{
        "id":         "wcga minimal",
        "kind":       "rate_sweep",
        "algorithms": ["WCGA"],
        "space":      {"dim": 8, "p": 2.0},
        "dictionary": {"kind": "random", "size": 12},
        "data":       {"generator": "A1", "sparsity": 4},
        "m_max":      16,
        "bounds":     ["wbga"],
    }],
}


def test_oracle_canonical(capsys):
    code = main(["oracle", "--canonical", "3", "--values", "1,0.5,0.25", "--m", "1"])
    assert code == EXIT_OK
    header, row = capsys.readouterr().out.strip().splitlines()
    assert header == "m,sigma,exact,support,norm"
    assert row.startswith("1,0.55901699437")
    assert row.endswith(",True,0,norm")


def test_oracle_json_from_files(tmp_path, capsys):
    d = write_dictionary(make_canonical(SpaceLp(3, 3.0)), tmp_path / "d.txt")
    f = write_signal(np.array([1.0, 1.0, 1.0]), tmp_path / "f.sig")
    assert main(["--format", "json", "oracle", "--dictionary", str(d), "--signal", str(f), "--m", "0"]) == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert doc["command"] == "oracle"
    assert doc["rows"][0]["sigma"] == pytest.approx(3.0 ** (1.0 / 3.0))


def test_oracle_seminorm(capsys):
    assert main(["oracle", "--canonical", "2", "--values", "1,0.5", "--m", "1", "--seminorm"]) == EXIT_OK
    row = capsys.readouterr().out.strip().splitlines()[1]
    assert float(row.split(",")[1]) == pytest.approx(0.5, abs=1e-9)


def test_bilinear_diag(capsys):
    assert main(["bilinear", "--diag", "3,2,1"]) == EXIT_OK
    rows = list(csv.DictReader(capsys.readouterr().out.strip().splitlines()))
    assert [int(r["m"]) for r in rows] == [1, 2, 3]
    assert float(rows[0]["tail"]) == pytest.approx(5.0 ** 0.5)
    assert all(float(r["delta"]) <= 1e-8 for r in rows)


def test_bilinear_matrix_file(tmp_path, capsys):
    path = write_matrix(np.outer([1.0, 2.0], [3.0, 4.0, 0.0]), tmp_path / "a.mat")
    assert main(["bilinear", "--matrix", str(path), "--m", "2"]) == EXIT_OK
    rows = capsys.readouterr().out.strip().splitlines()
    assert len(rows) == 2                        # header and one step, the residual is zero after it


def test_lemmas(capsys):
    code = main(["--format", "json", "lemmas", "LeL1", "C1=1", "C2=1", "N=3000", "--replications", "5"])
    assert code == EXIT_OK
    doc = json.loads(capsys.readouterr().out)
    assert [r["mode"] for r in doc["rows"]] == ["adversarial", "randomized"]
    assert doc["spec"]["horizon"] == 3000


def test_lemmas_bad_parameter(capsys):
    assert main(["lemmas", "LeL1", "C1"]) == EXIT_ERROR
    assert "NAME=VALUE" in capsys.readouterr().err


def test_run_writes_traces_and_reports(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(MINIMAL))
    out = tmp_path / "results"
    assert main(["--out", str(out), "run", str(config)]) == EXIT_OK

    exp_dir = out / "wcga_minimal"
    report = json.loads((exp_dir / "report.json").read_text())
    assert report["schema_version"] == 1
    assert report["experiment"] == "wcga minimal"
    assert report["passed"]

    traces = sorted((exp_dir / "traces").glob("*.csv"))
    assert [p.name for p in traces] == ["WCGA-r000.csv"]
    lines = traces[0].read_text().strip().splitlines()
    assert lines[0].startswith("m,index,sign,lambda")
    assert 2 <= len(lines) <= 17
    assert not lines[-1].endswith(",")

    summary = json.loads((out / "summary.json").read_text())
    assert summary["seed"] == 1
    assert "wcga minimal" in capsys.readouterr().out


def test_run_seed_override(tmp_path, capsys):
    config = tmp_path / "config.json"
    config.write_text(json.dumps(MINIMAL))
    assert main(["--seed", "42", "--out", str(tmp_path / "o"), "run", str(config)]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["seed"] == 42


def test_run_with_cache(tmp_path, capsys):
    doc = dict(MINIMAL)
    doc["experiments"] = [dict(MINIMAL["experiments"][0], oracle_m=1, space={"dim": 8, "p": 3.0}, bounds=[])]
    config = tmp_path / "config.json"
    config.write_text(json.dumps(doc))
    cache = tmp_path / "cache.sqlite"
    args = ["--cache", str(cache), "--out", str(tmp_path / "o"), "run", str(config)]
    assert main(args) == EXIT_OK
    assert cache.exists()


@pytest.mark.parametrize("body", [
    {"experiments": []},
    {"experiments": [dict(MINIMAL["experiments"][0], schedules={"weakness": {"value": 1.5}})]},
    "{not json",
])
def test_run_bad_config(tmp_path, capsys, body):
    config = tmp_path / "config.json"
    config.write_text(body if isinstance(body, str) else json.dumps(body))
    assert main(["--out", str(tmp_path / "o"), "run", str(config)]) == EXIT_ERROR
    assert "Error" in capsys.readouterr().err


def test_run_missing_config(tmp_path, capsys):
    assert main(["run", str(tmp_path / "nope.json")]) == EXIT_ERROR


def test_run_exits_on_violated_bound(tmp_path, capsys):
    # a fixed coefficient of 10 overshoots any f in A_1 on the first step
    doc = {"seed": 3, "experiments": [dict(
        MINIMAL["experiments"][0], id="overshoot", algorithms=["DGA_C"], replications=1, m_max=5,
        space={"dim": 9, "p": 3.0}, dictionary={"kind": "random", "size": 9},
        schedules={"coefficients": {"value": 10.0}}, bounds=["initial_norm"],
    )]}
    config = tmp_path / "config.json"
    config.write_text(json.dumps(doc))
    out = tmp_path / "o"
    assert main(["--out", str(out), "run", str(config)]) == EXIT_VIOLATION
    report = json.loads((out / "overshoot" / "report.json").read_text())
    assert not report["passed"]


def test_run_traces_are_reproducible(tmp_path, capsys):
    doc = dict(MINIMAL)
    doc["experiments"] = [dict(MINIMAL["experiments"][0], algorithms=["WCGA", "WGAFR"],
                               space={"dim": 8, "p": 3.0}, replications=2, bounds=[])]
    config = tmp_path / "config.json"
    config.write_text(json.dumps(doc))
    for name in ("a", "b"):
        assert main(["--out", str(tmp_path / name), "run", str(config)]) == EXIT_OK

    first = sorted((tmp_path / "a" / "wcga_minimal" / "traces").glob("*.csv"))
    assert [p.name for p in first] == ["WCGA-r000.csv", "WCGA-r001.csv", "WGAFR-r000.csv", "WGAFR-r001.csv"]
    for path in first:
        assert path.read_bytes() == (tmp_path / "b" / "wcga_minimal" / "traces" / path.name).read_bytes()
