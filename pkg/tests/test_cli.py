import csv
import json

import pytest

from lhmip import reporting
from lhmip.cli import main


def run(*argv):
    return main([str(a) for a in argv])


def load(path):
    return json.loads(path.read_text())


@pytest.fixture
def epr2(tmp_path):
    path = tmp_path / "epr2.json"
    assert run("gen", "epr-chain", "--n", 2, "--out", path) == 0
    return path


def test_gen_then_validate(tmp_path, epr2):
    out = tmp_path / "v.json"
    assert run("validate", epr2, "--out", out) == 0
    doc = load(out)
    assert doc["valid"] and doc["n"] == 2 and doc["m"] == 1
    assert doc["manifest"]["inputs"][str(epr2)] == reporting.file_digest(epr2)
    reporting.validate(doc, "validate")


def test_usage_errors_exit_2(capsys):
    assert run("frobnicate") == 2
    assert run("gen", "epr-chain") == 2
    assert run("gen", "epr-chain", "--n", 0) == 2


def test_io_and_validation_errors_exit_1(tmp_path, capsys):
    assert run("validate", tmp_path / "nope.json") == 1
    bad = tmp_path / "bad.json"
    bad.write_text('{"n": 1, "k": 1, "terms": [{"support": [0], "matrix": [[[1.5, 0], [0, 0]], [[0, 0], [0, 0]]]}]}')
    assert run("validate", bad) == 1
    assert "error" in capsys.readouterr().err
    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert run("validate", broken) == 1


def test_honest_run_accepts(tmp_path, epr2):
    s = tmp_path / "s.json"
    rep = tmp_path / "r.json"
    table = tmp_path / "r.csv"
    assert run("strategy", "honest", "--instance", epr2, "--out", s) == 0
    assert run("run", "--instance", epr2, "--strategy", s, "--out", rep, "--csv", table) == 0
    doc = load(rep)
    assert doc["p_overall"] == pytest.approx(1.0, abs=1e-12)
    assert doc["mode"] == "exact"
    rows = list(csv.DictReader(table.open()))
    assert float(rows[0]["p_overall"]) == doc["p_overall"]


def test_sample_reports_identical_modulo_timestamp(tmp_path, epr2):
    s = tmp_path / "s.json"
    assert run("strategy", "random", "--n", 2, "--k", 2, "--seed", 1, "--out", s) == 0
    docs = []
    for _ in range(2):
        rep = tmp_path / "r.json"
        assert run("run", "--instance", epr2, "--strategy", s, "--mode", "sample", "--seed", 7, "--shots", 500, "--out", rep) == 0
        doc = load(rep)
        del doc["manifest"]["timestamp"]
        docs.append(doc)
    assert docs[0] == docs[1]
    assert docs[0]["seed"] == 7 and docs[0]["shots"] == 500


def test_mismatched_sizes_exit_1(tmp_path, epr2):
    s = tmp_path / "s.json"
    assert run("strategy", "random", "--n", 3, "--k", 2, "--seed", 0, "--out", s) == 0
    assert run("run", "--instance", epr2, "--strategy", s) == 1


def test_other_commands(tmp_path, capsys):
    one = tmp_path / "one.json"
    assert run("gen", "single-qubit", "--n", 1, "--out", one) == 0
    s = tmp_path / "s.json"
    p = tmp_path / "p.json"
    assert run("strategy", "honest", "--instance", one, "--out", s) == 0
    assert run("strategy", "perturb", "--strategy", s, "--theta", 0.1, "--seed", 3, "--out", p) == 0
    g = tmp_path / "g.json"
    assert run("ground", one, "--witness", "--out", g) == 0
    assert load(g)["energy"] == pytest.approx(0.0, abs=1e-12)
    x = tmp_path / "x.json"
    assert run("extract", "--instance", one, "--strategy", s, "--out", x) == 0
    assert load(x)["diagnostics"]["fidelity_to_ground"] == pytest.approx(1.0, abs=1e-9)
    d = tmp_path / "d.json"
    assert run("diagnose", "claim1", "--strategy", p, "--qubit", 0, "--set", "0", "--aggregate", "--out", d) == 0
    assert len(load(d)["per_prover"]) == 5
    assert run("diagnose", "claim1", "--strategy", p, "--qubit", 0, "--set", "1") == 1
    o = tmp_path / "o.json"
    so = tmp_path / "so.json"
    assert run("optimize", "--instance", one, "--restarts", 1, "--sweeps", 2, "--out", o, "--strategy-out", so) == 0
    doc = load(o)
    assert doc["verified_acceptance"] == pytest.approx(doc["best_acceptance"], abs=1e-10)
    reporting.validate(load(so), "strategy")
    assert run("code", "tables") == 0
    tables = json.loads(capsys.readouterr().out)
    reporting.validate(tables, "code_tables")
    assert run("gen", "random", "--n", 3, "--k", 2, "--m", 4, "--seed", 1) == 0
