import json
import subprocess
import sys

import pytest

from assortopt.cli import main
from assortopt.instance import Instance


@pytest.fixture
def tiny_file(tmp_path):
    path = tmp_path / "tiny.json"
    assert main(["gen", "--family", "tiny", "--n-products", "7", "--n-classes", "2", "--seed", "4",
                 "--out", str(path)]) == 0
    return path


def test_gen_families(tmp_path):
    path = tmp_path / "u.json"
    main(["gen", "--family", "uniform200", "--nu0", "5", "--kappa", "10", "--n-products", "20",
          "--n-classes", "3", "--seed", "1", "--out", str(path)])
    inst = Instance.load(path)
    assert inst.nu.shape == (3, 20)
    gc = tmp_path / "g.json"
    main(["gen", "--family", "general-capacity", "--nu0", "10", "--kappa", "5,2", "--out", str(gc)])
    assert len(Instance.load(gc).constraints) == 6
    with pytest.raises(SystemExit):
        main(["gen", "--family", "uniform200"])


def test_solve_and_oracle(tiny_file, tmp_path, capsys):
    report = tmp_path / "rep.json"
    main(["solve", "--model", "conic-mc", "--instance", str(tiny_file), "--report", str(report)])
    line = capsys.readouterr().out
    assert line.startswith("conic-mc\toptimal")
    rep = json.loads(report.read_text())
    main(["oracle", "--instance", str(tiny_file)])
    oracle = json.loads(capsys.readouterr().out)
    assert rep["revenue"] == pytest.approx(oracle["revenue"], abs=1e-6)
    assert rep["assortment"] == oracle["assortment"]


def test_bounds_and_export(tiny_file, tmp_path, capsys):
    main(["bounds", "--instance", str(tiny_file)])
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 1 + 2 * 7
    lp = tmp_path / "m.lp"
    main(["export", "--instance", str(tiny_file), "--model", "conic", "--out", str(lp)])
    assert "qc_" in lp.read_text()
    main(["export", "--instance", str(tiny_file), "--model", "conic", "--linearize-only", "--out", str(lp)])
    text = lp.read_text()
    assert "qc_" not in text and " oa_" in text


def test_bench_and_report(tmp_path, capsys):
    out = tmp_path / "r.jsonl"
    main(["bench", "--family", "uniform200", "--formulations", "conic-mc", "--reps", "1",
          "--time-limit", "60", "--out", str(out), "--quiet"])
    table = capsys.readouterr().out
    assert table.startswith("| nu0 |") and "Average" in table
    assert len(out.read_text().strip().split("\n")) == 2 * 4
    main(["report", "--in", str(out), "--format", "tsv"])
    assert capsys.readouterr().out.count("\n") == 2 + 2 * 8 + 2


def test_console_entry_point(tiny_file):
    res = subprocess.run([sys.executable, "-m", "assortopt.cli", "oracle", "--instance", str(tiny_file)],
                         capture_output=True, text=True, check=True)
    assert "revenue" in res.stdout
