import csv
import json
from pathlib import Path

import jsonschema
import pytest

from loopmorse.cli import SCHEDULE_COLUMNS, dumps, export_tables, main, write_csv

SCHEMA = json.loads((Path(__file__).resolve().parents[1] / "docs" / "report.schema.json").read_text())


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_analyze_point_space(capsys):
    code, out, _ = run(capsys, "analyze", "--group", "su2", "--space", "point", "--n", "16", "--degree", "4")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    assert report["series"]["text"] == "1 + t^2 + t^4"
    assert report["series"]["perfection"]["verdict"] == "perfect"
    assert [c["index"] for c in report["components"]] == [0, 2]


def test_analyze_double(capsys):
    code, out, _ = run(capsys, "analyze", "--space", "double", "--genus", "1", "--n", "16")
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    values = [c["critical_value"] for c in report["components"]]
    assert values == pytest.approx([0.0, 78.95683520871486], abs=1e-9)
    assert report["series"]["available"] is False


@pytest.mark.parametrize("argv", [
    ["analyze", "--n", "0"],
    ["analyze", "--degree", "-1"],
    ["analyze", "--metric-scale", "0"],
    ["analyze", "--space", "conjugacy"],
    ["analyze", "--group", "su3", "--space", "double"],
    ["analyze", "--group", "so3"],
])
def test_config_errors_exit_3(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main(argv)
        raise SystemExit(code)
    assert exc.value.code == 3


def test_deterministic_json(capsys):
    args = ["analyze", "--space", "conjugacy", "--eta", "0.7,-0.7", "--n", "12", "--seed", "7"]
    _, a, _ = run(capsys, *args)
    _, b, _ = run(capsys, *args)
    assert a == b


def test_verify_default_sweep(capsys):
    code, out, _ = run(capsys, "verify", "--seed", "42", "--samples", "4")
    report = json.loads(out)
    jsonschema.validate(report, SCHEMA)
    assert code == 0 and report["passed"]
    lemma = [c for c in report["checks"] if c["name"] in ("commuting", "nondeg", "invar", "first_order_image")]
    assert lemma and all(c["vacuous"] for c in lemma)


def test_verify_tight_tolerance_fails(capsys):
    code, out, err = run(capsys, "verify", "--space", "double", "--samples", "2", "--tolerance", "1e-15")
    assert code == 2
    report = json.loads(out)
    failed = [c for c in report["checks"] if not c["passed"]]
    assert failed and all(c["residual"] > 1e-15 for c in failed)
    assert "check failed" in err


def test_export_tables(capsys, tmp_path):
    code, out, _ = run(capsys, "export-tables", "--n", "80", "--degree", "13", "--output", str(tmp_path))
    assert code == 0
    rows = list(csv.DictReader(open(tmp_path / "index_table.csv")))
    assert [(r["k"], r["index"]) for r in rows] == [("0", "0"), ("1", "2"), ("2", "6"), ("3", "10")]
    series = list(csv.DictReader(open(tmp_path / "morse_series.csv")))
    assert [int(r["morse"]) for r in series] == [int(r["target"]) for r in series]
    sched = list(csv.DictReader(open(tmp_path / "conjugate_schedule.csv")))
    assert {r["label"] for r in sched} == {"k=1", "k=2", "k=3"}


def test_export_from_report_and_empty(capsys, tmp_path):
    code, out, _ = run(capsys, "analyze", "--n", "9")
    report_path = tmp_path / "report.json"
    report_path.write_text(out)
    code, _, _ = run(capsys, "export-tables", "--from-report", str(report_path), "--output", str(tmp_path / "t"))
    assert code == 0 and (tmp_path / "t" / "index_table.csv").exists()
    export_tables({"components": []}, tmp_path / "empty")
    assert (tmp_path / "empty" / "index_table.csv").read_text().count("\n") == 1
    write_csv(tmp_path / "s.csv", SCHEDULE_COLUMNS, [])
    assert (tmp_path / "s.csv").read_text() == ",".join(SCHEDULE_COLUMNS) + "\n"


def test_csv_format_and_timings(capsys):
    code, out, _ = run(capsys, "analyze", "--n", "9", "--format", "csv")
    assert code == 0 and out.splitlines()[0].startswith("label,k,")
    code, out, _ = run(capsys, "analyze", "--n", "9", "--timings")
    assert "total" in json.loads(out)["timings"]


def test_float_formatting():
    assert dumps({"x": 0.1}) == '{\n  "x": 0.10000000000000001\n}\n'
    assert dumps({"x": float("inf")}).strip().endswith("null\n}")


def test_cohomology_input(capsys, tmp_path):
    path = tmp_path / "coh.json"
    path.write_text(json.dumps({"k=0": [1, 0, 1], "k=1": [1, 0, 2]}))
    code, out, _ = run(capsys, "analyze", "--space", "double", "--n", "16", "--cohomology", str(path))
    assert code == 0
    assert json.loads(out)["series"]["coefficients"] == [1, 0, 1, 0, 1]
    path.write_text("not json")
    code, _, _ = run(capsys, "analyze", "--space", "double", "--cohomology", str(path))
    assert code == 3
