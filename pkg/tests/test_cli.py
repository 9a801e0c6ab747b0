import csv
import io
import json

import pytest

from hoferlab.cli import (
    EXIT_PASS,
    EXIT_USAGE,
    SCHEMA,
    main,
    parse_config,
    report_csv,
    report_json,
    run,
)
from hoferlab.errors import ConfigError


def _report(tmp_path, argv, name="out.json"):
    path = tmp_path / name
    code = main(argv + ["--json", str(path)])
    return code, json.loads(path.read_text()), path.read_bytes()


def test_empty_config_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "empty.json"
    cfg.write_text("")
    assert main(["--config", str(cfg)]) == EXIT_USAGE
    assert "empty config" in capsys.readouterr().err
    assert main([]) == EXIT_USAGE


def test_unknown_key_and_bad_values_rejected(tmp_path, capsys):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"command": "karea", "bogus": 1}))
    assert main(["--config", str(cfg)]) == EXIT_USAGE
    assert "bogus" in capsys.readouterr().err
    for doc in ({"command": "karea", "radial": -3}, {"command": "torus", "area": 0.0}, {"command": "nope"}, {"command": "reproduce"}):
        with pytest.raises(ConfigError):
            parse_config(doc)


def test_malformed_json_reports_line(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text('{\n  "command": "maslov",\n  "k": \n}')
    assert main(["--config", str(cfg)]) == EXIT_USAGE
    assert "line 4" in capsys.readouterr().err


def test_unknown_command_line_flag():
    assert main(["karea", "--no-such-flag"]) == EXIT_USAGE


def test_command_line_overrides_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"command": "pairing", "loop": "psi:2,2", "radial": 8, "angular": 8}))
    code, doc, _ = _report(tmp_path, ["--config", str(cfg), "pairing", "--loop", "psi:1,2", "--grid", "24,32"])
    assert code == EXIT_PASS
    assert doc["config"]["loop"] == "psi:1,2"
    assert doc["config"]["radial"] == 24


def test_json_schema_round_trip(tmp_path):
    code, doc, raw = _report(tmp_path, ["pairing", "--loop", "psi:1,2", "--radial", "24", "--angular", "32"])
    assert code == EXIT_PASS
    assert doc["schema"] == SCHEMA and doc["passed"] is True
    assert set(doc) == {"schema", "reference_table_version", "command", "config", "rows", "tables", "passed"}
    for row in doc["rows"]:
        assert set(row) == {"quantity", "computed", "reference", "tolerance", "passed", "provenance"}
        assert row["provenance"]
        assert row["passed"] == (abs(row["computed"] - row["reference"]) <= row["tolerance"])
    again = json.dumps(json.loads(raw), indent=2, sort_keys=True) + "\n"
    assert again.encode() == raw


def test_pairing_class_filter(tmp_path):
    _, doc, _ = _report(tmp_path, ["pairing", "--loop", "psi:1,2", "--grid", "24,32", "--class", "A-"])
    assert [r["quantity"] for r in doc["rows"]] == ["pairing(A-) psi:1,2"]


def test_csv_row_count_matches_report():
    report = run(parse_config({"command": "pairing", "loop": "psi:2,3", "radial": 24, "angular": 32}))
    rows = list(csv.reader(io.StringIO(report_csv(report))))
    assert len(rows) - 1 == len(report.rows)
    assert report_csv(report) == report_csv(run(parse_config({"command": "pairing", "loop": "psi:2,3", "radial": 24, "angular": 32})))


def test_svg_output(tmp_path):
    svg = tmp_path / "snake.svg"
    code = main(["torus", "--deltas", "0.1,0.01", "--area", "0.2", "--svg", str(svg), "--json", str(tmp_path / "t.json")])
    assert code == EXIT_PASS
    assert svg.read_text().startswith("<svg")
    assert main(["pairing", "--grid", "8,8", "--svg", str(tmp_path / "x.svg"), "--json", str(tmp_path / "p.json")]) == EXIT_USAGE


def test_epsilon_accepts_loop_selector(tmp_path):
    _, a, _ = _report(tmp_path, ["epsilon", "--loop", "psi:1,1", "--grid", "24,32"], "a.json")
    _, b, _ = _report(tmp_path, ["epsilon", "--k", "1", "--n", "1", "--grid", "24,32"], "b.json")
    assert a["rows"] == b["rows"]
    assert main(["epsilon", "--loop", "phi:1,1", "--grid", "8,8"]) == EXIT_USAGE


def test_unwritable_output_path(tmp_path):
    assert main(["pairing", "--grid", "8,8", "--json", str(tmp_path / "missing" / "r.json")]) == 1


@pytest.mark.parametrize("argv", [
    ["karea", "--loop", "psi:1,2", "--grid", "24,32", "--eps", "0.1"],
    ["verify-sections", "--loop", "psi:1,2", "--perturbations", "1"],
])
def test_report_bytes_independent_of_thread_count(tmp_path, monkeypatch, argv):
    out = []
    for threads in ("1", "4"):
        monkeypatch.setenv("HOFERLAB_THREADS", threads)
        code, _, raw = _report(tmp_path, argv, f"r{threads}.json")
        assert code == EXIT_PASS
        out.append(raw)
    assert out[0] == out[1]


def test_reproduce_headline_checks(tmp_path):
    code, doc, _ = _report(tmp_path, ["reproduce", "theorem-a", "--k", "1", "--n", "2"])
    assert code == EXIT_PASS
    names = " ".join(r["quantity"] for r in doc["rows"])
    for key in ("hofer_length", "karea", "pairing(A+)", "pairing(A-)", "epsilon upper", "epsilon lower"):
        assert key in names


def test_reproduce_torus_marks_lower_bound_cited():
    report = run(parse_config({"command": "reproduce", "target": "torus", "area": 0.3}))
    assert report.passed
    cited = [r for r in report.rows if "lower bound" in r.quantity]
    assert len(cited) == 1 and "cited" in cited[0].provenance
    widths = [t["width"] for t in report.tables["torus"]]
    assert widths[-1] - 0.3 < 0.01
    assert json.loads(report_json(report))["tables"]["torus"][0]["delta"] == 0.1
