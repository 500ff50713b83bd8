import json
import subprocess
import sys

import pytest

from mixedvol.cli import Report, main, render_csv, report_render, resolve_settings, run


def invoke(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_verify_af_shipped_corpus(capsys):
    code, out, _ = invoke(capsys, "verify-af")
    lines = out.strip().splitlines()
    assert code == 0 and len(lines) == 46
    assert lines[0].startswith("case,V12,V11,V22,V12_sq,V11_V22,margin")


def test_verify_bm_cube_simplex(capsys):
    code, out, _ = invoke(capsys, "verify-bm", "cube", "simplex3")
    assert code == 0 and out.count("\n") == 4


def test_failure_exit_and_record(capsys):
    code, _, err = invoke(capsys, "mixed-volume", "square", "triangle", "--nodes", "21", "--tol", "1e-9")
    assert code == 1
    rec = json.loads(err.strip().splitlines()[-1])
    assert rec["status"] == "fail" and rec["failures"]


def test_malformed_json_is_position_annotated(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"vertices": [[0, 0], [1, 0]\n "name": "x"}')
    code, _, err = invoke(capsys, "verify-af", str(bad), "square")
    assert code == 2 and "bad.json:2:" in err


@pytest.mark.parametrize("argv", [
    ["verify-af", "square"],
    ["verify-af", "--tol", "-1"],
    ["verify-af", "no_such_body"],
    ["mixed-volume", "square", "triangle", "--nodes", "40"],
    ["bl-report", "square", "triangle", "--m", "5"],
    ["lefschetz", "--dims", "7"],
])
def test_input_errors_exit_two(capsys, argv):
    assert invoke(capsys, *argv)[0] == 2


def test_precedence_defaults_config_flags(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"seed": 5, "radius": 30.0}))
    s = resolve_settings("lefschetz", {"seed": 9}, json.loads(cfg.read_text()))
    assert s["seed"] == 9 and s["radius"] == 30.0 and s["tol"] == 1e-9 and s["samples"] == 200
    bad = tmp_path / "u.json"
    bad.write_text('{"sede": 1}')
    with pytest.raises(Exception, match="unknown config keys"):
        run("verify-bm", ["cube", "simplex3"], {}, str(bad))


def test_config_inputs(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"inputs": ["square", "triangle"], "tol": 1e-6}))
    code, rep, s = run("verify-af", [], {}, str(cfg))
    assert code == 0 and len(rep.rows) == 1 and s["tol"] == 1e-6


def test_empty_report_renders_header_only():
    rep = Report("x", ["a", "b"], [])
    table, js = report_render(rep)
    assert table.strip().splitlines() == [table.strip()] and "a" in table
    assert json.loads(js)["rows"] == []
    assert render_csv(["a", "b"], []) == "a,b\n"


def test_twelve_significant_digits():
    assert render_csv(["v"], [{"v": 1 / 3}]) == "v\n0.333333333333\n"


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_same_seed_gives_identical_artifacts(tmp_path, capsys, fmt):
    paths = [tmp_path / f"{i}.{fmt}" for i in range(2)]
    for p in paths:
        assert main(["lefschetz", "--samples", "20", "--seed", "3", "--format", fmt, "--out", str(p)]) == 0
    capsys.readouterr()
    assert paths[0].read_bytes() == paths[1].read_bytes()
    other = tmp_path / f"o.{fmt}"
    main(["lefschetz", "--samples", "20", "--seed", "4", "--format", fmt, "--out", str(other)])
    assert other.read_bytes() != paths[0].read_bytes()


def test_bl_report_is_convexity_csv(capsys):
    from mixedvol.brascamp_lieb import CSV_COLUMNS

    code, out, _ = invoke(capsys, "bl-report", "square", "triangle", "--nodes", "161")
    assert code == 0
    assert out.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert len(out.strip().splitlines()) == 10


def test_metric_cert_and_sweeps(capsys):
    assert invoke(capsys, "metric-cert", "--dims", "2", "--samples", "5000")[0] == 0
    assert invoke(capsys, "hrr-sweep", "--samples", "200")[0] == 0
    assert invoke(capsys, "verify-kt", "square", "triangle")[0] == 0


def test_console_entry_point():
    res = subprocess.run([sys.executable, "-m", "mixedvol.cli", "verify-bm", "square", "triangle"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("pair,")
