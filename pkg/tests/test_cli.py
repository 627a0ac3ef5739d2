import csv
import io
import json

import numpy as np
import pytest

from laxtower import cli
from laxtower.cli import EXIT_CONFIG, EXIT_FAIL, EXIT_OK, main, parse_init


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_verify_report_schema_and_exit(capsys):
    code, out, _ = run(["verify", "--suite", "pde", "--probes", "2"], capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    assert rows and list(rows[0]) == cli.COLUMNS
    assert all(r["pass"] == "1" for r in rows)
    assert all(r["anchor"] for r in rows)


def test_verify_is_deterministic(capsys):
    argv = ["verify", "--suite", "jacobi", "--rmatrix", "benny", "--probes", "1", "--seed", "3"]
    _, a, _ = run(argv, capsys)
    _, b, _ = run(argv, capsys)
    assert a == b


def test_config_errors_exit_two(capsys):
    code, _, err = run(["reduce", "--family", "benny", "--n", "3"], capsys)
    assert code == EXIT_CONFIG and "no closed-form reduction" in err
    code, _, err = run(["evolve", "--hierarchy", "benny", "--T", "0.25", "--dt", "0.1"], capsys)
    assert code == EXIT_CONFIG
    code, _, _ = run(["evolve", "--hierarchy", "benny", "--T", "0.01", "--init", "u0=y"], capsys)
    assert code == EXIT_CONFIG
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--suite", "nonsense"])
    assert exc.value.code == 2


def test_failed_check_exits_one(capsys):
    # drift tolerance below round-off cannot be met
    code, _, err = run(["evolve", "--hierarchy", "dtoda", "--T", "0.01", "--tol", "1e-30"], capsys)
    assert code == EXIT_FAIL and "FAIL conserved_drift" in err


def test_evolve_series_with_init_and_grid(capsys):
    argv = ["evolve", "--hierarchy", "benny", "--flow", "2", "--T", "0.01", "--dt", "1e-3",
            "--modes", "16", "--init", "u0=0.1*sin;um1=1", "--grid", "4"]
    code, out, err = run(argv, capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    assert len(rows) == 11
    assert {"u0@1", "um1@3", "trace5", "drift5", "casimir_drift2"} <= set(rows[0])
    # grid point j sits at x = j/4
    assert float(rows[0]["u0@1"]) == pytest.approx(0.1)
    assert float(rows[0]["um1@2"]) == pytest.approx(1.0)
    assert max(float(r["drift3"]) for r in rows) < 1e-8
    assert rows_of(err)[0]["check_id"] == "conserved_drift"


def test_displayed_dtoda_flow_conserves(capsys):
    code, out, _ = run(["evolve", "--hierarchy", "dtoda", "--flow", "1", "--T", "0.25"], capsys)
    assert code == EXIT_OK
    rows = rows_of(out)
    assert max(float(r[f"drift{k}"]) for r in rows for k in range(1, 6)) < 1e-8


def test_parse_init():
    u0, um1 = parse_init("benny", "u0 = 0.2*cos ; um1=1+0.1*sin(4*pi*x)", 8)
    x = np.arange(8) / 8
    assert np.allclose(u0(x), 0.2 * np.cos(2 * np.pi * x))
    assert np.allclose(um1(x), 1 + 0.1 * np.sin(4 * np.pi * x))
    u0, u1 = parse_init("dtoda", "u1=2", 8)
    assert u1.mean() == 2.0 and u0.norm() > 0  # u0 keeps the default data
    for bad in ("u2=1", "u0", "u0=1/(", "u0=log(sin)"):
        with pytest.raises(ValueError):
            parse_init("benny", bad, 8)


def test_out_file_and_manifest(tmp_path, capsys):
    out = tmp_path / "r.csv"
    code, stdout, _ = run(["reduce", "--family", "benny", "--n", "0", "--probes", "2",
                           "--out", str(out)], capsys)
    assert code == EXIT_OK and stdout == ""
    assert rows_of(out.read_text())[0]["check_id"]
    manifest = json.loads((tmp_path / "r.csv.manifest.json").read_text())
    assert manifest["family"] == "benny" and manifest["n"] == 0 and manifest["seed"] == 0


def test_environment_output_directory(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    code, stdout, _ = run(["evolve", "--hierarchy", "dtoda", "--T", "0.01"], capsys)
    assert code == EXIT_OK and stdout == ""
    assert (tmp_path / "evolve.csv").exists()
    assert rows_of((tmp_path / "evolve-checks.csv").read_text())[1]["check_id"] == "casimir_drift"
    assert (tmp_path / "evolve.csv.manifest.json").exists()


def test_text_format(capsys):
    code, out, _ = run(["operators", "--family", "benny", "--check", "metric", "--format", "text"],
                       capsys)
    assert code == EXIT_OK
    assert out.split()[:3] == ["check_id", "anchor", "params"]


@pytest.mark.parametrize("family", ["benny", "dtoda"])
def test_operators_structure(family, capsys):
    code, out, _ = run(["operators", "--family", family, "--check", "structure"], capsys)
    assert code == EXIT_OK
    assert {"operator_skew", "matrix_action", "casimir_kernel", "flow_consistency"} <= {
        r["check_id"] for r in rows_of(out)}
