import json
import subprocess
import sys

import pytest

from laguerre_edge.acceptance import load_manifest
from laguerre_edge.cli import dispatch

SUBCOMMANDS = ["constants", "geometry", "sample", "logdet", "simulate", "diagnose", "verify"]


def run(capsys, *argv):
    code = dispatch(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_constants_collapse(capsys):
    code, out, _ = run(capsys, "constants", "--n", "10000", "--lambda", "1", "--alpha", "2")
    assert code == 0
    rec = json.loads(out)
    assert rec["c_lambda"] == 1.0
    assert rec["params"]["n"] == 10000


def test_logdet_with_oracle(capsys):
    code, out, _ = run(capsys, "logdet", "--n", "100", "--lambda", "0.5", "--alpha", "2", "--seed", "7", "--oracle")
    assert code == 0
    rec = json.loads(out)
    assert abs(rec["log_abs_calD"] - rec["oracle_value"]) < 1e-8 * abs(rec["log_abs_calD"])
    assert rec["sign"] in (-1, 1)
    assert set(rec) >= {"log_abs_calD", "sign", "max_abs_r", "oracle_value"}


def test_logdet_oracle_limit_is_numeric_error(capsys):
    code, _, err = run(capsys, "logdet", "--n", "6000", "--lambda", "0.5", "--oracle")
    assert code == 2
    assert "OracleFailureError" in err


def test_geometry_dump(capsys, tmp_path):
    code, out, _ = run(capsys, "geometry", "dump", "--n", "10", "--lambda", "0.5")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "i,rho_plus,rho_minus,omega,gamma_ratio,tau,delta,g"
    assert len(lines) == 11
    target = tmp_path / "geo.csv"
    assert dispatch(["geometry", "--n", "10", "--lambda", "0.5", "--output", str(target)]) == 0
    assert target.read_text() == out


def test_sample_csv(capsys):
    code, out, _ = run(capsys, "sample", "--n", "6", "--lambda", "0.5", "--seed", "3", "--eigenvalues")
    assert code == 0
    lines = out.strip().split("\n")
    assert lines[0] == "i,a_sq,b_sq,diag,offdiag,eigenvalue_scaled"
    assert len(lines) == 7
    assert lines[-1].split(",")[2] == ""


@pytest.mark.parametrize("cmd", SUBCOMMANDS)
def test_help_everywhere(capsys, cmd):
    code, out, _ = run(capsys, cmd, "--help")
    assert code == 0
    assert "usage" in out


@pytest.mark.parametrize("argv", [
    ["logdet", "--n", "10", "--lambda", "0.5", "--bogus"],
    ["logdet", "--lambda", "0.5"],
    ["nonsense"],
    [],
    ["constants", "--n", "10", "--lambda", "1.5"],
    ["constants", "--n", "3", "--lambda", "0.5"],
    ["simulate", "--replicas", "3"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 1
    assert err


def test_simulate_outputs(capsys, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 120, "lambda": 0.5, "alpha": 2, "replicas": 20, "seed": 4}))
    out_path, summary, csv_path = tmp_path / "a.jsonl", tmp_path / "s.json", tmp_path / "a.csv"
    code, out, err = run(capsys, "simulate", "--config", str(cfg), "--workers", "1", "--output", str(out_path),
                         "--summary", str(summary), "--csv", str(csv_path))
    assert code == 0 and out == ""
    assert "simulate: 20/20 replicas" in err
    recs = [json.loads(line) for line in out_path.read_text().splitlines()]
    assert len(recs) == 20
    assert json.loads(summary.read_text())["params"]["alpha"] == 2.0
    assert csv_path.read_text().count("\n") == 21
    code, out2, _ = run(capsys, "simulate", "--config", str(cfg), "--workers", "1", "--quiet")
    assert out2 == out_path.read_text()


def test_simulate_repeatable_bytes(capsys, tmp_path):
    paths = []
    for k, workers in enumerate(("1", "2")):
        path = tmp_path / f"{k}.jsonl"
        code = dispatch(["simulate", "--n", "4000", "--lambda", "0.5", "--replicas", "2000", "--seed", "17",
                         "--workers", workers, "--quiet", "--output", str(path)])
        assert code == 0
        paths.append(path)
    capsys.readouterr()
    assert paths[0].read_bytes() == paths[1].read_bytes()


def test_diagnose_report(capsys):
    code, out, err = run(capsys, "diagnose", "--n", "2000", "--lambda", "0.5", "--replicas", "20")
    assert code == 0
    report = json.loads(out)
    ids = {r["lemma_id"] for r in report}
    assert ids == {"variance_lemma", "a0_lemma", "lyapunov", "x_second_moment", "b3_lemma", "uniform_r"}
    for r in report:
        assert set(r) >= {"lemma_id", "predicted", "observed", "ratio", "tolerance", "pass"}
        assert r["ratio"] == pytest.approx(r["observed"] / r["predicted"], rel=1e-12)
    assert "diagnose:" in err


def test_verify_exit_codes(capsys, tmp_path):
    code, out, err = run(capsys, "verify", "--only", "2", "7")
    assert code == 0
    results = json.loads(out)
    assert [r["criterion"] for r in results] == [2, 7]
    assert "[PASS] criterion 2" in err
    manifest = load_manifest()
    manifest["geometry_identities"]["rel_tol"] = 0.0
    alt = tmp_path / "tol.json"
    alt.write_text(json.dumps(manifest))
    code, out, err = run(capsys, "verify", "--only", "2", "--tolerance-manifest", str(alt))
    assert code == 3
    assert "[FAIL] criterion 2" in err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "laguerre_edge", "constants", "--n", "100", "--lambda", "0.25"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["c_lambda"] == pytest.approx(0.09045749511556154, rel=1e-13)
