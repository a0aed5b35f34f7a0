import hashlib
import io
import json
import math

import numpy as np
import pytest

import edgemle as e
from edgemle.cli import dispatch


def run(capsys, *argv):
    code = dispatch(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_no_arguments_is_usage_error(capsys):
    code, _, err = run(capsys)
    assert code == 2


def test_unknown_subcommand_is_usage_error(capsys):
    code, _, _ = run(capsys, "frobnicate")
    assert code == 2


def test_missing_required_flag_is_usage_error(capsys):
    code, _, _ = run(capsys, "cdf", "--family", "logistic")
    assert code == 2


def test_moments_json(capsys):
    code, out, _ = run(capsys, "moments", "--family", "logistic")
    assert code == 0
    payload = json.loads(out)
    assert payload["fisher"] == pytest.approx(1 / 3, abs=1e-9)
    assert payload["eta"]["7"] == pytest.approx(27 / 7, abs=1e-9)


def test_moments_csv_shape_and_precision(capsys):
    code, out, _ = run(capsys, "moments", "--family", "logistic", "--format", "csv",
                       "--precision", "4")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "name,value,est_error"
    assert len(lines) == 1 + 1 + 6 + 9  # header + fisher + a1..a6 + eta2..eta10
    fisher_row = lines[1].split(",")
    assert fisher_row[0] == "fisher" and fisher_row[1] == "0.3333"


def test_cdf_grid_shape(capsys):
    code, out, _ = run(capsys, "cdf", "--family", "logistic", "--n", "100",
                       "--order", "5", "--grid", "-3:3:0.5")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == ("point,value_order1,value_order2,value_order3,"
                        "value_order4,value_order5,out_of_range_flag")
    assert len(lines) == 1 + 13
    first = lines[1].split(",")
    assert float(first[0]) == -3.0
    assert first[-1] in ("true", "false")


def test_cdf_order_one_column_matches_normal_cdf(capsys):
    from scipy.special import ndtr
    code, out, _ = run(capsys, "cdf", "--family", "logistic", "--n", "50",
                       "--order", "1", "--grid", "0:1:0.5", "--precision", "15")
    rows = [line.split(",") for line in out.strip().splitlines()[1:]]
    for row in rows:
        assert float(row[1]) == pytest.approx(ndtr(float(row[0])), abs=1e-12)


def test_quantile_grid(capsys):
    code, out, _ = run(capsys, "quantile", "--family", "logistic", "--n", "100",
                       "--order", "3", "--grid", "0.25,0.5,0.75")
    assert code == 0
    lines = out.strip().splitlines()
    assert lines[0] == "point,value_order1,value_order2,value_order3"
    mid = lines[2].split(",")
    assert float(mid[0]) == 0.5 and float(mid[3]) == 0.0


def test_mle_reads_stdin(capsys, monkeypatch):
    monkeypatch.setattr("sys.stdin", io.StringIO("0.5\n1.5\n-0.25\n2.0\n"))
    code, out, _ = run(capsys, "mle", "--family", "normal", "--input", "-")
    assert code == 0
    payload = json.loads(out)
    assert payload["theta_hat"] == pytest.approx((0.5 + 1.5 - 0.25 + 2.0) / 4, abs=1e-10)
    assert payload["n"] == 4


def test_mle_reads_csv_file(capsys, tmp_path):
    path = tmp_path / "sample.csv"
    path.write_text("1.0\n2.0\n3.0\n")
    code, out, _ = run(capsys, "mle", "--family", "normal", "--input", str(path))
    assert code == 0
    assert json.loads(out)["theta_hat"] == pytest.approx(2.0, abs=1e-10)


def test_validate_passes_builtin(capsys):
    code, out, _ = run(capsys, "validate", "--family", "logistic")
    assert code == 0
    payload = json.loads(out)
    assert payload["conditions"]["all_pass"] is True
    assert payload["density"]["integrates_to_one"] is True


def test_validate_fails_singular_family(capsys):
    code, out, _ = run(capsys, "validate", "--family", "expression",
                       "--param", "expr=sqrt(2/pi)*x**2*exp(-x**2/2)",
                       "--param", "support=[0, 1e309]")
    assert code == 1
    assert json.loads(out)["conditions"]["verdicts"]["4"] == "fail"


def test_collapse_check_passes(capsys):
    code, out, _ = run(capsys, "collapse-check")
    assert code == 0
    payload = json.loads(out)
    assert payload["exact_max_abs_coefficient"] == 0.0
    assert payload["quadrature_max_abs_coefficient"] < 1e-8


def test_collapse_check_threshold_controls_exit(capsys):
    code, _, _ = run(capsys, "collapse-check", "--threshold", "1e-20")
    assert code == 1  # quadrature noise sits above an impossible threshold


def test_compose_check_logistic(capsys):
    code, out, _ = run(capsys, "compose-check", "--family", "logistic",
                       "--n-grid", "100,400")
    assert code == 0
    payload = json.loads(out)
    assert payload["flagged_order"] is None
    assert payload["residuals"]["3"]["100"] > payload["residuals"]["3"]["400"]


def test_error_reporting_returns_one(capsys):
    code, _, err = run(capsys, "mle", "--family", "normal", "--input",
                       "/nonexistent/sample.csv")
    assert code == 1
    assert "error:" in err


def test_simulate_without_config_is_usage_error(capsys):
    code, _, err = run(capsys, "simulate")
    assert code == 2


def _config_file(tmp_path, **overrides):
    cfg = {"family": "logistic", "n_grid": [25], "replications": 256,
           "base_seed": 1234, "eval_grid": list(np.round(np.linspace(-3, 3, 25), 10))}
    cfg.update(overrides)
    path = tmp_path / "config.json"
    path.write_text(json.dumps(cfg))
    return path


def test_simulate_writes_outputs_and_manifest(capsys, tmp_path):
    cfg_path = _config_file(tmp_path)
    out_dir = tmp_path / "run"
    code, out, _ = run(capsys, "simulate", "--config", str(cfg_path),
                       "--out-dir", str(out_dir))
    assert code == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert manifest["tool"] == "edgemle"
    assert manifest["config"]["replications"] == 256
    for name, digest in manifest["outputs"].items():
        blob = (out_dir / name).read_bytes()
        assert hashlib.sha256(blob).hexdigest() == digest, name
    report = json.loads((out_dir / "report.json").read_text())
    assert report["per_n"]["25"]["replications"] == 256


def test_simulate_replay_verifies_bitwise(capsys, tmp_path):
    cfg_path = _config_file(tmp_path)
    first = tmp_path / "first"
    code, _, _ = run(capsys, "simulate", "--config", str(cfg_path),
                     "--out-dir", str(first))
    assert code == 0
    second = tmp_path / "second"
    code, out, _ = run(capsys, "simulate", "--replay", str(first / "manifest.json"),
                       "--out-dir", str(second))
    assert code == 0
    assert "replay verified" in out


def test_simulate_replay_detects_tampering(capsys, tmp_path):
    cfg_path = _config_file(tmp_path)
    first = tmp_path / "first"
    run(capsys, "simulate", "--config", str(cfg_path), "--out-dir", str(first))
    manifest = json.loads((first / "manifest.json").read_text())
    name = next(iter(manifest["outputs"]))
    manifest["outputs"][name] = "0" * 64
    tampered = tmp_path / "tampered.json"
    tampered.write_text(json.dumps(manifest))
    code, _, err = run(capsys, "simulate", "--replay", str(tampered),
                       "--out-dir", str(tmp_path / "third"))
    assert code == 1
    assert "replay mismatch" in err


def test_cdf_out_dir_writes_manifest(capsys, tmp_path):
    out_dir = tmp_path / "cdfrun"
    code, _, _ = run(capsys, "cdf", "--family", "logistic", "--n", "50",
                     "--grid", "-1:1:1", "--out-dir", str(out_dir))
    assert code == 0
    manifest = json.loads((out_dir / "manifest.json").read_text())
    assert "cdf.csv" in manifest["outputs"]


def test_version_flag(capsys):
    code, out, _ = run(capsys, "--version")
    assert code == 0
