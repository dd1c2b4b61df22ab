import json
import math
import subprocess
import sys

import numpy as np
import pytest

from smcalc.cli import run


def out_args(tmp_path):
    return ["--out", str(tmp_path), "--no-timestamp"]


def read(tmp_path, name):
    return json.loads((tmp_path / name).read_text())


def test_sym_integral_on_itself(tmp_path):
    code = run(out_args(tmp_path) + ["sym-integral", "--profile", "[[1, 4]]", "--levels", "8,10,12"])
    assert code == 0
    rep = read(tmp_path, "sym-integral-report.json")["report"]
    assert rep["converged"] and rep["spread"] < 1e-15
    assert read(tmp_path, "sym-integral-report.json")["config"]["profile"] == "[[1, 4]]"
    table = (tmp_path / "sym-integral-table.csv").read_text().splitlines()
    assert table[0].startswith("# {") and table[1] == "mesh,sum"
    assert len(table) == 5


def test_parseval_report(tmp_path):
    assert run(out_args(tmp_path) + ["parseval", "--eps", "1", "--M", "1000000"]) == 0
    d = read(tmp_path, "parseval-report.json")
    assert abs(d["partial_sum"] - (2 * math.pi - 1) / 8) <= 1e-6
    assert d["config"]["eps"] == 1.0 and d["command"] == "parseval"


def test_counterexample1_and_check(tmp_path):
    assert run(out_args(tmp_path) + ["counterexample1", "--depth", "2"]) == 0
    d = read(tmp_path, "counterexample1-certificate.json")
    assert d["verified"] and len(d["certificate"]["eps_sequence"]) == 4
    cert = tmp_path / "cert.json"
    (tmp_path / "counterexample1-certificate.json").rename(cert)
    assert run(out_args(tmp_path) + ["counterexample1", "--check", str(cert)]) == 0
    # a broken certificate fails verification
    d["certificate"]["blocks"][1][1] = d["certificate"]["blocks"][1][0]
    cert.write_text(json.dumps(d))
    assert run(out_args(tmp_path) + ["counterexample1", "--check", str(cert)]) == 1


def test_counterexample2_and_check(tmp_path):
    assert run(out_args(tmp_path) + ["counterexample2", "--depth", "1", "--seeds", "20"]) == 0
    cert = tmp_path / "counterexample2-certificate.json"
    d = read(tmp_path, cert.name)
    assert d["verified"] and d["certificate"]["fraction_below_1"][0] >= 0.9
    assert run(out_args(tmp_path) + ["counterexample2", "--check", str(cert)]) == 0


def test_sample_path_csv(tmp_path):
    from smcalc import SampledPath

    assert run(out_args(tmp_path) + ["sample-path", "--points", "257", "--seed", "3"]) == 0
    mu = SampledPath.from_csv(tmp_path / "sample-path-path.csv")
    assert len(mu) == 257 and mu.values[0] == 0.0
    lines = (tmp_path / "sample-path-path.csv").read_text().splitlines()
    assert lines[1] == "t,value"


def test_rule_commands_and_failures(tmp_path):
    assert run(out_args(tmp_path) + ["chain-rule", "--field", "sin-shift", "--V", "half-t"]) == 0
    assert run(out_args(tmp_path) + ["substitution-rule", "--field", "linear", "--g", "square-g", "--V", "t"]) == 0
    # a deliberately impossible tolerance turns into a failed verification
    assert run(out_args(tmp_path) + ["chain-rule", "--tol", "1e-30"]) == 1


def test_sde_commands(tmp_path):
    assert run(out_args(tmp_path) + ["sde-solve", "--points", "1025"]) == 0
    x = np.loadtxt(tmp_path / "sde-solve-X.csv", delimiter=",", skiprows=2)
    mu = np.loadtxt(tmp_path / "sde-solve-Y.csv", delimiter=",", skiprows=2)
    assert x.shape == mu.shape == (1025, 2)
    assert run(out_args(tmp_path) + ["sde-verify", "--drift", "unit-drift", "--psi", "state"]) == 0
    rows = np.loadtxt(tmp_path / "sde-verify-residuals.csv", delimiter=",", skiprows=2)
    assert rows[-1, 1] < 1e-2


def test_nvar_and_quantile(tmp_path):
    assert run(out_args(tmp_path) + ["nvar", "--profile", "[[1, 64]]", "--points", "16385"]) == 0
    rows = read(tmp_path, "nvar-summary.json")["estimates"]
    assert [r[0] for r in rows] == [0.1, 0.05, 0.01]
    assert run(out_args(tmp_path) + ["--threads", "2", "quantile", "--seeds", "10", "--levels", "4,5"]) == 0
    assert len(read(tmp_path, "quantile-summary.json")["quantiles"]) == 2


@pytest.mark.parametrize(
    "argv",
    [
        ["sym-integral", "--field", "cubic"],
        ["sym-integral", "--profile", "[[1,"],
        ["sym-integral", "--profile", "[[3, 1]]"],
        ["sde-solve", "--sigma", "nope"],
        ["no-such-command"],
        ["parseval", "--eps", "7"],
        ["parseval", "--M", "many"],
    ],
)
def test_usage_errors_exit_two(tmp_path, capsys, argv):
    assert run(out_args(tmp_path) + argv) == 2
    err = capsys.readouterr().err.strip()
    assert err.startswith("smcalc: error:") and "\n" not in err


def test_missing_output_directory(tmp_path, capsys):
    assert run(["--out", str(tmp_path / "absent"), "parseval"]) == 2
    assert "does not exist" in capsys.readouterr().err


def test_env_output_directory(tmp_path, monkeypatch):
    monkeypatch.setenv("SMCALC_OUT", str(tmp_path))
    assert run(["parseval", "--M", "100"]) == 0
    assert (tmp_path / "parseval-report.json").exists()


def test_config_file_and_flag_precedence(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"eps": 0.5, "M": 1000}))
    assert run(out_args(tmp_path) + ["--config", str(cfg), "parseval"]) == 0
    d = read(tmp_path, "parseval-report.json")["config"]
    assert d["eps"] == 0.5 and d["M"] == 1000
    assert run(out_args(tmp_path) + ["--config", str(cfg), "parseval", "--M", "2000"]) == 0
    d = read(tmp_path, "parseval-report.json")["config"]
    assert d["eps"] == 0.5 and d["M"] == 2000
    cfg.write_text(json.dumps({"unknown_key": 1}))
    assert run(out_args(tmp_path) + ["--config", str(cfg), "parseval"]) == 2


def test_config_list_values(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"levels": "8,9,10", "profile": "[[1, 4]]"}))
    assert run(out_args(tmp_path) + ["--config", str(cfg), "sym-integral"]) == 0
    rep = read(tmp_path, "sym-integral-report.json")
    assert rep["config"]["levels"] == [8, 9, 10]


def test_outputs_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    for d in (a, b):
        assert run(["--out", str(d), "--no-timestamp", "chain-rule", "--seed", "7"]) == 0
    for name in ("chain-rule-report.json", "chain-rule-residuals.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_timestamp_present_by_default(tmp_path):
    assert run(["--out", str(tmp_path), "parseval", "--M", "10"]) == 0
    assert "timestamp" in read(tmp_path, "parseval-report.json")


def test_floats_written_with_17_digits(tmp_path):
    assert run(out_args(tmp_path) + ["parseval", "--eps", "0.1", "--M", "10"]) == 0
    text = (tmp_path / "parseval-report.json").read_text()
    assert '"eps": 0.10000000000000001' in text


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "smcalc", "--out", str(tmp_path), "parseval", "--M", "10"],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    proc = subprocess.run([sys.executable, "-m", "smcalc", "bogus"], capture_output=True, text=True)
    assert proc.returncode == 2
