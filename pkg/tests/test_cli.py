import json

import pytest

from hamiltonia.cli import load_config, run


def _report(tmp_path, stem):
    return json.loads((tmp_path / f"{stem}.json").read_text())


def test_kepler_series_with_trees(tmp_path):
    assert run(["--out-dir", str(tmp_path), "kepler", "series", "--order", "6", "--check-trees"]) == 0
    d = _report(tmp_path, "kepler-series")
    assert d["ok"] and all(v["trees"] for v in d["report"]["checks"].values())
    # h_1 = sin(lambda): coefficients -i/2 and +i/2
    assert set(d["report"]["coefficients"]["1"]) == {"1", "-1"}


def test_lindstedt_torus_flow(tmp_path):
    argv = ["--out-dir", str(tmp_path), "lindstedt", "torus", "--K", "8", "--eps", "1e-3", "--verify-flow", "--t", "10"]
    assert run(argv) == 0
    d = _report(tmp_path, "lindstedt-torus")
    assert d["report"]["flow_deviation"] <= 1e-8
    assert (tmp_path / "lindstedt-torus.csv").exists()


def test_deprit_check_and_determinism(tmp_path):
    argv = ["--out-dir", str(tmp_path), "--seed", "3", "rigidbody", "deprit-check", "--samples", "100"]
    assert run(argv) == 0
    first = (tmp_path / "rigidbody-deprit-check.json").read_text()
    assert run(argv) == 0
    assert (tmp_path / "rigidbody-deprit-check.json").read_text() == first
    assert json.loads(first)["seed"] == 3


def test_verification_failure_exit(tmp_path):
    assert run(["--out-dir", str(tmp_path), "canonical", "check", "--map", "scaling"]) == 1


def test_usage_errors(tmp_path):
    assert run(["--out-dir", str(tmp_path), "suite", "bogus"]) == 2
    assert run(["kepler", "nope"]) == 2
    assert run(["lindstedt", "torus", "--K", "x"]) == 2
    assert run([]) == 2


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# torus run\nK = 6\neps = 2e-3\n")
    assert load_config(str(cfg)) == {"K": "6", "eps": "2e-3"}
    assert run(["--out-dir", str(tmp_path), "--config", str(cfg), "lindstedt", "torus", "--eps", "1e-3"]) == 0
    p = _report(tmp_path, "lindstedt-torus")["params"]
    assert p["K"] == 6 and p["eps"] == 1e-3


def test_budget_env(tmp_path, monkeypatch):
    monkeypatch.setenv("HAMILTONIA_BUDGET", "5")
    assert run(["--out-dir", str(tmp_path), "kepler", "series", "--order", "4", "--check-trees"]) == 1
    assert "OrderTooLarge" in _report(tmp_path, "kepler-series")["report"]["error"]


@pytest.mark.parametrize("argv", [
    ["kepler", "solve"], ["kepler", "radius"], ["kepler", "anomalies", "--samples", "5"], ["kepler", "r3bp"],
    ["quadrature", "period"], ["quadrature", "action"], ["quadrature", "central"], ["quadrature", "modes"],
    ["quadrature", "lax"], ["quadrature", "melnikov"], ["canonical", "check"], ["canonical", "bracket"],
    ["canonical", "generate", "--family", "g"], ["rigidbody", "euler", "--t", "10"], ["rigidbody", "quadratures"],
    ["rigidbody", "gyroscope"], ["lindstedt", "birkhoff"], ["lindstedt", "resonant"],
    ["lindstedt", "obstruction"], ["lindstedt", "resum"], ["lindstedt", "genfun"],
    ["trees", "enumerate"], ["trees", "census", "--k-max", "3"],
])
def test_subcommands_succeed(tmp_path, argv):
    assert run(["--out-dir", str(tmp_path)] + argv) == 0


def test_suite_fast_report(tmp_path, monkeypatch):
    import hamiltonia.acceptance as acc

    monkeypatch.setattr(acc, "FAST", (2, 5))
    out = tmp_path / "report.json"
    assert run(["suite", "fast", "--out", str(out)]) == 0
    d = json.loads(out.read_text())
    assert d["report"]["total"] == 2 and d["report"]["passed"] == 2
