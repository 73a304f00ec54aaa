import json
import subprocess
import sys

import numpy as np
import pytest

from hydropseudo import cli
from hydropseudo.exceptions import ConfigError
from hydropseudo.suites import ELLIPTIC, MODES, N2, RATIONAL, Suite, TrialContext


def test_suite_counts():
    assert len(RATIONAL) == 7 and len(ELLIPTIC) == 7 and len(N2) == 4
    names = [s.name for suites in MODES.values() for s in suites]
    assert len(set(names)) == len(names)


@pytest.mark.parametrize("bad", [
    {"trials": 0},
    {"trials": 1.5},
    {"n": 1},
    {"mode": "elliptic", "n": 2},
    {"mode": "quantum"},
    {"seed": -1},
    {"seed": 2**64},
    {"tau": [0.0, -1.0]},
    {"tau": "not a number"},
    {"tolerances": {"zero-curvature": 0}},
    {"tolerances": {"no-such-suite": 1e-3}},
    {"s_exponents": [1.0, 2.0]},
    {"emit_plots": "yes"},
    {"colour": "blue"},
])
def test_config_rejections(bad):
    with pytest.raises(ConfigError):
        cli.RunConfig.from_mapping(bad)


def test_config_complex_forms():
    cfg = cli.RunConfig.from_mapping({"tau": [0.1, 1.2], "eta": "0.2+0.1j"})
    assert cfg.tau == complex(0.1, 1.2) and cfg.eta == complex(0.2, 0.1)
    assert cfg.echo()["tau"] == [0.1, 1.2]


def test_packaged_default_config_is_valid():
    cfg = cli.RunConfig.from_mapping(json.loads(cli.default_config_text()))
    assert cfg.mode == "all" and cfg.trials >= 1


def test_histogram_bins():
    hist = cli._histogram([0.0, 3e-15, 7e-15, 2e-9, float("nan")])
    assert hist == {"1e-15": 2, "1e-9": 1, "nonfinite": 1, "zero": 1}


def test_suite_streams_are_independent():
    a = cli.suite_rng(7, "closure").random(3)
    b = cli.suite_rng(7, "closure").random(3)
    c = cli.suite_rng(7, "jet-completion").random(3)
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_rational_n2_end_to_end(tmp_path):
    cfg = cli.RunConfig(mode="rational", n=2, trials=1, seed=42, output_path=str(tmp_path / "r.json"))
    report = cli.run(cfg)
    assert len(report["suites"]) == 7
    assert report["verdict"] == "pass"
    names = [r["name"] for r in report["suites"]]
    assert names == sorted(names)
    for rec in report["suites"]:
        assert {"name", "trials", "passed", "max_residual", "histogram", "seconds"} <= set(rec)


def test_crashing_suite_fails_alone(monkeypatch):
    def boom(rng, ctx):
        raise RuntimeError("kaboom")

    monkeypatch.setitem(MODES, "n2-conditions", (Suite("exploding", 1.0, boom),) + N2[:1])
    report = cli.run(cli.RunConfig(mode="n2-conditions", trials=2, seed=1))
    recs = {r["name"]: r for r in report["suites"]}
    assert "kaboom" in recs["exploding"]["error"]
    assert recs["exploding"]["max_residual"] is None
    assert recs["jet-completion"]["passed"] == 2
    assert report["verdict"] == "fail"


def test_tolerance_override_flips_verdict():
    cfg = cli.RunConfig(mode="n2-conditions", trials=1, seed=3, tolerances={"closure": 1e-300})
    report = cli.run(cfg)
    assert report["verdict"] == "fail"


def test_explicit_exponents_are_used():
    cfg = cli.RunConfig(mode="rational", n=2, trials=1, seed=5, s_exponents=[0.5, 0.5, 1.0, 1.0])
    assert cli.run(cfg)["config"]["s_exponents"] == [0.5, 0.5, 1.0, 1.0]


def test_main_exit_codes(tmp_path, capsys):
    out = tmp_path / "rep.json"
    assert cli.main(["--mode", "n2-conditions", "--trials", "1", "--output", str(out)]) == 0
    assert "verdict: pass" in capsys.readouterr().out
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"trials": 0}))
    assert cli.main(["--config", str(bad)]) == 2
    assert "configuration error" in capsys.readouterr().err
    bad.write_text("{not json")
    assert cli.main(["--config", str(bad)]) == 2
    failing = tmp_path / "fail.json"
    failing.write_text(json.dumps({"mode": "n2-conditions", "trials": 1, "tolerances": {"closure": 1e-300},
                                   "output_path": str(tmp_path / "f.json")}))
    assert cli.main(["--config", str(failing)]) == 1


def test_plots_are_written_and_stable(tmp_path):
    def once(folder):
        cfg = cli.RunConfig(mode="n2-conditions", trials=2, seed=9, emit_plots=True,
                            output_path=str(folder / "r.json"))
        cli.run(cfg)
        return (folder / "closure-perturbation.svg").read_bytes()

    a = once(tmp_path / "a")
    b = once(tmp_path / "b")
    assert a.startswith(b"<?xml") and a == b


def test_console_script_runs(tmp_path):
    out = tmp_path / "r.json"
    proc = subprocess.run([sys.executable, "-m", "hydropseudo.cli", "--mode", "n2-conditions", "--trials", "1",
                           "--output", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0
    assert proc.stdout.count("\n") == 1
    assert json.loads(out.read_text())["verdict"] == "pass"


@pytest.mark.parametrize("mode", ["rational", "elliptic", "n2-conditions"])
def test_every_suite_passes_one_trial(mode):
    n = 4 if mode == "elliptic" else 3
    for suite in MODES[mode]:
        res = suite.trial(cli.suite_rng(11, suite.name), TrialContext(n=n))
        assert res < suite.tolerance, suite.name
