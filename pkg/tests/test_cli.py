import csv
import json

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import simpson

from truncdens.cli import ConfigError, build_experiment, main, parse_set, parse_target
from truncdens.density import LogDensity, TruncatedDensity, cdf_1d
from truncdens.integrate import SurvivalSet


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_parse_set_forms():
    assert parse_set("0,0.5").exact_1d == ((0.0, 0.5),)
    assert parse_set("0,0.2;0.5,1").volume_estimate == pytest.approx(0.7)
    assert parse_set("cube:2").d == 2
    assert parse_set("box:0,0:0.5,1").volume_estimate == pytest.approx(0.5)
    assert parse_set([[0, 0.5]]).exact_1d == ((0.0, 0.5),)
    with pytest.raises(ConfigError):
        parse_set("0.5")


def test_parse_target_forms():
    assert parse_target("sin10").name.startswith("sin")
    assert parse_target("poly:1,2")(np.array([[1.0]]))[0] == pytest.approx(3.0)
    assert parse_target({"polynomial": [0.5]})(np.array([[1.0]]))[0] == pytest.approx(0.5)
    assert parse_target("exp_scaled:0.5").B >= 1.0
    assert parse_target("expr:x**2")(np.array([[0.5]]))[0] == pytest.approx(0.25)
    with pytest.raises(ConfigError):
        parse_target("expr:(")


def test_command_line_overrides_config():
    spec = build_experiment({"degree": 4, "bound_C": 2.0, "steps": 10, "outputs": "a"},
                            {"degree": 6, "outputs": "b", "step_size": None})
    assert spec.fit.k == 6 and str(spec.outputs) == "b" and spec.fit.C == 2.0
    with pytest.raises(ConfigError):
        build_experiment({"degree": 2, "colour": "red"}, {})
    with pytest.raises(ConfigError):
        build_experiment({"degree": 2, "curve_resolution": 10}, {})


def test_fit_population_polynomial(tmp_path, capsys):
    cfg = tmp_path / "exp.yaml"
    cfg.write_text(f"target: poly:0.5,-1.0,0.8\nset: [0, 0.5]\nmode: population\noutputs: {tmp_path}\n"
                   "degree: 3\nbound_C: 3\nsteps: 1\n")
    code, out, _ = run(["fit", "--config", str(cfg)], capsys)
    assert code == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    assert metrics["schema_version"] == "1"
    assert metrics["tv_on_K"] <= 1e-4
    report = json.loads((tmp_path / "fit_report.json").read_text())
    assert report["coeffs"]["coeffs"] == pytest.approx([0.5, -1.0, 0.8], abs=1e-5)


def test_fit_sin10_k10_matches_fixture(tmp_path, capsys, oracle):
    code, _, _ = run(["fit", "--target", "sin10", "--set", "0,0.5", "--mode", "population",
                      "--degree", "10", "--out", str(tmp_path)], capsys)
    assert code == 0
    metrics = json.loads((tmp_path / "metrics.json").read_text())
    ref = oracle["example_1d"]["sweep"]["10"]
    for key in ("tv_on_K", "tv_on_S", "kl_on_S"):
        assert metrics[key] == pytest.approx(ref[key], abs=1e-3)


def test_fit_artifacts_round_trip_and_reproduce(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    a.mkdir()
    b.mkdir()
    argv = ["fit", "--target", "poly:0.3,-0.6", "--set", "0,0.5", "--mode", "psgd", "--degree", "2",
            "--steps", "3000", "--step-size", "0.2", "--seed", "4", "--bound-C", "3"]
    assert run(argv + ["--out", str(a)], capsys)[0] == 0
    assert run(argv + ["--out", str(b)], capsys)[0] == 0
    for name in ("fit_report.json", "metrics.json", "density_fit.csv", "density_truth.csv",
                 "density_fit_S.csv", "manifest.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name
    assert (a / "run_info.json").exists()
    with open(a / "density_fit.csv") as fh:
        rows = np.array(list(csv.reader(fh))[1:], dtype=float)
    assert simpson(rows[:, 1], x=rows[:, 0]) == pytest.approx(1.0, abs=1e-6)
    with open(a / "density_fit_S.csv") as fh:
        rows = np.array(list(csv.reader(fh))[1:], dtype=float)
    inside = rows[:, 0] <= 0.5
    assert simpson(rows[inside, 1], x=rows[inside, 0]) == pytest.approx(1.0, abs=1e-6)


def test_fit_exit_codes(tmp_path, capsys):
    assert run(["fit", "--target", "sin10", "--degree", "3"], capsys)[0] == 2
    assert run(["fit", "--target", "sin10", "--degree", "3", "--out", str(tmp_path / "missing")], capsys)[0] == 2
    bad = tmp_path / "bad.yaml"
    bad.write_text("degree: [unclosed\n")
    assert run(["fit", "--config", str(bad), "--out", str(tmp_path)], capsys)[0] == 2
    # population mode on a 2-D set is a config error
    assert run(["fit", "--target", "sin10", "--set", "cube:2", "--degree", "2", "--out", str(tmp_path)],
               capsys)[0] == 2
    nan = tmp_path / "nan.csv"
    nan.write_text("x1\nnan\n0.2\n")
    assert run(["fit", "--target", "poly:1", "--set", "0,1", "--mode", "psgd", "--degree", "2", "--steps", "2",
                "--data", str(nan), "--out", str(tmp_path)], capsys)[0] == 2


def test_fit_numerical_failure_exit_code(tmp_path, capsys, monkeypatch):
    import truncdens.cli as cli
    from truncdens.mle import ProjectionError

    def boom(*args, **kwargs):
        raise ProjectionError("projection did not converge after 200 rounds")

    monkeypatch.setattr(cli, "psgd_fit", boom)
    code, _, err = run(["fit", "--target", "poly:1", "--set", "0,1", "--mode", "psgd", "--degree", "2",
                        "--steps", "5", "--out", str(tmp_path)], capsys)
    assert code == 3 and "numerical failure" in err


def test_verify_command(capsys):
    code, out, _ = run(["verify", "--suite", "pinsker"], capsys)
    assert code == 0 and "pinsker" in out and "taylor" not in out
    code, out, err = run(["verify", "--suite", "multiindex", "--json"], capsys)
    assert code == 0 and len(json.loads(out)) == 40 and "asserted failures" in err
    code, _, err = run(["verify", "--suite", "bogus"], capsys)
    assert code == 2 and "available" in err


def test_sample_command(tmp_path, capsys):
    out = tmp_path / "s.csv"
    assert run(["sample", "--target", "sin10", "--set", "0,0.5", "-n", "0", "--seed", "1",
                "--out", str(out)], capsys)[0] == 0
    assert out.read_text().strip() == "x1"
    assert run(["sample", "--target", "uniform", "--set", "0,1", "-n", "5000", "--seed", "1",
                "--out", str(out)], capsys)[0] == 0
    x = np.loadtxt(out, skiprows=1)
    assert stats.kstest(x, "uniform").pvalue > 1e-3
    assert run(["sample", "--target", "sin10", "--set", "0,0.5", "-n", "5000", "--seed", "2",
                "--out", str(out)], capsys)[0] == 0
    x = np.loadtxt(out, skiprows=1)
    P = TruncatedDensity(LogDensity.sin10(), SurvivalSet.interval(0, 0.5))
    assert stats.kstest(x, lambda t: cdf_1d(P, t)).pvalue > 1e-3


def test_example_1d_command(tmp_path, capsys):
    code, out, _ = run(["example-1d", "--out", str(tmp_path), "--curve-resolution", "129"], capsys)
    assert code == 0 and "overfit_at_12" in out


def test_thread_cap(monkeypatch, tmp_path, capsys):
    monkeypatch.setenv("TOOL_THREADS", "1")
    assert run(["verify", "--suite", "multiindex"], capsys)[0] == 0
