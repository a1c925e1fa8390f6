import csv
import json

import numpy as np
import pytest

from shockform.cli import EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, fmt, main

from conftest import CONFIGS, load_raw


def run(cmd, config, out, *extra):
    return main([cmd, "--config", str(config), "--out", str(out), *extra])


def read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], np.array([[float(v) if v else np.nan for v in r] for r in rows[1:]])


def write_config(tmp_path, raw, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return path


def test_fmt_round_trips():
    for v in (0.1, 1 / 3, -2.5e-300, 1e22):
        assert float(fmt(v)) == v
    assert fmt(float("nan")) == "nan"
    assert fmt(None) == ""


def test_simulate_is_deterministic(tmp_path):
    cfg = CONFIGS / "entropy_bump.json"
    assert run("simulate", cfg, tmp_path / "a") == EXIT_OK
    assert run("simulate", cfg, tmp_path / "b") == EXIT_OK
    for name in ("series.csv", "report.json"):
        a = (tmp_path / "a" / name).read_bytes()
        b = (tmp_path / "b" / name).read_bytes().replace(b"/b/", b"/a/")
        assert a == b, name


def test_certify_and_convergence_are_deterministic(tmp_path):
    cfg = CONFIGS / "constant_euler.json"
    for d in ("a", "b"):
        assert run("certify", cfg, tmp_path / d) == EXIT_OK
        assert run("convergence", cfg, tmp_path / d) == EXIT_OK
    for name in ("certificate.json", "convergence.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_constant_state_gradients_are_zero(tmp_path):
    assert run("simulate", CONFIGS / "constant_euler.json", tmp_path) == EXIT_OK
    names, data = read_csv(tmp_path / "series.csv")
    for col in ("y", "q"):
        assert np.all(data[:, names.index(col)] == 0.0)
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "smooth_to_t_end"


def test_isentropic_certificate(tmp_path):
    assert run("certify", CONFIGS / "lax_gamma2.json", tmp_path) == EXIT_OK
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["N"] == 0.0
    assert cert["verdict"].startswith("blowup iff any compression")
    assert cert["min_y0_q0"] < 0


def test_zero_variation_certificate(tmp_path):
    raw = load_raw("euler_straight.json")
    del raw["profiles"]["m"]
    assert run("certify", write_config(tmp_path, raw), tmp_path) == EXIT_OK
    cert = json.loads((tmp_path / "certificate.json").read_text())
    assert cert["V"] == 0.0
    assert cert["N1"] == cert["Ms"]
    assert cert["N2"] == cert["Mr"]


def test_convergence_constant_state_is_exact(tmp_path):
    assert run("convergence", CONFIGS / "constant_euler.json", tmp_path) == EXIT_OK
    rows = json.loads((tmp_path / "convergence.json").read_text())["rows"]
    assert [r["n"] for r in rows] == [64, 128, 256]
    assert rows[1]["solution_order"] == "exact"
    assert all(r["residual_order"] == "exact" for r in rows[1:])


def test_convergence_smooth_orders(tmp_path):
    assert run("convergence", CONFIGS / "euler_straight.json", tmp_path) == EXIT_OK
    rows = json.loads((tmp_path / "convergence.json").read_text())["rows"]
    assert rows[1]["solution_order"] >= 2.0
    assert all(r["residual_order"] >= 1.8 for r in rows[1:])


def test_trace_constant_state(tmp_path):
    cfg = CONFIGS / "constant_euler.json"
    assert run("simulate", cfg, tmp_path) == EXIT_OK
    assert run("trace", cfg, tmp_path, "--x0", "0.5") == EXIT_OK
    info = json.loads((tmp_path / "trace_forward.json").read_text())
    assert info["max_abs_difference"] == 0.0
    names, data = read_csv(tmp_path / "trace_forward.csv")
    assert np.all(data[:, names.index("difference")] == 0.0)


def test_trace_needs_trajectory(tmp_path, capsys):
    assert run("trace", CONFIGS / "constant_euler.json", tmp_path, "--x0", "0.5") == EXIT_CONFIG
    assert "run simulate first" in capsys.readouterr().err


def test_trace_window_outside_run(tmp_path):
    cfg = CONFIGS / "constant_euler.json"
    run("simulate", cfg, tmp_path)
    assert run("trace", cfg, tmp_path, "--x0", "0.5", "--t0", "9") == EXIT_CONFIG


def test_plot_writes_figures(tmp_path):
    cfg = CONFIGS / "euler_straight.json"
    assert run("simulate", cfg, tmp_path, "--plot") == EXIT_OK
    assert run("trace", cfg, tmp_path, "--x0", "-1", "--family", "backward", "--plot") == EXIT_OK
    for name in ("series.png", "trace_backward.png"):
        png = tmp_path / name
        assert png.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_no_figures_without_flag(tmp_path):
    run("simulate", CONFIGS / "constant_euler.json", tmp_path)
    assert not list(tmp_path.glob("*.png"))


def test_config_errors_exit_2(tmp_path, capsys):
    raw = load_raw("constant_euler.json")
    raw["grid"]["bogus"] = 1
    assert run("simulate", write_config(tmp_path, raw), tmp_path) == EXIT_CONFIG
    assert "bogus" in capsys.readouterr().err
    assert run("simulate", tmp_path / "missing.json", tmp_path) == EXIT_CONFIG
    assert main(["simulate"]) == EXIT_CONFIG
    assert run("convergence", CONFIGS / "constant_euler.json", tmp_path, "--levels", "2") == EXIT_CONFIG


def test_bad_thread_count(tmp_path, monkeypatch):
    monkeypatch.setenv("SHOCKFORM_THREADS", "zero")
    assert run("certify", CONFIGS / "constant_euler.json", tmp_path) == EXIT_CONFIG


def test_numeric_abort_exit_3(tmp_path):
    raw = load_raw("entropy_bump.json")
    raw["profiles"]["u"]["params"]["amp"] = 0.5
    raw["run"]["vacuum_guard"] = 0.999
    assert run("simulate", write_config(tmp_path, raw), tmp_path) == EXIT_NUMERIC
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["status"] == "vacuum_guard_hit"


def _paired_series(tmp_path, drop_m=False):
    out = []
    for name in ("euler_straight", "duct_straight"):
        raw = load_raw(f"{name}.json")
        if drop_m:
            del raw["profiles"]["m"]
        path = write_config(tmp_path, raw, f"{name}.json")
        assert run("simulate", path, tmp_path / name) == EXIT_OK
        out.append(read_csv(tmp_path / name / "series.csv"))
    return out


def _assert_columns_match(pairs, euler, duct):
    (ne, de), (nd, dd) = euler, duct
    for a, b in pairs:
        np.testing.assert_allclose(dd[:, nd.index(b)], de[:, ne.index(a)], rtol=0, atol=1e-10)


def test_straight_duct_matches_euler(tmp_path):
    euler, duct = _paired_series(tmp_path)
    _assert_columns_match((("t", "t"), ("x", "x"), ("u", "u"), ("eta", "z"), ("m", "m")), euler, duct)


def test_straight_isentropic_duct_gradients_match_euler(tmp_path):
    # with m varying the two gradient variables carry different integrating factors
    euler, duct = _paired_series(tmp_path, drop_m=True)
    _assert_columns_match((("u", "u"), ("eta", "z"), ("y", "Y"), ("q", "Q")), euler, duct)


@pytest.mark.parametrize("name", ["mhd_smooth", "duct_converging"])
def test_other_systems_run(tmp_path, name):
    assert run("simulate", CONFIGS / f"{name}.json", tmp_path) == EXIT_OK
    assert run("certify", CONFIGS / f"{name}.json", tmp_path) == EXIT_OK
    names, _ = read_csv(tmp_path / "series.csv")
    assert names[:2] == ["t", "x"]
