import json
from pathlib import Path

import numpy as np
import pytest

from shockform import euler
from shockform.gas import GasModel
from shockform.profiles import Grid1D, ProfileSpec
from shockform.solver import RunConfig, run_until

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"


def gaussian(amp, width, center=0.0, base=0.0):
    return ProfileSpec("gaussian_bump", {"base": base, "amp": amp, "width": width, "center": center})


def const(v):
    return ProfileSpec.constant(v)


def euler_setup(gamma=1.4, K=1.0, n=128, xmin=-8.0, xmax=8.0, periodic=False,
                u=None, thermo=("rho", None), m=None):
    model = GasModel(gamma, K)
    grid = Grid1D.uniform(n, xmin, xmax, periodic)
    system = euler.EulerSystem(model, grid, m or const(1.0))
    kind, spec = thermo
    F0 = euler.initial_fields(system, u or const(0.0), kind, spec or const(1.0))
    return system, F0


def euler_run(t_end, **kw):
    run_kw = {k: kw.pop(k) for k in ("output_times", "grad_cap", "vacuum_guard", "cfl") if k in kw}
    system, F0 = euler_setup(**kw)
    return run_until(system, F0, RunConfig(t_end=t_end, **run_kw))


def load_raw(name):
    return json.loads((CONFIGS / name).read_text())


def observed_order(errors):
    e = np.asarray(errors, dtype=float)
    return np.log2(e[:-1] / e[1:])


@pytest.fixture
def raw_config():
    return load_raw


# one line per acceptance criterion, printed after the run
ACCEPTANCE = []


def record(number, ok, detail):
    ACCEPTANCE.append((number, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
