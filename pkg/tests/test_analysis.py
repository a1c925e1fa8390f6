import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockform import analysis
from shockform.analysis import (blowup_threshold_N, bounds_certificate, certify_euler, default_eps,
                                gradient_fields, integrate_riccati, integrate_riccati_ode, n_constants,
                                observed_prediction, predict_blowup_time, riccati_coeffs, riccati_residual,
                                verify_bounds)
from shockform.gas import GasModel
from shockform.numerics import ddx
from shockform.profiles import ProfileSpec
from shockform.solver import BLOWUP, SMOOTH, RunConfig, run_until, trace_characteristic

from conftest import const, euler_run, euler_setup, gaussian, observed_order


# -- a priori bounds ---------------------------------------------------------

def test_n_constants_isentropic():
    assert n_constants(0.0, 2.0, 3.0, 1.4) == (2.0, 3.0)


def test_n_constants_unit_vbar():
    # V/(2 gamma) = 1 and Ms = Mr = 1: 1 + 1 + (1 + 1) e
    N1, N2 = n_constants(4.0, 1.0, 1.0, 2.0)
    assert N1 == pytest.approx(2 + 2 * math.e, rel=1e-14)
    assert N2 == pytest.approx(N1, rel=1e-14)


@settings(max_examples=100, deadline=None)
@given(V=st.floats(0, 3), Ms=st.floats(0, 5), Mr=st.floats(0, 5), gamma=st.floats(1.1, 3))
def test_n_constants_symmetry_and_floor(V, Ms, Mr, gamma):
    N1, N2 = n_constants(V, Ms, Mr, gamma)
    M2, M1 = n_constants(V, Mr, Ms, gamma)
    assert (N1, N2) == pytest.approx((M1, M2), rel=1e-14)
    assert N1 >= Ms and N2 >= Mr


def test_bounds_certificate_constant_state():
    s, F0 = euler_setup(gamma=2.0, u=const(0.5), thermo=("eta", const(1.0)))
    b = bounds_certificate(F0[0], F0[1], s.m_spec, s.grid, s.model)
    assert b.V == 0.0
    assert b.N1 == pytest.approx(1.5, rel=1e-8) and b.N2 == pytest.approx(0.5, rel=1e-8)
    assert b.u_bound == pytest.approx(1.0, rel=1e-8)
    assert b.eta_bound == pytest.approx(1.0, rel=1e-8)


def test_bounds_certificate_rejects():
    s, F0 = euler_setup()
    with pytest.raises(ValueError, match="finite"):
        bounds_certificate(F0[0] * np.nan, F0[1], s.m_spec, s.grid, s.model)


@pytest.mark.parametrize("gamma,mamp", [(1.4, 0.1), (2.0, 0.2), (3.0, 0.15)])
def test_certificate_sound_on_smooth_runs(gamma, mamp):
    tr = euler_run(1.0, gamma=gamma, n=257, u=gaussian(0.05, 1.0), m=gaussian(mamp, 1.0, base=1.0))
    assert tr.status == SMOOTH
    F0 = tr.levels[0]
    b = bounds_certificate(F0[0], F0[1], tr.system.m_spec, tr.system.grid, tr.system.model)
    chk = verify_bounds(tr, b)
    assert chk["all_within"] and chk["max_overall"] < 1.0
    assert len(chk["history"]) == len(tr.times)


# -- gradient variables and Riccati coefficients -----------------------------

def test_gradients_vanish_on_constant_state():
    s, F0 = euler_setup(gamma=2.0, u=const(0.3), thermo=("eta", const(1.2)))
    y, q = gradient_fields(F0[0], F0[1], s.m.value, s.m.d1, s.grid, s.model)
    np.testing.assert_allclose(y, 0.0, atol=1e-13)
    np.testing.assert_allclose(q, 0.0, atol=1e-13)


def test_gradients_gamma3_isentropic():
    s, F0 = euler_setup(gamma=3.0, n=256, u=gaussian(0.2, 1.0), thermo=("eta", gaussian(0.1, 0.8, base=1.0)))
    u, eta = F0
    y, q = gradient_fields(u, eta, s.m.value, s.m.d1, s.grid, s.model)
    np.testing.assert_allclose(y, eta * ddx(u + eta, s.grid), atol=1e-14)
    np.testing.assert_allclose(q, eta * ddx(u - eta, s.grid), atol=1e-14)


def test_gradient_y_sympy_oracle():
    sp = pytest.importorskip("sympy")
    x = sp.Symbol("x")
    gamma = sp.Rational(7, 5)
    uS = sp.Rational(1, 5) * sp.exp(-x ** 2)
    etaS = 1 + sp.Rational(1, 10) * sp.exp(-(x / sp.Rational(4, 5)) ** 2)
    mS = 1 + sp.Rational(1, 5) * sp.exp(-x ** 2)
    mexp = -3 * (3 - gamma) / (2 * (3 * gamma - 1))
    eexp = (gamma + 1) / (2 * (gamma - 1))
    yS = mS ** mexp * etaS ** eexp * (sp.diff(uS, x) + sp.diff(mS * etaS, x)
                                     - 2 / (3 * gamma - 1) * sp.diff(mS, x) * etaS)
    s, F0 = euler_setup(gamma=1.4, n=1024, u=gaussian(0.2, 1.0), thermo=("eta", gaussian(0.1, 0.8, base=1.0)),
                        m=gaussian(0.2, 1.0, base=1.0))
    y, _ = gradient_fields(F0[0], F0[1], s.m.value, s.m.d1, s.grid, s.model)
    f = sp.lambdify(x, yS, "numpy")
    np.testing.assert_allclose(y, f(s.grid.x), atol=1e-6)  # fourth-order stencil error


def test_riccati_coefficients_isentropic():
    md = GasModel(2.0)
    c = riccati_coeffs(2.0, 1.0, 0.0, 0.0, md)
    assert float(c.a0) == 0.0
    assert float(c.a2) == pytest.approx(-md.K_c * 1.5 * math.sqrt(2.0), rel=1e-14)
    g3 = GasModel(3.0, 1 / 3)
    assert float(riccati_coeffs(1.7, 1.0, 0.0, 0.0, g3).a2) == pytest.approx(-g3.K_c, rel=1e-14)


def test_riccati_a0_sign_follows_curvature():
    md = GasModel(1.4)
    assert float(riccati_coeffs(1.0, 1.0, 0.0, 1.0, md).a0) > 0
    assert float(riccati_coeffs(1.0, 1.0, 0.0, -1.0, md).a0) < 0
    assert float(riccati_coeffs(1.0, 1.0, 1.0, 0.0, md).a0) < 0


@settings(max_examples=100, deadline=None)
@given(eta=st.floats(0.01, 50), m=st.floats(0.1, 10), gamma=st.floats(1.05, 4))
def test_a2_negative(eta, m, gamma):
    assert float(riccati_coeffs(eta, m, 0.3, -0.2, GasModel(gamma)).a2) < 0


def test_riccati_coeffs_reject():
    with pytest.raises(ValueError):
        riccati_coeffs(0.0, 1.0, 0.0, 0.0, GasModel(2.0))


def test_threshold_examples():
    md3 = GasModel(3.0)
    assert blowup_threshold_N(2.0, 0.5, 1.5, 0.0, md3) == 0.0
    assert blowup_threshold_N(2.0, 0.5, 1.5, 3.0, md3) == pytest.approx(
        math.sqrt(3.0 / 12) * 4.0 * math.sqrt(1.5), rel=1e-14)
    g = 5.0 / 3.0
    a = blowup_threshold_N(1.3, 0.4, 2.0, 1.0, GasModel(g))
    b = blowup_threshold_N(1.3, 0.4, 2.0, 1.0, GasModel(g * (1 + 1e-12)))
    assert a == pytest.approx(b, rel=1e-9)


@pytest.mark.parametrize("args", [(0.0, 1, 1, 1), (1, 2, 1, 1), (1, 1, 1, -1)])
def test_threshold_rejects(args):
    with pytest.raises(ValueError):
        blowup_threshold_N(*args, GasModel(2.0))


# -- Riccati ODE and time bound ----------------------------------------------

def test_riccati_ode_pure_quadratic():
    sol = integrate_riccati_ode(lambda t: (0.0, 0.0, -1.0), -1.0, 0.0, 2.0)
    assert sol.blowup and sol.t_blowup == pytest.approx(1.0, abs=1e-6)
    i = int(np.argmin(np.abs(sol.t - 0.5)))
    assert sol.y[i] == pytest.approx(-1.0 / (1.0 - sol.t[i]), rel=1e-8)


def test_riccati_ode_tangent():
    # y' = -1 - y^2, y(0) = 0 gives y = -tan t
    sol = integrate_riccati_ode(lambda t: (-1.0, 0.0, -1.0), 0.0, 0.0, 3.0)
    assert sol.blowup and sol.t_blowup == pytest.approx(math.pi / 2, abs=1e-6)


def test_riccati_ode_positive_start_decays():
    sol = integrate_riccati_ode(lambda t: (0.0, 0.0, -1.0), 1.0, 0.0, 5.0)
    assert not sol.blowup and sol.status == "no_blowup"
    assert sol.y[-1] == pytest.approx(1.0 / 6.0, rel=1e-8)


def test_predict_blowup_time():
    assert predict_blowup_time(-2.0, -1.0, 1.0) == pytest.approx(2.0 / 3.0, rel=1e-15)
    assert predict_blowup_time(-2.0, -1.0, 1e8) == pytest.approx(0.5, rel=1e-12)
    for bad in ((-2.0, -1.0, 0.0), (-2.0, 1.0, 1.0), (2.0, -1.0, 1.0)):
        with pytest.raises(ValueError):
            predict_blowup_time(*bad)


@settings(max_examples=50, deadline=None)
@given(y0=st.floats(-10, -0.1), a2=st.floats(-5, -0.1), eps=st.floats(0.01, 10))
def test_exact_quadratic_blowup_precedes_bound(y0, a2, eps):
    assert 1.0 / (abs(a2) * abs(y0)) <= predict_blowup_time(y0, a2, eps)


def test_default_eps():
    assert default_eps(-3.0, 1.5) == pytest.approx(1.0)
    assert default_eps(-3.0, 0.0) == 1.0


# -- residuals along characteristics -----------------------------------------

def test_residual_zero_on_constant_state():
    tr = euler_run(0.5, periodic=True, xmin=0, xmax=4, n=64, u=const(0.1))
    p = trace_characteristic(tr, 1.0, 0.0, "forward")
    _, res = riccati_residual(tr, p)
    assert np.max(np.abs(res)) < 1e-12


def test_residual_converges_backward_family():
    errs = []
    for n in (129, 257, 513):
        tr = euler_run(0.5, n=n, gamma=1.4, u=gaussian(0.1, 1.0), m=gaussian(0.2, 1.0, base=1.0))
        p = trace_characteristic(tr, 0.5, 0.0, "backward")
        errs.append(np.max(np.abs(riccati_residual(tr, p)[1])))
    assert np.all(observed_order(errs) >= 1.8)


def test_integrate_riccati_undetermined_window():
    tr = euler_run(0.3, gamma=2.0, u=gaussian(0.05, 1.0))
    p = trace_characteristic(tr, 0.0, 0.0, "forward")
    y0 = float(analysis.path_gradient(tr, p)[0])
    sol = integrate_riccati(p, analysis.path_coefficients(tr, p), y0)
    assert not sol.blowup and sol.status == "undetermined within window"


# -- blowup dichotomy ---------------------------------------------------------

DICHOTOMY = [
    # gamma, K, u amplitude, m amplitude
    (2.0, 1.0, -0.5, 0.1),
    (2.0, 0.5, -1.0, 0.2),
    (2.0, 2.0, 1.0, 0.1),
    (3.0, 1.0, -0.5, 0.1),
    (3.0, 1.0 / 3.0, 0.8, 0.2),
    (3.0, 1.0, -1.0, 0.05),
]


def _dichotomy_run(gamma, K, uamp, mamp, grad_cap=10.0, output_times=()):
    # fine grid and tight cap: the central scheme saturates the gradient at
    # jump/dx, so a loose proxy fires long after the true singular time
    s, F0 = euler_setup(gamma=gamma, K=K, n=2048, xmin=-8, xmax=8, u=gaussian(uamp, 0.6),
                        thermo=("rho", const(1.0)), m=gaussian(mamp, 1.0, base=1.0))
    cert = certify_euler(s, F0)
    cert = certify_euler(s, F0, eps=0.5 * cert.eps)
    tr = run_until(s, F0, RunConfig(t_end=4.0, grad_cap=grad_cap, output_times=output_times))
    return s, F0, cert, tr


@pytest.mark.parametrize("scenario", DICHOTOMY, ids=lambda s: "g{}-K{:.2f}-u{}-m{}".format(*s))
def test_blowup_dichotomy(scenario):
    s, F0, cert, tr = _dichotomy_run(*scenario)
    assert cert.N > 0 and cert.min_y0 < -(1 + cert.eps) * cert.N
    assert tr.status == BLOWUP
    b = bounds_certificate(F0[0], F0[1], s.m_spec, s.grid, s.model)
    assert verify_bounds(tr, b)["all_within"]
    t_star, a2b, _ = observed_prediction(tr, cert, tr.t_stop)
    assert a2b < 0
    assert tr.t_stop <= t_star


def _ramp_run(sign, t_end):
    ramp = ProfileSpec("tanh_ramp", {"left": -0.3 * sign, "right": 0.3 * sign, "width": 0.5})
    return euler_run(t_end, gamma=2.0, n=1537, xmin=-24, xmax=24, u=ramp, thermo=("rho", const(1.0)),
                     grad_cap=5.0)


def test_lax_recovery():
    probe = _ramp_run(1, 0.01)
    s, F0 = probe.system, probe.levels[0]
    y, q = gradient_fields(F0[0], F0[1], s.m.value, s.m.d1, s.grid, s.model)
    a2 = riccati_coeffs(F0[1], s.m.value, s.m.d1, s.m.d2, s.model)
    np.testing.assert_array_equal(a2.a0, 0.0)
    assert min(y.min(), q.min()) >= -1e-12
    horizon = 1.0 / (float(np.max(np.abs(a2.a2))) * float(np.max(y)))
    smooth = _ramp_run(1, 5 * horizon)
    assert smooth.status == SMOOTH
    assert np.max(smooth.grad_history) <= smooth.grad_history[0] * (1 + 1e-6)
    assert _ramp_run(-1, 5 * horizon).status == BLOWUP


def _first_exceed(times, series, factor):
    hit = np.nonzero(series > factor * series[0])[0]
    return times[hit[0]] if len(hit) else None


def _crossing_gap(n, grad_cap, factor=20.0):
    s, F0 = euler_setup(gamma=2.0, n=n, xmin=-8, xmax=8, u=gaussian(-0.5, 0.6),
                        thermo=("rho", const(1.0)), m=gaussian(0.1, 1.0, base=1.0))
    tr = run_until(s, F0, RunConfig(t_end=2.5, grad_cap=grad_cap))
    yq, phys = [], []
    for F in tr.levels:
        y, q = gradient_fields(F[0], F[1], s.m.value, s.m.d1, s.grid, s.model)
        yq.append(max(np.max(np.abs(y)), np.max(np.abs(q))))
        phys.append(max(np.max(np.abs(ddx(F[0], s.grid))), np.max(np.abs(ddx(s.tau(F), s.grid)))))
    t1 = _first_exceed(tr.times, np.array(yq), factor)
    t2 = _first_exceed(tr.times, np.array(phys), factor)
    assert t1 is not None and t2 is not None
    return abs(t1 - t2)


def test_y_and_physical_gradients_blow_up_together():
    # relative caps cross at slightly different times because the two maxima
    # start at different points; the gap closes as the grid resolves the front
    dt_out = 0.1
    coarse = _crossing_gap(2048, 40.0)
    fine = _crossing_gap(4096, 40.0)
    assert fine <= dt_out
    assert fine < coarse
