from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shockform import euler, gas, runner
from shockform.config import load
from shockform.duct import construction as cons
from shockform.duct import flow
from shockform.duct.flow import DuctBox, DuctGeometry, DuctSystem, SphericalBox
from shockform.gas import GasModel
from shockform.numerics import ddx
from shockform.profiles import Grid1D, ProfileSpec
from shockform.solver import BOUNDARY, SMOOTH, RunConfig, run_until, trace_characteristic

from conftest import CONFIGS, const, gaussian, observed_order

RAMP = ProfileSpec("tanh_ramp", {"left": 1.0, "right": 0.5, "width": 1.0})


def duct_setup(gamma=2.0, n=200, L=10.0, a=RAMP, u=None, m=None, thermo=("rho", None)):
    model = GasModel(gamma)
    grid = Grid1D.uniform(n, -L, L, False)
    s = DuctSystem(model, grid, m or const(1.0), DuctGeometry(a))
    kind, spec = thermo
    F0 = flow.initial_fields(s, u or const(0.0), kind, spec or const(1.0))
    return s, F0


def point(z=1.3, u=0.2, m=1.1, mx=0.0, mxx=0.0, a=1.0, ad=0.0, add=0.0):
    arr = lambda v: np.atleast_1d(np.asarray(v, dtype=float))  # noqa: E731
    return {"z": arr(z), "u": arr(u), "m": arr(m), "mx": arr(mx), "mxx": arr(mxx),
            "a": arr(a), "ad": arr(ad), "add": arr(add)}


# -- coordinates and right-hand side ------------------------------------------

def test_duct_coords_example():
    md = GasModel(2.0, 1.0)
    out = flow.duct_coords(8.0, 1.0, 4.0, md)
    assert float(out["z"]) == pytest.approx(1.0, rel=1e-14)
    assert float(out["p"]) == pytest.approx(1 / 1024, rel=1e-14)
    assert float(out["C"]) == pytest.approx(1 / 32, rel=1e-14)


def test_duct_coords_unit_area_is_gas_eos():
    md = GasModel(1.4, 0.8)
    v = np.geomspace(0.1, 10, 7)
    out = flow.duct_coords(v, 1.3, 1.0, md)
    pt = gas.thermo_from_eta(out["z"], 1.3, md)
    np.testing.assert_allclose(out["p"], pt.p, rtol=1e-13)
    np.testing.assert_allclose(out["C"], pt.c, rtol=1e-13)
    np.testing.assert_allclose(gas.tau_of_eta(out["z"], md), v, rtol=1e-12)


@pytest.mark.parametrize("bad", [dict(v=0.0), dict(m=-1.0), dict(a=0.0)])
def test_duct_coords_rejects(bad):
    args = dict(v=1.0, m=1.0, a=1.0) | bad
    with pytest.raises(ValueError, match=next(iter(bad))):
        flow.duct_coords(args["v"], args["m"], args["a"], GasModel(2.0))


def test_geometry_validation():
    with pytest.raises(ValueError):
        DuctGeometry(const(1.0), kind="cone")
    with pytest.raises(ValueError):
        DuctGeometry(const(1.0), kind="spherical")
    with pytest.raises(ValueError, match="positive"):
        DuctGeometry(const(-1.0)).evaluate(np.zeros(3))
    with pytest.raises(ValueError, match="r0"):
        DuctGeometry.spherical(2.0).evaluate(np.array([1.0]))
    a, ad, add = DuctGeometry.spherical(1.0).evaluate(np.array([3.0]))
    assert (a[0], ad[0], add[0]) == (9.0, 6.0, 2.0)


def test_box_validation():
    ok = dict(a=(1, 2), ad=(0, 0), add=(0, 0), m=(1, 1), mx=(0, 0), mxx=(0, 0), u=(-1, 1), rho=(0.5, 2))
    DuctBox(**ok)
    with pytest.raises(ValueError, match="rho"):
        DuctBox(**(ok | dict(rho=(0.0, 1.0))))
    with pytest.raises(ValueError, match="u"):
        DuctBox(**(ok | dict(u=(1, -1))))
    with pytest.raises(ValueError):
        SphericalBox((0.0, 1.0), (1, 2), (0, 0))


def test_constant_state_straight_duct_is_stationary():
    s, F0 = duct_setup(a=const(1.0), u=const(0.0))
    np.testing.assert_allclose(s.rhs(F0), 0.0, atol=1e-14)


def test_zero_velocity_freezes_geometry():
    s, F0 = duct_setup(u=const(0.0))
    out = s.rhs(F0)
    np.testing.assert_array_equal(out[2], 0.0)
    assert np.max(np.abs(out[0])) > 1e-5  # the converging area still pushes the gas


def test_unit_area_rhs_equals_euler():
    m = gaussian(0.2, 1.0, base=1.0)
    u = gaussian(0.2, 0.7)
    s, F0 = duct_setup(gamma=1.4, a=const(1.0), u=u, m=m)
    es = euler.EulerSystem(s.model, s.grid, m)
    E0 = euler.initial_fields(es, u, "rho", const(1.0))
    np.testing.assert_allclose(F0[1], E0[1], rtol=1e-13)
    np.testing.assert_allclose(s.rhs(F0)[:2], es.rhs(E0), rtol=1e-12, atol=1e-15)


@pytest.mark.parametrize("kind,spec", [("rho", const(0.5)), ("v", const(2.0)), ("z", None)])
def test_initial_thermo_kinds_agree(kind, spec):
    _, R0 = duct_setup(thermo=("rho", const(0.5)), a=const(1.0))
    if spec is None:
        spec = const(float(R0[1][0]))
    _, F0 = duct_setup(thermo=(kind, spec), a=const(1.0))
    np.testing.assert_allclose(F0, R0, rtol=1e-10)


def test_initial_positions_satisfy_lagrangian_identity():
    errs = []
    for n in (101, 201, 401):
        s, F0 = duct_setup(n=n, m=gaussian(0.2, 1.0, base=1.0), thermo=("rho", gaussian(0.3, 1.0, base=1.0)))
        errs.append(flow.lagrangian_residual(s, F0))
    assert np.all(observed_order(errs) > 1.8)


def test_lagrangian_identity_preserved_in_time():
    errs = []
    for n in (101, 201, 401):
        s, F0 = duct_setup(n=n, u=gaussian(0.2, 0.8, center=-0.5), m=gaussian(0.2, 1.0, base=1.0))
        tr = run_until(s, F0, RunConfig(t_end=0.5))
        assert tr.status == SMOOTH
        errs.append(flow.lagrangian_residual(s, tr.final))
    assert np.all(observed_order(errs) > 1.8)


def test_area_transport_residual():
    # a_t = u a'(x') at fixed material x
    errs = []
    for n in (101, 201, 401):
        s, F0 = duct_setup(n=n, u=gaussian(0.2, 0.8, center=-0.5))
        tr = run_until(s, F0, RunConfig(t_end=0.3))
        a = np.array([s.geometry.evaluate(F[2])[0] for F in tr.levels])
        at = np.gradient(a, tr.times, axis=0)[1:-1]
        rhs = np.array([F[0] * s.geometry.evaluate(F[2])[1] for F in tr.levels])[1:-1]
        errs.append(np.max(np.abs(at - rhs)))
    assert np.all(observed_order(errs) > 1.8)


# -- gradient variables ---------------------------------------------------------

def test_alpha_beta_constant_state_and_sum():
    s, F0 = duct_setup(a=const(1.0), u=const(0.1))
    al, be = flow.alpha_beta(s, F0)
    np.testing.assert_allclose(al, 0.0, atol=1e-14)
    np.testing.assert_allclose(be, 0.0, atol=1e-14)
    s, F0 = duct_setup(u=gaussian(0.3, 0.8), m=gaussian(0.2, 1.0, base=1.0))
    al, be = flow.alpha_beta(s, F0)
    np.testing.assert_allclose(al + be, 2 * ddx(F0[0], s.grid), rtol=1e-12, atol=1e-15)


def test_alpha_sympy_oracle():
    sp = pytest.importorskip("sympy")
    x = sp.Symbol("x")
    uS = sp.Rational(3, 10) * sp.exp(-(x / sp.Rational(4, 5)) ** 2)
    s, F0 = duct_setup(n=801, a=const(1.0), u=gaussian(0.3, 0.8), thermo=("z", const(1.5)))
    al, _ = flow.alpha_beta(s, F0)
    f = sp.lambdify(x, sp.diff(uS, x), "numpy")
    np.testing.assert_allclose(al, f(s.grid.x), atol=1e-6)  # fourth-order stencil error


def test_coupled_rhs_reduces_for_straight_isentropic():
    md = GasModel(1.4)
    pt = point(m=1.0)
    al, be = np.array([0.7]), np.array([-0.4])
    k = flow.k_coefficients(pt["z"], pt["u"], pt["m"], pt["mx"], pt["a"], pt["ad"], pt["add"], md)
    for key in ("k2", "k3p", "k3m", "F"):
        np.testing.assert_array_equal(k[key], 0.0)
    dpa, dmb = flow.coupled_riccati_rhs(al, be, pt, md)
    np.testing.assert_allclose(dpa, k["k1"] * (al * be - al * al), rtol=1e-15)
    np.testing.assert_allclose(dmb, k["k1"] * (al * be - be * be), rtol=1e-15)


def test_coupled_rhs_at_rest_is_inhomogeneity():
    md = GasModel(2.0)
    pt = point(m=1.2, mx=0.3, a=0.8, ad=-0.2, add=0.1)
    z0 = np.zeros(1)
    dpa, dmb = flow.coupled_riccati_rhs(z0, z0, pt, md)
    F = flow.k_coefficients(pt["z"], pt["u"], pt["m"], pt["mx"], pt["a"], pt["ad"], pt["add"], md)["F"]
    assert np.all(F != 0.0)
    np.testing.assert_allclose(dpa, F, rtol=1e-15)
    np.testing.assert_allclose(dmb, F, rtol=1e-15)


def test_coupled_rhs_equal_gradients():
    md = GasModel(2.0)
    pt = point(m=1.2, mx=0.3, a=0.8, ad=-0.2, add=0.1)
    w = np.array([0.6])
    k = flow.k_coefficients(pt["z"], pt["u"], pt["m"], pt["mx"], pt["a"], pt["ad"], pt["add"], md)
    dpa, dmb = flow.coupled_riccati_rhs(w, w, pt, md)
    np.testing.assert_allclose(dpa - dmb, 8 * k["k1"] * k["k2"] * w, rtol=1e-13)


@pytest.mark.parametrize("gamma", [1.4, 2.0, 2.5])
def test_YQ_straight_isentropic_is_scaled_alpha(gamma):
    md = GasModel(gamma)
    pt = point(m=1.0)
    al, be = np.array([0.3]), np.array([-0.8])
    Y, Q = flow.YQ_transform(al, be, pt, md)
    e = (gamma + 1) / (2 * (gamma - 1))
    np.testing.assert_allclose(Y, pt["z"] ** e * al, rtol=1e-14)
    np.testing.assert_allclose(Q, pt["z"] ** e * be, rtol=1e-14)


def test_YQ_linear_in_alpha():
    md = GasModel(2.0)
    pt = point(m=1.2, mx=0.3, a=0.8, ad=-0.2, add=0.1)
    be = np.array([0.1])
    Y0, _ = flow.YQ_transform(np.zeros(1), be, pt, md)
    Y1, _ = flow.YQ_transform(np.ones(1), be, pt, md)
    Y2, _ = flow.YQ_transform(np.full(1, 2.0), be, pt, md)
    np.testing.assert_allclose(Y1 - Y0, pt["z"] ** 1.5, rtol=1e-13)
    np.testing.assert_allclose(Y2 - Y0, 2 * (Y1 - Y0), rtol=1e-13)
    assert abs(float(Y0[0])) > 0  # geometry corrections survive at alpha = 0


def test_YQ_rejects_variant():
    with pytest.raises(ValueError, match="q_variant"):
        flow.YQ_transform(np.zeros(1), np.zeros(1), point(), GasModel(2.0), q_variant="other")


@pytest.mark.parametrize("gamma", [5.0 / 3.0, 3.0, Fraction(5, 3)])
def test_unsupported_gamma(gamma):
    with pytest.raises(cons.UnsupportedGamma):
        cons.check_gamma(gamma)
    with pytest.raises(ValueError):
        flow.d_coeffs(point(), GasModel(float(gamma)))


# -- decoupled coefficients -----------------------------------------------------

@pytest.mark.parametrize("gamma", [1.2, 1.4, 2.0, 2.5, 4.0])
def test_construction_fully_decouples(gamma):
    fwd, bwd = cons.construct(gamma)
    assert fwd.decoupled and bwd.decoupled
    g = cons.as_fraction(gamma)
    assert fwd.d2.monomials() == cons.d2_from_k1(g).monomials()
    assert bwd.d2.monomials() == fwd.d2.monomials()


def test_printed_d2_limit_gamma3():
    # exponent (3 - g)/4 vanishes: the displayed closed form is -2 K_c
    P = cons.d2_printed(Fraction(3))
    (c, powers), = P.monomials()
    assert c == -2 and {k: v for k, v in powers.items() if v} == {"Kc": 1}


@pytest.mark.parametrize("gamma", [1.4, 2.0])
def test_d_coeffs_straight_isentropic(gamma):
    d0, d1, d2, e0, e1 = flow.d_coeffs(point(m=1.3), GasModel(gamma))
    for v in (d0, d1, e0, e1):
        np.testing.assert_array_equal(v, 0.0)
    assert np.all(d2 < 0)


@pytest.mark.parametrize("gamma", [1.4, 2.0, 2.5])
def test_d0_m_xx_monomial(gamma):
    md = GasModel(gamma)
    a, rho, m, mxx = 1.7, 0.8, 1.3, 0.45
    z = (md.K_tau * a * rho) ** ((gamma - 1) / 2)
    d0, d1, _, e0, _ = flow.d_coeffs(point(z=z, u=0.4, m=m, mxx=mxx, a=a), md)
    want = (md.K_c * md.K_tau ** ((5 * gamma + 1) / 4) / gamma) * (gamma - 1) / (3 * gamma - 1) \
        * m * mxx * a ** ((gamma - 3) / 4 + 2) * rho ** ((5 * gamma + 1) / 4)
    assert float(d0[0]) == pytest.approx(want, rel=1e-12)
    assert float(e0[0]) == pytest.approx(want, rel=1e-12)
    np.testing.assert_array_equal(d1, 0.0)


@pytest.mark.parametrize("gamma", [1.4, 2.0, 2.5])
def test_exponent_audit_matches_printed_patterns(gamma):
    rows = cons.exponent_audit(gamma)
    assert rows and all(r.label is not None for r in rows)
    assert {r.coefficient for r in rows} == {"d0", "d1", "d0_bar", "d1_bar"}


def test_l_constants_labelled():
    out = cons.l_constants(GasModel(2.0))
    assert "unmatched" not in "".join(out)
    assert any(k.endswith("_bar") for k in out)


# -- spherical specialization ---------------------------------------------------

def test_spherical_constants_gamma2():
    G = flow.spherical_ratio_constants(GasModel(2.0))
    got = [G.G1, G.G2, G.G3, G.G4, G.G5, G.G6, G.G7]
    want = [682.67, 6516.70, 60.34, 22.20, 174.91, 42.24, 257.72]
    np.testing.assert_allclose(np.abs(got), want, rtol=1e-4)
    assert G.G6 == pytest.approx(abs(G.G4) + np.sqrt(abs(G.G3) + abs(G.G1) / 2))


def test_spherical_shares_duct_code_path():
    md = GasModel(2.0)
    r, rho, u = np.array([1.3, 2.0]), np.array([0.7, 1.4]), np.array([0.2, -0.5])
    sc = flow.spherical_coeffs(r, rho, u, md)
    d0, d1, d2, _, _ = flow.d_coeffs(flow.spherical_point(r, rho, u, md), md)
    np.testing.assert_array_equal(sc["d0"], d0)
    np.testing.assert_array_equal(sc["d1"], d1)
    np.testing.assert_array_equal(sc["d2"], d2)


def test_spherical_ratio_scaling():
    md = GasModel(2.0)
    rho, u = np.array([0.9]), np.array([0.3])
    a = flow.spherical_coeffs(np.array([1.5]), rho, u, md)
    b = flow.spherical_coeffs(np.array([3.0]), rho, u, md)
    ratio = (b["d1"] / b["d2"]) / (a["d1"] / a["d2"])
    assert float(ratio[0]) == pytest.approx(2 ** -1.5, rel=1e-12)


def test_spherical_zero_velocity_ratio():
    md = GasModel(2.0)
    G = flow.spherical_ratio_constants(md)
    r, rho = np.array([1.7]), np.array([1.3])
    sc = flow.spherical_coeffs(r, rho, np.zeros(1), md)
    want = r ** -1.5 * rho ** -0.25 * G.G5 * rho ** 0.5
    np.testing.assert_allclose(sc["d1"] / sc["d2"], want, rtol=1e-12)


@settings(max_examples=100, deadline=None)
@given(r=st.floats(1.0, 50.0), rho=st.floats(0.1, 5.0), u=st.floats(-3.0, 3.0))
def test_spherical_root_lower_bound(r, rho, u):
    md = GasModel(2.0)
    sc = flow.spherical_coeffs(np.array([r]), np.array([rho]), np.array([u]), md)
    d0, d1, d2 = sc["d0"][0], sc["d1"][0], sc["d2"][0]
    disc = d1 * d1 - 4 * d2 * d0
    if disc >= 0:
        roots = np.roots([d2, d1, d0])
        assert np.min(roots.real) >= sc["root_lower_bound"][0] * (1 + 1e-9)


def test_spherical_rejects_inner_radius():
    with pytest.raises(ValueError, match="r0"):
        flow.spherical_coeffs(np.array([0.5]), np.array([1.0]), np.array([0.0]), GasModel(2.0), r0=1.0)


# -- thresholds -----------------------------------------------------------------

def test_straight_isentropic_threshold_zero():
    box = DuctBox(a=(1, 1), ad=(0, 0), add=(0, 0), m=(1, 1), mx=(0, 0), mxx=(0, 0), u=(-1, 1), rho=(0.5, 2))
    res = flow.duct_threshold(box, GasModel(2.0))
    assert res.value == 0.0 and res.converged


def test_threshold_monotone_in_box():
    md = GasModel(2.0)
    small = flow.duct_threshold(SphericalBox((1.0, 1.5), (0.8, 1.2), (-0.5, 0.5)), md)
    big = flow.duct_threshold(SphericalBox((1.0, 2.0), (0.5, 2.0), (-1.0, 1.0)), md)
    assert big.value >= small.value


def test_eight_axis_box_converges_within_budget():
    box = load(CONFIGS / "duct_converging.json").analysis["box"]
    box = DuctBox(**{k: tuple(v) for k, v in box.items()})
    md = GasModel(2.0)
    res = flow.duct_threshold(box, md)
    raw = flow.duct_threshold(box, md, polish=0, max_samples=400_000)
    assert res.converged and res.samples <= 4_000_000
    # polishing only raises the sampled sup
    assert res.value >= raw.value * (1 - 1e-12)


# -- runs -------------------------------------------------------------------------

def test_spherical_support_monitor_stops_run():
    model = GasModel(2.0)
    grid = Grid1D.uniform(200, 0.0, 4000.0, False)
    s = DuctSystem(model, grid, const(1.0), DuctGeometry.spherical(10.0))
    F0 = flow.initial_fields(s, gaussian(0.3, 100.0, center=600.0), "rho", const(1.0))
    s.watch(F0)
    tr = run_until(s, F0, RunConfig(t_end=400.0))
    assert tr.status == BOUNDARY


def test_mirror_Q_beats_printed_Q():
    cfg = load(CONFIGS / "duct_converging.json").with_grid(400)
    sc = runner.build(cfg)
    tr = run_until(sc.system, sc.F0, RunConfig(t_end=0.5))
    p = trace_characteristic(tr, 0.5, 0.0, "backward")
    mirror = np.max(np.abs(flow.decoupled_residual(tr, p, "mirror")[1]))
    printed = np.max(np.abs(flow.decoupled_residual(tr, p, "printed")[1]))
    assert mirror < 0.1 * printed
