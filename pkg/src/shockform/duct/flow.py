"""
Lagrangian duct flow in (u, z, m) with a moving cross-section.

    z_t + (C/m) a^((g-1)/2) u_x = 0
    u_t + m C a^(-(g-1)/2) z_x + 2 (a p / m) m_x - g p a_x = 0
    x'_t = u

a = a(x') is fixed in space, so in material coordinates it moves with the
particle positions x'(x, t); a_x = v a'(x') with v = 1/(a rho).  Fields are
stored as ``F = [u, z, x']``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import minimize

from .. import gas
from ..analysis import wrap
from ..numerics import ddx
from ..profiles import ProfileSpec, sample
from ..solver import sample_along
from . import construction as cons
from .algebra import Poly

N_FROZEN = 2
SUPPORT_TOL = 1e-8


@dataclass(frozen=True)
class DuctGeometry:
    """Cross-section a(x') with exact derivatives; spherical means a = r^2."""

    a_spec: ProfileSpec
    kind: str = "duct"
    r0: float | None = None

    def __post_init__(self):
        if self.kind not in ("duct", "spherical"):
            raise ValueError(f"geometry kind must be 'duct' or 'spherical', got {self.kind!r}")
        if self.kind == "spherical" and not (self.r0 is not None and self.r0 > 0):
            raise ValueError("spherical geometry needs an inner radius r0 > 0")

    @classmethod
    def spherical(cls, r0):
        return cls(ProfileSpec("polynomial", {"coefficients": [0.0, 0.0, 1.0]}), "spherical", float(r0))

    @classmethod
    def straight(cls, area=1.0):
        return cls(ProfileSpec.constant(area))

    def evaluate(self, xp):
        a, ad, add = self.a_spec.evaluate(np.asarray(xp, dtype=float))
        if np.any(a <= 0):
            raise ValueError("duct area must be positive")
        if self.kind == "spherical" and np.any(np.asarray(xp) < self.r0 * (1 - 1e-12)):
            raise ValueError("radius below the inner boundary r0")
        return a, ad, add


def duct_coords(v, m, a, model):
    """z, p and C at specific length v, entropy variable m and area a."""
    for name, val in (("v", v), ("m", m), ("a", a)):
        if np.any(np.asarray(val) <= 0):
            raise ValueError(f"{name} must be positive")
    g = model.gamma
    z = gas.eta_from_tau(v, model)
    p = model.K_p * np.power(a, -g) * m * m * np.power(z, model.p_exp)
    C = model.K_c * np.power(a, -(g - 1.0) / 2.0) * m * np.power(z, model.c_exp)
    return {"z": z, "p": p, "C": C}


@dataclass(frozen=True)
class DuctBox:
    """Threshold box: ranges of a, a', a'', m, m_x, m_xx, u and rho."""

    a: tuple
    ad: tuple
    add: tuple
    m: tuple
    mx: tuple
    mxx: tuple
    u: tuple
    rho: tuple

    def __post_init__(self):
        for name in ("a", "m", "rho"):
            lo, hi = getattr(self, name)
            if not 0 < lo <= hi:
                raise ValueError(f"box range for {name} must be positive and ordered")
        for name in ("ad", "add", "mx", "mxx", "u"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"box range for {name} must be ordered")


@dataclass(frozen=True)
class SphericalBox:
    r: tuple
    rho: tuple
    u: tuple

    def __post_init__(self):
        if not 0 < self.r[0] <= self.r[1]:
            raise ValueError("need 0 < r_min <= r_max")
        if not 0 < self.rho[0] <= self.rho[1]:
            raise ValueError("need 0 < rho_min <= rho_max")
        if not self.u[0] <= self.u[1]:
            raise ValueError("need u_min <= u_max")


class DuctSystem:
    """Right-hand side and monitors for the Lagrangian duct system."""

    field_names = ("u", "z", "xp")

    def __init__(self, model, grid, m_spec, geometry, box=None, monitor_support=None):
        self.model = model
        self.grid = grid
        self.m_spec = m_spec
        self.m = sample(m_spec, grid, positive=True, name="m")
        if grid.periodic and geometry.a_spec.family != "constant":
            raise ValueError("a varying area needs a bounded grid")
        self.geometry = geometry
        self.box = box
        if monitor_support is None:
            monitor_support = geometry.kind == "spherical"
        self.monitor_support = monitor_support and not grid.periodic
        self._F0 = None

    def speed(self, F):
        a = self.geometry.evaluate(F[2])[0]
        md = self.model
        return md.K_c * np.power(a, -(md.gamma - 1.0) / 2.0) * self.m.value * np.power(F[1], md.c_exp)

    def rhs(self, F):
        u, z, xp = F[0], F[1], F[2]
        m, mx = self.m.value, self.m.d1
        md = self.model
        g = md.gamma
        a, ad, _ = self.geometry.evaluate(xp)
        ah = np.power(a, -(g - 1.0) / 2.0)
        C = md.K_c * ah * m * np.power(z, md.c_exp)
        p = md.K_p * np.power(a, -g) * m * m * np.power(z, md.p_exp)
        v = md.K_tau * np.power(z, md.tau_exp)
        out = np.empty_like(F)
        out[0] = -m * C * ah * ddx(z, self.grid) - 2.0 * (a * p / m) * mx + g * p * v * ad
        out[1] = -(C / m) / ah * ddx(u, self.grid)
        out[2] = u
        if not self.grid.periodic:
            out[:, :N_FROZEN] = 0.0
            out[:, -N_FROZEN:] = 0.0
        return out

    def positivity(self, F):
        return F[1]

    def gradient_norm(self, F):
        return max(np.max(np.abs(ddx(F[0], self.grid))), np.max(np.abs(ddx(F[1], self.grid))))

    def rho(self, F):
        a = self.geometry.evaluate(F[2])[0]
        return 1.0 / (a * self.model.K_tau * np.power(F[1], self.model.tau_exp))

    def in_box(self, F):
        if self.box is None:
            return True
        rho = self.rho(F)
        ok = np.all(rho <= self.box.rho[1]) and np.all(rho >= self.box.rho[0])
        return bool(ok and np.all(F[0] <= self.box.u[1]) and np.all(F[0] >= self.box.u[0]))

    def support_ok(self, F):
        if not self.monitor_support or self._F0 is None:
            return True
        k = max(N_FROZEN + 2, self.grid.n // 20)
        scale = np.maximum(np.abs(self._F0[:2]), 1.0)
        dev = np.abs(F[:2] - self._F0[:2]) / scale
        return bool(np.max(dev[:, :k]) < SUPPORT_TOL and np.max(dev[:, -k:]) < SUPPORT_TOL)

    def watch(self, F0):
        self._F0 = np.array(F0, dtype=float)
        return self

    def point(self, F):
        """Named point values on the grid for coefficient evaluation."""
        a, ad, add = self.geometry.evaluate(F[2])
        return {"z": F[1], "u": F[0], "m": self.m.value, "mx": self.m.d1, "mxx": self.m.d2,
                "a": a, "ad": ad, "add": add}


def initial_positions(system, thermo_kind, thermo, x_left):
    """x'(x, 0) from dx' = v dx, integrated from x'(xmin) = x_left.

    ``thermo`` holds the thermodynamic profile values as a callable of the
    material coordinate; ``thermo_kind`` is ``rho``, ``v`` or ``z``.
    """
    model, geom, grid = system.model, system.geometry, system.grid

    def v_of(x, xp):
        if thermo_kind == "rho":
            return 1.0 / (geom.evaluate(xp)[0] * thermo(x))
        if thermo_kind == "v":
            return thermo(x)
        if thermo_kind == "z":
            return model.K_tau * np.power(thermo(x), model.tau_exp)
        raise ValueError(f"unknown duct thermodynamic variable {thermo_kind!r}")

    def f(x, y):
        return [float(v_of(np.array(x), np.array(y[0])))]

    sol = solve_ivp(f, (grid.x[0], grid.x[-1]), [float(x_left)], t_eval=grid.x,
                    rtol=1e-12, atol=1e-14, method="DOP853")
    if not sol.success:
        raise RuntimeError(f"initial position integration failed: {sol.message}")
    return sol.y[0]


def initial_fields(system, u_spec, thermo_kind, thermo_spec, x_left=None):
    """Sample (u, z, x') at t = 0."""
    grid, model, geom = system.grid, system.model, system.geometry
    if x_left is None:
        x_left = geom.r0 if geom.kind == "spherical" else grid.x[0]
    u = sample(u_spec, grid, name="u").value
    th = sample(thermo_spec, grid, positive=True, name=thermo_kind).value
    thermo = lambda x: thermo_spec.evaluate(x)[0]  # noqa: E731
    xp = initial_positions(system, thermo_kind, thermo, x_left)
    if thermo_kind == "z":
        z = np.array(th)
    elif thermo_kind == "v":
        z = gas.eta_from_tau(th, model)
    else:
        a = geom.evaluate(xp)[0]
        z = gas.eta_from_tau(1.0 / (a * th), model)
    return np.vstack([np.asarray(u, dtype=float), z, xp])


def lagrangian_residual(system, F):
    """max |dx'/dx - v| over interior points, with central differences.

    x' is not periodic even on a periodic grid, so one-sided stencils are
    used at the ends instead of wrapping.
    """
    v = system.model.K_tau * np.power(F[1], system.model.tau_exp)
    dxp = np.gradient(F[2], system.grid.x, edge_order=2)
    sl = slice(N_FROZEN, -N_FROZEN)
    return float(np.max(np.abs(dxp[sl] - v[sl])))


# -- gradient variables and coefficients ------------------------------------

def alpha_beta(system, F):
    """alpha, beta on the grid."""
    md = system.model
    g = md.gamma
    a = system.geometry.evaluate(F[2])[0]
    ah = np.power(a, -(g - 1.0) / 2.0)
    m, mx = system.m.value, system.m.d1
    ux = ddx(F[0], system.grid)
    w = ah * m * ddx(F[1], system.grid) + (g - 1.0) / g * ah * mx * F[1]
    return ux + w, ux - w


def k_coefficients(z, u, m, mx, a, ad, add, model):
    """k1, k2, k3+, k3- and F of the coupled alpha, beta system."""
    g, Kc = model.gamma, model.K_c
    k1 = (g + 1.0) / (2.0 * (g - 1.0)) * Kc * np.power(z, 2.0 / (g - 1.0))
    k2 = (g - 1.0) / (g * (g + 1.0)) * mx * z * np.power(a, -(g - 1.0) / 2.0)
    k3a = -(g - 1.0) / 4.0 * u * ad / a
    k3b = 3.0 * (g - 1.0) ** 2 / 8.0 * m * z * np.power(a, -(g + 1.0) / 2.0) * ad
    F = ((g - 1.0) ** 3 / (8.0 * Kc) * m * m * np.power(z, (2.0 * g - 4.0) / (g - 1.0))
         * np.power(a, -g - 1.0) * (a * add - g * ad * ad)
         + (g - 1.0) ** 2 / (2.0 * g) * m * mx * z * z * np.power(a, -g) * ad)
    return {"k1": k1, "k2": k2, "k3p": k3a + k3b, "k3m": k3a - k3b, "F": F}


def coupled_riccati_rhs(alpha, beta, point, model):
    """(D+ alpha, D- beta) from the coupled Riccati system."""
    k = k_coefficients(point["z"], point["u"], point["m"], point["mx"], point["a"],
                       point["ad"], point["add"], model)
    k1, k2 = k["k1"], k["k2"]
    dpa = k1 * (k2 * (3.0 * alpha + beta) + (alpha * beta - alpha * alpha)) + k["k3p"] * (alpha - beta) + k["F"]
    dmb = k1 * (-k2 * (alpha + 3.0 * beta) + (alpha * beta - beta * beta)) + k["k3m"] * (beta - alpha) + k["F"]
    return dpa, dmb


def _values(point, model, **extra):
    vals = dict(point)
    vals["Kc"] = model.K_c
    vals["Ktau"] = model.K_tau
    vals.update(extra)
    return vals


def YQ_transform(alpha, beta, point, model, q_variant="mirror"):
    """Y and Q at a point.

    ``q_variant="printed"`` returns Q built on alpha as displayed, kept for
    comparison; the default builds it on beta.
    """
    fwd, bwd = cons.construct(model.gamma)
    vals = _values(point, model, alpha=alpha, beta=beta)
    Y = fwd.transform.evaluate(**vals)
    if q_variant == "mirror":
        Q = bwd.transform.evaluate(**vals)
    elif q_variant == "printed":
        Q = cons.printed_q_transform(model.gamma).evaluate(**vals)
    else:
        raise ValueError(f"unknown q_variant {q_variant!r}")
    return Y, Q


def d_coeffs(point, model):
    """(d0, d1, d2, d0_bar, d1_bar) from the constructed expansions."""
    fwd, bwd = cons.construct(model.gamma)
    vals = _values(point, model)
    shape = np.shape(point["z"])

    def ev(P):
        return np.broadcast_to(np.asarray(P.evaluate(**vals), dtype=float), shape) if P else np.zeros(shape)

    return ev(fwd.d0), ev(fwd.d1), ev(fwd.d2), ev(bwd.d0), ev(bwd.d1)


def root_bound(d0, d1, d2):
    """|d1/(2 d2)| + sqrt(|d1/(2 d2)|^2 + |d0/d2|)."""
    r = np.abs(d1 / (2.0 * d2))
    return r + np.sqrt(r * r + np.abs(d0 / d2))


def gradients_YQ(system, F, q_variant="mirror"):
    al, be = alpha_beta(system, F)
    return YQ_transform(al, be, system.point(F), system.model, q_variant)


# -- spherical specialization -----------------------------------------------

def spherical_point(r, rho, u, model):
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    u = np.asarray(u, dtype=float)
    r, rho, u = np.broadcast_arrays(r, rho, u)
    if np.any(r <= 0) or np.any(rho <= 0):
        raise ValueError("r and rho must be positive")
    a = r * r
    z = np.power(model.K_tau * a * rho, (model.gamma - 1.0) / 2.0)
    one = np.ones_like(r)
    return {"z": z, "u": u, "m": one, "mx": 0.0 * one, "mxx": 0.0 * one,
            "a": a, "ad": 2.0 * r, "add": 2.0 * one}


@dataclass(frozen=True)
class SphericalRatios:
    """Constants of d1/d2 and d0/d2 in the isentropic spherical case."""

    G1: float
    G2: float
    G3: float
    G4: float
    G5: float
    G6: float
    G7: float


def _spherical_poly(P, g):
    """Density-form polynomial with m = 1, m_x = m_xx = 0, a = r^2, a' = 2r, a'' = 2."""
    Q = cons.to_density(P, g)
    Q = Q.subs("mx", Poly()).subs("mxx", Poly())
    Q = Q.subs("m", Poly.const(1)).subs("a", Poly.mono(1, r=2))
    Q = Q.subs("ad", Poly.mono(2, r=1)).subs("add", Poly.const(2))
    return Q


def _extract(P, base, patterns, model):
    """Split P / base into the named patterns; fail on anything else."""
    R = P / base
    out = {k: 0.0 for k in patterns}
    for c, powers in R.monomials():
        key = {k: v for k, v in powers.items() if k not in ("Kc", "Ktau")}
        name = next((k for k, pat in patterns.items() if pat == key), None)
        if name is None:
            raise AssertionError(f"unexpected spherical monomial {powers}")
        out[name] += float(c) * model.K_c ** float(powers.get("Kc", 0)) \
            * model.K_tau ** float(powers.get("Ktau", 0))
    return out


def spherical_ratio_constants(model, family="forward"):
    """G^1..G^5 extracted from the constructed coefficients; G^6, G^7 derived.

    G^6 and G^7 come from the triangle inequality:
    |root| <= |d1/d2| + sqrt|d0/d2| and |u| R <= (u^2 + R^2)/2.
    """
    g = cons.check_gamma(model.gamma)
    fwd, bwd = cons.construct(g)
    form = fwd if family == "forward" else bwd
    d2 = _spherical_poly(form.d2, g)
    d1 = _spherical_poly(form.d1, g)
    d0 = _spherical_poly(form.d0, g)
    if len(d2) != 1:
        raise AssertionError("d2 must be a single monomial")
    F = Fraction
    base1 = d2 * Poly.mono(1, r=(g - 5) / 2, rho=(g - 3) / 4)
    c1 = _extract(d1, base1, {"G4": {"u": F(1)}, "G5": {"rho": (g - 1) / 2}}, model)
    base0 = d2 * Poly.mono(1, r=g - 5, rho=(g - 3) / 2)
    c0 = _extract(d0, base0, {"G1": {"u": F(1), "rho": (g - 1) / 2}, "G2": {"rho": g - 1},
                              "G3": {"u": F(2)}}, model)
    G1, G2, G3 = c0["G1"], c0["G2"], c0["G3"]
    G4, G5 = c1["G4"], c1["G5"]
    G6 = abs(G4) + np.sqrt(abs(G3) + abs(G1) / 2.0)
    G7 = abs(G5) + np.sqrt(abs(G2) + abs(G1) / 2.0)
    return SphericalRatios(G1, G2, G3, G4, G5, float(G6), float(G7))


def spherical_coeffs(r, rho, u, model, r0=None):
    """(d0, d1, d2) and the root lower bound at spherical states.

    Coefficients go through :func:`d_coeffs` with a = r^2, so the spherical
    and duct paths share one implementation.
    """
    r = np.asarray(r, dtype=float)
    if r0 is not None and np.any(r < r0):
        raise ValueError("r below the inner radius r0")
    pt = spherical_point(r, rho, u, model)
    d0, d1, d2, _, _ = d_coeffs(pt, model)
    G = spherical_ratio_constants(model)
    g = model.gamma
    X = np.power(pt["a"], (g - 5.0) / 4.0) * np.power(rho, (g - 3.0) / 4.0)
    lower = -X * (G.G6 * np.abs(pt["u"]) + G.G7 * np.power(rho, (g - 1.0) / 2.0))
    return {"d0": d0, "d1": d1, "d2": d2, "root_lower_bound": lower}


# -- threshold ----------------------------------------------------------------

@dataclass(frozen=True)
class ThresholdResult:
    value: float
    rel_change: float
    samples: int
    converged: bool


def _root_bounds(point, model):
    d0, d1, d2, e0, e1 = d_coeffs(point, model)
    return np.maximum(root_bound(d0, d1, d2), root_bound(e0, e1, d2))


def _max_root_bound(point, model):
    return float(np.max(_root_bounds(point, model)))


def _axis(lo, hi, n):
    # float even for integer JSON bounds: the exact polynomials use negative powers
    return np.array([lo], dtype=float) if lo == hi else np.linspace(lo, hi, n)


def _box_ranges(box):
    if isinstance(box, SphericalBox):
        return [box.r, box.rho, box.u]
    return [getattr(box, k) for k in ("a", "ad", "add", "m", "mx", "mxx", "u", "rho")]


def _box_point(coords, box, model):
    if isinstance(box, SphericalBox):
        return spherical_point(coords[0], coords[1], coords[2], model)
    a, ad, add, m, mx, mxx, u, rho = coords
    z = np.power(model.K_tau * a * rho, (model.gamma - 1.0) / 2.0)
    return {"z": z, "u": u, "m": m, "mx": mx, "mxx": mxx, "a": a, "ad": ad, "add": add}


def _polish(box, model, starts):
    """Bounded local maximization from the best grid samples."""
    ranges = _box_ranges(box)
    free = [k for k, (lo, hi) in enumerate(ranges) if hi > lo]
    if not free:
        return -np.inf
    bounds = [tuple(ranges[k]) for k in free]

    def neg(v):
        coords = [np.array([lo], dtype=float) for lo, _ in ranges]
        for k, x in zip(free, v):
            coords[k] = np.array([x], dtype=float)
        return -_max_root_bound(_box_point(coords, box, model), model)

    best = -np.inf
    for x0 in starts:
        # the bound is only piecewise smooth (absolute values, two families)
        res = minimize(neg, x0[free], method="Powell", bounds=bounds,
                       options={"xtol": 1e-10, "ftol": 1e-12})
        best = max(best, -float(res.fun))
    return best


def duct_threshold(box, model, n=9, rtol=0.01, max_samples=4_000_000, polish=4):
    """N_bar as the sup of the Riccati root bounds over the box.

    A tensor grid is refined (n -> 2n - 1 per axis) until successive sups
    agree to ``rtol``; at each level the ``polish`` best samples seed a
    bounded local maximization.  The starting ``n`` is lowered if needed so
    at least two levels fit in ``max_samples`` (the plain duct box has eight
    axes).
    """
    cons.check_gamma(model.gamma)
    ranges = _box_ranges(box)
    dim = sum(hi > lo for lo, hi in ranges)
    while n > 3 and (2 * n - 1) ** dim > max_samples:
        n = (n + 1) // 2
    prev, change, total = None, float("inf"), 0
    while True:
        axes = [_axis(lo, hi, n) for lo, hi in ranges]
        size = int(np.prod([ax.size for ax in axes]))
        if size > max_samples:
            return ThresholdResult(prev if prev is not None else float("nan"), change, total, False)
        total = size
        mesh = [g.ravel() for g in np.meshgrid(*axes, indexing="ij")]
        vals = _root_bounds(_box_point(mesh, box, model), model)
        val = float(np.max(vals))
        if polish:
            top = np.argsort(vals)[-polish:]
            val = max(val, _polish(box, model, [np.array([c[i] for c in mesh]) for i in top]))
        if prev is not None:
            change = abs(val - prev) / max(abs(val), 1e-300)
            if change <= rtol:
                return ThresholdResult(val, change, total, True)
        prev = val
        n = 2 * n - 1


# -- characteristic diagnostics ----------------------------------------------

def path_point(traj, path):
    """Point values along a traced path (fields interpolated, profiles exact)."""
    system = traj.system
    X = wrap(path.x, system.grid)
    m, mx, mxx = system.m_spec.evaluate(X)
    a, ad, add = system.geometry.evaluate(path.values["xp"])
    return {"z": path.values["z"], "u": path.values["u"], "m": m, "mx": mx, "mxx": mxx,
            "a": a, "ad": ad, "add": add}


def coupled_residual(traj, path):
    """d(alpha)/dt - rhs along a forward path, or d(beta)/dt - rhs along a backward one."""
    system = traj.system
    idx = 0 if path.family == "forward" else 1
    al = sample_along(traj, path, lambda F: alpha_beta(system, F)[0])
    be = sample_along(traj, path, lambda F: alpha_beta(system, F)[1])
    pt = path_point(traj, path)
    dpa, dmb = coupled_riccati_rhs(al, be, pt, system.model)
    w = (al, be)[idx]
    rhs = (dpa, dmb)[idx]
    res = np.gradient(w, path.t) - rhs
    return path.t[1:-1], res[1:-1]


def decoupled_residual(traj, path, q_variant="mirror"):
    """d(Y)/dt - (d0 + d1 Y + d2 Y^2) forward, d(Q)/dt - (d0b - d1b Q + d2 Q^2) backward."""
    system = traj.system
    idx = 0 if path.family == "forward" else 1
    W = sample_along(traj, path, lambda F: gradients_YQ(system, F, q_variant)[idx])
    d0, d1, d2, e0, e1 = d_coeffs(path_point(traj, path), system.model)
    if idx == 0:
        rhs = d0 + d1 * W + d2 * W * W
    else:
        rhs = e0 - e1 * W + d2 * W * W
    res = np.gradient(W, path.t) - rhs
    return path.t[1:-1], res[1:-1]
