"""
Analytic profiles with exact derivatives, uniform grids and quadrature.

Every initial-data and geometry field in the package is one of a few
closed-form families, so first and second derivatives are exact rather than
finite-differenced.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

log = logging.getLogger(__name__)

FAMILIES = ("constant", "gaussian_bump", "tanh_ramp", "sine", "polynomial")

_PARAMS = {
    "constant": {"value": None},
    "gaussian_bump": {"base": 0.0, "amp": None, "center": 0.0, "width": None},
    "tanh_ramp": {"left": None, "right": None, "center": 0.0, "width": None},
    "sine": {"offset": 0.0, "amp": None, "wavenumber": 1.0, "phase": 0.0},
    "polynomial": {"coefficients": None},
}

# far-field flatness required of non-periodic profiles, relative to max |value|
FLAT_TOL = 1e-12


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid of material coordinates.

    A periodic grid has ``n`` points on ``[xmin, xmax)``; a bounded grid has
    ``n`` points on ``[xmin, xmax]``.
    """

    x: np.ndarray
    dx: float
    periodic: bool
    xmin: float
    xmax: float

    @classmethod
    def uniform(cls, n, xmin, xmax, periodic=True):
        if n < 16:
            raise ValueError(f"grid needs at least 16 points, got {n}")
        if not xmax > xmin:
            raise ValueError("xmax must exceed xmin")
        if periodic:
            dx = (xmax - xmin) / n
            x = xmin + dx * np.arange(n)
        else:
            dx = (xmax - xmin) / (n - 1)
            x = xmin + dx * np.arange(n)
        x.setflags(write=False)
        return cls(x=x, dx=dx, periodic=periodic, xmin=float(xmin), xmax=float(xmax))

    @property
    def n(self):
        return self.x.size

    @property
    def length(self):
        return self.xmax - self.xmin

    def refined(self):
        """Grid with half the spacing (shares the coarse points)."""
        if self.periodic:
            return Grid1D.uniform(2 * self.n, self.xmin, self.xmax, True)
        return Grid1D.uniform(2 * self.n - 1, self.xmin, self.xmax, False)


@dataclass(frozen=True)
class ProfileField:
    value: np.ndarray
    d1: np.ndarray
    d2: np.ndarray


@dataclass(frozen=True)
class ProfileSpec:
    """A closed-form profile ``{"family": ..., "params": {...}}``."""

    family: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in _PARAMS:
            raise ValueError(f"unknown profile family {self.family!r}; expected one of {FAMILIES}")
        allowed = _PARAMS[self.family]
        unknown = set(self.params) - set(allowed)
        if unknown:
            raise ValueError(f"unknown parameter(s) {sorted(unknown)} for family {self.family!r}")
        full = {}
        for key, default in allowed.items():
            if key in self.params:
                full[key] = self.params[key]
            elif default is None:
                raise ValueError(f"family {self.family!r} requires parameter {key!r}")
            else:
                full[key] = default
        if self.family == "polynomial":
            coeffs = [float(c) for c in full["coefficients"]]
            if not coeffs:
                raise ValueError("polynomial needs at least one coefficient")
            full["coefficients"] = coeffs
        else:
            full = {k: float(v) for k, v in full.items()}
        for key in ("width",):
            if key in full and not full[key] > 0:
                raise ValueError(f"{self.family} width must be positive")
        object.__setattr__(self, "params", full)

    @classmethod
    def from_dict(cls, d):
        return cls(d["family"], dict(d.get("params", {})))

    def to_dict(self):
        return {"family": self.family, "params": dict(self.params)}

    @classmethod
    def constant(cls, value):
        return cls("constant", {"value": value})

    def evaluate(self, x):
        """Value and the first two derivatives at ``x``."""
        x = np.asarray(x, dtype=float)
        p = self.params
        f = self.family
        if f == "constant":
            v = np.full_like(x, p["value"])
            return v, np.zeros_like(x), np.zeros_like(x)
        if f == "gaussian_bump":
            s = (x - p["center"]) / p["width"]
            g = np.exp(-s * s)
            w = p["width"]
            return (p["base"] + p["amp"] * g,
                    p["amp"] * g * (-2.0 * s / w),
                    p["amp"] * g * (4.0 * s * s - 2.0) / (w * w))
        if f == "tanh_ramp":
            w = p["width"]
            t = np.tanh((x - p["center"]) / w)
            half = 0.5 * (p["right"] - p["left"])
            sech2 = 1.0 - t * t
            return (p["left"] + half * (1.0 + t),
                    half * sech2 / w,
                    -2.0 * half * t * sech2 / (w * w))
        if f == "sine":
            k = p["wavenumber"]
            arg = k * x + p["phase"]
            s, c = np.sin(arg), np.cos(arg)
            return p["offset"] + p["amp"] * s, p["amp"] * k * c, -p["amp"] * k * k * s
        coeffs = np.asarray(p["coefficients"])
        poly = np.polynomial.Polynomial(coeffs)
        return poly(x), poly.deriv(1)(x), poly.deriv(2)(x)

    def closed_form_tv_log(self, a, b):
        """Closed-form total variation of ln(profile) on [a, b], or None."""
        p = self.params
        if self.family == "constant":
            return 0.0
        if self.family == "tanh_ramp":
            va, _, _ = self.evaluate(np.array([a, b]))
            return abs(math.log(va[1]) - math.log(va[0]))
        if self.family == "gaussian_bump":
            pts = [a, b]
            if a < p["center"] < b:
                pts = [a, p["center"], b]
            v, _, _ = self.evaluate(np.array(pts))
            lv = np.log(v)
            return float(np.sum(np.abs(np.diff(lv))))
        return None


class ExpProfile:
    """``exp(scale * inner(x))`` with exact derivatives; used for m = exp(S/2c_tau)."""

    family = "exp"

    def __init__(self, inner, scale):
        self.inner = inner
        self.scale = float(scale)

    def evaluate(self, x):
        s, s1, s2 = self.inner.evaluate(x)
        v = np.exp(self.scale * s)
        d1 = v * self.scale * s1
        d2 = v * (self.scale * s2 + (self.scale * s1) ** 2)
        return v, d1, d2

    def closed_form_tv_log(self, a, b):
        # |(ln m)'| = scale |S'|; total variation of S is available for the same families
        if self.inner.family == "constant":
            return 0.0
        if self.inner.family in ("tanh_ramp", "gaussian_bump"):
            pts = [a, b]
            c = self.inner.params.get("center")
            if self.inner.family == "gaussian_bump" and a < c < b:
                pts = [a, c, b]
            v, _, _ = self.inner.evaluate(np.array(pts))
            return float(abs(self.scale) * np.sum(np.abs(np.diff(v))))
        return None

    def to_dict(self):
        return {"family": "exp", "scale": self.scale, "inner": self.inner.to_dict()}


def sample(spec, grid, positive=False, name="profile"):
    """Sample ``spec`` and its exact derivatives on ``grid``.

    Parameters
    ----------
    positive : bool
        Reject profiles that are not strictly positive on the grid.
    """
    v, d1, d2 = spec.evaluate(grid.x)
    if positive and not np.all(v > 0):
        raise ValueError(f"{name} must be strictly positive on the grid")
    check_boundary_compat(spec, grid, name)
    for a in (v, d1, d2):
        a.setflags(write=False)
    return ProfileField(v, d1, d2)


def check_boundary_compat(spec, grid, name="profile"):
    """Periodic grids need periodic profiles; bounded grids need flat far fields."""
    ends = np.array([grid.xmin, grid.xmax])
    v, d1, d2 = spec.evaluate(ends)
    scale = max(1.0, float(np.max(np.abs(spec.evaluate(grid.x)[0]))))
    if grid.periodic:
        bad = (abs(v[1] - v[0]) > 1e-10 * scale or abs(d1[1] - d1[0]) > 1e-8 * scale
               or abs(d2[1] - d2[0]) > 1e-6 * scale)
        if bad:
            raise ValueError(f"{name} is not periodic on [{grid.xmin}, {grid.xmax})")
    else:
        if np.max(np.abs(d1)) > FLAT_TOL * scale or np.max(np.abs(d2)) > 1e-10 * scale:
            raise ValueError(
                f"{name} must be constant near the boundaries of a non-periodic grid "
                f"(|d1| = {np.max(np.abs(d1)):.3g} at the ends)")


def simpson_uniform(f, dx):
    """Composite Simpson on an odd number of equally spaced samples."""
    f = np.asarray(f)
    if f.size % 2 == 0:
        # trapezoid on the last interval keeps the rule usable on even counts
        return simpson_uniform(f[:-1], dx) + 0.5 * dx * (f[-2] + f[-1])
    return dx / 3.0 * (f[0] + f[-1] + 4.0 * f[1:-1:2].sum() + 2.0 * f[2:-1:2].sum())


def total_variation_V(m_spec, grid, closed_form=True):
    """V = integral of |m'| / m over the grid's domain."""
    if closed_form and hasattr(m_spec, "closed_form_tv_log"):
        val = m_spec.closed_form_tv_log(grid.xmin, grid.xmax)
        if val is not None:
            return float(val)
    # grid resolution, endpoint included so periodic domains are covered fully
    n = grid.n + (1 if grid.periodic else 0)
    if n % 2 == 0:
        n += 1
    xs = np.linspace(grid.xmin, grid.xmax, n)
    v, d1, _ = m_spec.evaluate(xs)
    if not np.all(v > 0):
        raise ValueError("m must be strictly positive")
    return float(simpson_uniform(np.abs(d1) / v, xs[1] - xs[0]))


class QuadResult(NamedTuple):
    value: float
    error: float
    converged: bool


def quad(f: Callable[[float], float], a, b, tol=1e-10, max_depth=50):
    """Adaptive Simpson quadrature of a scalar function on [a, b]."""
    if not tol > 0:
        raise ValueError("tol must be positive")
    if a == b:
        return QuadResult(0.0, 0.0, True)
    failed = []

    def simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, b, fa, fm, fb, whole, tol, depth):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = simpson(fa, flm, fm, m - a)
        right = simpson(fm, frm, fb, b - m)
        delta = left + right - whole
        if abs(delta) <= 15.0 * tol or depth >= max_depth:
            if depth >= max_depth and abs(delta) > 15.0 * tol:
                failed.append(abs(delta) / 15.0)
            return left + right + delta / 15.0, abs(delta) / 15.0
        lv, le = recurse(a, m, fa, flm, fm, left, 0.5 * tol, depth + 1)
        rv, re = recurse(m, b, fm, frm, fb, right, 0.5 * tol, depth + 1)
        return lv + rv, le + re

    fa, fb, fm = f(a), f(b), f(0.5 * (a + b))
    value, err = recurse(a, b, fa, fm, fb, simpson(fa, fm, fb, b - a), tol, 0)
    if failed:
        log.warning("quad did not converge on [%g, %g]: estimate %.17g, error %.3g", a, b, value, err)
    return QuadResult(float(value), float(err), not failed)


_GL_CACHE = {}


def gauss_legendre(f, a, b, panels=16, order=10):
    """Composite Gauss-Legendre integral of a vectorized ``f`` over [a, b].

    ``a`` and ``b`` may be arrays; ``f`` receives nodes with a trailing axis
    of length ``panels * order`` and must broadcast over the leading axes.
    """
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    xi, wi = _GL_CACHE[order]
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    edges = np.linspace(0.0, 1.0, panels + 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 / panels
    u = (centers[:, None] + half * xi[None, :]).ravel()
    w = np.tile(wi * half, panels)
    nodes = a + (b - a) * u
    return np.sum(f(nodes) * w, axis=-1) * (b - a)[..., 0]
