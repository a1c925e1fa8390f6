"""
Orthogonal-field MHD as a generalized p-system.

With the transverse field frozen into the fluid the Lagrangian system is

    tau_t - u_x = 0,     u_t + p~_x = 0,     p~ = A(x) tau^-gamma + B(x) tau^-2,

with A = K exp(S / c_tau) and B = (mu0 / 2)(H~2^2 + H~3^2) stationary.  The
solver evolves (u, h), h = int_tau^inf c dtau, so that B = 0 and constant A
reproduce the Euler solver term for term.

h and its A, B partials have closed forms: substituting s = tau'^(gamma-2)
turns every integral into an incomplete beta function, evaluated through
the Gauss hypergeometric function.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import hyp2f1

from .numerics import ddx
from .profiles import gauss_legendre, sample

GAMMA_MAX = 2.0
NEWTON_TOL = 1e-8


class MhdMedium:
    """Stationary coefficients A(x), B(x) and the adiabatic exponent."""

    def __init__(self, A_spec, B_spec, gamma):
        if not 1.0 < gamma <= GAMMA_MAX:
            raise ValueError(f"MHD requires 1 < gamma <= 2, got {gamma}")
        self.A_spec = A_spec
        self.B_spec = B_spec
        self.gamma = float(gamma)

    def coefficients(self, x):
        """(A, A', A'', B, B', B'') at positions x, validated."""
        A = self.A_spec.evaluate(x)
        B = self.B_spec.evaluate(x)
        if np.any(A[0] <= 0):
            raise ValueError("A must be positive")
        if np.any(B[0] < 0):
            raise ValueError("B must be non-negative")
        return (*A, *B)

    @classmethod
    def from_gas(cls, model, m_spec_value=1.0):
        """Pure gas with constant entropy: A = K m^2, B = 0."""
        from .profiles import ProfileSpec
        return cls(ProfileSpec.constant(model.K * m_spec_value ** 2), ProfileSpec.constant(0.0),
                   model.gamma)


def _J(tau, A, B, gamma, j, e):
    """int_tau^inf t^-(gamma+1)/2 s^j (1 + b s)^e dt with s = t^(gamma-2), b = 2B/(gamma A)."""
    tau = np.asarray(tau, dtype=float)
    b = 2.0 * np.asarray(B, dtype=float) / (gamma * np.asarray(A, dtype=float))
    if gamma == 2.0:
        return (1.0 + b) ** e * 2.0 / np.sqrt(tau)
    k = (gamma - 1.0) / (2.0 * (2.0 - gamma)) + j
    s0 = tau ** (gamma - 2.0)
    # Pfaff transform keeps the argument in [0, 1), stable as k grows near gamma = 2
    bs = b * s0
    # s0^k and (2 - gamma) k written out so nothing is amplified by large k
    rate = (gamma - 1.0) / 2.0 + j * (2.0 - gamma)
    with np.errstate(invalid="ignore", over="ignore"):
        out = tau ** -rate / rate * (1.0 + bs) ** e * hyp2f1(-e, 1.0, k + 1.0, bs / (1.0 + bs))
    bad = ~np.isfinite(out)
    if np.any(bad):
        # scipy's hyp2f1 gives up for large k with the argument near 1
        tb, bb = np.broadcast_arrays(tau, b)
        out = np.array(out, dtype=float, copy=True)
        out[bad] = _J_quad(tb[bad], bb[bad], gamma, j, e, rate)
    return out


def _J_quad(tau, b, gamma, j, e, rate):
    """Direct quadrature of _J in log t, truncated where the integrand is below 1e-17."""
    lo = np.log(tau)

    def f(v):
        return np.exp(-rate * v) * (1.0 + b[..., None] * np.exp((gamma - 2.0) * v)) ** e

    span = 40.0 / rate
    return gauss_legendre(f, lo, lo + span, panels=max(64, math.ceil(4.0 * span)), order=12)


def h_of_tau_AB(tau, A, B, gamma):
    return np.sqrt(gamma * A) * _J(tau, A, B, gamma, 0, 0.5)


def h_partials_AB(tau, A, B, gamma):
    """(dh/dA, dh/dB) at fixed tau."""
    hA = 0.5 * math.sqrt(gamma) / np.sqrt(A) * _J(tau, A, B, gamma, 0, -0.5)
    hB = _J(tau, A, B, gamma, 1, -0.5) / np.sqrt(gamma * A)
    return hA, hB


def tau_of_h_AB(h, A, B, gamma):
    """Invert h(tau) by Newton's method in log tau."""
    h = np.asarray(h, dtype=float)
    if np.any(h <= 0):
        raise ValueError("h must be positive")
    A = np.broadcast_to(np.asarray(A, dtype=float), h.shape)
    B = np.broadcast_to(np.asarray(B, dtype=float), h.shape)
    if gamma == 2.0:
        return (2.0 * np.sqrt(2.0 * (A + B)) / h) ** 2
    # pure-gas guess; B >= 0 only raises h, so the root lies at or above it
    s = (2.0 / (gamma - 1.0)) * np.log(2.0 * np.sqrt(gamma * A) / ((gamma - 1.0) * h))
    polish = False
    for _ in range(100):
        tau = np.exp(s)
        f = h_of_tau_AB(tau, A, B, gamma) - h
        c = np.sqrt(gamma * A * tau ** (-gamma - 1.0) + 2.0 * B * tau ** -3.0)
        ds = np.clip(f / (c * tau), -2.0, 2.0)
        s = s + ds
        if polish:
            break
        # quadratic convergence: one more step after 1e-8 lands at roundoff
        polish = np.max(np.abs(ds)) < NEWTON_TOL * max(1.0, float(np.max(np.abs(s))))
    return np.exp(s)


def _dpow(tau, e, i):
    """i-th tau derivative of tau^(-e)."""
    coef = 1.0
    for n in range(i):
        coef *= -(e + n)
    return coef * tau ** (-e - i)


@dataclass(frozen=True)
class MhdPoint:
    """p~ and its partials at (tau, x), plus c, h and derived quantities."""

    tau: np.ndarray
    x: np.ndarray
    p_tilde: np.ndarray
    p_tau: np.ndarray
    p_x: np.ndarray
    p_tautau: np.ndarray
    p_xtau: np.ndarray
    p_tautautau: np.ndarray
    p_xtautau: np.ndarray
    p_xx: np.ndarray
    p_xxtau: np.ndarray
    c: np.ndarray
    c_tau: np.ndarray
    c_x: np.ndarray
    h: np.ndarray
    h_x: np.ndarray

    @property
    def c_h(self):
        return -self.c_tau / self.c

    @property
    def p_mu(self):
        return self.p_x - self.c * self.h_x

    @property
    def G(self):
        """(p~_mu / c)_h = (p~_xtau p~_tau - p~_x p~_tautau) / (2 p~_tau^2)."""
        return (self.p_xtau * self.p_tau - self.p_x * self.p_tautau) / (2.0 * self.p_tau ** 2)

    @property
    def G_tau(self):
        N = self.p_xtau * self.p_tau - self.p_x * self.p_tautau
        Nt = self.p_xtautau * self.p_tau - self.p_x * self.p_tautautau
        return Nt / (2.0 * self.p_tau ** 2) - N * self.p_tautau / self.p_tau ** 3

    @property
    def G_x(self):
        N = self.p_xtau * self.p_tau - self.p_x * self.p_tautau
        Nx = (self.p_xxtau * self.p_tau + self.p_xtau ** 2
              - self.p_xx * self.p_tautau - self.p_x * self.p_xtautau)
        return Nx / (2.0 * self.p_tau ** 2) - N * self.p_xtau / self.p_tau ** 3


def ptilde(tau, x, medium):
    """All closed-form partials of p~ at (tau, x)."""
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    x = np.broadcast_to(np.asarray(x, dtype=float), tau.shape)
    A, A1, A2, B, B1, B2 = medium.coefficients(x)
    return _point(tau, x, A, A1, A2, B, B1, B2, medium.gamma)


def _point(tau, x, A, A1, A2, B, B1, B2, g):
    def P(i, j):
        a = (A, A1, A2)[j]
        b = (B, B1, B2)[j]
        return a * _dpow(tau, g, i) + b * _dpow(tau, 2.0, i)

    p_tau = P(1, 0)
    c = np.sqrt(-p_tau)
    h = h_of_tau_AB(tau, A, B, g)
    hA, hB = h_partials_AB(tau, A, B, g)
    return MhdPoint(
        tau=tau, x=x, p_tilde=P(0, 0), p_tau=p_tau, p_x=P(0, 1), p_tautau=P(2, 0),
        p_xtau=P(1, 1), p_tautautau=P(3, 0), p_xtautau=P(2, 1), p_xx=P(0, 2), p_xxtau=P(1, 2),
        c=c, c_tau=-P(2, 0) / (2.0 * c), c_x=-P(1, 1) / (2.0 * c), h=h, h_x=hA * A1 + hB * B1,
    )


def h_of_tau(tau, x, medium):
    tau = np.asarray(tau, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    A, _, _, B, _, _ = medium.coefficients(np.broadcast_to(x, tau.shape))
    return h_of_tau_AB(tau, A, B, medium.gamma)


def tau_of_h(h, x, medium):
    h = np.asarray(h, dtype=float)
    A, _, _, B, _, _ = medium.coefficients(np.broadcast_to(x, h.shape))
    return tau_of_h_AB(h, A, B, medium.gamma)


def default_h0(medium, x_left, tau_ref=1.0):
    """Reference constant of the I integral: h at tau_ref on the left edge."""
    return float(h_of_tau(np.array(tau_ref), np.array(x_left), medium))


def _integrand_g(pt):
    """g = (1/2) sqrt(c) G, the I integrand in h."""
    return 0.5 * np.sqrt(pt.c) * pt.G


def _integrand_g_mu(pt):
    """d g / d mu at fixed h: (h_x / c) g_tau + g_x."""
    sc = np.sqrt(pt.c)
    G = pt.G
    g_tau = 0.5 * (pt.c_tau * G / (2.0 * sc) + sc * pt.G_tau)
    g_x = 0.5 * (pt.c_x * G / (2.0 * sc) + sc * pt.G_x)
    return pt.h_x / pt.c * g_tau + g_x


def _h_integral(tau, x, medium, h0, integrand, panels=None, order=12):
    """int_{h0}^{h(tau)} integrand dh = int_tau^{tau0} integrand * c dtau, in log tau."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    x = np.broadcast_to(np.asarray(x, dtype=float), tau.shape)
    coef = medium.coefficients(x)
    tau0 = tau_of_h_AB(np.full(tau.shape, h0), coef[0], coef[3], medium.gamma)
    lo, hi = np.log(tau), np.log(tau0)
    if panels is None:
        panels = int(min(400, max(8, math.ceil(4.0 * float(np.max(np.abs(hi - lo)))))))
    cx = [np.asarray(v)[:, None] for v in coef]
    xx = x[:, None]

    def f(s):
        t = np.exp(s)
        pt = _point(t, xx, *cx, medium.gamma)
        return integrand(pt) * pt.c * t

    return gauss_legendre(f, lo, hi, panels=panels, order=order)


def compute_I(tau, x, medium, h0):
    """I at (h(tau, x), x) with lower limit h0."""
    return _h_integral(tau, x, medium, h0, _integrand_g)


def compute_I_mu(tau, x, medium, h0):
    """mu-derivative of I at fixed h, by quadrature of the differentiated integrand."""
    return _h_integral(tau, x, medium, h0, _integrand_g_mu)


def mhd_gradient_vars(ux, hx, p_mu, c, I):
    """y and q from total x-derivatives u_x, h_x and the medium terms."""
    sc = np.sqrt(c)
    y = sc * (ux + hx) + p_mu / sc - I
    q = sc * (ux - hx) - p_mu / sc + I
    return y, q


def mhd_riccati_coeffs(pt, I, I_mu):
    c, ch, G = pt.c, pt.c_h, pt.G
    sc = np.sqrt(c)
    a0 = -c * I_mu + 0.5 * sc * G * pt.p_mu - c * G * I - ch / (2.0 * sc) * I * I
    a1 = -c * G - ch / sc * I
    a2 = -ch / (2.0 * sc)
    return a0, a1, a2


def mhd_bound_quantities(tau, x, medium, h0=None):
    """|G|, |p~_mu / sqrt c|, |c sqrt c / c_h|, |I|, |I_mu| at (tau, x)."""
    tau = np.atleast_1d(np.asarray(tau, dtype=float))
    x = np.broadcast_to(np.asarray(x, dtype=float), tau.shape)
    pt = ptilde(tau, x, medium)
    out = {
        "G": np.abs(pt.G),
        "p_mu_over_sqrt_c": np.abs(pt.p_mu / np.sqrt(pt.c)),
        "c_sqrt_c_over_c_h": np.abs(pt.c * np.sqrt(pt.c) / pt.c_h),
    }
    if h0 is not None:
        out["I"] = np.abs(compute_I(tau, x, medium, h0))
        out["I_mu"] = np.abs(compute_I_mu(tau, x, medium, h0))
    return out


def root_bound(a0, a1, a2):
    """|a1/(2 a2)| + sqrt(|a1/(2 a2)|^2 + a0/|a2|), radicand clamped at zero."""
    r = np.abs(a1 / (2.0 * a2))
    rad = np.maximum(r * r + a0 / np.abs(a2), 0.0)
    return r + np.sqrt(rad)


@dataclass(frozen=True)
class MhdBox:
    tau_min: float
    tau_max: float
    x_min: float
    x_max: float

    def __post_init__(self):
        if not 0 < self.tau_min < self.tau_max:
            raise ValueError("need 0 < tau_min < tau_max")
        if not self.x_min <= self.x_max:
            raise ValueError("need x_min <= x_max")


@dataclass(frozen=True)
class SupResult:
    value: float
    rel_change: float
    samples: int
    converged: bool


def mhd_threshold(box, medium, h0, n_tau=32, n_x=32, rtol=0.01, max_refine=5):
    """N^ as the sampled sup of the root bound over the (tau, x) box.

    Sampling doubles in both directions until successive sups agree to rtol.
    """
    prev = None
    for _ in range(max_refine + 1):
        taus = np.geomspace(box.tau_min, box.tau_max, n_tau)
        xs = np.linspace(box.x_min, box.x_max, n_x)
        T, X = np.meshgrid(taus, xs, indexing="ij")
        T, X = T.ravel(), X.ravel()
        pt = ptilde(T, X, medium)
        I = compute_I(T, X, medium, h0)
        Imu = compute_I_mu(T, X, medium, h0)
        val = float(np.max(root_bound(*mhd_riccati_coeffs(pt, I, Imu))))
        if prev is not None:
            change = abs(val - prev) / max(abs(val), 1e-300)
            if change <= rtol or val == prev:
                return SupResult(val, change, T.size, True)
        prev = val
        n_tau, n_x = 2 * n_tau - 1, 2 * n_x - 1
    return SupResult(val, change, T.size, False)


def euler_scale(m, model):
    """Factor lambda with y_mhd = lambda * y_euler when B = 0 and m is constant."""
    g = model.gamma
    return math.sqrt(model.K_c) * m ** (0.5 + 3.0 * (3.0 - g) / (2.0 * (3.0 * g - 1.0)))


class MhdSystem:
    """Method-of-lines right-hand side in (u, h)."""

    field_names = ("u", "h")

    def __init__(self, medium, grid):
        self.medium = medium
        self.grid = grid
        self.coef = medium.coefficients(grid.x)
        self.A = sample(medium.A_spec, grid, positive=True, name="A")
        self.B = sample(medium.B_spec, grid, name="B")

    def tau(self, F):
        return tau_of_h_AB(F[1], self.coef[0], self.coef[3], self.medium.gamma)

    def point(self, F):
        return _point(self.tau(F), self.grid.x, *self.coef, self.medium.gamma)

    def speed(self, F):
        tau = self.tau(F)
        A, B = self.coef[0], self.coef[3]
        g = self.medium.gamma
        return np.sqrt(g * A * tau ** (-g - 1.0) + 2.0 * B * tau ** -3.0)

    def rhs(self, F):
        u, h = F[0], F[1]
        pt = self.point(F)
        c = pt.c
        out = np.empty_like(F)
        out[0] = -c * ddx(h, self.grid) - pt.p_mu
        out[1] = -c * ddx(u, self.grid)
        if not self.grid.periodic:
            out[:, :2] = 0.0
            out[:, -2:] = 0.0
        return out

    def positivity(self, F):
        return F[1]

    def gradient_norm(self, F):
        return max(np.max(np.abs(ddx(F[0], self.grid))), np.max(np.abs(ddx(self.tau(F), self.grid))))

    def gradients(self, F, h0):
        """(y, q) on the grid."""
        pt = self.point(F)
        I = compute_I(pt.tau, self.grid.x, self.medium, h0)
        return mhd_gradient_vars(ddx(F[0], self.grid), ddx(F[1], self.grid), pt.p_mu, pt.c, I)


def initial_fields(system, u_values, tau_values):
    tau = np.asarray(tau_values, dtype=float)
    if np.any(tau <= 0):
        raise ValueError("tau must be positive")
    h = h_of_tau_AB(tau, system.coef[0], system.coef[3], system.medium.gamma)
    return np.vstack([np.asarray(u_values, dtype=float), h])


def path_coefficients(traj, path, h0):
    """(a0, a1, a2) at the samples of a characteristic path."""
    from .analysis import wrap
    system = traj.system
    X = wrap(path.x, system.grid)
    tau = tau_of_h(path.values["h"], X, system.medium)
    pt = ptilde(tau, X, system.medium)
    I = compute_I(tau, X, system.medium, h0)
    Imu = compute_I_mu(tau, X, system.medium, h0)
    return mhd_riccati_coeffs(pt, I, Imu)


def path_gradient(traj, path, h0):
    """y (forward) or q (backward) along ``path``.

    u_x and h_x are interpolated from the grid and combined with point
    evaluations of the medium terms, so I is only integrated at the path
    samples rather than over the whole grid at every level.
    """
    from .analysis import wrap
    from .solver import sample_along
    system = traj.system
    ux = sample_along(traj, path, lambda F: ddx(F[0], system.grid))
    hx = sample_along(traj, path, lambda F: ddx(F[1], system.grid))
    X = wrap(path.x, system.grid)
    tau = tau_of_h(path.values["h"], X, system.medium)
    pt = ptilde(tau, X, system.medium)
    I = compute_I(tau, X, system.medium, h0)
    return mhd_gradient_vars(ux, hx, pt.p_mu, pt.c, I)[0 if path.family == "forward" else 1]


def riccati_residual(traj, path, h0):
    """Residual of d(y)/dt - (a0 + a1 y + a2 y^2) (backward: a0 - a1 q + a2 q^2)."""
    yv = path_gradient(traj, path, h0)
    a0, a1, a2 = path_coefficients(traj, path, h0)
    sgn = 1.0 if path.family == "forward" else -1.0
    dydt = np.gradient(yv, path.t)
    res = dydt - (a0 + sgn * a1 * yv + a2 * yv * yv)
    return path.t[1:-1], res[1:-1]
