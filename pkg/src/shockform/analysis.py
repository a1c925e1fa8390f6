"""
A-priori bounds, gradient variables and Riccati blowup analysis for Euler.

Along forward (backward) characteristics the rescaled gradients y (q) obey

    dy/dt = a0 + a2 y^2,      a2 < 0,

so data with y below -N, where N bounds sqrt(-a0/a2), must blow up.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import gas
from .numerics import ddx
from .profiles import total_variation_V
from .solver import sample_along

# relative inflation of grid suprema to cover off-grid maxima
SUP_INFLATION = 1e-9


@dataclass(frozen=True)
class BoundsCertificate:
    V: float
    Ms: float
    Mr: float
    M_L: float
    M_U: float
    N1: float
    N2: float
    u_bound: float
    eta_bound: float
    rho_bound: float
    gamma: float

    @property
    def V_bar(self):
        return self.V / (2.0 * self.gamma)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class GradientState:
    y: np.ndarray
    q: np.ndarray


@dataclass(frozen=True)
class RiccatiCoeffs:
    a0: np.ndarray
    a2: np.ndarray


def _y_exponents(gamma):
    m_exp = -3.0 * (3.0 - gamma) / (2.0 * (3.0 * gamma - 1.0))
    eta_exp = (gamma + 1.0) / (2.0 * (gamma - 1.0))
    return m_exp, eta_exp


def n_constants(V, Ms, Mr, gamma):
    """N1, N2 of the characteristic-triangle estimate."""
    vb = V / (2.0 * gamma)
    g = math.exp(vb * vb)
    N1 = Ms + vb * Mr + vb * (vb * Ms + vb * vb * Mr) * g
    N2 = Mr + vb * Ms + vb * (vb * Mr + vb * vb * Ms) * g
    return N1, N2


def bounds_certificate(u0, eta0, m_spec, grid, model, inflation=SUP_INFLATION):
    """Sup-norm bounds on |s~|, |r~|, |u| and eta implied by the initial data."""
    u0 = np.asarray(u0, dtype=float)
    eta0 = np.asarray(eta0, dtype=float)
    if not (np.all(np.isfinite(u0)) and np.all(np.isfinite(eta0))):
        raise ValueError("initial data must be finite")
    m = m_spec.evaluate(grid.x)[0]
    if not np.all(m > 0):
        raise ValueError("m must be positive")
    V = total_variation_V(m_spec, grid)
    if not math.isfinite(V):
        raise ValueError("entropy must have finite total variation")
    gamma = model.gamma
    _, _, rt, st = _tilde(u0, eta0, m, gamma)
    Ms = float(np.max(np.abs(st))) * (1.0 + inflation)
    Mr = float(np.max(np.abs(rt))) * (1.0 + inflation)
    M_L = float(np.min(m)) * (1.0 - inflation)
    M_U = float(np.max(m)) * (1.0 + inflation)
    N1, N2 = n_constants(V, Ms, Mr, gamma)
    half = 0.5 * (N1 + N2)
    u_bound = half * M_U ** (1.0 / (2.0 * gamma))
    eta_bound = half * M_L ** (1.0 / (2.0 * gamma) - 1.0)
    rho_bound = 1.0 / model.K_tau * eta_bound ** (2.0 / (gamma - 1.0))
    return BoundsCertificate(V, Ms, Mr, M_L, M_U, N1, N2, u_bound, eta_bound, rho_bound, gamma)


def _tilde(u, eta, m, gamma):
    r = u - m * eta
    s = u + m * eta
    f = np.power(m, -1.0 / (2.0 * gamma))
    return r, s, f * r, f * s


def verify_bounds(traj, cert):
    """Largest observed ratio of each bounded quantity to its certified bound.

    Every ratio must stay at or below 1 on a smooth trajectory; a larger
    value falsifies the implementation, not the run.
    """
    system = traj.system
    m = system.m.value
    worst = {"s_tilde": 0.0, "r_tilde": 0.0, "u": 0.0, "eta": 0.0, "rho": 0.0}
    history = []
    for t, F in zip(traj.times, traj.levels):
        u, eta = F[0], F[1]
        _, _, rt, st = _tilde(u, eta, m, cert.gamma)
        rho = 1.0 / gas.tau_of_eta(eta, system.model)
        ratios = {
            "s_tilde": float(np.max(np.abs(st))) / cert.N1,
            "r_tilde": float(np.max(np.abs(rt))) / cert.N2,
            "u": float(np.max(np.abs(u))) / cert.u_bound,
            "eta": float(np.max(eta)) / cert.eta_bound,
            "rho": float(np.max(rho)) / cert.rho_bound,
        }
        history.append((float(t), ratios))
        for k, v in ratios.items():
            worst[k] = max(worst[k], v)
    return {"max_ratio": worst, "all_within": all(v <= 1.0 for v in worst.values()),
            "max_overall": max(worst.values()), "history": history}


def gradient_fields(u, eta, m, m1, grid, model):
    """y and q on the grid from 4th-order derivatives of u and eta."""
    gamma = model.gamma
    if np.any(eta <= 0):
        raise ValueError("eta must be positive (vacuum)")
    m_exp, eta_exp = _y_exponents(gamma)
    pref = np.power(m, m_exp) * np.power(eta, eta_exp)
    ux = ddx(u, grid)
    meta_x = m * ddx(eta, grid) + m1 * eta
    k = 2.0 / (3.0 * gamma - 1.0)
    y = pref * (ux + meta_x - k * m1 * eta)
    q = pref * (ux - meta_x + k * m1 * eta)
    return y, q


def gradient_vars(state, model):
    y, q = gradient_fields(state.u, state.eta, state.m.value, state.m.d1, state.grid, model)
    return GradientState(y, q)


def riccati_coeffs(eta, m, m1, m2, model):
    gamma = model.gamma
    eta = np.asarray(eta, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(eta <= 0) or np.any(m <= 0):
        raise ValueError("eta and m must be positive")
    pm = 3.0 * (3.0 - gamma) / (2.0 * (3.0 * gamma - 1.0))
    bracket = ((gamma - 1.0) / (3.0 * gamma - 1.0) * m * m2
               - (3.0 * gamma + 1.0) * (gamma - 1.0) / (3.0 * gamma - 1.0) ** 2 * m1 * m1)
    a0 = (model.K_c / gamma) * bracket * np.power(m, -pm) \
        * np.power(eta, 3.0 * (gamma + 1.0) / (2.0 * (gamma - 1.0)) + 1.0)
    a2 = -model.K_c * (gamma + 1.0) / (2.0 * (gamma - 1.0)) * np.power(m, pm) \
        * np.power(eta, (gamma + 1.0) / (2.0 * (gamma - 1.0)) - 1.0)
    return RiccatiCoeffs(a0, a2)


def blowup_threshold_N(E_U, M_L, M_U, M_star, model):
    """Uniform bound N on sqrt(-a0/a2) from eta <= E_U, M_L <= m <= M_U, |m''| <= M_star."""
    gamma = model.gamma
    if not gamma > 1:
        raise ValueError("gamma must exceed 1")
    if not (E_U > 0 and M_L > 0 and M_U > 0 and M_star >= 0):
        raise ValueError("bounds must be positive (M_star non-negative)")
    if M_L > M_U:
        raise ValueError("M_L must not exceed M_U")
    coef = 2.0 * (gamma - 1.0) ** 2 / (gamma * (gamma + 1.0) * (3.0 * gamma - 1.0))
    m_exp = (3.0 * gamma - 5.0) / (3.0 * gamma - 1.0)
    M = M_L if gamma <= 5.0 / 3.0 else M_U
    return math.sqrt(coef * M_star) * E_U ** ((3.0 * gamma - 1.0) / (2.0 * (gamma - 1.0))) * M ** m_exp


def default_eps(min_y0, N):
    """Largest margin the data allows: |min y0| = (1 + eps) N."""
    if N > 0:
        return abs(min_y0) / N - 1.0
    return 1.0


def predict_blowup_time(y0, a2_bound, eps):
    """Time at which the integrated Riccati inequality forces 1/y to zero."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    if not a2_bound < 0:
        raise ValueError("a2_bound must be negative")
    if not y0 < 0:
        raise ValueError("y0 must be negative")
    factor = 1.0 - 1.0 / (1.0 + eps) ** 2
    return 1.0 / (factor * abs(a2_bound) * abs(y0))


@dataclass
class RiccatiSolution:
    t: np.ndarray
    y: np.ndarray
    blowup: bool
    t_blowup: float | None
    status: str = field(default="")


def integrate_riccati_ode(coeffs, y0, t0, t1, cap=None, rtol=1e-10, h0=None):
    """Adaptive RK4 (step doubling) for dy/dt = a0 + a1 y + a2 y^2.

    ``coeffs(t)`` returns (a0, a1, a2).  The run stops once |y| passes
    ``cap`` (default ``max(1, |y0|) / sqrt(machine eps)``); the blowup time
    is then extrapolated from the local ``y ~ 1 / (a2 (t_b - t))`` behaviour.
    """
    if cap is None:
        cap = max(1.0, abs(y0)) / math.sqrt(np.finfo(float).eps)

    def f(t, y):
        a0, a1, a2 = coeffs(t)
        return a0 + a1 * y + a2 * y * y

    def rk4(t, y, h):
        k1 = f(t, y)
        k2 = f(t + 0.5 * h, y + 0.5 * h * k1)
        k3 = f(t + 0.5 * h, y + 0.5 * h * k2)
        k4 = f(t + h, y + h * k3)
        return y + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)

    t, y = float(t0), float(y0)
    h = h0 or (t1 - t0) / 100.0
    ts, ys = [t], [y]
    while t < t1:
        h = min(h, t1 - t)
        full = rk4(t, y, h)
        half = rk4(t + 0.5 * h, rk4(t, y, 0.5 * h), 0.5 * h)
        err = abs(full - half) / 15.0
        scale = rtol * max(1.0, abs(half))
        if not math.isfinite(half) or err > scale:
            h *= 0.5
            if h < 1e-15 * max(1.0, abs(t)):
                break
            continue
        t, y = t + h, half + (half - full) / 15.0
        ts.append(t)
        ys.append(y)
        if abs(y) > cap:
            a2 = coeffs(t)[2]
            tb = t + 1.0 / abs(a2 * y) if a2 != 0 else t
            return RiccatiSolution(np.array(ts), np.array(ys), True, tb, "blowup")
        if err < scale / 32.0:
            h *= 2.0
    if abs(y) > cap:
        return RiccatiSolution(np.array(ts), np.array(ys), True, t, "blowup")
    status = "no_blowup" if t >= t1 else "stalled"
    return RiccatiSolution(np.array(ts), np.array(ys), False, None, status)


def path_coefficients(traj, path):
    """a0 and a2 at each sample of a characteristic path."""
    system = traj.system
    X = wrap(path.x, system.grid)
    m, m1, m2 = system.m_spec.evaluate(X)
    return riccati_coeffs(path.values["eta"], m, m1, m2, system.model)


def wrap(X, grid):
    if grid.periodic:
        return grid.xmin + np.mod(X - grid.xmin, grid.length)
    return X


def integrate_riccati(path, coeff, y0, t_end=None, cap=None):
    """Integrate the Riccati ODE along a traced path.

    ``coeff`` is a :class:`RiccatiCoeffs` sampled on the path; coefficients
    are interpolated linearly in t between samples.  When the ODE does not
    blow up within the path window the status is ``undetermined``.
    """
    t = path.t
    a0 = np.broadcast_to(coeff.a0, t.shape)
    a2 = np.broadcast_to(coeff.a2, t.shape)
    a1 = np.broadcast_to(getattr(coeff, "a1", 0.0), t.shape)

    def coeffs(s):
        return (np.interp(s, t, a0), np.interp(s, t, a1), np.interp(s, t, a2))

    t1 = t[-1] if t_end is None else t_end
    sol = integrate_riccati_ode(coeffs, y0, t[0], t1, cap=cap)
    if not sol.blowup:
        sol.status = "undetermined within window"
    return sol


def path_gradient(traj, path):
    """PDE-derived y (forward path) or q (backward path) along the characteristic."""
    system = traj.system
    idx = 0 if path.family == "forward" else 1

    def field(F):
        return gradient_fields(F[0], F[1], system.m.value, system.m.d1, system.grid, system.model)[idx]

    return sample_along(traj, path, field)


def riccati_residual(traj, path, coeff_fn=path_coefficients):
    """Central-difference residual of d(y)/dt - (a0 + a2 y^2) along ``path``.

    Returns (t, residual) at the interior samples.
    """
    yv = path_gradient(traj, path)
    cf = coeff_fn(traj, path)
    t = path.t
    # second-order on the nonuniform level spacing
    dydt = np.gradient(yv, t)[1:-1]
    a1 = getattr(cf, "a1", 0.0)
    a1 = np.broadcast_to(a1, t.shape)[1:-1] if np.ndim(a1) else a1
    sgn = 1.0 if path.family == "forward" else -1.0
    rhs = cf.a0[1:-1] + sgn * a1 * yv[1:-1] + cf.a2[1:-1] * yv[1:-1] ** 2
    return t[1:-1], dydt - rhs


@dataclass
class BlowupCertificate:
    """Euler certificate: bounds, threshold, data extremum and time prediction."""

    bounds: BoundsCertificate
    N: float
    M_star: float
    min_y0: float
    min_family: str
    x_min: float
    eps: float
    verdict: str
    t_star_certified: float | None
    a2_bound_certified: float | None
    t_star: float | None = None
    a2_bound_observed: float | None = None
    t_observed: float | None = None
    status: str | None = None

    def to_dict(self):
        b = self.bounds
        return {
            "system": "euler",
            "V": b.V, "Ms": b.Ms, "Mr": b.Mr, "M_L": b.M_L, "M_U": b.M_U,
            "N1": b.N1, "N2": b.N2, "u_bound": b.u_bound, "eta_bound": b.eta_bound,
            "rho_bound": b.rho_bound, "N": self.N, "M_star": self.M_star,
            "min_y0_q0": self.min_y0, "min_family": self.min_family, "x_min": self.x_min,
            "eps": self.eps, "verdict": self.verdict,
            "t_star_certified": self.t_star_certified,
            "a2_bound_certified": self.a2_bound_certified,
            "t_star": self.t_star, "a2_bound_observed": self.a2_bound_observed,
            "t_observed": self.t_observed, "status": self.status,
        }


def certify_euler(system, F0, eta_floor=None, eps=None):
    """Certificate from the initial data alone (no solver run).

    ``eta_floor`` is the lower bound on eta used for the certified a2 bound
    when gamma < 3; without it the certified time is left undefined.
    """
    model, grid = system.model, system.grid
    u0, eta0 = F0[0], F0[1]
    bounds = bounds_certificate(u0, eta0, system.m_spec, grid, model)
    xs = np.linspace(grid.xmin, grid.xmax, 8 * grid.n + 1)
    M_star = float(np.max(np.abs(system.m_spec.evaluate(xs)[2]))) * (1.0 + SUP_INFLATION)
    N = blowup_threshold_N(bounds.eta_bound, bounds.M_L, bounds.M_U, M_star, model)
    y, q = gradient_fields(u0, eta0, system.m.value, system.m.d1, grid, model)
    iy, iq = int(np.argmin(y)), int(np.argmin(q))
    if y[iy] <= q[iq]:
        min_y0, fam, xm = float(y[iy]), "forward", float(grid.x[iy])
    else:
        min_y0, fam, xm = float(q[iq]), "backward", float(grid.x[iq])
    if eps is None:
        eps = default_eps(min_y0, N)
    if N == 0:
        verdict = "blowup iff any compression: " + ("compressive" if min_y0 < 0 else "no compression")
    elif min_y0 < -N:
        verdict = "blowup predicted"
    else:
        verdict = "threshold not met"
    a2b, tst = None, None
    if min_y0 < 0 and min_y0 < -N and eps > 0:
        a2b = certified_a2_bound(bounds, model, eta_floor)
        if a2b is not None:
            tst = predict_blowup_time(min_y0, a2b, eps)
    return BlowupCertificate(bounds, N, M_star, min_y0, fam, xm, eps, verdict, tst, a2b)


def certified_a2_bound(bounds, model, eta_floor=None):
    """Sup of a2 over the certified state box, or None if unbounded."""
    gamma = model.gamma
    if gamma < 3:
        if eta_floor is None:
            return None
        eta = eta_floor
        m = bounds.M_L
    elif gamma == 3:
        eta, m = 1.0, 1.0
    else:
        eta, m = bounds.eta_bound, bounds.M_U
    return float(riccati_coeffs(eta, m, 0.0, 0.0, model).a2)


def observed_prediction(traj, cert, t_obs=None):
    """t_star using the sup of a2 observed along the traced extremal characteristic."""
    from .solver import trace_characteristic
    path = trace_characteristic(traj, cert.x_min, 0.0, cert.min_family, t_max=t_obs)
    a2 = path_coefficients(traj, path).a2
    a2b = float(np.max(a2))
    tst = predict_blowup_time(cert.min_y0, a2b, cert.eps)
    return tst, a2b, path
