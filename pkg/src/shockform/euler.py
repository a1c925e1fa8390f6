"""
Smooth 1-D Lagrangian Euler flow in (eta, u, m) coordinates.

    eta_t + (c/m) u_x = 0
    u_t + m c eta_x + 2 (p/m) m_x = 0
    m_t = 0

The entropy variable m(x) is an analytic profile frozen in time.  Fields are
stored as ``F = [u, eta]``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import gas
from .numerics import ddx
from .profiles import Grid1D, ProfileField, sample
from .solver import RunConfig, run_until, trace_characteristic

# number of frozen points at each end of a bounded grid
N_FROZEN = 2


@dataclass(frozen=True)
class EulerState:
    t: float
    grid: Grid1D
    u: np.ndarray
    eta: np.ndarray
    m: ProfileField

    @property
    def fields(self):
        return np.vstack([self.u, self.eta])


class EulerSystem:
    """Right-hand side and diagnostics for the (eta, u, m) system."""

    field_names = ("u", "eta")

    def __init__(self, model, grid, m_spec):
        self.model = model
        self.grid = grid
        self.m_spec = m_spec
        self.m = sample(m_spec, grid, positive=True, name="m")

    def state(self, F, t=0.0):
        return EulerState(t, self.grid, F[0], F[1], self.m)

    def speed(self, F):
        return gas.c_of_eta(F[1], self.m.value, self.model)

    def rhs(self, F):
        u, eta = F[0], F[1]
        m, mx = self.m.value, self.m.d1
        md = self.model
        c = md.K_c * m * np.power(eta, md.c_exp)
        p = md.K_p * m * m * np.power(eta, md.p_exp)
        out = np.empty_like(F)
        out[1] = -(c / m) * ddx(u, self.grid)
        out[0] = -m * c * ddx(eta, self.grid) - 2.0 * (p / m) * mx
        if not self.grid.periodic:
            out[:, :N_FROZEN] = 0.0
            out[:, -N_FROZEN:] = 0.0
        return out

    def positivity(self, F):
        return F[1]

    def gradient_norm(self, F):
        return max(np.max(np.abs(ddx(F[0], self.grid))), np.max(np.abs(ddx(F[1], self.grid))))

    def riemann_fields(self, F):
        return riemann_invariants(F[0], F[1], self.m.value, self.model)

    def tau(self, F):
        return gas.tau_of_eta(F[1], self.model)


def euler_rhs(state, model):
    """Time derivatives (du/dt, deta/dt) of an :class:`EulerState`."""
    if np.any(state.eta <= 0):
        raise ValueError("eta must be positive (vacuum)")
    sys = _TransientSystem(model, state.grid, state.m)
    out = sys.rhs(state.fields)
    return out[0], out[1]


class _TransientSystem(EulerSystem):
    def __init__(self, model, grid, m_field):
        self.model = model
        self.grid = grid
        self.m_spec = None
        self.m = m_field


def advance(system, F, dt, cfl=0.4):
    """One classical RK4 step, refusing steps beyond the CFL limit."""
    from .solver import rk4_step, stable_dt
    if dt > stable_dt(system, F, cfl) * (1 + 1e-12):
        raise ValueError("time step violates the CFL limit")
    if np.any(F[1] <= 0):
        raise ValueError("eta must be positive (vacuum)")
    return rk4_step(system, F, dt)


def riemann_invariants(u, eta, m, model):
    """r = u - m eta, s = u + m eta and their m^(-1/(2 gamma)) rescalings."""
    eta = np.asarray(eta, dtype=float)
    m = np.asarray(m, dtype=float)
    if np.any(eta <= 0) or np.any(m <= 0):
        raise ValueError("eta and m must be positive")
    r = u - m * eta
    s = u + m * eta
    f = np.power(m, -1.0 / (2.0 * model.gamma))
    return r, s, f * r, f * s


def initial_fields(system, u_spec, thermo_kind, thermo_spec):
    """Sample initial (u, eta) from profile specs.

    ``thermo_kind`` names what ``thermo_spec`` describes: one of
    ``eta``, ``tau``, ``rho``, ``p``.
    """
    grid, model = system.grid, system.model
    u = sample(u_spec, grid, name="u").value
    th = sample(thermo_spec, grid, positive=True, name=thermo_kind).value
    m = system.m.value
    if thermo_kind == "eta":
        eta = np.array(th)
    elif thermo_kind == "tau":
        eta = gas.eta_from_tau(th, model)
    elif thermo_kind == "rho":
        eta = gas.eta_from_rho(th, model)
    elif thermo_kind == "p":
        eta = gas.eta_from_pressure(th, m, model)
    else:
        raise ValueError(f"unknown thermodynamic variable {thermo_kind!r}")
    return np.vstack([np.array(u, dtype=float), eta])


def run(system, F0, t_end, **kw):
    return run_until(system, F0, RunConfig(t_end=t_end, **kw))


def trace(traj, x0, t0=0.0, family="forward", order=3):
    return trace_characteristic(traj, x0, t0, family, order)
