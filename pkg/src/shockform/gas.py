"""
Polytropic ideal gas in the (eta, m) coordinates.

The pressure law is ``p = K exp(S/c_tau) tau^-gamma``.  Entropy is carried
through ``m = exp(S / (2 c_tau))`` and specific volume through

    eta = 2 sqrt(K gamma) / (gamma - 1) * tau^(-(gamma - 1)/2),

so that tau, p and the Lagrangian sound speed c are monomials in eta and m.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GasModel:
    """Adiabatic constants of a polytropic gas and the derived K_tau, K_p, K_c."""

    gamma: float
    K: float = 1.0
    c_tau: float = 1.0
    K_tau: float = field(init=False)
    K_p: float = field(init=False)
    K_c: float = field(init=False)

    def __post_init__(self):
        if not self.c_tau > 0:
            raise ValueError(f"c_tau must be positive, got {self.c_tau}")
        consts = eos_constants(self.gamma, self.K)
        object.__setattr__(self, "K_tau", consts["K_tau"])
        object.__setattr__(self, "K_p", consts["K_p"])
        object.__setattr__(self, "K_c", consts["K_c"])

    # exponents used in every kernel
    @property
    def tau_exp(self):
        return -2.0 / (self.gamma - 1.0)

    @property
    def p_exp(self):
        return 2.0 * self.gamma / (self.gamma - 1.0)

    @property
    def c_exp(self):
        return (self.gamma + 1.0) / (self.gamma - 1.0)

    def to_dict(self):
        return {"gamma": self.gamma, "K": self.K, "c_tau": self.c_tau}


@dataclass(frozen=True)
class ThermoPoint:
    eta: float
    m: float
    tau: float
    p: float
    c: float

    @property
    def rho(self):
        return 1.0 / self.tau


def eos_constants(gamma, K):
    """
    Closed-form constants of the (eta, m) coordinates.

    Returns
    -------
    dict with keys ``K_tau``, ``K_p``, ``K_c``.
    """
    if not gamma > 1:
        raise ValueError(f"gamma must exceed 1, got {gamma}")
    if not K > 0:
        raise ValueError(f"K must be positive, got {K}")
    s = math.sqrt(K * gamma)
    K_tau = (2.0 * s / (gamma - 1.0)) ** (2.0 / (gamma - 1.0))
    K_p = K * K_tau ** (-gamma)
    K_c = s * K_tau ** (-(gamma + 1.0) / 2.0)
    return {"K_tau": K_tau, "K_p": K_p, "K_c": K_c}


def _check_positive(name, value):
    arr = np.asarray(value)
    if not np.all(arr > 0):
        raise ValueError(f"{name} must be strictly positive")


def tau_of_eta(eta, model):
    return model.K_tau * np.power(eta, model.tau_exp)


def p_of_eta(eta, m, model):
    return model.K_p * m * m * np.power(eta, model.p_exp)


def c_of_eta(eta, m, model):
    return model.K_c * m * np.power(eta, model.c_exp)


def thermo_from_eta(eta, m, model):
    """Specific volume, pressure and sound speed at (eta, m).

    Works on scalars and arrays; scalar input gives a :class:`ThermoPoint`.
    """
    _check_positive("eta", eta)
    _check_positive("m", m)
    tau = tau_of_eta(eta, model)
    p = p_of_eta(eta, m, model)
    c = c_of_eta(eta, m, model)
    if np.ndim(eta) == 0 and np.ndim(m) == 0:
        return ThermoPoint(float(eta), float(m), float(tau), float(p), float(c))
    return ThermoPoint(eta, m, tau, p, c)


def eta_from_tau(tau, model):
    _check_positive("tau", tau)
    g = model.gamma
    return 2.0 * math.sqrt(model.K * g) / (g - 1.0) * np.power(tau, -(g - 1.0) / 2.0)


def eta_from_rho(rho, model):
    _check_positive("rho", rho)
    return eta_from_tau(1.0 / np.asarray(rho, dtype=float), model)


def eta_from_pressure(p, m, model):
    """Invert ``p = K_p m^2 eta^(2 gamma/(gamma-1))``."""
    _check_positive("p", p)
    _check_positive("m", m)
    return np.power(np.asarray(p, dtype=float) / (model.K_p * m * m), 1.0 / model.p_exp)


def m_from_entropy(S, c_tau):
    if not c_tau > 0:
        raise ValueError(f"c_tau must be positive, got {c_tau}")
    return np.exp(np.asarray(S, dtype=float) / (2.0 * c_tau))


def entropy_from_m(m, c_tau):
    _check_positive("m", m)
    return 2.0 * c_tau * np.log(m)
