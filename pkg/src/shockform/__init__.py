"""Shock formation in 1-D Lagrangian gas dynamics, orthogonal MHD and duct flow."""

from .gas import GasModel
from .profiles import Grid1D, ProfileSpec
from .solver import RunConfig, run_until, trace_characteristic

__version__ = "0.1.0"

__all__ = ["GasModel", "Grid1D", "ProfileSpec", "RunConfig", "run_until", "trace_characteristic"]
