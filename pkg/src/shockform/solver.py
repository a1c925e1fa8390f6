"""
Method-of-lines time stepping, trajectory storage and characteristic tracing.

Systems plug in through a small duck-typed interface:

``grid``, ``field_names``, ``rhs(F)``, ``speed(F)``, ``gradient_norm(F)``,
``positivity(F)`` (the array the vacuum guard watches) and optionally
``in_box(F)`` / ``support_ok(F)``.  ``F`` is an array of shape (nfields, n).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .numerics import in_domain, interp

log = logging.getLogger(__name__)

SMOOTH = "smooth_to_t_end"
BLOWUP = "gradient_blowup"
VACUUM = "vacuum_guard_hit"
BOX_EXIT = "box_exit"
BOUNDARY = "boundary_reached"
NONFINITE = "nonfinite"

STATUSES = (SMOOTH, BLOWUP, VACUUM, BOX_EXIT, BOUNDARY, NONFINITE)


@dataclass(frozen=True)
class RunConfig:
    t_end: float
    cfl: float = 0.4
    vacuum_guard: float = 1e-6
    grad_cap: float = 1e3
    output_times: tuple = ()
    max_levels: int | None = None
    max_steps: int = 2_000_000

    def __post_init__(self):
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if not 0 < self.cfl <= 1.0:
            raise ValueError(f"cfl must lie in (0, 1], got {self.cfl}")
        if not self.vacuum_guard > 0:
            raise ValueError("vacuum_guard must be positive")
        if not self.grad_cap > 1:
            raise ValueError("grad_cap is a growth factor and must exceed 1")


@dataclass
class Trajectory:
    """Every accepted time level of a run, plus the output snapshot indices.

    ``levels`` has shape (nlevels, nfields, n).  Times are strictly increasing.
    """

    system: object
    times: np.ndarray
    levels: np.ndarray
    snapshot_index: list
    status: str
    t_stop: float
    grad0: float
    grad_history: np.ndarray = field(repr=False, default=None)

    def fields(self, k):
        return self.levels[k]

    @property
    def grid(self):
        return self.system.grid

    @property
    def final(self):
        return self.levels[-1]

    def snapshots(self):
        return [(self.times[k], self.levels[k]) for k in self.snapshot_index]

    def level_at(self, t):
        """Fields at time t, linear in t between stored levels."""
        k = int(np.searchsorted(self.times, t, side="right")) - 1
        k = min(max(k, 0), len(self.times) - 1)
        if k == len(self.times) - 1 or self.times[k] == t:
            return self.levels[k]
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1.0 - w) * self.levels[k] + w * self.levels[k + 1]


def rk4_step(system, F, dt):
    k1 = system.rhs(F)
    k2 = system.rhs(F + 0.5 * dt * k1)
    k3 = system.rhs(F + 0.5 * dt * k2)
    k4 = system.rhs(F + dt * k3)
    return F + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def stable_dt(system, F, cfl):
    return cfl * system.grid.dx / float(np.max(system.speed(F)))


def run_until(system, F0, cfg):
    """Advance ``F0`` to ``cfg.t_end`` or until a stop criterion fires.

    Stop reasons become the trajectory status; they are never raised.
    """
    F = np.array(F0, dtype=float)
    guard = cfg.vacuum_guard * float(np.min(system.positivity(F)))
    grad0 = max(float(system.gradient_norm(F)), 1e-300)
    cap = cfg.grad_cap * grad0
    outs = sorted(t for t in cfg.output_times if 0 < t <= cfg.t_end)
    if not outs or outs[-1] < cfg.t_end:
        outs.append(cfg.t_end)

    times, levels, grads = [0.0], [F.copy()], [grad0]
    snap = [0]
    t, status = 0.0, SMOOTH
    next_out = 0
    steps = 0
    while t < cfg.t_end:
        dt = stable_dt(system, F, cfg.cfl)
        target = outs[next_out]
        hit = False
        if t + dt >= target - 1e-14 * max(1.0, target):
            dt = target - t
            hit = True
        Fn = rk4_step(system, F, dt)
        if not np.all(np.isfinite(Fn)):
            status = NONFINITE
            break
        if np.min(system.positivity(Fn)) < guard:
            status = VACUUM
            break
        t = target if hit else t + dt
        F = Fn
        g = float(system.gradient_norm(F))
        times.append(t)
        levels.append(F.copy())
        grads.append(g)
        if cfg.max_levels and len(levels) > cfg.max_levels:
            # ring buffer: drop the oldest level that is not an output snapshot
            keep = set(snap)
            drop = next(i for i in range(len(levels)) if i not in keep)
            del times[drop], levels[drop], grads[drop]
            snap = [s - 1 if s > drop else s for s in snap]
        if hit:
            snap.append(len(levels) - 1)
            next_out = min(next_out + 1, len(outs) - 1)
        if g > cap:
            status = BLOWUP
            if snap[-1] != len(levels) - 1:
                snap.append(len(levels) - 1)
            break
        box = getattr(system, "in_box", None)
        if box is not None and not box(F):
            status = BOX_EXIT
            break
        support = getattr(system, "support_ok", None)
        if support is not None and not support(F):
            status = BOUNDARY
            break
        steps += 1
        if steps >= cfg.max_steps:
            raise RuntimeError("max_steps exceeded")
    if status != SMOOTH:
        log.info("run stopped at t=%.6g with status %s", t, status)
    if snap[-1] != len(levels) - 1:
        snap.append(len(levels) - 1)
    return Trajectory(system=system, times=np.array(times), levels=np.array(levels),
                      snapshot_index=snap, status=status, t_stop=t, grad0=grad0,
                      grad_history=np.array(grads))


@dataclass
class CharPath:
    """Samples along a forward (dx/dt = +c) or backward (dx/dt = -c) characteristic."""

    family: str
    t: np.ndarray
    x: np.ndarray
    level: np.ndarray
    values: dict
    truncated: bool = False

    @property
    def c(self):
        return self.values["c"]

    def __len__(self):
        return self.t.size


def _sign(family):
    if family in ("forward", "+", "plus"):
        return 1.0
    if family in ("backward", "-", "minus"):
        return -1.0
    raise ValueError(f"family must be 'forward' or 'backward', got {family!r}")


def trace_characteristic(traj, x0, t0=0.0, family="forward", order=3, t_max=None):
    """Integrate dx/dt = +-c through the stored levels with Heun's method.

    Samples land on every stored level after ``t0``.  Fields are
    interpolated in x with ``order`` (1 or 3) and linearly in t for a start
    between levels.
    """
    sgn = _sign(family)
    system, grid = traj.system, traj.grid
    T = traj.times
    if not T[0] <= t0 <= T[-1]:
        raise ValueError(f"t0={t0} outside the stored window [{T[0]}, {T[-1]}]")
    if not in_domain(np.array(x0), grid):
        raise ValueError(f"x0={x0} outside the domain")
    t_max = T[-1] if t_max is None else min(t_max, T[-1])

    def speed_at(F, X):
        return float(interp(system.speed(F), np.array([X]), grid, order)[0])

    k = int(np.searchsorted(T, t0, side="left"))
    ts, xs, ks = [], [], []
    X = float(x0)
    truncated = False
    if T[k] > t0:
        F0 = traj.level_at(t0)
        dt = T[k] - t0
        c0 = speed_at(F0, X)
        Xp = X + sgn * dt * c0
        if not in_domain(np.array(Xp), grid):
            truncated = True
        else:
            X = X + 0.5 * sgn * dt * (c0 + speed_at(traj.levels[k], Xp))
        ts.append(t0)
        xs.append(float(x0))
        ks.append(-1)
    while not truncated:
        ts.append(T[k])
        xs.append(X)
        ks.append(k)
        if k + 1 >= T.size or T[k + 1] > t_max + 1e-14:
            break
        dt = T[k + 1] - T[k]
        c0 = speed_at(traj.levels[k], X)
        Xp = X + sgn * dt * c0
        if not in_domain(np.array(Xp), grid):
            truncated = True
            break
        Xn = X + 0.5 * sgn * dt * (c0 + speed_at(traj.levels[k + 1], Xp))
        if not in_domain(np.array(Xn), grid):
            truncated = True
            break
        X = Xn
        k += 1
    path = CharPath(family="forward" if sgn > 0 else "backward", t=np.array(ts),
                    x=np.array(xs), level=np.array(ks), values={}, truncated=truncated)
    path.values.update(sample_fields(traj, path, order))
    return path


def _level_fields(traj, path, j):
    k = path.level[j]
    if k >= 0:
        return traj.levels[k]
    return traj.level_at(path.t[j])


def sample_along(traj, path, func, order=3):
    """Interpolate the grid array ``func(F)`` at each path sample."""
    out = np.empty(len(path))
    for j in range(len(path)):
        F = _level_fields(traj, path, j)
        out[j] = interp(func(F), path.x[j:j + 1], traj.grid, order)[0]
    return out


def sample_fields(traj, path, order=3):
    system = traj.system
    names = list(system.field_names)
    vals = {name: np.empty(len(path)) for name in names + ["c"]}
    for j in range(len(path)):
        F = _level_fields(traj, path, j)
        stacked = np.vstack([F, system.speed(F)[None, :]])
        v = interp(stacked, path.x[j:j + 1], traj.grid, order)[:, 0]
        for i, name in enumerate(names + ["c"]):
            vals[name][j] = v[i]
    return vals
