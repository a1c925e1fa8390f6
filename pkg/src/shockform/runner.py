"""
System-agnostic orchestration behind the command line.

A :class:`Scenario` bundles a validated config with its solver system,
initial fields and analysis inputs.  Everything the CLI writes comes from
the functions here, so they are also the programmatic entry points.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from types import SimpleNamespace

import numpy as np

from . import analysis, euler, mhd
from .duct import construction as cons
from .duct import flow
from .profiles import sample
from .solver import BLOWUP, SMOOTH, run_until, sample_along, trace_characteristic

# columns written per system, after t and x
STATE_COLUMNS = {
    "euler": ("u", "eta", "m"),
    "mhd": ("u", "tau", "h"),
    "duct": ("xp", "u", "z", "rho", "m"),
    "spherical": ("xp", "u", "z", "rho", "m"),
}
GRADIENT_COLUMNS = {
    "euler": ("y", "q"),
    "mhd": ("y", "q"),
    "duct": ("alpha", "beta", "Y", "Q"),
    "spherical": ("alpha", "beta", "Y", "Q"),
}
PLOT_FIELDS = {
    "euler": ["u", "eta", "y", "q"],
    "mhd": ["u", "tau", "y", "q"],
    "duct": ["u", "rho", "Y", "Q"],
    "spherical": ["u", "rho", "Y", "Q"],
}
# gradient variable tracked along each family
FAMILY_VARIABLE = {
    "euler": ("y", "q"),
    "mhd": ("y", "q"),
    "duct": ("Y", "Q"),
    "spherical": ("Y", "Q"),
}


def thread_count():
    """Worker cap from SHOCKFORM_THREADS (default 1)."""
    raw = os.environ.get("SHOCKFORM_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"SHOCKFORM_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"SHOCKFORM_THREADS must be a positive integer, got {raw!r}")
    return n


@dataclass
class Scenario:
    cfg: object
    system: object
    F0: np.ndarray
    h0: float | None = None
    box: object = None

    @property
    def kind(self):
        return self.cfg.system


def build(cfg):
    """Solver system and initial fields for a validated config."""
    a = cfg.analysis
    if cfg.system == "euler":
        system = euler.EulerSystem(cfg.model, cfg.grid, cfg.m)
        F0 = euler.initial_fields(system, cfg.u, cfg.thermo_kind, cfg.thermo)
        return Scenario(cfg, system, F0)
    if cfg.system == "mhd":
        system = mhd.MhdSystem(cfg.medium, cfg.grid)
        th = sample(cfg.thermo, cfg.grid, positive=True).value
        tau = th if cfg.thermo_kind == "tau" else 1.0 / th
        F0 = mhd.initial_fields(system, sample(cfg.u, cfg.grid).value, tau)
        h0 = a.get("h0")
        if h0 is None:
            h0 = mhd.default_h0(cfg.medium, cfg.grid.xmin, a.get("tau_ref", 1.0))
        box = None
        if "box" in a:
            b = a["box"]
            box = mhd.MhdBox(b["tau"][0], b["tau"][1], b["x"][0], b["x"][1])
        return Scenario(cfg, system, F0, h0=float(h0), box=box)
    box = None
    if "box" in a:
        b = a["box"]
        if cfg.system == "spherical":
            box = flow.SphericalBox(tuple(b["r"]), tuple(b["rho"]), tuple(b["u"]))
        else:
            box = flow.DuctBox(**{k: tuple(v) for k, v in b.items()})
    if cfg.system == "spherical":
        if cfg.m.family != "constant" or cfg.m.params["value"] != 1.0:
            raise ValueError("profiles.m: the spherical system is isentropic with m = 1")
    monitor = box if a.get("monitor_box", box is not None) else None
    system = flow.DuctSystem(cfg.model, cfg.grid, cfg.m, cfg.geometry, box=monitor)
    F0 = flow.initial_fields(system, cfg.u, cfg.thermo_kind, cfg.thermo)
    system.watch(F0)
    return Scenario(cfg, system, F0, box=box)


# -- per-system field access -------------------------------------------------

def state_columns(sc, F):
    s = sc.system
    if sc.kind == "euler":
        return {"u": F[0], "eta": F[1], "m": s.m.value}
    if sc.kind == "mhd":
        return {"u": F[0], "tau": s.tau(F), "h": F[1]}
    return {"xp": F[2], "u": F[0], "z": F[1], "rho": s.rho(F), "m": s.m.value}


def gradient_columns(sc, F):
    s = sc.system
    if sc.kind == "euler":
        y, q = analysis.gradient_fields(F[0], F[1], s.m.value, s.m.d1, s.grid, s.model)
        return {"y": y, "q": q}
    if sc.kind == "mhd":
        y, q = s.gradients(F, sc.h0)
        return {"y": y, "q": q}
    al, be = flow.alpha_beta(s, F)
    Y, Q = flow.YQ_transform(al, be, s.point(F), s.model)
    return {"alpha": al, "beta": be, "Y": Y, "Q": Q}


def family_index(family):
    return 0 if family == "forward" else 1


def path_variable(sc, traj, path):
    """PDE-derived gradient variable (y, q, Y or Q) sampled along ``path``."""
    if sc.kind == "mhd":
        return mhd.path_gradient(traj, path, sc.h0)
    name = FAMILY_VARIABLE[sc.kind][family_index(path.family)]
    return sample_along(traj, path, lambda F: gradient_columns(sc, F)[name])


def path_coefficients(sc, traj, path):
    """(a0, a1, a2) with dW/dt = a0 + a1 W + a2 W^2 along ``path``.

    The backward-family sign of the linear term is folded into a1.
    """
    n = len(path)
    if sc.kind == "euler":
        c = analysis.path_coefficients(traj, path)
        return np.broadcast_to(c.a0, (n,)), np.zeros(n), np.broadcast_to(c.a2, (n,))
    if sc.kind == "mhd":
        a0, a1, a2 = mhd.path_coefficients(traj, path, sc.h0)
        return a0, (a1 if path.family == "forward" else -a1), a2
    d0, d1, d2, e0, e1 = flow.d_coeffs(flow.path_point(traj, path), sc.system.model)
    if path.family == "forward":
        return d0, d1, d2
    return e0, -e1, d2


def path_residual(sc, traj, path):
    W = path_variable(sc, traj, path)
    a0, a1, a2 = path_coefficients(sc, traj, path)
    res = np.gradient(W, path.t) - (a0 + a1 * W + a2 * W * W)
    return path.t[1:-1], res[1:-1]


def default_trace_points(sc):
    pts = sc.cfg.analysis.get("trace_points")
    if pts:
        return [float(p) for p in pts]
    g = sc.cfg.grid
    return [g.xmin + f * g.length for f in (0.3, 0.5, 0.7)]


# -- certificates --------------------------------------------------------------

def _require_box(sc):
    if sc.box is None:
        raise ValueError("analysis.box: required to certify the "
                         f"{sc.kind} system (the box is not inferred from the data)")


def _minimum(sc, F):
    cols = gradient_columns(sc, F)
    fw, bw = FAMILY_VARIABLE[sc.kind]
    i, j = int(np.argmin(cols[fw])), int(np.argmin(cols[bw]))
    x = sc.cfg.grid.x
    if cols[fw][i] <= cols[bw][j]:
        return float(cols[fw][i]), "forward", float(x[i])
    return float(cols[bw][j]), "backward", float(x[j])


def _prediction(min_w, threshold, a2_bound, eps):
    if eps is None:
        eps = analysis.default_eps(min_w, threshold)
    if min_w < -threshold and min_w < 0 and eps > 0 and a2_bound is not None and a2_bound < 0:
        return eps, analysis.predict_blowup_time(min_w, a2_bound, eps)
    return eps, None


def _mhd_a2_sup(box, medium, n=64):
    taus = np.geomspace(box.tau_min, box.tau_max, n)
    xs = np.linspace(box.x_min, box.x_max, n)
    T, X = (g.ravel() for g in np.meshgrid(taus, xs, indexing="ij"))
    pt = mhd.ptilde(T, X, medium)
    return float(np.max(-pt.c_h / (2.0 * np.sqrt(pt.c))))


def _duct_a2_sup(box, model, n=64):
    if isinstance(box, flow.SphericalBox):
        a = np.linspace(box.r[0], box.r[1], n) ** 2
    else:
        a = np.linspace(box.a[0], box.a[1], n)
    A, R = np.meshgrid(a, np.linspace(box.rho[0], box.rho[1], n), indexing="ij")
    z = np.power(model.K_tau * A * R, (model.gamma - 1.0) / 2.0)
    d2 = cons.construct(model.gamma)[0].d2
    return float(np.max(d2.evaluate(z=z, Kc=model.K_c, Ktau=model.K_tau)))


def certify(sc):
    """Certificate from the initial data alone (no solver run)."""
    a = sc.cfg.analysis
    eps = a.get("eps")
    if sc.kind == "euler":
        cert = analysis.certify_euler(sc.system, sc.F0, a.get("eta_floor"), eps)
        out = cert.to_dict()
        out["name"] = sc.cfg.name
        return out, cert
    _require_box(sc)
    min_w, fam, xm = _minimum(sc, sc.F0)
    if sc.kind == "mhd":
        res = mhd.mhd_threshold(sc.box, sc.cfg.medium, sc.h0)
        a2b = _mhd_a2_sup(sc.box, sc.cfg.medium)
        tau0 = sc.system.tau(sc.F0)
        inside = bool(sc.box.tau_min <= tau0.min() and tau0.max() <= sc.box.tau_max)
        label, extra = "N_hat", {"h0": sc.h0}
    else:
        res = flow.duct_threshold(sc.box, sc.cfg.model)
        a2b = _duct_a2_sup(sc.box, sc.cfg.model)
        rho0 = sc.system.rho(sc.F0)
        inside = bool(sc.box.rho[0] <= rho0.min() and rho0.max() <= sc.box.rho[1]
                      and sc.box.u[0] <= sc.F0[0].min() and sc.F0[0].max() <= sc.box.u[1])
        label, extra = "N_bar", {}
        if sc.kind == "spherical":
            G = flow.spherical_ratio_constants(sc.cfg.model)
            extra = {f"G{i}": getattr(G, f"G{i}") for i in range(1, 8)}
    N = res.value
    eps, tst = _prediction(min_w, N, a2b, eps)
    verdict = "blowup predicted" if min_w < -N else "threshold not met"
    out = {"name": sc.cfg.name, "system": sc.kind, label: N, "threshold": N,
           "threshold_converged": res.converged, "threshold_samples": res.samples,
           "min_initial": min_w, "min_family": fam, "x_min": xm,
           "initial_data_in_box": inside, "eps": eps, "verdict": verdict,
           "a2_bound_box": a2b, "t_star_certified": tst, **extra}
    cert = SimpleNamespace(min_y0=min_w, min_family=fam, x_min=xm, eps=eps, N=N)
    return out, cert


def observed_prediction(sc, traj, cert, t_obs):
    """t_star from the sup of a2 observed along the extremal characteristic.

    Also integrates the Riccati ODE along that path from the extremal
    value; its blowup time marks the singularity itself, which the
    grad_cap proxy only registers later once the grid can no longer
    resolve the front.
    """
    path = trace_characteristic(traj, cert.x_min, 0.0, cert.min_family, t_max=t_obs)
    a0, a1, a2 = path_coefficients(sc, traj, path)
    a2b = float(np.max(a2))
    t_ode = None
    if len(path) > 1:
        coeff = SimpleNamespace(a0=np.asarray(a0), a1=np.asarray(a1), a2=np.asarray(a2))
        t_ode = analysis.integrate_riccati(path, coeff, cert.min_y0).t_blowup
    if not (cert.min_y0 < 0 and cert.eps > 0 and a2b < 0):
        return None, a2b, t_ode
    return analysis.predict_blowup_time(cert.min_y0, a2b, cert.eps), a2b, t_ode


# -- simulate ------------------------------------------------------------------

def simulate(sc):
    """Run the solver; returns the trajectory and the report body."""
    traj = run_until(sc.system, sc.F0, sc.cfg.run)
    report = {"name": sc.cfg.name, "system": sc.kind, "status": traj.status,
              "t_stop": traj.t_stop, "levels": int(len(traj.times)),
              "snapshot_times": [float(traj.times[k]) for k in traj.snapshot_index]}
    try:
        cert_dict, cert = certify(sc)
    except ValueError as exc:
        cert_dict, cert = {"error": str(exc)}, None
    if cert is not None and traj.status == BLOWUP:
        t_obs = traj.t_stop
        tst, a2b, t_ode = observed_prediction(sc, traj, cert, t_obs)
        cert_dict.update(t_observed=t_obs, t_star=tst, a2_bound_observed=a2b, status=traj.status,
                         t_riccati_blowup=t_ode,
                         t_observed_within_t_star=None if tst is None else bool(t_obs <= tst))
    elif cert is not None:
        cert_dict["status"] = traj.status
    report["certificate"] = cert_dict
    if sc.kind == "euler" and traj.status != SMOOTH:
        report["bounds_check"] = {"skipped": f"run ended with status {traj.status}"}
    elif sc.kind == "euler":
        b = analysis.verify_bounds(traj, analysis.bounds_certificate(
            sc.F0[0], sc.F0[1], sc.cfg.m, sc.cfg.grid, sc.cfg.model))
        report["bounds_check"] = {"max_ratio": b["max_ratio"], "all_within": b["all_within"],
                                  "max_overall": b["max_overall"]}
    return traj, report


def series_rows(sc, traj):
    """Long-format rows (t, x, state..., gradients...) at every snapshot."""
    names = ["t", "x", *STATE_COLUMNS[sc.kind], *GRADIENT_COLUMNS[sc.kind]]
    rows = []
    x = sc.cfg.grid.x
    for t, F in traj.snapshots():
        cols = {**state_columns(sc, F), **gradient_columns(sc, F)}
        block = np.column_stack([np.full_like(x, t), x] + [np.broadcast_to(cols[k], x.shape)
                                                           for k in names[2:]])
        rows.append(block)
    return names, np.vstack(rows)


# -- trace ---------------------------------------------------------------------

def trace_overlay(sc, traj, x0, t0, family):
    """Characteristic samples with PDE and ODE gradient variables.

    The ODE starts from the PDE value at t0 and is integrated with the
    path-sampled coefficients; after an ODE blowup its column is NaN.
    """
    path = trace_characteristic(traj, x0, t0, family)
    W = path_variable(sc, traj, path)
    a0, a1, a2 = path_coefficients(sc, traj, path)
    coeff = SimpleNamespace(a0=np.asarray(a0), a1=np.asarray(a1), a2=np.asarray(a2))
    W_ode = np.full(len(path), np.nan)
    t_blow = None
    if len(path) > 1:
        sol = analysis.integrate_riccati(path, coeff, float(W[0]))
        last = sol.t[-1]
        ok = path.t <= last
        W_ode[ok] = np.interp(path.t[ok], sol.t, sol.y)
        t_blow = sol.t_blowup
    else:
        W_ode[0] = W[0]
    names = ["t", "x", "c", *traj.system.field_names, "W_pde", "W_ode", "difference"]
    data = np.column_stack([path.t, path.x, path.c,
                            *[path.values[k] for k in traj.system.field_names],
                            W, W_ode, W - W_ode])
    info = {"family": path.family, "variable": FAMILY_VARIABLE[sc.kind][family_index(path.family)],
            "x0": float(x0), "t0": float(t0), "samples": len(path), "truncated": path.truncated,
            "ode_blowup_time": t_blow,
            "max_abs_difference": float(np.nanmax(np.abs(W - W_ode)))}
    return names, data, info


# -- convergence ---------------------------------------------------------------

def _level_run(cfg, n):
    c = cfg.with_grid(n)
    sc = build(c)
    return sc, run_until(sc.system, sc.F0, c.run)


def _level_sizes(cfg, levels):
    n = cfg.grid.n
    out = [n]
    for _ in range(levels - 1):
        n = 2 * n if cfg.grid.periodic else 2 * n - 1
        out.append(n)
    return out


def _order(e_coarse, e_fine, floor):
    if e_coarse is None or e_fine is None:
        return None
    if e_coarse <= floor and e_fine <= floor:
        return "exact"
    if e_fine <= 0 or e_coarse <= 0:
        return None
    return math.log2(e_coarse / e_fine)


def convergence(cfg, levels):
    """Self-convergence table over ``levels`` successive halvings of dx."""
    if levels < 3:
        raise ValueError("--levels must be at least 3")
    sizes = _level_sizes(cfg, levels)
    with ThreadPoolExecutor(max_workers=min(thread_count(), levels)) as pool:
        runs = list(pool.map(lambda n: _level_run(cfg, n), sizes))
    nstate = 2
    finals = [tr.final[:nstate] for _, tr in runs]
    scale = max(1.0, float(np.max(np.abs(finals[-1]))))
    floor = 1e-13 * scale
    # residuals divide roundoff by the time step, so their floor is looser
    res_floor = 1e-8 * scale

    res_names = ["residual"] if cfg.system in ("euler", "mhd") else ["residual_alpha_beta", "residual_YQ"]
    rows = []
    prev_sol = prev_res = None
    for k, (sc, tr) in enumerate(runs):
        smooth = tr.status == SMOOTH
        sol = None
        if k + 1 < len(runs) and smooth and runs[k + 1][1].status == SMOOTH:
            stride = 2
            sol = float(np.max(np.abs(finals[k] - finals[k + 1][:, ::stride])))
        res = _level_residuals(sc, tr) if smooth else {n: None for n in res_names}
        row = {"level": k, "n": sc.cfg.grid.n, "dx": sc.cfg.grid.dx, "status": tr.status,
               "flag": "" if smooth else "not smooth", "solution_error": sol,
               "solution_order": _order(prev_sol, sol, floor) if k > 0 else None}
        for name in res_names:
            row[name] = res[name]
            row[name + "_order"] = _order(prev_res[name] if prev_res else None, res[name], res_floor) \
                if k > 0 else None
        rows.append(row)
        prev_sol, prev_res = sol, res
    return rows


def _level_residuals(sc, traj):
    fams = ("forward", "backward")
    out = {}
    if sc.kind in ("euler", "mhd"):
        worst = 0.0
        for x0 in default_trace_points(sc):
            for fam in fams:
                path = trace_characteristic(traj, x0, 0.0, fam)
                if len(path) > 2:
                    worst = max(worst, float(np.max(np.abs(path_residual(sc, traj, path)[1]))))
        out["residual"] = worst
        return out
    wc = wd = 0.0
    for x0 in default_trace_points(sc):
        for fam in fams:
            path = trace_characteristic(traj, x0, 0.0, fam)
            if len(path) > 2:
                wc = max(wc, float(np.max(np.abs(flow.coupled_residual(traj, path)[1]))))
                wd = max(wd, float(np.max(np.abs(path_residual(sc, traj, path)[1]))))
    out["residual_alpha_beta"] = wc
    out["residual_YQ"] = wd
    return out
