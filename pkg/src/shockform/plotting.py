"""
Figures rendered from the same arrays that go into the CSV files.

Only used when the CLI is given ``--plot``; the CSV output stays the
primary product and nothing here feeds back into it.
"""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return str(path)


def plot_series(names, data, path, fields=None):
    """One panel per field, one line per snapshot time."""
    fields = fields or [n for n in names[2:]]
    t = data[:, 0]
    times = np.unique(t)
    fig, axes = plt.subplots(len(fields), 1, figsize=(6.4, 1.9 * len(fields)), sharex=True)
    axes = np.atleast_1d(axes)
    cmap = plt.get_cmap("viridis")
    for ax, name in zip(axes, fields):
        col = names.index(name)
        for k, tk in enumerate(times):
            sel = t == tk
            ax.plot(data[sel, 1], data[sel, col], color=cmap(k / max(1, len(times) - 1)),
                    lw=1.0, label=f"t={tk:.3g}")
        ax.set_ylabel(name)
    axes[-1].set_xlabel("x (material)")
    if len(times) <= 8:
        axes[0].legend(fontsize=7, ncol=min(4, len(times)))
    return _save(fig, path)


def plot_trace(names, data, path, variable="y"):
    """PDE value vs. ODE integration along a characteristic."""
    t = data[:, names.index("t")]
    fig, (ax0, ax1) = plt.subplots(2, 1, figsize=(6.4, 4.8), sharex=True)
    ax0.plot(t, data[:, names.index("W_pde")], "k-", lw=1.2, label="PDE")
    ax0.plot(t, data[:, names.index("W_ode")], "r--", lw=1.0, label="Riccati ODE")
    ax0.set_ylabel(variable)
    ax0.legend(fontsize=8)
    ax1.plot(t, data[:, names.index("difference")], "b-", lw=1.0)
    ax1.set_ylabel("difference")
    ax1.set_xlabel("t")
    return _save(fig, path)


def plot_convergence(rows, path):
    """Errors against dx on log-log axes."""
    fig, ax = plt.subplots(figsize=(5.6, 4.2))
    keys = [k for k in rows[0] if k in ("solution_error", "residual", "residual_alpha_beta", "residual_YQ")]
    for k in keys:
        pts = [(r["dx"], r[k]) for r in rows if isinstance(r[k], float) and r[k] > 0]
        if pts:
            dx, e = zip(*pts)
            ax.loglog(dx, e, "o-", label=k)
    dx = np.array([r["dx"] for r in rows])
    if dx.size and keys:
        ref = [r[keys[0]] for r in rows if isinstance(r[keys[0]], float) and r[keys[0]] > 0]
        if ref:
            ax.loglog(dx, ref[0] * (dx / dx[0]) ** 2, "k:", lw=0.8, label="slope 2")
    ax.set_xlabel("dx")
    ax.set_ylabel("max error")
    ax.legend(fontsize=8)
    return _save(fig, path)
