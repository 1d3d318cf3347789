"""Figures rendered next to the report bundle (Agg backend, PNG)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (7.0, 5.0),
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "lines.linewidth": 1.3,
}

# PNG metadata would otherwise embed the matplotlib version
_META = {"Software": None}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata=_META)
    plt.close(fig)


def plot_diagnostics(cols: dict, path, V=None):
    """Four panels: W against the comparison curve, E, int tr(T), sup|u_r|."""
    t = cols["t"]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(2, 2, sharex=True)
        ax[0, 0].plot(t, cols["W"], label="W")
        if V is not None:
            ok = np.isfinite(V)
            ax[0, 0].plot(t[ok], V[ok], "--", label="V")
        ax[0, 0].set_ylabel("momentum moment")
        ax[0, 0].legend()
        ax[0, 1].plot(t, cols["E"])
        ax[0, 1].set_ylabel("energy E")
        ax[1, 0].plot(t, cols["int_trT"])
        ax[1, 0].set_ylabel(r"$\int \mathrm{tr}\,T$")
        ax[1, 1].semilogy(t, np.maximum(cols["sup_grad_u"], 1e-300))
        ax[1, 1].set_ylabel(r"sup $|\partial_r u|$")
        for a in ax[1]:
            a.set_xlabel("t")
        _save(fig, path)


def plot_initial(data, path):
    """Initial velocity, density and conformation profiles."""
    r = data.grid.centers
    keep = r <= data.R + 1.0
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(3, 1, sharex=True, figsize=(6.0, 6.0))
        ax[0].plot(r[keep], data.u0[keep])
        ax[0].set_ylabel("u0")
        ax[1].plot(r[keep], data.rho0[keep])
        ax[1].set_ylabel("rho0")
        ax[2].plot(r[keep], data.A0_r[keep], label="A_rr")
        ax[2].plot(r[keep], data.A0_t[keep], "--", label="A_tt")
        ax[2].set_ylabel("A0")
        ax[2].set_xlabel("r")
        ax[2].legend()
        _save(fig, path)
