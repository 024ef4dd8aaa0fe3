"""Figures for the report bundle (Agg backend, PNG files)."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "lines.linewidth": 1.2,
    "lines.markersize": 3,
    "axes.grid": True,
    "grid.alpha": 0.3,
}


class Figure:
    """Deferred figure: ``Figure(stem, draw)(path)`` renders and saves."""

    def __init__(self, stem: str, draw):
        self.stem, self.draw = stem, draw

    def __call__(self, path):
        with plt.rc_context(STYLE):
            fig, ax = plt.subplots()
            self.draw(ax)
            fig.tight_layout()
            fig.savefig(path)
            plt.close(fig)


def carleman_ratios(s_values, ratios, min_ratio, fitted_C, s_star):
    def draw(ax):
        for r in ratios:
            ax.loglog(s_values, r, color="0.75", lw=0.6)
        ax.loglog(s_values, min_ratio, "k-o", label="corpus minimum")
        ax.axhline(fitted_C, color="C3", ls="--", label=f"fitted C = {fitted_C:.3g}")
        ax.axvline(s_star, color="C0", ls=":", label=f"s* = {s_star:.3g}")
        ax.set_xlabel("s")
        ax.set_ylabel("RHS / LHS")
        ax.legend()
    return Figure("ratios", draw)


def energy_margins(times, energies, bounds):
    def draw(ax):
        for k, (e, b) in enumerate(zip(energies, bounds)):
            ax.semilogy(times, np.maximum(e, 1e-300), color="C0", alpha=0.6, label="energy" if k == 0 else None)
            ax.semilogy(times, b, color="C1", alpha=0.6, ls="--", label="bound" if k == 0 else None)
        ax.set_xlabel("t")
        ax.set_ylabel("value")
        ax.legend()
    return Figure("energy", draw)


def stability_spread(theta, spread, fitted):
    def draw(ax):
        ax.semilogy(theta, spread, "o-", label="max/min member C")
        ax.semilogy(theta, fitted, "s-", label="fitted C")
        ax.axhline(10.0, color="0.5", ls=":")
        ax.set_xlabel(r"$\theta$")
        ax.legend()
    return Figure("theta_scan", draw)


def reconstruction(theta, a_true, a_hat):
    def draw(ax):
        ax.plot(theta, a_true, "k-", label="true")
        ax.plot(theta, a_hat, "C3o", label="recovered")
        ax.set_xlabel(r"$\vartheta$")
        ax.set_ylabel("a")
        ax.legend()
    return Figure("profile", draw)


def noise_curve(levels, errors):
    def draw(ax):
        ax.loglog(levels, errors, "o-")
        ax.set_xlabel("relative noise")
        ax.set_ylabel("relative L2 error")
    return Figure("noise", draw)


def convergence(hs, errors, label):
    def draw(ax):
        ax.loglog(hs, errors, "o-", label=label)
        ax.loglog(hs, errors[0] * (np.asarray(hs) / hs[0]) ** 2, "k:", label="slope 2")
        ax.set_xlabel("h")
        ax.set_ylabel("relative residual")
        ax.legend()
    return Figure("convergence", draw)


def boundary_trace(theta, times, values, name="trace"):
    def draw(ax):
        im = ax.pcolormesh(theta, times, values, shading="auto", cmap="RdBu_r")
        ax.figure.colorbar(im, ax=ax)
        ax.set_xlabel(r"$\vartheta$")
        ax.set_ylabel("t")
    return Figure(name, draw)
