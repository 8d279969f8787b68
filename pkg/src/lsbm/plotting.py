"""Figures for the report path of the CLI.

Everything is drawn on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) and saved as SVG with a fixed hash salt and no date stamp,
so identical data gives identical bytes.
"""

from __future__ import annotations

import math

import matplotlib as mpl
import numpy as np
from matplotlib.figure import Figure

STYLE = {
    "svg.hashsalt": "lsbm",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.labelsize": 11,
    "legend.fontsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
}
LINESTYLES = ["-", "--", "-.", ":"]


def _figure(width=6.0, height=None):
    golden = (math.sqrt(5) - 1) / 2
    return Figure(figsize=(width, height or width * golden))


def _save(fig, path):
    with mpl.rc_context(STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")


def plot_overlap(series, path):
    """Mean overlap against eps, one curve per ``(a, b)`` and a matching threshold line.

    ``series`` maps ``(a, b)`` to ``(rows, eps_star)`` with rows
    ``(eps, mean_q, se_q, n_seeds)``.
    """
    with mpl.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        colors = mpl.rcParams["axes.prop_cycle"].by_key()["color"]
        for k, ((a, b), (rows, star)) in enumerate(series.items()):
            eps, q, se = (np.array([r[i] for r in rows]) for i in range(3))
            color, ls = colors[k % len(colors)], LINESTYLES[k % len(LINESTYLES)]
            ax.errorbar(eps, q, yerr=se, color=color, ls=ls, marker="o", ms=3,
                        capsize=2, label=f"a={a:g}, b={b:g}")
            if math.isfinite(star):
                ax.axvline(star, color=color, ls=ls, lw=1)
        ax.set_xlabel(r"$\varepsilon$")
        ax.set_ylabel("overlap $Q$")
        ax.set_ylim(-0.02, 1.02)
        ax.legend(frameon=False)
        _save(fig, path)


def plot_rate(rows, window, path):
    """``h0``, the truncated rate ``h`` and the growth prediction against ``x``."""
    x, h0, h, pred = (np.array([r[i] for r in rows]) for i in range(4))
    with mpl.rc_context(STYLE):
        fig = _figure(width=8.0, height=3.2)
        ax1, ax2 = fig.subplots(1, 2)
        ax1.plot(x, np.where(np.isfinite(h0), h0, np.nan), label="$h_0$")
        ax1.plot(x, np.where(np.isfinite(h), h, np.nan), ls="--", label="$h$")
        for w in window:
            if math.isfinite(w):
                ax1.axvline(w, color="0.6", lw=0.8)
        ax1.set_xlabel("$x$")
        ax1.legend(frameon=False)
        ax2.plot(x, pred)
        ax2.set_xlabel("$x$")
        ax2.set_ylabel(r"$\lambda e^{-h(x)}$")
        _save(fig, path)


def plot_chi(depths, log_chi, log_tau, path):
    """Per-tree ``log chi(d)`` (thin), their mean (thick) and a slope-``log tau`` guide."""
    depths = np.asarray(depths)
    log_chi = np.asarray(log_chi)
    with mpl.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        for row in log_chi:
            ax.plot(depths, row, color="0.8", lw=0.6)
        mean = log_chi.mean(axis=0)
        ax.plot(depths, mean, color="C0", lw=2, label="mean")
        ax.plot(depths, mean[0] + log_tau * (depths - depths[0]), color="C3", ls="--",
                label=r"slope $\log\tau$")
        ax.set_xlabel("depth $d$")
        ax.set_ylabel(r"$\log\chi(d)$")
        ax.legend(frameon=False)
        _save(fig, path)


def plot_delta(depths, delta, lower, upper, path):
    """Mean reconstruction advantage with the mean bounds, per depth."""
    with mpl.rc_context(STYLE):
        fig = _figure()
        ax = fig.add_subplot()
        ax.plot(depths, upper, ls="--", marker="v", label="upper bound")
        ax.plot(depths, delta, marker="o", label=r"$\hat\Delta$")
        ax.plot(depths, lower, ls="--", marker="^", label="lower bound")
        ax.set_xlabel("depth $d$")
        ax.legend(frameon=False)
        _save(fig, path)
