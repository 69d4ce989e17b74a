"""Figures for experiment runs, regret curves and ascent traces (PNG, Agg backend)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "figure.dpi": 120,
}


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)
    return path


def plot_experiment(result, path):
    """CPU time and oracle calls per trial on twin axes."""
    recs = result.records
    x = np.arange(1, len(recs) + 1)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        ax.plot(x, [r.wall_time_s for r in recs], "o-", color="tab:red", ms=3, label="CPU time (s)")
        ax.set_xlabel("instance")
        ax.set_ylabel("CPU time (s)", color="tab:red")
        ax2 = ax.twinx()
        ax2.plot(x, [r.oracle_calls for r in recs], "s-", color="tab:blue", ms=3, label="oracle calls")
        ax2.set_ylabel("oracle calls", color="tab:blue")
        ax2.spines["top"].set_visible(False)
        return _save(fig, path)


def plot_part_sizes(result, path):
    """Per-part union sizes against the b * ell bound."""
    sizes = np.array([r.per_part_sizes for r in result.records], dtype=float)
    bound = result.config.b * result.config.ell
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        ax.boxplot(sizes, showfliers=False)
        ax.axhline(bound, ls="--", color="k", lw=0.8, label=f"bound {bound}")
        ax.set_xlabel("part")
        ax.set_ylabel("elements chosen")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_regret(report, path):
    """Cumulative and time-averaged (1-eps)-regret."""
    r = np.asarray(report.regret_curve)
    t = np.arange(1, r.size + 1)
    with plt.rc_context(STYLE):
        fig, (a1, a2) = plt.subplots(1, 2, figsize=(7.0, 2.8))
        a1.plot(t, r, lw=1)
        a1.axhline(0, color="k", lw=0.5)
        a1.set_xlabel("round t")
        a1.set_ylabel("regret")
        a2.plot(t, r / t, lw=1)
        a2.axhline(0, color="k", lw=0.5)
        a2.set_xscale("log")
        a2.set_xlabel("round t")
        a2.set_ylabel("regret / t")
        return _save(fig, path)


def plot_trace(trace, path):
    """Per-objective F values along the ascent with the (1 - e^-tau) gamma reference."""
    tau = np.asarray(trace.grid)
    F = np.asarray(trace.F_values)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.0))
        for i in range(F.shape[1]):
            ax.plot(tau, F[:, i], lw=1, label=f"F_{i + 1}")
        ref = np.array([(1 - math.exp(-s)) * trace.gamma for s in tau])
        ax.plot(tau, ref, "k--", lw=0.8, label="reference")
        ax.set_xlabel("tau")
        ax.set_ylabel("truncated value")
        ax.legend(frameon=False)
        return _save(fig, path)
