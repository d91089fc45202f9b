"""Matplotlib figures for the CLI report paths.

SVG output is made byte-reproducible by fixing the hash salt and dropping
the date stamp.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "font.size": 10,
    "axes.labelsize": 10,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "legend.frameon": False,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "lines.linewidth": 1.4,
    "svg.hashsalt": "ghzcert",
    "svg.fonttype": "path",
}


def _figure():
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
    return fig, ax


def _save(fig, path) -> Path:
    path = Path(path)
    with plt.rc_context(STYLE):
        fig.tight_layout()
        fig.savefig(path, format=path.suffix.lstrip(".") or "svg", metadata={"Date": None})
    plt.close(fig)
    return path


def rate_curve_figure(omega, leading, per_round, zero_crossing, M, gamma, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(omega, leading, color="C0", label="leading order")
        if per_round is not None and np.any(np.isfinite(per_round)):
            ax.plot(omega, per_round, color="C1", label="finite n")
        ax.axhline(0.0, color="0.3", linestyle="--", linewidth=0.9)
        if zero_crossing is not None:
            ax.axvline(zero_crossing, color="0.6", linestyle=":", linewidth=0.9)
        ax.set_xlabel(r"$\omega_{\mathrm{exp}}$")
        ax.set_ylabel("certified rate (bits/round)")
        ax.set_title(f"M = {M}, gamma = {gamma:g}")
        ax.legend(loc="upper left")
    return _save(fig, path)


def tradeoff_figure(p1, f, f_max, pt1, M, gamma, path):
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(p1, f, color="C0", label="f")
        ax.plot(p1, f_max, color="C3", linestyle="--", label=r"$f_{\max}$")
        ax.axvline(pt1, color="0.6", linestyle=":", linewidth=0.9)
        ax.set_xlabel(r"$p_1$ (test-and-win probability)")
        ax.set_ylabel("bits")
        ax.set_title(f"M = {M}, gamma = {gamma:g}")
        ax.legend(loc="lower left")
    return _save(fig, path)


def win_trace_figure(wins, threshold_rate, path):
    """Cumulative test wins against the abort line omega_exp * gamma - delta_est."""
    wins = np.asarray(wins)
    j = np.arange(1, len(wins) + 1)
    with plt.rc_context(STYLE):
        fig, ax = _figure()
        ax.plot(j, np.cumsum(wins == 1), color="C0", label="wins")
        ax.plot(j, threshold_rate * j, color="C3", linestyle="--", label="abort line")
        ax.set_xlabel("round")
        ax.set_ylabel("cumulative wins")
        ax.legend(loc="upper left")
    return _save(fig, path)
