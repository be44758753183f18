"""Figure rendering for experiment reports (written next to the CSV output)."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from .critical import self_dual_point  # noqa: E402

_FIGSIZE = (5.2, 3.4)


def _finish(fig, ax, path, title, xlabel, ylabel):
    ax.set_title(title, fontsize=10)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_scan(report, path) -> None:
    """Crossing probability vs p, one curve per size, epsilon band shaded."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    for s in report.scans:
        means = [e.mean for e in s.estimates]
        errs = [e.std_error for e in s.estimates]
        ax.errorbar(s.p_grid, means, yerr=errs, marker="o", ms=3, lw=1,
                    capsize=2, label=f"n={s.n}")
    eps = report.scans[0].epsilon if report.scans else 0.05
    ax.axhspan(eps, 1 - eps, color="0.92", zorder=0)
    ax.axvline(self_dual_point(report.q), color="k", lw=0.8, ls="--")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(fontsize=8, frameon=False)
    _finish(fig, ax, path, f"crossing scan, q={report.q}", "p", "crossing probability")


def render_decay(fit, path) -> None:
    """Two-point function vs distance on a log scale with the fitted line."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    ax.errorbar(fit.distances, fit.means, yerr=fit.stderrs, fmt="o", ms=4,
                capsize=2, label="estimate")
    if fit.wired_means:
        ax.plot(fit.distances, fit.wired_means, "s", ms=3, mfc="none",
                label="wired bc")
    if math.isfinite(fit.slope):
        xs = [min(fit.distances), max(fit.distances)]
        ax.plot(xs, [math.exp(fit.intercept + fit.slope * x) for x in xs],
                "-", lw=1,
                label=f"fit slope {fit.slope:.3f} +- {fit.slope_stderr:.3f}")
    ax.set_yscale("log")
    ax.legend(fontsize=8, frameon=False)
    _finish(fig, ax, path, f"two-point decay, q={fit.q}, p={fit.p}",
            "|x|", "phi(0 <-> x)")


def render_circuits(result, path) -> None:
    """Annulus-circuit probabilities per scale and the joint frequency."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    means = [e.mean for e in result.per_n]
    errs = [e.std_error for e in result.per_n]
    ax.errorbar(result.n_values, means, yerr=errs, marker="o", capsize=2,
                label="phi(A_n), wired box")
    ax.axhline(result.intersection_freq.mean, color="C3", lw=1, ls="--",
               label=f"joint frequency {result.intersection_freq.mean:.3f}")
    ax.set_ylim(-0.02, 1.05)
    ax.set_xticks(result.n_values)
    ax.legend(fontsize=8, frameon=False)
    _finish(fig, ax, path, f"circuit chain, q={result.q}, p={result.p}",
            "annulus index n", "probability")


def render_crossing(report, path) -> None:
    """RSW estimates against their uniform lower bounds."""
    fig, ax = plt.subplots(figsize=_FIGSIZE)
    labels = ["horizontal aspect-alpha", "vertical 3n/2"]
    reps = [report.horizontal, report.vertical_3n2]
    xs = range(len(reps))
    ax.errorbar(xs, [r.estimate.mean for r in reps],
                yerr=[3 * r.estimate.std_error for r in reps], fmt="o",
                capsize=3, label="estimate (3 sigma)")
    ax.scatter(xs, [r.bound for r in reps], marker="_", s=400, color="C3",
               label="lower bound")
    ax.set_xticks(list(xs))
    ax.set_xticklabels(labels, fontsize=8)
    ax.set_ylim(0, 1)
    ax.legend(fontsize=8, frameon=False)
    _finish(fig, ax, path, f"RSW crossings, q={report.q}, n={report.n}, m={report.m}",
            "", "crossing probability")
