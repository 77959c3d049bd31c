"""Figures written next to the tabular outputs (Agg backend, no display)."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .engine import MASS_BUCKETS, EngineResult  # noqa: E402
from .returns import ReturnKind  # noqa: E402

_COLORS = {"active": "tab:blue", "escaped": "tab:green", "excluded": "tab:red", "resolution_excluded": "tab:gray"}


def _save(fig, path) -> Path:
    path = Path(path)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def plot_ledger(result: EngineResult, path) -> Path:
    rows = np.array([r[:5] for r in result.ledger_rows], dtype=object)
    n = rows[:, 0].astype(int)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    for i, b in enumerate(MASS_BUCKETS, start=1):
        frac = np.array([int(v) / result.total_units for v in rows[:, i]], dtype=float)
        ax.plot(n, frac, label=b.replace("_", " "), color=_COLORS[b], drawstyle="steps-post")
    ax.set_xlabel("time n")
    ax.set_ylabel("mass / m(Q)")
    ax.set_ylim(-0.02, 1.02)
    ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_escape_tail(tail: dict, path) -> Path:
    """CCDF of escape times on a log scale, with the fitted and reference slopes."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    t = np.asarray(tail.get("times", []), dtype=float)
    c = np.asarray(tail.get("ccdf", []), dtype=float)
    if t.size:
        ax.semilogy(t, c, "o-", ms=3, label="empirical")
        t0 = t[0]
        grid = np.linspace(t0, t[-1] if t[-1] > t0 else t0 + 1, 50)
        rate = tail.get("fitted_rate")
        if isinstance(rate, float):
            ax.semilogy(grid, np.exp(-rate * (grid - t0)), "--", label=f"fit, rate {rate:.3g}")
        ref = tail.get("reference_rate")
        if isinstance(ref, float):
            ax.semilogy(grid, np.exp(-ref * (grid - t0)), ":", label=f"reference {ref:.3g}")
        ax.legend(frameon=False, fontsize=8)
    else:
        ax.text(0.5, 0.5, "no escapes", ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("escape time t")
    ax.set_ylabel("mass with E >= t")
    return _save(fig, path)


def plot_returns(result: EngineResult, path) -> Path:
    """Bound period against return depth, one marker style per return kind."""
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for kind, marker in ((ReturnKind.ESSENTIAL, "o"), (ReturnKind.INESSENTIAL, "s"), (ReturnKind.PSEUDO, "^")):
        pts = [(ev.r, ev.p) for ev in result.events if ev.kind is kind and np.isfinite(ev.r)]
        if pts:
            r, p = zip(*pts)
            ax.scatter(r, p, s=8, marker=marker, alpha=0.6, label=kind.value)
    ax.set_xlabel("depth r = -log dist")
    ax.set_ylabel("bound period p")
    if ax.get_legend_handles_labels()[0]:
        ax.legend(frameon=False, fontsize=8)
    return _save(fig, path)


def plot_density(rows, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 3.5))
    r = np.array([x.radius for x in rows])
    f = np.array([x.hyperbolic_fraction for x in rows])
    lo = np.array([x.wilson_lo for x in rows])
    hi = np.array([x.wilson_hi for x in rows])
    ax.errorbar(r, f, yerr=[f - lo, hi - f], fmt="o-", capsize=3)
    ax.set_xscale("log")
    ax.invert_xaxis()
    ax.set_ylim(-0.02, 1.02)
    ax.set_xlabel("square side")
    ax.set_ylabel("hyperbolic fraction")
    return _save(fig, path)
