"""Optional figure rendering for the command-line reports.

Only used when ``--figures`` is passed; the CSV/JSON outputs are the primary
products and these figures are drawn from exactly the same numbers.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

golden_mean = (np.sqrt(5.0) - 1.0) / 2.0
fig_width = 6.0  # inches
fig_size = [fig_width, fig_width * golden_mean]

params = {
    "axes.labelsize": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "font.size": 9,
    "font.family": "serif",
    "mathtext.fontset": "stix",
    "legend.fontsize": 8,
    "legend.frameon": False,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "figure.figsize": fig_size,
    "figure.dpi": 120,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "lines.linewidth": 1.2,
}


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams.update(params)
    return plt


def _positive(values: np.ndarray) -> np.ndarray:
    """Mask non-positive entries so log axes skip them."""
    v = np.asarray(values, dtype=float)
    return np.where(v > 0, v, np.nan)


def trajectory_figure(records: Sequence, path: str | Path, bound: float | None = None) -> Path:
    """Four panels: H^3 energy with the bootstrap quantity, background
    sizes, ledger residual and spectral tail."""
    plt = _pyplot()
    t = np.array([r.t for r in records])
    col = lambda name: np.array([np.nan if getattr(r, name) is None else getattr(r, name) for r in records])
    fig, axes = plt.subplots(2, 2, figsize=(fig_width * 1.4, fig_width * 1.4 * golden_mean), sharex=True)
    ax = axes[0, 0]
    ax.semilogy(t, _positive(col("h3_g_sq")), label=r"$\|g\|_{H^3}^2$")
    ax.semilogy(t, _positive(col("h3_g_sq") + col("dissipation_integral")), "--", label="bootstrap quantity")
    if bound is not None:
        ax.axhline(bound, color="k", lw=0.8, ls=":", label="(C+1) eps")
    ax.legend()
    ax = axes[0, 1]
    ax.semilogy(t, _positive(col("linf_theta")), label=r"$\|\Theta\|_\infty$")
    ax.semilogy(t, _positive(col("linf_u")), label=r"$\|U\|_\infty$")
    ax.semilogy(t, _positive(col("h3_forcing")), label=r"$\|U\cdot\nabla\Theta\|_{H^3}$")
    ax.legend()
    ax = axes[1, 0]
    ax.semilogy(t, _positive(col("ledger_residual")), label="ledger residual (relative)")
    disc = col("paired_discrepancy")
    if np.any(np.isfinite(disc)):
        ax.semilogy(t, _positive(disc), label="paired discrepancy")
    ax.set_xlabel("t")
    ax.legend()
    ax = axes[1, 1]
    ax.semilogy(t, _positive(col("tail_fraction")), label="tail fraction")
    ax.set_xlabel("t")
    ax.legend()
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out)
    plt.close(fig)
    return out


def sweep_figure(rows: Sequence[dict], axis: str, path: str | Path) -> Path:
    """Condition left side against the first sweep axis."""
    plt = _pyplot()
    x = [float(r[axis]) for r in rows if r.get("lhs") not in (None, "")]
    y = [float(r["lhs"]) for r in rows if r.get("lhs") not in (None, "")]
    fig, ax = plt.subplots()
    ax.loglog(x, y, "o-")
    ax.set_xlabel(axis)
    ax.set_ylabel("condition left side")
    out = Path(path)
    fig.savefig(out)
    plt.close(fig)
    return out


def ratio_figure(trials: Sequence, path: str | Path) -> Path:
    """Histogram of trial ratios per kind."""
    plt = _pyplot()
    groups: dict[str, list[float]] = {}
    for tr in trials:
        groups.setdefault(f"{tr.kind} ({tr.param:g})", []).append(tr.ratio)
    fig, ax = plt.subplots()
    for label, vals in sorted(groups.items()):
        ax.hist(vals, bins=20, histtype="step", label=label)
    ax.set_xlabel("lhs / rhs")
    ax.set_ylabel("trials")
    ax.legend()
    out = Path(path)
    fig.savefig(out)
    plt.close(fig)
    return out
