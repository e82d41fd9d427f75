"""Matplotlib figures written next to the delimited report files."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402
import numpy as np  # noqa: E402

golden_mean = (math.sqrt(5) - 1.0) / 2.0
fig_width = 5.0

params = {
    "axes.labelsize": 10,
    "font.size": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 9,
    "ytick.labelsize": 9,
    "figure.figsize": [fig_width, fig_width * golden_mean],
    "figure.dpi": 150,
    "lines.linewidth": 1.2,
    "lines.markersize": 4,
    "svg.hashsalt": "bellkit",
}


def _figure():
    plt.rcParams.update(params)
    return plt.subplots()


def save(fig, path: Path) -> Path:
    # No Software/date metadata, so identical data gives identical files.
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def theta_scan_figure(theta, value, path: Path) -> Path:
    fig, ax = _figure()
    ax.plot(theta, value, label=r"$\cos\theta + \sin\theta$")
    ax.axhline(1.0, color="k", ls="--", lw=0.8, label="local realistic bound")
    ax.axhline(math.sqrt(2), color="0.5", ls=":", lw=0.8, label=r"$\sqrt{2}$")
    ax.set_xlabel(r"$\theta$ (rad)")
    ax.set_ylabel("value")
    ax.set_xlim(0, math.pi / 2)
    ax.legend(loc="lower center")
    return save(fig, path)


def correlation_figure(curves: dict, points: list[tuple[float, float, str]], path: Path) -> Path:
    """Correlation against setting difference; ``curves`` maps label -> (x, y)."""
    fig, ax = _figure()
    for label, (x, y) in curves.items():
        ax.plot(x, y, label=label)
    markers = iter(["o", "s", "^", "D"])
    for label in dict.fromkeys(lbl for _, _, lbl in points):
        xs, ys = zip(*[(dx, corr) for dx, corr, lbl in points if lbl == label])
        ax.plot(xs, ys, next(markers), ls="none", label=label)
    ax.set_xlabel(r"setting difference $x - y$ (rad)")
    ax.set_ylabel(r"$\langle S^{(1)}_x S^{(2)}_y\rangle$")
    ax.set_ylim(-1.05, 1.05)
    ax.legend(loc="upper center")
    return save(fig, path)


def bell_margin_figure(rows: list[dict], path: Path) -> Path:
    fig, ax = _figure()
    labels = [f"{r['regime']}\n{r['label']}" for r in rows]
    margins = [r["margin"] for r in rows]
    colors = ["tab:red" if m > 0 else "tab:blue" for m in margins]
    bars = ax.bar(range(len(rows)), margins, color=colors)
    ax.bar_label(bars, fmt="%.3f", fontsize=6)
    ax.axhline(0.0, color="k", lw=0.8)
    ax.set_xticks(range(len(rows)))
    ax.set_xticklabels(labels, fontsize=6, rotation=90)
    ax.set_ylabel("lhs - Bell bound")
    return save(fig, path)


def feasibility_slice_figure(grid: np.ndarray, feasible: np.ndarray, bound: np.ndarray, p_ac, path: Path) -> Path:
    """Families ``(p_ab, p_bc, p_ac)`` at fixed ``p_ac``: extension and pair-bound status."""
    fig, ax = _figure()
    status = feasible.astype(int) + bound.astype(int)
    h = (grid[1] - grid[0]) / 2 if len(grid) > 1 else 0.5
    cmap = plt.get_cmap("viridis", 3)
    ax.imshow(status.T, origin="lower", extent=(grid[0] - h, grid[-1] + h, grid[0] - h, grid[-1] + h), cmap=cmap,
              vmin=-0.5, vmax=2.5)
    ax.set_xlabel(r"$P^{++}_{ab}$")
    ax.set_ylabel(r"$P^{++}_{bc}$")
    ax.set_title(f"$P^{{++}}_{{ac}}$ = {p_ac}", fontsize=8)
    labels = ("pair bound violated", "pair bound only", "joint extension")
    handles = [Patch(color=cmap(k), label=lbl) for k, lbl in enumerate(labels)]
    ax.legend(handles=handles, loc="center left", bbox_to_anchor=(1.02, 0.5))
    return save(fig, path)


def coincidence_figure(ks, freqs, path: Path) -> Path:
    fig, ax = _figure()
    ks = np.asarray(ks)
    ax.plot(ks, freqs, "o", label="empirical")
    kk = np.linspace(ks.min(), ks.max(), 200)
    ax.plot(kk, 1.0 / kk, label="1/K")
    ax.set_xlabel("K (agreed directions)")
    ax.set_ylabel("coincidence frequency")
    ax.legend()
    return save(fig, path)


def decoupled_histogram(chsh, decoupled, path: Path) -> Path:
    fig, ax = _figure()
    bins = np.linspace(0, 4, 81)
    ax.hist(chsh, bins=bins, alpha=0.6, label="shared factors (CHSH)")
    ax.hist(decoupled, bins=bins, alpha=0.6, label="four separate samples")
    ax.axvline(2.0, color="k", ls="--", lw=0.8)
    ax.set_yscale("log")
    ax.set_xlabel("|sum of four products|")
    ax.set_ylabel("count")
    ax.legend()
    return save(fig, path)
