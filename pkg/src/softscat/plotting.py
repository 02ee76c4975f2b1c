"""Figure output (curve overlays, residual histories, spread maps).

Figures are written with matplotlib's non-interactive backend.  SVG output
is made reproducible by fixing the element-id salt and dropping the date
stamp, so identical inputs give byte-identical files.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.collections import LineCollection  # noqa: E402

plt.rcParams["svg.hashsalt"] = "softscat"
plt.rcParams["svg.fonttype"] = "none"


def _save(fig, path) -> Path:
    path = Path(path)
    fmt = path.suffix.lstrip(".").lower() or "svg"
    if fmt == "svg":
        meta = {"Date": None}
    elif fmt == "png":
        meta = {"Software": None}
    else:
        meta = {}
    fig.savefig(path, format=fmt, metadata=meta, dpi=120)
    plt.close(fig)
    return path


def _closed(nodes: np.ndarray) -> np.ndarray:
    return np.vstack([nodes, nodes[:1]])


def plot_overlay(curves: Sequence[np.ndarray], labels: Sequence[str], path, title: str = "") -> Path:
    """Closed node polygons drawn on one axis with equal aspect."""
    fig, ax = plt.subplots(figsize=(5, 5))
    for nodes, label in zip(curves, labels):
        p = _closed(np.asarray(nodes))
        ax.plot(p[:, 0], p[:, 1], lw=1.4, label=label, gid=f"curve-{label}")
    ax.set_aspect("equal")
    ax.legend(loc="best", fontsize=8)
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_residuals(ks: Sequence[float], residuals: Sequence[float], path, title: str = "residual per visit") -> Path:
    """Residual norm against visit number, with the visited frequency on a twin axis."""
    visits = np.arange(1, len(residuals) + 1)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.semilogy(visits, residuals, "o-", ms=3, lw=1, color="C0")
    ax.set_xlabel("visit")
    ax.set_ylabel("residual norm", color="C0")
    ax2 = ax.twinx()
    ax2.step(visits, ks, where="mid", color="C1", lw=0.8)
    ax2.set_ylabel("k", color="C1")
    ax.set_title(title)
    fig.tight_layout()
    return _save(fig, path)


def plot_spread(nodes: np.ndarray, spread: np.ndarray, path, others: Sequence[np.ndarray] = (), title: str = "pointwise spread") -> Path:
    """Reference curve coloured by ensemble spread; colour limits are the data range."""
    nodes = np.asarray(nodes)
    spread = np.asarray(spread, dtype=float)
    fig, ax = plt.subplots(figsize=(5.5, 5))
    for o in others:
        p = _closed(np.asarray(o))
        ax.plot(p[:, 0], p[:, 1], lw=0.5, color="0.75")
    p = _closed(nodes)
    segs = np.stack([p[:-1], p[1:]], axis=1)
    lo, hi = float(spread.min()), float(spread.max())
    if hi <= lo:
        hi = lo + 1.0
    lc = LineCollection(segs, cmap="viridis", norm=plt.Normalize(lo, hi), linewidths=3)
    lc.set_array(spread)
    ax.add_collection(lc)
    fig.colorbar(lc, ax=ax, label="spread")
    ax.set_aspect("equal")
    ax.autoscale_view()
    ax.set_title(title)
    return _save(fig, path)


def plot_indicator(xs: np.ndarray, ys: np.ndarray, values: np.ndarray, path, curve: np.ndarray | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    im = ax.imshow(values, origin="lower", extent=(xs[0], xs[-1], ys[0], ys[-1]), cmap="magma")
    fig.colorbar(im, ax=ax, label="indicator")
    if curve is not None:
        p = _closed(np.asarray(curve))
        ax.plot(p[:, 0], p[:, 1], color="cyan", lw=1.2)
    ax.set_title("LSM indicator")
    return _save(fig, path)
