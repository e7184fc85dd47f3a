"""Static figure rendering for the analyze CLI (matplotlib, Agg backend)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def save(fig, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, bbox_inches="tight")
    plt.close(fig)


def line_series(
    series: dict[str, list[tuple[float, float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    path: Path,
) -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    plotted = 0
    for label, points in sorted(series.items()):
        if points:
            xs, ys = zip(*points)
            ax.plot(xs, ys, label=label)
            plotted += 1
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if 0 < plotted <= 12:
        ax.legend(fontsize=7)
    save(fig, path)


def heatmap(
    matrix: np.ndarray,
    rows: Sequence[str],
    cols: Sequence[str],
    title: str,
    path: Path,
) -> None:
    fig, ax = plt.subplots(figsize=(max(6, 0.4 * len(cols)), max(4, 0.35 * len(rows))))
    im = ax.imshow(matrix, aspect="auto", cmap="viridis")
    ax.set_xticks(range(len(cols)))
    ax.set_xticklabels(cols, rotation=90, fontsize=7)
    ax.set_yticks(range(len(rows)))
    ax.set_yticklabels(rows, fontsize=8)
    ax.set_title(title)
    fig.colorbar(im, ax=ax)
    save(fig, path)


def scatter(
    xs: Sequence[float],
    ys: Sequence[float],
    title: str,
    xlabel: str,
    ylabel: str,
    path: Path,
    fit: tuple[float, float] | None = None,
) -> None:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(xs, ys, s=18, alpha=0.7)
    if fit is not None and xs:
        beta, alpha = fit
        xr = np.linspace(min(xs), max(xs), 10)
        ax.plot(xr, alpha + beta * xr, "r-", lw=1)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    save(fig, path)


def histogram(values: Sequence[float], bins, title: str, xlabel: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=bins, edgecolor="black")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("count")
    save(fig, path)


def bars(labels: Sequence[str], values: Sequence[float], title: str, ylabel: str, path: Path) -> None:
    fig, ax = plt.subplots(figsize=(max(5, 0.5 * len(labels)), 4))
    ax.bar(range(len(labels)), values)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=45, ha="right", fontsize=8)
    ax.set_title(title)
    ax.set_ylabel(ylabel)
    save(fig, path)
