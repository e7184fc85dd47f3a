"""Religious conversion hierarchy, spread area, and exposure graph."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from ..events import Event

UNCONVERTED, INDIRECT, DIRECT, PRIEST = 0, 1, 2, 3
LEVEL_NAMES = {0: "unconverted", 1: "indirect", 2: "direct", 3: "priest"}

# Longer keywords first: "spaghetti monster" must classify Direct, never
# Indirect via its "spaghetti" substring.
DIRECT_KEYWORDS = ("pastafarian", "spaghetti monster")
INDIRECT_KEYWORDS = ("pasta", "spaghetti")
ALL_KEYWORDS = DIRECT_KEYWORDS + INDIRECT_KEYWORDS


def keyword_level(text: str) -> int:
    low = text.lower()
    if any(k in low for k in DIRECT_KEYWORDS):
        return DIRECT
    if any(k in low for k in INDIRECT_KEYWORDS):
        return INDIRECT
    return UNCONVERTED


def mentions_keyword(text: str) -> bool:
    low = text.lower()
    return any(k in low for k in ALL_KEYWORDS)


def classify_conversion(
    events: Iterable[Event], priests: Sequence[str]
) -> dict[str, list[tuple[int, int]]]:
    """Per-agent (tick, level) change points; levels are monotone (max so far).

    Priests are fixed at PRIEST from tick 0.
    """
    levels: dict[str, int] = {p: PRIEST for p in priests}
    series: dict[str, list[tuple[int, int]]] = {p: [(0, PRIEST)] for p in priests}
    for ev in events:
        if ev.kind != "utterance":
            continue
        agent = ev.agent
        if agent in levels and levels[agent] == PRIEST:
            continue
        level = keyword_level(ev.payload.get("text", ""))
        if level > levels.get(agent, UNCONVERTED):
            levels[agent] = level
            series.setdefault(agent, []).append((ev.tick, level))
    return series


def level_at(series: list[tuple[int, int]], tick: int) -> int:
    level = UNCONVERTED
    for t, lv in series:
        if t > tick:
            break
        level = lv
    return level


def convert_counts(
    series: Mapping[str, list[tuple[int, int]]], ticks: Sequence[int]
) -> list[tuple[int, int, int, int]]:
    """(tick, n_indirect, n_direct, n_priest) over time."""
    out = []
    for t in ticks:
        ind = dr = pr = 0
        for s in series.values():
            lv = level_at(s, t)
            if lv == INDIRECT:
                ind += 1
            elif lv == DIRECT:
                dr += 1
            elif lv == PRIEST:
                pr += 1
        out.append((t, ind, dr, pr))
    return out


def union_disk_area(
    centers: Sequence[tuple[float, float]],
    radius: float,
    bounds: tuple[float, float, float, float],
) -> float:
    """Union area of disks, rasterized on a 1-block grid clipped to bounds.

    A cell counts when its center lies inside some disk.
    """
    if not centers:
        return 0.0
    x_min, x_max, z_min, z_max = bounds
    nx = max(int(np.ceil(x_max - x_min)), 1)
    nz = max(int(np.ceil(z_max - z_min)), 1)
    covered = np.zeros((nx, nz), dtype=bool)
    r2 = radius * radius
    for cx, cz in centers:
        i_lo = max(int(np.floor(cx - radius - x_min)), 0)
        i_hi = min(int(np.ceil(cx + radius - x_min)) + 1, nx)
        j_lo = max(int(np.floor(cz - radius - z_min)), 0)
        j_hi = min(int(np.ceil(cz + radius - z_min)) + 1, nz)
        if i_lo >= i_hi or j_lo >= j_hi:
            continue
        xs = x_min + np.arange(i_lo, i_hi) + 0.5
        zs = z_min + np.arange(j_lo, j_hi) + 0.5
        dx2 = (xs - cx) ** 2
        dz2 = (zs - cz) ** 2
        covered[i_lo:i_hi, j_lo:j_hi] |= dx2[:, None] + dz2[None, :] <= r2
    return float(covered.sum())


def spread_area(
    conversion: Mapping[str, list[tuple[int, int]]],
    positions: Mapping[str, tuple[float, float]],
    radius: float,
    bounds: tuple[float, float, float, float],
    tick: int,
    min_level: int = INDIRECT,
) -> float:
    """Union of hearing disks centered on agents at or above ``min_level``."""
    centers = [
        positions[agent]
        for agent, series in sorted(conversion.items())
        if agent in positions and level_at(series, tick) >= min_level
    ]
    return union_disk_area(centers, radius, bounds)


@dataclass(frozen=True)
class ExposureEdge:
    speaker: str
    hearer: str
    tick: int
    critical: bool


def conversion_graph(
    events: Iterable[Event], conversion: Mapping[str, list[tuple[int, int]]]
) -> list[ExposureEdge]:
    """One edge per keyword-bearing delivery; the earliest exposure at or
    before the hearer's first level increase is critical."""
    exposures: dict[str, list[tuple[int, str]]] = {}
    ordered: list[tuple[str, str, int]] = []
    for ev in events:
        if ev.kind != "utterance" or not mentions_keyword(ev.payload.get("text", "")):
            continue
        for hearer in ev.payload.get("recipients", ()):
            exposures.setdefault(hearer, []).append((ev.tick, ev.agent))
            ordered.append((ev.agent, hearer, ev.tick))

    first_increase: dict[str, int] = {}
    for agent, series in conversion.items():
        steps = [(t, lv) for t, lv in series if lv != PRIEST and lv > UNCONVERTED]
        if steps:
            first_increase[agent] = steps[0][0]

    critical: dict[str, tuple[int, str]] = {}
    for hearer, exps in exposures.items():
        if hearer not in first_increase:
            continue
        conv_tick = first_increase[hearer]
        candidates = [(t, s) for t, s in exps if t < conv_tick]
        if candidates:
            critical[hearer] = min(candidates)

    out = []
    for speaker, hearer, tick in ordered:
        is_crit = critical.get(hearer) == (tick, speaker)
        if is_crit:
            # only the first matching delivery is critical
            critical[hearer] = (-1, "")
        out.append(ExposureEdge(speaker=speaker, hearer=hearer, tick=tick, critical=is_crit))
    return out
