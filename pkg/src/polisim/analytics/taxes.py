"""Tax compliance curves from governance season events."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from ..events import Event


@dataclass(frozen=True)
class ComplianceCurve:
    seasons: tuple[int, ...]
    rates: dict[int, float]
    per_agent: dict[str, dict[int, float]]  # agent -> season -> percent paid
    mean: dict[int, float]
    ci95: dict[int, tuple[float, float]]

    def mean_over(self, seasons: Iterable[int]) -> float:
        vals = [self.mean[s] for s in seasons if s in self.mean]
        return sum(vals) / len(vals) if vals else 0.0

    def pre_post_means(self, pre: int = 5) -> tuple[float, float]:
        pre_seasons = [s for s in self.seasons if s <= pre]
        post_seasons = [s for s in self.seasons if s > pre]
        return self.mean_over(pre_seasons), self.mean_over(post_seasons)


def mean_ci95(values: Sequence[float]) -> tuple[float, tuple[float, float]]:
    arr = np.asarray(values, dtype=float)
    m = float(arr.mean())
    if len(arr) < 2 or float(arr.std(ddof=1)) == 0.0:
        return m, (m, m)
    se = float(arr.std(ddof=1) / np.sqrt(len(arr)))
    t = stats.t.ppf(0.975, len(arr) - 1)
    return m, (m - t * se, m + t * se)


def tax_compliance_curve(events: Iterable[Event]) -> ComplianceCurve:
    per_agent: dict[str, dict[int, float]] = {}
    rates: dict[int, float] = {}
    seasons: list[int] = []
    for ev in events:
        if ev.kind != "action" or ev.payload.get("action") != "tax_season_end":
            continue
        season = ev.payload["season"]
        seasons.append(season)
        rates[season] = ev.payload.get("rate", 0.0)
        for agent, pct in ev.payload.get("percents", {}).items():
            per_agent.setdefault(agent, {})[season] = pct
    mean: dict[int, float] = {}
    ci: dict[int, tuple[float, float]] = {}
    for season in seasons:
        values = [per_agent[a][season] for a in sorted(per_agent) if season in per_agent[a]]
        if values:
            mean[season], ci[season] = mean_ci95(values)
    return ComplianceCurve(
        seasons=tuple(sorted(seasons)),
        rates=rates,
        per_agent=per_agent,
        mean=mean,
        ci95=ci,
    )


def bootstrap_mean_ci95(
    values: Sequence[float], n_resamples: int = 10_000, seed: int = 0
) -> tuple[float, float]:
    """Percentile bootstrap CI; the oracle the t-based CI is checked against."""
    rng = np.random.default_rng(seed)
    arr = np.asarray(values, dtype=float)
    idx = rng.integers(0, len(arr), size=(n_resamples, len(arr)))
    means = arr[idx].mean(axis=1)
    return float(np.percentile(means, 2.5)), float(np.percentile(means, 97.5))
