"""Social graph statistics: regression of perceived vs true likeability,
degree vs extroversion, sentiment asymmetry."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np
from scipy import stats

from ..events import Event
from .logio import sentiment_series

CI_LEVELS = (0.68, 0.95, 0.99)


@dataclass(frozen=True)
class SocialGraph:
    # (sender, recipient) -> sender's latest sentiment toward recipient
    edges: Mapping[tuple[str, str], float]
    true_likeability: Mapping[str, float]
    true_extroversion: Mapping[str, float]

    def in_edges(self, node: str) -> list[float]:
        return [s for (src, dst), s in self.edges.items() if dst == node]


def build_graph(
    events: Iterable[Event],
    annotations: Mapping[str, Mapping[str, float]],
) -> SocialGraph:
    """Edges from the latest profile commit per (observer, target) pair.

    ``annotations`` carries per-agent true_likeability / true_extroversion
    (numeric trait scores in scripted runs; an LM scores traits in live runs).
    """
    series = sentiment_series(events)
    edges = {pair: values[-1][1] for pair, values in series.items() if values}
    like = {a: float(ann.get("true_likeability", 5.0)) for a, ann in annotations.items()}
    extro = {a: float(ann.get("true_extroversion", 5.0)) for a, ann in annotations.items()}
    return SocialGraph(edges=edges, true_likeability=like, true_extroversion=extro)


@dataclass(frozen=True)
class RegressionResult:
    slope: float
    intercept: float
    r: float
    n: int
    ci68: tuple[float, float]
    ci95: tuple[float, float]
    ci99: tuple[float, float]

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "r": self.r,
            "n": self.n,
            "ci68": list(self.ci68),
            "ci95": list(self.ci95),
            "ci99": list(self.ci99),
        }


def ols_with_cis(x: np.ndarray, y: np.ndarray) -> RegressionResult:
    """Ordinary least squares of y on x with t-distribution slope CIs."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    if n < 3:
        raise ValueError("regression needs at least 3 points")
    mx, my = x.mean(), y.mean()
    sxx = float(((x - mx) ** 2).sum())
    sxy = float(((x - mx) * (y - my)).sum())
    syy = float(((y - my) ** 2).sum())
    if sxx == 0:
        raise ValueError("x has zero variance")
    beta = sxy / sxx
    alpha = my - beta * mx
    resid = y - (alpha + beta * x)
    sse = float((resid**2).sum())
    r = sxy / np.sqrt(sxx * syy) if syy > 0 else 1.0
    dof = n - 2
    se = np.sqrt(sse / dof / sxx) if dof > 0 else 0.0
    cis = []
    for level in CI_LEVELS:
        t = stats.t.ppf(0.5 + level / 2.0, dof)
        cis.append((beta - t * se, beta + t * se))
    return RegressionResult(
        slope=beta, intercept=alpha, r=float(r), n=n, ci68=cis[0], ci95=cis[1], ci99=cis[2]
    )


def likeability_regression(graph: SocialGraph, min_observers: int = 5) -> RegressionResult:
    """Perceived (mean in-edge sentiment, >= k observers) vs true likeability."""
    xs, ys = [], []
    for node, true_score in sorted(graph.true_likeability.items()):
        incoming = graph.in_edges(node)
        if len(incoming) >= min_observers:
            xs.append(true_score)
            ys.append(sum(incoming) / len(incoming))
    return ols_with_cis(np.array(xs), np.array(ys))


def degree_extroversion(graph: SocialGraph) -> list[tuple[str, int, float]]:
    out = []
    for node in sorted(graph.true_extroversion):
        out.append((node, len(graph.in_edges(node)), graph.true_extroversion[node]))
    return out


def sentiment_asymmetry(graph: SocialGraph) -> list[int]:
    """Histogram (bin width 1 over [0,10]) of |s(a->b) - s(b->a)|."""
    bins = [0] * 11
    seen = set()
    for (a, b), s_ab in graph.edges.items():
        if (b, a) in seen or (b, a) not in graph.edges:
            continue
        seen.add((a, b))
        diff = abs(s_ab - graph.edges[(b, a)])
        bins[min(int(diff), 10)] += 1
    return bins
