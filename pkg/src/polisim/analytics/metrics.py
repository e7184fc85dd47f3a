"""Named metrics for the analyze CLI: each emits CSV rows and a figure."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Callable, Iterable

from ..engine import SimulationConfig
from ..events import Event
from ..world import TownConfig
from . import coherence as coherence_mod
from . import logio, memes, religion, roles, social, taxes
from .replay import verify

Rows = list[list]


def _towns(config: SimulationConfig) -> list[TownConfig]:
    return [TownConfig(t.name, t.x, t.z, t.radius) for t in config.world.towns]


def _spawns(config: SimulationConfig) -> dict[str, tuple[float, float]]:
    return {a.name: (a.spawn_location[0], a.spawn_location[2]) for a in config.agents}


def _priests(config: SimulationConfig) -> list[str]:
    return list(config.extras.get("priests", []))


def metric_unique_items(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    step = max(1, config.horizon // 60)
    samples = list(range(0, config.horizon + 1, step))
    held: dict[str, set[str]] = {a.name: {k for k, v in dict(a.inventory).items() if v > 0}
                                 for a in config.agents}
    series: dict[str, list[tuple[float, float]]] = {a: [] for a in held}
    idx = 0
    by_tick: dict[int, list[Event]] = {}
    for ev in events:
        if ev.kind == "action" and ev.payload.get("status") == "succeeded":
            by_tick.setdefault(ev.tick, []).append(ev)
    for t in samples:
        while idx <= t:
            for ev in by_tick.get(idx, ()):
                for item, d in ev.payload.get("deltas", {}).items():
                    if d > 0:
                        held[ev.agent].add(item)
            idx += 1
        for agent in held:
            series[agent].append((t, len(held[agent])))
    rows: Rows = [["tick", "agent", "unique_items"]]
    for agent in sorted(series):
        for t, n in series[agent]:
            rows.append([t, agent, n])
    if plot:
        from . import plots

        plots.line_series(series, "Unique items per agent", "tick", "unique items",
                          out / "unique_items.png")
    return rows


def metric_role_entropy(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    assignments = roles.role_assignments(events)
    step = max(1, config.horizon // 40)
    series = roles.entropy_series(assignments, list(range(0, config.horizon + 1, step)))
    rows: Rows = [["tick", "entropy_nats"]]
    rows += [[t, round(h, 6)] for t, h in series]
    if plot:
        from . import plots

        plots.line_series({"entropy": [(t, h) for t, h in series]},
                          "Role entropy", "tick", "nats", out / "role_entropy.png")
    return rows


def metric_roles(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    assignments = roles.role_assignments(events)
    rows: Rows = [["agent", "window_end_tick", "role"]]
    rows += [[a.agent, a.window_end_tick, a.role] for a in assignments]
    if plot:
        from collections import Counter

        from . import plots

        latest = roles.latest_roles(assignments)
        counts = Counter(latest.values())
        labels = sorted(counts)
        plots.bars(labels, [counts[r] for r in labels], "Final role distribution",
                   "agents", out / "roles.png")
    return rows


def metric_action_matrix(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    assignments = roles.role_assignments(events)
    role_names, kinds, matrix = roles.action_frequency_matrix(events, assignments)
    rows: Rows = [["role"] + kinds]
    for i, role in enumerate(role_names):
        rows.append([role] + [round(float(x), 6) for x in matrix[i]])
    if plot and role_names:
        from . import plots

        plots.heatmap(matrix, role_names, kinds, "Normalized action frequencies",
                      out / "action_matrix.png")
    return rows


def _graph(events: list[Event], config: SimulationConfig) -> social.SocialGraph:
    annotations = {a.name: dict(a.annotations) for a in config.agents if a.annotations}
    return social.build_graph(events, annotations)


def metric_likeability(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    graph = _graph(events, config)
    rows: Rows = [["min_observers", "r", "n", "slope", "intercept",
                   "ci68_lo", "ci68_hi", "ci95_lo", "ci95_hi", "ci99_lo", "ci99_hi"]]
    for k in range(1, 12):
        try:
            res = social.likeability_regression(graph, min_observers=k)
        except ValueError:
            continue
        rows.append([k, round(res.r, 3), res.n, round(res.slope, 3), round(res.intercept, 3),
                     *(round(v, 3) for ci in (res.ci68, res.ci95, res.ci99) for v in ci)])
    if plot:
        from . import plots

        xs, ys = [], []
        for node, true_score in graph.true_likeability.items():
            incoming = graph.in_edges(node)
            if len(incoming) >= 5:
                xs.append(true_score)
                ys.append(sum(incoming) / len(incoming))
        fit = None
        try:
            res = social.likeability_regression(graph, min_observers=5)
            fit = (res.slope, res.intercept)
        except ValueError:
            pass
        plots.scatter(xs, ys, "Perceived vs true likeability", "true", "perceived",
                      out / "likeability.png", fit=fit)
    return rows


def metric_degree_extroversion(events: list[Event], config: SimulationConfig, out: Path,
                               plot: bool) -> Rows:
    graph = _graph(events, config)
    data = social.degree_extroversion(graph)
    rows: Rows = [["agent", "in_degree", "true_extroversion"]]
    rows += [[a, d, e] for a, d, e in data]
    if plot:
        from . import plots

        plots.scatter([e for _, _, e in data], [d for _, d, _ in data],
                      "In-degree vs extroversion", "true extroversion", "in-degree",
                      out / "degree_extroversion.png")
    return rows


def metric_sentiment_asymmetry(events: list[Event], config: SimulationConfig, out: Path,
                               plot: bool) -> Rows:
    graph = _graph(events, config)
    bins = social.sentiment_asymmetry(graph)
    rows: Rows = [["difference_bin", "pairs"]]
    rows += [[i, n] for i, n in enumerate(bins)]
    if plot:
        from . import plots

        values = [i for i, n in enumerate(bins) for _ in range(n)]
        plots.histogram(values, bins=range(12), title="Sentiment asymmetry",
                        xlabel="|s(a->b) - s(b->a)|", path=out / "sentiment_asymmetry.png")
    return rows


def metric_tax_compliance(events: list[Event], config: SimulationConfig, out: Path,
                          plot: bool) -> Rows:
    curve = taxes.tax_compliance_curve(events)
    rows: Rows = [["season", "rate", "mean_percent", "ci95_lo", "ci95_hi"]]
    for s in curve.seasons:
        lo, hi = curve.ci95.get(s, (0.0, 0.0))
        rows.append([s, curve.rates.get(s, ""), round(curve.mean.get(s, 0.0), 3),
                     round(lo, 3), round(hi, 3)])
    if plot:
        from . import plots

        series = {"mean": [(s, curve.mean.get(s, 0.0)) for s in curve.seasons]}
        for agent in sorted(curve.per_agent):
            series[agent] = sorted(curve.per_agent[agent].items())
        plots.line_series(series, "Tax compliance", "season", "% of inventory deposited",
                          out / "tax_compliance.png")
    return rows


def metric_memes(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    vocab = memes.meme_vocabulary_from_log(events)
    towns = _towns(config)
    traces = logio.position_trace(events, _spawns(config))
    counts = memes.meme_counts(events, vocab, towns)
    pc = memes.per_capita_meme_counts(events, vocab, towns, traces)
    rows: Rows = [["meme", "region", "window", "count", "per_capita"]]
    for key in sorted(counts):
        meme, region, w = key
        rows.append([meme, region, w, counts[key], round(pc.get(key, 0.0), 4)])
    if plot:
        from collections import defaultdict

        from . import plots

        by_region: dict[str, float] = defaultdict(float)
        windows: dict[str, int] = defaultdict(int)
        for (meme, region, w), v in pc.items():
            by_region[region] += v
            windows[region] += 1
        labels = sorted(by_region)
        plots.bars(labels, [by_region[r] / max(windows[r], 1) for r in labels],
                   "Mean per-capita meme mentions per window", "mentions/agent",
                   out / "memes.png")
    return rows


def metric_conversion(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    conv = religion.classify_conversion(events, _priests(config))
    step = max(1, config.horizon // 60)
    ticks = list(range(0, config.horizon + 1, step))
    counts = religion.convert_counts(conv, ticks)
    rows: Rows = [["tick", "indirect", "direct", "priest"]]
    rows += [[t, i, d, p] for t, i, d, p in counts]
    if plot:
        from . import plots

        plots.line_series(
            {
                "indirect": [(t, i) for t, i, d, p in counts],
                "direct": [(t, d) for t, i, d, p in counts],
                "priest": [(t, p) for t, i, d, p in counts],
            },
            "Conversion levels over time", "tick", "agents", out / "conversion.png",
        )
    return rows


def metric_spread_area(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    conv = religion.classify_conversion(events, _priests(config))
    traces = logio.position_trace(events, _spawns(config))
    bounds = (config.world.x_min, config.world.x_max, config.world.z_min, config.world.z_max)
    radius = config.world.hearing_radius
    step = max(1, config.horizon // 24)
    rows: Rows = [["tick", "area_indirect_plus", "area_direct_plus", "area_priest"]]
    series: dict[str, list[tuple[float, float]]] = {"indirect+": [], "direct+": [], "priest": []}
    for t in range(0, config.horizon + 1, step):
        positions = {a: logio.position_at(tr, t) for a, tr in traces.items()}
        a1 = religion.spread_area(conv, positions, radius, bounds, t, religion.INDIRECT)
        a2 = religion.spread_area(conv, positions, radius, bounds, t, religion.DIRECT)
        a3 = religion.spread_area(conv, positions, radius, bounds, t, religion.PRIEST)
        rows.append([t, a1, a2, a3])
        series["indirect+"].append((t, a1))
        series["direct+"].append((t, a2))
        series["priest"].append((t, a3))
    if plot:
        from . import plots

        plots.line_series(series, "Hearable spread area", "tick", "blocks^2",
                          out / "spread_area.png")
    return rows


def metric_conversion_graph(events: list[Event], config: SimulationConfig, out: Path,
                            plot: bool) -> Rows:
    conv = religion.classify_conversion(events, _priests(config))
    edges = religion.conversion_graph(events, conv)
    rows: Rows = [["speaker", "hearer", "tick", "critical"]]
    rows += [[e.speaker, e.hearer, e.tick, int(e.critical)] for e in edges]
    if plot:
        from . import plots

        crit = [e.tick for e in edges if e.critical]
        if crit:
            plots.histogram(crit, bins=20, title="Critical exposure edges over time",
                            xlabel="tick", path=out / "conversion_graph.png")
    return rows


def metric_positions(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    """World snapshot export: (tick, agent, x, z, flags) for spatial scatters.

    Flags mark recent meme mentions (within the meme window) and the agent's
    conversion level at the sample tick.
    """
    traces = logio.position_trace(events, _spawns(config))
    vocab = memes.meme_vocabulary_from_log(events)
    conv = religion.classify_conversion(events, _priests(config))
    recent_mentions: dict[str, list[tuple[int, str]]] = {}
    for ev in events:
        if ev.kind != "utterance":
            continue
        text = ev.payload.get("text", "").lower()
        for meme in vocab:
            if meme in text:
                recent_mentions.setdefault(ev.agent, []).append((ev.tick, meme))
    step = max(1, config.horizon // 40)
    rows: Rows = [["tick", "agent", "x", "z", "flags"]]
    for t in range(0, config.horizon + 1, step):
        for agent in sorted(traces):
            x, z = logio.position_at(traces[agent], t)
            flags = sorted(
                {m for mt, m in recent_mentions.get(agent, ()) if t - memes.MEME_WINDOW <= mt <= t}
            )
            level = religion.level_at(conv.get(agent, []), t)
            if level:
                flags.append(religion.LEVEL_NAMES[level])
            rows.append([t, agent, round(x, 1), round(z, 1), "|".join(flags)])
    if plot:
        from . import plots

        final = {a: logio.position_at(tr, config.horizon) for a, tr in traces.items()}
        flagged = {
            a for a in final
            if any(config.horizon - memes.MEME_WINDOW <= mt for mt, _ in recent_mentions.get(a, ()))
        }
        xs = [final[a][0] for a in sorted(final)]
        zs = [final[a][1] for a in sorted(final)]
        import matplotlib.pyplot as plt

        fig, ax = plt.subplots(figsize=(7, 7))
        colors = ["tab:red" if a in flagged else "lightgray" for a in sorted(final)]
        ax.scatter(xs, zs, c=colors, s=14)
        for town in config.world.towns:
            ax.add_patch(plt.Circle((town.x, town.z), town.radius, fill=False, color="tab:blue"))
            ax.annotate(town.name, (town.x, town.z), fontsize=7, ha="center")
        ax.set_title("Agent positions (meme speakers highlighted)")
        plots.save(fig, out / "positions.png")
    return rows


def metric_coherence(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    rep = coherence_mod.audit(events)
    rows: Rows = [["utterances", "paired", "intent_matches", "intent_match_rate",
                   "version_gap_ok", "stale", "stale_rate"]]
    rows.append([rep.utterances, rep.paired, rep.intent_matches,
                 round(rep.intent_match_rate, 4), rep.version_gap_ok, rep.stale,
                 round(rep.stale_rate, 4)])
    return rows


def metric_invariants(events: list[Event], config: SimulationConfig, out: Path, plot: bool) -> Rows:
    report = verify(events, config)
    rows: Rows = [["violations", "craft_checked"]]
    rows.append([len(report.violations), report.craft_checked])
    for v in report.violations:
        rows.append([v, ""])
    return rows


METRICS: dict[str, Callable[[list[Event], SimulationConfig, Path, bool], Rows]] = {
    "unique_items": metric_unique_items,
    "role_entropy": metric_role_entropy,
    "roles": metric_roles,
    "action_matrix": metric_action_matrix,
    "likeability": metric_likeability,
    "degree_extroversion": metric_degree_extroversion,
    "sentiment_asymmetry": metric_sentiment_asymmetry,
    "tax_compliance": metric_tax_compliance,
    "memes": metric_memes,
    "conversion": metric_conversion,
    "spread_area": metric_spread_area,
    "conversion_graph": metric_conversion_graph,
    "positions": metric_positions,
    "coherence": metric_coherence,
    "invariants": metric_invariants,
}

# --all renders the counterparts of the published figure bundle.
FIGURE_BUNDLE = (
    "unique_items",
    "likeability",
    "degree_extroversion",
    "sentiment_asymmetry",
    "role_entropy",
    "roles",
    "action_matrix",
    "tax_compliance",
    "memes",
    "positions",
    "conversion",
    "spread_area",
    "conversion_graph",
)


def run_metric(
    name: str,
    events: Iterable[Event],
    config: SimulationConfig,
    out_dir: str | Path,
    plot: bool = True,
) -> Path:
    if name not in METRICS:
        raise KeyError(f"unknown metric {name!r}; available: {sorted(METRICS)}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = METRICS[name](list(events), config, out, plot)
    csv_path = out / f"{name}.csv"
    with csv_path.open("w", newline="", encoding="utf-8") as fh:
        csv.writer(fh).writerows(rows)
    return csv_path
