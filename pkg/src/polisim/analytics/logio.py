"""Event-log access helpers shared by the metrics."""

from __future__ import annotations

from typing import Iterable, Iterator

from ..events import Event


def events_of(events: Iterable[Event], kind: str) -> Iterator[Event]:
    for ev in events:
        if ev.kind == kind:
            yield ev


def utterances(events: Iterable[Event]) -> Iterator[Event]:
    return events_of(events, "utterance")


def goal_history(events: Iterable[Event]) -> dict[str, list[tuple[int, str]]]:
    """Per-agent (tick, social_goal) sequences, one per goal-generation call.

    Falls back to social_goal commits for logs without goal-tagged calls
    (hand-built fixtures).
    """
    from_calls: dict[str, list[tuple[int, str]]] = {}
    from_commits: dict[str, list[tuple[int, str]]] = {}
    for ev in events:
        if ev.kind == "lm_call" and ev.payload.get("template") == "social_goal":
            if "goal" in ev.payload:
                from_calls.setdefault(ev.agent, []).append((ev.tick, ev.payload["goal"]))
        elif ev.kind == "commit" and "social_goal" in ev.payload:
            from_commits.setdefault(ev.agent, []).append((ev.tick, ev.payload["social_goal"]))
    out = dict(from_commits)
    out.update(from_calls)
    return out


def decision_history(events: Iterable[Event]) -> dict[str, list[tuple[int, int, str]]]:
    """Per-agent (tick, version, intent) sequences from broadcast commits."""
    out: dict[str, list[tuple[int, int, str]]] = {}
    for ev in events:
        if ev.kind == "commit" and "decision" in ev.payload:
            d = ev.payload["decision"]
            out.setdefault(ev.agent, []).append((ev.tick, d["version"], d["intent"]))
    return out


def sentiment_series(events: Iterable[Event]) -> dict[tuple[str, str], list[tuple[int, float]]]:
    """(observer, target) -> [(tick, sentiment)] from profile commits."""
    out: dict[tuple[str, str], list[tuple[int, float]]] = {}
    for ev in events:
        if ev.kind == "commit" and "profiles" in ev.payload:
            for target, p in ev.payload["profiles"].items():
                out.setdefault((ev.agent, target), []).append((ev.tick, p["sentiment"]))
    return out


def position_trace(
    events: Iterable[Event], spawns: dict[str, tuple[float, float]]
) -> dict[str, list[tuple[int, float, float]]]:
    """Per-agent (tick, x, z) from world commits; starts at the spawn."""
    out = {agent: [(0, x, z)] for agent, (x, z) in spawns.items()}
    for ev in events:
        if ev.kind == "commit" and "position" in ev.payload:
            x, z = ev.payload["position"]
            out.setdefault(ev.agent, []).append((ev.tick, x, z))
    return out


def position_at(trace: list[tuple[int, float, float]], tick: int) -> tuple[float, float]:
    """Last known position at or before ``tick``."""
    x, z = trace[0][1], trace[0][2]
    for t, tx, tz in trace:
        if t > tick:
            break
        x, z = tx, tz
    return x, z
