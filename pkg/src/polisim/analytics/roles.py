"""Role inference from rolling social-goal windows, entropy, action matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

from .. import templates
from ..events import Event
from ..lm import Backend, LmError, LmRequest
from .logio import goal_history

ROLL_WINDOW = 5

# Keyword families checked in order; first match wins. More specific families
# come first so "automated farm" labels Engineer, not Farmer.
ROLE_KEYWORDS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("Engineer", ("automat", "machine", "redstone")),
    ("Blacksmith", ("smith", "forge", "anvil")),
    ("Explorer", ("uncharted", "museum", "explor", "expedition")),
    ("Curator", ("curat", "gallery", "exhibit")),
    ("Collector", ("collect rare", "collection", "collector")),
    ("Artist", ("flower", "paint", "artistic", "sculpt", "art ")),
    ("Scout", ("scout", "perimeter", "lookout")),
    ("Strategist", ("strateg", "drill", "tactic")),
    ("Guard", ("guard", "patrol", "defend", "fence")),
    ("Fisher", ("fish", "rod", "boat")),
    ("Farmer", ("farm", "crop", "wheat", "harvest")),
    ("Miner", ("mine", "ore", "cave", "dig")),
    ("Gatherer", ("gather", "wood", "log", "stone")),
)


def keyword_role(goals_text: str) -> str:
    text = goals_text.lower()
    for role, keys in ROLE_KEYWORDS:
        if any(k in text for k in keys):
            return role
    return "Villager"


def infer_role(goals: Sequence[str], lm: Backend | None = None) -> str:
    """Label from exactly the last five goals; scripted map when lm is None."""
    if len(goals) != ROLL_WINDOW:
        raise ValueError(f"role inference needs exactly {ROLL_WINDOW} goals, got {len(goals)}")
    joined = "\n".join(goals)
    if lm is None:
        return keyword_role(joined)
    prompt = templates.fill("role_infer", n=ROLL_WINDOW, goals=joined)
    try:
        text = lm.complete(LmRequest(template_name="role_infer", filled_prompt=prompt)).text
    except LmError:
        return keyword_role(joined)
    label = text.strip().split()[0].strip(".,:;") if text.strip() else ""
    return label or keyword_role(joined)


@dataclass(frozen=True)
class RoleAssignment:
    agent: str
    window_end_tick: int
    role: str


def role_assignments(
    events: Iterable[Event], lm: Backend | None = None
) -> list[RoleAssignment]:
    """One assignment per agent per goal commit once five goals accumulated."""
    out: list[RoleAssignment] = []
    for agent, history in sorted(goal_history(events).items()):
        for i in range(ROLL_WINDOW - 1, len(history)):
            window = history[i - ROLL_WINDOW + 1 : i + 1]
            out.append(
                RoleAssignment(
                    agent=agent,
                    window_end_tick=window[-1][0],
                    role=infer_role([g for _, g in window], lm),
                )
            )
    return out


def latest_roles(assignments: Iterable[RoleAssignment], tick: int | None = None) -> dict[str, str]:
    roles: dict[str, str] = {}
    best: dict[str, int] = {}
    for a in assignments:
        if tick is not None and a.window_end_tick > tick:
            continue
        if a.agent not in best or a.window_end_tick >= best[a.agent]:
            best[a.agent] = a.window_end_tick
            roles[a.agent] = a.role
    return roles


def role_entropy(roles: Mapping[str, str] | Sequence[str]) -> float:
    """Shannon entropy (nats) of the role distribution; needs >= 1 assignment."""
    labels = list(roles.values()) if isinstance(roles, Mapping) else list(roles)
    if not labels:
        raise ValueError("role entropy needs at least one assignment")
    counts: dict[str, int] = {}
    for label in labels:
        counts[label] = counts.get(label, 0) + 1
    n = len(labels)
    return -sum((c / n) * math.log(c / n) for c in counts.values()) + 0.0


def entropy_series(
    assignments: Sequence[RoleAssignment], ticks: Sequence[int]
) -> list[tuple[int, float]]:
    """Entropy of the latest-known roles at each tick; 0.0 when empty."""
    out = []
    for t in ticks:
        roles = latest_roles(assignments, t)
        out.append((t, role_entropy(roles) if roles else 0.0))
    return out


def persistence(assignments: Sequence[RoleAssignment]) -> float:
    """Fraction of consecutive windows keeping the same label, per agent pooled."""
    same = 0
    total = 0
    per_agent: dict[str, list[RoleAssignment]] = {}
    for a in assignments:
        per_agent.setdefault(a.agent, []).append(a)
    for seq in per_agent.values():
        seq.sort(key=lambda a: a.window_end_tick)
        for prev, cur in zip(seq, seq[1:]):
            total += 1
            if prev.role == cur.role:
                same += 1
    return same / total if total else 1.0


def action_kind(payload: Mapping) -> str:
    kind = payload.get("kind", "?")
    item = payload.get("args", {}).get("item")
    return f"{kind}:{item}" if item and kind in ("gather", "craft") else str(kind)


def action_counts(
    events: Iterable[Event], assignments: Sequence[RoleAssignment]
) -> tuple[list[str], list[str], np.ndarray]:
    """(roles, action_kinds, count matrix) over successful actions."""
    windows: dict[str, list[tuple[int, str]]] = {}
    for a in assignments:
        windows.setdefault(a.agent, []).append((a.window_end_tick, a.role))
    for seq in windows.values():
        seq.sort()

    def role_at(agent: str, tick: int) -> str | None:
        seq = windows.get(agent)
        if not seq:
            return None
        role = None
        for t, r in seq:
            if t > tick:
                break
            role = r
        return role

    counts: dict[tuple[str, str], int] = {}
    for ev in events:
        if ev.kind != "action" or ev.payload.get("status") != "succeeded":
            continue
        role = role_at(ev.agent, ev.tick)
        if role is None:
            continue
        key = (role, action_kind(ev.payload))
        counts[key] = counts.get(key, 0) + 1

    roles = sorted({r for r, _ in counts})
    kinds = sorted({k for _, k in counts})
    matrix = np.zeros((len(roles), len(kinds)))
    for (r, k), c in counts.items():
        matrix[roles.index(r), kinds.index(k)] = c
    return roles, kinds, matrix


def normalize_two_pass(matrix: np.ndarray) -> np.ndarray:
    """Row-normalize, then column-normalize, in that order."""
    m = np.asarray(matrix, dtype=float).copy()
    row_sums = m.sum(axis=1, keepdims=True)
    np.divide(m, row_sums, out=m, where=row_sums > 0)
    col_sums = m.sum(axis=0, keepdims=True)
    np.divide(m, col_sums, out=m, where=col_sums > 0)
    return m


def action_frequency_matrix(
    events: Iterable[Event], assignments: Sequence[RoleAssignment]
) -> tuple[list[str], list[str], np.ndarray]:
    roles, kinds, counts = action_counts(list(events), assignments)
    return roles, kinds, normalize_two_pass(counts)
