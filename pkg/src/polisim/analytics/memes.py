"""Cultural meme extraction and spatial meme counting."""

from __future__ import annotations

import re
from typing import Iterable, Mapping, Sequence

from .. import templates
from ..events import Event
from ..lm import Backend, LmError, LmRequest
from ..world import TownConfig
from .logio import goal_history

MEME_WINDOW = 120  # ticks; the "recently mentioned" horizon for meme maps

# Candidate vocabulary used by the scripted summarizer; live runs let the LM
# emit arbitrary keywords.
CANDIDATE_KEYWORDS = (
    "pasta",
    "eco",
    "dance",
    "meditation",
    "prank",
    "talent",
    "garden",
    "storytelling",
    "vintage",
    "volunteer",
)


def scripted_meme_summary(history_text: str) -> str:
    text = history_text.lower()
    found = [k for k in CANDIDATE_KEYWORDS if k in text]
    return ", ".join(found)


def extract_memes(
    goal_histories: Mapping[str, Sequence[str]], lm: Backend | None = None
) -> list[str]:
    """Summarize each agent's goal history into keywords; dedupe the union."""
    vocabulary: dict[str, None] = {}
    for agent in sorted(goal_histories):
        goals = goal_histories[agent]
        if not goals:
            continue
        history = "\n".join(goals)
        if lm is None:
            completion = scripted_meme_summary(history)
        else:
            prompt = templates.fill("meme_summary", agent_name=agent, history=history)
            try:
                completion = lm.complete(
                    LmRequest(template_name="meme_summary", filled_prompt=prompt)
                ).text
            except LmError:
                continue
        for token in re.split(r"[,\n]", completion):
            keyword = token.strip().lower()
            if keyword:
                vocabulary.setdefault(keyword, None)
    return list(vocabulary)


def meme_vocabulary_from_log(events: Iterable[Event], lm: Backend | None = None) -> list[str]:
    histories = {a: [g for _, g in h] for a, h in goal_history(events).items()}
    return extract_memes(histories, lm)


def region_of(x: float, z: float, towns: Sequence[TownConfig]) -> str:
    for t in towns:
        if (x - t.x) ** 2 + (z - t.z) ** 2 <= t.radius**2:
            return t.name
    return "rural"


def meme_counts(
    events: Iterable[Event],
    vocabulary: Sequence[str],
    towns: Sequence[TownConfig],
    window: int = MEME_WINDOW,
) -> dict[tuple[str, str, int], int]:
    """(meme, region, window index) -> utterance mentions.

    Case-insensitive substring match; the utterance's own logged position
    decides its region.
    """
    vocab = [v.lower() for v in vocabulary]
    counts: dict[tuple[str, str, int], int] = {}
    for ev in events:
        if ev.kind != "utterance":
            continue
        text = ev.payload.get("text", "").lower()
        region = region_of(ev.payload.get("x", 0.0), ev.payload.get("z", 0.0), towns)
        w = ev.tick // window
        for meme in vocab:
            if meme in text:
                key = (meme, region, w)
                counts[key] = counts.get(key, 0) + 1
    return counts


def region_populations(
    position_traces: Mapping[str, list[tuple[int, float, float]]],
    towns: Sequence[TownConfig],
    tick: int,
) -> dict[str, int]:
    """Live population per region at a tick, from reconstructed positions."""
    from .logio import position_at

    pops: dict[str, int] = {t.name: 0 for t in towns}
    pops["rural"] = 0
    for agent, trace in position_traces.items():
        x, z = position_at(trace, tick)
        pops[region_of(x, z, towns)] += 1
    return pops


def per_capita_meme_counts(
    events: Iterable[Event],
    vocabulary: Sequence[str],
    towns: Sequence[TownConfig],
    position_traces: Mapping[str, list[tuple[int, float, float]]],
    window: int = MEME_WINDOW,
) -> dict[tuple[str, str, int], float]:
    raw = meme_counts(events, vocabulary, towns, window)
    pops_by_window: dict[int, dict[str, int]] = {}
    out: dict[tuple[str, str, int], float] = {}
    for (meme, region, w), count in raw.items():
        if w not in pops_by_window:
            pops_by_window[w] = region_populations(position_traces, towns, w * window)
        pop = pops_by_window[w].get(region, 0)
        out[(meme, region, w)] = count / pop if pop else 0.0
    return out
