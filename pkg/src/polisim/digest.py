"""Budgeted digest of an agent snapshot for the controller.

Sections are packed in fixed priority order: incoming speech, current social
goal, pending action outcome, working memory (newest first), social profile
summaries, long-term memory. Whole lowest-priority sections are dropped
first; only the final included section may be tail-truncated. The speech
section is priority-flagged: whenever any hearing percept exists it is
always included, truncated to the budget if it alone exceeds it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .types import HEARING, StateSnapshot

SECTION_ORDER = ("speech", "goal", "action", "memory", "profiles", "notes")
PRIORITY_FLAGS = frozenset({"speech"})
MIN_BUDGET = 256
DEFAULT_BUDGET = 2000
SPEECH_LINES = 6  # newest incoming-speech lines highlighted; older ones stay
                  # visible through the working-memory section


@dataclass(frozen=True)
class Digest:
    budget: int
    sections: tuple[tuple[str, str], ...]
    priority_flags: frozenset[str] = PRIORITY_FLAGS

    def total_content(self) -> int:
        return sum(len(content) for _, content in self.sections)

    def render(self) -> str:
        return "\n".join(f"## {label}\n{content}" for label, content in self.sections)

    def has(self, label: str) -> bool:
        return any(lbl == label for lbl, _ in self.sections)


def build_sections(snapshot: StateSnapshot) -> list[tuple[str, str]]:
    """Raw (label, content) pairs before budget packing; empty ones omitted."""
    sections: list[tuple[str, str]] = []

    heard = [p for p in snapshot.working_memory if p.source == HEARING][-SPEECH_LINES:]
    if heard:
        sections.append(("speech", "\n".join(p.describe() for p in reversed(heard))))

    if snapshot.social_goal:
        sections.append(("goal", snapshot.social_goal))

    rec = snapshot.pending_action
    if rec is not None:
        line = f"last action: {rec.action.describe()} -> {rec.status}"
        if rec.observed_outcome:
            line += f" ({rec.observed_outcome})"
        sections.append(("action", line))

    if snapshot.working_memory:
        sections.append(
            ("memory", "\n".join(p.describe() for p in reversed(snapshot.working_memory)))
        )

    if snapshot.social_profiles:
        profiles = sorted(
            snapshot.social_profiles.values(), key=lambda p: (-p.last_updated, p.target)
        )
        sections.append(
            (
                "profiles",
                "\n".join(f"{p.target} (sentiment {p.sentiment:.1f}): {p.summary}" for p in profiles),
            )
        )

    if snapshot.long_term_memory:
        tail = snapshot.long_term_memory[-5:]
        sections.append(("notes", "\n".join(f"[t{m.tick}] {m.kind}: {m.content}" for m in tail)))

    return sections


def pack_sections(sections: list[tuple[str, str]], budget: int) -> Digest:
    if budget < MIN_BUDGET:
        raise ValueError(f"digest budget {budget} below minimum {MIN_BUDGET}")
    packed: list[tuple[str, str]] = []
    remaining = budget
    for label, content in sections:
        if not content:
            continue
        if label in PRIORITY_FLAGS:
            kept = content[: max(remaining, 0)] if len(content) > remaining else content
            if len(content) > budget:
                kept = content[:budget]
            packed.append((label, kept))
            remaining -= len(kept)
            continue
        if remaining <= 0:
            break
        if len(content) <= remaining:
            packed.append((label, content))
            remaining -= len(content)
        else:
            packed.append((label, content[:remaining]))
            remaining = 0
            break
    return Digest(budget=budget, sections=tuple(packed))


def make_digest(snapshot: StateSnapshot, budget: int = DEFAULT_BUDGET) -> Digest:
    return pack_sections(build_sections(snapshot), budget)
