"""Coherence audit: speech and action streams must agree.

An utterance is coherent with the concurrently executing action when the
intent tagged on the utterance matches the intent that issued the action
(or their versions differ by at most one broadcast).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..events import Event


@dataclass(frozen=True)
class CoherenceReport:
    utterances: int
    paired: int  # utterances with a concurrently executing action
    intent_matches: int
    version_gap_ok: int  # |utterance version - action version| <= 1
    stale: int

    @property
    def intent_match_rate(self) -> float:
        return self.intent_matches / self.paired if self.paired else 1.0

    @property
    def stale_rate(self) -> float:
        return self.stale / self.utterances if self.utterances else 0.0


def action_spans(events: list[Event]) -> dict[str, list[tuple[int, int, int, int, str]]]:
    """Per agent: (start, end, version low, version high, intent) per action.

    Submission tick comes from the action id (agent:tNNN); the terminal event
    tick closes the span. Re-affirming broadcasts re-tag the pending record,
    so the governing version is a range.
    """
    retags: dict[tuple[str, str], int] = {}
    for ev in events:
        if ev.kind == "commit" and "pending" in ev.payload:
            p = ev.payload["pending"]
            if "dv" in p:
                key = (ev.agent, p["id"])
                retags[key] = max(retags.get(key, 0), p["dv"])
    spans: dict[str, list[tuple[int, int, int, int, str]]] = {}
    for ev in events:
        if ev.kind != "action":
            continue
        args = ev.payload.get("args", {})
        if "dv" not in args:
            continue
        action_id = ev.payload.get("id", "")
        try:
            start = int(action_id.rsplit(":t", 1)[1])
        except (IndexError, ValueError):
            start = ev.tick
        dv = args["dv"]
        dv_hi = max(dv, retags.get((ev.agent, action_id), dv))
        spans.setdefault(ev.agent, []).append((start, ev.tick, dv, dv_hi, args["intent"]))
    return spans


def audit(events: Iterable[Event]) -> CoherenceReport:
    events = list(events)
    spans = action_spans(events)
    utt_total = paired = matches = gap_ok = stale = 0
    for ev in events:
        if ev.kind != "utterance":
            continue
        utt_total += 1
        if ev.payload.get("stale"):
            stale += 1
        uv = ev.payload.get("decision_version")
        ui = ev.payload.get("intent")
        here = [
            (s, e, lo, hi, intent)
            for (s, e, lo, hi, intent) in spans.get(ev.agent, ())
            if s <= ev.tick <= e
        ]
        if not here:
            continue
        paired += 1
        if any(intent == ui for *_, intent in here):
            matches += 1
        if any(lo - 1 <= uv <= hi + 1 for _, _, lo, hi, _ in here):
            gap_ok += 1
    return CoherenceReport(
        utterances=utt_total,
        paired=paired,
        intent_matches=matches,
        version_gap_ok=gap_ok,
        stale=stale,
    )
