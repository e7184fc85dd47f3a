"""Taxation and constitutional amendment pipeline.

Phases run on the engine clock as a schedule hook: tax seasons broadcast a
deposit signal and score per-agent compliance at window close; feedback is
collected, synthesized into amendments by the election manager, voted on,
tallied by strict majority of expressed votes, and the updated constitution
is distributed. A frozen constitution skips the update but keeps the full
timeline of events.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import TYPE_CHECKING, Any

from . import templates
from .lm import LmError

if TYPE_CHECKING:  # pragma: no cover
    from .engine import EngineApi


class GovernanceError(Exception):
    pass


# ---------------------------------------------------------------------------
# Constitution and parsing
# ---------------------------------------------------------------------------

_RANGE = re.compile(r"(\d+(?:\.\d+)?)\s*[-–]\s*(\d+(?:\.\d+)?)\s*%")
_SINGLE = re.compile(r"(\d+(?:\.\d+)?)\s*%")
_TAX = re.compile(r"tax", re.IGNORECASE)
TAX_ADJACENCY = 80  # characters


def parse_tax_rate(text: str) -> float | None:
    """Last percentage (range midpoint) within reach of the word 'tax'."""
    tax_positions = [m.start() for m in _TAX.finditer(text)]
    if not tax_positions:
        return None
    candidates: list[tuple[int, float]] = []
    range_spans: list[tuple[int, int]] = []
    for m in _RANGE.finditer(text):
        range_spans.append(m.span())
        value = (float(m.group(1)) + float(m.group(2))) / 2.0
        candidates.append((m.start(), value))
    for m in _SINGLE.finditer(text):
        if any(s <= m.start() < e for s, e in range_spans):
            continue
        candidates.append((m.start(), float(m.group(1))))
    adjacent = [
        (pos, value)
        for pos, value in candidates
        if any(abs(pos - t) <= TAX_ADJACENCY for t in tax_positions)
    ]
    if not adjacent:
        return None
    adjacent.sort()
    value = adjacent[-1][1]
    return min(max(value / 100.0, 0.0), 1.0)


@dataclass(frozen=True)
class Constitution:
    text: str
    version: int = 1
    fallback_rate: float = 0.2

    @property
    def tax_rate(self) -> float:
        parsed = parse_tax_rate(self.text)
        return self.fallback_rate if parsed is None else parsed


@dataclass(frozen=True)
class Amendment:
    index: int
    text: str


_MARKER = re.compile(r"\*\*\*\s*Amendment(\d+)\s*\*\*\*")


def parse_amendments(completion: str) -> list[Amendment]:
    """Parse strictly by the ***AmendmentN*** marker grammar, document order."""
    markers = list(_MARKER.finditer(completion))
    out: list[Amendment] = []
    for i, m in enumerate(markers):
        end = markers[i + 1].start() if i + 1 < len(markers) else len(completion)
        text = completion[m.end() : end].strip()
        if text:
            out.append(Amendment(index=int(m.group(1)), text=text))
    return out


@dataclass(frozen=True)
class Ballot:
    voter: str
    votes: tuple[str, ...]
    parse_fault: bool = False


_BRACKETS = re.compile(r"\[(.*?)\]", re.DOTALL)
_VOTE = re.compile(r"\b(yes|no|abstain)\b", re.IGNORECASE)


def parse_ballot(voter: str, completion: str, n_amendments: int) -> Ballot:
    m = _BRACKETS.search(completion)
    votes = [v.lower() for v in _VOTE.findall(m.group(1))] if m else []
    if len(votes) != n_amendments:
        return Ballot(voter=voter, votes=("abstain",) * n_amendments, parse_fault=True)
    return Ballot(voter=voter, votes=tuple(votes))


def tally(ballots: list[Ballot], n_amendments: int) -> list[bool]:
    """An amendment passes iff yes > no among expressed (non-abstain) votes."""
    passed = []
    for i in range(n_amendments):
        yes = sum(1 for b in ballots if b.votes[i] == "yes")
        no = sum(1 for b in ballots if b.votes[i] == "no")
        passed.append(yes > no)
    return passed


def apply_amendments(
    constitution: Constitution, passed: list[Amendment]
) -> tuple[Constitution, str | None]:
    """Splice ratified amendments into the document; version bumps by one.

    If the new text yields no parseable tax rate the previous rate is kept
    (reported as a fault message).
    """
    if not passed:
        return replace(constitution, version=constitution.version + 1), None
    body = "\n".join(
        f"Amendment {a.index} (ratified): {a.text}" for a in passed
    )
    new_text = f"{constitution.text}\n\n{body}"
    fault = None
    fallback = constitution.tax_rate
    if parse_tax_rate(new_text) is None:
        fault = "updated constitution has no parseable tax rate; previous rate kept"
    return (
        Constitution(text=new_text, version=constitution.version + 1, fallback_rate=fallback),
        fault,
    )


# ---------------------------------------------------------------------------
# Schedule
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GovernanceSchedule:
    sim_length: int = 1200
    season_interval: int = 120
    deposit_window: int = 20
    seasons_pre: int = 5
    seasons_post: int = 5
    feedback_tick: int = 300
    synthesis_tick: int = 360
    voting_tick: int = 420
    tally_tick: int = 480
    distribution_tick: int = 600

    def season_starts(self) -> list[int]:
        pre = [i * self.season_interval for i in range(self.seasons_pre)]
        post = [
            self.distribution_tick + i * self.season_interval for i in range(self.seasons_post)
        ]
        return pre + post

    def validate(self) -> None:
        marks = [
            self.feedback_tick,
            self.synthesis_tick,
            self.voting_tick,
            self.tally_tick,
            self.distribution_tick,
        ]
        if sorted(marks) != marks or len(set(marks)) != len(marks):
            raise GovernanceError("phase marks must be strictly increasing")
        if self.seasons_pre * self.season_interval != self.distribution_tick:
            raise GovernanceError("final pre-amendment season must end at the distribution mark")
        if self.deposit_window >= self.season_interval:
            raise GovernanceError("deposit window must fit inside a season")

    def to_dict(self) -> dict[str, int]:
        return {
            "sim_length": self.sim_length,
            "season_interval": self.season_interval,
            "deposit_window": self.deposit_window,
            "seasons_pre": self.seasons_pre,
            "seasons_post": self.seasons_post,
            "feedback_tick": self.feedback_tick,
            "synthesis_tick": self.synthesis_tick,
            "voting_tick": self.voting_tick,
            "tally_tick": self.tally_tick,
            "distribution_tick": self.distribution_tick,
        }


DEFAULT_CONSTITUTION = (
    "Constitution of the Village.\n"
    "Article 1: The community chest funds shared works; all citizens may petition "
    "the election manager for amendments.\n"
    "Article 2: Each tax season, every citizen shall deposit 20% of their inventory "
    "into the community chest as tax.\n"
    "Article 3: Amendments pass by majority vote of the citizens."
)


# ---------------------------------------------------------------------------
# Driver (engine hook)
# ---------------------------------------------------------------------------


@dataclass
class GovernanceDriver:
    manager: str
    constituents: tuple[str, ...]
    influencers: tuple[str, ...]
    schedule: GovernanceSchedule = field(default_factory=GovernanceSchedule)
    constitution: Constitution = field(
        default_factory=lambda: Constitution(text=DEFAULT_CONSTITUTION)
    )
    frozen: bool = False
    out_dir: Path | None = None
    lm_tally: bool = False

    feedback: list[tuple[str, str]] = field(default_factory=list)
    amendments: list[Amendment] = field(default_factory=list)
    ballots: list[Ballot] = field(default_factory=list)
    passed: list[Amendment] = field(default_factory=list)
    season_pre_totals: dict[int, dict[str, int]] = field(default_factory=dict)
    season_rates: dict[int, float] = field(default_factory=dict)
    aborted: bool = False

    def __post_init__(self) -> None:
        self.schedule.validate()
        if self.out_dir is not None:
            self.out_dir = Path(self.out_dir)
            (self.out_dir / "constitutions").mkdir(parents=True, exist_ok=True)
            self._write_constitution()

    # -- engine hook -----------------------------------------------------------

    def on_tick(self, tick: int, api: "EngineApi") -> None:
        s = self.schedule
        starts = s.season_starts()
        # Distribution precedes the season that starts at the same mark: the
        # post-amendment seasons run under the updated constitution.
        if tick == s.distribution_tick:
            self._distribute(tick, api)
        if tick in starts:
            self._season_start(starts.index(tick) + 1, tick, api)
        if tick - s.deposit_window in starts:
            start = tick - s.deposit_window
            self._season_end(starts.index(start) + 1, start, tick, api)
        if tick == s.feedback_tick:
            self._collect_feedback(tick, api)
        if tick == s.synthesis_tick:
            self._create_amendments(tick, api)
        if tick == s.voting_tick:
            self._cast_votes(tick, api)
        if tick == s.tally_tick:
            self._tally(tick, api)

    # -- phases ------------------------------------------------------------------

    def _season_start(self, season: int, tick: int, api: "EngineApi") -> None:
        rate = self.constitution.tax_rate
        self.season_rates[season] = rate
        pre_totals: dict[str, int] = {}
        for agent in self.constituents:
            pre_totals[agent] = api.world.inventory_total(agent)
            percepts = api.world.broadcast_signal(
                [agent],
                {
                    "signal": "tax-season",
                    "season": season,
                    "rate": rate,
                    "window": self.schedule.deposit_window,
                },
                tick,
            )
            api.push_percepts(agent, [percepts[agent]], tick)
        self.season_pre_totals[season] = pre_totals
        api.log(
            tick,
            self.manager,
            "governance",
            "action",
            {"action": "tax_season_start", "season": season, "rate": rate},
        )

    def _season_end(self, season: int, start: int, tick: int, api: "EngineApi") -> None:
        pre = self.season_pre_totals.get(season, {})
        percents: dict[str, float] = {}
        deposited: dict[str, int] = {}
        for agent in self.constituents:
            d = api.world.deposited_between(agent, start, tick)
            deposited[agent] = d
            total = pre.get(agent, 0)
            percents[agent] = round(100.0 * d / total, 4) if total else 0.0
        api.log(
            tick,
            self.manager,
            "governance",
            "action",
            {
                "action": "tax_season_end",
                "season": season,
                "rate": self.season_rates.get(season, self.constitution.tax_rate),
                "pre_totals": pre,
                "deposited": deposited,
                "percents": percents,
            },
        )

    def _agent_prompt_parts(self, agent: str, api: "EngineApi") -> dict[str, str]:
        snap = api.snapshot(agent)
        profiles = sorted(snap.social_profiles.values(), key=lambda p: (-p.last_updated, p.target))
        notes = "\n".join(
            f"{p.target}: {p.summary} (sentiment {p.sentiment:.1f})" for p in profiles if p.summary
        )
        workmem = "\n".join(p.describe() for p in snap.working_memory[-10:])
        return {
            "name": snap.identity.name,
            "game_env": "You live in a small survival village with a community chest.",
            "summary": notes,
            "trait": "\n".join(snap.traits),
            "game_state": "",
            "parent_goal": snap.community_goal or "thrive with the village",
            "workmem": workmem,
        }

    def _collect_feedback(self, tick: int, api: "EngineApi") -> None:
        self.feedback.clear()
        for agent in sorted(self.constituents + self.influencers):
            parts = self._agent_prompt_parts(agent, api)
            parts["game_state"] = "A constitutional feedback round is open."
            prompt = templates.fill(
                "constitutional_feedback", constitution=self.constitution.text, **parts
            )
            try:
                completion = api.lm_complete(agent, "constitutional_feedback", prompt, tick, "governance")
            except LmError as err:
                api.log(tick, agent, "governance", "fault", {"error": f"feedback lm failure: {err}"})
                continue
            text = completion.split("**********")[0].strip()
            if text:
                self.feedback.append((agent, text))
        self._store("feedback.jsonl", [{"agent": a, "text": t} for a, t in self.feedback])
        api.log(
            tick,
            self.manager,
            "governance",
            "action",
            {"action": "feedback_collected", "count": len(self.feedback)},
        )

    def _create_amendments(self, tick: int, api: "EngineApi") -> None:
        joined = "\n\n".join(f"{agent}: {text}" for agent, text in self.feedback)
        prompt = templates.fill(
            "amendment_creation", constitution=self.constitution.text, feedback=joined
        )
        try:
            completion = api.lm_complete(
                self.manager, "amendment_creation", prompt, tick, "governance"
            )
            self.amendments = parse_amendments(completion)
        except LmError as err:
            api.log(
                tick, self.manager, "governance", "fault", {"error": f"synthesis lm failure: {err}"}
            )
            self.amendments = []
        if not self.amendments:
            self.aborted = True
            api.log(
                tick,
                self.manager,
                "governance",
                "fault",
                {"error": "no parseable amendments; amendment phase aborts"},
            )
        api.log(
            tick,
            self.manager,
            "governance",
            "action",
            {
                "action": "amendments_created",
                "aborted": self.aborted,
                "amendments": [a.text for a in self.amendments],
            },
        )

    def _cast_votes(self, tick: int, api: "EngineApi") -> None:
        self.ballots = []
        proposals = "\n".join(f"{i + 1}. {a.text}" for i, a in enumerate(self.amendments))
        for agent in sorted(self.constituents):
            if self.aborted:
                break
            parts = self._agent_prompt_parts(agent, api)
            parts["game_state"] = "A constitutional vote is open."
            prompt = templates.fill(
                "amendment_voting",
                constitution=self.constitution.text,
                amendment_proposals=proposals,
                **parts,
            )
            try:
                completion = api.lm_complete(agent, "amendment_voting", prompt, tick, "governance")
                ballot = parse_ballot(agent, completion, len(self.amendments))
            except LmError:
                ballot = Ballot(
                    voter=agent, votes=("abstain",) * len(self.amendments), parse_fault=True
                )
            self.ballots.append(ballot)
            api.log(
                tick,
                agent,
                "governance",
                "vote",
                {"votes": list(ballot.votes), "parse_fault": ballot.parse_fault},
            )
        self._store(
            "ballots.jsonl",
            [{"voter": b.voter, "votes": list(b.votes), "parse_fault": b.parse_fault}
             for b in self.ballots],
        )
        api.log(
            tick,
            self.manager,
            "governance",
            "action",
            {"action": "voting_held", "aborted": self.aborted, "ballots": len(self.ballots)},
        )

    def _tally(self, tick: int, api: "EngineApi") -> None:
        n = len(self.amendments)
        flags = tally(self.ballots, n) if not self.aborted else []
        self.passed = [a for a, ok in zip(self.amendments, flags) if ok]
        if self.lm_tally and not self.aborted:
            self._check_lm_tally(tick, api, flags)
        api.log(
            tick,
            self.manager,
            "governance",
            "action",
            {
                "action": "votes_tallied",
                "aborted": self.aborted,
                "passed": [a.text for a in self.passed],
                "counts": [
                    {
                        "yes": sum(1 for b in self.ballots if b.votes[i] == "yes"),
                        "no": sum(1 for b in self.ballots if b.votes[i] == "no"),
                        "abstain": sum(1 for b in self.ballots if b.votes[i] == "abstain"),
                    }
                    for i in range(n)
                ],
            },
        )

    def _check_lm_tally(self, tick: int, api: "EngineApi", flags: list[bool]) -> None:
        results = ", ".join("yes" if ok else "no" for ok in flags)
        listing = "\n".join(f"{i + 1}. {a.text}" for i, a in enumerate(self.amendments))
        prompt = templates.fill("tally", election_results=results, parsed_amendments=listing)
        try:
            completion = api.lm_complete(self.manager, "tally", prompt, tick, "governance")
        except LmError:
            return
        for a, ok in zip(self.amendments, flags):
            if ok and a.text not in completion:
                api.log(
                    tick,
                    self.manager,
                    "governance",
                    "fault",
                    {"error": "lm tally disagrees with the deterministic count"},
                )
                return

    def _distribute(self, tick: int, api: "EngineApi") -> None:
        fault = None
        if self.frozen:
            api.log(
                tick,
                self.manager,
                "governance",
                "action",
                {
                    "action": "constitution_distributed",
                    "frozen": True,
                    "version": self.constitution.version,
                    "rate": self.constitution.tax_rate,
                },
            )
        else:
            self.constitution, fault = apply_amendments(self.constitution, self.passed)
            if fault:
                api.log(tick, self.manager, "governance", "fault", {"error": fault})
            self._write_constitution()
            api.log(
                tick,
                self.manager,
                "governance",
                "action",
                {
                    "action": "constitution_distributed",
                    "frozen": False,
                    "version": self.constitution.version,
                    "rate": self.constitution.tax_rate,
                },
            )
        for agent in sorted(self.constituents + self.influencers):
            percepts = api.world.broadcast_signal(
                [agent],
                {
                    "signal": "constitution",
                    "version": self.constitution.version,
                    "rate": self.constitution.tax_rate,
                    "text": self.constitution.text,
                },
                tick,
            )
            api.push_percepts(agent, [percepts[agent]], tick)

    # -- storage -----------------------------------------------------------------

    def _store(self, name: str, rows: list[dict[str, Any]]) -> None:
        if self.out_dir is None:
            return
        with (self.out_dir / name).open("a", encoding="utf-8") as fh:
            for row in rows:
                fh.write(json.dumps(row, sort_keys=True) + "\n")

    def _write_constitution(self) -> None:
        if self.out_dir is None:
            return
        path = self.out_dir / "constitutions" / f"v{self.constitution.version}.txt"
        path.write_text(self.constitution.text, encoding="utf-8")
