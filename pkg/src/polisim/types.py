"""Domain types shared across the simulation.

Everything an agent "is" lives in one snapshot value per agent; concurrent
modules read snapshots and submit write sets (see ``state``). All types here
are plain data; commits never mutate them in place, so any snapshot that has
been handed out is frozen forever.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Any, Mapping

# Percept sources.
VISION = "vision"
HEARING = "hearing"
INVENTORY_DELTA = "inventory-delta"
ACTION_OUTCOME = "action-outcome"
BROADCAST_SIGNAL = "broadcast-signal"
PERCEPT_SOURCES = frozenset(
    {VISION, HEARING, INVENTORY_DELTA, ACTION_OUTCOME, BROADCAST_SIGNAL}
)

# Memory entry kinds.
MEMORY_KINDS = frozenset({"observation", "conversation", "reflection", "outcome"})

# Closed intent set for controller decisions.
INTENTS = ("gather", "craft", "converse", "give", "deposit", "travel", "explore", "idle")

# Action record status.
PENDING = "pending"
SUCCEEDED = "succeeded"
FAILED = "failed"

DEFAULT_WORKING_MEMORY_CAPACITY = 32
DEFAULT_SUMMARY_BUDGET = 512


@dataclass(frozen=True)
class AgentId:
    """Stable identity; ``id`` keys every map and log line, ``name`` displays."""

    id: str
    name: str

    @classmethod
    def of(cls, name: str) -> "AgentId":
        return cls(id=name, name=name)

    def __str__(self) -> str:
        return self.id


@dataclass(frozen=True)
class Position:
    x: float
    y: float
    z: float

    def distance_to(self, other: "Position") -> float:
        # Planar distance; y is elevation metadata only.
        return ((self.x - other.x) ** 2 + (self.z - other.z) ** 2) ** 0.5


@dataclass(frozen=True)
class Percept:
    tick: int
    source: str
    content: Mapping[str, Any]

    def describe(self) -> str:
        """One-line rendering used by digests and prompts."""
        c = self.content
        if self.source == HEARING:
            return f"[t{self.tick}] {c.get('speaker')}: {c.get('text')}"
        if self.source == ACTION_OUTCOME:
            return (
                f"[t{self.tick}] action {c.get('action')} -> {c.get('status')}"
                + (f" ({c.get('detail')})" if c.get("detail") else "")
            )
        if self.source == INVENTORY_DELTA:
            deltas = ", ".join(f"{k}{v:+d}" for k, v in sorted(c.get("deltas", {}).items()))
            return f"[t{self.tick}] inventory: {deltas}"
        if self.source == BROADCAST_SIGNAL:
            extra = " ".join(f"{k}={c[k]}" for k in sorted(c) if k != "signal")
            return f"[t{self.tick}] signal {c.get('signal')} {extra}".rstrip()
        return f"[t{self.tick}] {self.source}: {c}"


@dataclass(frozen=True)
class MemoryEntry:
    tick: int
    kind: str
    content: str


@dataclass(frozen=True)
class SocialProfile:
    target: str
    sentiment: float
    summary: str
    last_updated: int


@dataclass(frozen=True)
class Decision:
    version: int
    intent: str
    intent_args: Mapping[str, Any]
    rationale: str
    issued_tick: int

    def describe(self) -> str:
        args = " ".join(str(self.intent_args[k]) for k in sorted(self.intent_args))
        body = f"{self.intent} {args}".strip()
        return f"{body} (v{self.version})"


@dataclass(frozen=True)
class ActionSpec:
    """A concrete world action. ``id`` makes outcome percepts attributable."""

    kind: str  # gather | craft | move_to | approach | give | deposit | explore
    args: Mapping[str, Any]
    id: str = ""

    def describe(self) -> str:
        """Readable label; sub-goaled actions carry their root target."""
        a = self.args
        root = a.get("root")
        tag = f" [for {root}]" if root and root != a.get("item") else ""
        if self.kind in ("gather", "craft"):
            return f"{self.kind} {a['item']}{tag}"
        if self.kind == "move_to":
            return f"move_to {a['x']:.0f},{a['z']:.0f}{tag}"
        if self.kind == "approach":
            return f"approach {a['target']}{tag}"
        if self.kind == "give":
            return f"give {a['item']} x{a['count']} to {a['target']}"
        if self.kind == "deposit":
            total = sum(a.get("items", {}).values())
            rate = f" (rate {a['rate']})" if "rate" in a else ""
            return f"deposit {total} items{rate}"
        return f"{self.kind}{tag}"


@dataclass(frozen=True)
class ActionRecord:
    action: ActionSpec
    expected_outcome: str
    observed_outcome: str | None
    status: str  # pending | succeeded | failed
    submitted_tick: int
    deadline_tick: int
    decision_version: int


@dataclass(frozen=True)
class StateSnapshot:
    """Immutable, internally consistent view of one agent's state.

    ``version`` counts committed write sets; ``tick`` is the commit tick of
    the newest write.
    """

    identity: AgentId
    traits: tuple[str, ...]
    community_goal: str
    location_memories: tuple[str, ...]
    working_memory: tuple[Percept, ...]
    long_term_memory: tuple[MemoryEntry, ...]
    social_profiles: Mapping[str, SocialProfile]
    social_goal: str | None
    current_decision: Decision | None
    inventory: Mapping[str, int]
    position: Position
    pending_action: ActionRecord | None
    version: int = 0
    tick: int = 0

    def to_json(self) -> dict[str, Any]:
        """Documented dump shape; field names match the domain types."""
        return {
            "identity": {"id": self.identity.id, "name": self.identity.name},
            "traits": list(self.traits),
            "community_goal": self.community_goal,
            "location_memories": list(self.location_memories),
            "working_memory": [
                {"tick": p.tick, "source": p.source, "content": dict(p.content)}
                for p in self.working_memory
            ],
            "long_term_memory": [
                {"tick": m.tick, "kind": m.kind, "content": m.content}
                for m in self.long_term_memory
            ],
            "social_profiles": {
                k: {
                    "target": p.target,
                    "sentiment": p.sentiment,
                    "summary": p.summary,
                    "last_updated": p.last_updated,
                }
                for k, p in sorted(self.social_profiles.items())
            },
            "social_goal": self.social_goal,
            "current_decision": None
            if self.current_decision is None
            else {
                "version": self.current_decision.version,
                "intent": self.current_decision.intent,
                "intent_args": dict(self.current_decision.intent_args),
                "rationale": self.current_decision.rationale,
                "issued_tick": self.current_decision.issued_tick,
            },
            "inventory": dict(sorted(self.inventory.items())),
            "position": {"x": self.position.x, "y": self.position.y, "z": self.position.z},
            "pending_action": None
            if self.pending_action is None
            else {
                "action": {
                    "kind": self.pending_action.action.kind,
                    "args": dict(self.pending_action.action.args),
                    "id": self.pending_action.action.id,
                },
                "expected_outcome": self.pending_action.expected_outcome,
                "observed_outcome": self.pending_action.observed_outcome,
                "status": self.pending_action.status,
                "submitted_tick": self.pending_action.submitted_tick,
                "deadline_tick": self.pending_action.deadline_tick,
                "decision_version": self.pending_action.decision_version,
            },
            "version": self.version,
            "tick": self.tick,
        }

    def heard(self, *, since: int | None = None) -> tuple[Percept, ...]:
        """Hearing percepts, oldest first, optionally newer than ``since``."""
        out = [p for p in self.working_memory if p.source == HEARING]
        if since is not None:
            out = [p for p in out if p.tick > since]
        return tuple(out)


def initial_snapshot(
    identity: AgentId,
    *,
    traits: tuple[str, ...] = (),
    community_goal: str = "",
    location_memories: tuple[str, ...] = (),
    inventory: Mapping[str, int] | None = None,
    position: Position = Position(0.0, 0.0, 0.0),
) -> StateSnapshot:
    return StateSnapshot(
        identity=identity,
        traits=tuple(traits),
        community_goal=community_goal,
        location_memories=tuple(location_memories),
        working_memory=(),
        long_term_memory=(),
        social_profiles={},
        social_goal=None,
        current_decision=None,
        inventory=dict(inventory or {}),
        position=position,
        pending_action=None,
        version=0,
        tick=0,
    )


@dataclass
class WriteSet:
    """One module's atomic batch of writes.

    ``sets`` replace a field, ``appends`` extend list-like fields,
    ``puts`` merge keyed entries into mapping fields.
    """

    module: str
    sets: dict[str, Any] = field(default_factory=dict)
    appends: dict[str, tuple] = field(default_factory=dict)
    puts: dict[str, dict[str, Any]] = field(default_factory=dict)

    def touched_fields(self) -> set[str]:
        return set(self.sets) | set(self.appends) | set(self.puts)

    def is_empty(self) -> bool:
        return not (self.sets or self.appends or self.puts)


__all__ = [
    "AgentId",
    "Position",
    "Percept",
    "MemoryEntry",
    "SocialProfile",
    "Decision",
    "ActionSpec",
    "ActionRecord",
    "StateSnapshot",
    "WriteSet",
    "initial_snapshot",
    "replace",
    "INTENTS",
    "PERCEPT_SOURCES",
    "MEMORY_KINDS",
    "VISION",
    "HEARING",
    "INVENTORY_DELTA",
    "ACTION_OUTCOME",
    "BROADCAST_SIGNAL",
    "PENDING",
    "SUCCEEDED",
    "FAILED",
    "DEFAULT_WORKING_MEMORY_CAPACITY",
    "DEFAULT_SUMMARY_BUDGET",
]
