"""Shared agent state with snapshot/commit semantics.

Each agent has one :class:`StateStore`. Concurrent modules call
:meth:`StateStore.snapshot` (lock-free: snapshots are immutable values and
the current-version reference swap is atomic) and submit :class:`WriteSet`
batches through :meth:`StateStore.commit`, which applies atomically under a
per-agent lock and bumps the version counter by exactly one.

Every field is writable only by its configured writer module(s); a write set
touching a foreign field is rejected whole with :class:`OwnershipError`.
A decision write whose version is not strictly greater than the current one
is dropped silently (with a warning recorded on the result); the rest of the
write set still applies.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, replace

from .types import (
    DEFAULT_SUMMARY_BUDGET,
    DEFAULT_WORKING_MEMORY_CAPACITY,
    MEMORY_KINDS,
    PERCEPT_SOURCES,
    Decision,
    MemoryEntry,
    Percept,
    SocialProfile,
    StateSnapshot,
    WriteSet,
)


class StateError(Exception):
    """Base for state-layer failures."""


class OwnershipError(StateError):
    """A module tried to write a field it does not own."""


class ValidationError(StateError):
    """A write violated a state invariant."""


SETTABLE_FIELDS = frozenset(
    {
        "traits",
        "community_goal",
        "location_memories",
        "social_goal",
        "current_decision",
        "position",
        "pending_action",
        "inventory",
    }
)
APPENDABLE_FIELDS = frozenset({"working_memory", "long_term_memory"})
PUTTABLE_FIELDS = frozenset({"social_profiles", "inventory"})
ALL_FIELDS = SETTABLE_FIELDS | APPENDABLE_FIELDS | PUTTABLE_FIELDS

# field -> writer module names. One writer class per field; the acting class
# (skill-execution + action-awareness) shares pending_action, the memory class
# shares long_term_memory.
DEFAULT_OWNERSHIP: dict[str, frozenset[str]] = {
    "traits": frozenset({"init"}),
    "community_goal": frozenset({"init"}),
    "location_memories": frozenset({"init"}),
    "working_memory": frozenset({"world"}),
    "inventory": frozenset({"world"}),
    "position": frozenset({"world"}),
    "current_decision": frozenset({"cognitive-controller"}),
    "social_goal": frozenset({"goal-generation"}),
    "social_profiles": frozenset({"social-awareness"}),
    "pending_action": frozenset({"skill-execution", "action-awareness"}),
    "long_term_memory": frozenset({"action-awareness", "self-reflection", "basic-memory"}),
}


@dataclass
class CommitResult:
    version: int
    warnings: tuple[str, ...] = ()
    applied_fields: tuple[str, ...] = ()


class StateStore:
    """Versioned holder of one agent's :class:`StateSnapshot`."""

    def __init__(
        self,
        initial: StateSnapshot,
        *,
        ownership: dict[str, frozenset[str]] | None = None,
        working_memory_capacity: int = DEFAULT_WORKING_MEMORY_CAPACITY,
        summary_budget: int = DEFAULT_SUMMARY_BUDGET,
    ) -> None:
        self._snapshot = initial
        self._lock = threading.Lock()
        self.ownership = dict(DEFAULT_OWNERSHIP if ownership is None else ownership)
        self.working_memory_capacity = working_memory_capacity
        self.summary_budget = summary_budget

    @property
    def agent_id(self) -> str:
        return self._snapshot.identity.id

    def snapshot(self) -> StateSnapshot:
        """Latest committed version; safe to hand to any thread."""
        return self._snapshot

    def commit(self, writes: WriteSet, *, tick: int) -> CommitResult:
        """Apply a write set atomically; returns the new version."""
        self._check_ownership(writes)
        with self._lock:
            cur = self._snapshot
            warnings: list[str] = []
            fields: dict = {}

            for name, value in writes.sets.items():
                if name not in SETTABLE_FIELDS:
                    raise ValidationError(f"field {name!r} cannot be set")
                if name == "current_decision":
                    decision = self._validate_decision(value, cur, warnings)
                    if decision is not None:
                        fields[name] = decision
                elif name == "pending_action":
                    fields[name] = value
                elif name == "social_goal":
                    fields[name] = self._validate_social_goal(value)
                elif name == "inventory":
                    fields[name] = self._validate_inventory(dict(value))
                elif name == "position":
                    fields[name] = value
                else:
                    fields[name] = tuple(value) if name in ("traits", "location_memories") else value

            for name, entries in writes.appends.items():
                if name not in APPENDABLE_FIELDS:
                    raise ValidationError(f"field {name!r} cannot be appended to")
                if name == "working_memory":
                    wm = list(cur.working_memory)
                    for p in entries:
                        self._validate_percept(p)
                        wm.append(p)
                    # Bounded FIFO: evict oldest beyond capacity.
                    if len(wm) > self.working_memory_capacity:
                        wm = wm[-self.working_memory_capacity :]
                    fields[name] = tuple(wm)
                else:
                    ltm = list(cur.long_term_memory)
                    for m in entries:
                        self._validate_memory(m, ltm)
                        ltm.append(m)
                    fields[name] = tuple(ltm)

            for name, mapping in writes.puts.items():
                if name not in PUTTABLE_FIELDS:
                    raise ValidationError(f"field {name!r} cannot be merged into")
                if name == "social_profiles":
                    profiles = dict(cur.social_profiles)
                    for key, prof in mapping.items():
                        self._validate_profile(key, prof, cur)
                        profiles[key] = prof
                    fields[name] = profiles
                else:  # inventory merge
                    inv = dict(fields.get("inventory", cur.inventory))
                    for item, count in mapping.items():
                        inv[item] = count
                    fields[name] = self._validate_inventory(inv)

            nxt = replace(cur, version=cur.version + 1, tick=tick, **fields)
            self._snapshot = nxt
            return CommitResult(
                version=nxt.version,
                warnings=tuple(warnings),
                applied_fields=tuple(sorted(fields)),
            )

    # -- validation helpers -------------------------------------------------

    def _check_ownership(self, writes: WriteSet) -> None:
        for name in writes.touched_fields():
            if name not in ALL_FIELDS:
                raise OwnershipError(f"unknown field {name!r}")
            allowed = self.ownership.get(name, frozenset())
            if writes.module not in allowed:
                raise OwnershipError(
                    f"module {writes.module!r} does not own field {name!r} "
                    f"(owners: {sorted(allowed)})"
                )

    def _validate_decision(
        self, value: Decision, cur: StateSnapshot, warnings: list[str]
    ) -> Decision | None:
        if not isinstance(value, Decision):
            raise ValidationError("current_decision must be a Decision")
        current_version = cur.current_decision.version if cur.current_decision else 0
        if value.version <= current_version:
            # Stale broadcast: dropped, the run continues on the newer decision.
            warnings.append(
                f"stale decision write v{value.version} <= current v{current_version}; dropped"
            )
            return None
        return value

    @staticmethod
    def _validate_social_goal(value: str | None) -> str | None:
        if value is None:
            return None
        if not isinstance(value, str) or not value.strip():
            raise ValidationError("social_goal must be a non-empty string or None")
        return value

    @staticmethod
    def _validate_inventory(inv: dict[str, int]) -> dict[str, int]:
        for item, count in inv.items():
            if not isinstance(count, int) or count < 0:
                raise ValidationError(f"inventory count for {item!r} must be a non-negative int")
        return inv

    @staticmethod
    def _validate_percept(p: Percept) -> None:
        if p.source not in PERCEPT_SOURCES:
            raise ValidationError(f"unknown percept source {p.source!r}")

    @staticmethod
    def _validate_memory(m: MemoryEntry, existing: list[MemoryEntry]) -> None:
        if m.kind not in MEMORY_KINDS:
            raise ValidationError(f"unknown memory kind {m.kind!r}")
        if existing and m.tick < existing[-1].tick:
            raise ValidationError("long_term_memory must stay ordered by tick")

    def _validate_profile(self, key: str, prof: SocialProfile, cur: StateSnapshot) -> None:
        if key == cur.identity.id:
            raise ValidationError("social_profiles must not contain the agent's own id")
        if not 0.0 <= prof.sentiment <= 10.0:
            raise ValidationError(f"sentiment {prof.sentiment} outside [0, 10]")
        if len(prof.summary) > self.summary_budget:
            raise ValidationError(
                f"profile summary length {len(prof.summary)} exceeds budget {self.summary_budget}"
            )


def ownership_from_module_specs(specs) -> dict[str, frozenset[str]]:
    """Build a field->writers map from module specs plus the fixed world/init writers."""
    owners: dict[str, set[str]] = {name: set(ws) for name, ws in DEFAULT_OWNERSHIP.items()}
    for spec in specs:
        for field_name in spec.owner_fields:
            if field_name not in ALL_FIELDS:
                raise ValidationError(f"module {spec.name!r} claims unknown field {field_name!r}")
            owners.setdefault(field_name, set()).add(spec.name)
    return {name: frozenset(ws) for name, ws in owners.items()}
