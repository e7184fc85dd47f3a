from __future__ import annotations

import threading
import zlib

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polisim.state import (
    DEFAULT_OWNERSHIP,
    OwnershipError,
    StateStore,
    ValidationError,
)
from polisim.types import (
    AgentId,
    Decision,
    MemoryEntry,
    Percept,
    Position,
    SocialProfile,
    WriteSet,
    initial_snapshot,
)


def make_store(**kw) -> StateStore:
    snap = initial_snapshot(
        AgentId.of("Ada"),
        inventory={"log": 3},
        position=Position(1.0, 64.0, 2.0),
    )
    return StateStore(snap, **kw)


def decision(version: int, intent: str = "gather") -> Decision:
    return Decision(version=version, intent=intent, intent_args={"item": "log"},
                    rationale="", issued_tick=0)


def test_snapshot_copies_inventory():
    store = make_store()
    assert dict(store.snapshot().inventory) == {"log": 3}


def test_snapshot_unchanged_by_later_commit():
    store = make_store()
    before = store.snapshot()
    store.commit(WriteSet(module="world", puts={"inventory": {"log": 7}}), tick=1)
    assert before.inventory["log"] == 3
    assert store.snapshot().inventory["log"] == 7
    assert store.snapshot().version == before.version + 1


def test_commit_social_goal_visible():
    store = make_store()
    store.commit(WriteSet(module="goal-generation", sets={"social_goal": "farm wheat"}), tick=2)
    assert store.snapshot().social_goal == "farm wheat"


def test_ownership_violation_rejected_whole():
    store = make_store()
    ws = WriteSet(module="talking", sets={"social_goal": "nope"})
    with pytest.raises(OwnershipError):
        store.commit(ws, tick=1)
    assert store.snapshot().social_goal is None


def test_unknown_field_rejected():
    store = make_store()
    with pytest.raises(OwnershipError):
        store.commit(WriteSet(module="world", sets={"hit_points": 3}), tick=1)


def test_stale_decision_write_dropped_silently():
    store = make_store()
    store.commit(
        WriteSet(module="cognitive-controller", sets={"current_decision": decision(7)}), tick=1
    )
    result = store.commit(
        WriteSet(module="cognitive-controller", sets={"current_decision": decision(5)}), tick=2
    )
    assert store.snapshot().current_decision.version == 7
    assert result.warnings  # logged, not raised
    assert result.version == store.snapshot().version  # commit still counted


def test_decision_versions_strictly_increase():
    store = make_store()
    seen = []
    for v in (1, 2, 2, 3, 1, 4):
        store.commit(
            WriteSet(module="cognitive-controller", sets={"current_decision": decision(v)}),
            tick=v,
        )
        seen.append(store.snapshot().current_decision.version)
    assert seen == [1, 2, 2, 3, 3, 4]
    assert all(b >= a for a, b in zip(seen, seen[1:]))


def test_working_memory_fifo_eviction():
    store = make_store(working_memory_capacity=4)
    for i in range(7):
        store.commit(
            WriteSet(
                module="world",
                appends={"working_memory": (Percept(tick=i, source="vision", content={"i": i}),)},
            ),
            tick=i,
        )
    wm = store.snapshot().working_memory
    assert len(wm) == 4
    assert [p.tick for p in wm] == [3, 4, 5, 6]


def test_sentiment_bounds_enforced():
    store = make_store()
    bad = SocialProfile(target="Bo", sentiment=11.0, summary="x", last_updated=0)
    with pytest.raises(ValidationError):
        store.commit(
            WriteSet(module="social-awareness", puts={"social_profiles": {"Bo": bad}}), tick=1
        )


def test_own_profile_rejected():
    store = make_store()
    prof = SocialProfile(target="Ada", sentiment=5.0, summary="me", last_updated=0)
    with pytest.raises(ValidationError):
        store.commit(
            WriteSet(module="social-awareness", puts={"social_profiles": {"Ada": prof}}), tick=1
        )


def test_negative_inventory_rejected():
    store = make_store()
    with pytest.raises(ValidationError):
        store.commit(WriteSet(module="world", puts={"inventory": {"log": -1}}), tick=1)


def test_summary_budget_enforced():
    store = make_store(summary_budget=8)
    prof = SocialProfile(target="Bo", sentiment=5.0, summary="x" * 9, last_updated=0)
    with pytest.raises(ValidationError):
        store.commit(
            WriteSet(module="social-awareness", puts={"social_profiles": {"Bo": prof}}), tick=1
        )


def test_memory_kinds_validated():
    store = make_store()
    with pytest.raises(ValidationError):
        store.commit(
            WriteSet(
                module="self-reflection",
                appends={"long_term_memory": (MemoryEntry(tick=0, kind="dream", content="x"),)},
            ),
            tick=1,
        )


def test_state_dump_field_names():
    snap = make_store().snapshot()
    dump = snap.to_json()
    expected = {
        "identity", "traits", "community_goal", "location_memories", "working_memory",
        "long_term_memory", "social_profiles", "social_goal", "current_decision",
        "inventory", "position", "pending_action", "version", "tick",
    }
    assert set(dump) == expected


# -- concurrency --------------------------------------------------------------


def checksum(traits: tuple[str, ...]) -> int:
    return zlib.crc32("|".join(traits).encode())


def test_snapshot_isolation_under_write_burst():
    """Paired counter/checksum fields are updated atomically: no snapshot may
    ever observe a mismatched pair."""
    ownership = dict(DEFAULT_OWNERSHIP)
    ownership["traits"] = frozenset({"writer"})
    ownership["community_goal"] = frozenset({"writer"})
    store = make_store(ownership=ownership)

    stop = threading.Event()
    bad: list[str] = []

    def writer():
        for i in range(3000):
            traits = (f"counter-{i}", f"payload-{i % 7}")
            store.commit(
                WriteSet(
                    module="writer",
                    sets={"traits": traits, "community_goal": str(checksum(traits))},
                ),
                tick=i,
            )
        stop.set()

    def reader():
        while not stop.is_set():
            snap = store.snapshot()
            if snap.version == 0:
                continue
            if str(checksum(snap.traits)) != snap.community_goal:
                bad.append(f"v{snap.version}")

    threads = [threading.Thread(target=writer)] + [threading.Thread(target=reader) for _ in range(2)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert not bad


def test_hundred_concurrent_commits_bump_version_by_hundred():
    ownership = dict(DEFAULT_OWNERSHIP)
    for i in range(100):
        ownership[f"field{i}"] = frozenset()  # unused; modules write social_goal
    ownership["social_goal"] = frozenset({f"m{i}" for i in range(100)})
    store = make_store(ownership=ownership)
    start = store.snapshot().version

    def commit_one(i: int) -> None:
        store.commit(WriteSet(module=f"m{i}", sets={"social_goal": f"goal {i}"}), tick=1)

    threads = [threading.Thread(target=commit_one, args=(i,)) for i in range(100)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert store.snapshot().version == start + 100


@settings(max_examples=50, deadline=None)
@given(
    counts=st.dictionaries(
        st.sampled_from(["log", "stone", "wheat", "stick"]),
        st.integers(min_value=0, max_value=500),
        max_size=4,
    )
)
def test_inventory_commits_roundtrip(counts):
    store = make_store()
    store.commit(WriteSet(module="world", sets={"inventory": dict(counts)}), tick=1)
    assert dict(store.snapshot().inventory) == counts
