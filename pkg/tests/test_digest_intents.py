from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from polisim.digest import make_digest, pack_sections
from polisim.intents import (
    COMPLETES,
    ParseError,
    evaluate_expected,
    format_decision,
    parse_decision,
)
from polisim.types import (
    AgentId,
    Percept,
    Position,
    initial_snapshot,
    replace,
)


def snap_with_speech(text: str):
    base = initial_snapshot(AgentId.of("Ada"))
    heard = Percept(tick=1, source="hearing", content={"speaker": "Bo", "text": text})
    return replace(base, working_memory=(heard,))


def test_speech_included_verbatim_under_large_budget():
    digest = make_digest(snap_with_speech("hello"), budget=1000)
    assert digest.has("speech")
    speech = dict(digest.sections)["speech"]
    assert "hello" in speech
    assert digest.total_content() <= 1000


def test_priority_speech_tail_truncated_when_alone_exceeds_budget():
    digest = pack_sections([("speech", "s" * 500)], budget=256)
    assert digest.has("speech")
    assert dict(digest.sections)["speech"] == "s" * 256
    assert digest.total_content() == 256


def test_six_sections_pack_top_three_plus_truncated_fourth():
    sections = [(label, label[0] * 300) for label in
                ("speech", "goal", "action", "memory", "profiles", "notes")]
    digest = pack_sections(sections, budget=1000)
    labels = [lbl for lbl, _ in digest.sections]
    assert labels == ["speech", "goal", "action", "memory"]
    lengths = [len(c) for _, c in digest.sections]
    assert lengths == [300, 300, 300, 100]
    assert digest.total_content() == 1000


def test_empty_snapshot_yields_empty_digest():
    digest = make_digest(initial_snapshot(AgentId.of("Ada")), budget=500)
    assert digest.sections == ()
    assert digest.render() == ""


def test_minimum_budget_enforced():
    with pytest.raises(ValueError):
        make_digest(initial_snapshot(AgentId.of("Ada")), budget=255)


@settings(max_examples=200, deadline=None)
@given(
    lengths=st.lists(st.integers(min_value=0, max_value=900), min_size=1, max_size=6),
    budget=st.integers(min_value=256, max_value=2500),
)
def test_packing_never_exceeds_budget_and_keeps_speech(lengths, budget):
    labels = ("speech", "goal", "action", "memory", "profiles", "notes")
    sections = [(labels[i], "x" * n) for i, n in enumerate(lengths)]
    digest = pack_sections(sections, budget=budget)
    assert digest.total_content() <= budget
    if lengths[0] > 0:
        assert digest.has("speech")
    # whole-section rule: every non-final included section is complete
    included = list(digest.sections)
    for label, content in included[:-1]:
        original = dict(sections)[label]
        if label not in digest.priority_flags:
            assert content == original


# -- decision wire format -------------------------------------------------------


@pytest.mark.parametrize(
    "text,intent,args",
    [
        ("gather oak_log", "gather", {"item": "oak_log"}),
        ("craft iron_pickaxe -- need tools", "craft", {"item": "iron_pickaxe"}),
        ("give bread 2 Ada", "give", {"item": "bread", "count": 2, "target": "Ada"}),
        ("deposit 0.2", "deposit", {"rate": 0.2}),
        ("converse Bo", "converse", {"target": "Bo"}),
        ("travel 640 420", "travel", {"x": 640.0, "z": 420.0}),
        ("explore", "explore", {}),
        ("idle", "idle", {}),
    ],
)
def test_parse_decision(text, intent, args):
    got_intent, got_args, _ = parse_decision(text)
    assert (got_intent, got_args) == (intent, args)


@pytest.mark.parametrize("bad", ["", "dance", "give bread", "travel here there", "craft"])
def test_parse_decision_rejects(bad):
    with pytest.raises(ParseError):
        parse_decision(bad)


def test_format_parse_roundtrip():
    for text in ("gather wheat", "give bread 2 Ada", "deposit 0.25", "travel 10.0 20.0"):
        intent, args, _ = parse_decision(text)
        again_intent, again_args, _ = parse_decision(format_decision(intent, args))
        assert (again_intent, again_args) == (intent, args)


# -- expected-outcome predicates --------------------------------------------------


def inv_delta(tick, deltas):
    return Percept(tick=tick, source="inventory-delta", content={"deltas": deltas})


def test_gains_predicate():
    percepts = [inv_delta(5, {"log": 2})]
    pos = Position(0, 0, 0)
    assert evaluate_expected("inventory gains >= 1 log", percepts, pos, since_tick=0) is True
    assert evaluate_expected("inventory gains >= 3 log", percepts, pos, since_tick=0) is False
    assert evaluate_expected("inventory gains >= 1 log", percepts, pos, since_tick=6) is False


def test_loses_predicate_counts_any_item():
    percepts = [inv_delta(5, {"log": -2, "stone": -3})]
    pos = Position(0, 0, 0)
    assert evaluate_expected("inventory loses >= 5 items", percepts, pos, since_tick=0) is True
    assert evaluate_expected("inventory loses >= 2 log", percepts, pos, since_tick=0) is True
    assert evaluate_expected("inventory loses >= 6 items", percepts, pos, since_tick=0) is False


def test_position_predicate():
    assert evaluate_expected(
        "position within 3 of 10.0,10.0", [], Position(11.0, 0, 11.0), since_tick=0
    ) is True
    assert evaluate_expected(
        "position within 3 of 10.0,10.0", [], Position(20.0, 0, 10.0), since_tick=0
    ) is False


def test_completes_predicate_is_undecidable():
    assert evaluate_expected(COMPLETES, [], Position(0, 0, 0), since_tick=0) is None


def test_unknown_predicate_raises():
    with pytest.raises(ParseError):
        evaluate_expected("the moon is full", [], Position(0, 0, 0), since_tick=0)
