"""Controller decision wire format and the expected-outcome predicate grammar.

Decisions are one line: intent, space-separated arguments, optional
``-- rationale`` tail. Expected outcomes are a tiny predicate language over
inventory deltas and position, evaluated by the action-awareness module:

    inventory gains >= N ITEM
    inventory loses >= N [ITEM|items]
    position within R of X,Z
    action completes
"""

from __future__ import annotations

import re
from typing import Any, Iterable

from .types import INTENTS, INVENTORY_DELTA, Percept, Position


class ParseError(Exception):
    pass


def parse_decision(text: str) -> tuple[str, dict[str, Any], str]:
    """Returns (intent, intent_args, rationale); raises ParseError."""
    text = text.strip()
    if not text:
        raise ParseError("empty completion")
    head, _, rationale = text.partition("--")
    tokens = head.split()
    if not tokens:
        raise ParseError("no intent token")
    intent = tokens[0].lower().strip(".,:;")
    if intent not in INTENTS:
        raise ParseError(f"unknown intent {intent!r}")
    args = tokens[1:]
    try:
        parsed = _parse_args(intent, args)
    except (IndexError, ValueError) as err:
        raise ParseError(f"bad arguments for {intent}: {args}") from err
    return intent, parsed, rationale.strip()


def _parse_args(intent: str, args: list[str]) -> dict[str, Any]:
    if intent == "gather":
        return {"item": args[0]}
    if intent == "craft":
        return {"item": args[0]}
    if intent == "give":
        return {"item": args[0], "count": int(args[1]), "target": args[2]}
    if intent == "deposit":
        return {"rate": float(args[0])} if args else {"rate": None}
    if intent == "converse":
        return {"target": args[0]}
    if intent == "travel":
        return {"x": float(args[0]), "z": float(args[1])}
    return {}  # explore, idle


def format_decision(intent: str, args: dict[str, Any], rationale: str = "") -> str:
    parts = [intent]
    if intent in ("gather", "craft"):
        parts.append(str(args["item"]))
    elif intent == "give":
        parts += [str(args["item"]), str(args["count"]), str(args["target"])]
    elif intent == "deposit" and args.get("rate") is not None:
        parts.append(str(args["rate"]))
    elif intent == "converse":
        parts.append(str(args["target"]))
    elif intent == "travel":
        parts += [str(args["x"]), str(args["z"])]
    line = " ".join(parts)
    return f"{line} -- {rationale}" if rationale else line


_GAINS = re.compile(r"^inventory gains >= (\d+) (\S+)$")
_LOSES = re.compile(r"^inventory loses >= (\d+) (\S+)$")
_WITHIN = re.compile(r"^position within (\d+(?:\.\d+)?) of (-?\d+(?:\.\d+)?),(-?\d+(?:\.\d+)?)$")
COMPLETES = "action completes"


def evaluate_expected(
    expected: str,
    percepts: Iterable[Percept],
    position: Position,
    *,
    since_tick: int,
) -> bool | None:
    """True/False if the predicate is decidable from evidence, None if unknown.

    Inventory predicates sum inventory-delta percepts newer than
    ``since_tick``; position predicates check the current position.
    """
    expected = expected.strip()
    if expected == COMPLETES:
        return None  # decided by the terminal world percept alone

    m = _GAINS.match(expected)
    if m:
        need, item = int(m.group(1)), m.group(2)
        gained = _sum_deltas(percepts, since_tick, item, positive=True)
        return gained >= need if gained else False

    m = _LOSES.match(expected)
    if m:
        need, item = int(m.group(1)), m.group(2)
        if item == "items":
            lost = _sum_deltas(percepts, since_tick, None, positive=False)
        else:
            lost = _sum_deltas(percepts, since_tick, item, positive=False)
        return lost >= need if lost else False

    m = _WITHIN.match(expected)
    if m:
        r, x, z = float(m.group(1)), float(m.group(2)), float(m.group(3))
        return (position.x - x) ** 2 + (position.z - z) ** 2 <= r**2

    raise ParseError(f"unknown expected-outcome predicate {expected!r}")


def _sum_deltas(
    percepts: Iterable[Percept], since_tick: int, item: str | None, *, positive: bool
) -> int:
    total = 0
    for p in percepts:
        if p.source != INVENTORY_DELTA or p.tick < since_tick:
            continue
        for name, d in p.content.get("deltas", {}).items():
            if item is not None and name != item:
                continue
            if positive and d > 0:
                total += d
            elif not positive and d < 0:
                total += -d
    return total
