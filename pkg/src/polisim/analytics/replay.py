"""Replay verification: re-derive world state from the log and check invariants.

Used by the ``replay`` CLI subcommand and by acceptance to prove tech-tree
grounding (no craft success without prerequisites) and conservation.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from ..engine import SimulationConfig
from ..events import Event
from ..techtree import TechTree


@dataclass
class ReplayReport:
    violations: list[str] = field(default_factory=list)
    craft_checked: int = 0
    final_inventories: dict[str, dict[str, int]] = field(default_factory=dict)
    final_chests: dict[str, dict[str, int]] = field(default_factory=dict)
    first_acquired: dict[str, dict[str, int]] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.violations


def verify(
    events: Iterable[Event],
    config: SimulationConfig,
    tree: TechTree | None = None,
) -> ReplayReport:
    if tree is None:
        tree = TechTree.shipped()
    report = ReplayReport()
    inv: dict[str, dict[str, int]] = {
        a.name: {k: int(v) for k, v in dict(a.inventory).items()} for a in config.agents
    }
    chests: dict[str, dict[str, int]] = {c.name: {} for c in config.world.chests}
    ever_held: dict[str, set[str]] = {a: {k for k, v in d.items() if v > 0} for a, d in inv.items()}
    first_acquired: dict[str, dict[str, int]] = {
        a: {k: 0 for k, v in d.items() if v > 0} for a, d in inv.items()
    }
    pos_traces: dict[str, list[tuple[int, float, float]]] = {
        a.name: [(0, a.spawn_location[0], a.spawn_location[2])] for a in config.agents
    }
    utterance_checks: list[tuple[int, str, float, float, list[str]]] = []
    decision_versions: dict[str, int] = {}
    unique_counts: dict[str, int] = {a: len(s) for a, s in ever_held.items()}

    def grand_total() -> int:
        agents_total = sum(sum(d.values()) for d in inv.values())
        chest_total = sum(sum(d.values()) for d in chests.values())
        return agents_total + chest_total

    def apply_deltas(agent: str, deltas: dict[str, int], tick: int, where: str) -> None:
        d = inv.setdefault(agent, {})
        for item, delta in deltas.items():
            d[item] = d.get(item, 0) + int(delta)
            if d[item] < 0:
                report.violations.append(
                    f"t{tick}: {where}: inventory of {agent}:{item} went negative"
                )
                d[item] = 0
            if delta > 0 and item not in ever_held[agent]:
                ever_held[agent].add(item)
                first_acquired[agent][item] = tick

    for ev in events:
        if ev.kind == "action":
            p = ev.payload
            if "x" in p and "z" in p:
                pos_traces.setdefault(ev.agent, []).append((ev.tick, p["x"], p["z"]))
            status = p.get("status")
            kind = p.get("kind")
            if status != "succeeded":
                continue
            if kind == "craft":
                report.craft_checked += 1
                item = p.get("args", {}).get("item")
                recipe = tree.recipes.get(item)
                if recipe is None:
                    report.violations.append(f"t{ev.tick}: craft of {item} with no recipe")
                    continue
                have = inv.get(ev.agent, {})
                for ing, count in recipe.ingredients.items():
                    if have.get(ing, 0) < count:
                        report.violations.append(
                            f"t{ev.tick}: {ev.agent} crafted {item} lacking {count} {ing}"
                        )
                if recipe.station and have.get(recipe.station, 0) < 1:
                    report.violations.append(
                        f"t{ev.tick}: {ev.agent} crafted {item} without {recipe.station}"
                    )
                apply_deltas(ev.agent, p.get("deltas", {}), ev.tick, "craft")
            elif kind == "gather":
                apply_deltas(ev.agent, p.get("deltas", {}), ev.tick, "gather")
            elif kind == "give":
                before = grand_total()
                item, count, target = p.get("item"), int(p.get("count", 0)), p.get("target")
                apply_deltas(ev.agent, {item: -count}, ev.tick, "give")
                apply_deltas(target, {item: count}, ev.tick, "give")
                if grand_total() != before:
                    report.violations.append(f"t{ev.tick}: give did not conserve items")
            elif kind == "deposit":
                items = p.get("args", {}).get("items", {})
                moved = {k: int(v) for k, v in items.items()}
                held = inv.get(ev.agent, {})
                moved = {k: min(v, held.get(k, 0)) for k, v in moved.items()}
                chest = p.get("chest")
                before = grand_total()
                apply_deltas(ev.agent, {k: -v for k, v in moved.items()}, ev.tick, "deposit")
                target_chest = chests.setdefault(chest or "community", {})
                for k, v in moved.items():
                    target_chest[k] = target_chest.get(k, 0) + v
                if grand_total() != before:
                    report.violations.append(f"t{ev.tick}: deposit did not conserve items")
        elif ev.kind == "commit":
            p = ev.payload
            if "position" in p:
                x, z = p["position"]
                pos_traces.setdefault(ev.agent, []).append((ev.tick, x, z))
            if "decision" in p:
                v = p["decision"]["version"]
                if v <= decision_versions.get(ev.agent, 0):
                    report.violations.append(
                        f"t{ev.tick}: decision version {v} for {ev.agent} not increasing"
                    )
                decision_versions[ev.agent] = v
            if "profiles" in p:
                for target, prof in p["profiles"].items():
                    s = prof["sentiment"]
                    if not 0.0 <= s <= 10.0:
                        report.violations.append(
                            f"t{ev.tick}: sentiment {s} for {ev.agent}->{target} out of bounds"
                        )
        elif ev.kind == "lm_call":
            p = ev.payload
            if "digest_chars" in p and p["digest_chars"] > p.get("digest_budget", 10**9):
                report.violations.append(
                    f"t{ev.tick}: digest of {p['digest_chars']} chars exceeds budget"
                )
        elif ev.kind == "utterance":
            p = ev.payload
            utterance_checks.append(
                (ev.tick, ev.agent, p.get("x", 0.0), p.get("z", 0.0),
                 list(p.get("recipients", ())))
            )

        # unique-item monotonicity
        if ev.kind == "action":
            n = len(ever_held.get(ev.agent, ()))
            if n < unique_counts.get(ev.agent, 0):
                report.violations.append(f"t{ev.tick}: unique item count decreased for {ev.agent}")
            unique_counts[ev.agent] = n

    # Chat locality, second pass: deliveries use same-tick positions (moves
    # resolve before chat within a world step, so position commits of the
    # same tick are authoritative).
    radius2 = config.world.hearing_radius**2 + 1e-6
    for tick, sender, sx, sz, recipients in utterance_checks:
        for hearer in recipients:
            trace = pos_traces.get(hearer)
            if not trace:
                continue
            hx, hz = _position_at(trace, tick)
            if (hx - sx) ** 2 + (hz - sz) ** 2 > radius2:
                report.violations.append(
                    f"t{tick}: {hearer} heard {sender} beyond hearing radius"
                )

    report.final_inventories = {a: {k: v for k, v in sorted(d.items()) if v > 0} for a, d in inv.items()}
    report.final_chests = {c: dict(sorted(d.items())) for c, d in chests.items()}
    report.first_acquired = first_acquired
    return report


def _position_at(trace: list[tuple[int, float, float]], tick: int) -> tuple[float, float]:
    x, z = trace[0][1], trace[0][2]
    for t, tx, tz in trace:
        if t > tick:
            break
        x, z = tx, tz
    return x, z


def iron_before_diamond(report: ReplayReport) -> bool:
    """True when every agent that acquired a diamond during the run got an
    iron pickaxe strictly earlier. Spawn inventories (tick 0) are exempt:
    some protocols hand out diamonds at spawn."""
    for agent, firsts in report.first_acquired.items():
        if firsts.get("diamond", 0) > 0:
            if "iron_pickaxe" not in firsts:
                return False
            if firsts["iron_pickaxe"] >= firsts["diamond"]:
                return False
    return True
