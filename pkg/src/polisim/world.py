"""Deterministic grid world: resources, crafting, movement, positional chat.

The world advances once per tick. Action submissions queue and resolve in
deterministic order (agent id); multi-tick actions (travel, gather across the
map) stay active until they complete or fail. Every terminal outcome is
emitted as percepts to the actor (and the recipient, for ``give``); failures
name the missing prerequisite and never raise.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .techtree import TechTree, holds_tool
from .types import (
    ACTION_OUTCOME,
    BROADCAST_SIGNAL,
    FAILED,
    HEARING,
    INVENTORY_DELTA,
    SUCCEEDED,
    ActionSpec,
    Percept,
    Position,
)


@dataclass(frozen=True)
class NodeConfig:
    kind: str
    x: float
    z: float


@dataclass(frozen=True)
class TownConfig:
    name: str
    x: float
    z: float
    radius: float = 50.0


@dataclass(frozen=True)
class ChestConfig:
    name: str
    x: float
    z: float
    community: bool = True


@dataclass(frozen=True)
class WorldConfig:
    x_min: float = 0.0
    x_max: float = 1000.0
    z_min: float = 0.0
    z_max: float = 1000.0
    hearing_radius: float = 30.0
    reach: float = 3.0
    speed: float = 4.0
    respawn_ticks: int = 60
    nodes: tuple[NodeConfig, ...] = ()
    chests: tuple[ChestConfig, ...] = ()
    towns: tuple[TownConfig, ...] = ()

    def contains(self, x: float, z: float) -> bool:
        return self.x_min <= x <= self.x_max and self.z_min <= z <= self.z_max

    def to_dict(self) -> dict[str, Any]:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "z_min": self.z_min,
            "z_max": self.z_max,
            "hearing_radius": self.hearing_radius,
            "reach": self.reach,
            "speed": self.speed,
            "respawn_ticks": self.respawn_ticks,
            "nodes": [{"kind": n.kind, "x": n.x, "z": n.z} for n in self.nodes],
            "chests": [
                {"name": c.name, "x": c.x, "z": c.z, "community": c.community}
                for c in self.chests
            ],
            "towns": [
                {"name": t.name, "x": t.x, "z": t.z, "radius": t.radius} for t in self.towns
            ],
        }


@dataclass
class _Node:
    kind: str
    x: float
    z: float
    respawn_at: int = 0  # available when tick >= respawn_at


@dataclass
class _Active:
    spec: ActionSpec
    submitted: int
    target_node: int | None = None  # index into nodes
    target_xz: tuple[float, float] | None = None


@dataclass
class WorldEvent:
    agent: str
    kind: str  # action | utterance | deposit
    payload: dict[str, Any]


@dataclass
class StepResult:
    events: list[WorldEvent] = field(default_factory=list)
    percepts: dict[str, list[Percept]] = field(default_factory=dict)
    moved: dict[str, Position] = field(default_factory=dict)
    inventory_changed: set[str] = field(default_factory=set)


class World:
    def __init__(
        self,
        config: WorldConfig,
        spawns: Mapping[str, Position],
        inventories: Mapping[str, Mapping[str, int]],
        tree: TechTree,
        seed: int = 0,
    ) -> None:
        self.config = config
        self.tree = tree
        self.positions: dict[str, Position] = {}
        self.inventories: dict[str, dict[str, int]] = {}
        self.ever_held: dict[str, set[str]] = {}
        for agent, pos in spawns.items():
            if not config.contains(pos.x, pos.z):
                raise ValueError(f"spawn for {agent} at ({pos.x},{pos.z}) outside world bounds")
            self.positions[agent] = pos
            inv = {k: int(v) for k, v in dict(inventories.get(agent, {})).items()}
            self.inventories[agent] = inv
            self.ever_held[agent] = {k for k, v in inv.items() if v > 0}
        self.nodes = [_Node(n.kind, n.x, n.z) for n in config.nodes]
        self.chests: dict[str, dict[str, int]] = {c.name: {} for c in config.chests}
        self._chest_pos = {c.name: (c.x, c.z) for c in config.chests}
        self.active: dict[str, _Active] = {}
        self._say_queue: list[tuple[str, str, dict[str, Any]]] = []
        self._submit_queue: list[tuple[str, ActionSpec, int]] = []
        self.deposit_ledger: list[tuple[int, str, int]] = []  # (tick, agent, total items)
        self._rngs = {a: random.Random(f"{seed}:{a}:explore") for a in sorted(spawns)}

    # -- intake (called by the engine during effect application) -------------

    def submit(self, agent: str, spec: ActionSpec, tick: int) -> None:
        self._submit_queue.append((agent, spec, tick))

    def queue_say(self, agent: str, text: str, meta: dict[str, Any]) -> None:
        self._say_queue.append((agent, text, meta))

    def broadcast_signal(
        self, agents: Iterable[str], payload: Mapping[str, Any], tick: int
    ) -> dict[str, Percept]:
        """Signal percepts for the given agents; caller commits them."""
        p = Percept(tick=tick, source=BROADCAST_SIGNAL, content=dict(payload))
        return {a: p for a in agents}

    # -- queries --------------------------------------------------------------

    def unique_items(self, agent: str) -> int:
        return len(self.ever_held[agent])

    def inventory_total(self, agent: str) -> int:
        return sum(self.inventories[agent].values())

    def town_at(self, x: float, z: float) -> str | None:
        for t in self.config.towns:
            if (x - t.x) ** 2 + (z - t.z) ** 2 <= t.radius**2:
                return t.name
        return None

    def deposited_between(self, agent: str, t0: int, t1: int) -> int:
        return sum(n for tick, a, n in self.deposit_ledger if a == agent and t0 <= tick < t1)

    # -- stepping -------------------------------------------------------------

    def step(self, tick: int) -> StepResult:
        res = StepResult()
        for agent, spec, sub_tick in self._submit_queue:
            if agent in self.active:
                self._finish(
                    agent, self.active[agent], FAILED, "superseded by a new action", tick, res
                )
            self.active[agent] = _Active(spec=spec, submitted=sub_tick)
        self._submit_queue.clear()

        for agent in sorted(self.active):
            self._progress(agent, tick, res)

        for agent, text, meta in self._say_queue:
            self._deliver(agent, text, meta, tick, res)
        self._say_queue.clear()
        return res

    # -- helpers --------------------------------------------------------------

    def _percept(self, res: StepResult, agent: str, p: Percept) -> None:
        res.percepts.setdefault(agent, []).append(p)

    def _apply_deltas(
        self, res: StepResult, agent: str, deltas: dict[str, int], tick: int
    ) -> None:
        inv = self.inventories[agent]
        for item, d in deltas.items():
            inv[item] = inv.get(item, 0) + d
            if inv[item] < 0:
                raise AssertionError(f"negative inventory for {agent}:{item}")
            if d > 0:
                self.ever_held[agent].add(item)
        res.inventory_changed.add(agent)
        self._percept(
            res, agent, Percept(tick=tick, source=INVENTORY_DELTA, content={"deltas": deltas})
        )

    def _finish(
        self,
        agent: str,
        act: _Active,
        status: str,
        detail: str,
        tick: int,
        res: StepResult,
        deltas: dict[str, int] | None = None,
        extra: dict[str, Any] | None = None,
    ) -> None:
        pos = self.positions[agent]
        payload: dict[str, Any] = {
            "id": act.spec.id,
            "kind": act.spec.kind,
            "args": {k: v for k, v in act.spec.args.items()},
            "label": act.spec.describe(),
            "status": status,
            "detail": detail,
            "x": pos.x,
            "z": pos.z,
        }
        if deltas:
            payload["deltas"] = deltas
        if extra:
            payload.update(extra)
        res.events.append(WorldEvent(agent=agent, kind="action", payload=payload))
        self._percept(
            res,
            agent,
            Percept(
                tick=tick,
                source=ACTION_OUTCOME,
                content={
                    "action_id": act.spec.id,
                    "action": act.spec.describe(),
                    "status": status,
                    "detail": detail,
                },
            ),
        )
        if self.active.get(agent) is act:
            del self.active[agent]

    def _move_toward(self, agent: str, tx: float, tz: float, res: StepResult) -> float:
        """Step along the 4-neighborhood path; returns remaining distance."""
        pos = self.positions[agent]
        budget = self.config.speed
        x, z = pos.x, pos.z
        dx, dz = tx - x, tz - z
        step_x = min(abs(dx), budget)
        x += step_x if dx > 0 else -step_x
        budget -= step_x
        if budget > 0:
            step_z = min(abs(dz), budget)
            z += step_z if dz > 0 else -step_z
        x = min(max(x, self.config.x_min), self.config.x_max)
        z = min(max(z, self.config.z_min), self.config.z_max)
        if (x, z) != (pos.x, pos.z):
            self.positions[agent] = Position(x, pos.y, z)
            res.moved[agent] = self.positions[agent]
        return abs(tx - x) + abs(tz - z)

    def _nearest_node(self, agent: str, kind: str, tick: int) -> int | None:
        pos = self.positions[agent]
        best: tuple[float, int] | None = None
        for i, node in enumerate(self.nodes):
            if node.kind != kind or node.respawn_at > tick:
                continue
            d = (node.x - pos.x) ** 2 + (node.z - pos.z) ** 2
            if best is None or d < best[0]:
                best = (d, i)
        return None if best is None else best[1]

    def _nearest_chest(self, agent: str) -> str | None:
        pos = self.positions[agent]
        best: tuple[float, str] | None = None
        for name, (cx, cz) in sorted(self._chest_pos.items()):
            d = (cx - pos.x) ** 2 + (cz - pos.z) ** 2
            if best is None or d < best[0]:
                best = (d, name)
        return None if best is None else best[1]

    def _within_reach(self, agent: str, x: float, z: float) -> bool:
        pos = self.positions[agent]
        return (pos.x - x) ** 2 + (pos.z - z) ** 2 <= self.config.reach**2

    # -- per-kind progress ----------------------------------------------------

    def _progress(self, agent: str, tick: int, res: StepResult) -> None:
        act = self.active.get(agent)
        if act is None:
            return
        kind = act.spec.kind
        if kind == "gather":
            self._progress_gather(agent, act, tick, res)
        elif kind == "craft":
            self._do_craft(agent, act, tick, res)
        elif kind in ("move_to", "explore"):
            self._progress_move(agent, act, tick, res)
        elif kind == "approach":
            self._progress_approach(agent, act, tick, res)
        elif kind == "give":
            self._progress_give(agent, act, tick, res)
        elif kind == "deposit":
            self._progress_deposit(agent, act, tick, res)
        else:
            self._finish(agent, act, FAILED, f"unknown action kind {kind!r}", tick, res)

    def _progress_gather(self, agent: str, act: _Active, tick: int, res: StepResult) -> None:
        item = act.spec.args["item"]
        if not self.tree.is_raw(item):
            self._finish(agent, act, FAILED, f"{item} is not gatherable", tick, res)
            return
        node_kind = self.tree.node_kind(item)
        required = self.tree.required_tool(node_kind)
        if required and not holds_tool(self.inventories[agent], required):
            self._finish(agent, act, FAILED, f"requires {required}", tick, res)
            return
        # (Re)target the nearest available node; it may have been consumed.
        idx = act.target_node
        if idx is None or self.nodes[idx].respawn_at > tick or self.nodes[idx].kind != node_kind:
            idx = self._nearest_node(agent, node_kind, tick)
            act.target_node = idx
        if idx is None:
            self._finish(agent, act, FAILED, f"no available {item} node", tick, res)
            return
        node = self.nodes[idx]
        if self._within_reach(agent, node.x, node.z):
            node.respawn_at = tick + self.config.respawn_ticks
            self._apply_deltas(res, agent, {item: 1}, tick)
            self._finish(agent, act, SUCCEEDED, f"gathered 1 {item}", tick, res, deltas={item: 1})
        else:
            self._move_toward(agent, node.x, node.z, res)

    def _do_craft(self, agent: str, act: _Active, tick: int, res: StepResult) -> None:
        item = act.spec.args["item"]
        recipe = self.tree.recipes.get(item)
        if recipe is None:
            self._finish(agent, act, FAILED, f"no recipe for {item}", tick, res)
            return
        inv = self.inventories[agent]
        if recipe.station and inv.get(recipe.station, 0) < 1:
            self._finish(agent, act, FAILED, f"requires {recipe.station}", tick, res)
            return
        for ing, count in recipe.ingredients.items():
            if inv.get(ing, 0) < count:
                self._finish(agent, act, FAILED, f"missing ingredient {ing}", tick, res)
                return
        deltas = {ing: -count for ing, count in recipe.ingredients.items()}
        deltas[item] = deltas.get(item, 0) + 1
        self._apply_deltas(res, agent, deltas, tick)
        self._finish(agent, act, SUCCEEDED, f"crafted 1 {item}", tick, res, deltas=deltas)

    def _progress_move(self, agent: str, act: _Active, tick: int, res: StepResult) -> None:
        if act.target_xz is None:
            if act.spec.kind == "explore":
                rng = self._rngs[agent]
                c = self.config
                act.target_xz = (
                    rng.uniform(c.x_min, c.x_max),
                    rng.uniform(c.z_min, c.z_max),
                )
            else:
                act.target_xz = (float(act.spec.args["x"]), float(act.spec.args["z"]))
        tx, tz = act.target_xz
        self._move_toward(agent, tx, tz, res)
        if self._within_reach(agent, tx, tz):
            self._finish(agent, act, SUCCEEDED, f"arrived at {tx:.0f},{tz:.0f}", tick, res)

    def _progress_approach(self, agent: str, act: _Active, tick: int, res: StepResult) -> None:
        target = act.spec.args["target"]
        if target not in self.positions:
            self._finish(agent, act, FAILED, f"no such agent {target}", tick, res)
            return
        tpos = self.positions[target]
        if self._within_reach(agent, tpos.x, tpos.z):
            self._finish(agent, act, SUCCEEDED, f"reached {target}", tick, res)
            return
        self._move_toward(agent, tpos.x, tpos.z, res)
        tpos = self.positions[target]
        if self._within_reach(agent, tpos.x, tpos.z):
            self._finish(agent, act, SUCCEEDED, f"reached {target}", tick, res)

    def _progress_give(self, agent: str, act: _Active, tick: int, res: StepResult) -> None:
        item = act.spec.args["item"]
        count = int(act.spec.args["count"])
        target = act.spec.args["target"]
        if target not in self.positions:
            self._finish(agent, act, FAILED, f"no such agent {target}", tick, res)
            return
        held = self.inventories[agent].get(item, 0)
        if held < 1:
            self._finish(agent, act, FAILED, f"missing {item}", tick, res)
            return
        tpos = self.positions[target]
        if not self._within_reach(agent, tpos.x, tpos.z):
            self._move_toward(agent, tpos.x, tpos.z, res)
            tpos = self.positions[target]
            if not self._within_reach(agent, tpos.x, tpos.z):
                return
        n = min(count, held)
        self._apply_deltas(res, agent, {item: -n}, tick)
        self._apply_deltas(res, target, {item: n}, tick)
        self._percept(
            res,
            target,
            Percept(
                tick=tick,
                source=ACTION_OUTCOME,
                content={
                    "action_id": act.spec.id,
                    "action": f"received {item} x{n} from {agent}",
                    "status": SUCCEEDED,
                    "detail": f"gift from {agent}",
                },
            ),
        )
        self._finish(
            agent,
            act,
            SUCCEEDED,
            f"gave {n} {item} to {target}",
            tick,
            res,
            deltas={item: -n},
            extra={"target": target, "item": item, "count": n},
        )

    def _progress_deposit(self, agent: str, act: _Active, tick: int, res: StepResult) -> None:
        chest_name = act.spec.args.get("chest") or self._nearest_chest(agent)
        if chest_name is None or chest_name not in self.chests:
            self._finish(agent, act, FAILED, "no community chest", tick, res)
            return
        cx, cz = self._chest_pos[chest_name]
        if not self._within_reach(agent, cx, cz):
            self._move_toward(agent, cx, cz, res)
            if not self._within_reach(agent, cx, cz):
                return
        wanted: Mapping[str, int] = act.spec.args.get("items", {})
        inv = self.inventories[agent]
        moved: dict[str, int] = {}
        for item in sorted(wanted):
            n = min(int(wanted[item]), inv.get(item, 0))
            if n > 0:
                moved[item] = n
        if not moved:
            self._finish(agent, act, SUCCEEDED, "deposited 0 items", tick, res)
            return
        self._apply_deltas(res, agent, {k: -v for k, v in moved.items()}, tick)
        chest = self.chests[chest_name]
        for item, n in moved.items():
            chest[item] = chest.get(item, 0) + n
        total = sum(moved.values())
        self.deposit_ledger.append((tick, agent, total))
        res.events.append(
            WorldEvent(
                agent=agent,
                kind="deposit",
                payload={"chest": chest_name, "items": dict(sorted(moved.items())), "total": total},
            )
        )
        self._finish(
            agent,
            act,
            SUCCEEDED,
            f"deposited {total} items",
            tick,
            res,
            extra={"chest": chest_name, "total": total},
        )

    def _deliver(
        self, agent: str, text: str, meta: dict[str, Any], tick: int, res: StepResult
    ) -> None:
        pos = self.positions[agent]
        radius2 = self.config.hearing_radius**2
        recipients = [
            other
            for other in sorted(self.positions)
            if other != agent
            and (self.positions[other].x - pos.x) ** 2 + (self.positions[other].z - pos.z) ** 2
            <= radius2
        ]
        for other in recipients:
            self._percept(
                res,
                other,
                Percept(tick=tick, source=HEARING, content={"speaker": agent, "text": text}),
            )
        payload = {"text": text, "x": pos.x, "z": pos.z, "recipients": recipients}
        payload.update(meta)
        res.events.append(WorldEvent(agent=agent, kind="utterance", payload=payload))
