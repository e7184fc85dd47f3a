"""Simulation engine.

Logical-time scheduler: within a tick every due module of every agent is
invoked against the tick-start snapshot (optionally on parallel workers);
effects (commits, world actions, utterances) are applied in deterministic
order (agent id, then module name), then the world advances once. Module
invocations that report latency commit their effects that many ticks later,
and overlapping invocations of the same module are coalesced.

Identical config + scripted backend => byte-identical event logs.
"""

from __future__ import annotations

import heapq
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping, Protocol

from .events import Event, EventLog
from .lm import Backend
from .modules import MODULE_FUNCS, LmCallRecord, ModuleCtx, Settings
from .state import StateStore, ownership_from_module_specs
from .techtree import TechTree
from .types import AgentId, Decision, Percept, Position, WriteSet, initial_snapshot
from .world import World, WorldConfig


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ModuleSpec:
    name: str
    period: int
    phase: int = 0
    enabled: bool = True
    owner_fields: tuple[str, ...] = ()
    latency: int = 0  # extra ticks of simulated compute per invocation

    def due(self, tick: int) -> bool:
        return self.enabled and tick >= self.phase and (tick - self.phase) % self.period == 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "period": self.period,
            "phase": self.phase,
            "enabled": self.enabled,
            "owner_fields": list(self.owner_fields),
            "latency": self.latency,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModuleSpec":
        return cls(
            name=d["name"],
            period=int(d["period"]),
            phase=int(d.get("phase", 0)),
            enabled=bool(d.get("enabled", True)),
            owner_fields=tuple(d.get("owner_fields", ())),
            latency=int(d.get("latency", 0)),
        )


def default_module_set() -> tuple[ModuleSpec, ...]:
    return (
        ModuleSpec("skill-execution", 1, owner_fields=("pending_action",)),
        ModuleSpec("talking", 2),
        ModuleSpec("social-awareness", 5, owner_fields=("social_profiles",)),
        ModuleSpec("action-awareness", 5, owner_fields=("pending_action", "long_term_memory")),
        ModuleSpec("cognitive-controller", 5, owner_fields=("current_decision",)),
        ModuleSpec("goal-generation", 8, owner_fields=("social_goal",)),
        ModuleSpec("self-reflection", 30, owner_fields=("long_term_memory",)),
    )


def baseline_module_set() -> tuple[ModuleSpec, ...]:
    """Ablation baseline: a basic memory module plus the controller."""
    return (
        ModuleSpec("basic-memory", 1, owner_fields=("long_term_memory",)),
        ModuleSpec("cognitive-controller", 5, owner_fields=("current_decision",)),
    )


@dataclass(frozen=True)
class AgentConfig:
    name: str
    traits: tuple[str, ...] = ()
    location_memories: tuple[str, ...] = ()
    spawn_location: tuple[float, float, float] = (0.0, 64.0, 0.0)
    inventory: Mapping[str, int] = field(default_factory=dict)
    community_goal: str = ""
    tags: tuple[str, ...] = ()
    annotations: Mapping[str, float] = field(default_factory=dict)
    modules: tuple[ModuleSpec, ...] | None = None
    embodied: bool = True

    def has_tag(self, tag: str) -> bool:
        return tag in self.tags

    def to_dict(self) -> dict[str, Any]:
        d: dict[str, Any] = {
            "name": self.name,
            "traits": list(self.traits),
            "location_memories": list(self.location_memories),
            "spawn_location": {
                "x": self.spawn_location[0],
                "y": self.spawn_location[1],
                "z": self.spawn_location[2],
            },
            "inventory": dict(self.inventory),
            "community_goal": self.community_goal,
        }
        if self.tags:
            d["tags"] = list(self.tags)
        if self.annotations:
            d["annotations"] = dict(self.annotations)
        if self.modules is not None:
            d["modules"] = [m.to_dict() for m in self.modules]
        if not self.embodied:
            d["embodied"] = False
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "AgentConfig":
        spawn = d.get("spawn_location", {})
        return cls(
            name=d["name"],
            traits=tuple(d.get("traits", ())),
            location_memories=tuple(d.get("location_memories", ())),
            spawn_location=(
                float(spawn.get("x", 0.0)),
                float(spawn.get("y", 64.0)),
                float(spawn.get("z", 0.0)),
            ),
            inventory=dict(d.get("inventory", {})),
            community_goal=d.get("community_goal", ""),
            tags=tuple(d.get("tags", ())),
            annotations=dict(d.get("annotations", {})),
            modules=tuple(ModuleSpec.from_dict(m) for m in d["modules"])
            if d.get("modules") is not None
            else None,
            embodied=bool(d.get("embodied", True)),
        )


@dataclass
class SimulationConfig:
    seed: int
    horizon: int
    agents: tuple[AgentConfig, ...]
    world: WorldConfig
    module_set: tuple[ModuleSpec, ...] = field(default_factory=default_module_set)
    scenario: str = "custom"
    tick_duration: float = 1.0
    digest_budget: int = 2000
    working_memory_capacity: int = 32
    summary_budget: int = 512
    action_timeout: int = 10
    log_prompts: bool = True
    workers: int = 0
    # Best-effort pacing for live-LM runs: sleep so each tick spans
    # tick_duration real seconds. Logical-time runs (acceptance) keep it off.
    wall_clock: bool = False
    extras: dict[str, Any] = field(default_factory=dict)

    def agent_modules(self, agent: AgentConfig) -> tuple[ModuleSpec, ...]:
        return agent.modules if agent.modules is not None else self.module_set

    def validate(self) -> None:
        if self.horizon < 0:
            raise ConfigError("horizon must be >= 0")
        names = [a.name for a in self.agents]
        if len(set(names)) != len(names):
            raise ConfigError("agent names must be unique")
        for name in names:
            if not name or " " in name:
                raise ConfigError(f"agent name {name!r} must be non-empty without spaces")
        for a in self.agents:
            x, _, z = a.spawn_location
            if a.embodied and not self.world.contains(x, z):
                raise ConfigError(f"spawn for {a.name} at ({x},{z}) outside world bounds")
            for spec in self.agent_modules(a):
                if spec.period < 1:
                    raise ConfigError(f"module {spec.name} period must be >= 1")
                if spec.name not in MODULE_FUNCS:
                    raise ConfigError(f"unknown module {spec.name!r}")
        if self.digest_budget < 256:
            raise ConfigError("digest budget must be >= 256")

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "horizon": self.horizon,
            "scenario": self.scenario,
            "tick_duration": self.tick_duration,
            "digest_budget": self.digest_budget,
            "working_memory_capacity": self.working_memory_capacity,
            "summary_budget": self.summary_budget,
            "action_timeout": self.action_timeout,
            "log_prompts": self.log_prompts,
            "workers": self.workers,
            "module_set": [m.to_dict() for m in self.module_set],
            "agents": [a.to_dict() for a in self.agents],
            "world": self.world.to_dict(),
            "extras": self.extras,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimulationConfig":
        from .world import ChestConfig, NodeConfig, TownConfig

        w = d["world"]
        world = WorldConfig(
            x_min=w["x_min"],
            x_max=w["x_max"],
            z_min=w["z_min"],
            z_max=w["z_max"],
            hearing_radius=w.get("hearing_radius", 30.0),
            reach=w.get("reach", 3.0),
            speed=w.get("speed", 4.0),
            respawn_ticks=w.get("respawn_ticks", 60),
            nodes=tuple(NodeConfig(**n) for n in w.get("nodes", ())),
            chests=tuple(ChestConfig(**c) for c in w.get("chests", ())),
            towns=tuple(TownConfig(**t) for t in w.get("towns", ())),
        )
        return cls(
            seed=int(d["seed"]),
            horizon=int(d["horizon"]),
            agents=tuple(AgentConfig.from_dict(a) for a in d["agents"]),
            world=world,
            module_set=tuple(ModuleSpec.from_dict(m) for m in d["module_set"]),
            scenario=d.get("scenario", "custom"),
            tick_duration=float(d.get("tick_duration", 1.0)),
            digest_budget=int(d.get("digest_budget", 2000)),
            working_memory_capacity=int(d.get("working_memory_capacity", 32)),
            summary_budget=int(d.get("summary_budget", 512)),
            action_timeout=int(d.get("action_timeout", 10)),
            log_prompts=bool(d.get("log_prompts", True)),
            workers=int(d.get("workers", 0)),
            extras=dict(d.get("extras", {})),
        )


def ablate(config: SimulationConfig, module_names: Iterable[str]) -> SimulationConfig:
    """Disable the named modules everywhere; unknown names are config errors."""
    names = set(module_names)
    known = {m.name for m in config.module_set}
    for a in config.agents:
        if a.modules is not None:
            known |= {m.name for m in a.modules}
    unknown = names - known
    if unknown:
        raise ConfigError(f"cannot ablate unknown modules: {sorted(unknown)}")

    def strip(specs: tuple[ModuleSpec, ...]) -> tuple[ModuleSpec, ...]:
        from dataclasses import replace as _replace

        return tuple(_replace(m, enabled=False) if m.name in names else m for m in specs)

    from dataclasses import replace as _replace

    agents = tuple(
        _replace(a, modules=strip(a.modules)) if a.modules is not None else a
        for a in config.agents
    )
    return _replace_config(config, module_set=strip(config.module_set), agents=agents)


def _replace_config(config: SimulationConfig, **kw: Any) -> SimulationConfig:
    d = config.__dict__ | kw
    return SimulationConfig(**d)


class Hook(Protocol):  # pragma: no cover - structural type
    def on_tick(self, tick: int, api: "EngineApi") -> None: ...


class EngineApi:
    """Surface exposed to schedule hooks (governance, scenario drivers)."""

    def __init__(self, engine: "_Run") -> None:
        self._e = engine
        self.world = engine.world
        self.config = engine.config

    def snapshot(self, agent: str):
        return self._e.stores[agent].snapshot()

    def agent_ids(self) -> list[str]:
        return sorted(self._e.stores)

    def push_percepts(self, agent: str, percepts: list[Percept], tick: int) -> None:
        self._e.commit_world_writes(agent, {}, percepts, tick)

    def lm_complete(self, agent: str, template: str, prompt: str, tick: int, module: str) -> str:
        from .lm import LmRequest

        result = self._e.lm.complete(
            LmRequest(
                template_name=template,
                filled_prompt=prompt,
                meta={"agent": agent, "tick": tick, "module": module},
            )
        )
        self._e.log_lm_call(
            tick, agent, module, LmCallRecord(template, prompt, result.text, result.latency)
        )
        return result.text

    def log(self, tick: int, agent: str, module: str, kind: str, payload: dict[str, Any]) -> None:
        self._e.emit(tick, agent, module, kind, payload)


class _Run:
    def __init__(
        self,
        config: SimulationConfig,
        lm: Backend,
        world: World,
        log: EventLog,
        tree: TechTree,
        hooks: tuple[Hook, ...],
    ) -> None:
        self.config = config
        self.lm = lm
        self.world = world
        self.log = log
        self.hooks = hooks
        self.settings = Settings(
            tech_tree=tree,
            digest_budget=config.digest_budget,
            summary_budget=config.summary_budget,
            action_timeout=config.action_timeout,
        )
        self.stores: dict[str, StateStore] = {}
        self.agent_cfgs: dict[str, AgentConfig] = {}
        for a in config.agents:
            ownership = ownership_from_module_specs(config.agent_modules(a))
            snap = initial_snapshot(
                AgentId.of(a.name),
                traits=a.traits,
                community_goal=a.community_goal,
                location_memories=a.location_memories,
                inventory=a.inventory,
                position=Position(*a.spawn_location),
            )
            self.stores[a.name] = StateStore(
                snap,
                ownership=ownership,
                working_memory_capacity=config.working_memory_capacity,
                summary_budget=config.summary_budget,
            )
            self.agent_cfgs[a.name] = a
        self.busy_until: dict[tuple[str, str], int] = {}
        self.effects: list[tuple[int, str, str, int, ModuleCtx | Exception]] = []
        self._seq = 0
        self._tick_buffer: list[tuple[str, str, int, Event]] = []
        self._buf_seq = 0
        self.invocations: dict[tuple[str, str], int] = {}
        self.api = EngineApi(self)

    # -- logging ---------------------------------------------------------------

    def emit(self, tick: int, agent: str, module: str, kind: str, payload: dict[str, Any]) -> None:
        self._buf_seq += 1
        self._tick_buffer.append(
            (agent, module, self._buf_seq, Event(tick, agent, module, kind, payload))
        )

    def flush_tick(self) -> None:
        # Deterministic tiebreak within a tick: agent id, then module name;
        # arrival order retained for equal keys.
        self._tick_buffer.sort(key=lambda t: (t[0], t[1], t[2]))
        for _, _, _, ev in self._tick_buffer:
            self.log.append(ev)
        self._tick_buffer.clear()

    def log_lm_call(self, tick: int, agent: str, module: str, call: LmCallRecord) -> None:
        payload: dict[str, Any] = {
            "template": call.template,
            "completion": call.completion,
            "latency": call.latency,
        }
        if self.config.log_prompts:
            payload["prompt"] = call.prompt
        payload.update(call.extra)
        self.emit(tick, agent, module, "lm_call", payload)

    # -- commits ---------------------------------------------------------------

    def commit_world_writes(
        self,
        agent: str,
        sets: dict[str, Any],
        percepts: list[Percept],
        tick: int,
    ) -> None:
        ws = WriteSet(module="world", sets=dict(sets))
        if percepts:
            ws.appends["working_memory"] = tuple(percepts)
        if ws.is_empty():
            return
        result = self.stores[agent].commit(ws, tick=tick)
        payload: dict[str, Any] = {"fields": list(result.applied_fields), "version": result.version}
        if percepts:
            payload["wm"] = len(percepts)
        if "position" in sets:
            pos = sets["position"]
            payload["position"] = [pos.x, pos.z]
        if "inventory" in sets:
            payload["inventory_total"] = sum(sets["inventory"].values())
        self.emit(tick, agent, "world", "commit", payload)

    def commit_module_writes(self, agent: str, module: str, ws: WriteSet, tick: int) -> None:
        from .state import StateError

        if ws.is_empty():
            return
        try:
            result = self.stores[agent].commit(ws, tick=tick)
        except StateError as err:
            self.emit(tick, agent, module, "fault", {"error": f"commit rejected: {err}"})
            return
        payload: dict[str, Any] = {"fields": list(result.applied_fields), "version": result.version}
        for warning in result.warnings:
            payload.setdefault("warnings", []).append(warning)
        if "current_decision" in ws.sets and "current_decision" in result.applied_fields:
            d: Decision = ws.sets["current_decision"]
            payload["decision"] = {
                "version": d.version,
                "intent": d.intent,
                "args": dict(d.intent_args),
            }
        if "social_goal" in ws.sets:
            payload["social_goal"] = ws.sets["social_goal"]
        if "social_profiles" in ws.puts:
            payload["profiles"] = {
                target: {"sentiment": p.sentiment, "summary": p.summary}
                for target, p in sorted(ws.puts["social_profiles"].items())
            }
        if "pending_action" in ws.sets and ws.sets["pending_action"] is not None:
            rec = ws.sets["pending_action"]
            payload["pending"] = {
                "id": rec.action.id,
                "status": rec.status,
                "dv": rec.decision_version,
            }
        if "long_term_memory" in ws.appends:
            payload["memory"] = [m.kind for m in ws.appends["long_term_memory"]]
        self.emit(tick, agent, module, "commit", payload)

    # -- main loop ---------------------------------------------------------------

    def run(self) -> None:
        cfg = self.config
        schedule: list[tuple[str, ModuleSpec]] = []
        for name in sorted(self.agent_cfgs):
            a = self.agent_cfgs[name]
            for spec in sorted(cfg.agent_modules(a), key=lambda s: s.name):
                schedule.append((name, spec))

        pool = ThreadPoolExecutor(max_workers=cfg.workers) if cfg.workers > 0 else None
        try:
            for tick in range(cfg.horizon):
                started = time.monotonic() if cfg.wall_clock else 0.0
                self.tick(tick, schedule, pool)
                if cfg.wall_clock:
                    remaining = cfg.tick_duration - (time.monotonic() - started)
                    if remaining > 0:
                        time.sleep(remaining)
        finally:
            if pool is not None:
                pool.shutdown(wait=True)

    def tick(self, tick: int, schedule, pool) -> None:
        dv0 = {
            name: (s.snapshot().current_decision.version if s.snapshot().current_decision else 0)
            for name, s in self.stores.items()
        }

        for hook in self.hooks:
            hook.on_tick(tick, self.api)

        due: list[tuple[str, ModuleSpec]] = []
        for agent, spec in schedule:
            if not spec.due(tick):
                continue
            if self.busy_until.get((agent, spec.name), -1) > tick:
                continue  # previous invocation still running; coalesce
            due.append((agent, spec))

        def invoke(agent: str, spec: ModuleSpec) -> ModuleCtx | Exception:
            ctx = ModuleCtx(
                agent_id=agent,
                module=spec.name,
                tick=tick,
                lm=self.lm,
                settings=self.settings,
            )
            try:
                MODULE_FUNCS[spec.name](ctx, self.stores[agent].snapshot())
            except Exception as err:  # fault isolation: log and continue
                return err
            return ctx

        if pool is not None:
            outcomes = list(pool.map(lambda t: invoke(*t), due))
        else:
            outcomes = [invoke(agent, spec) for agent, spec in due]

        for (agent, spec), outcome in zip(due, outcomes):
            self.invocations[(agent, spec.name)] = self.invocations.get((agent, spec.name), 0) + 1
            latency = spec.latency
            if isinstance(outcome, ModuleCtx):
                latency += outcome.latency
            self.busy_until[(agent, spec.name)] = tick + latency
            self._seq += 1
            heapq.heappush(self.effects, (tick + latency, agent, spec.name, self._seq, outcome))

        while self.effects and self.effects[0][0] <= tick:
            batch: list[tuple[int, str, str, int, ModuleCtx | Exception]] = []
            while self.effects and self.effects[0][0] <= tick:
                batch.append(heapq.heappop(self.effects))
            batch.sort(key=lambda t: (t[1], t[2], t[3]))
            for _, agent, module, _, outcome in batch:
                self.apply_effect(tick, agent, module, outcome, dv0)
            break

        sr = self.world.step(tick)
        for wev in sr.events:
            module = "world"
            if wev.kind == "utterance":
                module = "talking"
            self.emit(tick, wev.agent, module, wev.kind, wev.payload)
        touched = set(sr.percepts) | set(sr.moved) | sr.inventory_changed
        for agent in sorted(touched):
            if agent not in self.stores:
                continue
            sets: dict[str, Any] = {}
            if agent in sr.moved:
                sets["position"] = sr.moved[agent]
            if agent in sr.inventory_changed:
                sets["inventory"] = dict(self.world.inventories[agent])
            self.commit_world_writes(agent, sets, sr.percepts.get(agent, []), tick)

        self.flush_tick()

    def apply_effect(
        self,
        tick: int,
        agent: str,
        module: str,
        outcome: ModuleCtx | Exception,
        dv0: dict[str, int],
    ) -> None:
        if isinstance(outcome, Exception):
            self.emit(
                tick, agent, module, "fault", {"error": f"{type(outcome).__name__}: {outcome}"}
            )
            return
        ctx = outcome
        for call in ctx.lm_calls:
            self.log_lm_call(tick, agent, module, call)
        for msg in ctx.faults:
            self.emit(tick, agent, module, "fault", {"error": msg})
        self.commit_module_writes(agent, module, ctx.writes, tick)
        for spec in ctx.actions:
            if agent in self.world.positions:
                self.world.submit(agent, spec, tick)
            else:
                self.emit(tick, agent, module, "fault", {"error": "agent has no embodiment"})
        for text, version, intent in ctx.utterances:
            if agent not in self.world.positions:
                continue
            stale = version < dv0.get(agent, 0)
            self.world.queue_say(
                agent,
                text,
                {"decision_version": version, "intent": intent, "stale": stale},
            )


def run(
    config: SimulationConfig,
    lm: Backend,
    world: World,
    *,
    log: EventLog | None = None,
    hooks: tuple[Hook, ...] = (),
    tree: TechTree | None = None,
    stats: dict[str, Any] | None = None,
) -> EventLog:
    """Drive the simulation for ``config.horizon`` ticks; returns the log."""
    config.validate()
    if log is None:
        log = EventLog()
    if tree is None:
        tree = world.tree
    runner = _Run(config, lm, world, log, tree, hooks)
    runner.run()
    log.close()
    if stats is not None:
        stats["invocations"] = dict(runner.invocations)
    return log
