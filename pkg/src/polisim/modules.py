"""Cognition modules.

Each module is a stateless function of (ctx, snapshot): it reads the
snapshot, may call the language model through the context, and records
writes / world actions / utterances on the context. The engine applies those
effects atomically in deterministic order, so modules are safe to run on any
worker.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Mapping

from . import templates
from .digest import make_digest
from .intents import COMPLETES, evaluate_expected, parse_decision
from .lm import Backend, LmError, LmRequest
from .techtree import TechTree, holds_tool
from .types import (
    ACTION_OUTCOME,
    FAILED,
    HEARING,
    PENDING,
    SUCCEEDED,
    ActionRecord,
    ActionSpec,
    Decision,
    MemoryEntry,
    Percept,
    SocialProfile,
    StateSnapshot,
    WriteSet,
)

MAX_SUBGOAL_DEPTH = 6
MAX_LATERAL_HOPS = 4
DEFAULT_ACTION_TIMEOUT = 10
TRAVEL_ALLOWANCE = 110
APPROACH_ALLOWANCE = 150
EXPLORE_ALLOWANCE = 400
DEFAULT_SENTIMENT = 5.0
MAX_PROFILE_UPDATES_PER_CALL = 3
SENTIMENT_WINDOW = 6


@dataclass
class LmCallRecord:
    template: str
    prompt: str
    completion: str
    latency: int
    extra: dict[str, Any] = field(default_factory=dict)


@dataclass
class Settings:
    tech_tree: TechTree
    digest_budget: int = 2000
    summary_budget: int = 512
    action_timeout: int = DEFAULT_ACTION_TIMEOUT


@dataclass
class ModuleCtx:
    """Per-invocation context: inputs and collected effects."""

    agent_id: str
    module: str
    tick: int
    lm: Backend
    settings: Settings

    writes: WriteSet = None  # type: ignore[assignment]
    actions: list[ActionSpec] = field(default_factory=list)
    utterances: list[tuple[str, int, str]] = field(default_factory=list)  # text, version, intent
    lm_calls: list[LmCallRecord] = field(default_factory=list)
    faults: list[str] = field(default_factory=list)
    latency: int = 0

    def __post_init__(self) -> None:
        if self.writes is None:
            self.writes = WriteSet(module=self.module)

    # -- effect collectors ----------------------------------------------------

    def set(self, field_name: str, value: Any) -> None:
        self.writes.sets[field_name] = value

    def append(self, field_name: str, *entries: Any) -> None:
        self.writes.appends[field_name] = self.writes.appends.get(field_name, ()) + tuple(entries)

    def put(self, field_name: str, key: str, value: Any) -> None:
        self.writes.puts.setdefault(field_name, {})[key] = value

    def act(self, spec: ActionSpec) -> None:
        self.actions.append(spec)

    def utter(self, text: str, decision: Decision) -> None:
        self.utterances.append((text, decision.version, decision.intent))

    def fault(self, message: str) -> None:
        self.faults.append(message)

    def complete(self, template_name: str, prompt: str, **extra: Any) -> str:
        """One LM call; raises LmError on failure. Latency accumulates."""
        req = LmRequest(
            template_name=template_name,
            filled_prompt=prompt,
            meta={"agent": self.agent_id, "tick": self.tick, "module": self.module},
        )
        result = self.lm.complete(req)
        self.latency += result.latency
        self.lm_calls.append(
            LmCallRecord(
                template=template_name,
                prompt=prompt,
                completion=result.text,
                latency=result.latency,
                extra=dict(extra),
            )
        )
        return result.text


ModuleFn = Callable[[ModuleCtx, StateSnapshot], None]


# ---------------------------------------------------------------------------
# Cognitive controller
# ---------------------------------------------------------------------------


def cognitive_controller(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    """Digest the snapshot through the bottleneck, decide, broadcast."""
    digest = make_digest(snap, ctx.settings.digest_budget)
    prompt = templates.fill("cc_decide", name=snap.identity.name, digest=digest.render())
    meta = {
        "digest_chars": digest.total_content(),
        "digest_budget": digest.budget,
        "digest_sections": [label for label, _ in digest.sections],
    }
    try:
        text = ctx.complete("cc_decide", prompt, **meta)
    except LmError as err:
        ctx.fault(f"controller lm failure: {err}")
        return
    try:
        intent, args, rationale = parse_decision(text)
    except Exception:
        try:
            text = ctx.complete("cc_decide", prompt, retry=True, **meta)
            intent, args, rationale = parse_decision(text)
        except Exception as err:
            ctx.fault(f"unparseable decision: {err}")
            return
    prev = snap.current_decision
    prev_version = prev.version if prev else 0
    # A broadcast that re-affirms the same directive keeps its original issue
    # tick; one-shot skills key off the directive epoch, not the version.
    issued = ctx.tick
    if prev is not None and prev.intent == intent and dict(prev.intent_args) == args:
        issued = prev.issued_tick
    ctx.set(
        "current_decision",
        Decision(
            version=prev_version + 1,
            intent=intent,
            intent_args=args,
            rationale=rationale,
            issued_tick=issued,
        ),
    )


def basic_memory(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    """Baseline memory: copy recent percepts into long-term memory."""
    last = max((m.tick for m in snap.long_term_memory if m.kind == "observation"), default=-1)
    fresh = [p for p in snap.working_memory if p.tick > last][-8:]
    if fresh:
        ctx.append(
            "long_term_memory",
            *(MemoryEntry(tick=p.tick, kind="observation", content=p.describe()) for p in fresh),
        )


# ---------------------------------------------------------------------------
# Talking
# ---------------------------------------------------------------------------


def talking(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    decision = snap.current_decision
    if decision is None:
        return
    heard = snap.heard()[-5:]
    prompt = templates.fill(
        "talk",
        name=snap.identity.name,
        decision=decision.describe(),
        speech="\n".join(p.describe() for p in reversed(heard)) or "(nothing)",
        social_goal=snap.social_goal or "(none)",
    )
    try:
        text = ctx.complete("talk", prompt)
    except LmError:
        return  # silence
    text = text.strip()
    if not text or text == "<silent>":
        return
    ctx.utter(text, decision)


# ---------------------------------------------------------------------------
# Social awareness
# ---------------------------------------------------------------------------

_NUMBER = re.compile(r"-?\d+(?:\.\d+)?")


def parse_sentiment(text: str) -> float | None:
    m = _NUMBER.search(text)
    if m is None:
        return None
    return min(10.0, max(0.0, float(m.group(0))))


def social_awareness(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    """Update sentiment and summary profiles for recently heard speakers."""
    by_speaker: dict[str, list[Percept]] = {}
    for p in snap.working_memory:
        if p.source == HEARING:
            speaker = p.content.get("speaker")
            if speaker and speaker != snap.identity.id:
                by_speaker.setdefault(speaker, []).append(p)

    candidates = []
    for speaker, percepts in by_speaker.items():
        prof = snap.social_profiles.get(speaker)
        last = prof.last_updated if prof else -1
        if any(p.tick > last for p in percepts):
            # Unprofiled speakers first, then stalest profiles: no speaker
            # starves behind chattier neighbors.
            candidates.append((prof is not None, last, speaker))
    candidates.sort()

    for _, _, speaker in candidates[:MAX_PROFILE_UPDATES_PER_CALL]:
        percepts = by_speaker[speaker]
        window = "\n".join(p.content["text"] for p in percepts[-SENTIMENT_WINDOW:])
        prof = snap.social_profiles.get(speaker)
        sentiment = infer_sentiment(ctx, window, speaker, snap.identity.name, prof)
        summary = infer_summary(ctx, window, speaker, prof)
        ctx.put(
            "social_profiles",
            speaker,
            SocialProfile(
                target=speaker,
                sentiment=sentiment,
                summary=summary[: ctx.settings.summary_budget],
                last_updated=ctx.tick,
            ),
        )


def infer_sentiment(
    ctx: ModuleCtx, window: str, target: str, own_name: str, prof: SocialProfile | None
) -> float:
    previous = prof.sentiment if prof else DEFAULT_SENTIMENT
    prompt = templates.fill("sentiment", target=target, window=window, name=own_name)
    try:
        score = parse_sentiment(ctx.complete("sentiment", prompt))
        if score is None:  # retry once on a completion with no numeric token
            score = parse_sentiment(ctx.complete("sentiment", prompt, retry=True))
    except LmError:
        return previous
    return previous if score is None else score


def infer_summary(ctx: ModuleCtx, window: str, target: str, prof: SocialProfile | None) -> str:
    prompt = templates.fill("social_summary", target=target, window=window)
    try:
        text = ctx.complete("social_summary", prompt).strip()
    except LmError:
        return prof.summary if prof else ""
    return text if text else (prof.summary if prof else "")


# ---------------------------------------------------------------------------
# Goal generation
# ---------------------------------------------------------------------------

_SENTENCE_END = re.compile(r"[.!?](?=\s+\S)")


def one_sentence(text: str) -> str:
    text = " ".join(text.strip().split())
    m = _SENTENCE_END.search(text)
    return text[: m.end()] if m else text


def goal_generation(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    if not snap.community_goal:
        return
    profiles = sorted(snap.social_profiles.values(), key=lambda p: (-p.last_updated, p.target))
    summaries = "\n".join(f"{p.target}: {p.summary}" for p in profiles if p.summary)
    prompt = templates.fill(
        "social_goal",
        name=snap.identity.name,
        community_goal=snap.community_goal,
        trait="\n".join(snap.traits),
        all_entity_summaries=summaries,
        social_goal=snap.social_goal or "",
    )
    try:
        text = ctx.complete("social_goal", prompt)
    except LmError:
        return  # keep previous goal
    goal = one_sentence(text) or (snap.social_goal or "")
    if ctx.lm_calls and goal:
        # role inference rolls over the goal produced by every call, changed
        # or not, so the call record carries it
        ctx.lm_calls[-1].extra["goal"] = goal
    if not goal or goal == snap.social_goal:
        return
    ctx.set("social_goal", goal)


# ---------------------------------------------------------------------------
# Action awareness
# ---------------------------------------------------------------------------


def action_awareness(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    """Compare the pending action's expected outcome with observed percepts."""
    rec = snap.pending_action
    if rec is None or rec.status != PENDING:
        return

    terminal: Percept | None = None
    for p in snap.working_memory:
        if (
            p.source == ACTION_OUTCOME
            and p.content.get("action_id") == rec.action.id
            and p.tick >= rec.submitted_tick
        ):
            terminal = p

    if terminal is not None:
        detail = terminal.content.get("detail", "")
        if terminal.content.get("status") == FAILED:
            _resolve(ctx, rec, FAILED, detail)
            return
        verdict = evaluate_expected(
            rec.expected_outcome,
            snap.working_memory,
            snap.position,
            since_tick=rec.submitted_tick,
        )
        if verdict is None or verdict:
            _resolve(ctx, rec, SUCCEEDED, detail)
        else:
            _resolve(ctx, rec, FAILED, f"expected '{rec.expected_outcome}' but observed: {detail}")
        return

    if ctx.tick >= rec.deadline_tick:
        _resolve(
            ctx,
            rec,
            FAILED,
            f"timeout: no observed outcome within {rec.deadline_tick - rec.submitted_tick} ticks",
        )


def _resolve(ctx: ModuleCtx, rec: ActionRecord, status: str, observed: str) -> None:
    ctx.set("pending_action", replace(rec, status=status, observed_outcome=observed))
    if status == FAILED:
        note = f"action {rec.action.describe()} failed: {observed}"
        ctx.append(
            "long_term_memory", MemoryEntry(tick=ctx.tick, kind="outcome", content=note[:512])
        )


# ---------------------------------------------------------------------------
# Self reflection
# ---------------------------------------------------------------------------


def self_reflection(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    if not snap.long_term_memory:
        return
    notes = "\n".join(
        f"[t{m.tick}] {m.kind}: {m.content}" for m in snap.long_term_memory[-8:]
    )
    prompt = templates.fill("reflect", name=snap.identity.name, notes=notes)
    try:
        text = ctx.complete("reflect", prompt).strip()
    except LmError:
        return
    if text:
        ctx.append(
            "long_term_memory",
            MemoryEntry(tick=ctx.tick, kind="reflection", content=text[: ctx.settings.summary_budget]),
        )


# ---------------------------------------------------------------------------
# Skill execution
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Plan:
    spec: ActionSpec | None
    expected: str = COMPLETES
    allowance: int = DEFAULT_ACTION_TIMEOUT
    fault: str | None = None


def plan_deposit_items(inventory: dict[str, int], rate: float) -> dict[str, int]:
    """floor(rate * total), drawn from stacks in descending-count order."""
    total = sum(inventory.values())
    target = math.floor(rate * total)
    chosen: dict[str, int] = {}
    remaining = target
    for item, count in sorted(inventory.items(), key=lambda kv: (-kv[1], kv[0])):
        if remaining <= 0:
            break
        n = min(count, remaining)
        if n > 0:
            chosen[item] = n
            remaining -= n
    return chosen


def plan_action(decision: Decision, snap: StateSnapshot, settings: Settings) -> Plan:
    intent, args = decision.intent, dict(decision.intent_args)
    tree = settings.tech_tree
    base = settings.action_timeout

    if intent == "idle":
        return Plan(spec=None)
    if intent == "gather":
        return _plan_gather(args["item"], args["item"], snap, tree, base, 0, 0, frozenset())
    if intent == "craft":
        return _plan_craft(args["item"], args["item"], snap, tree, base, 0, 0, frozenset())
    if intent == "give":
        item, count, target = args["item"], int(args["count"]), args["target"]
        spec = ActionSpec(kind="give", args={"item": item, "count": count, "target": target})
        return Plan(spec=spec, expected=f"inventory loses >= {count} {item}",
                    allowance=base + APPROACH_ALLOWANCE)
    if intent == "deposit":
        rate = args.get("rate")
        if rate is None:
            return Plan(spec=None, fault="deposit intent without a rate")
        items = plan_deposit_items(dict(snap.inventory), float(rate))
        total = sum(items.values())
        expected = f"inventory loses >= {total} items" if total else COMPLETES
        spec = ActionSpec(kind="deposit", args={"items": items, "rate": float(rate)})
        return Plan(spec=spec, expected=expected, allowance=base + TRAVEL_ALLOWANCE)
    if intent == "converse":
        spec = ActionSpec(kind="approach", args={"target": args["target"]})
        return Plan(spec=spec, allowance=base + APPROACH_ALLOWANCE)
    if intent == "travel":
        x, z = float(args["x"]), float(args["z"])
        spec = ActionSpec(kind="move_to", args={"x": x, "z": z})
        dist = abs(x - snap.position.x) + abs(z - snap.position.z)
        return Plan(
            spec=spec,
            expected=f"position within 3 of {x:.1f},{z:.1f}",
            allowance=base + int(dist / 2) + 10,
        )
    if intent == "explore":
        return Plan(spec=ActionSpec(kind="explore", args={}), allowance=EXPLORE_ALLOWANCE)
    return Plan(spec=None, fault=f"unmappable intent {intent!r}")


def _plan_craft(
    item: str,
    root: str,
    snap: StateSnapshot,
    tree: TechTree,
    base: int,
    depth: int,
    laterals: int,
    visited: frozenset[str],
) -> Plan:
    if depth > MAX_SUBGOAL_DEPTH:
        return Plan(spec=None, fault=f"sub-goal depth exceeded planning {root}")
    if item in visited:
        return Plan(spec=None, fault=f"dependency cycle at {item}")
    visited = visited | {item}
    if tree.is_raw(item):
        return _plan_gather(item, root, snap, tree, base, depth, laterals, visited)
    recipe = tree.recipes.get(item)
    if recipe is None:
        return Plan(spec=None, fault=f"no recipe for {item}")
    inv = snap.inventory
    if item == root and inv.get(item, 0) > 0:
        return Plan(spec=None)  # target already held; nothing to do
    if recipe.station and inv.get(recipe.station, 0) < 1:
        return _plan_craft(recipe.station, root, snap, tree, base, depth + 1, laterals, visited)
    for ing, count in recipe.ingredients.items():
        if inv.get(ing, 0) < count:
            return _plan_craft(ing, root, snap, tree, base, depth + 1, laterals, visited)
    spec = ActionSpec(kind="craft", args={"item": item, "root": root})
    return Plan(spec=spec, expected=f"inventory gains >= 1 {item}", allowance=base)


def _plan_gather(
    item: str,
    root: str,
    snap: StateSnapshot,
    tree: TechTree,
    base: int,
    depth: int,
    laterals: int,
    visited: frozenset[str],
) -> Plan:
    if not tree.is_raw(item):
        return Plan(spec=None, fault=f"{item} is not gatherable")
    required = tree.required_tool(tree.node_kind(item))
    if required and not holds_tool(snap.inventory, required):
        # Lateral hop: acquire the gating tool first (fresh depth budget).
        if laterals >= MAX_LATERAL_HOPS:
            return Plan(spec=None, fault=f"tool chain too deep acquiring {required}")
        return _plan_craft(required, root, snap, tree, base, 0, laterals + 1, visited)
    spec = ActionSpec(kind="gather", args={"item": item, "root": root})
    return Plan(spec=spec, expected=f"inventory gains >= 1 {item}", allowance=base + TRAVEL_ALLOWANCE)


NON_REPEATABLE_INTENTS = frozenset({"deposit", "give", "travel", "converse"})


def same_directive(action_args: Mapping[str, Any], decision: Decision) -> bool:
    """True when the action was issued for this exact directive (intent+args)."""
    if action_args.get("intent") != decision.intent:
        return False
    a = decision.intent_args
    i = decision.intent
    if i in ("gather", "craft"):
        return action_args.get("root", action_args.get("item")) == a.get("item")
    if i == "deposit":
        return action_args.get("rate") == a.get("rate")
    if i == "travel":
        return (action_args.get("x"), action_args.get("z")) == (a.get("x"), a.get("z"))
    if i == "give":
        return all(action_args.get(k) == a.get(k) for k in ("item", "count", "target"))
    if i == "converse":
        return action_args.get("target") == a.get("target")
    return i == "explore"


def skill_execution(ctx: ModuleCtx, snap: StateSnapshot) -> None:
    decision = snap.current_decision
    if decision is None:
        return
    rec = snap.pending_action
    same = rec is not None and same_directive(rec.action.args, decision)
    if rec is not None and rec.status == PENDING:
        finished = any(
            p.source == ACTION_OUTCOME
            and p.content.get("action_id") == rec.action.id
            and p.tick >= rec.submitted_tick
            for p in snap.working_memory
        )
        if not finished and ctx.tick < rec.deadline_tick:
            if same:
                if rec.decision_version != decision.version:
                    # Re-affirmed directive: keep the in-flight action, re-tag
                    # it with the fresh broadcast so speech and action stay in
                    # version lockstep.
                    ctx.set("pending_action", replace(rec, decision_version=decision.version))
                return
            # Directive changed: fall through; the new mapping supersedes.
    if (
        same
        and decision.intent in NON_REPEATABLE_INTENTS
        and rec.submitted_tick >= decision.issued_tick
    ):
        return  # this directive already fired its one shot

    plan = plan_action(decision, snap, ctx.settings)
    if plan.fault:
        ctx.fault(plan.fault)
        return
    if plan.spec is None:
        return
    args = dict(plan.spec.args)
    args["dv"] = decision.version
    args["intent"] = decision.intent
    spec = ActionSpec(kind=plan.spec.kind, args=args, id=f"{ctx.agent_id}:t{ctx.tick}")
    ctx.set(
        "pending_action",
        ActionRecord(
            action=spec,
            expected_outcome=plan.expected,
            observed_outcome=None,
            status=PENDING,
            submitted_tick=ctx.tick,
            deadline_tick=ctx.tick + plan.allowance,
            decision_version=decision.version,
        ),
    )
    ctx.act(spec)


MODULE_FUNCS: dict[str, ModuleFn] = {
    "cognitive-controller": cognitive_controller,
    "talking": talking,
    "social-awareness": social_awareness,
    "goal-generation": goal_generation,
    "action-awareness": action_awareness,
    "self-reflection": self_reflection,
    "skill-execution": skill_execution,
    "basic-memory": basic_memory,
}
