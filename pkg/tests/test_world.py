from __future__ import annotations

import pytest

from polisim.techtree import TechTree, TechTreeError, holds_tool, tool_satisfies
from polisim.types import ActionSpec, Position
from polisim.world import ChestConfig, NodeConfig, World, WorldConfig


# -- tech tree ------------------------------------------------------------------


def test_shipped_tree_size_and_depth(tree):
    assert len(tree.items) >= 60
    assert tree.max_depth() >= 5
    assert tree.depth("iron_pickaxe") >= 4  # deep iron line


def test_every_item_has_exactly_one_source(tree):
    crafted = set(tree.recipes)
    raw = set(tree.raw_sources)
    assert crafted | raw == tree.items
    assert not crafted & raw


def test_cycle_detected():
    from polisim.techtree import Recipe

    with pytest.raises(TechTreeError):
        TechTree(
            items={"a", "b"},
            recipes={"a": Recipe({"b": 1}, None), "b": Recipe({"a": 1}, None)},
            raw_sources={},
            tool_requirements={},
        )


def test_tool_tiers():
    assert tool_satisfies("iron_pickaxe", "stone_pickaxe")
    assert tool_satisfies("stone_pickaxe", "stone_pickaxe")
    assert not tool_satisfies("wooden_pickaxe", "stone_pickaxe")
    assert not tool_satisfies("iron_axe", "stone_pickaxe")  # different family
    assert not tool_satisfies("fishing_rod", "shears")
    assert holds_tool({"diamond_pickaxe": 1}, "iron_pickaxe")
    assert not holds_tool({"diamond_pickaxe": 0}, "iron_pickaxe")


# -- world ------------------------------------------------------------------------


def small_world(tree, agents=None, nodes=(), chests=(), radius=30.0):
    cfg = WorldConfig(x_max=200.0, z_max=200.0, hearing_radius=radius,
                      nodes=tuple(nodes), chests=tuple(chests))
    agents = agents or {"Ada": Position(10.0, 64.0, 10.0), "Bo": Position(12.0, 64.0, 10.0)}
    inv = {name: {} for name in agents}
    return World(cfg, agents, inv, tree, seed=1)


def run_action(world, agent, spec, start=0, ticks=60):
    world.submit(agent, ActionSpec(kind=spec.kind, args=spec.args, id=f"{agent}:t{start}"), start)
    results = []
    for t in range(start, start + ticks):
        res = world.step(t)
        results.extend(res.events)
        if any(e.kind == "action" and e.agent == agent for e in res.events):
            return results, t
    return results, start + ticks


def action_events(events, agent):
    return [e for e in events if e.kind == "action" and e.agent == agent]


def test_craft_consumes_ingredients(tree):
    world = small_world(tree)
    world.inventories["Ada"] = {"stick": 2, "iron_ingot": 3, "crafting_table": 1}
    events, _ = run_action(world, "Ada", ActionSpec("craft", {"item": "iron_pickaxe"}))
    ev = action_events(events, "Ada")[0]
    assert ev.payload["status"] == "succeeded"
    assert world.inventories["Ada"]["iron_pickaxe"] == 1
    assert world.inventories["Ada"]["stick"] == 0
    assert world.inventories["Ada"]["iron_ingot"] == 0


def test_craft_missing_ingredient_names_it(tree):
    world = small_world(tree)
    world.inventories["Ada"] = {"stick": 2, "crafting_table": 1}
    events, _ = run_action(world, "Ada", ActionSpec("craft", {"item": "iron_pickaxe"}))
    ev = action_events(events, "Ada")[0]
    assert ev.payload["status"] == "failed"
    assert "iron_ingot" in ev.payload["detail"]


def test_craft_requires_station(tree):
    world = small_world(tree)
    world.inventories["Ada"] = {"stick": 2, "iron_ingot": 3}
    events, _ = run_action(world, "Ada", ActionSpec("craft", {"item": "iron_pickaxe"}))
    ev = action_events(events, "Ada")[0]
    assert ev.payload["status"] == "failed"
    assert "crafting_table" in ev.payload["detail"]


def test_mining_diamond_requires_iron_tier(tree):
    nodes = [NodeConfig("diamond_node", 11.0, 10.0)]
    world = small_world(tree, nodes=nodes)
    world.inventories["Ada"] = {"stone_pickaxe": 1}
    events, _ = run_action(world, "Ada", ActionSpec("gather", {"item": "diamond"}))
    ev = action_events(events, "Ada")[0]
    assert ev.payload["status"] == "failed"
    assert "requires iron_pickaxe" in ev.payload["detail"]

    world.inventories["Ada"]["iron_pickaxe"] = 1
    events, _ = run_action(world, "Ada", ActionSpec("gather", {"item": "diamond"}), start=1)
    ev = action_events(events, "Ada")[0]
    assert ev.payload["status"] == "succeeded"
    assert world.inventories["Ada"]["diamond"] == 1


def test_gather_moves_to_distant_node(tree):
    nodes = [NodeConfig("oak_tree", 50.0, 10.0)]
    world = small_world(tree, nodes=nodes)
    events, done_tick = run_action(world, "Ada", ActionSpec("gather", {"item": "oak_log"}))
    assert world.inventories["Ada"]["oak_log"] == 1
    assert done_tick >= 9  # 40 blocks at speed 4, then harvest


def test_node_respawn(tree):
    nodes = [NodeConfig("oak_tree", 11.0, 10.0)]
    cfg = WorldConfig(x_max=200.0, z_max=200.0, respawn_ticks=10, nodes=tuple(nodes))
    world = World(cfg, {"Ada": Position(10.0, 64.0, 10.0)}, {"Ada": {}}, tree, seed=1)
    run_action(world, "Ada", ActionSpec("gather", {"item": "oak_log"}), start=0, ticks=3)
    events, _ = run_action(world, "Ada", ActionSpec("gather", {"item": "oak_log"}), start=1, ticks=3)
    assert action_events(events, "Ada")[0].payload["status"] == "failed"  # depleted
    events, _ = run_action(world, "Ada", ActionSpec("gather", {"item": "oak_log"}), start=11, ticks=3)
    assert action_events(events, "Ada")[0].payload["status"] == "succeeded"


def test_give_conserves_items(tree):
    world = small_world(tree)
    world.inventories["Ada"] = {"bread": 5}
    world.ever_held["Ada"] = {"bread"}
    events, _ = run_action(world, "Ada", ActionSpec("give", {"item": "bread", "count": 3, "target": "Bo"}))
    assert world.inventories["Ada"]["bread"] == 2
    assert world.inventories["Bo"]["bread"] == 3
    # recipient perceives the gift
    assert any(e.agent == "Ada" and e.payload.get("target") == "Bo" for e in events)


def test_deposit_moves_items_to_chest(tree):
    world = small_world(tree, chests=[ChestConfig("community", 11.0, 10.0)])
    world.inventories["Ada"] = {"bread": 10, "log": 4}
    spec = ActionSpec("deposit", {"items": {"bread": 2, "log": 1}, "rate": 0.2})
    run_action(world, "Ada", spec)
    assert world.chests["community"] == {"bread": 2, "log": 1}
    assert world.inventories["Ada"]["bread"] == 8
    assert world.deposited_between("Ada", 0, 10) == 3


def test_unique_items_is_ever_held(tree):
    world = small_world(tree)
    assert world.unique_items("Ada") == 0
    world.inventories["Ada"] = {"stick": 2, "oak_planks": 3, "crafting_table": 1, "oak_log": 1}
    for item in world.inventories["Ada"]:
        world.ever_held["Ada"].add(item)
    before = world.unique_items("Ada")
    run_action(world, "Ada", ActionSpec("craft", {"item": "wooden_pickaxe"}))
    # losing the ingredients does not reduce the count
    assert world.unique_items("Ada") == before + 1


def test_say_delivery_radius(tree):
    agents = {
        "Left": Position(0.0, 64.0, 0.0),
        "Mid": Position(25.0, 64.0, 0.0),
        "Right": Position(50.0, 64.0, 0.0),
    }
    world = small_world(tree, agents=agents, radius=30.0)
    world.queue_say("Left", "hello", {})
    res = world.step(0)
    utt = [e for e in res.events if e.kind == "utterance"][0]
    assert utt.payload["recipients"] == ["Mid"]

    world.queue_say("Mid", "hi both", {})
    res = world.step(1)
    utt = [e for e in res.events if e.kind == "utterance"][0]
    assert utt.payload["recipients"] == ["Left", "Right"]


def test_two_agents_ten_blocks_apart_hear(tree):
    agents = {"A": Position(0.0, 64.0, 0.0), "B": Position(10.0, 64.0, 0.0)}
    world = small_world(tree, agents=agents, radius=30.0)
    world.queue_say("A", "yo", {})
    assert world.step(0).percepts["B"][0].content["text"] == "yo"


def test_forty_blocks_apart_do_not_hear(tree):
    agents = {"A": Position(0.0, 64.0, 0.0), "B": Position(40.0, 64.0, 0.0)}
    world = small_world(tree, agents=agents, radius=30.0)
    world.queue_say("A", "yo", {})
    assert "B" not in world.step(0).percepts


def test_spawn_outside_bounds_rejected(tree):
    with pytest.raises(ValueError):
        small_world(tree, agents={"Ada": Position(500.0, 64.0, 10.0)})


def test_move_clamped_to_bounds(tree):
    world = small_world(tree, agents={"Ada": Position(1.0, 64.0, 1.0)})
    world.submit("Ada", ActionSpec("move_to", {"x": -50.0, "z": 1.0}, id="Ada:t0"), 0)
    for t in range(10):
        world.step(t)
    assert world.positions["Ada"].x >= 0.0
