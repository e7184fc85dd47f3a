"""Scenario builders: experiment protocols as reproducible configurations.

``build`` resolves every random choice (spawns, node placement, rosters) from
the seed, so the returned config fully pins the run. Protocol constants
(agent counts, schedule marks, community goals, town layout) live here.
"""

from __future__ import annotations

import math
import random
from typing import Any, Callable

from . import policies
from .engine import (
    AgentConfig,
    ConfigError,
    ModuleSpec,
    SimulationConfig,
    default_module_set,
)
from .governance import DEFAULT_CONSTITUTION, Constitution, GovernanceDriver, GovernanceSchedule
from .lm import ScriptedBackend
from .techtree import TechTree
from .types import Position
from .world import ChestConfig, NodeConfig, TownConfig, World, WorldConfig

SCENARIO_NAMES = (
    "progression",
    "sentiment-room",
    "chef",
    "society-50",
    "specialization",
    "collective-rules",
    "cultural",
)

# Protocol constants (full-scale values).
PROTOCOL = {
    "progression": {"agents": 25, "horizon": 1800},
    "sentiment-room": {"agents": 4, "horizon": 300},
    "chef": {"agents": 5, "horizon": 240},
    "society-50": {"agents": 50, "horizon": 14400},
    "specialization": {"agents": 30, "horizon": 1200},
    "collective-rules": {
        "agents": 29,
        "constituents": 25,
        "influencers": 3,
        "managers": 1,
        "horizon": 1200,
    },
    "cultural": {
        "agents": 500,
        "towns": 6,
        "per_town": 33,
        "rural": 302,
        "priests": 20,
        "town_radius": 50.0,
        "horizon": 9000,
    },
}

VILLAGE_GOALS = {
    "normal": (
        "To survive with fellow players in Minecraft Normal Survival mode and create "
        "a efficient community in a Minecraft Village."
    ),
    "martial": (
        "To survive with fellow players in Minecraft Normal Survival mode and create "
        "a military society with advanced technology, strong defenses, and basic "
        "survival needs."
    ),
    "art": (
        "To survive with fellow players in Minecraft Normal Survival mode and create "
        "an artistic village with thriving culture, architecture, and art."
    ),
}

TOWNS = (
    ("Meadowbrook", 591.0, 441.0),
    ("Woodhaven", 515.0, 161.0),
    ("Clearwater", 787.0, 235.0),
    ("Hilltop", 903.0, 690.0),
    ("Riverbend", 183.0, 781.0),
    ("Sunny Glade", 200.0, -100.0),
)

VILLAGER_NAMES = (
    "Ada", "Bram", "Cora", "Dev", "Edna", "Finn", "Gale", "Hugo", "Iris", "Jude",
    "Kira", "Liam", "Mona", "Nils", "Opal", "Pia", "Quig", "Rosa", "Sten", "Tova",
    "Ulf", "Vera", "Wim", "Xena", "Yara", "Zeno", "Ansel", "Beda", "Cyril", "Dara",
)

CONSTITUENT_OCCUPATIONS = ("Builder", "Miner", "Farmer", "Crafter", "Merchant")
CONSTITUENT_NAMES = ("Axel", "Bron", "Cass", "Dov", "Eri")

OCCUPATION_INVENTORIES = {
    # 60 items each: taxation math starts from a clean base.
    "Builder": {"birch_planks": 10, "oak_planks": 10, "oak_log": 10, "cobblestone": 30},
    "Miner": {"cobblestone": 25, "coal": 15, "iron_ore": 15, "torch": 5},
    "Farmer": {"wheat": 30, "bread": 10, "seeds": 15, "carrot": 5},
    "Crafter": {"oak_planks": 20, "stick": 20, "birch_log": 15, "crafting_table": 5},
    "Merchant": {"bread": 20, "apple": 15, "sugar": 15, "paper": 10},
}

INFLUENCER_NAMES = {"anti": ("Thorin", "Vex", "Orin"), "pro": ("Lira", "Mara", "Sel")}
INFLUENCER_TRAITS = {
    "anti": (
        "You are a warrior and community leader.",
        "You believe the village economy flourishes and the current tax rate is "
        "unnecessarily high; people should keep more of their inventory.",
        "You approach other agents and argue for lowering taxes.",
    ),
    "pro": (
        "You are a miner who thinks taxation is vital.",
        "You believe taxes fund the order and well-being of all citizens and the rate "
        "should be increased to at least 25%.",
        "You approach other agents and argue in favor of the taxation system.",
    ),
}

PRIEST_TRAITS = (
    "You are a passionate Pastafarian seeking to convert others to the Church of the "
    "Flying Spaghetti Monster.",
    "You are determined to spread your faith, the Church of the Flying Spaghetti "
    "Monster, to as many people as possible.",
)

CULTURAL_INVENTORY_POOL = (
    ("diamond", 16), ("iron_ingot", 10), ("coal", 10), ("gold_ingot", 8),
    ("bread", 12), ("apple", 10), ("oak_log", 15), ("cobblestone", 20),
)


def _with_talk_period(period: int) -> tuple[ModuleSpec, ...]:
    from dataclasses import replace

    return tuple(
        replace(m, period=period) if m.name == "talking" else m for m in default_module_set()
    )


def _disk(rng: random.Random, cx: float, cz: float, radius: float) -> tuple[float, float]:
    r = radius * math.sqrt(rng.random())
    theta = rng.random() * 2.0 * math.pi
    return cx + r * math.cos(theta), cz + r * math.sin(theta)


def _village_nodes(rng: random.Random) -> tuple[NodeConfig, ...]:
    spots = {
        "forest": (485.0, 482.0, 12.0),
        "cave": (482.0, 515.0, 10.0),
        "farm": (515.0, 485.0, 10.0),
        "pasture": (515.0, 515.0, 8.0),
        "garden": (512.0, 500.0, 8.0),
        "meadow": (505.0, 522.0, 8.0),
    }
    recipe = (
        ("oak_tree", 40, "forest"),
        ("birch_tree", 10, "forest"),
        ("apple_tree", 8, "forest"),
        ("stone_node", 24, "cave"),
        ("coal_node", 10, "cave"),
        ("iron_node", 10, "cave"),
        ("diamond_node", 4, "cave"),
        ("gold_node", 2, "cave"),
        ("wheat_crop", 30, "farm"),
        ("carrot_crop", 8, "farm"),
        ("potato_crop", 8, "farm"),
        ("grass_field", 6, "farm"),
        ("cattle", 5, "pasture"),
        ("pig_pen", 4, "pasture"),
        ("sheep", 5, "pasture"),
        ("coop", 3, "pasture"),
        ("nest", 3, "pasture"),
        ("feather_patch", 2, "pasture"),
        ("flower_patch", 12, "garden"),
        ("sapling_patch", 8, "garden"),
        ("fiber_plant", 10, "meadow"),
        ("cane_patch", 4, "meadow"),
        ("sand_pit", 3, "meadow"),
        ("clay_pit", 3, "meadow"),
        ("gravel_pit", 3, "meadow"),
        ("mushroom_patch", 4, "meadow"),
    )
    nodes = []
    for kind, count, spot in recipe:
        cx, cz, radius = spots[spot]
        for _ in range(count):
            x, z = _disk(rng, cx, cz, radius)
            nodes.append(NodeConfig(kind, round(x, 1), round(z, 1)))
    return tuple(nodes)

VILLAGE_LOCATION_MEMORIES = (
    "The town hall and village square sit at 500, 64, 500.",
    "A pasture of sheep and pigs lies near 515, 64, 515.",
    "An oak forest grows near 485, 64, 482.",
    "A cave with coal, iron, and diamond ore opens near 482, 64, 515.",
    "Farmland with wheat spreads around 515, 64, 485.",
)


# ---------------------------------------------------------------------------
# Builders
# ---------------------------------------------------------------------------


def build(name: str, **overrides: Any) -> SimulationConfig:
    """Build a scenario config; overrides: seed, scale, horizon, workers,
    village, influencers, frozen, lm_tally."""
    if name not in SCENARIO_NAMES:
        raise ConfigError(f"unknown scenario {name!r}")
    allowed = {"seed", "scale", "horizon", "workers", "village", "influencers", "frozen",
               "lm_tally"}
    unknown = set(overrides) - allowed
    if unknown:
        raise ConfigError(f"unknown overrides for {name}: {sorted(unknown)}")
    seed = int(overrides.get("seed", 0))
    scale = float(overrides.get("scale", 1.0))
    if scale <= 0:
        raise ConfigError("scale must be > 0")
    builder = _BUILDERS[name]
    config = builder(seed, scale, overrides)
    if overrides.get("horizon") is not None:
        config.horizon = int(overrides["horizon"])
    config.workers = int(overrides.get("workers", 0))
    config.validate()
    return config


def _build_progression(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    n = max(1, round(PROTOCOL["progression"]["agents"] * scale))
    horizon = max(1, round(PROTOCOL["progression"]["horizon"] * scale))
    rng = random.Random(f"{seed}:progression")
    cols = math.ceil(math.sqrt(n))
    spacing = 150.0
    nodes: list[NodeConfig] = []
    agents: list[AgentConfig] = []
    cluster = (
        ("oak_tree", 8), ("stone_node", 12), ("coal_node", 5), ("iron_node", 5),
        ("diamond_node", 4), ("fiber_plant", 3), ("apple_tree", 3),
    )
    for i in range(n):
        cx = 100.0 + (i % cols) * spacing
        cz = 100.0 + (i // cols) * spacing
        for kind, count in cluster:
            for _ in range(count):
                x, z = _disk(rng, cx, cz, 10.0)
                nodes.append(NodeConfig(kind, round(x, 1), round(z, 1)))
        agents.append(
            AgentConfig(
                name=f"Forager_{i + 1:02d}",
                traits=("You are an explorer who gathers unique items.",),
                community_goal="Explore and gather as many unique items as you can.",
                spawn_location=(cx, 64.0, cz),
                inventory={},
            )
        )
    side = 200.0 + cols * spacing
    world = WorldConfig(x_max=side, z_max=side, nodes=tuple(nodes))
    return SimulationConfig(
        seed=seed,
        horizon=horizon,
        agents=tuple(agents),
        world=world,
        scenario="progression",
        extras={"scale": scale},
    )


def _build_sentiment_room(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    placements = (("Subject", 30.0, 30.0), ("Lila", 32.0, 30.0), ("Noah", 30.0, 32.0),
                  ("Ethan", 28.0, 30.0))
    agents = tuple(
        AgentConfig(
            name=name,
            traits=(f"You are {name}, spending the day in a small common room.",),
            community_goal="Pass the time in the common room.",
            spawn_location=(x, 64.0, z),
        )
        for name, x, z in placements
    )
    world = WorldConfig(x_max=60.0, z_max=60.0)
    return SimulationConfig(
        seed=seed,
        horizon=PROTOCOL["sentiment-room"]["horizon"],
        agents=agents,
        world=world,
        scenario="sentiment-room",
        extras={"subject": "Subject", "characters": ["Lila", "Noah", "Ethan"], "scale": scale},
    )


def _build_chef(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    placements = (("Chef", 30.0, 30.0), ("Adam", 32.0, 30.0), ("Bob", 28.0, 30.0),
                  ("Charles", 30.0, 32.0), ("David", 30.0, 28.0))
    agents = []
    for name, x, z in placements:
        inventory = {"bread": 60} if name == "Chef" else {}
        agents.append(
            AgentConfig(
                name=name,
                traits=(
                    "You are the village chef with food to share."
                    if name == "Chef"
                    else f"You are {name}; you are hungry.",
                ),
                community_goal="Share a meal in the village kitchen.",
                spawn_location=(x, 64.0, z),
                inventory=inventory,
            )
        )
    world = WorldConfig(x_max=60.0, z_max=60.0)
    return SimulationConfig(
        seed=seed,
        horizon=PROTOCOL["chef"]["horizon"],
        agents=tuple(agents),
        world=world,
        scenario="chef",
        # four chatty neighbors fill working memory; profiles must still pass
        # the bottleneck for allocation to be sentiment-driven
        digest_budget=4096,
        extras={"chef": "Chef", "characters": list(policies.CHEF_CHARACTERS), "scale": scale},
    )


def _build_society(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    n = max(2, round(PROTOCOL["society-50"]["agents"] * scale))
    horizon = max(1, round(PROTOCOL["society-50"]["horizon"] * scale))
    rng = random.Random(f"{seed}:society")
    nodes = []
    for kind, count in (("oak_tree", 60), ("stone_node", 40), ("wheat_crop", 40),
                        ("coal_node", 15), ("iron_node", 15), ("flower_patch", 20)):
        for _ in range(count):
            nodes.append(
                NodeConfig(kind, round(rng.uniform(20, 480), 1), round(rng.uniform(20, 480), 1))
            )
    agents = []
    for i in range(n):
        x, z = rng.uniform(50, 450), rng.uniform(50, 450)
        agents.append(
            AgentConfig(
                name=f"Citizen_{i:02d}",
                traits=("You are a villager with your own habits.",),
                community_goal="Make a living alongside the other villagers.",
                spawn_location=(round(x, 1), 64.0, round(z, 1)),
                annotations={
                    "true_likeability": round(rng.uniform(0, 10), 1),
                    "true_extroversion": round(rng.uniform(0, 10), 1),
                },
            )
        )
    world = WorldConfig(x_max=500.0, z_max=500.0, nodes=tuple(nodes))
    return SimulationConfig(
        seed=seed,
        horizon=horizon,
        agents=tuple(agents),
        world=world,
        scenario="society-50",
        extras={"scale": scale},
    )


def _build_specialization(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    village = overrides.get("village", "normal")
    if village not in VILLAGE_GOALS:
        raise ConfigError(f"unknown village type {village!r}")
    n = max(2, round(PROTOCOL["specialization"]["agents"] * scale))
    rng = random.Random(f"{seed}:specialization")
    agents = []
    for i in range(n):
        name = VILLAGER_NAMES[i % len(VILLAGER_NAMES)]
        if i >= len(VILLAGER_NAMES):
            name = f"{name}{i // len(VILLAGER_NAMES) + 1}"
        x, z = _disk(rng, 500.0, 500.0, 10.0)
        agents.append(
            AgentConfig(
                name=name,
                traits=(
                    "You are independent and prefer to work solo.",
                    "You are expressive and let others know what you are doing.",
                ),
                location_memories=VILLAGE_LOCATION_MEMORIES,
                community_goal=VILLAGE_GOALS[village],
                spawn_location=(round(x, 1), 64.0, round(z, 1)),
            )
        )
    world = WorldConfig(
        x_max=1000.0,
        z_max=1000.0,
        respawn_ticks=30,
        nodes=_village_nodes(rng),
        chests=(ChestConfig("community", 500.0, 500.0),),
    )
    return SimulationConfig(
        seed=seed,
        horizon=PROTOCOL["specialization"]["horizon"],
        agents=tuple(agents),
        world=world,
        scenario="specialization",
        extras={"village": village, "scale": scale},
    )


def _build_collective(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    arm = overrides.get("influencers", "anti")
    if arm not in INFLUENCER_NAMES:
        raise ConfigError(f"influencers must be 'anti' or 'pro', got {arm!r}")
    frozen = bool(overrides.get("frozen", False))
    n_constituents = max(1, round(PROTOCOL["collective-rules"]["constituents"] * scale))
    n_influencers = max(1, round(PROTOCOL["collective-rules"]["influencers"] * scale))
    rng = random.Random(f"{seed}:collective")
    agents: list[AgentConfig] = []
    for i in range(n_constituents):
        occupation = CONSTITUENT_OCCUPATIONS[i % len(CONSTITUENT_OCCUPATIONS)]
        base = CONSTITUENT_NAMES[(i // len(CONSTITUENT_OCCUPATIONS)) % len(CONSTITUENT_NAMES)]
        suffix = "" if i < 25 else str(i)
        x, z = _disk(rng, 500.0, 500.0, 8.0)
        agents.append(
            AgentConfig(
                name=f"{occupation}_{base}{suffix}",
                traits=(f"You are a {occupation.lower()} serving the village.",),
                community_goal="Prosper under the village constitution.",
                spawn_location=(round(x, 1), 64.0, round(z, 1)),
                inventory=dict(OCCUPATION_INVENTORIES[occupation]),
                tags=("constituent",),
            )
        )
    for j in range(n_influencers):
        name = INFLUENCER_NAMES[arm][j % 3] + ("" if j < 3 else str(j))
        x, z = _disk(rng, 500.0, 500.0, 6.0)
        agents.append(
            AgentConfig(
                name=name,
                traits=INFLUENCER_TRAITS[arm],
                community_goal="Shape the village's tax laws.",
                spawn_location=(round(x, 1), 64.0, round(z, 1)),
                inventory={"iron_ingot": 20, "gold_ingot": 20},
                tags=("influencer", f"influencer:{arm}"),
            )
        )
    agents.append(
        AgentConfig(
            name="Election_Manager",
            traits=("You oversee the democratic process.", "Don't take any actions."),
            community_goal="Run a fair amendment process.",
            spawn_location=(0.0, 142.0, 0.0),
            tags=("manager",),
            modules=(),
            embodied=False,
        )
    )
    world = WorldConfig(
        x_max=1000.0,
        z_max=1000.0,
        respawn_ticks=30,
        nodes=_village_nodes(rng),
        chests=(ChestConfig("community", 500.0, 500.0),),
    )
    schedule = GovernanceSchedule()
    return SimulationConfig(
        seed=seed,
        horizon=schedule.sim_length,
        agents=tuple(agents),
        world=world,
        scenario="collective-rules",
        extras={
            "influencers": arm,
            "frozen": frozen,
            "lm_tally": bool(overrides.get("lm_tally", False)),
            "schedule": schedule.to_dict(),
            "scale": scale,
        },
    )


def _build_cultural(seed: int, scale: float, overrides: dict) -> SimulationConfig:
    p = PROTOCOL["cultural"]
    total = max(7, round(p["agents"] * scale))
    per_town = max(1, round(p["per_town"] * scale))
    n_priests = min(per_town, max(1, round(p["priests"] * scale)))
    n_rural = max(0, total - 6 * per_town)
    horizon = max(1, round(p["horizon"] * scale))
    rng = random.Random(f"{seed}:cultural")
    radius = p["town_radius"]

    towns = tuple(TownConfig(name, x, z, radius) for name, x, z in TOWNS)
    memories = tuple(f"The town of {name} sits near {x:.0f}, 64, {z:.0f}." for name, x, z in TOWNS)
    town_modules = _with_talk_period(2)
    rural_modules = _with_talk_period(10)

    def pick_inventory() -> dict[str, int]:
        picks = rng.sample(CULTURAL_INVENTORY_POOL, k=3)
        return {item: count for item, count in picks}

    agents: list[AgentConfig] = []
    idx = 0
    priests: list[str] = []
    for name, cx, cz in TOWNS:
        theme = policies.TOWN_THEMES[name]
        for k in range(per_town):
            idx += 1
            # 1-block margin keeps rounded coordinates inside the town disk
            x, z = _disk(rng, cx, cz, radius - 1.0)
            is_priest = name == "Meadowbrook" and len(priests) < n_priests
            agent_name = f"{'Priest' if is_priest else 'Townfolk'}_{idx:03d}"
            if is_priest:
                priests.append(agent_name)
                traits = PRIEST_TRAITS
            else:
                traits = (
                    f"You are a friendly resident of {name}.",
                    f"You enjoy {theme} projects.",
                )
            agents.append(
                AgentConfig(
                    name=agent_name,
                    traits=traits,
                    location_memories=memories,
                    community_goal="Live well and share your interests across the towns.",
                    spawn_location=(round(x, 1), 64.0, round(z, 1)),
                    inventory=pick_inventory(),
                    tags=("priest",) if is_priest else (f"town:{name}",),
                    modules=town_modules,
                )
            )
    x_min, x_max, z_min, z_max = 0.0, 1000.0, -200.0, 1000.0
    for _ in range(n_rural):
        idx += 1
        while True:
            x = rng.uniform(x_min, x_max)
            z = rng.uniform(z_min, z_max)
            if all((x - t.x) ** 2 + (z - t.z) ** 2 > (radius + 1.0) ** 2 for t in towns):
                break
        theme = policies.RURAL_THEMES[
            policies.stable_hash(f"rural{idx}") % len(policies.RURAL_THEMES)
        ]
        agents.append(
            AgentConfig(
                name=f"Rural_{idx:03d}",
                traits=(
                    "You live in the countryside between the towns.",
                    f"You enjoy {theme} projects.",
                ),
                location_memories=memories,
                community_goal="Live well and share your interests across the towns.",
                spawn_location=(round(x, 1), 64.0, round(z, 1)),
                inventory=pick_inventory(),
                tags=("rural",),
                modules=rural_modules,
            )
        )

    nodes = []
    for name, cx, cz in TOWNS:
        for kind, count in (("oak_tree", 4), ("wheat_crop", 4), ("flower_patch", 2)):
            for _ in range(count):
                x, z = _disk(rng, cx, cz, radius * 0.6)
                nodes.append(NodeConfig(kind, round(x, 1), round(z, 1)))
    wc = WorldConfig(
        x_min=x_min, x_max=x_max, z_min=z_min, z_max=z_max,
        towns=towns, nodes=tuple(nodes),
    )
    return SimulationConfig(
        seed=seed,
        horizon=horizon,
        agents=tuple(agents),
        world=wc,
        scenario="cultural",
        extras={
            "priests": priests,
            "towns": [[name, x, z] for name, x, z in TOWNS],
            "per_town": per_town,
            "rural": n_rural,
            "scale": scale,
        },
    )


_BUILDERS: dict[str, Callable[[int, float, dict], SimulationConfig]] = {
    "progression": _build_progression,
    "sentiment-room": _build_sentiment_room,
    "chef": _build_chef,
    "society-50": _build_society,
    "specialization": _build_specialization,
    "collective-rules": _build_collective,
    "cultural": _build_cultural,
}


# ---------------------------------------------------------------------------
# Runtime wiring
# ---------------------------------------------------------------------------


def world_from_config(config: SimulationConfig, tree: TechTree | None = None) -> World:
    if tree is None:
        tree = TechTree.shipped()
    spawns = {
        a.name: Position(*a.spawn_location) for a in config.agents if a.embodied
    }
    inventories = {a.name: dict(a.inventory) for a in config.agents if a.embodied}
    return World(config.world, spawns, inventories, tree, seed=config.seed)


def scripted_backend_for(config: SimulationConfig) -> ScriptedBackend:
    name = config.scenario
    if name == "progression":
        return policies.backend(policies.progression_rules())
    if name == "sentiment-room":
        return policies.backend(policies.sentiment_room_rules())
    if name == "chef":
        return policies.backend(policies.chef_rules())
    if name == "specialization":
        return policies.backend(policies.specialization_rules(config.extras.get("village", "normal")))
    if name == "collective-rules":
        return policies.backend(policies.governance_rules(config.extras.get("influencers", "anti")))
    if name == "cultural":
        towns = [(n, x, z) for n, x, z in config.extras.get("towns", [list(t) for t in TOWNS])]
        return policies.backend(policies.cultural_rules(towns))
    if name == "society-50":
        return policies.backend(policies.society_rules())
    return policies.backend([])


def hooks_for(config: SimulationConfig, out_dir=None) -> tuple:
    if config.scenario != "collective-rules":
        return ()
    schedule = GovernanceSchedule(**config.extras["schedule"]) if "schedule" in config.extras else GovernanceSchedule()
    driver = GovernanceDriver(
        manager=next(a.name for a in config.agents if a.has_tag("manager")),
        constituents=tuple(a.name for a in config.agents if a.has_tag("constituent")),
        influencers=tuple(a.name for a in config.agents if a.has_tag("influencer")),
        schedule=schedule,
        constitution=Constitution(text=DEFAULT_CONSTITUTION),
        frozen=bool(config.extras.get("frozen", False)),
        out_dir=out_dir,
        lm_tally=bool(config.extras.get("lm_tally", False)),
    )
    return (driver,)
