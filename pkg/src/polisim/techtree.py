"""Item crafting dependency tree.

Ships as a JSON data file so scenarios can substitute larger trees. The
recipe graph must be a DAG; every non-raw item has exactly one recipe.
Dependency depth counts recipe edges (ingredients and stations); raw items
are depth 0.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping

TOOL_FAMILIES = ("pickaxe", "axe", "shovel", "sword", "hoe")
TOOL_TIERS = ("wooden", "stone", "iron", "diamond")


class TechTreeError(Exception):
    pass


@dataclass(frozen=True)
class Recipe:
    ingredients: Mapping[str, int]
    station: str | None


class TechTree:
    def __init__(
        self,
        items: set[str],
        recipes: dict[str, Recipe],
        raw_sources: dict[str, str],
        tool_requirements: dict[str, str],
    ) -> None:
        self.items = set(items)
        self.recipes = recipes
        self.raw_sources = raw_sources
        self.tool_requirements = tool_requirements
        self._depths: dict[str, int] = {}
        self.validate()

    # -- loading -------------------------------------------------------------

    @classmethod
    def from_dict(cls, d: Mapping) -> "TechTree":
        recipes = {
            item: Recipe(ingredients=dict(spec["ingredients"]), station=spec.get("station"))
            for item, spec in d["recipes"].items()
        }
        return cls(
            items=set(d["items"]),
            recipes=recipes,
            raw_sources=dict(d["raw_sources"]),
            tool_requirements=dict(d["tool_requirements"]),
        )

    @classmethod
    def from_file(cls, path: str | Path) -> "TechTree":
        with Path(path).open("r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    @classmethod
    def shipped(cls) -> "TechTree":
        text = resources.files("polisim.data").joinpath("tech_tree.json").read_text("utf-8")
        return cls.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "items": sorted(self.items),
            "recipes": {
                item: (
                    {"ingredients": dict(r.ingredients), "station": r.station}
                    if r.station
                    else {"ingredients": dict(r.ingredients)}
                )
                for item, r in sorted(self.recipes.items())
            },
            "raw_sources": dict(sorted(self.raw_sources.items())),
            "tool_requirements": dict(sorted(self.tool_requirements.items())),
        }

    # -- queries -------------------------------------------------------------

    def is_raw(self, item: str) -> bool:
        return item in self.raw_sources

    def node_kind(self, item: str) -> str:
        return self.raw_sources[item]

    def required_tool(self, node_kind: str) -> str | None:
        return self.tool_requirements.get(node_kind)

    def depth(self, item: str) -> int:
        if item not in self._depths:
            self._depths[item] = self._compute_depth(item, ())
        return self._depths[item]

    def max_depth(self) -> int:
        return max(self.depth(i) for i in self.items)

    def _compute_depth(self, item: str, stack: tuple[str, ...]) -> int:
        if item in stack:
            raise TechTreeError(f"recipe cycle through {item!r}")
        if self.is_raw(item):
            return 0
        recipe = self.recipes[item]
        deps = list(recipe.ingredients)
        if recipe.station:
            deps.append(recipe.station)
        return 1 + max(self.depth_via(d, stack + (item,)) for d in deps)

    def depth_via(self, item: str, stack: tuple[str, ...]) -> int:
        if item not in self._depths:
            self._depths[item] = self._compute_depth(item, stack)
        return self._depths[item]

    # -- validation ----------------------------------------------------------

    def validate(self) -> None:
        crafted = set(self.recipes)
        raw = set(self.raw_sources)
        if crafted & raw:
            raise TechTreeError(f"items both raw and crafted: {sorted(crafted & raw)}")
        missing = self.items - crafted - raw
        if missing:
            raise TechTreeError(f"items with no source: {sorted(missing)}")
        for item, recipe in self.recipes.items():
            for ing, count in recipe.ingredients.items():
                if ing not in self.items:
                    raise TechTreeError(f"recipe {item!r} uses unknown ingredient {ing!r}")
                if count < 1:
                    raise TechTreeError(f"recipe {item!r} has non-positive count for {ing!r}")
            if recipe.station is not None and recipe.station not in self.items:
                raise TechTreeError(f"recipe {item!r} uses unknown station {recipe.station!r}")
        for item in self.items:
            self.depth(item)  # raises on cycles


def tool_satisfies(held: str, required: str) -> bool:
    """True if ``held`` meets ``required``: same item, or a higher tier in the
    same tool family (wooden < stone < iron < diamond)."""
    if held == required:
        return True
    for family in TOOL_FAMILIES:
        suffix = "_" + family
        if required.endswith(suffix) and held.endswith(suffix):
            req_tier = required[: -len(suffix)]
            held_tier = held[: -len(suffix)]
            if req_tier in TOOL_TIERS and held_tier in TOOL_TIERS:
                return TOOL_TIERS.index(held_tier) >= TOOL_TIERS.index(req_tier)
    return False


def holds_tool(inventory: Mapping[str, int], required: str) -> bool:
    return any(count > 0 and tool_satisfies(item, required) for item, count in inventory.items())
