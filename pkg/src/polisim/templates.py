"""Prompt templates, stored as external text files with named placeholders."""

from __future__ import annotations

import re
from functools import lru_cache
from importlib import resources

_IDENT = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class TemplateError(Exception):
    pass


@lru_cache(maxsize=None)
def load(name: str) -> str:
    try:
        return (
            resources.files("polisim").joinpath("prompts", f"{name}.txt").read_text(encoding="utf-8")
        )
    except FileNotFoundError as err:
        raise TemplateError(f"unknown template {name!r}") from err


def placeholders(name: str) -> tuple[str, ...]:
    return tuple(dict.fromkeys(_IDENT.findall(load(name))))


def fill(name: str, /, **values: object) -> str:
    """Fill every placeholder; missing or leftover placeholders are errors."""
    text = load(name)
    needed = set(_IDENT.findall(text))
    missing = needed - set(values)
    if missing:
        raise TemplateError(f"template {name!r} missing values for {sorted(missing)}")
    for key in needed:
        text = text.replace("{" + key + "}", str(values[key]))
    leftover = _IDENT.search(text)
    if leftover:
        raise TemplateError(f"unresolved placeholder {leftover.group(0)} after fill of {name!r}")
    return text


TEMPLATE_NAMES = (
    "cc_decide",
    "talk",
    "social_goal",
    "sentiment",
    "social_summary",
    "reflect",
    "role_infer",
    "meme_summary",
    "constitutional_feedback",
    "amendment_creation",
    "amendment_voting",
    "tally",
    "constitution_change",
)
