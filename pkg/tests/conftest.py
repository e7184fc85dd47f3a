from __future__ import annotations

import pytest

from polisim import scenarios
from polisim.engine import run
from polisim.techtree import TechTree


@pytest.fixture(scope="session")
def tree() -> TechTree:
    return TechTree.shipped()


def run_scenario(name: str, hooks=True, **overrides):
    """Build + run a scenario on the scripted backend; returns (config, events, world)."""
    import time

    config = scenarios.build(name, **overrides)
    world = scenarios.world_from_config(config)
    lm = scenarios.scripted_backend_for(config)
    started = time.time()
    log = run(
        config,
        lm,
        world,
        hooks=scenarios.hooks_for(config) if hooks else (),
    )
    config.extras["_elapsed_s"] = time.time() - started
    return config, list(log), world


@pytest.fixture(scope="session")
def chef_run():
    return run_scenario("chef", seed=2)


@pytest.fixture(scope="session")
def sentiment_room_run():
    return run_scenario("sentiment-room", seed=1)


@pytest.fixture(scope="session")
def specialization_run():
    return run_scenario("specialization", seed=7)


@pytest.fixture(scope="session")
def governance_anti_run():
    return run_scenario("collective-rules", seed=5, influencers="anti")


@pytest.fixture(scope="session")
def cultural_run():
    return run_scenario("cultural", seed=11, scale=0.2)


@pytest.fixture(scope="session")
def progression_run():
    return run_scenario("progression", seed=7)
