from __future__ import annotations

import json
from pathlib import Path

import pytest

from polisim.cli import EXIT_OK, EXIT_RUNTIME, EXIT_VALIDATION, main


@pytest.fixture(scope="module")
def chef_out(tmp_path_factory) -> Path:
    out = tmp_path_factory.mktemp("chefrun")
    code = main(["run", "chef", "--seed", "2", "--out", str(out)])
    assert code == EXIT_OK
    return out


def test_run_writes_artifacts(chef_out):
    assert (chef_out / "config.json").exists()
    assert (chef_out / "events.jsonl").exists()
    assert (chef_out / "final_state.json").exists()


def test_run_is_deterministic(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["run", "chef", "--seed", "5", "--out", str(out1)]) == EXIT_OK
    assert main(["run", "chef", "--seed", "5", "--out", str(out2)]) == EXIT_OK
    assert (out1 / "events.jsonl").read_bytes() == (out2 / "events.jsonl").read_bytes()


def test_analyze_metric_csv(chef_out):
    assert main(["analyze", str(chef_out / "events.jsonl"), "--metric", "coherence",
                 "--no-plots"]) == EXIT_OK
    assert (chef_out / "metrics" / "coherence.csv").exists()


def test_analyze_unknown_metric(chef_out):
    assert main(["analyze", str(chef_out / "events.jsonl"), "--metric", "vibes"]) \
        == EXIT_VALIDATION


def test_analyze_emits_plot(chef_out):
    assert main(["analyze", str(chef_out / "events.jsonl"), "--metric",
                 "sentiment_asymmetry"]) == EXIT_OK
    assert (chef_out / "metrics" / "sentiment_asymmetry.png").exists()


def test_analyze_all_emits_figure_bundle(chef_out):
    assert main(["analyze", str(chef_out / "events.jsonl"), "--all"]) == EXIT_OK
    from polisim.analytics.metrics import FIGURE_BUNDLE

    for name in FIGURE_BUNDLE:
        assert (chef_out / "metrics" / f"{name}.csv").exists(), name


def test_replay_verifies(chef_out):
    assert main(["replay", str(chef_out / "events.jsonl")]) == EXIT_OK


def test_replay_detects_tampered_craft(chef_out, tmp_path):
    tampered = tmp_path / "tampered"
    tampered.mkdir()
    lines = (chef_out / "events.jsonl").read_text().splitlines()
    fake = {
        "tick": 1, "agent": "Chef", "module": "world", "kind": "action",
        "payload": {"id": "Chef:t1", "kind": "craft", "args": {"item": "iron_pickaxe"},
                    "label": "craft iron_pickaxe", "status": "succeeded",
                    "detail": "crafted 1 iron_pickaxe", "x": 30.0, "z": 30.0,
                    "deltas": {"iron_pickaxe": 1, "iron_ingot": -3, "stick": -2}},
    }
    lines.insert(10, json.dumps(fake))
    (tampered / "events.jsonl").write_text("\n".join(lines) + "\n")
    (tampered / "config.json").write_text((chef_out / "config.json").read_text())
    assert main(["replay", str(tampered / "events.jsonl")]) == EXIT_RUNTIME


def test_validate_good_and_bad(chef_out, tmp_path):
    assert main(["validate", str(chef_out / "config.json")]) == EXIT_OK
    broken = json.loads((chef_out / "config.json").read_text())
    broken["agents"][0]["spawn_location"]["x"] = 99999.0
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(broken))
    assert main(["validate", str(bad)]) == EXIT_VALIDATION


def test_missing_config_is_validation_error(tmp_path):
    lonely = tmp_path / "events.jsonl"
    lonely.write_text("")
    assert main(["replay", str(lonely)]) == EXIT_VALIDATION
