"""Command-line entry point.

Subcommands:
    run <scenario>   simulate and write config.json + events.jsonl (+ stores)
    analyze <log>    compute metrics (CSV + figures) from an event log
    replay <log>     re-derive world state from the log, verify invariants
    validate <cfg>   validate a config file

Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from . import engine, scenarios
from .engine import ConfigError, SimulationConfig
from .events import EventLog, load_events
from .lm import RecordingBackend, RemoteBackend, ReplayBackend

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="polisim")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario")
    p_run.add_argument("scenario", choices=scenarios.SCENARIO_NAMES)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--horizon", type=int, default=None)
    p_run.add_argument("--scale", type=float, default=1.0)
    p_run.add_argument("--lm", choices=("scripted", "remote", "replay", "record"),
                       default="scripted")
    p_run.add_argument("--lm-store", default=None, help="record/replay store path")
    p_run.add_argument("--out", default="out")
    p_run.add_argument("--workers", type=int, default=0)
    p_run.add_argument("--village", choices=("normal", "martial", "art"), default="normal")
    p_run.add_argument("--influencers", choices=("anti", "pro"), default="anti")
    p_run.add_argument("--frozen", action="store_true")

    p_an = sub.add_parser("analyze", help="compute metrics from an event log")
    p_an.add_argument("log")
    p_an.add_argument("--metric", default=None)
    p_an.add_argument("--all", action="store_true", help="emit the full figure bundle")
    p_an.add_argument("--config", default=None, help="config.json (default: next to the log)")
    p_an.add_argument("--out", default=None, help="output dir (default: <log dir>/metrics)")
    p_an.add_argument("--no-plots", action="store_true")

    p_re = sub.add_parser("replay", help="verify invariants from an event log")
    p_re.add_argument("log")
    p_re.add_argument("--config", default=None)

    p_va = sub.add_parser("validate", help="validate a config file")
    p_va.add_argument("config")
    return parser


def _make_backend(args, config: SimulationConfig):
    if args.lm == "scripted":
        return scenarios.scripted_backend_for(config)
    if args.lm == "replay":
        if not args.lm_store:
            raise ConfigError("--lm replay requires --lm-store")
        return ReplayBackend(args.lm_store)
    endpoint = os.environ.get("POLISIM_LM_ENDPOINT")
    if not endpoint:
        raise ConfigError("remote backend needs POLISIM_LM_ENDPOINT")
    remote = RemoteBackend(endpoint, api_key=os.environ.get("POLISIM_LM_KEY"))
    if args.lm == "record":
        if not args.lm_store:
            raise ConfigError("--lm record requires --lm-store")
        return RecordingBackend(remote, args.lm_store)
    return remote


def cmd_run(args) -> int:
    overrides: dict = {"seed": args.seed, "scale": args.scale, "workers": args.workers}
    if args.horizon is not None:
        overrides["horizon"] = args.horizon
    if args.scenario == "specialization":
        overrides["village"] = args.village
    if args.scenario == "collective-rules":
        overrides["influencers"] = args.influencers
        overrides["frozen"] = args.frozen
    config = scenarios.build(args.scenario, **overrides)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(
        json.dumps(config.to_dict(), indent=1, sort_keys=True), encoding="utf-8"
    )
    world = scenarios.world_from_config(config)
    lm = _make_backend(args, config)
    log = EventLog(out / "events.jsonl", keep_in_memory=False)
    hooks = scenarios.hooks_for(config, out_dir=out)
    engine.run(config, lm, world, log=log, hooks=hooks)
    final = {
        "inventories": {a: dict(sorted(inv.items())) for a, inv in world.inventories.items()},
        "chests": {c: dict(sorted(items.items())) for c, items in world.chests.items()},
    }
    (out / "final_state.json").write_text(
        json.dumps(final, indent=1, sort_keys=True), encoding="utf-8"
    )
    print(f"wrote {out / 'events.jsonl'} ({log.count} events)")
    print(f"log sha256: {log.sha256()}")
    return EXIT_OK


def _load_config_for(log_path: Path, config_arg: str | None) -> SimulationConfig:
    path = Path(config_arg) if config_arg else log_path.parent / "config.json"
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    return SimulationConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))


def cmd_analyze(args) -> int:
    log_path = Path(args.log)
    config = _load_config_for(log_path, args.config)
    events = load_events(log_path)
    out = Path(args.out) if args.out else log_path.parent / "metrics"
    from .analytics.metrics import FIGURE_BUNDLE, run_metric

    names = list(FIGURE_BUNDLE) if args.all else [args.metric]
    if not names or names == [None]:
        raise ConfigError("analyze needs --metric NAME or --all")
    for name in names:
        csv_path = run_metric(name, events, config, out, plot=not args.no_plots)
        print(f"{name}: {csv_path}")
    return EXIT_OK


def cmd_replay(args) -> int:
    log_path = Path(args.log)
    config = _load_config_for(log_path, args.config)
    events = load_events(log_path)
    from .analytics.replay import verify

    report = verify(events, config)
    final_path = log_path.parent / "final_state.json"
    if final_path.exists():
        recorded = json.loads(final_path.read_text(encoding="utf-8"))
        derived = {
            a: {k: v for k, v in inv.items() if v > 0}
            for a, inv in report.final_inventories.items()
        }
        recorded_inv = {
            a: {k: v for k, v in inv.items() if v > 0}
            for a, inv in recorded.get("inventories", {}).items()
        }
        if derived != recorded_inv:
            report.violations.append("re-derived inventories differ from final_state.json")
    print(f"checked {report.craft_checked} craft events")
    if report.violations:
        for v in report.violations[:50]:
            print(f"violation: {v}", file=sys.stderr)
        print(f"{len(report.violations)} invariant violation(s)", file=sys.stderr)
        return EXIT_RUNTIME
    print("all invariants hold")
    return EXIT_OK


def cmd_validate(args) -> int:
    config = SimulationConfig.from_dict(
        json.loads(Path(args.config).read_text(encoding="utf-8"))
    )
    config.validate()
    print(f"config ok: {len(config.agents)} agents, horizon {config.horizon}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return cmd_run(args)
        if args.command == "analyze":
            return cmd_analyze(args)
        if args.command == "replay":
            return cmd_replay(args)
        if args.command == "validate":
            return cmd_validate(args)
        return EXIT_VALIDATION
    except (ConfigError, KeyError, FileNotFoundError, json.JSONDecodeError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as err:  # runtime failures
        print(f"runtime error: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
