"""Append-only simulation event log.

One JSON object per line, canonical encoding (sorted keys, no whitespace)
so identical runs produce byte-identical files. Event kinds: action,
utterance, commit, lm_call, deposit, vote, fault.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

KINDS = ("action", "utterance", "commit", "lm_call", "deposit", "vote", "fault")


@dataclass(frozen=True)
class Event:
    tick: int
    agent: str
    module: str
    kind: str
    payload: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {
            "tick": self.tick,
            "agent": self.agent,
            "module": self.module,
            "kind": self.kind,
            "payload": self.payload,
        }


def dumps(event: Event) -> str:
    return json.dumps(event.to_dict(), sort_keys=True, separators=(",", ":"), ensure_ascii=True)


class EventLog:
    """Event sink; keeps events in memory and optionally streams to a file."""

    def __init__(self, path: str | Path | None = None, *, keep_in_memory: bool = True) -> None:
        self.path = Path(path) if path is not None else None
        self.keep_in_memory = keep_in_memory or path is None
        self.events: list[Event] = []
        self.count = 0
        self._fh = self.path.open("w", encoding="utf-8") if self.path else None

    def append(self, event: Event) -> None:
        if event.kind not in KINDS:
            raise ValueError(f"unknown event kind {event.kind!r}")
        self.count += 1
        if self._fh is not None:
            self._fh.write(dumps(event))
            self._fh.write("\n")
        if self.keep_in_memory:
            self.events.append(event)

    def close(self) -> None:
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    def __iter__(self) -> Iterator[Event]:
        if self.keep_in_memory:
            return iter(self.events)
        if self.path is not None:
            return iter_events(self.path)
        return iter(())

    def sha256(self) -> str:
        if self.path is not None:
            self.close()
            return hashlib.sha256(self.path.read_bytes()).hexdigest()
        h = hashlib.sha256()
        for ev in self.events:
            h.update(dumps(ev).encode())
            h.update(b"\n")
        return h.hexdigest()


def iter_events(path: str | Path) -> Iterator[Event]:
    with Path(path).open("r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            yield Event(
                tick=d["tick"],
                agent=d["agent"],
                module=d["module"],
                kind=d["kind"],
                payload=d["payload"],
            )


def load_events(source: str | Path | Iterable[Event]) -> list[Event]:
    if isinstance(source, (str, Path)):
        return list(iter_events(source))
    return list(source)
