"""Language-model backends behind one interface.

The scripted backend is the workhorse: an ordered rule table (substring or
regex matchers over the filled prompt, responses either literal strings or
deterministic generator functions) plus a mandatory per-template default, so
it is total and never errors. The remote backend does a single JSON POST;
record/replay wrappers key completions by sha256(template_name + NUL + prompt).
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping


class LmError(Exception):
    pass


class LmTimeout(LmError):
    pass


class LmUnavailable(LmError):
    pass


class ReplayMiss(LmError):
    def __init__(self, template_name: str) -> None:
        super().__init__(f"no recorded completion for template {template_name!r}")
        self.template_name = template_name


_PLACEHOLDER = re.compile(r"\{[a-z_][a-z0-9_]*\}")


@dataclass
class LmRequest:
    template_name: str
    filled_prompt: str
    model_hint: str = "scripted"
    max_latency: int = 0
    # Engine context for scripted generators (agent, tick, module); never part
    # of the replay hash.
    meta: Mapping[str, Any] = field(default_factory=dict)

    def validate(self) -> None:
        m = _PLACEHOLDER.search(self.filled_prompt)
        if m:
            raise LmError(f"unresolved placeholder {m.group(0)} in prompt")


@dataclass(frozen=True)
class LmResult:
    text: str
    latency: int = 0  # ticks until the completion "arrives"


def request_hash(req: LmRequest) -> str:
    h = hashlib.sha256()
    h.update(req.template_name.encode())
    h.update(b"\x00")
    h.update(req.filled_prompt.encode())
    return h.hexdigest()


Responder = str | Callable[[LmRequest], str]


@dataclass
class Rule:
    """First matching rule wins; ``template`` None matches any template."""

    template: str | None
    contains: str | None = None
    pattern: str | None = None
    response: Responder = ""
    latency: int = 0

    def matches(self, req: LmRequest) -> bool:
        if self.template is not None and self.template != req.template_name:
            return False
        if self.contains is not None and self.contains not in req.filled_prompt:
            return False
        if self.pattern is not None and re.search(self.pattern, req.filled_prompt) is None:
            return False
        return True

    def respond(self, req: LmRequest) -> str:
        if callable(self.response):
            return self.response(req)
        return self.response


class Backend:
    def complete(self, req: LmRequest) -> LmResult:  # pragma: no cover - interface
        raise NotImplementedError


class ScriptedBackend(Backend):
    """Deterministic rule/replay-driven policy. Total: every request resolves."""

    def __init__(
        self,
        rules: list[Rule] | None = None,
        defaults: Mapping[str, str] | None = None,
        fallback: str = "",
    ) -> None:
        self.rules = list(rules or [])
        self.defaults = dict(defaults or {})
        self.fallback = fallback

    def complete(self, req: LmRequest) -> LmResult:
        req.validate()
        for rule in self.rules:
            if rule.matches(req):
                return LmResult(text=rule.respond(req), latency=rule.latency)
        if req.template_name in self.defaults:
            return LmResult(text=self.defaults[req.template_name])
        return LmResult(text=self.fallback)


class RemoteBackend(Backend):
    """Single JSON POST {prompt, model} -> {text}; one retry on transport error."""

    def __init__(
        self,
        endpoint: str,
        *,
        api_key: str | None = None,
        timeout_s: float = 30.0,
        max_in_flight: int = 8,
    ) -> None:
        self.endpoint = endpoint
        self.api_key = api_key
        self.timeout_s = timeout_s
        self._slots = threading.Semaphore(max_in_flight)

    def complete(self, req: LmRequest) -> LmResult:
        req.validate()
        body = json.dumps({"prompt": req.filled_prompt, "model": req.model_hint}).encode()
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_err: Exception | None = None
        with self._slots:
            for _ in range(2):  # initial try + one retry
                try:
                    http_req = urllib.request.Request(self.endpoint, data=body, headers=headers)
                    with urllib.request.urlopen(http_req, timeout=self.timeout_s) as resp:
                        payload = json.loads(resp.read().decode())
                    return LmResult(text=str(payload["text"]))
                except TimeoutError as err:
                    raise LmTimeout(str(err)) from err
                except urllib.error.URLError as err:
                    if isinstance(err.reason, TimeoutError):
                        raise LmTimeout(str(err)) from err
                    last_err = err
                except (OSError, KeyError, json.JSONDecodeError) as err:
                    last_err = err
        raise LmUnavailable(str(last_err))


class RecordingBackend(Backend):
    """Pass-through that appends (hash -> completion) pairs to a JSONL store."""

    def __init__(self, inner: Backend, store: str | Path) -> None:
        self.inner = inner
        self.store = Path(store)
        self._fh = self.store.open("a", encoding="utf-8")
        self._lock = threading.Lock()

    def complete(self, req: LmRequest) -> LmResult:
        result = self.inner.complete(req)
        line = json.dumps(
            {"hash": request_hash(req), "template": req.template_name, "completion": result.text},
            sort_keys=True,
            separators=(",", ":"),
        )
        with self._lock:
            self._fh.write(line + "\n")
            self._fh.flush()
        return result

    def close(self) -> None:
        self._fh.close()


class ReplayBackend(Backend):
    """Serves completions recorded by :class:`RecordingBackend`; fails on miss."""

    def __init__(self, store: str | Path) -> None:
        self.store = Path(store)
        self._by_hash: dict[str, str] = {}
        with self.store.open("r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                d = json.loads(line)
                self._by_hash[d["hash"]] = d["completion"]

    def complete(self, req: LmRequest) -> LmResult:
        req.validate()
        key = request_hash(req)
        if key not in self._by_hash:
            raise ReplayMiss(req.template_name)
        return LmResult(text=self._by_hash[key])
