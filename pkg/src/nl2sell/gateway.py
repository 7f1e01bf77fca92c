"""Chat-completion backends behind one interface.

Three backends: a remote HTTP client with retry and optional recording, a
cassette replayer for byte-reproducible runs, and a rule-driven mock for
tests. Nothing outside this module talks to a language-model service.
Temperature defaults to 0 and every request/response pair can be recorded,
because the pipelines must be replayable even though live models are not.
"""

from __future__ import annotations

import hashlib
import json
import re
import threading
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Mapping, Optional, Protocol, Sequence, Union

from .prompts import InstructionSet, build_judge_prompt
from .sell.parser import SellParseError, parse
from .sell.printer import print_sell


class GatewayError(Exception):
    pass


class TimeoutError_(GatewayError):
    pass


class RateLimitedError(GatewayError):
    pass


class AuthFailureError(GatewayError):
    pass


class BackendUnavailableError(GatewayError):
    pass


class CassetteMissError(GatewayError):
    pass


class UnparseableScoreError(GatewayError):
    pass


class OutOfRangeError(GatewayError):
    pass


@dataclass(frozen=True)
class RetryPolicy:
    attempts: int = 3
    backoff: float = 0.5

    def __post_init__(self):
        if self.attempts < 1:
            raise ValueError("attempts must be >= 1")
        if self.backoff < 0:
            raise ValueError("backoff must be >= 0")


@dataclass(frozen=True)
class CompletionRequest:
    prompt: str
    model: str = "default"
    max_tokens: int = 512
    temperature: float = 0.0
    timeout: float = 30.0
    retry: RetryPolicy = field(default_factory=RetryPolicy)

    def __post_init__(self):
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")


@dataclass(frozen=True)
class CompletionResult:
    text: str
    backend_id: str
    latency: float
    payload_hash: str
    cache_hit: bool = False


class Backend(Protocol):
    backend_id: str

    def complete(self, req: CompletionRequest) -> CompletionResult: ...


def cassette_key(model: str, prompt: str, max_tokens: int) -> str:
    """Identity of a recorded exchange; template edits change the prompt and
    therefore miss loudly instead of replaying stale text."""
    payload = f"{model}\n{max_tokens}\n{prompt}".encode("utf-8")
    return hashlib.sha256(payload).hexdigest()


def _hash_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# Global in-flight cap for remote calls; reconfigure before serving traffic.
_inflight = threading.BoundedSemaphore(4)


def set_inflight_cap(limit: int) -> None:
    global _inflight
    if limit < 1:
        raise ValueError("limit must be >= 1")
    _inflight = threading.BoundedSemaphore(limit)


class RemoteChatBackend:
    """Chat-completions HTTP client: one user message per request, retries
    with exponential backoff on transient failures."""

    def __init__(self, endpoint: str, api_key: Optional[str] = None, backend_id: str = "remote"):
        self.endpoint = endpoint
        self.api_key = api_key
        self.backend_id = backend_id

    def complete(self, req: CompletionRequest) -> CompletionResult:
        import requests

        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        body = {
            "model": req.model,
            "messages": [{"role": "user", "content": req.prompt}],
            "max_tokens": req.max_tokens,
            "temperature": req.temperature,
        }
        last_error: GatewayError = BackendUnavailableError("no attempt made")
        for attempt in range(req.retry.attempts):
            if attempt:
                time.sleep(req.retry.backoff * (2 ** (attempt - 1)))
            started = time.monotonic()
            try:
                with _inflight:
                    resp = requests.post(self.endpoint, json=body, headers=headers, timeout=req.timeout)
            except requests.Timeout:
                last_error = TimeoutError_(f"{self.endpoint}: timed out after {req.timeout}s")
                continue
            except requests.RequestException as exc:
                last_error = BackendUnavailableError(f"{self.endpoint}: {exc}")
                continue
            if resp.status_code in (401, 403):
                raise AuthFailureError(f"{self.endpoint}: HTTP {resp.status_code}")
            if resp.status_code == 429:
                last_error = RateLimitedError(f"{self.endpoint}: HTTP 429")
                continue
            if resp.status_code >= 500:
                last_error = BackendUnavailableError(f"{self.endpoint}: HTTP {resp.status_code}")
                continue
            if resp.status_code != 200:
                raise BackendUnavailableError(f"{self.endpoint}: HTTP {resp.status_code}: {resp.text[:200]}")
            payload = resp.json()
            try:
                text = payload["choices"][0]["message"]["content"]
            except (KeyError, IndexError, TypeError):
                raise BackendUnavailableError(f"{self.endpoint}: malformed completion payload") from None
            return CompletionResult(
                text=text,
                backend_id=self.backend_id,
                latency=time.monotonic() - started,
                payload_hash=_hash_text(json.dumps(payload, sort_keys=True)),
            )
        raise last_error


class ReplayBackend:
    """Replays recorded completions; unknown prompts fail loudly."""

    def __init__(self, path: Union[str, Path], backend_id: str = "replay"):
        self.backend_id = backend_id
        self.path = Path(path)
        self._responses: dict = {}
        with self.path.open("r", encoding="utf-8") as f:
            for line in f:
                line = line.strip()
                if not line:
                    continue
                row = json.loads(line)
                self._responses[row["key"]] = row["response"]

    def complete(self, req: CompletionRequest) -> CompletionResult:
        key = cassette_key(req.model, req.prompt, req.max_tokens)
        if key not in self._responses:
            raise CassetteMissError(f"{self.path}: no recording for key {key[:12]}… (model={req.model})")
        text = self._responses[key]
        return CompletionResult(
            text=text,
            backend_id=self.backend_id,
            latency=0.0,
            payload_hash=_hash_text(text),
            cache_hit=True,
        )


class CassetteRecorder:
    """Wraps a backend and appends every exchange to a cassette file."""

    def __init__(self, inner: Backend, path: Union[str, Path],
                 clock: Callable = lambda: datetime.now(timezone.utc).isoformat()):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.path = Path(path)
        self.clock = clock
        self._lock = threading.Lock()

    def complete(self, req: CompletionRequest) -> CompletionResult:
        result = self.inner.complete(req)
        row = {
            "key": cassette_key(req.model, req.prompt, req.max_tokens),
            "prompt": req.prompt,
            "response": result.text,
            "model": req.model,
            "timestamp": self.clock(),
        }
        with self._lock, self.path.open("a", encoding="utf-8") as f:
            f.write(json.dumps(row, ensure_ascii=False, sort_keys=True))
            f.write("\n")
        return result


# Rules for the deterministic mock: each callable inspects the prompt and
# returns a completion or None to pass to the next rule.
Rule = Callable


def echo_last_sell_rule() -> Rule:
    """Answer with the last parseable SELL expression found in the prompt."""
    def rule(prompt: str) -> Optional[str]:
        best: Optional[str] = None
        for line in prompt.splitlines():
            candidate = line.strip()
            for label in ("Answer:", "SELL:"):
                if candidate.startswith(label):
                    candidate = candidate[len(label):].strip()
            if not candidate:
                continue
            try:
                best = print_sell(parse(candidate))
            except SellParseError:
                continue
        return best
    return rule


def demand_lookup_rule(mapping: Mapping) -> Rule:
    """Answer from a demand → completion table when the prompt names the demand."""
    def rule(prompt: str) -> Optional[str]:
        lines = [ln[len("Demand:"):].strip() for ln in prompt.splitlines() if ln.startswith("Demand:")]
        for demand in reversed(lines):
            if demand in mapping:
                return mapping[demand]
        return None
    return rule


def static_rule(text: str) -> Rule:
    return lambda prompt: text


class RuleBackend:
    """Deterministic mock: first matching rule wins."""

    def __init__(self, rules: Sequence, backend_id: str = "rule"):
        self.rules = list(rules)
        self.backend_id = backend_id

    def complete(self, req: CompletionRequest) -> CompletionResult:
        for rule in self.rules:
            text = rule(req.prompt)
            if text is not None:
                return CompletionResult(
                    text=text,
                    backend_id=self.backend_id,
                    latency=0.0,
                    payload_hash=_hash_text(text),
                )
        raise BackendUnavailableError("no rule matched the prompt")


def complete(req: CompletionRequest, backend: Backend) -> CompletionResult:
    return backend.complete(req)


_INT_RE = re.compile(r"-?\d+")


def judge_score(demand: str, prediction: str, reference: str, backend: Backend,
                instructions: InstructionSet, rubric_examples: Sequence = (),
                model: str = "default") -> int:
    """Grade a prediction 0..10 via the judge prompt; the completion must
    contain an integer and it must be in range."""
    bundle = build_judge_prompt(demand, prediction, reference, rubric_examples, instructions)
    result = backend.complete(CompletionRequest(prompt=bundle.rendered, model=model, max_tokens=8))
    match = _INT_RE.search(result.text)
    if match is None:
        raise UnparseableScoreError(f"no integer in completion: {result.text[:80]!r}")
    score = int(match.group())
    if not 0 <= score <= 10:
        raise OutOfRangeError(f"score {score} outside 0..10")
    return score
