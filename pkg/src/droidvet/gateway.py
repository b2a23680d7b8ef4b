"""Model backends: live HTTP providers and deterministic scripted playback.

The Gateway wraps every provider call with wall-clock enforcement,
tool-call schema checking (one correctable retry), and per-call token
accounting. An Exchange is recorded for every call, including failures,
so ledger totals always equal the sum over calls.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import json
import logging
import math
import os
import re
import time
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path

import requests

from .errors import ProviderError, SchemaError, TimeoutExceeded

log = logging.getLogger("droidvet.gateway")

DEFAULT_CALL_TIMEOUT_S = 300


@dataclass(frozen=True)
class ToolCallRequest:
    tool: str
    args: dict

    def to_dict(self) -> dict:
        return {"tool": self.tool, "args": self.args}


@dataclass(frozen=True)
class ModelTurn:
    text: str | None = None
    tool_calls: tuple[ToolCallRequest, ...] = ()
    refusal: str | None = None

    @classmethod
    def from_dict(cls, d: dict) -> "ModelTurn":
        return cls(
            text=d.get("text"),
            tool_calls=tuple(ToolCallRequest(c["tool"], c.get("args", {}))
                             for c in d.get("tool_calls", [])),
            refusal=d.get("refusal"),
        )

    def to_dict(self) -> dict:
        out: dict = {}
        if self.text is not None:
            out["text"] = self.text
        if self.tool_calls:
            out["tool_calls"] = [c.to_dict() for c in self.tool_calls]
        if self.refusal is not None:
            out["refusal"] = self.refusal
        return out


@dataclass(frozen=True)
class ModelConfig:
    provider: str
    model: str
    price_per_mtok_input: Decimal = Decimal(0)
    price_per_mtok_output: Decimal = Decimal(0)
    reasoning_budget: int | None = None
    call_timeout_s: int = DEFAULT_CALL_TIMEOUT_S

    def __post_init__(self):
        if self.price_per_mtok_input < 0 or self.price_per_mtok_output < 0:
            raise ValueError("prices must be non-negative")
        if self.call_timeout_s <= 0:
            raise ValueError("timeout must be positive")


@dataclass(frozen=True)
class Exchange:
    request_digest: str
    prompt_tokens: int
    completion_tokens: int
    latency_ms: float
    outcome: str          # ok | timeout | provider_error
    agent: str = ""       # which pipeline role issued the call


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / 4)


def conversation_digest(conversation: list[dict], normalize: bool = True) -> str:
    if normalize:
        norm = [(m.get("role", ""), re.sub(r"\s+", " ", str(m.get("content", ""))).strip())
                for m in conversation]
    else:
        norm = [(m.get("role", ""), m.get("content", "")) for m in conversation]
    blob = json.dumps(norm, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class ModelProvider:
    """One model endpoint. generate() returns (turn, prompt_toks, completion_toks)."""

    def generate(self, conversation: list[dict], tool_manifest: list[dict],
                 config: ModelConfig) -> tuple[ModelTurn, int, int]:
        raise NotImplementedError


class ScriptedProvider(ModelProvider):
    """Deterministic playback for tests and offline runs.

    sequence mode replays turns in order (optionally looping); digest
    mode keys recorded turns by a normalized conversation digest, with
    an exact-match option for strict golden tests.
    """

    def __init__(self, turns: list[dict] | None = None, *, loop: bool = False,
                 by_digest: dict[str, dict] | None = None, normalize: bool = True):
        self.turns = [t if isinstance(t, ModelTurn) else ModelTurn.from_dict(t)
                      for t in (turns or [])]
        self.loop = loop
        self.by_digest = {k: ModelTurn.from_dict(v)
                          for k, v in (by_digest or {}).items()}
        self.normalize = normalize
        self.cursor = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ScriptedProvider":
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(turns=doc.get("turns"), loop=doc.get("loop", False),
                   by_digest=doc.get("by_digest"),
                   normalize=doc.get("normalize", True))

    def reset(self) -> None:
        self.cursor = 0

    def generate(self, conversation, tool_manifest, config):
        if self.by_digest:
            digest = conversation_digest(conversation, self.normalize)
            turn = self.by_digest.get(digest)
            if turn is None:
                raise ProviderError(f"no scripted turn for digest {digest[:12]}...")
        else:
            if self.cursor >= len(self.turns):
                if not self.loop or not self.turns:
                    raise ProviderError("scripted provider ran out of turns")
                self.cursor = 0
            turn = self.turns[self.cursor]
            self.cursor += 1
        prompt_toks = sum(estimate_tokens(str(m.get("content", "")))
                          for m in conversation)
        completion = turn.text or json.dumps([c.to_dict() for c in turn.tool_calls])
        return turn, prompt_toks, estimate_tokens(completion)


class HttpProvider(ModelProvider):
    """Chat-completions style HTTP provider; credentials via environment."""

    def __init__(self, base_url: str, api_key_env: str = "DROIDVET_API_KEY"):
        self.base_url = base_url.rstrip("/")
        self.api_key_env = api_key_env

    def _reasoning_fields(self, config: ModelConfig) -> dict:
        if config.reasoning_budget is None:
            return {}
        provider = config.provider.lower()
        if "gemini" in provider or "google" in provider:
            return {"extra_body": {"thinkingConfig": {
                "thinkingBudget": config.reasoning_budget}}}
        if "openai" in provider:
            return {"reasoning_effort": "medium"}
        log.warning("provider %s ignores reasoning_budget", config.provider)
        return {}

    def generate(self, conversation, tool_manifest, config):
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {
            "model": config.model,
            "messages": conversation,
            "tools": [{"type": "function",
                       "function": {"name": t["name"],
                                    "description": t.get("description", ""),
                                    "parameters": {
                                        "type": "object",
                                        "properties": {
                                            p["name"]: {"type": "string"}
                                            for p in t.get("params", [])},
                                        "required": [p["name"]
                                                     for p in t.get("params", [])
                                                     if p.get("required")]}}}
                      for t in tool_manifest],
            **self._reasoning_fields(config),
        }
        try:
            resp = requests.post(f"{self.base_url}/chat/completions", json=body,
                                 headers=headers, timeout=config.call_timeout_s)
        except requests.exceptions.Timeout as exc:
            raise TimeoutExceeded(
                f"provider call exceeded {config.call_timeout_s}s") from exc
        except requests.exceptions.RequestException as exc:
            raise ProviderError(str(exc)) from exc
        if resp.status_code != 200:
            raise ProviderError(f"provider returned {resp.status_code}",
                                status=resp.status_code)
        doc = resp.json()
        message = doc["choices"][0]["message"]
        calls = tuple(
            ToolCallRequest(tc["function"]["name"],
                            json.loads(tc["function"].get("arguments") or "{}"))
            for tc in message.get("tool_calls") or ())
        usage = doc.get("usage", {})
        return (ModelTurn(text=message.get("content"), tool_calls=calls),
                int(usage.get("prompt_tokens", 0)),
                int(usage.get("completion_tokens", 0)))


@dataclass
class ModelEndpoint:
    provider: ModelProvider
    config: ModelConfig
    agent_name: str = ""

    @property
    def backend_id(self) -> str:
        return f"{self.config.provider}:{self.config.model}"


class Gateway:
    """Shared call path: timeout fence, schema check with one retry,
    exchange accounting."""

    def __init__(self):
        self.exchanges: list[Exchange] = []

    def _record(self, digest: str, prompt: int, completion: int,
                latency_ms: float, outcome: str, agent: str) -> None:
        self.exchanges.append(Exchange(
            request_digest=digest, prompt_tokens=prompt,
            completion_tokens=completion, latency_ms=latency_ms,
            outcome=outcome, agent=agent))

    def _call(self, endpoint: ModelEndpoint, conversation, tool_manifest):
        digest = conversation_digest(conversation)
        started = time.monotonic()
        # run the provider on a worker so a hung call cannot block the
        # session past its budget; the worker is abandoned on timeout
        pool = concurrent.futures.ThreadPoolExecutor(max_workers=1)
        try:
            future = pool.submit(endpoint.provider.generate, conversation,
                                 tool_manifest, endpoint.config)
            try:
                turn, prompt_toks, completion_toks = future.result(
                    timeout=endpoint.config.call_timeout_s)
            except concurrent.futures.TimeoutError:
                self._record(digest, 0, 0, (time.monotonic() - started) * 1000,
                             "timeout", endpoint.agent_name)
                raise TimeoutExceeded(
                    f"model call exceeded {endpoint.config.call_timeout_s}s") from None
            except TimeoutExceeded:
                self._record(digest, 0, 0, (time.monotonic() - started) * 1000,
                             "timeout", endpoint.agent_name)
                raise
            except Exception:
                self._record(digest, 0, 0, (time.monotonic() - started) * 1000,
                             "provider_error", endpoint.agent_name)
                raise
        finally:
            pool.shutdown(wait=False, cancel_futures=True)
        self._record(digest, prompt_toks, completion_toks,
                     (time.monotonic() - started) * 1000, "ok",
                     endpoint.agent_name)
        return turn

    @staticmethod
    def _schema_problem(turn: ModelTurn, tool_manifest: list[dict]) -> str | None:
        by_name: dict[str, dict] = {}
        for t in tool_manifest:
            by_name[t["name"]] = t
            if t.get("alias"):
                by_name[t["alias"]] = t
        for call in turn.tool_calls:
            spec = by_name.get(call.tool)
            if spec is None:
                return f"unknown tool {call.tool!r}"
            if not isinstance(call.args, dict):
                return f"arguments for {call.tool} must be an object"
            for p in spec.get("params", []):
                if p.get("required") and p["name"] not in call.args:
                    return f"call to {call.tool} is missing required " \
                           f"argument {p['name']!r}"
        return None

    def complete(self, endpoint: ModelEndpoint, conversation: list[dict],
                 tool_manifest: list[dict]) -> ModelTurn:
        """One model turn: assistant text, tool-call requests validated
        against the manifest (retried once on schema problems), or a
        typed refusal."""
        if not conversation:
            raise SchemaError("conversation must be non-empty")
        turn = self._call(endpoint, conversation, tool_manifest)
        problem = self._schema_problem(turn, tool_manifest)
        if problem is not None:
            retry_conversation = conversation + [
                {"role": "assistant", "content": json.dumps(turn.to_dict())},
                {"role": "user",
                 "content": f"Your tool call was invalid: {problem}. "
                            "Reply again with corrected arguments."}]
            turn = self._call(endpoint, retry_conversation, tool_manifest)
            problem = self._schema_problem(turn, tool_manifest)
            if problem is not None:
                raise SchemaError(f"tool call invalid after retry: {problem}")
        return turn

    def total_tokens(self) -> tuple[int, int]:
        return (sum(e.prompt_tokens for e in self.exchanges),
                sum(e.completion_tokens for e in self.exchanges))


def cost_of(usage: list[Exchange], config: ModelConfig) -> Decimal:
    """Exact-decimal spend for a sequence of exchanges under one price card."""
    prompt = sum(e.prompt_tokens for e in usage)
    completion = sum(e.completion_tokens for e in usage)
    return (Decimal(prompt) * config.price_per_mtok_input
            + Decimal(completion) * config.price_per_mtok_output) / Decimal(10**6)
