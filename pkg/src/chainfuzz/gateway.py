"""Chat-model access with prompt templating and record/replay cassettes.

Every pipeline stage talks to the model through ``LlmGateway.complete`` so a
recorded cassette makes the whole pipeline deterministic offline.  Requests
are keyed by a fingerprint over the normalized request (whitespace runs
collapsed, JSON keys ordered), so cosmetic template edits keep cassettes
valid.
"""

from __future__ import annotations

import hashlib
import json
import re
import string
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from . import templates as T
from .errors import MissingSlot, RateLimited, ReplayMiss, TransportError, UnknownSlot

TEMPLATE_NAMES = (
    "condition_analysis",
    "harness_generation",
    "input_generation",
    "mutator_generation",
    "repair_refinement",
)

MODES = ("record", "replay", "live")

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_TOKENS = 4096
API_KEY_ENV = "CHAINFUZZ_API_KEY"


@dataclass(frozen=True)
class PromptTemplate:
    name: str
    body: str
    required_slots: tuple[str, ...]

    def __post_init__(self):
        if self.name not in TEMPLATE_NAMES:
            raise ValueError(f"unknown template name {self.name!r}")
        declared = self.slot_names()
        for slot in self.required_slots:
            if slot not in declared:
                raise ValueError(f"required slot {slot!r} does not appear in template body")

    def slot_names(self) -> set[str]:
        return {
            m.group("named") or m.group("braced")
            for m in string.Template.pattern.finditer(self.body)
            if m.group("named") or m.group("braced")
        }


def render(template: PromptTemplate, slots: dict[str, str]) -> str:
    """Substitute every placeholder; reject missing required or unknown slots."""
    declared = template.slot_names()
    for name in slots:
        if name not in declared:
            raise UnknownSlot(name)
    for name in template.required_slots:
        if name not in slots:
            raise MissingSlot(name)
    filled = {name: "" for name in declared}
    filled.update({k: str(v) for k, v in slots.items()})
    return string.Template(template.body).substitute(filled)


BUILTIN_TEMPLATES = {
    "condition_analysis": PromptTemplate(
        name="condition_analysis",
        body=T.CONDITION_ANALYSIS,
        required_slots=("caller_name", "callee_name", "caller_source"),
    ),
    "harness_generation": PromptTemplate(
        name="harness_generation",
        body=T.HARNESS_GENERATION,
        required_slots=(
            "target_description",
            "call_chain",
            "entry_function",
            "execution_conditions",
            "function_sources",
            "template_source",
        ),
    ),
    "input_generation": PromptTemplate(
        name="input_generation",
        body=T.INPUT_GENERATION,
        required_slots=("execution_conditions", "harness_source", "attempt"),
    ),
    "mutator_generation": PromptTemplate(
        name="mutator_generation",
        body=T.MUTATOR_GENERATION,
        required_slots=(
            "step",
            "step_instructions",
            "target_description",
            "target_source",
            "seed_script",
            "api_docs",
            "examples",
        ),
    ),
    "repair_refinement": PromptTemplate(
        name="repair_refinement",
        body=T.REPAIR_REFINEMENT,
        required_slots=("phase", "task_instructions", "error_query", "context", "working_material"),
    ),
}


# --- fingerprinting --------------------------------------------------------


def normalize_request(request: dict) -> dict:
    """Canonical request form: whitespace runs collapsed in the prompt,
    scalar parameters coerced to stable types."""
    return {
        "model": str(request.get("model", "")),
        "prompt": re.sub(r"\s+", " ", str(request.get("prompt", ""))).strip(),
        "temperature": float(request.get("temperature", DEFAULT_TEMPERATURE)),
        "max_tokens": int(request.get("max_tokens", DEFAULT_MAX_TOKENS)),
    }


def fingerprint(request: dict) -> str:
    canon = json.dumps(normalize_request(request), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


@dataclass(frozen=True)
class ChatExchange:
    request: dict
    response: str

    @property
    def fingerprint(self) -> str:
        return fingerprint(self.request)


# --- cassette --------------------------------------------------------------


class Cassette:
    """Append-only JSONL exchange log keyed by request fingerprint.

    One exchange per line: {"fingerprint": ..., "request": {...}, "response": ...}.
    Replay lookups never mutate the file; duplicate keys resolve to the
    latest entry.
    """

    def __init__(self, path):
        self.path = Path(path)
        self._entries: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                if not line.strip():
                    continue
                row = json.loads(line)
                self._entries[row["fingerprint"]] = row["response"]

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, fp: str) -> bool:
        return fp in self._entries

    def lookup(self, fp: str) -> str | None:
        return self._entries.get(fp)

    def append(self, exchange: ChatExchange) -> None:
        fp = exchange.fingerprint
        row = json.dumps(
            {"fingerprint": fp, "request": exchange.request, "response": exchange.response}
        )
        with self._lock:
            self._entries[fp] = exchange.response
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with self.path.open("a", encoding="utf-8") as fh:
                fh.write(row + "\n")


# --- transports ------------------------------------------------------------


class HttpTransport:
    """Minimal chat-completions client (OpenAI-style JSON shape).

    The credential comes from the CHAINFUZZ_API_KEY environment variable;
    endpoint and model are configuration.
    """

    def __init__(self, endpoint: str, timeout: float = 120.0, api_key_env: str = API_KEY_ENV):
        self.endpoint = endpoint
        self.timeout = timeout
        self.api_key_env = api_key_env

    def __call__(self, request: dict) -> str:
        import os

        import requests

        key = os.environ.get(self.api_key_env, "")
        if not key:
            raise TransportError(f"no API credential in ${self.api_key_env}")
        payload = {
            "model": request["model"],
            "messages": [{"role": "user", "content": request["prompt"]}],
            "temperature": request.get("temperature", DEFAULT_TEMPERATURE),
            "max_tokens": request.get("max_tokens", DEFAULT_MAX_TOKENS),
        }
        try:
            resp = requests.post(
                self.endpoint,
                json=payload,
                headers={"Authorization": f"Bearer {key}"},
                timeout=self.timeout,
            )
        except requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code == 429:
            raise RateLimited(retry_after=_retry_after_seconds(resp))
        if resp.status_code != 200:
            raise TransportError(f"endpoint returned {resp.status_code}: {resp.text[:200]}")
        try:
            return resp.json()["choices"][0]["message"]["content"]
        except (KeyError, IndexError, ValueError) as exc:
            raise TransportError(f"unexpected response shape: {exc}") from exc


def _retry_after_seconds(resp):
    try:
        return float(resp.headers.get("Retry-After", ""))
    except (TypeError, ValueError):
        return None


# --- gateway ---------------------------------------------------------------


@dataclass
class GatewayConfig:
    mode: str = "replay"
    cassette_path: str | None = None
    endpoint: str = ""
    model: str = "offline"
    temperature: float = DEFAULT_TEMPERATURE
    max_tokens: int = DEFAULT_MAX_TOKENS
    retry_cap: int = 5
    backoff_base: float = 0.5


@dataclass
class LlmGateway:
    config: GatewayConfig
    transport: object = None  # callable(request dict) -> response text
    cassette: Cassette | None = None
    calls_made: int = field(default=0, init=False)

    def __post_init__(self):
        if self.config.mode not in MODES:
            raise ValueError(f"gateway mode must be one of {MODES}")
        if self.config.mode in ("record", "replay") and self.cassette is None:
            if not self.config.cassette_path:
                raise ValueError(f"{self.config.mode} mode requires a cassette path")
            self.cassette = Cassette(self.config.cassette_path)
        if self.config.mode in ("record", "live") and self.transport is None:
            if not self.config.endpoint:
                raise ValueError(f"{self.config.mode} mode requires an endpoint or explicit transport")
            self.transport = HttpTransport(self.config.endpoint)

    def build_request(self, prompt: str) -> dict:
        return {
            "model": self.config.model,
            "prompt": prompt,
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }

    def complete(self, prompt: str) -> str:
        """One completion. Replay returns stored bytes; record appends new
        exchanges (a fingerprint hit is served from the cassette)."""
        request = self.build_request(prompt)
        fp = fingerprint(request)
        self.calls_made += 1
        if self.config.mode == "replay":
            stored = self.cassette.lookup(fp)
            if stored is None:
                raise ReplayMiss(fp)
            return stored
        if self.config.mode == "record":
            stored = self.cassette.lookup(fp)
            if stored is not None:
                return stored
            response = self._call_transport(request)
            self.cassette.append(ChatExchange(request=request, response=response))
            return response
        return self._call_transport(request)

    def _call_transport(self, request: dict) -> str:
        delay = self.config.backoff_base
        for attempt in range(self.config.retry_cap + 1):
            try:
                return self.transport(request)
            except RateLimited as exc:
                if attempt == self.config.retry_cap:
                    raise
                time.sleep(exc.retry_after if exc.retry_after is not None else delay)
                delay *= 2
        raise TransportError("unreachable")


def make_offline_gateway(responder, cassette_path=None, mode: str = "live", model: str = "offline") -> LlmGateway:
    """Gateway over an in-process responder callable (testing/scripted use).

    ``responder`` receives the rendered prompt and returns the response text.
    """
    return LlmGateway(
        config=GatewayConfig(mode=mode, cassette_path=str(cassette_path) if cassette_path else None, model=model),
        transport=lambda request: responder(request["prompt"]),
    )
