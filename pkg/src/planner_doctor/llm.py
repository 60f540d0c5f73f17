"""Language-model backends, the structured response schema and token accounting."""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import requests

from .prompts import PromptBundle

logger = logging.getLogger(__name__)

API_KEY_ENV = "PLANNER_DOCTOR_API_KEY"
DEFAULT_TEMPERATURE = 0.6
DEFAULT_TOKEN_LIMIT = 8000


class LlmError(Exception):
    pass


class ConfigurationError(LlmError):
    pass


class TransportError(LlmError):
    """A failed request that may succeed when retried."""

    retriable = True


class ScriptExhausted(LlmError):
    pass


class TokenLimitExceeded(LlmError):
    pass


class ResponseError(ValueError):
    """The model's reply does not follow the response schema."""


class ParseError(ResponseError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at character {position})")
        self.position = position


class MissingKey(ResponseError):
    def __init__(self, key: str):
        super().__init__(f"missing response key: {key}")
        self.key = key


@dataclass(frozen=True)
class LlmParams:
    temperature: float = DEFAULT_TEMPERATURE
    token_limit: int = DEFAULT_TOKEN_LIMIT
    model_name: str = "mock"

    def __post_init__(self):
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must lie in [0, 2]")
        if self.token_limit <= 0:
            raise ValueError("token_limit must be positive")


@dataclass(frozen=True)
class DiagnosisResult:
    pairs: tuple[tuple[str, str], ...]
    patched_heuristic: str
    primitive_set_id: str

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple((str(d), str(p)) for d, p in self.pairs))
        if not self.pairs:
            raise ResponseError("the response contains no diagnoses")

    def to_dict(self) -> dict:
        return {
            "diagnoses": [{"diagnosis": d, "prescription": p} for d, p in self.pairs],
            "patched_heuristic": self.patched_heuristic,
            "motion_primitives_id": self.primitive_set_id,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass
class TokenBudget:
    limit: int
    consumed: int = 0

    def __post_init__(self):
        if self.consumed < 0:
            raise ValueError("consumed tokens cannot be negative")

    @property
    def exhausted(self) -> bool:
        return self.consumed >= self.limit

    @property
    def remaining(self) -> int:
        return max(0, self.limit - self.consumed)

    def charge(self, tokens: int) -> None:
        if tokens < 0:
            raise ValueError("cannot charge a negative token count")
        self.consumed += tokens


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four characters, rounded up."""
    return (len(text) + 3) // 4


# --- backends -----------------------------------------------------------------


class Backend(Protocol):
    def complete(self, system: str, user: str, params: LlmParams) -> str: ...


@dataclass
class MockBackend:
    """Replays scripted raw responses in order."""

    responses: Sequence[str]
    calls: list = field(default_factory=list, repr=False)
    _cursor: int = field(default=0, repr=False)

    reported_tokens = None

    @classmethod
    def from_file(cls, path) -> "MockBackend":
        return cls(load_script(path))

    def complete(self, system: str, user: str, params: LlmParams) -> str:
        if self._cursor >= len(self.responses):
            raise ScriptExhausted(f"mock script exhausted after {len(self.responses)} responses")
        self.calls.append((system, user))
        raw = self.responses[self._cursor]
        self._cursor += 1
        return raw


def load_script(path) -> list[str]:
    """Read a JSONL mock script: each line holds one raw response string."""
    responses = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            value = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}:{lineno}: not valid JSON ({exc})") from exc
        responses.append(value if isinstance(value, str) else json.dumps(value))
    return responses


class HttpBackend:
    """Generic chat-completion endpoint (OpenAI-compatible request/response shape)."""

    def __init__(
        self,
        endpoint: str,
        model: str,
        api_key: Optional[str] = None,
        timeout: float = 120.0,
        session: Optional[requests.Session] = None,
    ):
        api_key = api_key or os.environ.get(API_KEY_ENV)
        if not api_key:
            raise ConfigurationError(f"HTTP backend needs an API key in ${API_KEY_ENV}")
        self.endpoint = endpoint
        self.model = model
        self.timeout = timeout
        self._api_key = api_key
        self._session = session or requests.Session()
        self.reported_tokens: Optional[int] = None

    def complete(self, system: str, user: str, params: LlmParams) -> str:
        payload = {
            "model": self.model,
            "messages": [
                {"role": "system", "content": system},
                {"role": "user", "content": user},
            ],
            "temperature": params.temperature,
        }
        headers = {"Authorization": f"Bearer {self._api_key}"}
        try:
            resp = self._session.post(self.endpoint, json=payload, headers=headers, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"request to {self.endpoint} failed: {exc}") from exc
        if resp.status_code == 429 or resp.status_code >= 500:
            raise TransportError(f"{self.endpoint} answered HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise LlmError(f"{self.endpoint} rejected the request: HTTP {resp.status_code} {resp.text[:200]}")
        try:
            body = resp.json()
            content = body["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise LlmError(f"unexpected response shape from {self.endpoint}: {exc}") from exc
        usage = body.get("usage") or {}
        self.reported_tokens = usage.get("total_tokens")
        return content


# --- querying -----------------------------------------------------------------


def query(
    bundle: PromptBundle,
    params: LlmParams,
    backend: Backend,
    budget: TokenBudget,
    retries: int = 0,
    backoff: float = 1.0,
) -> str:
    """Send the prompt and charge the budget for prompt and response."""
    prompt = bundle.full_text()
    prompt_tokens = estimate_tokens(prompt)
    if budget.exhausted or budget.consumed + prompt_tokens > budget.limit:
        raise TokenLimitExceeded(
            f"prompt needs ~{prompt_tokens} tokens but only {budget.remaining} remain"
        )
    attempt = 0
    while True:
        try:
            raw = backend.complete(bundle.system, bundle.user_text(), params)
            break
        except TransportError as exc:
            if attempt >= retries:
                raise
            attempt += 1
            logger.warning("transport error (%s); retry %d/%d", exc, attempt, retries)
            time.sleep(backoff * attempt)
    reported = getattr(backend, "reported_tokens", None)
    used = reported if isinstance(reported, int) and reported > 0 else prompt_tokens + estimate_tokens(raw)
    budget.charge(used)
    return raw


def _strip_fences(raw: str) -> str:
    text = raw.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if lines[-1].strip() == "```":
            text = "\n".join(lines[1:-1])
    return text


def parse_response(raw: str) -> DiagnosisResult:
    try:
        data = json.loads(_strip_fences(raw))
    except json.JSONDecodeError as exc:
        raise ParseError(f"response is not valid JSON: {exc.msg}", exc.pos) from exc
    if not isinstance(data, dict):
        raise ResponseError("response must be a JSON object")
    for key in ("diagnoses", "patched_heuristic", "motion_primitives_id"):
        if key not in data:
            raise MissingKey(key)
    diagnoses = data["diagnoses"]
    if not isinstance(diagnoses, list) or not diagnoses:
        raise ResponseError("'diagnoses' must be a non-empty list")
    pairs = []
    for i, item in enumerate(diagnoses):
        if (
            not isinstance(item, dict)
            or not isinstance(item.get("diagnosis"), str)
            or not isinstance(item.get("prescription"), str)
        ):
            raise ResponseError(f"diagnoses[{i}] needs string 'diagnosis' and 'prescription'")
        pairs.append((item["diagnosis"], item["prescription"]))
    for key in ("patched_heuristic", "motion_primitives_id"):
        if not isinstance(data[key], str):
            raise ResponseError(f"'{key}' must be a string")
    return DiagnosisResult(tuple(pairs), data["patched_heuristic"], data["motion_primitives_id"])
