import json

import pytest
import requests
from hypothesis import given
from hypothesis import strategies as st

from planner_doctor.llm import (
    API_KEY_ENV,
    ConfigurationError,
    DiagnosisResult,
    HttpBackend,
    LlmError,
    LlmParams,
    MissingKey,
    MockBackend,
    ParseError,
    ResponseError,
    ScriptExhausted,
    TokenBudget,
    TokenLimitExceeded,
    TransportError,
    estimate_tokens,
    load_script,
    parse_response,
    query,
)
from planner_doctor.prompts import PromptBundle

from conftest import REPAIRED_ID

VALID = (
    '{"diagnoses":[{"diagnosis":"d","prescription":"p"}],"patched_heuristic":"0",'
    f'"motion_primitives_id":"{REPAIRED_ID}"}}'
)


def _bundle(chars=40):
    return PromptBundle("s" * 10, (("instructions", "u" * chars),))


def test_estimate_tokens():
    assert estimate_tokens("") == 0
    assert estimate_tokens("x" * 8) == 2
    assert estimate_tokens("x" * 9) == 3


def test_mock_script_order(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in ("a", "b", "c")) + "\n")
    backend = MockBackend.from_file(path)
    budget = TokenBudget(10_000)
    seen = []
    last = 0
    for _ in range(3):
        seen.append(query(_bundle(), LlmParams(), backend, budget))
        assert budget.consumed > last
        last = budget.consumed
    assert seen == ["a", "b", "c"]
    with pytest.raises(ScriptExhausted):
        query(_bundle(), LlmParams(), backend, budget)


def test_script_objects_are_serialised(tmp_path):
    path = tmp_path / "script.jsonl"
    path.write_text(json.dumps({"a": 1}) + "\n\n")
    assert load_script(path) == ['{"a": 1}']
    path.write_text("not json\n")
    with pytest.raises(ValueError, match=":1:"):
        load_script(path)


def test_budget_precondition():
    bundle = PromptBundle("", (("instructions", "x" * 398),))  # 400 characters with the separator
    assert len(bundle.full_text()) == 400
    with pytest.raises(TokenLimitExceeded):
        query(bundle, LlmParams(), MockBackend(["x"]), TokenBudget(10))


def test_budget_charge_is_exact():
    bundle = _bundle()
    budget = TokenBudget(1000)
    query(bundle, LlmParams(), MockBackend(["r" * 7]), budget)
    assert budget.consumed == estimate_tokens(bundle.full_text()) + 2


def test_parse_valid():
    result = parse_response(VALID)
    assert result.pairs == (("d", "p"),)
    assert result.patched_heuristic == "0"
    assert result.primitive_set_id == REPAIRED_ID


def test_parse_fenced():
    assert parse_response(f"```json\n{VALID}\n```") == parse_response(VALID)


def test_missing_key():
    data = json.loads(VALID)
    del data["patched_heuristic"]
    with pytest.raises(MissingKey) as info:
        parse_response(json.dumps(data))
    assert str(info.value) == "missing response key: patched_heuristic"


@pytest.mark.parametrize(
    "raw",
    [
        '{"diagnoses":[],"patched_heuristic":"0","motion_primitives_id":"x"}',
        '{"diagnoses":[{"diagnosis":1}],"patched_heuristic":"0","motion_primitives_id":"x"}',
        '{"diagnoses":[{"diagnosis":"d","prescription":"p"}],"patched_heuristic":0,"motion_primitives_id":"x"}',
        "[1, 2]",
    ],
)
def test_schema_violations(raw):
    with pytest.raises(ResponseError):
        parse_response(raw)


def test_parse_error_position():
    with pytest.raises(ParseError) as info:
        parse_response('{"diagnoses":')
    assert info.value.position == 13


text = st.text(max_size=30)


@given(st.lists(st.tuples(text, text), min_size=1, max_size=4), text, text)
def test_serialise_round_trip(pairs, heuristic, pid):
    result = DiagnosisResult(tuple(pairs), heuristic, pid)
    assert parse_response(result.to_json()) == result


def test_params_validation():
    with pytest.raises(ValueError):
        LlmParams(temperature=3.0)
    with pytest.raises(ValueError):
        LlmParams(token_limit=0)


class _FakeResponse:
    def __init__(self, status, body):
        self.status_code = status
        self._body = body
        self.text = json.dumps(body)

    def json(self):
        return self._body


class _FakeSession:
    def __init__(self, responses):
        self.responses = list(responses)
        self.posts = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.posts.append((url, json, headers))
        item = self.responses.pop(0)
        if isinstance(item, Exception):
            raise item
        return item


def _ok(content, tokens=None):
    body = {"choices": [{"message": {"content": content}}]}
    if tokens is not None:
        body["usage"] = {"total_tokens": tokens}
    return _FakeResponse(200, body)


def test_http_requires_key(monkeypatch):
    monkeypatch.delenv(API_KEY_ENV, raising=False)
    with pytest.raises(ConfigurationError):
        HttpBackend("http://localhost/v1/chat", "m")


def test_http_request_shape(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "secret")
    session = _FakeSession([_ok(VALID, tokens=123)])
    backend = HttpBackend("http://localhost/v1/chat", "m", session=session)
    budget = TokenBudget(8000)
    raw = query(_bundle(), LlmParams(temperature=0.6), backend, budget)
    assert raw == VALID
    url, payload, headers = session.posts[0]
    assert payload["model"] == "m" and payload["temperature"] == 0.6
    assert [m["role"] for m in payload["messages"]] == ["system", "user"]
    assert headers["Authorization"] == "Bearer secret"
    assert budget.consumed == 123


def test_http_retries_transport_errors(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "secret")
    session = _FakeSession([_FakeResponse(503, {}), requests.ConnectionError("down"), _ok("fine")])
    backend = HttpBackend("http://x", "m", session=session)
    assert query(_bundle(), LlmParams(), backend, TokenBudget(8000), retries=2, backoff=0.0) == "fine"
    session = _FakeSession([_FakeResponse(429, {})])
    with pytest.raises(TransportError):
        query(_bundle(), LlmParams(), HttpBackend("http://x", "m", session=session), TokenBudget(8000))


def test_http_client_errors(monkeypatch):
    monkeypatch.setenv(API_KEY_ENV, "secret")
    session = _FakeSession([_FakeResponse(400, {"error": "bad"}), _FakeResponse(200, {"nope": 1})])
    backend = HttpBackend("http://x", "m", session=session)
    with pytest.raises(LlmError, match="400"):
        backend.complete("s", "u", LlmParams())
    with pytest.raises(LlmError, match="unexpected response shape"):
        backend.complete("s", "u", LlmParams())
