import json

import httpx
import pytest

from adscout.app_model import reset
from adscout.backends import (ChatCompletionBackend, OracleConfig, RecordingBackend, ReplayBackend, ScriptedOracle,
                              Transcript, TranscriptExhausted, _has_term, request_digest, semantic_value)
from adscout.perception import Perceiver
from adscout.policy_engine import BackendUnavailable, build_context, render_prompt
from adscout.utg import TransitionGraph


def mock_client(responses, seen):
    def handler(request):
        seen.append(request)
        r = responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r

    return httpx.Client(transport=httpx.MockTransport(handler))


def ok(content):
    return httpx.Response(200, json={"choices": [{"message": {"content": content}}]})


def test_chat_payload_and_auth(monkeypatch):
    monkeypatch.setenv("TEST_TOKEN", "sekret")
    seen = []
    b = ChatCompletionBackend("http://x/v1/chat", "m1", 0.2, token_env="TEST_TOKEN",
                              client=mock_client([ok("hi")], seen))
    assert b.complete("sys", "user") == "hi"
    body = json.loads(seen[0].content)
    assert body == {"model": "m1", "temperature": 0.2,
                    "messages": [{"role": "system", "content": "sys"}, {"role": "user", "content": "user"}]}
    assert seen[0].headers["authorization"] == "Bearer sekret"


def test_chat_retries_with_backoff():
    seen, sleeps = [], []
    responses = [httpx.ConnectError("boom"), httpx.Response(429), httpx.Response(503), ok("fine")]
    b = ChatCompletionBackend("http://x", "m", client=mock_client(responses, seen), sleep=sleeps.append,
                              backoff=1.0, backoff_cap=3.0)
    assert b.complete("s", "u") == "fine"
    assert sleeps == [1.0, 2.0, 3.0]


def test_chat_gives_up():
    b = ChatCompletionBackend("http://x", "m", max_retries=1, client=mock_client([httpx.Response(500)] * 2, []),
                              sleep=lambda s: None)
    with pytest.raises(BackendUnavailable, match="HTTP 500"):
        b.complete("s", "u")


@pytest.mark.parametrize("resp", [httpx.Response(401, text="no"), httpx.Response(200, json={"choices": []})])
def test_chat_non_retriable(resp):
    b = ChatCompletionBackend("http://x", "m", client=mock_client([resp], []), sleep=lambda s: None)
    with pytest.raises(BackendUnavailable):
        b.complete("s", "u")


def test_transcript_replay_checks_digest(tmp_path):
    path = tmp_path / "t.jsonl"
    t = Transcript(path=path)
    t.append("decision", request_digest("s", "u"), "r1")
    t.append("summary", request_digest("i", "step"), "sum")
    replay = ReplayBackend(Transcript.load(path))
    assert replay.summarize("i", ["step"]) == "sum"  # channels are independent
    assert replay.complete("s", "u") == "r1"
    with pytest.raises(TranscriptExhausted):
        replay.complete("s", "u")
    bad = ReplayBackend(Transcript.load(path))
    with pytest.raises(BackendUnavailable, match="mismatch"):
        bad.complete("s", "different")
    lax = ReplayBackend(Transcript.load(path, check_requests=False))
    assert lax.complete("s", "different") == "r1"


def test_recording_backend_round_trip(tmp_path):
    class Inner:
        def complete(self, system, user):
            return f"{system}|{user}"

        def summarize(self, instruction, steps):
            return "summary"

    rec = RecordingBackend(Inner(), Transcript())
    assert rec.complete("a", "b") == "a|b"
    rec.summarize("i", ["x"])
    rec.transcript.save(tmp_path / "t.jsonl")
    replay = ReplayBackend(Transcript.load(tmp_path / "t.jsonl"))
    assert replay.complete("a", "b") == "a|b"
    assert replay.summarize("i", ["x"]) == "summary"


@pytest.mark.parametrize("text, term, hit", [
    ("deals & offers", "offer", True), ("bonuses", "bonus", True), ("offerings", "offer", False),
    ("shopping", "shop", False), ("more apps", "more apps", True), ("reward", "rewards", False),
])
def test_has_term(text, term, hit):
    assert _has_term(text, term) is hit


def test_oracle_prefers_ad_text_and_reports_score(tiny_bundle):
    _, state = reset(tiny_bundle)
    ctx = build_context(state, Perceiver().perceive(state), TransitionGraph(), [], None, None)
    oracle = ScriptedOracle()
    reply = json.loads(oracle.complete_prompt(render_prompt(ctx)))
    assert reply["choice"] == 0  # "Free Coins"
    assert reply["ad_score"] == pytest.approx(0.8)
    with pytest.raises(BackendUnavailable):
        oracle.complete("s", "u")


def test_negative_terms_win(tiny_bundle):
    _, state = reset(tiny_bundle)
    el = Perceiver().perceive(state)[0]
    from dataclasses import replace

    assert semantic_value(replace(el, text="Remove Ads"), None, OracleConfig()) == 0.02
