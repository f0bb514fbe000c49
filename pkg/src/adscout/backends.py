"""Backends for the decision, caption and summary ports.

* :class:`ChatCompletionBackend` talks to a remote chat-completion endpoint.
* :class:`Transcript` records and replays exchanges as JSON lines.
* :class:`ScriptedOracle` is a deterministic offline decision maker.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import httpx

from adscout.memory import tokenize
from adscout.perception import CaptionRequest, ScriptedCaptioner
from adscout.policy_engine import BackendUnavailable, PromptContext, RenderedPrompt, successor_visits

logger = logging.getLogger(__name__)

DEFAULT_TOKEN_ENV = "ADSCOUT_API_TOKEN"


# --------------------------------------------------------------------------
# Remote chat completion


class ChatCompletionBackend:
    """POSTs ``{model, temperature, messages}`` and returns ``choices[0].message.content``.

    Transport errors and 429/5xx replies are retried with capped exponential backoff.
    """

    def __init__(self, url: str, model: str, temperature: float = 0.0, token_env: str = DEFAULT_TOKEN_ENV,
                 timeout: float = 60.0, max_retries: int = 3, backoff: float = 1.0, backoff_cap: float = 8.0,
                 client: httpx.Client | None = None, sleep=time.sleep):
        self.url = url
        self.model = model
        self.temperature = temperature
        self.token_env = token_env
        self.max_retries = max_retries
        self.backoff = backoff
        self.backoff_cap = backoff_cap
        self._client = client or httpx.Client(timeout=timeout)
        self._sleep = sleep

    def _headers(self) -> dict:
        token = os.environ.get(self.token_env)
        return {"Authorization": f"Bearer {token}"} if token else {}

    def chat(self, messages: list[dict]) -> str:
        payload = {"model": self.model, "temperature": self.temperature, "messages": messages}
        last_error = "no attempt made"
        for attempt in range(self.max_retries + 1):
            if attempt:
                self._sleep(min(self.backoff_cap, self.backoff * 2 ** (attempt - 1)))
            try:
                logger.debug("chat request to %s: %s", self.url, json.dumps(payload)[:2000])
                resp = self._client.post(self.url, json=payload, headers=self._headers())
            except httpx.HTTPError as exc:
                last_error = f"transport error: {exc}"
                logger.warning("chat attempt %d failed: %s", attempt + 1, last_error)
                continue
            if resp.status_code == 429 or resp.status_code >= 500:
                last_error = f"HTTP {resp.status_code}"
                logger.warning("chat attempt %d failed: %s", attempt + 1, last_error)
                continue
            if resp.status_code >= 400:
                raise BackendUnavailable(f"HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                content = resp.json()["choices"][0]["message"]["content"]
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                raise BackendUnavailable(f"malformed completion payload: {exc}") from exc
            logger.debug("chat reply: %s", content[:2000])
            return content
        raise BackendUnavailable(last_error)

    def complete(self, system: str, user: str) -> str:
        return self.chat([{"role": "system", "content": system}, {"role": "user", "content": user}])

    # caption and summary ports share the same endpoint
    def describe(self, instruction: str, requests: Sequence[CaptionRequest]) -> str:
        crops = [{"id": r.id, "crop": r.crop, "bounds": list(r.bounds)} for r in requests]
        return self.complete(instruction, json.dumps(crops))

    def summarize(self, instruction: str, steps: Sequence[str]) -> str:
        return self.complete(instruction, "\n".join(steps))


# --------------------------------------------------------------------------
# Record / replay


def request_digest(*parts: str) -> str:
    h = hashlib.sha256()
    for p in parts:
        h.update(p.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class TranscriptExhausted(BackendUnavailable):
    pass


class Transcript:
    """Ordered replies per channel (``decision``, ``caption``, ``summary``), stored as JSON lines.

    A record may carry ``request_sha256``; when present, replay checks the live request against it.
    """

    def __init__(self, records: Sequence[dict] = (), path: str | Path | None = None, check_requests: bool = True):
        self.records = [dict(r) for r in records]
        self.path = Path(path) if path else None
        self.check_requests = check_requests
        self._cursor: dict[str, int] = {}
        self._lock = threading.Lock()

    @classmethod
    def load(cls, path: str | Path, check_requests: bool = True) -> "Transcript":
        with open(path, encoding="utf-8") as fh:
            records = [json.loads(ln) for ln in fh if ln.strip()]
        return cls(records, None, check_requests)

    def next_reply(self, channel: str, digest: str) -> str:
        with self._lock:
            start = self._cursor.get(channel, 0)
            for i in range(start, len(self.records)):
                rec = self.records[i]
                if rec.get("channel") != channel:
                    continue
                self._cursor[channel] = i + 1
                want = rec.get("request_sha256")
                if self.check_requests and want and want != digest:
                    raise BackendUnavailable(f"transcript mismatch on {channel} record {i}")
                return rec["reply"]
            self._cursor[channel] = len(self.records)
            raise TranscriptExhausted(f"no more recorded '{channel}' replies")

    def append(self, channel: str, digest: str, reply: str) -> None:
        rec = {"channel": channel, "request_sha256": digest, "reply": reply}
        with self._lock:
            self.records.append(rec)
            if self.path is not None:
                self.path.parent.mkdir(parents=True, exist_ok=True)
                with open(self.path, "a", encoding="utf-8") as fh:
                    fh.write(json.dumps(rec) + "\n")

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for rec in self.records:
                fh.write(json.dumps(rec) + "\n")


class ReplayBackend:
    """Replays recorded replies on all three ports."""

    def __init__(self, transcript: Transcript):
        self.transcript = transcript

    def complete(self, system: str, user: str) -> str:
        return self.transcript.next_reply("decision", request_digest(system, user))

    def describe(self, instruction: str, requests: Sequence[CaptionRequest]) -> str:
        return self.transcript.next_reply("caption", request_digest(instruction, *[r.crop for r in requests]))

    def summarize(self, instruction: str, steps: Sequence[str]) -> str:
        return self.transcript.next_reply("summary", request_digest(instruction, *steps))


class RecordingBackend:
    """Forwards to ``inner`` and appends each exchange to a transcript."""

    def __init__(self, inner, transcript: Transcript):
        self.inner = inner
        self.transcript = transcript

    def complete(self, system: str, user: str) -> str:
        reply = self.inner.complete(system, user)
        self.transcript.append("decision", request_digest(system, user), reply)
        return reply

    def complete_prompt(self, prompt: RenderedPrompt) -> str:
        if hasattr(self.inner, "complete_prompt"):
            reply = self.inner.complete_prompt(prompt)
        else:
            reply = self.inner.complete(prompt.system, prompt.integrated)
        self.transcript.append("decision", request_digest(prompt.system, prompt.integrated), reply)
        return reply

    def describe(self, instruction: str, requests: Sequence[CaptionRequest]) -> str:
        reply = self.inner.describe(instruction, requests)
        self.transcript.append("caption", request_digest(instruction, *[r.crop for r in requests]), reply)
        return reply

    def summarize(self, instruction: str, steps: Sequence[str]) -> str:
        reply = self.inner.summarize(instruction, steps)
        self.transcript.append("summary", request_digest(instruction, *steps), reply)
        return reply


# --------------------------------------------------------------------------
# Scripted oracle


STRONG_AD_TERMS = (
    "install now", "learn more", "more apps", "other app", "more games", "sponsored", "watch video",
    "watch ad", "free gift", "get reward", "claim reward", "free coins", "bonus", "download",
)
WEAK_AD_TERMS = ("free", "offer", "promo", "gift", "reward", "store", "shop", "premium", "recommended", "apps")
NEGATIVE_TERMS = ("remove ads", "no ads", "ad-free", "ad free", "privacy policy", "terms of service")
CAPTION_VALUES = {"AD": 0.9, "POTENTIAL_AD": 0.6, "UI_ELEMENT": 0.1}
_STOPWORDS = {"interacting", "with", "often", "trigger", "that", "lead", "to", "the", "and", "or", "of", "in",
              "a", "an", "for", "on", "ad", "advertisement", "display", "element", "button", "option", "view"}


def _has_term(text: str, term: str) -> bool:
    # plural forms count ("offers", "bonuses")
    return re.search(r"(?<![a-z0-9])" + re.escape(term) + r"(?:s|es)?(?![a-z0-9])", text) is not None


@dataclass
class OracleConfig:
    lam: float = 0.1
    base: float = 0.1
    strong: float = 0.8
    weak: float = 0.5
    negative: float = 0.02
    experience: float = 0.6
    component: float = 0.7
    min_experience_sim: float = 0.2
    caption_values: dict = field(default_factory=lambda: dict(CAPTION_VALUES))
    use_experience: bool = True


def semantic_value(el, ctx: PromptContext | None, cfg: OracleConfig) -> float:
    """Ad relevance of one element from its text, caption, priors and retrieved experiences."""
    if el.is_global:
        return cfg.base
    text = " ".join(p for p in (el.text, el.resource_id) if p).lower().replace("_", " ")
    if el.semantic_caption is not None:
        caption_text = el.semantic_caption.description.lower()
    else:
        caption_text = ""
    both = f"{text} {caption_text}"
    if any(_has_term(both, t) for t in NEGATIVE_TERMS):
        return cfg.negative
    value = cfg.base
    if el.semantic_caption is not None:
        value = max(value, cfg.caption_values.get(el.semantic_caption.tag, cfg.base))
    if any(_has_term(both, t) for t in STRONG_AD_TERMS):
        value = max(value, cfg.strong)
    elif any(_has_term(both, t) for t in WEAK_AD_TERMS):
        value = max(value, cfg.weak)
    if ctx is not None and ctx.kb is not None and el.resource_id and el.widget is not None and el.widget.clickable:
        if ctx.kb.slot_for_resource(el.resource_id) is not None:
            value = max(value, cfg.component)
    if cfg.use_experience and ctx is not None and el.text:
        words = {t for t in tokenize(el.text) if t not in _STOPWORDS and len(t) > 2}
        for exp, sim in ctx.experiences:
            if sim >= cfg.min_experience_sim and words & set(tokenize(exp.summary)):
                value = max(value, cfg.experience)
                break
    return value


class ScriptedOracle:
    """Picks the argmax of semantic value minus ``lam`` times the known successor's visits."""

    def __init__(self, config: OracleConfig | None = None):
        self.config = config or OracleConfig()
        self.calls = 0

    def choose(self, ctx: PromptContext) -> tuple[int, float, str]:
        cfg = self.config
        best, best_val, best_sem = 0, float("-inf"), 0.0
        s_hat = 0.0
        for el in ctx.elements:
            sem = semantic_value(el, ctx, cfg)
            if not el.is_global:
                s_hat = max(s_hat, sem)
            val = sem - cfg.lam * successor_visits(ctx, el)
            if val > best_val + 1e-12:
                best, best_val, best_sem = el.index, val, sem
        label = ctx.elements[best].label() or ctx.elements[best].class_or_kind
        reason = f"Choosing element {best}, '{label}' has semantic value {best_sem:.2f} and score {best_val:.2f}."
        return best, round(min(1.0, max(0.0, s_hat)), 4), reason

    def complete_prompt(self, prompt: RenderedPrompt) -> str:
        self.calls += 1
        if prompt.context is None or not prompt.context.elements:
            return json.dumps({"reasoning": "no context", "ad_score": 0.0, "choice": 0})
        choice, score, reason = self.choose(prompt.context)
        return json.dumps({"reasoning": reason, "ad_score": score, "choice": choice})

    def complete(self, system: str, user: str) -> str:
        raise BackendUnavailable("the scripted oracle needs the structured prompt; use complete_prompt")


class OracleSummarizer:
    """Offline summarizer: raises so callers fall back to the template sentence."""

    def summarize(self, instruction: str, steps: Sequence[str]) -> str:
        raise BackendUnavailable("no summarization model configured")


__all__ = [
    "ChatCompletionBackend", "Transcript", "TranscriptExhausted", "ReplayBackend", "RecordingBackend",
    "ScriptedOracle", "OracleConfig", "OracleSummarizer", "ScriptedCaptioner", "semantic_value", "request_digest",
]
