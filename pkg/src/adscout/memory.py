"""Cross-app experience memory.

Experiences are keyed by a canonical fingerprint of the triggering screen,
embedded as unit vectors, and retrieved by cosine similarity. Near-duplicates
are removed by a greedy threshold scan that keeps the earliest entry.

Store file format (JSON lines, version 1)::

    {"format": "adscout-experiences", "version": 1, "dim": 256}
    {"fingerprint": ..., "embedding": [...], "summary": ..., "source_app": ...,
     "trajectory": [[action, widget], ...], "created_at": 12.0}

Inserts append one line; ``prune`` rewrites the file (compaction).
"""

from __future__ import annotations

import fcntl
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
from scipy.cluster.vq import kmeans2

from adscout.app_model import UiState

logger = logging.getLogger(__name__)

DEFAULT_TAU = 0.95
DEFAULT_DIM = 256
MAX_SUMMARY_CHARS = 240
STORE_FORMAT = "adscout-experiences"
STORE_VERSION = 1

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def fingerprint(state: UiState) -> str:
    """Preorder ``class|resource_id|text`` lines with depth markers; bounds and clock excluded."""
    return state.canonical


# --------------------------------------------------------------------------
# Embedding


class EmbeddingError(RuntimeError):
    """Retriable backend failure."""


class Embedder(Protocol):
    dim: int

    def embed(self, text: str) -> np.ndarray: ...


def normalize(vec: np.ndarray) -> np.ndarray:
    v = np.asarray(vec, dtype=np.float64)
    n = float(np.linalg.norm(v))
    if n == 0.0 or not np.isfinite(n):
        raise ValueError("cannot normalize a zero or non-finite vector")
    return v / n


def tokenize(text: str) -> list[str]:
    out = []
    for tok in _TOKEN_RE.findall(text.lower()):
        if len(tok) > 3 and tok.endswith("s") and not tok.endswith("ss"):
            tok = tok[:-1]
        out.append(tok)
    return out


class HashEmbedder:
    """Deterministic hashed bag of tokens, L2-normalized."""

    def __init__(self, dim: int = DEFAULT_DIM):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        self.dim = dim

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "little") % self.dim

    def embed(self, text: str) -> np.ndarray:
        if not text or not text.strip():
            raise ValueError("embed() needs non-empty text")
        vec = np.zeros(self.dim)
        tokens = tokenize(text) or [text.strip()]
        for tok in tokens:
            vec[self._bucket(tok)] += 1.0
        return normalize(vec)


class RemoteEmbedder:
    """Embedding endpoint speaking the common ``/embeddings`` JSON contract."""

    def __init__(self, url: str, model: str, dim: int, token_env: str = "ADSCOUT_API_TOKEN",
                 timeout: float = 30.0, client=None):
        import httpx

        self.url = url
        self.model = model
        self.dim = dim
        self.token_env = token_env
        self._client = client or httpx.Client(timeout=timeout)

    def embed(self, text: str) -> np.ndarray:
        import httpx

        if not text or not text.strip():
            raise ValueError("embed() needs non-empty text")
        headers = {}
        token = os.environ.get(self.token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            resp = self._client.post(self.url, json={"model": self.model, "input": text}, headers=headers)
            resp.raise_for_status()
            vec = np.asarray(resp.json()["data"][0]["embedding"], dtype=np.float64)
        except (httpx.HTTPError, KeyError, IndexError, ValueError) as exc:
            raise EmbeddingError(str(exc)) from exc
        if vec.shape != (self.dim,):
            raise EmbeddingError(f"expected dimension {self.dim}, got {vec.shape}")
        return normalize(vec)


def embed(text: str, embedder: Embedder) -> np.ndarray:
    return normalize(embedder.embed(text))


def cosine(u: Sequence[float], v: Sequence[float]) -> float:
    a = np.asarray(u, dtype=np.float64)
    b = np.asarray(v, dtype=np.float64)
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine is undefined for a zero vector")
    return float(np.clip(a @ b / (na * nb), -1.0, 1.0))


# --------------------------------------------------------------------------
# Experiences


@dataclass(eq=False)  # identity equality; embeddings are arrays
class Experience:
    fingerprint: str
    embedding: np.ndarray
    summary: str
    source_app: str = ""
    trajectory: list[tuple[str, str]] = field(default_factory=list)
    created_at: float = 0.0

    def __post_init__(self):
        self.embedding = np.asarray(self.embedding, dtype=np.float64)
        if abs(float(np.linalg.norm(self.embedding)) - 1.0) > 1e-6:
            raise ValueError("experience embedding must have unit norm")
        if not self.summary or not self.summary.strip():
            raise ValueError("experience summary must be non-empty")

    def to_dict(self) -> dict:
        return {
            "fingerprint": self.fingerprint,
            "embedding": [float(x) for x in self.embedding],
            "summary": self.summary,
            "source_app": self.source_app,
            "trajectory": [list(step) for step in self.trajectory],
            "created_at": self.created_at,
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "Experience":
        return cls(doc["fingerprint"], np.asarray(doc["embedding"]), doc["summary"], doc.get("source_app", ""),
                   [tuple(s) for s in doc.get("trajectory", [])], float(doc.get("created_at", 0.0)))


@dataclass(frozen=True)
class _Snapshot:
    entries: tuple[Experience, ...]
    matrix: np.ndarray  # (n, dim), rows are embeddings


class IvfIndex:
    """Inverted-file index: k-means coarse quantizer plus exact re-ranking of probed lists."""

    def __init__(self, matrix: np.ndarray, nlist: int | None = None, nprobe: int = 8, seed: int = 0):
        n = matrix.shape[0]
        self.nlist = max(1, min(n, nlist or int(np.sqrt(n))))
        self.nprobe = max(1, min(nprobe, self.nlist))
        self.matrix = matrix
        if self.nlist == 1:
            self.centroids = matrix.mean(axis=0, keepdims=True)
            labels = np.zeros(n, dtype=int)
        else:
            self.centroids, labels = kmeans2(matrix, self.nlist, minit="++", seed=seed, iter=10)
        self.lists = [np.flatnonzero(labels == c) for c in range(self.nlist)]

    def search(self, q: np.ndarray, k: int) -> list[tuple[int, float]]:
        order = np.argsort(-(self.centroids @ q), kind="stable")[: self.nprobe]
        cand = np.concatenate([self.lists[c] for c in order])
        if cand.size == 0:
            return []
        cand.sort()
        sims = self.matrix[cand] @ q
        top = np.argsort(-sims, kind="stable")[:k]
        return [(int(cand[i]), float(sims[i])) for i in top]


class ExperienceStore:
    """Experience repository; reads use immutable snapshots, writes are serialized."""

    def __init__(self, embedder: Embedder | None = None, tau: float = DEFAULT_TAU, ann_enabled: bool = False,
                 path: str | Path | None = None, nprobe: int = 8):
        if not 0.0 < tau <= 1.0:
            raise ValueError("tau must lie in (0, 1]")
        self.embedder = embedder or HashEmbedder()
        self.tau = tau
        self.ann_enabled = ann_enabled
        self.nprobe = nprobe
        self.path = Path(path) if path else None
        self._lock = threading.RLock()
        self._buf = np.zeros((0, self.embedder.dim))
        self._snap = _Snapshot((), self._buf[:0])
        self._index: IvfIndex | None = None
        if self.path is not None and self.path.exists():
            self._load()

    # basic access -----------------------------------------------------------

    @property
    def entries(self) -> tuple[Experience, ...]:
        return self._snap.entries

    def __len__(self) -> int:
        return len(self._snap.entries)

    def make_experience(self, state_or_text: UiState | str, summary: str, source_app: str = "",
                        trajectory: Sequence[tuple[str, str]] = (), created_at: float | None = None) -> Experience:
        text = fingerprint(state_or_text) if isinstance(state_or_text, UiState) else state_or_text
        return Experience(text, embed(text, self.embedder), summary, source_app, list(trajectory),
                          time.time() if created_at is None else created_at)

    def store(self, experience: Experience) -> None:
        with self._lock:
            snap = self._snap
            n = len(snap.entries)
            if n == self._buf.shape[0]:
                grown = np.zeros((max(16, 2 * n), self.embedder.dim))
                grown[:n] = snap.matrix
                self._buf = grown
            # rows below n are never rewritten, so older snapshots stay valid
            self._buf[n] = experience.embedding
            self._snap = _Snapshot(snap.entries + (experience,), self._buf[: n + 1])
            self._index = None
            if self.path is not None:
                self._append(experience)

    # retrieval --------------------------------------------------------------

    def _query_vector(self, query) -> np.ndarray:
        if isinstance(query, UiState):
            return embed(fingerprint(query), self.embedder)
        if isinstance(query, str):
            return embed(query, self.embedder)
        return normalize(np.asarray(query))

    def retrieve(self, query, k: int = 3) -> list[tuple[Experience, float]]:
        if k < 1:
            raise ValueError("k must be >= 1")
        snap = self._snap
        if not snap.entries:
            return []
        q = self._query_vector(query)
        if self.ann_enabled:
            index = self._index
            if index is None or index.matrix is not snap.matrix:
                index = IvfIndex(snap.matrix, nprobe=self.nprobe)
                self._index = index
            hits = index.search(q, k)
        else:
            sims = snap.matrix @ q
            top = np.argsort(-sims, kind="stable")[:k]
            hits = [(int(i), float(sims[i])) for i in top]
        return [(snap.entries[i], float(np.clip(s, -1.0, 1.0))) for i, s in hits]

    # pruning ----------------------------------------------------------------

    def prune(self, tau: float | None = None, block: int = 512) -> "ExperienceStore":
        tau = self.tau if tau is None else tau
        with self._lock:
            snap = self._snap
            order = sorted(range(len(snap.entries)), key=lambda i: (snap.entries[i].created_at, i))
            keep = greedy_dedup(snap.matrix[order], tau, block) if order else []
            kept_idx = [order[i] for i in keep]
            kept_idx.sort(key=lambda i: (snap.entries[i].created_at, i))
            dropped = len(snap.entries) - len(kept_idx)
            self._buf = snap.matrix[kept_idx]
            self._snap = _Snapshot(tuple(snap.entries[i] for i in kept_idx), self._buf)
            self._index = None
            if self.path is not None:
                self._compact()
            logger.info("pruned %d of %d experiences at tau=%.3f", dropped, len(snap.entries), tau)
        return self

    # persistence ------------------------------------------------------------

    def _header(self) -> str:
        return json.dumps({"format": STORE_FORMAT, "version": STORE_VERSION, "dim": self.embedder.dim}) + "\n"

    def _append(self, exp: Experience) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_EX)
            try:
                if fh.tell() == 0:
                    fh.write(self._header())
                fh.write(json.dumps(exp.to_dict()) + "\n")
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)

    def _compact(self) -> None:
        self.path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=self.path.parent, prefix=".exp-", suffix=".jsonl")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(self._header())
            for exp in self._snap.entries:
                fh.write(json.dumps(exp.to_dict()) + "\n")
        os.replace(tmp, self.path)

    def _load(self) -> None:
        with open(self.path, encoding="utf-8") as fh:
            fcntl.flock(fh, fcntl.LOCK_SH)
            try:
                lines = [ln for ln in fh.read().splitlines() if ln.strip()]
            finally:
                fcntl.flock(fh, fcntl.LOCK_UN)
        if not lines:
            return
        header = json.loads(lines[0])
        if header.get("format") != STORE_FORMAT or header.get("version") != STORE_VERSION:
            raise ValueError(f"{self.path}: unsupported experience store header {header}")
        if header.get("dim") != self.embedder.dim:
            raise ValueError(f"{self.path}: dimension {header.get('dim')} does not match embedder")
        entries = tuple(Experience.from_dict(json.loads(ln)) for ln in lines[1:])
        self._buf = np.vstack([e.embedding for e in entries]) if entries else np.zeros((0, self.embedder.dim))
        self._snap = _Snapshot(entries, self._buf)

    def save(self, path: str | Path) -> None:
        self.path = Path(path)
        self._compact()

    @classmethod
    def open(cls, path: str | Path, **kwargs) -> "ExperienceStore":
        return cls(path=path, **kwargs)


def greedy_dedup(matrix: np.ndarray, tau: float, block: int = 512) -> list[int]:
    """Indices kept by the in-order greedy scan: keep row i iff its similarity to every kept row is < tau."""
    if not 0.0 < tau <= 1.0:
        raise ValueError("tau must lie in (0, 1]")
    n = matrix.shape[0]
    kept: list[int] = []
    for start in range(0, n, block):
        rows = matrix[start:start + block]
        if kept:
            ext = (rows @ matrix[kept].T).max(axis=1) >= tau
        else:
            ext = np.zeros(len(rows), dtype=bool)
        intra = rows @ rows.T
        local: list[int] = []
        for i in range(len(rows)):
            if ext[i]:
                continue
            if local and intra[i, local].max() >= tau:
                continue
            local.append(i)
        kept.extend(start + i for i in local)
    return kept


def store(repo: ExperienceStore, experience: Experience) -> None:
    repo.store(experience)


def retrieve(repo: ExperienceStore, query, k: int = 3) -> list[tuple[Experience, float]]:
    return repo.retrieve(query, k)


def prune(repo: ExperienceStore, tau: float | None = None) -> ExperienceStore:
    return repo.prune(tau)


# --------------------------------------------------------------------------
# Trajectory summaries


@dataclass(frozen=True)
class TrajectoryStep:
    action: str  # canonical event descriptor
    widget_class: str
    widget_text: str | None = None

    def widget_descriptor(self) -> str:
        return f"{self.widget_class}:{self.widget_text or ''}"

    def line(self, n: int) -> str:
        if self.action.startswith("KeyEvent") and "BACK" in self.action:
            return f"Step {n}: Pressed 'Back'."
        return f"Step {n}: Touched a '{self.widget_class}' with text/desc: '{self.widget_text or ''}'."


SUMMARY_INSTRUCTION = (
    "You are an expert Android app tester specializing in identifying ad-triggering patterns. "
    "Your task is to read the interaction steps below, which ended in an advertisement, and distill them "
    "into one general heuristic sentence of the form 'Interacting with ... often triggers ...' that "
    "would help find ads in other apps."
)

AD_TYPE_PHRASES = {
    "embedded": "embedded ad banners",
    "popup": "pop-up advertisements",
    "custom": "advertisement displays",
}


class Summarizer(Protocol):
    def summarize(self, instruction: str, steps: Sequence[str]) -> str: ...


class SummarizerError(RuntimeError):
    pass


def template_summary(trajectory: Sequence[TrajectoryStep], ad_type: str | None = None) -> str:
    texts = [f"'{s.widget_text}'" for s in trajectory if s.widget_text]
    if not texts:
        texts = [f"'{trajectory[-1].widget_class}' elements"]
    what = texts[0] if len(texts) == 1 else ", ".join(texts[:-1]) + " and " + texts[-1]
    sentence = f"Interacting with {what} often triggers {AD_TYPE_PHRASES.get(ad_type or '', 'advertisements')}."
    return _one_sentence(sentence)


class TemplateSummarizer:
    """Offline summarizer; ignores the instruction and fills the template."""

    def __init__(self, ad_type: str | None = None):
        self.ad_type = ad_type

    def summarize(self, instruction: str, steps: Sequence[str]) -> str:
        raise SummarizerError("template summarizer has no model; use the template fallback")


def _one_sentence(text: str) -> str:
    text = " ".join(text.split())
    m = re.search(r"[.!?](\s|$)", text)
    if m:
        text = text[: m.start() + 1]
    if len(text) > MAX_SUMMARY_CHARS:
        text = text[: MAX_SUMMARY_CHARS - 1].rstrip() + "."
    return text


def summarize_trajectory(trajectory: Sequence[TrajectoryStep], summarizer: Summarizer | None = None,
                         ad_type: str | None = None) -> str:
    if not trajectory:
        raise ValueError("summarize_trajectory needs a non-empty trajectory")
    if summarizer is None:
        return template_summary(trajectory, ad_type)
    lines = [s.line(i + 1) for i, s in enumerate(trajectory)]
    try:
        reply = summarizer.summarize(SUMMARY_INSTRUCTION, lines)
    except Exception as exc:  # noqa: BLE001 - any backend failure falls back
        logger.info("summarizer unavailable (%s); using template", exc)
        return template_summary(trajectory, ad_type)
    reply = _one_sentence(reply or "")
    return reply or template_summary(trajectory, ad_type)
