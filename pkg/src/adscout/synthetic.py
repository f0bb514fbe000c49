"""Seeded generators for the synthetic trace and memory corpora."""

from __future__ import annotations

import random
from dataclasses import dataclass

from adscout.app_model import LogRecord
from adscout.dynamic_prober import ProbeEvent

AD_URL_TEMPLATES = (
    "https://googleads.g.doubleclick.net/mads/gma?slot={n}",
    "https://pubads.g.doubleclick.net/gampad/ads?iu=/{n}/unit",
    "https://an.facebook.com/v2/placementbid.json?id={n}",
    "https://cdn.example-media.net/adrequest?campaign={n}",
)
NOISE_URL_TEMPLATES = (
    "https://api.example-app.com/v1/songs/{n}",
    "https://fonts.gstatic.com/s/roboto/{n}.woff2",
)


@dataclass
class SyntheticTrace:
    events: list[ProbeEvent]
    syslog: list[LogRecord]
    # index of the event each ad request was generated from; None for orphan requests
    truth: list[int | None]


def synthetic_trace(seed: int, n_events: int = 40, frac_late: float = 0.4, delta: float = 5.0,
                    orphan_rate: float = 0.1, noise_rate: float = 0.3) -> SyntheticTrace:
    """Trace with known event/request alignments.

    Gaps between events are at least ``delta``, so the generating event is always the
    latest one within the window. Exactly ``round(frac_late * linked)`` linked lags fall
    in ``[3, delta)``, the rest in ``[0, 3)``. Orphans follow an event by at least ``delta``.
    """
    rng = random.Random(seed)
    t = 0.0
    events = []
    for i in range(n_events):
        events.append(ProbeEvent(round(t, 3), f"s{rng.randrange(8)}", f"tap:{rng.randrange(10)}"))
        t += delta + rng.choice((0.0, 0.0, 1.0, 2.5, 6.0))
    owners = [i for i in range(n_events) if rng.random() < 0.6]
    n_late = round(frac_late * len(owners))
    late = set(rng.sample(owners, n_late))
    records, truth = [], []
    for i in owners:
        lag = rng.uniform(3.0, delta - 1e-3) if i in late else rng.uniform(0.0, 3.0 - 1e-3)
        lag = round(lag, 3)
        if lag >= 3.0 and i not in late:
            lag = 2.999
        url = rng.choice(AD_URL_TEMPLATES).format(n=rng.randrange(10_000))
        records.append((events[i].timestamp + lag, url, i))
    for i in range(n_events - 1):
        gap = events[i + 1].timestamp - events[i].timestamp
        if gap > delta + 0.5 and rng.random() < orphan_rate * 4:
            ts = round(events[i].timestamp + rng.uniform(delta + 0.01, gap - 0.01), 3)
            url = rng.choice(AD_URL_TEMPLATES).format(n=rng.randrange(10_000))
            records.append((ts, url, None))
    for _ in range(int(noise_rate * n_events)):
        ts = round(rng.uniform(0, t), 3)
        records.append((ts, rng.choice(NOISE_URL_TEMPLATES).format(n=rng.randrange(100)), -1))
    records.sort(key=lambda r: r[0])
    syslog = [LogRecord(ts, "chromium", f"GET {url}") for ts, url, _ in records]
    truth = [owner for _, _, owner in records if owner != -1]
    return SyntheticTrace(events, syslog, truth)


def _pseudo_word(rng: random.Random) -> str:
    consonants, vowels = "bcdfghklmnprstvz", "aeiou"
    return "".join(rng.choice(consonants) + rng.choice(vowels) for _ in range(rng.randint(2, 4)))


def synthetic_memory_texts(n: int, seed: int = 0, n_topics: int = 64, dup_rate: float = 0.3,
                           topic_vocab: int = 40, n_queries: int = 0) -> tuple[list[str], list[str]]:
    """Screen-like token strings drawn from topic vocabularies; a share are light edits of earlier ones.

    Returns ``(corpus, queries)``; queries are fresh draws from the same topics.
    """
    rng = random.Random(seed)
    shared = [_pseudo_word(rng) for _ in range(30)]
    topics = [[_pseudo_word(rng) for _ in range(topic_vocab)] for _ in range(n_topics)]

    def fresh() -> str:
        vocab = rng.choice(topics)
        toks = [rng.choice(vocab) for _ in range(rng.randint(20, 40))]
        toks += rng.sample(shared, 3)
        return " ".join(toks)

    texts: list[str] = []
    for _ in range(n):
        if texts and rng.random() < dup_rate:
            toks = rng.choice(texts).split()
            for _ in range(rng.randint(0, 2)):
                toks[rng.randrange(len(toks))] = rng.choice(shared)
            texts.append(" ".join(toks))
            continue
        texts.append(fresh())
    return texts, [fresh() for _ in range(n_queries)]
