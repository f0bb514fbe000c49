"""Random probing and event/traffic correlation for network priors."""

from __future__ import annotations

import logging
import random
import re
from dataclasses import dataclass, field
from typing import Sequence
from urllib.parse import urlparse

from adscout.app_model import LAUNCHER_ACTIVITY, AppBundle, LogRecord, Session, pseudo_state
from adscout.perception import Perceiver
from adscout.utg import TransitionGraph, describe_action

logger = logging.getLogger(__name__)

DEFAULT_DELTA = 5.0
_URL_RE = re.compile(r"https?://[^\s\"'<>]+")


@dataclass(frozen=True)
class ProbeEvent:
    timestamp: float
    state_fingerprint: str
    action: str


@dataclass
class ProbeTrace:
    events: list[ProbeEvent] = field(default_factory=list)
    syslog: list[LogRecord] = field(default_factory=list)

    def is_sorted(self) -> bool:
        ev = all(a.timestamp <= b.timestamp for a, b in zip(self.events, self.events[1:]))
        lg = all(a.timestamp <= b.timestamp for a, b in zip(self.syslog, self.syslog[1:]))
        return ev and lg


@dataclass(frozen=True)
class NetworkLink:
    event: ProbeEvent
    url: str
    lag_seconds: float
    traffic_timestamp: float


@dataclass
class NetworkPrior:
    links: list[NetworkLink]
    window_delta_seconds: float
    unlinked: list[tuple[str, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "window_delta_seconds": self.window_delta_seconds,
            "links": [
                {"state": ln.event.state_fingerprint, "action": ln.event.action, "event_ts": ln.event.timestamp,
                 "url": ln.url, "lag": ln.lag_seconds}
                for ln in self.links
            ],
            "unlinked": [[u, t] for u, t in self.unlinked],
        }


def launcher_id() -> str:
    return pseudo_state(LAUNCHER_ACTIVITY).state_fingerprint


def random_probe(bundle: AppBundle, budget_steps: int, seed: int,
                 event_interval: float = 5.0) -> tuple[TransitionGraph, ProbeTrace]:
    """Uniform random walk over the actionable set; recovery steps count toward the budget."""
    if budget_steps < 1:
        raise ValueError("budget_steps must be >= 1")
    rng = random.Random(seed)
    session = Session(bundle, seed, event_interval)
    perceiver = Perceiver()
    graph = TransitionGraph()
    trace = ProbeTrace()
    state = session.observe()
    graph.record_transition(pseudo_state(LAUNCHER_ACTIVITY), describe_action("", "restart"), state)

    for _ in range(budget_steps):
        if session.crashed:
            action = "restart"
        else:
            options = perceiver.perceive(state)
            action = rng.choice(options).action_key
        trace.events.append(ProbeEvent(session.clock, state.state_fingerprint, action))
        outcome = session.step(action)
        event = describe_action(state.state_fingerprint, action, state)
        if action == "restart":
            graph.record_transition(pseudo_state(LAUNCHER_ACTIVITY), event, outcome.next)
        else:
            graph.record_transition(state, event, outcome.next)
        state = outcome.next
    trace.syslog = sorted(session.log, key=lambda r: r.timestamp)
    return graph, trace


def _host_matches(host: str, domains: Sequence[str]) -> bool:
    return any(host == d or host.endswith("." + d) for d in domains)


def extract_ad_traffic(syslog: Sequence[LogRecord], ad_domains: Sequence[str],
                       keywords: Sequence[str]) -> list[tuple[str, float]]:
    """URLs whose host is a known ad domain or whose text contains a keyword."""
    out = []
    lowered = [k.lower() for k in keywords]
    for rec in syslog:
        for url in _URL_RE.findall(rec.message):
            host = (urlparse(url).hostname or "").lower()
            if _host_matches(host, ad_domains) or any(k in url.lower() for k in lowered):
                out.append((url, rec.timestamp))
    return out


def correlate(events: Sequence[ProbeEvent], traffic: Sequence[tuple[str, float]],
              delta_seconds: float = DEFAULT_DELTA) -> NetworkPrior:
    """Link each request to the latest event with ``0 <= lag < delta`` (two-pointer sweep)."""
    if delta_seconds <= 0:
        raise ValueError("delta_seconds must be > 0")
    links, unlinked = [], []
    j = -1
    for url, ts in traffic:
        while j + 1 < len(events) and events[j + 1].timestamp <= ts:
            j += 1
        if j >= 0 and ts - events[j].timestamp < delta_seconds:
            links.append(NetworkLink(events[j], url, ts - events[j].timestamp, ts))
        else:
            unlinked.append((url, ts))
    return NetworkPrior(links, delta_seconds, unlinked)


def correlate_bruteforce(events: Sequence[ProbeEvent], traffic: Sequence[tuple[str, float]],
                         delta_seconds: float = DEFAULT_DELTA) -> NetworkPrior:
    """All-pairs reference used to check :func:`correlate`."""
    links, unlinked = [], []
    for url, ts in traffic:
        best = None
        for i, ev in enumerate(events):
            lag = ts - ev.timestamp
            if 0 <= lag < delta_seconds:
                best = i
        if best is None:
            unlinked.append((url, ts))
        else:
            links.append(NetworkLink(events[best], url, ts - events[best].timestamp, ts))
    return NetworkPrior(links, delta_seconds, unlinked)


def probe_bundle(bundle: AppBundle, budget_steps: int = 50, seed: int = 0, *, ad_domains: Sequence[str] = (),
                 keywords: Sequence[str] = (), delta_seconds: float = DEFAULT_DELTA,
                 event_interval: float = 5.0) -> tuple[TransitionGraph, ProbeTrace, NetworkPrior]:
    graph, trace = random_probe(bundle, budget_steps, seed, event_interval)
    traffic = extract_ad_traffic(trace.syslog, ad_domains, keywords)
    prior = correlate(trace.events, traffic, delta_seconds)
    logger.info("probe %s seed=%d: %d nodes, %d edges, %d/%d requests linked", bundle.app_id, seed,
                len(graph.nodes), len(graph.edges), len(prior.links), len(traffic))
    return graph, trace, prior
