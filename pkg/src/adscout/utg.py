"""UI transition graph with per-node visit counts and ad-relevance beliefs."""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from adscout.app_model import UiState, Widget

DEFAULT_INITIAL_SCORE = 0.10
DEFAULT_ALPHA = 0.3
FORMAT_VERSION = 1


@dataclass
class UtgNode:
    id: str
    activity: str = ""
    visits: int = 0
    score: float = DEFAULT_INITIAL_SCORE
    semantic_summary: str | None = None
    structural_metadata: str = ""


@dataclass(frozen=True)
class UtgEdge:
    src: str
    event: str
    dst: str


@dataclass
class Neighborhood:
    center: UtgNode
    # (hops, node, event that first reached it)
    layers: list[tuple[int, UtgNode, str]] = field(default_factory=list)
    edges: list[UtgEdge] = field(default_factory=list)

    def node_ids(self) -> list[str]:
        return [self.center.id] + [n.id for _, n, _ in self.layers]

    def by_hops(self, hops: int) -> list[tuple[UtgNode, str]]:
        return [(n, ev) for h, n, ev in self.layers if h == hops]


def structural_digest(widgets: tuple[Widget, ...]) -> str:
    classes = sorted({w.simple_class for w in widgets})
    clickable = sum(1 for w in widgets if w.clickable)
    return f"{len(widgets)} widgets, {clickable} clickable: {','.join(classes)}"


def describe_widget(widget: Widget) -> str:
    l, t, r, b = widget.bounds
    if widget.content_desc:
        return f"[button alt='{widget.content_desc}' bound_box={l},{t},{r},{b}][/button]"
    return f"[{l},{t},{r},{b}-{widget.simple_class}-{widget.text or ''}]"


def describe_action(state_id: str, action_key: str, state: UiState | None = None) -> str:
    """Canonical event string for an action taken in ``state_id``."""
    if action_key == "back":
        return f"KeyEvent(state={state_id}, name=BACK)"
    if action_key == "scroll":
        return f"ScrollEvent(state={state_id}, direction=DOWN)"
    if action_key == "restart":
        return "RestartAppEvent()"
    if action_key.startswith("tap:") and state is not None:
        idx = int(action_key.split(":", 1)[1])
        if 0 <= idx < len(state.widgets):
            return f"TouchEvent(state={state_id}, view={describe_widget(state.widgets[idx])})"
    if action_key.startswith("tap_point:"):
        return f"TouchEvent(state={state_id}, point=({action_key.split(':', 1)[1]}))"
    if action_key.startswith("tap_region:") and state is not None:
        idx = int(action_key.split(":", 1)[1])
        if 0 <= idx < len(state.canvas_regions):
            l, t, r, b = state.canvas_regions[idx].bounds
            return f"TouchEvent(state={state_id}, region=[{l},{t},{r},{b}])"
    return f"Event(state={state_id}, key={action_key})"


class TransitionGraph:
    """Directed multigraph keyed by ``(src, event, dst)`` with set semantics."""

    def __init__(self, initial_score: float = DEFAULT_INITIAL_SCORE):
        if not 0.0 <= initial_score <= 1.0:
            raise ValueError("initial_score must lie in [0, 1]")
        self.initial_score = initial_score
        self.nodes: dict[str, UtgNode] = {}
        self.edges: list[UtgEdge] = []
        self._edge_set: set[UtgEdge] = set()
        self._out: dict[str, list[UtgEdge]] = {}

    def __contains__(self, node_id: str) -> bool:
        return node_id in self.nodes

    def add_node(self, node_id: str, activity: str = "", structural_metadata: str = "") -> UtgNode:
        node = self.nodes.get(node_id)
        if node is None:
            node = UtgNode(node_id, activity, 0, self.initial_score, None, structural_metadata)
            self.nodes[node_id] = node
            self._out[node_id] = []
        else:
            node.activity = node.activity or activity
            node.structural_metadata = node.structural_metadata or structural_metadata
        return node

    def add_state(self, state: UiState) -> UtgNode:
        return self.add_node(state.state_fingerprint, state.activity, structural_digest(state.widgets))

    def _add_edge(self, edge: UtgEdge) -> None:
        if edge not in self._edge_set:
            self._edge_set.add(edge)
            self.edges.append(edge)
            self._out[edge.src].append(edge)

    def record_transition(self, src: UiState | str, event: str, dst: UiState | str) -> None:
        """Union in the transition; only the arrival visit counter changes on repeats."""
        s = self.add_state(src) if isinstance(src, UiState) else self.add_node(src)
        d = self.add_state(dst) if isinstance(dst, UiState) else self.add_node(dst)
        self._add_edge(UtgEdge(s.id, event, d.id))
        d.visits += 1

    def mark_visit(self, state: UiState | str) -> UtgNode:
        node = self.add_state(state) if isinstance(state, UiState) else self.add_node(state)
        node.visits += 1
        return node

    def successors(self, node_id: str) -> list[UtgEdge]:
        return list(self._out.get(node_id, ()))

    def successor_for(self, node_id: str, event: str) -> UtgNode | None:
        """Most visited known destination of ``event`` from ``node_id``."""
        best = None
        for edge in self._out.get(node_id, ()):
            if edge.event == event:
                cand = self.nodes[edge.dst]
                if best is None or cand.visits > best.visits:
                    best = cand
        return best

    def update_score(self, node_id: str, s_hat: float, alpha: float = DEFAULT_ALPHA) -> float:
        if not 0.0 <= s_hat <= 1.0:
            raise ValueError(f"s_hat must lie in [0, 1], got {s_hat}")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        node = self.nodes[node_id]
        node.score = min(1.0, max(0.0, (1.0 - alpha) * node.score + alpha * s_hat))
        return node.score

    def neighborhood(self, node_id: str, hops: int = 2) -> Neighborhood:
        if node_id not in self.nodes:
            raise KeyError(f"unknown node {node_id}")
        if hops < 0:
            raise ValueError("hops must be >= 0")
        dist = {node_id: 0}
        via: dict[str, str] = {}
        queue = deque([node_id])
        while queue:
            cur = queue.popleft()
            if dist[cur] == hops:
                continue
            for edge in self._out[cur]:
                if edge.dst not in dist:
                    dist[edge.dst] = dist[cur] + 1
                    via[edge.dst] = edge.event
                    queue.append(edge.dst)
        ordered = sorted((d, nid) for nid, d in dist.items() if nid != node_id)
        hood = Neighborhood(self.nodes[node_id])
        hood.layers = [(d, self.nodes[nid], via[nid]) for d, nid in ordered]
        inside = set(dist)
        hood.edges = [e for e in self.edges if e.src in inside and e.dst in inside]
        return hood

    def merge(self, other: "TransitionGraph", *, with_visits: bool = True) -> None:
        """Union ``other`` into this graph; visit counts add when requested."""
        for node in other.nodes.values():
            mine = self.add_node(node.id, node.activity, node.structural_metadata)
            if with_visits:
                mine.visits += node.visits
            if node.semantic_summary and not mine.semantic_summary:
                mine.semantic_summary = node.semantic_summary
        for edge in other.edges:
            self._add_edge(edge)

    # export ----------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "adscout-utg",
            "version": FORMAT_VERSION,
            "initial_score": self.initial_score,
            "nodes": [
                {
                    "id": n.id,
                    "activity": n.activity,
                    "visits": n.visits,
                    "score": n.score,
                    "semantic_summary": n.semantic_summary,
                    "structural_metadata": n.structural_metadata,
                }
                for n in self.nodes.values()
            ],
            "edges": [[e.src, e.event, e.dst] for e in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "TransitionGraph":
        if doc.get("format") != "adscout-utg":
            raise ValueError("not a transition graph document")
        graph = cls(doc.get("initial_score", DEFAULT_INITIAL_SCORE))
        for raw in doc["nodes"]:
            node = graph.add_node(raw["id"], raw.get("activity", ""), raw.get("structural_metadata", ""))
            node.visits = int(raw["visits"])
            node.score = float(raw["score"])
            node.semantic_summary = raw.get("semantic_summary")
        for src, event, dst in doc["edges"]:
            graph._add_edge(UtgEdge(src, event, dst))
        return graph

    def export(self, fmt: str = "json") -> str:
        if fmt == "json":
            return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"
        if fmt == "dot":
            return self._to_dot()
        raise ValueError(f"unknown export format '{fmt}'")

    @classmethod
    def load(cls, text: str) -> "TransitionGraph":
        return cls.from_dict(json.loads(text))

    def _to_dot(self) -> str:
        def q(s: str) -> str:
            return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'

        lines = ["digraph utg {"]
        for n in self.nodes.values():
            label = "\\n".join([q(n.id)[1:-1], q(n.activity)[1:-1], f"visits={n.visits} score={n.score:.2f}"])
            lines.append(f"  {q(n.id)} [label=\"{label}\"];")
        for e in self.edges:
            lines.append(f"  {q(e.src)} -> {q(e.dst)} [label={q(e.event)}];")
        lines.append("}")
        return "\n".join(lines) + "\n"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TransitionGraph):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def update_score(graph: TransitionGraph, node_id: str, s_hat: float, alpha: float) -> float:
    return graph.update_score(node_id, s_hat, alpha)


def record_transition(graph: TransitionGraph, src, event: str, dst) -> None:
    graph.record_transition(src, event, dst)
