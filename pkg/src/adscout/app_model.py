"""Deterministic simulated apps.

An :class:`AppBundle` is a declarative description of one app: its manifest,
static resources, a bytecode summary, and a scripted transition system with
hidden ad-trigger instances. A :class:`Session` executes that script one
action at a time. Explorers only ever see :class:`UiState` observations.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

import yaml

from adscout.fingerprint import serialize_canvas, serialize_widgets, short_id

logger = logging.getLogger(__name__)

FRAMEWORK_PREFIXES = ("android.", "androidx.", "java.", "javax.", "kotlin.", "dalvik.")
AD_TYPES = ("embedded", "popup", "custom")
GLOBAL_ACTIONS = ("back", "scroll", "restart")

LAUNCHER_ACTIVITY = "<launcher>"
CRASH_ACTIVITY = "<crashed>"


class BundleError(ValueError):
    """Raised when a bundle file cannot be parsed or violates an invariant."""

    def __init__(self, message: str, where: str | None = None, line: int | None = None):
        self.where = where
        self.line = line
        parts = [message]
        if where:
            parts.append(f"at {where}")
        if line is not None:
            parts.append(f"(line {line})")
        super().__init__(" ".join(parts))


# --------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class Widget:
    index: int
    cls: str
    bounds: tuple[int, int, int, int]
    text: str | None = None
    content_desc: str | None = None
    resource_id: str | None = None
    clickable: bool = False
    scrollable: bool = False
    depth: int = 0
    # Ground truth consulted only by scripted captioners and oracles.
    vlm_label: tuple[str, str] | None = field(default=None, compare=False, repr=False)
    semantic_gain: float | None = field(default=None, compare=False, repr=False)

    @property
    def simple_class(self) -> str:
        return self.cls.rsplit(".", 1)[-1]


@dataclass(frozen=True)
class GroundTruthRegion:
    index: int
    bounds: tuple[int, int, int, int]
    label: str
    tag: str = "UI_ELEMENT"
    semantic_gain: float | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class UiState:
    state_fingerprint: str
    activity: str
    widgets: tuple[Widget, ...] = ()
    canvas_regions: tuple[GroundTruthRegion, ...] = ()
    clock_seconds: float = 0.0
    rendering: str = "hierarchy"
    screen_size: tuple[int, int] = (1080, 1920)
    contours: tuple[tuple[int, int, int, int], ...] = field(default=(), repr=False)

    @property
    def canonical(self) -> str:
        if self.rendering == "canvas":
            return serialize_canvas(self.activity, self.canvas_regions)
        return serialize_widgets(self.widgets)


@dataclass(frozen=True)
class Manifest:
    package: str
    activities: tuple[str, ...]
    permissions: tuple[str, ...] = ()
    metadata: tuple[tuple[str, str], ...] = ()
    registered_success_activities: tuple[str, ...] = ()

    def qualified(self, activity: str) -> str:
        if "." in activity:
            return activity
        return f"{self.package}.{activity}"

    def activity_for_class(self, class_name: str) -> str | None:
        for act in self.activities:
            if class_name == act or class_name == self.qualified(act):
                return act
        return None


@dataclass(frozen=True)
class LayoutNode:
    cls: str
    resource_id: str | None = None
    depth: int = 0
    children: tuple["LayoutNode", ...] = ()

    def walk(self) -> Iterable["LayoutNode"]:
        yield self
        for child in self.children:
            yield from child.walk()


@dataclass(frozen=True)
class MethodSummary:
    signature: str
    ad_apis: tuple[str, ...] = ()
    listeners: tuple[str, ...] = ()


@dataclass(frozen=True)
class ClassSummary:
    class_name: str
    superclass: str
    methods: tuple[MethodSummary, ...] = ()


@dataclass(frozen=True)
class Emission:
    tag: str
    message: str
    offset_seconds: float


@dataclass(frozen=True)
class TransitionEffect:
    next_state: str
    delay_seconds: float = 0.0
    crash: bool = False
    background: bool = False
    ad_exposure: str | None = None


@dataclass(frozen=True)
class AdTriggerInstance:
    ad_id: str
    host_state: str
    required_context: tuple[str, ...] = ()
    min_dwell_seconds: float = 0.0
    ad_type: str = "embedded"


@dataclass(frozen=True)
class StateSpec:
    activity: str
    rendering: str = "hierarchy"
    widgets: tuple[Widget, ...] = ()
    regions: tuple[GroundTruthRegion, ...] = ()
    contours: tuple[tuple[int, int, int, int], ...] = ()
    external: bool = False


@dataclass(frozen=True)
class BehaviorScript:
    initial_state: str
    states: Mapping[str, StateSpec]
    transitions: Mapping[tuple[str, str], TransitionEffect]
    ad_triggers: tuple[AdTriggerInstance, ...] = ()
    emissions: Mapping[tuple[str, str], tuple[Emission, ...]] = field(default_factory=dict)


@dataclass(frozen=True)
class AppBundle:
    app_id: str
    manifest: Manifest
    layouts: Mapping[str, LayoutNode]
    resource_map: Mapping[str, str]
    code_summary: tuple[ClassSummary, ...]
    behavior: BehaviorScript
    screen_size: tuple[int, int] = (1080, 1920)
    source: str | None = None

    @property
    def rendering(self) -> dict[str, str]:
        return {sid: spec.rendering for sid, spec in self.behavior.states.items()}

    @property
    def ad_ids(self) -> list[str]:
        return [t.ad_id for t in self.behavior.ad_triggers]

    def class_table(self) -> dict[str, ClassSummary]:
        return {c.class_name: c for c in self.code_summary}


# --------------------------------------------------------------------------
# Loading


def _req(node: Mapping[str, Any], key: str, where: str) -> Any:
    if not isinstance(node, Mapping):
        raise BundleError("expected a mapping", where)
    if key not in node:
        raise BundleError(f"missing field '{key}'", where)
    return node[key]


def _bounds(raw: Any, where: str) -> tuple[int, int, int, int]:
    if not isinstance(raw, (list, tuple)) or len(raw) != 4:
        raise BundleError("bounds must be [l, t, r, b]", where)
    l, t, r, b = (int(v) for v in raw)
    if not (l < r and t < b):
        raise BundleError(f"bounds not well-ordered: {list(raw)}", where)
    return (l, t, r, b)


def _parse_layout(raw: Mapping[str, Any], where: str, depth: int = 0) -> LayoutNode:
    cls = _req(raw, "class", where)
    children = tuple(
        _parse_layout(c, f"{where}.children[{i}]", depth + 1)
        for i, c in enumerate(raw.get("children") or ())
    )
    return LayoutNode(cls=str(cls), resource_id=raw.get("id"), depth=depth, children=children)


def _parse_widget(raw: Mapping[str, Any], index: int, where: str) -> Widget:
    label = raw.get("vlm_label")
    if label is not None:
        label = (str(_req(label, "tag", f"{where}.vlm_label")), str(_req(label, "description", f"{where}.vlm_label")))
    gain = raw.get("semantic_gain")
    return Widget(
        index=index,
        cls=str(_req(raw, "class", where)),
        bounds=_bounds(_req(raw, "bounds", where), f"{where}.bounds"),
        text=raw.get("text"),
        content_desc=raw.get("desc"),
        resource_id=raw.get("id"),
        clickable=bool(raw.get("clickable", False)),
        scrollable=bool(raw.get("scrollable", False)),
        depth=int(raw.get("depth", 0)),
        vlm_label=label,
        semantic_gain=None if gain is None else float(gain),
    )


def _parse_region(raw: Mapping[str, Any], index: int, where: str) -> GroundTruthRegion:
    gain = raw.get("semantic_gain")
    tag = str(raw.get("tag", "UI_ELEMENT"))
    if tag not in ("AD", "POTENTIAL_AD", "UI_ELEMENT"):
        raise BundleError(f"unknown region tag '{tag}'", where)
    return GroundTruthRegion(
        index=index,
        bounds=_bounds(_req(raw, "bounds", where), f"{where}.bounds"),
        label=str(_req(raw, "label", where)),
        tag=tag,
        semantic_gain=None if gain is None else float(gain),
    )


def _parse_effect(raw: Any, where: str) -> TransitionEffect:
    if isinstance(raw, str):
        return TransitionEffect(next_state=raw)
    delay = float(raw.get("delay", 0.0))
    if delay < 0:
        raise BundleError("delay_seconds must be >= 0", where)
    return TransitionEffect(
        next_state=str(_req(raw, "to", where)),
        delay_seconds=delay,
        crash=bool(raw.get("crash", False)),
        background=bool(raw.get("background", False)),
        ad_exposure=raw.get("ad"),
    )


def bundle_from_dict(doc: Mapping[str, Any], *, strict: bool = True, source: str | None = None) -> AppBundle:
    """Build and validate a bundle from an already-parsed document.

    With ``strict=False`` unresolvable layout resource ids are logged instead
    of rejected, so the profiler's degraded path can be exercised.
    """
    app_id = str(_req(doc, "app_id", "<root>"))
    m = _req(doc, "manifest", "<root>")
    activities = tuple(str(a) for a in _req(m, "activities", "manifest"))
    dupes = {a for a in activities if activities.count(a) > 1}
    if dupes:
        raise BundleError(f"duplicate activity names {sorted(dupes)}", "manifest.activities")
    metadata = []
    for i, item in enumerate(m.get("metadata") or ()):
        if isinstance(item, Mapping):
            metadata.extend((str(k), str(v)) for k, v in item.items())
        elif isinstance(item, (list, tuple)) and len(item) == 2:
            metadata.append((str(item[0]), str(item[1])))
        else:
            raise BundleError("metadata entries must be [key, value]", f"manifest.metadata[{i}]")
    manifest = Manifest(
        package=str(m.get("package", app_id)),
        activities=activities,
        permissions=tuple(str(p) for p in m.get("permissions") or ()),
        metadata=tuple(metadata),
        registered_success_activities=tuple(str(a) for a in m.get("success_activities") or ()),
    )

    resource_map = {str(k): str(v) for k, v in (doc.get("resource_map") or {}).items()}

    layouts: dict[str, LayoutNode] = {}
    for act, raw in (doc.get("layouts") or {}).items():
        where = f"layouts.{act}"
        if act not in activities:
            raise BundleError(f"unknown activity '{act}'", where)
        layouts[act] = _parse_layout(raw, where)
        for node in layouts[act].walk():
            if node.resource_id and node.resource_id not in resource_map:
                if strict:
                    raise BundleError(f"unresolved resource id '{node.resource_id}'", where)
                logger.warning("unresolved resource id %r in %s", node.resource_id, where)

    classes = []
    for i, raw in enumerate(doc.get("code_summary") or ()):
        where = f"code_summary[{i}]"
        methods = tuple(
            MethodSummary(
                signature=str(_req(mr, "signature", f"{where}.methods[{j}]")),
                ad_apis=tuple(str(a) for a in mr.get("ad_apis") or ()),
                listeners=tuple(str(a) for a in mr.get("listeners") or ()),
            )
            for j, mr in enumerate(raw.get("methods") or ())
        )
        classes.append(
            ClassSummary(
                class_name=str(_req(raw, "class", where)),
                superclass=str(raw.get("superclass", "java.lang.Object")),
                methods=methods,
            )
        )
    _check_class_table(classes)

    behavior = _parse_behavior(_req(doc, "behavior", "<root>"), manifest)
    size = doc.get("screen_size") or (1080, 1920)
    return AppBundle(
        app_id=app_id,
        manifest=manifest,
        layouts=layouts,
        resource_map=resource_map,
        code_summary=tuple(classes),
        behavior=behavior,
        screen_size=(int(size[0]), int(size[1])),
        source=source,
    )


def _check_class_table(classes: list[ClassSummary]) -> None:
    table = {c.class_name: c for c in classes}
    for c in classes:
        if c.superclass not in table and not c.superclass.startswith(FRAMEWORK_PREFIXES):
            raise BundleError(f"superclass '{c.superclass}' of '{c.class_name}' does not resolve", "code_summary")
        seen = {c.class_name}
        cur = c.superclass
        while cur in table:
            if cur in seen:
                raise BundleError(f"superclass cycle through '{cur}'", "code_summary")
            seen.add(cur)
            cur = table[cur].superclass


def _parse_behavior(raw: Mapping[str, Any], manifest: Manifest) -> BehaviorScript:
    initial = str(_req(raw, "initial_state", "behavior"))
    states: dict[str, StateSpec] = {}
    transitions: dict[tuple[str, str], TransitionEffect] = {}
    emissions: dict[tuple[str, str], tuple[Emission, ...]] = {}
    for sid, sraw in (_req(raw, "states", "behavior") or {}).items():
        sid = str(sid)
        where = f"behavior.states.{sid}"
        activity = str(_req(sraw, "activity", where))
        external = bool(sraw.get("external", False))
        if not external and activity not in manifest.activities:
            raise BundleError(f"unknown activity '{activity}'", where)
        rendering = str(sraw.get("rendering", "hierarchy"))
        if rendering not in ("hierarchy", "canvas"):
            raise BundleError(f"unknown rendering mode '{rendering}'", where)
        widgets = tuple(_parse_widget(w, i, f"{where}.widgets[{i}]") for i, w in enumerate(sraw.get("widgets") or ()))
        regions = tuple(_parse_region(r, i, f"{where}.regions[{i}]") for i, r in enumerate(sraw.get("regions") or ()))
        if rendering == "canvas" and widgets:
            raise BundleError("canvas states carry regions, not widgets", where)
        if rendering == "hierarchy" and regions:
            raise BundleError("hierarchy states carry widgets, not regions", where)
        contours = tuple(_bounds(c, f"{where}.contours") for c in sraw.get("contours") or ())
        states[sid] = StateSpec(activity, rendering, widgets, regions, contours, external)
        for key, eff in (sraw.get("transitions") or {}).items():
            transitions[(sid, str(key))] = _parse_effect(eff, f"{where}.transitions.{key}")
        for key, items in (sraw.get("emit") or {}).items():
            emissions[(sid, str(key))] = tuple(
                Emission(str(_req(e, "tag", f"{where}.emit.{key}")), str(_req(e, "message", f"{where}.emit.{key}")), float(e.get("offset", 0.0)))
                for e in items
            )
    if initial not in states:
        raise BundleError(f"initial state '{initial}' does not exist", "behavior.initial_state")
    for (sid, key), eff in transitions.items():
        if eff.next_state not in states:
            raise BundleError(f"transition target '{eff.next_state}' does not exist", f"behavior.states.{sid}.transitions.{key}")

    triggers = []
    seen_ids: set[str] = set()
    for i, traw in enumerate(raw.get("ad_triggers") or ()):
        where = f"behavior.ad_triggers[{i}]"
        t = AdTriggerInstance(
            ad_id=str(_req(traw, "ad_id", where)),
            host_state=str(_req(traw, "host_state", where)),
            required_context=tuple(str(a) for a in traw.get("context") or ()),
            min_dwell_seconds=float(traw.get("min_dwell", 0.0)),
            ad_type=str(traw.get("ad_type", "embedded")),
        )
        if t.host_state not in states:
            raise BundleError(f"host state '{t.host_state}' does not exist", where)
        if t.ad_id in seen_ids:
            raise BundleError(f"duplicate ad_id '{t.ad_id}'", where)
        if t.ad_type not in AD_TYPES:
            raise BundleError(f"unknown ad_type '{t.ad_type}'", where)
        if t.min_dwell_seconds < 0:
            raise BundleError("min_dwell must be >= 0", where)
        seen_ids.add(t.ad_id)
        triggers.append(t)
    # ad_exposure only annotates the script; exposure itself is decided by triggers.
    for (sid, key), eff in transitions.items():
        if eff.ad_exposure is not None and eff.ad_exposure not in seen_ids:
            raise BundleError(f"unknown ad id '{eff.ad_exposure}'", f"behavior.states.{sid}.transitions.{key}")
    return BehaviorScript(initial, states, transitions, tuple(triggers), emissions)


def load_bundle(path: str | Path, *, strict: bool = True) -> AppBundle:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise BundleError(f"cannot read bundle: {exc}", str(path)) from exc
    try:
        doc = yaml.safe_load(text)
    except yaml.MarkedYAMLError as exc:
        line = exc.problem_mark.line + 1 if exc.problem_mark else None
        raise BundleError(f"parse error: {exc.problem}", str(path), line) from exc
    if not isinstance(doc, Mapping):
        raise BundleError("bundle document must be a mapping", str(path))
    return bundle_from_dict(doc, strict=strict, source=str(path))


# --------------------------------------------------------------------------
# Execution


@dataclass(frozen=True)
class LogRecord:
    timestamp: float
    tag: str
    message: str

    def to_line(self) -> str:
        return f"{self.timestamp:.3f}|{self.tag}|{self.message}"

    @classmethod
    def from_line(cls, line: str) -> "LogRecord":
        ts, tag, message = line.rstrip("\n").split("|", 2)
        return cls(float(ts), tag, message)


@dataclass(frozen=True)
class StepOutcome:
    action: str
    next: UiState
    events: tuple[LogRecord, ...] = ()
    ad_exposed: str | None = None
    crashed: bool = False
    backgrounded: bool = False
    dead: bool = False


def pseudo_state(activity: str, clock: float = 0.0) -> UiState:
    return UiState(short_id(activity, ""), activity, clock_seconds=clock)


class Session:
    """Single-owner execution of one bundle's behavior script."""

    def __init__(self, bundle: AppBundle, seed: int = 0, event_interval: float = 5.0):
        if event_interval < 0:
            raise ValueError("event_interval must be >= 0")
        self.bundle = bundle
        self.seed = seed
        self.rng = random.Random(seed)
        self.event_interval = float(event_interval)
        self.clock = 0.0
        self.log: list[LogRecord] = []
        self._enter_initial()

    def _enter_initial(self) -> None:
        self.state_id = self.bundle.behavior.initial_state
        self.crashed = False
        self.backgrounded = False
        self._return_state: str | None = None
        self.history: list[str] = []
        self._arrival_clock = self.clock
        self._arrival_context: tuple[str, ...] = ()
        self._exposed_this_visit: set[str] = set()

    # observation ---------------------------------------------------------

    def observe(self) -> UiState:
        if self.crashed:
            return pseudo_state(CRASH_ACTIVITY, self.clock)
        spec = self.bundle.behavior.states[self.state_id]
        state = UiState(
            state_fingerprint="",
            activity=spec.activity,
            widgets=spec.widgets,
            canvas_regions=spec.regions,
            clock_seconds=self.clock,
            rendering=spec.rendering,
            screen_size=self.bundle.screen_size,
            contours=spec.contours,
        )
        return _with_id(state)

    def available_actions(self) -> list[str]:
        """Every action key the script reacts to in the current state."""
        if self.crashed:
            return ["restart"]
        keys = sorted(k for (sid, k) in self.bundle.behavior.transitions if sid == self.state_id)
        if self.backgrounded and "back" not in keys:
            keys.append("back")
        keys.append("restart")
        return keys

    def resolve_point(self, x: float, y: float) -> int | None:
        """Topmost canvas region containing the point, if any."""
        spec = self.bundle.behavior.states[self.state_id]
        for region in reversed(spec.regions):
            l, t, r, b = region.bounds
            if l <= x < r and t <= y < b:
                return region.index
        return None

    # transition ----------------------------------------------------------

    def _resolve(self, action: str) -> str:
        if action.startswith("tap_point:") and not self.crashed:
            try:
                x, y = (float(v) for v in action.split(":", 1)[1].split(","))
            except ValueError:
                return action
            hit = self.resolve_point(x, y)
            return f"tap_region:{hit}" if hit is not None else action
        return action

    def step(self, action: str) -> StepOutcome:
        before = self.clock
        action = self._resolve(action)

        if action == "restart":
            self._enter_initial()
            self.clock = before + self.event_interval
            return self._finish(action, (), dead=False)

        if self.crashed:
            self.clock = before + self.event_interval
            return StepOutcome(action, self.observe(), crashed=True, dead=True)

        key = (self.state_id, action)
        effect = self.bundle.behavior.transitions.get(key)
        emitted = tuple(
            LogRecord(before + e.offset_seconds, e.tag, e.message)
            for e in self.bundle.behavior.emissions.get(key, ())
        )
        self.history.append(action)
        self.log.extend(emitted)

        if effect is None and action == "back" and self.backgrounded and self._return_state is not None:
            effect = TransitionEffect(next_state=self._return_state)
        if effect is None:
            self.clock = before + self.event_interval
            return self._finish(action, emitted, dead=True)

        self.clock = before + effect.delay_seconds + self.event_interval
        if effect.crash:
            self.crashed = True
            self.backgrounded = False
            return StepOutcome(action, self.observe(), emitted, crashed=True)
        states = self.bundle.behavior.states
        if effect.next_state != self.state_id:
            if states[effect.next_state].external and not states[self.state_id].external:
                self._return_state = self.state_id
            self.state_id = effect.next_state
            self._arrival_clock = before + effect.delay_seconds
            self._arrival_context = tuple(self.history)
            self._exposed_this_visit = set()
        self.backgrounded = states[self.state_id].external or effect.background
        return self._finish(action, emitted, dead=False)

    def _finish(self, action: str, emitted, *, dead: bool) -> StepOutcome:
        exposed = None
        for trig in self.bundle.behavior.ad_triggers:
            if trig.host_state != self.state_id or trig.ad_id in self._exposed_this_visit:
                continue
            ctx = trig.required_context
            if ctx and self._arrival_context[-len(ctx):] != ctx:
                continue
            if self.clock - self._arrival_clock < trig.min_dwell_seconds:
                continue
            self._exposed_this_visit.add(trig.ad_id)
            exposed = trig.ad_id
            break
        return StepOutcome(action, self.observe(), tuple(emitted), exposed, False, self.backgrounded, dead)

    def export_log(self) -> str:
        return "".join(r.to_line() + "\n" for r in sorted(self.log, key=lambda r: r.timestamp))


def _with_id(state: UiState) -> UiState:
    from dataclasses import replace

    return replace(state, state_fingerprint=short_id(state.activity, state.canonical))


def reset(bundle: AppBundle, seed: int = 0, event_interval: float = 5.0) -> tuple[Session, UiState]:
    session = Session(bundle, seed, event_interval)
    return session, session.observe()


def step(session: Session, action: str) -> StepOutcome:
    return session.step(action)


def observe(session: Session) -> UiState:
    return session.observe()
