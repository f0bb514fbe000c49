"""Offline static profiling of an app bundle.

Three passes, each over a different kind of evidence:

* manifest  -> :class:`ScreenPrior`   (declared SDK integration)
* layouts   -> :class:`SlotPrior`     (ad containers and their resource ids)
* bytecode  -> :class:`TriggerPrior`  (ad API calls attributed to activities)

:func:`build_knowledge_base` fuses them, together with the network prior from
dynamic probing, into the :class:`PriorKnowledgeBase` consulted at runtime.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping
from urllib.parse import urlparse

import yaml

from adscout.app_model import AppBundle, Manifest

logger = logging.getLogger(__name__)

UNATTRIBUTED = "unattributed"
RANK_PREFIXES = (("show", 3), ("load", 2), ("init", 1))


@dataclass(frozen=True)
class SdkSignatureConfig:
    sdk_prefixes: tuple[str, ...]
    ad_api_names: tuple[str, ...] = ()
    ad_listener_names: tuple[str, ...] = ()
    ad_format_name_hints: tuple[tuple[str, str], ...] = ()
    library_names: Mapping[str, str] = field(default_factory=dict)
    ad_domains: tuple[str, ...] = ()
    traffic_keywords: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.sdk_prefixes:
            raise ValueError("sdk_prefixes must not be empty")

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "SdkSignatureConfig":
        raw = doc["sdk_prefixes"]
        if isinstance(raw, Mapping):
            prefixes = tuple(raw)
            names = {k: str(v) for k, v in raw.items()}
        else:
            prefixes = tuple(raw)
            names = {}
        return cls(
            sdk_prefixes=prefixes,
            ad_api_names=tuple(doc.get("ad_api_names", ())),
            ad_listener_names=tuple(doc.get("ad_listener_names", ())),
            ad_format_name_hints=tuple((str(a), str(b)) for a, b in doc.get("ad_format_name_hints", ())),
            library_names=names,
            ad_domains=tuple(doc.get("ad_domains", ())),
            traffic_keywords=tuple(doc.get("traffic_keywords", ())),
        )

    @classmethod
    def load(cls, path: str | Path | None = None) -> "SdkSignatureConfig":
        if path is None:
            text = resources.files("adscout.data").joinpath("sdk_signatures.yaml").read_text(encoding="utf-8")
        else:
            text = Path(path).read_text(encoding="utf-8")
        return cls.from_dict(yaml.safe_load(text))

    def match_prefix(self, name: str) -> str | None:
        for prefix in self.sdk_prefixes:
            if name.startswith(prefix):
                return prefix
        return None

    def library_for(self, name: str) -> str | None:
        prefix = self.match_prefix(name)
        if prefix is None:
            return None
        return self.library_names.get(prefix, prefix)

    def infer_ad_type(self, *names: str | None) -> str:
        hay = " ".join(n.lower() for n in names if n)
        for hint, ad_type in self.ad_format_name_hints:
            if hint in hay:
                return ad_type
        return "unknown"


def default_config() -> SdkSignatureConfig:
    return SdkSignatureConfig.load()


def _ordered_unique(items) -> list:
    seen = set()
    out = []
    for item in items:
        if item not in seen:
            seen.add(item)
            out.append(item)
    return out


# --------------------------------------------------------------------------
# Screen prior


@dataclass(frozen=True)
class ScreenPrior:
    ad_related_activities: tuple[str, ...] = ()
    matched_permissions: tuple[str, ...] = ()
    matched_metadata: tuple[tuple[str, str], ...] = ()
    detected_libraries: tuple[str, ...] = ()
    success_activities: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not (self.ad_related_activities or self.matched_permissions
                    or self.matched_metadata or self.detected_libraries)

    def to_dict(self) -> dict:
        return {
            "ad_related_activities": list(self.ad_related_activities),
            "matched_permissions": list(self.matched_permissions),
            "matched_metadata": [list(kv) for kv in self.matched_metadata],
            "detected_libraries": list(self.detected_libraries),
            "success_activities": list(self.success_activities),
        }


def extract_screen_prior(bundle: AppBundle, config: SdkSignatureConfig) -> ScreenPrior:
    manifest: Manifest = bundle.manifest
    libs = []
    activities = []
    for act in manifest.activities:
        lib = config.library_for(manifest.qualified(act))
        if lib:
            activities.append(act)
            libs.append(lib)
    perms = []
    for perm in manifest.permissions:
        lib = config.library_for(perm)
        if lib:
            perms.append(perm)
            libs.append(lib)
    meta = []
    for key, value in manifest.metadata:
        lib = config.library_for(key) or config.library_for(value)
        if lib:
            meta.append((key, value))
            libs.append(lib)
    return ScreenPrior(
        ad_related_activities=tuple(sorted(activities)),
        matched_permissions=tuple(perms),
        matched_metadata=tuple(meta),
        detected_libraries=tuple(sorted(set(libs))),
        success_activities=manifest.registered_success_activities,
    )


# --------------------------------------------------------------------------
# Slot prior


@dataclass(frozen=True)
class SlotEntry:
    activity: str
    view_class: str
    resource_id_string: str | None
    resource_id_hex: str | None
    inferred_ad_type: str
    depth: int = 0


@dataclass(frozen=True)
class SlotPrior:
    entries: tuple[SlotEntry, ...] = ()
    warnings: tuple[str, ...] = ()
    libraries: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.entries

    def to_dict(self) -> dict:
        return {
            "entries": [asdict(e) for e in self.entries],
            "warnings": list(self.warnings),
            "libraries": list(self.libraries),
        }


def extract_slot_prior(bundle: AppBundle, config: SdkSignatureConfig) -> SlotPrior:
    entries = []
    warnings = []
    for activity in sorted(bundle.layouts):
        for node in bundle.layouts[activity].walk():
            if config.match_prefix(node.cls) is None:
                continue
            rid = node.resource_id
            hex_id = bundle.resource_map.get(rid) if rid else None
            if rid and hex_id is None:
                msg = f"{activity}: resource id '{rid}' of {node.cls} does not resolve"
                logger.warning(msg)
                warnings.append(msg)
            entries.append(SlotEntry(
                activity=activity,
                view_class=node.cls,
                resource_id_string=rid,
                resource_id_hex=hex_id,
                inferred_ad_type=config.infer_ad_type(node.cls.rsplit(".", 1)[-1], rid),
                depth=node.depth,
            ))
    libs = sorted({config.library_for(e.view_class) for e in entries} - {None})
    return SlotPrior(tuple(entries), tuple(warnings), tuple(libs))


# --------------------------------------------------------------------------
# Trigger prior


@dataclass(frozen=True)
class TriggerEntry:
    signature: str
    importance_rank: int
    clues: tuple[str, ...] = ()


@dataclass(frozen=True)
class TriggerPrior:
    methods_by_activity: Mapping[str, tuple[TriggerEntry, ...]] = field(default_factory=dict)
    libraries: tuple[str, ...] = ()

    @property
    def empty(self) -> bool:
        return not self.methods_by_activity

    def methods(self, activity: str) -> list[str]:
        return [e.signature for e in self.methods_by_activity.get(activity, ())]

    def to_dict(self) -> dict:
        return {
            "methods_by_activity": {
                act: [[e.signature, e.importance_rank] for e in entries]
                for act, entries in sorted(self.methods_by_activity.items())
            },
            "libraries": list(self.libraries),
        }


def importance_rank(api_name: str) -> int:
    simple = api_name.rsplit(".", 1)[-1].lower()
    for prefix, rank in RANK_PREFIXES:
        if simple.startswith(prefix):
            return rank
    return 1


def _is_ad_api(name: str, config: SdkSignatureConfig) -> bool:
    if "." in name:
        return config.match_prefix(name) is not None
    return name in config.ad_api_names


def _is_ad_listener(name: str, config: SdkSignatureConfig) -> bool:
    if config.match_prefix(name) is not None:
        return True
    return any(part in config.ad_listener_names for part in name.split("."))


def extract_trigger_prior(bundle: AppBundle, config: SdkSignatureConfig) -> TriggerPrior:
    table = bundle.class_table()
    found: dict[str, dict[str, TriggerEntry]] = {}
    libs = []
    for cls in bundle.code_summary:
        clue_methods = []
        for m in cls.methods:
            apis = [a for a in m.ad_apis if _is_ad_api(a, config)]
            listeners = [lst for lst in m.listeners if _is_ad_listener(lst, config)]
            if not (apis or listeners):
                continue
            rank = max([importance_rank(a) for a in apis] + [1 if listeners else 0])
            clue_methods.append((m.signature, rank, tuple(apis + listeners)))
            libs.extend(lib for lib in map(config.library_for, apis + listeners) if lib)
        if not clue_methods:
            continue

        owner = UNATTRIBUTED
        cur = cls.class_name
        while True:
            act = bundle.manifest.activity_for_class(cur)
            if act is not None:
                owner = act
                break
            if cur not in table:
                break
            cur = table[cur].superclass

        bucket = found.setdefault(owner, {})
        for sig, rank, clues in clue_methods:
            prev = bucket.get(sig)
            if prev is None or rank > prev.importance_rank:
                bucket[sig] = TriggerEntry(sig, rank, clues)

    ordered = {
        act: tuple(sorted(entries.values(), key=lambda e: -e.importance_rank))
        for act, entries in found.items()
    }
    return TriggerPrior(ordered, tuple(sorted(set(libs))))


# --------------------------------------------------------------------------
# Knowledge base


@dataclass
class PriorKnowledgeBase:
    """Fused offline priors, queryable by activity and by widget resource id."""

    ad_activities: list[str] = field(default_factory=list)
    methods_by_activity: dict[str, list[tuple[str, int]]] = field(default_factory=dict)
    slots: list[SlotEntry] = field(default_factory=list)
    libraries: list[str] = field(default_factory=list)
    ad_domains: list[str] = field(default_factory=list)
    network_links: list[dict] = field(default_factory=list)
    success_activities: list[str] = field(default_factory=list)

    def is_ad_activity(self, activity: str) -> bool:
        return activity in self.ad_activities

    def methods(self, activity: str) -> list[str]:
        return [sig for sig, _ in self.methods_by_activity.get(activity, [])]

    def slot_for_resource(self, resource_id: str | None) -> SlotEntry | None:
        """Accepts a short name, a qualified ``pkg:id/name`` string or a hex id."""
        if not resource_id:
            return None
        name = resource_id.split(":id/", 1)[-1]
        for slot in self.slots:
            if resource_id == slot.resource_id_hex or name == slot.resource_id_string:
                return slot
        return None

    def linked_actions(self, state_fingerprint: str) -> list[dict]:
        return [ln for ln in self.network_links if ln.get("state") == state_fingerprint]

    @property
    def empty(self) -> bool:
        return not (self.ad_activities or self.methods_by_activity or self.slots
                    or self.libraries or self.ad_domains or self.network_links)

    def to_dict(self) -> dict:
        return {
            "ad_activities": list(self.ad_activities),
            "methods_by_activity": {k: [[s, r] for s, r in v] for k, v in self.methods_by_activity.items()},
            "slots": [asdict(s) for s in self.slots],
            "libraries": list(self.libraries),
            "ad_domains": list(self.ad_domains),
            "network_links": [dict(ln) for ln in self.network_links],
            "success_activities": list(self.success_activities),
        }

    @classmethod
    def from_dict(cls, doc: Mapping[str, Any]) -> "PriorKnowledgeBase":
        return cls(
            ad_activities=list(doc.get("ad_activities", [])),
            methods_by_activity={k: [(s, int(r)) for s, r in v] for k, v in doc.get("methods_by_activity", {}).items()},
            slots=[SlotEntry(**s) for s in doc.get("slots", [])],
            libraries=list(doc.get("libraries", [])),
            ad_domains=list(doc.get("ad_domains", [])),
            network_links=[dict(ln) for ln in doc.get("network_links", [])],
            success_activities=list(doc.get("success_activities", [])),
        )


def build_knowledge_base(screen: ScreenPrior, slot: SlotPrior, trigger: TriggerPrior, network=None) -> PriorKnowledgeBase:
    activities = set(screen.ad_related_activities)
    activities.update(e.activity for e in slot.entries)
    activities.update(a for a in trigger.methods_by_activity if a != UNATTRIBUTED)

    libraries = set(screen.detected_libraries) | set(slot.libraries) | set(trigger.libraries)
    kb = PriorKnowledgeBase(
        ad_activities=sorted(activities),
        methods_by_activity={
            act: [(e.signature, e.importance_rank) for e in entries]
            for act, entries in sorted(trigger.methods_by_activity.items())
        },
        slots=list(slot.entries),
        success_activities=list(screen.success_activities),
    )
    if network is not None:
        domains = []
        for link in network.links:
            kb.network_links.append({
                "state": link.event.state_fingerprint,
                "action": link.event.action,
                "url": link.url,
                "lag": round(link.lag_seconds, 3),
            })
            domains.append(urlparse(link.url).hostname or link.url)
        domains.extend(urlparse(u).hostname or u for u, _ in network.unlinked)
        kb.ad_domains = _ordered_unique(d for d in domains if d)
    kb.libraries = sorted(libraries)
    return kb


def profile_bundle(bundle: AppBundle, config: SdkSignatureConfig | None = None):
    """Run the three static passes; returns ``(screen, slot, trigger)``."""
    config = config or default_config()
    return (
        extract_screen_prior(bundle, config),
        extract_slot_prior(bundle, config),
        extract_trigger_prior(bundle, config),
    )
