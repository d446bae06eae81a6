"""Alarm taxonomy, classification, JSON reports and corpus aggregation.

Classification rules (one category per alarm):

* a sensitive source reaching the page (``web-exfiltration``) is a leak
  named after the source: TM-* -> TMLeaks, GPS -> GPSLeaks, SQLite ->
  SQLiteLeaks, file content -> ReadFile;
* a flow that an interface call enables and that ends in an action sink is
  named after the sink: load-url -> FrameConfusion (attacker input steering
  what the Webview loads), send-sms -> DirectlySendSMS, make-call ->
  DirectlyMakeCalls, sql-query -> SQLiteQuery, file sinks -> OpenFile,
  WriteFile or ReadFile, play-media -> PlayVideoAudio, download ->
  DownloadPhoto, and the reflection sinks -> FetchClass, FetchMethod,
  FetchConstructor, ConstructorInit and MethodParameter;
* ``start-activity`` flows go through intent resolution: CALL/DIAL ->
  CallViaIntent, SEND/SENDTO -> EmailSMSViaIntent (PostToSocial when the
  package is a known social app), IMAGE/VIDEO_CAPTURE -> TakePicture,
  INSERT/EDIT -> EditCalendar, VIEW/MAIN -> StartApp, an unresolved action
  with an attacker-controlled target package -> StartApp, any other
  unresolved action -> UnknownIntent;
* paired preference flows are named after the source written into the
  preferences: Pref{TM,Connectivity,SQLite,GPS}Leaks;
* an app targeting API < 17 with at least one registered interface object
  gets ApiPriorTo17;
* flows that never touch the attacker model (app code leaking on its own)
  and anything else are Uncategorized, so no flow is silently dropped.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional

import numpy as np

from .interfaces import ANNOTATION_API_LEVEL, WebviewInterfaceMap
from .refine import GET_LABEL, PUT_LABEL, UNKNOWN, IntentFinding, PreferenceLeak
from .taint.config import ATTACKER_LABEL, EXFIL_LABEL
from .taint.engine import Flow, normalize_site, sink_identity

SCHEMA_VERSION = 1


class AlarmCategory(str, enum.Enum):
    OpenFile = "OpenFile"
    WriteFile = "WriteFile"
    ReadFile = "ReadFile"
    TMLeaks = "TMLeaks"
    PrefTMLeaks = "PrefTMLeaks"
    PrefConnectivityLeaks = "PrefConnectivityLeaks"
    SQLiteLeaks = "SQLiteLeaks"
    SQLiteQuery = "SQLiteQuery"
    PrefSQLiteLeaks = "PrefSQLiteLeaks"
    GPSLeaks = "GPSLeaks"
    PrefGPSLeaks = "PrefGPSLeaks"
    DirectlySendSMS = "DirectlySendSMS"
    DirectlyMakeCalls = "DirectlyMakeCalls"
    CallViaIntent = "CallViaIntent"
    EmailSMSViaIntent = "EmailSMSViaIntent"
    TakePicture = "TakePicture"
    DownloadPhoto = "DownloadPhoto"
    PlayVideoAudio = "PlayVideoAudio"
    EditCalendar = "EditCalendar"
    PostToSocial = "PostToSocial"
    StartApp = "StartApp"
    ApiPriorTo17 = "ApiPriorTo17"
    UnknownIntent = "UnknownIntent"
    FrameConfusion = "FrameConfusion"
    FetchClass = "FetchClass"
    FetchConstructor = "FetchConstructor"
    ConstructorInit = "ConstructorInit"
    FetchMethod = "FetchMethod"
    MethodParameter = "MethodParameter"
    Uncategorized = "Uncategorized"


C = AlarmCategory
TABLE_CATEGORIES = tuple(c for c in AlarmCategory if c is not C.Uncategorized)

SINK_CATEGORY = {
    "load-url": C.FrameConfusion,
    "send-sms": C.DirectlySendSMS,
    "make-call": C.DirectlyMakeCalls,
    "sql-query": C.SQLiteQuery,
    "file-open": C.OpenFile,
    "file-write": C.WriteFile,
    "file-read": C.ReadFile,
    "play-media": C.PlayVideoAudio,
    "download": C.DownloadPhoto,
    "reflect-class": C.FetchClass,
    "reflect-method": C.FetchMethod,
    "reflect-constructor": C.FetchConstructor,
    "reflect-newinstance": C.ConstructorInit,
    "reflect-invoke": C.MethodParameter,
}

LEAK_CATEGORY = (  # source label prefix -> (direct, via preferences)
    ("TM-", C.TMLeaks, C.PrefTMLeaks),
    ("GPS-", C.GPSLeaks, C.PrefGPSLeaks),
    ("sqlite-", C.SQLiteLeaks, C.PrefSQLiteLeaks),
    ("connectivity-", None, C.PrefConnectivityLeaks),
    ("file-content", C.ReadFile, None),
)

INTENT_CATEGORY = {
    "CALL": C.CallViaIntent,
    "DIAL": C.CallViaIntent,
    "SEND": C.EmailSMSViaIntent,
    "SENDTO": C.EmailSMSViaIntent,
    "SEND_MULTIPLE": C.EmailSMSViaIntent,
    "IMAGE_CAPTURE": C.TakePicture,
    "VIDEO_CAPTURE": C.TakePicture,
    "INSERT": C.EditCalendar,
    "EDIT": C.EditCalendar,
    "VIEW": C.StartApp,
    "MAIN": C.StartApp,
}

SOCIAL_PACKAGES = ("com.facebook.katana", "com.twitter.android", "com.instagram.android",
                   "com.whatsapp", "com.google.android.apps.plus")


def _leak_category(source: str, via_prefs: bool) -> Optional[AlarmCategory]:
    for prefix, direct, pref in LEAK_CATEGORY:
        if source.startswith(prefix):
            return pref if via_prefs else direct
    return None


def pair_category(source: str, sink: str, via_prefs: bool = False) -> AlarmCategory:
    if sink == EXFIL_LABEL:
        cat = _leak_category(source, via_prefs)
        if cat is not None:
            return cat
    if sink in SINK_CATEGORY and (source == ATTACKER_LABEL or not via_prefs):
        return SINK_CATEGORY[sink]
    return C.Uncategorized


def intent_category(f: IntentFinding) -> AlarmCategory:
    if f.action == UNKNOWN:
        return C.StartApp if f.target_tainted else C.UnknownIntent
    cat = INTENT_CATEGORY.get(f.short_action)
    if cat is C.EmailSMSViaIntent and f.package in SOCIAL_PACKAGES:
        return C.PostToSocial
    return cat or C.UnknownIntent


@dataclass(frozen=True)
class Alarm:
    category: AlarmCategory
    evidence: dict
    confidence: str = "high"

    def as_dict(self) -> dict:
        return {"category": self.category.value, "confidence": self.confidence,
                "evidence": self.evidence}

    @classmethod
    def from_dict(cls, d: dict) -> "Alarm":
        return cls(AlarmCategory(d["category"]), d["evidence"], d["confidence"])


def flow_evidence(f: Flow) -> dict:
    return {
        "source": f.source,
        "source_site": str(f.source_site),
        "sink": f.sink,
        "sink_site": str(normalize_site(f.sink_site, f.context)),
        "attribution": f.attribution.name if f.attribution else None,
        "attribution_sig": str(f.attribution) if f.attribution else None,
        "witness": [f"{s}@{i}" for s, i in f.witness],
    }


def flow_key(f: Flow) -> tuple:
    return (f.source, f.source_site, f.sink, sink_identity(f))


def _origin(f: Flow):
    # every attacker argument is the same adversary; app sources stay per site
    return f.source if f.source == ATTACKER_LABEL else (f.source, str(f.source_site))


def classify(
    flows: Iterable[Flow],
    pref_leaks: Iterable[PreferenceLeak] = (),
    intents: Iterable[IntentFinding] = (),
    manifest=None,
    wmap: Optional[WebviewInterfaceMap] = None,
) -> list[Alarm]:
    """Map attacker-involved flows and refinement findings to alarms."""
    alarms: dict = {}

    def add(cat, evidence, conf="high", key=None):
        k = (cat, key if key is not None else json.dumps(evidence, sort_keys=True))
        if k not in alarms:
            alarms[k] = Alarm(cat, evidence, conf)

    pref_leaks = list(pref_leaks)
    consumed = set()
    for p in pref_leaks:
        if not (p.get.attacker_involved or p.put.attacker_involved):
            continue
        consumed.add(flow_key(p.put))
        consumed.add(flow_key(p.get))
        cat = pair_category(p.put.source, p.get.sink, via_prefs=True)
        ev = {
            "key": p.key_text,
            "value_type": p.value_type,
            "suspicious": p.suspicious,
            "put": flow_evidence(p.put),
            "get": flow_evidence(p.get),
        }
        add(cat, ev, p.confidence, key=(p.put.source, str(p.put.source_site), p.key_text,
                                        p.get.sink, str(sink_identity(p.get))))
    for f in sorted(intents, key=lambda x: x.flow.sort_key()):
        consumed.add(flow_key(f.flow))
        if not f.flow.attacker_involved:
            continue
        ev = flow_evidence(f.flow)
        ev.update(action=f.action, package=f.package,
                  stack_consistent=f.stack_consistent, target_tainted=f.target_tainted)
        conf = "high" if f.stack_consistent or f.flow.source == ATTACKER_LABEL else "low"
        add(intent_category(f), ev, conf, key=(_origin(f.flow), ev["sink_site"]))
    for f in sorted(flows, key=Flow.sort_key):
        if flow_key(f) in consumed:
            continue
        ev = flow_evidence(f)
        key = (_origin(f), f.sink, str(sink_identity(f)))
        if not f.attacker_involved:
            # app-internal flow: listed so nothing is lost, but not an interface issue
            ev["background"] = True
            add(C.Uncategorized, ev, "low", key=key)
            continue
        cat = pair_category(f.source, f.sink)
        if f.source == GET_LABEL and f.sink == EXFIL_LABEL:
            cat = C.Uncategorized
        if f.sink == PUT_LABEL and f.source != ATTACKER_LABEL:
            cat = C.Uncategorized
        add(cat, ev, key=key)
    if (
        manifest is not None
        and manifest.target_api < ANNOTATION_API_LEVEL
        and wmap is not None
        and wmap.interface_classes()
    ):
        add(C.ApiPriorTo17, {"target_api": manifest.target_api,
                             "interfaces": sorted(wmap.interface_classes())})
    return sorted(alarms.values(), key=lambda a: (a.category.value,
                                                  json.dumps(a.evidence, sort_keys=True)))


# -- reports -------------------------------------------------------------------


@dataclass
class AlarmReport:
    app: str
    alarms: list[Alarm] = field(default_factory=list)
    interfaces: dict = field(default_factory=dict)
    preference_keys: list = field(default_factory=list)
    feasibility: dict = field(default_factory=dict)
    flows: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    status: str = "ok"

    @property
    def categories(self) -> set[AlarmCategory]:
        return {a.category for a in self.alarms}

    def count(self, category: AlarmCategory) -> int:
        return sum(a.category is category for a in self.alarms)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "app": self.app,
            "status": self.status,
            "alarms": [a.as_dict() for a in self.alarms],
            "interfaces": self.interfaces,
            "preference_keys": [{"key": k, "suspicious": s} for k, s in self.preference_keys],
            "feasibility": self.feasibility,
            "flows": self.flows,
            "stats": self.stats,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "AlarmReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema {d.get('schema_version')!r}")
        return cls(
            d["app"],
            [Alarm.from_dict(a) for a in d["alarms"]],
            d["interfaces"],
            [(p["key"], p["suspicious"]) for p in d["preference_keys"]],
            d["feasibility"],
            d["flows"],
            d["stats"],
            d["status"],
        )


def emit_report(report: AlarmReport) -> str:
    return json.dumps(report.as_dict(), sort_keys=True, indent=2) + "\n"


def load_report(text: str) -> AlarmReport:
    return AlarmReport.from_dict(json.loads(text))


# -- corpus --------------------------------------------------------------------


@dataclass
class CorpusSummary:
    apps: list[str]
    categories: list[str]
    counts: dict[str, int]
    matrix: np.ndarray  # NaN where undefined

    def corr(self, a, b) -> Optional[float]:
        i = self.categories.index(getattr(a, "value", a))
        j = self.categories.index(getattr(b, "value", b))
        v = self.matrix[i, j]
        return None if np.isnan(v) else float(v)

    def as_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "apps": self.apps,
            "categories": self.categories,
            "counts": self.counts,
            "correlation": [
                [None if np.isnan(v) else round(float(v), 12) for v in row]
                for row in self.matrix
            ],
        }

    def table(self) -> str:
        width = max(len(c) for c in self.categories)
        lines = [f"{'Category':<{width}}  Apps", f"{'-' * width}  ----"]
        for c in self.categories:
            lines.append(f"{c:<{width}}  {self.counts[c]:>4}")
        lines.append(f"{'Total apps':<{width}}  {len(self.apps):>4}")
        return "\n".join(lines) + "\n"


def phi_matrix(indicators: np.ndarray) -> np.ndarray:
    """Pearson correlation between the columns of a 0/1 matrix; NaN if undefined."""
    x = np.asarray(indicators, dtype=float)
    centered = x - x.mean(axis=0)
    norms = np.sqrt((centered ** 2).sum(axis=0))
    with np.errstate(invalid="ignore", divide="ignore"):
        m = (centered.T @ centered) / np.outer(norms, norms)
    m[:, norms == 0] = np.nan
    m[norms == 0, :] = np.nan
    m = np.clip(m, -1.0, 1.0)
    np.fill_diagonal(m, np.where(norms > 0, 1.0, np.nan))
    return (m + m.T) / 2


def aggregate_corpus(reports: Iterable[AlarmReport]) -> CorpusSummary:
    reports = sorted(reports, key=lambda r: r.app)
    if not reports:
        raise ValueError("cannot aggregate an empty corpus")
    cats = [c.value for c in AlarmCategory]
    ind = np.array([[c in {a.category.value for a in r.alarms} for c in cats] for r in reports],
                   dtype=float)
    counts = {c: int(ind[:, k].sum()) for k, c in enumerate(cats)}
    return CorpusSummary([r.app for r in reports], cats, counts, phi_matrix(ind))
