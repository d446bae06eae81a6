"""Post-processing of raw flows: preference pairing, suspicious names, intents."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from .air import Invoke, New, Program, Sig
from .air.model import CONSTRUCTOR, GENERATED_SUFFIX
from .callgraph import CallGraph, CallSite, reachable, reachable_set
from .interfaces import InterfaceMethod, WebviewInterfaceMap, interface_methods
from .strings import UNRESOLVED, StringConstMap, fold_strings
from .taint.config import SourceSinkConfig
from .taint.engine import Flow, normalize_site, sink_identity
from .taint.pointsto import PointsTo

PREFS = "SharedPreferences"
EDITOR = "SharedPreferences$Editor"
PUT_LABEL = "prefs-put"
GET_LABEL = "prefs-get"
START_ACTIVITY = "start-activity"
UNKNOWN = "UNKNOWN"
INTENT = "Intent"
ACTION_PREFIX = "android.intent.action."
TARGET_SETTERS = ("setPackage", "setClassName", "getLaunchIntentForPackage")


@dataclass(frozen=True)
class PreferenceLeak:
    put: Flow
    get: Flow
    key: Optional[str]  # None when the key did not fold to a constant
    value_type: str
    suspicious: bool
    confidence: str = "high"

    @property
    def key_text(self) -> str:
        return self.key if self.key is not None else UNRESOLVED


@dataclass(frozen=True)
class IntentFinding:
    flow: Flow
    action: str  # a constant, or UNKNOWN
    package: Optional[str]
    constructor_sites: tuple[CallSite, ...]
    action_sites: tuple[CallSite, ...]
    stack_consistent: bool
    target_tainted: bool

    @property
    def short_action(self) -> str:
        a = self.action
        return a[len(ACTION_PREFIX):] if a.startswith(ACTION_PREFIX) else a


def _instr(program: Program, site: CallSite):
    m = program.resolve(site.caller)
    if m is None or not (0 <= site.index < len(m.body)):
        raise ValueError(f"malformed witness: no instruction at {site}")
    return m.body[site.index]


def _maps(program: Program, const_maps, sig: Sig) -> StringConstMap:
    cm = const_maps.get(sig)
    if cm is None:
        cm = const_maps[sig] = fold_strings(program.resolve(sig))
    return cm


def value_type(method_name: str) -> str:
    """``putString``/``getString`` -> ``String``."""
    for prefix in ("put", "get"):
        if method_name.startswith(prefix):
            return method_name[len(prefix):]
    return method_name


def _pref_key(program: Program, const_maps, site: CallSite):
    ins = _instr(program, site)
    if not isinstance(ins, Invoke) or len(ins.args) < 2:
        return None, None
    key = _maps(program, const_maps, site.caller).get(site.index, ins.args[1])
    return key, value_type(ins.target.name)


def is_suspicious(name: str, terms: Iterable[str]) -> bool:
    low = name.lower()
    return any(t.lower() in low for t in terms)


def match_preference_flows(
    flows: Iterable[Flow],
    const_maps: dict,
    program: Program,
    config: SourceSinkConfig,
) -> list[PreferenceLeak]:
    """Pair flows into preferences with flows out of them, by key and value type."""
    flows = list(flows)
    puts: dict = {}
    gets: dict = {}
    for f in flows:
        if f.sink == PUT_LABEL:
            k = (f.source, f.source_site, normalize_site(f.sink_site, f.context))
            puts.setdefault(k, f)
        if f.source == GET_LABEL:
            k = (f.source_site, f.sink, sink_identity(f))
            gets.setdefault(k, f)
    out = []
    for pk in sorted(puts, key=str):
        put = puts[pk]
        pkey, ptype = _pref_key(program, const_maps, put.sink_site)
        for gk in sorted(gets, key=str):
            get = gets[gk]
            gkey, gtype = _pref_key(program, const_maps, get.source_site)
            if ptype != gtype:
                continue
            if pkey is not None and gkey is not None:
                if pkey != gkey:
                    continue
                key, conf = pkey, "high"
            else:
                key, conf = pkey if pkey is not None else gkey, "low"
            susp = key is not None and is_suspicious(key, config.suspicious_keys)
            out.append(PreferenceLeak(put, get, key, ptype, susp, conf))
    return out


def _pref_call(program: Program, ins) -> bool:
    if not isinstance(ins, Invoke):
        return False
    t = ins.target
    return (t.cls == PREFS and t.name.startswith("get")) or (
        t.cls == EDITOR and t.name.startswith("put")
    )


def report_preference_keys(
    program: Program,
    wmap: WebviewInterfaceMap,
    graph: CallGraph,
    config: SourceSinkConfig,
    const_maps: Optional[dict] = None,
) -> list[tuple[str, bool]]:
    """Keys of preference accesses reachable from any interface method."""
    const_maps = {} if const_maps is None else const_maps
    roots = set()
    for w in wmap.webviews():
        for im in interface_methods(program, wmap, w):
            m = program.resolve(im.call_sig)
            if m is not None:
                roots.add(m.sig)
    keys = set()
    for sig in sorted(reachable_set(graph, roots)):
        m = program.resolve(sig)
        if m is None or sig.cls not in program.classes:
            continue
        for i, ins in enumerate(m.body):
            if _pref_call(program, ins) and len(ins.args) >= 2:
                k = _maps(program, const_maps, sig).get(i, ins.args[1])
                keys.add(k if k is not None else UNRESOLVED)
    return [
        (k, k != UNRESOLVED and is_suspicious(k, config.suspicious_keys))
        for k in sorted(keys)
    ]


def flag_suspicious_interface_names(
    methods: Iterable[InterfaceMethod], config: SourceSinkConfig
) -> list[InterfaceMethod]:
    terms = tuple(config.suspicious_keys) + tuple(config.suspicious_methods)
    return sorted(m for m in methods if is_suspicious(m.name, terms))


# -- intents -------------------------------------------------------------------


def _constructor_call(method, alloc_index: int, local: str):
    for j in range(alloc_index + 1, len(method.body)):
        ins = method.body[j]
        if (
            isinstance(ins, Invoke)
            and ins.kind == "special"
            and ins.target.name == CONSTRUCTOR
            and ins.args[:1] == (local,)
        ):
            return j, ins
    return None, None


def _calls_on(program: Program, pts: PointsTo, sites: set, name: str):
    """Calls ``Intent.name`` whose receiver may be one of ``sites``."""
    for m in program.app_methods():
        for i, ins in enumerate(m.body):
            if (
                isinstance(ins, Invoke)
                and ins.target.name == name
                and ins.target.cls == INTENT
                and ins.args
                and pts.of(m.sig, ins.args[0]) & sites
            ):
                yield m, i, ins


def resolve_intent_action(
    flow: Flow,
    program: Program,
    graph: CallGraph,
    pts: PointsTo,
    const_maps: Optional[dict] = None,
) -> IntentFinding:
    """Resolve the action of the Intent a ``start-activity`` flow delivers.

    ``program`` is the program the flow was computed on (with its dummy
    main) and ``pts`` the matching points-to result.
    """
    const_maps = {} if const_maps is None else const_maps
    ins = _instr(program, flow.sink_site)
    if not isinstance(ins, Invoke) or len(ins.args) < 2:
        raise ValueError(f"malformed witness: {flow.sink_site} is not a startActivity call")
    sites = set(pts.of(flow.sink_site.caller, ins.args[1]))
    actions: set = set()
    unknown = False
    ctor_sites, action_sites = [], []
    packages = set()
    for a in sorted(sites):
        m = program.resolve(a.method)
        alloc = m.body[a.index]
        if isinstance(alloc, New) and alloc.type == INTENT:
            j, ctor = _constructor_call(m, a.index, alloc.dst)
            if ctor is not None:
                ctor_sites.append(CallSite(m.sig, j))
                if ctor.target.arity >= 2:
                    v = _maps(program, const_maps, m.sig).get(j, ctor.args[1])
                    if v is None:
                        unknown = True
                    else:
                        actions.add(v)
        elif isinstance(alloc, Invoke) and alloc.target.name == "getLaunchIntentForPackage":
            ctor_sites.append(CallSite(m.sig, a.index))
            v = _maps(program, const_maps, m.sig).get(a.index, alloc.args[1])
            if v is not None:
                packages.add(v)
        else:
            unknown = True
    for m, i, call in _calls_on(program, pts, sites, "setAction"):
        action_sites.append(CallSite(m.sig, i))
        v = _maps(program, const_maps, m.sig).get(i, call.args[1])
        if v is None:
            unknown = True
        else:
            actions.add(v)
    for name in ("setPackage", "setClassName"):
        for m, i, call in _calls_on(program, pts, sites, name):
            v = _maps(program, const_maps, m.sig).get(i, call.args[1])
            packages.add(v)
    action = actions.pop() if len(actions) == 1 and not unknown else UNKNOWN
    package = packages.pop() if len(packages) == 1 else None
    target_tainted = any(
        isinstance(step_ins := _instr(program, CallSite(sig, idx)), Invoke)
        and step_ins.target.name in TARGET_SETTERS
        for sig, idx in flow.witness
        if program.resolve(sig) is not None
    )
    consistent = False
    if flow.attribution is not None:
        m = program.resolve(flow.attribution)
        if m is not None:
            attackers = {e for e in graph.entries if e.cls.endswith(GENERATED_SUFFIX)}
            consistent = reachable(graph, attackers, m.sig)
    return IntentFinding(
        flow, action, package, tuple(ctor_sites), tuple(sorted(action_sites)),
        consistent, target_tainted,
    )
