"""Concrete interpreter used as ground truth for the static analyses.

Values carry sets of taint labels. Framework stubs follow the same
source/sink/wrapper configuration as the taint engine, plus concrete models
for the handful of classes whose payload matters (string builders, intents,
preferences). Every ``ifnd`` is explored both ways by replaying the run with
a different decision prefix; paths that revisit one branch point too often
are pruned, and a global step budget bounds the whole exploration.

The attacker is modeled directly: whenever the app loads content into a
Webview, the given sequence of interface methods is invoked on the objects
registered with that Webview instance, with tainted arguments, and any
tainted result counts as a leak to the page.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from .air import (
    Assign,
    Cast,
    ConstInt,
    ConstString,
    Goto,
    IfNondet,
    InstanceGet,
    InstancePut,
    Invoke,
    Label,
    MethodDef,
    New,
    Program,
    Return,
    Sig,
    is_subtype,
)
from .air.model import CONSTRUCTOR, GENERATED_SUFFIX, PRIMITIVES
from .babelview import LOAD_METHODS
from .callgraph import CallSite
from .interfaces import REGISTER, WEBVIEW, InterfaceMethod, class_interface_methods
from .taint.config import ATTACKER_LABEL, EXFIL_LABEL, SourceSinkConfig, default_config
from .taint.pointsto import descends

PREFS_GET = "prefs-get"
NO_TAGS: frozenset = frozenset()


@dataclass(frozen=True)
class Str:
    value: str
    tags: frozenset = NO_TAGS


@dataclass(frozen=True)
class Num:
    value: int
    tags: frozenset = NO_TAGS


class Obj:
    __slots__ = ("cls", "fields", "tags", "model", "opaque", "deep")

    def __init__(self, cls: str, tags=(), opaque=False, deep=False):
        self.cls = cls
        self.fields: dict = {}
        self.tags = set(tags)
        self.model: dict = {}
        self.opaque = opaque  # created by framework code; casts retype it
        self.deep = deep  # every field reads as tainted

    def __repr__(self) -> str:
        return f"<{self.cls} {sorted(self.tags)}>"


Value = Union[Str, Num, Obj, None]


def tags_of(v: Value) -> frozenset:
    if v is None:
        return NO_TAGS
    if isinstance(v, Obj):
        return frozenset(v.tags)
    return v.tags


def text_of(v: Value) -> str:
    if isinstance(v, Str):
        return v.value
    if isinstance(v, Num):
        return str(v.value)
    if isinstance(v, Obj):
        return v.model.get("text", f"<{v.cls}>")
    return "null"


@dataclass(frozen=True, order=True)
class IntentEvent:
    site: CallSite
    action: Optional[str]
    package: Optional[str]
    tags: tuple[str, ...]


@dataclass
class OracleTrace:
    sequence: tuple[Sig, ...]
    leaks: set = field(default_factory=set)  # (source label, sink label)
    leak_sites: set = field(default_factory=set)  # (source, sink, sink CallSite)
    registrations: set = field(default_factory=set)  # (webview class, interface class)
    call_edges: set = field(default_factory=set)  # (caller, callee)
    intents: set = field(default_factory=set)
    pref_writes: set = field(default_factory=set)  # (key, type, source labels)
    strings: dict = field(default_factory=dict)  # (method, index) -> set of strings
    paths: int = 0
    pruned: int = 0
    steps: int = 0
    partial: bool = False

    def merge(self, other: "OracleTrace") -> None:
        self.leaks |= other.leaks
        self.leak_sites |= other.leak_sites
        self.registrations |= other.registrations
        self.call_edges |= other.call_edges
        self.intents |= other.intents
        self.pref_writes |= other.pref_writes
        for k, v in other.strings.items():
            self.strings.setdefault(k, set()).update(v)
        self.paths += other.paths
        self.pruned += other.pruned
        self.steps += other.steps
        self.partial |= other.partial

    def as_dict(self) -> dict:
        return {
            "sequence": [str(s) for s in self.sequence],
            "leaks": sorted(list(p) for p in self.leaks),
            "registrations": sorted(list(p) for p in self.registrations),
            "call_edges": sorted([str(a), str(b)] for a, b in self.call_edges),
            "intents": [
                {"site": str(e.site), "action": e.action, "package": e.package,
                 "tags": list(e.tags)}
                for e in sorted(self.intents)
            ],
            "paths": self.paths,
            "pruned": self.pruned,
            "steps": self.steps,
            "partial": self.partial,
        }


class _Prune(Exception):
    """The current path is infeasible or exceeded its loop bound."""


class _Budget(Exception):
    """The global step budget ran out."""


def _seq_sig(m) -> Sig:
    return m.call_sig if isinstance(m, InterfaceMethod) else m


def _pref_type(name: str) -> str:
    for prefix in ("get", "put"):
        if name.startswith(prefix):
            return name[len(prefix):]
    return name


class _Run:
    """One deterministic execution under a fixed decision prefix."""

    def __init__(self, interp: "Interpreter", prefix: list[int]):
        self.it = interp
        self.prefix = prefix
        self.trail: list[int] = []
        self.new_branches: list[list[int]] = []
        self.visits: dict = {}
        self.prefs: dict = {}
        self.attacking = False
        self.depth = 0

    # -- nondeterminism --

    def choose(self, key) -> int:
        n = self.visits.get(key, 0) + 1
        if n > self.it.loop_bound:
            raise _Prune()
        self.visits[key] = n
        d = len(self.trail)
        if d < len(self.prefix):
            c = self.prefix[d]
        else:
            c = 0
            self.new_branches.append(self.trail + [1])
        self.trail.append(c)
        return c

    def step(self) -> None:
        self.it.trace.steps += 1
        if self.it.trace.steps > self.it.max_steps:
            raise _Budget()

    # -- top level --

    def main(self) -> None:
        prog = self.it.program
        receivers: dict[str, Obj] = {}
        calls = []
        for sig in prog.manifest.entry_points:
            m = prog.resolve(sig)
            if m is None:
                continue
            if not m.is_static and sig.cls not in receivers:
                r = receivers[sig.cls] = Obj(sig.cls)
                ctor = prog.lookup(sig.cls, CONSTRUCTOR, 1)
                if ctor is not None:
                    self.call(ctor, [r], None)
            calls.append((sig, m))
        for sig, m in calls:
            args = [] if m.is_static else [receivers[sig.cls]]
            args += [self.placeholder(t) for t in m.param_types]
            target = m if m.is_static else self.dispatch(args[0], sig)
            self.call(target, args, None)

    def placeholder(self, typ: str, tags=NO_TAGS, deep=False) -> Value:
        if typ == "String":
            return Str("", frozenset(tags))
        if typ in PRIMITIVES:
            return Num(0, frozenset(tags))
        return Obj(typ if self.it.program.has_class(typ) else "Object", tags, True, deep)

    def dispatch(self, recv: Value, sig: Sig) -> MethodDef:
        prog = self.it.program
        if isinstance(recv, Obj):
            m = prog.lookup(recv.cls, sig.name, sig.arity)
            if m is not None:
                return m
        m = prog.resolve(sig)
        if m is None:
            raise _Prune()
        return m

    # -- calls --

    def call(self, m: MethodDef, args: list, site: Optional[CallSite]) -> Value:
        prog = self.it.program
        if site is not None and not site.caller.cls.endswith(GENERATED_SUFFIX):
            self.it.trace.call_edges.add((site.caller, m.sig))
        if m.name == "attacker" and m.owner.endswith(GENERATED_SUFFIX):
            return None  # the sequence is injected at the load call instead
        if descends(prog, m, self.it.config.has_rule):
            return self.interpret(m, args)
        return self.external(m, args, site)

    def interpret(self, m: MethodDef, args: list) -> Value:
        self.depth += 1
        if self.depth > 200:
            raise _Prune()
        try:
            return self._body(m, dict(zip(m.formal_locals(), args)))
        finally:
            self.depth -= 1

    def _body(self, m: MethodDef, env: dict) -> Value:
        prog = self.it.program
        body = m.body
        labels = m.label_index()
        pc = 0
        while pc < len(body):
            self.step()
            ins = body[pc]
            pc += 1
            if isinstance(ins, ConstString):
                env[ins.dst] = Str(ins.value)
                self.it.trace.strings.setdefault((m.sig, pc - 1), set()).add(ins.value)
            elif isinstance(ins, ConstInt):
                env[ins.dst] = Num(ins.value)
            elif isinstance(ins, Assign):
                env[ins.dst] = env.get(ins.src)
            elif isinstance(ins, New):
                env[ins.dst] = Obj(ins.type)
            elif isinstance(ins, Cast):
                v = env.get(ins.src)
                if isinstance(v, Obj) and prog.has_class(ins.type):
                    if not is_subtype(prog, v.cls, ins.type):
                        if not v.opaque:
                            raise _Prune()
                        v.cls = ins.type
                env[ins.dst] = v
            elif isinstance(ins, InstanceGet):
                o = env.get(ins.obj)
                if not isinstance(o, Obj):
                    raise _Prune()
                if ins.field in o.fields:
                    env[ins.dst] = o.fields[ins.field]
                elif o.deep:
                    t = prog.field_type(o.cls, ins.field) or "Object"
                    v = o.fields[ins.field] = self.placeholder(t, o.tags, deep=True)
                    env[ins.dst] = v
                else:
                    env[ins.dst] = None
            elif isinstance(ins, InstancePut):
                o = env.get(ins.obj)
                if not isinstance(o, Obj):
                    raise _Prune()
                o.fields[ins.field] = env.get(ins.src)
            elif isinstance(ins, Invoke):
                args = [env.get(a) for a in ins.args]
                site = CallSite(m.sig, pc - 1)
                if ins.kind == "virtual":
                    if not isinstance(args[0], Obj):
                        raise _Prune()
                    target = self.dispatch(args[0], ins.target)
                else:
                    target = prog.resolve(ins.target)
                res = self.call(target, args, site)
                if ins.dst:
                    env[ins.dst] = res
            elif isinstance(ins, Return):
                return env.get(ins.src) if ins.src else None
            elif isinstance(ins, Goto):
                pc = labels[ins.label]
            elif isinstance(ins, IfNondet):
                if self.choose((m.sig, pc - 1)):
                    pc = labels[ins.label]
            elif isinstance(ins, Label):
                pass
        return None

    # -- framework --

    def _pick(self, m: MethodDef, args: list, pos: str) -> Value:
        if pos == "receiver":
            return None if m.is_static else args[0]
        j = int(pos[3:]) + (0 if m.is_static else 1)
        return args[j] if j < len(args) else None

    def leak(self, labels, sink: str, site) -> None:
        for label in sorted(labels):
            self.it.trace.leaks.add((label, sink))
            self.it.trace.leak_sites.add((label, sink, site))

    def external(self, m: MethodDef, args: list, site) -> Value:
        sources, sinks, rule = self.it.config.rules_for(m.sig)
        recv = None if m.is_static else args[0]
        params = args if m.is_static else args[1:]
        for sk in sinks:
            for pos in sk.observes:
                self.leak(tags_of(self._pick(m, args, pos)), sk.label, site)

        ptags = frozenset().union(*(tags_of(a) for a in params)) if params else NO_TAGS
        rtags = NO_TAGS
        if rule == "clear":
            if isinstance(recv, Obj):
                recv.tags.clear()
                for k, v in list(recv.fields.items()):
                    recv.fields[k] = _untainted(v)
        elif rule == "propagate" or (rule is None and not sources):
            if isinstance(recv, Obj):
                recv.tags |= ptags
            rtags = ptags | tags_of(recv)
        for src in sources:
            if src.taints == "return":
                rtags = rtags | {src.label}
            else:
                holder = self._pick(m, args, src.taints)
                if isinstance(holder, Obj):
                    holder.tags.add(src.label)

        fluent = not m.is_static and isinstance(recv, Obj) and m.return_type == m.owner
        if m.return_type == "void":
            result: Value = None
        elif fluent:
            result = recv
        else:
            deep = any(s.label == ATTACKER_LABEL for s in sources)
            result = self.placeholder(m.return_type, rtags, deep=deep)
        result = self.model(m, args, recv, result, site)
        return result

    def model(self, m: MethodDef, args: list, recv, result, site) -> Value:
        prog = self.it.program
        owner, name = m.owner, m.name
        if owner == WEBVIEW or (prog.has_class(owner) and is_subtype(prog, owner, WEBVIEW)):
            if (name, m.arity) == REGISTER:
                self.register(recv, args[1])
            elif name in LOAD_METHODS:
                self.attack(recv)
            return result
        if owner == "StringBuilder" and isinstance(recv, Obj):
            buf = recv.model.get("text", "")
            if name == CONSTRUCTOR:
                recv.model["text"] = text_of(args[1]) if len(args) > 1 else ""
            elif name == "append":
                recv.model["text"] = buf + text_of(args[1])
            elif name == "setLength":
                n = args[1].value if isinstance(args[1], Num) else 0
                recv.model["text"] = buf[:n]
            elif name == "toString":
                return Str(buf, tags_of(result))
            return result
        if owner == "String" and name == "concat":
            return Str(text_of(args[0]) + text_of(args[1]), tags_of(result))
        if owner == "Uri" and name == "parse" and isinstance(result, Obj):
            result.model["text"] = text_of(args[0])
            return result
        if owner == "Intent" and isinstance(recv, Obj):
            if name == CONSTRUCTOR and len(args) > 1:
                recv.model["action"] = text_of(args[1])
            elif name == "setAction":
                recv.model["action"] = text_of(args[1])
            elif name in ("setPackage", "setClassName"):
                recv.model["package"] = text_of(args[1])
            return result
        if owner == "PackageManager" and name == "getLaunchIntentForPackage":
            if isinstance(result, Obj):
                result.cls = "Intent"
                result.model["package"] = text_of(args[1])
                result.model["action"] = "android.intent.action.MAIN"
            return result
        if owner == "Context" and name == "startActivity":
            intent = args[1]
            if isinstance(intent, Obj):
                self.it.trace.intents.add(IntentEvent(
                    site, intent.model.get("action"), intent.model.get("package"),
                    tuple(sorted(intent.tags)),
                ))
            return result
        if owner == "SharedPreferences$Editor" and name.startswith("put"):
            key = text_of(args[1])
            self.prefs[(_pref_type(name), key)] = args[2]
            self.it.trace.pref_writes.add((key, _pref_type(name), tags_of(args[2])))
            return result
        if owner == "SharedPreferences" and name.startswith("get"):
            stored = self.prefs.get((_pref_type(name), text_of(args[1])))
            if stored is None:
                return result
            extra = tags_of(result) | tags_of(stored)
            if isinstance(stored, Str):
                return Str(stored.value, extra)
            if isinstance(stored, Num):
                return Num(stored.value, extra)
            return result
        return result

    # -- the attacker --

    def register(self, webview, obj) -> None:
        if not isinstance(webview, Obj) or not isinstance(obj, Obj):
            return
        if not self.it.exposed(obj.cls):
            return
        webview.model.setdefault("ifaces", []).append(obj)
        wcls = webview.cls
        if wcls.endswith(GENERATED_SUFFIX):
            wcls = wcls[: -len(GENERATED_SUFFIX)]
        self.it.trace.registrations.add((wcls, obj.cls))

    def attack(self, webview) -> None:
        if self.attacking or not isinstance(webview, Obj):
            return
        ifaces = webview.model.get("ifaces", [])
        self.attacking = True
        try:
            for sig in self.it.sequence:
                obj = next((o for o in ifaces if o.cls == sig.cls), None)
                if obj is None:
                    continue
                m = self.it.program.lookup(obj.cls, sig.name, sig.arity)
                if m is None or (sig.name, sig.arity) not in self.it.exposed(obj.cls):
                    continue
                args = [obj] + [
                    self.placeholder(t, {ATTACKER_LABEL}, deep=True) for t in m.param_types
                ]
                res = self.call(m, args, None)
                if m.return_type != "void":
                    self.leak(tags_of(res), EXFIL_LABEL, None)
        finally:
            self.attacking = False


def _untainted(v: Value) -> Value:
    if isinstance(v, Str):
        return Str(v.value)
    if isinstance(v, Num):
        return Num(v.value)
    if isinstance(v, Obj):
        v.tags.clear()
    return v


class Interpreter:
    def __init__(self, program: Program, config: Optional[SourceSinkConfig] = None,
                 sequence: Sequence = (), max_steps: int = 100_000, loop_bound: int = 3):
        self.program = program
        self.config = config or default_config()
        self.sequence = tuple(_seq_sig(s) for s in sequence)
        self.max_steps = max_steps
        self.loop_bound = loop_bound
        self.trace = OracleTrace(self.sequence)
        self._exposed: dict = {}

    def exposed(self, cls: str) -> set:
        e = self._exposed.get(cls)
        if e is None:
            e = self._exposed[cls] = {
                im.signature.key for im in class_interface_methods(self.program, cls)
            }
        return e

    def run(self) -> OracleTrace:
        pending: list[list[int]] = [[]]
        try:
            while pending:
                run = _Run(self, pending.pop())
                try:
                    run.main()
                except _Prune:
                    self.trace.pruned += 1
                self.trace.paths += 1
                pending.extend(reversed(run.new_branches))
        except _Budget:
            self.trace.partial = True
        return self.trace


def interpret(program: Program, sequence: Sequence = (), max_steps: int = 100_000,
              config: Optional[SourceSinkConfig] = None, loop_bound: int = 3) -> OracleTrace:
    """Run the app's entry points once, in manifest order, on every ``ifnd`` path."""
    return Interpreter(program, config, sequence, max_steps, loop_bound).run()


def enumerate_sequences(methods: Iterable, max_length: int) -> list[list]:
    methods = list(methods)
    out: list[list] = []
    for n in range(max_length + 1):
        out.extend(list(p) for p in itertools.product(methods, repeat=n))
    return out


def explore(program: Program, methods: Iterable, max_length: int = 3,
            max_steps: int = 100_000, config: Optional[SourceSinkConfig] = None) -> OracleTrace:
    """Union of oracle traces over every attacker sequence up to ``max_length``."""
    total = OracleTrace(())
    for seq in enumerate_sequences(methods, max_length):
        total.merge(interpret(program, seq, max_steps, config))
    return total
