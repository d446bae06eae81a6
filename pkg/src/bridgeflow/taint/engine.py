"""Flow-, field- and context-sensitive taint analysis.

Facts are access paths rooted either at a local or at an abstract heap
object (an allocation site from the points-to pass). Heap facts travel with
the flow state through calls, so the order in which methods run matters,
but they are only ever weakly updated. Context is a call string of bounded
depth; a FIFO worklist runs across (method, context) nodes and each node is
solved over its instructions in reverse post-order.
"""

from __future__ import annotations

import heapq
import logging
import time
from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..air import (
    Assign,
    Cast,
    ClassDef,
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
)
from ..air.loader import successors
from ..air.model import CONSTRUCTOR, GENERATED_SUFFIX, PRIMITIVES, defined_local
from ..callgraph import CallSite, dispatch_targets
from .config import ATTACKER_LABEL, EXFIL_LABEL, SourceSinkConfig
from .pointsto import AllocSite, PointsTo, descends, points_to

log = logging.getLogger(__name__)

MAIN_CLASS = "$Main"
MAIN_SIG = Sig(MAIN_CLASS, "main", 0)
RET = "$ret"
EXIT = -1
HEAP = "@h:"


class AnalysisTimeout(Exception):
    pass


@dataclass(frozen=True, order=True)
class AccessPath:
    base: str
    fields: tuple[str, ...] = ()
    truncated: bool = False  # any suffix beyond ``fields`` is tainted too

    @property
    def is_heap(self) -> bool:
        return self.base.startswith(HEAP)

    def __str__(self) -> str:
        s = ".".join((self.base,) + self.fields)
        return s + ".*" if self.truncated else s


@dataclass(frozen=True, order=True)
class SourceTag:
    label: str
    site: CallSite


@dataclass(frozen=True, order=True)
class TaintFact:
    path: AccessPath
    source: SourceTag


@dataclass(frozen=True)
class Flow:
    source: str
    source_site: CallSite
    sink: str
    sink_site: CallSite
    attribution: Optional[Sig] = None
    context: tuple[CallSite, ...] = ()
    witness: tuple[tuple[Sig, int], ...] = field(default=(), compare=False)

    @property
    def pair(self) -> tuple[str, str]:
        return (self.source, self.sink)

    @property
    def attacker_involved(self) -> bool:
        return self.source == ATTACKER_LABEL or self.attribution is not None

    def sort_key(self):
        return (self.source, self.sink, str(self.source_site), str(self.sink_site),
                tuple(map(str, self.context)), str(self.attribution))


@dataclass
class TaintResult:
    flows: list[Flow]
    timed_out: bool = False
    stats: dict = field(default_factory=dict)
    pts: Optional[PointsTo] = None
    program: Optional[Program] = None

    def __iter__(self):
        return iter(self.flows)

    def __len__(self) -> int:
        return len(self.flows)

    def pairs(self) -> set[tuple[str, str]]:
        return {f.pair for f in self.flows}


@dataclass(frozen=True)
class TaintOptions:
    max_access_path: int = 3
    call_depth: int = 2
    timeout_secs: Optional[float] = 900.0
    attacker: bool = True


def flows_to_sink(flows: Iterable[Flow], label: str) -> list[Flow]:
    return [f for f in flows if f.sink == label]


def heap_base(site: AllocSite) -> str:
    return HEAP + str(site)


def is_support_class(name: str) -> bool:
    return name.endswith(GENERATED_SUFFIX) or name == MAIN_CLASS


def normalize_site(site: CallSite, context: tuple[CallSite, ...]) -> CallSite:
    """The nearest app call site: sites inside generated code map to their caller."""
    if not is_support_class(site.caller.cls):
        return site
    for s in context:
        if not is_support_class(s.caller.cls):
            return s
    return site


def sink_identity(f: "Flow"):
    """Where a flow ends for reporting purposes.

    A leak to the page is identified by the interface method that returned
    it, whichever Webview load happened to run the attacker.
    """
    if f.sink == EXFIL_LABEL and f.attribution is not None:
        return f.attribution
    return normalize_site(f.sink_site, f.context)


def flow_keys(flows: Iterable[Flow]) -> set[tuple]:
    """Context-free identity of flows, used to compare two programs."""
    return {
        (f.source, f.source_site, f.sink, normalize_site(f.sink_site, f.context))
        for f in flows
    }


# -- dummy main ----------------------------------------------------------------


def _placeholder(local: str, typ: str):
    if typ == "String":
        return ConstString(local, "")
    if typ in PRIMITIVES:
        return ConstInt(local, 0)
    return New(local, typ)


def dummy_main(program: Program, entries: Iterable[Sig]) -> ClassDef:
    """A static ``main`` that creates one receiver per entry class and then
    calls the entry methods in any order, any number of times."""
    entries = list(dict.fromkeys(entries))
    body: list = []
    receivers: dict[str, str] = {}
    methods = []
    for sig in entries:
        m = program.resolve(sig)
        if m is None:
            continue
        methods.append((sig, m))
        if not m.is_static and sig.cls not in receivers:
            r = f"r{len(receivers)}"
            receivers[sig.cls] = r
            body.append(New(r, sig.cls))
            ctor = program.lookup(sig.cls, CONSTRUCTOR, 1)
            if ctor is not None:
                body.append(Invoke(None, "special", ctor.sig, (r,)))
    body += [Label("LOOP"), IfNondet("EXIT")]
    for k, (sig, m) in enumerate(methods):
        last = k == len(methods) - 1
        if k:
            body.append(Label(f"E{k}"))
        if not last:
            body.append(IfNondet(f"E{k + 1}"))
        args = [] if m.is_static else [receivers[sig.cls]]
        for j, (_, t) in enumerate(m.params):
            p = f"p{k}_{j}"
            body.append(_placeholder(p, t))
            args.append(p)
        kind = "static" if m.is_static else "virtual"
        body.append(Invoke(None, kind, sig, tuple(args)))
        body.append(Goto("LOOP"))
    body += [Label("EXIT"), Return(None)]
    main = MethodDef(MAIN_CLASS, "main", (), "void", is_static=True, body=tuple(body))
    return ClassDef(MAIN_CLASS, "Object", methods=(main,))


# -- the solver ----------------------------------------------------------------


def _is_value_type(typ: Optional[str]) -> bool:
    return typ == "String" or typ in PRIMITIVES


def _use_type(program: Program, method: MethodDef, index: int, local: str) -> Optional[str]:
    """Declared parameter type at the first call that consumes ``local``.

    Attacker values are typed by their use: a string or primitive argument
    carries its taint by value, an object argument also taints its contents.
    """
    for ins in method.body[index + 1:]:
        if isinstance(ins, Invoke) and local in ins.args:
            target = program.resolve(ins.target)
            if target is None:
                return None
            j = ins.args.index(local) - (0 if target.is_static else 1)
            return target.param_types[j] if 0 <= j < len(target.param_types) else None
        if defined_local(ins) == local:
            return None
    return None


class _Node:
    __slots__ = ("key", "method", "states", "exit", "rpo", "dirty", "labels", "queued",
                 "reached", "exit_reached")

    def __init__(self, key, method: MethodDef):
        self.key = key
        self.method = method
        self.states: list[dict] = [dict() for _ in method.body]
        self.exit: dict = {}
        self.labels = method.label_index()
        self.rpo = _rpo(method, self.labels)
        self.dirty: list = []
        self.queued = False
        self.reached: set[int] = set()
        self.exit_reached = False


def _rpo(method: MethodDef, labels) -> dict[int, int]:
    body = method.body
    order: list[int] = []
    seen = set()
    if body:
        stack = [(0, iter(successors(body, 0, labels)))]
        seen.add(0)
        while stack:
            i, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                stack.pop()
                order.append(i)
            elif nxt not in seen:
                seen.add(nxt)
                stack.append((nxt, iter(successors(body, nxt, labels))))
    order.reverse()
    rank = {i: r for r, i in enumerate(order)}
    for i in range(len(body)):
        rank.setdefault(i, len(order) + i)
    return rank


class TaintEngine:
    def __init__(self, program: Program, config: SourceSinkConfig, opts: TaintOptions,
                 entries: Optional[Iterable[Sig]] = None):
        self.opts = opts
        self.config = config
        entries = list(program.manifest.entry_points if entries is None else entries)
        classes = dict(program.classes)
        classes[MAIN_CLASS] = dummy_main(program, entries)
        self.program = program.with_classes(classes)
        self.deadline = (
            time.monotonic() + opts.timeout_secs if opts.timeout_secs is not None else None
        )
        self.pts = points_to(self.program, config.has_rule)
        self.nodes: dict = {}
        self.work: deque = deque()
        self.callers: dict = defaultdict(set)  # callee key -> {(caller key, index)}
        self.targets: dict = {}
        self.flows: dict[Flow, Flow] = {}
        self.visits = 0

    # -- bookkeeping --

    def _node(self, sig: Sig, ctx) -> _Node:
        key = (sig, ctx)
        n = self.nodes.get(key)
        if n is None:
            n = self.nodes[key] = _Node(key, self.program.resolve(sig))
        return n

    def _enter(self, node: _Node) -> None:
        if node.method.body and 0 not in node.reached:
            node.reached.add(0)
            self._mark(node, 0)

    def _mark(self, node: _Node, index: int) -> None:
        heapq.heappush(node.dirty, (node.rpo[index], index))
        if not node.queued:
            node.queued = True
            self.work.append(node)

    def _add(self, node: _Node, index: int, fact: TaintFact, pred) -> bool:
        st = node.exit if index == EXIT else node.states[index]
        if fact in st:
            return False
        st[fact] = pred
        return True

    def _check_time(self) -> None:
        if self.deadline is not None and time.monotonic() > self.deadline:
            raise AnalysisTimeout()

    # -- driver --

    def run(self) -> TaintResult:
        start = time.monotonic()
        root = self._node(MAIN_SIG, ())
        timed_out = False
        self._enter(root)
        try:
            while self.work:
                node = self.work.popleft()
                node.queued = False
                self._solve(node)
        except AnalysisTimeout:
            timed_out = True
            log.warning("taint analysis timed out after %.1fs", time.monotonic() - start)
        flows = sorted(self.flows, key=Flow.sort_key)
        stats = {
            "nodes": len(self.nodes),
            "visits": self.visits,
            "facts": sum(len(s) for n in self.nodes.values() for s in n.states),
            "pointsto_iterations": self.pts.iterations,
            "seconds": time.monotonic() - start,
        }
        return TaintResult(flows, timed_out, stats, self.pts, self.program)

    def _solve(self, node: _Node) -> None:
        body = node.method.body
        while node.dirty:
            _, i = heapq.heappop(node.dirty)
            self.visits += 1
            if self.visits % 256 == 0:
                self._check_time()
            facts, flows_on = self._transfer(node, i)
            exit_changed = False
            targets = [EXIT] if isinstance(body[i], Return) else self._succ(node, i)
            for target, fact, pred in facts:
                if self._add(node, target, fact, pred):
                    if target == EXIT:
                        exit_changed = True
                    else:
                        self._mark(node, target)
            if flows_on:
                for t in targets:
                    if t == EXIT:
                        if not node.exit_reached:
                            node.exit_reached = exit_changed = True
                    elif t not in node.reached:
                        node.reached.add(t)
                        self._mark(node, t)
            if exit_changed:
                for caller_key, index in sorted(self.callers[node.key], key=str):
                    self._mark(self.nodes[caller_key], index)

    # -- helpers over a state --

    def _pts(self, node: _Node, local: str) -> frozenset:
        return self.pts.of(node.method.sig, local)

    def _value_facts(self, node: _Node, state: dict, local: str) -> list[TaintFact]:
        """Facts making the value held in ``local`` tainted."""
        bases = {heap_base(a) for a in self._pts(node, local)}
        out = []
        for f in state:
            p = f.path
            if p.base == local and not p.fields:
                out.append(f)
            elif p.base in bases and not p.fields and p.truncated:
                out.append(f)
        return out

    def _succ(self, node: _Node, i: int) -> list[int]:
        s = successors(node.method.body, i, node.labels)
        if not s and not isinstance(node.method.body[i], Goto):
            return [EXIT]
        return s

    def _store_path(self, site: AllocSite, fld: str) -> AccessPath:
        k = self.opts.max_access_path
        if k <= 0:
            return AccessPath(heap_base(site), (), True)
        return AccessPath(heap_base(site), (fld,)[:k], False)

    # -- transfer functions --

    def _transfer(self, node: _Node, i: int):
        ins = node.method.body[i]
        state = node.states[i]
        here = (node.key, i)
        succ = self._succ(node, i)
        out: list[tuple[TaintFact, tuple]] = []
        flows_on = True

        def keep(pred_filter=lambda f: True):
            for f in state:
                if pred_filter(f):
                    out.append((f, (here, f, None)))

        def killing(local):
            return lambda f: f.path.base != local

        if isinstance(ins, (ConstString, ConstInt, New)):
            keep(killing(ins.dst))
        elif isinstance(ins, (Assign, Cast)):
            keep(killing(ins.dst))
            for f in self._value_facts(node, state, ins.src):
                if f.path.base == ins.src:
                    out.append((TaintFact(AccessPath(ins.dst), f.source), (here, f, None)))
        elif isinstance(ins, InstanceGet):
            keep(killing(ins.dst))
            bases = {heap_base(a) for a in self._pts(node, ins.obj)}
            for f in state:
                p = f.path
                if p.base not in bases:
                    continue
                hit = (p.fields[:1] == (ins.field,) and (len(p.fields) == 1 or p.truncated)) or (
                    not p.fields and p.truncated
                )
                if hit:
                    out.append((TaintFact(AccessPath(ins.dst), f.source), (here, f, None)))
        elif isinstance(ins, InstancePut):
            keep()
            vals = self._value_facts(node, state, ins.src)
            for a in sorted(self._pts(node, ins.obj)):
                path = self._store_path(a, ins.field)
                for f in vals:
                    out.append((TaintFact(path, f.source), (here, f, None)))
        elif isinstance(ins, Return):
            for f in state:
                if f.path.is_heap:
                    out.append((f, (here, f, None)))
            if ins.src is not None:
                for f in self._value_facts(node, state, ins.src):
                    out.append((TaintFact(AccessPath(RET), f.source), (here, f, None)))
            return [(EXIT, f, p) for f, p in out], True
        elif isinstance(ins, Invoke):
            out, flows_on = self._invoke(node, i, ins, state, here)
        else:  # Goto, IfNondet, Label
            keep()
        res = []
        for t in succ:
            if t == EXIT:
                for f, p in out:
                    if f.path.is_heap:
                        res.append((EXIT, f, p))
            else:
                res.extend((t, f, p) for f, p in out)
        return res, flows_on

    def _targets(self, node: _Node, i: int, ins: Invoke) -> list[MethodDef]:
        key = (node.method.sig, i)
        t = self.targets.get(key)
        if t is None:
            t = self.targets[key] = dispatch_targets(self.program, ins)
        return t

    def _invoke(self, node: _Node, i: int, ins: Invoke, state: dict, here) -> list:
        out: list = []
        returns = False
        site = CallSite(node.method.sig, i)
        for t in self._targets(node, i, ins):
            if (
                not self.opts.attacker
                and t.name == "attacker"
                and t.owner.endswith(GENERATED_SUFFIX)
            ):
                out += [(f, (here, f, None)) for f in state]
                returns = True
            elif descends(self.program, t, self.config.has_rule):
                facts, callee_returns = self._descend(node, i, ins, t, state, here, site)
                out += facts
                returns |= callee_returns
            else:
                out += self._summary(node, i, ins, t, state, here, site)
                returns = True
        return out, returns

    def _arg(self, ins: Invoke, t: MethodDef, pos: str) -> Optional[str]:
        if pos == "receiver":
            return None if t.is_static else ins.args[0]
        if pos.startswith("arg"):
            j = int(pos[3:]) + (0 if t.is_static else 1)
            return ins.args[j] if j < len(ins.args) else None
        return None

    def _summary(self, node, i, ins, t: MethodDef, state, here, site) -> list:
        sources, sinks, rule = self.config.rules_for(t.sig)
        ctx = node.key[1]
        for sk in sinks:
            for pos in sk.observes:
                a = self._arg(ins, t, pos)
                if a is None:
                    continue
                for f in sorted(self._value_facts(node, state, a)):
                    self._report(node, i, f, sk.label, site, ctx)
        recv = None if t.is_static or not ins.args else ins.args[0]
        recv_bases = {heap_base(a) for a in self._pts(node, recv)} if recv else set()
        if rule == "clear":
            # heap facts die only when the receiver is one abstract object
            strong = recv_bases if len(recv_bases) == 1 else set()
            drop = lambda f: f.path.base == recv or f.path.base in strong  # noqa: E731
        else:
            drop = lambda f: False  # noqa: E731
        out = [
            (f, (here, f, None))
            for f in state
            if f.path.base != ins.dst and not drop(f)
        ]
        if rule == "ignore" or rule == "clear":
            pass
        elif rule == "propagate" or not sources:
            arg_facts = []
            for a in ins.args[(0 if t.is_static else 1):]:
                arg_facts += self._value_facts(node, state, a)
            recv_facts = self._value_facts(node, state, recv) if recv else []
            if recv:
                for a in sorted(self._pts(node, recv)):
                    path = AccessPath(heap_base(a), (), True)
                    out += [(TaintFact(path, f.source), (here, f, None)) for f in arg_facts]
            if ins.dst:
                for f in arg_facts + recv_facts:
                    out.append((TaintFact(AccessPath(ins.dst), f.source), (here, f, None)))
        for src in sources:
            tag = SourceTag(src.label, site)
            gen = (here, None, None)
            if src.taints == "return":
                if ins.dst:
                    out.append((TaintFact(AccessPath(ins.dst), tag), gen))
                    if src.label == ATTACKER_LABEL and not _is_value_type(
                        _use_type(self.program, node.method, i, ins.dst)
                    ):
                        for a in sorted(self._pts(node, ins.dst)):
                            out.append((TaintFact(AccessPath(heap_base(a), (), True), tag), gen))
            else:
                holder = self._arg(ins, t, src.taints)
                if holder is not None:
                    for a in sorted(self._pts(node, holder)):
                        out.append((TaintFact(AccessPath(heap_base(a), (), True), tag), gen))
        return out

    def _callee_ctx(self, node: _Node, site: CallSite) -> tuple:
        c = self.opts.call_depth
        if c <= 0:
            return ()
        return ((site,) + node.key[1])[:c]

    def _descend(self, node, i, ins, t: MethodDef, state, here, site) -> list:
        callee = self._node(t.sig, self._callee_ctx(node, site))
        self.callers[callee.key].add((node.key, i))
        changed = False
        formals = t.formal_locals()
        for f in state:
            if f.path.is_heap:
                changed |= self._add(callee, 0, f, (here, f, None))
        for formal, actual in zip(formals, ins.args):
            for f in self._value_facts(node, state, actual):
                if f.path.base == actual:
                    nf = TaintFact(AccessPath(formal), f.source)
                    changed |= self._add(callee, 0, nf, (here, f, None))
        if changed:
            self._mark(callee, 0)
        self._enter(callee)
        out = [(f, (here, f, None)) for f in state if not f.path.is_heap and f.path.base != ins.dst]
        for f in callee.exit:
            pred = ((callee.key, EXIT), f, here)
            if f.path.base == RET:
                if ins.dst:
                    out.append((TaintFact(AccessPath(ins.dst), f.source), pred))
            else:
                out.append((f, pred))
        return out, callee.exit_reached

    def _report(self, node, i, fact: TaintFact, label: str, site: CallSite, ctx) -> None:
        witness, attribution = self.witness(node, i, fact)
        flow = Flow(fact.source.label, fact.source.site, label, site, attribution, ctx,
                    witness)
        if flow not in self.flows:
            self.flows[flow] = flow

    # -- witnesses --

    def witness(self, node: _Node, i: int, fact: TaintFact):
        """Steps from the source to ``(node, i)`` and the interface attribution."""
        steps: list[tuple[Sig, int]] = [(node.method.sig, i)]
        attribution = None
        point = (node.key, i)
        cur = fact
        seen = set()
        while cur is not None and (point, cur) not in seen:
            seen.add((point, cur))
            key, idx = point
            st = self.nodes[key].exit if idx == EXIT else self.nodes[key].states[idx]
            pred = st.get(cur)
            if pred is None:
                break
            prev_point, prev_fact, via = pred
            for p in (via, prev_point):
                if p is None or p[1] == EXIT:
                    continue
                step = (p[0][0], p[1])
                if steps[-1] != step:
                    steps.append(step)
                if attribution is None:
                    attribution = self._interface_call(step)
            point, cur = prev_point, prev_fact
        steps.reverse()
        return tuple(steps), attribution

    def _interface_call(self, step) -> Optional[Sig]:
        sig, idx = step
        if sig.name != "attacker" or not sig.cls.endswith(GENERATED_SUFFIX):
            return None
        m = self.program.resolve(sig)
        ins = m.body[idx]
        if isinstance(ins, Invoke) and ins.target.name not in ("taintSource", "leak"):
            return ins.target
        return None


def run_taint(
    program: Program,
    config: SourceSinkConfig,
    opts: Optional[TaintOptions] = None,
    entries: Optional[Iterable[Sig]] = None,
    **kw,
) -> TaintResult:
    """Run the analysis. ``kw`` may override fields of :class:`TaintOptions`."""
    opts = opts or TaintOptions()
    if kw:
        opts = TaintOptions(**{**opts.__dict__, **kw})
    return TaintEngine(program, config, opts, entries).run()
