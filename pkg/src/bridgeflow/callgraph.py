"""Class Hierarchy Analysis call graph."""

from __future__ import annotations

from collections import defaultdict, deque
from dataclasses import dataclass, field
from typing import Iterable

from .air import AirError, Invoke, MethodDef, Program, Sig, subclasses
from .air.model import GENERATED_SUFFIX


@dataclass(frozen=True, order=True)
class CallSite:
    caller: Sig
    index: int

    def __str__(self) -> str:
        return f"{self.caller}@{self.index}"


@dataclass(frozen=True)
class Edge:
    site: CallSite
    caller: Sig
    callee: Sig


@dataclass(frozen=True)
class CallGraph:
    nodes: frozenset[Sig]
    edges: tuple[Edge, ...]
    entries: frozenset[Sig]
    _succ: dict = field(default_factory=dict, compare=False, repr=False)
    _by_site: dict = field(default_factory=dict, compare=False, repr=False)

    def callees(self, caller: Sig) -> set[Sig]:
        return self._succ.get(caller, set())

    def targets(self, site: CallSite) -> tuple[Sig, ...]:
        return self._by_site.get(site, ())

    def pairs(self) -> set[tuple[Sig, Sig]]:
        return {(e.caller, e.callee) for e in self.edges}

    def dump(self) -> str:
        return "".join(f"{e.caller} -> {e.callee} @{e.site.index}\n" for e in self.edges)


def dispatch_targets(program: Program, ins: Invoke) -> list[MethodDef]:
    """Methods a call may reach under CHA, in stable order.

    Raises :class:`AirError` when the named signature resolves nowhere.
    """
    sig = ins.target
    base = program.resolve(sig)
    if base is None:
        raise AirError(f"call to unresolved method {sig}", ins.line, 1, "unresolved-method")
    if ins.kind != "virtual":
        return [base]
    seen: dict[Sig, MethodDef] = {}
    for cls in sorted(subclasses(program, sig.cls)):
        m = program.lookup(cls, sig.name, sig.arity)
        if m is not None and not m.is_static:
            seen.setdefault(m.sig, m)
    return [seen[k] for k in sorted(seen)]


def build_callgraph(program: Program, entries: Iterable[Sig] = ()) -> CallGraph:
    """CHA graph over every app method; stub methods appear only as leaves.

    The entry set is the manifest entries, the given extra ``entries``, and
    the attacker methods of any generated Webview subclasses.
    """
    edges = []
    nodes = set()
    succ: dict[Sig, set[Sig]] = defaultdict(set)
    by_site: dict[CallSite, tuple[Sig, ...]] = {}
    for m in program.app_methods():
        nodes.add(m.sig)
        for i, ins in enumerate(m.body):
            if not isinstance(ins, Invoke):
                continue
            site = CallSite(m.sig, i)
            targets = tuple(t.sig for t in dispatch_targets(program, ins))
            by_site[site] = targets
            for t in targets:
                nodes.add(t)
                succ[m.sig].add(t)
                edges.append(Edge(site, m.sig, t))
    entry_set = set(program.manifest.entry_points) | set(entries)
    for c in program.classes.values():
        if c.name.endswith(GENERATED_SUFFIX) and c.method("attacker", 1):
            entry_set.add(Sig(c.name, "attacker", 1))
    return CallGraph(frozenset(nodes), tuple(edges), frozenset(entry_set), dict(succ), by_site)


def reachable(graph: CallGraph, sources: Iterable[Sig], target: Sig) -> bool:
    """Whether a directed call path leads from any of ``sources`` to ``target``."""
    start = set(sources)
    if target in start:
        return True
    seen = set(start)
    work = deque(start)
    while work:
        for nxt in graph.callees(work.popleft()):
            if nxt == target:
                return True
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return False


def reachable_set(graph: CallGraph, sources: Iterable[Sig]) -> set[Sig]:
    seen = set(sources)
    work = deque(seen)
    while work:
        for nxt in graph.callees(work.popleft()):
            if nxt not in seen:
                seen.add(nxt)
                work.append(nxt)
    return seen
