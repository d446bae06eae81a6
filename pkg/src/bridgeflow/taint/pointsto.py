"""Context-insensitive inclusion-based points-to over allocation sites.

Allocation sites are ``new`` instructions plus the results of calls that do
not descend into app code (stubs and configured methods), which get one
synthetic site per call instruction.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from ..air import (
    Assign,
    Cast,
    InstanceGet,
    InstancePut,
    Invoke,
    MethodDef,
    New,
    Program,
    Return,
    Sig,
)
from ..air.model import PRIMITIVES
from ..callgraph import dispatch_targets


@dataclass(frozen=True, order=True)
class AllocSite:
    method: Sig
    index: int
    type: str

    def __str__(self) -> str:
        return f"{self.method}@{self.index}"


@dataclass
class PointsTo:
    locals: dict = field(default_factory=lambda: defaultdict(set))  # (sig, local) -> sites
    fields: dict = field(default_factory=lambda: defaultdict(set))  # (site, field) -> sites
    returns: dict = field(default_factory=lambda: defaultdict(set))  # sig -> sites
    iterations: int = 0

    def of(self, method: Sig, local: str) -> frozenset:
        return frozenset(self.locals.get((method, local), ()))

    def sites(self) -> set[AllocSite]:
        out = set()
        for s in self.locals.values():
            out |= s
        return out


def is_reference(typ: str) -> bool:
    return typ not in PRIMITIVES


def is_fluent(m: MethodDef) -> bool:
    """Framework methods typed to return their own class hand back the receiver."""
    return not m.is_static and m.return_type == m.owner


def descends(program: Program, target: MethodDef, has_rule) -> bool:
    """Whether the analyses step into ``target`` rather than summarizing it."""
    if target.owner in program.stub_classes or not target.body:
        return False
    return not has_rule(target.sig)


def points_to(program: Program, has_rule=lambda sig: False) -> PointsTo:
    pts = PointsTo()
    methods = list(program.app_methods())
    targets: dict[tuple[Sig, int], list[MethodDef]] = {}
    for m in methods:
        for i, ins in enumerate(m.body):
            if isinstance(ins, Invoke):
                targets[(m.sig, i)] = dispatch_targets(program, ins)
    changed = True
    while changed:
        changed = False
        pts.iterations += 1
        for m in methods:
            changed |= _step(program, m, pts, targets, has_rule)
    return pts


def _add(dst: set, src) -> bool:
    before = len(dst)
    dst.update(src)
    return len(dst) != before


def _step(program: Program, m: MethodDef, pts: PointsTo, targets, has_rule) -> bool:
    sig = m.sig
    L = pts.locals
    changed = False
    for i, ins in enumerate(m.body):
        if isinstance(ins, New):
            changed |= _add(L[(sig, ins.dst)], {AllocSite(sig, i, ins.type)})
        elif isinstance(ins, (Assign, Cast)):
            changed |= _add(L[(sig, ins.dst)], L.get((sig, ins.src), ()))
        elif isinstance(ins, InstanceGet):
            for a in list(L.get((sig, ins.obj), ())):
                changed |= _add(L[(sig, ins.dst)], pts.fields.get((a, ins.field), ()))
        elif isinstance(ins, InstancePut):
            src = L.get((sig, ins.src), ())
            for a in list(L.get((sig, ins.obj), ())):
                changed |= _add(pts.fields[(a, ins.field)], src)
        elif isinstance(ins, Return) and ins.src is not None:
            changed |= _add(pts.returns[sig], L.get((sig, ins.src), ()))
        elif isinstance(ins, Invoke):
            for t in targets[(sig, i)]:
                if descends(program, t, has_rule):
                    for formal, actual in zip(t.formal_locals(), ins.args):
                        changed |= _add(L[(t.sig, formal)], L.get((sig, actual), ()))
                    if ins.dst:
                        changed |= _add(L[(sig, ins.dst)], pts.returns.get(t.sig, ()))
                elif ins.dst and is_reference(t.return_type):
                    changed |= _add(L[(sig, ins.dst)], {AllocSite(sig, i, t.return_type)})
                    if is_fluent(t):
                        changed |= _add(L[(sig, ins.dst)], L.get((sig, ins.args[0]), ()))
    return changed
