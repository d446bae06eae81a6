"""Building validated programs from AIR text."""

from __future__ import annotations

from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional

from .model import (
    PRIMITIVES,
    AirError,
    Cast,
    ClassDef,
    Goto,
    IfNondet,
    Invoke,
    Label,
    Manifest,
    MethodDef,
    New,
    Program,
    Return,
    defined_local,
    used_locals,
)
from .parser import parse_text

DEFAULT_STUBS = "stubs.air"


@lru_cache(maxsize=None)
def _default_stub_text() -> str:
    return resources.files("bridgeflow.data").joinpath(DEFAULT_STUBS).read_text()


def parse_stubs(text: str) -> dict[str, ClassDef]:
    _, classes = parse_text(text, external=True)
    out: dict[str, ClassDef] = {}
    for c in classes:
        if c.name in out:
            raise AirError(f"duplicate class {c.name!r}", c.line, 1, "duplicate-class")
        out[c.name] = c
    return out


@lru_cache(maxsize=None)
def default_stubs() -> dict[str, ClassDef]:
    return parse_stubs(_default_stub_text())


def parse_program(
    text: str,
    stubs: Optional[dict[str, ClassDef]] = None,
    extra_stubs: Iterable[str] = (),
) -> Program:
    """Parse and validate an AIR document, merging the platform stubs.

    ``extra_stubs`` are additional stub documents layered over the defaults;
    a class there replaces the default stub of the same name.
    """
    stub_map = dict(default_stubs() if stubs is None else stubs)
    for extra in extra_stubs:
        stub_map.update(parse_stubs(extra))
    manifest, classes = parse_text(text)
    app: dict[str, ClassDef] = {}
    for c in classes:
        if c.name in app or c.name in stub_map:
            raise AirError(f"duplicate class {c.name!r}", c.line, 1, "duplicate-class")
        app[c.name] = c
    program = Program(app, manifest or Manifest(), stub_map)
    validate(program)
    return program


def _type_ok(program: Program, t: str) -> bool:
    while t.endswith("[]"):
        t = t[:-2]
    return t in PRIMITIVES or program.has_class(t)


def validate(program: Program) -> None:
    """Raise :class:`AirError` on the first structural problem found."""
    for c in program.all_classes():
        if c.superclass is not None and not program.has_class(c.superclass):
            raise AirError(
                f"class {c.name!r} extends unknown type {c.superclass!r}",
                c.line, 1, "unresolved-type",
            )
    for c in program.all_classes():
        seen = {c.name}
        cur = c.superclass
        while cur is not None:
            if cur in seen:
                raise AirError(f"inheritance cycle through {c.name!r}", c.line, 1, "inheritance-cycle")
            seen.add(cur)
            cur = program.class_def(cur).superclass
    for c in program.all_classes():
        _validate_class(program, c)
    _validate_manifest(program)


def _validate_class(program: Program, c: ClassDef) -> None:
    names = set()
    for f in c.fields:
        if not _type_ok(program, f.type):
            raise AirError(f"field {c.name}.{f.name} has unknown type {f.type!r}", f.line, 1, "unresolved-type")
    for m in c.methods:
        if m.sig.key in names:
            raise AirError(f"duplicate method {m.sig}", m.line, 1, "duplicate-method")
        names.add(m.sig.key)
        for t in (*m.param_types, m.return_type):
            if not _type_ok(program, t):
                raise AirError(f"{m.sig} mentions unknown type {t!r}", m.line, 1, "unresolved-type")
        _validate_body(program, m)


def _validate_body(program: Program, m: MethodDef) -> None:
    labels: dict[str, int] = {}
    for ins in m.body:
        if isinstance(ins, Label):
            if ins.name in labels:
                raise AirError(f"duplicate label {ins.name!r} in {m.sig}", ins.line, 1, "duplicate-label")
            labels[ins.name] = 1
    for ins in m.body:
        if isinstance(ins, (Goto, IfNondet)) and ins.label not in labels:
            raise AirError(f"undefined label {ins.label!r} in {m.sig}", ins.line, 1, "undefined-label")
        if isinstance(ins, (New, Cast)) and not _type_ok(program, ins.type):
            raise AirError(f"unknown type {ins.type!r} in {m.sig}", ins.line, 1, "unresolved-type")
        if isinstance(ins, Invoke):
            if not program.has_class(ins.target.cls):
                raise AirError(f"call to unknown type {ins.target.cls!r}", ins.line, 1, "unresolved-type")
            if len(ins.args) != ins.target.arity:
                raise AirError(
                    f"call to {ins.target} passes {len(ins.args)} arguments", ins.line, 1, "arity"
                )
            t = program.resolve(ins.target)
            if t is not None and t.is_static != (ins.kind == "static"):
                raise AirError(
                    f"{ins.kind} call to {'static' if t.is_static else 'instance'} method {ins.target}",
                    ins.line, 1, "call-kind",
                )
    _check_definite_assignment(m)


def successors(body, i: int, labels: dict[str, int]) -> list[int]:
    ins = body[i]
    if isinstance(ins, Goto):
        return [labels[ins.label]]
    if isinstance(ins, IfNondet):
        nxt = [i + 1] if i + 1 < len(body) else []
        return nxt + [labels[ins.label]]
    if isinstance(ins, Return):
        return []
    return [i + 1] if i + 1 < len(body) else []


def _check_definite_assignment(m: MethodDef) -> None:
    body = m.body
    if not body:
        return
    labels = m.label_index()
    universe = {defined_local(i) for i in body} - {None}
    universe |= set(m.formal_locals())
    entry = frozenset(m.formal_locals())
    state: dict[int, frozenset] = {0: entry}
    work = [0]
    while work:
        i = work.pop()
        cur = state[i]
        d = defined_local(body[i])
        out = cur | {d} if d else cur
        for s in successors(body, i, labels):
            old = state.get(s)
            new = out if old is None else old & out
            if new != old:
                state[s] = new
                work.append(s)
    for i, ins in enumerate(body):
        if i not in state:
            continue
        for u in used_locals(ins):
            if u not in state[i]:
                kind = "undefined-local" if u not in universe else "unassigned-local"
                raise AirError(
                    f"local {u!r} may be used before assignment in {m.sig}",
                    ins.line, 1, kind,
                )


def _validate_manifest(program: Program) -> None:
    man = program.manifest
    if man.target_api < 1:
        raise AirError("target_api must be >= 1", man.line, 1, "manifest")
    for e in man.entry_points:
        m = program.method(e)
        if m is None or e.cls not in program.classes:
            raise AirError(f"entry point {e} does not resolve to an app method", man.line, 1, "manifest")
