"""Rewriting an app so that every Webview it creates is a generated subclass."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Mapping, Optional

from .air import (
    AirError,
    Cast,
    ConstInt,
    ConstString,
    Goto,
    IfNondet,
    Invoke,
    Label,
    MethodDef,
    New,
    Program,
    Return,
    Sig,
    validate,
)
from .air.model import CONSTRUCTOR, PRIMITIVES, used_locals
from .babelview import BabelViewClass, babelview_name, generate_babelview
from .interfaces import WebviewInterfaceMap

log = logging.getLogger(__name__)

FIND_VIEW = ("findViewById", 2)


def _rewrite_methods(program: Program, fn) -> Program:
    classes = {}
    for name, c in program.classes.items():
        if c.is_generated:
            classes[name] = c
            continue
        methods = tuple(fn(m) for m in c.methods)
        classes[name] = c if methods == c.methods else replace(c, methods=methods)
    return program.with_classes(classes)


def _require_ctor(program: Program, bv: str, arity: int, line: int) -> Sig:
    cls = program.classes.get(bv)
    if cls is None or cls.method(CONSTRUCTOR, arity) is None:
        raise AirError(
            f"{bv} has no mirrored constructor of arity {arity}", line, 1, "instrumentation"
        )
    return Sig(bv, CONSTRUCTOR, arity)


def rewrite_constructors(program: Program, mapping: Mapping[str, str]) -> Program:
    """Retarget ``new W`` plus its ``kcall W.<init>`` to the generated subclass."""

    def fix(m: MethodDef) -> MethodDef:
        body = list(m.body)
        pending: dict[str, str] = {}  # local -> webview class of a pending allocation
        changed = False
        for i, ins in enumerate(body):
            if isinstance(ins, New) and ins.type in mapping:
                body[i] = New(ins.dst, mapping[ins.type], line=ins.line)
                pending[ins.dst] = ins.type
                changed = True
                continue
            if (
                isinstance(ins, Invoke)
                and ins.kind == "special"
                and ins.target.name == CONSTRUCTOR
                and ins.args
                and pending.get(ins.args[0]) == ins.target.cls
            ):
                bv = mapping[ins.target.cls]
                target = _require_ctor(program, bv, ins.target.arity, ins.line)
                body[i] = Invoke(ins.dst, ins.kind, target, ins.args, line=ins.line)
                del pending[ins.args[0]]
                continue
            d = getattr(ins, "dst", None)
            if d in pending:
                del pending[d]
        return replace(m, body=tuple(body)) if changed else m

    return _rewrite_methods(program, fix)


def _block_breaks(ins) -> bool:
    return isinstance(ins, (Label, Goto, IfNondet, Return))


def _placeholder(local: str, typ: str, line: int):
    if typ == "String":
        return ConstString(local, "", line=line)
    if typ in PRIMITIVES:
        return ConstInt(local, 0, line=line)
    return New(local, typ, line=line)


def rewrite_findviewbyid(program: Program, mapping: Mapping[str, str]) -> Program:
    """Replace ``w = cast W r`` of a ``findViewById`` result by a fresh generated view.

    The pattern is matched within one basic block. The replacement uses the
    generated class's lowest-arity constructor, with placeholder arguments.
    """

    def fix(m: MethodDef) -> MethodDef:
        body = list(m.body)
        out = []
        changed = False
        live: dict[str, int] = {}  # locals holding a findViewById result
        for i, ins in enumerate(body):
            if _block_breaks(ins):
                live.clear()
            if isinstance(ins, Cast) and ins.src in live:
                live.pop(ins.src)
                if ins.type in mapping:
                    out.extend(_construct(program, mapping[ins.type], ins))
                    changed = True
                    continue
            elif any(u in live for u in used_locals(ins)):
                for u in used_locals(ins):
                    if live.pop(u, None) is not None:
                        log.warning(
                            "lint: findViewById result %r used without a cast in %s (instruction %d)",
                            u, m.sig, i,
                        )
            d = getattr(ins, "dst", None)
            if d in live:
                live.pop(d)
            if (
                isinstance(ins, Invoke)
                and ins.dst
                and (ins.target.name, ins.target.arity) == FIND_VIEW
            ):
                live[ins.dst] = i
            out.append(ins)
        for u, i in live.items():
            log.warning(
                "lint: findViewById result %r used without a cast in %s (instruction %d)",
                u, m.sig, i,
            )
        return replace(m, body=tuple(out)) if changed else m

    return _rewrite_methods(program, fix)


def _construct(program: Program, bv: str, cast: Cast) -> list:
    ctors = [m for m in program.classes[bv].methods if m.name == CONSTRUCTOR]
    if not ctors:
        raise AirError(f"{bv} has no constructors", cast.line, 1, "instrumentation")
    ctor = min(ctors, key=lambda m: (m.arity, m.param_types))
    seq = [New(cast.dst, bv, line=cast.line)]
    args = [cast.dst]
    for j, (_, t) in enumerate(ctor.params):
        tmp = f"{cast.dst}$arg{j}"
        seq.append(_placeholder(tmp, t, cast.line))
        args.append(tmp)
    seq.append(Invoke(None, "special", ctor.sig, tuple(args), line=cast.line))
    return seq


def add_babelviews(program: Program, wmap: WebviewInterfaceMap) -> tuple[Program, dict[str, BabelViewClass]]:
    """Generate one subclass per mapped Webview and add it to the program."""
    classes = dict(program.classes)
    generated: dict[str, BabelViewClass] = {}
    for webview in wmap.webviews():
        ifaces = wmap.entries[webview]
        if not ifaces:
            continue
        bv = generate_babelview(program, webview, ifaces)
        generated[webview] = bv
        parent = classes.get(webview)
        if parent is not None and parent.is_final:
            classes[webview] = replace(parent, is_final=False)
    for webview, bv in generated.items():
        classes[bv.name] = bv.class_def
    return program.with_classes(classes), generated


def instrument(
    program: Program, wmap: WebviewInterfaceMap, check: bool = True
) -> tuple[Program, dict[str, BabelViewClass]]:
    """Add generated subclasses and rewrite every Webview creation site."""
    out, generated = add_babelviews(program, wmap)
    mapping = {w: babelview_name(w) for w in generated}
    out = rewrite_constructors(out, mapping)
    out = rewrite_findviewbyid(out, mapping)
    if check:
        validate(out)
    return out, generated


def webview_mapping(generated: Mapping[str, BabelViewClass]) -> dict[str, str]:
    return {w: bv.name for w, bv in generated.items()}


def strip_generated(program: Program) -> Optional[Program]:
    """The program without generated classes (for diffing)."""
    return program.with_classes({k: v for k, v in program.classes.items() if not v.is_generated})
