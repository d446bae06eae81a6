"""Canonical AIR text rendering."""

from __future__ import annotations

from .model import (
    CALL_KEYWORDS,
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
    Manifest,
    MethodDef,
    New,
    Program,
    Return,
)


def quote(s: str) -> str:
    body = s.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{body}"'


def render_call(ins: Invoke) -> str:
    return f"{CALL_KEYWORDS[ins.kind]} {ins.target}({', '.join(ins.args)})"


def render_instr(ins) -> str:
    if isinstance(ins, Label):
        return f"{ins.name}:"
    if isinstance(ins, ConstString):
        return f"{ins.dst} = {quote(ins.value)};"
    if isinstance(ins, ConstInt):
        return f"{ins.dst} = {ins.value};"
    if isinstance(ins, Assign):
        return f"{ins.dst} = {ins.src};"
    if isinstance(ins, New):
        return f"{ins.dst} = new {ins.type};"
    if isinstance(ins, Cast):
        return f"{ins.dst} = cast {ins.type} {ins.src};"
    if isinstance(ins, InstanceGet):
        return f"{ins.dst} = get {ins.obj}.{ins.field};"
    if isinstance(ins, InstancePut):
        return f"put {ins.obj}.{ins.field} = {ins.src};"
    if isinstance(ins, Invoke):
        call = render_call(ins)
        return f"{ins.dst} = {call};" if ins.dst else f"{call};"
    if isinstance(ins, Return):
        return f"return {ins.src};" if ins.src else "return;"
    if isinstance(ins, Goto):
        return f"goto {ins.label};"
    if isinstance(ins, IfNondet):
        return f"ifnd {ins.label};"
    raise TypeError(f"not an instruction: {ins!r}")


def render_method(m: MethodDef, indent: str = "  ") -> list[str]:
    lines = [f"{indent}@{a}" for a in sorted(m.annotations)]
    params = ", ".join(f"{n}: {t}" for n, t in m.params)
    static = "static " if m.is_static else ""
    lines.append(f"{indent}{static}method {m.name}({params}) : {m.return_type} {{")
    for ins in m.body:
        pad = indent * 2 if isinstance(ins, Label) else indent * 3
        lines.append(pad + render_instr(ins))
    lines.append(f"{indent}}}")
    return lines


def render_class(c: ClassDef) -> str:
    head = "final class" if c.is_final else "class"
    ext = f" extends {c.superclass}" if c.superclass not in (None, "Object") else ""
    lines = [f"{head} {c.name}{ext} {{"]
    for f in c.fields:
        lines.append(f"  field {f.name} : {f.type};")
    for m in c.methods:
        lines.extend(render_method(m))
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_manifest(m: Manifest) -> str:
    lines = ["manifest {", f"  target_api = {m.target_api};"]
    lines += [f"  entry {e};" for e in m.entry_points]
    lines += [f"  permission {quote(p)};" for p in m.permissions]
    lines.append("}")
    return "\n".join(lines) + "\n"


def serialize(program: Program) -> str:
    """Render the app part of ``program`` (manifest and app classes)."""
    parts = [render_manifest(program.manifest)]
    parts += [render_class(c) for c in program.classes.values()]
    return "\n".join(parts)
