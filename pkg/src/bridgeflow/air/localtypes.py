"""Static types of locals, inferred from their definitions."""

from __future__ import annotations

from .hierarchy import common_supertype
from .model import (
    Assign,
    Cast,
    ConstInt,
    ConstString,
    InstanceGet,
    Invoke,
    MethodDef,
    New,
    Program,
)


def _join(program: Program, a: str | None, b: str) -> str:
    if a is None or a == b:
        return b
    return common_supertype(program, a, b)


def local_types(program: Program, method: MethodDef) -> dict[str, str]:
    """Map each local to the least common supertype of its definitions."""
    types: dict[str, str] = dict(method.params)
    if not method.is_static:
        types["this"] = method.owner
    changed = True
    while changed:
        changed = False
        for ins in method.body:
            t = None
            if isinstance(ins, ConstString):
                t = "String"
            elif isinstance(ins, ConstInt):
                t = "int"
            elif isinstance(ins, (New, Cast)):
                t = ins.type
            elif isinstance(ins, Assign):
                t = types.get(ins.src)
            elif isinstance(ins, InstanceGet):
                owner = types.get(ins.obj)
                t = program.field_type(owner, ins.field) if owner else None
                t = t or "Object"
            elif isinstance(ins, Invoke) and ins.dst:
                m = program.resolve(ins.target)
                t = m.return_type if m else "Object"
            if t is None:
                continue
            dst = ins.dst
            new = _join(program, types.get(dst), t)
            if new != types.get(dst):
                types[dst] = new
                changed = True
    return types
