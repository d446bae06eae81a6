"""Class hierarchy queries over a :class:`Program`."""

from __future__ import annotations

from .model import AirError, Program


def _require(program: Program, name: str) -> None:
    if not program.has_class(name):
        raise AirError(f"unknown type {name!r}", kind="unresolved-type")


def subclasses(program: Program, type_name: str) -> set[str]:
    """Reflexive-transitive subtypes of ``type_name`` (app and stub classes)."""
    _require(program, type_name)
    out = {type_name}
    stack = [type_name]
    while stack:
        for kid in program.children.get(stack.pop(), ()):
            if kid not in out:
                out.add(kid)
                stack.append(kid)
    return out


def is_subtype(program: Program, a: str, b: str) -> bool:
    _require(program, a)
    _require(program, b)
    return any(c.name == b for c in program.ancestors(a))


def common_supertype(program: Program, a: str, b: str) -> str:
    if a == b:
        return a
    if not (program.has_class(a) and program.has_class(b)):
        return "Object"
    up = [c.name for c in program.ancestors(a)]
    bs = {c.name for c in program.ancestors(b)}
    for name in up:
        if name in bs:
            return name
    return "Object"
