"""Intraprocedural string constant folding with a StringBuilder model."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .air import (
    Assign,
    Cast,
    ConstInt,
    ConstString,
    Invoke,
    MethodDef,
    New,
    Program,
    Sig,
)
from .air.loader import successors
from .air.model import CONSTRUCTOR, defined_local, used_locals


class _Top:
    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "TOP"

    def __reduce__(self):
        return (_Top, ())


TOP = _Top()
UNRESOLVED = "<unresolved>"


@dataclass(frozen=True)
class Builder:
    alloc: int  # index of the ``new StringBuilder`` instruction


Abstract = Union[str, int, Builder, _Top]


@dataclass
class StringConstMap:
    method: Sig
    values: dict = field(default_factory=dict)  # (index, local) -> str | TOP

    def get(self, index: int, local: str) -> Optional[str]:
        """The constant string ``local`` holds at instruction ``index``, else None."""
        v = self.values.get((index, local), TOP)
        return v if isinstance(v, str) else None

    def resolved(self) -> dict:
        return {k: v for k, v in self.values.items() if isinstance(v, str)}


def _text(v: Abstract):
    if isinstance(v, bool):
        return TOP
    if isinstance(v, int):
        return str(v)
    if isinstance(v, str):
        return v
    return TOP


def _cat(a: Abstract, b: Abstract):
    a, b = _text(a), _text(b)
    if a is TOP or b is TOP:
        return TOP
    return a + b


def _join(a: dict, b: dict) -> dict:
    out = {}
    for k in a.keys() | b.keys():
        x, y = a.get(k, TOP), b.get(k, TOP)
        out[k] = x if x == y and type(x) is type(y) else TOP
    return out


_SB = "StringBuilder"


def _transfer(ins, env: dict, heap: dict, i: int) -> None:
    def val(local):
        return env.get(local, TOP)

    def escape(local):
        v = env.get(local)
        if isinstance(v, Builder):
            heap[v.alloc] = TOP

    if isinstance(ins, ConstString):
        env[ins.dst] = ins.value
    elif isinstance(ins, ConstInt):
        env[ins.dst] = ins.value
    elif isinstance(ins, (Assign, Cast)):
        env[ins.dst] = val(ins.src)
    elif isinstance(ins, New):
        if ins.type == _SB:
            b = Builder(i)
            # an older object from the same site may still be referenced
            for k, v in env.items():
                if v == b and k != ins.dst:
                    env[k] = TOP
            env[ins.dst] = b
            heap[i] = ""
        else:
            env[ins.dst] = TOP
    elif isinstance(ins, Invoke):
        t = ins.target
        args = [val(a) for a in ins.args]
        recv = args[0] if args else TOP
        result = TOP
        if t.cls == _SB and isinstance(recv, Builder):
            b = recv.alloc
            if t.name == CONSTRUCTOR:
                heap[b] = _text(args[1]) if len(args) > 1 else ""
            elif t.name == "append":
                heap[b] = _cat(heap.get(b, TOP), args[1])
                result = recv
            elif t.name == "toString":
                result = heap.get(b, TOP)
            elif t.name == "setLength":
                cur, n = heap.get(b, TOP), args[1]
                heap[b] = cur[:n] if isinstance(cur, str) and type(n) is int else TOP
            else:
                heap[b] = TOP
            for a in ins.args[1:]:
                escape(a)
        elif t.cls == "String" and t.name == "concat":
            result = _cat(args[0], args[1])
        elif t.cls == "String" and t.name == "valueOf":
            result = _text(args[0])
        else:
            for a in ins.args:
                escape(a)
        if ins.dst:
            env[ins.dst] = result
    else:
        d = defined_local(ins)
        if d:
            env[d] = TOP


def fold_strings(method: MethodDef) -> StringConstMap:
    body = method.body
    out = StringConstMap(method.sig)
    if not body:
        return out
    labels = method.label_index()
    entry = ({n: TOP for n in method.formal_locals()}, {})
    states: dict[int, tuple[dict, dict]] = {0: entry}
    work = [0]
    while work:
        i = work.pop()
        env, heap = states[i]
        env, heap = dict(env), dict(heap)
        _transfer(body[i], env, heap, i)
        for j in successors(body, i, labels):
            if j not in states:
                states[j] = (env, heap)
                work.append(j)
                continue
            old_env, old_heap = states[j]
            new = (_join(old_env, env), _join(old_heap, heap))
            if new != states[j]:
                states[j] = new
                work.append(j)
    for i, (env, heap) in states.items():
        for local in used_locals(body[i]):
            v = env.get(local, TOP)
            out.values[(i, local)] = _text(v) if not isinstance(v, Builder) else TOP
    return out


def fold_program(program: Program) -> dict[Sig, StringConstMap]:
    return {m.sig: fold_strings(m) for m in program.app_methods()}
