"""Program model for AIR, the textual three-address app representation."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterator, Mapping, Optional

PRIMITIVES = frozenset(
    ["void", "int", "boolean", "long", "float", "double", "char", "byte", "short"]
)
JS_INTERFACE = "JavascriptInterface"
CONSTRUCTOR = "<init>"


class AirError(Exception):
    """Parse or validation failure, located in the source text when possible."""

    def __init__(self, message: str, line: int = 0, col: int = 0, kind: str = "error"):
        self.message = message
        self.line = line
        self.col = col
        self.kind = kind
        where = f"{line}:{col}: " if line else ""
        super().__init__(f"{where}{kind}: {message}")


_SIG_RE = re.compile(r"^([A-Za-z_$][\w$]*)\.([A-Za-z_$<][\w$<>]*)/(\d+)$")


@dataclass(frozen=True, order=True)
class Sig:
    """Method signature ``Class.name/arity``; arity counts the receiver."""

    cls: str
    name: str
    arity: int

    @classmethod
    def parse(cls, text: str) -> "Sig":
        m = _SIG_RE.match(text.strip())
        if not m:
            raise AirError(f"malformed signature {text!r}", kind="syntax")
        return cls(m.group(1), m.group(2), int(m.group(3)))

    def __str__(self) -> str:
        return f"{self.cls}.{self.name}/{self.arity}"

    @property
    def key(self) -> tuple[str, int]:
        return (self.name, self.arity)


# -- instructions ------------------------------------------------------------
# ``line`` is a diagnostic position only; it never takes part in equality.


@dataclass(frozen=True)
class ConstString:
    dst: str
    value: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class ConstInt:
    dst: str
    value: int
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Assign:
    dst: str
    src: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class New:
    dst: str
    type: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Cast:
    dst: str
    type: str
    src: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class InstanceGet:
    dst: str
    obj: str
    field: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class InstancePut:
    obj: str
    field: str
    src: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Invoke:
    dst: Optional[str]
    kind: str  # "virtual" | "static" | "special"
    target: Sig
    args: tuple[str, ...]
    line: int = field(default=0, compare=False, repr=False)

    @property
    def receiver(self) -> Optional[str]:
        if self.kind == "static" or not self.args:
            return None
        return self.args[0]


@dataclass(frozen=True)
class Return:
    src: Optional[str] = None
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Goto:
    label: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class IfNondet:
    label: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Label:
    name: str
    line: int = field(default=0, compare=False, repr=False)


Instr = (
    ConstString | ConstInt | Assign | New | Cast | InstanceGet | InstancePut
    | Invoke | Return | Goto | IfNondet | Label
)
CALL_KINDS = {"vcall": "virtual", "scall": "static", "kcall": "special"}
CALL_KEYWORDS = {v: k for k, v in CALL_KINDS.items()}


def defined_local(instr: Instr) -> Optional[str]:
    if isinstance(instr, (InstancePut, Return, Goto, IfNondet, Label)):
        return None
    return instr.dst


def used_locals(instr: Instr) -> tuple[str, ...]:
    if isinstance(instr, (Assign, Cast)):
        return (instr.src,)
    if isinstance(instr, InstanceGet):
        return (instr.obj,)
    if isinstance(instr, InstancePut):
        return (instr.obj, instr.src)
    if isinstance(instr, Invoke):
        return instr.args
    if isinstance(instr, Return) and instr.src is not None:
        return (instr.src,)
    return ()


# -- declarations --------------------------------------------------------------


@dataclass(frozen=True)
class FieldDef:
    name: str
    type: str
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class MethodDef:
    owner: str
    name: str
    params: tuple[tuple[str, str], ...]
    return_type: str
    is_static: bool = False
    annotations: frozenset[str] = frozenset()
    body: tuple[Instr, ...] = ()
    line: int = field(default=0, compare=False, repr=False)

    @property
    def is_constructor(self) -> bool:
        return self.name == CONSTRUCTOR

    @property
    def arity(self) -> int:
        return len(self.params) + (0 if self.is_static else 1)

    @property
    def sig(self) -> Sig:
        return Sig(self.owner, self.name, self.arity)

    @property
    def param_types(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.params)

    @property
    def is_annotated(self) -> bool:
        return JS_INTERFACE in self.annotations

    def formal_locals(self) -> tuple[str, ...]:
        """Locals bound on entry, receiver first for instance methods."""
        names = tuple(n for n, _ in self.params)
        return names if self.is_static else ("this",) + names

    def label_index(self) -> dict[str, int]:
        return {ins.name: i for i, ins in enumerate(self.body) if isinstance(ins, Label)}


@dataclass(frozen=True)
class ClassDef:
    name: str
    superclass: Optional[str]
    is_final: bool = False
    is_external: bool = False
    fields: tuple[FieldDef, ...] = ()
    methods: tuple[MethodDef, ...] = ()
    line: int = field(default=0, compare=False, repr=False)

    def method(self, name: str, arity: int) -> Optional[MethodDef]:
        for m in self.methods:
            if m.name == name and m.arity == arity:
                return m
        return None

    def field_type(self, name: str) -> Optional[str]:
        for f in self.fields:
            if f.name == name:
                return f.type
        return None

    @property
    def is_generated(self) -> bool:
        return self.name.endswith(GENERATED_SUFFIX)


GENERATED_SUFFIX = "$BabelView"


@dataclass(frozen=True)
class Manifest:
    target_api: int = 23
    entry_points: tuple[Sig, ...] = ()
    permissions: tuple[str, ...] = ()
    line: int = field(default=0, compare=False, repr=False)


@dataclass(frozen=True)
class Program:
    """A parsed app plus the platform stubs it was resolved against.

    Treat instances as immutable: the transformation passes return new
    programs via :meth:`with_classes`.
    """

    classes: Mapping[str, ClassDef]
    manifest: Manifest
    stub_classes: Mapping[str, ClassDef]

    def class_def(self, name: str) -> ClassDef:
        c = self.classes.get(name) or self.stub_classes.get(name)
        if c is None:
            raise AirError(f"unknown type {name!r}", kind="unresolved-type")
        return c

    def has_class(self, name: str) -> bool:
        return name in self.classes or name in self.stub_classes

    def all_classes(self) -> Iterator[ClassDef]:
        yield from self.stub_classes.values()
        yield from self.classes.values()

    def app_methods(self) -> Iterator[MethodDef]:
        for c in self.classes.values():
            yield from c.methods

    def method(self, sig: Sig) -> Optional[MethodDef]:
        """The method declared exactly at ``sig`` (no inheritance walk)."""
        c = self.classes.get(sig.cls) or self.stub_classes.get(sig.cls)
        return c.method(sig.name, sig.arity) if c else None

    def lookup(self, cls: str, name: str, arity: int) -> Optional[MethodDef]:
        """Resolve a method by walking up from ``cls`` through its superclasses."""
        for c in self.ancestors(cls):
            m = c.method(name, arity)
            if m is not None:
                return m
        return None

    def resolve(self, sig: Sig) -> Optional[MethodDef]:
        return self.lookup(sig.cls, sig.name, sig.arity)

    def ancestors(self, name: str) -> Iterator[ClassDef]:
        seen = set()
        cur: Optional[str] = name
        while cur is not None and cur not in seen and self.has_class(cur):
            seen.add(cur)
            c = self.class_def(cur)
            yield c
            cur = c.superclass

    def field_type(self, cls: str, name: str) -> Optional[str]:
        for c in self.ancestors(cls):
            t = c.field_type(name)
            if t is not None:
                return t
        return None

    @cached_property
    def children(self) -> dict[str, tuple[str, ...]]:
        kids: dict[str, list[str]] = {}
        for c in self.all_classes():
            if c.superclass is not None:
                kids.setdefault(c.superclass, []).append(c.name)
        return {k: tuple(sorted(v)) for k, v in kids.items()}

    def with_classes(self, classes: Mapping[str, ClassDef]) -> "Program":
        return replace(self, classes=dict(classes))
