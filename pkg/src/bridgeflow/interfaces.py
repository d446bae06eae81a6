"""Discovery of the JavaScript interface objects each Webview class may carry."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .air import (
    ConstString,
    Invoke,
    New,
    Program,
    Sig,
    is_subtype,
    local_types,
    subclasses,
)
from .air.model import GENERATED_SUFFIX, AirError
from .callgraph import CallGraph, CallSite

WEBVIEW = "WebView"
REGISTER = ("addJavascriptInterface", 3)
ANNOTATION_API_LEVEL = 17


@dataclass(frozen=True)
class Registration:
    site: CallSite
    webview_type: str
    object_type: str
    binding: Optional[str] = None


@dataclass(frozen=True)
class WebviewInterfaceMap:
    entries: dict[str, frozenset[str]] = field(default_factory=dict)
    provenance: dict[str, tuple[Registration, ...]] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return bool(self.entries)

    def webviews(self) -> list[str]:
        return sorted(self.entries)

    def interface_classes(self) -> set[str]:
        return set().union(*self.entries.values()) if self.entries else set()

    def as_dict(self) -> dict[str, list[str]]:
        return {k: sorted(v) for k, v in sorted(self.entries.items())}


@dataclass(frozen=True, order=True)
class InterfaceMethod:
    owner: str
    signature: Sig
    param_types: tuple[str, ...]
    return_type: str

    @property
    def name(self) -> str:
        return self.signature.name

    @property
    def call_sig(self) -> Sig:
        """The signature to invoke on an object statically typed as ``owner``."""
        return Sig(self.owner, self.signature.name, self.signature.arity)

    def __str__(self) -> str:
        return f"{self.owner}.{self.signature.name}"


def is_registration(program: Program, ins: Invoke) -> bool:
    t = ins.target
    return (
        (t.name, t.arity) == REGISTER
        and program.has_class(t.cls)
        and is_subtype(program, t.cls, WEBVIEW)
    )


def _has_annotated_method(program: Program, cls: str) -> bool:
    return any(m.is_annotated for c in program.ancestors(cls) for m in c.methods)


def _allocated_classes(program: Program) -> set[str]:
    return {
        ins.type
        for m in program.app_methods()
        for ins in m.body
        if isinstance(ins, New)
    }


def _binding_name(body, index: int, local: str) -> Optional[str]:
    for ins in reversed(body[:index]):
        if getattr(ins, "dst", None) == local:
            return ins.value if isinstance(ins, ConstString) else None
    return None


def map_webviews(program: Program, graph: Optional[CallGraph] = None) -> WebviewInterfaceMap:
    """Map Webview classes to the interface-object classes they may hold.

    Declared (inferred static) types of the receiver and the object argument
    are widened to all their subclasses. Object classes are kept only if they
    expose an annotated method, or, for apps targeting an API level below the
    annotation requirement, if they are app classes instantiated somewhere.
    ``graph`` is accepted for interface symmetry; CHA is implicit in the
    subclass walk.
    """
    legacy = program.manifest.target_api < ANNOTATION_API_LEVEL
    allocated = _allocated_classes(program) if legacy else set()
    webviews = {c for c in subclasses(program, WEBVIEW) if not c.endswith(GENERATED_SUFFIX)}
    entries: dict[str, set[str]] = {}
    prov: dict[str, list[Registration]] = {}
    for cls in program.classes.values():
        if cls.is_generated:
            continue
        for m in cls.methods:
            types = None
            for i, ins in enumerate(m.body):
                if not isinstance(ins, Invoke) or not is_registration(program, ins):
                    continue
                if types is None:
                    types = local_types(program, m)
                recv_t = types.get(ins.args[0], ins.target.cls)
                if not program.has_class(recv_t):
                    recv_t = ins.target.cls
                obj_t = types.get(ins.args[1], "Object")
                if not program.has_class(obj_t):
                    obj_t = "Object"
                keys = subclasses(program, recv_t) & webviews
                values = set()
                for s in subclasses(program, obj_t):
                    if s.endswith(GENERATED_SUFFIX):
                        continue
                    if _has_annotated_method(program, s) or (
                        s in allocated and s in program.classes
                    ):
                        values.add(s)
                reg = Registration(
                    CallSite(m.sig, i), recv_t, obj_t, _binding_name(m.body, i, ins.args[2])
                )
                for k in keys:
                    if values:
                        entries.setdefault(k, set()).update(values)
                    prov.setdefault(k, []).append(reg)
    return WebviewInterfaceMap(
        {k: frozenset(v) for k, v in sorted(entries.items())},
        {k: tuple(v) for k, v in sorted(prov.items()) if k in entries},
    )


def visible_methods(program: Program, cls: str) -> dict[tuple[str, int], tuple]:
    """Most-derived declaration of every method visible in ``cls``.

    Values are ``(method, annotated)`` where ``annotated`` is true if any
    declaration along the superclass chain carries the annotation.
    """
    out: dict[tuple[str, int], tuple] = {}
    annotated: dict[tuple[str, int], bool] = {}
    for c in program.ancestors(cls):
        for m in c.methods:
            key = m.sig.key
            out.setdefault(key, m)
            annotated[key] = annotated.get(key, False) or m.is_annotated
    return {k: (m, annotated[k]) for k, m in out.items()}


def class_interface_methods(program: Program, cls: str) -> set[InterfaceMethod]:
    legacy = program.manifest.target_api < ANNOTATION_API_LEVEL
    out = set()
    for m, annotated in visible_methods(program, cls).values():
        if m.is_constructor or m.is_static:
            continue
        declared_in_app = m.owner in program.classes
        if annotated or (legacy and declared_in_app):
            out.add(InterfaceMethod(cls, m.sig, m.param_types, m.return_type))
    return out


def interface_methods(
    program: Program, wmap: WebviewInterfaceMap, webview: str
) -> set[InterfaceMethod]:
    if webview not in wmap.entries:
        raise AirError(f"{webview!r} is not a mapped Webview", kind="unknown-webview")
    out: set[InterfaceMethod] = set()
    for cls in wmap.entries[webview]:
        out |= class_interface_methods(program, cls)
    return out
