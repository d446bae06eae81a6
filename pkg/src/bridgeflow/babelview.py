"""Synthesis of attacker-model Webview subclasses.

Each generated class extends one Webview class, mirrors its constructors,
captures registered interface objects in per-class fields, and re-routes the
content-loading methods through an ``attacker`` method. The attacker loops
forever (an ``ifnd``-guarded back edge), picks one interface method per
iteration through an ``ifnd`` decision chain, feeds it fresh ``taintSource``
values and hands any result to ``leak``.
"""

from __future__ import annotations

from dataclasses import dataclass

from .air import (
    AirError,
    Cast,
    ClassDef,
    FieldDef,
    Goto,
    IfNondet,
    InstanceGet,
    InstancePut,
    Invoke,
    Label,
    MethodDef,
    New,
    Program,
    Return,
    Sig,
    render_class,
)
from .air.model import CONSTRUCTOR, GENERATED_SUFFIX
from .interfaces import InterfaceMethod, class_interface_methods

LOAD_METHODS = ("loadUrl", "postUrl", "loadData", "loadDataWithBaseURL")
ATTACKER = "attacker"
SOURCE = "taintSource"
LEAK = "leak"


@dataclass(frozen=True)
class BabelViewClass:
    class_def: ClassDef
    parent: str
    interface_fields: tuple[tuple[str, str], ...]  # (interface class, field name)
    interface_methods: tuple[InterfaceMethod, ...]

    @property
    def name(self) -> str:
        return self.class_def.name

    @property
    def attacker_sig(self) -> Sig:
        return Sig(self.name, ATTACKER, 1)

    @property
    def source_sig(self) -> Sig:
        return Sig(self.name, SOURCE, 1)

    @property
    def leak_sig(self) -> Sig:
        return Sig(self.name, LEAK, 2)

    def load_sigs(self) -> list[Sig]:
        return [m.sig for m in self.class_def.methods if m.name in LOAD_METHODS]


def babelview_name(webview: str) -> str:
    return webview + GENERATED_SUFFIX


def interface_field(cls: str) -> str:
    return "jsi$" + cls


def _parent_constructors(program: Program, webview: str) -> list[MethodDef]:
    for c in program.ancestors(webview):
        ctors = [m for m in c.methods if m.is_constructor]
        if ctors:
            return sorted(ctors, key=lambda m: m.arity)
    return []


def _forwarding(owner: str, parent: str, proto: MethodDef, tail=()) -> MethodDef:
    args = ("this",) + tuple(n for n, _ in proto.params)
    body = (
        Invoke(None, "special", Sig(parent, proto.name, proto.arity), args),
        *tail,
        Return(None),
    )
    return MethodDef(owner, proto.name, proto.params, proto.return_type, body=body)


def _register_override(owner: str, parent: str, proto: MethodDef, fields) -> MethodDef:
    obj = proto.params[0][0]
    body: list = [
        Invoke(None, "special", Sig(parent, proto.name, proto.arity),
               ("this",) + tuple(n for n, _ in proto.params)),
    ]
    for i, (cls, fname) in enumerate(fields):
        last = i == len(fields) - 1
        if not last:
            body.append(IfNondet(f"R{i + 1}"))
        body += [Cast(f"c{i}", cls, obj), InstancePut("this", fname, f"c{i}")]
        if not last:
            body += [Goto("DONE"), Label(f"R{i + 1}")]
    body += [Label("DONE"), Return(None)]
    return MethodDef(owner, proto.name, proto.params, proto.return_type, body=tuple(body))


def _attacker(owner: str, methods: list[InterfaceMethod]) -> MethodDef:
    source = Sig(owner, SOURCE, 1)
    leak = Sig(owner, LEAK, 2)
    body: list = [Label("LOOP"), IfNondet("EXIT")]
    for i, im in enumerate(methods):
        last = i == len(methods) - 1
        if i:
            body.append(Label(f"B{i}"))
        if not last:
            body.append(IfNondet(f"B{i + 1}"))
        recv = f"o{i}"
        body.append(InstanceGet(recv, "this", interface_field(im.owner)))
        args = []
        for j, _ in enumerate(im.param_types):
            a = f"a{i}_{j}"
            body.append(Invoke(a, "virtual", source, ("this",)))
            args.append(a)
        if im.return_type == "void":
            body.append(Invoke(None, "virtual", im.call_sig, (recv, *args)))
        else:
            r = f"r{i}"
            body.append(Invoke(r, "virtual", im.call_sig, (recv, *args)))
            body.append(Invoke(None, "virtual", leak, ("this", r)))
        body.append(Goto("LOOP"))
    body += [Label("EXIT"), Return(None)]
    return MethodDef(owner, ATTACKER, (), "void", body=tuple(body))


def generate_babelview(program: Program, webview: str, ifaces) -> BabelViewClass:
    """Build the attacker-model subclass of ``webview`` for interface classes ``ifaces``."""
    if not program.has_class(webview):
        raise AirError(f"unknown Webview class {webview!r}", kind="unresolved-type")
    ifaces = sorted(set(ifaces))
    if not ifaces:
        raise AirError(f"no interface classes for {webview!r}", kind="empty-interfaces")
    name = babelview_name(webview)
    fields = tuple((c, interface_field(c)) for c in ifaces)
    methods: list[MethodDef] = []
    for ctor in _parent_constructors(program, webview):
        methods.append(_forwarding(name, webview, ctor))
    reg = program.lookup(webview, "addJavascriptInterface", 3)
    if reg is None:
        raise AirError(f"{webview!r} lacks addJavascriptInterface", kind="unresolved-method")
    methods.append(_register_override(name, webview, reg, fields))
    attack_call = Invoke(None, "virtual", Sig(name, ATTACKER, 1), ("this",))
    for lname in LOAD_METHODS:
        proto = next(
            (m for c in program.ancestors(webview) for m in c.methods if m.name == lname),
            None,
        )
        if proto is not None:
            methods.append(_forwarding(name, webview, proto, (attack_call,)))
    imethods = sorted(im for c in ifaces for im in class_interface_methods(program, c))
    methods.append(_attacker(name, imethods))
    methods.append(
        MethodDef(name, SOURCE, (), "Object", body=(New("v", "Object"), Return("v")))
    )
    methods.append(MethodDef(name, LEAK, (("value", "Object"),), "void", body=(Return(None),)))
    cdef = ClassDef(
        name,
        webview,
        fields=tuple(FieldDef(f, c) for c, f in fields),
        methods=tuple(methods),
    )
    return BabelViewClass(cdef, webview, fields, tuple(imethods))


def render_airtext(bv: BabelViewClass) -> str:
    return render_class(bv.class_def)


def constructors(bv: BabelViewClass) -> list[MethodDef]:
    return sorted(
        (m for m in bv.class_def.methods if m.name == CONSTRUCTOR), key=lambda m: m.arity
    )
