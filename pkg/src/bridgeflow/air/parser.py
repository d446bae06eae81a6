"""Tokenizer and recursive-descent parser for AIR text."""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .model import (
    CALL_KINDS,
    AirError,
    Assign,
    Cast,
    ClassDef,
    ConstInt,
    ConstString,
    FieldDef,
    Goto,
    IfNondet,
    InstanceGet,
    InstancePut,
    Invoke,
    Label,
    Manifest,
    MethodDef,
    New,
    Return,
    Sig,
)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|//[^\n]*|\#[^\n]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<int>-?\d+)
  | (?P<annot>@[A-Za-z_$][\w$]*)
  | (?P<name>[A-Za-z_$<][\w$<>]*)
  | (?P<punct>[{}();:=,./\[\]])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}

RESERVED = frozenset(
    ["put", "return", "goto", "ifnd", "vcall", "scall", "kcall", "new", "cast", "get"]
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m:
            raise AirError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1, "syntax"
            )
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def unquote(lit: str) -> str:
    body = lit[1:-1]
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\" and i + 1 < len(body):
            out.append(_ESCAPES.get(body[i + 1], body[i + 1]))
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


class Parser:
    def __init__(self, text: str, external: bool = False):
        self.toks = tokenize(text)
        self.i = 0
        self.external = external

    # -- token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def error(self, msg: str, tok: Optional[Token] = None) -> AirError:
        t = tok or self.tok
        return AirError(msg, t.line, t.col, "syntax")

    def accept(self, text: str) -> Optional[Token]:
        if self.tok.text == text and self.tok.kind in ("punct", "name", "annot"):
            t = self.tok
            self.i += 1
            return t
        return None

    def expect(self, text: str) -> Token:
        t = self.accept(text)
        if t is None:
            shown = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {shown!r}")
        return t

    def name(self, what: str = "name") -> str:
        t = self.tok
        if t.kind != "name":
            raise self.error(f"expected {what}, found {t.text or 'end of input'!r}")
        self.i += 1
        return t.text

    def local(self) -> str:
        t = self.tok
        n = self.name("local")
        if n in RESERVED:
            raise self.error(f"reserved word {n!r} used as a local", t)
        return n

    def type_name(self) -> str:
        base = self.name("type")
        while self.accept("["):
            self.expect("]")
            base += "[]"
        return base

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            raise self.error(f"expected integer, found {t.text or 'end of input'!r}")
        self.i += 1
        return int(t.text)

    def string(self) -> str:
        t = self.tok
        if t.kind != "str":
            raise self.error(f"expected string, found {t.text or 'end of input'!r}")
        self.i += 1
        return unquote(t.text)

    def sig(self) -> Sig:
        cls = self.name("class")
        self.expect(".")
        meth = self.name("method")
        self.expect("/")
        return Sig(cls, meth, self.integer())

    # -- grammar
    def parse(self) -> tuple[Optional[Manifest], list[ClassDef]]:
        manifest = None
        if self.tok.text == "manifest":
            if self.external:
                raise self.error("stub files cannot declare a manifest")
            manifest = self.manifest()
        classes = []
        while self.tok.kind != "eof":
            classes.append(self.class_def())
        return manifest, classes

    def manifest(self) -> Manifest:
        start = self.expect("manifest")
        self.expect("{")
        self.expect("target_api")
        self.expect("=")
        api = self.integer()
        self.expect(";")
        entries, perms = [], []
        while self.accept("entry"):
            entries.append(self.sig())
            self.expect(";")
        while self.accept("permission"):
            perms.append(self.string())
            self.expect(";")
        self.expect("}")
        return Manifest(api, tuple(entries), tuple(perms), line=start.line)

    def class_def(self) -> ClassDef:
        start = self.tok
        final = bool(self.accept("final"))
        self.expect("class")
        name = self.name("class name")
        sup = None
        if self.accept("extends"):
            sup = self.name("superclass")
        elif name != "Object":
            sup = "Object"
        self.expect("{")
        fields, methods = [], []
        while not self.accept("}"):
            if self.tok.text == "field":
                fields.append(self.field_def())
            else:
                methods.append(self.method_def(name))
        return ClassDef(
            name, sup, final, self.external, tuple(fields), tuple(methods), line=start.line
        )

    def field_def(self) -> FieldDef:
        start = self.expect("field")
        name = self.name("field name")
        self.expect(":")
        typ = self.type_name()
        self.expect(";")
        return FieldDef(name, typ, line=start.line)

    def method_def(self, owner: str) -> MethodDef:
        start = self.tok
        annots = set()
        while self.tok.kind == "annot":
            annots.add(self.tok.text[1:])
            self.i += 1
        static = bool(self.accept("static"))
        self.expect("method")
        name = self.name("method name")
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                pname = self.local()
                self.expect(":")
                params.append((pname, self.type_name()))
                if self.accept(")"):
                    break
                self.expect(",")
        self.expect(":")
        ret = self.type_name()
        self.expect("{")
        body = []
        while not self.accept("}"):
            body.append(self.instr())
        return MethodDef(
            owner, name, tuple(params), ret, static, frozenset(annots), tuple(body),
            line=start.line,
        )

    def call(self, dst: Optional[str], line: int) -> Invoke:
        kind = CALL_KINDS[self.name()]
        target = self.sig()
        self.expect("(")
        args = []
        if not self.accept(")"):
            while True:
                args.append(self.local())
                if self.accept(")"):
                    break
                self.expect(",")
        return Invoke(dst, kind, target, tuple(args), line=line)

    def instr(self):
        t = self.tok
        line = t.line
        if t.kind != "name":
            raise self.error(f"expected instruction, found {t.text or 'end of input'!r}")
        word = t.text
        if word == "put":
            self.i += 1
            obj = self.local()
            self.expect(".")
            fld = self.name("field")
            self.expect("=")
            src = self.local()
            self.expect(";")
            return InstancePut(obj, fld, src, line=line)
        if word == "return":
            self.i += 1
            src = None if self.tok.text == ";" else self.local()
            self.expect(";")
            return Return(src, line=line)
        if word in ("goto", "ifnd"):
            self.i += 1
            lbl = self.name("label")
            self.expect(";")
            return Goto(lbl, line=line) if word == "goto" else IfNondet(lbl, line=line)
        if word in CALL_KINDS:
            ins = self.call(None, line)
            self.expect(";")
            return ins
        if self.peek().text == ":":
            self.i += 2
            return Label(word, line=line)
        dst = self.local()
        self.expect("=")
        ins = self.rhs(dst, line)
        self.expect(";")
        return ins

    def rhs(self, dst: str, line: int):
        t = self.tok
        if t.kind == "str":
            return ConstString(dst, self.string(), line=line)
        if t.kind == "int":
            return ConstInt(dst, self.integer(), line=line)
        if t.text == "new":
            self.i += 1
            return New(dst, self.type_name(), line=line)
        if t.text == "cast":
            self.i += 1
            typ = self.type_name()
            return Cast(dst, typ, self.local(), line=line)
        if t.text == "get":
            self.i += 1
            obj = self.local()
            self.expect(".")
            return InstanceGet(dst, obj, self.name("field"), line=line)
        if t.text in CALL_KINDS:
            return self.call(dst, line)
        return Assign(dst, self.local(), line=line)


def parse_text(text: str, external: bool = False):
    return Parser(text, external).parse()
