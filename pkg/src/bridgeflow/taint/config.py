"""Source, sink and wrapper-rule configuration."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from functools import lru_cache
from importlib import resources
from typing import Iterable, Optional

from ..air import AirError, Program, Sig

RULES = ("propagate", "clear", "ignore")
ATTACKER_LABEL = "attacker-input"
EXFIL_LABEL = "web-exfiltration"


@dataclass(frozen=True)
class SourceRule:
    sig: Sig
    label: str
    taints: str = "return"  # "return" | "receiver" | "argN"


@dataclass(frozen=True)
class SinkRule:
    sig: Sig
    label: str
    observes: tuple[str, ...] = ("arg0",)


@dataclass(frozen=True)
class WrapRule:
    sig: Sig
    rule: str


@dataclass(frozen=True)
class SourceSinkConfig:
    sources: tuple[SourceRule, ...] = ()
    sinks: tuple[SinkRule, ...] = ()
    wrappers: tuple[WrapRule, ...] = ()
    suspicious_keys: tuple[str, ...] = ()
    suspicious_methods: tuple[str, ...] = ()
    _index: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        idx: dict[Sig, tuple[list, list, Optional[str]]] = {}
        for s in self.sources:
            idx.setdefault(s.sig, ([], [], None))[0].append(s)
        for s in self.sinks:
            idx.setdefault(s.sig, ([], [], None))[1].append(s)
        for w in self.wrappers:
            src, snk, _ = idx.get(w.sig, ([], [], None))
            idx[w.sig] = (src, snk, w.rule)
        self._index.clear()
        self._index.update(idx)

    def rules_for(self, sig: Sig):
        """``(source rules, sink rules, wrapper rule or None)`` for ``sig``."""
        return self._index.get(sig, ((), (), None))

    def has_rule(self, sig: Sig) -> bool:
        return sig in self._index

    def source_labels(self) -> set[str]:
        return {s.label for s in self.sources}

    def sink_labels(self) -> set[str]:
        return {s.label for s in self.sinks}

    def sink_sigs(self, label: str) -> set[Sig]:
        return {s.sig for s in self.sinks if s.label == label}

    def source_sigs(self, label: str) -> set[Sig]:
        return {s.sig for s in self.sources if s.label == label}

    def extend(self, sources=(), sinks=(), wrappers=()) -> "SourceSinkConfig":
        return replace(
            self,
            sources=self.sources + tuple(sources),
            sinks=self.sinks + tuple(sinks),
            wrappers=self.wrappers + tuple(wrappers),
            _index={},
        )

    def with_attacker(self, generated: Iterable) -> "SourceSinkConfig":
        """Add the ``taintSource``/``leak`` stubs of generated subclasses."""
        generated = list(generated)
        return self.extend(
            sources=[SourceRule(bv.source_sig, ATTACKER_LABEL, "return") for bv in generated],
            sinks=[SinkRule(bv.leak_sig, EXFIL_LABEL, ("arg0",)) for bv in generated],
        )

    def validate(self, program: Program) -> None:
        for rule in (*self.sources, *self.sinks, *self.wrappers):
            m = program.method(rule.sig)
            if m is None:
                raise AirError(f"configured signature {rule.sig} does not resolve", kind="config")
            for pos in _positions(rule):
                if pos.startswith("arg") and int(pos[3:]) >= len(m.params):
                    raise AirError(f"{rule.sig} has no parameter {pos}", kind="config")
                if pos == "receiver" and m.is_static:
                    raise AirError(f"{rule.sig} is static; no receiver", kind="config")
        clash = self.source_labels() & self.sink_labels()
        if clash:
            raise AirError(f"labels used as both source and sink: {sorted(clash)}", kind="config")


def _positions(rule) -> tuple[str, ...]:
    if isinstance(rule, SourceRule):
        return (rule.taints,)
    if isinstance(rule, SinkRule):
        return rule.observes
    return ()


_POS_RE = re.compile(r"^(return|receiver|arg\d+)$")


def parse_config(text: str) -> SourceSinkConfig:
    sources, sinks, wrappers = [], [], []
    keys: list[str] = []
    methods: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        kind, *rest = line.split()
        try:
            opts = dict(r.split("=", 1) for r in rest[1:] if "=" in r)
            if kind == "suspicious":
                opts = dict(r.split("=", 1) for r in rest)
                for k, v in opts.items():
                    terms = [t.strip() for t in v.split(",") if t.strip()]
                    if k == "key":
                        keys += terms
                    elif k == "method":
                        methods += terms
                    else:
                        raise ValueError(f"unknown suspicious list {k!r}")
                continue
            sig = Sig.parse(rest[0])
            if kind == "source":
                taints = opts.get("taints", "return")
                if not _POS_RE.match(taints):
                    raise ValueError(f"bad taints={taints}")
                sources.append(SourceRule(sig, opts["label"], taints))
            elif kind == "sink":
                obs = tuple(opts.get("observes", "arg0").split(","))
                if not all(_POS_RE.match(o) and o != "return" for o in obs):
                    raise ValueError(f"bad observes={opts.get('observes')}")
                sinks.append(SinkRule(sig, opts["label"], obs))
            elif kind == "wrap":
                rule = opts.get("rule", "")
                if rule not in RULES:
                    raise ValueError(f"unknown rule {rule!r}")
                wrappers.append(WrapRule(sig, rule))
            else:
                raise ValueError(f"unknown directive {kind!r}")
        except (KeyError, IndexError, ValueError, AirError) as exc:
            raise AirError(f"config line {lineno}: {exc}", lineno, 1, "config") from None
    return SourceSinkConfig(
        tuple(sources), tuple(sinks), tuple(wrappers), tuple(keys), tuple(methods)
    )


@lru_cache(maxsize=None)
def default_config() -> SourceSinkConfig:
    text = resources.files("bridgeflow.data").joinpath("default.cfg").read_text()
    return parse_config(text)
