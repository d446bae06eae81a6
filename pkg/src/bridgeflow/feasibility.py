"""Static evidence that injected JavaScript could reach a Webview."""

from __future__ import annotations

from .air import ConstString, Program

NOTE = "static evidence only"


def scan_http_urls(program: Program) -> list[tuple[str, str, str]]:
    """Every app string constant that is a cleartext ``http://`` URL."""
    out = set()
    for cls in program.classes.values():
        if cls.is_generated:
            continue
        for m in cls.methods:
            for ins in m.body:
                if isinstance(ins, ConstString) and ins.value[:7].lower() == "http://":
                    out.add((cls.name, m.name, ins.value))
    return sorted(out)
