"""Bundled example apps with ground-truth labels."""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources
from pathlib import Path


def fixture_dir() -> Path:
    return Path(str(resources.files(__name__)))


def fixture_path(name: str) -> Path:
    p = fixture_dir() / f"{name}.air"
    if not p.exists():
        raise FileNotFoundError(f"no fixture named {name!r}")
    return p


def fixture_text(name: str) -> str:
    return fixture_path(name).read_text()


def fixture_names() -> list[str]:
    return sorted(p.stem for p in fixture_dir().glob("*.air"))


@lru_cache(maxsize=None)
def labels() -> dict:
    return json.loads((fixture_dir() / "labels.json").read_text())


def pair_allowed(pair, impossible) -> bool:
    """False if ``pair`` matches a ``[source, sink]`` pattern; ``*`` matches anything."""
    for src, snk in impossible:
        if src in ("*", pair[0]) and snk in ("*", pair[1]):
            return False
    return True


def blowup_program(n: int = 40) -> str:
    """An app whose bridge methods all call each other through nested loops.

    Every method stores into every field of a shared object, so the number of
    access paths and contexts grows quickly with ``n``.
    """
    fields = "".join(f"  field f{i} : Node;\n" for i in range(n))
    out = [
        "manifest {\n  target_api = 23;\n  entry MainActivity.onCreate/1;\n}\n",
        f"class Node {{\n{fields}  field s : String;\n"
        "  method <init>() : void {\n    kcall Object.<init>/1(this);\n    return;\n  }\n}\n",
    ]
    methods = []
    for i in range(n):
        calls = "".join(
            f"    ifnd S{k};\n    r{k} = vcall Hub.m{(i + k) % n}/3(this, x, a);\n"
            f"    put x.f{(i + k) % n} = r{k};\n  S{k}:\n"
            for k in (1, 2, 3)
        )
        methods.append(
            f"  @JavascriptInterface\n  method m{i}(x: Node, a: String) : Node {{\n"
            f"  L:\n    ifnd E;\n    y = get x.f{i};\n    put y.s = a;\n    put x.f{(i * 7 + 1) % n} = y;\n"
            f"{calls}    goto L;\n  E:\n    z = get x.f{(i + 5) % n};\n    return z;\n  }}\n"
        )
    out.append(
        "class Hub {\n  method <init>() : void {\n    kcall Object.<init>/1(this);\n"
        "    return;\n  }\n" + "".join(methods) + "}\n"
    )
    out.append(
        "class MainActivity extends Activity {\n  method onCreate() : void {\n"
        "    w = new WebView;\n    kcall WebView.<init>/2(w, this);\n"
        "    h = new Hub;\n    kcall Hub.<init>/1(h);\n    n = \"Hub\";\n"
        "    vcall WebView.addJavascriptInterface/3(w, h, n);\n"
        "    u = \"https://hub.example.org/\";\n    vcall WebView.loadUrl/2(w, u);\n"
        "    return;\n  }\n}\n"
    )
    return "\n".join(out)
