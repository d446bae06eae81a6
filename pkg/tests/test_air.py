import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgeflow.air import (
    AirError,
    ConstString,
    Invoke,
    Sig,
    is_subtype,
    parse_program,
    serialize,
    subclasses,
)
from bridgeflow.fixtures import fixture_names, fixture_text
from bridgeflow.taint import default_config

from conftest import app, load


def test_empty_program_has_only_stubs():
    p = parse_program("")
    assert p.classes == {}
    assert "WebView" in p.stub_classes and "Object" in p.stub_classes


def test_location_utils_listing():
    p = load("location_utils")
    c = p.classes["LocationUtils"]
    annotated = [m.name for m in c.methods if m.is_annotated]
    assert annotated == ["getLocation"]


def test_unresolved_superclass_is_named():
    with pytest.raises(AirError) as e:
        parse_program("class A extends Missing {\n}\n")
    assert e.value.kind == "unresolved-type"
    assert "Missing" in str(e.value)


@pytest.mark.parametrize("text,kind", [
    ("class A {\n  method m() : void {\n    x = ;\n  }\n}\n", "syntax"),
    ("class A {\n}\nclass A {\n}\n", "duplicate-class"),
    ("class A extends B {\n}\nclass B extends A {\n}\n", "inheritance-cycle"),
    ("class A {\n  method m() : void {\n    goto L;\n  }\n}\n", "undefined-label"),
    ("class A {\n  method m() : void {\n    return x;\n  }\n}\n", "undefined-local"),
    ("class A {\n  method m() : void {\n    ifnd L;\n    x = 1;\n  L:\n    return x;\n  }\n}\n",
     "unassigned-local"),
    ("class A {\n  method m() : void {\n    x = new Nope;\n    return;\n  }\n}\n", "unresolved-type"),
])
def test_errors_have_kind_and_line(text, kind):
    with pytest.raises(AirError) as e:
        parse_program(text)
    assert e.value.kind == kind
    assert e.value.line > 0


def test_arity_and_call_kind_checked():
    bad_arity = app("class Main extends Activity {\n  method onCreate() : void {\n"
                    "    s = \"x\";\n    u = scall Uri.parse/1(s, s);\n    return;\n  }\n}\n")
    with pytest.raises(AirError, match="arguments"):
        parse_program(bad_arity)
    bad_kind = app("class Main extends Activity {\n  method onCreate() : void {\n"
                   "    s = \"x\";\n    u = vcall Uri.parse/1(s);\n    return;\n  }\n}\n")
    with pytest.raises(AirError) as e:
        parse_program(bad_kind)
    assert e.value.kind == "call-kind"


def test_subclasses_on_bridge_listing():
    p = load("framework_bridge")
    assert subclasses(p, "WebView") == {"WebView", "MyWebView"}
    assert subclasses(p, "FrameworkBridge") == {"FrameworkBridge", "MyBridge"}
    assert subclasses(p, "MyBridge") == {"MyBridge"}
    with pytest.raises(AirError):
        subclasses(p, "Nope")


def test_is_subtype_examples():
    p = load("framework_bridge")
    assert is_subtype(p, "MyWebView", "WebView")
    assert is_subtype(p, "MyWebView", "MyWebView")
    assert not is_subtype(p, "WebView", "MyWebView")
    assert is_subtype(p, "MyWebView", "Object")


@pytest.mark.parametrize("name", fixture_names())
def test_subtype_is_partial_order(name):
    p = load(name)
    names = sorted(c.name for c in p.all_classes())
    for a in names:
        assert is_subtype(p, a, a)
        for b in names:
            if a != b and is_subtype(p, a, b):
                assert not is_subtype(p, b, a)
                for c in names:
                    if is_subtype(p, b, c):
                        assert is_subtype(p, a, c)


@pytest.mark.parametrize("name", fixture_names())
def test_round_trip_fixtures(name):
    p = parse_program(fixture_text(name))
    text = serialize(p)
    q = parse_program(text)
    assert q.classes == p.classes
    assert q.manifest == p.manifest
    assert serialize(q) == text


def test_default_config_resolves_against_stubs():
    default_config().validate(parse_program(""))


def test_sig_parse():
    assert Sig.parse("WebView.loadUrl/2") == Sig("WebView", "loadUrl", 2)
    assert str(Sig.parse("A$B.<init>/1")) == "A$B.<init>/1"
    with pytest.raises(AirError):
        Sig.parse("nope")


_names = st.from_regex(r"[a-z][a-z0-9]{0,5}", fullmatch=True).filter(
    lambda s: s not in {"put", "get", "new", "cast", "goto", "ifnd", "return",
                        "vcall", "scall", "kcall", "method", "field", "class", "static",
                        "extends", "final", "manifest", "entry", "permission", "target_api"}
)
_strings = st.text(alphabet=st.characters(min_codepoint=32, max_codepoint=126), max_size=12)


@st.composite
def straight_line(draw):
    """A method of string constants, copies and concat calls."""
    n = draw(st.integers(1, 8))
    defined: list[str] = []
    lines = []
    for _ in range(n):
        dst = draw(_names)
        kind = draw(st.sampled_from(["const", "int", "copy", "concat"]) if defined else st.just("const"))
        if kind == "const":
            s = draw(_strings)
            lines.append(f"{dst} = \"{s.replace(chr(92), chr(92) * 2).replace(chr(34), chr(92) + chr(34))}\";")
        elif kind == "int":
            lines.append(f"{dst} = {draw(st.integers(-1000, 1000))};")
        elif kind == "copy":
            lines.append(f"{dst} = {draw(st.sampled_from(defined))};")
        else:
            a, b = draw(st.sampled_from(defined)), draw(st.sampled_from(defined))
            lines.append(f"{dst} = vcall String.concat/2({a}, {b});")
        defined.append(dst)
    body = "\n".join("    " + ln for ln in lines)
    return f"class Gen {{\n  method run() : void {{\n{body}\n    return;\n  }}\n}}\n"


@settings(max_examples=60, deadline=None)
@given(straight_line())
def test_round_trip_generated(text):
    p = parse_program(text)
    out = serialize(p)
    q = parse_program(out)
    assert q.classes == p.classes
    assert serialize(q) == out


@settings(max_examples=40, deadline=None)
@given(_strings)
def test_string_escapes_survive(s):
    lit = s.replace("\\", "\\\\").replace('"', '\\"')
    p = parse_program(f'class K {{\n  method m() : void {{\n    x = "{lit}";\n    return;\n  }}\n}}\n')
    ins = p.classes["K"].methods[0].body[0]
    assert isinstance(ins, ConstString) and ins.value == s
    assert parse_program(serialize(p)).classes == p.classes


def test_invoke_receiver():
    p = load("imei_order")
    m = p.resolve(Sig("DeviceBridge", "initialize", 1))
    calls = [i for i in m.body if isinstance(i, Invoke)]
    assert calls[0].receiver == "c"
