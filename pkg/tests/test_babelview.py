import logging

import pytest

from bridgeflow.air import (
    AirError,
    Cast,
    IfNondet,
    Invoke,
    New,
    Sig,
    parse_program,
    serialize,
)
from bridgeflow.babelview import babelview_name, generate_babelview, render_airtext
from bridgeflow.instrument import (
    instrument,
    rewrite_constructors,
    rewrite_findviewbyid,
    strip_generated,
)
from bridgeflow.interfaces import map_webviews

from conftest import app, load


def _generate(p, webview="WebView"):
    wmap = map_webviews(p)
    return generate_babelview(p, webview, wmap.entries[webview])


def _method(bv, name):
    return next(m for m in bv.class_def.methods if m.name == name)


def test_imei_attacker_has_two_branches():
    bv = _generate(load("imei_order"))
    body = _method(bv, "attacker").body
    calls = [i for i in body if isinstance(i, Invoke)]
    names = [c.target.name for c in calls]
    assert names == ["getId", "leak", "initialize"]
    # one ifnd exits the loop, one chooses between the two branches
    assert sum(isinstance(i, IfNondet) for i in body) == 2
    assert not any(c.target.name == "taintSource" for c in calls)


def test_branch_count_and_sources():
    text = app("""class One {
  @JavascriptInterface
  method a(x: String, y: int) : void {
    return;
  }

  @JavascriptInterface
  method b() : String {
    s = "b";
    return s;
  }
}

class Two {
  @JavascriptInterface
  method c(z: String) : int {
    r = 1;
    return r;
  }
}

class Main extends Activity {
  method onCreate() : void {
    w = new WebView;
    kcall WebView.<init>/2(w, this);
    o = new One;
    t = new Two;
    n = "x";
    vcall WebView.addJavascriptInterface/3(w, o, n);
    vcall WebView.addJavascriptInterface/3(w, t, n);
    return;
  }
}
""")
    bv = _generate(parse_program(text))
    body = _method(bv, "attacker").body
    calls = [i for i in body if isinstance(i, Invoke)]
    iface = [c for c in calls if c.target.name in ("a", "b", "c")]
    assert len(iface) == 3
    for c in iface:
        assert len(c.args) == c.target.arity
    assert sum(c.target.name == "taintSource" for c in calls) == 3
    assert sum(c.target.name == "leak" for c in calls) == 2


def test_render_parse_round_trip():
    p = load("framework_bridge")
    wmap = map_webviews(p)
    out, gen = instrument(p, wmap)
    for webview, bv in gen.items():
        assert bv.name == webview + "$BabelView" == babelview_name(webview)
        text = render_airtext(bv)
        assert text.startswith(f"class {webview}$BabelView extends {webview}")
        again = parse_program(serialize(out))
        assert again.classes[bv.name] == bv.class_def


def test_load_url_override():
    bv = _generate(load("imei_order"))
    m = _method(bv, "loadUrl")
    calls = [i for i in m.body if isinstance(i, Invoke)]
    assert calls[0].kind == "special"
    assert calls[0].target == Sig("WebView", "loadUrl", 2)
    assert calls[1].kind == "virtual"
    assert calls[1].target == bv.attacker_sig
    assert {s.name for s in bv.load_sigs()} == {
        "loadUrl", "postUrl", "loadData", "loadDataWithBaseURL"}


def test_unknown_webview():
    with pytest.raises(AirError):
        generate_babelview(load("imei_order"), "Nope", {"DeviceBridge"})


MYVIEW = """class MyWebView extends WebView {
  method <init>() : void {
    c = new Context;
    kcall WebView.<init>/2(this, c);
    return;
  }
}

class Bridge {
  @JavascriptInterface
  method hi() : int {
    r = 1;
    return r;
  }
}

class Main extends Activity {
  method onCreate() : void {
%s    b = new Bridge;
    n = "x";
    vcall WebView.addJavascriptInterface/3(x, b, n);
    return;
  }
}
"""


def test_constructor_rewrite():
    one = "    x = new MyWebView;\n    kcall MyWebView.<init>/1(x);\n"
    p = parse_program(app(MYVIEW % one))
    out, _ = instrument(p, map_webviews(p))
    body = out.resolve(Sig("Main", "onCreate", 1)).body
    assert body[0] == New("x", "MyWebView$BabelView", line=body[0].line)
    assert body[1].target == Sig("MyWebView$BabelView", "<init>", 1)
    assert body[1].args == ("x",)


def test_two_constructions_both_rewritten():
    two = ("    x = new MyWebView;\n    kcall MyWebView.<init>/1(x);\n"
           "    y = new MyWebView;\n    kcall MyWebView.<init>/1(y);\n")
    p = parse_program(app(MYVIEW % two))
    wmap = map_webviews(p)
    out, _ = instrument(p, wmap)
    before = p.resolve(Sig("Main", "onCreate", 1)).body
    after = out.resolve(Sig("Main", "onCreate", 1)).body
    assert len(before) == len(after)
    assert sum(a != b for a, b in zip(before, after)) == 4


def test_no_webviews_no_change():
    p = load("no_interface")
    out, gen = instrument(p, map_webviews(p))
    assert gen == {}
    assert out.classes == p.classes
    assert rewrite_constructors(p, {}).classes == p.classes


def test_findviewbyid_rewrite():
    p = load("findviewbyid")
    out, _ = instrument(p, map_webviews(p))
    body = out.resolve(Sig("StoreActivity", "onCreate", 1)).body
    assert not any(isinstance(i, Cast) and i.type == "WebView" for i in body)
    news = [i for i in body if isinstance(i, New) and i.dst == "w"]
    assert [n.type for n in news] == ["WebView$BabelView"]
    ctor = next(i for i in body if isinstance(i, Invoke) and i.args[:1] == ("w",)
                and i.target.name == "<init>")
    assert ctor.target.cls == "WebView$BabelView"
    assert strip_generated(out).classes.keys() == p.classes.keys()


BUTTON = """class Main extends Activity {
  method onCreate() : void {
    id = 3;
    v = vcall Activity.findViewById/2(this, id);
    %s
    return;
  }
}
"""


def test_findviewbyid_button_untouched():
    p = parse_program(app(BUTTON % "b = cast Button v;"))
    out = rewrite_findviewbyid(p, {"WebView": "WebView$BabelView"})
    assert out.classes == p.classes


def test_findviewbyid_uncast_lint(caplog):
    p = parse_program(app(BUTTON % "vcall View.setVisibility/2(v, id);"))
    with caplog.at_level(logging.WARNING):
        out = rewrite_findviewbyid(p, {"WebView": "WebView$BabelView"})
    assert out.classes == p.classes
    assert "lint" in caplog.text
