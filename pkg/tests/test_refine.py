import pytest

from bridgeflow.alarms import AlarmCategory as C
from bridgeflow.interfaces import InterfaceMethod
from bridgeflow.air import Sig
from bridgeflow.refine import (
    UNKNOWN,
    flag_suspicious_interface_names,
    is_suspicious,
    resolve_intent_action,
)
from bridgeflow.strings import UNRESOLVED
from bridgeflow.taint import default_config

from conftest import analysis


def test_login_pwd_pairing():
    a = analysis("swingaid")
    assert len(a.pref_leaks) == 1
    pl = a.pref_leaks[0]
    assert (pl.key, pl.value_type, pl.suspicious) == ("loginPwd", "String", True)


@pytest.mark.parametrize("name", ["swingaid_key_mismatch", "swingaid_type_mismatch"])
def test_mismatch_no_pairing(name):
    assert analysis(name).pref_leaks == []


def test_key_report():
    assert analysis("swingaid").report.preference_keys == [("loginPwd", True)]


@pytest.mark.parametrize("key,flag", [("loginPwd", True), ("favorites", False),
                                      ("compression", False), ("authToken", True)])
def test_suspicious_keys(key, flag):
    assert is_suspicious(key, default_config().suspicious_keys) is flag


def test_unresolved_key_listed():
    # the key-mismatch variant builds one key from an untracked value
    keys = dict(analysis("get_property").report.preference_keys)
    assert all(isinstance(k, str) for k in keys)
    assert UNRESOLVED == "<unresolved>"


def _im(name):
    return InterfaceMethod("B", Sig("B", name, 1), (), "String")


def test_suspicious_method_names():
    got = flag_suspicious_interface_names(
        [_im("getUserPwd"), _im("bar"), _im("getPhoneNumber")], default_config())
    assert [m.name for m in got] == ["getPhoneNumber", "getUserPwd"]


def test_intent_call_constant():
    a = analysis("intent_call")
    assert [i.action for i in a.intents] == ["android.intent.action.CALL"]
    assert a.report.count(C.CallViaIntent) == 1


def test_intent_tainted_action_unknown():
    a = analysis("intent_tainted_action")
    assert {i.action for i in a.intents} == {UNKNOWN}
    assert a.report.count(C.UnknownIntent) == 1


def test_tainted_package_start_app():
    a = analysis("ad_library")
    assert a.intents and all(i.target_tainted for i in a.intents)
    assert a.report.count(C.StartApp) == 1


def test_zero_arg_intent_unknown():
    from bridgeflow.air import parse_program
    from bridgeflow.pipeline import analyze_program
    from conftest import app

    text = app("""class Nav {
  field ctx : Context;

  method <init>(c: Context) : void {
    kcall Object.<init>/1(this);
    put this.ctx = c;
    return;
  }

  @JavascriptInterface
  method go(x: String) : void {
    i = new Intent;
    kcall Intent.<init>/1(i);
    k = "extra";
    vcall Intent.putExtra/3(i, k, x);
    c = get this.ctx;
    vcall Context.startActivity/2(c, i);
    return;
  }
}

class Main extends Activity {
  method onCreate() : void {
    w = new WebView;
    kcall WebView.<init>/2(w, this);
    o = new Nav;
    kcall Nav.<init>/2(o, this);
    n = "N";
    vcall WebView.addJavascriptInterface/3(w, o, n);
    u = "https://nav.example/";
    vcall WebView.loadUrl/2(w, u);
    return;
  }
}
""")
    a = analyze_program(parse_program(text), "nav")
    assert [i.action for i in a.intents] == [UNKNOWN]
    assert a.report.count(C.UnknownIntent) == 1


def test_malformed_witness():
    import dataclasses

    from bridgeflow.callgraph import CallSite

    a = analysis("intent_call")
    f = a.intents[0].flow
    bad = dataclasses.replace(f, sink_site=CallSite(f.sink_site.caller, 10_000))
    with pytest.raises(ValueError):
        resolve_intent_action(bad, a.taint.program, None, a.taint.pts)
