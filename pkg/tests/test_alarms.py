import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bridgeflow.air import Manifest, Sig
from bridgeflow.alarms import (
    Alarm,
    AlarmCategory as C,
    AlarmReport,
    aggregate_corpus,
    classify,
    emit_report,
    load_report,
    pair_category,
    phi_matrix,
)
from bridgeflow.callgraph import CallSite
from bridgeflow.taint import ATTACKER_LABEL, EXFIL_LABEL, Flow

from conftest import analysis

SITE = CallSite(Sig("A", "m", 1), 0)


def _report(app, *cats):
    return AlarmReport(app, [Alarm(C(c), {"n": i}) for i, c in enumerate(cats)])


def test_imei_leak_category():
    assert pair_category("TM-device-id", EXFIL_LABEL) is C.TMLeaks
    assert pair_category(ATTACKER_LABEL, "load-url") is C.FrameConfusion
    assert pair_category("GPS-location", EXFIL_LABEL, via_prefs=True) is C.PrefGPSLeaks


def test_no_flows_no_alarms():
    assert classify([]) == []


def test_api_rule_needs_interfaces():
    from bridgeflow.interfaces import WebviewInterfaceMap

    wm = WebviewInterfaceMap({"WebView": frozenset({"B"})})
    assert [a.category for a in classify([], manifest=Manifest(16), wmap=wm)] == [C.ApiPriorTo17]
    assert classify([], manifest=Manifest(17), wmap=wm) == []
    assert classify([], manifest=Manifest(16), wmap=WebviewInterfaceMap()) == []


def test_background_flow_kept():
    f = Flow("TM-device-id", SITE, "send-sms", CallSite(Sig("A", "m", 1), 3))
    [a] = classify([f])
    assert a.category is C.Uncategorized and a.confidence == "low"
    assert a.evidence["background"] is True


def test_totality_on_fixtures():
    for name in ("swingaid", "media_sms", "reflection", "file_bridge", "background_tracker"):
        a = analysis(name)
        pairs = {(f.source, f.sink) for f in a.taint.flows}
        paired = {(p.put.source, p.put.sink) for p in a.pref_leaks} | {
            (p.get.source, p.get.sink) for p in a.pref_leaks}
        assert len(a.report.alarms) >= len(pairs - paired)


def test_imei_report():
    r = analysis("imei_order").report
    assert [a.category for a in r.alarms] == [C.TMLeaks]
    assert r.alarms[0].evidence["attribution"] == "getId"


def test_empty_report_shape():
    d = json.loads(emit_report(AlarmReport("x")))
    assert d["app"] == "x" and d["alarms"] == [] and d["schema_version"] == 1


@pytest.mark.parametrize("name", ["swingaid", "reflection", "ad_library"])
def test_report_round_trip(name):
    text = emit_report(analysis(name).report)
    assert emit_report(load_report(text)) == text


def test_schema_checked():
    with pytest.raises(ValueError):
        load_report(json.dumps({"schema_version": 99}))


def test_phi_plus_minus_one():
    reports = [_report("a", "OpenFile", "WriteFile"), _report("b", "OpenFile", "WriteFile"),
               _report("c", "GPSLeaks"), _report("d", "GPSLeaks")]
    s = aggregate_corpus(reports)
    assert s.corr(C.OpenFile, C.WriteFile) == pytest.approx(1.0, abs=1e-9)
    assert s.corr(C.OpenFile, C.GPSLeaks) == pytest.approx(-1.0, abs=1e-9)
    assert s.counts["OpenFile"] == 2 and s.counts["TMLeaks"] == 0


def test_no_variance_is_null():
    s = aggregate_corpus([_report("a", "OpenFile", "WriteFile"),
                          _report("b", "OpenFile", "WriteFile")])
    assert s.corr("OpenFile", "WriteFile") is None
    k = s.categories.index("OpenFile")
    assert s.as_dict()["correlation"][k][s.categories.index("WriteFile")] is None


def test_empty_corpus_rejected():
    with pytest.raises(ValueError):
        aggregate_corpus([])


def test_table_lists_categories():
    t = aggregate_corpus([_report("a", "TMLeaks")]).table()
    assert "TMLeaks" in t and t.rstrip().endswith("1")


_ind = st.integers(2, 8).flatmap(
    lambda n: st.lists(st.lists(st.booleans(), min_size=4, max_size=4), min_size=n, max_size=n))


@settings(max_examples=60, deadline=None)
@given(_ind)
def test_phi_matches_numpy(rows):
    x = np.array(rows, dtype=float)
    m = phi_matrix(x)
    assert np.allclose(m, m.T, equal_nan=True)
    ref = np.corrcoef(x, rowvar=False) if x.std(axis=0).all() else None
    for i in range(4):
        for j in range(4):
            if x[:, i].std() == 0 or x[:, j].std() == 0:
                assert math.isnan(m[i, j])
            else:
                a, b = x[:, i] - x[:, i].mean(), x[:, j] - x[:, j].mean()
                r = (a @ b) / math.sqrt((a @ a) * (b @ b))
                assert m[i, j] == pytest.approx(r, abs=1e-9)
                assert -1.0 <= m[i, j] <= 1.0
    if ref is not None:
        assert np.allclose(m, ref)


@settings(max_examples=30, deadline=None)
@given(st.permutations(["a", "b", "c", "d"]))
def test_order_independent(order):
    cats = {"a": ("OpenFile",), "b": ("OpenFile", "TMLeaks"), "c": ("TMLeaks",), "d": ()}
    s1 = aggregate_corpus([_report(k, *cats[k]) for k in "abcd"])
    s2 = aggregate_corpus([_report(k, *cats[k]) for k in order])
    assert json.dumps(s1.as_dict()) == json.dumps(s2.as_dict())
