"""Acceptance criteria 1-10. Each test prints one PASS/FAIL line."""

import json
import math
import time

import numpy as np
import pytest

from bridgeflow.air import parse_program
from bridgeflow.alarms import Alarm, AlarmCategory as C, AlarmReport, aggregate_corpus
from bridgeflow.cli import main
from bridgeflow.fixtures import (
    blowup_program,
    fixture_dir,
    fixture_names,
    fixture_path,
    fixture_text,
    labels,
    pair_allowed,
)
from bridgeflow.instrument import instrument
from bridgeflow.interfaces import map_webviews
from bridgeflow.oracle import explore
from bridgeflow.pipeline import analyze_program, attacker_methods
from bridgeflow.refine import UNKNOWN
from bridgeflow.taint import default_config, flow_keys, run_taint

from conftest import analysis, load


@pytest.fixture
def verdict(capsys):
    lines = []

    def record(number, ok, detail=""):
        lines.append(f"ACCEPTANCE {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}".rstrip())
        with capsys.disabled():
            print("\n" + lines[-1])
        assert ok, lines[-1]

    return record


def test_criterion_01_interface_map(verdict):
    got = map_webviews(load("framework_bridge")).as_dict()
    want = {"MyWebView": ["FrameworkBridge", "MyBridge"], "WebView": ["FrameworkBridge", "MyBridge"]}
    verdict(1, got == want, f"map={got}")


def _timed(text, name):
    t0 = time.perf_counter()
    a = analyze_program(parse_program(text), name)
    return a, time.perf_counter() - t0


def test_criterion_02_ordering_leak(verdict):
    a, t1 = _timed(fixture_text("imei_order"), "imei_order")
    cats = [al.category for al in a.report.alarms]
    attr = [al.evidence.get("attribution") for al in a.report.alarms]
    b, t2 = _timed(fixture_text("imei_order_empty"), "imei_order_empty")
    ok = cats == [C.TMLeaks] and attr == ["getId"] and b.report.alarms == [] and max(t1, t2) < 1.0
    verdict(2, ok, f"alarms={[c.value for c in cats]} attribution={attr} "
                   f"emptied={len(b.report.alarms)} runtime={max(t1, t2):.3f}s")


def test_criterion_03_differential_soundness(verdict):
    names = fixture_names()
    missed = {}
    for name in names:
        p = load(name)
        a = analysis(name)
        engine = a.taint.pairs() | {(pl.put.source, pl.get.sink) for pl in a.pref_leaks}
        trace = explore(p, attacker_methods(p), 3)
        gap = trace.leaks - engine
        if gap:
            missed[name] = sorted(gap)
    verdict(3, len(names) >= 12 and not missed,
            f"apps={len(names)} missed_pairs={sum(map(len, missed.values()))} {missed or ''}")


def test_criterion_04_differential_precision(verdict):
    bad = {}
    for name in fixture_names():
        imp = labels()[name]["impossible"]
        wrong = sorted(p for p in analysis(name).taint.pairs() if not pair_allowed(p, imp))
        if wrong:
            bad[name] = wrong
    verdict(4, not bad, f"contradictions={sum(map(len, bad.values()))} {bad or ''}")


def test_criterion_05_semantics_preservation(verdict):
    cfg = default_config()
    diff = []
    for name in fixture_names():
        p = load(name)
        out, gen = instrument(p, map_webviews(p))
        raw = flow_keys(run_taint(p, cfg, attacker=False).flows)
        inst = flow_keys(run_taint(out, cfg.with_attacker(gen.values()), attacker=False).flows)
        if raw != inst:
            diff.append(name)
    verdict(5, not diff, f"apps={len(fixture_names())} differing={diff}")


def test_criterion_06_preference_refinement(verdict):
    leaks = analysis("swingaid").pref_leaks
    keys = [(pl.key, pl.suspicious) for pl in leaks]
    km = len(analysis("swingaid_key_mismatch").pref_leaks)
    tm = len(analysis("swingaid_type_mismatch").pref_leaks)
    verdict(6, keys == [("loginPwd", True)] and km == 0 and tm == 0,
            f"loginPwd={keys} key_mismatch={km} type_mismatch={tm}")


def test_criterion_07_intent_resolution(verdict):
    call = analysis("intent_call")
    actions = [i.action for i in call.intents]
    tainted = analysis("intent_tainted_action")
    correct = 0
    trio = ("intent_call", "intent_sendto", "intent_tainted_action")
    for name in trio:
        counts = {}
        for al in analysis(name).report.alarms:
            counts[al.category.value] = counts.get(al.category.value, 0) + 1
        correct += counts == labels()[name]["alarms"]
    ok = (
        actions == ["android.intent.action.CALL"]
        and call.report.count(C.CallViaIntent) == 1
        and {i.action for i in tainted.intents} == {UNKNOWN}
        and tainted.report.count(C.UnknownIntent) == 1
        and correct == len(trio)
    )
    verdict(7, ok, f"call_action={actions} labeled={correct}/{len(trio)}")


def test_criterion_08_api_rule(verdict):
    text = fixture_text("api16")
    a16 = analyze_program(parse_program(text), "api16")
    a17 = analyze_program(parse_program(text.replace("target_api = 16;", "target_api = 17;")), "api17")
    n16, n17 = a16.report.count(C.ApiPriorTo17), a17.report.count(C.ApiPriorTo17)
    verdict(8, n16 == 1 and n17 == 0 and len(a16.wmap.interface_classes()) == 1,
            f"api16={n16} api17={n17}")


def test_criterion_09_corpus_aggregation(verdict):
    # OpenFile=[1,1,0,0] WriteFile=[1,1,0,0] GPSLeaks=[0,0,1,1] TMLeaks=[1,0,0,0]
    apps = {
        "app1": ("OpenFile", "WriteFile", "TMLeaks"),
        "app2": ("OpenFile", "WriteFile"),
        "app3": ("GPSLeaks",),
        "app4": ("GPSLeaks",),
    }
    reports = [AlarmReport(a, [Alarm(C(c), {}) for c in cs]) for a, cs in apps.items()]
    s = aggregate_corpus(reports)
    # hand computed: sum of centred products over sqrt of the centred sums of squares
    expected = {
        ("OpenFile", "WriteFile"): 1.0,
        ("OpenFile", "GPSLeaks"): -1.0,
        ("WriteFile", "GPSLeaks"): -1.0,
        ("OpenFile", "TMLeaks"): 0.5 / math.sqrt(1.0 * 0.75),
        ("GPSLeaks", "TMLeaks"): -0.5 / math.sqrt(1.0 * 0.75),
    }
    err = max(abs(s.corr(a, b) - v) for (a, b), v in expected.items())
    m = s.matrix
    symmetric = bool(np.array_equal(np.isnan(m), np.isnan(m.T))
                     and np.allclose(np.nan_to_num(m), np.nan_to_num(m.T), atol=0))
    nulls = s.corr("OpenFile", "SQLiteQuery") is None
    verdict(9, err <= 1e-9 and symmetric and nulls and s.counts["GPSLeaks"] == 2,
            f"max_abs_err={err:.2e} symmetric={symmetric}")


def test_criterion_10_determinism_performance(verdict, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"swingaid{i}.json"
        main(["analyze", str(fixture_path("swingaid")), "--out", str(path)])
        outs.append(path.read_bytes())
    same = outs[0] == outs[1]

    t0 = time.perf_counter()
    corpus_code = main(["corpus", str(fixture_dir()), "--out", str(tmp_path / "summary.json")])
    corpus_secs = time.perf_counter() - t0
    summary = json.loads((tmp_path / "summary.json").read_text())

    blowup = tmp_path / "blowup.air"
    blowup.write_text(blowup_program())
    limit = 2.0
    t0 = time.perf_counter()
    code = main(["analyze", str(blowup), "--timeout-secs", str(limit),
                 "--out", str(tmp_path / "blowup.json")])
    blowup_secs = time.perf_counter() - t0
    status = json.loads((tmp_path / "blowup.json").read_text())["status"]

    ok = (same and corpus_secs < 60 and corpus_code != 2 and not summary["failed"]
          and code == 2 and status == "timeout" and blowup_secs < limit + 10)
    verdict(10, ok, f"byte_identical={same} corpus={len(summary['apps'])} apps in "
                    f"{corpus_secs:.1f}s timeout_exit={code} after {blowup_secs:.1f}s")
