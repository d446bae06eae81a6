from bridgeflow.air import Sig
from bridgeflow.fixtures import blowup_program
from bridgeflow.air import parse_program
from bridgeflow.oracle import enumerate_sequences, explore, interpret
from bridgeflow.pipeline import attacker_methods
from bridgeflow.taint import EXFIL_LABEL

from conftest import load

INIT = Sig("DeviceBridge", "initialize", 1)
GET = Sig("DeviceBridge", "getId", 1)
LEAK = ("TM-device-id", EXFIL_LABEL)


def _by_name(program):
    return {m.name: m for m in attacker_methods(program)}


def test_initialize_then_get_leaks():
    p = load("imei_order")
    ms = _by_name(p)
    t = interpret(p, [ms["initialize"], ms["getId"]])
    assert LEAK in t.leaks
    assert ("WebView", "DeviceBridge") in t.registrations


def test_get_alone_does_not_leak():
    p = load("imei_order")
    ms = _by_name(p)
    assert interpret(p, [ms["getId"]]).leaks == set()
    assert interpret(p, [ms["getId"], ms["initialize"]]).leaks == set()


def test_empty_sequence():
    assert interpret(load("imei_order"), []).leaks == set()


def test_signatures_accepted():
    p = load("imei_order")
    assert LEAK in interpret(p, [INIT, GET]).leaks


def test_enumerate_counts():
    assert enumerate_sequences(["a", "b"], 1) == [[], ["a"], ["b"]]
    assert len(enumerate_sequences(["a", "b"], 2)) == 7
    assert enumerate_sequences([], 3) == [[]]


def test_explore_unions():
    p = load("imei_order")
    t = explore(p, attacker_methods(p), 2)
    assert t.leaks == {LEAK}
    assert (Sig("MainActivity", "onCreate", 1), Sig("WebView", "addJavascriptInterface", 3)) \
        in t.call_edges


def test_budget_marks_partial():
    p = parse_program(blowup_program(6))
    t = interpret(p, attacker_methods(p)[:3], max_steps=200)
    assert t.partial


def test_deterministic():
    p = load("swingaid")
    ms = attacker_methods(p)
    assert interpret(p, ms[:2]).as_dict() == interpret(p, ms[:2]).as_dict()
