import pytest

from bridgeflow.fixtures import fixture_names, labels, pair_allowed

from conftest import analysis


def test_labels_cover_all_fixtures():
    assert sorted(labels()) == fixture_names()
    assert len(fixture_names()) >= 12


@pytest.mark.parametrize("name", fixture_names())
def test_alarm_counts_match_labels(name):
    a = analysis(name)
    counts = {}
    for al in a.report.alarms:
        counts[al.category.value] = counts.get(al.category.value, 0) + 1
    assert counts == labels()[name]["alarms"]
    assert a.exit_code == labels()[name]["exit_code"]


@pytest.mark.parametrize("name", fixture_names())
def test_no_impossible_pairs(name):
    bad = [p for p in analysis(name).taint.pairs()
           if not pair_allowed(p, labels()[name]["impossible"])]
    assert bad == []


def test_pair_allowed_wildcards():
    assert not pair_allowed(("a", "b"), [["*", "b"]])
    assert not pair_allowed(("a", "b"), [["a", "*"]])
    assert pair_allowed(("a", "b"), [["a", "c"]])
