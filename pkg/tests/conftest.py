from functools import lru_cache

import pytest

from bridgeflow.air import parse_program
from bridgeflow.fixtures import fixture_text
from bridgeflow.pipeline import analyze_program


@lru_cache(maxsize=None)
def load(name):
    return parse_program(fixture_text(name))


@lru_cache(maxsize=None)
def analysis(name):
    return analyze_program(load(name), name)


@pytest.fixture
def program():
    return load


@pytest.fixture
def analyzed():
    return analysis


def app(body: str, api: int = 23, entries=("Main.onCreate/1",)) -> str:
    """Wrap class text in a manifest."""
    ents = "".join(f"  entry {e};\n" for e in entries)
    return f"manifest {{\n  target_api = {api};\n{ents}}}\n\n{body}"
