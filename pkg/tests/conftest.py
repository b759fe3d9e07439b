import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from schemafirst.listings import listing_root, listing_schema, listing_sources
from schemafirst.registry import SchemaStore

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

DATA = Path(__file__).parent / "data"


@pytest.fixture
def store(tmp_path):
    return SchemaStore(tmp_path / "store")


def publish(store, name, author="tests"):
    main, includes = listing_sources(name)
    return store.actualize(listing_root(name), main, author, includes=includes)


@pytest.fixture
def counter_v1():
    return listing_schema("request_counter_v1")


@pytest.fixture
def counter_v2():
    return listing_schema("request_counter")


@pytest.fixture
def rpc_schema():
    return listing_schema("rpc")


# -- acceptance report ----------------------------------------------------------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
