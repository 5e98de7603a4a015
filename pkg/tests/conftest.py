from __future__ import annotations

from importlib import resources
from pathlib import Path

import pytest

from mhqg.backends import StubBackend
from mhqg.corpus import load_table_corpus, load_text_pair_corpus


def fixture_path(name: str) -> Path:
    return Path(str(resources.files("mhqg.data.fixtures") / name))


@pytest.fixture(scope="session")
def tables_path() -> Path:
    return fixture_path("tables.json")


@pytest.fixture(scope="session")
def pairs_path() -> Path:
    return fixture_path("pairs.json")


@pytest.fixture(scope="session")
def table_contexts(tables_path):
    return load_table_corpus(tables_path)


@pytest.fixture(scope="session")
def passage_pairs(pairs_path):
    return load_text_pair_corpus(pairs_path)


@pytest.fixture()
def stub():
    return StubBackend(seed=0)


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        verdict = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\nACCEPTANCE {verdict}: {name}")
