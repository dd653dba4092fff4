import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
sys.path.insert(0, str(TESTS_DIR))

FIXTURES = TESTS_DIR.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


def load_fixture(name: str):
    from chronoscope.lang.parser import parse_program

    return parse_program((FIXTURES / name).read_text(), name)


@pytest.fixture
def fact_iter():
    return load_fixture("fact_iter.tvm")


@pytest.fixture
def fact_rec():
    return load_fixture("fact_rec.tvm")


@pytest.fixture
def long_loop():
    return load_fixture("long_loop.tvm")


@pytest.fixture
def list_growth():
    return load_fixture("list_growth.tvm")
