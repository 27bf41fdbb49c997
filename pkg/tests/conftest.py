import random

import pytest

from piqlb.fixtures import fixture_ledger, fixture_schema


@pytest.fixture
def schema():
    return fixture_schema()


@pytest.fixture
def ledger():
    return fixture_ledger()


@pytest.fixture
def rng():
    return random.Random(0xC0FFEE)
