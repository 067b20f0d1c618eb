import random
import sys

import pytest

from lamassu import LayoutParams, MemoryStore, SecretKeyPair


def seeded_random(seed):
    """Deterministic byte source; test builds only."""
    rng = random.Random(seed)
    return rng.randbytes


@pytest.fixture
def keys():
    return SecretKeyPair(bytes(range(32)), bytes(range(32, 64)), zone_id=1)


@pytest.fixture
def other_keys():
    return SecretKeyPair(bytes(range(100, 132)), bytes(range(32, 64)), zone_id=2)


@pytest.fixture
def store():
    return MemoryStore()


@pytest.fixture(params=[1, 8], ids=["R1", "R8"])
def layout(request):
    return LayoutParams(4096, request.param)


@pytest.fixture
def rng():
    return random.Random(1234)


def pytest_terminal_summary(terminalreporter):
    mod = next((m for name, m in sys.modules.items() if name.endswith("test_acceptance")), None)
    lines = getattr(mod, "RESULTS", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
