import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=25, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_OUTCOMES = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[_OUTCOMES] = {}


@pytest.fixture
def criterion(request):
    """``record(number, ok, detail)``: log one acceptance check, then assert it."""
    outcomes = request.config.stash[_OUTCOMES]

    def record(number, ok, detail=""):
        ok = bool(ok)
        prev = outcomes.get(number)
        details = ([prev[1]] if prev and prev[1] else []) + ([detail] if detail else [])
        outcomes[number] = ((prev[0] if prev else True) and ok, "; ".join(details))
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    outcomes = config.stash.get(_OUTCOMES, {})
    if not outcomes:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(outcomes):
        ok, detail = outcomes[number]
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
