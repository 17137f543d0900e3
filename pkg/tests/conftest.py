import numpy as np
import pytest
from hypothesis import settings, strategies as st

from multiphase.hilbert import random_state

settings.register_profile("default", max_examples=50, deadline=None)
settings.load_profile("default")

seeds = st.integers(min_value=0, max_value=2**32 - 1)
phases = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False, allow_infinity=False)


@st.composite
def fock_states(draw, min_modes=2, max_modes=5, max_photons=4):
    rng = np.random.default_rng(draw(seeds))
    M = draw(st.integers(min_value=min_modes, max_value=max_modes))
    return random_state(rng, M, max_photons)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report(request):
    """Record one pass/fail line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def _report(criterion: int, passed: bool, detail: str) -> None:
        line = f"criterion {criterion}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        lines.append(line)

    return _report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines):
            terminalreporter.write_line(line)
