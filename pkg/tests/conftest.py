import numpy as np
import pytest

from ccma.assembly import CANONICAL_NAMES, initial_assembly, resolve_scene

_ASSEMBLED = {}
ACCEPTANCE_LINES = []


def assembled(name):
    """(model, s0, u0) for a canonical scene, built once per session."""
    if name not in _ASSEMBLED:
        model = resolve_scene(name)
        s0, u0 = initial_assembly(model)
        _ASSEMBLED[name] = (model, s0, u0)
    return _ASSEMBLED[name]


@pytest.fixture(params=CANONICAL_NAMES)
def scene(request):
    return assembled(request.param)


@pytest.fixture
def reduced():
    return assembled("ccma-4dof-reduced")


@pytest.fixture
def complete():
    return assembled("ccma-4dof-complete")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for the end-of-run acceptance summary."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
