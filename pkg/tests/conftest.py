import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from transonic_cd.config import ProblemSpec  # noqa: E402
from transonic_cd.thermo import GasModel, reference_background  # noqa: E402

ROOT = Path(__file__).resolve().parents[1]
REFERENCE_CFG = ROOT / "configs" / "reference.cfg"


def golden_dir():
    """Golden fields differ in the last bits between kernel backends, so each has its own set."""
    from transonic_cd import kernels

    return Path(__file__).parent / "golden" / kernels.backend()


@pytest.fixture(scope="session")
def gas():
    return GasModel()


@pytest.fixture(scope="session")
def background():
    return reference_background()


@pytest.fixture
def reference_spec(gas, background):
    return ProblemSpec(gas, background)


@pytest.fixture(scope="session")
def coarse_background_solution():
    from transonic_cd.coupling import build_problem, solve_full

    spec = ProblemSpec(GasModel(), reference_background(), nx=33, ny_sub=17, ny_sup=17)
    return solve_full(build_problem(spec))


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def record():
    """Record one acceptance line and assert it; lines are echoed in the terminal summary."""

    def _record(criterion, ok, detail):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
        assert ok, f"{criterion}: {detail}"

    return _record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
