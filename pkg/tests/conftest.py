import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from bhdimer.model import DimerParams, PhasePoint, coherent_state
from bhdimer.spectra import diagonalize

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

# N = 40, J = 10/s, Lambda = 5: the reference self-trapping configuration
FIG_N, FIG_J, FIG_U = 40, 10.0, 100.0 / 39.0


@pytest.fixture(scope="session")
def ref_params():
    return DimerParams(FIG_N, FIG_J, FIG_U)


@pytest.fixture(scope="session")
def ref_eig(ref_params):
    return diagonalize(ref_params)


@pytest.fixture(scope="session")
def ref_state(ref_params):
    return coherent_state(ref_params, PhasePoint(0.95, math.pi))


def random_state(n_atoms, rng):
    amps = rng.normal(size=n_atoms + 1) + 1j * rng.normal(size=n_atoms + 1)
    return amps / np.linalg.norm(amps)


# ---------------------------------------------------------------- acceptance summary

ACCEPTANCE_RESULTS: dict = {}


def record_check(criterion: int, name: str, passed: bool, detail: str = "") -> bool:
    ACCEPTANCE_RESULTS.setdefault(criterion, []).append((name, bool(passed), detail))
    print(f"criterion {criterion} / {name}: {'PASS' if passed else 'FAIL'} {detail}")
    return bool(passed)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for crit in range(1, 12):
        checks = ACCEPTANCE_RESULTS.get(crit)
        if not checks:
            tr.write_line(f"criterion {crit:2d}: NOT RUN")
            continue
        ok = all(p for _, p, _ in checks)
        failed = [n for n, p, _ in checks if not p]
        tail = f" (failed: {', '.join(failed)})" if failed else ""
        tr.write_line(f"criterion {crit:2d}: {'PASS' if ok else 'FAIL'} [{len(checks)} checks]{tail}")
