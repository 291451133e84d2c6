from __future__ import annotations

import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("ci", max_examples=200, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

CIRCUITS = Path(__file__).resolve().parents[1] / "circuits"
ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config: pytest.Config) -> None:
    config.stash[ACCEPTANCE] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config: pytest.Config) -> None:
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def circuits_dir() -> Path:
    return CIRCUITS


@pytest.fixture
def report(request, capsys):
    """``report(n, ok, detail)`` prints one verdict line per acceptance criterion."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:>2} {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[ACCEPTANCE].append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok

    return record


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def _random_tmn(rng: np.random.Generator, n: int, n_anc: int, m: int, m_anc: int):
    """Populate only slots touching the visible corner, with angles away from the grid."""
    from lov.synthesis import TriangleParams

    t = TriangleParams.zeros(n + n_anc)
    theta = {k: float(rng.uniform(0.2, 1.3)) for k in t.theta if k[0] <= m and k[1] <= n}
    phi = {k: float(rng.uniform(0.1, 6.1)) for k in t.phi if k[0] <= m and k[1] <= n}
    return t.with_angles(theta, phi)


@pytest.fixture
def random_tmn():
    return _random_tmn
