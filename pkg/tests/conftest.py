from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ofdmjcs.params import SystemConfig

settings.register_profile("repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("repo")


@pytest.fixture(scope="session")
def cfg() -> SystemConfig:
    return SystemConfig()


@pytest.fixture(scope="session")
def small_cfg() -> SystemConfig:
    # 16 subcarriers, 8 symbols; Tcp chosen so that Ncp = 4 at B = 16 MHz
    return SystemConfig(Nc=16, Nsym=8, B=16e6, fc=5e9, Tcp=0.25e-6)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one ``PASS``/``FAIL`` line for an acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        lines.append((number, f"criterion {number}: {'PASS' if ok else 'FAIL'} ({detail})"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
