"""Shared fixtures and the acceptance summary printed after the run."""

from __future__ import annotations

import numpy as np
import pytest

from graphbeam import NetworkParams, compute_spectrum

# (criterion, passed, detail) rows appended by test_acceptance.py
ACCEPTANCE_RESULTS: list = []


@pytest.fixture(scope="session")
def params() -> NetworkParams:
    return NetworkParams(gamma=1.0, alpha=1.0, beta=1.0)


@pytest.fixture(scope="session")
def conservative() -> NetworkParams:
    return NetworkParams(gamma=1.0, alpha=1.0, beta=0.0)


@pytest.fixture(scope="session")
def spectrum(params):
    return compute_spectrum(params, 12)


@pytest.fixture(scope="session")
def spectrum30(params):
    return compute_spectrum(params, 30)


@pytest.fixture(scope="session")
def spectrum_conservative(conservative):
    return compute_spectrum(conservative, 8)


@pytest.fixture(scope="session")
def acceptance_log() -> list:
    return ACCEPTANCE_RESULTS


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} criterion {crit}: {detail}")
