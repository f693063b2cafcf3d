"""Shared fixtures. The full scenario catalog is simulated once per session
and shared between the tests that inspect traces."""

from __future__ import annotations

import pytest

from dsdm import default_full_config, prototype_config
from dsdm.scenarios import catalog, run_checks


@pytest.fixture(scope="session")
def cfg():
    return prototype_config()


@pytest.fixture(scope="session")
def full_config():
    return default_full_config()


@pytest.fixture(scope="session")
def catalog_results():
    """name -> (RunResult, [CheckResult]) for every built-in scenario."""
    return {name: run_checks(s) for name, s in catalog().items()}
