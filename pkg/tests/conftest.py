from __future__ import annotations

import os
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from hybridseal.kem import HybridKEM
from hybridseal.sign import HybridSign

GOLDEN = Path(__file__).parent / "golden"
sys.path.insert(0, str(GOLDEN))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


@pytest.fixture(scope="session")
def kem():
    return HybridKEM()


@pytest.fixture(scope="session")
def signer():
    return HybridSign()


@pytest.fixture(scope="session")
def kem_kp(kem):
    return kem.generate_keypair()


@pytest.fixture(scope="session")
def sig_kp(signer):
    return signer.generate_keypair()


@pytest.fixture
def golden():
    return GOLDEN


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
