from pathlib import Path

import pytest

from ltpo import build_toy_lm

DATA_DIR = Path(__file__).parent / "data"
REPO_DATA_DIR = Path(__file__).parent.parent / "data"


@pytest.fixture(scope="session")
def toy32():
    """The standard desk-scale model: seed 42, |V|=32, d=16, 2 layers."""
    return build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)


@pytest.fixture(scope="session")
def data_dir():
    return DATA_DIR


@pytest.fixture(scope="session")
def repo_data_dir():
    return REPO_DATA_DIR


def pytest_runtest_logreport(report):
    # one visible pass/fail line per acceptance criterion
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[{outcome}] {name}", flush=True)
