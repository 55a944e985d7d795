import pytest
from fastapi.testclient import TestClient

from ltpo.model import build_toy_lm
from ltpo_server.app import create_app
from ltpo_server.client import RemoteModel


@pytest.fixture(scope="session")
def toy32():
    return build_toy_lm(seed=42, vocab_size=32, hidden_dim=16, layers=2)


@pytest.fixture(scope="session")
def app(toy32):
    return create_app(toy32)


@pytest.fixture(scope="session")
def http(app):
    with TestClient(app) as client:
        yield client


@pytest.fixture()
def remote(app):
    return RemoteModel("http://testserver", client=TestClient(app))


def pytest_runtest_logreport(report):
    if report.when == "call" and "test_acceptance" in report.nodeid:
        outcome = "PASS" if report.passed else "FAIL"
        name = report.nodeid.split("::")[-1]
        print(f"\n[{outcome}] {name}", flush=True)
