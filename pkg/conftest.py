import pytest
from click.testing import CliRunner
from fastapi.testclient import TestClient

from app.main import app
from app.omega_sets import evens, odds


@pytest.fixture
def runner():
    return CliRunner(mix_stderr=False)


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def evens_set():
    return evens()


@pytest.fixture
def odds_set():
    return odds()


@pytest.fixture
def evens_file(tmp_path):
    path = tmp_path / "evens.json"
    path.write_text('{"kind": "progression", "start": 0, "step": 2}')
    return str(path)
