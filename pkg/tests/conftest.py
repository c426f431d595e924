import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
SRC = ROOT / "src"
FIXTURES = ROOT / "fixtures"

if str(SRC) not in sys.path:
    sys.path.insert(0, str(SRC))

from model_file import load_model  # noqa: E402


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def rts_model():
    return load_model(FIXTURES / "rts_demo.json")


@pytest.fixture(scope="session")
def esfas_model():
    return load_model(FIXTURES / "esfas_demo.json")


@pytest.fixture(scope="session")
def bp_model():
    return load_model(FIXTURES / "bp_ccf_case.json")


@pytest.fixture(scope="session")
def bahamas_model():
    return load_model("bahamas_demo")


@pytest.fixture(scope="session")
def toy_model():
    return load_model(FIXTURES / "toy_pwr.json")


@pytest.fixture(scope="session")
def toy_improved_model():
    return load_model(FIXTURES / "toy_pwr_improved.json")
