import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"

sys.path.insert(0, str(ROOT / "src"))

from nl2sell.catalog import load_catalog          # noqa: E402
from nl2sell.prompts import load_instructions     # noqa: E402
from nl2sell.retrieval import HashEmbedder, load_library  # noqa: E402
from nl2sell.targeting import load_user_db        # noqa: E402


@pytest.fixture(scope="session")
def catalog():
    return load_catalog(FIXTURES / "catalog.json")


@pytest.fixture(scope="session")
def library():
    return load_library(FIXTURES / "library.jsonl")


@pytest.fixture(scope="session")
def user_db(catalog):
    return load_user_db(FIXTURES / "users.jsonl", catalog)


@pytest.fixture(scope="session")
def embedder():
    return HashEmbedder()


@pytest.fixture(scope="session")
def instructions():
    return load_instructions()


@pytest.fixture(scope="session")
def fixtures_dir():
    return FIXTURES


@pytest.fixture(scope="session")
def golden_dir():
    return GOLDEN
