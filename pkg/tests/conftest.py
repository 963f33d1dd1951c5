import json
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def lexical_corpus():
    from capeval import load_dataset
    from capeval.corpus import DatasetName

    return load_dataset(FIXTURES / "lexical_corpus.jsonl", DatasetName.CUSTOM)


@pytest.fixture(scope="session")
def lexical_expected():
    return json.loads((FIXTURES / "lexical_expected.json").read_text())
