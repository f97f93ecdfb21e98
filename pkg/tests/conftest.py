import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

ROOT = Path(__file__).resolve().parents[1]
CORPUS_FILE = ROOT / "data" / "vlsp2013_clauses.txt"


@pytest.fixture(scope="session")
def corpus_lines():
    if not CORPUS_FILE.exists():
        pytest.skip("corpus missing; run scripts/fetch_corpus.py")
    from vndiac.corpus import read_lines

    return read_lines(CORPUS_FILE)


@pytest.fixture(scope="session")
def desk_split(corpus_lines):
    from vndiac.corpus import SplitSpec, build_parallel, split_corpus

    return split_corpus(build_parallel(corpus_lines), SplitSpec())


@pytest.fixture(scope="session")
def desk_models(desk_split):
    from vndiac.lm import train_lm
    from vndiac.phrase_model import train_phrase_table

    train = desk_split[0]
    return train_phrase_table(train, 4), train_lm(train.targets, 3)
