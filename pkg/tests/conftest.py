import os

import numpy as np
import pytest

from bpensemble.channel import make_rng
from bpensemble.codes import KNOWN_CODES, ParityCheckMatrix, load_alist

DATA_DIR = os.path.join(os.path.dirname(__file__), "..", "src", "bpensemble", "data")
ARTIFACT_DIR = os.path.join(os.path.dirname(__file__), "..", "artifacts")

ALIST_FILES = {
    "CR-BCH(63,36)": "bch_63_36.alist",
    "CR-BCH(63,45)": "bch_63_45.alist",
    "Hamming(7,4)": "hamming_7_4.alist",
}


def alist_path(code_id: str) -> str:
    return os.path.join(DATA_DIR, ALIST_FILES[code_id])


@pytest.fixture(scope="session")
def bch_63_36():
    return KNOWN_CODES["CR-BCH(63,36)"], load_alist(alist_path("CR-BCH(63,36)"))


@pytest.fixture(scope="session")
def bch_63_45():
    return KNOWN_CODES["CR-BCH(63,45)"], load_alist(alist_path("CR-BCH(63,45)"))


@pytest.fixture(scope="session")
def hamming_7_4():
    return KNOWN_CODES["Hamming(7,4)"], load_alist(alist_path("Hamming(7,4)"))


@pytest.fixture
def rng():
    return make_rng(20260809)


@pytest.fixture(scope="session")
def repetition_pcm():
    """Repetition code of length 5; complement-closed, used for symmetry checks."""
    n = 5
    h = np.zeros((n - 1, n), dtype=np.uint8)
    for i in range(n - 1):
        h[i, i] = 1
        h[i, i + 1] = 1
    return ParityCheckMatrix(h)
