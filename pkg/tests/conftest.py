import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from colorbias.dataset import ImagePair  # noqa: E402


def uniform(h, w, color, dtype=np.uint8):
    return np.broadcast_to(np.asarray(color, dtype=dtype), (h, w, 3)).copy()


def pair_of(original, colorized, category="other", pair_id=0):
    return ImagePair(np.asarray(original), np.asarray(colorized), category, pair_id)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
