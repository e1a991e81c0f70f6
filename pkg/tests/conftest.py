import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nlroth.grid import DenseFunction, GridWindow, SetIndicator  # noqa: E402


def philox(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(seed))


def random_set(rng, n1, n2, delta) -> SetIndicator:
    return SetIndicator.from_mask(rng.random((n1, n2)) < delta)


def random_bounded(rng, box) -> DenseFunction:
    x_lo, x_hi, y_lo, y_hi = box
    shape = (x_hi - x_lo + 1, y_hi - y_lo + 1)
    r = np.sqrt(rng.random(shape))
    return DenseFunction(x_lo, y_lo, r * np.exp(2j * np.pi * rng.random(shape)), bounded=True)


def full(n1, n2) -> SetIndicator:
    return SetIndicator.full(GridWindow(n1, n2))


@pytest.fixture
def rng():
    return philox(20240601)
