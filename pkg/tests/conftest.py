import numpy as np
import pytest

from filmnorm import Image


@pytest.fixture
def rng():
    return np.random.default_rng(20260814)


def random_image(rng, height=16, width=16, low=0.0, high=255.0):
    return Image(rng.uniform(low, high, size=(height, width, 3)))


def random_mask_array(rng, height=16, width=16, p=0.3):
    # guarantee both regions are populated
    fg = rng.random((height, width)) < p
    fg[0, 0] = True
    fg[-1, -1] = False
    return fg
