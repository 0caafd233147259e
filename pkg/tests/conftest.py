import numpy as np
import pytest

from spectralmatch.imageio import ImageRaster


def raster(values):
    return ImageRaster(np.asarray(values, dtype=np.uint8))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
