import numpy as np
import pytest

from pvpc.model import PlenopticPointCloud


def random_cloud(rng, n, views=2, extent=64, geom_bit_depth=10, attr_bit_depth=8):
    """Random cloud with ``n`` distinct points inside ``[0, extent)^3``."""
    flat = rng.choice(extent ** 3, size=n, replace=False)
    pos = np.stack(np.unravel_index(flat, (extent,) * 3), axis=1)
    colors = rng.integers(0, 1 << attr_bit_depth, (n, views, 3))
    return PlenopticPointCloud(pos, colors, geom_bit_depth, attr_bit_depth)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
