import numpy as np
import pytest

from splicegan.genome import GenomeLayout
from splicegan.nets import ImageBatch, NetConfig, init_models


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_layout():
    return GenomeLayout(piece_sizes=(2, 3), z_size=4)


@pytest.fixture
def tiny_net_cfg():
    # Small stacks keep graph tests fast; shapes stay representative.
    return NetConfig(image_shape=(1, 16, 16), enc_hidden=(32, 16),
                     dec_hidden=(16, 32), disc_hidden=(16,))


@pytest.fixture
def tiny_models(tiny_net_cfg):
    layout = GenomeLayout(piece_sizes=(4, 4), z_size=8)
    gen = np.random.Generator(np.random.Philox(key=42))
    return init_models(tiny_net_cfg, layout, gen)


@pytest.fixture
def image_batch(rng):
    return ImageBatch(rng.random((5, 1, 16, 16), dtype=np.float32))
