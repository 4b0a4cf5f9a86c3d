import numpy as np
import pytest
import torch

from triseg.phantom import PhantomConfig, generate_phantom, phantom_seed


@pytest.fixture(scope="session", autouse=True)
def _single_thread():
    # keeps CPU reductions ordered the same way on every run
    torch.set_num_threads(1)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_pairs():
    """Four 32-cube phantoms shared by the fast tests."""
    config = PhantomConfig(dims=(32, 32, 32))
    return [generate_phantom(config, seed=phantom_seed(0, i)) for i in range(4)]
