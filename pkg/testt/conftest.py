import os
import sys

import numpy as np
import pytest
import torch

ROOT_DIR = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
sys.path.insert(0, ROOT_DIR)

from irstd import tensor_core as tc  # noqa: E402


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: synthetic end-to-end solver runs (tens of seconds)")


@pytest.fixture
def gen():
    return torch.Generator().manual_seed(1234)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def randn(gen):
    def make(*shape):
        return torch.randn(*shape, generator=gen, dtype=tc.DTYPE)
    return make


@pytest.fixture
def pgm_file(tmp_path):
    """Write raw bytes to a .pgm file and return its path."""
    def make(data: bytes, name: str = "img.pgm"):
        path = tmp_path / name
        path.write_bytes(data)
        return path
    return make
