import os
import sys

import numpy as np
import pytest

# Make the package importable without installing it
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), "..")))

from pkdmamba.data import synthetic_blobs  # noqa: E402
from pkdmamba.models import StudentConfig  # noqa: E402
from pkdmamba.tensor import set_default_dtype  # noqa: E402


@pytest.fixture(autouse=True)
def _float64_and_single_worker(monkeypatch):
    set_default_dtype(np.float64)
    monkeypatch.setenv("PKD_WORKERS", "1")
    yield
    set_default_dtype(np.float64)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def tiny_shape():
    """2-class 4x4 grayscale images cut into four 2x2 patches."""
    return dict(patch_size=2, conv_width=2, n_classes=2, channels=1, height=4, width=4)


@pytest.fixture
def tiny_cfg(tiny_shape):
    return StudentConfig(n_blocks=1, state_dim=4, name="tiny", **tiny_shape)


@pytest.fixture
def tiny_data():
    return synthetic_blobs(n_per_class=10, n_classes=2, image_size=4, seed=3)
