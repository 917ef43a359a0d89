import numpy as np
import pytest

from pmx.scene import SceneConfig, generate_split


@pytest.fixture(scope="session")
def small_split():
    """16 training scenes at the default 64x64, shared across tests."""
    return generate_split(seed=7, count=16, cfg=SceneConfig())


@pytest.fixture(scope="session")
def tiny_split():
    """16x16 scenes keep graph-heavy tests fast."""
    cfg = SceneConfig(size=16)
    return generate_split(seed=5, count=8, cfg=cfg), cfg


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
