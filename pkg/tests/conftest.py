import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import camdebias as cd


@pytest.fixture(scope="session")
def default_synthetic():
    """Default biased config, seed 7: (EmbeddingSet, SyntheticGroundTruth)."""
    return cd.generate(cd.SyntheticConfig())


@pytest.fixture(scope="session")
def noiseless_synthetic():
    return cd.generate(cd.SyntheticConfig(noise_scale=0.0))


@pytest.fixture
def tiny_set():
    feats = np.array([[1.0, 0.0], [0.0, 1.0], [3.0, 4.0], [1.0, 1.0]],
                     dtype=np.float32)
    return cd.EmbeddingSet(feats,
                           camera_labels=np.array([0, 0, 1, 1]),
                           identity_labels=np.array([0, 1, 0, 1]),
                           group_labels={"angle": np.array([0, 1, 1, 0])})
