"""Shared fixtures: a small deterministic corpus and a desk-size Gabor bank.

The corpus is generated once per session; tests that mutate files copy what
they need into their own tmp_path.
"""

import numpy as np
import pytest

from leggm.evaluation import load_manifest
from leggm.gabor import GaborParams, build_bank
from leggm.synth import synth_dataset

CORPUS_CLASSES = 6
CORPUS_PER_CLASS = 3
CORPUS_SEED = 4242


@pytest.fixture(scope="session")
def corpus_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("corpus")
    synth_dataset(CORPUS_CLASSES, CORPUS_PER_CLASS, CORPUS_SEED, out)
    return out


@pytest.fixture(scope="session")
def corpus_manifest(corpus_dir):
    return load_manifest(corpus_dir / "manifest.csv")


@pytest.fixture(scope="session")
def small_bank():
    """16x16 bank: full parameter family on a grid small enough for oracles."""
    return build_bank(GaborParams(grid_w=16, grid_h=16))


@pytest.fixture()
def rng():
    return np.random.default_rng(20240811)
