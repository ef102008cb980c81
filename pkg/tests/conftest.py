import os
from pathlib import Path

import pytest

from nish_lab.data import ensure_dataset_files, synthesize_digits, write_idx


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory):
    """Small digit corpus for fast harness tests."""
    d = tmp_path_factory.mktemp("corpus")
    images, labels = synthesize_digits(1500, seed=99)
    write_idx(images, labels,
              d / "synthetic-images-idx3-ubyte",
              d / "synthetic-labels-idx1-ubyte")
    return d


@pytest.fixture(scope="session")
def full_data_dir(tmp_path_factory):
    """Full desk-scale corpus: real MNIST if NISH_LAB_DATA points at the
    IDX files, otherwise the default synthetic stand-in."""
    env = os.environ.get("NISH_LAB_DATA")
    if env:
        p = Path(env)
        if (p / "train-images-idx3-ubyte").exists() or \
                (p / "train-images-idx3-ubyte.gz").exists():
            return p
    d = tmp_path_factory.mktemp("full_corpus")
    ensure_dataset_files(d)
    return d
