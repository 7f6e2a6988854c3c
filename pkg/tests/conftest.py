import os
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

import krignet as kn
from krignet.surrogate import DataGenConfig, TrainConfig, load_bank, save_bank, train_bank

DESK_BANK_SEED = 7


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240801)


@pytest.fixture(scope="session")
def small_graph():
    """500 uniform sites, m=10."""
    r = np.random.default_rng(11)
    coords = r.uniform(0, 1, (500, 2))
    locs = kn.LocationSet(coords, (0.0, 0.0, 1.0))
    return kn.build_graph(locs, 10)


@pytest.fixture(scope="session")
def desk_bank(tmp_path_factory):
    """The desk-scale trained bank (criterion-4 configuration).

    Training takes several minutes; set KRIGNET_TEST_BANK to a bank file to
    reuse one across pytest runs during development. The acceptance test
    that depends on training time reads .training_seconds.
    """
    cache = os.environ.get("KRIGNET_TEST_BANK")
    if cache and Path(cache).exists():
        bank = load_bank(cache, expect_m=30)
        bank.meta["training_seconds"] = float(
            bank.meta.get("training_seconds", 0.0)
        )
        return bank
    t0 = time.perf_counter()
    bank = train_bank(
        DataGenConfig(n_fields=20, n_range=(1500, 3000), m=30, thetas_per_field=4),
        TrainConfig(epochs=5),
        seed=DESK_BANK_SEED,
    )
    bank.meta["training_seconds"] = time.perf_counter() - t0
    if cache:
        save_bank(bank, cache)
    return bank
