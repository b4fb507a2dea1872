import numpy as np
import pytest

from daepca import _kernels
from daepca.dataio import FaultSpec, SynthConfig, synthesize


@pytest.fixture(scope="session", autouse=True)
def _warm_jit():
    # compile (or load from cache) the inference kernels once so the
    # first timing-sensitive test does not pay for it
    _kernels.warmup()


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def small_dataset():
    """A quick synthetic dataset shared by fitting tests."""
    cfg = SynthConfig(latent_dim=3, observed_dim=8, n_train=240, n_val=60,
                      n_test=160, noise_std=0.1, ar_coeff=0.8, seed=42)
    faults = [FaultSpec(kind="step", magnitude=1.0, onset=40, sensors=(0, 3))]
    return synthesize(cfg, faults)
