import numpy as np
import pytest

from nakamoto_mfg.dynamics import ModelConfig
from nakamoto_mfg.mean_field import MeanField, initial_estimate
from nakamoto_mfg.policy import LocalPolicy, all_policies


def random_mean_field(cfg, rng):
    base = initial_estimate(cfg)
    rows = [rng.dirichlet(np.ones(len(r))) for r in base.rows]
    return MeanField(cfg.max_blocks, rows, cfg.convention)


def random_policy(max_blocks, rng):
    from nakamoto_mfg.graphs import enumerate_classes
    return LocalPolicy(max_blocks, tuple(int(rng.choice(g.orbit_reps))
                                         for g in enumerate_classes(max_blocks)))


@pytest.fixture
def cfg4():
    return ModelConfig(max_blocks=4)
