import numpy as np
import pytest

from nakamoto_mfg.analysis import compare_oracle, policy_efficiency
from nakamoto_mfg.dynamics import ModelConfig
from nakamoto_mfg.policy import always_root, lcr
from nakamoto_mfg.simulation import monte_carlo_oracle


def test_instant_propagation_is_fully_efficient():
    cfg = ModelConfig(max_blocks=4, n_agents=50, delta=0.999999)
    rep = monte_carlo_oracle(cfg, lcr(4), block_steps=2000, seed=1, burn_in=100)
    assert rep.efficiency == 1.0
    assert rep.reset_rate == 0.0


def test_always_root_never_prunes():
    cfg = ModelConfig(max_blocks=4, n_agents=50)
    rep = monte_carlo_oracle(cfg, always_root(4), block_steps=2000, seed=1, burn_in=100)
    assert rep.prune_rate == 0.0 and rep.efficiency == 0.0
    # sizes 1, 2, 3, 4 then a reset step that appends nothing
    assert rep.reset_rate == pytest.approx(1 / 4)


def test_seeded_runs_repeat():
    cfg = ModelConfig(max_blocks=4, n_agents=100)
    a = monte_carlo_oracle(cfg, lcr(4), block_steps=3000, seed=7, burn_in=100)
    b = monte_carlo_oracle(cfg, lcr(4), block_steps=3000, seed=7, burn_in=100)
    assert a.rows() == b.rows()


@pytest.mark.parametrize("delivery", ["shared", "independent"])
def test_agent_mass_is_conserved(delivery):
    # every agent is counted in exactly one local-graph cell at every step
    cfg = ModelConfig(max_blocks=4, n_agents=100)
    rep = monte_carlo_oracle(cfg, lcr(4), block_steps=3000, seed=3, burn_in=100, delivery=delivery)
    for est, _ in rep.local_freq.values():
        assert abs(est.sum() - 1.0) < 1e-9
    assert rep.graph_visits.sum() == 3000


def test_rejects_bad_arguments():
    cfg = ModelConfig(max_blocks=4)
    with pytest.raises(ValueError):
        monte_carlo_oracle(cfg, lcr(5), block_steps=100)
    with pytest.raises(ValueError):
        monte_carlo_oracle(cfg, lcr(4), block_steps=100, delivery="bogus")
    with pytest.raises(ValueError):
        monte_carlo_oracle(cfg, lcr(4), block_steps=100, batches=1)


def test_compare_oracle_fields():
    cfg = ModelConfig(max_blocks=4, n_agents=100)
    rep = monte_carlo_oracle(cfg, lcr(4), block_steps=2000, seed=0, burn_in=100)
    cmp = compare_oracle(cfg, lcr(4), rep)
    assert cmp.cells_checked > 0
    assert np.isfinite(cmp.efficiency_z)
    assert cmp.efficiency_chain == policy_efficiency(lcr(4), cfg, solve_ra=False)[0]
