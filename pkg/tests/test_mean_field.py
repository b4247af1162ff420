import numpy as np
import pytest

from nakamoto_mfg.dynamics import ModelConfig
from nakamoto_mfg.graphs import class_by_name
from nakamoto_mfg.mean_field import (IterationLimitError, fixed_point, initial_estimate,
                                     local_graph_distribution, membership_bounds)
from nakamoto_mfg.policy import always_root, lcr
from nakamoto_mfg.states import CONVENTIONS
from nakamoto_mfg.timing import reception_cdf


def test_initial_estimate_single_block():
    cfg = ModelConfig(max_blocks=4)
    w = reception_cdf(cfg.timing, 1)
    assert np.allclose(initial_estimate(cfg).rows[0], [1 - w, w])


@pytest.mark.parametrize("conv", sorted(CONVENTIONS))
def test_rows_normalized(conv):
    mu = initial_estimate(ModelConfig(max_blocks=5, convention=conv))
    assert all(abs(r.sum() - 1.0) < 1e-12 and r.min() >= 0 for r in mu.rows)


def test_membership_bounds_order():
    cfg = ModelConfig()
    g = class_by_name("g_4.(2.1,1)")
    for x in range(g.size):
        lo, hi = membership_bounds(cfg, g, x)
        assert 0 < lo <= hi <= 1


@pytest.mark.parametrize("conv", sorted(CONVENTIONS))
@pytest.mark.parametrize("policy", [lcr(4), always_root(4)], ids=["lcr", "root"])
def test_fixed_point_converges_and_is_idempotent(conv, policy):
    cfg = ModelConfig(max_blocks=4, convention=conv)
    mu, chain, diag = fixed_point(policy, cfg, solve_ra=False)
    assert diag.residuals[-1] < 1e-8
    again, _, diag2 = fixed_point(policy, cfg, solve_ra=False, mu0=mu)
    assert again.distance(mu) < 1e-7
    assert len(diag2.residuals) <= 2


def test_iteration_limit():
    cfg = ModelConfig(max_blocks=4)
    with pytest.raises(IterationLimitError) as info:
        fixed_point(lcr(4), cfg, solve_ra=False, max_iter=1, tol=0.0)
    assert len(info.value.residuals) == 1


@pytest.mark.parametrize("conv", ["labeled", "orbit"])
def test_received_marginal_above_lower_bound(conv):
    # a block with d descendants has been out for at least d + 1 block steps
    cfg = ModelConfig(max_blocks=4, convention=conv)
    mu, chain, diag = fixed_point(lcr(4), cfg, solve_ra=False)
    v, t = diag.stationary, chain.tables
    for g in t.space.graphs:
        idx = np.flatnonzero(t.graph_of == g.id)
        tot = v[idx].sum()
        if tot <= 0:
            continue
        for x in range(g.size):
            orbit = [y for y in range(g.size) if g.orbits[y] == g.orbits[x]]
            got = sum(v[i] * np.mean([t.space[i].status[y] != 0 for y in orbit]) for i in idx) / tot
            assert got >= membership_bounds(cfg, g, x)[0] - 1e-12


def test_local_distribution_is_fixed_point_output():
    cfg = ModelConfig(max_blocks=4)
    mu, chain, diag = fixed_point(lcr(4), cfg, solve_ra=False)
    again = local_graph_distribution(chain, diag.stationary)
    assert again.distance(mu) < 1e-8
