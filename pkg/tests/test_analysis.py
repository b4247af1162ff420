from types import SimpleNamespace

import numpy as np
import pytest

from nakamoto_mfg.analysis import (ExhaustiveResult, PolicyReport, UndefinedEfficiencyError,
                                   attach_basins, basin_frequencies, default_deltas, delay_sweep,
                                   exhaustive_search, policy_efficiency, pow_efficiency,
                                   theoretical_efficiency)
from nakamoto_mfg.dynamics import ModelConfig
from nakamoto_mfg.policy import all_policies, always_root, lcr, policy_count


def test_undefined_efficiency():
    chain = SimpleNamespace(removed=np.zeros(3), critical=np.zeros(3))
    with pytest.raises(UndefinedEfficiencyError):
        pow_efficiency(chain, np.array([0.2, 0.3, 0.5]))


def test_efficiency_of_synthetic_chain():
    chain = SimpleNamespace(removed=np.array([0.0, 2.0]), critical=np.array([0.0, 1.0]))
    assert pow_efficiency(chain, np.array([0.5, 0.5])) == 0.5


def test_always_root_finalizes_nothing():
    eff, *_ = policy_efficiency(always_root(4), ModelConfig(max_blocks=4), solve_ra=False)
    assert eff == 0.0


def test_near_synchronous_lcr_is_efficient():
    eff, *_ = policy_efficiency(lcr(4), ModelConfig(max_blocks=4, delta=0.999), solve_ra=False)
    assert eff == pytest.approx(1.0, abs=1e-9)


def test_theoretical_efficiency():
    assert theoretical_efficiency(0.001, 0.01, 0.9) == pytest.approx(1 / 1.23)


def test_delay_sweep_rows_and_monotonicity():
    cfg = ModelConfig(max_blocks=4)
    deltas = default_deltas(cfg.alpha)[:4]
    rows = delay_sweep(cfg, deltas, solve_ra=False)
    assert len(rows) == 3 * len(deltas)
    measured = [r.measured for r in rows if r.rho == 0.5]
    assert all(b > a for a, b in zip(measured, measured[1:]))
    assert all(0 < m < 1 for m in measured)
    assert all(r.error == "" for r in rows)


def test_delay_sweep_records_failures():
    rows = delay_sweep(ModelConfig(max_blocks=4), [0.01], rhos=(0.5,), policy=lcr(5))
    assert np.isnan(rows[0].measured) and "ValueError" in rows[0].error


def test_exhaustive_small():
    cfg = ModelConfig(max_blocks=3)
    a = exhaustive_search(cfg, threads=1)
    b = exhaustive_search(cfg, threads=2)
    assert len(a.reports) == policy_count(3) == 12
    assert [(r.policy, r.is_equilibrium, r.efficiency) for r in a.reports] == \
           [(r.policy, r.is_equilibrium, r.efficiency) for r in b.reports]
    assert a.best.policy == lcr(3).code()
    assert a.lcr_uniquely_best
    assert a.uniqueness_gap > 0.1


def test_exhaustive_refuses_large():
    with pytest.raises(ValueError, match="165,888,000"):
        exhaustive_search(ModelConfig(max_blocks=5))


def test_basins_partition_starts():
    cfg = ModelConfig(max_blocks=3)
    basins = basin_frequencies(cfg, threads=1)
    assert basins.total == policy_count(3)
    assert set(basins.origin) | set(basins.failures) == {p.code() for p in all_policies(3)}
    res = attach_basins(exhaustive_search(cfg, threads=1), basins)
    assert sum(r.basin_count for r in res.reports) == sum(basins.counts.values())


def test_tied_best_is_not_unique():
    reports = [PolicyReport("a", True, 0.0, 0.9), PolicyReport("b", True, 0.0, 0.9),
               PolicyReport("c", False, 0.1, 0.95)]
    res = ExhaustiveResult(reports, "a")
    assert len(res.best_efficiency_ties) == 2
    assert not res.lcr_uniquely_best
    assert res.uniqueness_gap == 0.0
