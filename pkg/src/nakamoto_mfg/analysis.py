"""Steady-state metrics and the reproduction experiments built on them.

PoW efficiency is the stationary rate of blocks finalized on the critical
path divided by the stationary rate of blocks permanently removed (pruned
away or discarded by a reset).
"""

from __future__ import annotations

import os
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .dynamics import ModelConfig
from .graphs import catalog, HARD_CAP
from .mean_field import fixed_point
from .policy import LocalPolicy, all_policies, lcr, policy_count
from .simulation import OracleReport, monte_carlo_oracle  # noqa: F401  (re-exported)
from .solver import TIE_TOL, PolicyCycleError, best_response_iteration, equilibrium_check
from .stationary import stationary_distribution  # noqa: F401  (re-exported)
from .timing import delay_steps

RHO_GRID = (0.5, 0.9, 0.99)
EXHAUSTIVE_MAX_BLOCKS = 4


class UndefinedEfficiencyError(ArithmeticError):
    """No blocks are ever removed in the recurrent class."""


def pow_efficiency(chain, v: np.ndarray) -> float:
    removed = float(v @ chain.removed)
    if removed <= 0.0:
        raise UndefinedEfficiencyError("zero removal rate: efficiency is undefined")
    return float(v @ chain.critical) / removed


def finalization_rate(chain, v: np.ndarray) -> float:
    """Critical-path blocks finalized per block step."""
    return float(v @ chain.critical)


def policy_efficiency(policy: LocalPolicy, cfg: ModelConfig, solve_ra: bool = True):
    """(efficiency, mean field, chain, diagnostics) at the policy's mean-field fixed point."""
    mu, chain, diag = fixed_point(policy, cfg, solve_ra=solve_ra)
    return pow_efficiency(chain, diag.stationary), mu, chain, diag


# --------------------------------------------------------------------------
# delay sweep


@dataclass
class EfficiencyReport:
    delta: float
    rho: float
    delay_steps: int
    theoretical: float
    measured: float
    error: str = ""

    @property
    def abs_error(self) -> float:
        return abs(self.measured - self.theoretical)

    @property
    def rel_error(self) -> float:
        return self.abs_error / self.theoretical


def theoretical_efficiency(alpha: float, delta: float, rho: float) -> float:
    return 1.0 / (1.0 + alpha * delay_steps(delta, rho))


def delay_sweep(cfg: ModelConfig, deltas, rhos=RHO_GRID, policy: LocalPolicy | None = None,
                solve_ra: bool = True) -> list[EfficiencyReport]:
    """One row per (delta, rho); a failed solve leaves ``measured`` as NaN and
    records the error, and the sweep carries on."""
    policy = policy or lcr(cfg.max_blocks)
    rows = []
    for d in deltas:
        try:
            measured, err = policy_efficiency(policy, replace(cfg, delta=d), solve_ra)[0], ""
        except Exception as e:  # reported per row
            measured, err = float("nan"), f"{type(e).__name__}: {e}"
        for rho in rhos:
            rows.append(EfficiencyReport(d, rho, delay_steps(d, rho),
                                         theoretical_efficiency(cfg.alpha, d, rho), measured, err))
    return rows


def default_deltas(alpha: float) -> list[float]:
    """Eight propagation rates spanning delta/alpha from 4 to 50."""
    return [alpha * r for r in (4, 5, 7, 10, 14, 20, 30, 50)]


# --------------------------------------------------------------------------
# exhaustive search and basins


@dataclass
class PolicyReport:
    policy: str
    is_equilibrium: bool | None
    gap: float
    efficiency: float
    basin_count: int = 0
    error: str = ""


@dataclass
class ExhaustiveResult:
    reports: list
    lcr_code: str

    @property
    def equilibria(self) -> list[PolicyReport]:
        return [r for r in self.reports if r.is_equilibrium]

    def ranked(self) -> list[PolicyReport]:
        eq = [r for r in self.equilibria if np.isfinite(r.efficiency)]
        return sorted(eq, key=lambda r: -r.efficiency)

    @property
    def best(self) -> PolicyReport | None:
        ranked = self.ranked()
        return ranked[0] if ranked else None

    @property
    def best_efficiency_ties(self) -> list[PolicyReport]:
        """Equilibria whose efficiency equals the best one within 1e-12."""
        ranked = self.ranked()
        if not ranked:
            return []
        return [r for r in ranked if r.efficiency >= ranked[0].efficiency - 1e-12]

    @property
    def lcr_uniquely_best(self) -> bool:
        ties = self.best_efficiency_ties
        return len(ties) == 1 and ties[0].policy == self.lcr_code

    @property
    def uniqueness_gap(self) -> float:
        """Best equilibrium efficiency minus the best one among the rest."""
        ranked = self.ranked()
        if len(ranked) < 2:
            return float("nan")
        return ranked[0].efficiency - ranked[1].efficiency


def _check_one(args) -> PolicyReport:
    code, cfg, tie_tol, solve_ra = args
    try:
        pol = LocalPolicy.from_code(code, cfg.max_blocks)
        check = equilibrium_check(pol, cfg, tie_tol=tie_tol, solve_ra=solve_ra)
        try:
            eff = pow_efficiency(check.chain, check.stationary)
        except ArithmeticError:
            eff = float("nan")
        return PolicyReport(code, check.is_equilibrium, check.gap, eff)
    except Exception as e:  # recorded, the search carries on
        return PolicyReport(code, None, float("nan"), float("nan"), error=f"{type(e).__name__}: {e}")


def _basin_one(args):
    code, cfg, solve_ra, tie_rule = args
    try:
        res = best_response_iteration(LocalPolicy.from_code(code, cfg.max_blocks), cfg,
                                      solve_ra=solve_ra, tie_rule=tie_rule)
        return code, res.policy.code(), ""
    except PolicyCycleError as e:
        return code, None, f"cycle: {e}"
    except Exception as e:
        return code, None, f"{type(e).__name__}: {e}"


def _pmap(fn, tasks, threads: int | None):
    threads = threads or os.cpu_count() or 1
    if threads <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (8 * threads))))


def _require_small(cfg: ModelConfig):
    if cfg.max_blocks > EXHAUSTIVE_MAX_BLOCKS:
        raise ValueError(f"exhaustive runs are limited to max_blocks <= {EXHAUSTIVE_MAX_BLOCKS}; "
                         f"max_blocks={cfg.max_blocks} has {policy_count(cfg.max_blocks):,} policies")


def exhaustive_search(cfg: ModelConfig, tie_tol: float = TIE_TOL, solve_ra: bool = False,
                      threads: int | None = None) -> ExhaustiveResult:
    """Equilibrium test and stationary efficiency for every deterministic local policy."""
    _require_small(cfg)
    tasks = [(p.code(), cfg, tie_tol, solve_ra) for p in all_policies(cfg.max_blocks)]
    return ExhaustiveResult(_pmap(_check_one, tasks, threads), lcr(cfg.max_blocks).code())


@dataclass
class BasinResult:
    counts: Counter                                   # final policy code -> number of starts
    failures: dict = field(default_factory=dict)      # start code -> reason
    origin: dict = field(default_factory=dict)        # start code -> final code

    @property
    def total(self) -> int:
        return sum(self.counts.values()) + len(self.failures)


def basin_frequencies(cfg: ModelConfig, threads: int | None = None, solve_ra: bool = True,
                      tie_rule: str = "incumbent") -> BasinResult:
    """Run best-response iteration from every policy and count where each start ends."""
    _require_small(cfg)
    tasks = [(p.code(), cfg, solve_ra, tie_rule) for p in all_policies(cfg.max_blocks)]
    out = BasinResult(Counter())
    for start, end, err in _pmap(_basin_one, tasks, threads):
        if end is None:
            out.failures[start] = err
        else:
            out.counts[end] += 1
            out.origin[start] = end
    return out


def attach_basins(result: ExhaustiveResult, basins: BasinResult) -> ExhaustiveResult:
    for r in result.reports:
        r.basin_count = basins.counts.get(r.policy, 0)
    return result


# --------------------------------------------------------------------------
# Monte Carlo comparison


@dataclass
class OracleComparison:
    efficiency_chain: float
    efficiency_sim: float
    efficiency_z: float
    worst_cell_z: float
    worst_cell: tuple            # (graph name, candidate index, simulated, predicted, se)
    cells_checked: int
    unmatched_graphs: list       # visited by the simulation, never by the chain
    z_limit: float

    @property
    def passed(self) -> bool:
        return abs(self.efficiency_z) <= self.z_limit and self.worst_cell_z <= self.z_limit


def _z(diff: float, se: float, floor: float) -> float:
    scale = max(se, floor)
    return abs(diff) / scale if scale > 0 else (0.0 if diff == 0 else np.inf)


def compare_oracle(cfg: ModelConfig, policy: LocalPolicy, report: OracleReport,
                   z_limit: float = 4.0) -> OracleComparison:
    """Standardized distances between a simulation and the symmetric chain.

    Each standard error is floored at the estimator's resolution, one agent
    observation over the samples taken, so cells that the simulation cannot
    resolve are not scored as infinitely far off.
    """
    eff, mu, chain, diag = policy_efficiency(policy, cfg, solve_ra=False)
    v = diag.stationary
    t = chain.tables
    mass = np.bincount(t.graph_of, weights=v, minlength=t.n_graphs)
    removed_total = report.block_steps * max(float(v @ chain.removed), 1e-300)
    ez = _z(report.efficiency - eff, report.efficiency_se, 1.0 / removed_total)
    cat = catalog(HARD_CAP)
    worst, worst_cell, checked, unmatched = 0.0, (), 0, []
    for gid, (est, se) in sorted(report.local_freq.items()):
        if mass[gid] <= 0.0:
            unmatched.append(cat[gid].name)
            continue
        floor = 1.0 / (cfg.n_agents * report.graph_visits[gid])
        for c, (e, s) in enumerate(zip(est, se)):
            z = _z(e - mu.rows[gid][c], s, floor)
            checked += 1
            if z > worst or not worst_cell:
                worst, worst_cell = z, (cat[gid].name, c, float(e), float(mu.rows[gid][c]), float(s))
    return OracleComparison(eff, report.efficiency, ez, worst, worst_cell, checked, unmatched, z_limit)
