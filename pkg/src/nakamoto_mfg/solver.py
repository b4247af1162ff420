"""Best responses of the representative agent and the equilibrium search.

The RA solves the fully observable MDP over game states; its local policy is
read off the states in which every block has been received and none is owned.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import spsolve

from .dynamics import MarkovChain, ModelConfig, build_chain, kernel_tables
from .graphs import HARD_CAP, catalog
from .mean_field import MeanField, fixed_point
from .policy import LocalPolicy, lcr, read_policy, write_policy  # noqa: F401  (re-exported)
from .states import DEFAULT_CONVENTION
from .stationary import stationary_distribution

BELLMAN_TOL = 1e-9
TIE_TOL = 1e-9
MAX_OUTER = 50


class PolicyCycleError(RuntimeError):
    def __init__(self, message, trace):
        super().__init__(message)
        self.trace = trace


@dataclass
class FullPolicy:
    actions: np.ndarray  # per state: chosen block, -1 when the local graph is null


@dataclass
class ValueFunction:
    values: np.ndarray
    q: np.ndarray  # per state-action pair
    residual: float


def _greedy(q: np.ndarray, starts: np.ndarray, tie_tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-state max and the first pair (lowest block) within tie_tol of it."""
    best = np.maximum.reduceat(q, starts)
    counts = np.diff(np.append(starts, q.size))
    owner = np.repeat(np.arange(starts.size), counts)
    idx = np.where(q >= best[owner] - tie_tol, np.arange(q.size), q.size)
    return best, np.minimum.reduceat(idx, starts)


def bellman_solve(chain: MarkovChain, tol: float = BELLMAN_TOL,
                  tie_tol: float = TIE_TOL) -> tuple[ValueFunction, FullPolicy]:
    """Optimal values by policy iteration, polished with Bellman sweeps until the
    residual is below ``tol``; greedy actions break ties toward the lowest block."""
    t = chain.tables
    gamma = chain.cfg.gamma
    P, R = chain.P_sa, chain.reward_sa
    starts = t.sa_start[:-1]
    n = t.n_states
    eye = sp.identity(n, format="csc")
    pick = starts.copy()
    V = np.zeros(n)
    for _ in range(200):
        V = spsolve((eye - gamma * P[pick]).tocsc(), R[pick])
        q = R + gamma * (P @ V)
        best, first = _greedy(q, starts, 0.0)
        improve = best > q[pick] + 1e-12
        if not improve.any():
            break
        pick = np.where(improve, first, pick)
    residual = np.inf
    for _ in range(100000):
        q = R + gamma * (P @ V)
        new = np.maximum.reduceat(q, starts)
        residual = float(np.abs(new - V).max())
        V = new
        if residual < tol:
            break
    q = R + gamma * (P @ V)
    _, choice = _greedy(q, starts, tie_tol)
    return ValueFunction(V, q, residual), FullPolicy(t.sa_action[choice].copy())


def value_iteration(nra_policy: LocalPolicy, mu: MeanField, cfg: ModelConfig):
    """RA best response to NRAs playing ``nra_policy`` under mean field ``mu``."""
    return bellman_solve(build_chain(None, nra_policy, mu, cfg))


def extract_local_policy(full: FullPolicy, max_blocks: int,
                         convention: str = DEFAULT_CONVENTION,
                         values: ValueFunction | None = None,
                         incumbent: LocalPolicy | None = None,
                         tie_tol: float = TIE_TOL) -> LocalPolicy:
    """Local policy read off the full-information states.

    Given ``values`` and an ``incumbent``, a class keeps the incumbent's choice
    whenever it is within ``tie_tol`` of the best action there.
    """
    t = kernel_tables(max_blocks, convention)
    choices = []
    for g in t.space.graphs:
        s = t.space.full_information_state(g).id
        choice = int(full.actions[s])
        if values is not None and incumbent is not None:
            lo, hi = t.sa_start[s], t.sa_start[s + 1]
            keep = t.sa_lookup[s, incumbent(g) + 1]
            if values.q[keep] >= values.q[lo:hi].max() - tie_tol:
                choice = incumbent(g)
        choices.append(choice)
    return LocalPolicy(max_blocks, tuple(choices))


@dataclass
class BestResponseResult:
    policy: LocalPolicy
    trace: list = field(default_factory=list)  # policies visited, starting point first
    residuals: list = field(default_factory=list)

    @property
    def outer_iterations(self) -> int:
        return len(self.trace)


TIE_RULES = ("incumbent", "lowest")


def best_response_iteration(initial: LocalPolicy, cfg: ModelConfig, solve_ra: bool = True,
                            max_iter: int = MAX_OUTER,
                            tie_rule: str = "incumbent") -> BestResponseResult:
    """Repeat: mean field for the current policy, RA best response, extraction;
    stop when the extracted policy equals the current one.

    ``tie_rule`` decides exact ties at extraction: "incumbent" keeps the current
    choice when it is still optimal, "lowest" always takes the lowest block.
    """
    if tie_rule not in TIE_RULES:
        raise ValueError(f"tie_rule must be one of {TIE_RULES}")
    current = initial
    result = BestResponseResult(initial, [initial])
    seen = {initial.choices}
    for _ in range(max_iter):
        mu, chain, diag = fixed_point(current, cfg, solve_ra=solve_ra)
        result.residuals.append(diag.residuals)
        values, full = bellman_solve(build_chain(None, current, mu, cfg))
        nxt = extract_local_policy(full, cfg.max_blocks, cfg.convention, values,
                                   current if tie_rule == "incumbent" else None)
        if nxt == current:
            result.policy = current
            return result
        if nxt.choices in seen:
            result.trace.append(nxt)
            raise PolicyCycleError(f"best response revisits {nxt.code()}", result.trace)
        seen.add(nxt.choices)
        result.trace.append(nxt)
        current = nxt
    raise PolicyCycleError(f"no convergence after {max_iter} outer iterations", result.trace)


@dataclass
class EquilibriumCheck:
    is_equilibrium: bool
    gap: float
    mu: MeanField
    chain: MarkovChain  # every agent, RA included, on the candidate policy
    stationary: np.ndarray
    values: ValueFunction


def equilibrium_check(candidate: LocalPolicy, cfg: ModelConfig, tie_tol: float = TIE_TOL,
                      solve_ra: bool = False) -> EquilibriumCheck:
    mu, chain, diag = fixed_point(candidate, cfg, solve_ra=solve_ra)
    if solve_ra:
        chain = build_chain(None, candidate, mu, cfg)
        v = stationary_distribution(chain)
    else:
        v = diag.stationary
    values, _ = bellman_solve(chain, tie_tol=tie_tol)
    t = chain.tables
    gap = 0.0
    for g in t.space.graphs:
        s = t.space.full_information_state(g).id
        lo, hi = t.sa_start[s], t.sa_start[s + 1]
        mine = t.sa_lookup[s, candidate(g) + 1]
        gap = max(gap, float(values.q[lo:hi].max() - values.q[mine]))
    return EquilibriumCheck(gap <= tie_tol, gap, mu, chain, v, values)


def is_equilibrium(candidate: LocalPolicy, cfg: ModelConfig, tie_tol: float = TIE_TOL,
                   solve_ra: bool = False) -> tuple[bool, float]:
    check = equilibrium_check(candidate, cfg, tie_tol, solve_ra)
    return check.is_equilibrium, check.gap


def lcr_policy(cfg: ModelConfig) -> LocalPolicy:
    return lcr(cfg.max_blocks)


def local_classes(max_blocks: int):
    return [g for g in catalog(HARD_CAP).classes if g.size <= max_blocks]
