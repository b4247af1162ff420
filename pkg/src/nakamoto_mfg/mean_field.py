"""The mean field: per global graph class, the law of an NRA's local block graph.

Rows are indexed by :func:`graphs.root_connected_subgraphs` candidates, with
the null local graph at index 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import MarkovChain, ModelConfig, build_chain, kernel_tables
from .graphs import HARD_CAP, catalog, degree_counts
from .policy import LocalPolicy
from .states import DEFAULT_CONVENTION, get_convention
from .stationary import stationary_distribution
from .timing import reception_cdf

MAX_ITER = 200
TOL = 1e-8


class IterationLimitError(RuntimeError):
    def __init__(self, message, residuals):
        super().__init__(message)
        self.residuals = residuals


@dataclass
class MeanField:
    max_blocks: int
    rows: list  # rows[graph id] -> probabilities over candidates
    convention: str = DEFAULT_CONVENTION

    def candidates(self, g):
        return catalog(HARD_CAP).candidates(g, get_convention(self.convention).subsets)

    def distance(self, other: "MeanField") -> float:
        return max(float(np.abs(a - b).max()) for a, b in zip(self.rows, other.rows))

    def blend(self, other: "MeanField", weight: float) -> "MeanField":
        rows = [(1 - weight) * a + weight * b for a, b in zip(self.rows, other.rows)]
        return MeanField(self.max_blocks, rows, self.convention)

    def entropy(self) -> list[float]:
        out = []
        for r in self.rows:
            p = r[r > 0]
            out.append(float(-(p * np.log(p)).sum()))
        return out

    def block_membership(self, gid: int) -> np.ndarray:
        """Marginal probability that each block of the graph is in the local graph."""
        g = catalog(HARD_CAP)[gid]
        out = np.zeros(g.size)
        for cand, p in zip(self.candidates(g), self.rows[gid]):
            for m in cand.members:
                for b in range(g.size):
                    if (m >> b) & 1:
                        out[b] += p / len(cand.members)
        return out


def membership_bounds(cfg: ModelConfig, g, x: int) -> tuple[float, float]:
    """(lower, upper) probability that block x is in an agent's local graph."""
    d, c = degree_counts(g, x)
    return reception_cdf(cfg.timing, d + 1), reception_cdf(cfg.timing, c + d + 1)


def initial_estimate(cfg: ModelConfig) -> MeanField:
    """Independent block memberships halfway between the bounds, conditioned on
    forming a root-connected set."""
    cat = catalog(HARD_CAP)
    subsets = get_convention(cfg.convention).subsets
    rows = []
    for g in cat.classes:
        if g.size > cfg.max_blocks:
            break
        w = np.array([sum(membership_bounds(cfg, g, x)) / 2 for x in range(g.size)])
        row = []
        for cand in cat.candidates(g, subsets):
            total = 0.0
            for m in cand.members:
                inside = np.array([(m >> b) & 1 for b in range(g.size)], dtype=bool)
                total += float(np.prod(np.where(inside, w, 1.0 - w)))
            row.append(total)
        row = np.array(row)
        rows.append(row / row.sum())
    return MeanField(cfg.max_blocks, rows, cfg.convention)


def local_graph_distribution(chain: MarkovChain, v: np.ndarray,
                             fallback: MeanField | None = None) -> MeanField:
    """Stationary law of the RA's local graph conditioned on the global graph."""
    t = chain.tables
    cfg = chain.cfg
    if fallback is None:
        fallback = initial_estimate(cfg)
    rows = []
    width = max(len(r) for r in fallback.rows)
    acc = np.zeros((t.n_graphs, width))
    np.add.at(acc, (t.graph_of, t.cand_of_state), v)
    for g in t.space.graphs:
        n_cand = len(fallback.rows[g.id])
        tot = acc[g.id, :n_cand].sum()
        if tot > 0.0:
            rows.append(acc[g.id, :n_cand] / tot)
        else:
            rows.append(fallback.rows[g.id].copy())
    return MeanField(cfg.max_blocks, rows, cfg.convention)


@dataclass
class FixedPointDiagnostics:
    residuals: list = field(default_factory=list)
    entropies: list = field(default_factory=list)
    damped_from: int | None = None
    stationary: np.ndarray | None = None
    ra_actions: np.ndarray | None = None

    def lines(self) -> list[str]:
        return [
            f"{i + 1},{r:.3e},{np.mean(e):.6f}"
            for i, (r, e) in enumerate(zip(self.residuals, self.entropies))
        ]


def fixed_point(nra_policy: LocalPolicy, cfg: ModelConfig, solve_ra: bool = True,
                mu0: MeanField | None = None, max_iter: int = MAX_ITER,
                tol: float = TOL):
    """Iterate mu <- f(mu) until the sup-norm change drops below ``tol``.

    With ``solve_ra`` the chain that defines f is driven by the RA's best
    response to (nra_policy, mu); otherwise the RA plays ``nra_policy`` too.
    Returns (mu, chain, diagnostics).
    """
    from .solver import bellman_solve  # solver builds on this module

    prior = initial_estimate(cfg)
    mu = prior if mu0 is None else mu0
    diag = FixedPointDiagnostics()
    damping = False
    for it in range(max_iter):
        chain = build_chain(None, nra_policy, mu, cfg)
        if solve_ra:
            _, full = bellman_solve(chain)
            chain = chain.with_policy(kernel_tables(cfg.max_blocks, cfg.convention).deterministic_policy_matrix(full.actions))
            diag.ra_actions = full.actions
        v = stationary_distribution(chain)
        new = local_graph_distribution(chain, v, prior)
        res = new.distance(mu)
        if damping:
            new = mu.blend(new, 0.5)
        diag.residuals.append(res)
        diag.entropies.append(new.entropy())
        diag.stationary = v
        if res < tol:
            return new, chain, diag
        # switch to averaging once the residual stops shrinking
        if not damping and it >= 2 and res >= diag.residuals[-2]:
            damping = True
            diag.damped_from = it + 1
        mu = new
    raise IterationLimitError(
        f"mean field did not converge in {max_iter} iterations "
        f"(last residual {diag.residuals[-1]:.3e})", diag.residuals)
