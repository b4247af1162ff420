"""Agent-based Monte Carlo simulator, an independent check on the mean-field chain.

Every agent is simulated explicitly, so no mean field is involved.  Agents
that have received the same set of blocks behave identically, which lets the
simulator track how many agents hold each received set instead of one record
per agent.  The distribution of the process is unchanged by this.

Time is aggregated between block generations: the gap until the next block is
drawn once per block step, and every outstanding (block, agent) delivery then
succeeds with probability 1 - (1 - delta)^gap, independently across pairs.
The gap is shared by all pairs, as in the time-step model.

``delivery="independent"`` instead gives every outstanding pair its own
success probability p1 per block step, the assumption built into the chain's
reception trials.  It separates the mean-field closure error from the effect
of the shared gap.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dynamics import DegenerateStateError, ModelConfig
from .graphs import HARD_CAP, GraphClass, catalog
from .policy import LocalPolicy
from .states import get_convention, leftmost_targets, local_mask, split_targets, GameState

BURN_IN = 1000
DELIVERY_MODES = ("shared", "independent")


@dataclass(frozen=True)
class _GraphTables:
    """Per-graph lookups indexed by the received-set bitmask of an agent."""

    acting: np.ndarray      # bool[pattern]: local graph is not null
    cand: np.ndarray        # int[pattern]: mean-field candidate index of the local graph
    n_cand: int
    subtree: np.ndarray     # [x, b] = 1 when b lies in the subtree of x
    prune_order: tuple      # proper subtree heads by increasing subtree size


@lru_cache(maxsize=None)
def _graph_tables(gid: int, convention: str) -> _GraphTables:
    cat = catalog(HARD_CAP)
    g = cat[gid]
    conv = get_convention(convention)
    n = g.size
    cand_index = {}
    cands = cat.candidates(g, conv.subsets)
    for c in cands:
        for m in c.members:
            cand_index[m] = c.index
    acting = np.zeros(1 << n, dtype=bool)
    cand = np.zeros(1 << n, dtype=np.int64)
    for pat in range(1 << n):
        status = tuple((pat >> b) & 1 for b in range(n))
        m = local_mask(GameState(-1, g, status))
        acting[pat] = m != 0
        cand[pat] = cand_index[m]
    sub = np.zeros((n, n))
    for x in range(n):
        sub[x, g.subtree(x).start:g.subtree(x).stop] = 1.0
    order = tuple(sorted(range(1, n), key=lambda x: g.subtree_size[x]))
    return _GraphTables(acting, cand, len(cands), sub, order)


@lru_cache(maxsize=None)
def _target_table(gid: int, convention: str, max_blocks: int, choices: tuple) -> np.ndarray:
    """[pattern, b]: probability an agent with that received set appends to block b."""
    cat = catalog(HARD_CAP)
    g = cat[gid]
    conv = get_convention(convention)
    policy = LocalPolicy(max_blocks, choices)
    n = g.size
    out = np.zeros((1 << n, n))
    for pat in range(1 << n):
        m = local_mask(GameState(-1, g, tuple((pat >> b) & 1 for b in range(n))))
        if m == 0:
            continue
        cls, emb = cat.local_of_mask(g, m)
        rep = policy(cls)
        if conv.leftmost:
            out[pat, leftmost_targets(cls, emb)[rep]] = 1.0
        else:
            hits = split_targets(cls, emb)[rep]
            out[pat, list(hits)] = 1.0 / len(hits)
    return out


def _remap(n_old: int, relabel, n_new: int) -> np.ndarray:
    """new_pattern[old_pattern] for a relabeling old block -> new block."""
    out = np.zeros(1 << n_old, dtype=np.int64)
    for pat in range(1 << n_old):
        new = 0
        for old, tgt in relabel.items() if isinstance(relabel, dict) else enumerate(relabel):
            if (pat >> old) & 1:
                new |= 1 << tgt
        out[pat] = new
    return out


@lru_cache(maxsize=None)
def _extend_map(gid: int, parent: int):
    cat = catalog(HARD_CAP)
    g = cat[gid]
    cls, relabel, new = cat.extend(g, parent)
    return cls, _remap(g.size, relabel, cls.size), new


@lru_cache(maxsize=None)
def _prune_map(gid: int, x: int):
    cat = catalog(HARD_CAP)
    g = cat[gid]
    cls, kept, relabel = cat.gamma_subgraph(g, x)
    return cls, _remap(g.size, relabel, cls.size)


def _ratio(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """Ratio of sums and its batch-means standard error (delta method)."""
    tot_b = b.sum(axis=0)
    with np.errstate(invalid="ignore", divide="ignore"):
        est = a.sum(axis=0) / tot_b
        k = a.shape[0]
        resid = a - est * b
        se = np.sqrt((resid ** 2).sum(axis=0) / (k * (k - 1))) / (tot_b / k)
    return est, se


@dataclass
class OracleReport:
    block_steps: int
    seed: int
    efficiency: float
    efficiency_se: float
    prune_rate: float
    prune_rate_se: float
    reset_rate: float
    reset_rate_se: float
    graph_visits: np.ndarray               # block steps spent in each graph class
    local_freq: dict = field(default_factory=dict)  # graph id -> (estimate array, se array)

    def rows(self) -> list[tuple[str, float, float]]:
        """(metric, estimate, std_error) rows for oracle.csv."""
        out = [("efficiency", self.efficiency, self.efficiency_se),
               ("prune_rate", self.prune_rate, self.prune_rate_se),
               ("reset_rate", self.reset_rate, self.reset_rate_se)]
        cat = catalog(HARD_CAP)
        for gid in sorted(self.local_freq):
            est, se = self.local_freq[gid]
            for c, (e, s) in enumerate(zip(est, se)):
                out.append((f"local[{cat[gid].name}][{c}]", float(e), float(s)))
        return out


def monte_carlo_oracle(cfg: ModelConfig, policy: LocalPolicy, block_steps: int = 100_000,
                       seed: int = 0, batches: int = 50, burn_in: int = BURN_IN,
                       delivery: str = "shared") -> OracleReport:
    """Simulate ``cfg.n_agents`` agents all following ``policy``.

    Statistics are collected at each block step before the prune check (the
    chain's decision epochs) after ``burn_in`` steps, and their standard errors
    come from ``batches`` contiguous batch means.
    """
    if policy.max_blocks != cfg.max_blocks:
        raise ValueError("policy and configuration disagree on max_blocks")
    if delivery not in DELIVERY_MODES:
        raise ValueError(f"delivery must be one of {DELIVERY_MODES}")
    if not 2 <= batches <= block_steps:
        raise ValueError("need at least two batches and one step per batch")
    conv = get_convention(cfg.convention).name
    cat = catalog(HARD_CAP)
    M, N = cfg.max_blocks, cfg.n_agents
    n_graphs = sum(1 for g in cat.classes if g.size <= M)
    width = max(len(cat.candidates(g, get_convention(conv).subsets))
                for g in cat.classes[:n_graphs])
    rng = np.random.default_rng(seed)
    keep_frac = 1.0 - cfg.epsilon

    per = block_steps // batches
    crit = np.zeros(batches)
    removed = np.zeros(batches)
    prunes = np.zeros(batches)
    resets = np.zeros(batches)
    visits = np.zeros((batches, n_graphs))
    cells = np.zeros((batches, n_graphs, width))

    root = cat.root()
    g: GraphClass = root
    counts = np.zeros(2, dtype=np.int64)
    counts[1] = N
    total_steps = burn_in + per * batches
    for step in range(total_steps):
        bt = (step - burn_in) // per if step >= burn_in else -1
        gt = _graph_tables(g.id, conv)
        if bt >= 0:
            visits[bt, g.id] += 1
            cells[bt, g.id, :gt.n_cand] += np.bincount(gt.cand, weights=counts,
                                                       minlength=gt.n_cand) / N
        targets = _target_table(g.id, conv, M, policy.choices)
        acting = counts[gt.acting].sum()
        if acting == 0:
            raise DegenerateStateError(f"no agent can append to {g.name}")
        inside = gt.subtree @ (counts @ targets)
        x = next((x for x in gt.prune_order if inside[x] / acting > keep_frac), None)
        if x is not None:
            if bt >= 0:
                crit[bt] += g.depth[x]
                removed[bt] += g.size - g.subtree_size[x]
                prunes[bt] += 1
            cls, pmap = _prune_map(g.id, x)
            counts = np.bincount(pmap, weights=counts, minlength=1 << cls.size).astype(np.int64)
            g = cls
        elif g.size >= M:
            if bt >= 0:
                removed[bt] += g.size
                resets[bt] += 1
            g = root
            counts = np.zeros(2, dtype=np.int64)
            counts[1] = N
            continue
        # append: a uniformly chosen agent among those able to act
        gt = _graph_tables(g.id, conv)
        targets = _target_table(g.id, conv, M, policy.choices)
        w = np.where(gt.acting, counts, 0).astype(float)
        if w.sum() == 0:
            raise DegenerateStateError(f"no agent can append to {g.name}")
        pat = int(rng.choice(w.size, p=w / w.sum()))
        parent = int(rng.choice(g.size, p=targets[pat]))
        cls, emap, new = _extend_map(g.id, parent)
        counts = np.bincount(emap, weights=counts, minlength=1 << cls.size).astype(np.int64)
        counts[emap[pat]] -= 1
        counts[emap[pat] | (1 << new)] += 1
        g = cls
        # deliveries until the next block is generated
        if delivery == "shared":
            p = 1.0 - (1.0 - cfg.delta) ** rng.geometric(cfg.alpha)
        else:
            p = cfg.p1
        for b in range(g.size):
            bit = 1 << b
            idx = np.flatnonzero(((np.arange(counts.size) & bit) == 0) & (counts > 0))
            if idx.size:
                moved = rng.binomial(counts[idx], p)
                counts[idx] -= moved
                counts[idx | bit] += moved

    steps = np.full(batches, float(per))
    eff, eff_se = _ratio(crit[:, None], removed[:, None])
    pr, pr_se = _ratio(prunes[:, None], steps[:, None])
    rr, rr_se = _ratio(resets[:, None], steps[:, None])
    local = {}
    for gid in range(n_graphs):
        if visits[:, gid].sum() == 0:
            continue
        n_cand = _graph_tables(gid, conv).n_cand
        est, se = _ratio(cells[:, gid, :n_cand], visits[:, gid][:, None])
        local[gid] = (est, se)
    return OracleReport(per * batches, seed, float(eff[0]), float(eff_se[0]), float(pr[0]),
                        float(pr_se[0]), float(rr[0]), float(rr_se[0]),
                        visits.sum(axis=0), local)
