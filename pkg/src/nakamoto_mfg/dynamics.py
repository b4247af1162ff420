"""Transition kernel of the representative agent's Markov chain.

One block step is processed as: the representative agent (RA) picks a block;
the prune condition is checked on the current graph; a graph of M blocks that
did not prune resets; otherwise one block is appended (by the RA or by a
non-representative agent, NRA) and every outstanding block gets one reception
trial.

The per-state functions below (:func:`evaluate_prune`, :func:`graph_step_distribution`,
:func:`reception_split`, ...) spell the kernel out directly and are what
:func:`transition_row` composes.  :func:`build_chain` assembles the same kernel
for every state at once from precomputed sparse tables.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import TYPE_CHECKING, Optional

import numpy as np
import scipy.sparse as sp

from .graphs import HARD_CAP, GraphClass, catalog
from .policy import LocalPolicy
from .states import (DEFAULT_CONVENTION, OWNED, RECEIVED, UNRECEIVED, GameState, StateSpace,
                     get_convention, leftmost_targets, split_targets, state_space)
from .timing import TimingParams, reception_pmf

if TYPE_CHECKING:
    from .mean_field import MeanField


class DegenerateStateError(RuntimeError):
    """No agent (RA included) can append to the graph of this state."""


@dataclass(frozen=True)
class ModelConfig:
    n_agents: int = 1000
    max_blocks: int = 5
    alpha: float = 0.001
    delta: float = 0.01
    gamma: float = 0.99
    epsilon: float = 0.01
    reward: float = 1.0
    convention: str = DEFAULT_CONVENTION

    def __post_init__(self):
        if self.n_agents < 2:
            raise ValueError("n_agents must be at least 2")
        if not 2 <= self.max_blocks <= HARD_CAP:
            raise ValueError(f"max_blocks must lie in 2..{HARD_CAP}")
        if not 0.0 <= self.gamma < 1.0:
            raise ValueError("gamma must satisfy 0 <= gamma < 1")
        if not 0.0 <= self.epsilon < 0.5:
            raise ValueError("epsilon must satisfy 0 <= epsilon < 0.5")
        if not self.reward > 0:
            raise ValueError("reward must be positive")
        TimingParams(self.alpha, self.delta)  # validates alpha, delta
        get_convention(self.convention)

    @property
    def space(self) -> StateSpace:
        return state_space(self.max_blocks, self.convention)

    @property
    def timing(self) -> TimingParams:
        return TimingParams(self.alpha, self.delta)

    @property
    def p1(self) -> float:
        """Probability an outstanding block is received during one block step."""
        return reception_pmf(self.timing, 1)

    @property
    def ra_weight(self) -> float:
        return 1.0 / self.n_agents

    @property
    def nra_weight(self) -> float:
        return (self.n_agents - 1) / self.n_agents


@dataclass(frozen=True)
class TransitionRecord:
    next_state: int
    probability: float
    reward: float
    pruned_critical: int
    pruned_total: int
    is_reset: bool


# --------------------------------------------------------------------------
# NRA action mass


@lru_cache(maxsize=None)
def _candidate_targets(gid: int, convention: str) -> tuple:
    """For each mean-field candidate of graph gid: (local orbit reps, table) where
    table[k, b] is the block mass an agent holding that candidate puts on global
    block b when its policy picks local orbit representative reps[k]."""
    conv = get_convention(convention)
    cat = catalog(HARD_CAP)
    g = cat[gid]
    out = []
    for cand in cat.candidates(g, conv.subsets):
        if cand.cls is None:
            out.append(None)
            continue
        reps = cand.cls.orbit_reps
        table = np.zeros((len(reps), g.size))
        if conv.leftmost:
            # everyone resolves identical blocks the same way; orbit candidates use their
            # representative subset
            for k, b in enumerate(leftmost_targets(cand.cls, cand.embedding).values()):
                table[k, b] = 1.0
        else:
            # members of an orbit are equally likely and identical blocks share the mass
            for mask in cand.members:
                cls, emb = cat.local_of_mask(g, mask)
                for k, hits in enumerate(split_targets(cls, emb).values()):
                    for b in hits:
                        table[k, b] += 1.0 / (len(hits) * len(cand.members))
        out.append((reps, table))
    return tuple(out)


def nra_action_distribution(g: GraphClass, policy: LocalPolicy, mu: "MeanField") -> np.ndarray:
    """Per-block mass of NRA appending choices; sums to 1 - mu(null, g)."""
    row = mu.rows[g.id]
    mass = np.zeros(g.size)
    cands = catalog(HARD_CAP).candidates(g, get_convention(mu.convention).subsets)
    for c, entry in enumerate(_candidate_targets(g.id, mu.convention)):
        if entry is None or row[c] == 0.0:
            continue
        reps, table = entry
        mass += row[c] * table[reps.index(policy(cands[c].cls))]
    return mass


def _acting_weights(g: GraphClass, action: Optional[int], mass: np.ndarray, cfg: ModelConfig):
    w_ra = cfg.ra_weight if action is not None else 0.0
    return w_ra, cfg.nra_weight * mass, w_ra + cfg.nra_weight * mass.sum()


def evaluate_prune(s: GameState, action: Optional[int], policy: LocalPolicy,
                   mu: "MeanField", cfg: ModelConfig) -> Optional[int]:
    """Head of the smallest proper subtree holding more than 1 - epsilon of the
    acting mass, or None when only the whole graph qualifies."""
    g = s.graph
    mass = nra_action_distribution(g, policy, mu)
    w_ra, nra, total = _acting_weights(g, action, mass, cfg)
    if total <= 0.0:
        return None
    best = None
    for x in range(1, g.size):
        sub = g.subtree(x)
        inside = nra[sub.start:sub.stop].sum() + (w_ra if action in sub else 0.0)
        if inside / total > 1.0 - cfg.epsilon:
            if best is None or g.subtree_size[x] < g.subtree_size[best]:
                best = x
    return best


def reward_count(s: GameState, target: Optional[int]) -> int:
    """Owned ancestors of the prune target (0 when there is no prune)."""
    if target is None:
        return 0
    g = s.graph
    count, p = 0, g.parents[target]
    while p is not None:
        count += s.status[p] == OWNED
        p = g.parents[p]
    return count


def apply_prune(space: StateSpace, s: GameState, target: int, action: Optional[int]):
    """Post-prune state and the RA action carried into its labeling (None if pruned away)."""
    g = s.graph
    cls, kept, relabel = catalog(HARD_CAP).gamma_subgraph(g, target)
    status = [0] * cls.size
    for old in kept:
        status[relabel[old]] = s.status[old]
    tid, perm = space.lookup(cls, status)
    new_action = None
    if action is not None and action in kept:
        new_action = perm[relabel[action]]
    return space[tid], new_action


def graph_step_distribution(s: GameState, action: Optional[int], policy: LocalPolicy,
                            mu: "MeanField", cfg: ModelConfig) -> dict:
    """Distribution over (next class id, parent block) from a post-prune state.

    Returns {(class_id, parent): (probability, probability the RA generated it)}.
    """
    g = s.graph
    mass = nra_action_distribution(g, policy, mu)
    w_ra, nra, total = _acting_weights(g, action, mass, cfg)
    if total <= 0.0:
        raise DegenerateStateError(f"no acting agent in {s}")
    cat = catalog(HARD_CAP)
    out: dict = {}
    for b in range(g.size):
        ra = w_ra if action == b else 0.0
        p = (ra + nra[b]) / total
        if p == 0.0:
            continue
        out[(cat.extend(g, b)[0].id, b)] = (p, ra / (ra + nra[b]))
    return out


def ownership_split(s: GameState, action: Optional[int], g_next: GraphClass,
                    policy: LocalPolicy, mu: "MeanField", cfg: ModelConfig) -> float:
    """Probability that the RA generated the new block given the next graph class."""
    phi = catalog(HARD_CAP).phi(s.graph, g_next)
    if action is None or action not in phi:
        return 0.0
    mass = nra_action_distribution(s.graph, policy, mu)
    nra = (cfg.n_agents - 1) * sum(mass[b] for b in phi)
    return 1.0 / (1.0 + nra)


def reception_split(space: StateSpace, s: GameState, parent: int, ra_generated: bool,
                    cfg: ModelConfig) -> dict:
    """Append a block under ``parent`` and give every outstanding block one trial.

    Returns {next state id: probability}.
    """
    out: dict[int, float] = {}
    for t, z1, z0 in _expansion_outcomes(space, s, parent, ra_generated):
        out[t] = out.get(t, 0.0) + _weight(z1, z0, cfg.p1)
    return out


def _weight(z1, z0, p1):
    return p1 ** z1 * (1.0 - p1) ** z0


def _expansion_outcomes(space: StateSpace, s: GameState, parent: int, ra_generated: bool):
    """(successor id, received count, missed count) for every reception outcome."""
    g2, relabel, new = catalog(HARD_CAP).extend(s.graph, parent)
    status = [0] * g2.size
    for old, st in enumerate(s.status):
        status[relabel[old]] = st
    status[new] = OWNED if ra_generated else UNRECEIVED
    pending = [i for i, st in enumerate(status) if st == UNRECEIVED]
    out = []
    for hit in itertools.product((False, True), repeat=len(pending)):
        trial = list(status)
        for i, h in zip(pending, hit):
            if h:
                trial[i] = RECEIVED
        z1 = sum(hit)
        out.append((space.lookup(g2, trial)[0], z1, len(pending) - z1))
    return out


def transition_row(space: StateSpace, s: GameState, action: Optional[int],
                   policy: LocalPolicy, mu: "MeanField", cfg: ModelConfig) -> list:
    """All transitions out of ``s`` when the RA plays ``action``, merged by successor."""
    target = evaluate_prune(s, action, policy, mu, cfg)
    init = space.initial_state().id
    g = s.graph
    if target is None:
        if g.size >= cfg.max_blocks:
            return [TransitionRecord(init, 1.0, 0.0, 0, g.size, True)]
        post, post_action = s, action
        reward, crit, removed = 0.0, 0, 0
    else:
        post, post_action = apply_prune(space, s, target, action)
        reward = cfg.reward * reward_count(s, target)
        crit = g.depth[target]
        removed = g.size - g.subtree_size[target]
    merged: dict[int, float] = {}
    for (_, parent), (p, p_ra) in graph_step_distribution(post, post_action, policy, mu, cfg).items():
        for owner, share in ((True, p_ra), (False, 1.0 - p_ra)):
            if share == 0.0:
                continue
            for t, q in reception_split(space, post, parent, owner, cfg).items():
                merged[t] = merged.get(t, 0.0) + p * share * q
    return [TransitionRecord(t, q, reward, crit, removed, False) for t, q in sorted(merged.items())]


# --------------------------------------------------------------------------
# Whole-chain assembly


class KernelTables:
    """Policy- and mean-field-independent lookup tables for one state space.

    State-action pairs are (state, orbit representative of a local block under
    the state's symmetries); a state with a null local graph has one pair with
    action -1.  Reception outcomes are stored as (received, missed) counts so
    the tables are shared by every propagation rate.
    """

    def __init__(self, max_blocks: int, convention: str = DEFAULT_CONVENTION):
        self.max_blocks = M = max_blocks
        self.convention = conv = get_convention(convention)
        self.space = space = state_space(max_blocks, conv.name)
        cat = catalog(HARD_CAP)
        n = len(space)
        self.n_states = n
        self.graph_of = space.graph_of
        self.n_graphs = len(space.graphs)
        self.graph_size = np.array([g.size for g in space.graphs])
        self.init = space.initial_state().id

        # state-action pairs
        sa_state, sa_action = [], []
        self.sa_start = np.zeros(n + 1, dtype=np.int64)
        self.sa_lookup = np.full((n, M + 1), -1, dtype=np.int64)
        for s in space.states:
            acts = space.actions(s) or (-1,)
            for a in acts:
                self.sa_lookup[s.id, a + 1] = len(sa_state)
                sa_state.append(s.id)
                sa_action.append(a)
            self.sa_start[s.id + 1] = len(sa_state)
        self.sa_state = np.array(sa_state, dtype=np.int64)
        self.sa_action = np.array(sa_action, dtype=np.int64)
        self.n_sa = len(sa_state)

        # prune bookkeeping: post-prune state, carried action, owned ancestors
        self.post_state = np.repeat(np.arange(n)[:, None], M, axis=1)
        self.post_action = np.full((n, M, M), -1, dtype=np.int64)
        self.owned_ancestors = np.zeros((n, M), dtype=np.int64)
        for s in space.states:
            g = s.graph
            self.post_action[s.id, 0, :g.size] = np.arange(g.size)
            for x in range(1, g.size):
                post, _ = apply_prune(space, s, x, None)
                self.post_state[s.id, x] = post.id
                self.owned_ancestors[s.id, x] = reward_count(s, x)
                for a in range(g.size):
                    _, carried = apply_prune(space, s, x, a)
                    self.post_action[s.id, x, a] = -1 if carried is None else carried
        self.depth = np.zeros((self.n_graphs, M), dtype=np.int64)
        self.outside = np.zeros((self.n_graphs, M), dtype=np.int64)
        self.subtree = np.zeros((self.n_graphs, M, M))
        for g in space.graphs:
            for x in range(g.size):
                self.depth[g.id, x] = g.depth[x]
                self.outside[g.id, x] = g.size - g.subtree_size[x]
                self.subtree[g.id, x, g.subtree(x).start:g.subtree(x).stop] = 1.0

        # expansion rows: one per (state below the cap, parent block)
        self.row_start = np.full(n, -1, dtype=np.int64)
        rows = 0
        w_t, w_b = [], []
        for s in space.states:
            if s.graph.size < M:
                self.row_start[s.id] = rows
                for b in range(s.graph.size):
                    w_t.append(s.id)
                    w_b.append(b)
                rows += s.graph.size
        self.n_rows = rows
        self.w_t = np.array(w_t, dtype=np.int64)
        self.w_b = np.array(w_b, dtype=np.int64)
        self.w_row = np.arange(rows, dtype=np.int64)
        self._outcomes = {}
        for owner in (False, True):
            r_, c_, z1_, z0_ = [], [], [], []
            for row, (t, b) in enumerate(zip(w_t, w_b)):
                if owner and not (space.local_mask(space[t]) >> b) & 1:
                    continue  # the RA only extends blocks in its own local graph
                for succ, z1, z0 in _expansion_outcomes(space, space[t], b, owner):
                    r_.append(row)
                    c_.append(succ)
                    z1_.append(z1)
                    z0_.append(z0)
            self._outcomes[owner] = tuple(np.array(v, dtype=np.int64) for v in (r_, c_, z1_, z0_))
        self._expansion_cache: dict = {}

        # the RA's own local graph, and its action distribution for each local choice
        self.cand_of_state = np.zeros(n, dtype=np.int64)
        self.local_class = np.full(n, -1, dtype=np.int64)
        pi_r, pi_c, pi_v = [], [], []
        self.pi_row = np.full((n, M), -1, dtype=np.int64)
        n_pi = 0
        cand_index = {}
        for g in space.graphs:
            for cand in cat.candidates(g, conv.subsets):
                for m in cand.members:
                    cand_index[(g.id, m)] = cand.index
        for s in space.states:
            loc = space.local_graph(s)
            self.cand_of_state[s.id] = cand_index[(s.graph.id, loc.mask)]
            if loc.is_null:
                self.pi_row[s.id, 0] = n_pi
                pi_r.append(n_pi)
                pi_c.append(self.sa_lookup[s.id, 0])
                pi_v.append(1.0)
                n_pi += 1
                continue
            self.local_class[s.id] = loc.cls.id
            if conv.leftmost:
                targets = {r: (b,) for r, b in leftmost_targets(loc.cls, loc.embedding).items()}
            else:
                targets = split_targets(loc.cls, loc.embedding)
            for r, hits in targets.items():
                for b in hits:
                    b = b if conv.leftmost else space.action_rep(s, b)
                    pi_r.append(n_pi)
                    pi_c.append(self.sa_lookup[s.id, b + 1])
                    pi_v.append(1.0 / len(hits))
                self.pi_row[s.id, r] = n_pi
                n_pi += 1
        self.pi_all = sp.csr_matrix((pi_v, (pi_r, pi_c)), shape=(n_pi, self.n_sa))
        self.pi_all.sum_duplicates()

    def expansion(self, p1: float):
        """(NRA, RA) expansion matrices, rows = (state, parent), columns = successors."""
        hit = self._expansion_cache.get(p1)
        if hit is None:
            mats = []
            for owner in (False, True):
                r, c, z1, z0 = self._outcomes[owner]
                data = p1 ** z1 * (1.0 - p1) ** z0
                m = sp.csr_matrix((data, (r, c)), shape=(self.n_rows, self.n_states))
                m.sum_duplicates()
                mats.append(m)
            hit = tuple(mats)
            self._expansion_cache[p1] = hit
        return hit

    def symmetric_policy_matrix(self, policy: LocalPolicy) -> sp.csr_matrix:
        """RA follows the local policy, splitting ties like the NRAs do."""
        choice = np.array(policy.choices, dtype=np.int64)
        r = np.where(self.local_class >= 0, choice[np.maximum(self.local_class, 0)], 0)
        return self.pi_all[self.pi_row[np.arange(self.n_states), r]]

    def deterministic_policy_matrix(self, actions) -> sp.csr_matrix:
        actions = np.asarray(actions, dtype=np.int64)
        idx = self.sa_lookup[np.arange(self.n_states), actions + 1]
        if np.any(idx < 0):
            bad = int(np.flatnonzero(idx < 0)[0])
            raise ValueError(f"action {actions[bad]} is not available in state {bad}")
        return sp.csr_matrix((np.ones(self.n_states), (np.arange(self.n_states), idx)),
                             shape=(self.n_states, self.n_sa))


@lru_cache(maxsize=None)
def kernel_tables(max_blocks: int, convention: str = DEFAULT_CONVENTION) -> KernelTables:
    return KernelTables(max_blocks, get_convention(convention).name)


@dataclass
class MarkovChain:
    """Kernel under a fixed NRA policy and mean field.

    ``P_sa`` has one row per state-action pair; ``P`` is the state chain once
    the RA policy ``Pi`` is applied.  Per-pair annotations are deterministic
    given the pair: reward, finalized critical blocks, removed blocks, the
    prune target (0 = none) and reset / degenerate flags.
    """

    tables: KernelTables
    cfg: ModelConfig
    P_sa: sp.csr_matrix
    reward_sa: np.ndarray
    critical_sa: np.ndarray
    removed_sa: np.ndarray
    prune_sa: np.ndarray
    reset_sa: np.ndarray
    degenerate_sa: np.ndarray
    Pi: sp.csr_matrix
    P: sp.csr_matrix = field(init=False)

    def __post_init__(self):
        self.P = (self.Pi @ self.P_sa).tocsr()

    @property
    def n_states(self) -> int:
        return self.tables.n_states

    def expected(self, per_sa: np.ndarray) -> np.ndarray:
        return self.Pi @ per_sa

    @property
    def reward(self) -> np.ndarray:
        return self.expected(self.reward_sa)

    @property
    def critical(self) -> np.ndarray:
        return self.expected(self.critical_sa)

    @property
    def removed(self) -> np.ndarray:
        return self.expected(self.removed_sa)

    @property
    def degenerate_states(self) -> np.ndarray:
        return np.flatnonzero(self.Pi @ self.degenerate_sa.astype(float) > 0)

    def with_policy(self, Pi: sp.csr_matrix) -> "MarkovChain":
        return MarkovChain(self.tables, self.cfg, self.P_sa, self.reward_sa, self.critical_sa,
                           self.removed_sa, self.prune_sa, self.reset_sa, self.degenerate_sa, Pi)

    def records(self, sa: int) -> list[TransitionRecord]:
        row = self.P_sa.getrow(sa)
        return [
            TransitionRecord(int(j), float(p), float(self.reward_sa[sa]), int(self.critical_sa[sa]),
                             int(self.removed_sa[sa]), bool(self.reset_sa[sa]))
            for j, p in zip(row.indices, row.data)
        ]

    def dump(self) -> str:
        t = self.tables
        lines = []
        for sa in range(t.n_sa):
            for rec in self.records(sa):
                flags = ("reset" if rec.is_reset else "prune" if self.prune_sa[sa] else "-")
                lines.append(f"{t.sa_state[sa]}\t{t.sa_action[sa]}\t{rec.next_state}\t"
                             f"{rec.probability:.17g}\t{rec.reward:g}\t{flags}")
        return "\n".join(lines) + "\n"


def nra_mass_table(tables: KernelTables, policy: LocalPolicy, mu: "MeanField"):
    """(block mass per graph padded to M, null mass per graph)."""
    M = tables.max_blocks
    mass = np.zeros((tables.n_graphs, M))
    null = np.zeros(tables.n_graphs)
    for g in tables.space.graphs:
        mass[g.id, :g.size] = nra_action_distribution(g, policy, mu)
        null[g.id] = mu.rows[g.id][0]
    return mass, null


def prune_table(tables: KernelTables, mass: np.ndarray, cfg: ModelConfig) -> np.ndarray:
    """prune[g, a + 1] = prune target (0 = none) when the RA plays a (-1 = idle)."""
    M = tables.max_blocks
    out = np.zeros((tables.n_graphs, M + 1), dtype=np.int64)
    for g in tables.space.graphs:
        n = g.size
        sub = tables.subtree[g.id, :n, :n]
        nra_in = sub @ (cfg.nra_weight * mass[g.id, :n])
        nra_total = cfg.nra_weight * mass[g.id, :n].sum()
        # subtree heads by increasing size, so the first qualifying one is the smallest
        order = sorted(range(1, n), key=lambda x: g.subtree_size[x])
        for a in range(-1, n):
            w_ra = 0.0 if a < 0 else cfg.ra_weight
            total = nra_total + w_ra
            if total <= 0.0:
                continue
            inside = nra_in + (sub[:, a] * w_ra if a >= 0 else 0.0)
            for x in order:
                if inside[x] / total > 1.0 - cfg.epsilon:
                    out[g.id, a + 1] = x
                    break
    return out


def build_chain(ra_policy, nra_policy: LocalPolicy, mu: "MeanField", cfg: ModelConfig) -> MarkovChain:
    """Assemble the kernel.  ``ra_policy`` is None (RA follows ``nra_policy``) or a
    per-state array of chosen blocks (-1 for states with a null local graph)."""
    if nra_policy.max_blocks != cfg.max_blocks:
        raise ValueError("policy and configuration disagree on max_blocks")
    if mu.convention != cfg.convention:
        raise ValueError("mean field and configuration use different conventions")
    t = kernel_tables(cfg.max_blocks, cfg.convention)
    M = cfg.max_blocks
    mass, null = nra_mass_table(t, nra_policy, mu)
    prune = prune_table(t, mass, cfg)

    s, a = t.sa_state, t.sa_action
    g = t.graph_of[s]
    x = prune[g, a + 1]
    reset = (x == 0) & (t.graph_size[g] >= M)
    post = t.post_state[s, x]
    carried = np.where(a >= 0, t.post_action[s, x, np.maximum(a, 0)], -1)
    g_post = t.graph_of[post]
    w_nra = cfg.nra_weight * (1.0 - null[g_post])
    w_ra = np.where(carried >= 0, cfg.ra_weight, 0.0)
    total = w_nra + w_ra
    degenerate = ~reset & (total <= 0.0)
    live = ~reset & ~degenerate
    safe_total = np.where(live, total, 1.0)
    # W below already carries the NRA block masses, which sum to 1 - mu(null)
    c_nra = np.where(live, cfg.nra_weight / safe_total, 0.0)
    c_ra = np.where(live, w_ra / safe_total, 0.0)

    E_nra, E_ra = t.expansion(cfg.p1)
    W = sp.csr_matrix((mass[t.graph_of[t.w_t], t.w_b], (t.w_t, t.w_row)),
                      shape=(t.n_states, t.n_rows))
    D = (W @ E_nra).tocsr()
    sa_idx = np.arange(t.n_sa)
    nra_part = sp.csr_matrix((c_nra, (sa_idx, np.where(live, post, 0))),
                             shape=(t.n_sa, t.n_states)) @ D
    ra_row = np.where(live & (carried >= 0), t.row_start[post] + np.maximum(carried, 0), 0)
    ra_part = sp.csr_matrix((c_ra, (sa_idx, ra_row)), shape=(t.n_sa, t.n_rows)) @ E_ra
    fixed_cols = np.where(reset, t.init, s)
    fixed_part = sp.csr_matrix(((reset | degenerate).astype(float), (sa_idx, fixed_cols)),
                               shape=(t.n_sa, t.n_states))
    P_sa = (nra_part + ra_part + fixed_part).tocsr()
    P_sa.eliminate_zeros()

    pruned = x > 0
    reward = np.where(pruned, cfg.reward * t.owned_ancestors[s, x], 0.0)
    critical = np.where(pruned, t.depth[g, x], 0).astype(float)
    removed = np.where(pruned, t.outside[g, x], np.where(reset, t.graph_size[g], 0)).astype(float)

    if ra_policy is None:
        Pi = t.symmetric_policy_matrix(nra_policy)
    else:
        Pi = t.deterministic_policy_matrix(ra_policy)
    return MarkovChain(t, cfg, P_sa, reward, critical, removed, x, reset, degenerate, Pi)
