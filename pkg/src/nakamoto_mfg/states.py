"""Representative-agent states: a graph class plus per-block status flags.

Each block carries one ternary status: 0 = not received, 1 = received,
2 = received and generated by the representative agent.

Two state conventions are supported.  Under the *orbit* convention states are
taken modulo the automorphisms of their graph and the stored status tuple is
the lexicographically least image.  Under the *labeled* convention blocks keep
their canonical labels (so topologically identical blocks stay distinct, as
blocks with different hashes are) and an owned block must have all of its
ancestors received, which every reachable state satisfies.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

import numpy as np

from .graphs import HARD_CAP, Catalog, GraphClass, catalog

UNRECEIVED, RECEIVED, OWNED = 0, 1, 2


@dataclass(frozen=True)
class Convention:
    """How identical blocks are treated throughout the model.

    labeled: states keep canonical block labels instead of quotienting by automorphisms.
    subsets: the mean field is indexed by individual root-connected block subsets
        rather than by their automorphism orbits.
    leftmost: every agent resolves a choice among topologically identical blocks to
        the one with the lowest canonical index (a shared hash order); otherwise the
        choice is split evenly among them.
    """

    name: str
    labeled: bool
    subsets: bool
    leftmost: bool


CONVENTIONS = {
    "labeled": Convention("labeled", labeled=True, subsets=True, leftmost=True),
    "orbit": Convention("orbit", labeled=False, subsets=False, leftmost=False),
    "orbit-leftmost": Convention("orbit-leftmost", labeled=False, subsets=False, leftmost=True),
}
DEFAULT_CONVENTION = "labeled"


def get_convention(name) -> Convention:
    if isinstance(name, Convention):
        return name
    try:
        return CONVENTIONS[name]
    except KeyError:
        raise ValueError(f"unknown convention {name!r}; choose from {sorted(CONVENTIONS)}") from None


@dataclass(frozen=True)
class GameState:
    id: int
    graph: GraphClass
    status: tuple

    @property
    def recv(self) -> tuple:
        return tuple(int(s >= RECEIVED) for s in self.status)

    @property
    def own(self) -> tuple:
        return tuple(int(s == OWNED) for s in self.status)

    def __repr__(self):
        return f"GameState({self.id}, {self.graph.name}, {''.join(map(str, self.status))})"


@dataclass(frozen=True)
class LocalGraph:
    cls: Optional[GraphClass]
    embedding: tuple  # local block -> global block
    mask: int = 0

    @property
    def is_null(self) -> bool:
        return self.cls is None


class _AutTable:
    """Automorphisms of one class as an index array plus base-3 weights."""

    def __init__(self, cat: Catalog, g: GraphClass):
        perms = np.array(cat.automorphisms(g), dtype=np.int64)
        # inv[k, j] = block sent to j by automorphism k, so status'[j] = status[inv[k, j]]
        self.perms = perms
        self.inv = np.argsort(perms, axis=1)
        self.pow3 = 3 ** np.arange(g.size - 1, -1, -1, dtype=np.int64)

    def canonical(self, status) -> tuple[int, int]:
        """(code of the least image, index of an automorphism achieving it)."""
        st = np.asarray(status, dtype=np.int64)
        codes = st[self.inv] @ self.pow3
        k = int(np.argmin(codes))
        return int(codes[k]), k


def encode(status) -> int:
    code = 0
    for s in status:
        code = code * 3 + int(s)
    return code


def decode(code: int, n: int) -> tuple:
    out = []
    for _ in range(n):
        code, r = divmod(code, 3)
        out.append(r)
    return tuple(reversed(out))


def _ancestor_lists(g: GraphClass) -> list[list[int]]:
    out = []
    for x in range(g.size):
        chain, p = [], g.parents[x]
        while p is not None:
            chain.append(p)
            p = g.parents[p]
        out.append(chain)
    return out


def local_mask(s: GameState) -> int:
    """Bitmask of the maximal root-connected set of received blocks (0 = null)."""
    g = s.graph
    if s.status[0] == UNRECEIVED:
        return 0
    mask = 1
    for i in range(1, g.size):  # parents precede children
        if s.status[i] != UNRECEIVED and (mask >> g.parents[i]) & 1:
            mask |= 1 << i
    return mask


def local_graph(s: GameState) -> LocalGraph:
    mask = local_mask(s)
    cls, emb = catalog(HARD_CAP).local_of_mask(s.graph, mask)
    return LocalGraph(cls, emb, mask)


class StateSpace:
    """All canonical states with graphs of 1..max_blocks blocks."""

    def __init__(self, max_blocks: int, convention: str = "orbit"):
        if not 1 <= max_blocks <= HARD_CAP:
            raise ValueError(f"max_blocks must lie in 1..{HARD_CAP}")
        self.max_blocks = max_blocks
        self.convention = get_convention(convention)
        labeled = self.convention.labeled
        self.catalog = catalog(HARD_CAP)
        self.graphs = [g for g in self.catalog.classes if g.size <= max_blocks]
        self._aut = {g.id: _AutTable(self.catalog, g) for g in self.graphs}
        self.states: list[GameState] = []
        self.index: dict[tuple, int] = {}
        for g in self.graphs:
            aut = self._aut[g.id]
            anc = _ancestor_lists(g)
            for status in itertools.product((0, 1, 2), repeat=g.size):
                code = encode(status)
                if labeled:
                    if any(status[x] == OWNED and any(status[a] == UNRECEIVED for a in anc[x])
                           for x in range(g.size)):
                        continue
                elif aut.canonical(status)[0] != code:
                    continue
                s = GameState(len(self.states), g, status)
                self.index[(g.id, code)] = s.id
                self.states.append(s)
        self.graph_of = np.array([s.graph.id for s in self.states], dtype=np.int64)
        self._init = self.lookup(self.catalog.root(), (RECEIVED,))[0]

    def __len__(self):
        return len(self.states)

    def __getitem__(self, i: int) -> GameState:
        return self.states[i]

    def aut(self, g: GraphClass) -> _AutTable:
        return self._aut[g.id]

    def lookup(self, g: GraphClass, status) -> tuple[int, tuple]:
        """Canonical state id of (g, status) and the automorphism used (as perm)."""
        if self.convention.labeled:
            return self.index[(g.id, encode(status))], tuple(range(g.size))
        aut = self._aut[g.id]
        code, k = aut.canonical(status)
        return self.index[(g.id, code)], tuple(int(v) for v in aut.perms[k])

    def initial_state(self) -> GameState:
        return self.states[self._init]

    def local_mask(self, s: GameState) -> int:
        return local_mask(s)

    def local_graph(self, s: GameState) -> LocalGraph:
        return local_graph(s)

    def stabilizer(self, s: GameState) -> np.ndarray:
        if self.convention.labeled:
            return np.arange(s.graph.size)[None, :]
        aut = self._aut[s.graph.id]
        st = np.asarray(s.status)
        keep = np.all(st[aut.inv] == st, axis=1)
        return aut.perms[keep]

    def actions(self, s: GameState) -> tuple:
        """Distinct blocks the RA can append to.

        With the leftmost rule these are the lowest-index images of the local
        graph's orbits; otherwise they are orbit representatives of local blocks
        under the state's own symmetries.
        """
        mask = self.local_mask(s)
        if mask == 0:
            return ()
        if self.convention.leftmost:
            loc = self.local_graph(s)
            return tuple(sorted(set(leftmost_targets(loc.cls, loc.embedding).values())))
        stab = self.stabilizer(s)
        blocks = [b for b in range(s.graph.size) if (mask >> b) & 1]
        return tuple(sorted({int(stab[:, b].min()) for b in blocks}))

    def action_rep(self, s: GameState, b: int) -> int:
        return int(self.stabilizer(s)[:, b].min())

    def sigma_key(self, s: GameState):
        """Information-set key: local class plus the ownership pattern seen on it."""
        loc = self.local_graph(s)
        if loc.is_null:
            return (None, ())
        own = [OWNED if s.status[b] == OWNED else RECEIVED for b in loc.embedding]
        aut = _local_aut(loc.cls.id)
        code, _ = aut.canonical(own)
        return (loc.cls.id, code)

    def sigma_class(self, s: GameState) -> frozenset:
        key = self.sigma_key(s)
        return frozenset(t.id for t in self.states if self.sigma_key(t) == key)

    def full_information_state(self, g: GraphClass) -> GameState:
        """The state with graph g where every block is received and none owned."""
        return self.states[self.lookup(g, (RECEIVED,) * g.size)[0]]

    def dump(self) -> str:
        lines = []
        for s in self.states:
            recv = "".join(map(str, s.recv))
            own = "".join(map(str, s.own))
            lines.append(f"{s.id}\t{s.graph.name}\t{recv}\t{own}")
        return "\n".join(lines) + "\n"


def leftmost_targets(cls: GraphClass, embedding) -> dict:
    """Local orbit representative -> lowest global index among that orbit's images."""
    out: dict[int, int] = {}
    for j in range(cls.size):
        r = cls.orbits[j]
        b = embedding[j]
        if r not in out or b < out[r]:
            out[r] = b
    return {r: out[r] for r in sorted(out)}


def split_targets(cls: GraphClass, embedding) -> dict:
    """Local orbit representative -> all global images of that orbit."""
    out: dict[int, list] = {}
    for j in range(cls.size):
        out.setdefault(cls.orbits[j], []).append(embedding[j])
    return {r: tuple(out[r]) for r in sorted(out)}


@lru_cache(maxsize=None)
def _local_aut(gid: int) -> _AutTable:
    cat = catalog(HARD_CAP)
    return _AutTable(cat, cat[gid])


@lru_cache(maxsize=None)
def state_space(max_blocks: int, convention: str = DEFAULT_CONVENTION) -> StateSpace:
    return StateSpace(max_blocks, get_convention(convention).name)


def enumerate_states(max_blocks: int, convention: str = DEFAULT_CONVENTION) -> list[GameState]:
    return state_space(max_blocks, convention).states


def initial_state(max_blocks: int = 2, convention: str = DEFAULT_CONVENTION) -> GameState:
    return state_space(max_blocks, convention).initial_state()



def sigma_class(s: GameState, space: StateSpace) -> frozenset:
    return space.sigma_class(s)


def count_states(max_blocks: int, convention: str = DEFAULT_CONVENTION) -> dict[int, int]:
    """Number of states per graph size."""
    out: dict[int, int] = {}
    for st in state_space(max_blocks, convention).states:
        out[st.graph.size] = out.get(st.graph.size, 0) + 1
    return out
