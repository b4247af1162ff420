"""Nakamoto graphs (rooted trees of blocks) up to isomorphism.

Every class is stored in a canonical labeling: blocks are numbered in
depth-first preorder with the root at 0 and the children of each block
visited heaviest-first (by the total order on canonical subtree keys).  Under
this labeling the subtree of block ``x`` occupies the contiguous index range
``x .. x + subtree_size[x] - 1``, which most of the queries below rely on.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

HARD_CAP = 8


class MalformedGraphError(ValueError):
    pass


def _subtree_key(children: Sequence[Sequence[int]], v: int):
    keys = sorted((_subtree_key(children, c) for c in children[v]), reverse=True)
    return (1 + sum(k[0] for k in keys), tuple(keys))


def _key_name(key) -> str:
    size, kids = key
    if not kids:
        return str(size)
    if len(kids) == 1:
        return f"{size}.{_key_name(kids[0])}"
    return f"{size}.(" + ",".join(_key_name(k) for k in kids) + ")"


def _children_of(parents: Sequence[Optional[int]]) -> list[list[int]]:
    n = len(parents)
    roots = [i for i, p in enumerate(parents) if p is None or p < 0]
    if len(roots) != 1:
        raise MalformedGraphError(f"expected exactly one root, found {len(roots)}")
    children: list[list[int]] = [[] for _ in range(n)]
    for i, p in enumerate(parents):
        if p is None or p < 0:
            continue
        if not 0 <= p < n or p == i:
            raise MalformedGraphError(f"block {i} has invalid parent {p}")
        children[p].append(i)
    # every block must hang off the root
    seen = {roots[0]}
    stack = [roots[0]]
    while stack:
        v = stack.pop()
        for c in children[v]:
            seen.add(c)
            stack.append(c)
    if len(seen) != n:
        raise MalformedGraphError("parent array contains a cycle or detached blocks")
    return children


def _canonical_order(parents: Sequence[Optional[int]]):
    """Return (key, preorder list of old labels) for an arbitrary labeled tree."""
    children = _children_of(parents)
    root = next(i for i, p in enumerate(parents) if p is None or p < 0)
    keys: dict[int, tuple] = {}

    def key(v):
        if v not in keys:
            ks = sorted((key(c) for c in children[v]), reverse=True)
            keys[v] = (1 + sum(k[0] for k in ks), tuple(ks))
        return keys[v]

    order: list[int] = []

    def walk(v):
        order.append(v)
        for c in sorted(children[v], key=key, reverse=True):
            walk(c)

    walk(root)
    return key(root), order


@dataclass(frozen=True, eq=False)
class GraphClass:
    """Canonical representative of one isomorphism class of Nakamoto graphs."""

    id: int
    size: int
    parents: tuple  # parents[0] is None
    key: tuple = field(repr=False)
    name: str = ""
    orbits: tuple = ()  # orbit label (= lowest index in orbit) per block
    subtree_size: tuple = field(default=(), repr=False)
    depth: tuple = field(default=(), repr=False)

    @property
    def orbit_reps(self) -> tuple:
        return tuple(sorted(set(self.orbits)))

    @property
    def children(self) -> tuple:
        kids = [[] for _ in range(self.size)]
        for i in range(1, self.size):
            kids[self.parents[i]].append(i)
        return tuple(tuple(k) for k in kids)

    def subtree(self, x: int) -> range:
        return range(x, x + self.subtree_size[x])

    def __repr__(self):
        return f"GraphClass({self.name}, id={self.id})"


def _build_class(gid: int, key) -> GraphClass:
    # expand a key into its canonical preorder parent array
    parents: list[Optional[int]] = []
    path_keys: list[tuple] = []

    def emit(k, parent, trail):
        me = len(parents)
        parents.append(parent)
        path_keys.append(trail + (k,))
        for child in k[1]:
            emit(child, me, trail + (k,))

    emit(key, None, ())
    n = len(parents)
    sizes = [0] * n
    for i in reversed(range(n)):
        sizes[i] += 1
        if parents[i] is not None:
            sizes[parents[i]] += sizes[i]
    depth = [0] * n
    for i in range(1, n):
        depth[i] = depth[parents[i]] + 1
    # blocks are topologically identical iff their root paths carry the same subtree keys
    first: dict[tuple, int] = {}
    orbits = tuple(first.setdefault(pk, i) for i, pk in enumerate(path_keys))
    return GraphClass(
        id=gid, size=n, parents=tuple(parents), key=key, name="g_" + _key_name(key),
        orbits=orbits, subtree_size=tuple(sizes), depth=tuple(depth),
    )


def _all_keys(n: int) -> list:
    """Canonical keys of all rooted trees with n blocks."""
    if n == 1:
        return [(1, ())]
    out = set()
    # a root plus a multiset of subtrees whose sizes sum to n - 1
    def partitions(remaining, max_key):
        if remaining == 0:
            yield ()
            return
        for size in range(min(remaining, max_key[0] if max_key else remaining), 0, -1):
            for k in sorted(_keys_of_size(size), reverse=True):
                if max_key is not None and k > max_key:
                    continue
                for rest in partitions(remaining - size, k):
                    yield (k,) + rest

    for kids in partitions(n - 1, None):
        out.add((n, kids))
    return sorted(out)


@lru_cache(maxsize=None)
def _keys_of_size(n: int) -> tuple:
    return tuple(_all_keys(n))


class Catalog:
    """All graph classes with 1..max_blocks blocks plus precomputed queries."""

    def __init__(self, max_blocks: int):
        if max_blocks < 1:
            raise ValueError("max_blocks must be >= 1")
        if max_blocks > HARD_CAP:
            raise ValueError(f"max_blocks={max_blocks} exceeds the hard cap of {HARD_CAP}")
        self.max_blocks = max_blocks
        self.classes: list[GraphClass] = []
        for n in range(1, max_blocks + 1):
            for key in _keys_of_size(n):
                self.classes.append(_build_class(len(self.classes), key))
        self.by_key = {g.key: g for g in self.classes}
        self._autos: dict[int, list[tuple]] = {}
        self._extend: dict[tuple, tuple] = {}
        self._subsets: dict[int, list[LocalCandidate]] = {}
        self._single: dict[int, list[LocalCandidate]] = {}

    def __len__(self):
        return len(self.classes)

    def __getitem__(self, gid: int) -> GraphClass:
        return self.classes[gid]

    def of_size(self, n: int) -> list[GraphClass]:
        return [g for g in self.classes if g.size == n]

    def root(self) -> GraphClass:
        return self.classes[0]

    def canonicalize(self, parents: Sequence[Optional[int]]):
        """Canonical class of a labeled tree and the relabel map old -> new."""
        key, order = _canonical_order(parents)
        if key not in self.by_key:
            raise ValueError(f"graph with {key[0]} blocks exceeds catalog size {self.max_blocks}")
        relabel = [0] * len(order)
        for new, old in enumerate(order):
            relabel[old] = new
        return self.by_key[key], tuple(relabel)

    def automorphisms(self, g: GraphClass) -> list[tuple]:
        """All automorphisms of ``g`` as permutations ``perm[i] = image of block i``."""
        if g.id not in self._autos:
            self._autos[g.id] = _automorphisms(g)
        return self._autos[g.id]

    def extend(self, g: GraphClass, x: int):
        """Append a child to block ``x``: (class, relabel map of old blocks, new block index)."""
        if not 0 <= x < g.size:
            raise IndexError(f"block {x} not in {g.name}")
        hit = self._extend.get((g.id, x))
        if hit is None:
            cls, relabel = self.canonicalize(g.parents + (x,))
            hit = (cls, relabel[:-1], relabel[-1])
            self._extend[(g.id, x)] = hit
        return hit

    def phi(self, g: GraphClass, g_next: GraphClass) -> frozenset:
        """Blocks of ``g`` whose extension lands in ``g_next``."""
        if g_next.size != g.size + 1:
            return frozenset()
        return frozenset(x for x in range(g.size) if self.extend(g, x)[0] is g_next)

    def gamma_subgraph(self, g: GraphClass, x: int):
        """Induced subgraph of ``x`` and its descendants: (class, kept blocks, relabel)."""
        kept = tuple(g.subtree(x))
        local = [None if i == x else kept.index(g.parents[i]) for i in kept]
        cls, relabel = self.canonicalize(local)
        return cls, kept, {old: relabel[j] for j, old in enumerate(kept)}

    def root_connected_subgraphs(self, g: GraphClass) -> list["LocalCandidate"]:
        """Possible local block graphs inside ``g``, one per automorphism orbit of subsets."""
        if g.id not in self._subsets:
            self._subsets[g.id] = _candidates(self, g)
        return self._subsets[g.id]

    def down_closed_subsets(self, g: GraphClass) -> list["LocalCandidate"]:
        """Every root-connected block subset separately (no automorphism merging)."""
        if g.id not in self._single:
            out = [LocalCandidate(0, 0, (0,), None, ())]
            for mask in _down_closed_masks(g):
                cls, emb = self.local_of_mask(g, mask)
                out.append(LocalCandidate(len(out), mask, (mask,), cls, emb))
            self._single[g.id] = out
        return self._single[g.id]

    def candidates(self, g: GraphClass, subsets: bool) -> list["LocalCandidate"]:
        return self.down_closed_subsets(g) if subsets else self.root_connected_subgraphs(g)

    def local_of_mask(self, g: GraphClass, mask: int):
        """(local class, embedding local->global) for a down-closed block subset."""
        return _local_of_mask(self, g.id, mask)

    def dump(self) -> str:
        """One line per class: id, size, canonical code, name, orbit labels."""
        lines = []
        for g in self.classes:
            code = ",".join("-" if p is None else str(p) for p in g.parents)
            orb = ",".join(map(str, g.orbits))
            lines.append(f"{g.id}\t{g.size}\t{code}\t{g.name}\t{orb}")
        return "\n".join(lines) + "\n"


def _automorphisms(g: GraphClass) -> list[tuple]:
    children = g.children

    def autos_at(v) -> list[dict]:
        # every automorphism permutes equal-key children and recurses into them
        kids = children[v]
        groups: dict[tuple, list[int]] = {}
        for c in kids:
            groups.setdefault(_subtree_key(children, c), []).append(c)
        per_child = {c: autos_at(c) for c in kids}
        options = []
        for members in groups.values():
            options.append([list(zip(members, perm)) for perm in itertools.permutations(members)])
        result = []
        for assignment in itertools.product(*options):
            pairs = [pair for block in assignment for pair in block]
            # map child c onto target t positionally, then apply an automorphism of t
            inner = [[(c, t, a) for a in per_child[t]] for c, t in pairs]
            for combo in itertools.product(*inner):
                m = {v: v}
                for c, t, a in combo:
                    for off in range(g.subtree_size[c]):
                        m[c + off] = a[t + off]
                result.append(m)
        return result

    perms = [tuple(m[i] for i in range(g.size)) for m in autos_at(0)]
    return sorted(set(perms))


@dataclass(frozen=True)
class LocalCandidate:
    """One orbit of root-connected block subsets of a global graph.

    ``mask`` is the orbit's lowest bitmask; ``members`` lists every subset in
    the orbit.  The null local graph has ``mask == 0`` and ``cls is None``.
    """

    index: int
    mask: int
    members: tuple
    cls: Optional[GraphClass]
    embedding: tuple  # local canonical index -> global block


def _mask_image(mask: int, perm: tuple) -> int:
    out = 0
    i = 0
    while mask:
        if mask & 1:
            out |= 1 << perm[i]
        mask >>= 1
        i += 1
    return out


def _down_closed_masks(g: GraphClass) -> list[int]:
    out = []
    for mask in range(1, 1 << g.size, 2):  # root bit set
        if all(not (mask >> i) & 1 or (mask >> g.parents[i]) & 1 for i in range(1, g.size)):
            out.append(mask)
    return out


def _candidates(cat: Catalog, g: GraphClass) -> list[LocalCandidate]:
    autos = cat.automorphisms(g)
    orbits: dict[int, set] = {}
    for mask in _down_closed_masks(g):
        rep = min(_mask_image(mask, p) for p in autos)
        orbits.setdefault(rep, set()).add(mask)
    out = [LocalCandidate(0, 0, (0,), None, ())]
    for rep in sorted(orbits):
        cls, emb = cat.local_of_mask(g, rep)
        out.append(LocalCandidate(len(out), rep, tuple(sorted(orbits[rep])), cls, emb))
    return out


_local_cache: dict[tuple, tuple] = {}


def _local_of_mask(cat: Catalog, gid: int, mask: int):
    hit = _local_cache.get((gid, mask))
    if hit is not None:
        return hit
    g = cat[gid]
    if mask == 0:
        hit = (None, ())
    else:
        kept = [i for i in range(g.size) if (mask >> i) & 1]
        if kept[0] != 0:
            raise ValueError("local block graph must contain the root")
        pos = {b: j for j, b in enumerate(kept)}
        local = [None] + [pos[g.parents[b]] for b in kept[1:]]
        cls, relabel = cat.canonicalize(local)
        emb = [0] * len(kept)
        for j, b in enumerate(kept):
            emb[relabel[j]] = b
        hit = (cls, tuple(emb))
    _local_cache[(gid, mask)] = hit
    return hit


@lru_cache(maxsize=None)
def catalog(max_blocks: int = HARD_CAP) -> Catalog:
    return Catalog(max_blocks)


def _cat() -> Catalog:
    return catalog(HARD_CAP)


def enumerate_classes(max_blocks: int) -> list[GraphClass]:
    """All isomorphism classes with 1..max_blocks blocks, ids dense in this order."""
    if max_blocks < 1:
        raise ValueError("max_blocks must be >= 1")
    if max_blocks > HARD_CAP:
        raise ValueError(f"max_blocks={max_blocks} exceeds the hard cap of {HARD_CAP}")
    return [g for g in _cat().classes if g.size <= max_blocks]


def class_by_name(name: str) -> GraphClass:
    for g in _cat().classes:
        if g.name == name:
            return g
    raise KeyError(name)


def canonicalize(parents: Sequence[Optional[int]]):
    return _cat().canonicalize(parents)


def extend(g: GraphClass, x: int):
    return _cat().extend(g, x)


def phi(g: GraphClass, g_next: GraphClass) -> frozenset:
    return _cat().phi(g, g_next)


def gamma_subgraph(g: GraphClass, x: int):
    return _cat().gamma_subgraph(g, x)


def ancestors(g: GraphClass, x: int) -> frozenset:
    out = []
    p = g.parents[x]
    while p is not None:
        out.append(p)
        p = g.parents[p]
    return frozenset(out)


def degree_counts(g: GraphClass, x: int) -> tuple[int, int]:
    """(descendants, blocks that are neither ancestors nor descendants) of ``x``."""
    d = g.subtree_size[x] - 1
    c = g.size - d - g.depth[x] - 1
    return d, c


def automorphism_orbits(g: GraphClass) -> list[frozenset]:
    groups: dict[int, list[int]] = {}
    for i, o in enumerate(g.orbits):
        groups.setdefault(o, []).append(i)
    return [frozenset(v) for _, v in sorted(groups.items())]


def automorphisms(g: GraphClass) -> list[tuple]:
    return _cat().automorphisms(g)


def lcr_tip(g: GraphClass) -> int:
    """Deepest block; ties go to the lowest canonical index (an orbit representative)."""
    deepest = max(g.depth)
    return g.depth.index(deepest)


def root_connected_subgraphs(g: GraphClass) -> list[LocalCandidate]:
    return _cat().root_connected_subgraphs(g)


def labeled_tree_count(n: int) -> int:
    """Number of distinct labeled rooted trees on n blocks (n^(n-1), Cayley)."""
    return n ** (n - 1)
