"""Local policies: one chosen block (orbit representative) per local graph class."""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator

from .graphs import HARD_CAP, GraphClass, catalog, lcr_tip


@dataclass(frozen=True)
class LocalPolicy:
    max_blocks: int
    choices: tuple  # indexed by class id, one orbit representative each

    def __post_init__(self):
        classes = _classes(self.max_blocks)
        if len(self.choices) != len(classes):
            raise ValueError(
                f"policy has {len(self.choices)} entries, expected {len(classes)} classes")
        for g, c in zip(classes, self.choices):
            if c not in g.orbit_reps:
                raise ValueError(f"choice {c} for {g.name} is not an orbit representative")

    def __call__(self, g: GraphClass) -> int:
        try:
            return self.choices[g.id]
        except IndexError:
            raise KeyError(f"policy undefined for {g.name}") from None

    def code(self) -> str:
        return ".".join(map(str, self.choices))

    @classmethod
    def from_code(cls, code: str, max_blocks: int) -> "LocalPolicy":
        return cls(max_blocks, tuple(int(c) for c in code.split(".")))

    def hamming(self, other: "LocalPolicy") -> int:
        return sum(a != b for a, b in zip(self.choices, other.choices))


def _classes(max_blocks: int) -> list[GraphClass]:
    return [g for g in catalog(HARD_CAP).classes if g.size <= max_blocks]


def lcr(max_blocks: int) -> LocalPolicy:
    """Longest chain rule: extend the deepest block."""
    return LocalPolicy(max_blocks, tuple(lcr_tip(g) for g in _classes(max_blocks)))


def always_root(max_blocks: int) -> LocalPolicy:
    return LocalPolicy(max_blocks, tuple(0 for _ in _classes(max_blocks)))


def policy_count(max_blocks: int) -> int:
    n = 1
    for g in _classes(max_blocks):
        n *= len(g.orbit_reps)
    return n


def all_policies(max_blocks: int) -> Iterator[LocalPolicy]:
    options = [g.orbit_reps for g in _classes(max_blocks)]
    for combo in itertools.product(*options):
        yield LocalPolicy(max_blocks, combo)


def write_policy(policy: LocalPolicy, path) -> None:
    """One line per class: canonical parent code, chosen block, readable name."""
    with open(path, "w", encoding="utf-8") as fh:
        for g, c in zip(_classes(policy.max_blocks), policy.choices):
            code = ",".join("-" if p is None else str(p) for p in g.parents)
            fh.write(f"{code}\t{c}\t{g.name}\n")


def read_policy(path) -> LocalPolicy:
    cat = catalog(HARD_CAP)
    chosen: dict[int, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split("\t") if "\t" in line else line.split()
            if len(fields) < 2:
                raise ValueError(f"{path}:{lineno}: expected '<code> <block>'")
            parents = [None if p == "-" else int(p) for p in fields[0].split(",")]
            g, relabel = cat.canonicalize(parents)
            if tuple(parents) != g.parents:
                raise ValueError(f"{path}:{lineno}: code {fields[0]} is not canonical")
            chosen[g.id] = int(fields[1])
    if not chosen:
        raise ValueError(f"{path}: empty policy file")
    max_blocks = max(cat[i].size for i in chosen)
    classes = _classes(max_blocks)
    missing = [g.name for g in classes if g.id not in chosen]
    if missing:
        raise ValueError(f"{path}: no entry for {', '.join(missing)}")
    return LocalPolicy(max_blocks, tuple(chosen[g.id] for g in classes))
