"""Sparse multi-indices and downward-closed index sets.

Dimensions are 1-based. A :class:`MultiIndex` stores only its nonzero
entries, so indices living in a 1025-dimensional parameter space cost only
as much as their support.
"""
from __future__ import annotations

import itertools
import json
import math
from typing import Iterable, Iterator, Mapping

RECTANGLE_LIMIT = 100_000


class MultiIndex:
    """Finitely supported map ``dimension -> level``; absent dimensions are level 0."""

    __slots__ = ("_items", "_hash")

    def __init__(self, entries: Mapping[int, int] | Iterable[tuple[int, int]] = ()):
        if isinstance(entries, Mapping):
            entries = entries.items()
        items = {}
        for j, level in entries:
            j, level = int(j), int(level)
            if j < 1:
                raise ValueError(f"dimensions are 1-based, got {j}")
            if level < 0:
                raise ValueError(f"negative level {level} in dimension {j}")
            if level:
                items[j] = level
        self._items = tuple(sorted(items.items()))
        self._hash = hash(self._items)

    @classmethod
    def zero(cls) -> "MultiIndex":
        return cls()

    @classmethod
    def unit(cls, j: int, level: int = 1) -> "MultiIndex":
        return cls({j: level})

    @classmethod
    def from_dense(cls, levels: Iterable[int]) -> "MultiIndex":
        return cls((j + 1, v) for j, v in enumerate(levels))

    def __getitem__(self, j: int) -> int:
        for k, v in self._items:
            if k == j:
                return v
        return 0

    def items(self) -> tuple[tuple[int, int], ...]:
        return self._items

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(j for j, _ in self._items)

    @property
    def max_dim(self) -> int:
        """Largest active dimension, 0 for the zero index."""
        return self._items[-1][0] if self._items else 0

    def order(self) -> int:
        """|nu| = sum of levels."""
        return sum(v for _, v in self._items)

    def max_level(self) -> int:
        return max((v for _, v in self._items), default=0)

    def is_zero(self) -> bool:
        return not self._items

    def shifted(self, j: int, delta: int) -> "MultiIndex":
        d = dict(self._items)
        d[j] = d.get(j, 0) + delta
        return MultiIndex(d)

    def backward_neighbors(self) -> Iterator["MultiIndex"]:
        for j in self.support:
            yield self.shifted(j, -1)

    def to_dense(self, dim: int) -> list[int]:
        out = [0] * dim
        for j, v in self._items:
            out[j - 1] = v
        return out

    def sort_key(self) -> tuple[tuple[int, int], ...]:
        """Canonical order: lexicographic on the (dimension, level) pairs."""
        return self._items

    def to_json(self) -> str:
        return json.dumps({str(j): v for j, v in self._items}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str | Mapping[str, int]) -> "MultiIndex":
        data = json.loads(text) if isinstance(text, str) else text
        return cls({int(k): int(v) for k, v in data.items()})

    def __eq__(self, other) -> bool:
        return isinstance(other, MultiIndex) and self._items == other._items

    def __lt__(self, other: "MultiIndex") -> bool:
        return self._items < other._items

    def __hash__(self) -> int:
        return self._hash

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        d = dict(self._items)
        for j, v in other._items:
            d[j] = d.get(j, 0) + v
        return MultiIndex(d)

    def __repr__(self) -> str:
        if not self._items:
            return "MultiIndex(0)"
        return "MultiIndex(" + ", ".join(f"{j}:{v}" for j, v in self._items) + ")"


def leq(a: MultiIndex, b: MultiIndex) -> bool:
    """Componentwise partial order a <= b."""
    return all(v <= b[j] for j, v in a.items())


def is_downward_closed(indices: Iterable[MultiIndex]) -> bool:
    members = set(indices)
    return all(mu in members for nu in members for mu in nu.backward_neighbors())


class IndexSet:
    """Downward-closed set of multi-indices kept in insertion order."""

    def __init__(self, indices: Iterable[MultiIndex] = ()):
        self.members: list[MultiIndex] = [MultiIndex.zero()]
        self._lookup: set[MultiIndex] = {self.members[0]}
        self.j_max = 0
        for nu in indices:
            if nu not in self._lookup:
                self.add(nu)

    def add(self, nu: MultiIndex) -> None:
        if nu in self._lookup:
            raise ValueError(f"{nu!r} already in the index set")
        missing = [mu for mu in nu.backward_neighbors() if mu not in self._lookup]
        if missing:
            raise ValueError(f"adding {nu!r} breaks downward closedness (missing {missing[0]!r})")
        self.members.append(nu)
        self._lookup.add(nu)
        self.j_max = max(self.j_max, nu.max_dim)

    def __contains__(self, nu: MultiIndex) -> bool:
        return nu in self._lookup

    def __iter__(self) -> Iterator[MultiIndex]:
        return iter(self.members)

    def __len__(self) -> int:
        return len(self.members)

    def to_json(self) -> str:
        return "[" + ",".join(nu.to_json() for nu in self.members) + "]"

    @classmethod
    def from_json(cls, text: str) -> "IndexSet":
        return cls(MultiIndex.from_json(d) for d in json.loads(text))


def is_admissible(nu: MultiIndex, members) -> bool:
    """True if every backward neighbor of ``nu`` is in ``members``."""
    return all(mu in members for mu in nu.backward_neighbors())


def reduced_forward_neighbors(index_set: IndexSet | Iterable[MultiIndex], dim_cap: int) -> list[MultiIndex]:
    """Candidates one step beyond the set, where only dimension ``j(set)+1`` may newly activate.

    Dimensions beyond ``dim_cap`` never activate.
    """
    if dim_cap < 1:
        raise ValueError("dim_cap must be >= 1")
    members = list(index_set)
    lookup = set(members)
    if MultiIndex.zero() not in lookup or not is_downward_closed(lookup):
        raise ValueError("index set is not downward closed")
    j_max = max((nu.max_dim for nu in members), default=0)
    if j_max > dim_cap:
        raise ValueError(f"index set already activates dimension {j_max} > dim_cap {dim_cap}")
    limit = min(j_max + 1, dim_cap)
    out = set()
    for nu in members:
        for j in range(1, limit + 1):
            cand = nu.shifted(j, 1)
            if cand not in lookup and is_admissible(cand, lookup):
                out.add(cand)
    return sorted(out)


def rectangle(nu: MultiIndex, limit: int = RECTANGLE_LIMIT) -> list[MultiIndex]:
    """All mu <= nu, guarded against combinatorial blowup."""
    size = math.prod(v + 1 for _, v in nu.items())
    if size > limit:
        raise ValueError(f"rectangle of {nu!r} has {size} members, above the limit {limit}")
    dims = nu.support
    ranges = [range(v + 1) for _, v in nu.items()]
    return [MultiIndex(zip(dims, levels)) for levels in itertools.product(*ranges)]
