"""Bipartite connection topologies between two consecutive layers.

A topology connects ``n`` left neurons (layer l) to ``m`` right neurons
(layer l+1). Row ``i`` lists the right neurons that left neuron ``i`` feeds.

Random constructions draw from numpy's PCG64 bit generator seeded with the
64-bit seed of the :class:`ConstructionSpec`, so a ``(spec, n, m)`` triple
always yields the same topology.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np


class TopologyError(ValueError):
    pass


class InvalidDegreeError(TopologyError):
    pass


class MissingSeedError(TopologyError):
    pass


class Kind(str, enum.Enum):
    RANDOM_EDGE = "RandomEdge"
    RANDOM_ROTATING = "RandomRotating"
    RANDOM_D_REGULAR = "RandomDRegular"
    REGULAR_ROTATING = "RegularRotating"
    LONG_SHORT_ROTATING = "LongShortRotating"
    FIBONACCI_ROTATING = "FibonacciRotating"
    FULLY_CONNECTED = "FullyConnected"

    @property
    def is_random(self) -> bool:
        return self in RANDOM_KINDS

    @property
    def is_rotating(self) -> bool:
        return self in ROTATING_KINDS

    @classmethod
    def parse(cls, name: Union[str, "Kind"]) -> "Kind":
        if isinstance(name, Kind):
            return name
        key = name.strip().replace("_", "").replace("-", "").lower()
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        raise TopologyError(f"unknown construction {name!r}")


RANDOM_KINDS = frozenset({Kind.RANDOM_EDGE, Kind.RANDOM_ROTATING, Kind.RANDOM_D_REGULAR})
ROTATING_KINDS = frozenset(
    {
        Kind.RANDOM_ROTATING,
        Kind.REGULAR_ROTATING,
        Kind.LONG_SHORT_ROTATING,
        Kind.FIBONACCI_ROTATING,
    }
)


@dataclass(frozen=True)
class ConstructionSpec:
    kind: Kind
    k: Optional[int] = None
    seed: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))

    def label(self) -> str:
        parts = [self.kind.value]
        if self.k is not None:
            parts.append(f"k={self.k}")
        if self.seed is not None:
            parts.append(f"seed={self.seed}")
        return ":".join(parts)


@dataclass(frozen=True, eq=False)
class BipartiteTopology:
    """Unweighted n x m bipartite adjacency stored as sorted per-row column lists."""

    n: int
    m: int
    rows: tuple
    construction: str = "Custom"
    k: Optional[int] = None
    seed: Optional[int] = None
    _offsets: np.ndarray = field(default=None, repr=False, compare=False)
    _cols: np.ndarray = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        rows = tuple(np.asarray(r, dtype=np.int64) for r in self.rows)
        if len(rows) != self.n:
            raise TopologyError(f"expected {self.n} rows, got {len(rows)}")
        for i, r in enumerate(rows):
            if r.size and (r[0] < 0 or r[-1] >= self.m):
                raise TopologyError(f"row {i} has a column outside [0, {self.m})")
            if r.size > 1 and np.any(np.diff(r) <= 0):
                raise TopologyError(f"row {i} is not strictly ascending")
            r.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        lengths = np.fromiter((r.size for r in rows), dtype=np.int64, count=self.n)
        offsets = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(lengths, out=offsets[1:])
        cols = np.concatenate(rows) if self.n else np.zeros(0, dtype=np.int64)
        offsets.setflags(write=False)
        cols.setflags(write=False)
        object.__setattr__(self, "_offsets", offsets)
        object.__setattr__(self, "_cols", cols)

    @property
    def edge_count(self) -> int:
        return int(self._offsets[-1])

    @property
    def row_offsets(self) -> np.ndarray:
        return self._offsets

    @property
    def col_indices(self) -> np.ndarray:
        return self._cols

    def row_degrees(self) -> np.ndarray:
        return np.diff(self._offsets)

    def col_degrees(self) -> np.ndarray:
        return np.bincount(self._cols, minlength=self.m)

    def edges(self) -> np.ndarray:
        """(edge_count, 2) array of (i, j) pairs in row-major order."""
        left = np.repeat(np.arange(self.n), self.row_degrees())
        return np.stack([left, self._cols], axis=1)

    def to_dense(self) -> np.ndarray:
        adj = np.zeros((self.n, self.m), dtype=np.int8)
        e = self.edges()
        adj[e[:, 0], e[:, 1]] = 1
        return adj

    def transpose(self) -> "BipartiteTopology":
        """The same edge set seen from the right layer (m x n)."""
        e = self.edges()
        order = np.lexsort((e[:, 0], e[:, 1]))
        cols = e[order, 0]
        counts = np.bincount(e[:, 1], minlength=self.m)
        splits = np.cumsum(counts)[:-1]
        return BipartiteTopology(
            self.m, self.n, tuple(np.split(cols, splits)), self.construction, self.k, self.seed
        )

    def __eq__(self, other):
        if not isinstance(other, BipartiteTopology):
            return NotImplemented
        return (
            self.n == other.n
            and self.m == other.m
            and np.array_equal(self._offsets, other._offsets)
            and np.array_equal(self._cols, other._cols)
        )

    def __hash__(self):
        return hash((self.n, self.m, self._cols.tobytes(), self._offsets.tobytes()))


def density(t: BipartiteTopology) -> float:
    return t.edge_count / (t.n * t.m)


def _rng(seed: Optional[int]) -> np.random.Generator:
    if seed is None:
        raise MissingSeedError("random constructions need a seed")
    return np.random.Generator(np.random.PCG64(int(seed) & 0xFFFFFFFFFFFFFFFF))


def _check_degree(k, m, low=1):
    if k is None or int(k) != k or not (low <= k <= m):
        raise InvalidDegreeError(f"degree k={k} must be an integer in [{low}, {m}]")
    return int(k)


def _check_dims(n, m):
    if n < 1 or m < 1:
        raise TopologyError(f"layer sizes must be positive, got n={n}, m={m}")


def _rotated(n, m, base, kind, k, seed=None) -> BipartiteTopology:
    base = np.asarray(sorted(base), dtype=np.int64)
    rows = tuple(np.sort((base + i) % m) for i in range(n))
    return BipartiteTopology(n, m, rows, kind.value, k, seed)


def _probe_insert(candidates: Sequence[int], m: int, k: int, start=()) -> list:
    """Insert offsets in order, moving a taken offset forward (mod m) to the next free slot."""
    taken = np.zeros(m, dtype=bool)
    out = []
    for c in list(start) + list(candidates):
        if len(out) == k:
            break
        c %= m
        while taken[c]:
            c = (c + 1) % m
        taken[c] = True
        out.append(c)
    return out


def random_edge(n: int, m: int, k: int, seed: int) -> BipartiteTopology:
    _check_dims(n, m)
    k = _check_degree(k, m)
    rng = _rng(seed)
    p = k / m
    rows = []
    for _ in range(n):
        rows.append(np.flatnonzero(rng.random(m) < p))
    return BipartiteTopology(n, m, tuple(rows), Kind.RANDOM_EDGE.value, k, seed)


def random_rotating(n: int, m: int, k: int, seed: int) -> BipartiteTopology:
    _check_dims(n, m)
    k = _check_degree(k, m)
    base = _rng(seed).choice(m, size=k, replace=False)
    return _rotated(n, m, base, Kind.RANDOM_ROTATING, k, seed)


def random_d_regular(n: int, m: int, k: int, seed: int) -> BipartiteTopology:
    _check_dims(n, m)
    k = _check_degree(k, m)
    rng = _rng(seed)
    rows = tuple(np.sort(rng.choice(m, size=k, replace=False)) for _ in range(n))
    return BipartiteTopology(n, m, rows, Kind.RANDOM_D_REGULAR.value, k, seed)


def regular_rotating_offsets(m: int, k: int) -> list:
    return list(range(k))


def long_short_offsets(m: int, k: int) -> list:
    short = -(-k // 2)
    long_ = k // 2
    candidates = list(range(short))
    candidates += [short + (t * (m - short)) // long_ for t in range(long_)]
    return sorted(_probe_insert(candidates, m, k))


def fibonacci_numbers(k: int) -> list:
    fib = [1, 1]
    while len(fib) < k:
        fib.append(fib[-1] + fib[-2])
    return fib[:k]


def fibonacci_offsets(m: int, k: int) -> list:
    fib = fibonacci_numbers(k)
    if fib[-1] < m:
        positions = list(fib)
    else:
        positions = [(f * m) // fib[-1] for f in fib]
    # the first Fibonacci one occupies index zero
    positions[0] = 0
    return sorted(_probe_insert(positions, m, k))


def regular_rotating(n: int, m: int, k: int) -> BipartiteTopology:
    _check_dims(n, m)
    k = _check_degree(k, m)
    return _rotated(n, m, regular_rotating_offsets(m, k), Kind.REGULAR_ROTATING, k)


def long_short_rotating(n: int, m: int, k: int) -> BipartiteTopology:
    _check_dims(n, m)
    k = _check_degree(k, m, low=2)
    return _rotated(n, m, long_short_offsets(m, k), Kind.LONG_SHORT_ROTATING, k)


def fibonacci_rotating(n: int, m: int, k: int) -> BipartiteTopology:
    _check_dims(n, m)
    k = _check_degree(k, m)
    return _rotated(n, m, fibonacci_offsets(m, k), Kind.FIBONACCI_ROTATING, k)


def fully_connected(n: int, m: int) -> BipartiteTopology:
    _check_dims(n, m)
    full = np.arange(m)
    return BipartiteTopology(n, m, tuple(full for _ in range(n)), Kind.FULLY_CONNECTED.value, m)


def build(spec: ConstructionSpec, n: int, m: int) -> BipartiteTopology:
    kind = spec.kind
    if kind is Kind.FULLY_CONNECTED:
        return fully_connected(n, m)
    if kind.is_random and spec.seed is None:
        raise MissingSeedError(f"{kind.value} needs a seed")
    if kind is Kind.RANDOM_EDGE:
        return random_edge(n, m, spec.k, spec.seed)
    if kind is Kind.RANDOM_ROTATING:
        return random_rotating(n, m, spec.k, spec.seed)
    if kind is Kind.RANDOM_D_REGULAR:
        return random_d_regular(n, m, spec.k, spec.seed)
    if kind is Kind.REGULAR_ROTATING:
        return regular_rotating(n, m, spec.k)
    if kind is Kind.LONG_SHORT_ROTATING:
        return long_short_rotating(n, m, spec.k)
    if kind is Kind.FIBONACCI_ROTATING:
        return fibonacci_rotating(n, m, spec.k)
    raise TopologyError(f"unhandled construction {kind}")


# Edge-list interchange format:
#   header  "n m construction k seed"   (k and seed are "-" when absent)
#   body    one "i j" line per edge, row-major


def dumps(t: BipartiteTopology) -> str:
    k = "-" if t.k is None else str(t.k)
    seed = "-" if t.seed is None else str(t.seed)
    lines = [f"{t.n} {t.m} {t.construction} {k} {seed}"]
    lines += [f"{i} {j}" for i, j in t.edges()]
    return "\n".join(lines) + "\n"


def loads(text: str) -> BipartiteTopology:
    lines = [ln.split() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or len(lines[0]) != 5:
        raise TopologyError("edge list needs a header 'n m construction k seed'")
    n_s, m_s, construction, k_s, seed_s = lines[0]
    n, m = int(n_s), int(m_s)
    k = None if k_s == "-" else int(k_s)
    seed = None if seed_s == "-" else int(seed_s)
    rows = [[] for _ in range(n)]
    for parts in lines[1:]:
        if len(parts) != 2:
            raise TopologyError(f"bad edge line {' '.join(parts)!r}")
        i, j = int(parts[0]), int(parts[1])
        if not (0 <= i < n):
            raise TopologyError(f"left index {i} outside [0, {n})")
        rows[i].append(j)
    for i, r in enumerate(rows):
        if len(set(r)) != len(r):
            raise TopologyError(f"duplicate edge in row {i}")
    rows = tuple(sorted(r) for r in rows)
    return BipartiteTopology(n, m, rows, construction, k, seed)


def save(t: BipartiteTopology, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(t))


def load(path: Union[str, Path]) -> BipartiteTopology:
    return loads(Path(path).read_text())
