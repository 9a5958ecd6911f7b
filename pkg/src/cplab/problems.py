"""Problem instances and reference cell probe data structures.

Problem-level arguments are 1-based: updates ``j`` in ``1..n``, queries
``i`` in ``1..k``, set elements ``x`` in ``1..n``. Cell addresses are
0-based. The address layout of every structure is fixed and listed in
its class docstring; encoders and decoders depend on it.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .cellprobe import DynamicDS, Memory, Probe
from .circuits import LinearDS
from .gf2 import BitMatrix, ParseError


def ceil_div(a: int, b: int) -> int:
    return -(-a // b)


class DomainError(ValueError):
    pass


# -- instances ------------------------------------------------------------------

@dataclass(frozen=True)
class IndexingInstance:
    k: int
    n: int
    strings: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if len(self.strings) != self.k:
            raise ValueError(f"expected {self.k} strings, got {len(self.strings)}")
        for i, s in enumerate(self.strings, 1):
            if len(s) != self.n or any(b not in (0, 1) for b in s):
                raise ValueError(f"string {i} is not a bit string of length {self.n}")

    @classmethod
    def random(cls, k: int, n: int, rng: random.Random) -> "IndexingInstance":
        return cls(k, n, tuple(tuple(rng.getrandbits(1) for _ in range(n)) for _ in range(k)))

    @classmethod
    def zeros(cls, k: int, n: int) -> "IndexingInstance":
        return cls(k, n, ((0,) * n,) * k)

    def bit(self, i: int, j: int) -> int:
        return self.strings[i - 1][j - 1]

    def dumps(self) -> str:
        return f"{self.k} {self.n}\n" + "".join("".join(map(str, s)) + "\n" for s in self.strings)

    @classmethod
    def loads(cls, text: str) -> "IndexingInstance":
        m = _bit_rows(text, header_fields=2)
        k, n = m.rows, m.cols
        return cls(k, n, tuple(tuple(row) for row in m.to_lists()))


@dataclass(frozen=True)
class DisjointnessInstance:
    n: int
    S: frozenset[int]

    def __post_init__(self):
        bad = [x for x in self.S if not 1 <= x <= self.n]
        if bad:
            raise ValueError(f"elements {sorted(bad)} outside [1..{self.n}]")

    @classmethod
    def random(cls, n: int, rng: random.Random) -> "DisjointnessInstance":
        return cls(n, frozenset(x for x in range(1, n + 1) if rng.getrandbits(1)))

    @property
    def complement(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1)) - self.S

    def dumps(self) -> str:
        return f"{self.n}\n" + "".join("1" if x in self.S else "0" for x in range(1, self.n + 1)) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DisjointnessInstance":
        m = _bit_rows(text, header_fields=1)
        return cls(m.cols, frozenset(j + 1 for j in m.row_support(0)))


def _bit_rows(text: str, header_fields: int) -> BitMatrix:
    from .gf2 import loads

    lines = text.split("\n")
    if not lines or not lines[0].strip():
        raise ParseError("missing header", 1)
    head = lines[0].split()
    if len(head) != header_fields or not all(h.isdigit() for h in head):
        raise ParseError(f"bad header {lines[0]!r}", 1)
    if header_fields == 1:
        # one bit-row follows a bare `n` header
        return loads(f"1 {head[0]}\n" + "\n".join(lines[1:]))
    return loads(text)


# -- indexing -------------------------------------------------------------------

class ColumnCopyIndexing(DynamicDS):
    """Fast queries, slow updates.

    Layout, with ``c = ceil(k/w)`` cells per column:
      * ``0 .. c-1``: answer region, holding the column of the last update
        (column 1 before any update);
      * ``c*j + b``: cell ``b`` of column ``j``; bit ``i-1`` of a column sits
        at cell ``(i-1)//w``, bit ``(i-1)%w``.
    """

    name = "colcopy"

    def __init__(self, instance: IndexingInstance, w: int):
        self.instance = instance
        self.k, self.n, self.w = instance.k, instance.n, w
        self.cpc = ceil_div(self.k, w)
        top = self.cpc * (self.n + 1) - 1
        if top >= (1 << w):
            raise ValueError(f"w={w} cannot address {top + 1} cells")

    def col_addr(self, j: int, b: int) -> int:
        return self.cpc * j + b

    def _check_j(self, j: int) -> None:
        if not 1 <= j <= self.n:
            raise DomainError(f"update index {j} outside [1..{self.n}]")

    def _check_i(self, i: int) -> None:
        if not 1 <= i <= self.k:
            raise DomainError(f"query index {i} outside [1..{self.k}]")

    def _column_words(self, j: int) -> list[int]:
        words = [0] * self.cpc
        for i in range(1, self.k + 1):
            if self.instance.bit(i, j):
                words[(i - 1) // self.w] |= 1 << ((i - 1) % self.w)
        return words

    def preprocess(self, mem: Probe) -> None:
        for j in range(1, self.n + 1):
            for b, word in enumerate(self._column_words(j)):
                mem.write(self.col_addr(j, b), word)
        if self.n:
            for b, word in enumerate(self._column_words(1)):
                mem.write(b, word)

    def update(self, mem: Probe, j: int) -> None:
        self._check_j(j)
        for b in range(self.cpc):
            mem.write(b, mem.read(self.col_addr(j, b)))

    def query(self, mem: Probe, i: int) -> int:
        self._check_i(i)
        return (mem.read((i - 1) // self.w) >> ((i - 1) % self.w)) & 1

    def query_probes(self, i: int) -> frozenset[int]:
        self._check_i(i)
        return frozenset({(i - 1) // self.w})

    def update_probes(self, j: int) -> frozenset[int]:
        self._check_j(j)
        return frozenset(range(self.cpc)) | {self.col_addr(j, b) for b in range(self.cpc)}

    def all_queries(self) -> range:
        return range(1, self.k + 1)

    def all_updates(self) -> range:
        return range(1, self.n + 1)


class RegisterIndexing(DynamicDS):
    """Fast updates, slow queries.

    Layout, with ``r = ceil(n/w)`` cells per string:
      * ``0``: register holding the last update index (1 before any update);
      * ``1 + (i-1)*r + b``: cell ``b`` of string ``i``; bit ``j-1`` sits at
        cell ``(j-1)//w``, bit ``(j-1)%w``.
    """

    name = "register"

    def __init__(self, instance: IndexingInstance, w: int):
        self.instance = instance
        self.k, self.n, self.w = instance.k, instance.n, w
        self.rpc = ceil_div(self.n, w)
        top = self.k * self.rpc
        if top >= (1 << w) or self.n >= (1 << w):
            raise ValueError(f"w={w} too small for k={self.k}, n={self.n}")

    def row_addr(self, i: int, b: int) -> int:
        return 1 + (i - 1) * self.rpc + b

    def _check_j(self, j: int) -> None:
        if not 1 <= j <= self.n:
            raise DomainError(f"update index {j} outside [1..{self.n}]")

    def _check_i(self, i: int) -> None:
        if not 1 <= i <= self.k:
            raise DomainError(f"query index {i} outside [1..{self.k}]")

    def preprocess(self, mem: Probe) -> None:
        for i in range(1, self.k + 1):
            words = [0] * self.rpc
            for j in range(1, self.n + 1):
                if self.instance.bit(i, j):
                    words[(j - 1) // self.w] |= 1 << ((j - 1) % self.w)
            for b, word in enumerate(words):
                mem.write(self.row_addr(i, b), word)
        mem.write(0, 1)

    def update(self, mem: Probe, j: int) -> None:
        self._check_j(j)
        mem.write(0, j)

    def query(self, mem: Probe, i: int) -> int:
        self._check_i(i)
        j = mem.read(0)
        words = [mem.read(self.row_addr(i, b)) for b in range(self.rpc)]
        if not 1 <= j <= self.n:
            return 0  # only reachable on arbitrary memory contents
        return (words[(j - 1) // self.w] >> ((j - 1) % self.w)) & 1

    def query_probes(self, i: int) -> frozenset[int]:
        self._check_i(i)
        return frozenset({0} | {self.row_addr(i, b) for b in range(self.rpc)})

    def update_probes(self, j: int) -> frozenset[int]:
        self._check_j(j)
        return frozenset({0})

    def all_queries(self) -> range:
        return range(1, self.k + 1)

    def all_updates(self) -> range:
        return range(1, self.n + 1)


def indexing_baseline_colcopy(instance: IndexingInstance, w: int) -> ColumnCopyIndexing:
    return ColumnCopyIndexing(instance, w)


def indexing_baseline_register(instance: IndexingInstance, w: int) -> RegisterIndexing:
    return RegisterIndexing(instance, w)


# -- set disjointness ---------------------------------------------------------------

class BitsetDisjointness(DynamicDS):
    """Characteristic vectors of S and T.

    Layout, with ``c = ceil(n/w)``: S-region at ``0 .. c-1``, T-region at
    ``c .. 2c-1``; element ``x`` is bit ``(x-1)%w`` of cell ``(x-1)//w`` of
    its region. The single query returns True when S and T are disjoint.
    """

    name = "bitset"

    def __init__(self, instance: DisjointnessInstance, w: int):
        self.instance = instance
        self.n, self.w = instance.n, w
        self.c = ceil_div(self.n, w)
        if 2 * self.c - 1 >= (1 << w):
            raise ValueError(f"w={w} cannot address {2 * self.c} cells")

    def _check_x(self, x: int) -> None:
        if not 1 <= x <= self.n:
            raise DomainError(f"element {x} outside [1..{self.n}]")

    def preprocess(self, mem: Probe) -> None:
        words = [0] * self.c
        for x in self.instance.S:
            words[(x - 1) // self.w] |= 1 << ((x - 1) % self.w)
        for b, word in enumerate(words):
            mem.write(b, word)

    def update(self, mem: Probe, x: int) -> None:
        self._check_x(x)
        addr = self.c + (x - 1) // self.w
        mem.write(addr, mem.read(addr) | (1 << ((x - 1) % self.w)))

    def query(self, mem: Probe, q=None) -> bool:
        s = [mem.read(b) for b in range(self.c)]
        t = [mem.read(self.c + b) for b in range(self.c)]
        return all(a & b == 0 for a, b in zip(s, t))

    def query_probes(self, q=None) -> frozenset[int]:
        return frozenset(range(2 * self.c))

    def update_probes(self, x: int) -> frozenset[int]:
        self._check_x(x)
        return frozenset({self.c + (x - 1) // self.w})

    def all_queries(self) -> tuple:
        return (None,)

    def all_updates(self) -> range:
        return range(1, self.n + 1)


def disjointness_bitset(instance: DisjointnessInstance, w: int) -> BitsetDisjointness:
    return BitsetDisjointness(instance, w)


# -- linear structures ----------------------------------------------------------------

def dyadic_intervals(n: int) -> list[tuple[int, int]]:
    """Aligned dyadic intervals of ``[1..n]`` in heap order (root first)."""
    if n < 1 or n & (n - 1):
        raise ValueError(f"n={n} is not a power of two")
    out = []
    size = n
    while size >= 1:
        out.extend((lo, lo + size - 1) for lo in range(1, n + 1, size))
        size //= 2
    return out


def canonical_decomposition(k: int) -> list[tuple[int, int]]:
    """Greedy left-to-right split of ``[1..k]`` into the largest aligned dyadic blocks."""
    parts = []
    start = 1
    while start <= k:
        size = 1
        while (start - 1) % (size * 2) == 0 and start + size * 2 - 1 <= k:
            size *= 2
        parts.append((start, start + size - 1))
        start += size
    return parts


def prefix_sum_range_tree(n: int) -> LinearDS:
    """One-dimensional range tree for prefix XOR: one cell per dyadic interval."""
    intervals = dyadic_intervals(n)
    index = {iv: c for c, iv in enumerate(intervals)}
    V = BitMatrix.from_supports([range(lo - 1, hi) for lo, hi in intervals], n)
    Q = BitMatrix.from_supports(
        [[index[iv] for iv in canonical_decomposition(k)] for k in range(1, n + 1)], len(intervals)
    )
    return LinearDS(V, Q)


class LinearCellProbe(DynamicDS):
    """A :class:`LinearDS` run on the cell probe machine.

    Cell ``c`` lives at address ``c`` and holds one bit. ``update(i)`` flips
    the cells in column ``i-1`` of ``V``; ``query(j)`` XORs the cells in row
    ``j-1`` of ``Q``. The word size defaults to the smallest width that can
    address every cell, since a 1-bit word could only address two cells.
    """

    name = "linear"

    def __init__(self, ds: LinearDS, w: int | None = None, initial: Sequence[int] | None = None):
        self.ds = ds
        self.w = w if w is not None else max(1, (ds.cells - 1).bit_length())
        if ds.cells and ds.cells - 1 >= (1 << self.w):
            raise ValueError(f"w={self.w} cannot address {ds.cells} cells")
        self.initial = list(initial) if initial is not None else [0] * ds.n
        self._cols = [tuple(i for i in range(ds.cells) if ds.V[i, j]) for j in range(ds.n)]
        self._rows = [tuple(ds.Q.row_support(j)) for j in range(ds.m)]

    def preprocess(self, mem: Probe) -> None:
        x = sum(b << j for j, b in enumerate(self.initial))
        stored = self.ds.V.mat_vec(x)
        for c in range(self.ds.cells):
            mem.write(c, (stored >> c) & 1)

    def update(self, mem: Probe, i: int) -> None:
        if not 1 <= i <= self.ds.n:
            raise DomainError(f"position {i} outside [1..{self.ds.n}]")
        for c in self._cols[i - 1]:
            mem.write(c, mem.read(c) ^ 1)

    def query(self, mem: Probe, j: int) -> int:
        if not 1 <= j <= self.ds.m:
            raise DomainError(f"query {j} outside [1..{self.ds.m}]")
        acc = 0
        for c in self._rows[j - 1]:
            acc ^= mem.read(c) & 1
        return acc

    def query_probes(self, j: int) -> frozenset[int]:
        return frozenset(self._rows[j - 1])

    def update_probes(self, i: int) -> frozenset[int]:
        return frozenset(self._cols[i - 1])

    def all_queries(self) -> range:
        return range(1, self.ds.m + 1)

    def all_updates(self) -> range:
        return range(1, self.ds.n + 1)


class CopyCellDS(DynamicDS):
    """Non-adaptive but not memoryless.

    Update 1 increments cell 1; update 2 copies cell 1 into cell 2. The only
    query reads cell 2, i.e. how many times update 1 had run when update 2
    last ran.
    """

    name = "copycell"

    def __init__(self, w: int = 8):
        self.w = w

    def update(self, mem: Probe, u: int) -> None:
        if u == 1:
            mem.write(1, (mem.read(1) + 1) % (1 << self.w))
        elif u == 2:
            mem.write(2, mem.read(1))
        else:
            raise DomainError(f"update {u} is not 1 or 2")

    def query(self, mem: Probe, q=None) -> int:
        return mem.read(2)

    def query_probes(self, q=None) -> frozenset[int]:
        return frozenset({2})

    def update_probes(self, u: int) -> frozenset[int]:
        return frozenset({1}) if u == 1 else frozenset({1, 2})

    def all_queries(self) -> tuple:
        return (None,)

    def all_updates(self) -> tuple:
        return (1, 2)


def fresh_memory(ds: DynamicDS) -> Memory:
    return Memory(ds.w)
