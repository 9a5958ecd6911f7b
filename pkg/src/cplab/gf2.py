"""Dense bit matrices over GF(2).

Each row is held as a Python int used as a packed bit-vector: bit ``j`` of
``data[i]`` is entry ``(i, j)``. Bits at or above ``cols`` are always zero.
"""
from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence


class ParseError(ValueError):
    """Malformed text input; carries the 1-based line and column."""

    def __init__(self, message: str, line: int, col: int = 1):
        super().__init__(f"line {line}, col {col}: {message}")
        self.line = line
        self.col = col


@dataclass(frozen=True)
class BitMatrix:
    rows: int
    cols: int
    data: tuple[int, ...]

    def __post_init__(self):
        if self.rows < 0 or self.cols < 0:
            raise ValueError(f"negative shape {self.rows}x{self.cols}")
        if len(self.data) != self.rows:
            raise ValueError(f"expected {self.rows} rows, got {len(self.data)}")
        mask = (1 << self.cols) - 1
        for i, r in enumerate(self.data):
            if r < 0 or r & ~mask:
                raise ValueError(f"row {i} has bits beyond column {self.cols}")

    # -- constructors -----------------------------------------------------

    @classmethod
    def zeros(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, (0,) * rows)

    @classmethod
    def ones(cls, rows: int, cols: int) -> "BitMatrix":
        return cls(rows, cols, ((1 << cols) - 1,) * rows)

    @classmethod
    def identity(cls, n: int) -> "BitMatrix":
        return cls(n, n, tuple(1 << i for i in range(n)))

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], cols: int | None = None) -> "BitMatrix":
        """Build from nested 0/1 sequences. ``cols`` is needed only when ``rows`` is empty."""
        if cols is None:
            cols = len(rows[0]) if rows else 0
        packed = []
        for i, row in enumerate(rows):
            if len(row) != cols:
                raise ValueError(f"row {i} has length {len(row)}, expected {cols}")
            v = 0
            for j, b in enumerate(row):
                if b not in (0, 1):
                    raise ValueError(f"entry ({i},{j}) is {b!r}, not a bit")
                v |= b << j
            packed.append(v)
        return cls(len(rows), cols, tuple(packed))

    @classmethod
    def from_supports(cls, supports: Iterable[Iterable[int]], cols: int) -> "BitMatrix":
        """Row ``i`` has ones exactly at the column indices in ``supports[i]``."""
        packed = []
        for s in supports:
            v = 0
            for j in s:
                if not 0 <= j < cols:
                    raise ValueError(f"column index {j} out of range for {cols} columns")
                v |= 1 << j
            packed.append(v)
        return cls(len(packed), cols, tuple(packed))

    @classmethod
    def random(cls, rows: int, cols: int, rng: random.Random, density: float = 0.5) -> "BitMatrix":
        if density == 0.5:
            return cls(rows, cols, tuple(rng.getrandbits(cols) if cols else 0 for _ in range(rows)))
        return cls.from_rows(
            [[int(rng.random() < density) for _ in range(cols)] for _ in range(rows)], cols
        )

    # -- access -----------------------------------------------------------

    @property
    def shape(self) -> tuple[int, int]:
        return (self.rows, self.cols)

    def __getitem__(self, ij: tuple[int, int]) -> int:
        i, j = ij
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"({i},{j}) outside {self.rows}x{self.cols}")
        return (self.data[i] >> j) & 1

    def row_support(self, i: int) -> list[int]:
        r = self.data[i]
        return [j for j in range(self.cols) if (r >> j) & 1]

    def column(self, j: int) -> int:
        """Column ``j`` packed as an int over the row indices."""
        v = 0
        for i, r in enumerate(self.data):
            v |= ((r >> j) & 1) << i
        return v

    def flip(self, i: int, j: int) -> "BitMatrix":
        if not (0 <= i < self.rows and 0 <= j < self.cols):
            raise IndexError(f"({i},{j}) outside {self.rows}x{self.cols}")
        data = list(self.data)
        data[i] ^= 1 << j
        return BitMatrix(self.rows, self.cols, tuple(data))

    def to_lists(self) -> list[list[int]]:
        return [[(r >> j) & 1 for j in range(self.cols)] for r in self.data]

    def to_numpy(self):
        import numpy as np

        return np.array(self.to_lists(), dtype=np.int64).reshape(self.rows, self.cols)

    def serialize(self) -> str:
        """Row-major 0/1 string; used as a deterministic ordering key."""
        return "".join("".join(str((r >> j) & 1) for j in range(self.cols)) for r in self.data)

    def mat_vec(self, x: int) -> int:
        """Multiply by a packed column vector ``x``; the result is packed over rows."""
        out = 0
        for i, r in enumerate(self.data):
            out |= ((r & x).bit_count() & 1) << i
        return out

    def __str__(self) -> str:
        return dumps(self)


def mat_mul(a: BitMatrix, b: BitMatrix) -> BitMatrix:
    if a.cols != b.rows:
        raise ValueError(f"cannot multiply {a.rows}x{a.cols} by {b.rows}x{b.cols}")
    out = []
    for ra in a.data:
        acc = 0
        k = 0
        while ra:
            if ra & 1:
                acc ^= b.data[k]
            ra >>= 1
            k += 1
        out.append(acc)
    return BitMatrix(a.rows, b.cols, tuple(out))


def transpose(a: BitMatrix) -> BitMatrix:
    return BitMatrix(a.cols, a.rows, tuple(a.column(j) for j in range(a.cols)))


def equal(a: BitMatrix, b: BitMatrix) -> bool:
    return a.shape == b.shape and a.data == b.data


def row_weights(a: BitMatrix) -> list[int]:
    return [r.bit_count() for r in a.data]


def col_weights(a: BitMatrix) -> list[int]:
    return [a.column(j).bit_count() for j in range(a.cols)]


def total_weight(a: BitMatrix) -> int:
    return sum(r.bit_count() for r in a.data)


def rank(a: BitMatrix) -> int:
    pivots: dict[int, int] = {}
    for r in a.data:
        while r:
            top = r.bit_length() - 1
            if top not in pivots:
                pivots[top] = r
                break
            r ^= pivots[top]
    return len(pivots)


# -- text format -----------------------------------------------------------
#
#   <rows> <cols>
#   one line of `cols` characters from {0,1} per row
#

def dumps(a: BitMatrix) -> str:
    lines = [f"{a.rows} {a.cols}"]
    for r in a.data:
        lines.append("".join("1" if (r >> j) & 1 else "0" for j in range(a.cols)))
    return "\n".join(lines) + "\n"


def loads(text: str) -> BitMatrix:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("missing header '<rows> <cols>'", 1)
    header = lines[0].split()
    if len(header) != 2 or not all(h.isdigit() for h in header):
        raise ParseError(f"bad header {lines[0]!r}, expected '<rows> <cols>'", 1)
    rows, cols = int(header[0]), int(header[1])
    if len(lines) - 1 != rows:
        raise ParseError(f"expected {rows} row lines, found {len(lines) - 1}", len(lines) + 1)
    data = []
    for i in range(rows):
        line = lines[i + 1]
        if len(line) != cols:
            raise ParseError(f"row has {len(line)} characters, expected {cols}", i + 2, min(len(line), cols) + 1)
        v = 0
        for j, ch in enumerate(line):
            if ch == "1":
                v |= 1 << j
            elif ch != "0":
                raise ParseError(f"unexpected character {ch!r}", i + 2, j + 1)
        data.append(v)
    return BitMatrix(rows, cols, tuple(data))


def read_matrix(path) -> BitMatrix:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())


def write_matrix(path, a: BitMatrix) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(a))
