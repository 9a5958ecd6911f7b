"""Candidate hard linear operators and the group-model hardness analyzers.

Geometry is exact: coordinates are Python ints and every membership test
is an integer sign computation, with boundary points counted as inside.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .gf2 import BitMatrix, ParseError, row_weights, col_weights, total_weight, transpose


# -- geometry ---------------------------------------------------------------------

@dataclass(frozen=True)
class PointSet:
    dim: int
    points: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        for p in self.points:
            if len(p) != self.dim:
                raise ValueError(f"point {p} is not {self.dim}-dimensional")

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Box:
    lo: tuple[int, ...]
    hi: tuple[int, ...]

    @property
    def dim(self) -> int:
        return len(self.lo)

    def contains(self, p: Sequence[int]) -> bool:
        return all(l <= x <= h for l, x, h in zip(self.lo, p, self.hi))


@dataclass(frozen=True)
class Halfspace:
    """Points with ``normal . x <= offset``."""

    normal: tuple[int, ...]
    offset: int

    @property
    def dim(self) -> int:
        return len(self.normal)

    def contains(self, p: Sequence[int]) -> bool:
        return sum(a * x for a, x in zip(self.normal, p)) <= self.offset


@dataclass(frozen=True)
class HalfspacePair:
    """Intersection of two halfspaces; ``line(a, b)`` gives the hyperplane ``a . x == b``."""

    first: Halfspace
    second: Halfspace

    def __post_init__(self):
        if self.first.dim != self.second.dim:
            raise ValueError("halfspaces of different dimension")

    @classmethod
    def line(cls, normal: Sequence[int], offset: int) -> "HalfspacePair":
        if not any(normal):
            raise ValueError("normal vector must be nonzero")
        return cls(Halfspace(tuple(normal), offset), Halfspace(tuple(-a for a in normal), -offset))

    @property
    def dim(self) -> int:
        return self.first.dim

    def contains(self, p: Sequence[int]) -> bool:
        return self.first.contains(p) and self.second.contains(p)


def int_det(rows: Sequence[Sequence[int]]) -> int:
    """Exact determinant by fraction-free (Bareiss) elimination."""
    m = [list(r) for r in rows]
    n = len(m)
    if n == 0:
        return 1
    sign, prev = 1, 1
    for k in range(n - 1):
        if m[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if m[r][k] != 0), None)
            if swap is None:
                return 0
            m[k], m[swap] = m[swap], m[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                m[i][j] = (m[i][j] * m[k][k] - m[i][k] * m[k][j]) // prev
        prev = m[k][k]
    return sign * m[n - 1][n - 1]


def orientation(pts: Sequence[Sequence[int]]) -> int:
    """Sign of the determinant of ``pts[1:] - pts[0]`` (d+1 points in d dimensions)."""
    base = pts[0]
    det = int_det([[a - b for a, b in zip(p, base)] for p in pts[1:]])
    return (det > 0) - (det < 0)


@dataclass(frozen=True)
class Simplex:
    vertices: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        d = len(self.vertices) - 1
        if d < 1 or any(len(v) != d for v in self.vertices):
            raise ValueError("a d-simplex needs d+1 vertices in d dimensions")
        if orientation(self.vertices) == 0:
            raise ValueError(f"degenerate simplex {self.vertices}")

    @property
    def dim(self) -> int:
        return len(self.vertices) - 1

    def contains(self, p: Sequence[int]) -> bool:
        o = orientation(self.vertices)
        for i in range(len(self.vertices)):
            pts = list(self.vertices)
            pts[i] = tuple(p)
            if orientation(pts) * o < 0:
                return False
        return True


Range = Union[Box, Halfspace, HalfspacePair, Simplex]


@dataclass(frozen=True)
class RangeSet:
    dim: int
    ranges: tuple[Range, ...]

    def __post_init__(self):
        for r in self.ranges:
            if r.dim != self.dim:
                raise ValueError(f"range {r} is not {self.dim}-dimensional")

    def __len__(self) -> int:
        return len(self.ranges)


def incidence_matrix(points: PointSet, ranges: RangeSet) -> BitMatrix:
    """Row ``i`` has a one in column ``j`` when point ``j`` lies in range ``i``."""
    if points.dim != ranges.dim:
        raise ValueError(f"points are {points.dim}-dimensional, ranges {ranges.dim}-dimensional")
    return BitMatrix.from_supports(
        [[j for j, p in enumerate(points.points) if r.contains(p)] for r in ranges.ranges],
        len(points),
    )


def parse_geometry(text: str) -> tuple[PointSet, RangeSet]:
    """Read ``DIM``/``POINT``/``BOX``/``HALFSPACE``/``LINE``/``SIMPLEX`` + ``VERT`` lines.

    ``LINE a1 .. ad b`` is the hyperplane ``a . x == b``, stored as a
    :class:`HalfspacePair`. ``#`` starts a comment.
    """
    dim = None
    points: list[tuple[int, ...]] = []
    ranges: list[Range] = []
    pending: list[tuple[int, ...]] | None = None
    pending_line = 0

    def ints(tokens: list[str], ln: int, line: str) -> tuple[int, ...]:
        out = []
        for t in tokens:
            try:
                out.append(int(t))
            except ValueError:
                raise ParseError(f"expected an integer, got {t!r}", ln, line.find(t) + 1) from None
        return tuple(out)

    for ln, raw in enumerate(text.split("\n"), 1):
        line = raw.split("#", 1)[0]
        toks = line.split()
        if not toks:
            continue
        kw, args = toks[0].upper(), toks[1:]
        if kw == "DIM":
            if dim is not None or len(args) != 1:
                raise ParseError("DIM must appear once, with one value", ln)
            dim = ints(args, ln, line)[0]
            if dim < 1:
                raise ParseError("DIM must be positive", ln, line.find(args[0]) + 1)
            continue
        if dim is None:
            raise ParseError("DIM must come first", ln)
        if pending is not None and kw != "VERT":
            raise ParseError(f"SIMPLEX needs {dim + 1} VERT lines", pending_line)
        vals = ints(args, ln, line)
        if kw == "POINT":
            if len(vals) != dim:
                raise ParseError(f"POINT needs {dim} coordinates", ln)
            points.append(vals)
        elif kw == "BOX":
            if len(vals) != 2 * dim:
                raise ParseError(f"BOX needs {2 * dim} values (lo hi per axis)", ln)
            ranges.append(Box(vals[0::2], vals[1::2]))
        elif kw == "HALFSPACE":
            if len(vals) != dim + 1:
                raise ParseError(f"HALFSPACE needs {dim + 1} values", ln)
            ranges.append(Halfspace(vals[:dim], vals[dim]))
        elif kw == "LINE":
            if len(vals) != dim + 1 or not any(vals[:dim]):
                raise ParseError(f"LINE needs {dim + 1} values with a nonzero normal", ln)
            ranges.append(HalfspacePair.line(vals[:dim], vals[dim]))
        elif kw == "SIMPLEX":
            if vals:
                raise ParseError("SIMPLEX takes no values; list VERT lines after it", ln)
            pending, pending_line = [], ln
        elif kw == "VERT":
            if pending is None:
                raise ParseError("VERT outside a SIMPLEX block", ln)
            if len(vals) != dim:
                raise ParseError(f"VERT needs {dim} coordinates", ln)
            pending.append(vals)
            if len(pending) == dim + 1:
                try:
                    ranges.append(Simplex(tuple(pending)))
                except ValueError as e:
                    raise ParseError(str(e), pending_line) from None
                pending = None
        else:
            raise ParseError(f"unknown keyword {toks[0]!r}", ln)
    if pending is not None:
        raise ParseError(f"SIMPLEX needs {(dim or 0) + 1} VERT lines", pending_line)
    if dim is None:
        raise ParseError("missing DIM line", 1)
    return PointSet(dim, tuple(points)), RangeSet(dim, tuple(ranges))


# -- generators -------------------------------------------------------------------

def prefix_sum_operator(n: int) -> BitMatrix:
    if n < 1:
        raise ValueError("n must be at least 1")
    return BitMatrix(n, n, tuple((1 << (i + 1)) - 1 for i in range(n)))


def is_prime(p: int) -> bool:
    if p < 2:
        return False
    return all(p % q for q in range(2, math.isqrt(p) + 1))


@dataclass(frozen=True)
class GridLines:
    """Affine plane over Z_p: point ``(x, y)`` is column ``x*p + y``; line ``(a, b)`` is row ``a*p + b``."""

    p: int
    points: tuple[tuple[int, int], ...]
    lines: tuple[tuple[int, int], ...]
    matrix: BitMatrix

    note = ("points/lines stand-in: non-vertical lines y = a*x + b over Z_p on the p x p grid; "
            "any two lines share at most one point")


def grid_lines_instance(p: int) -> GridLines:
    if not is_prime(p) or p > 97:
        raise ValueError(f"p={p} must be a prime no larger than 97")
    points = tuple((x, y) for x in range(p) for y in range(p))
    lines = tuple((a, b) for a in range(p) for b in range(p))
    mat = BitMatrix.from_supports(
        [[x * p + (a * x + b) % p for x in range(p)] for a, b in lines], p * p
    )
    return GridLines(p, points, lines, mat)


# -- discrepancy ---------------------------------------------------------------------

MAX_BRUTEFORCE_COLS = 22
_CHUNK = 1 << 15


def _imbalance(a: np.ndarray, colorings: np.ndarray) -> np.ndarray:
    """Max row imbalance for each coloring (one coloring per row of ``colorings``)."""
    if a.shape[0] == 0:
        return np.zeros(colorings.shape[0], dtype=np.int64)
    return np.abs(colorings @ a.T).max(axis=1)


def discrepancy_bruteforce(a: BitMatrix) -> int:
    """min over +-1 colorings of the columns of max_i |row_i . x|, exactly."""
    if a.cols > MAX_BRUTEFORCE_COLS:
        raise ValueError(f"{a.cols} columns exceeds {MAX_BRUTEFORCE_COLS}; use discrepancy_sample")
    arr = a.to_numpy()
    if a.cols == 0:
        return 0
    # x and -x score alike, so column 0 is fixed to +1
    free = a.cols - 1
    shifts = np.arange(free, dtype=np.int64)
    best = None
    for start in range(0, 1 << free, _CHUNK):
        idx = np.arange(start, min(start + _CHUNK, 1 << free), dtype=np.int64)
        signs = 1 - 2 * ((idx[:, None] >> shifts) & 1)
        x = np.concatenate([np.ones((len(idx), 1), dtype=np.int64), signs], axis=1)
        v = int(_imbalance(arr, x).min())
        best = v if best is None else min(best, v)
        if best == 0:
            break
    return best


def discrepancy_sample(a: BitMatrix, trials: int, seed: int = 0) -> int:
    """Best imbalance over ``trials`` random colorings; an upper bound on the discrepancy."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    arr = a.to_numpy()
    rng = np.random.default_rng(seed)
    best = None
    done = 0
    while done < trials:
        size = min(_CHUNK, trials - done)
        x = rng.choice(np.array([-1, 1], dtype=np.int64), size=(size, a.cols))
        v = int(_imbalance(arr, x).min())
        best = v if best is None else min(best, v)
        done += size
    return best


# -- spectrum ---------------------------------------------------------------------------

class JacobiError(ArithmeticError):
    def __init__(self, residual: float, sweeps: int):
        super().__init__(f"Jacobi did not converge in {sweeps} sweeps (off-diagonal norm {residual:.3e})")
        self.residual = residual


def jacobi_eigenvalues(sym: np.ndarray, tol: float = 1e-10, max_sweeps: int = 100) -> np.ndarray:
    """Eigenvalues of a real symmetric matrix by cyclic Jacobi rotations, in descending order.

    Stops once the Frobenius norm of the off-diagonal part is at most ``tol``.
    """
    a = np.array(sym, dtype=np.float64)
    n = a.shape[0]
    if a.shape != (n, n):
        raise ValueError("matrix must be square")
    if not np.allclose(a, a.T):
        raise ValueError("matrix must be symmetric")
    for sweep in range(max_sweeps + 1):
        # summed directly: ||A||^2 - sum(diag^2) cancels down to rounding noise
        off = math.sqrt(float((a * a).sum(where=~np.eye(n, dtype=bool))))
        if off <= tol:
            return np.sort(np.diag(a))[::-1]
        if sweep == max_sweeps:
            raise JacobiError(off, max_sweeps)
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-150 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                col_p, col_q = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p, row_q = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0
    raise AssertionError("unreachable")


MAX_GRAM_COLS = 512


def gram_matrix(a: BitMatrix) -> np.ndarray:
    arr = a.to_numpy()
    return arr.T @ arr


def gram_eigenvalues(a: BitMatrix, tol: float = 1e-10) -> list[float]:
    """Eigenvalues of ``A^T A`` (squared singular values of A), descending."""
    if a.cols > MAX_GRAM_COLS:
        raise ValueError(f"{a.cols} columns exceeds {MAX_GRAM_COLS}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    return [float(v) for v in jacobi_eigenvalues(gram_matrix(a), tol)]


def count_large(a: BitMatrix, threshold: float, tol: float = 1e-10) -> int:
    """Number of singular values of A at least ``threshold`` (eigenvalues >= threshold**2).

    Eigenvalues within ``cols * tol`` below the cutoff are counted, so exact
    integer cases are not lost to rounding.
    """
    eigs = gram_eigenvalues(a, tol)
    slack = max(1, a.cols) * tol
    return sum(1 for v in eigs if v >= threshold * threshold - slack)


def frobenius_gap(a: BitMatrix, eigs: Sequence[float]) -> float:
    """|sum of eigenvalues - number of ones|; zero up to rounding by the trace identity."""
    return abs(sum(eigs) - total_weight(a))


# -- intersections ---------------------------------------------------------------------

@dataclass
class IntersectionProfile:
    counts: list[int]
    pairwise_max: int
    duplicate_rows: list[tuple[int, int]]
    column_counts: list[int]
    column_pairwise_max: int

    @property
    def min_count(self) -> int:
        return min(self.counts, default=0)

    @property
    def max_count(self) -> int:
        return max(self.counts, default=0)


def _pairwise_max(rows: Sequence[int]) -> tuple[int, list[tuple[int, int]]]:
    best, dups = 0, []
    for i in range(len(rows)):
        ri = rows[i]
        for j in range(i + 1, len(rows)):
            best = max(best, (ri & rows[j]).bit_count())
            if ri == rows[j] and ri:
                dups.append((i, j))
    return best, dups


def intersection_profile(a: BitMatrix | PointSet, ranges: RangeSet | None = None) -> IntersectionProfile:
    """Points per range and the largest number of points shared by two distinct ranges.

    Accepts either an incidence matrix or a ``(PointSet, RangeSet)`` pair.
    Column statistics give the same view from the point side.
    """
    if isinstance(a, PointSet):
        a = incidence_matrix(a, ranges)
    pmax, dups = _pairwise_max(a.data)
    cmax, _ = _pairwise_max(transpose(a).data)
    return IntersectionProfile(row_weights(a), pmax, dups, col_weights(a), cmax)


# -- combined report -----------------------------------------------------------------------

@dataclass
class PropertyReport:
    rows: int
    cols: int
    incidences: int
    profile: IntersectionProfile
    eigenvalues: list[float]
    frobenius_gap: float
    large_eigenvalues: int
    threshold: float
    discrepancy: int
    discrepancy_exact: bool

    def lines(self) -> list[str]:
        eig = self.eigenvalues
        return [
            f"rows={self.rows}",
            f"cols={self.cols}",
            f"incidences={self.incidences}",
            f"row_weight_min={self.profile.min_count}",
            f"row_weight_max={self.profile.max_count}",
            f"col_weight_min={min(self.profile.column_counts, default=0)}",
            f"col_weight_max={max(self.profile.column_counts, default=0)}",
            f"pairwise_max={self.profile.pairwise_max}",
            f"col_pairwise_max={self.profile.column_pairwise_max}",
            f"duplicate_rows={len(self.profile.duplicate_rows)}",
            f"eig_max={eig[0] if eig else 0:.6f}",
            f"eig_min={eig[-1] if eig else 0:.6f}",
            f"eig_sum={sum(eig):.6f}",
            f"frobenius_gap={self.frobenius_gap:.3e}",
            f"large_threshold={self.threshold:g}",
            f"large_eigenvalues={self.large_eigenvalues}",
            f"discrepancy={'exact' if self.discrepancy_exact else 'upper'}:{self.discrepancy}",
        ]


def analyze(a: BitMatrix, threshold: float = 1.0, tol: float = 1e-10,
            trials: int = 4096, seed: int = 0) -> PropertyReport:
    eigs = gram_eigenvalues(a, tol)
    exact = a.cols <= MAX_BRUTEFORCE_COLS
    disc = discrepancy_bruteforce(a) if exact else discrepancy_sample(a, trials, seed)
    slack = max(1, a.cols) * tol
    return PropertyReport(
        rows=a.rows, cols=a.cols, incidences=total_weight(a),
        profile=intersection_profile(a),
        eigenvalues=eigs, frobenius_gap=frobenius_gap(a, eigs),
        large_eigenvalues=sum(1 for v in eigs if v >= threshold * threshold - slack),
        threshold=threshold, discrepancy=disc, discrepancy_exact=exact,
    )
