"""Depth-2 circuits, linear data structures and minimum-wire factorization."""
from __future__ import annotations

import itertools
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .gf2 import BitMatrix, ParseError, equal, mat_mul, total_weight, col_weights, row_weights

GATE_KINDS = ("XOR", "AND", "OR", "TABLE")
MAX_TABLE_FANIN = 16


@dataclass(frozen=True)
class Gate:
    """A gate reading ``inputs`` (sorted, distinct node indices of the previous layer).

    For ``TABLE`` gates, bit ``b`` of ``table`` is the output when the input
    values, read with ``inputs[0]`` as the least significant bit, spell ``b``.
    """

    inputs: tuple[int, ...]
    kind: str = "XOR"
    table: int | None = None

    def __post_init__(self):
        if self.kind not in GATE_KINDS:
            raise ValueError(f"unknown gate kind {self.kind!r}")
        if list(self.inputs) != sorted(set(self.inputs)):
            raise ValueError(f"gate inputs must be sorted and distinct, got {self.inputs}")
        if self.kind == "TABLE":
            if len(self.inputs) > MAX_TABLE_FANIN:
                raise ValueError(f"table gate fan-in {len(self.inputs)} exceeds {MAX_TABLE_FANIN}")
            if self.table is None or not 0 <= self.table < (1 << (1 << len(self.inputs))):
                raise ValueError("table gate needs a truth table of 2^fan-in bits")

    def apply(self, values: Sequence[int]) -> int:
        bits = [values[i] for i in self.inputs]
        if self.kind == "XOR":
            return sum(bits) & 1
        if self.kind == "AND":
            return int(all(bits))
        if self.kind == "OR":
            return int(any(bits))
        idx = 0
        for pos, b in enumerate(bits):
            idx |= b << pos
        return (self.table >> idx) & 1


@dataclass(frozen=True)
class Depth2Circuit:
    n_inputs: int
    middle: tuple[Gate, ...]
    outputs: tuple[Gate, ...]

    def __post_init__(self):
        for g in self.middle:
            if g.inputs and not 0 <= g.inputs[-1] < self.n_inputs:
                raise ValueError(f"middle gate reads missing input {g.inputs[-1]}")
            if g.inputs and g.inputs[0] < 0:
                raise ValueError("negative input index")
        for g in self.outputs:
            if g.inputs and not (0 <= g.inputs[0] and g.inputs[-1] < len(self.middle)):
                raise ValueError(f"output gate reads missing middle gate {g.inputs[-1]}")

    @property
    def size(self) -> int:
        """Wire count s(C)."""
        return sum(len(g.inputs) for g in self.middle) + sum(len(g.inputs) for g in self.outputs)

    @property
    def is_linear(self) -> bool:
        return all(g.kind == "XOR" for g in self.middle + self.outputs)

    def input_wires(self) -> list[tuple[int, int]]:
        """(input, middle) pairs."""
        return [(x, g) for g, gate in enumerate(self.middle) for x in gate.inputs]

    def output_wires(self) -> list[tuple[int, int]]:
        """(middle, output) pairs."""
        return [(g, z) for z, gate in enumerate(self.outputs) for g in gate.inputs]

    def fanout(self) -> list[list[int]]:
        """Middle gates fed by each input."""
        out: list[list[int]] = [[] for _ in range(self.n_inputs)]
        for g, gate in enumerate(self.middle):
            for x in gate.inputs:
                out[x].append(g)
        return out

    def middle_values(self, x: Sequence[int]) -> list[int]:
        if len(x) != self.n_inputs:
            raise ValueError(f"expected {self.n_inputs} inputs, got {len(x)}")
        return [g.apply(x) for g in self.middle]

    def outputs_from_middle(self, mid: Sequence[int]) -> list[int]:
        return [g.apply(mid) for g in self.outputs]


def evaluate(c: Depth2Circuit, x: Sequence[int]) -> list[int]:
    return c.outputs_from_middle(c.middle_values(x))


# -- text format ----------------------------------------------------------------
#
#   D2 inputs=<n> middle=<s> outputs=<m>
#   M<i> <gate> : <input indices>
#   O<j> <gate> : <middle indices>
#
# <gate> is XOR, AND, OR or TABLE=<hex truth table>.

def _gate_token(g: Gate) -> str:
    return f"TABLE={g.table:x}" if g.kind == "TABLE" else g.kind


def dumps_circuit(c: Depth2Circuit) -> str:
    lines = [f"D2 inputs={c.n_inputs} middle={len(c.middle)} outputs={len(c.outputs)}"]
    for i, g in enumerate(c.middle):
        lines.append(f"M{i} {_gate_token(g)} : {' '.join(map(str, g.inputs))}".rstrip())
    for j, g in enumerate(c.outputs):
        lines.append(f"O{j} {_gate_token(g)} : {' '.join(map(str, g.inputs))}".rstrip())
    return "\n".join(lines) + "\n"


def loads_circuit(text: str) -> Depth2Circuit:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise ParseError("empty circuit file", 1)
    head = lines[0].split()
    try:
        if head[0] != "D2" or len(head) != 4:
            raise ValueError
        fields = dict(h.split("=", 1) for h in head[1:])
        n, s, m = int(fields["inputs"]), int(fields["middle"]), int(fields["outputs"])
    except (ValueError, KeyError, IndexError):
        raise ParseError(f"bad header {lines[0]!r}", 1) from None
    if len(lines) != 1 + s + m:
        where = 2 + s + m if len(lines) > 1 + s + m else len(lines) + 1
        raise ParseError(f"expected {s + m} gate lines, found {len(lines) - 1}", where)
    gates: list[Gate] = []
    for ln in range(1, 1 + s + m):
        text_line = lines[ln]
        tag = f"M{ln - 1}" if ln <= s else f"O{ln - 1 - s}"
        left, sep, right = text_line.partition(":")
        parts = left.split()
        if not sep or len(parts) != 2 or parts[0] != tag:
            raise ParseError(f"expected '{tag} <gate> : <indices>'", ln + 1)
        tok = parts[1]
        table = None
        if tok.startswith("TABLE="):
            kind = "TABLE"
            try:
                table = int(tok[6:], 16)
            except ValueError:
                raise ParseError(f"bad truth table {tok[6:]!r}", ln + 1, text_line.index(tok) + 7) from None
        else:
            kind = tok
        try:
            idx = tuple(sorted(int(t) for t in right.split()))
            gates.append(Gate(idx, kind, table))
        except ValueError as e:
            raise ParseError(str(e), ln + 1, len(left) + 2) from None
    try:
        return Depth2Circuit(n, tuple(gates[:s]), tuple(gates[s:]))
    except ValueError as e:
        raise ParseError(str(e), 1) from None


# -- linear data structures -----------------------------------------------------

@dataclass(frozen=True)
class LinearDS:
    """Cells store ``V @ A``; query ``j`` XORs the cells in row ``j`` of ``Q``."""

    V: BitMatrix  # s x n
    Q: BitMatrix  # m x s

    def __post_init__(self):
        if self.Q.cols != self.V.rows:
            raise ValueError(f"Q is {self.Q.shape} but V is {self.V.shape}")

    @property
    def n(self) -> int:
        return self.V.cols

    @property
    def m(self) -> int:
        return self.Q.rows

    @property
    def cells(self) -> int:
        return self.V.rows

    def operator(self) -> BitMatrix:
        return mat_mul(self.Q, self.V)

    def update_times(self) -> list[int]:
        return col_weights(self.V)

    def query_times(self) -> list[int]:
        return row_weights(self.Q)

    @property
    def wires(self) -> int:
        return total_weight(self.V) + total_weight(self.Q)


def ds_to_circuit(ds: LinearDS, target: BitMatrix | None = None) -> Depth2Circuit:
    if target is not None and not equal(ds.operator(), target):
        raise ValueError("linear data structure does not compute the target operator")
    middle = tuple(Gate(tuple(ds.V.row_support(c))) for c in range(ds.cells))
    outputs = tuple(Gate(tuple(ds.Q.row_support(j))) for j in range(ds.m))
    return Depth2Circuit(ds.n, middle, outputs)


def circuit_to_ds(c: Depth2Circuit) -> LinearDS:
    if not c.is_linear:
        bad = next(g.kind for g in c.middle + c.outputs if g.kind != "XOR")
        raise ValueError(f"circuit has a non-XOR gate ({bad}); only linear circuits compile")
    V = BitMatrix.from_supports([g.inputs for g in c.middle], c.n_inputs)
    Q = BitMatrix.from_supports([g.inputs for g in c.outputs], len(c.middle))
    return LinearDS(V, Q)


@dataclass
class CompileReport:
    wires: int
    n: int
    m: int
    max_t_u: int
    max_t_q: int
    avg_t_u: Fraction
    avg_t_q: Fraction

    @property
    def size_bound(self) -> int:
        """n * max t_u + m * max t_q."""
        return self.n * self.max_t_u + self.m * self.max_t_q

    def holds(self) -> bool:
        return (self.wires <= self.size_bound
                and (self.n == 0 or self.avg_t_u <= Fraction(self.wires, self.n))
                and (self.m == 0 or self.avg_t_q <= Fraction(self.wires, self.m)))


def compile_report(ds: LinearDS) -> CompileReport:
    tu, tq = ds.update_times(), ds.query_times()
    return CompileReport(
        wires=ds_to_circuit(ds).size,
        n=ds.n, m=ds.m,
        max_t_u=max(tu, default=0), max_t_q=max(tq, default=0),
        avg_t_u=Fraction(sum(tu), ds.n) if ds.n else Fraction(0),
        avg_t_q=Fraction(sum(tq), ds.m) if ds.m else Fraction(0),
    )


# -- matrix multiplication --------------------------------------------------------
#
# Inputs: A[i][k] at i*d + k, B[k][l] at d*d + k*d + l. Output P[i][l] at i*d + l.

def mm_input_a(d: int, i: int, k: int) -> int:
    return i * d + k


def mm_input_b(d: int, k: int, l: int) -> int:
    return d * d + k * d + l


def mm_output(d: int, i: int, l: int) -> int:
    return i * d + l


def naive_mm_circuit(d: int) -> Depth2Circuit:
    """One AND gate per (i, k, l); P[i][l] is the XOR of the d products feeding it."""
    if d < 1:
        raise ValueError("d must be at least 1")
    middle = []
    gate_of = {}
    for i, k, l in itertools.product(range(d), repeat=3):
        gate_of[i, k, l] = len(middle)
        middle.append(Gate(tuple(sorted((mm_input_a(d, i, k), mm_input_b(d, k, l)))), "AND"))
    outputs = [None] * (d * d)
    for i, l in itertools.product(range(d), repeat=2):
        outputs[mm_output(d, i, l)] = Gate(tuple(sorted(gate_of[i, k, l] for k in range(d))))
    return Depth2Circuit(2 * d * d, tuple(middle), tuple(outputs))


def mm_inputs(d: int, a: BitMatrix, b: BitMatrix) -> list[int]:
    return [a[i, k] for i in range(d) for k in range(d)] + [b[k, l] for k in range(d) for l in range(d)]


def mm_outputs_matrix(d: int, out: Sequence[int]) -> BitMatrix:
    return BitMatrix.from_rows([[out[mm_output(d, i, l)] for l in range(d)] for i in range(d)], d)


class NotMatrixMultiplication(ValueError):
    pass


def verify_mm_circuit(c: Depth2Circuit, d: int, trials: int = 100, seed: int = 0) -> None:
    """Randomized check that ``c`` computes d x d products over GF(2); raises on a mismatch."""
    if c.n_inputs != 2 * d * d or len(c.outputs) != d * d:
        raise NotMatrixMultiplication(
            f"circuit shape (inputs={c.n_inputs}, outputs={len(c.outputs)}) is not {d}x{d} MM"
        )
    rng = random.Random(seed)
    for t in range(trials):
        a = BitMatrix.random(d, d, rng)
        b = BitMatrix.random(d, d, rng)
        got = mm_outputs_matrix(d, evaluate(c, mm_inputs(d, a, b)))
        if not equal(got, mat_mul(a, b)):
            raise NotMatrixMultiplication(f"wrong product on trial {t} (seed {seed})")


@dataclass
class ColumnWires:
    ell: int
    t_u: int  # wires leaving inputs of column ell of B
    t_q: int  # wires entering outputs of column ell of the product
    wires: frozenset


@dataclass
class MMAudit:
    d: int
    size: int
    columns: list[ColumnWires]
    disjoint: bool
    within_circuit: bool
    protocol_lengths: dict[int, int]
    protocol_lossless: bool = True

    @property
    def entries(self) -> int:
        return self.d * self.d

    def column_bounds_hold(self) -> bool:
        return all(cw.t_u + cw.t_q >= self.entries for cw in self.columns)

    @property
    def column_sum(self) -> int:
        return sum(cw.t_u + cw.t_q for cw in self.columns)

    def size_bound_holds(self) -> bool:
        return self.size >= self.d ** 3 and self.column_sum <= self.size

    @property
    def passed(self) -> bool:
        return (self.column_bounds_hold() and self.disjoint and self.within_circuit
                and self.size_bound_holds() and self.protocol_lossless)


def column_wires(c: Depth2Circuit, d: int, ell: int) -> ColumnWires:
    """Wires leaving column ``ell`` (1-based) of B and entering column ``ell`` of the product."""
    inputs = {mm_input_b(d, k, ell - 1) for k in range(d)}
    outputs = {mm_output(d, i, ell - 1) for i in range(d)}
    up = [("in", x, g) for x, g in c.input_wires() if x in inputs]
    down = [("out", g, z) for g, z in c.output_wires() if z in outputs]
    return ColumnWires(ell, len(up), len(down), frozenset(up + down))


def mm_partition_audit(c: Depth2Circuit, d: int, trials: int = 100, seed: int = 0,
                       protocol_trials: int = 4) -> MMAudit:
    from .encodings import mm_column_roundtrip

    verify_mm_circuit(c, d, trials, seed)
    cols = [column_wires(c, d, ell) for ell in range(1, d + 1)]
    disjoint = all(a.wires.isdisjoint(b.wires) for a, b in itertools.combinations(cols, 2))
    every = {("in", x, g) for x, g in c.input_wires()} | {("out", g, z) for g, z in c.output_wires()}
    within = all(cw.wires <= every for cw in cols)
    rng = random.Random(seed)
    lengths = {}
    lossless = True
    for ell in range(1, d + 1):
        for _ in range(protocol_trials):
            r = mm_column_roundtrip(c, BitMatrix.random(d, d, rng), ell, verify=False)
            lengths[ell] = r.length
            lossless &= r.lossless
    return MMAudit(d, c.size, cols, disjoint, within, lengths, lossless)


# -- factorization ------------------------------------------------------------------

@dataclass(frozen=True)
class Factorization:
    Q: BitMatrix
    V: BitMatrix

    @property
    def s(self) -> int:
        return self.V.rows

    @property
    def wires(self) -> int:
        return total_weight(self.Q) + total_weight(self.V)

    def key(self) -> tuple:
        return (self.wires, self.s, self.Q.serialize(), self.V.serialize())

    def as_ds(self) -> LinearDS:
        return LinearDS(self.V, self.Q)


def trivial_factorization(f: BitMatrix) -> Factorization:
    return Factorization(BitMatrix.identity(f.rows), f)


class NoFactorization(ValueError):
    def __init__(self, message: str, trivial: Factorization):
        super().__init__(message)
        self.trivial = trivial


EXHAUSTIVE_BUDGET = 26


def _lex_bits(q: int, s: int) -> str:
    return "".join(str((q >> j) & 1) for j in range(s))


def _search_chunk(f_rows: tuple[int, ...], n: int, s: int, start: int, stop: int,
                  bound: int) -> tuple | None:
    """Best (wires, Q rows, V rows) with V enumerated over the packed range [start, stop)."""
    need = sum(1 for r in f_rows if r)  # every nonzero output needs a wire
    row_mask = (1 << n) - 1
    best = None
    best_key = None
    q_order = sorted(range(1 << s), key=lambda q: (q.bit_count(), _lex_bits(q, s)))
    for packed in range(start, stop):
        wv = packed.bit_count()
        if wv + need > bound:
            continue
        v_rows = tuple((packed >> (c * n)) & row_mask for c in range(s))
        # first hit in q_order is the cheapest, lexicographically smallest combination
        acc = [0] * (1 << s)
        for q in range(1, 1 << s):
            low = (q & -q).bit_length() - 1
            acc[q] = acc[q & (q - 1)] ^ v_rows[low]
        span: dict[int, int] = {}
        for q in q_order:
            span.setdefault(acc[q], q)
        try:
            q_rows = tuple(span[r] for r in f_rows)
        except KeyError:
            continue
        wires = wv + sum(q.bit_count() for q in q_rows)
        if wires > bound:
            continue
        key = (wires, "".join(_lex_bits(q, s) for q in q_rows),
               "".join(_lex_bits(v, n) for v in v_rows))
        if best_key is None or key < best_key:
            best_key, best = key, (wires, q_rows, v_rows)
            bound = wires
    return best


def exhaustive_factorize(f: BitMatrix, s_max: int, workers: int = 1) -> Factorization:
    """Minimum-wire factorization ``Q @ V == f`` over all inner dimensions ``s <= s_max``.

    For a fixed ``V`` the rows of ``Q`` are chosen independently, so only the
    ``2**(s*n)`` candidate ``V`` matrices are enumerated. Ties break on the
    lexicographically smallest ``(s, Q, V)`` serialization.
    """
    m, n = f.shape
    if s_max < 0:
        raise ValueError("s_max must be non-negative")
    if s_max * (n + 1) > EXHAUSTIVE_BUDGET:
        raise ValueError(
            f"search too large: s_max*(n+1) = {s_max * (n + 1)} exceeds {EXHAUSTIVE_BUDGET}"
        )
    trivial = trivial_factorization(f)
    best: Factorization | None = None
    for s in range(s_max + 1):
        bound = best.wires if best is not None else float("inf")
        total = 1 << (s * n)
        chunks = _chunks(total, workers)
        if workers > 1 and len(chunks) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_search_chunk, *zip(*[(f.data, n, s, a, b, bound) for a, b in chunks])))
        else:
            results = [_search_chunk(f.data, n, s, a, b, bound) for a, b in chunks]
        for r in results:
            if r is None:
                continue
            _, q_rows, v_rows = r
            cand = Factorization(BitMatrix(m, s, q_rows), BitMatrix(s, n, v_rows))
            if best is None or cand.key() < best.key():
                best = cand
    if best is None:
        raise NoFactorization(f"no factorization of a {m}x{n} operator with s <= {s_max}", trivial)
    assert equal(mat_mul(best.Q, best.V), f)
    return best


def _chunks(total: int, workers: int) -> list[tuple[int, int]]:
    parts = max(1, min(workers * 4, total)) if workers > 1 else 1
    step = -(-total // parts)
    return [(a, min(a + step, total)) for a in range(0, total, step)]


def greedy_cse_factorize(f: BitMatrix) -> Factorization:
    """Pairwise common-subexpression extraction starting from ``V = f, Q = I``.

    Each round creates a middle gate for the input pair shared by the most
    residual output gates, as long as that lowers the wire count.
    """
    m, n = f.shape
    shared: list[frozenset[int]] = []
    uses: list[list[int]] = [[] for _ in range(m)]  # shared gates feeding each output
    residual: list[set[int]] = [set(f.row_support(j)) for j in range(m)]
    while True:
        counts: dict[tuple[int, int], list[int]] = {}
        for j, r in enumerate(residual):
            for pair in itertools.combinations(sorted(r), 2):
                counts.setdefault(pair, []).append(j)
        best_pair, best_gain = None, 0
        for pair in sorted(counts):
            rows = counts[pair]
            emptied = sum(1 for j in rows if len(residual[j]) == 2)
            # new gate costs 2 input wires; each row saves 2 and adds 1 output wire,
            # and a row left empty also drops its own gate's output wire
            gain = len(rows) - 2 + emptied
            if gain > best_gain:
                best_pair, best_gain = pair, gain
        if best_pair is None:
            break
        g = len(shared)
        shared.append(frozenset(best_pair))
        for j in counts[best_pair]:
            residual[j] -= set(best_pair)
            uses[j].append(g)
    gates = list(shared)
    q_support: list[list[int]] = [list(u) for u in uses]
    for j, r in enumerate(residual):
        if r:
            q_support[j].append(len(gates))
            gates.append(frozenset(r))
    V = BitMatrix.from_supports([sorted(g) for g in gates], n)
    Q = BitMatrix.from_supports(q_support, len(gates))
    fac = Factorization(Q, V)
    assert equal(mat_mul(Q, V), f)
    return fac
