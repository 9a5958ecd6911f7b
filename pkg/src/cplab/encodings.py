"""Encoding arguments as runnable compression protocols.

Each encoder turns a data structure (or circuit) plus a uniformly random
input into a :class:`Message`; the matching decoder rebuilds the input
from the message and the structure's algorithms alone. A lossless
round trip whose message is shorter than the input entropy would refute
the structure's claimed correctness or contract, so every harness run
reports the measured length next to the entropy bound.

Messages carry no length prefixes: section sizes follow from the
protocol parameters, so the measured length equals the accounting
``|C|*w + sum(update probes)*w`` (indexing), ``3*t_q*w`` (disjointness)
and ``#gates adjacent to J + #gates adjacent to I`` (matrix columns).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterator

from .cellprobe import ContractViolation, DynamicDS, Memory, Probe
from .circuits import (
    Depth2Circuit,
    column_wires,
    mm_input_b,
    mm_inputs,
    mm_output,
    verify_mm_circuit,
)
from .gf2 import BitMatrix, equal
from .problems import DisjointnessInstance, IndexingInstance

log = logging.getLogger(__name__)

MAX_DISJOINTNESS_N = 20


class ProtocolViolation(RuntimeError):
    """The message is inconsistent with the structure's algorithms."""


class CorrectnessFailure(RuntimeError):
    """The structure gave a wrong answer while the encoder was running it."""


@dataclass(frozen=True)
class Record:
    kind: str  # "addr", "content" or "gate"
    width: int
    value: int


@dataclass
class Message:
    protocol: str
    records: list[Record] = field(default_factory=list)
    # (section name, index of its first record), in order
    sections: list[tuple[str, int]] = field(default_factory=list)

    def begin(self, name: str) -> None:
        self.sections.append((name, len(self.records)))

    def add(self, kind: str, width: int, value: int) -> None:
        if not 0 <= value < (1 << width):
            raise ValueError(f"{kind} record value {value} does not fit in {width} bits")
        self.records.append(Record(kind, width, value))

    @property
    def bit_length(self) -> int:
        return sum(r.width for r in self.records)

    def __len__(self) -> int:
        return self.bit_length

    def section(self, name: str) -> list[Record]:
        names = [s for s, _ in self.sections]
        i = names.index(name)
        start = self.sections[i][1]
        stop = self.sections[i + 1][1] if i + 1 < len(self.sections) else len(self.records)
        return self.records[start:stop]

    def bits(self) -> str:
        return "".join(format(r.value, f"0{r.width}b") if r.width else "" for r in self.records)

    def hex(self) -> str:
        b = self.bits()
        if not b:
            return ""
        return format(int(b, 2), f"0{-(-len(b) // 4)}x")

    def flip_bit(self, pos: int) -> "Message":
        """Copy with bit ``pos`` of :meth:`bits` inverted."""
        if not 0 <= pos < self.bit_length:
            raise IndexError(f"bit {pos} outside message of {self.bit_length} bits")
        records = list(self.records)
        for idx, r in enumerate(records):
            if pos < r.width:
                records[idx] = Record(r.kind, r.width, r.value ^ (1 << (r.width - 1 - pos)))
                break
            pos -= r.width
        return Message(self.protocol, records, list(self.sections))

    def values(self) -> Iterator[int]:
        return (r.value for r in self.records)


@dataclass
class ProtocolResult:
    protocol: str
    params: dict[str, Any]
    length: int
    bound: int
    lossless: bool
    message: Message | None = None
    error: str | None = None

    @property
    def below_entropy(self) -> bool:
        return self.lossless and self.length < self.bound

    @property
    def passed(self) -> bool:
        return self.error is None and self.lossless and self.length >= self.bound

    @property
    def verdict(self) -> str:
        if self.error:
            return f"FAIL ({self.error})"
        if not self.lossless:
            return "FAIL (decoded input differs from the original)"
        if self.below_entropy:
            return "FAIL (lossless code below entropy: the structure's claimed contract is refuted)"
        return "PASS"


# -- indexing ----------------------------------------------------------------------

def query_address_set(ds: DynamicDS, q: Any) -> frozenset[int]:
    """Cells probed by query ``q``: the declared schedule, else a probe run on zero memory.

    The fallback is valid only for non-adaptive queries, which is the
    precondition of the indexing protocol.
    """
    declared = ds.query_probes(q)
    if declared is not None:
        return frozenset(declared)
    probe = Probe(Memory(ds.w))
    ds.query(probe, q)
    return frozenset(probe.log.distinct())


def _query_cells(ds: DynamicDS) -> tuple[list[int], dict[Any, frozenset[int]]]:
    per_query = {q: query_address_set(ds, q) for q in ds.all_queries()}
    cells = sorted(set().union(*per_query.values())) if per_query else []
    return cells, per_query


def encode_indexing(ds: DynamicDS, instance: IndexingInstance) -> Message:
    """Query-cell contents after preprocessing, then the pre-probe contents of every update.

    Updates ``j = 1..n`` are applied cumulatively in order. After each one
    the encoder also runs every query against a copy of memory: a probe
    outside the query's schedule is a :class:`ContractViolation`, a wrong
    answer a :class:`CorrectnessFailure`.
    """
    k, n, w = instance.k, instance.n, ds.w
    if (getattr(ds, "k", k), getattr(ds, "n", n)) != (k, n):
        raise ValueError("data structure and instance dimensions differ")
    mem = ds.new_memory()
    ds.preprocess(Probe(mem))
    cells, per_query = _query_cells(ds)

    msg = Message("indexing")
    msg.begin("query-cells")
    for a in cells:
        msg.add("content", w, mem.read(a))
    for j in range(1, n + 1):
        msg.begin(f"update-{j}")
        probe = Probe(mem)
        ds.update(probe, j)
        for _, before in probe.log.first_touches():
            msg.add("content", w, before)
        for i in range(1, k + 1):
            qp = Probe(mem.copy())
            ans = ds.query(qp, i)
            escaped = set(qp.log.distinct()) - per_query[i]
            if escaped:
                raise ContractViolation(f"query {i} probed {sorted(escaped)} outside its schedule")
            if ans != instance.bit(i, j):
                raise CorrectnessFailure(
                    f"query {i} after update {j} returned {ans}, expected {instance.bit(i, j)}"
                )
    return msg


class _ReplayMemory(Memory):
    """Memory whose contents come from the message on each cell's first touch in an operation."""

    def __init__(self, w: int, tracked: dict[int, int], feed: Iterator[int]):
        super().__init__(w)
        self.cells = tracked
        self.feed = feed
        self.touched: set[int] = set()

    def read(self, addr: int) -> int:
        self._check_addr(addr)
        if addr not in self.touched:
            self.touched.add(addr)
            try:
                value = next(self.feed)
            except StopIteration:
                raise ProtocolViolation("message ended during update replay") from None
            known = self.cells.get(addr)
            if known is not None and known != value:
                raise ProtocolViolation(
                    f"message says cell @{addr} held {value:#x}, replay tracked {known:#x}"
                )
            self.cells[addr] = value
        return self.cells[addr]


class _TrackedMemory(Memory):
    """Read-only view of the decoder's known cells; anything else is a protocol error."""

    def __init__(self, w: int, tracked: dict[int, int]):
        super().__init__(w)
        self.cells = dict(tracked)

    def read(self, addr: int) -> int:
        self._check_addr(addr)
        if addr not in self.cells:
            raise ProtocolViolation(f"query read cell @{addr}, which the decoder cannot know")
        return self.cells[addr]


def decode_indexing(msg: Message, ds: DynamicDS, k: int, n: int, w: int) -> IndexingInstance:
    """Rebuild all k strings by replaying updates and running every query after each.

    ``ds`` must be configured for (k, n, w); its preprocessing is never run,
    so it may be built from any instance of that shape.
    """
    if ds.w != w:
        raise ValueError(f"data structure uses w={ds.w}, decoder was given w={w}")
    feed = msg.values()
    cells, _ = _query_cells(ds)
    tracked: dict[int, int] = {}
    for a in cells:
        try:
            tracked[a] = next(feed)
        except StopIteration:
            raise ProtocolViolation("message ended inside the query-cell section") from None
    bits = [[0] * n for _ in range(k)]
    for j in range(1, n + 1):
        replay = _ReplayMemory(w, tracked, feed)
        ds.update(Probe(replay), j)
        for i in range(1, k + 1):
            bits[i - 1][j - 1] = int(ds.query(Probe(_TrackedMemory(w, tracked)), i))
    if next(feed, None) is not None:
        raise ProtocolViolation("message has trailing records")
    return IndexingInstance(k, n, tuple(tuple(row) for row in bits))


def indexing_roundtrip(factory: Callable[[IndexingInstance, int], DynamicDS],
                       instance: IndexingInstance, w: int) -> ProtocolResult:
    k, n = instance.k, instance.n
    params = {"k": k, "n": n, "w": w}
    try:
        msg = encode_indexing(factory(instance, w), instance)
        decoded = decode_indexing(msg, factory(IndexingInstance.zeros(k, n), w), k, n, w)
    except (ContractViolation, CorrectnessFailure, ProtocolViolation) as e:
        return ProtocolResult("indexing", params, 0, k * n, False, error=f"{type(e).__name__}: {e}")
    return ProtocolResult("indexing", params, msg.bit_length, k * n, decoded == instance, msg)


# -- set disjointness -----------------------------------------------------------------

def encode_disjointness(ds: DynamicDS, instance: DisjointnessInstance) -> Message:
    """Insert the complement of S, run the query, and record its cells before and after the inserts."""
    n, w = instance.n, ds.w
    if n > MAX_DISJOINTNESS_N:
        raise ValueError(f"n={n} exceeds {MAX_DISJOINTNESS_N}; the decoder enumerates 2^n sets")
    mem = ds.new_memory()
    ds.preprocess(Probe(mem))
    pre = mem.copy()
    for x in sorted(instance.complement):
        ds.update(Probe(mem), x)
    qp = Probe(mem.copy())
    if not ds.query(qp, None):
        raise CorrectnessFailure("query answered 'not disjoint' after inserting the complement of S")
    cells = sorted(qp.log.distinct())

    msg = Message("disjointness")
    msg.begin("addresses")
    for a in cells:
        msg.add("addr", w, a)
    msg.begin("before-inserts")
    for a in cells:
        msg.add("content", w, pre.read(a))
    msg.begin("after-inserts")
    for a in cells:
        msg.add("content", w, mem.read(a))
    return msg


class _RestrictedMemory(Memory):
    """Tracks only the recorded cells; other cells read as zero and writes to them are dropped."""

    def __init__(self, w: int, state: dict[int, int]):
        super().__init__(w)
        self.cells = state

    def read(self, addr: int) -> int:
        self._check_addr(addr)
        return self.cells.get(addr, 0)

    def write(self, addr: int, value: int) -> None:
        self._check_addr(addr)
        if not 0 <= value < (1 << self.w):
            raise ContractViolation(f"value {value:#x} exceeds w={self.w} bits")
        if addr in self.cells:
            self.cells[addr] = value


def decode_disjointness(msg: Message, ds: DynamicDS, n: int, w: int) -> frozenset[int]:
    """Search all S' in [n] for the largest one whose inserts reproduce the recorded cells.

    ``|C|`` is a third of the record count. Only sound for memoryless
    updates: the contents written to a recorded cell then depend on nothing
    outside the recorded cells.
    """
    if n > MAX_DISJOINTNESS_N:
        raise ValueError(f"n={n} exceeds {MAX_DISJOINTNESS_N}")
    vals = list(msg.values())
    if len(vals) % 3:
        raise ProtocolViolation(f"{len(vals)} records cannot split into three equal parts")
    t = len(vals) // 3
    addrs, before, after = vals[:t], tuple(vals[t:2 * t]), tuple(vals[2 * t:])
    if len(set(addrs)) != t:
        raise ProtocolViolation("duplicate addresses in part one")

    memo: dict[tuple[int, tuple[int, ...]], tuple[int, ...]] = {}

    def insert(x: int, state: tuple[int, ...]) -> tuple[int, ...]:
        key = (x, state)
        if key not in memo:
            cells = dict(zip(addrs, state))
            ds.update(Probe(_RestrictedMemory(w, cells)), x)
            memo[key] = tuple(cells[a] for a in addrs)
        return memo[key]

    matches: list[int] = []  # packed S'
    stack = [(1, before, 0)]
    while stack:
        x, state, packed = stack.pop()
        if x > n:
            if state == after:
                matches.append(packed)
            continue
        stack.append((x + 1, state, packed))
        stack.append((x + 1, insert(x, state), packed | (1 << (x - 1))))
    if not matches:
        raise ProtocolViolation("no subset of [n] reproduces the recorded cell contents")
    top = max(m.bit_count() for m in matches)
    best = [m for m in matches if m.bit_count() == top]
    if len(best) > 1:
        raise ProtocolViolation(f"{len(best)} distinct largest sets match; the maximum is not unique")
    s_star = {x for x in range(1, n + 1) if (best[0] >> (x - 1)) & 1}
    return frozenset(range(1, n + 1)) - s_star


def disjointness_roundtrip(factory: Callable[[DisjointnessInstance, int], DynamicDS],
                           instance: DisjointnessInstance, w: int) -> ProtocolResult:
    n = instance.n
    params = {"n": n, "w": w}
    try:
        msg = encode_disjointness(factory(instance, w), instance)
        decoded = decode_disjointness(msg, factory(DisjointnessInstance(n, frozenset()), w), n, w)
    except (ContractViolation, CorrectnessFailure, ProtocolViolation) as e:
        return ProtocolResult("disjointness", params, 0, n, False, error=f"{type(e).__name__}: {e}")
    return ProtocolResult("disjointness", params, msg.bit_length, n, decoded == instance.S, msg)


# -- matrix multiplication columns --------------------------------------------------------

def _column_gates(c: Depth2Circuit, d: int, ell: int) -> tuple[list[int], list[list[int]]]:
    """Gates adjacent to outputs of column ``ell``; gates adjacent to each input B[k][ell]."""
    near_out = sorted({g for i in range(d) for g in c.outputs[mm_output(d, i, ell - 1)].inputs})
    fan = c.fanout()
    near_in = [sorted(fan[mm_input_b(d, k, ell - 1)]) for k in range(d)]
    return near_out, near_in


def _unit_b(d: int, k: int, ell: int) -> BitMatrix:
    return BitMatrix.zeros(d, d).flip(k, ell - 1)


def mm_column_encode(c: Depth2Circuit, m: BitMatrix, ell: int, verify: bool = True,
                     seed: int = 0) -> Message:
    """Encode ``m`` with the circuit by loading it into A and probing column ``ell`` of B."""
    d = m.rows
    if m.cols != d:
        raise ValueError("matrix must be square")
    if not 1 <= ell <= d:
        raise ValueError(f"column {ell} outside [1..{d}]")
    if verify:
        verify_mm_circuit(c, d, seed=seed)
    near_out, near_in = _column_gates(c, d, ell)
    msg = Message("mm-column")
    msg.begin("output-side")
    mid = c.middle_values(mm_inputs(d, m, BitMatrix.zeros(d, d)))
    for g in near_out:
        msg.add("gate", 1, mid[g])
    for k in range(d):
        msg.begin(f"input-side-{k + 1}")
        mid = c.middle_values(mm_inputs(d, m, _unit_b(d, k, ell)))
        for g in near_in[k]:
            msg.add("gate", 1, mid[g])
    return msg


def mm_column_decode(msg: Message, c: Depth2Circuit, ell: int, d: int) -> BitMatrix:
    near_out, near_in = _column_gates(c, d, ell)
    vals = list(msg.values())
    expected = len(near_out) + sum(map(len, near_in))
    if len(vals) != expected:
        raise ProtocolViolation(f"message has {len(vals)} gate values, circuit implies {expected}")
    base = dict(zip(near_out, vals))
    pos = len(near_out)
    cols = []
    for k in range(d):
        probed = dict(zip(near_in[k], vals[pos:pos + len(near_in[k])]))
        pos += len(near_in[k])
        col = []
        for i in range(d):
            out = c.outputs[mm_output(d, i, ell - 1)]
            values = {g: probed[g] if g in probed else base[g] for g in out.inputs}
            col.append(out.apply(values))
        cols.append(col)
    return BitMatrix.from_rows([[cols[k][i] for k in range(d)] for i in range(d)], d)


@dataclass
class ColumnProtocolResult(ProtocolResult):
    t_u: int = 0
    t_q: int = 0


def mm_column_roundtrip(c: Depth2Circuit, m: BitMatrix, ell: int, verify: bool = True,
                        seed: int = 0) -> ColumnProtocolResult:
    d = m.rows
    cw = column_wires(c, d, ell)
    params = {"d": d, "ell": ell}
    msg = mm_column_encode(c, m, ell, verify=verify, seed=seed)
    decoded = mm_column_decode(msg, c, ell, d)
    return ColumnProtocolResult("mm-column", params, msg.bit_length, d * d, equal(decoded, m), msg,
                                t_u=cw.t_u, t_q=cw.t_q)
