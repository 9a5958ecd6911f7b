"""Cell probe machine: word memory, probe logging and adaptivity checks.

A data structure keeps *all* of its state in a :class:`Memory`. Its
operations receive a :class:`Probe` handle (a memory plus the log being
recorded) and may only read and write through it. Objects implementing
:class:`DynamicDS` therefore hold configuration only, which is what lets
the checkers and the encoders run the same operation against many
memories.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Sequence

log = logging.getLogger(__name__)

MAX_WORD = 64
_MASK64 = (1 << 64) - 1


class ContractViolation(RuntimeError):
    """A data structure broke a machine rule or its declared contract."""


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def random_fill(w: int, seed: int, trial: int) -> Callable[[int], int]:
    """Address-keyed pseudo-random contents, reproducible from (seed, trial)."""
    salt = splitmix64(splitmix64(seed & _MASK64) ^ (trial & _MASK64))
    mask = (1 << w) - 1

    def fill(addr: int) -> int:
        return splitmix64(salt ^ addr) & mask

    return fill


class Memory:
    """Word-addressed store of ``w``-bit cells.

    Unset cells read as zero unless a ``fill`` function supplies contents;
    filled values are cached on first read so later reads agree.
    """

    def __init__(self, w: int, cells: dict[int, int] | None = None,
                 fill: Callable[[int], int] | None = None):
        if not 1 <= w <= MAX_WORD:
            raise ValueError(f"word size w={w} outside 1..{MAX_WORD}")
        self.w = w
        self.cells: dict[int, int] = {}
        self.fill = fill
        self.max_written = -1
        for a, v in (cells or {}).items():
            self.write(a, v)

    def _check_addr(self, addr: int) -> None:
        if not 0 <= addr < (1 << self.w):
            raise ContractViolation(f"address {addr} does not fit in w={self.w} bits")

    def read(self, addr: int) -> int:
        self._check_addr(addr)
        v = self.cells.get(addr)
        if v is None:
            if self.fill is None:
                return 0
            v = self.cells[addr] = self.fill(addr)
        return v

    def write(self, addr: int, value: int) -> None:
        self._check_addr(addr)
        if not 0 <= value < (1 << self.w):
            raise ContractViolation(f"value {value:#x} written to @{addr} exceeds w={self.w} bits")
        self.cells[addr] = value
        if addr > self.max_written:
            self.max_written = addr

    def copy(self) -> "Memory":
        m = Memory(self.w, fill=self.fill)
        m.cells = dict(self.cells)
        m.max_written = self.max_written
        return m

    @property
    def space(self) -> int:
        """Largest address ever written, plus one."""
        return self.max_written + 1

    def contents(self) -> dict[int, int]:
        """Nonzero cells, for comparing states independent of materialized zeros."""
        return {a: v for a, v in self.cells.items() if v}

    def __eq__(self, other) -> bool:
        return isinstance(other, Memory) and self.w == other.w and self.contents() == other.contents()


@dataclass(frozen=True)
class ProbeEntry:
    kind: str  # "R" or "W"
    addr: int
    before: int
    after: int


@dataclass
class ProbeLog:
    entries: list[ProbeEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def addresses(self) -> tuple[int, ...]:
        return tuple(e.addr for e in self.entries)

    def distinct(self) -> list[int]:
        """Probed addresses in order of first touch."""
        return list(dict.fromkeys(e.addr for e in self.entries))

    @property
    def cell_count(self) -> int:
        return len(self.distinct())

    def first_touches(self) -> list[tuple[int, int]]:
        """(address, content before the operation) for each distinct probed cell."""
        seen: dict[int, int] = {}
        for e in self.entries:
            if e.addr not in seen:
                seen[e.addr] = e.before
        return list(seen.items())

    def writes(self) -> list[ProbeEntry]:
        return [e for e in self.entries if e.kind == "W"]


class Probe:
    """Handle passed to data structure operations; every access is logged."""

    def __init__(self, memory: Memory, log: ProbeLog | None = None):
        self.memory = memory
        self.log = log if log is not None else ProbeLog()

    @property
    def w(self) -> int:
        return self.memory.w

    def read(self, addr: int) -> int:
        v = self.memory.read(addr)
        self.log.entries.append(ProbeEntry("R", addr, v, v))
        return v

    def write(self, addr: int, value: int) -> None:
        before = self.memory.read(addr)
        self.memory.write(addr, value)
        self.log.entries.append(ProbeEntry("W", addr, before, value))


class DynamicDS:
    """Behavioural contract of a cell probe data structure.

    Subclasses implement ``preprocess``, ``update`` and ``query``; the
    ``*_probes`` hooks may return a declared address set for non-adaptive
    operations (``None`` means no declaration).
    """

    w: int = 8
    name: str = "ds"

    def preprocess(self, mem: Probe) -> None:
        pass

    def update(self, mem: Probe, u: Any) -> None:
        raise NotImplementedError

    def query(self, mem: Probe, q: Any) -> Any:
        raise NotImplementedError

    def query_probes(self, q: Any) -> frozenset[int] | None:
        return None

    def update_probes(self, u: Any) -> frozenset[int] | None:
        return None

    def all_queries(self) -> Sequence[Any]:
        return ()

    def all_updates(self) -> Sequence[Any]:
        return ()

    def new_memory(self) -> Memory:
        return Memory(self.w)


# -- instrumented execution -------------------------------------------------

@dataclass
class RunResult:
    answers: list[Any]
    logs: list[tuple[str, Any, ProbeLog]]
    memory: Memory

    def _times(self, kind: str) -> list[int]:
        return [lg.cell_count for k, _, lg in self.logs if k == kind]

    @property
    def t_q_max(self) -> int:
        return max(self._times("query"), default=0)

    @property
    def t_u_max(self) -> int:
        return max(self._times("update"), default=0)

    @property
    def t_q_avg(self) -> float:
        t = self._times("query")
        return sum(t) / len(t) if t else 0.0

    @property
    def t_u_avg(self) -> float:
        t = self._times("update")
        return sum(t) / len(t) if t else 0.0

    @property
    def space(self) -> int:
        return self.memory.space

    def trace(self) -> str:
        return format_trace(self.logs)


def run_instrumented(ds: DynamicDS, script: Iterable[tuple], mem: Memory | None = None) -> RunResult:
    """Execute ``script`` against a copy of ``mem``.

    Script items are ``("preprocess",)``, ``("update", u)`` or
    ``("query", q)``.
    """
    memory = (mem if mem is not None else ds.new_memory()).copy()
    answers: list[Any] = []
    logs: list[tuple[str, Any, ProbeLog]] = []
    for op in script:
        kind = op[0]
        probe = Probe(memory)
        if kind == "preprocess":
            ds.preprocess(probe)
            logs.append((kind, None, probe.log))
        elif kind == "update":
            ds.update(probe, op[1])
            logs.append((kind, op[1], probe.log))
        elif kind == "query":
            answers.append(ds.query(probe, op[1]))
            logs.append((kind, op[1], probe.log))
        else:
            raise ValueError(f"unknown script operation {kind!r}")
    return RunResult(answers, logs, memory)


def replay(pre: Memory, plog: ProbeLog) -> Memory:
    m = pre.copy()
    for e in plog.writes():
        m.write(e.addr, e.after)
    return m


def format_trace(logs: Sequence[tuple[str, Any, ProbeLog]]) -> str:
    out = []
    for k, (_, _, plog) in enumerate(logs, 1):
        for e in plog.entries:
            out.append(f"op#{k} {e.kind} @{e.addr:#x} {e.before:#x} -> {e.after:#x}")
    return "\n".join(out) + ("\n" if out else "")


def parse_script(text: str) -> list[tuple]:
    """Parse ``P,U3,Q1`` style scripts (P = preprocess, U = update, Q = query)."""
    ops: list[tuple] = []
    for tok in filter(None, (t.strip() for t in text.split(","))):
        head, arg = tok[0].upper(), tok[1:]
        if head == "P" and not arg:
            ops.append(("preprocess",))
        elif head in "UQ" and arg.lstrip("-").isdigit():
            ops.append(("update" if head == "U" else "query", int(arg)))
        else:
            raise ValueError(f"bad script token {tok!r}")
    return ops


# -- adaptivity checks --------------------------------------------------------

@dataclass
class CheckReport:
    check: str
    passed: bool
    trials: int
    failures: list[str] = field(default_factory=list)
    # (operation, trial_a, trial_b) of the first address-sequence divergence
    first_divergence: tuple | None = None
    # (operation, cell, cells it was found to depend on)
    dependency: tuple | None = None

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"{self.check}: {status} ({self.trials} trials)"]
        lines += [f"  {f}" for f in self.failures]
        return "\n".join(lines)


def _address_sequence(op: Callable[[Probe], Any], mem: Memory) -> tuple[int, ...]:
    probe = Probe(mem)
    op(probe)
    return probe.log.addresses()


def _sequence_check(kind: str, ops: Sequence[Any], run: Callable[[Probe, Any], Any],
                    declared: Callable[[Any], frozenset[int] | None],
                    w: int, trials: int, seed: int, report: CheckReport) -> None:
    for x in ops:
        decl = declared(x)
        base = None
        for t in range(trials):
            mem = Memory(w, fill=random_fill(w, seed, t))
            seq = _address_sequence(lambda p: run(p, x), mem)
            if decl is not None and not set(seq) <= decl:
                report.passed = False
                report.failures.append(
                    f"{kind} {x!r} probed {sorted(set(seq) - decl)} outside its declared schedule"
                )
            if base is None:
                base = seq
            elif seq != base:
                report.passed = False
                if report.first_divergence is None:
                    report.first_divergence = (x, 0, t)
                report.failures.append(
                    f"{kind} {x!r}: probe sequence differs between trial 0 and trial {t} "
                    f"({list(base)} vs {list(seq)})"
                )
                break


def check_query_nonadaptive(ds: DynamicDS, queries: Sequence[Any] | None = None,
                            trials: int = 16, seed: int = 0) -> CheckReport:
    """Randomized test that query probe sequences ignore memory contents.

    Sound but incomplete: a data structure can agree on every sampled
    memory by chance. Declared schedules are checked exactly.
    """
    if trials < 2:
        raise ValueError("trials must be at least 2")
    queries = ds.all_queries() if queries is None else queries
    report = CheckReport("query-nonadaptive", True, trials)
    _sequence_check("query", queries, ds.query, ds.query_probes, ds.w, trials, seed, report)
    return report


def check_update_nonadaptive(ds: DynamicDS, updates: Sequence[Any] | None = None,
                             trials: int = 16, seed: int = 0) -> CheckReport:
    """Randomized test that update probe sequences ignore memory contents."""
    if trials < 2:
        raise ValueError("trials must be at least 2")
    updates = ds.all_updates() if updates is None else updates
    report = CheckReport("update-nonadaptive", True, trials)
    _sequence_check("update", updates, ds.update, ds.update_probes, ds.w, trials, seed, report)
    return report


def check_memoryless(ds: DynamicDS, updates: Sequence[Any] | None = None,
                     trials: int = 16, seed: int = 0) -> CheckReport:
    """Check that updates are non-adaptive and rewrite each cell from its own content only."""
    if trials < 2:
        raise ValueError("trials must be at least 2")
    updates = ds.all_updates() if updates is None else updates
    report = CheckReport("memoryless", True, trials)
    _sequence_check("update", updates, ds.update, ds.update_probes, ds.w, trials, seed, report)

    w = ds.w
    mask = (1 << w) - 1
    for u in updates:
        base = Memory(w, fill=random_fill(w, seed, 0))
        probe = Probe(base.copy())
        ds.update(probe, u)
        cells = probe.log.distinct()
        prior = {c: base.read(c) for c in cells}
        final = {c: probe.memory.read(c) for c in cells}
        for c in cells:
            for t in range(1, trials):
                mem = Memory(w, fill=random_fill(w, seed, t))
                mem.write(c, prior[c])
                p = Probe(mem)
                ds.update(p, u)
                got = mem.read(c)
                if got != final[c]:
                    report.passed = False
                    deps = _find_sources(ds, u, base, cells, c, final[c], mask)
                    if report.dependency is None:
                        report.dependency = (u, c, deps)
                    report.failures.append(
                        f"update {u!r}: content written to cell @{c} depends on other cells "
                        f"{['@%d' % d for d in deps]} (trial {t}: wrote {got:#x}, expected {final[c]:#x})"
                    )
                    break
    return report


def _find_sources(ds: DynamicDS, u: Any, base: Memory, cells: list[int], c: int,
                  expected: int, mask: int) -> list[int]:
    """Cells whose content, when changed alone, changes what ``u`` writes to ``c``."""
    deps = []
    for d in cells:
        if d == c:
            continue
        mem = base.copy()
        mem.write(d, mem.read(d) ^ mask)
        ds.update(Probe(mem), u)
        if mem.read(c) != expected:
            deps.append(d)
    return deps
