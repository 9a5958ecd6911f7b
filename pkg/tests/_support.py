"""Deliberately adaptive or broken structures used as counterexamples."""
from cplab.cellprobe import DynamicDS, Probe
from cplab.circuits import Depth2Circuit, Gate
from cplab.problems import BitsetDisjointness, ColumnCopyIndexing, RegisterIndexing

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES.append(f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}")


class BinarySearchDS(DynamicDS):
    """Query q binary-searches cells 0..15 for the first value >= q: adaptive by design."""

    name = "binsearch"

    def __init__(self, w: int = 8):
        self.w = w

    def update(self, mem: Probe, u) -> None:
        pass

    def query(self, mem: Probe, q: int) -> int:
        lo, hi = 0, 15
        while lo < hi:
            mid = (lo + hi) // 2
            if mem.read(mid) < q:
                lo = mid + 1
            else:
                hi = mid
        return lo

    def all_queries(self):
        return range(1, 200, 37)


class EmptyQueryDS(DynamicDS):
    name = "empty"

    def update(self, mem, u):
        pass

    def query(self, mem, q):
        return 0

    def all_queries(self):
        return range(5)

    def all_updates(self):
        return range(5)


class DroppedUpdateColCopy(ColumnCopyIndexing):
    """Column-copy indexing whose update ``dropped`` reads but never writes."""

    def __init__(self, instance, w, dropped=3):
        super().__init__(instance, w)
        self.dropped = dropped

    def update(self, mem, j):
        if j != self.dropped:
            return super().update(mem, j)
        for b in range(self.cpc):
            mem.read(self.col_addr(j, b))


class DroppedUpdateRegister(RegisterIndexing):
    def __init__(self, instance, w, dropped=3):
        super().__init__(instance, w)
        self.dropped = dropped

    def update(self, mem, j):
        if j != self.dropped:
            return super().update(mem, j)
        mem.read(0)


class DroppedInsertBitset(BitsetDisjointness):
    def __init__(self, instance, w, dropped=3):
        super().__init__(instance, w)
        self.dropped = dropped

    def update(self, mem, x):
        if x != self.dropped:
            return super().update(mem, x)
        addr = self.c + (x - 1) // self.w
        mem.read(addr)


class NullIndexing(RegisterIndexing):
    """Claims t_q = 1, t_u = 0 by storing nothing: answers are always 0."""

    def preprocess(self, mem):
        pass

    def update(self, mem, j):
        pass

    def query(self, mem, i):
        return mem.read(0) & 1

    def query_probes(self, i):
        return frozenset({0})


def drop_wire(c: Depth2Circuit, gate: int, inp: int) -> Depth2Circuit:
    middle = list(c.middle)
    g = middle[gate]
    middle[gate] = Gate(tuple(x for x in g.inputs if x != inp), g.kind, g.table)
    return Depth2Circuit(c.n_inputs, tuple(middle), c.outputs)
