import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cplab.cellprobe import Probe, run_instrumented
from cplab.circuits import compile_report
from cplab.gf2 import ParseError, mat_mul
from cplab.operators import prefix_sum_operator
from cplab.problems import (BitsetDisjointness, ColumnCopyIndexing, DisjointnessInstance,
                            DomainError, IndexingInstance, LinearCellProbe, RegisterIndexing,
                            canonical_decomposition, ceil_div, dyadic_intervals,
                            prefix_sum_range_tree)


def dyadic_oracle(n):
    """Every [a*2^e + 1, (a+1)*2^e] inside [1..n]."""
    out = set()
    for e in range(n.bit_length()):
        size = 1 << e
        for a in range(n // size):
            out.add((a * size + 1, (a + 1) * size))
    return out


def min_cover_oracle(k, intervals):
    """Smallest number of disjoint intervals from the family tiling [1..k], by DP."""
    best = {0: 0}
    for end in range(1, k + 1):
        best[end] = min(best[lo - 1] + 1 for lo, hi in intervals if hi == end and lo - 1 in best)
    return best[k]


def test_ceil_div():
    assert [ceil_div(a, 4) for a in (0, 1, 4, 5, 8)] == [0, 1, 1, 2, 2]


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_dyadic_intervals_match_oracle(n):
    iv = dyadic_intervals(n)
    assert iv[0] == (1, n)
    assert len(iv) == 2 * n - 1 == len(set(iv))
    assert set(iv) == dyadic_oracle(n)


def test_dyadic_requires_power_of_two():
    with pytest.raises(ValueError):
        dyadic_intervals(6)


@pytest.mark.parametrize("n", [8, 16, 32])
def test_canonical_decomposition_is_a_minimum_tiling(n):
    fam = dyadic_oracle(n)
    for k in range(1, n + 1):
        parts = canonical_decomposition(k)
        assert [x for lo, hi in parts for x in range(lo, hi + 1)] == list(range(1, k + 1))
        assert set(parts) <= fam
        assert len(parts) == bin(k).count("1") == min_cover_oracle(k, fam)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_range_tree_computes_prefix_sums(n):
    ds = prefix_sum_range_tree(n)
    assert mat_mul(ds.Q, ds.V) == prefix_sum_operator(n)
    depth = n.bit_length()
    assert max(ds.update_times()) == depth
    assert max(ds.query_times()) <= max(1, depth - 1)


def test_range_tree_8_counts():
    r = compile_report(prefix_sum_range_tree(8))
    assert (r.wires, r.max_t_u, r.max_t_q) == (45, 4, 3)
    assert r.holds()


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(1, 16), st.randoms(use_true_random=False))
def test_indexing_text_roundtrip(k, n, rnd):
    inst = IndexingInstance.random(k, n, rnd)
    assert IndexingInstance.loads(inst.dumps()) == inst


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 20), st.randoms(use_true_random=False))
def test_disjointness_text_roundtrip(n, rnd):
    inst = DisjointnessInstance.random(n, rnd)
    assert DisjointnessInstance.loads(inst.dumps()) == inst
    assert inst.S | inst.complement == frozenset(range(1, n + 1))


def test_instance_validation():
    with pytest.raises(ValueError):
        IndexingInstance(2, 2, ((0, 1),))
    with pytest.raises(ValueError):
        IndexingInstance(1, 2, ((0, 2),))
    with pytest.raises(ValueError):
        DisjointnessInstance(3, frozenset({4}))
    with pytest.raises(ParseError):
        IndexingInstance.loads("2\n01\n")


@pytest.mark.parametrize("cls", [ColumnCopyIndexing, RegisterIndexing])
@pytest.mark.parametrize("k, n, w", [(4, 4, 8), (8, 8, 8), (8, 16, 16), (20, 3, 8), (3, 20, 8)])
def test_indexing_baselines_answer_every_query(cls, k, n, w):
    inst = IndexingInstance.random(k, n, random.Random(k * 100 + n))
    ds = cls(inst, w)
    mem = ds.new_memory()
    ds.preprocess(Probe(mem))
    for j in range(1, n + 1):
        ds.update(Probe(mem), j)
        for i in range(1, k + 1):
            p = Probe(mem.copy())
            assert ds.query(p, i) == inst.bit(i, j)
            assert set(p.log.distinct()) == ds.query_probes(i)


def test_baseline_costs():
    inst = IndexingInstance.random(20, 20, random.Random(0))
    cc = run_instrumented(ColumnCopyIndexing(inst, 8), [("preprocess",), ("update", 2), ("query", 17)])
    assert (cc.t_u_max, cc.t_q_max) == (2 * 3, 1)
    rg = run_instrumented(RegisterIndexing(inst, 8), [("preprocess",), ("update", 2), ("query", 17)])
    assert (rg.t_u_max, rg.t_q_max) == (1, 1 + 3)


def test_domain_errors():
    inst = IndexingInstance.zeros(2, 2)
    ds = RegisterIndexing(inst, 8)
    mem = Probe(ds.new_memory())
    with pytest.raises(DomainError):
        ds.update(mem, 3)
    with pytest.raises(DomainError):
        ds.query(mem, 0)
    with pytest.raises(ValueError):
        ColumnCopyIndexing(IndexingInstance.zeros(1, 20), 4)


@pytest.mark.parametrize("n, w", [(8, 8), (10, 4), (5, 8)])
def test_bitset_is_exact_for_all_pairs(n, w):
    for s_bits, t_bits in itertools.product(range(1 << n), repeat=2) if n <= 5 else \
            [(random.Random(i).getrandbits(n), random.Random(-i).getrandbits(n)) for i in range(200)]:
        S = frozenset(x for x in range(1, n + 1) if s_bits >> (x - 1) & 1)
        T = [x for x in range(1, n + 1) if t_bits >> (x - 1) & 1]
        ds = BitsetDisjointness(DisjointnessInstance(n, S), w)
        mem = ds.new_memory()
        ds.preprocess(Probe(mem))
        for x in T:
            ds.update(Probe(mem), x)
        assert ds.query(Probe(mem), None) == S.isdisjoint(T)


def test_linear_cell_probe_initial_vector():
    ds = LinearCellProbe(prefix_sum_range_tree(4), initial=[1, 0, 1, 1])
    r = run_instrumented(ds, [("preprocess",)] + [("query", j) for j in range(1, 5)])
    assert r.answers == [1, 1, 0, 1]
