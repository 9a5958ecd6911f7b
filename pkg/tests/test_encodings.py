import itertools
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from _support import (DroppedInsertBitset, DroppedUpdateColCopy, DroppedUpdateRegister,
                      NullIndexing, drop_wire)
from cplab.cellprobe import ContractViolation
from cplab.circuits import NotMatrixMultiplication, naive_mm_circuit
from cplab.encodings import (CorrectnessFailure, Message, ProtocolViolation, decode_disjointness,
                             decode_indexing, disjointness_roundtrip, encode_disjointness,
                             encode_indexing, indexing_roundtrip, mm_column_decode,
                             mm_column_encode, mm_column_roundtrip)
from cplab.gf2 import BitMatrix, equal
from cplab.problems import (BitsetDisjointness, DisjointnessInstance, RegisterIndexing, IndexingInstance,
                            disjointness_bitset, indexing_baseline_colcopy,
                            indexing_baseline_register)

BASELINES = [indexing_baseline_colcopy, indexing_baseline_register]


def test_message_bits_and_flip():
    m = Message("x")
    m.begin("a")
    m.add("content", 4, 0b1010)
    m.begin("b")
    m.add("content", 2, 0b01)
    assert m.bit_length == 6 and m.bits() == "101001"
    assert m.flip_bit(0).bits() == "001001"
    assert m.flip_bit(5).bits() == "101000"
    assert [r.value for r in m.section("b")] == [1]
    with pytest.raises(IndexError):
        m.flip_bit(6)
    with pytest.raises(ValueError):
        m.add("content", 2, 4)


@pytest.mark.parametrize("factory", BASELINES, ids=["colcopy", "register"])
@settings(max_examples=40, deadline=None)
@given(st.sampled_from([(4, 4, 8), (8, 8, 8), (8, 16, 16), (3, 9, 4)]), st.randoms(use_true_random=False))
def test_indexing_lossless(factory, kw, rnd):
    k, n, w = kw
    inst = IndexingInstance.random(k, n, rnd)
    r = indexing_roundtrip(factory, inst, w)
    assert r.passed, r.verdict
    assert r.length >= k * n


def test_indexing_length_formula():
    inst = IndexingInstance.random(8, 8, random.Random(0))
    # colcopy: 1 query cell, each update touches answer cell and column cell
    assert encode_indexing(indexing_baseline_colcopy(inst, 8), inst).bit_length == 8 * (1 + 8 * 2)
    # register: 9 query cells, each update touches the register
    assert encode_indexing(indexing_baseline_register(inst, 8), inst).bit_length == 8 * (9 + 8)


def test_indexing_exhaustive_small():
    for bits in range(1 << 6):
        inst = IndexingInstance(2, 3, tuple(tuple((bits >> (3 * i + j)) & 1 for j in range(3)) for i in range(2)))
        for f in BASELINES:
            assert indexing_roundtrip(f, inst, 4).passed


def test_indexing_tampering_is_detected_or_changes_output():
    inst = IndexingInstance.random(4, 4, random.Random(6))
    msg = encode_indexing(indexing_baseline_register(inst, 8), inst)
    silent = []
    for pos in range(msg.bit_length):
        try:
            dec = decode_indexing(msg.flip_bit(pos), RegisterIndexing(IndexingInstance.zeros(4, 4), 8), 4, 4, 8)
        except ProtocolViolation:
            continue
        if dec == inst:
            silent.append(pos)
    # only the four unused high bits of each row cell (records 1..4) may be ignored
    unused = [8 * rec + b for rec in range(1, 5) for b in range(4)]
    assert silent == unused


def test_truncated_or_padded_messages_rejected():
    inst = IndexingInstance.random(4, 4, random.Random(1))
    msg = encode_indexing(indexing_baseline_register(inst, 8), inst)
    short = Message(msg.protocol, msg.records[:-1], list(msg.sections))
    long = Message(msg.protocol, msg.records + msg.records[-1:], list(msg.sections))
    for bad in (short, long):
        with pytest.raises(ProtocolViolation):
            decode_indexing(bad, indexing_baseline_register(IndexingInstance.zeros(4, 4), 8), 4, 4, 8)


@pytest.mark.parametrize("broken", [DroppedUpdateColCopy, DroppedUpdateRegister])
def test_dropped_update_is_caught(broken):
    hits = 0
    for seed in range(50):
        inst = IndexingInstance.random(4, 4, random.Random(seed))
        r = indexing_roundtrip(broken, inst, 8)
        assert not r.below_entropy
        if r.error:
            assert "CorrectnessFailure" in r.error
            hits += 1
    assert hits > 0


def test_null_structure_cannot_compress():
    for seed in range(20):
        inst = IndexingInstance.random(8, 16, random.Random(seed))
        r = indexing_roundtrip(NullIndexing, inst, 16)
        assert not r.passed and not r.below_entropy


def test_adaptive_escape_is_contract_violation():
    class Escaping(RegisterIndexing):
        def query_probes(self, i):
            return frozenset({0})

    inst = IndexingInstance.random(2, 2, random.Random(0))
    with pytest.raises(ContractViolation):
        encode_indexing(Escaping(inst, 8), inst)


def test_disjointness_exhaustive_n8():
    for bits in range(1 << 8):
        S = frozenset(x for x in range(1, 9) if bits >> (x - 1) & 1)
        r = disjointness_roundtrip(disjointness_bitset, DisjointnessInstance(8, S), 8)
        assert r.passed and r.length == 48


@pytest.mark.parametrize("n, w", [(4, 2), (6, 4), (10, 8)])
def test_disjointness_other_sizes(n, w):
    rng = random.Random(n)
    for _ in range(10):
        inst = DisjointnessInstance.random(n, rng)
        r = disjointness_roundtrip(disjointness_bitset, inst, w)
        assert r.passed, r.verdict
        c = -(-n // w)
        assert r.length == 3 * (2 * c) * w


def test_disjointness_size_guard():
    ds = disjointness_bitset(DisjointnessInstance(21, frozenset()), 8)
    with pytest.raises(ValueError):
        encode_disjointness(ds, DisjointnessInstance(21, frozenset()))


def test_disjointness_malformed_message():
    inst = DisjointnessInstance(8, frozenset({1, 2}))
    msg = encode_disjointness(disjointness_bitset(inst, 8), inst)
    ds = disjointness_bitset(DisjointnessInstance(8, frozenset()), 8)
    with pytest.raises(ProtocolViolation):
        decode_disjointness(Message("d", msg.records[:-1], []), ds, 8, 8)
    # a T-cell content with an S bit set cannot be produced by inserts
    recs = list(msg.records)
    recs[2] = type(recs[2])(recs[2].kind, recs[2].width, 0)
    recs[5] = type(recs[5])(recs[5].kind, recs[5].width, 0b1)
    with pytest.raises(ProtocolViolation):
        decode_disjointness(Message("d", recs, []), ds, 8, 8)


def test_dropped_insert_never_beats_entropy():
    fails = 0
    for bits in range(1 << 8):
        S = frozenset(x for x in range(1, 9) if bits >> (x - 1) & 1)
        r = disjointness_roundtrip(DroppedInsertBitset, DisjointnessInstance(8, S), 8)
        assert not r.below_entropy
        fails += not r.passed
    assert fails > 0


def test_disjointness_rejects_wrong_answer():
    class AlwaysIntersecting(BitsetDisjointness):
        def query(self, mem, q=None):
            super().query(mem, q)
            return False

    r = disjointness_roundtrip(AlwaysIntersecting, DisjointnessInstance(8, frozenset({1})), 8)
    assert r.error and "CorrectnessFailure" in r.error


@pytest.mark.parametrize("d", [2, 3, 4])
def test_mm_column_roundtrip(d):
    c = naive_mm_circuit(d)
    rng = random.Random(d)
    for ell in range(1, d + 1):
        for _ in range(10):
            m = BitMatrix.random(d, d, rng)
            r = mm_column_roundtrip(c, m, ell, verify=False)
            assert r.lossless
            assert r.length == r.t_u + r.t_q == 2 * d * d


def test_mm_column_exhaustive_d2():
    c = naive_mm_circuit(2)
    for bits in itertools.product((0, 1), repeat=4):
        m = BitMatrix.from_rows([bits[:2], bits[2:]])
        for ell in (1, 2):
            assert equal(mm_column_decode(mm_column_encode(c, m, ell, verify=False), c, ell, 2), m)


def test_mm_column_rejects_wrong_circuit():
    with pytest.raises(NotMatrixMultiplication):
        mm_column_encode(drop_wire(naive_mm_circuit(3), 0, 0), BitMatrix.identity(3), 1)


def test_mm_column_length_checked():
    c = naive_mm_circuit(2)
    msg = mm_column_encode(c, BitMatrix.identity(2), 1)
    with pytest.raises(ProtocolViolation):
        mm_column_decode(Message("mm", msg.records[1:], []), c, 1, 2)
