import random

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cplab.gf2 import (BitMatrix, ParseError, col_weights, dumps, equal, loads, mat_mul, rank,
                       read_matrix, row_weights, total_weight, transpose, write_matrix)


@st.composite
def matrices(draw, max_dim=9, rows=None, cols=None):
    r = draw(st.integers(0, max_dim)) if rows is None else rows
    c = draw(st.integers(0, max_dim)) if cols is None else cols
    bits = draw(st.lists(st.lists(st.integers(0, 1), min_size=c, max_size=c), min_size=r, max_size=r))
    return BitMatrix.from_rows(bits, c)


@st.composite
def chains(draw):
    a, b, c, d = (draw(st.integers(0, 7)) for _ in range(4))
    return draw(matrices(rows=a, cols=b)), draw(matrices(rows=b, cols=c)), draw(matrices(rows=c, cols=d))


def np_rank_gf2(arr: np.ndarray) -> int:
    a = arr.copy() % 2
    r = 0
    for c in range(a.shape[1]):
        piv = next((i for i in range(r, a.shape[0]) if a[i, c]), None)
        if piv is None:
            continue
        a[[r, piv]] = a[[piv, r]]
        for i in range(a.shape[0]):
            if i != r and a[i, c]:
                a[i] ^= a[r]
        r += 1
    return r


def test_constructors_and_access():
    a = BitMatrix.from_rows([[1, 0, 1], [0, 1, 1]])
    assert a.shape == (2, 3)
    assert a[0, 2] == 1 and a[1, 0] == 0
    assert a.row_support(1) == [1, 2]
    assert a.serialize() == "101011"
    assert a.flip(0, 0)[0, 0] == 0 and a[0, 0] == 1
    assert BitMatrix.identity(3).to_lists() == [[1, 0, 0], [0, 1, 0], [0, 0, 1]]
    assert total_weight(BitMatrix.ones(3, 4)) == 12
    assert BitMatrix.from_supports([[0, 2], []], 3).to_lists() == [[1, 0, 1], [0, 0, 0]]


def test_tail_bits_rejected():
    with pytest.raises(ValueError):
        BitMatrix(1, 2, (0b100,))


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ValueError, match=r"2x3.*2x2|2 x 3|\(2, 3\)"):
        mat_mul(BitMatrix.zeros(2, 3), BitMatrix.zeros(2, 2))


@settings(max_examples=150, deadline=None)
@given(chains())
def test_mat_mul_matches_numpy_and_associates(abc):
    a, b, c = abc
    ref = (a.to_numpy() @ b.to_numpy()) % 2
    assert mat_mul(a, b).to_lists() == ref.tolist()
    assert equal(mat_mul(mat_mul(a, b), c), mat_mul(a, mat_mul(b, c)))


@settings(max_examples=150, deadline=None)
@given(matrices())
def test_transpose_weights_rank(a):
    t = transpose(a)
    assert equal(transpose(t), a)
    assert row_weights(a) == col_weights(t)
    assert sum(row_weights(a)) == total_weight(a) == int(a.to_numpy().sum())
    assert rank(a) == rank(t) == np_rank_gf2(a.to_numpy().astype(np.int64))


@settings(max_examples=100, deadline=None)
@given(matrices())
def test_text_roundtrip(a):
    assert equal(loads(dumps(a)), a)


@settings(max_examples=100, deadline=None)
@given(matrices(max_dim=6), st.integers(0, 63))
def test_mat_vec(a, x):
    x &= (1 << a.cols) - 1
    xv = np.array([(x >> j) & 1 for j in range(a.cols)], dtype=np.int64)
    y = (a.to_numpy().astype(np.int64) @ xv) % 2 if a.cols else np.zeros(a.rows, dtype=np.int64)
    got = a.mat_vec(x)
    assert [(got >> i) & 1 for i in range(a.rows)] == y.tolist()


def test_random_is_seeded():
    assert equal(BitMatrix.random(5, 7, random.Random(3)), BitMatrix.random(5, 7, random.Random(3)))


@pytest.mark.parametrize("text, line", [
    ("2 3\n101\n", 3),
    ("2 3\n101\n1x1\n", 3),
    ("2 3\n101\n1011\n", 3),
    ("two 3\n", 1),
])
def test_parse_errors_carry_location(text, line):
    with pytest.raises(ParseError) as e:
        loads(text)
    assert e.value.line == line


def test_file_roundtrip(tmp_path):
    a = BitMatrix.random(4, 6, random.Random(1))
    write_matrix(tmp_path / "a.txt", a)
    assert equal(read_matrix(tmp_path / "a.txt"), a)
