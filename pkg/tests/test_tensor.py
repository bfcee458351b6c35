"""Array primitives: pinned summation order, validation, suffix sums."""

import numpy as np
import pytest

from glakit import SeqTensor, hadamard, matmul, suffix_sum


def naive_matmul(a, b):
    """Triple-loop oracle, ascending k, multiply then add."""
    m, kk = a.shape
    n = b.shape[1]
    out = np.empty((m, n))
    for i in range(m):
        for j in range(n):
            acc = 0.0
            for k in range(kk):
                acc = acc + a[i, k] * b[k, j]
            out[i, j] = acc
    return out


def test_matmul_identity():
    rng = np.random.default_rng(0)
    x = SeqTensor(rng.uniform(-1, 1, (3, 5)))
    eye = SeqTensor(np.eye(3))
    assert np.array_equal(matmul(eye, x).data, x.data)


def test_matmul_hand():
    a = SeqTensor([[1.0, 2.0], [3.0, 4.0]])
    b = SeqTensor([[1.0], [1.0]])
    assert np.array_equal(matmul(a, b).data, [[3.0], [7.0]])


@pytest.mark.parametrize("seed", range(5))
def test_matmul_matches_triple_loop_bitwise(seed):
    rng = np.random.default_rng(seed)
    a = rng.uniform(-1, 1, (8, 8))
    b = rng.uniform(-1, 1, (8, 8))
    got = matmul(SeqTensor(a), SeqTensor(b)).data
    assert np.array_equal(got, naive_matmul(a, b))


def test_matmul_dim_mismatch():
    a = SeqTensor(np.ones((2, 3)))
    b = SeqTensor(np.ones((2, 3)))
    with pytest.raises(ValueError):
        matmul(a, b)


def test_hadamard_ones_and_hand():
    rng = np.random.default_rng(1)
    x = SeqTensor(rng.uniform(-1, 1, (4, 3)))
    ones = SeqTensor(np.ones((4, 3)))
    assert np.array_equal(hadamard(x, ones).data, x.data)
    assert np.array_equal(
        hadamard(SeqTensor([[2.0, 3.0]]), SeqTensor([[4.0, 5.0]])).data,
        [[8.0, 15.0]])


def test_hadamard_associative():
    rng = np.random.default_rng(2)
    x, y, z = (SeqTensor(rng.uniform(-1, 1, (5, 4))) for _ in range(3))
    left = hadamard(hadamard(x, y), z).data
    right = hadamard(x, hadamard(y, z)).data
    assert np.allclose(left, right, rtol=1e-15, atol=0)


def test_hadamard_row_broadcast():
    x = SeqTensor([[1.0, 2.0], [3.0, 4.0]])
    row = SeqTensor([[10.0, 100.0]])
    assert np.array_equal(hadamard(x, row).data, [[10.0, 200.0], [30.0, 400.0]])
    with pytest.raises(ValueError):
        hadamard(x, SeqTensor([[1.0, 2.0, 3.0]]))


def test_suffix_sum_zero_and_hand():
    z = SeqTensor(np.zeros((4, 2)))
    assert np.array_equal(suffix_sum(z).data, np.zeros((4, 2)))
    x = SeqTensor([[1.0], [2.0], [3.0]])
    assert np.array_equal(suffix_sum(x).data, [[6.0], [5.0], [3.0]])


def test_suffix_sum_head_is_column_sum():
    rng = np.random.default_rng(3)
    x = rng.uniform(-1, 1, (9, 4))
    out = suffix_sum(SeqTensor(x)).data
    assert np.allclose(out[0], x.sum(axis=0), rtol=1e-12, atol=0)


def test_suffix_sum_difference_recovers_rows():
    # (a+b)-b is not exact in fp, so the recovery is checked at 1e-12.
    rng = np.random.default_rng(4)
    x = rng.uniform(-1, 1, (16, 3))
    out = suffix_sum(SeqTensor(x)).data
    diff = out[:-1] - out[1:]
    assert np.max(np.abs(diff - x[:-1])) <= 1e-12


def test_constructors_reject_nonfinite():
    for bad in (np.nan, np.inf, -np.inf):
        with pytest.raises(ValueError):
            SeqTensor([[1.0, bad]])


def test_seqtensor_immutable():
    x = SeqTensor([[1.0, 2.0]])
    with pytest.raises(AttributeError):
        x.rows = 5
    with pytest.raises(ValueError):
        x.data[0, 0] = 9.0  # numpy read-only flag
