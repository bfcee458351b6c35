"""Log-space gates, cumulative decays, chunk plans and chunk factors."""

import math

import numpy as np
import pytest

from glakit import ChunkPlan, GateSeq, chunk_relative_decays, cumulative_log_decay


def make_gates(la, lb):
    return GateSeq(np.asarray(la, dtype=float), np.asarray(lb, dtype=float))


def random_gates(L, dk, dv, seed, floor=0.5):
    rng = np.random.default_rng(seed)
    la = rng.uniform(math.log(floor), 0.0, (L, dk))
    lb = rng.uniform(math.log(floor), 0.0, (L, dv))
    return GateSeq(la, lb)


def test_rejects_positive_log_gates():
    with pytest.raises(ValueError):
        make_gates([[0.1]], [[0.0]])


def test_cumulative_identity_gates():
    g = make_gates(np.zeros((5, 2)), np.zeros((5, 3)))
    cd = cumulative_log_decay(g)
    assert np.array_equal(cd.log_b, np.zeros((5, 2)))
    assert np.array_equal(cd.log_d, np.zeros((5, 3)))


def test_cumulative_half_powers():
    lhalf = math.log(0.5)
    g = make_gates([[lhalf]] * 3, [[0.0]] * 3)
    cd = cumulative_log_decay(g)
    assert np.allclose(np.exp(cd.log_b[:, 0]), [0.5, 0.25, 0.125], rtol=1e-15)


def test_cumulative_telescopes_to_gates():
    g = random_gates(20, 3, 2, seed=0)
    cd = cumulative_log_decay(g)
    steps = np.exp(cd.log_b[1:] - cd.log_b[:-1])
    assert np.max(np.abs(steps - np.exp(g.log_alpha[1:]))) < 1e-14


def test_cumulative_monotone_and_anchored():
    g = random_gates(12, 2, 2, seed=1)
    cd = cumulative_log_decay(g)
    assert np.all(np.diff(cd.log_b, axis=0) <= 0)
    assert np.all(np.diff(cd.log_d, axis=0) <= 0)
    assert np.array_equal(cd.log_b[0], g.log_alpha[0])
    assert np.array_equal(cd.log_d[0], g.log_beta[0])


@pytest.mark.parametrize("L,C,expected", [(10, 3, [(0, 3), (3, 6), (6, 9), (9, 10)]),
                                          (4, 4, [(0, 4)]),
                                          (4, 9, [(0, 4)]),
                                          (3, 1, [(0, 1), (1, 2), (2, 3)])])
def test_chunk_plan_coverage(L, C, expected):
    plan = ChunkPlan(L, C)
    assert list(plan.boundaries) == expected
    assert plan.boundaries[0][0] == 0 and plan.boundaries[-1][1] == L


def test_chunk_factors_identity_gates():
    g = make_gates(np.zeros((6, 2)), np.zeros((6, 2)))
    decs = chunk_relative_decays(cumulative_log_decay(g), ChunkPlan(6, 4))
    for d in decs:
        for arr in (d.b_prime, d.b_dagger, d.d_prime, d.d_dagger):
            assert np.array_equal(arr, np.ones_like(arr))
        assert np.array_equal(d.gamma_b, np.ones(2))


def test_chunk_factors_constant_gate():
    # scalar gate 0.5 per step, one chunk of length 2:
    # dagger = (g, g^2), prime = (g, 1), gamma = g^2
    g = 0.5
    gates = make_gates([[math.log(g)]] * 2, [[0.0]] * 2)
    (d,) = chunk_relative_decays(cumulative_log_decay(gates), ChunkPlan(2, 2))
    assert np.allclose(d.b_dagger[:, 0], [g, g * g], rtol=1e-15)
    assert np.allclose(d.b_prime[:, 0], [g, 1.0], rtol=1e-15)
    assert np.allclose(d.gamma_b, [g * g], rtol=1e-15)


def test_prime_times_dagger_telescopes_to_gamma():
    g = random_gates(23, 3, 2, seed=2)
    decs = chunk_relative_decays(cumulative_log_decay(g), ChunkPlan(23, 5))
    for d in decs:
        prod = d.b_prime * d.b_dagger
        assert np.max(np.abs(prod - d.gamma_b)) <= 1e-12
        prod = d.d_prime * d.d_dagger
        assert np.max(np.abs(prod - d.gamma_d)) <= 1e-12


def test_factors_bounded():
    g = random_gates(17, 2, 3, seed=3, floor=0.25)
    decs = chunk_relative_decays(cumulative_log_decay(g), ChunkPlan(17, 4))
    for d in decs:
        for arr in (d.b_prime, d.b_dagger, d.d_prime, d.d_dagger):
            assert np.all(arr > 0.0)
            assert np.all(arr <= 1.0 + 1e-15)


def test_plan_mismatch_rejected():
    g = random_gates(8, 2, 2, seed=4)
    with pytest.raises(ValueError):
        chunk_relative_decays(cumulative_log_decay(g), ChunkPlan(9, 3))
