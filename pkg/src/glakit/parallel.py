"""Quadratic-time parallel form and its closed-form backward pass.

Output row t is a masked weighted sum over rows i <= t where query/key
weights carry the cumulative key-decay ratio b_t/b_i and values carry the
cumulative value-decay ratio d_t/d_i.  Every ratio is formed as
exp(log_b[t] - log_b[i]); neither raw cumulative products nor their
reciprocals are ever materialized, and the causal mask is realized purely
as slice bounds.

This form divides information between positions arbitrarily far apart, so
the usable decay dynamic range is bounded: above the guard threshold the
chunkwise form is the right tool.  The parallel form's job here is
cross-validation against the recurrent oracle.
"""

from __future__ import annotations

import numpy as np

from .cost import Meter
from .gates import cumulative_log_decay
from .recurrent import GlaInstance, GradBundle
from .tensor import SeqTensor, suffix_sum_arr

__all__ = [
    "DecayRangeError",
    "forward_parallel",
    "backward_parallel",
    "parallel_forward_cost",
    "decay_range",
]

DEFAULT_MAX_EXPONENT = 600.0


class DecayRangeError(ValueError):
    """Raised when the sequence's decay range exceeds the parallel-form guard."""


def decay_range(inst: GlaInstance) -> float:
    """Largest |log_b[t] - log_b[i]| (or log_d) any attention ratio needs."""
    cd = cumulative_log_decay(inst.gates)
    rb = float(np.max(cd.log_b[0] - cd.log_b[-1])) if inst.L > 1 else 0.0
    rd = float(np.max(cd.log_d[0] - cd.log_d[-1])) if inst.L > 1 else 0.0
    return max(rb, rd, 0.0)


def _guard(inst: GlaInstance, max_exponent: float) -> None:
    r = decay_range(inst)
    if r > max_exponent:
        raise DecayRangeError(
            f"decay dynamic range too large for parallel form "
            f"({r:.1f} > {max_exponent:.1f}); use chunkwise"
        )


def forward_parallel(inst: GlaInstance, max_exponent: float = DEFAULT_MAX_EXPONENT,
                     meter: Meter | None = None) -> SeqTensor:
    """o_t = sum_{i<=t} <q_t (.) b_t/b_i, k_i> (v_i (.) d_t/d_i)."""
    _guard(inst, max_exponent)
    Q, K, V = inst.Q.data, inst.K.data, inst.V.data
    cd = cumulative_log_decay(inst.gates)
    L, dk, dv = inst.L, inst.dk, inst.dv
    O = np.empty((L, dv))
    for t in range(L):
        n = t + 1
        brel = np.exp(cd.log_b[t] - cd.log_b[:n])  # n x dk, all <= 1
        drel = np.exp(cd.log_d[t] - cd.log_d[:n])
        w = (K[:n] * brel * Q[t]).sum(axis=1)      # attention weights A_{t,i}
        O[t] = (w[:, None] * (V[:n] * drel)).sum(axis=0)
        if meter:
            meter.add_flops(2 * n * dk + 2 * n * dv)      # decay ratios
            meter.add_flops(2 * n * dk + n * (dk - 1))    # weights
            meter.add_flops(n * dv)                       # value decay
            meter.add_flops(n * dv + (n - 1) * dv)        # weighted sum
    return SeqTensor(O)


def parallel_forward_cost(L: int, dk: int, dv: int) -> int:
    """Closed-form flop count of forward_parallel under the package convention."""
    total = 0
    for t in range(L):
        n = t + 1
        total += 2 * n * dk + 2 * n * dv        # log diffs + exps for brel, drel
        total += 2 * n * dk + n * (dk - 1)      # weights: two mult passes + row sums
        total += n * dv                          # value decay V * drel
        total += n * dv + (n - 1) * dv           # weighted value sum
    return total


def backward_parallel(inst: GlaInstance, dO: SeqTensor,
                      max_exponent: float = DEFAULT_MAX_EXPONENT) -> GradBundle:
    """Closed-form gradients of <O, dO> for the parallel form.

    dQ/dK/dV come from the masked double sums (the <dO_t, v_i> inner
    products carry the d_t/d_i value decay).  Gate gradients use the
    log-decay identities
        dlogb_t = q_t (.) dq_t - k_t (.) dk_t
        dlogd_t = o_t (.) do_t - v_t (.) dv_t
    followed by suffix sums to reach dlog_alpha / dlog_beta.  The sign of
    the dlogb identity (query term positive) is pinned by the
    finite-difference oracle in the test suite.
    """
    if dO.shape != (inst.L, inst.dv):
        raise ValueError(f"dO must be {inst.L}x{inst.dv}, got {dO.shape}")
    _guard(inst, max_exponent)
    Q, K, V = inst.Q.data, inst.K.data, inst.V.data
    dOa = dO.data
    cd = cumulative_log_decay(inst.gates)
    L, dk, dv = inst.L, inst.dk, inst.dv

    O = forward_parallel(inst, max_exponent).data  # reused by the dlogd identity

    dQ = np.zeros((L, dk))
    dK = np.zeros((L, dk))
    dV = np.zeros((L, dv))
    for t in range(L):
        brel = np.exp(cd.log_b[t] - cd.log_b[: t + 1])
        drel = np.exp(cd.log_d[t] - cd.log_d[: t + 1])
        Kb = K[: t + 1] * brel
        w = (Kb * Q[t]).sum(axis=1)                   # A_{t,i}
        g = (V[: t + 1] * drel * dOa[t]).sum(axis=1)  # <do_t, v_i d_t/d_i>
        dQ[t] = (g[:, None] * Kb).sum(axis=0)
        dK[: t + 1] += g[:, None] * (brel * Q[t])
        dV[: t + 1] += w[:, None] * (drel * dOa[t])

    dlogb = Q * dQ - K * dK
    dlogd = O * dOa - V * dV
    return GradBundle(dQ, dK, dV, suffix_sum_arr(dlogb), suffix_sum_arr(dlogd))
