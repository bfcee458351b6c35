"""Ground-truth recurrent form and the finite-difference gradient oracle.

The step-by-step recurrence

    S_t = (alpha_t^T beta_t) (.) S_{t-1} + k_t^T v_t,      o_t = q_t S_t

is the reference every other form is validated against.  The per-step gate
matrix is formed directly in log space, exp(log_alpha[i] + log_beta[j]),
one exp per element: the same rule used for every decay factor in the
library (exactly one rounding between log accumulator and factor).

Gradients come in two independent flavours: an exact reverse-mode sweep
through the stored states, and central finite differences on the scalar
loss <O, dO>.  The finite-difference oracle is the arbiter for every
analytic backward pass in the package.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .cost import Meter
from .gates import GateSeq
from .tensor import SeqTensor, State, mm

__all__ = [
    "GlaInstance",
    "ForwardTrace",
    "GradBundle",
    "forward_recurrent",
    "backward_recurrent_exact",
    "backward_recurrent_fd",
    "recurrent_forward_cost",
]


def thread_count() -> int:
    """Worker cap from GLA_THREADS; 0 or unset means auto (serial here:
    desk-scale problems are interpreter-bound, threads do not pay off)."""
    try:
        n = int(os.environ.get("GLA_THREADS", "0"))
    except ValueError:
        n = 0
    return n if n >= 1 else 1


class GlaInstance:
    """One problem instance: Q, K (L x dk), V (L x dv) plus log-gates."""

    __slots__ = ("Q", "K", "V", "gates")

    def __init__(self, Q: SeqTensor, K: SeqTensor, V: SeqTensor, gates: GateSeq):
        if not (Q.rows == K.rows == V.rows == gates.L):
            raise ValueError("row counts disagree across Q, K, V, gates")
        if Q.cols != gates.dk or K.cols != gates.dk:
            raise ValueError("key dims disagree with gates")
        if V.cols != gates.dv:
            raise ValueError("value dim disagrees with gates")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "K", K)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "gates", gates)

    def __setattr__(self, name, value):
        raise AttributeError("GlaInstance is immutable")

    @property
    def L(self) -> int:
        return self.gates.L

    @property
    def dk(self) -> int:
        return self.gates.dk

    @property
    def dv(self) -> int:
        return self.gates.dv


class ForwardTrace:
    """Forward output O plus, optionally, every state S_1..S_L."""

    __slots__ = ("O", "states")

    def __init__(self, O: SeqTensor, states):
        object.__setattr__(self, "O", O)
        object.__setattr__(self, "states", states)

    def __setattr__(self, name, value):
        raise AttributeError("ForwardTrace is immutable")


class GradBundle:
    """All backward outputs: dQ, dK (L x dk), dV (L x dv), dlog_alpha, dlog_beta."""

    __slots__ = ("dQ", "dK", "dV", "dlog_alpha", "dlog_beta")

    def __init__(self, dQ, dK, dV, dlog_alpha, dlog_beta):
        object.__setattr__(self, "dQ", SeqTensor(dQ))
        object.__setattr__(self, "dK", SeqTensor(dK))
        object.__setattr__(self, "dV", SeqTensor(dV))
        object.__setattr__(self, "dlog_alpha", SeqTensor(dlog_alpha))
        object.__setattr__(self, "dlog_beta", SeqTensor(dlog_beta))

    def __setattr__(self, name, value):
        raise AttributeError("GradBundle is immutable")


def _step_gate(la_t: np.ndarray, lb_t: np.ndarray, meter: Meter | None) -> np.ndarray:
    """G_t[i, j] = exp(log_alpha_t[i] + log_beta_t[j])."""
    G = np.exp(la_t[:, None] + lb_t[None, :])
    if meter:
        meter.add_flops(2 * la_t.size * lb_t.size)  # one add + one exp per element
    return G


def _forward_raw(Q, K, V, la, lb, keep_states: bool = False, meter: Meter | None = None):
    """The recurrence on raw ndarrays; shared by the public forward and the FD oracle."""
    L, dk = Q.shape
    dv = V.shape[1]
    S = np.zeros((dk, dv))
    O = np.empty((L, dv))
    states = [] if keep_states else None
    for t in range(L):
        G = _step_gate(la[t], lb[t], meter)
        S = G * S + np.multiply.outer(K[t], V[t])
        O[t] = mm(Q[t][None, :], S)[0]
        if meter:
            # gate the state, rank-1 update, sum; then the q S_t matvec
            meter.add_flops(3 * dk * dv + dk * dv + (dk - 1) * dv)
        if keep_states:
            states.append(S.copy())
    return O, states


def forward_recurrent(inst: GlaInstance, keep_states: bool = False,
                      meter: Meter | None = None) -> ForwardTrace:
    """Run the recurrence from S_0 = 0; optionally record every S_t."""
    O, states = _forward_raw(inst.Q.data, inst.K.data, inst.V.data,
                             inst.gates.log_alpha, inst.gates.log_beta,
                             keep_states=keep_states, meter=meter)
    wrapped = [State(s) for s in states] if states is not None else None
    return ForwardTrace(SeqTensor(O), wrapped)


def recurrent_forward_cost(L: int, dk: int, dv: int) -> int:
    """Closed-form flop count of forward_recurrent (validated against a metered run)."""
    per_step = 2 * dk * dv + 3 * dk * dv + dk * dv + (dk - 1) * dv
    return L * per_step


def backward_recurrent_exact(inst: GlaInstance, dO: SeqTensor) -> GradBundle:
    """Reverse-mode sweep through the recurrence with all states materialized.

    Loss convention: scalar loss <O, dO> with the caller's dO.  Gate
    gradients are taken directly in log-gate coordinates:
    dlog_alpha_t[i] = sum_j G_t[i,j] * S_{t-1}[i,j] * dS_t[i,j].
    """
    if dO.shape != (inst.L, inst.dv):
        raise ValueError(f"dO must be {inst.L}x{inst.dv}, got {dO.shape}")
    Q, K, V = inst.Q.data, inst.K.data, inst.V.data
    la, lb = inst.gates.log_alpha, inst.gates.log_beta
    dOa = dO.data
    L, dk, dv = inst.L, inst.dk, inst.dv

    trace = forward_recurrent(inst, keep_states=True)
    states = trace.states

    dQ = np.zeros((L, dk))
    dK = np.zeros((L, dk))
    dV = np.zeros((L, dv))
    dla = np.zeros((L, dk))
    dlb = np.zeros((L, dv))

    dS = np.zeros((dk, dv))
    for t in range(L - 1, -1, -1):
        dS = dS + np.multiply.outer(Q[t], dOa[t])  # o_t = q_t S_t path
        dQ[t] = mm(states[t].data, dOa[t][:, None])[:, 0]
        dK[t] = mm(dS, V[t][:, None])[:, 0]
        dV[t] = mm(K[t][None, :], dS)[0]
        G = _step_gate(la[t], lb[t], None)
        S_prev = states[t - 1].data if t > 0 else np.zeros((dk, dv))
        gate_path = G * S_prev * dS
        dla[t] = gate_path.sum(axis=1)
        dlb[t] = gate_path.sum(axis=0)
        dS = G * dS
    return GradBundle(dQ, dK, dV, dla, dlb)


def _loss_raw(Q, K, V, la, lb, dOa) -> float:
    O, _ = _forward_raw(Q, K, V, la, lb)
    return float(np.sum(O * dOa))


def backward_recurrent_fd(inst: GlaInstance, dO: SeqTensor, eps: float = 1e-5) -> GradBundle:
    """Central finite differences on <O, dO>, one scalar input at a time.

    Log-gate entries are perturbed as-is, so the result is directly
    dlog_alpha / dlog_beta with no chain-rule conversion.  The perturbed
    evaluations bypass domain re-validation (a +eps step at log-gate 0
    briefly leaves (0, 1]; the recurrence itself is smooth there).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if dO.shape != (inst.L, inst.dv):
        raise ValueError(f"dO must be {inst.L}x{inst.dv}, got {dO.shape}")
    base = {
        "q": inst.Q.data, "k": inst.K.data, "v": inst.V.data,
        "la": inst.gates.log_alpha, "lb": inst.gates.log_beta,
    }
    dOa = dO.data
    grads = {name: np.empty_like(a) for name, a in base.items()}
    jobs = [(name, i, j)
            for name, a in base.items()
            for i in range(a.shape[0])
            for j in range(a.shape[1])]

    def run_range(sub):
        local = {name: a.copy() for name, a in base.items()}
        out = []
        for name, i, j in sub:
            a = local[name]
            orig = a[i, j]
            a[i, j] = orig + eps
            lp = _loss_raw(local["q"], local["k"], local["v"], local["la"], local["lb"], dOa)
            a[i, j] = orig - eps
            lm = _loss_raw(local["q"], local["k"], local["v"], local["la"], local["lb"], dOa)
            a[i, j] = orig
            out.append((lp - lm) / (2.0 * eps))
        return out

    workers = min(thread_count(), len(jobs))
    if workers <= 1:
        values = run_range(jobs)
    else:
        shards = [jobs[w::workers] for w in range(workers)]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run_range, shards))
        values = [None] * len(jobs)
        for w, part in enumerate(parts):
            for pos, val in zip(range(w, len(jobs), workers), part):
                values[pos] = val
    for (name, i, j), val in zip(jobs, values):
        grads[name][i, j] = val
    return GradBundle(grads["q"], grads["k"], grads["v"], grads["la"], grads["lb"])
