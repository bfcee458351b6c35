"""Chunkwise-parallel form: inter-chunk recurrence + intra-chunk sums.

The sequence is split into chunks.  A dk x dv state is carried across
chunk boundaries exactly as in the recurrent form (amortizing the
elementwise state gating over whole chunks), while positions inside a
chunk are handled by masked weighted sums whose decay ratios only ever
span the chunk, keeping every exponent bounded regardless of sequence
length.  Output for chunk rows t in [s, e):

    o_t = [ (q_t (.) Bdag_t) S_prev  +  sum_{s<=i<=t} <q_t (.) Bdag_t, k_i / Bdag_i> (v_i / Ddag_i) ] (.) Ddag_t

and the carried state update

    S_new = (gamma_b^T gamma_d) (.) S_prev + (Bpri (.) K)^T (Dpri (.) V).

Two scheduling policies are modeled: ``materialize`` records every chunk
state to slow memory so the backward can read them back (chunk-parallel
backward); ``recompute`` stores nothing and replays the state recurrence
during the backward instead.  Both produce identical numbers; they differ
only in the CostReport.  Every executed array op is metered at its call
site with the exact flop convention from ``cost``; ``predict_cost`` mirrors
the implementation in closed form and must agree integer-for-integer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost import CostReport, Meter, mm_flops
from .gates import ChunkPlan, chunk_relative_decays, cumulative_log_decay
from .recurrent import GlaInstance, GradBundle
from .tensor import SeqTensor, State, mm, suffix_sum_arr

__all__ = [
    "ChunkPolicy",
    "CostReport",
    "forward_chunkwise",
    "backward_chunkwise",
    "predict_cost",
]

_MODES = ("materialize", "recompute")


@dataclass(frozen=True)
class ChunkPolicy:
    mode: str

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"policy mode must be one of {_MODES}, got {self.mode!r}")

    @property
    def materialize(self) -> bool:
        return self.mode == "materialize"


def _decays(inst: GlaInstance, plan: ChunkPlan, meter: Meter):
    """Cumulative log decays + per-chunk factors, metered."""
    if plan.L != inst.L:
        raise ValueError(f"plan covers L={plan.L} but instance has L={inst.L}")
    dk, dv = inst.dk, inst.dv
    cd = cumulative_log_decay(inst.gates)
    meter.add_flops((inst.L - 1) * (dk + dv))  # prefix sums
    decs = chunk_relative_decays(cd, plan)
    for s, e in plan.boundaries:
        c = e - s
        meter.add_flops(2 * c * (dk + dv))  # dagger/prime log diffs
        meter.add_flops(2 * c * (dk + dv))  # dagger/prime exps
        meter.add_flops(dk + dv)            # log_gamma diffs
    return decs


def _gamma_outer(dec, meter: Meter, dk: int, dv: int) -> np.ndarray:
    """Whole-chunk decay matrix, exp of the summed log-gammas (one exp per element)."""
    g = np.exp(dec.log_gamma_b[:, None] + dec.log_gamma_d[None, :])
    meter.add_flops(2 * dk * dv)
    return g


def _state_update(dec, Kc, Vc, S, first: bool, meter: Meter) -> np.ndarray:
    """S_new = (gamma_b^T gamma_d) (.) S + (Bpri (.) K)^T (Dpri (.) V)."""
    c, dk = Kc.shape
    dv = Vc.shape[1]
    KB = dec.b_prime * Kc
    VD = dec.d_prime * Vc
    meter.add_flops(c * dk + c * dv)
    T = mm(KB.T, VD)
    meter.add_flops(mm_flops(dk, c, dv))
    if first:
        return T
    Gm = _gamma_outer(dec, meter, dk, dv)
    meter.add_flops(2 * dk * dv)  # gate the carried state, add the chunk term
    return Gm * S + T


def _run_forward(inst: GlaInstance, plan: ChunkPlan, decs, collect: bool, meter: Meter):
    """Forward sweep given precomputed decays.  Returns (O, states or None)."""
    Q, K, V = inst.Q.data, inst.K.data, inst.V.data
    dk, dv = inst.dk, inst.dv
    O = np.empty((inst.L, dv))
    S = np.zeros((dk, dv))
    states = [] if collect else None
    for i, (s, e) in enumerate(plan.boundaries):
        dec = decs[i]
        c = e - s
        Qt = Q[s:e] * dec.b_dagger
        Kt = K[s:e] / dec.b_dagger
        Vt = V[s:e] / dec.d_dagger
        meter.add_flops(2 * c * dk + c * dv)
        acc = np.empty((c, dv))
        for j in range(c):
            n = j + 1
            w = (Kt[:n] * Qt[j]).sum(axis=1)
            acc[j] = (w[:, None] * Vt[:n]).sum(axis=0)
            meter.add_flops(n * dk + n * (dk - 1))   # weights
            meter.add_flops(n * dv + (n - 1) * dv)   # weighted values
        if i > 0:
            inter = mm(Qt, S)
            meter.add_flops(mm_flops(c, dk, dv))
            acc = inter + acc
            meter.add_flops(c * dv)
        O[s:e] = acc * dec.d_dagger
        meter.add_flops(c * dv)
        S = _state_update(dec, K[s:e], V[s:e], S, i == 0, meter)
        if collect:
            states.append(S.copy())
            meter.state_writes += 1
    return O, states


def forward_chunkwise(inst: GlaInstance, plan: ChunkPlan, policy: ChunkPolicy):
    """Run the chunkwise forward.  Returns (O, chunk states or None, CostReport)."""
    meter = Meter()
    decs = _decays(inst, plan, meter)
    O, states = _run_forward(inst, plan, decs, policy.materialize, meter)
    wrapped = [State(s) for s in states] if states is not None else None
    return SeqTensor(O), wrapped, meter.report()


class _StateProvider:
    """Serves S_{i-1} to the backward's forward-order sweep.

    materialize: reads the states recorded by the forward pass (one slow-
    memory read per served state).  recompute: replays the inter-chunk
    recurrence chunk by chunk, one recompute pass per chunk, storing
    nothing beyond the live running state.
    """

    def __init__(self, inst, plan, decs, states, meter):
        self.inst = inst
        self.plan = plan
        self.decs = decs
        self.states = states
        self.meter = meter
        self.running = np.zeros((inst.dk, inst.dv))

    def prev_state(self, i: int) -> np.ndarray:
        if self.states is not None:
            self.meter.state_reads += 1
            return self.states[i - 1]
        return self.running

    def advance(self, i: int) -> None:
        if self.states is not None:
            return
        s, e = self.plan.boundaries[i]
        self.running = _state_update(self.decs[i], self.inst.K.data[s:e],
                                     self.inst.V.data[s:e], self.running,
                                     i == 0, self.meter)
        self.meter.recompute_passes += 1


def backward_chunkwise(inst: GlaInstance, dO: SeqTensor, plan: ChunkPlan,
                       policy: ChunkPolicy):
    """Gradients of <O, dO> computed chunk by chunk.  Returns (GradBundle, CostReport).

    Three sweeps: (A) the forward, which supplies O for the value-gate
    identity and, under materialize, the stored chunk states; (B) a
    forward-order sweep accumulating the state-to-output gradient pieces,
    with chunk states read back or replayed per the policy; (C) a reverse
    sweep carrying the state cotangent and accumulating everything else.
    Gate gradients are assembled from the identities
    dlogb = q (.) dq - k (.) dk and dlogd = o (.) do - v (.) dv followed by
    suffix sums (query term positive; the finite-difference oracle pins
    the sign).
    """
    if dO.shape != (inst.L, inst.dv):
        raise ValueError(f"dO must be {inst.L}x{inst.dv}, got {dO.shape}")
    Q, K, V = inst.Q.data, inst.K.data, inst.V.data
    dOa = dO.data
    L, dk, dv = inst.L, inst.dk, inst.dv
    N = plan.num_chunks

    meter = Meter()
    decs = _decays(inst, plan, meter)
    O, states = _run_forward(inst, plan, decs, policy.materialize, meter)

    dQ = np.zeros((L, dk))
    dK = np.zeros((L, dk))
    dV = np.zeros((L, dv))

    # Sweep B: pieces needing S_{i-1}, in forward order.
    provider = _StateProvider(inst, plan, decs, states, meter)
    for i, (s, e) in enumerate(plan.boundaries):
        dec = decs[i]
        c = e - s
        if i > 0:
            S_prev = provider.prev_state(i)
            dOt = dOa[s:e] * dec.d_dagger
            meter.add_flops(c * dv)
            dq_inter = mm(dOt, S_prev.T)
            meter.add_flops(mm_flops(c, dv, dk))
            dQ[s:e] += dq_inter * dec.b_dagger
            meter.add_flops(2 * c * dk)
        provider.advance(i)

    # Sweep C: intra-chunk pieces, state-path pieces, cotangent carry.
    dS = np.zeros((dk, dv))
    for i in range(N - 1, -1, -1):
        s, e = plan.boundaries[i]
        dec = decs[i]
        c = e - s
        Qt = Q[s:e] * dec.b_dagger
        Kt = K[s:e] / dec.b_dagger
        Vt = V[s:e] / dec.d_dagger
        meter.add_flops(2 * c * dk + c * dv)
        dOt = dOa[s:e] * dec.d_dagger
        meter.add_flops(c * dv)

        dqt = np.empty((c, dk))
        dkt = np.zeros((c, dk))
        dvt = np.zeros((c, dv))
        for j in range(c):
            n = j + 1
            w = (Kt[:n] * Qt[j]).sum(axis=1)
            g = (Vt[:n] * dOt[j]).sum(axis=1)
            dqt[j] = (g[:, None] * Kt[:n]).sum(axis=0)
            dkt[:n] += g[:, None] * Qt[j]
            dvt[:n] += w[:, None] * dOt[j]
            meter.add_flops(n * dk + n * (dk - 1))   # w
            meter.add_flops(n * dv + n * (dv - 1))   # g
            meter.add_flops(n * dk + (n - 1) * dk)   # dq row
            meter.add_flops(2 * n * dk)              # dkt update
            meter.add_flops(2 * n * dv)              # dvt update
        dQ[s:e] += dqt * dec.b_dagger
        meter.add_flops(2 * c * dk)
        dK[s:e] += dkt / dec.b_dagger
        meter.add_flops(2 * c * dk)
        dV[s:e] += dvt / dec.d_dagger
        meter.add_flops(2 * c * dv)

        if i < N - 1:
            # chunk i's own K/V contribution to S_i, weighted by the carried cotangent
            KB = dec.b_prime * K[s:e]
            VD = dec.d_prime * V[s:e]
            meter.add_flops(c * dk + c * dv)
            dK[s:e] += mm(VD, dS.T) * dec.b_prime
            meter.add_flops(mm_flops(c, dv, dk) + 2 * c * dk)
            dV[s:e] += mm(KB, dS) * dec.d_prime
            meter.add_flops(mm_flops(c, dk, dv) + 2 * c * dv)

        if i > 0:
            dS_out = mm(Qt.T, dOt)
            meter.add_flops(mm_flops(dk, c, dv))
            if i < N - 1:
                Gm = _gamma_outer(dec, meter, dk, dv)
                dS = Gm * dS + dS_out
                meter.add_flops(2 * dk * dv)
            else:
                dS = dS_out

    dlogb = Q * dQ - K * dK
    meter.add_flops(3 * L * dk)
    dlogd = O * dOa - V * dV
    meter.add_flops(3 * L * dv)
    dla = suffix_sum_arr(dlogb)
    dlb = suffix_sum_arr(dlogd)
    meter.add_flops((L - 1) * (dk + dv))
    return GradBundle(dQ, dK, dV, dla, dlb), meter.report()


def predict_cost(L: int, dk: int, dv: int, plan: ChunkPlan, policy: ChunkPolicy,
                 pass_: str = "forward") -> CostReport:
    """Closed-form counters for forward_chunkwise / backward_chunkwise.

    Pure arithmetic over the plan; never executes the kernels.  The
    instrumented runs must reproduce these numbers exactly.
    """
    if pass_ not in ("forward", "backward"):
        raise ValueError(f"pass_ must be 'forward' or 'backward', got {pass_!r}")
    if plan.L != L:
        raise ValueError(f"plan covers L={plan.L}, expected {L}")
    N = plan.num_chunks
    flops = 0
    writes = reads = passes = 0

    # decays
    flops += (L - 1) * (dk + dv)
    for s, e in plan.boundaries:
        c = e - s
        flops += 4 * c * (dk + dv) + (dk + dv)

    def state_update_flops(c: int, first: bool) -> int:
        f = c * dk + c * dv + mm_flops(dk, c, dv)
        if not first:
            f += 4 * dk * dv  # gamma outer (add+exp) + gate + add
        return f

    # forward sweep
    for i, (s, e) in enumerate(plan.boundaries):
        c = e - s
        flops += 2 * c * dk + c * dv  # transforms
        for j in range(c):
            n = j + 1
            flops += n * dk + n * (dk - 1) + n * dv + (n - 1) * dv
        if i > 0:
            flops += mm_flops(c, dk, dv) + c * dv
        flops += c * dv  # output scale
        flops += state_update_flops(c, i == 0)
        if policy.materialize:
            writes += 1

    if pass_ == "forward":
        return CostReport(flops, writes, reads, passes)

    # sweep B
    for i, (s, e) in enumerate(plan.boundaries):
        c = e - s
        if i > 0:
            if policy.materialize:
                reads += 1
            flops += c * dv + mm_flops(c, dv, dk) + 2 * c * dk
        if not policy.materialize:
            flops += state_update_flops(c, i == 0)
            passes += 1

    # sweep C
    for i in range(N - 1, -1, -1):
        s, e = plan.boundaries[i]
        c = e - s
        flops += 2 * c * dk + c * dv  # transforms
        flops += c * dv               # dOt
        for j in range(c):
            n = j + 1
            flops += n * dk + n * (dk - 1)
            flops += n * dv + n * (dv - 1)
            flops += n * dk + (n - 1) * dk
            flops += 2 * n * dk
            flops += 2 * n * dv
        flops += 2 * c * dk + 2 * c * dk + 2 * c * dv
        if i < N - 1:
            flops += c * dk + c * dv
            flops += mm_flops(c, dv, dk) + 2 * c * dk
            flops += mm_flops(c, dk, dv) + 2 * c * dv
        if i > 0:
            flops += mm_flops(dk, c, dv)
            if i < N - 1:
                flops += 2 * dk * dv + 2 * dk * dv

    # gate-gradient assembly
    flops += 3 * L * dk + 3 * L * dv + (L - 1) * (dk + dv)
    return CostReport(flops, writes, reads, passes)
