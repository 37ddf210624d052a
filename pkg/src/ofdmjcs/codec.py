"""Rate-1/2 convolutional code (133, 171 octal, K = 7) with soft Viterbi decoding, plus block interleaving."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

GENERATORS = (0o133, 0o171)
CONSTRAINT_LENGTH = 7
N_STATES = 1 << (CONSTRAINT_LENGTH - 1)
TAIL = CONSTRAINT_LENGTH - 1


@dataclass(frozen=True)
class CodecSpec:
    generators: tuple[int, int] = GENERATORS
    constraint_length: int = CONSTRAINT_LENGTH
    interleaver_seed: int = 0
    traceback: str = "terminated"

    def __post_init__(self):
        if tuple(self.generators) != GENERATORS or self.constraint_length != CONSTRAINT_LENGTH:
            raise ValueError("only the (133, 171) K=7 code is supported")


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


def _trellis():
    """Output pair and next state for every (state, input bit)."""
    outputs = np.zeros((N_STATES, 2, 2), dtype=np.int8)
    next_state = np.zeros((N_STATES, 2), dtype=np.int64)
    for state in range(N_STATES):
        for bit in (0, 1):
            reg = (bit << (CONSTRAINT_LENGTH - 1)) | state
            outputs[state, bit, 0] = _parity(reg & GENERATORS[0])
            outputs[state, bit, 1] = _parity(reg & GENERATORS[1])
            next_state[state, bit] = reg >> 1
    return outputs, next_state


_OUTPUTS, _NEXT = _trellis()


def conv_encode(bits) -> np.ndarray:
    """Encode and flush with six zero tail bits; returns ``2 * (len(bits) + 6)`` bits."""
    bits = np.concatenate([np.asarray(bits, dtype=np.int64).ravel(), np.zeros(TAIL, np.int64)])
    out = np.empty(2 * bits.size, dtype=np.int8)
    for i, g in enumerate(GENERATORS):
        # tap j multiplies the input delayed by j; the MSB of g is the current bit
        taps = [(g >> (CONSTRAINT_LENGTH - 1 - j)) & 1 for j in range(CONSTRAINT_LENGTH)]
        out[i::2] = np.convolve(bits, taps)[: bits.size] % 2
    return out


def _predecessors():
    """For every state: its two predecessor states and the branch output index (2*c0 + c1)."""
    prev = np.zeros((N_STATES, 2), dtype=np.int64)
    out = np.zeros((N_STATES, 2), dtype=np.int64)
    count = np.zeros(N_STATES, dtype=np.int64)
    for s in range(N_STATES):
        for b in (0, 1):
            ns = _NEXT[s, b]
            prev[ns, count[ns]] = s
            out[ns, count[ns]] = 2 * _OUTPUTS[s, b, 0] + _OUTPUTS[s, b, 1]
            count[ns] += 1
    return prev, out


_PREV, _PREV_OUT = _predecessors()


@njit(cache=True)
def _viterbi(llr, prev, prev_out, n_steps):
    n_states = prev.shape[0]
    neg = -1e300
    metric = np.full(n_states, neg)
    metric[0] = 0.0
    new = np.empty(n_states)
    gain = np.empty(4)
    decision = np.zeros((n_steps, n_states), dtype=np.uint8)
    # branch gain sum(+-llr/2): positive LLRs favour output bit 0
    for t in range(n_steps):
        l0 = 0.5 * llr[2 * t]
        l1 = 0.5 * llr[2 * t + 1]
        gain[0] = l0 + l1
        gain[1] = l0 - l1
        gain[2] = -l0 + l1
        gain[3] = -l0 - l1
        for ns in range(n_states):
            c0 = metric[prev[ns, 0]] + gain[prev_out[ns, 0]]
            c1 = metric[prev[ns, 1]] + gain[prev_out[ns, 1]]
            if c1 > c0:
                new[ns] = c1
                decision[t, ns] = 1
            else:
                new[ns] = c0
                decision[t, ns] = 0
        for s in range(n_states):
            metric[s] = new[s]
    bits = np.empty(n_steps, dtype=np.int8)
    state = 0
    msb = n_states >> 1
    for t in range(n_steps - 1, -1, -1):
        # the input bit that led into `state` is its most significant bit
        bits[t] = 1 if state & msb else 0
        state = prev[state, decision[t, state]]
    return bits


def viterbi_decode(llr) -> np.ndarray:
    """Soft-decision ML decoding of a terminated codeword.

    LLR convention: positive means bit 0. Returns the payload bits without the tail.
    """
    llr = np.ascontiguousarray(np.asarray(llr, dtype=np.float64).ravel())
    if llr.size % 2 or llr.size < 2 * TAIL:
        raise ValueError("LLR length must be even and cover at least the tail")
    n_steps = llr.size // 2
    bits = _viterbi(llr, _PREV, _PREV_OUT, n_steps)
    return bits[: n_steps - TAIL].astype(np.int8)


def interleaver_permutation(length: int, seed: int) -> np.ndarray:
    return np.random.default_rng(seed).permutation(length)


def interleave(x, seed: int, block: int | None = None) -> np.ndarray:
    """Apply one seeded permutation to each consecutive block of ``block`` items."""
    x = np.asarray(x)
    block = x.size if block is None else block
    if block <= 0 or x.size % block:
        raise ValueError(f"length {x.size} is not a multiple of the block length {block}")
    perm = interleaver_permutation(block, seed)
    return x.reshape(-1, block)[:, perm].ravel()


def deinterleave(x, seed: int, block: int | None = None) -> np.ndarray:
    x = np.asarray(x)
    block = x.size if block is None else block
    if block <= 0 or x.size % block:
        raise ValueError(f"length {x.size} is not a multiple of the block length {block}")
    perm = interleaver_permutation(block, seed)
    out = np.empty_like(x.reshape(-1, block))
    out[:, perm] = x.reshape(-1, block)
    return out.ravel()
