"""Constellations, channel coding and soft-information plumbing.

Covers Gray-mapped constellations with hard decisions, the punctured
rate-2/3 convolutional code with an exact log-domain forward-backward (SISO)
decoder and a hard-input Viterbi decoder, random interleaving, and the
LLR/probability conversions used by the iterative receiver.
"""

import math
from dataclasses import dataclass

import numpy as np

from ._accel import NUMBA_ENABLED, njit
from .numerics import logsumexp, normalized_exp

NEG_INF = -np.inf


# ---------------------------------------------------------------------------
# Constellations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Constellation:
    """Unit-average-energy alphabet with one bit label per point.

    ``points[i]`` is the symbol whose label is the binary expansion of ``i``
    (MSB first), stored explicitly in ``labels[i]``.
    """

    name: str
    points: np.ndarray  # (A,) complex128
    labels: np.ndarray  # (A, Q) uint8

    @property
    def size(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return self.labels.shape[1]


def _finish(name, points, labels) -> Constellation:
    points = np.asarray(points, dtype=np.complex128)
    labels = np.asarray(labels, dtype=np.uint8)
    points.setflags(write=False)
    labels.setflags(write=False)
    return Constellation(name, points, labels)


def build_bpsk() -> Constellation:
    # bit 0 -> +1 so that the extrinsic LLR reduces to 4*Re(m)/v
    return _finish("bpsk", [1.0 + 0j, -1.0 + 0j], [[0], [1]])


_GRAY2 = {(0, 0): -3.0, (0, 1): -1.0, (1, 1): 1.0, (1, 0): 3.0}


def build_gray_qpsk() -> Constellation:
    points, labels = [], []
    for b1 in (0, 1):
        for b2 in (0, 1):
            i = -1.0 if b1 == 0 else 1.0
            q = -1.0 if b2 == 0 else 1.0
            points.append((i + 1j * q) / math.sqrt(2.0))
            labels.append([b1, b2])
    return _finish("qpsk", points, labels)


def build_gray_qam16() -> Constellation:
    """16-QAM, levels {-3,-1,1,3}/sqrt(10), per-dimension Gray code.

    Bits (b1 b2) select the in-phase level, (b3 b4) the quadrature level,
    with 00 -> -3, 01 -> -1, 11 -> +1, 10 -> +3.
    """

    scale = 1.0 / math.sqrt(10.0)
    points, labels = [], []
    for idx in range(16):
        b = [(idx >> shift) & 1 for shift in (3, 2, 1, 0)]
        i_level = _GRAY2[(b[0], b[1])]
        q_level = _GRAY2[(b[2], b[3])]
        points.append(scale * (i_level + 1j * q_level))
        labels.append(b)
    return _finish("16qam", points, labels)


_BUILDERS = {"bpsk": build_bpsk, "qpsk": build_gray_qpsk, "16qam": build_gray_qam16}


def get_constellation(name: str) -> Constellation:
    try:
        return _BUILDERS[name.lower()]()
    except KeyError:
        raise ValueError(f"unknown modulation {name!r}; choose from {sorted(_BUILDERS)}")


def hard_decision(xhat, c: Constellation):
    """Index of the nearest constellation point (ties go to the lowest index)."""

    xhat = np.asarray(xhat, dtype=np.complex128)
    d2 = np.abs(xhat[..., None] - c.points) ** 2
    idx = np.argmin(d2, axis=-1)
    return int(idx) if idx.ndim == 0 else idx


def map_bits(bits: np.ndarray, c: Constellation) -> np.ndarray:
    """Map a bit stream (length divisible by bits_per_symbol) onto symbols."""

    bits = np.asarray(bits, dtype=np.int64).ravel()
    q = c.bits_per_symbol
    if bits.size % q:
        raise ValueError(f"bit count {bits.size} not divisible by {q}")
    groups = bits.reshape(-1, q)
    idx = groups @ (1 << np.arange(q - 1, -1, -1))
    return c.points[idx]


def symbol_bits(indices, c: Constellation) -> np.ndarray:
    """Bit labels of the given point indices, flattened in symbol order."""

    return c.labels[np.asarray(indices, dtype=np.int64)].reshape(-1).astype(np.int64)


# ---------------------------------------------------------------------------
# Convolutional code
# ---------------------------------------------------------------------------


class ConvCode:
    """Non-recursive binary convolutional code plus a puncturing pattern.

    The mother code has rate 1/2 with octal generators (23, 35) and
    constraint length 5; puncturing [[1, 1], [1, 0]] (rows = generator,
    columns = trellis-step parity) raises the rate to 2/3.  Encoding is
    terminated with constraint_length - 1 zero tail bits.
    """

    def __init__(self, generators=(0o23, 0o35), constraint_length=5,
                 puncture=((1, 1), (1, 0))):
        self.generators = tuple(generators)
        self.constraint_length = constraint_length
        self.puncture = tuple(tuple(int(x) for x in row) for row in puncture)
        self.n_out = len(self.generators)
        self.memory = constraint_length - 1
        self.n_states = 1 << self.memory

        n_s, n_o = self.n_states, self.n_out
        self.next_state = np.zeros((2, n_s), dtype=np.int64)
        self.out_bits = np.zeros((2, n_s, n_o), dtype=np.int64)
        for u in (0, 1):
            for s in range(n_s):
                reg = (u << self.memory) | s
                for g, gen in enumerate(self.generators):
                    self.out_bits[u, s, g] = bin(gen & reg).count("1") & 1
                self.next_state[u, s] = (u << (self.memory - 1)) | (s >> 1)
        # incoming edges: prev_state[s', i] reaches s' with input prev_input[s', i]
        self.prev_state = np.zeros((n_s, 2), dtype=np.int64)
        self.prev_input = np.zeros((n_s, 2), dtype=np.int64)
        fill = np.zeros(n_s, dtype=np.int64)
        for u in (0, 1):
            for s in range(n_s):
                sp = self.next_state[u, s]
                self.prev_state[sp, fill[sp]] = s
                self.prev_input[sp, fill[sp]] = u
                fill[sp] += 1
        assert np.all(fill == 2)

    @property
    def puncture_period(self) -> int:
        return len(self.puncture[0])

    def n_coded_bits(self, n_info: int) -> int:
        steps = n_info + self.memory
        return int(self.keep_mask(steps).sum())

    def keep_mask(self, n_steps: int) -> np.ndarray:
        """Boolean mask over the unpunctured (n_steps * n_out) output stream."""

        mask = np.zeros((n_steps, self.n_out), dtype=bool)
        for t in range(n_steps):
            col = t % self.puncture_period
            for g in range(self.n_out):
                mask[t, g] = bool(self.puncture[g][col])
        return mask.reshape(-1)


def default_code() -> ConvCode:
    return ConvCode()


def conv_encode(info_bits, code: ConvCode, punctured: bool = True) -> np.ndarray:
    """Encode a terminated block; returns the (optionally punctured) bits."""

    info_bits = np.asarray(info_bits, dtype=np.int64).ravel()
    if info_bits.size % code.puncture_period:
        raise ValueError(
            f"info length {info_bits.size} must be a multiple of the puncture "
            f"period {code.puncture_period}")
    steps = np.concatenate([info_bits, np.zeros(code.memory, dtype=np.int64)])
    out = np.zeros((steps.size, code.n_out), dtype=np.int64)
    state = 0
    for t, u in enumerate(steps):
        out[t] = code.out_bits[u, state]
        state = code.next_state[u, state]
    flat = out.reshape(-1)
    if punctured:
        flat = flat[code.keep_mask(steps.size)]
    return flat


def depuncture_llrs(llrs, code: ConvCode, n_info: int) -> np.ndarray:
    """Spread punctured-position LLRs back onto the full trellis (zeros fill)."""

    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    steps = n_info + code.memory
    mask = code.keep_mask(steps)
    if llrs.size != mask.sum():
        raise ValueError(f"expected {int(mask.sum())} LLRs, got {llrs.size}")
    full = np.zeros(mask.size)
    full[mask] = llrs
    return full


# --- forward-backward (SISO) decoding --------------------------------------


def _bcjr_numpy(llr_steps, next_state, prev_state, prev_input, out_bits, n_info):
    n_steps = llr_steps.shape[0]
    n_states = next_state.shape[1]

    # branch metric gamma[t, u, s] = sum_g (1 - 2*out) * L[t, g] / 2
    signs = 1.0 - 2.0 * out_bits  # (2, S, G)
    gamma = 0.5 * np.einsum("tg,usg->tus", llr_steps, signs)

    alpha = np.full((n_steps + 1, n_states), NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(n_steps):
        cand = alpha[t, prev_state] + gamma[t, prev_input, prev_state]
        if t >= n_info:
            # tail steps admit only input 0
            cand = np.where(prev_input == 0, cand, NEG_INF)
        alpha[t + 1] = np.logaddexp(cand[:, 0], cand[:, 1])

    beta = np.full((n_steps + 1, n_states), NEG_INF)
    beta[n_steps, 0] = 0.0
    for t in range(n_steps - 1, -1, -1):
        cand0 = gamma[t, 0] + beta[t + 1, next_state[0]]
        if t >= n_info:
            beta[t] = cand0
        else:
            cand1 = gamma[t, 1] + beta[t + 1, next_state[1]]
            beta[t] = np.logaddexp(cand0, cand1)

    # per-edge joint metric, then marginalize onto coded bits and info bits
    post = np.zeros_like(llr_steps)
    info_llr = np.zeros(n_info)
    for t in range(n_steps):
        us = (0,) if t >= n_info else (0, 1)
        vals, outs = [], []
        for u in us:
            v = alpha[t] + gamma[t, u] + beta[t + 1, next_state[u]]
            vals.append(v)
            outs.append(out_bits[u])
        vals = np.concatenate(vals)
        outs = np.concatenate(outs, axis=0)  # (E, G)
        for g in range(llr_steps.shape[1]):
            m0 = outs[:, g] == 0
            p0 = logsumexp(vals[m0]) if np.any(m0) else NEG_INF
            p1 = logsumexp(vals[~m0]) if np.any(~m0) else NEG_INF
            post[t, g] = p0 - p1
        if t < n_info:
            half = vals.size // 2
            info_llr[t] = logsumexp(vals[:half]) - logsumexp(vals[half:])
    return post, info_llr


@njit(cache=True)
def _lae(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + math.log1p(math.exp(b - a))
    return b + math.log1p(math.exp(a - b))


@njit(cache=True)
def _bcjr_kernel(llr_steps, next_state, out_bits, n_info):
    n_steps = llr_steps.shape[0]
    n_out = llr_steps.shape[1]
    n_states = next_state.shape[1]

    gamma = np.empty((n_steps, 2, n_states))
    for t in range(n_steps):
        for u in range(2):
            for s in range(n_states):
                acc = 0.0
                for g in range(n_out):
                    sign = 1.0 - 2.0 * out_bits[u, s, g]
                    acc += 0.5 * sign * llr_steps[t, g]
                gamma[t, u, s] = acc

    alpha = np.full((n_steps + 1, n_states), NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(n_steps):
        n_u = 1 if t >= n_info else 2
        for s in range(n_states):
            a = alpha[t, s]
            if a == NEG_INF:
                continue
            for u in range(n_u):
                sp = next_state[u, s]
                alpha[t + 1, sp] = _lae(alpha[t + 1, sp], a + gamma[t, u, s])

    beta = np.full((n_steps + 1, n_states), NEG_INF)
    beta[n_steps, 0] = 0.0
    for t in range(n_steps - 1, -1, -1):
        n_u = 1 if t >= n_info else 2
        for s in range(n_states):
            acc = NEG_INF
            for u in range(n_u):
                acc = _lae(acc, gamma[t, u, s] + beta[t + 1, next_state[u, s]])
            beta[t, s] = acc

    post = np.zeros((n_steps, n_out))
    info_llr = np.zeros(n_info)
    for t in range(n_steps):
        n_u = 1 if t >= n_info else 2
        den0 = NEG_INF
        den1 = NEG_INF
        for g in range(n_out):
            p0 = NEG_INF
            p1 = NEG_INF
            for u in range(n_u):
                for s in range(n_states):
                    v = alpha[t, s] + gamma[t, u, s] + beta[t + 1, next_state[u, s]]
                    if out_bits[u, s, g] == 0:
                        p0 = _lae(p0, v)
                    else:
                        p1 = _lae(p1, v)
                    if g == 0:
                        if u == 0:
                            den0 = _lae(den0, v)
                        else:
                            den1 = _lae(den1, v)
            post[t, g] = p0 - p1
        if t < n_info:
            info_llr[t] = den0 - den1
    return post, info_llr


def bcjr_decode(channel_llrs, apriori_llrs, code: ConvCode):
    """Exact a-posteriori decoding of one terminated block.

    Inputs are LLRs (log p(bit=0)/p(bit=1)) on the de-punctured coded stream;
    punctured positions carry 0.  Returns (extrinsic coded-bit LLRs,
    info-bit posterior LLRs), with extrinsic = posterior - channel - apriori.
    """

    channel_llrs = np.asarray(channel_llrs, dtype=np.float64).ravel()
    if apriori_llrs is None:
        apriori_llrs = np.zeros_like(channel_llrs)
    apriori_llrs = np.asarray(apriori_llrs, dtype=np.float64).ravel()
    if channel_llrs.size != apriori_llrs.size:
        raise ValueError("channel and apriori LLR lengths differ")
    if channel_llrs.size % code.n_out:
        raise ValueError("LLR stream does not fill an integer number of steps")
    n_steps = channel_llrs.size // code.n_out
    n_info = n_steps - code.memory
    if n_info < 1:
        raise ValueError(f"block of {n_steps} steps too short for termination")

    total = (channel_llrs + apriori_llrs).reshape(n_steps, code.n_out)
    if NUMBA_ENABLED:
        post, info_llr = _bcjr_kernel(total, code.next_state, code.out_bits, n_info)
    else:
        post, info_llr = _bcjr_numpy(total, code.next_state, code.prev_state,
                                     code.prev_input, code.out_bits, n_info)
    extrinsic = post.reshape(-1) - channel_llrs - apriori_llrs
    return extrinsic, info_llr


def viterbi_decode(llrs, code: ConvCode) -> np.ndarray:
    """Maximum-likelihood sequence decision on the terminated trellis.

    ``llrs`` covers the de-punctured stream (0 at punctured positions); hard
    inputs are passed as +/-1.  Returns the decoded info bits.
    """

    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    n_steps = llrs.size // code.n_out
    n_info = n_steps - code.memory
    steps = llrs.reshape(n_steps, code.n_out)
    signs = 1.0 - 2.0 * code.out_bits  # (2, S, G)

    metric = np.full(code.n_states, NEG_INF)
    metric[0] = 0.0
    choice = np.zeros((n_steps, code.n_states), dtype=np.int8)
    for t in range(n_steps):
        gamma = 0.5 * (signs @ steps[t])  # (2, S)
        cand = metric[code.prev_state] + gamma[code.prev_input, code.prev_state]
        if t >= n_info:
            cand = np.where(code.prev_input == 0, cand, NEG_INF)
        pick = np.argmax(cand, axis=1)
        metric = cand[np.arange(code.n_states), pick]
        choice[t] = pick

    bits = np.zeros(n_steps, dtype=np.int64)
    state = 0
    for t in range(n_steps - 1, -1, -1):
        i = choice[t, state]
        bits[t] = code.prev_input[state, i]
        state = code.prev_state[state, i]
    return bits[:n_info]


# ---------------------------------------------------------------------------
# Interleaving
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Interleaver:
    permutation: np.ndarray
    seed: int

    def __len__(self):
        return len(self.permutation)


def make_interleaver(length: int, seed: int) -> Interleaver:
    perm = np.random.default_rng(seed).permutation(length)
    perm.setflags(write=False)
    return Interleaver(perm, seed)


def interleave(block, il: Interleaver):
    block = np.asarray(block)
    if block.shape[0] != len(il):
        raise ValueError(f"block length {block.shape[0]} != permutation {len(il)}")
    return block[il.permutation]


def deinterleave(block, il: Interleaver):
    block = np.asarray(block)
    if block.shape[0] != len(il):
        raise ValueError(f"block length {block.shape[0]} != permutation {len(il)}")
    out = np.empty_like(block)
    out[il.permutation] = block
    return out


# ---------------------------------------------------------------------------
# LLR / probability conversions for the iterative receiver
# ---------------------------------------------------------------------------


def bit0_log_probs(llrs) -> np.ndarray:
    """Stacked (log p(bit=0), log p(bit=1)) for LLRs log(p0/p1); shape (..., 2)."""

    llrs = np.asarray(llrs, dtype=np.float64)
    lp0 = -np.logaddexp(0.0, -llrs)
    lp1 = -np.logaddexp(0.0, llrs)
    return np.stack([lp0, lp1], axis=-1)


def priors_from_llrs(llrs, c: Constellation) -> np.ndarray:
    """Per-symbol point probabilities from coded-bit LLRs.

    ``llrs`` has one entry per coded bit, length = n_symbols * bits_per_symbol.
    Row s of the result is p(x_s = point_a) proportional to the product of its
    label's per-bit probabilities.
    """

    q = c.bits_per_symbol
    llrs = np.asarray(llrs, dtype=np.float64).ravel()
    if llrs.size % q:
        raise ValueError(f"LLR count {llrs.size} not divisible by {q}")
    lp = bit0_log_probs(llrs.reshape(-1, q))  # (S, Q, 2)
    lab = c.labels.astype(np.int64)  # (A, Q)
    # log prior (S, A) = sum_q lp[s, q, label[a, q]]
    logp = np.zeros((lp.shape[0], c.size))
    for a in range(c.size):
        logp[:, a] = np.take_along_axis(
            lp, lab[a][None, :, None], axis=2).squeeze(2).sum(axis=1)
    return normalized_exp(logp, axis=1)


def extrinsic_bit_llrs(m_e: complex, v_e: float, apriori_bit0_probs,
                       c: Constellation) -> np.ndarray:
    """Per-bit extrinsic LLRs of one symbol from its extrinsic Gaussian.

    Evaluated in the log domain with shift-by-max stabilization; the q-th
    output excludes the q-th a-priori factor.
    """

    out = extrinsic_bit_llrs_block(
        np.asarray([m_e]), np.asarray([v_e], dtype=np.float64),
        np.asarray(apriori_bit0_probs, dtype=np.float64)[None, :], c)
    return out[0]


def extrinsic_bit_llrs_block(means, variances, apriori_bit0_probs,
                             c: Constellation) -> np.ndarray:
    """Vectorized extrinsic_bit_llrs over a block of symbols.

    means (B,), variances (B,), apriori_bit0_probs (B, Q) -> LLRs (B, Q).
    """

    means = np.asarray(means, dtype=np.complex128).ravel()
    variances = np.asarray(variances, dtype=np.float64).ravel()
    if np.any(variances <= 0):
        raise ValueError("extrinsic variances must be positive")
    p0 = np.asarray(apriori_bit0_probs, dtype=np.float64)
    q = c.bits_per_symbol
    if p0.shape != (means.size, q):
        raise ValueError(f"apriori shape {p0.shape} != {(means.size, q)}")

    with np.errstate(divide="ignore"):
        lp = np.stack([np.log(p0), np.log1p(-np.clip(p0, 0.0, 1.0))], axis=-1)
    lab = c.labels.astype(np.int64)  # (A, Q)

    d2 = np.abs(means[:, None] - c.points[None, :]) ** 2  # (B, A)
    base = -d2 / variances[:, None]
    # add every bit's a-priori term, then remove the own-bit term per output
    per_bit = np.take_along_axis(
        lp[:, None, :, :].repeat(c.size, axis=1),
        lab[None, :, :, None], axis=3).squeeze(3)  # (B, A, Q)
    total = base + per_bit.sum(axis=2)
    llrs = np.empty((means.size, q))
    for qq in range(q):
        w = total - per_bit[:, :, qq]
        mask0 = lab[:, qq] == 0
        num = logsumexp(np.where(mask0[None, :], w, NEG_INF), axis=1)
        den = logsumexp(np.where(~mask0[None, :], w, NEG_INF), axis=1)
        llrs[:, qq] = num - den
    return llrs
