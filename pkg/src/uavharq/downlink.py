"""Bit-true downlink (PDSCH-like) subframe pipeline.

Transport block -> CRC-16 -> rate-1/2 K=7 convolutional code (133/171 octal,
zero-tail) -> bit interleaver -> Gray QPSK -> per-subcarrier fading + AWGN ->
one-tap equalizer -> max-log LLRs -> soft Viterbi -> CRC check.
"""
from __future__ import annotations

import binascii
from dataclasses import dataclass
from functools import lru_cache

import numba
import numpy as np

from .fading import FrequencyResponse

SUBCARRIERS_PER_RB = 12
SYMBOLS_PER_SUBFRAME = 14
SUBCARRIER_SPACING_HZ = 15e3
CRC_BITS = 16
CONSTRAINT_LENGTH = 7
GENERATORS = (0o133, 0o171)
TAIL_BITS = CONSTRAINT_LENGTH - 1
BITS_PER_SYMBOL = {"QPSK": 2}

_SQRT_HALF = np.sqrt(0.5)


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DlConfig:
    n_rb: int = 50
    modulation: str = "QPSK"
    code_rate: float = 0.5
    overhead_fraction: float = 0.2
    snr_db: float = 10.0

    def __post_init__(self):
        if self.n_rb < 1:
            raise ConfigError(f"n_rb must be >= 1, got {self.n_rb}")
        if not 0 < self.code_rate <= 1:
            raise ConfigError(f"code_rate must be in (0, 1], got {self.code_rate}")
        if not 0 <= self.overhead_fraction < 1:
            raise ConfigError(f"overhead_fraction must be in [0, 1), got {self.overhead_fraction}")
        if self.modulation not in BITS_PER_SYMBOL:
            raise ConfigError(f"unsupported modulation {self.modulation!r}")

    @property
    def n_subcarriers(self) -> int:
        return self.n_rb * SUBCARRIERS_PER_RB


@dataclass(frozen=True)
class TransportBlock:
    payload_bits: np.ndarray
    crc_bits: np.ndarray


@dataclass(frozen=True)
class SubframeResult:
    crc_ok: bool
    tb_bits: int
    subframe_index: int


def transport_block_size(cfg: DlConfig) -> int:
    """Payload bits per subframe after overhead, coding and CRC, rounded down to bytes."""
    capacity = (cfg.n_rb * SUBCARRIERS_PER_RB * SYMBOLS_PER_SUBFRAME * (1 - cfg.overhead_fraction)
                * BITS_PER_SYMBOL[cfg.modulation] * cfg.code_rate)
    # guard float noise such as 0.8 * 8400 = 6719.999...
    tbs = int(np.floor(capacity + 1e-9)) - CRC_BITS
    tbs -= tbs % 8
    if tbs <= 0:
        raise ConfigError(f"no room for a transport block (capacity {capacity:.1f} bits)")
    return tbs


def crc16(bits: np.ndarray) -> np.ndarray:
    """CRC-16-CCITT (poly 0x1021, init 0) of a byte-aligned bit vector, MSB first."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size % 8:
        raise ValueError("crc16 expects a multiple of 8 bits")
    value = binascii.crc_hqx(np.packbits(bits).tobytes(), 0)
    return np.array([(value >> (15 - i)) & 1 for i in range(16)], dtype=np.uint8)


def make_transport_block(cfg: DlConfig, rng: np.random.Generator) -> TransportBlock:
    payload = rng.integers(0, 2, transport_block_size(cfg), dtype=np.uint8)
    return TransportBlock(payload, crc16(payload))


def generator_taps(g: int) -> np.ndarray:
    """Impulse response of generator ``g``; bit i of g weights the input delayed by i."""
    return np.array([(g >> i) & 1 for i in range(CONSTRAINT_LENGTH)], dtype=np.uint8)


def conv_encode(bits: np.ndarray) -> np.ndarray:
    """Zero-tail rate-1/2 encoding; output interleaves the two generator streams."""
    u = np.concatenate([np.asarray(bits, dtype=np.int64), np.zeros(TAIL_BITS, dtype=np.int64)])
    streams = [np.convolve(u, generator_taps(g))[: u.size] % 2 for g in GENERATORS]
    return np.stack(streams, axis=1).reshape(-1).astype(np.uint8)


def _trellis_outputs() -> np.ndarray:
    # out[state, b] = 2-bit branch label for register (state << 1 | b)
    out = np.zeros((1 << TAIL_BITS, 2, 2), dtype=np.int8)
    for state in range(1 << TAIL_BITS):
        for b in (0, 1):
            reg = (state << 1) | b
            for j, g in enumerate(GENERATORS):
                out[state, b, j] = bin(reg & g).count("1") & 1
    return out


_OUTPUTS = _trellis_outputs()


@numba.njit(cache=True)
def _viterbi(llr, outputs, n_info):
    n_states = outputs.shape[0]
    n_steps = llr.size // 2
    neg_inf = -1e300
    metric = np.full(n_states, neg_inf)
    metric[0] = 0.0
    new = np.empty(n_states)
    decisions = np.zeros((n_steps, n_states), dtype=np.uint8)
    half = n_states // 2
    for t in range(n_steps):
        l0 = llr[2 * t]
        l1 = llr[2 * t + 1]
        for ns in range(n_states):
            b = ns & 1
            p0 = ns >> 1
            p1 = p0 | half
            # correlation metric: llr > 0 favours coded bit 0
            m0 = metric[p0] + (l0 if outputs[p0, b, 0] == 0 else -l0) \
                + (l1 if outputs[p0, b, 1] == 0 else -l1)
            m1 = metric[p1] + (l0 if outputs[p1, b, 0] == 0 else -l0) \
                + (l1 if outputs[p1, b, 1] == 0 else -l1)
            if m1 > m0:
                new[ns] = m1
                decisions[t, ns] = 1
            else:
                new[ns] = m0
        for s in range(n_states):
            metric[s] = new[s]
    out = np.zeros(n_steps, dtype=np.uint8)
    state = 0
    for t in range(n_steps - 1, -1, -1):
        out[t] = state & 1
        state = (state >> 1) | (half if decisions[t, state] else 0)
    return out[:n_info]


def viterbi_decode(llr: np.ndarray, n_info: int | None = None) -> np.ndarray:
    """Soft-decision Viterbi for the zero-tail code; traceback starts from state 0.

    ``llr`` is log P(bit=0)/P(bit=1) per coded bit in encoder output order.
    """
    llr = np.ascontiguousarray(llr, dtype=np.float64)
    if llr.size % 2:
        raise ValueError("rate-1/2 stream must have an even number of LLRs")
    if n_info is None:
        n_info = llr.size // 2 - TAIL_BITS
    return _viterbi(llr, _OUTPUTS, n_info)


@lru_cache(maxsize=16)
def interleaver(n: int) -> np.ndarray:
    """Row-column bit permutation (write rows of 32, read columns); fixed per length."""
    n_cols = 32
    n_rows = -(-n // n_cols)
    grid = np.full(n_rows * n_cols, -1, dtype=np.int64)
    grid[:n] = np.arange(n)
    perm = grid.reshape(n_rows, n_cols).T.reshape(-1)
    return perm[perm >= 0]


def qpsk_modulate(bits: np.ndarray) -> np.ndarray:
    """Gray QPSK at unit energy: bit pair (b0, b1) -> ((1-2b0) + j(1-2b1)) / sqrt(2)."""
    b = np.asarray(bits, dtype=np.float64).reshape(-1, 2)
    return ((1 - 2 * b[:, 0]) + 1j * (1 - 2 * b[:, 1])) * _SQRT_HALF


def qpsk_llr(eq: np.ndarray, post_snr: np.ndarray) -> np.ndarray:
    """Max-log LLRs of equalized QPSK symbols with per-symbol post-equalization SNR."""
    scale = 2.0 * np.sqrt(2.0) * post_snr
    llr = np.empty(2 * eq.size)
    llr[0::2] = scale * eq.real
    llr[1::2] = scale * eq.imag
    return llr


def qpsk_hard(eq: np.ndarray) -> np.ndarray:
    bits = np.empty(2 * eq.size, dtype=np.uint8)
    bits[0::2] = eq.real < 0
    bits[1::2] = eq.imag < 0
    return bits


def encode_subframe(tb: TransportBlock, interleave: bool = True) -> np.ndarray:
    coded = conv_encode(np.concatenate([tb.payload_bits, tb.crc_bits]))
    if interleave:
        coded = coded[interleaver(coded.size)]
    return qpsk_modulate(coded)


def noise_variance(snr_db: float) -> float:
    return 10.0 ** (-snr_db / 10.0)


def transmit_and_decode(symbols: np.ndarray, chan: FrequencyResponse, snr_db: float,
                        stream, tb: TransportBlock | None = None, subframe_index: int = 0,
                        interleave: bool = True) -> SubframeResult:
    """Pass one subframe through y = H x + n and decode it.

    Symbol i rides subcarrier ``i mod n_subcarriers``; the receiver knows H.
    ``tb`` is only used to report its size; the CRC decides ``crc_ok``.
    """
    rng = np.random.default_rng(stream)
    h = chan.values[np.arange(symbols.size) % chan.n_subcarriers]
    n0 = noise_variance(snr_db)
    noise = np.sqrt(n0 / 2) * (rng.standard_normal(symbols.size) + 1j * rng.standard_normal(symbols.size))
    y = h * symbols + noise

    gain = np.abs(h) ** 2
    safe = np.where(gain > 0, gain, 1.0)
    eq = np.where(gain > 0, y * np.conj(h) / safe, 0.0)
    llr = qpsk_llr(eq, gain / n0)
    if interleave:
        deint = np.empty_like(llr)
        deint[interleaver(llr.size)] = llr
        llr = deint
    n_info = llr.size // 2 - TAIL_BITS
    decoded = viterbi_decode(llr, n_info)
    payload, crc = decoded[:-CRC_BITS], decoded[-CRC_BITS:]
    ok = bool(np.array_equal(crc16(payload), crc))
    tb_bits = tb.payload_bits.size if tb is not None else payload.size
    return SubframeResult(ok, int(tb_bits), int(subframe_index))
