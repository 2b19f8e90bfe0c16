"""Uplink HARQ-indicator feedback over a one-bit, sequence-spread PUCCH.

The UAV sees the uplink at ``ul_sinr(dl_snr, delta)``.  One ACK/NACK bit BPSK
modulates a length-12 constant-amplitude base sequence on the data symbols of
one resource block; reference symbols carry the bare sequence.  The receiver
estimates the channel per subcarrier from the reference symbols, despreads
and coherently combines the data symbols and takes the sign.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fading import PowerDelayProfile, Stream, draw_process, frequency_response, make_eva_profile

SEQ_LEN = 12
N_SYMBOLS = 14
SUBCARRIER_SPACING_HZ = 15e3
ACK, NACK = 1, 0

# reference (DMRS) symbol indices within the 14-symbol subframe/slot
REFERENCE_SYMBOLS = {
    "LTE-1a": (2, 3, 4, 9, 10, 11),
    "NR-1": (0, 2, 4, 6, 8, 10, 12),
}
FORMAT_FOR_STANDARD = {"LTE": "LTE-1a", "NR": "NR-1"}
# NR format 1 may span several PRBs; two gives it more combined data REs than LTE-1a
DEFAULT_PUCCH_RB = {"LTE-1a": 1, "NR-1": 2}


def base_sequence(root: int = 1, length: int = SEQ_LEN) -> np.ndarray:
    n = np.arange(length)
    return np.exp(-1j * np.pi * root * n * n / length)


BASE_SEQUENCE = base_sequence()


@dataclass(frozen=True)
class UlConfig:
    delta_db: float = 0.0
    fmt: str = "LTE-1a"
    n_rb_ul: int = 6
    pucch_rb: int | None = None  # None: per-format default
    n_symbols: int = N_SYMBOLS
    perfect_feedback: bool = False
    genie_estimate: bool = False
    doppler_hz: float = 5.0

    def __post_init__(self):
        if self.fmt not in REFERENCE_SYMBOLS:
            raise ValueError(f"unknown PUCCH format {self.fmt!r}")
        if self.pucch_rb is None:
            object.__setattr__(self, "pucch_rb", DEFAULT_PUCCH_RB[self.fmt])
        if self.n_symbols != N_SYMBOLS:
            raise ValueError("only 14-symbol PUCCH is modelled")
        if not np.isfinite(self.delta_db) or self.delta_db < 0:
            raise ValueError(f"delta_db must be finite and >= 0, got {self.delta_db}")
        if not 1 <= self.pucch_rb <= self.n_rb_ul:
            raise ValueError("pucch_rb must fit inside the uplink bandwidth")

    @property
    def ref_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_symbols, dtype=bool)
        mask[list(REFERENCE_SYMBOLS[self.fmt])] = True
        return mask

    @property
    def n_data_res(self) -> int:
        return int((~self.ref_mask).sum()) * SEQ_LEN * self.pucch_rb


@dataclass(frozen=True)
class PucchBlock:
    symbols: np.ndarray  # (n_symbols, 12 * pucch_rb)
    bit: int


@dataclass(frozen=True)
class FeedbackOutcome:
    sent_bit: int
    detected_bit: int

    @property
    def lost(self) -> bool:
        return self.sent_bit != self.detected_bit


def ul_sinr(dl_snr_db: float, delta_db: float) -> float:
    """Uplink SINR (dB) under an asymmetry bias of ``delta_db``."""
    return dl_snr_db - delta_db


def _sequence(cfg: UlConfig) -> np.ndarray:
    return np.tile(BASE_SEQUENCE, cfg.pucch_rb)


def pucch_encode(bit: int, cfg: UlConfig) -> PucchBlock:
    if bit not in (0, 1):
        raise ValueError(f"HARQ bit must be 0 or 1, got {bit}")
    seq = _sequence(cfg)
    point = 1.0 if bit == ACK else -1.0
    scale = np.where(cfg.ref_mask, 1.0, point)
    return PucchBlock(scale[:, None] * seq[None, :], int(bit))


def detect_statistic(rx: np.ndarray, cfg: UlConfig, h_genie: np.ndarray | None = None) -> np.ndarray:
    """Coherent combining statistic; positive means ACK.

    ``rx`` has shape ``batch + (n_symbols, n_sc)``; ``h_genie`` (``batch + (n_sc,)``)
    replaces the reference-symbol estimate when given.
    """
    despread = rx * np.conj(_sequence(cfg))
    mask = cfg.ref_mask
    if h_genie is None:
        h_est = despread[..., mask, :].mean(axis=-2)
    else:
        h_est = h_genie
    z = despread[..., ~mask, :].sum(axis=-2)
    return np.real(np.sum(np.conj(h_est) * z, axis=-1))


def _uplink_channel(cfg: UlConfig, profile: PowerDelayProfile, t: float,
                    stream: Stream, size: tuple[int, ...] = ()) -> np.ndarray:
    proc = draw_process(profile, cfg.doppler_hz, stream, size)
    n_sc = SEQ_LEN * cfg.pucch_rb
    return frequency_response(proc.gains(t), SUBCARRIER_SPACING_HZ, n_sc, profile.delays_s).values


def _awgn(rng: np.random.Generator, shape, snr_db: float) -> np.ndarray:
    n0 = 10.0 ** (-snr_db / 10.0)
    return np.sqrt(n0 / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def pucch_detect(block: PucchBlock, cfg: UlConfig, ul_snr_db: float, chan_stream: Stream,
                 noise_stream: Stream | None = None, profile: PowerDelayProfile | None = None,
                 t: float = 0.0) -> FeedbackOutcome:
    """Send ``block`` through a fresh Rayleigh channel at ``ul_snr_db`` and detect the bit.

    Noise comes from ``noise_stream`` when given, else from the channel stream's
    generator after the channel draw.
    """
    if cfg.perfect_feedback:
        return FeedbackOutcome(block.bit, block.bit)
    profile = profile or make_eva_profile()
    if noise_stream is None:
        rng = np.random.default_rng(chan_stream)
        h = _uplink_channel(cfg, profile, t, rng)
    else:
        h = _uplink_channel(cfg, profile, t, chan_stream)
        rng = np.random.default_rng(noise_stream)
    rx = h[None, :] * block.symbols + _awgn(rng, block.symbols.shape, ul_snr_db)
    stat = detect_statistic(rx, cfg, h if cfg.genie_estimate else None)
    return FeedbackOutcome(block.bit, ACK if stat >= 0 else NACK)


def detection_error_rate(cfg: UlConfig, ul_snr_db: float, n_trials: int, seed: int,
                         profile: PowerDelayProfile | None = None, batch: int = 20000) -> float:
    """Monte Carlo probability that the sent bit is mis-detected.

    Bits alternate ACK/NACK.  Channel and noise draws depend only on ``seed``
    and the trial index, so two formats run with one seed see the same
    channels (paired comparison).
    """
    profile = profile or make_eva_profile()
    errors = 0
    done = 0
    for k, start in enumerate(range(0, n_trials, batch)):
        n = min(batch, n_trials - start)
        h = _uplink_channel(cfg, profile, 0.0, [seed, k, 0], (n,))
        rng = np.random.default_rng([seed, k, 1])
        bits = (np.arange(start, start + n) % 2).astype(int)
        tx = np.stack([pucch_encode(0, cfg).symbols, pucch_encode(1, cfg).symbols])[bits]
        rx = h[:, None, :] * tx + _awgn(rng, tx.shape, ul_snr_db)
        stat = detect_statistic(rx, cfg, h if cfg.genie_estimate else None)
        errors += int(np.sum((stat >= 0).astype(int) != bits))
        done += n
    return errors / done
