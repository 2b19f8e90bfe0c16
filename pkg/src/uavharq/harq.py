"""Closed-loop PDSCH/PUCCH subframe engine and throughput accounting.

Per subframe the UAV sends a transport block, the ground unit decodes it and
answers ACK (CRC pass) or NACK over the degraded uplink, and the UAV decodes
that answer.  A subframe's bits count only if the block decoded *and* its
ACK arrived intact; there are no retransmissions.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .downlink import (SUBCARRIER_SPACING_HZ, ConfigError, DlConfig, SubframeResult,
                       encode_subframe, make_transport_block, transmit_and_decode,
                       transport_block_size)
from .fading import PowerDelayProfile, frequency_response, make_eva_profile, sample_taps
from .uplink import (ACK, FORMAT_FOR_STANDARD, NACK, FeedbackOutcome, UlConfig, pucch_detect,
                     pucch_encode, ul_sinr)

SUBFRAME_S = 1e-3
STANDARDS = ("LTE", "NR")

# purpose labels of the counter-based seed schedule
_PAYLOAD, _DL_CHANNEL, _DL_NOISE, _UL_CHANNEL, _UL_NOISE = range(5)


@dataclass(frozen=True)
class RunConfig:
    n_sf: int = 500
    dl: DlConfig = field(default_factory=DlConfig)
    ul: UlConfig = field(default_factory=UlConfig)
    seed: int = 0
    standard: str = "LTE"
    doppler_hz: float = 5.0

    def __post_init__(self):
        if self.n_sf < 1:
            raise ConfigError(f"n_sf must be >= 1, got {self.n_sf}")
        if self.standard not in STANDARDS:
            raise ConfigError(f"unknown standard {self.standard!r}")
        if self.ul.fmt != FORMAT_FOR_STANDARD[self.standard]:
            raise ConfigError(f"{self.standard} uses PUCCH {FORMAT_FOR_STANDARD[self.standard]}, "
                              f"got {self.ul.fmt}")
        if self.seed < 0:
            raise ConfigError("seed must be non-negative")


def make_run_config(standard: str = "LTE", snr_db: float = 10.0, delta_db: float = 0.0,
                    perfect_feedback: bool = False, n_sf: int = 500, seed: int = 0,
                    dl: DlConfig | None = None, pucch_rb: int | None = None,
                    doppler_hz: float = 5.0) -> RunConfig:
    """RunConfig with the PUCCH format that belongs to ``standard``."""
    ul = UlConfig(delta_db=delta_db, fmt=FORMAT_FOR_STANDARD[standard], pucch_rb=pucch_rb,
                  perfect_feedback=perfect_feedback, doppler_hz=doppler_hz)
    return RunConfig(n_sf=n_sf, dl=replace(dl or DlConfig(), snr_db=snr_db), ul=ul, seed=seed,
                     standard=standard, doppler_hz=doppler_hz)


@dataclass
class RunResult:
    d_bits: int
    n_sf: int
    tb_bits: int
    th_bps: float
    th_max: float
    th_ratio: float
    n_crc_ok: int
    n_feedback_lost: int
    per_subframe: list[tuple[SubframeResult, FeedbackOutcome]]


def throughput(d_bits: float, n_sf: int) -> float:
    """Bits per second delivered over ``n_sf`` one-millisecond subframes."""
    if n_sf < 1:
        raise ValueError(f"n_sf must be >= 1, got {n_sf}")
    return d_bits / (n_sf * SUBFRAME_S)


def throughput_ratio(th: float, th_max: float) -> float:
    if th_max <= 0:
        raise ValueError(f"th_max must be positive, got {th_max}")
    return th / th_max * 100.0


def subframe_stream(seed: int, index: int, purpose: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seed, spawn_key=(index, purpose))


def simulate_downlink(cfg: RunConfig,
                      profile: PowerDelayProfile | None = None) -> list[SubframeResult]:
    """PDSCH decode outcomes of every subframe; depends on dl, n_sf, seed and Doppler only."""
    profile = profile or make_eva_profile()
    results = []
    for i in range(cfg.n_sf):
        tb = make_transport_block(cfg.dl, np.random.default_rng(subframe_stream(cfg.seed, i, _PAYLOAD)))
        symbols = encode_subframe(tb)
        real = sample_taps(profile, cfg.doppler_hz, i * SUBFRAME_S,
                           subframe_stream(cfg.seed, i, _DL_CHANNEL))
        chan = frequency_response(real, SUBCARRIER_SPACING_HZ, cfg.dl.n_subcarriers)
        results.append(transmit_and_decode(symbols, chan, cfg.dl.snr_db,
                                           subframe_stream(cfg.seed, i, _DL_NOISE), tb, i))
    return results


def feedback(cfg: RunConfig, sf: SubframeResult,
             profile: PowerDelayProfile | None = None) -> FeedbackOutcome:
    sent = ACK if sf.crc_ok else NACK
    if cfg.ul.perfect_feedback:
        return FeedbackOutcome(sent, sent)
    i = sf.subframe_index
    return pucch_detect(pucch_encode(sent, cfg.ul), cfg.ul, ul_sinr(cfg.dl.snr_db, cfg.ul.delta_db),
                        subframe_stream(cfg.seed, i, _UL_CHANNEL),
                        subframe_stream(cfg.seed, i, _UL_NOISE),
                        profile=profile, t=i * SUBFRAME_S)


def run_link(cfg: RunConfig, downlink: list[SubframeResult] | None = None,
             profile: PowerDelayProfile | None = None) -> RunResult:
    """Run ``cfg.n_sf`` subframes of the feedback loop.

    ``downlink`` may carry the output of ``simulate_downlink(cfg)`` so that runs
    differing only in uplink settings share one PDSCH pass; the result is
    identical to recomputing it.
    """
    profile = profile or make_eva_profile()
    if downlink is None:
        downlink = simulate_downlink(cfg, profile)
    elif len(downlink) != cfg.n_sf:
        raise ValueError(f"downlink log has {len(downlink)} subframes, config wants {cfg.n_sf}")

    tb_bits = transport_block_size(cfg.dl)
    d_bits = n_ok = n_lost = 0
    log = []
    for sf in downlink:
        fb = feedback(cfg, sf, profile)
        n_ok += sf.crc_ok
        n_lost += fb.lost
        if sf.crc_ok and not fb.lost:
            d_bits += sf.tb_bits
        log.append((sf, fb))

    th = throughput(d_bits, cfg.n_sf)
    th_max = throughput(tb_bits, 1)
    return RunResult(d_bits=d_bits, n_sf=cfg.n_sf, tb_bits=tb_bits, th_bps=th, th_max=th_max,
                     th_ratio=throughput_ratio(th, th_max), n_crc_ok=n_ok, n_feedback_lost=n_lost,
                     per_subframe=log)
