"""Time-correlated Rayleigh tapped-delay-line channel.

Each tap is a sum of Doppler-shifted complex sinusoids whose arrival angles
are uniform on [0, 2pi) and whose weights are circular complex Gaussian.  With
random weights the marginal of every tap gain is exactly complex Gaussian (so
|g| is exactly Rayleigh) and the ensemble autocorrelation is exactly
J0(2 pi f_D tau), independent of the oscillator count.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

# Anything np.random.default_rng turns into a *fresh* generator.  A Generator
# instance is also accepted but is consumed, so repeated calls differ.
Stream = Union[int, Sequence[int], np.random.SeedSequence, np.random.Generator]

# 3GPP TS 36.101 Annex B.2.1, Extended Vehicular A.
EVA_DELAYS_NS = (0, 30, 150, 310, 370, 710, 1090, 1730, 2510)
EVA_POWERS_DB = (0.0, -1.5, -1.4, -3.6, -0.6, -9.1, -7.0, -12.0, -16.9)

N_OSCILLATORS = 16


@dataclass(frozen=True)
class PowerDelayProfile:
    """Tap delays (s) and relative powers (dB) of a multipath profile."""

    delays: tuple[float, ...]
    powers_db: tuple[float, ...]
    name: str = "custom"

    def __post_init__(self):
        if len(self.delays) != len(self.powers_db) or not self.delays:
            raise ValueError("delays and powers_db must be non-empty and of equal length")
        if self.delays[0] != 0:
            raise ValueError("first tap delay must be 0")
        if any(b <= a for a, b in zip(self.delays, self.delays[1:])):
            raise ValueError("tap delays must be strictly increasing")

    @property
    def n_taps(self) -> int:
        return len(self.delays)

    @property
    def delays_s(self) -> np.ndarray:
        return np.asarray(self.delays, dtype=float)

    @property
    def tap_powers(self) -> np.ndarray:
        """Linear tap powers normalized to unit sum."""
        lin = 10.0 ** (np.asarray(self.powers_db, dtype=float) / 10.0)
        return lin / lin.sum()


def make_eva_profile() -> PowerDelayProfile:
    return PowerDelayProfile(
        delays=tuple(d * 1e-9 for d in EVA_DELAYS_NS),
        powers_db=EVA_POWERS_DB,
        name="EVA",
    )


def flat_profile() -> PowerDelayProfile:
    """Single-tap (frequency-flat) profile."""
    return PowerDelayProfile(delays=(0.0,), powers_db=(0.0,), name="flat")


@dataclass(frozen=True)
class ChannelRealization:
    tap_gains: np.ndarray
    timestamp: float
    doppler_hz: float
    delays: np.ndarray = field(repr=False, default=None)


@dataclass(frozen=True)
class FrequencyResponse:
    values: np.ndarray
    subcarrier_spacing: float
    n_subcarriers: int


@dataclass(frozen=True)
class SosFadingProcess:
    """Drawn sum-of-sinusoids state; ``gains(t)`` evaluates it at any time.

    ``weights`` and ``shifts_hz`` have shape ``batch + (n_taps, n_osc)``.
    """

    weights: np.ndarray
    shifts_hz: np.ndarray
    delays: np.ndarray
    doppler_hz: float

    def gains(self, t: float) -> np.ndarray:
        phasors = np.exp(2j * np.pi * self.shifts_hz * t)
        return np.sum(self.weights * phasors, axis=-1)


def draw_process(profile: PowerDelayProfile, doppler_hz: float, stream: Stream,
                 size: tuple[int, ...] = (), n_osc: int = N_OSCILLATORS) -> SosFadingProcess:
    if doppler_hz < 0:
        raise ValueError(f"doppler_hz must be >= 0, got {doppler_hz}")
    rng = np.random.default_rng(stream)
    shape = tuple(size) + (profile.n_taps, n_osc)
    scale = np.sqrt(profile.tap_powers / n_osc / 2.0)[:, None]
    weights = scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    angles = rng.uniform(0.0, 2.0 * np.pi, shape)
    return SosFadingProcess(weights, doppler_hz * np.cos(angles), profile.delays_s, doppler_hz)


def sample_taps(profile: PowerDelayProfile, doppler_hz: float, t: float,
                stream: Stream) -> ChannelRealization:
    """Tap gains at time ``t`` of the fading process seeded by ``stream``.

    The same seed gives the same process, so calls at different ``t`` with
    equal seeds see one time-correlated channel.
    """
    proc = draw_process(profile, doppler_hz, stream)
    return ChannelRealization(proc.gains(t), float(t), float(doppler_hz), profile.delays_s)


def frequency_response(real: ChannelRealization, spacing: float, n: int,
                       delays: np.ndarray | None = None) -> FrequencyResponse:
    """H(f_n) = sum_k g_k exp(-j 2 pi f_n tau_k) at f_n = n * spacing, n = 0..n-1.

    ``real`` may also be a raw gain array with a leading batch shape, in which
    case ``delays`` is required and the values carry the same batch shape.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if isinstance(real, ChannelRealization):
        gains = np.asarray(real.tap_gains)
        if delays is None:
            delays = real.delays
    else:
        gains = np.asarray(real)
    if delays is None:
        raise ValueError("tap delays unknown")
    freqs = np.arange(n) * spacing
    kernel = np.exp(-2j * np.pi * np.outer(np.asarray(delays, dtype=float), freqs))
    return FrequencyResponse(gains @ kernel, float(spacing), int(n))
