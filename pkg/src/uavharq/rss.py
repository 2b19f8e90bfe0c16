"""Spectrum-sweep RSS analysis of interference measured at altitude.

Input is a pre-binned sweep log with columns ``t_s,freq_hz,rss_dbm,lat,lon,alt_m``.
Every average is taken over linear power (mW) and reported back in dBm.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pandas as pd

INPUT_COLUMNS = ["t_s", "freq_hz", "rss_dbm", "lat", "lon", "alt_m"]
DEFAULT_WINDOW_S = 150.0

MHZ = 1e6


@dataclass(frozen=True)
class BandDefinition:
    standard: str
    id: str
    low: float
    high: float
    duplex: str

    def __post_init__(self):
        if not self.low < self.high:
            raise ValueError(f"band {self.id}: low must be below high")

    def contains(self, freq):
        return (freq >= self.low) & (freq < self.high)


@dataclass(frozen=True)
class Trace:
    t: np.ndarray
    rss: np.ndarray
    alt: np.ndarray

    def __len__(self):
        return self.t.size


@dataclass(frozen=True)
class TraceStats:
    gap_db: float
    mean_db: float
    std_db: float
    n_samples: int


_TABLE = [
    ("LTE", "lte12", 698, 716, "FDD"),
    ("LTE", "lte13", 777, 787, "FDD"),
    ("LTE", "lte14", 788, 798, "FDD"),
    ("LTE", "lte41", 2496, 2690, "TDD"),
    ("5G", "n5", 824, 849, "FDD"),
    ("5G", "n71", 663, 698, "FDD"),
    ("5G", "n77", 3700, 3980, "TDD"),
    ("WiFi", "wifi1", 2412, 2432, "TDD"),
    ("WiFi", "wifi6", 2437, 2457, "TDD"),
    ("WiFi", "wifi11", 2462, 2482, "TDD"),
]


def builtin_band_table() -> list[BandDefinition]:
    """Uplink bands (UL range, half-open) analysed in the measurement campaign."""
    return [BandDefinition(std, bid, lo * MHZ, hi * MHZ, dup) for std, bid, lo, hi, dup in _TABLE]


def band_by_id(band_id: str) -> BandDefinition:
    for band in builtin_band_table():
        if band.id == band_id.lower():
            return band
    known = ", ".join(b.id for b in builtin_band_table())
    raise KeyError(f"unknown band {band_id!r} (known: {known})")


def bands_of(freq: float) -> list[str]:
    if freq <= 0:
        raise ValueError("freq must be positive")
    return [b.id for b in builtin_band_table() if b.contains(freq)]


def dbm_to_mw(dbm):
    return 10.0 ** (np.asarray(dbm, dtype=float) / 10.0)


def mw_to_dbm(mw):
    return 10.0 * np.log10(mw)


def load_samples(path) -> pd.DataFrame:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such measurement file: {path}")
    df = pd.read_csv(path, comment="#")
    missing = [c for c in INPUT_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    df = df[INPUT_COLUMNS].astype(float)
    if (df.t_s < 0).any() or (df.freq_hz <= 0).any():
        raise ValueError(f"{path}: negative time or non-positive frequency")
    return df


def extract_band(samples: pd.DataFrame, band: BandDefinition) -> Trace:
    """One point per sweep instant: linear mean over the band's bins, mean altitude."""
    sel = samples[band.contains(samples.freq_hz.to_numpy())]
    if sel.empty:
        return Trace(np.empty(0), np.empty(0), np.empty(0))
    g = sel.assign(mw=dbm_to_mw(sel.rss_dbm)).groupby("t_s", sort=True)
    agg = g.agg(mw=("mw", "mean"), alt=("alt_m", "mean"))
    return Trace(agg.index.to_numpy(dtype=float), mw_to_dbm(agg.mw.to_numpy()), agg.alt.to_numpy())


def moving_average(trace: Trace, window_s: float = DEFAULT_WINDOW_S) -> Trace:
    """Centered moving average over [t - w/2, t + w/2]; the window is truncated at the edges."""
    if window_s < 0:
        raise ValueError("window_s must be non-negative")
    if len(trace) == 0:
        return trace
    order = np.argsort(trace.t, kind="stable")
    t, mw = trace.t[order], dbm_to_mw(trace.rss[order])
    lo = np.searchsorted(t, t - window_s / 2, side="left")
    hi = np.searchsorted(t, t + window_s / 2, side="right")
    csum = np.concatenate([[0.0], np.cumsum(mw)])
    mean = (csum[hi] - csum[lo]) / (hi - lo)
    return Trace(t, mw_to_dbm(mean), trace.alt[order])


def gap_stat(trace: Trace) -> TraceStats:
    if len(trace) == 0:
        raise ValueError("gap_stat needs a non-empty trace")
    rss = np.asarray(trace.rss, dtype=float)
    return TraceStats(gap_db=float(rss.max() - rss.min()),
                      mean_db=float(mw_to_dbm(dbm_to_mw(rss).mean())),
                      std_db=float(rss.std()),
                      n_samples=int(rss.size))


def band_stats(samples: pd.DataFrame, band: BandDefinition, window_s: float = DEFAULT_WINDOW_S,
               smooth: bool = True) -> TraceStats:
    """Gap statistics of one band, on the smoothed trace unless ``smooth`` is off."""
    trace = extract_band(samples, band)
    if smooth:
        trace = moving_average(trace, window_s)
    return gap_stat(trace)


def altitude_profile(trace: Trace, bin_m: float) -> list[tuple[float, float, int]]:
    """(bin centre, mean dBm, count) per altitude bin; bins start at the lowest altitude."""
    if bin_m <= 0:
        raise ValueError("bin_m must be positive")
    if len(trace) == 0:
        return []
    base = trace.alt.min()
    idx = np.floor((trace.alt - base) / bin_m).astype(int)
    mw = dbm_to_mw(trace.rss)
    out = []
    for k in np.unique(idx):
        sel = idx == k
        out.append((float(base + (k + 0.5) * bin_m), float(mw_to_dbm(mw[sel].mean())), int(sel.sum())))
    return out


def frequency_profile(samples: pd.DataFrame, band: BandDefinition,
                      bin_hz: float) -> list[tuple[float, float, float]]:
    """(bin centre, mean dBm, std dB) per frequency bin, statistics taken across sweep instants."""
    if bin_hz <= 0:
        raise ValueError("bin_hz must be positive")
    sel = samples[band.contains(samples.freq_hz.to_numpy())]
    if sel.empty:
        return []
    k = np.floor((sel.freq_hz.to_numpy() - band.low) / bin_hz).astype(int)
    per_instant = (sel.assign(k=k, mw=dbm_to_mw(sel.rss_dbm))
                   .groupby(["k", "t_s"], sort=True).mw.mean())
    out = []
    for kk, series in per_instant.groupby(level="k", sort=True):
        mw = series.to_numpy()
        db = mw_to_dbm(mw)
        std = 0.0 if np.all(mw == mw[0]) else float(db.std())
        out.append((float(band.low + (kk + 0.5) * bin_hz), float(mw_to_dbm(mw.mean())), std))
    return out


def find_plateaus(profile: list[tuple[float, float, float]],
                  tol_db: float = 1.0) -> list[tuple[float, float, float]]:
    """Split a frequency profile into runs of bins within ``tol_db`` of the run's first bin.

    Returns (first centre, last centre, mean level dBm) per run.
    """
    runs: list[list[tuple[float, float, float]]] = []
    for entry in profile:
        if runs and abs(entry[1] - runs[-1][0][1]) <= tol_db:
            runs[-1].append(entry)
        else:
            runs.append([entry])
    return [(r[0][0], r[-1][0], float(mw_to_dbm(dbm_to_mw([e[1] for e in r]).mean()))) for r in runs]
