"""Throughput-ratio sweep over DL SNR x uplink asymmetry x standard x seed."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import groupby
from typing import Iterable, Sequence

import numpy as np

from .downlink import ConfigError, DlConfig
from .harq import STANDARDS, make_run_config, run_link, simulate_downlink

PERFECT = "PERFECT"

RAW_FIELDS = ["standard", "snr_db", "delta_db", "seed", "n_sf", "d_bits", "th_bps",
              "th_ratio_pct", "n_crc_ok", "n_feedback_lost"]
SUMMARY_FIELDS = ["standard", "snr_db", "delta_db", "mean_th_ratio_pct", "ci95_pct", "n_seeds"]
PLOT_FIELDS = ["series", "standard", "delta_db", "snr_db", "mean_th_ratio_pct", "ci95_pct"]

DEFAULT_SNR_POINTS = tuple(float(x) for x in np.arange(-10.0, 15.0 + 1e-9, 2.5))
DEFAULT_DELTAS = (0.0, 5.0, 10.0, 15.0)


@dataclass(frozen=True)
class SweepSpec:
    snr_points: tuple[float, ...] = DEFAULT_SNR_POINTS
    deltas: tuple[float, ...] = DEFAULT_DELTAS
    standards: tuple[str, ...] = STANDARDS
    include_perfect: bool = True
    n_seeds: int = 4
    n_sf: int = 500
    base_seed: int = 0
    dl: DlConfig = field(default_factory=DlConfig)
    doppler_hz: float = 5.0

    def __post_init__(self):
        if not self.snr_points:
            raise ConfigError("snr_points must be non-empty")
        if list(self.snr_points) != sorted(self.snr_points):
            raise ConfigError("snr_points must be sorted ascending")
        if self.n_seeds < 1:
            raise ConfigError("n_seeds must be >= 1")
        bad = set(self.standards) - set(STANDARDS)
        if bad or not self.standards:
            raise ConfigError(f"standards must be a non-empty subset of {STANDARDS}, got {self.standards}")

    @property
    def conditions(self) -> list[float | str]:
        return ([PERFECT] if self.include_perfect else []) + [float(d) for d in self.deltas]

    @property
    def seeds(self) -> list[int]:
        return [self.base_seed + k for k in range(self.n_seeds)]


@dataclass(frozen=True)
class SweepRow:
    standard: str
    snr_db: float
    delta_db: float | str
    seed: int
    n_sf: int
    d_bits: int
    th_bps: float
    th_ratio_pct: float
    n_crc_ok: int
    n_feedback_lost: int


@dataclass(frozen=True)
class SummaryRow:
    standard: str
    snr_db: float
    delta_db: float | str
    mean_th_ratio_pct: float
    ci95_pct: float
    n_seeds: int


def _delta_key(delta):
    # PERFECT sorts ahead of every numeric bias
    return (0, 0.0) if delta == PERFECT else (1, float(delta))


def row_key(row) -> tuple:
    return (row.standard, row.snr_db, _delta_key(row.delta_db), getattr(row, "seed", 0))


def _run_cell(args) -> list[SweepRow]:
    """All uplink conditions of one (SNR, seed) pair; the PDSCH pass is shared."""
    spec, snr, seed = args
    rows = []
    downlink = None
    for standard in spec.standards:
        for cond in spec.conditions:
            perfect = cond == PERFECT
            try:
                cfg = make_run_config(standard, snr, 0.0 if perfect else cond, perfect, spec.n_sf,
                                      seed, spec.dl, doppler_hz=spec.doppler_hz)
                if downlink is None:
                    downlink = simulate_downlink(cfg)
                res = run_link(cfg, downlink)
            except ValueError as exc:
                raise ConfigError(f"cell standard={standard} snr_db={snr} delta_db={cond} "
                                  f"seed={seed}: {exc}") from exc
            rows.append(SweepRow(standard, float(snr), cond, seed, res.n_sf, res.d_bits, res.th_bps,
                                 res.th_ratio, res.n_crc_ok, res.n_feedback_lost))
    return rows


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[SweepRow]:
    cells = [(spec, snr, seed) for snr in spec.snr_points for seed in spec.seeds]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell, cells))
    else:
        chunks = [_run_cell(c) for c in cells]
    return sorted((r for chunk in chunks for r in chunk), key=row_key)


def aggregate(table: Sequence[SweepRow]) -> list[SummaryRow]:
    """Mean TH_ratio per (standard, SNR, delta) with a normal 95% CI half-width."""
    if not table:
        raise ValueError("cannot aggregate an empty table")
    out = []
    rows = sorted(table, key=row_key)
    for (standard, snr, _), group in groupby(rows, key=lambda r: row_key(r)[:3]):
        group = list(group)
        vals = np.array([r.th_ratio_pct for r in group], dtype=float)
        n = vals.size
        half = 1.96 * vals.std(ddof=1) / math.sqrt(n) if n > 1 else 0.0
        out.append(SummaryRow(standard, snr, group[0].delta_db, float(vals.mean()), float(half), n))
    return out


def plot_series(summary: Iterable[SummaryRow]) -> list[dict]:
    """Summary regrouped into one (SNR, mean, CI) series per (standard, delta)."""
    rows = sorted(summary, key=lambda r: (r.standard, _delta_key(r.delta_db), r.snr_db))
    out = []
    for r in rows:
        label = "perfect" if r.delta_db == PERFECT else f"delta={_fmt(r.delta_db)}"
        out.append({"series": f"{r.standard}/{label}", "standard": r.standard,
                    "delta_db": _fmt(r.delta_db), "snr_db": _fmt(r.snr_db),
                    "mean_th_ratio_pct": _fmt(r.mean_th_ratio_pct), "ci95_pct": _fmt(r.ci95_pct)})
    return out


def _fmt(value) -> str:
    # repr of a float round-trips exactly
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _parse_delta(text: str) -> float | str:
    return PERFECT if text == PERFECT else float(text)


def write_results(rows, path, header: Sequence[str] = (), mode: str | None = None) -> None:
    """Write sweep rows, summary rows or plot-data series as CSV.

    ``header`` lines are emitted first as ``# ``-prefixed comments.  ``mode``
    is inferred from the row type unless given ("raw", "summary" or "plot").
    """
    rows = list(rows)
    if mode is None:
        if not rows:
            raise ValueError("mode is required when writing an empty table")
        mode = "summary" if isinstance(rows[0], SummaryRow) else "raw"
    if mode == "plot":
        fields, records = PLOT_FIELDS, plot_series(rows)
    else:
        fields = SUMMARY_FIELDS if mode == "summary" else RAW_FIELDS
        records = [{k: _fmt(getattr(r, k)) for k in fields} for r in rows]
    try:
        with open(path, "w", newline="") as fh:
            for line in header:
                fh.write(f"# {line}\n")
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            writer.writerows(records)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _data_lines(fh):
    return (line for line in fh if not line.startswith("#"))


def read_header(path) -> list[str]:
    with open(path) as fh:
        return [line[2:].rstrip("\n") for line in fh if line.startswith("# ")]


def read_results(path) -> list[SweepRow] | list[SummaryRow]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(_data_lines(fh))
        fields = reader.fieldnames or []
        if fields == RAW_FIELDS:
            return [SweepRow(r["standard"], float(r["snr_db"]), _parse_delta(r["delta_db"]),
                             int(r["seed"]), int(r["n_sf"]), int(r["d_bits"]), float(r["th_bps"]),
                             float(r["th_ratio_pct"]), int(r["n_crc_ok"]), int(r["n_feedback_lost"]))
                    for r in reader]
        if fields == SUMMARY_FIELDS:
            return [SummaryRow(r["standard"], float(r["snr_db"]), _parse_delta(r["delta_db"]),
                               float(r["mean_th_ratio_pct"]), float(r["ci95_pct"]), int(r["n_seeds"]))
                    for r in reader]
    raise ValueError(f"{path}: unrecognised CSV columns {fields}")
