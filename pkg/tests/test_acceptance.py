"""Acceptance gate: one PASS/FAIL line per criterion, printed in the terminal summary."""
import json
import os
import random
import subprocess
import sys
import time
from collections import defaultdict
from pathlib import Path

import numpy as np
import pytest
from scipy import special

from uavharq.downlink import qpsk_hard, qpsk_modulate
from uavharq.fading import draw_process, flat_profile
from uavharq.harq import SUBFRAME_S, make_run_config, run_link
from uavharq.rss import band_by_id, band_stats, bands_of, builtin_band_table, load_samples
from uavharq.sweep import PERFECT, SweepSpec, aggregate, run_sweep
from uavharq.uplink import UlConfig, detection_error_rate

FIXTURES = Path(__file__).parent / "fixtures"
ORDER = [PERFECT, 0.0, 5.0, 10.0, 15.0]


@pytest.fixture(scope="module")
def default_sweep():
    start = time.perf_counter()
    table = run_sweep(SweepSpec())
    elapsed = time.perf_counter() - start
    curves = defaultdict(dict)
    for s in aggregate(table):
        curves[(s.standard, s.delta_db)][s.snr_db] = (s.mean_th_ratio_pct, s.ci95_pct)
    return curves, elapsed


def means(curves, standard, delta):
    c = curves[(standard, delta)]
    return np.array([c[s][0] for s in sorted(c)]), sorted(c)


def test_criterion_1_curve_shape(default_sweep, verdict):
    curves, elapsed = default_sweep
    parts, ok = [], elapsed <= 600
    for standard in ("LTE", "NR"):
        m, _ = means(curves, standard, 0.0)
        mono = bool(np.all(np.diff(m) >= 0))
        ok &= mono and m[-1] >= 99.0
        parts.append(f"{standard} monotone={mono} top={m[-1]:.2f}%")
    assert verdict(1, ok, f"{'; '.join(parts)}; sweep {elapsed:.0f} s (limit 600 s)")


def test_criterion_2_asymmetry_ordering(default_sweep, verdict):
    curves, _ = default_sweep
    violations = []
    drops = {}
    for standard in ("LTE", "NR"):
        for snr in sorted(curves[(standard, 0.0)]):
            for hi, lo in zip(ORDER, ORDER[1:]):
                (ma, ca), (mb, cb) = curves[(standard, hi)][snr], curves[(standard, lo)][snr]
                if ma + ca < mb - cb:
                    violations.append(f"{standard}@{snr}:{hi}<{lo}")
        m0, _ = means(curves, standard, 0.0)
        m15, _ = means(curves, standard, 15.0)
        drops[standard] = float(np.max(m0 - m15))
    big_drop = max(drops.values()) >= 10.0
    detail = (f"ordering violations={violations or 'none'}; max delta0-delta15 drop "
              f"LTE={drops['LTE']:.1f} NR={drops['NR']:.1f} pts (need >= 10)")
    assert verdict(2, not violations and big_drop, detail)


def test_criterion_3_slight_degradation(default_sweep, verdict):
    curves, _ = default_sweep
    worst = {}
    for standard in ("LTE", "NR"):
        worst[standard] = float(np.max(means(curves, standard, 0.0)[0] - means(curves, standard, 5.0)[0]))
    ok = max(worst.values()) <= 10.0
    assert verdict(3, ok, f"max delta0-delta5 LTE={worst['LTE']:.2f} NR={worst['NR']:.2f} pts (limit 10)")


def test_criterion_4_robustness_ordering(verdict):
    lte, nr = UlConfig(fmt="LTE-1a"), UlConfig(fmt="NR-1")
    points = [-25.0, -20.0, -15.0, -10.0, -5.0, 0.0, 5.0, 10.0, 15.0]
    rows, ok = [], True
    for snr in points:
        p_lte = detection_error_rate(lte, snr, 100_000, 41)
        p_nr = detection_error_rate(nr, snr, 100_000, 41)
        ok &= p_nr <= p_lte
        rows.append(f"{snr:g}dB {p_nr:.2e}/{p_lte:.2e}")
    assert verdict(4, ok, "NR/LTE error " + ", ".join(rows))


def _flat_qpsk_ber(ebn0_db, n_bits, seed):
    gains = draw_process(flat_profile(), 0.0, [seed, 0], size=(n_bits // 2,)).gains(0.0)[:, 0]
    rng = np.random.default_rng([seed, 1])
    bits = rng.integers(0, 2, n_bits, dtype=np.uint8)
    n0 = 10 ** (-ebn0_db / 10) / 2
    noise = np.sqrt(n0 / 2) * (rng.standard_normal(n_bits // 2) + 1j * rng.standard_normal(n_bits // 2))
    y = gains * qpsk_modulate(bits) + noise
    return float(np.mean(qpsk_hard(y * np.conj(gains)) != bits))


def test_criterion_5_channel_fidelity(verdict):
    proc = draw_process(flat_profile(), 5.0, 2025, size=(100_000,))
    g0 = proc.gains(0.0)[:, 0]
    worst_rho = 0.0
    for lag in np.arange(0.01, 0.5001, 0.01):
        rho = np.mean(g0 * np.conj(proc.gains(lag)[:, 0])).real / np.mean(np.abs(g0) ** 2)
        worst_rho = max(worst_rho, abs(rho - special.j0(2 * np.pi * 5.0 * lag)))
    worst_ber = 0.0
    for ebn0 in (0.0, 5.0, 10.0):
        g = 10 ** (ebn0 / 10)
        ref = 0.5 * (1 - np.sqrt(g / (1 + g)))
        worst_ber = max(worst_ber, abs(_flat_qpsk_ber(ebn0, 1_000_000, 12) / ref - 1))
    ok = worst_rho <= 0.05 and worst_ber <= 0.05
    assert verdict(5, ok, f"max |rho - J0| = {worst_rho:.3f} (limit 0.05); "
                          f"max BER rel err = {worst_ber:.3f} (limit 0.05)")


def test_criterion_6_accounting_oracle(verdict):
    rnd = random.Random(6)
    mismatches = 0
    for k in range(100):
        perfect = rnd.random() < 0.2
        cfg = make_run_config(rnd.choice(["LTE", "NR"]), rnd.choice([-5.0, 2.5, 5.0, 7.5, 15.0]),
                              rnd.choice([0.0, 5.0, 15.0, 30.0]), perfect, rnd.randint(1, 20), k)
        res = run_link(cfg)
        d = 0
        for sf, fb in res.per_subframe:
            lost = fb.sent_bit != fb.detected_bit
            assert fb.sent_bit == int(sf.crc_ok)
            if sf.crc_ok and not lost:
                d += sf.tb_bits
        th = d / (cfg.n_sf * SUBFRAME_S)
        ratio = th / (res.tb_bits / SUBFRAME_S) * 100.0
        mismatches += (d, th, ratio) != (res.d_bits, res.th_bps, res.th_ratio)
    assert verdict(6, mismatches == 0, f"{mismatches} of 100 random runs disagree with recomputation")


def test_criterion_7_coin_flip_limit(verdict):
    ratios = {s: run_link(make_run_config(s, 60.0, 80.0, n_sf=500, seed=7)).th_ratio
              for s in ("LTE", "NR")}
    ok = all(abs(r - 50.0) <= 5.0 for r in ratios.values())
    assert verdict(7, ok, f"TH_ratio LTE={ratios['LTE']:.1f}% NR={ratios['NR']:.1f}% (50 +/- 5)")


BAND_EDGES_MHZ = {"lte12": (698, 716), "lte13": (777, 787), "lte14": (788, 798),
                  "lte41": (2496, 2690), "n5": (824, 849), "n71": (663, 698), "n77": (3700, 3980),
                  "wifi1": (2412, 2432), "wifi6": (2437, 2457), "wifi11": (2462, 2482)}
PUBLIC_GAPS = {"lte13": 9.22, "lte14": 5.95, "n77": 28.25, "wifi1": 16.66}


def test_criterion_8_rss_statistics(verdict):
    edges_ok = {b.id: (b.low / 1e6, b.high / 1e6) for b in builtin_band_table()} == BAND_EDGES_MHZ
    for bid, (lo, hi) in BAND_EDGES_MHZ.items():
        edges_ok &= bid in bands_of(lo * 1e6) and bid not in bands_of(hi * 1e6)
    samples = load_samples(FIXTURES / "synthetic_rss.csv")
    injected = json.loads((FIXTURES / "synthetic_rss_gaps.json").read_text())
    fixture_err = max(abs(band_stats(samples, band_by_id(b)).gap_db - g) for b, g in injected.items())
    ok = edges_ok and fixture_err <= 0.01
    detail = f"band edges match={edges_ok}; synthetic max gap error {fixture_err:.2e} dB (limit 0.01)"
    dataset = os.environ.get("UAVHARQ_RSS_DATASET")
    if dataset:
        public = load_samples(dataset)
        err = max(abs(band_stats(public, band_by_id(b)).gap_db - g) for b, g in PUBLIC_GAPS.items())
        ok &= err <= 2.0
        detail += f"; public dataset max gap error {err:.2f} dB (limit 2)"
    else:
        detail += "; public dataset not present (UAVHARQ_RSS_DATASET unset), not checked"
    assert verdict(8, ok, detail)


def _cli_outputs(workdir):
    workdir.mkdir()
    rss = str(FIXTURES / "synthetic_rss.csv")
    commands = [
        ["simulate", "--n-sf", "8", "--snr", "5", "--delta", "15", "--out", "sim.csv", "--log", "log.csv"],
        ["sweep", "--snr-points", "2.5,5", "--n-seeds", "2", "--n-sf", "4", "--out", "raw.csv",
         "--summary", "sum.csv"],
        ["analyze", "--out", "rss", rss],
        ["report", "sum.csv", "--out", "plot.csv"],
    ]
    for argv in commands:
        subprocess.run([sys.executable, "-m", "uavharq", *argv], cwd=workdir, check=True)
    return {str(p.relative_to(workdir)): p.read_bytes() for p in sorted(workdir.rglob("*")) if p.is_file()}


def test_criterion_9_determinism(tmp_path, verdict):
    a, b = _cli_outputs(tmp_path / "a"), _cli_outputs(tmp_path / "b")
    differing = sorted(k for k in a if a[k] != b.get(k))
    ok = a.keys() == b.keys() and not differing and len(a) == 8
    assert verdict(9, ok, f"{len(a)} output files across 4 subcommands, differing={differing or 'none'}")
