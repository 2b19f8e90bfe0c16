import pytest

from uavharq.downlink import ConfigError, DlConfig
from uavharq.harq import (RunConfig, make_run_config, run_link, simulate_downlink, throughput,
                          throughput_ratio)
from uavharq.uplink import UlConfig


def test_throughput_examples():
    assert throughput(6_704_000, 1000) == 6_704_000
    assert throughput(0, 500) == 0
    assert throughput_ratio(throughput(6704 * 250, 500), throughput(6704, 1)) == pytest.approx(50.0)


def test_throughput_rejects_empty_run():
    with pytest.raises(ValueError):
        throughput(10, 0)


def test_ratio_rejects_zero_max():
    with pytest.raises(ValueError):
        throughput_ratio(1.0, 0.0)


@pytest.mark.parametrize("kwargs", [{"n_sf": 0}, {"standard": "WiMAX"}, {"seed": -1},
                                    {"standard": "NR"}])
def test_run_config_validation(kwargs):
    # last case: NR with the default LTE-1a PUCCH is a mismatch
    with pytest.raises(ConfigError):
        RunConfig(**kwargs)


@pytest.mark.parametrize("standard", ["LTE", "NR"])
def test_clean_link_is_full_rate(standard):
    res = run_link(make_run_config(standard, 60.0, 0.0, n_sf=20, seed=1))
    assert res.th_ratio == 100.0
    assert res.d_bits == 20 * 6704 and res.n_feedback_lost == 0


def test_run_is_deterministic():
    cfg = make_run_config("LTE", 5.0, 10.0, n_sf=30, seed=7)
    a, b = run_link(cfg), run_link(cfg)
    assert a.d_bits == b.d_bits
    assert [(s.crc_ok, f.detected_bit) for s, f in a.per_subframe] == \
           [(s.crc_ok, f.detected_bit) for s, f in b.per_subframe]


def test_shared_downlink_equals_recompute():
    cfg = make_run_config("NR", 5.0, 15.0, n_sf=25, seed=3)
    shared = simulate_downlink(make_run_config("LTE", 5.0, 0.0, n_sf=25, seed=3))
    assert run_link(cfg, shared).d_bits == run_link(cfg).d_bits


def test_downlink_length_checked():
    cfg = make_run_config(n_sf=5)
    with pytest.raises(ValueError):
        run_link(cfg, simulate_downlink(make_run_config(n_sf=4)))


@pytest.mark.parametrize("seed", range(3))
def test_perfect_feedback_dominates_per_seed(seed):
    down = simulate_downlink(make_run_config("LTE", 5.0, n_sf=60, seed=seed))
    perfect = run_link(make_run_config("LTE", 5.0, 0.0, True, n_sf=60, seed=seed), down)
    for delta in (0.0, 15.0):
        lossy = run_link(make_run_config("LTE", 5.0, delta, n_sf=60, seed=seed), down)
        assert perfect.d_bits >= lossy.d_bits
    assert perfect.d_bits == perfect.n_crc_ok * perfect.tb_bits


def test_small_allocation():
    cfg = make_run_config("LTE", 60.0, n_sf=3, dl=DlConfig(n_rb=2))
    res = run_link(cfg)
    assert res.tb_bits == res.d_bits // 3 == 248


def test_ul_config_reaches_detector():
    cfg = RunConfig(n_sf=10, ul=UlConfig(fmt="LTE-1a", delta_db=90.0),
                    dl=DlConfig(snr_db=60.0), seed=2)
    res = run_link(cfg)
    assert res.n_crc_ok == 10 and 0 < res.n_feedback_lost < 10
