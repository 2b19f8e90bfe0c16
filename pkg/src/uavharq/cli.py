"""``uavharq`` command line: simulate, sweep, analyze, report.

Settings come from built-in defaults, then an optional INI file (``--config``),
then flags.  Every output file starts with ``# ``-prefixed header lines: a
provenance line and the effective configuration as INI text, which
``--config`` accepts back verbatim.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .downlink import ConfigError, DlConfig
from .harq import make_run_config, run_link
from .rss import (DEFAULT_WINDOW_S, altitude_profile, band_by_id, builtin_band_table, extract_band,
                  frequency_profile, gap_stat, load_samples, moving_average)
from .sweep import (DEFAULT_DELTAS, DEFAULT_SNR_POINTS, SweepSpec, aggregate, read_header,
                    read_results, run_sweep, write_results)

FIXED = {"duplex": "FDD", "transmission_mode": "TM1", "profile": "EVA"}

DEFAULTS = {
    "run": {"standard": "LTE", "snr_db": "10.0", "delta_db": "0.0", "perfect_feedback": "false",
            "n_sf": "500", "seed": "0", "doppler_hz": "5.0", **FIXED},
    "dl": {"n_rb": "50", "modulation": "QPSK", "code_rate": "0.5", "overhead_fraction": "0.2"},
    "ul": {"n_rb_ul": "6", "pucch_rb": "auto"},
    "sweep": {"snr_points": ",".join(repr(x) for x in DEFAULT_SNR_POINTS),
              "deltas": ",".join(repr(x) for x in DEFAULT_DELTAS),
              "standards": "LTE,NR", "include_perfect": "true", "n_seeds": "4"},
    "analysis": {"bands": ",".join(b.id for b in builtin_band_table()),
                 "window_s": repr(DEFAULT_WINDOW_S), "smooth": "true",
                 "alt_bin_m": "10.0", "freq_bin_hz": "500000.0"},
}

SECTIONS_FOR = {
    "simulate": ("run", "dl", "ul"),
    "sweep": ("run", "dl", "ul", "sweep"),
    "analyze": ("analysis",),
}


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# ---------------------------------------------------------------- config text

def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    return cp


def load_config(path) -> dict[str, dict[str, str]]:
    """Read an INI file, or the echoed header of any output this tool wrote."""
    path = Path(path)
    if not path.is_file():
        raise CliError("file_not_found", f"config file not found: {path}")
    text = path.read_text()
    lines = text.splitlines()
    if lines and lines[0].startswith("# "):
        header = [ln[2:] for ln in lines if ln.startswith("# ")]
        start = next((i for i, ln in enumerate(header) if ln.startswith("[")), len(header))
        text = "\n".join(header[start:])
    cp = _parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise CliError("bad_config", f"{path}: {exc}".replace("\n", " ")) from exc
    out = {}
    for section in cp.sections():
        if section not in DEFAULTS:
            raise CliError("bad_config", f"{path}: unknown section [{section}]")
        unknown = set(cp[section]) - set(DEFAULTS[section])
        if unknown:
            raise CliError("bad_config", f"{path}: unknown keys {sorted(unknown)} in [{section}]")
        out[section] = dict(cp[section])
    return out


def config_text(cfg: dict[str, dict[str, str]], sections) -> str:
    cp = _parser()
    for s in sections:
        cp[s] = cfg[s]
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue().strip()


def output_header(cfg, sections, seed) -> list[str]:
    text = config_text(cfg, sections)
    digest = hashlib.sha256(text.encode()).hexdigest()[:16]
    return [f"uavharq {__version__} config_sha256={digest} seed={seed}"] + text.splitlines()


def effective_config(args, overrides: dict[str, dict[str, str | None]]):
    cfg = {s: dict(v) for s, v in DEFAULTS.items()}
    if getattr(args, "config", None):
        for s, kv in load_config(args.config).items():
            cfg[s].update(kv)
    for s, kv in overrides.items():
        cfg[s].update({k: v for k, v in kv.items() if v is not None})
    for k, v in FIXED.items():
        if cfg["run"][k] != v:
            raise CliError("bad_config", f"only {k}={v} is supported, got {cfg['run'][k]}")
    return cfg


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise CliError("bad_config", f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    try:
        if ":" in text:
            start, stop, step = (float(x) for x in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            return tuple(float(x) for x in np.arange(start, stop + step / 2, step))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError as exc:
        raise CliError("invalid_grid", f"bad number list {text!r}: {exc}") from exc


def _standards(text: str) -> tuple[str, ...]:
    return tuple(s.strip().upper() for s in text.split(",") if s.strip())


def _flag(value, fmt=str):
    return None if value is None else fmt(value)


def _dl_config(cfg) -> DlConfig:
    d = cfg["dl"]
    return DlConfig(n_rb=int(d["n_rb"]), modulation=d["modulation"], code_rate=float(d["code_rate"]),
                    overhead_fraction=float(d["overhead_fraction"]))


def _pucch_rb(cfg):
    v = cfg["ul"]["pucch_rb"]
    return None if v == "auto" else int(v)


# ---------------------------------------------------------------- commands

def _run_overrides(args):
    return {
        "run": {"standard": _flag(args.standard, str.upper), "snr_db": _flag(args.snr, repr),
                "delta_db": _flag(args.delta, repr), "n_sf": _flag(args.n_sf),
                "seed": _flag(args.seed), "doppler_hz": _flag(args.doppler, repr),
                "perfect_feedback": _flag(args.perfect, lambda b: "true" if b else "false")},
        "dl": {"n_rb": _flag(args.n_rb), "code_rate": _flag(args.code_rate, repr),
               "overhead_fraction": _flag(args.overhead, repr)},
        "ul": {"pucch_rb": _flag(args.pucch_rb)},
    }


def cmd_simulate(args) -> int:
    cfg = effective_config(args, _run_overrides(args))
    r = cfg["run"]
    rc = make_run_config(r["standard"], float(r["snr_db"]), float(r["delta_db"]),
                         _bool(r["perfect_feedback"]), int(r["n_sf"]), int(r["seed"]),
                         _dl_config(cfg), _pucch_rb(cfg), float(r["doppler_hz"]))
    res = run_link(rc)
    header = output_header(cfg, SECTIONS_FOR["simulate"], rc.seed)
    delta = "PERFECT" if rc.ul.perfect_feedback else repr(rc.ul.delta_db)
    row = [rc.standard, repr(rc.dl.snr_db), delta, str(rc.seed), str(res.n_sf), str(res.d_bits),
           repr(res.th_bps), repr(res.th_ratio), str(res.n_crc_ok), str(res.n_feedback_lost)]
    text = "".join(f"# {h}\n" for h in header)
    text += "standard,snr_db,delta_db,seed,n_sf,d_bits,th_bps,th_ratio_pct,n_crc_ok,n_feedback_lost\n"
    text += ",".join(row) + "\n"
    _emit(text, args.out)
    if args.log:
        buf = io.StringIO()
        for h in header:
            buf.write(f"# {h}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["subframe", "crc_ok", "sent_bit", "detected_bit", "lost", "counted_bits"])
        for sf, fb in res.per_subframe:
            counted = sf.tb_bits if sf.crc_ok and not fb.lost else 0
            w.writerow([sf.subframe_index, int(sf.crc_ok), fb.sent_bit, fb.detected_bit,
                        int(fb.lost), counted])
        _emit(buf.getvalue(), args.log)
    return 0


def _sweep_spec(cfg) -> SweepSpec:
    r, s = cfg["run"], cfg["sweep"]
    try:
        return SweepSpec(snr_points=_floats(s["snr_points"]), deltas=_floats(s["deltas"]),
                         standards=_standards(s["standards"]),
                         include_perfect=_bool(s["include_perfect"]), n_seeds=int(s["n_seeds"]),
                         n_sf=int(r["n_sf"]), base_seed=int(r["seed"]), dl=_dl_config(cfg),
                         doppler_hz=float(r["doppler_hz"]))
    except ConfigError as exc:
        raise CliError("invalid_grid", str(exc)) from exc


def cmd_sweep(args) -> int:
    over = _run_overrides(args)
    over["sweep"] = {"snr_points": args.snr_points, "deltas": args.deltas,
                     "standards": _flag(args.standards, str.upper), "n_seeds": _flag(args.n_seeds),
                     "include_perfect": _flag(args.perfect, lambda b: "true" if b else "false")}
    over["run"]["perfect_feedback"] = None
    cfg = effective_config(args, over)
    spec = _sweep_spec(cfg)
    if _pucch_rb(cfg) is not None:
        raise CliError("bad_config", "sweep uses per-format PUCCH sizes; leave pucch_rb = auto")
    table = run_sweep(spec, workers=args.workers)
    header = output_header(cfg, SECTIONS_FOR["sweep"], spec.base_seed)
    _write_table(table, args.out, header, "raw")
    if args.summary:
        _write_table(aggregate(table), args.summary, header, "summary")
    return 0


def cmd_analyze(args) -> int:
    over = {"analysis": {"bands": _flag(args.band, lambda b: ",".join(b)),
                         "window_s": _flag(args.window, repr),
                         "smooth": _flag(args.smooth, lambda b: "true" if b else "false"),
                         "alt_bin_m": _flag(args.alt_bin, repr),
                         "freq_bin_hz": _flag(args.freq_bin, repr)}}
    cfg = effective_config(args, over)
    a = cfg["analysis"]
    try:
        bands = [band_by_id(b.strip()) for b in a["bands"].split(",") if b.strip()]
    except KeyError as exc:
        raise CliError("unknown_band", exc.args[0]) from exc
    try:
        samples = load_samples(args.input)
    except FileNotFoundError as exc:
        raise CliError("file_not_found", str(exc)) from exc
    window, smooth = float(a["window_s"]), _bool(a["smooth"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    header = "".join(f"# {h}\n" for h in output_header(cfg, SECTIONS_FOR["analyze"], 0))

    stats, alt_rows, freq_rows = [], [], []
    for band in bands:
        trace = extract_band(samples, band)
        if len(trace) == 0:
            continue
        smoothed = moving_average(trace, window)
        st = gap_stat(smoothed if smooth else trace)
        stats.append([band.id, repr(st.gap_db), repr(st.mean_db), repr(st.std_db), st.n_samples])
        for centre, mean, n in altitude_profile(trace, float(a["alt_bin_m"])):
            alt_rows.append([band.id, repr(centre), repr(mean), n])
        for centre, mean, std in frequency_profile(samples, band, float(a["freq_bin_hz"])):
            freq_rows.append([band.id, repr(centre), repr(mean), repr(std)])

    _write_csv(out / "band_stats.csv", header, ["band", "gap_db", "mean_dbm", "std_db", "n"], stats)
    _write_csv(out / "altitude_profile.csv", header,
               ["band", "alt_bin_center_m", "mean_dbm", "n"], alt_rows)
    _write_csv(out / "frequency_profile.csv", header,
               ["band", "freq_bin_center_hz", "mean_dbm", "std_db"], freq_rows)
    return 0


def cmd_report(args) -> int:
    rows = []
    headers = []
    for path in args.summaries:
        if not Path(path).is_file():
            raise CliError("file_not_found", f"summary file not found: {path}")
        table = read_results(path)
        if table and not hasattr(table[0], "mean_th_ratio_pct"):
            table = aggregate(table)
        rows.extend(table)
        headers.extend(read_header(path))
    keys = [(r.standard, r.snr_db, r.delta_db) for r in rows]
    if len(set(keys)) != len(keys):
        raise CliError("duplicate_cells", "summaries overlap in (standard, snr_db, delta_db)")
    _write_table(rows, args.out, headers, "plot")
    return 0


# ---------------------------------------------------------------- plumbing

def _emit(text: str, path) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError("unwritable_output", f"cannot write {path}: {exc.strerror}") from exc


def _write_table(rows, path, header, mode) -> None:
    try:
        write_results(rows, path, header, mode=mode)
    except OSError as exc:
        raise CliError("unwritable_output", str(exc)) from exc


def _write_csv(path, header, fields, rows) -> None:
    buf = io.StringIO()
    buf.write(header)
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    _emit(buf.getvalue(), path)


def _add_run_flags(p, sweep=False):
    p.add_argument("--config", help="INI file (or a previous output) with settings")
    if not sweep:
        p.add_argument("--standard", choices=["LTE", "NR", "lte", "nr"])
        p.add_argument("--snr", type=float, help="DL SINR in dB")
        p.add_argument("--delta", type=float, help="UL asymmetry bias in dB")
        p.add_argument("--perfect", action=argparse.BooleanOptionalAction, default=None,
                       help="error-free HARQ feedback")
        p.add_argument("--pucch-rb", type=int)
    p.add_argument("--n-sf", type=int, help="subframes per run")
    p.add_argument("--seed", type=int, help="master seed")
    p.add_argument("--doppler", type=float, help="maximum Doppler in Hz")
    p.add_argument("--n-rb", type=int, help="DL resource blocks")
    p.add_argument("--code-rate", type=float)
    p.add_argument("--overhead", type=float, help="resource-grid overhead fraction")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavharq", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"uavharq {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="one closed-loop run")
    _add_run_flags(p)
    p.add_argument("--out", help="result CSV (default stdout)")
    p.add_argument("--log", help="per-subframe event CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="SNR x delta x standard x seed grid")
    _add_run_flags(p, sweep=True)
    p.add_argument("--snr-points", help="comma list or start:stop:step in dB")
    p.add_argument("--deltas", help="comma list of UL biases in dB")
    p.add_argument("--standards", help="comma list of LTE,NR")
    p.add_argument("--perfect", action=argparse.BooleanOptionalAction, default=None,
                   help="include the perfect-feedback baseline")
    p.add_argument("--n-seeds", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="raw result CSV")
    p.add_argument("--summary", help="per-cell mean/CI CSV")
    p.set_defaults(func=cmd_sweep, pucch_rb=None, standard=None, snr=None, delta=None)

    p = sub.add_parser("analyze", help="RSS band statistics from a sweep log")
    p.add_argument("--config")
    p.add_argument("--band", action="append", help="band id, repeatable (default: all)")
    p.add_argument("--window", type=float, help="moving-average window in s")
    p.add_argument("--smooth", action=argparse.BooleanOptionalAction, default=None,
                   help="gap statistics on the smoothed trace")
    p.add_argument("--alt-bin", type=float, help="altitude bin in m")
    p.add_argument("--freq-bin", type=float, help="frequency bin in Hz")
    p.add_argument("--out", default=".", help="output directory")
    p.add_argument("input", help="CSV with t_s,freq_hz,rss_dbm,lat,lon,alt_m")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("report", help="merge summaries into plot-data CSV")
    p.add_argument("summaries", nargs="+")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        err = exc
    except (ConfigError, ValueError) as exc:
        err = CliError("bad_config", str(exc))
    except OSError as exc:
        err = CliError("io_error", str(exc))
    msg = str(err).replace("\n", " ")
    print(f"uavharq: error: code={err.code} message={msg}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
