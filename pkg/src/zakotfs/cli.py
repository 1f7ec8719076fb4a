"""Command-line front end: ``filter``, ``sim`` and ``selftest`` subcommands."""

from __future__ import annotations

import argparse
import csv
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .ddcore import make_grid
from .filters import (
    IotaConditioningError,
    PswfSolveError,
    composite_ambiguity,
    esd_report,
    make_filter,
    off_origin_peak,
)
from .sim import ESTIMATED_LADDER, PERFECT_LADDER, SimConfig, SimulationError, run_ber, run_esd

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_SELFTEST = 0, 1, 2, 3

ALL_FAMILIES = ("sinc", "rrc", "gaussian", "gaussian-sinc", "iota-gaussian", "iota-pswf")

PRESETS = {
    "fig2": {"mode": "esd"},
    "fig3": {"csi_mode": "perfect", "snr_db": PERFECT_LADDER},
    "fig4": {"csi_mode": "estimated", "snr_db": ESTIMATED_LADDER},
}
PRESET_BASE = {"M": 17, "N": 19, "nu_p": 30e3, "beta": 0.6, "nu_max": 815.0}

CONFIG_KEYS = {
    "preset": str,
    "M": int,
    "N": int,
    "nu_p": float,
    "Q": int,
    "seed": int,
    "threads": int,
    "families": str,
    "beta": float,
    "alpha": float,
    "omega": float,
    "quadrature_order": int,
    "shift_mode": str,
    "nu_max": float,
    "snr_db": str,
    "frames": int,
    "csi_mode": str,
    "constellation": str,
    "pilot_snr_offset_db": float,
    "noise": str,
    "timing": str,
}

RESULT_HEADER = ["filter", "csi_mode", "snr_db", "frames", "bit_errors", "ber", "ber_ci95", "nmse", "nmse_std", "wall_ms"]


class UsageError(Exception):
    pass


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


def parse_config_text(text: str) -> dict:
    """``key = value`` lines, ``#`` comments; unknown keys are rejected."""
    out = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected 'key = value'")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in CONFIG_KEYS:
            raise UsageError(f"config line {n}: unknown key {key!r}")
        try:
            out[key] = CONFIG_KEYS[key](val)
        except ValueError:
            raise UsageError(f"config line {n}: bad value for {key!r}: {val!r}") from None
    return out


def format_config(cfg: dict) -> str:
    lines = []
    for k in CONFIG_KEYS:
        if k in cfg and cfg[k] is not None:
            v = cfg[k]
            lines.append(f"{k} = {_fmt(v) if isinstance(v, float) else v}")
    return "\n".join(lines) + "\n"


def _parse_ladder(s: str) -> tuple:
    try:
        return tuple(float(x) for x in s.replace(",", " ").split())
    except ValueError:
        raise UsageError(f"bad SNR ladder {s!r}") from None


def _resolve(args, kind: str) -> dict:
    """Merge preset, config file and flags (flags win)."""
    cfg: dict = {}
    file_cfg = {}
    if args.config:
        try:
            file_cfg = parse_config_text(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
    preset = args.preset if getattr(args, "preset", None) else file_cfg.get("preset")
    if preset:
        if preset not in PRESETS:
            raise UsageError(f"unknown preset {preset!r}")
        cfg.update(PRESET_BASE)
        cfg["preset"] = preset
        p = PRESETS[preset]
        if "snr_db" in p:
            cfg["snr_db"] = " ".join(_fmt(float(x)) for x in p["snr_db"])
            cfg["csi_mode"] = p["csi_mode"]
    cfg.update(file_cfg)
    flag_map = {
        "M": "M",
        "N": "N",
        "nup": "nu_p",
        "Q": "Q",
        "seed": "seed",
        "threads": "threads",
        "beta": "beta",
        "alpha": "alpha",
        "omega": "omega",
        "quadrature_order": "quadrature_order",
        "shift_mode": "shift_mode",
        "nu_max": "nu_max",
        "snr": "snr_db",
        "frames": "frames",
        "csi": "csi_mode",
        "constellation": "constellation",
        "noise": "noise",
    }
    for flag, key in flag_map.items():
        v = getattr(args, flag, None)
        if v is not None:
            cfg[key] = v
    fam = getattr(args, "family", None)
    if fam:
        cfg["families"] = fam
    if getattr(args, "timing", False):
        cfg["timing"] = "on"
    defaults = {"M": 17, "N": 19, "nu_p": 30e3, "Q": 8, "seed": 0, "threads": 1}
    for k, v in defaults.items():
        cfg.setdefault(k, v)
    if kind == "sim":
        cfg.setdefault("families", ",".join(ALL_FAMILIES))
        cfg.setdefault("csi_mode", "perfect")
        cfg.setdefault("snr_db", " ".join(_fmt(float(x)) for x in PERFECT_LADDER))
        cfg.setdefault("frames", 2000)
        cfg.setdefault("nu_max", 815.0)
    return cfg


def _filter_params(cfg: dict, family: str) -> dict:
    p = {}
    if family == "rrc" and "beta" in cfg:
        p["beta"] = cfg["beta"]
    if family in ("gaussian", "gaussian-sinc", "iota-gaussian") and "alpha" in cfg:
        p["alpha"] = cfg["alpha"]
    if family == "gaussian-sinc" and "omega" in cfg:
        p["omega"] = cfg["omega"]
    if family == "iota-pswf" and "quadrature_order" in cfg:
        p["quadrature_order"] = cfg["quadrature_order"]
    if family.startswith("iota") and "shift_mode" in cfg:
        p["shift_mode"] = cfg["shift_mode"]
    return p


def _families(cfg: dict) -> list[str]:
    fams = [f.strip() for f in str(cfg["families"]).split(",") if f.strip()]
    for f in fams:
        if f not in ALL_FAMILIES:
            raise UsageError(f"unknown filter family {f!r}")
    return fams


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if not os.access(out, os.W_OK):
        raise UsageError(f"output directory {out} is not writable")
    return out


# ---------------------------------------------------------------------------
# writers
# ---------------------------------------------------------------------------


def write_taps_csv(path: Path, w) -> None:
    g = w.grid
    s = w.taps.recenter(True).samples
    ii = g.delay_indices(True)
    jj = g.doppler_indices(True)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["tau_index", "nu_index", "tau_seconds", "nu_hz", "re", "im"])
        for a, i in enumerate(ii):
            for b, j in enumerate(jj):
                v = s[a, b]
                wr.writerow([i, j, _fmt(i * g.delta_tau), _fmt(j * g.delta_nu), _fmt(v.real), _fmt(v.imag)])


def write_esd_csv(path: Path, rep) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["axis", "coordinate", "density"])
        for f, d in zip(rep.frequency, rep.frequency_density):
            wr.writerow(["frequency", _fmt(f), _fmt(d)])
        for t, d in zip(rep.time, rep.time_density):
            wr.writerow(["time", _fmt(t), _fmt(d)])
        fh.write(
            f"# in_band_fraction={_fmt(rep.in_band_fraction)} in_time_fraction={_fmt(rep.in_time_fraction)}\n"
        )


def write_cuts_csv(path: Path, grid, rep) -> None:
    g = grid
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["axis", "coordinate", "re", "im"])
        for i, v in zip(g.delay_axis(True), rep.delay_cut):
            wr.writerow(["delay", _fmt(i), _fmt(v.real), _fmt(v.imag)])
        for j, v in zip(g.doppler_axis(True), rep.doppler_cut):
            wr.writerow(["doppler", _fmt(j), _fmt(v.real), _fmt(v.imag)])


def filter_summary(w, rep) -> dict:
    amb = composite_ambiguity(w)
    s = {
        "family": w.name,
        "energy": w.energy,
        "in_band_fraction": rep.in_band_fraction,
        "in_time_fraction": rep.in_time_fraction,
        "expansion_detected": rep.in_band_fraction < 0.999 or rep.in_time_fraction < 0.999,
        "sidelobe_delay": rep.sidelobe_delay,
        "sidelobe_doppler": rep.sidelobe_doppler,
        "mainlobe_delay_seconds": rep.mainlobe_delay,
        "mainlobe_doppler_hz": rep.mainlobe_doppler,
        "max_off_origin_ambiguity": off_origin_peak(amb),
    }
    if w.family.value == "sinc":
        la = w.taps.lattice_samples(True)
        k0, l0 = la.offsets()
        lat = np.abs(la.taps)
        peak = lat[-k0, -l0]
        lat[-k0, -l0] = 0.0
        s["lattice_zeros_max"] = float(lat.max() / peak)
    if "gram_deviation" in w.params:
        s["iota_gram_deviation"] = w.params["gram_deviation"]
        s["iota_clamped"] = w.params["clamped"]
    return s


def write_summary(path: Path, summary: dict) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["key", "value"])
        for k, v in summary.items():
            wr.writerow([k, _fmt(v) if isinstance(v, float) else v])


def write_results(path: Path, rows) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(RESULT_HEADER)
        for r in rows:
            wr.writerow([_fmt(x) if isinstance(x, float) else x for x in r])


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_filter(args) -> int:
    cfg = _resolve(args, "filter")
    out = _outdir(args)
    fams = _families(cfg) if "families" in cfg else ["sinc"]
    g = make_grid(cfg["M"], cfg["N"], cfg["nu_p"], cfg["Q"])
    status = EXIT_OK
    for fam in fams:
        try:
            w = make_filter(fam, g, **_filter_params(cfg, fam))
        except (IotaConditioningError, PswfSolveError) as exc:
            print(f"{fam}: construction failed: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            continue
        rep = esd_report(w)
        write_taps_csv(out / f"{fam}_taps.csv", w)
        write_esd_csv(out / f"{fam}_esd.csv", rep)
        write_cuts_csv(out / f"{fam}_cuts.csv", g, rep)
        summ = filter_summary(w, rep)
        write_summary(out / f"{fam}_summary.csv", summ)
        print(f"{fam}: " + ", ".join(f"{k}={_fmt(v) if isinstance(v, float) else v}" for k, v in summ.items() if k != "family"))
    return status


def _manifest(cfg: dict, extra: dict) -> str:
    body = format_config(cfg)
    head = "".join(f"# {k}: {v}\n" for k, v in extra.items())
    return head + body


def cmd_sim(args) -> int:
    cfg = _resolve(args, "sim")
    out = _outdir(args)
    timing = cfg.get("timing") == "on"
    manifest = _manifest(cfg, {"zakotfs": __version__, "master_seed": cfg["seed"]})
    (out / "manifest.txt").write_text(manifest)
    g = make_grid(cfg["M"], cfg["N"], cfg["nu_p"], cfg["Q"])
    if cfg.get("preset") == "fig2":
        failures: dict = {}
        base = SimConfig(M=g.M, N=g.N, nu_p=g.nu_p, Q=g.Q)
        reps = run_esd(base, _families(cfg), failures)
        for fam, rep in reps.items():
            write_esd_csv(out / f"{fam}_esd.csv", rep)
            write_cuts_csv(out / f"{fam}_cuts.csv", g, rep)
        for fam, exc in failures.items():
            print(f"{fam}: construction failed: {exc}", file=sys.stderr)
        return EXIT_NUMERIC if failures else EXIT_OK
    rows, timings = [], []
    status = EXIT_OK
    for fam in _families(cfg):
        sc = SimConfig(
            M=g.M,
            N=g.N,
            nu_p=g.nu_p,
            Q=g.Q,
            family=fam,
            filter_params=_filter_params(cfg, fam),
            nu_max=cfg["nu_max"],
            snr_db=_parse_ladder(cfg["snr_db"]),
            frames_per_point=cfg["frames"],
            csi_mode=cfg["csi_mode"],
            master_seed=cfg["seed"],
            constellation=cfg.get("constellation", "qam4"),
            pilot_snr_offset_db=cfg.get("pilot_snr_offset_db", 0.0),
            noise_coloring=cfg.get("noise", "white"),
            threads=cfg["threads"],
        )
        try:
            pts = run_ber(sc)
        except (IotaConditioningError, PswfSolveError) as exc:
            print(f"{fam}: construction failed: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            continue
        except SimulationError as exc:
            print(f"{fam}: simulation failed: {exc}", file=sys.stderr)
            status = EXIT_NUMERIC
            continue
        for p in pts:
            rows.append([fam, sc.csi_mode, p.snr_db, p.frames, p.bit_errors, p.ber, p.ber_ci95, p.nmse, p.nmse_std, p.wall_ms if timing else 0.0])
            timings.append((fam, p.snr_db, p.wall_ms))
            print(f"{fam} {sc.csi_mode} snr={p.snr_db:g} ber={p.ber:.4g} nmse={p.nmse:.4g}", file=sys.stderr)
    write_results(out / "results.csv", rows)
    with open(out / "timing.csv", "w") as fh:
        fh.write("filter,snr_db,wall_ms\n")
        for fam, snr, ms in timings:
            fh.write(f"{fam},{_fmt(snr)},{ms:.3f}\n")
    return status


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    cfg = _resolve(args, "selftest")
    ok = run_selftest(Q=cfg["Q"], seed=cfg["seed"], out=sys.stdout)
    return EXIT_OK if ok else EXIT_SELFTEST


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--M", type=int)
    p.add_argument("--N", type=int)
    p.add_argument("--nup", type=float, help="Doppler period in Hz")
    p.add_argument("--Q", type=int, help="oversampling factor")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", default=".")
    p.add_argument("--threads", type=int)
    p.add_argument("--config", help="key = value configuration file")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="zakotfs", description="Delay-Doppler pulse shaping and link simulation")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    pf = sub.add_parser("filter", help="build a filter and write taps, ESD and diagnostics")
    _common(pf)
    pf.add_argument("--family", help="comma-separated: " + ", ".join(ALL_FAMILIES))
    pf.add_argument("--beta", type=float)
    pf.add_argument("--alpha", type=float)
    pf.add_argument("--omega", type=float)
    pf.add_argument("--quadrature-order", dest="quadrature_order", type=int)
    pf.add_argument("--shift-mode", dest="shift_mode", choices=["torus", "linear"])
    pf.set_defaults(func=cmd_filter)

    ps = sub.add_parser("sim", help="Monte-Carlo BER / NMSE / ESD runs")
    _common(ps)
    ps.add_argument("--preset", choices=sorted(PRESETS))
    ps.add_argument("--family", help="comma-separated filter families")
    ps.add_argument("--beta", type=float)
    ps.add_argument("--alpha", type=float)
    ps.add_argument("--omega", type=float)
    ps.add_argument("--quadrature-order", dest="quadrature_order", type=int)
    ps.add_argument("--shift-mode", dest="shift_mode", choices=["torus", "linear"])
    ps.add_argument("--nu-max", dest="nu_max", type=float)
    ps.add_argument("--snr", help="SNR ladder in dB, e.g. '0 2 4'")
    ps.add_argument("--frames", type=int, help="frames per SNR point")
    ps.add_argument("--csi", choices=["perfect", "estimated"])
    ps.add_argument("--constellation", choices=["qam4", "qam16"])
    ps.add_argument("--noise", choices=["white", "matched"])
    ps.add_argument("--timing", action="store_true", help="write wall-clock times into results.csv")
    ps.set_defaults(func=cmd_sim)

    pt = sub.add_parser("selftest", help="run the small-instance oracle suite")
    _common(pt)
    pt.set_defaults(func=cmd_selftest)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
        if not getattr(args, "command", None):
            ap.print_help(sys.stderr)
            return EXIT_USAGE
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IotaConditioningError, PswfSolveError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
