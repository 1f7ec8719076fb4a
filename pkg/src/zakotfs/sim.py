"""Seeded Monte-Carlo harness for BER, channel-estimation NMSE and filter ESDs."""

from __future__ import annotations

import hashlib
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .channel import VEH_A_DELAYS, EffectiveChannelTable, IOMatrix, build_H, draw_veh_a
from .ddcore import DDGrid, make_grid
from .filters import EsdReport, Filter, FilterFamily, esd_report, make_filter
from .txrx import (
    Constellation,
    NoiseModel,
    default_pilot_location,
    default_region,
    estimate_channel,
    make_pilot_frame,
    mmse_detect,
    qam_demap,
    io_nmse,
    random_frame,
    region_nmse,
    transmit,
)

__all__ = [
    "SimConfig",
    "CurvePoint",
    "SimulationError",
    "trial_seed",
    "run_ber",
    "run_nmse",
    "run_esd",
    "prepare_filter",
    "PERFECT_LADDER",
    "ESTIMATED_LADDER",
]

PERFECT_LADDER = tuple(range(0, 17, 2))
ESTIMATED_LADDER = tuple(range(0, 36, 5))


@dataclass(frozen=True)
class SimConfig:
    M: int = 17
    N: int = 19
    nu_p: float = 30e3
    Q: int = 8
    family: str = "sinc"
    filter_params: dict = field(default_factory=dict)
    nu_max: float = 815.0
    snr_db: tuple = PERFECT_LADDER
    frames_per_point: int = 2000
    csi_mode: str = "perfect"
    master_seed: int = 0
    constellation: str = "qam4"
    pilot_snr_offset_db: float = 0.0
    pilot_location: tuple | None = None
    noise_coloring: str = "white"
    threads: int = 1
    identity_channel: bool = False
    nmse_scope: str = "io"

    def __post_init__(self):
        object.__setattr__(self, "snr_db", tuple(float(s) for s in self.snr_db))
        object.__setattr__(self, "family", FilterFamily(self.family).value)
        object.__setattr__(self, "constellation", Constellation(self.constellation).value)
        if self.frames_per_point < 1:
            raise ValueError("frames_per_point must be at least 1")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ValueError("SNR ladder must be strictly increasing")
        if self.csi_mode not in ("perfect", "estimated"):
            raise ValueError("csi_mode must be 'perfect' or 'estimated'")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")
        if self.threads < 1:
            raise ValueError("threads must be at least 1")
        if self.nmse_scope not in ("io", "region"):
            raise ValueError("nmse_scope must be 'io' or 'region'")

    @property
    def grid(self) -> DDGrid:
        return make_grid(self.M, self.N, self.nu_p, self.Q)


@dataclass(frozen=True)
class CurvePoint:
    snr_db: float
    ber: float
    ber_ci95: float
    nmse: float
    nmse_std: float
    frames: int
    bit_errors: int
    bits: int = 0
    wall_ms: float = 0.0


class SimulationError(RuntimeError):
    """A trial failed; carries the seed needed to reproduce it."""

    def __init__(self, message: str, seed: int | None = None):
        super().__init__(message if seed is None else f"{message} (trial seed {seed})")
        self.seed = seed


def trial_seed(master_seed: int, snr_index: int, trial: int) -> int:
    """64-bit per-trial seed from a hash of ``(master_seed, snr_index, trial)``."""
    msg = f"{int(master_seed)}:{int(snr_index)}:{int(trial)}".encode()
    return int.from_bytes(hashlib.blake2b(msg, digest_size=8).digest(), "little")


def wilson_halfwidth(errors: int, n: int, z: float = 1.959963984540054) -> float:
    if n == 0:
        return float("nan")
    p = errors / n
    den = 1 + z * z / n
    return float(z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den)


def prepare_filter(cfg: SimConfig) -> Filter:
    return make_filter(cfg.family, cfg.grid, **cfg.filter_params)


def _table_for(cfg: SimConfig, w: Filter) -> EffectiveChannelTable:
    tab = EffectiveChannelTable(w)
    g = w.grid
    # every Doppler cell reachable by |nu| <= nu_max
    jmax = int(round(cfg.nu_max / g.delta_nu))
    tab.warm(VEH_A_DELAYS, np.arange(-jmax, jmax + 1) * g.delta_nu)
    return tab


def _trial(cfg, g, tab, region, pilot, snr_db, seed, want_ber: bool):
    rng = np.random.default_rng(seed)
    sigma2 = 10.0 ** (-snr_db / 10.0)
    noise = NoiseModel(sigma2, cfg.noise_coloring, tab.filter if tab is not None else None)
    if cfg.identity_channel:
        Hm = IOMatrix(np.eye(g.MN, dtype=complex), g)
        eff = None
    else:
        phys = draw_veh_a(rng, cfg.nu_max, g)
        eff = tab(phys)
        Hm = build_H(eff)
    nmse = 0.0
    H_det = Hm
    if cfg.csi_mode == "estimated" and eff is not None:
        p_sigma2 = 10.0 ** (-(snr_db + cfg.pilot_snr_offset_db) / 10.0)
        p_noise = NoiseModel(p_sigma2, cfg.noise_coloring, tab.filter)
        y_p = transmit(Hm, make_pilot_frame(g, pilot), p_noise, rng)
        est = estimate_channel(y_p, pilot, region, g, snr_db + cfg.pilot_snr_offset_db)
        scope = io_nmse if cfg.nmse_scope == "io" else region_nmse
        nmse = scope(est, eff.taps)
        H_det = build_H(est.taps_hat)
    if not want_ber:
        return 0, 0, nmse
    frame = random_frame(rng, g, cfg.constellation)
    y = transmit(Hm, frame, noise, rng)
    bits = qam_demap(mmse_detect(H_det, y, sigma2), cfg.constellation)
    return int(np.count_nonzero(bits != frame.bits)), int(bits.size), nmse


def _run(cfg: SimConfig, want_ber: bool, w: Filter | None, progress: Callable | None):
    g = cfg.grid
    if cfg.identity_channel:
        tab = None
    else:
        w = prepare_filter(cfg) if w is None else w
        if w.grid != g:
            raise ValueError("filter grid does not match the configuration")
        tab = _table_for(cfg, w)
    pilot = cfg.pilot_location or default_pilot_location(g)
    region = default_region(g)
    points = []
    seen = set()
    for si, snr in enumerate(cfg.snr_db):
        t0 = time.perf_counter()
        seeds = [trial_seed(cfg.master_seed, si, t) for t in range(cfg.frames_per_point)]
        if len(set(seeds)) != len(seeds) or seen.intersection(seeds):
            raise SimulationError("per-trial seed collision", seeds[0])
        seen.update(seeds)

        def one(seed, snr=snr):
            try:
                return _trial(cfg, g, tab, region, pilot, snr, seed, want_ber)
            except Exception as exc:  # re-raise with the offending seed
                raise SimulationError(f"{type(exc).__name__}: {exc}", seed) from exc

        if cfg.threads > 1:
            with ThreadPoolExecutor(cfg.threads) as ex:
                results = list(ex.map(one, seeds))
        else:
            results = [one(s) for s in seeds]
        errors = sum(r[0] for r in results)
        nbits = sum(r[1] for r in results)
        nm = np.array([r[2] for r in results])
        ber = errors / nbits if nbits else float("nan")
        points.append(
            CurvePoint(
                snr_db=float(snr),
                ber=float(ber),
                ber_ci95=wilson_halfwidth(errors, nbits),
                nmse=float(nm.mean()),
                nmse_std=float(nm.std()),
                frames=cfg.frames_per_point,
                bit_errors=errors,
                bits=nbits,
                wall_ms=(time.perf_counter() - t0) * 1e3,
            )
        )
        if progress is not None:
            progress(cfg, points[-1])
    return points


def run_ber(cfg: SimConfig, w: Filter | None = None, progress: Callable | None = None) -> list[CurvePoint]:
    """BER per SNR point; estimated mode also reports the pilot-estimate NMSE.

    Every trial draws its own channel, data and noise from a stream seeded by
    :func:`trial_seed`, so results do not depend on the thread count.
    """
    return _run(cfg, True, w, progress)


def run_nmse(cfg: SimConfig, w: Filter | None = None, progress: Callable | None = None) -> list[CurvePoint]:
    """Channel-estimation NMSE from pilot frames alone (no data frames).

    ``cfg.nmse_scope='io'`` compares against the whole effective channel, so
    taps the estimation region misses count as error; ``'region'`` restricts
    both sides to the region.
    """
    if cfg.csi_mode != "estimated":
        cfg = replace(cfg, csi_mode="estimated")
    return _run(cfg, False, w, progress)


def run_esd(cfg: SimConfig, families=None, failures: dict | None = None) -> dict[str, EsdReport]:
    """ESD and pulse-cut reports for each filter family.

    Construction failures propagate unless ``failures`` is given, in which
    case they are recorded there by family name and the family is skipped.
    """
    g = cfg.grid
    out = {}
    for fam in families or [f.value for f in FilterFamily]:
        params = cfg.filter_params if fam == cfg.family else {}
        try:
            w = make_filter(fam, g, **params)
        except ArithmeticError as exc:
            if failures is None:
                raise
            failures[fam] = exc
            continue
        out[fam] = esd_report(w)
    return out
