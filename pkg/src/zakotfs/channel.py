"""Sparse delay-Doppler channels, effective channels and the lattice I/O matrix."""

from __future__ import annotations

import csv
import threading
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .ddcore import DDGrid, DDSignal, LatticeArray, _to_cells, shift_with_phase, twisted_conv_grid
from .filters import Filter, _matched_signal

__all__ = [
    "VEH_A_DELAYS",
    "VEH_A_POWERS_DB",
    "PhysicalChannel",
    "EffectiveChannel",
    "EffectiveChannelTable",
    "IOMatrix",
    "draw_veh_a",
    "effective_channel",
    "build_H",
    "SUPPORT_THRESHOLD",
    "write_channel_csv",
    "write_effective_csv",
]

VEH_A_DELAYS = np.array([0.0, 0.31, 0.71, 1.09, 1.73, 2.51]) * 1e-6
VEH_A_POWERS_DB = np.array([0.0, -1.0, -9.0, -10.0, -15.0, -20.0])
SUPPORT_THRESHOLD = 1e-6


@dataclass(frozen=True, eq=False)
class PhysicalChannel:
    """``sum_i h_i delta(tau - tau_i) delta(nu - nu_i)``."""

    gains: np.ndarray
    delays: np.ndarray
    dopplers: np.ndarray

    def __post_init__(self):
        h = np.atleast_1d(np.asarray(self.gains, dtype=complex)).copy()
        t = np.atleast_1d(np.asarray(self.delays, dtype=float)).copy()
        v = np.atleast_1d(np.asarray(self.dopplers, dtype=float)).copy()
        if not (h.shape == t.shape == v.shape) or h.ndim != 1 or len(h) == 0:
            raise ValueError("gains, delays and dopplers must be equal-length 1-D arrays")
        for a in (h, t, v):
            a.setflags(write=False)
        object.__setattr__(self, "gains", h)
        object.__setattr__(self, "delays", t)
        object.__setattr__(self, "dopplers", v)

    @property
    def P(self) -> int:
        return len(self.gains)

    @property
    def power(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))

    def paths(self):
        return list(zip(self.gains, self.delays, self.dopplers))

    def check(self, grid: DDGrid, normalized: bool = True) -> None:
        if normalized and abs(self.power - 1.0) > 1e-12:
            raise ValueError(f"path powers sum to {self.power}, expected 1")
        if np.any(self.delays < 0) or np.any(self.delays >= grid.tau_p):
            raise ValueError("path delays must lie in [0, tau_p)")
        if np.any(np.abs(self.dopplers) >= grid.nu_p / 2):
            raise ValueError("path Dopplers must satisfy |nu| < nu_p / 2")

    @classmethod
    def identity(cls) -> "PhysicalChannel":
        return cls([1.0], [0.0], [0.0])


def draw_veh_a(rng: np.random.Generator, nu_max: float, grid: DDGrid) -> PhysicalChannel:
    """Six-path vehicular-A channel with Jakes-type Dopplers and uniform phases."""
    if nu_max >= grid.nu_p / 2:
        raise ValueError(f"nu_max = {nu_max} Hz aliases (nu_p / 2 = {grid.nu_p / 2} Hz)")
    if np.any(VEH_A_DELAYS >= grid.tau_p):
        raise ValueError("delay spread exceeds the delay period")
    p = 10.0 ** (VEH_A_POWERS_DB / 10.0)
    p = p / p.sum()
    phi = rng.uniform(0.0, 2 * np.pi, size=len(p))
    theta = rng.uniform(-np.pi, np.pi, size=len(p))
    gains = np.sqrt(p) * np.exp(1j * phi)
    return PhysicalChannel(gains, VEH_A_DELAYS.copy(), nu_max * np.cos(theta))


@dataclass(frozen=True, eq=False)
class EffectiveChannel:
    grid: DDGrid
    taps: LatticeArray
    h_grid: DDSignal | None = None

    def __post_init__(self):
        object.__setattr__(self, "taps", self.taps.recenter(True))

    @property
    def support(self) -> list[tuple[int, int]]:
        return self.taps.support(SUPPORT_THRESHOLD)


def _single_path(w: Filter, di: int, dj: int, full: bool):
    """``matched(w) *_sigma (delta_(di,dj) *_sigma w)`` for a unit-gain path at cell offsets."""
    g = w.grid
    shifted = shift_with_phase(w.taps, di * g.delta_tau, dj * g.delta_nu, side="left")
    out = twisted_conv_grid(_matched_signal(w.taps), shifted, centered=True)
    return out if full else out.lattice_samples(True).taps


def effective_channel(w: Filter, phys: PhysicalChannel, grid: DDGrid | None = None) -> EffectiveChannel:
    """Oversampled ``h_eff`` and its lattice samples for a filter and a physical channel.

    Each path contributes ``matched(w) *_sigma (h_i delta_i *_sigma w)``; the
    inner product is the closed form of a delta convolved from the left with
    the quasi-periodic transmit filter.
    """
    g = w.grid if grid is None else grid
    if g != w.grid:
        raise ValueError("filter lives on a different grid")
    acc = None
    for h, tau, nu in phys.paths():
        di, dj = _to_cells(g, tau, nu)
        term = _single_path(w, di, dj, full=True).scaled(h)
        acc = term if acc is None else acc + term
    return EffectiveChannel(g, acc.lattice_samples(True), acc)


class EffectiveChannelTable:
    """Cache of single-path lattice responses keyed by rounded cell offset.

    Paths are rounded to the nearest oversampled cell, so a channel family with
    fixed delays and bounded Dopplers only ever needs a handful of responses.
    Safe for concurrent use: entries are immutable once computed.
    """

    def __init__(self, w: Filter):
        self.filter = w
        self.grid = w.grid
        self._cache: dict[tuple[int, int], np.ndarray] = {}
        self._lock = threading.Lock()

    def response(self, di: int, dj: int) -> np.ndarray:
        key = (int(di), int(dj))
        r = self._cache.get(key)
        if r is None:
            r = _single_path(self.filter, key[0], key[1], full=False)
            r.setflags(write=False)
            with self._lock:
                r = self._cache.setdefault(key, r)
        return r

    def warm(self, delays, dopplers) -> None:
        for tau in delays:
            for nu in dopplers:
                self.response(*_to_cells(self.grid, tau, nu))

    def __call__(self, phys: PhysicalChannel) -> EffectiveChannel:
        g = self.grid
        taps = np.zeros((g.M, g.N), dtype=complex)
        for h, tau, nu in phys.paths():
            taps = taps + h * self.response(*_to_cells(g, tau, nu))
        return EffectiveChannel(g, LatticeArray(g, taps, True))


@dataclass(frozen=True, eq=False)
class IOMatrix:
    H: np.ndarray
    grid: DDGrid

    def __matmul__(self, x):
        return self.H @ x


def build_H(eff: EffectiveChannel | LatticeArray, threshold: float = SUPPORT_THRESHOLD) -> IOMatrix:
    """``MN x MN`` matrix with ``H @ vec(x) = vec(h_eff *_sigma x)``.

    ``h_eff`` is treated as finitely supported on its centered window (taps
    below ``threshold * max`` are dropped); ``x`` is quasi-periodic.  Entry
    ``H[k + l M, k' + l' M]`` collects the tap at
    ``(k - k' - nM, l - l' - mN)`` with phase
    ``exp(j2pi n l'/N) exp(j2pi (k' + nM)(l - l' - mN)/(MN))``.
    """
    taps = eff.taps if isinstance(eff, EffectiveChannel) else eff.recenter(True)
    g = taps.grid
    M, N, MN = g.M, g.N, g.MN
    sup = taps.support(threshold)
    if not sup:
        return IOMatrix(np.zeros((MN, MN), dtype=complex), g)
    p = np.array([s[0] for s in sup])[:, None]
    q = np.array([s[1] for s in sup])[:, None]
    hv = np.array([taps.value(a, b) for a, b in sup])[:, None]
    k = np.tile(np.arange(M), N)[None, :]
    l = np.repeat(np.arange(N), M)[None, :]
    n, kp = np.divmod(k - p, M)
    lp = np.mod(l - q, N)
    ph = np.mod(n * lp, N) / N + np.mod((k - p) * q, MN) / MN
    vals = hv * np.exp(2j * np.pi * ph)
    rows = np.broadcast_to(k + l * M, vals.shape)
    cols = kp + lp * M
    H = sparse.coo_matrix(
        (vals.ravel(), (rows.ravel(), cols.ravel())), shape=(MN, MN)
    ).toarray()
    return IOMatrix(H, g)


def write_channel_csv(path, phys: PhysicalChannel) -> None:
    """Dump paths as ``path,gain_re,gain_im,tau_seconds,nu_hz``."""
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["path", "gain_re", "gain_im", "tau_seconds", "nu_hz"])
        for i, (h, tau, nu) in enumerate(phys.paths()):
            wr.writerow([i, repr(float(h.real)), repr(float(h.imag)), repr(float(tau)), repr(float(nu))])


def write_effective_csv(path, eff: EffectiveChannel | LatticeArray) -> None:
    """Dump centered lattice taps as ``k,l,re,im``."""
    taps = eff.taps if isinstance(eff, EffectiveChannel) else eff.recenter(True)
    k0, l0 = taps.offsets()
    M, N = taps.taps.shape
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["k", "l", "re", "im"])
        for a in range(M):
            for b in range(N):
                v = taps.taps[a, b]
                wr.writerow([k0 + a, l0 + b, repr(float(v.real)), repr(float(v.imag))])
