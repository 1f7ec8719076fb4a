"""Symbol mapping, the vectorized link, MMSE detection and pilot-based estimation."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .ddcore import DDGrid, DDSignal, LatticeArray, twisted_conv_grid
from .channel import IOMatrix
from .filters import Filter, _matched_signal

__all__ = [
    "Constellation",
    "Frame",
    "NoiseModel",
    "ChannelEstimate",
    "SingularChannelError",
    "qam_map",
    "qam_demap",
    "random_frame",
    "transmit",
    "mmse_detect",
    "make_pilot_frame",
    "default_pilot_location",
    "default_region",
    "estimate_channel",
    "region_nmse",
    "io_nmse",
]


class Constellation(str, enum.Enum):
    QAM4 = "qam4"
    QAM16 = "qam16"

    @property
    def bits_per_symbol(self) -> int:
        return 2 if self is Constellation.QAM4 else 4


class SingularChannelError(np.linalg.LinAlgError):
    """Zero-noise detection was asked to invert a singular channel."""


def _pam_levels(bits_per_axis: int):
    # Gray-coded PAM: level index -> gray label
    m = 1 << bits_per_axis
    idx = np.arange(m)
    gray = idx ^ (idx >> 1)
    levels = 2 * idx - (m - 1)
    scale = np.sqrt(2.0 * (m * m - 1) / 3.0)  # average energy of the square QAM
    return gray, levels / scale


def _constellation_points(c: Constellation) -> np.ndarray:
    """Points indexed by the integer whose bits (MSB first) are the label."""
    b = c.bits_per_symbol // 2
    gray, lv = _pam_levels(b)
    pos = np.empty(1 << b, dtype=float)
    pos[gray] = lv
    labels = np.arange(1 << c.bits_per_symbol)
    return pos[labels >> b] + 1j * pos[labels & ((1 << b) - 1)]


@dataclass(frozen=True, eq=False)
class Frame:
    X: np.ndarray
    constellation: Constellation = Constellation.QAM4
    bits: np.ndarray | None = None

    @property
    def vec(self) -> np.ndarray:
        return self.X.reshape(-1, order="F")


def qam_map(bits, M: int, N: int, constellation: Constellation | str = Constellation.QAM4) -> Frame:
    """Gray-mapped unit-energy QAM; symbol ``k + l*M`` carries consecutive bits."""
    c = Constellation(constellation)
    bps = c.bits_per_symbol
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.shape != (M * N * bps,):
        raise ValueError(f"expected {M * N * bps} bits, got {bits.size}")
    groups = bits.reshape(-1, bps)
    labels = groups @ (1 << np.arange(bps - 1, -1, -1))
    sym = _constellation_points(c)[labels]
    return Frame(sym.reshape(M, N, order="F"), c, bits.copy())


def qam_demap(X_hat, constellation: Constellation | str = Constellation.QAM4) -> np.ndarray:
    """Minimum-distance hard decisions, returned as bits in mapping order."""
    c = Constellation(constellation)
    b = c.bits_per_symbol // 2
    gray, lv = _pam_levels(b)
    x = np.asarray(X_hat).reshape(-1, order="F")
    # per-axis nearest level, then its Gray label
    edges = (lv[:-1] + lv[1:]) / 2
    gi = gray[np.searchsorted(edges, x.real)]
    gq = gray[np.searchsorted(edges, x.imag)]
    labels = (gi << b) | gq
    shifts = np.arange(c.bits_per_symbol - 1, -1, -1)
    return ((labels[:, None] >> shifts) & 1).astype(np.uint8).reshape(-1)


def random_frame(rng: np.random.Generator, grid: DDGrid, constellation=Constellation.QAM4) -> Frame:
    c = Constellation(constellation)
    bits = rng.integers(0, 2, size=grid.MN * c.bits_per_symbol, dtype=np.uint8)
    return qam_map(bits, grid.M, grid.N, c)


@dataclass(frozen=True)
class NoiseModel:
    """Complex circular noise of variance ``variance`` per lattice sample.

    ``coloring='matched'`` draws white noise on the oversampled grid and passes
    it through the receive filter before sampling, so it inherits the filter's
    lattice correlation.
    """

    variance: float
    coloring: str = "white"
    filter: Filter | None = None

    def __post_init__(self):
        if not self.variance >= 0:
            raise ValueError("noise variance must be non-negative")
        if self.coloring not in ("white", "matched"):
            raise ValueError("coloring must be 'white' or 'matched'")
        if self.coloring == "matched" and self.filter is None:
            raise ValueError("matched-filtered noise needs the filter")

    @classmethod
    def from_snr_db(cls, snr_db: float, **kw) -> "NoiseModel":
        return cls(10.0 ** (-snr_db / 10.0), **kw)

    def draw(self, rng: np.random.Generator, grid: DDGrid) -> np.ndarray:
        if self.variance == 0:
            return np.zeros(grid.MN, dtype=complex)
        if self.coloring == "white":
            z = rng.standard_normal(grid.MN) + 1j * rng.standard_normal(grid.MN)
            return z * np.sqrt(self.variance / 2)
        # white on the grid with density variance, then matched filtering
        s = np.sqrt(self.variance / (2 * grid.cell_area))
        z = (rng.standard_normal((grid.K, grid.L)) + 1j * rng.standard_normal((grid.K, grid.L))) * s
        y = twisted_conv_grid(_matched_signal(self.filter.taps), DDSignal(grid, z, False), centered=False)
        return y.lattice_samples(False).vec()


def transmit(Hm: IOMatrix, frame: Frame | np.ndarray, noise: NoiseModel, rng: np.random.Generator) -> np.ndarray:
    """``y = H x + n`` with ``x[k + l*M] = X[k, l]``."""
    x = frame.vec if isinstance(frame, Frame) else np.asarray(frame)
    MN = Hm.grid.MN
    if Hm.H.shape != (MN, MN) or x.shape != (MN,):
        raise ValueError("dimension mismatch between H and the frame")
    return Hm.H @ x + noise.draw(rng, Hm.grid)


def mmse_detect(Hm: IOMatrix, y: np.ndarray, sigma2: float, cond_limit: float = 1e12) -> np.ndarray:
    """``H^H (H H^H + sigma2 I)^-1 y`` reshaped to ``M x N``.

    With ``sigma2 = 0`` this is a plain solve, and a singular ``H`` raises
    :class:`SingularChannelError` instead of being silently regularized.
    """
    if sigma2 < 0:
        raise ValueError("noise variance must be non-negative")
    H = Hm.H
    g = Hm.grid
    if sigma2 == 0:
        c = np.linalg.cond(H)
        if not np.isfinite(c) or c > cond_limit:
            raise SingularChannelError(f"channel is singular (condition number {c:.3g})")
        x = linalg.solve(H, y)
    else:
        A = H @ H.conj().T
        A[np.diag_indices_from(A)] += sigma2
        x = H.conj().T @ linalg.solve(A, y, assume_a="pos")
    return x.reshape(g.M, g.N, order="F")


def default_pilot_location(grid: DDGrid) -> tuple[int, int]:
    return math.ceil(grid.M / 2), math.ceil(grid.N / 2)


def default_region(grid: DDGrid, max_delay: float = 2.51e-6, doppler_span: int = 2):
    kmax = math.ceil(grid.B * max_delay) + 2
    return [(dk, dl) for dk in range(kmax + 1) for dl in range(-doppler_span, doppler_span + 1)]


def make_pilot_frame(grid: DDGrid, pilot_location: tuple[int, int] | None = None) -> Frame:
    """Unit-energy lattice delta at the pilot location (uncentered indices)."""
    kp, lp = default_pilot_location(grid) if pilot_location is None else pilot_location
    if int(kp) != kp or int(lp) != lp or not (0 <= kp < grid.M and 0 <= lp < grid.N):
        raise ValueError(f"pilot location {pilot_location} is not a lattice point of the frame")
    X = np.zeros((grid.M, grid.N), dtype=complex)
    X[int(kp), int(lp)] = 1.0
    return Frame(X, Constellation.QAM4, None)


@dataclass(frozen=True, eq=False)
class ChannelEstimate:
    taps_hat: LatticeArray
    region: tuple[tuple[int, int], ...]
    pilot_location: tuple[int, int]
    pilot_snr_db: float | None = None


def estimate_channel(
    y_pilot: np.ndarray,
    pilot_location: tuple[int, int],
    region,
    grid: DDGrid,
    pilot_snr_db: float | None = None,
) -> ChannelEstimate:
    """Cross-ambiguity estimate from a received pilot frame.

    ``h_hat[dk, dl] = y[kp + dk, lp + dl] exp(-j2pi kp dl / (MN))``, reading
    ``y`` quasi-periodically; taps outside ``region`` are zero.
    """
    kp, lp = pilot_location
    region = tuple((int(a), int(b)) for a, b in region)
    M, N = grid.M, grid.N
    ks = [a for a, _ in region]
    ls = [b for _, b in region]
    if max(ks) - min(ks) >= M or max(ls) - min(ls) >= N:
        raise ValueError("estimation region exceeds one period")
    y = LatticeArray.from_vec(grid, y_pilot)
    out = LatticeArray(grid, np.zeros((M, N)), True)
    k0, l0 = out.offsets()
    if min(ks) < k0 or max(ks) >= k0 + M or min(ls) < l0 or max(ls) >= l0 + N:
        raise ValueError("estimation region does not fit the centered tap window")
    taps = np.zeros((M, N), dtype=complex)
    dk = np.array(ks)
    dl = np.array(ls)
    vals = y.at(kp + dk, lp + dl) * np.exp(-2j * np.pi * np.mod(kp * dl, grid.MN) / grid.MN)
    taps[dk - k0, dl - l0] = vals
    return ChannelEstimate(LatticeArray(grid, taps, True), region, (kp, lp), pilot_snr_db)


def region_nmse(est: ChannelEstimate, truth: LatticeArray) -> float:
    """``||h_hat - h||^2 / ||h||^2`` over the estimation region."""
    truth = truth.recenter(True)
    k0, l0 = truth.offsets()
    idx = (np.array([a for a, _ in est.region]) - k0, np.array([b for _, b in est.region]) - l0)
    h = truth.taps[idx]
    e = est.taps_hat.taps[idx] - h
    den = float(np.sum(np.abs(h) ** 2))
    return float(np.sum(np.abs(e) ** 2) / den) if den > 0 else float("nan")


def io_nmse(est: ChannelEstimate, truth: LatticeArray) -> float:
    """``||h_hat - h||^2 / ||h||^2`` over the whole tap window (estimate is zero off the region)."""
    h = truth.recenter(True).taps
    den = float(np.sum(np.abs(h) ** 2))
    return float(np.sum(np.abs(est.taps_hat.taps - h) ** 2) / den) if den > 0 else float("nan")
