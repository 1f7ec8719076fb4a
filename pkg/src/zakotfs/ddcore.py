"""Delay-Doppler geometry, quasi-periodic signals, twisted convolution and the Zak pair.

Continuous delay-Doppler functions are represented on a ``Q``-times oversampled
fundamental domain of ``K = M*Q`` delay cells and ``L = N*Q`` Doppler cells.
Every stored signal is one period of a quasi-periodic function::

    a(tau + n*tau_p, nu + m*nu_p) = exp(j*2*pi*n*nu*tau_p) * a(tau, nu)

On the cell grid the phase is ``exp(j*2*pi*n*j/L)`` for Doppler cell ``j``,
because ``delta_nu * tau_p = 1/L``.  Cell indices used throughout are absolute
(signed) integers ``(i, j)`` with ``tau = i*delta_tau`` and ``nu = j*delta_nu``.
A centered signal stores absolute indices ``-K//2 .. K - K//2 - 1``; an
uncentered one stores ``0 .. K-1`` (same along Doppler).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "DDGrid",
    "DDSignal",
    "LatticeArray",
    "TimeSignal",
    "make_grid",
    "twisted_conv_lattice",
    "twisted_conv_lattice_bruteforce",
    "twisted_conv_grid",
    "twisted_conv_grid_bruteforce",
    "shift_with_phase",
    "grid_delta",
    "pulsone",
    "zak_inverse",
    "zak_forward",
]


class GridMismatchError(ValueError):
    """Raised when operands live on different grids."""


@dataclass(frozen=True)
class DDGrid:
    """Lattice and oversampled-grid geometry.

    Only ``(M, N, nu_p, Q)`` are stored; everything else is derived.
    """

    M: int
    N: int
    nu_p: float
    Q: int = 8

    def __post_init__(self):
        for name in ("M", "N", "Q"):
            v = getattr(self, name)
            if int(v) != v or v <= 0:
                raise ValueError(f"{name} must be a positive integer, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not np.isfinite(self.nu_p) or self.nu_p <= 0:
            raise ValueError(f"nu_p must be positive, got {self.nu_p!r}")
        object.__setattr__(self, "nu_p", float(self.nu_p))

    @property
    def tau_p(self) -> float:
        return 1.0 / self.nu_p

    @property
    def B(self) -> float:
        return self.M * self.nu_p

    @property
    def T(self) -> float:
        return self.N * self.tau_p

    @property
    def delta_tau(self) -> float:
        return 1.0 / (self.B * self.Q)

    @property
    def delta_nu(self) -> float:
        return 1.0 / (self.T * self.Q)

    @property
    def K(self) -> int:
        """Oversampled delay cells per period."""
        return self.M * self.Q

    @property
    def L(self) -> int:
        """Oversampled Doppler cells per period."""
        return self.N * self.Q

    @property
    def MN(self) -> int:
        return self.M * self.N

    @property
    def cell_area(self) -> float:
        return self.delta_tau * self.delta_nu

    def delay_offset(self, centered: bool) -> int:
        return -(self.K // 2) if centered else 0

    def doppler_offset(self, centered: bool) -> int:
        return -(self.L // 2) if centered else 0

    def delay_indices(self, centered: bool) -> np.ndarray:
        return np.arange(self.K) + self.delay_offset(centered)

    def doppler_indices(self, centered: bool) -> np.ndarray:
        return np.arange(self.L) + self.doppler_offset(centered)

    def delay_axis(self, centered: bool) -> np.ndarray:
        return self.delay_indices(centered) * self.delta_tau

    def doppler_axis(self, centered: bool) -> np.ndarray:
        return self.doppler_indices(centered) * self.delta_nu

    def lattice_delay_indices(self, centered: bool) -> np.ndarray:
        return np.arange(self.M) - (self.M // 2 if centered else 0)

    def lattice_doppler_indices(self, centered: bool) -> np.ndarray:
        return np.arange(self.N) - (self.N // 2 if centered else 0)


def make_grid(M: int, N: int, nu_p: float, Q: int = 8) -> DDGrid:
    """Build a grid from the lattice size, Doppler period and oversampling."""
    return DDGrid(M, N, nu_p, Q)


def _check_same_grid(*grids: DDGrid) -> None:
    g0 = grids[0]
    for g in grids[1:]:
        if g != g0:
            raise GridMismatchError(f"grid mismatch: {g0} vs {g}")


@dataclass(frozen=True, eq=False)
class DDSignal:
    """One fundamental domain of a quasi-periodic delay-Doppler function.

    ``samples[i, j]`` is the value at absolute cell
    ``(i + delay_offset, j + doppler_offset)``.

    ``extension`` selects how values outside the window are read.  ``"quasi"``
    is the usual rule (periodic in Doppler, phase ``exp(j2pi n nu tau_p)`` per
    delay period).  ``"dual"`` is the rule obeyed by receive filters
    ``exp(j2pi nu tau) conj(w(-tau, -nu))``: periodic in delay, phase
    ``exp(j2pi m nu_p tau)`` per Doppler period.
    """

    grid: DDGrid
    samples: np.ndarray
    centered: bool = False
    extension: str = "quasi"

    def __post_init__(self):
        s = np.array(self.samples, dtype=complex)
        if s.shape != (self.grid.K, self.grid.L):
            raise ValueError(
                f"samples must have shape {(self.grid.K, self.grid.L)}, got {s.shape}"
            )
        s.setflags(write=False)
        object.__setattr__(self, "samples", s)
        if self.extension not in ("quasi", "dual"):
            raise ValueError(f"unknown extension rule {self.extension!r}")

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) * self.grid.cell_area)

    def at(self, i, j) -> np.ndarray:
        """Evaluate at absolute cell indices using the extension rule."""
        g = self.grid
        i = np.asarray(i)
        j = np.asarray(j)
        ri = i - g.delay_offset(self.centered)
        rj = j - g.doppler_offset(self.centered)
        n, ii = np.divmod(ri, g.K)
        m, jj = np.divmod(rj, g.L)
        # phases use the cell of the evaluation point (period-invariant)
        if self.extension == "quasi":
            phase = np.exp(2j * np.pi * ((n * j) % g.L) / g.L)
        else:
            phase = np.exp(2j * np.pi * ((m * i) % g.K) / g.K)
        return self.samples[ii, jj] * phase

    def recenter(self, centered: bool) -> "DDSignal":
        if centered == self.centered:
            return self
        g = self.grid
        i = g.delay_indices(centered)[:, None]
        j = g.doppler_indices(centered)[None, :]
        return DDSignal(g, self.at(i, j), centered, self.extension)

    def lattice_samples(self, centered: bool | None = None) -> "LatticeArray":
        """Sample at the information lattice points (k/B, l/T)."""
        centered = self.centered if centered is None else centered
        g = self.grid
        k = g.lattice_delay_indices(centered)[:, None]
        l = g.lattice_doppler_indices(centered)[None, :]
        return LatticeArray(g, self.at(k * g.Q, l * g.Q), centered)

    def scaled(self, c: complex) -> "DDSignal":
        return DDSignal(self.grid, self.samples * c, self.centered, self.extension)

    def __add__(self, other: "DDSignal") -> "DDSignal":
        _check_same_grid(self.grid, other.grid)
        if other.extension != self.extension:
            raise ValueError("cannot add signals with different extension rules")
        other = other.recenter(self.centered)
        return DDSignal(self.grid, self.samples + other.samples, self.centered, self.extension)


@dataclass(frozen=True, eq=False)
class LatticeArray:
    """Samples on the information lattice, ``taps[k, l]`` at ``(k/B, l/T)``.

    Centered arrays hold lattice indices ``-M//2 .. M - M//2 - 1`` and are used
    for finitely supported quantities (effective channels); uncentered arrays
    hold ``0 .. M-1`` and are used for frames.
    """

    grid: DDGrid
    taps: np.ndarray
    centered: bool = False

    def __post_init__(self):
        t = np.array(self.taps, dtype=complex)
        if t.shape != (self.grid.M, self.grid.N):
            raise ValueError(f"taps must have shape {(self.grid.M, self.grid.N)}, got {t.shape}")
        t.setflags(write=False)
        object.__setattr__(self, "taps", t)

    def offsets(self) -> tuple[int, int]:
        if self.centered:
            return -(self.grid.M // 2), -(self.grid.N // 2)
        return 0, 0

    def at(self, k, l) -> np.ndarray:
        """Quasi-periodic read: ``x[k + nM, l + mN] = exp(j2pi n l / N) x[k, l]``."""
        g = self.grid
        k = np.asarray(k)
        l = np.asarray(l)
        k0, l0 = self.offsets()
        n, kk = np.divmod(k - k0, g.M)
        ll = np.mod(l - l0, g.N)
        return self.taps[kk, ll] * np.exp(2j * np.pi * ((n * l) % g.N) / g.N)

    def value(self, k: int, l: int) -> complex:
        """Finite-support read: zero outside the stored window."""
        k0, l0 = self.offsets()
        kk, ll = k - k0, l - l0
        if 0 <= kk < self.grid.M and 0 <= ll < self.grid.N:
            return complex(self.taps[kk, ll])
        return 0j

    def support(self, rel_threshold: float = 0.0) -> list[tuple[int, int]]:
        """Absolute indices of taps with ``|tap| > rel_threshold * max|tap|``."""
        mag = np.abs(self.taps)
        peak = mag.max() if mag.size else 0.0
        if peak == 0:
            return []
        k0, l0 = self.offsets()
        kk, ll = np.nonzero(mag > rel_threshold * peak)
        return [(int(a + k0), int(b + l0)) for a, b in zip(kk, ll)]

    def recenter(self, centered: bool) -> "LatticeArray":
        if centered == self.centered:
            return self
        g = self.grid
        k = g.lattice_delay_indices(centered)[:, None]
        l = g.lattice_doppler_indices(centered)[None, :]
        return LatticeArray(g, self.at(k, l), centered)

    def vec(self) -> np.ndarray:
        """Vectorize as ``x[k + l*M]`` over the uncentered index range."""
        return self.recenter(False).taps.reshape(-1, order="F")

    @classmethod
    def from_vec(cls, grid: DDGrid, v: np.ndarray) -> "LatticeArray":
        return cls(grid, np.asarray(v).reshape(grid.M, grid.N, order="F"), False)

    @classmethod
    def delta(cls, grid: DDGrid, k: int = 0, l: int = 0, centered: bool = True, value: complex = 1.0):
        arr = cls(grid, np.zeros((grid.M, grid.N)), centered)
        k0, l0 = arr.offsets()
        taps = np.zeros((grid.M, grid.N), dtype=complex)
        taps[k - k0, l - l0] = value
        return cls(grid, taps, centered)


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Discrete time-domain realization; ``samples[n]`` at ``t0 + n / sample_rate``."""

    sample_rate: float
    samples: np.ndarray
    t0: float = 0.0

    @property
    def energy(self) -> float:
        return float(np.sum(np.abs(self.samples) ** 2) / self.sample_rate)


# ---------------------------------------------------------------------------
# discrete twisted convolution on the lattice
# ---------------------------------------------------------------------------


def _support_list(arr: LatticeArray, support: Iterable[tuple[int, int]] | None):
    if support is None:
        return None
    return [(int(k), int(l)) for k, l in support]


def twisted_conv_lattice(
    a: LatticeArray,
    b: LatticeArray,
    support_b: Iterable[tuple[int, int]] | None = None,
    *,
    support_a: Iterable[tuple[int, int]] | None = None,
) -> LatticeArray:
    """Discrete twisted convolution ``c = a *_sigma b``.

    ``c[k,l] = sum_{k',l'} a[k-k', l-l'] b[k', l'] exp(j2pi k'(l-l')/(MN))``.

    At least one operand must be finitely supported; its support is the set of
    absolute lattice indices where it is read with :meth:`LatticeArray.value`
    (zero elsewhere).  An operand without a declared support is read
    quasi-periodically.  When both supports are declared the result is the
    plain sum over Z^2 and must fit in ``a``'s storage window.
    """
    _check_same_grid(a.grid, b.grid)
    g = a.grid
    sa = _support_list(a, support_a)
    sb = _support_list(b, support_b)
    if sa is None and sb is None:
        raise ValueError("at least one operand needs a finite support")
    MN = g.MN

    if sa is not None and sb is not None:
        out = np.zeros((g.M, g.N), dtype=complex)
        k0, l0 = -(g.M // 2), -(g.N // 2)
        for p, q in sa:
            av = a.value(p, q)
            for kp, lp in sb:
                k, l = p + kp, q + lp
                kk, ll = k - k0, l - l0
                if not (0 <= kk < g.M and 0 <= ll < g.N):
                    raise ValueError("finite-by-finite result exceeds the storage window")
                out[kk, ll] += av * b.value(kp, lp) * np.exp(2j * np.pi * kp * (l - lp) / MN)
        return LatticeArray(g, out, True)

    out_centered = b.centered if sb is None else a.centered
    k = g.lattice_delay_indices(out_centered)[:, None]
    l = g.lattice_doppler_indices(out_centered)[None, :]
    out = np.zeros((g.M, g.N), dtype=complex)
    if sb is not None:
        for kp, lp in sb:
            bv = b.value(kp, lp)
            if bv == 0:
                continue
            out += a.at(k - kp, l - lp) * bv * np.exp(2j * np.pi * ((kp * (l - lp)) % MN) / MN)
    else:
        for p, q in sa:
            av = a.value(p, q)
            if av == 0:
                continue
            out += av * b.at(k - p, l - q) * np.exp(2j * np.pi * (((k - p) * q) % MN) / MN)
    return LatticeArray(g, out, out_centered)


def twisted_conv_lattice_bruteforce(a_fn, b_fn, M: int, N: int, k_range, l_range, out_idx):
    """Reference triple loop over a finite index box; used as a test oracle.

    ``a_fn(k, l)`` and ``b_fn(k, l)`` evaluate the operands anywhere on Z^2.
    """
    out = {}
    for k, l in out_idx:
        acc = 0j
        for kp in k_range:
            for lp in l_range:
                bv = b_fn(kp, lp)
                if bv == 0:
                    continue
                acc += a_fn(k - kp, l - lp) * bv * np.exp(2j * np.pi * kp * (l - lp) / (M * N))
        out[(k, l)] = acc
    return out


# ---------------------------------------------------------------------------
# continuous twisted convolution by Riemann quadrature on the oversampled grid
# ---------------------------------------------------------------------------


def twisted_conv_grid(a: DDSignal, b: DDSignal, centered: bool | None = None) -> DDSignal:
    """Quadrature of ``(a *_sigma b)(tau, nu)``.

    The sum runs over the stored cells of ``a`` (``a`` acts as a finitely
    supported function on its storage window) and reads ``b`` with the
    quasi-periodic rule, so the result is quasi-periodic.  The output is stored
    with ``b``'s centering unless ``centered`` is given.

    Internally the Doppler sum is a circular convolution evaluated with FFTs,
    one pass per delay cell of ``a``.
    """
    _check_same_grid(a.grid, b.grid)
    g = a.grid
    K, L = g.K, g.L
    KL = K * L
    out_c = b.centered if centered is None else centered
    ia = g.delay_indices(a.centered)
    ja = g.doppler_indices(a.centered)
    io = g.delay_indices(out_c)
    jo = g.doppler_indices(out_c)

    # rows of b needed: d = io - ia' over all pairs
    dmin = io[0] - ia[-1]
    drange = np.arange(dmin, io[-1] - ia[0] + 1)
    jres = np.arange(L)
    b_rows = b.at(drange[:, None], jres[None, :])
    b_hat = np.fft.fft(b_rows, axis=1)

    # Doppler residues of a's absolute indices for placement into the FFT
    ja_res = np.mod(ja, L)
    acc = np.zeros((K, L), dtype=complex)
    for p, ip in enumerate(ia):
        row = a.samples[p]
        if not np.any(row):
            continue
        d = io - ip  # b delay index for every output row
        # alpha[i, u] = a[ip, u] * omega^(u * d_i), omega = exp(j2pi/KL)
        alpha = np.zeros((K, L), dtype=complex)
        alpha[:, ja_res] = row[None, :] * np.exp(
            2j * np.pi * (np.mod(np.outer(d, ja), KL)) / KL
        )
        acc += np.fft.fft(alpha, axis=1) * b_hat[d - dmin]
    c_res = np.fft.ifft(acc, axis=1)  # indexed by Doppler residue
    c = c_res[:, np.mod(jo, L)] * g.cell_area
    return DDSignal(g, c, out_c)


def twisted_conv_grid_bruteforce(a: DDSignal, b: DDSignal, out_cells) -> dict:
    """Direct double sum at selected absolute output cells (test oracle)."""
    g = a.grid
    ia = g.delay_indices(a.centered)
    ja = g.doppler_indices(a.centered)
    II, JJ = np.meshgrid(ia, ja, indexing="ij")
    res = {}
    for i, j in out_cells:
        vals = b.at(i - II, j - JJ)
        phase = np.exp(2j * np.pi * JJ * (i - II) * g.delta_nu * g.delta_tau)
        res[(i, j)] = complex(np.sum(a.samples * vals * phase) * g.cell_area)
    return res


def _to_cells(grid: DDGrid, tau: float, nu: float) -> tuple[int, int]:
    return int(np.round(tau / grid.delta_tau)), int(np.round(nu / grid.delta_nu))


def shift_with_phase(
    a: DDSignal, tau_i: float, nu_i: float, side: str = "left", gain: complex = 1.0
) -> DDSignal:
    """Closed form of a twisted convolution with ``gain * delta(tau-tau_i) delta(nu-nu_i)``.

    ``side='left'`` gives ``delta *_sigma a`` and ``side='right'`` gives
    ``a *_sigma delta``.  Off-grid shifts are rounded to the nearest cell.
    """
    g = a.grid
    di, dj = _to_cells(g, tau_i, nu_i)
    i = g.delay_indices(a.centered)[:, None]
    j = g.doppler_indices(a.centered)[None, :]
    KL = g.K * g.L
    vals = a.at(i - di, j - dj)
    if side == "left":
        ph = np.mod(dj * (i - di), KL)
    elif side == "right":
        ph = np.mod((j - dj) * di, KL)
    else:
        raise ValueError("side must be 'left' or 'right'")
    return DDSignal(g, gain * vals * np.exp(2j * np.pi * ph / KL), a.centered, a.extension)


def grid_delta(grid: DDGrid, i: int = 0, j: int = 0, centered: bool = False) -> DDSignal:
    """Single-cell approximation of ``delta(tau - i dtau) delta(nu - j dnu)`` (mass 1)."""
    s = np.zeros((grid.K, grid.L), dtype=complex)
    s[i - grid.delay_offset(centered), j - grid.doppler_offset(centered)] = 1.0 / grid.cell_area
    return DDSignal(grid, s, centered)


def pulsone(grid: DDGrid, k0: int = 0, l0: int = 0) -> DDSignal:
    """Discrete pulsone at lattice point ``(k0/B, l0/T)`` on the uncentered domain."""
    return grid_delta(grid, k0 * grid.Q, l0 * grid.Q, centered=False)


# ---------------------------------------------------------------------------
# Zak transform pair
# ---------------------------------------------------------------------------


def zak_inverse(a: DDSignal) -> TimeSignal:
    """Time-domain realization ``x(t) = sqrt(tau_p) * int_0^nu_p a(t, nu) dnu``.

    The result has ``K*L`` samples at rate ``B*Q`` starting at ``t = 0``; it is
    one period of the periodic discrete signal defined by ``a``.
    """
    g = a.grid
    u = a.recenter(False).samples
    # x[i + nK] = sqrt(tau_p) dnu sum_j a[i, j] exp(j2pi n j / L)
    x = np.fft.ifft(u, axis=1) * g.L * g.delta_nu * np.sqrt(g.tau_p)
    return TimeSignal(g.B * g.Q, x.T.reshape(-1), 0.0)


def zak_forward(x: TimeSignal, grid: DDGrid, centered: bool = False) -> DDSignal:
    """Discrete Zak transform ``a(tau, nu) = sqrt(tau_p) sum_n x(tau + n tau_p) e^{-j2pi n nu tau_p}``."""
    g = grid
    xs = np.asarray(x.samples, dtype=complex)
    if xs.shape != (g.K * g.L,):
        raise ValueError(f"time signal must have {g.K * g.L} samples, got {xs.shape}")
    if not np.isclose(x.sample_rate, g.B * g.Q, rtol=1e-12):
        raise ValueError("sample rate does not match grid")
    if x.t0 != 0.0:
        raise ValueError("zak_forward expects t0 = 0")
    blocks = xs.reshape(g.L, g.K).T  # blocks[i, n] = x[i + nK]
    a = np.fft.fft(blocks, axis=1) * np.sqrt(g.tau_p)
    return DDSignal(g, a, False).recenter(centered)
