"""Pulse-shaping filters, their matched filters and localization diagnostics.

Every filter is stored as a centered :class:`DDSignal` holding one fundamental
domain, normalized to unit energy on the oversampled grid.  Analytic families
are evaluated in lattice units ``x = B*tau`` and ``y = T*nu``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Mapping

import numpy as np
from numpy.polynomial import legendre
from scipy.linalg import eigh, eigh_tridiagonal

from .ddcore import DDGrid, DDSignal, LatticeArray, twisted_conv_grid, zak_inverse

__all__ = [
    "FilterFamily",
    "Filter",
    "PswfSolution",
    "IotaWorkspace",
    "EsdReport",
    "IotaConditioningError",
    "PswfSolveError",
    "sinc_filter",
    "rrc_filter",
    "rrc_pulse",
    "gaussian_filter",
    "gaussian_sinc_filter",
    "pswf_solve",
    "pswf_filter",
    "lattice_carrier",
    "iota_workspace",
    "iota_orthogonalize",
    "iota_gram_deviation",
    "carrier_gram_deviation",
    "matched_filter",
    "composite_ambiguity",
    "esd_report",
    "make_filter",
]

GAUSSIAN_ALPHA = 1.584
GAUSSIAN_SINC_ALPHA = 0.044
GAUSSIAN_SINC_OMEGA = 1.0278
RRC_BETA = 0.6
PSWF_ORDER = 1024
CLAMP_REL = 1e-12
CLAMP_BUDGET = 0.01


class FilterFamily(str, enum.Enum):
    SINC = "sinc"
    RRC = "rrc"
    GAUSSIAN = "gaussian"
    GAUSSIAN_SINC = "gaussian-sinc"
    IOTA_GAUSSIAN = "iota-gaussian"
    IOTA_PSWF = "iota-pswf"


class IotaConditioningError(ArithmeticError):
    """The lattice Gram matrix is too close to singular to orthogonalize."""

    def __init__(self, message: str, report: Mapping):
        super().__init__(message)
        self.report = dict(report)


class PswfSolveError(ArithmeticError):
    """The prolate eigenproblem could not be solved to the required accuracy."""


@dataclass(frozen=True, eq=False)
class Filter:
    family: FilterFamily
    taps: DDSignal
    params: Mapping = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "family", FilterFamily(self.family))
        object.__setattr__(self, "params", MappingProxyType(dict(self.params)))

    @property
    def grid(self) -> DDGrid:
        return self.taps.grid

    @property
    def energy(self) -> float:
        return self.taps.energy

    @property
    def name(self) -> str:
        return self.family.value


def _lattice_coords(grid: DDGrid):
    x = grid.delay_indices(True) / grid.Q
    y = grid.doppler_indices(True) / grid.Q
    return x, y


def _unit_energy(grid: DDGrid, samples: np.ndarray) -> tuple[np.ndarray, float]:
    e = float(np.sum(np.abs(samples) ** 2) * grid.cell_area)
    if not e > 0:
        raise ValueError("filter has zero energy on this grid")
    return samples / np.sqrt(e), 1.0 / np.sqrt(e)


def _separable(grid, family, fx, fy, params) -> Filter:
    x, y = _lattice_coords(grid)
    raw = np.outer(fx(x), fy(y)) * np.sqrt(grid.B * grid.T)
    s, scale = _unit_energy(grid, raw)
    params = dict(params, normalization=scale)
    return Filter(family, DDSignal(grid, s, True), params)


def sinc_filter(grid: DDGrid) -> Filter:
    """``sinc(B tau) sinc(T nu)`` truncated to the centered domain."""
    return _separable(grid, FilterFamily.SINC, np.sinc, np.sinc, {})


def rrc_pulse(x, beta: float) -> np.ndarray:
    """Root-raised-cosine pulse in units of the symbol spacing.

    The removable singularities at ``x = 0`` and ``|x| = 1/(4 beta)`` are
    replaced by their limits within ``1e-6`` of the singular point.
    """
    if not 0.0 <= beta <= 1.0:
        raise ValueError(f"roll-off must lie in [0, 1], got {beta}")
    x = np.asarray(x, dtype=float)
    if beta == 0.0:
        return np.sinc(x)
    out = np.empty_like(x)
    near0 = np.abs(x) < 1e-6
    xs = 1.0 / (4.0 * beta)
    nears = np.abs(np.abs(x) - xs) < 1e-6
    reg = ~(near0 | nears)
    xr = x[reg]
    num = np.sin(np.pi * xr * (1 - beta)) + 4 * beta * xr * np.cos(np.pi * xr * (1 + beta))
    den = np.pi * xr * (1 - (4 * beta * xr) ** 2)
    out[reg] = num / den
    out[near0] = 1.0 + beta * (4.0 / np.pi - 1.0)
    a = np.pi / (4.0 * beta)
    out[nears] = beta / np.sqrt(2.0) * (
        (1 + 2 / np.pi) * np.sin(a) + (1 - 2 / np.pi) * np.cos(a)
    )
    return out


def rrc_filter(grid: DDGrid, beta_tau: float = RRC_BETA, beta_nu: float = RRC_BETA) -> Filter:
    for b in (beta_tau, beta_nu):
        if not 0.0 <= b <= 1.0:
            raise ValueError(f"roll-off must lie in [0, 1], got {b}")
    return _separable(
        grid,
        FilterFamily.RRC,
        lambda x: rrc_pulse(x, beta_tau),
        lambda y: rrc_pulse(y, beta_nu),
        {"beta_tau": beta_tau, "beta_nu": beta_nu},
    )


def gaussian_filter(
    grid: DDGrid, alpha_tau: float = GAUSSIAN_ALPHA, alpha_nu: float = GAUSSIAN_ALPHA
) -> Filter:
    if alpha_tau <= 0 or alpha_nu <= 0:
        raise ValueError("Gaussian widths must be positive")
    return _separable(
        grid,
        FilterFamily.GAUSSIAN,
        lambda x: np.exp(-alpha_tau * x**2),
        lambda y: np.exp(-alpha_nu * y**2),
        {"alpha_tau": alpha_tau, "alpha_nu": alpha_nu},
    )


def gaussian_sinc_filter(
    grid: DDGrid,
    alpha_tau: float = GAUSSIAN_SINC_ALPHA,
    alpha_nu: float = GAUSSIAN_SINC_ALPHA,
    omega_tau: float = GAUSSIAN_SINC_OMEGA,
    omega_nu: float = GAUSSIAN_SINC_OMEGA,
) -> Filter:
    if alpha_tau < 0 or alpha_nu < 0:
        raise ValueError("Gaussian widths must be non-negative")
    if omega_tau <= 0 or omega_nu <= 0:
        raise ValueError("omega scalings must be positive")
    return _separable(
        grid,
        FilterFamily.GAUSSIAN_SINC,
        lambda x: omega_tau * np.sinc(x) * np.exp(-alpha_tau * x**2),
        lambda y: omega_nu * np.sinc(y) * np.exp(-alpha_nu * y**2),
        {
            "alpha_tau": alpha_tau,
            "alpha_nu": alpha_nu,
            "omega_tau": omega_tau,
            "omega_nu": omega_nu,
        },
    )


# ---------------------------------------------------------------------------
# prolate spheroidal wave functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ProlateSolve:
    """Top prolate eigenfunction for kernel ``sinc(t - t')`` on ``[-c/2, c/2]``.

    Units are normalized so the bandwidth is 1; ``c`` is the time-bandwidth
    product.  ``coef`` are Legendre coefficients on ``[-1, 1]``.
    """

    c: float
    order: int
    nodes: np.ndarray
    psi_nodes: np.ndarray
    coef: np.ndarray
    eigenvalue: float
    residual: float
    separation: float
    scale: float

    def extend(self, t) -> np.ndarray:
        """``psi(t) = lambda^-1 int sinc(t - t') psi(t') dt'`` by the Nystrom rule."""
        t = np.asarray(t, dtype=float)
        h = self.c / self.order
        vals = np.sinc(t.reshape(-1, 1) - self.nodes[None, :]) @ self.psi_nodes
        return (vals * h / self.eigenvalue).reshape(t.shape)

    def legendre_eval(self, t) -> np.ndarray:
        return legendre.legval(2.0 * np.asarray(t, dtype=float) / self.c, self.coef) * self.scale


def _prolate_legendre(c: float):
    """Even Legendre expansion of the lowest prolate eigenfunction.

    The prolate differential operator commutes with the sinc integral operator
    and is tridiagonal in the even normalized Legendre basis; its spectrum is
    well separated even where the integral operator's is not.
    """
    gamma = np.pi * c / 2.0
    nterms = int(gamma) + 40
    k = np.arange(0, 2 * nterms, 2, dtype=float)
    diag = k * (k + 1) + gamma**2 * (2 * k * (k + 1) - 1) / ((2 * k + 3) * (2 * k - 1))
    kk = k[:-1]
    off = gamma**2 * (kk + 2) * (kk + 1) / ((2 * kk + 3) * np.sqrt((2 * kk + 1) * (2 * kk + 5)))
    chi, vec = eigh_tridiagonal(diag, off, select="i", select_range=(0, 1))
    if abs(vec[-1, 0]) > 1e-14:
        raise PswfSolveError("Legendre expansion did not converge")
    coef = np.zeros(2 * nterms)
    coef[::2] = vec[:, 0] * np.sqrt(k + 0.5)
    return coef, float(chi[1] - chi[0])


def pswf_solve(c: float, order: int = PSWF_ORDER) -> ProlateSolve:
    """Solve the sinc-kernel eigenproblem on ``[-c/2, c/2]`` with unit bandwidth.

    The eigenvector is selected by the commuting prolate operator (the integral
    operator's top eigenvalues coincide to machine precision for large ``c``);
    the eigenvalue, residual and extension use the uniform midpoint Nystrom rule
    with ``order`` nodes.
    """
    if order < 64:
        raise ValueError("quadrature order must be at least 64")
    coef, sep = _prolate_legendre(c)
    if not sep > 1e-6:
        raise PswfSolveError(f"top eigenvalue not separated (gap {sep:.3g})")
    h = c / order
    nodes = (np.arange(order) + 0.5) * h - c / 2
    psi = legendre.legval(2 * nodes / c, coef)
    scale = 1.0 / np.sqrt(np.sum(psi**2) * h)
    if legendre.legval(0.0, coef) < 0:
        scale = -scale
    psi = psi * scale
    A = h * np.sinc(nodes[:, None] - nodes[None, :])
    Ap = A @ psi
    lam = float(psi @ Ap / (psi @ psi))
    peak = np.abs(psi).max()
    # residual at the nodes and at points between them
    mids = nodes[:-1] + h / 2
    between = legendre.legval(2 * mids / c, coef) * scale
    Am = h * np.sinc(mids[:, None] - nodes[None, :]) @ psi
    resid = max(np.abs(Ap - lam * psi).max(), np.abs(Am - lam * between).max()) / peak
    if not (0.0 < lam <= 1.0 + 1e-12):
        raise PswfSolveError(f"eigenvalue {lam} outside (0, 1]")
    if resid > 1e-8:
        raise PswfSolveError(
            f"eigen-equation residual {resid:.3g} exceeds 1e-8; increase the quadrature order"
        )
    return ProlateSolve(c, order, nodes, psi, coef, min(lam, 1.0), float(resid), sep, scale)


@dataclass(frozen=True, eq=False)
class PswfSolution:
    psi_delay: np.ndarray
    psi_doppler: np.ndarray
    lambda_delay: float
    lambda_doppler: float
    quadrature_order: int
    residual_delay: float
    residual_doppler: float
    delay: ProlateSolve
    doppler: ProlateSolve


def pswf_filter(grid: DDGrid, quadrature_order: int = PSWF_ORDER) -> tuple[Filter, PswfSolution]:
    """Separable prolate prototype concentrated on one period in each axis.

    Delay factor: bandwidth ``B`` on ``[-tau_p/2, tau_p/2]`` (product ``M``).
    Doppler factor: bandwidth ``T`` on ``[-nu_p/2, nu_p/2]`` (product ``N``).
    """
    sd = pswf_solve(float(grid.M), quadrature_order)
    sn = pswf_solve(float(grid.N), quadrature_order)
    x, y = _lattice_coords(grid)
    # unit-norm in physical units: psi(tau) = sqrt(B) psi_hat(B tau)
    pd = sd.extend(x) * np.sqrt(grid.B)
    pn = sn.extend(y) * np.sqrt(grid.T)
    s, scale = _unit_energy(grid, np.outer(pd, pn))
    sol = PswfSolution(
        pd, pn, sd.eigenvalue, sn.eigenvalue, quadrature_order, sd.residual, sn.residual, sd, sn
    )
    params = {
        "stage": "prototype",
        "quadrature_order": quadrature_order,
        "lambda_delay": sd.eigenvalue,
        "lambda_doppler": sn.eigenvalue,
        "normalization": scale,
    }
    return Filter(FilterFamily.IOTA_PSWF, DDSignal(grid, s, True), params), sol


# ---------------------------------------------------------------------------
# lattice orthogonalization
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IotaWorkspace:
    G: np.ndarray
    R: np.ndarray
    R_inv_sqrt: np.ndarray
    eigenvalues: np.ndarray
    clamped: int
    shift_mode: str
    window: tuple[slice, slice]
    cell_area: float

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues.min())

    @property
    def condition(self) -> float:
        lo = self.eigenvalues.min()
        return float(self.eigenvalues.max() / lo) if lo > 0 else np.inf


def lattice_carrier(w: DDSignal, k0: int, l0: int) -> DDSignal:
    """``w *_sigma p`` for the pulsone ``p`` at ``(k0/B, l0/T)``.

    ``w`` is read as a finitely supported function on its centered window, so
    the result is the quasi-periodic carrier of the lattice point (uncentered).
    """
    g = w.grid
    w = w.recenter(True)
    K, L = g.K, g.L
    io, jo = g.delay_offset(True), g.doppler_offset(True)
    i = g.delay_indices(False)[:, None]
    j = g.doppler_indices(False)[None, :]
    n, ip = np.divmod(i - k0 * g.Q - io, K)
    jp = np.mod(j - l0 * g.Q - jo, L)
    ip = ip + io
    jp = jp + jo
    ph = np.mod(jp * (i - ip), K * L) / (K * L) + np.mod(n * (j - jp), L) / L
    vals = w.samples[ip - io, jp - jo] * np.exp(2j * np.pi * ph)
    return DDSignal(g, vals, False, w.extension)


def _shift_rows_torus(w: DDSignal) -> np.ndarray:
    g = w.grid
    rows = np.empty((g.MN, g.K * g.L), dtype=complex)
    for l0 in range(g.N):
        for k0 in range(g.M):
            rows[k0 + l0 * g.M] = lattice_carrier(w, k0, l0).samples.reshape(-1)
    return rows


def _shift_rows_linear(w: DDSignal) -> np.ndarray:
    g = w.grid
    K, L, Q = g.K, g.L, g.Q
    KE, LE = K + (g.M - 1) * Q, L + (g.N - 1) * Q
    i = np.arange(KE)[:, None] + g.delay_offset(True)
    j = np.arange(LE)[None, :] + g.doppler_offset(True)
    KL = K * L
    rows = np.zeros((g.MN, KE * LE), dtype=complex)
    for l0 in range(g.N):
        for k0 in range(g.M):
            buf = np.zeros((KE, LE), dtype=complex)
            di, dj = k0 * Q, l0 * Q
            ph = np.exp(2j * np.pi * np.mod((j[:, dj : dj + L] - dj) * di, KL) / KL)
            buf[di : di + K, dj : dj + L] = w.samples * ph
            rows[k0 + l0 * g.M] = buf.reshape(-1)
    return rows


def iota_workspace(prototype: Filter | DDSignal, shift_mode: str = "torus") -> IotaWorkspace:
    """Lattice-shift matrix ``G``, its Gram matrix and the inverse square root.

    Row ``k0 + l0*M`` of ``G`` is the prototype twisted-shifted to ``(k0/B, l0/T)``.
    ``shift_mode='torus'`` wraps shifts on the quasi-periodic domain;
    ``'linear'`` places them on an enlarged plane without wrapping.
    """
    w = prototype.taps if isinstance(prototype, Filter) else prototype
    w = w.recenter(True)
    g = w.grid
    if shift_mode == "torus":
        G = _shift_rows_torus(w)
        window = (slice(None), slice(None))
    elif shift_mode == "linear":
        G = _shift_rows_linear(w)
        window = (slice(0, g.K), slice(0, g.L))
    else:
        raise ValueError("shift_mode must be 'torus' or 'linear'")
    R = (G @ G.conj().T) * g.cell_area
    R = 0.5 * (R + R.conj().T)
    ev, V = eigh(R)
    floor = CLAMP_REL * ev.max()
    clamped = int(np.sum(ev < floor))
    inv = 1.0 / np.sqrt(np.maximum(ev, floor))
    Ris = (V * inv[None, :]) @ V.conj().T
    return IotaWorkspace(G, R, Ris, ev, clamped, shift_mode, window, g.cell_area)


def iota_orthogonalize(prototype: Filter, grid: DDGrid | None = None, shift_mode: str = "torus") -> Filter:
    """Orthogonalize a prototype against its own lattice shifts.

    Returns the zero-shift row of ``R^-1/2 G`` restricted to the centered
    window and renormalized to unit energy.
    """
    g = prototype.grid if grid is None else grid
    if g != prototype.grid:
        raise ValueError("prototype lives on a different grid")
    ws = iota_workspace(prototype, shift_mode)
    n = len(ws.eigenvalues)
    report = {
        "min_eigenvalue": float(ws.eigenvalues.min()),
        "max_eigenvalue": float(ws.eigenvalues.max()),
        "clamped": ws.clamped,
        "size": n,
    }
    if ws.clamped > CLAMP_BUDGET * n:
        raise IotaConditioningError(
            f"Gram matrix near singular: {ws.clamped} of {n} eigenvalues below "
            f"{CLAMP_REL:g} x max (min {report['min_eigenvalue']:.3g})",
            report,
        )
    row = ws.R_inv_sqrt[0] @ ws.G
    if shift_mode == "torus":
        taps = DDSignal(g, row.reshape(g.K, g.L), False).recenter(True).samples
    else:
        ext = row.reshape(g.K + (g.M - 1) * g.Q, g.L + (g.N - 1) * g.Q)
        taps = ext[ws.window]
    s, scale = _unit_energy(g, taps)
    if prototype.family in (FilterFamily.GAUSSIAN, FilterFamily.IOTA_GAUSSIAN):
        family = FilterFamily.IOTA_GAUSSIAN
    elif prototype.family == FilterFamily.IOTA_PSWF:
        family = FilterFamily.IOTA_PSWF
    else:
        family = prototype.family
    params = dict(prototype.params)
    params.update(
        stage="orthogonalized",
        shift_mode=shift_mode,
        clamped=ws.clamped,
        gram_min_eigenvalue=report["min_eigenvalue"],
        gram_max_eigenvalue=report["max_eigenvalue"],
        gram_deviation=iota_gram_deviation(ws),
        renormalization=scale,
    )
    return Filter(family, DDSignal(g, s, True), params)


def iota_gram_deviation(ws: IotaWorkspace) -> float:
    """``max |G~ G~^H - I|`` with ``G~ = R^-1/2 G`` (quadrature-weighted)."""
    Gt = ws.R_inv_sqrt @ ws.G
    Rt = (Gt @ Gt.conj().T) * ws.cell_area
    return float(np.abs(Rt - np.eye(Rt.shape[0])).max())


def carrier_gram_deviation(w: Filter, shift_mode: str = "torus") -> float:
    """``max |R - I|`` for the Gram matrix of ``w``'s own lattice carriers."""
    ws = iota_workspace(w, shift_mode)
    return float(np.abs(ws.R - np.eye(ws.R.shape[0])).max())


# ---------------------------------------------------------------------------
# matched filtering and diagnostics
# ---------------------------------------------------------------------------


def _matched_signal(w: DDSignal) -> DDSignal:
    g = w.grid
    w = w.recenter(True)
    i = g.delay_indices(True)[:, None]
    j = g.doppler_indices(True)[None, :]
    KL = g.K * g.L
    vals = np.exp(2j * np.pi * np.mod(i * j, KL) / KL) * np.conj(w.at(-i, -j))
    ext = "dual" if w.extension == "quasi" else "quasi"
    return DDSignal(g, vals, True, ext)


def matched_filter(w: Filter) -> Filter:
    """Receive filter ``exp(j2pi nu tau) conj(w(-tau, -nu))``.

    Reads outside the window follow the transmit filter's extension rule, so
    applying the map twice is the identity.
    """
    params = dict(w.params, matched=not w.params.get("matched", False))
    return Filter(w.family, _matched_signal(w.taps), params)


def composite_ambiguity(w: Filter) -> LatticeArray:
    """Lattice samples of ``matched(w) *_sigma w`` (centered M x N window)."""
    wt = _matched_signal(w.taps)
    g = twisted_conv_grid(wt, w.taps, centered=True)
    return g.lattice_samples(True)


def off_origin_peak(amb: LatticeArray) -> float:
    k0, l0 = amb.offsets()
    t = np.abs(amb.taps).copy()
    t[-k0, -l0] = 0.0
    return float(t.max())


@dataclass(frozen=True, eq=False)
class EsdReport:
    family: str
    frequency: np.ndarray
    frequency_density: np.ndarray
    time: np.ndarray
    time_density: np.ndarray
    in_band_fraction: float
    in_time_fraction: float
    sidelobe_delay: float
    sidelobe_doppler: float
    mainlobe_delay: float
    mainlobe_doppler: float
    delay_cut: np.ndarray
    doppler_cut: np.ndarray

    @property
    def sidelobe_peak(self) -> float:
        return max(self.sidelobe_delay, self.sidelobe_doppler)

    @property
    def out_of_band_fraction(self) -> float:
        return 1.0 - self.in_band_fraction


def _lobe_metrics(cut: np.ndarray, centre: int) -> tuple[float, float]:
    """Main-lobe half width (cells to the first minimum) and relative sidelobe peak.

    Both sides of the centre are scanned; the wider half width and the larger
    sidelobe are reported.  A cut without a minimum has its main lobe run to
    the window edge and no sidelobes.
    """
    mag = np.abs(cut)
    peak = mag[centre]
    widths, lobes = [], [0.0]
    for side in (mag[centre:], mag[centre::-1]):
        d = np.diff(side)
        rising = np.nonzero(d > 0)[0]
        if len(rising) == 0:
            widths.append(len(side) - 1)
            continue
        first_min = rising[0]
        widths.append(first_min)
        tail = side[first_min:]
        inner = (tail[1:-1] >= tail[:-2]) & (tail[1:-1] >= tail[2:])
        if inner.any():
            lobes.append(float(tail[1:-1][inner].max() / peak))
    return float(max(widths)), max(lobes)


def esd_report(w: Filter) -> EsdReport:
    """Energy spectral densities and localization of a filter.

    The time-domain realization is the inverse Zak transform of the filter's
    quasi-periodic extension (the carrier for the symbol at the origin).  It
    spans ``Q*T`` at rate ``B*Q`` and is centered on ``t = 0`` before the
    densities are taken.
    """
    g = w.grid
    x = zak_inverse(w.taps).samples
    n = len(x)
    fs = g.B * g.Q
    t = (np.arange(n) - n // 2) / fs
    xc = np.roll(x, n // 2)
    td = np.abs(xc) ** 2
    spectrum = np.fft.fftshift(np.fft.fft(x)) / fs
    f = np.fft.fftshift(np.fft.fftfreq(n, 1 / fs))
    fd = np.abs(spectrum) ** 2
    tol = 1e-9
    in_band = float(fd[np.abs(f) <= g.B / 2 * (1 + tol)].sum() / fd.sum())
    in_time = float(td[np.abs(t) <= g.T / 2 * (1 + tol)].sum() / td.sum())
    s = w.taps.recenter(True).samples
    ic, jc = g.K // 2, g.L // 2
    dcut, ncut = s[:, jc], s[ic, :]
    wd, sd = _lobe_metrics(dcut, ic)
    wn, sn = _lobe_metrics(ncut, jc)
    return EsdReport(
        w.name,
        f,
        fd,
        t,
        td,
        in_band,
        in_time,
        sd,
        sn,
        wd * g.delta_tau,
        wn * g.delta_nu,
        dcut,
        ncut,
    )


def make_filter(family: str | FilterFamily, grid: DDGrid, **params) -> Filter:
    """Construct any of the six families with defaults for missing parameters."""
    family = FilterFamily(family)
    if family == FilterFamily.SINC:
        return sinc_filter(grid)
    if family == FilterFamily.RRC:
        beta = params.get("beta", RRC_BETA)
        return rrc_filter(grid, params.get("beta_tau", beta), params.get("beta_nu", beta))
    if family == FilterFamily.GAUSSIAN:
        a = params.get("alpha", GAUSSIAN_ALPHA)
        return gaussian_filter(grid, params.get("alpha_tau", a), params.get("alpha_nu", a))
    if family == FilterFamily.GAUSSIAN_SINC:
        a = params.get("alpha", GAUSSIAN_SINC_ALPHA)
        o = params.get("omega", GAUSSIAN_SINC_OMEGA)
        return gaussian_sinc_filter(
            grid,
            params.get("alpha_tau", a),
            params.get("alpha_nu", a),
            params.get("omega_tau", o),
            params.get("omega_nu", o),
        )
    mode = params.get("shift_mode", "torus")
    if family == FilterFamily.IOTA_GAUSSIAN:
        a = params.get("alpha", GAUSSIAN_ALPHA)
        proto = gaussian_filter(grid, params.get("alpha_tau", a), params.get("alpha_nu", a))
        return iota_orthogonalize(proto, grid, mode)
    proto, _ = pswf_filter(grid, params.get("quadrature_order", PSWF_ORDER))
    return iota_orthogonalize(proto, grid, mode)
