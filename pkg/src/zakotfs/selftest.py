"""Small-instance oracle suite behind ``zakotfs selftest``."""

from __future__ import annotations

import sys

import numpy as np
from scipy.stats import norm

from .channel import IOMatrix, build_H
from .ddcore import (
    DDSignal,
    LatticeArray,
    make_grid,
    twisted_conv_grid,
    twisted_conv_lattice,
    twisted_conv_lattice_bruteforce,
    zak_forward,
    zak_inverse,
)
from .filters import gaussian_filter, iota_orthogonalize
from .txrx import NoiseModel, mmse_detect, qam_demap, random_frame, transmit

RATIO_TOL = 0.25
SMALL_GRIDS = [(M, N) for M in range(1, 17) for N in range(1, 17) if M * N <= 16]


def _finite(arr: LatticeArray):
    k0, l0 = arr.offsets()
    M, N = arr.taps.shape

    def f(k, l):
        kk, ll = k - k0, l - l0
        return arr.taps[kk, ll] if 0 <= kk < M and 0 <= ll < N else 0j

    return f


def check_associativity(conv=twisted_conv_lattice, trials: int = 3, seed: int = 0) -> float:
    """Worst ``|(a*b)*c - a*(b*c)|`` over small grids.

    ``a`` and ``b`` are finitely supported close enough to the origin that
    ``a*b`` fits the window; ``c`` is read quasi-periodically.  A triple-loop
    oracle over Z^2 must also agree with ``conv(a, b)``.
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for M, N in SMALL_GRIDS:
        g = make_grid(M, N, 1.0, 1)
        ks = np.arange(-(M // 2), M - M // 2)
        ls = np.arange(-(N // 2), N - N // 2)
        # half-range supports so the finite product stays in the window
        kin = (ks >= -((M // 2) // 2)) & (ks <= (M - 1 - M // 2) // 2)
        lin = (ls >= -((N // 2) // 2)) & (ls <= (N - 1 - N // 2) // 2)
        mask = kin[:, None] & lin[None, :]
        for _ in range(trials):
            a, b = (
                LatticeArray(g, np.where(mask, rng.normal(size=(M, N)) + 1j * rng.normal(size=(M, N)), 0), True)
                for _ in range(2)
            )
            c = LatticeArray(g, rng.normal(size=(M, N)) + 1j * rng.normal(size=(M, N)), False)
            sa, sb = a.support(), b.support()
            ab = conv(a, b, sb, support_a=sa)
            bc = conv(b, c, None, support_a=sb)
            left = conv(ab, c, None, support_a=ab.support()).recenter(False)
            right = conv(a, bc, None, support_a=sa).recenter(False)
            worst = max(worst, float(np.abs(left.taps - right.taps).max()))
            fa, fb = _finite(a), _finite(b)
            box_k = range(ks[0], ks[-1] + 1)
            box_l = range(ls[0], ls[-1] + 1)
            pts = [(k, l) for k in box_k for l in box_l]
            ref = twisted_conv_lattice_bruteforce(fa, fb, M, N, box_k, box_l, pts)
            for (k, l), v in ref.items():
                worst = max(worst, abs(v - ab.taps[k - ks[0], l - ls[0]]))
    return worst


def check_io_equivalence(pairs: int = 100, seed: int = 1) -> float:
    """``|H vec(x) - vec(h *_sigma x)|`` over all grids with ``M*N <= 16``."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for M, N in SMALL_GRIDS:
        g = make_grid(M, N, 1.0, 1)
        for _ in range(pairs):
            h = LatticeArray(g, rng.normal(size=(M, N)) + 1j * rng.normal(size=(M, N)), True)
            x = LatticeArray(g, rng.normal(size=(M, N)) + 1j * rng.normal(size=(M, N)), False)
            y = twisted_conv_lattice(h, x, support_a=h.support()).recenter(False)
            worst = max(worst, float(np.abs(build_H(h, 0.0).H @ x.vec() - y.vec()).max()))
    return worst


def check_gram(M: int = 5, N: int = 4, Q: int = 4) -> float:
    g = make_grid(M, N, 1e3, Q)
    w = iota_orthogonalize(gaussian_filter(g))
    return float(w.params["gram_deviation"])


def check_zak(seed: int = 2) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for M, N, Q in [(4, 3, 2), (5, 4, 3), (17, 19, 2)]:
        g = make_grid(M, N, 1e3, Q)
        a = DDSignal(g, rng.normal(size=(g.K, g.L)) + 1j * rng.normal(size=(g.K, g.L)), False)
        worst = max(worst, float(np.abs(zak_forward(zak_inverse(a), g).samples - a.samples).max()))
    return worst


def check_awgn(seed: int = 3, nbits: int = 100_000) -> list[tuple[float, float, float]]:
    """(snr_db, measured BER, z-score against Q(sqrt(snr))) for an identity channel."""
    rng = np.random.default_rng(seed)
    g = make_grid(17, 19, 30e3, 1)
    I = IOMatrix(np.eye(g.MN, dtype=complex), g)
    out = []
    for snr in (0.0, 4.0, 8.0):
        nm = NoiseModel.from_snr_db(snr)
        err = n = 0
        while n < nbits:
            fr = random_frame(rng, g)
            b = qam_demap(mmse_detect(I, transmit(I, fr, nm, rng), nm.variance))
            err += int(np.count_nonzero(b != fr.bits))
            n += b.size
        p = norm.sf(np.sqrt(10 ** (snr / 10)))
        out.append((snr, err / n, (err / n - p) / np.sqrt(p * (1 - p) / n)))
    return out


def _gauss(g):
    x = g.delay_indices(True)[:, None] / g.Q
    y = g.doppler_indices(True)[None, :] / g.Q
    return DDSignal(g, np.exp(-1.584 * (x**2 + y**2)) * np.sqrt(g.B * g.T), True)


def check_quadrature(Q: int) -> tuple[float, float]:
    """Change of lattice samples of a Gaussian twisted self-convolution when ``Q`` doubles.

    Returns ``(change Q -> 2Q, change 2Q -> 4Q)``.
    """
    vals = []
    for q in (Q, 2 * Q, 4 * Q):
        g = make_grid(5, 4, 1e3, q)
        a = _gauss(g)
        vals.append(twisted_conv_grid(a, a, centered=True).lattice_samples(True).taps)
    return float(np.abs(vals[0] - vals[1]).max()), float(np.abs(vals[1] - vals[2]).max())


def run_selftest(Q: int = 8, seed: int = 0, out=None, conv=twisted_conv_lattice) -> bool:
    out = out or sys.stdout
    results = []

    def report(name, ok, detail):
        results.append(ok)
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}", file=out)

    e = check_associativity(conv, seed=seed)
    report("twisted-convolution associativity", e <= 1e-12, f"max error {e:.2e}")
    e = check_io_equivalence(pairs=20, seed=seed + 1)
    report("lattice convolution vs I/O matrix", e <= 1e-10, f"max error {e:.2e}")
    e = check_gram()
    report("orthogonalized Gram identity", e <= 1e-8, f"max |R - I| {e:.2e}")
    e = check_zak(seed + 2)
    report("Zak round trip", e <= 1e-10, f"max error {e:.2e}")
    rows = check_awgn(seed + 3)
    ok = all(abs(z) <= 3 for _, _, z in rows)
    report("AWGN 4-QAM BER", ok, "; ".join(f"{s:g} dB: {b:.4f} (z={z:+.2f})" for s, b, z in rows))
    d1, d2 = check_quadrature(Q)
    ratio = d1 / d2 if d2 > 0 else float("inf")
    # rectangle rule is second order: each doubling should cut the change by 4
    ok = abs(ratio - 4.0) <= RATIO_TOL
    detail = f"change at Q={Q}: {d1:.2e}, at Q={2 * Q}: {d2:.2e}, ratio {ratio:.2f}, est. error {d1 * 4 / 3:.1e}"
    report("quadrature convergence", ok, detail + ("" if ok else " (reduced accuracy)"))
    return all(results)
