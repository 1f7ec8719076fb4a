import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zakotfs.channel import (
    SUPPORT_THRESHOLD,
    VEH_A_DELAYS,
    EffectiveChannel,
    EffectiveChannelTable,
    PhysicalChannel,
    build_H,
    draw_veh_a,
    effective_channel,
    write_channel_csv,
    write_effective_csv,
)
from zakotfs.ddcore import LatticeArray, make_grid, twisted_conv_lattice
from zakotfs.filters import composite_ambiguity, make_filter

FIG = make_grid(17, 19, 30e3, 8)


@pytest.fixture(scope="module")
def iota():
    return make_filter("iota-gaussian", FIG)


@pytest.fixture(scope="module")
def sinc():
    return make_filter("sinc", FIG)


# --- Veh-A draws ----------------------------------------------------------------------


def test_veh_a_profile():
    ch = draw_veh_a(np.random.default_rng(0), 815.0, FIG)
    assert ch.P == 6
    assert ch.delays[2] == pytest.approx(0.71e-6)
    p = np.abs(ch.gains) ** 2
    assert 10 * np.log10(p[2] / p[0]) == pytest.approx(-9.0)
    ch.check(FIG)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**63), nu_max=st.floats(0.0, 14e3))
def test_veh_a_bounds(seed, nu_max):
    ch = draw_veh_a(np.random.default_rng(seed), nu_max, FIG)
    assert np.all(np.abs(ch.dopplers) <= nu_max)
    assert ch.power == pytest.approx(1.0, abs=1e-12)


def test_veh_a_deterministic():
    a = draw_veh_a(np.random.default_rng(42), 815.0, FIG)
    b = draw_veh_a(np.random.default_rng(42), 815.0, FIG)
    for x, y in zip((a.gains, a.delays, a.dopplers), (b.gains, b.delays, b.dopplers)):
        np.testing.assert_array_equal(x, y)


def test_veh_a_rejects_aliasing():
    with pytest.raises(ValueError):
        draw_veh_a(np.random.default_rng(0), 15e3, FIG)


def test_physical_channel_validation():
    with pytest.raises(ValueError):
        PhysicalChannel([1.0, 0.0], [0.0], [0.0])
    with pytest.raises(ValueError):
        PhysicalChannel([], [], [])
    with pytest.raises(ValueError):
        PhysicalChannel([0.5], [0.0], [0.0]).check(FIG)
    with pytest.raises(ValueError):
        PhysicalChannel([1.0], [FIG.tau_p], [0.0]).check(FIG)
    with pytest.raises(ValueError):
        PhysicalChannel([1.0], [0.0], [FIG.nu_p / 2]).check(FIG)


# --- effective channel ---------------------------------------------------------------


def test_identity_channel_is_ambiguity(iota):
    eff = effective_channel(iota, PhysicalChannel.identity())
    np.testing.assert_allclose(eff.taps.taps, composite_ambiguity(iota).taps, atol=1e-12)
    np.testing.assert_allclose(eff.h_grid.lattice_samples(True).taps, eff.taps.taps, atol=0)


def test_identity_collapse_orthogonal(iota):
    H = build_H(effective_channel(iota, PhysicalChannel.identity())).H
    assert np.abs(H - np.eye(FIG.MN)).max() <= 1e-6


@pytest.mark.parametrize("k0,l0", [(2, 0), (3, -1), (0, 2)])
def test_lattice_path_gives_delta(iota, k0, l0):
    # frozen: off-target leak is 1.1e-4 at this grid for every Q (torus truncation)
    ch = PhysicalChannel([1.0], [k0 / FIG.B], [l0 / FIG.T])
    eff = effective_channel(iota, ch)
    v = eff.taps.value(k0, l0)
    assert abs(v) == pytest.approx(1.0, abs=5e-4)
    assert abs(np.angle(v)) <= 1e-5
    t = np.abs(eff.taps.taps)
    t[k0 + FIG.M // 2, l0 + FIG.N // 2] = 0
    assert t.max() <= 3e-4


@pytest.mark.xfail(strict=True, reason="torus truncation leaks 1.1e-4 off-target for IOTA-Gaussian")
def test_lattice_path_delta_iota_strict(iota):
    eff = effective_channel(iota, PhysicalChannel([1.0], [2 / FIG.B], [0.0]))
    t = np.abs(eff.taps.taps)
    t[2 + FIG.M // 2, FIG.N // 2] = 0
    assert t.max() <= 1e-6


@pytest.mark.xfail(strict=True, reason="truncated sinc is not lattice-orthogonal on the torus (leak 1.2e-2)")
def test_lattice_path_gives_delta_sinc(sinc):
    eff = effective_channel(sinc, PhysicalChannel([1.0], [2 / FIG.B], [0.0]))
    t = np.abs(eff.taps.taps)
    t[2 + FIG.M // 2, FIG.N // 2] = 0
    assert t.max() <= 1e-6


def test_linearity_over_paths(sinc):
    a = PhysicalChannel([0.6], [0.31e-6], [400.0])
    b = PhysicalChannel([0.8j], [1.09e-6], [-700.0])
    ab = PhysicalChannel([0.6, 0.8j], [0.31e-6, 1.09e-6], [400.0, -700.0])
    s = effective_channel(sinc, a).taps.taps + effective_channel(sinc, b).taps.taps
    np.testing.assert_allclose(effective_channel(sinc, ab).taps.taps, s, atol=1e-12)


def test_table_matches_direct(iota):
    ch = draw_veh_a(np.random.default_rng(5), 815.0, FIG)
    tab = EffectiveChannelTable(iota)
    np.testing.assert_allclose(tab(ch).taps.taps, effective_channel(iota, ch).taps.taps, atol=1e-12)


@pytest.mark.parametrize("nu", [-815.0, 0.0, 400.0])
def test_energy_per_path_orthogonal(iota, nu):
    for tau in VEH_A_DELAYS:
        eff = effective_channel(iota, PhysicalChannel([1.0], [tau], [nu]))
        assert np.sum(np.abs(eff.taps.taps) ** 2) <= 1 + 1e-3


def test_energy_mean_over_phases(iota):
    tab = EffectiveChannelTable(iota)
    rng = np.random.default_rng(6)
    e = [np.sum(np.abs(tab(draw_veh_a(rng, 815.0, FIG)).taps.taps) ** 2) for _ in range(200)]
    assert np.mean(e) <= 1 + 1e-3


@pytest.mark.xfail(strict=True, reason="cross terms between paths closer than 1/B exceed the per-path bound")
def test_energy_conservation_multipath(iota):
    tab = EffectiveChannelTable(iota)
    rng = np.random.default_rng(6)
    for _ in range(10):
        ch = draw_veh_a(rng, 815.0, FIG)
        assert np.sum(np.abs(tab(ch).taps.taps) ** 2) <= ch.power * (1 + 1e-3)


def test_determinism_end_to_end(iota):
    tab = EffectiveChannelTable(iota)
    H1 = build_H(tab(draw_veh_a(np.random.default_rng(9), 815.0, FIG))).H
    H2 = build_H(tab(draw_veh_a(np.random.default_rng(9), 815.0, FIG))).H
    np.testing.assert_array_equal(H1, H2)


def test_support_threshold():
    g = make_grid(4, 3, 1e3, 1)
    t = np.zeros((4, 3), complex)
    t[2, 1], t[3, 2], t[0, 0] = 1.0, 2e-6, 5e-7
    eff = EffectiveChannel(g, LatticeArray(g, t, True))
    assert sorted(eff.support) == [(0, 0), (1, 1)]
    assert SUPPORT_THRESHOLD == 1e-6


# --- I/O matrix -------------------------------------------------------------------------


def test_delta_gives_identity():
    g = make_grid(17, 19, 30e3, 1)
    np.testing.assert_array_equal(build_H(LatticeArray.delta(g)).H, np.eye(g.MN))


def test_io_matrix_small_grid():
    rng = np.random.default_rng(1)
    g = make_grid(4, 3, 1e3, 1)
    h = LatticeArray(g, rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3)), True)
    x = LatticeArray(g, rng.normal(size=(4, 3)) + 1j * rng.normal(size=(4, 3)), False)
    y = twisted_conv_lattice(h, x, None, support_a=h.support())
    np.testing.assert_allclose(build_H(h, 0.0) @ x.vec(), y.vec(), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(M=st.integers(1, 16), N=st.integers(1, 16), seed=st.integers(0, 2**32 - 1))
def test_io_matrix_equivalence(M, N, seed):
    if M * N > 16:
        M, N = M, max(1, 16 // M)
    rng = np.random.default_rng(seed)
    g = make_grid(M, N, 1e3, 1)
    h = LatticeArray(g, rng.normal(size=(M, N)) + 1j * rng.normal(size=(M, N)), True)
    x = LatticeArray(g, rng.normal(size=(M, N)) + 1j * rng.normal(size=(M, N)), False)
    y = twisted_conv_lattice(h, x, None, support_a=h.support())
    assert np.abs(build_H(h, 0.0).H @ x.vec() - y.vec()).max() <= 1e-10


@pytest.mark.parametrize("k0,l0", [(1, 0), (2, -1), (-3, 4)])
def test_single_tap_one_per_column(k0, l0):
    g = make_grid(7, 9, 1e3, 1)
    v = 0.3 - 0.4j
    H = build_H(LatticeArray.delta(g, k0, l0, value=v)).H
    nz = np.abs(H) > 0
    assert np.all(nz.sum(axis=0) == 1)
    np.testing.assert_allclose(np.abs(H[nz]), abs(v), atol=1e-15)


def test_empty_channel():
    g = make_grid(3, 2, 1e3, 1)
    assert not build_H(LatticeArray(g, np.zeros((3, 2)), True)).H.any()


# --- dumps ------------------------------------------------------------------------------


def test_csv_dumps(tmp_path, sinc):
    ch = draw_veh_a(np.random.default_rng(3), 815.0, FIG)
    write_channel_csv(tmp_path / "ch.csv", ch)
    rows = list(csv.reader(open(tmp_path / "ch.csv")))
    assert rows[0] == ["path", "gain_re", "gain_im", "tau_seconds", "nu_hz"]
    assert len(rows) == 7
    assert float(rows[3][3]) == VEH_A_DELAYS[2]
    eff = EffectiveChannelTable(sinc)(ch)
    write_effective_csv(tmp_path / "h.csv", eff)
    rows = list(csv.reader(open(tmp_path / "h.csv")))
    assert rows[0] == ["k", "l", "re", "im"]
    assert len(rows) == FIG.MN + 1
    k, l, re, im = rows[1 + (FIG.M // 2) * FIG.N + FIG.N // 2]
    assert (int(k), int(l)) == (0, 0)
    assert complex(float(re), float(im)) == eff.taps.value(0, 0)
