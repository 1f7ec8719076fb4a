import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from zakotfs.channel import EffectiveChannelTable, IOMatrix, build_H, draw_veh_a
from zakotfs.ddcore import LatticeArray, make_grid
from zakotfs.filters import make_filter
from zakotfs.txrx import (
    Constellation,
    NoiseModel,
    SingularChannelError,
    default_pilot_location,
    default_region,
    estimate_channel,
    io_nmse,
    make_pilot_frame,
    mmse_detect,
    qam_demap,
    qam_map,
    random_frame,
    region_nmse,
    transmit,
)

FIG = make_grid(17, 19, 30e3, 8)


@pytest.fixture(scope="module")
def iota_tab():
    return EffectiveChannelTable(make_filter("iota-gaussian", FIG))


def _ident(g):
    return IOMatrix(np.eye(g.MN, dtype=complex), g)


# --- QAM ------------------------------------------------------------------------------


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.sampled_from(["qam4", "qam16"]))
def test_qam_round_trip(seed, c):
    rng = np.random.default_rng(seed)
    bps = Constellation(c).bits_per_symbol
    bits = rng.integers(0, 2, size=5 * 3 * bps, dtype=np.uint8)
    fr = qam_map(bits, 5, 3, c)
    assert fr.X.shape == (5, 3)
    np.testing.assert_array_equal(qam_demap(fr.X, c), bits)


def test_qam4_points():
    labels = np.array([0, 0, 0, 1, 1, 0, 1, 1], dtype=np.uint8)
    X = qam_map(labels, 2, 2).X
    np.testing.assert_allclose(np.abs(X.real), 1 / np.sqrt(2), atol=1e-15)
    np.testing.assert_allclose(np.abs(X.imag), 1 / np.sqrt(2), atol=1e-15)
    assert np.mean(np.abs(X) ** 2) == pytest.approx(1.0, abs=1e-15)


def test_qam16_energy_and_gray():
    bits = np.array([(i >> s) & 1 for i in range(16) for s in (3, 2, 1, 0)], dtype=np.uint8)
    X = qam_map(bits, 4, 4, "qam16").X.reshape(-1, order="F")
    assert np.mean(np.abs(X) ** 2) == pytest.approx(1.0, abs=1e-14)
    # nearest neighbours differ in exactly one bit
    d = np.abs(X[:, None] - X[None, :])
    dmin = d[d > 0].min()
    for i in range(16):
        for j in range(16):
            if abs(d[i, j] - dmin) < 1e-9:
                assert bin(i ^ j).count("1") == 1


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), c=st.sampled_from(["qam4", "qam16"]))
def test_demap_inside_decision_region(seed, c):
    rng = np.random.default_rng(seed)
    g = make_grid(4, 3, 1e3, 1)
    fr = random_frame(rng, g, c)
    dmin = 2 / np.sqrt(2) if c == "qam4" else 2 / np.sqrt(10)
    r = rng.uniform(0, 0.49 * dmin, size=fr.X.shape)
    ph = rng.uniform(0, 2 * np.pi, size=fr.X.shape)
    # stay within the per-axis half distance
    z = r * np.exp(1j * ph) / np.sqrt(2)
    np.testing.assert_array_equal(qam_demap(fr.X + z, c), fr.bits)


def test_qam_length_mismatch():
    with pytest.raises(ValueError):
        qam_map(np.zeros(7, np.uint8), 2, 2)


# --- link -------------------------------------------------------------------------------


def test_transmit_noiseless(iota_tab):
    rng = np.random.default_rng(0)
    Hm = build_H(iota_tab(draw_veh_a(rng, 815.0, FIG)))
    fr = random_frame(rng, FIG)
    np.testing.assert_array_equal(transmit(Hm, fr, NoiseModel(0.0), rng), Hm.H @ fr.vec)
    np.testing.assert_array_equal(transmit(_ident(FIG), fr, NoiseModel(0.0), rng), fr.vec)


def test_transmit_noise_variance():
    g = make_grid(100, 100, 1e3, 1)
    s2 = 0.3
    rng = np.random.default_rng(1)
    n = 10**5 // g.MN
    z = np.concatenate([transmit(_ident(g), np.zeros(g.MN), NoiseModel(s2), rng) for _ in range(n)])
    assert z.size == 10**5
    assert abs(np.mean(np.abs(z) ** 2) - s2) <= 3 * s2 * np.sqrt(2 / 1e5)
    assert abs(np.mean(z)) <= 5 * np.sqrt(s2 / 1e5)


def test_transmit_dimension_mismatch():
    g = make_grid(4, 3, 1e3, 1)
    with pytest.raises(ValueError):
        transmit(_ident(g), np.zeros(11), NoiseModel(0.0), np.random.default_rng(0))


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel(-1.0)
    with pytest.raises(ValueError):
        NoiseModel(1.0, "pink")
    with pytest.raises(ValueError):
        NoiseModel(1.0, "matched")
    assert NoiseModel.from_snr_db(10).variance == pytest.approx(0.1)


def test_matched_noise_orthogonal_filter():
    g = make_grid(17, 19, 30e3, 2)
    w = make_filter("iota-gaussian", g)
    rng = np.random.default_rng(2)
    z = np.array([NoiseModel(0.5, "matched", w).draw(rng, g) for _ in range(60)])
    # white at lattice points for an orthogonal filter
    assert np.mean(np.abs(z) ** 2) == pytest.approx(0.5, rel=0.05)
    assert abs(np.mean(z[:, :-1] * z[:, 1:].conj())) <= 0.02


def test_mmse_identity():
    g = make_grid(4, 3, 1e3, 1)
    y = np.arange(12) + 1j
    np.testing.assert_array_equal(mmse_detect(_ident(g), y, 0.0), y.reshape(4, 3, order="F"))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), M=st.integers(1, 4), N=st.integers(1, 3))
def test_mmse_inverse(seed, M, N):
    rng = np.random.default_rng(seed)
    g = make_grid(M, N, 1e3, 1)
    H = rng.normal(size=(g.MN, g.MN)) + 1j * rng.normal(size=(g.MN, g.MN)) + 3 * np.eye(g.MN)
    y = rng.normal(size=g.MN) + 1j * rng.normal(size=g.MN)
    x = mmse_detect(IOMatrix(H, g), y, 0.0).reshape(-1, order="F")
    np.testing.assert_allclose(x, np.linalg.solve(H, y), atol=1e-8)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), s2=st.floats(1e-3, 10.0))
def test_mmse_alternative_form(seed, s2):
    rng = np.random.default_rng(seed)
    g = make_grid(4, 3, 1e3, 1)
    H = rng.normal(size=(12, 12)) + 1j * rng.normal(size=(12, 12))
    y = rng.normal(size=12) + 1j * rng.normal(size=12)
    x = mmse_detect(IOMatrix(H, g), y, s2).reshape(-1, order="F")
    alt = np.linalg.solve(H.conj().T @ H + s2 * np.eye(12), H.conj().T @ y)
    np.testing.assert_allclose(x, alt, atol=1e-10)


def test_mmse_singular():
    g = make_grid(4, 3, 1e3, 1)
    H = np.eye(12, dtype=complex)
    H[5, 5] = 0
    with pytest.raises(SingularChannelError):
        mmse_detect(IOMatrix(H, g), np.ones(12), 0.0)
    with pytest.raises(ValueError):
        mmse_detect(IOMatrix(H, g), np.ones(12), -1.0)
    # regularized detection still works
    assert np.all(np.isfinite(mmse_detect(IOMatrix(H, g), np.ones(12), 1e-3)))


def test_mmse_consistency(iota_tab):
    rng = np.random.default_rng(3)
    Hm = build_H(iota_tab(draw_veh_a(rng, 815.0, FIG)))
    while np.linalg.cond(Hm.H) > 100:
        Hm = build_H(iota_tab(draw_veh_a(rng, 815.0, FIG)))
    fr = random_frame(rng, FIG)
    y = transmit(Hm, fr, NoiseModel(0.0), rng)
    err = [np.linalg.norm(mmse_detect(Hm, y, s2) - fr.X) for s2 in (1e-2, 1e-4, 1e-6)]
    assert err[0] > err[1] > err[2]
    assert err[2] <= 1e-3


def test_perfect_csi_noiseless_recovery(iota_tab):
    rng = np.random.default_rng(4)
    for _ in range(5):
        Hm = build_H(iota_tab(draw_veh_a(rng, 815.0, FIG)))
        fr = random_frame(rng, FIG)
        y = transmit(Hm, fr, NoiseModel(0.0), rng)
        c = np.linalg.cond(Hm.H)
        bits = qam_demap(mmse_detect(Hm, y, 0.0))
        assert np.array_equal(bits, fr.bits) or c > 1e8, f"cond {c:.3g}"


# --- pilot estimation ----------------------------------------------------------------


def test_pilot_frame():
    assert default_pilot_location(FIG) == (9, 10)
    a = make_pilot_frame(FIG)
    b = make_pilot_frame(FIG, (0, 0))
    assert np.sum(np.abs(a.X) ** 2) == 1.0
    assert a.X[9, 10] == 1.0
    assert np.vdot(a.vec, b.vec) == 0
    for bad in [(17, 0), (0, -1), (1.5, 2)]:
        with pytest.raises(ValueError):
            make_pilot_frame(FIG, bad)


def test_default_region():
    r = default_region(FIG)
    assert len(r) == 5 * 5
    assert min(k for k, _ in r) == 0 and max(k for k, _ in r) == 4
    assert {l for _, l in r} == {-2, -1, 0, 1, 2}


@pytest.mark.parametrize("pilot", [(0, 0), (9, 10), (16, 18)])
def test_noiseless_estimate_exact(iota_tab, pilot):
    rng = np.random.default_rng(5)
    eff = iota_tab(draw_veh_a(rng, 815.0, FIG))
    Hm = build_H(eff, 0.0)
    y = transmit(Hm, make_pilot_frame(FIG, pilot), NoiseModel(0.0), rng)
    region = default_region(FIG)
    est = estimate_channel(y, pilot, region, FIG)
    for dk, dl in region:
        assert est.taps_hat.value(dk, dl) == pytest.approx(eff.taps.value(dk, dl), abs=1e-12)
    mask = np.ones((FIG.M, FIG.N), bool)
    k0, l0 = est.taps_hat.offsets()
    for dk, dl in region:
        mask[dk - k0, dl - l0] = False
    assert not est.taps_hat.taps[mask].any()
    assert region_nmse(est, eff.taps) <= 1e-24


def test_region_captures_channel_energy(iota_tab):
    rng = np.random.default_rng(6)
    region = default_region(FIG)
    frac = []
    for _ in range(40):
        eff = iota_tab(draw_veh_a(rng, 815.0, FIG))
        inside = sum(abs(eff.taps.value(a, b)) ** 2 for a, b in region)
        frac.append(inside / np.sum(np.abs(eff.taps.taps) ** 2))
    # frozen: mean 0.982, worst 0.896 over 100 draws
    assert np.mean(frac) >= 0.97
    assert min(frac) >= 0.85


@pytest.mark.xfail(strict=True, reason="filter tails put taps at negative delay offsets outside the region")
def test_region_covers_true_support(iota_tab):
    eff = iota_tab(draw_veh_a(np.random.default_rng(6), 815.0, FIG))
    assert set(eff.support) <= set(default_region(FIG))


def test_region_errors():
    y = np.zeros(FIG.MN)
    with pytest.raises(ValueError):
        estimate_channel(y, (0, 0), [(0, 0), (17, 0)], FIG)
    with pytest.raises(ValueError):
        estimate_channel(y, (0, 0), [(0, -10), (0, 9)], FIG)


def test_estimator_statistics(iota_tab):
    rng = np.random.default_rng(7)
    eff = iota_tab(draw_veh_a(rng, 815.0, FIG))
    Hm = build_H(eff, 0.0)
    pilot = default_pilot_location(FIG)
    region = default_region(FIG)
    y0 = transmit(Hm, make_pilot_frame(FIG, pilot), NoiseModel(0.0), rng)
    s2 = 0.05
    nm = NoiseModel(s2)
    draws = 10**4
    est = np.array([
        [estimate_channel(y0 + nm.draw(rng, FIG), pilot, region, FIG).taps_hat.value(a, b) for a, b in region]
        for _ in range(draws)
    ])
    h = np.array([eff.taps.value(a, b) for a, b in region])
    # unbiased within 3 standard errors per tap (real and imaginary parts)
    se = np.sqrt(s2 / 2 / draws)
    assert np.all(np.abs((est.mean(0) - h).real) <= 3.5 * se)
    assert np.all(np.abs((est.mean(0) - h).imag) <= 3.5 * se)
    # region NMSE oracle
    nmse = np.mean(np.sum(np.abs(est - h) ** 2, axis=1)) / np.sum(np.abs(h) ** 2)
    oracle = len(region) * s2 / np.sum(np.abs(h) ** 2)
    assert nmse == pytest.approx(oracle, rel=0.03)


def test_nmse_monotone(iota_tab):
    rng = np.random.default_rng(8)
    pilot = default_pilot_location(FIG)
    region = default_region(FIG)
    means = []
    for snr in (0, 5, 10, 15, 20):
        vals = []
        for _ in range(200):
            eff = iota_tab(draw_veh_a(rng, 815.0, FIG))
            y = transmit(build_H(eff), make_pilot_frame(FIG, pilot), NoiseModel.from_snr_db(snr), rng)
            est = estimate_channel(y, pilot, region, FIG, snr)
            vals.append((region_nmse(est, eff.taps), io_nmse(est, eff.taps)))
        means.append(np.mean(vals, axis=0))
    means = np.array(means)
    assert np.all(np.diff(means[:, 0]) < 0)
    assert np.all(np.diff(means[:, 1]) < 0)


def test_io_nmse_counts_off_region():
    g = make_grid(5, 5, 1e3, 1)
    t = np.zeros((5, 5), complex)
    t[2, 2] = 1.0
    t[0, 0] = 1.0  # (-2, -2), outside the region below
    truth = LatticeArray(g, t, True)
    y = build_H(truth, 0.0) @ make_pilot_frame(g, (0, 0)).vec
    est = estimate_channel(y, (0, 0), [(0, 0), (1, 0)], g)
    assert region_nmse(est, truth) == 0.0
    assert io_nmse(est, truth) == pytest.approx(0.5)
