import math

import numpy as np
import pytest

from hankel_lab import rkph
from hankel_lab.floquet import band_structure, ids_from_bands, single_band_data, single_band_edges
from hankel_lab.spectra import IdsCurve, Spectrum, eig_sym

TAU = 2 * math.pi
E_MIN, E_MAX = single_band_edges(TAU)


def test_distributions():
    d = rkph.TwoPoint(1, 2, 0.5)
    assert (d.kappa_min, d.kappa_max) == (1, 2) and d.rho_max is None
    assert rkph.TwoPoint(1, 2, 1.0).support == (1,)
    u = rkph.Uniform(1, 3)
    assert u.rho_max == 0.5
    with pytest.raises(ValueError):
        rkph.Uniform(2, 1)
    with pytest.raises(ValueError):
        rkph.TwoPoint(1, 2, 1.5)
    with pytest.raises(ValueError):
        rkph.PointMass(0.0)
    for dd in (d, u, rkph.PointMass(1.5)):
        assert rkph.dist_from_dict(rkph.dist_to_dict(dd)) == dd
    with pytest.raises(ValueError):
        rkph.dist_from_dict({"kind": "gauss"})


def test_config_validation():
    with pytest.raises(ValueError):
        rkph.RkphConfig(TAU, 0, rkph.PointMass(1))
    c = rkph.RkphConfig(4.0, 10, rkph.PointMass(1))
    assert c.sites == 21 and c.length == 80.0


def test_splitmix_reference():
    # first outputs of the reference splitmix64 generator seeded with 0
    x, out = 0, []
    for _ in range(2):
        out.append(rkph.splitmix64(x))
        x = (x + 0x9E3779B97F4A7C15) & ((1 << 64) - 1)
    assert out == [0xE220A8397B1DCDAF, 0x6E789E6AA1B965F4]


def test_sampling_determinism_and_range():
    cfg = rkph.RkphConfig(TAU, 50, rkph.Uniform(1, 2), 3, 42)
    a = rkph.sample_weights(cfg, 1)
    assert np.array_equal(a, rkph.sample_weights(cfg, 1))
    assert not np.array_equal(a, rkph.sample_weights(cfg, 2))
    assert a.min() >= 1 and a.max() <= 2 and a.size == 101
    with pytest.raises(ValueError):
        rkph.sample_weights(cfg, 3)
    pm = rkph.RkphConfig(TAU, 5, rkph.PointMass(1.5), 1)
    assert np.all(rkph.sample_weights(pm, 0) == 1.5)


def test_two_point_mean():
    cfg = rkph.RkphConfig(TAU, 50000, rkph.TwoPoint(1, 2, 0.5), 1, 9)
    assert abs(rkph.sample_weights(cfg, 0).mean() - 1.5) < 0.01


def test_window_matrix_basic():
    assert rkph.window_matrix([3.0], TAU).matrix.tolist() == [[1.5]]
    k = np.array([1.0, 1.7, 1.2, 1.9, 1.4])
    ev = np.sort(np.linalg.eigvalsh(rkph.window_matrix(k, 40.0).matrix))
    assert np.allclose(ev, np.sort(k / 2), atol=1e-8)
    with pytest.raises(ValueError):
        rkph.window_matrix([1.0, -1.0, 1.0], TAU)


def test_window_matrix_scaling_and_positivity():
    rng = np.random.default_rng(2)
    k = 1 + rng.random(41)
    ev = eig_sym(rkph.window_matrix(k, 3.0)).eigenvalues
    ev2 = eig_sym(rkph.window_matrix(2.5 * k, 3.0)).eigenvalues
    assert ev.size == 41 and ev.min() > 0
    assert np.max(np.abs(ev2 - 2.5 * ev)) < 1e-12 * ev.max()


def test_window_matrix_similar_to_K_gamma():
    k = np.array([1.0, 2.0, 1.5])
    G = rkph.sech_gram(3, 2.0)
    ev = np.sort(np.linalg.eigvals(np.diag(k) @ G).real)
    assert np.allclose(ev, np.sort(np.linalg.eigvalsh(rkph.window_matrix(k, 2.0).matrix)))


def test_point_mass_fills_single_band():
    ev = eig_sym(rkph.window_matrix(np.ones(513), TAU)).eigenvalues
    assert ev.min() > E_MIN - 0.02 and ev.max() < E_MAX + 0.02
    assert abs(ev.min() - E_MIN) < 0.01 and abs(ev.max() - E_MAX) < 0.01


def test_spectrum_support():
    s = rkph.spectrum_support(rkph.PointMass(1), TAU)
    assert len(s) == 1 and abs(s[0][0] - 0.41731) < 1e-5 and abs(s[0][1] - 0.59017) < 1e-5
    s = rkph.spectrum_support(rkph.TwoPoint(1, 2), TAU)
    assert len(s) == 2 and s[0][1] < s[1][0]
    s = rkph.spectrum_support(rkph.Uniform(1, 2), TAU)
    assert s == [(E_MIN, 2 * E_MAX)]
    # interval-union oracle over a fine grid of scalings
    grid = np.linspace(1, 2, 2001)
    lo = grid * E_MIN
    hi = grid * E_MAX
    assert np.all(lo[1:] <= hi[:-1])


def test_mc_ids_mass_and_determinism():
    cfg = rkph.RkphConfig(TAU, 32, rkph.TwoPoint(1, 2), 6, 3)
    r1 = rkph.mc_ids(cfg, workers=1)
    r3 = rkph.mc_ids(cfg, workers=3)
    assert np.array_equal(r1.curve.values, r3.curve.values)
    assert np.array_equal(r1.stderr, r3.stderr)
    assert r1.total_mass == 65 / (2 * TAU * 32)
    assert abs(r1.curve.values[0] - r1.total_mass) < 1e-15
    assert np.all(np.diff(r1.curve.values) <= 0)


def test_point_mass_matches_bands():
    lam = np.linspace(0.3, 0.7, 81)
    r = rkph.mc_ids(rkph.RkphConfig(TAU, 400, rkph.PointMass(1), 1, 0, lam))
    bs = band_structure(single_band_data(TAU, 48), 64, 12)
    assert np.max(np.abs(r.curve.values - ids_from_bands(bs, lam).values)) < 0.01


def test_lifshitz_synthetic():
    d = np.geomspace(1e-3, 0.5, 80)
    lam = np.sort(1.0 - d)
    curve = IdsCurve(lam, np.exp(-(1.0 - lam) ** -0.5), 1.0, "synthetic")
    assert abs(rkph.lifshitz_slope(curve, 1.0, (2e-3, 0.4)) + 0.5) < 1e-6
    # power law nu = delta^2: local slope 1/log(delta) tends to 0 from below
    curve2 = IdsCurve(lam, (1.0 - lam) ** 2, 1.0, "synthetic")
    s_far = rkph.lifshitz_slope(curve2, 1.0, (0.1, 0.4))
    s_near = rkph.lifshitz_slope(curve2, 1.0, (1e-3, 1e-2))
    assert s_far < s_near < 0 and s_near > -0.2


def test_lifshitz_bottom_edge_and_errors():
    d = np.geomspace(1e-3, 0.5, 60)
    lam = 1.0 + d
    curve = IdsCurve(lam, 0.2 - np.exp(-d ** -0.5), 1.0, "synthetic")
    assert abs(rkph.lifshitz_slope(curve, 1.0, (2e-3, 0.4), "bottom", 0.2) + 0.5) < 1e-6
    with pytest.raises(rkph.FitError):
        rkph.lifshitz_slope(curve, 1.0, (0.6, 0.7), "bottom", 0.2)
    with pytest.raises(ValueError):
        rkph.lifshitz_slope(curve, 1.0, (0.1, 0.2), "left")


def test_wegner_synthetic():
    rho, kmax = 1.0, 2.0
    lam = np.linspace(1.0, 3.0, 401)
    curve = IdsCurve(lam, -rho * kmax * np.log(lam) + 5.0, 1.0, "synthetic")
    assert abs(rkph.wegner_ratio(curve, rkph.Uniform(1, 2)) - 1.0) < 1e-3
    zero = IdsCurve(lam, np.zeros_like(lam), 1.0, "synthetic")
    assert rkph.wegner_ratio(zero, rkph.Uniform(1, 2)) == 0.0
    with pytest.raises(ValueError):
        rkph.wegner_ratio(zero, rkph.TwoPoint(1, 2))


def test_density_spacing():
    lam = np.linspace(0, 1, 101)
    c = IdsCurve(lam, 1 - lam, 1.0, "s")
    x, d = rkph.density_from_curve(c, 0.1)
    assert x.size == 11 and np.allclose(d, 1.0)


def test_participation():
    assert rkph.participation_stats(Spectrum(np.zeros(4), np.eye(4)))["mean_ipr"] == 1.0
    v = np.full((9, 1), 1 / 3)
    assert abs(rkph.participation_stats(Spectrum(np.zeros(1), v))["mean_ipr"] - 1 / 9) < 1e-15
    with pytest.raises(ValueError):
        rkph.participation_stats(Spectrum(np.zeros(1)))


def test_heavy_tail_cells():
    h = rkph.HeavyTailSample.draw(0, 2000)
    assert h.counts_log2.min() >= 1
    M = 10
    meas = h.as_measure(M)
    direct = np.sum(1 / np.cosh(meas.positions))
    assert abs(h.blaschke_partial_sums([M])[0] - direct) < 1e-9 * direct
    assert abs(h.support_density(M) - len(meas) / (2 * M)) < 1e-12
    assert abs(meas.total_mass() - 2 * M) < 1e-9


def test_heavy_tail_large_cell_formula():
    h = rkph.HeavyTailSample(np.array([3]), np.array([22]))
    x = 2**22
    xi = 3 + np.arange(x) / x
    exact = float(np.sum(1 / np.cosh(xi)))
    assert abs(h.cell_sech_sum(3, 22) - exact) < 1e-9 * exact
