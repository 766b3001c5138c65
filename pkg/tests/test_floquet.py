import math
import warnings

import mpmath as mp
import numpy as np
import pytest
from scipy.optimize import brentq

from hankel_lab import floquet as fq
from hankel_lab.measures import AtomicMeasure
from hankel_lab.operators import PositiveFromMeasure
from hankel_lab.spectra import ids_from_section

TAU = 2 * math.pi
# (1/2) sum sech(pi n) and (1/2) sum sech(pi (n + 1/2)), mpmath at 30 digits
E_MAX = 0.590170299508048113
E_MIN = 0.417313420837036593


def test_fourier_constant_and_cosine():
    d = fq.fourier_coeffs(np.ones(32), TAU, 4)
    assert abs(d.coeff(0) - 1) < 1e-15 and np.all(np.abs(d.coeffs[np.arange(9) != 4]) < 1e-15)
    xi = np.arange(32) * 3.0 / 32
    d = fq.fourier_coeffs(np.cos(2 * np.pi * xi / 3.0), 3.0, 4)
    assert abs(d.coeff(1) - 0.5) < 1e-15 and abs(d.coeff(-1) - 0.5) < 1e-15


def test_fourier_parseval():
    rng = np.random.default_rng(1)
    tau, n = 2.5, 256
    a = rng.standard_normal(5)
    b = rng.standard_normal(5)
    P = lambda x: sum(a[m] * np.cos(2 * np.pi * m * x / tau) + b[m] * np.sin(2 * np.pi * m * x / tau)
                      for m in range(5))
    d = fq.fourier_coeffs(P(np.arange(n) * tau / n), tau, 10)
    ref = mp.quad(lambda x: float(P(float(x))) ** 2, [0, tau]) / tau
    assert abs(np.sum(np.abs(d.coeffs) ** 2) - float(ref)) < 1e-12


def test_fourier_aliasing_warning_and_size():
    with pytest.warns(fq.AliasingWarning):
        fq.fourier_coeffs(np.random.default_rng(0).standard_normal(16), 1.0, 4)
    with pytest.raises(ValueError):
        fq.fourier_coeffs(np.ones(8), 1.0, 4)


def test_fourier_reality_check():
    with pytest.raises(ValueError):
        fq.FourierData(1.0, np.array([1j, 0, 1j]))


def test_sigma_tilde_lattice():
    S = fq.single_band_data(TAU, 5)
    P = fq.p_tilde(S)
    for n in range(-5, 6):
        ref = complex(mp.gamma(mp.mpc(1, -2 * mp.pi * n / TAU))) / TAU
        assert abs(P.coeff(n) - ref) < 1e-15 + 1e-13 * abs(ref)
    assert P.coeff(0) == pytest.approx(1 / TAU, abs=1e-16)
    back = fq.sigma_tilde(P)
    assert np.max(np.abs(back.coeffs - S.coeffs)) < 1e-13
    with pytest.raises(ValueError):
        fq.sigma_tilde(S)


def test_single_band_fiber_rank_one():
    S = fq.single_band_data(TAU, 24)
    for k in (0.0, 0.2, 0.49):
        ev = fq.fiber_eigenvalues(S, k, 12)
        big = ev[np.abs(ev) > 1e-8]
        assert big.size == 1
        assert abs(big[0] - fq.single_band_E0(TAU, k)) < 1e-12
        assert np.sum(np.abs(ev) < 1e-8 * big[0]) == 24


def test_fiber_diagonal_and_hermitian():
    rng = np.random.default_rng(4)
    N = 10
    c = rng.standard_normal(2 * N + 1) + 1j * rng.standard_normal(2 * N + 1)
    c = 0.5 * (c + np.conj(c[::-1]))
    d = fq.FourierData(3.0, c, "Sigma")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", fq.TruncationWarning)
        h = fq.fiber_matrix(d, 0.4, 6)
    assert np.max(np.abs(h - h.conj().T)) < 1e-14
    step = 2 * math.pi / 3.0
    for i, n in enumerate(range(-6, 7)):
        ref = d.coeff(0) * math.pi / math.cosh(math.pi * (step * n + 0.4))
        assert abs(h[i, i] - ref) < 1e-14 * max(1, abs(ref))


def test_fiber_routes_agree():
    d = fq.measure_coeffs(4.0, [0.0, 1.3], [1.0, 0.5], 24)
    for k in (0.0, 0.3, -0.7):
        h1 = fq.fiber_matrix(d, k, 8)
        h2 = fq.fiber_matrix(d, k, 8, route="beta")
        assert np.max(np.abs(h1 - h2)) < 1e-11


def test_fiber_k_range_and_truncation_warning():
    d = fq.single_band_data(TAU, 4)
    with pytest.raises(ValueError):
        fq.fiber_matrix(d, 0.6, 2)
    with pytest.warns(fq.TruncationWarning):
        fq.fiber_matrix(d, 0.1, 3)


def test_reflection_symmetry():
    d = fq.measure_coeffs(4.0, [0.0, 1.3], [1.0, 0.5], 24)
    for k in (0.1, 0.5):
        assert np.allclose(fq.fiber_eigenvalues(d, k, 12), fq.fiber_eigenvalues(d, -k, 12), atol=1e-12)


def test_edges_closed_form():
    lo, hi = fq.single_band_edges(TAU)
    assert abs(hi - E_MAX) < 1e-14 and abs(lo - E_MIN) < 1e-14


def test_dn_identification():
    ks = np.linspace(-0.5, 0.5, 33)
    assert np.max(np.abs(fq.single_band_E0(TAU, ks) - fq.single_band_E0_dn(TAU, ks))) < 1e-12
    ks = np.linspace(0, math.pi / 3.0, 9)
    assert np.max(np.abs(fq.single_band_E0(3.0, ks) - fq.single_band_E0_dn(3.0, ks))) < 1e-12


def test_flat_pair():
    fp = fq.flat_pair_Estar(TAU)
    ref = float(mp.ellipk(0.5) / mp.sqrt(2) / mp.pi**2)
    assert abs(fp.estar - ref) < 1e-14
    assert fp.max_deviation < 1e-10
    # lemma: the pair difference of squares equals (K k' tau / pi^2)^2 / tau^2 for other periods
    for tau in (3.0, 9.0):
        f = fq.flat_pair_Estar(tau)
        assert f.max_deviation < 1e-10
    # nonzero fiber eigenvalues are +-pi E_*
    ev = fq.fiber_eigenvalues(fq.flat_pair_data(TAU, 48), 0.3, 12)
    big = np.sort(ev[np.abs(ev) > 1e-8])
    assert big.size == 2 and np.allclose(big, [-math.pi * fp.estar, math.pi * fp.estar], atol=1e-12)


def test_band_structure_single():
    bs = fq.band_structure(fq.single_band_data(TAU, 48), 64, 12)
    assert len(bs.bands) == 1 and not bs.bands[0].flat
    assert abs(bs.bands[0].lo - E_MIN) < 1e-9 and abs(bs.bands[0].hi - E_MAX) < 1e-9
    assert np.all(np.diff(bs.bands[0].values) < 0)
    assert bs.notes == []


def test_band_structure_flat_pair():
    bs = fq.band_structure(fq.flat_pair_data(TAU, 48), 32, 12)
    assert bs.n_flat == 2
    assert sorted(b.sign for b in bs.bands) == [-1, 1]


def test_band_structure_positive_two_atoms():
    d = fq.measure_coeffs(4.0, [0.0, 1.3], [1.0, 0.5], 48)
    bs = fq.band_structure(d, 32, 12)
    assert len(bs.bands) == 2 and bs.n_flat == 0
    assert all(b.sign == 1 for b in bs.bands)
    lo, hi = sorted(bs.bands, key=lambda b: b.lo)
    assert lo.hi < hi.lo  # disjoint interiors
    assert abs(fq.ids_from_bands(bs, [1e-9]).values[0] * 4.0 - 2.0) < 1e-9
    assert fq.gap_labels(bs, 0.5 * (lo.hi + hi.lo)) == 1


def test_band_structure_needs_mesh():
    with pytest.raises(ValueError):
        fq.band_structure(fq.single_band_data(TAU, 48), 8, 12)


def test_ids_from_bands_single():
    bs = fq.band_structure(fq.single_band_data(TAU, 48), 64, 12)
    lam_mid = 0.5 * (E_MIN + E_MAX)
    k_lam = brentq(lambda k: fq.single_band_E0(TAU, k) - lam_mid, 0, 0.5)
    c = fq.ids_from_bands(bs, [0.1, lam_mid, 0.7])
    assert abs(c.values[0] - 1 / TAU) < 1e-12
    assert abs(c.values[1] - k_lam / math.pi) < 1e-5
    assert c.values[2] == 0.0


def test_ids_bands_vs_scheme_b():
    bs = fq.band_structure(fq.single_band_data(TAU, 48), 64, 12)
    lam = np.linspace(0.3, 0.7, 81)
    fiber = fq.ids_from_bands(bs, lam).values
    S = AtomicMeasure.lattice(TAU, -70, 70)
    count = ids_from_section(PositiveFromMeasure(S), "b", 400.0, 0.1, lam).values
    assert np.max(np.abs(fiber - count)) <= 0.01


def test_flat_pair_ids_and_labels():
    bs = fq.band_structure(fq.flat_pair_data(TAU, 48), 32, 12)
    e = bs.bands[0].lo if bs.bands[0].sign > 0 else bs.bands[1].lo
    assert abs(fq.ids_from_bands(bs, [0.5 * e]).values[0] - 1 / TAU) < 1e-15
    assert fq.gap_labels(bs, 0.5 * e) == 1


def test_gap_labels_single():
    bs = fq.band_structure(fq.single_band_data(TAU, 48), 64, 12)
    assert fq.gap_labels(bs, 0.2) == 1
    assert fq.gap_labels(bs, 0.8) == 0
    with pytest.raises(fq.GapError):
        fq.gap_labels(bs, 0.5)


def test_truncation_shift_small():
    assert fq.truncation_shift(fq.single_band_data(TAU, 48), 0.2, 12) < 1e-10


def test_smoothness_sum():
    d = fq.FourierData(1.0, np.array([0.5, 1.0, 0.5]))
    assert abs(d.smoothness_sum() - (1.0 + math.sqrt(2))) < 1e-15
