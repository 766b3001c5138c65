"""Floquet-Bloch analysis of periodic Hankel operators.

The fiber h(k) acts on l^2(Z) with entries
``conj(g_n(k)) S_{n-m} g_m(k)``, ``g_n(k) = Gamma(1/2 + i(2 pi n / tau + k))``,
where S are the Fourier coefficients of the periodic measure Sigma. Band
functions come from eigensolving h(k) on a mesh of the half cell (0, pi/tau).
"""
from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from typing import List

import numpy as np

from .specfun import (
    beta_half_line,
    lattice_sech_sum,
    log_gamma,
    modulus_from_period,
    jacobi_dn,
)
from .spectra import IdsCurve


class AliasingWarning(UserWarning):
    pass


class TruncationWarning(UserWarning):
    pass


class ResolutionError(RuntimeError):
    """Band branches could not be followed across the k-mesh."""


class GapError(ValueError):
    """The requested energy lies inside a spectral band."""


@dataclass(frozen=True)
class FourierData:
    """Coefficients c_m, m = -Nc..Nc, of a tau-periodic real function or measure.

    ``which`` is ``'P'`` for symbol coefficients and ``'Sigma'`` for measure
    coefficients.
    """

    tau: float
    coeffs: np.ndarray
    which: str = "Sigma"

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise ValueError("coefficients must be indexed by m = -Nc..Nc")
        if self.which not in ("P", "Sigma"):
            raise ValueError("which must be 'P' or 'Sigma'")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if not np.allclose(c[::-1], np.conj(c), rtol=0.0, atol=1e-12 * max(1.0, np.abs(c).max())):
            raise ValueError("coefficients violate c_{-m} = conj(c_m)")
        # enforce reality exactly
        c = 0.5 * (c + np.conj(c[::-1]))
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def n_coeffs(self) -> int:
        return (self.coeffs.size - 1) // 2

    def coeff(self, m: int) -> complex:
        if abs(m) > self.n_coeffs:
            return 0j
        return complex(self.coeffs[m + self.n_coeffs])

    def smoothness_sum(self) -> float:
        """sum |c_m| (1 + |m|)^{1/2} over the stored coefficients."""
        m = np.arange(-self.n_coeffs, self.n_coeffs + 1)
        return float(np.sum(np.abs(self.coeffs) * np.sqrt(1.0 + np.abs(m))))


def fourier_coeffs(samples, tau: float, n_coeffs: int, which: str = "P") -> FourierData:
    """Coefficients (1/tau) int_0^tau e^{-i m 2 pi xi/tau} P(xi) dxi.

    ``samples`` are P at xi_j = j tau / n, j = 0..n-1 (trapezoid rule on the
    period, i.e. a DFT).
    """
    p = np.asarray(samples, dtype=float).ravel()
    n = p.size
    if n < 4 * n_coeffs:
        raise ValueError(f"need at least {4 * n_coeffs} samples, got {n}")
    F = np.fft.fft(p) / n
    m = np.arange(-n_coeffs, n_coeffs + 1)
    c = F[m % n]
    top = np.abs(c).max()
    if top > 0 and n_coeffs > 0 and max(abs(c[0]), abs(c[-1])) > 1e-3 * top:
        warnings.warn("outermost Fourier coefficient is not small; increase n_coeffs",
                      AliasingWarning, stacklevel=2)
    return FourierData(tau, c, which)


def measure_coeffs(tau: float, positions, weights, n_coeffs: int) -> FourierData:
    """Coefficients of the tau-periodic measure sum_j w_j sum_n delta_{x_j + tau n}."""
    x = np.asarray(positions, dtype=float)
    w = np.asarray(weights, dtype=float)
    m = np.arange(-n_coeffs, n_coeffs + 1)
    c = np.exp(-2j * np.pi * np.outer(m, x) / tau) @ w / tau
    return FourierData(tau, c, "Sigma")


def single_band_data(tau: float, n_coeffs: int) -> FourierData:
    """Sigma = sum_n delta_{tau n}: every coefficient equals 1/tau."""
    return FourierData(tau, np.full(2 * n_coeffs + 1, 1.0 / tau + 0j), "Sigma")


def flat_pair_data(tau: float, n_coeffs: int) -> FourierData:
    """Sigma = sum_n (delta_{tau n} - delta_{tau/2 + tau n})."""
    m = np.arange(-n_coeffs, n_coeffs + 1)
    return FourierData(tau, ((1.0 - (-1.0) ** m) / tau).astype(complex), "Sigma")


def _gamma_shift(n: int, tau: float) -> complex:
    # Gamma(1 - i 2 pi n / tau); exact at n = 0
    if n == 0:
        return 1.0 + 0j
    return cmath.exp(log_gamma(complex(1.0, -2.0 * math.pi * n / tau)))


def sigma_tilde(data: FourierData) -> FourierData:
    """Symbol coefficients -> measure coefficients (divide by Gamma(1 - i 2 pi n/tau))."""
    if data.which != "P":
        raise ValueError("expected symbol coefficients")
    N = data.n_coeffs
    g = np.array([_gamma_shift(n, data.tau) for n in range(-N, N + 1)])
    return FourierData(data.tau, data.coeffs / g, "Sigma")


def p_tilde(data: FourierData) -> FourierData:
    """Inverse of :func:`sigma_tilde`."""
    if data.which != "Sigma":
        raise ValueError("expected measure coefficients")
    N = data.n_coeffs
    g = np.array([_gamma_shift(n, data.tau) for n in range(-N, N + 1)])
    return FourierData(data.tau, data.coeffs * g, "P")


def gamma_vector(tau: float, k: float, n_fib: int) -> np.ndarray:
    """g_n(k) = Gamma(1/2 + i(2 pi n / tau + k)), n = -n_fib..n_fib."""
    step = 2.0 * math.pi / tau
    return np.array([cmath.exp(log_gamma(complex(0.5, step * n + k)))
                     for n in range(-n_fib, n_fib + 1)])


def fiber_matrix(data: FourierData, k: float, n_fib: int, route: str = "gamma") -> np.ndarray:
    """Truncated fiber h(k) of size 2*n_fib + 1.

    ``route='gamma'`` uses the factorised form with Gamma products,
    ``route='beta'`` the Beta-function entries with symbol coefficients.
    """
    tau = data.tau
    if abs(k) > math.pi / tau * (1.0 + 1e-12):
        raise ValueError("k must lie in the dual cell [-pi/tau, pi/tau]")
    if 2 * n_fib > data.n_coeffs:
        warnings.warn(f"coefficients beyond |m| = {data.n_coeffs} treated as zero",
                      TruncationWarning, stacklevel=2)
    idx = np.arange(-n_fib, n_fib + 1)
    diff = idx[:, None] - idx[None, :]
    if route == "gamma":
        S = data if data.which == "Sigma" else sigma_tilde(data)
        c = np.array([S.coeff(int(d)) for d in range(-2 * n_fib, 2 * n_fib + 1)])
        conv = c[diff + 2 * n_fib]
        g = gamma_vector(tau, k, n_fib)
        h = np.conj(g)[:, None] * conv * g[None, :]
    elif route == "beta":
        P = data if data.which == "P" else p_tilde(data)
        c = np.array([P.coeff(int(d)) for d in range(-2 * n_fib, 2 * n_fib + 1)])
        step = 2.0 * math.pi / tau
        h = np.empty((idx.size, idx.size), dtype=complex)
        for i, n in enumerate(idx):
            for j, m in enumerate(idx):
                cm = c[n - m + 2 * n_fib]
                h[i, j] = 0j if cm == 0 else beta_half_line(step * n + k, step * m + k) * cm
    else:
        raise ValueError(f"unknown route {route!r}")
    return h


def fiber_eigenvalues(data: FourierData, k: float, n_fib: int) -> np.ndarray:
    h = fiber_matrix(data, k, n_fib)
    return np.linalg.eigvalsh(0.5 * (h + h.conj().T))


def truncation_shift(data: FourierData, k: float, n_fib: int) -> float:
    """Largest shift of the significant fiber eigenvalues from n_fib to 2*n_fib."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TruncationWarning)
        a = fiber_eigenvalues(data, k, n_fib)
        b = fiber_eigenvalues(data, k, 2 * n_fib)
    scale = max(float(np.max(np.abs(b))), np.finfo(float).tiny)
    a = np.sort(a[np.abs(a) > 1e-10 * scale])
    b = np.sort(b[np.abs(b) > 1e-10 * scale])
    if a.size != b.size:
        return math.inf
    return float(np.max(np.abs(a - b))) if a.size else 0.0


# -- closed forms --------------------------------------------------------------

def single_band_E0(tau: float, k) -> np.ndarray:
    """E_0(k) = (pi/tau) sum_n sech(pi (2 pi n/tau + k))."""
    ks = np.atleast_1d(np.asarray(k, dtype=float))
    out = np.array([math.pi / tau * lattice_sech_sum(tau, float(x)) for x in ks])
    return out if np.ndim(k) else float(out[0])


def single_band_edges(tau: float) -> tuple:
    """(E_min, E_max) = (E_0(pi/tau), E_0(0))."""
    return single_band_E0(tau, math.pi / tau), single_band_E0(tau, 0.0)


def single_band_E0_dn(tau: float, k):
    """E_0 through Jacobi dn: E_0(k) = (K/pi) dn(K tau k / pi)."""
    p = modulus_from_period(tau)
    return p.K / math.pi * jacobi_dn(p.K * tau * np.asarray(k, dtype=float) / math.pi, p)


@dataclass(frozen=True)
class FlatPair:
    estar: float
    """K k' / pi^2: the constant value of sqrt(F^2 - G^2)/tau with F, G the
    plain and alternating lattice sech sums."""
    eigenvalue: float
    """Nonzero fiber eigenvalue of the alternating lattice, pi * estar."""
    max_deviation: float
    """Largest relative deviation of sqrt(F^2 - G^2)/tau from estar on the k-grid."""
    ks: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)


def flat_pair_Estar(tau: float, n_k: int = 64) -> FlatPair:
    p = modulus_from_period(tau)
    estar = p.K * p.kp / math.pi**2
    ks = np.linspace(-math.pi / tau, math.pi / tau, n_k)
    # F^2 - G^2 = (F + G)(F - G) = 4 * (even-site sum) * (odd-site sum); this
    # avoids the cancellation F ~ G at small tau
    step = 2.0 * math.pi / tau
    vals = np.array([
        2.0 * math.sqrt(lattice_sech_sum(0.5 * tau, x) * lattice_sech_sum(0.5 * tau, x + step)) / tau
        for x in ks
    ])
    dev = float(np.max(np.abs(vals - estar))) / estar
    return FlatPair(estar, math.pi * estar, dev, ks, vals)


# -- bands ---------------------------------------------------------------------

@dataclass
class Band:
    values: np.ndarray
    flat: bool
    edges: tuple
    sign: int

    @property
    def lo(self) -> float:
        return self.edges[0]

    @property
    def hi(self) -> float:
        return self.edges[1]


@dataclass
class BandStructure:
    tau: float
    ks: np.ndarray
    bands: List[Band]
    n_fib: int
    notes: List[str] = field(default_factory=list)

    @property
    def n_flat(self) -> int:
        return sum(b.flat for b in self.bands)


def k_mesh(tau: float, k_count: int) -> np.ndarray:
    """Half-open midpoint mesh of (0, pi/tau)."""
    return (np.arange(k_count) + 0.5) * (math.pi / tau) / k_count


def _split_signs(ev: np.ndarray, floor: float):
    pos = np.sort(ev[ev > floor])[::-1]
    neg = np.sort(ev[ev < -floor])
    return pos, neg


def band_structure(data: FourierData, k_count: int = 64, n_fib: int = 12,
                   flat_tol: float = 1e-9, discard_floor: float = 1e-10,
                   edge_eps: float = 1e-6, map_fn=map) -> BandStructure:
    """Band functions on the k-mesh, matched by sorted order within each sign.

    ``discard_floor`` is relative to the largest |E| over the mesh.
    ``map_fn`` lets a caller parallelise the per-k eigensolves.
    """
    if k_count < 16:
        raise ValueError("k_count must be at least 16")
    tau = data.tau
    ks = k_mesh(tau, k_count)
    probe = np.concatenate([ks, [edge_eps, math.pi / tau - edge_eps]])
    spectra = list(map_fn(lambda k: fiber_eigenvalues(data, float(k), n_fib), probe))
    scale = max(float(np.max(np.abs(s))) for s in spectra) if spectra else 0.0
    floor = discard_floor * scale
    split = [_split_signs(s, floor) for s in spectra]
    n_pos = {p.size for p, _ in split}
    n_neg = {q.size for _, q in split}
    if len(n_pos) != 1 or len(n_neg) != 1:
        raise ResolutionError(
            "branch count changes across the k-mesh; increase n_fib or k_count "
            f"(positive counts {sorted(n_pos)}, negative counts {sorted(n_neg)})")
    P = np.array([p for p, _ in split]) if n_pos.pop() else np.zeros((probe.size, 0))
    Q = np.array([q for _, q in split]) if n_neg.pop() else np.zeros((probe.size, 0))
    bands: List[Band] = []
    notes: List[str] = []
    for arr, sign in ((P, 1), (Q, -1)):
        for j in range(arr.shape[1]):
            full = arr[:, j]
            vals = full[:k_count]
            lo, hi = float(full.min()), float(full.max())
            flat = (hi - lo) <= flat_tol * max(1.0, abs(float(vals.mean())))
            if not flat:
                d = np.diff(vals)
                if not (np.all(d > 0) or np.all(d < 0)):
                    notes.append(f"band {len(bands)} is not monotone on the mesh")
            bands.append(Band(vals, bool(flat), (lo, hi), sign))
    flats = [b for b in bands if b.flat]
    for b in bands:
        if b.flat:
            continue
        for f in flats:
            if b.lo <= f.lo <= b.hi:
                notes.append(f"flat band at {f.lo:.12g} touches a non-flat band")
    shift = truncation_shift(data, float(ks[k_count // 2]), n_fib)
    if shift > 1e-10:
        notes.append(f"fiber truncation shift {shift:.3e} at n_fib = {n_fib}; increase n_fib")
    return BandStructure(tau, ks, bands, n_fib, notes)


def ids_from_bands(bs: BandStructure, lambda_grid) -> IdsCurve:
    """nu((lambda, inf)) = (1/pi) sum Leb{E_n > lambda} + (1/tau) #{flat > lambda}."""
    lam = np.asarray(lambda_grid, dtype=float)
    kmax = math.pi / bs.tau
    out = np.zeros(lam.shape)
    for b in bs.bands:
        if b.flat:
            out += (b.lo > lam) / bs.tau
        else:
            vals = b.values
            lo, hi = b.edges
            # use the probed edges at the cell ends
            v = vals.copy()
            inc = v[-1] > v[0]
            left = lo if inc else hi
            right = hi if inc else lo
            ks = np.concatenate([[0.0], bs.ks, [kmax]])
            vv = np.concatenate([[left], v, [right]])
            out += np.array([_level_measure(ks, vv, float(x)) for x in lam]) / math.pi
    return IdsCurve(lam, out, math.inf, "fiber", f"periodic tau={bs.tau:.17g}")


def _level_measure(ks: np.ndarray, vals: np.ndarray, lam: float) -> float:
    """Measure of {E > lam} on [ks[0], ks[-1]] with E piecewise linear."""
    x, y = ks, vals
    total = 0.0
    for i in range(x.size - 1):
        y0, y1 = y[i], y[i + 1]
        dx = x[i + 1] - x[i]
        if y0 > lam and y1 > lam:
            total += dx
        elif y0 > lam or y1 > lam:
            total += dx * (max(y0, y1) - lam) / abs(y1 - y0)
    return total


def gap_labels(bs: BandStructure, lam: float) -> int:
    """Integer N with nu((lam, inf)) = N / tau for lam in a gap."""
    for b in bs.bands:
        if b.lo <= lam <= b.hi:
            raise GapError(f"lambda = {lam:.12g} lies inside the band [{b.lo:.12g}, {b.hi:.12g}]")
    n = sum(1 for b in bs.bands if b.lo > lam)
    ids = float(ids_from_bands(bs, [lam]).values[0]) * bs.tau
    if abs(ids - n) > 1e-9:
        raise ResolutionError(f"gap label {n} disagrees with tau * IDS = {ids:.12g}")
    return n
