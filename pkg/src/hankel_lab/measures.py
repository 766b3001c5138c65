"""Measures parametrising positive Hankel operators.

``sigma`` lives on the half-line (Laplace representation of the kernel
function), ``Sigma`` on the line; they are related by t = exp(-xi) with
dSigma = dsigma / t.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

SIGMA_HALF_LINE = "sigma"
SIGMA_LINE = "Sigma"
_AXES = (SIGMA_HALF_LINE, SIGMA_LINE)


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite sum of point masses, kept sorted with coincident atoms merged."""

    positions: np.ndarray
    weights: np.ndarray
    axis: str = SIGMA_LINE
    signed: bool = False

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"unknown axis {self.axis!r}")
        pos = np.asarray(self.positions, dtype=float).ravel()
        w = np.asarray(self.weights, dtype=float).ravel()
        if pos.shape != w.shape:
            raise ValueError("positions and weights differ in length")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(w))):
            raise ValueError("non-finite atom")
        order = np.argsort(pos, kind="stable")
        pos, w = pos[order], w[order]
        if pos.size > 1:
            uniq, start = np.unique(pos, return_index=True)
            if uniq.size != pos.size:
                w = np.add.reduceat(w, start)
                pos = uniq
        if self.axis == SIGMA_HALF_LINE and np.any(pos <= 0.0):
            raise ValueError("atoms of sigma must sit at positive positions")
        if not self.signed and np.any(w < 0.0):
            raise ValueError("negative weight in an unsigned measure")
        pos.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "weights", w)

    def __len__(self) -> int:
        return self.positions.size

    @classmethod
    def empty(cls, axis: str = SIGMA_LINE) -> "AtomicMeasure":
        return cls(np.empty(0), np.empty(0), axis)

    @classmethod
    def lattice(cls, tau: float, n_lo: int, n_hi: int, weight: float = 1.0,
                offset: float = 0.0) -> "AtomicMeasure":
        """Atoms at offset + tau*n, n_lo <= n <= n_hi, equal weights."""
        n = np.arange(n_lo, n_hi + 1)
        return cls(offset + tau * n, np.full(n.size, float(weight)), SIGMA_LINE)

    def shifted(self, s: float) -> "AtomicMeasure":
        return AtomicMeasure(self.positions + s, self.weights, self.axis, self.signed)

    def restrict(self, lo: float, hi: float) -> "AtomicMeasure":
        """Atoms with lo <= position < hi."""
        m = (self.positions >= lo) & (self.positions < hi)
        return AtomicMeasure(self.positions[m], self.weights[m], self.axis, self.signed)

    def total_mass(self) -> float:
        return float(self.weights.sum())

    def __eq__(self, other):
        if not isinstance(other, AtomicMeasure):
            return NotImplemented
        return (self.axis == other.axis and self.signed == other.signed
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.weights, other.weights))

    __hash__ = None


@dataclass(frozen=True)
class DensityMeasure:
    """Absolutely continuous measure sampled on the grid start + i*step."""

    start: float
    step: float
    values: np.ndarray
    axis: str = SIGMA_LINE

    def __post_init__(self):
        if self.axis not in _AXES:
            raise ValueError(f"unknown axis {self.axis!r}")
        if not self.step > 0.0:
            raise ValueError("grid spacing must be positive")
        v = np.asarray(self.values, dtype=float).ravel()
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise ValueError("density samples must be finite and non-negative")
        if self.axis == SIGMA_HALF_LINE and self.start < 0.0:
            raise ValueError("sigma densities live on the half-line")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def grid(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.values.size)

    @property
    def stop(self) -> float:
        return self.start + self.step * (self.values.size - 1)

    def density(self, x) -> np.ndarray:
        """Linear interpolation of the samples, zero outside the grid."""
        return np.interp(x, self.grid, self.values, left=0.0, right=0.0)

    @classmethod
    def constant(cls, lo: float, hi: float, step: float, value: float = 1.0,
                 axis: str = SIGMA_LINE) -> "DensityMeasure":
        n = int(round((hi - lo) / step)) + 1
        return cls(lo, (hi - lo) / (n - 1), np.full(n, float(value)), axis)


Measure = Union[AtomicMeasure, DensityMeasure]


def _require_axis(m: Measure, axis: str) -> None:
    if m.axis != axis:
        raise ValueError(f"expected a measure on axis {axis!r}, got {m.axis!r}")


def _require_unsigned(m: Measure) -> None:
    if isinstance(m, AtomicMeasure) and m.signed and np.any(m.weights < 0):
        raise ValueError("operation needs a positive measure; got signed weights")


def pushforward_sigma_to_Sigma(sigma: Measure) -> Measure:
    """Change of variables t = exp(-xi) from sigma on R+ to Sigma on R."""
    _require_axis(sigma, SIGMA_HALF_LINE)
    if isinstance(sigma, AtomicMeasure):
        t = sigma.positions
        return AtomicMeasure(-np.log(t), sigma.weights / t, SIGMA_LINE, sigma.signed)
    lo = max(sigma.start, sigma.step)  # t = 0 has no preimage
    hi = sigma.stop
    if not hi > lo:
        raise ValueError("density grid does not reach positive t")
    n = sigma.values.size
    xi = np.linspace(-math.log(hi), -math.log(lo), n)
    return DensityMeasure(xi[0], xi[1] - xi[0], sigma.density(np.exp(-xi)), SIGMA_LINE)


def pushforward_Sigma_to_sigma(Sigma: Measure) -> Measure:
    """Inverse of :func:`pushforward_sigma_to_Sigma`."""
    _require_axis(Sigma, SIGMA_LINE)
    if isinstance(Sigma, AtomicMeasure):
        t = np.exp(-Sigma.positions)
        return AtomicMeasure(t, Sigma.weights * t, SIGMA_HALF_LINE, Sigma.signed)
    n = Sigma.values.size
    t = np.linspace(math.exp(-Sigma.stop), math.exp(-Sigma.start), n)
    return DensityMeasure(t[0], t[1] - t[0], Sigma.density(-np.log(t)), SIGMA_HALF_LINE)


def carleson_constant(sigma: AtomicMeasure) -> float:
    """sup_a sigma((0, a)) / a for an atomic sigma.

    sigma((0,a))/a is c/a between atoms, so the supremum is approached as
    a decreases to an atom position from the right.
    """
    _require_axis(sigma, SIGMA_HALF_LINE)
    _require_unsigned(sigma)
    if not isinstance(sigma, AtomicMeasure):
        raise TypeError("carleson_constant is exact for atomic measures only")
    if len(sigma) == 0:
        return 0.0
    cum = np.cumsum(sigma.weights)
    return float(np.max(cum / sigma.positions))


def local_bound_constant(Sigma: Measure, window_count: int = 1) -> float:
    """max_n Sigma([n - w, n)) over integer n, with w = window_count unit cells."""
    _require_axis(Sigma, SIGMA_LINE)
    _require_unsigned(Sigma)
    if window_count < 1:
        raise ValueError("window_count must be >= 1")
    if isinstance(Sigma, AtomicMeasure):
        if len(Sigma) == 0:
            return 0.0
        cells = np.floor(Sigma.positions).astype(np.int64)
        weights = Sigma.weights
    else:
        # midpoint rule per grid cell
        x = Sigma.grid
        mid = 0.5 * (x[:-1] + x[1:])
        weights = 0.5 * (Sigma.values[:-1] + Sigma.values[1:]) * Sigma.step
        cells = np.floor(mid).astype(np.int64)
        if cells.size == 0:
            return 0.0
    lo = int(cells.min())
    mass = np.bincount(cells - lo, weights=weights)
    if window_count > 1:
        mass = np.convolve(mass, np.ones(window_count))
    return float(mass.max())


def support_density(Sigma: AtomicMeasure, M: float) -> float:
    """#(supp Sigma within (-M, M)) / (2M)."""
    if not isinstance(Sigma, AtomicMeasure):
        raise TypeError("support_density needs an atomic measure")
    p = Sigma.positions[Sigma.weights != 0.0]
    return float(np.count_nonzero((p > -M) & (p < M))) / (2.0 * M)


@dataclass(frozen=True)
class BlaschkeResult:
    sum: float
    kernel_infinite: bool
    partial_sums: np.ndarray = field(repr=False)


def blaschke_kernel_test(Sigma: AtomicMeasure, rtol: float = 1e-6) -> BlaschkeResult:
    """Sum of sech over the support, with a convergence flag.

    Atoms are taken in order of increasing |xi|. The flag is a finite-window
    proxy: it is set when the farther half of the atoms changes the partial sum
    by at most ``rtol`` relatively. Weights play no role.
    """
    if not isinstance(Sigma, AtomicMeasure):
        raise TypeError("the kernel criterion applies to pure point measures only")
    p = Sigma.positions[Sigma.weights != 0.0]
    if p.size == 0:
        return BlaschkeResult(0.0, True, np.zeros(0))
    p = p[np.argsort(np.abs(p), kind="stable")]
    terms = 1.0 / np.cosh(np.minimum(np.abs(p), 700.0))
    partial = np.cumsum(terms)
    total = float(partial[-1])
    half = float(partial[(p.size - 1) // 2])
    converged = (total - half) <= rtol * total
    return BlaschkeResult(total, bool(converged), partial)


def random_atomic_sigma(rng: np.random.Generator, max_atoms: int = 40,
                        t_range=(1e-3, 1e3), w_range=(1e-3, 1e1)) -> AtomicMeasure:
    """Random atomic sigma: 1..max_atoms atoms, log-uniform positions and weights."""
    n = int(rng.integers(1, max_atoms + 1))
    t = np.exp(rng.uniform(math.log(t_range[0]), math.log(t_range[1]), n))
    w = np.exp(rng.uniform(math.log(w_range[0]), math.log(w_range[1]), n))
    return AtomicMeasure(t, w, SIGMA_HALF_LINE)
