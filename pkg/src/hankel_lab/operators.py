"""Hankel kernels on L^2(R) and their finite sections.

Two truncations are provided: ``nystrom_section`` restricts the integral
kernel to a window (midpoint Nystrom on a uniform grid) and ``atom_section``
restricts the defining measure Sigma to the window and works in the
coefficient space of the translates beta(. - xi_j).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from .measures import AtomicMeasure, DensityMeasure, SIGMA_LINE

NODE_CAP = 8192
ATOM_CAP = 8192
TAIL_CUTOFF = 80.0


class ResourceError(RuntimeError):
    """A section would exceed its configured size cap."""


class SingularGramError(np.linalg.LinAlgError):
    """The Gram matrix is too ill-conditioned for its square root."""


# -- kernel descriptions -----------------------------------------------------

@dataclass(frozen=True)
class Carleman:
    """h(t) = 1/t, i.e. the constant symbol P = 1."""

    bound: float = 1.0


@dataclass(frozen=True)
class Periodic:
    """Symbol P(xi) = sum_m coeffs[m] exp(2 pi i m xi / tau), m = -Nc..Nc."""

    coeffs: np.ndarray
    tau: float
    bound: Optional[float] = None

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex).ravel()
        if c.size % 2 != 1:
            raise ValueError("coefficients must be indexed by m = -Nc..Nc")
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        object.__setattr__(self, "coeffs", c)
        sup = float(np.max(np.abs(self.symbol(np.linspace(0.0, self.tau, 4 * c.size + 64)))))
        if self.bound is None:
            object.__setattr__(self, "bound", float(np.sum(np.abs(c))))
        elif sup > self.bound * (1.0 + 1e-12):
            raise ValueError(f"sup|P| = {sup:.6g} exceeds the declared bound {self.bound:.6g}")

    @classmethod
    def constant(cls, value: float, tau: float = 2.0 * math.pi) -> "Periodic":
        return cls(np.array([complex(value)]), tau, abs(float(value)))

    @classmethod
    def from_fourier(cls, data, bound: Optional[float] = None) -> "Periodic":
        """Build from symbol Fourier data (``which == 'P'``)."""
        if data.which != "P":
            raise ValueError("need symbol coefficients, convert with sigma_tilde first")
        return cls(data.coeffs, data.tau, bound)

    @property
    def n_coeffs(self) -> int:
        return (self.coeffs.size - 1) // 2

    def symbol(self, xi) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        m = np.arange(-self.n_coeffs, self.n_coeffs + 1)
        phase = np.exp(2j * np.pi * np.multiply.outer(xi, m) / self.tau)
        return np.real(phase @ self.coeffs)


@dataclass(frozen=True)
class PositiveFromMeasure:
    Sigma: Union[AtomicMeasure, DensityMeasure]

    def __post_init__(self):
        if self.Sigma.axis != SIGMA_LINE:
            raise ValueError("PositiveFromMeasure takes Sigma on the line")


@dataclass(frozen=True)
class RkphSample:
    """One realisation: atoms at tau*n, n = -N..N, with weights kappa(n)."""

    weights: np.ndarray
    tau: float
    support: tuple = (0.0, math.inf)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float).ravel()
        if w.size % 2 != 1:
            raise ValueError("weights must be indexed by n = -N..N")
        lo, hi = self.support
        if np.any(w < lo) or np.any(w > hi):
            raise ValueError("weights outside the declared support")
        object.__setattr__(self, "weights", w)

    def as_measure(self) -> AtomicMeasure:
        N = (self.weights.size - 1) // 2
        return AtomicMeasure(self.tau * np.arange(-N, N + 1), self.weights)


KernelSpec = Union[Carleman, Periodic, PositiveFromMeasure, RkphSample]


def symbol_bound(spec: KernelSpec) -> float:
    """A constant C_h with |h(t)| <= C_h / t."""
    if isinstance(spec, Carleman):
        return spec.bound
    if isinstance(spec, Periodic):
        return float(spec.bound)
    if isinstance(spec, RkphSample):
        spec = PositiveFromMeasure(spec.as_measure())
    if isinstance(spec, PositiveFromMeasure):
        Sigma = spec.Sigma
        if isinstance(Sigma, DensityMeasure):
            # t h(t) <= sup S * int u e^{-u} du/u... = sup S
            return float(Sigma.values.max(initial=0.0))
        if isinstance(Sigma, AtomicMeasure) and Sigma.signed and np.any(Sigma.weights < 0):
            return float(_sup_t_h(Sigma, absolute=True))
        return float(_sup_t_h(Sigma))
    raise TypeError(f"unknown kernel spec {spec!r}")


def _sup_t_h(Sigma: AtomicMeasure, absolute: bool = False) -> float:
    if len(Sigma) == 0:
        return 0.0
    # t h(t) = sum_j w_j u_j e^{-u_j}, u_j = t e^{-xi_j}; scan log t densely
    log_t = np.arange(Sigma.positions.min() - 40.0, Sigma.positions.max() + 40.0, 0.01)
    w = np.abs(Sigma.weights) if absolute else Sigma.weights
    best = 0.0
    for chunk in np.array_split(log_t, max(1, log_t.size // 2048)):
        u = np.exp(chunk[:, None] - Sigma.positions[None, :])
        best = max(best, float(np.max((u * np.exp(-u)) @ w)))
    return best


# -- pointwise kernels ---------------------------------------------------------

def beta_profile(xi):
    """beta(xi) = exp(-e^xi) e^{xi/2}."""
    xi = np.asarray(xi, dtype=float)
    with np.errstate(over="ignore"):
        out = np.exp(-np.exp(np.minimum(xi, 700.0)) + 0.5 * xi)
    return out if out.ndim else float(out)


def gram_overlap(a, b):
    """<beta(. - a), beta(. - b)> = sech((a - b)/2) / 2."""
    d = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    out = 0.5 / np.cosh(np.minimum(0.5 * d, 700.0))
    return out if out.ndim else float(out)


def _log_sum_exp(x, y):
    hi = np.maximum(x, y)
    return hi + np.log1p(np.exp(-np.abs(x - y)))


def hankel_kernel_xy(spec: KernelSpec, x, y):
    """Integral kernel H(x, y) of the transplanted operator; broadcasts."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if isinstance(spec, RkphSample):
        spec = PositiveFromMeasure(spec.as_measure())
    if isinstance(spec, Carleman):
        out = spec.bound * 0.5 / np.cosh(np.minimum(0.5 * np.abs(x - y), 700.0))
    elif isinstance(spec, Periodic):
        out = spec.symbol(_log_sum_exp(x, y)) * 0.5 / np.cosh(
            np.minimum(0.5 * np.abs(x - y), 700.0))
    elif isinstance(spec, PositiveFromMeasure):
        out = _measure_kernel(spec.Sigma, x, y)
    else:
        raise TypeError(f"no pointwise kernel for {spec!r}")
    return out if out.ndim else float(out)


def _measure_quadrature(Sigma):
    if isinstance(Sigma, AtomicMeasure):
        return Sigma.positions, Sigma.weights
    w = Sigma.values * Sigma.step
    w = w.copy()
    w[0] *= 0.5
    w[-1] *= 0.5
    return Sigma.grid, w


def _measure_kernel(Sigma, x, y):
    xi, w = _measure_quadrature(Sigma)
    x, y = np.broadcast_arrays(x, y)
    bx = beta_profile(np.subtract.outer(x, xi))
    by = beta_profile(np.subtract.outer(y, xi))
    return np.sum(bx * by * w, axis=-1)


def laplace_kernel(Sigma: AtomicMeasure, t):
    """h(t) = int exp(-t e^{-xi}) e^{-xi} dSigma(xi)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0.0):
        raise ValueError("t must be positive")
    xi, w = _measure_quadrature(Sigma)
    if xi.size == 0:
        return np.zeros(t.shape) if t.ndim else 0.0
    e = np.exp(-xi)
    out = np.exp(-np.multiply.outer(t, e)) @ (e * w)
    return out if out.ndim else float(out)


# -- sections -----------------------------------------------------------------

@dataclass(frozen=True)
class GridWindow:
    """Midpoint grid of spacing ``dx`` covering [-M, M], centred on 0."""

    M: float
    dx: float

    def __post_init__(self):
        if not (self.M > 0.0 and self.dx > 0.0):
            raise ValueError("window half-width and spacing must be positive")
        if self.n_nodes < 2:
            raise ValueError("window holds fewer than two nodes")

    @property
    def n_nodes(self) -> int:
        return max(1, int(math.ceil(2.0 * self.M / self.dx - 1e-9)))

    @property
    def nodes(self) -> np.ndarray:
        n = self.n_nodes
        return (np.arange(n) - 0.5 * (n - 1)) * self.dx


@dataclass
class SymmetricSection:
    matrix: np.ndarray
    scheme: str
    M: float
    dx: Optional[float] = None
    labels: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def length(self) -> float:
        """Normalisation length 2M of the window."""
        return 2.0 * self.M


def nystrom_section(spec: KernelSpec, window: GridWindow, cap: int = NODE_CAP) -> SymmetricSection:
    """A[i, j] = dx * H(x_i, x_j) on the midpoint nodes."""
    n = window.n_nodes
    if n > cap:
        raise ResourceError(f"{n} Nystrom nodes exceed the cap of {cap}")
    x = window.nodes
    dx = window.dx
    if isinstance(spec, RkphSample):
        spec = PositiveFromMeasure(spec.as_measure())
    if isinstance(spec, PositiveFromMeasure):
        xi, w = _measure_quadrature(spec.Sigma)
        keep = (xi > x[0] - 45.0) & (xi < x[-1] + TAIL_CUTOFF)
        xi, w = xi[keep], w[keep]
        B = beta_profile(np.subtract.outer(x, xi))
        A = (B * w) @ B.T * dx
        A = 0.5 * (A + A.T)
    else:
        A = np.empty((n, n))
        for i in range(n):
            A[i, i:] = hankel_kernel_xy(spec, x[i], x[i:]) * dx
            A[i:, i] = A[i, i:]
    far = np.abs(np.subtract.outer(x, x)) > TAIL_CUTOFF
    if far.any():
        A[far] = 0.0
    return SymmetricSection(A, "a", window.M, dx, x)


def gram_matrix(positions) -> np.ndarray:
    p = np.asarray(positions, dtype=float)
    return gram_overlap(p[:, None], p[None, :])


def atom_section(Sigma: AtomicMeasure, M: Union[float, GridWindow],
                 cap: int = ATOM_CAP, eig_floor: float = 1e-13) -> SymmetricSection:
    """Finite section from the atoms of Sigma in [-M, M).

    The nonzero spectrum matches that of the operator with kernel
    int_{-M}^{M} beta(x - xi) beta(y - xi) dSigma(xi).
    """
    if not isinstance(Sigma, AtomicMeasure):
        raise TypeError("atom_section needs an atomic measure; discretise densities first")
    if isinstance(M, GridWindow):
        M = M.M
    inside = Sigma.restrict(-M, M)
    n = len(inside)
    if n > cap:
        raise ResourceError(f"{n} atoms exceed the cap of {cap}")
    if n == 0:
        return SymmetricSection(np.zeros((0, 0)), "b", M, labels=np.empty(0))
    G = gram_matrix(inside.positions)
    w = inside.weights
    if np.all(w >= 0.0):
        # sqrt of the product keeps exact cases exact (w = 2 gives 2 * 1/2 = 1)
        A = np.sqrt(np.outer(w, w)) * G
    else:
        evals, evecs = np.linalg.eigh(G)
        top = evals[-1]
        if evals[0] < eig_floor * top:
            raise SingularGramError(
                f"Gram matrix condition estimate {top / max(evals[0], 1e-300):.3e} "
                f"too large for a square root")
        root = (evecs * np.sqrt(evals)) @ evecs.T
        A = root @ (w[:, None] * root)
    A = 0.5 * (A + A.T)
    return SymmetricSection(A, "b", M, labels=inside.positions)


def discretize_density(Sigma: DensityMeasure, lo: float, hi: float, dx: float) -> AtomicMeasure:
    """Midpoint-rule atoms for a density restricted to [lo, hi)."""
    n = max(1, int(math.ceil((hi - lo) / dx - 1e-9)))
    h = (hi - lo) / n
    xi = lo + (np.arange(n) + 0.5) * h
    return AtomicMeasure(xi, Sigma.density(xi) * h)
