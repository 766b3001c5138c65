"""Eigensolving, eigenvalue counting and IDS estimates from finite sections."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .operators import (
    Carleman,
    DensityMeasure,
    GridWindow,
    KernelSpec,
    Periodic,
    PositiveFromMeasure,
    RkphSample,
    SymmetricSection,
    atom_section,
    discretize_density,
    nystrom_section,
    symbol_bound,
)


class EigenError(np.linalg.LinAlgError):
    """Eigensolver failed or missed its residual contract."""


@dataclass
class Spectrum:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray] = field(default=None, repr=False)
    residual: float = 0.0


def eig_sym(A, want_vectors: bool = False) -> Spectrum:
    """Full spectrum of a real symmetric matrix (LAPACK divide and conquer)."""
    M = A.matrix if isinstance(A, SymmetricSection) else np.asarray(A, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("need a square matrix")
    if M.shape[0] == 0:
        return Spectrum(np.zeros(0), np.zeros((0, 0)) if want_vectors else None)
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    try:
        if not want_vectors:
            return Spectrum(np.linalg.eigvalsh(M))
        w, V = np.linalg.eigh(M)
    except np.linalg.LinAlgError as exc:
        raise EigenError(f"symmetric eigensolver failed: {exc}") from exc
    norm = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
    r = float(np.max(np.linalg.norm(M @ V - V * w, axis=0))) / norm
    if r > 1e-10:
        raise EigenError(f"eigenvector residual {r:.3e} above 1e-10")
    return Spectrum(w, V, r)


@dataclass
class IdsCurve:
    """Estimated nu((lambda, inf)) on a positive lambda grid."""

    lambdas: np.ndarray
    values: np.ndarray
    length: float
    scheme: str
    model: str = ""

    def __post_init__(self):
        self.lambdas = np.asarray(self.lambdas, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.lambdas.shape != self.values.shape:
            raise ValueError("grid and values differ in shape")
        if np.any(np.diff(self.lambdas) <= 0.0):
            raise ValueError("lambda grid must be strictly increasing")

    @property
    def M(self) -> float:
        return 0.5 * self.length

    def __call__(self, lam):
        """Right-continuous step interpolation is not available; linear in between."""
        return np.interp(lam, self.lambdas, self.values)


def default_lambda_grid(bound: float, n: int = 120) -> np.ndarray:
    top = math.pi * bound
    return np.geomspace(0.02 * top, top, n)


def count_above(eigenvalues, lambdas) -> np.ndarray:
    """#{eigenvalues > lambda} for each lambda."""
    e = np.sort(np.asarray(eigenvalues, dtype=float))
    return e.size - np.searchsorted(e, np.asarray(lambdas, dtype=float), side="right")


def build_section(spec: KernelSpec, scheme: str, M: float, dx: float) -> SymmetricSection:
    if scheme == "a":
        return nystrom_section(spec, GridWindow(M, dx))
    if scheme != "b":
        raise ValueError(f"unknown scheme {scheme!r}")
    if isinstance(spec, Carleman):
        # Sigma is Lebesgue measure scaled by the constant symbol
        Sigma = discretize_density(DensityMeasure.constant(-M - 1.0, M + 1.0, dx), -M, M, dx)
        sec = atom_section(Sigma.__class__(Sigma.positions, Sigma.weights * spec.bound), M)
        return sec
    if isinstance(spec, RkphSample):
        spec = PositiveFromMeasure(spec.as_measure())
    if isinstance(spec, PositiveFromMeasure):
        Sigma = spec.Sigma
        if isinstance(Sigma, DensityMeasure):
            Sigma = discretize_density(Sigma, -M, M, dx)
        return atom_section(Sigma, M)
    if isinstance(spec, Periodic):
        raise ValueError("scheme b needs a positive model given by its measure")
    raise TypeError(f"unknown kernel spec {spec!r}")


def ids_from_section(spec: KernelSpec, scheme: str, M: float, dx: float,
                     lambda_grid: Optional[Sequence[float]] = None,
                     model: str = "") -> IdsCurve:
    """nu((lambda, inf)) ~ #{eigenvalues of the section > lambda} / (2M)."""
    if lambda_grid is None:
        lambda_grid = default_lambda_grid(symbol_bound(spec) or 1.0)
    lam = np.asarray(lambda_grid, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("the lambda grid must be positive")
    sec = build_section(spec, scheme, M, dx)
    ev = eig_sym(sec).eigenvalues
    return IdsCurve(lam, count_above(ev, lam) / sec.length, sec.length, scheme, model)


def carleman_ids(lam):
    """nu_C((lambda, inf)) = arcsech(lambda/pi) / pi^2 (trace-consistent form)."""
    lam = np.asarray(lam, dtype=float)
    if np.any(lam <= 0.0):
        raise ValueError("carleman_ids is defined for lambda > 0")
    r = np.minimum(lam / math.pi, 1.0)
    out = np.log(1.0 / r + np.sqrt(1.0 / r**2 - 1.0)) / math.pi**2
    return out if out.ndim else float(out)


def carleman_density(lam):
    """d nu_C / d lambda = 1 / (pi^2 lambda sqrt(1 - lambda^2/pi^2)) on (0, pi)."""
    lam = np.asarray(lam, dtype=float)
    return 1.0 / (math.pi * lam * np.sqrt(math.pi**2 - lam**2))


def apply_function(A, phi: Callable) -> np.ndarray:
    """phi(A) through the eigendecomposition."""
    sp = eig_sym(A, want_vectors=True)
    return (sp.eigenvectors * phi(sp.eigenvalues)) @ sp.eigenvectors.T


@dataclass(frozen=True)
class SzegoTriple:
    tA: float
    tProj: float
    tB: float

    def max_pairwise(self) -> float:
        return max(abs(self.tA - self.tB), abs(self.tA - self.tProj), abs(self.tB - self.tProj))


def szego_triple(spec: KernelSpec, M: float, dx: float, phi: Callable,
                 margin: float = 40.0) -> SzegoTriple:
    """Normalised traces of phi for the two truncations and the projected operator.

    The middle entry approximates Tr(chi_M phi(H) chi_M) from a scheme-a
    section on the wider window [-M - margin, M + margin].
    """
    L = 2.0 * M
    sec_a = build_section(spec, "a", M, dx)
    tA = float(np.sum(phi(eig_sym(sec_a).eigenvalues))) / L
    sec_b = build_section(spec, "b", M, dx)
    tB = float(np.sum(phi(eig_sym(sec_b).eigenvalues))) / L
    ref = build_section(spec, "a", M + margin, dx)
    F = apply_function(ref, phi)
    inner = np.abs(ref.labels) < M
    tP = float(np.sum(np.diag(F)[inner])) / L
    return SzegoTriple(tA, tP, tB)


@dataclass(frozen=True)
class Moments:
    m1: Optional[float]
    m2: float
    bound: float
    ok: bool


def _is_positive(spec: KernelSpec) -> bool:
    if isinstance(spec, (Carleman, RkphSample)):
        return True
    if isinstance(spec, PositiveFromMeasure):
        S = spec.Sigma
        return not (getattr(S, "signed", False) and np.any(S.weights < 0))
    return False


def moment_check(spec: KernelSpec, M: float, dx: float) -> Moments:
    """Normalised Tr(A) and Tr(A^2) of the scheme-a section and their bounds.

    Bounds: Tr(A^2)/(2M) <= C_h^2 always, Tr(A)/(2M) <= C_h/2 when positive.
    """
    sec = build_section(spec, "a", M, dx)
    L = sec.length
    C = symbol_bound(spec)
    m2 = float(np.sum(sec.matrix * sec.matrix)) / L
    ok = m2 <= C * C * (1.0 + 1e-9)
    m1 = None
    if _is_positive(spec):
        m1 = float(np.trace(sec.matrix)) / L
        ok = ok and m1 <= 0.5 * C * (1.0 + 1e-9)
    return Moments(m1, m2, C, bool(ok))
