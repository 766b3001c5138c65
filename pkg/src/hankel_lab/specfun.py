"""Special functions used by the fiber matrices and the elliptic checks.

Complex log-Gamma (Lanczos), Beta on the critical lines, lattice sech sums,
the complete elliptic integral K, Jacobi dn/cn through their nome series and
the modulus solver for a prescribed period ratio.
"""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "EllipticParams",
    "ConvergenceError",
    "log_gamma",
    "gamma_abs2_half_line",
    "beta_half_line",
    "lattice_sech_sum",
    "elliptic_K",
    "modulus_from_period",
    "jacobi_dn",
    "jacobi_cn",
]


class ConvergenceError(RuntimeError):
    """An iterative routine hit its iteration cap."""


# Lanczos coefficients for g = 7, n = 9.
_LANCZOS_G = 7.0
_LANCZOS_P = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(z: complex) -> complex:
    """Principal-branch-free log Gamma for Re z > 0.

    The returned ``w`` satisfies ``exp(w) == Gamma(z)``; the imaginary part is
    the continuous one obtained from the Lanczos form, not reduced mod 2*pi.
    """
    z = complex(z)
    if not z.real > 0.0:
        raise ValueError(f"log_gamma needs Re z > 0, got {z!r}")
    zm = z - 1.0
    acc = complex(_LANCZOS_P[0])
    for i in range(1, len(_LANCZOS_P)):
        acc += _LANCZOS_P[i] / (zm + i)
    t = zm + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (zm + 0.5) * cmath.log(t) - t + cmath.log(acc)


def gamma_abs2_half_line(u: float) -> float:
    """|Gamma(1/2 - iu)|^2, which equals pi sech(pi u)."""
    x = math.pi * abs(u)
    if x > 700.0:
        return 0.0
    return math.pi / math.cosh(x)


def beta_half_line(a: float, b: float) -> complex:
    """B(1/2 - ia, 1/2 + ib) = Gamma(1/2-ia) Gamma(1/2+ib) / Gamma(1-ia+ib)."""
    w = (
        log_gamma(complex(0.5, -a))
        + log_gamma(complex(0.5, b))
        - log_gamma(complex(1.0, b - a))
    )
    return cmath.exp(w)


def _sech(x: float) -> float:
    ax = abs(x)
    if ax > 700.0:
        return 0.0
    return 1.0 / math.cosh(ax)


def lattice_sech_sum(tau: float, k: float, alternating: bool = False) -> float:
    """Sum over n of (+-1)^n sech(pi (2 pi n / tau + k)).

    Terms are accumulated outward from the lattice point nearest to the peak
    until they drop below 1e-18 on both sides.
    """
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    step = 2.0 * math.pi / tau
    n0 = int(round(-k / step))
    total = 0.0
    # separate sides so that both tails are exhausted
    for direction in (1, -1):
        n = n0 if direction == 1 else n0 - 1
        while True:
            term = _sech(math.pi * (step * n + k))
            if alternating and n % 2:
                total -= term
            else:
                total += term
            if term < 1e-18:
                break
            n += direction
    return total


def elliptic_K(k: float) -> float:
    """Complete elliptic integral of the first kind via the AGM."""
    if not 0.0 <= k < 1.0:
        raise ValueError(f"elliptic_K needs 0 <= k < 1, got {k!r}")
    kp = math.sqrt((1.0 - k) * (1.0 + k))
    return _K_from_complement(kp)


def _K_from_complement(kp: float) -> float:
    # K(k) = pi / (2 AGM(1, k'))
    a, b = 1.0, kp
    for _ in range(64):
        if abs(a - b) <= 1e-15 * a:
            return math.pi / (a + b)
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    raise ConvergenceError("AGM did not converge in 64 iterations")


@dataclass(frozen=True)
class EllipticParams:
    k: float
    kp: float
    K: float
    Kp: float

    @property
    def nome(self) -> float:
        return math.exp(-math.pi * self.Kp / self.K)

    @property
    def ratio(self) -> float:
        """K'/K."""
        return self.Kp / self.K

    @classmethod
    def from_modulus(cls, k: float, kp: float | None = None) -> "EllipticParams":
        if kp is None:
            kp = math.sqrt((1.0 - k) * (1.0 + k))
        return cls(k=k, kp=kp, K=_K_from_complement(kp), Kp=_K_from_complement(k))


def _solve_ratio(target: float, max_iter: int) -> tuple[float, float]:
    """Find (k, k') with K'/K = target >= 1, i.e. k <= 1/sqrt(2)."""
    lo, hi = 1e-12, 1.0 / math.sqrt(2.0)

    def ratio(k: float) -> float:
        kp = math.sqrt((1.0 - k) * (1.0 + k))
        return _K_from_complement(k) / _K_from_complement(kp)

    # K'/K is decreasing in k
    if ratio(lo) < target:
        raise ConvergenceError(f"period ratio {target} outside the solvable bracket")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if ratio(mid) > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 2.0 * math.ulp(hi):
            break
    else:
        raise ConvergenceError("modulus bisection exceeded its iteration cap")
    k = 0.5 * (lo + hi)
    return k, math.sqrt((1.0 - k) * (1.0 + k))


def modulus_from_period(tau: float, max_iter: int = 400) -> EllipticParams:
    """Elliptic modulus with K'(k)/K(k) = tau / (2 pi).

    For ratios below one the complementary problem is solved and k, k' are
    swapped, which keeps the bisection variable away from k -> 1.
    """
    if not tau > 0.0:
        raise ValueError("tau must be positive")
    target = tau / (2.0 * math.pi)
    if target >= 1.0:
        k, kp = _solve_ratio(target, max_iter)
    else:
        kp, k = _solve_ratio(1.0 / target, max_iter)
    p = EllipticParams.from_modulus(k, kp)
    if abs(p.ratio - target) > 1e-12 * max(1.0, target):
        raise ConvergenceError(
            f"modulus residual {abs(p.ratio - target):.3e} exceeds 1e-12"
        )
    return p


def jacobi_dn(u, p: EllipticParams):
    """dn(u, k) from its cosine series in the nome; vectorised over u."""
    u = np.asarray(u, dtype=float)
    r = math.pi * p.ratio
    acc = np.full(u.shape, math.pi / (2.0 * p.K))
    n = 1
    while True:
        c = _sech(n * r)
        if c < 1e-17:
            break
        acc = acc + (math.pi / p.K) * c * np.cos(n * math.pi * u / p.K)
        n += 1
        if n > 10_000_000:
            raise ConvergenceError("dn series did not converge")
    return acc if acc.ndim else float(acc)


def jacobi_cn(u, p: EllipticParams):
    """cn(u, k) from its cosine series in the nome; vectorised over u."""
    u = np.asarray(u, dtype=float)
    r = math.pi * p.ratio
    acc = np.zeros(u.shape)
    n = 0
    while True:
        c = _sech((2 * n + 1) * r / 2.0)
        if c < 1e-17:
            break
        acc = acc + c * np.cos((2 * n + 1) * math.pi * u / (2.0 * p.K))
        n += 1
        if n > 10_000_000:
            raise ConvergenceError("cn series did not converge")
    acc = acc * (math.pi / (p.k * p.K))
    return acc if acc.ndim else float(acc)
