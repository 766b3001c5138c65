"""Random Kronig-Penney-Hankel model and Monte-Carlo diagnostics.

Sites sit at tau*n, n = -N..N, with i.i.d. weights kappa_n. The windowed
operator sum kappa_n <., psi_n> psi_n has the same nonzero spectrum as
K^{1/2} G K^{1/2} with G_ij = sech(tau (i - j)/2) / 2.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .measures import AtomicMeasure, BlaschkeResult
from .operators import SymmetricSection
from .spectra import IdsCurve, Spectrum, count_above, eig_sym
from .floquet import single_band_edges

_MASK64 = (1 << 64) - 1


# -- weight laws -------------------------------------------------------------

@dataclass(frozen=True)
class TwoPoint:
    a: float
    b: float
    p: float = 0.5
    """Probability of the value ``a``."""

    def __post_init__(self):
        if not (0.0 < self.a and 0.0 < self.b):
            raise ValueError("weights must be positive")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError("p must lie in [0, 1]")

    @property
    def support(self) -> Tuple[float, ...]:
        pts = []
        if self.p > 0.0:
            pts.append(self.a)
        if self.p < 1.0:
            pts.append(self.b)
        return tuple(sorted(set(pts)))

    @property
    def kappa_min(self) -> float:
        return min(self.support)

    @property
    def kappa_max(self) -> float:
        return max(self.support)

    rho_max = None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        u = rng.random(n)
        return np.where(u < self.p, self.a, self.b).astype(float)


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not 0.0 < self.lo < self.hi:
            raise ValueError("need 0 < lo < hi")

    @property
    def kappa_min(self) -> float:
        return self.lo

    @property
    def kappa_max(self) -> float:
        return self.hi

    @property
    def rho_max(self) -> float:
        return 1.0 / (self.hi - self.lo)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return self.lo + (self.hi - self.lo) * rng.random(n)


@dataclass(frozen=True)
class PointMass:
    value: float

    def __post_init__(self):
        if not self.value > 0.0:
            raise ValueError("weight must be positive")

    @property
    def support(self) -> Tuple[float, ...]:
        return (self.value,)

    @property
    def kappa_min(self) -> float:
        return self.value

    @property
    def kappa_max(self) -> float:
        return self.value

    rho_max = None

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.full(n, self.value)


DistributionSpec = Union[TwoPoint, Uniform, PointMass]


def dist_to_dict(d: DistributionSpec) -> dict:
    if isinstance(d, TwoPoint):
        return {"kind": "two_point", "a": d.a, "b": d.b, "p": d.p}
    if isinstance(d, Uniform):
        return {"kind": "uniform", "lo": d.lo, "hi": d.hi}
    if isinstance(d, PointMass):
        return {"kind": "point_mass", "value": d.value}
    raise TypeError(f"unknown distribution {d!r}")


def dist_from_dict(d: dict) -> DistributionSpec:
    kind = d.get("kind")
    if kind == "two_point":
        return TwoPoint(float(d["a"]), float(d["b"]), float(d.get("p", 0.5)))
    if kind == "uniform":
        return Uniform(float(d["lo"]), float(d["hi"]))
    if kind == "point_mass":
        return PointMass(float(d["value"]))
    raise ValueError(f"unknown distribution kind {kind!r}")


@dataclass(frozen=True)
class RkphConfig:
    tau: float
    N: int
    dist: DistributionSpec
    replicas: int = 1
    seed: int = 0
    lambdas: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not self.tau > 0.0:
            raise ValueError("tau must be positive")
        if self.N < 1 or self.replicas < 1:
            raise ValueError("need N >= 1 and replicas >= 1")

    @property
    def length(self) -> float:
        return 2.0 * self.tau * self.N

    @property
    def sites(self) -> int:
        return 2 * self.N + 1


# -- sampling ----------------------------------------------------------------

def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replica_seed(seed: int, replica: int) -> int:
    """64-bit stream seed for one replica; independent of the worker layout."""
    return splitmix64(splitmix64(seed & _MASK64) ^ (replica & _MASK64))


def replica_rng(seed: int, replica: int) -> np.random.Generator:
    return np.random.default_rng(replica_seed(seed, replica))


def sample_weights(cfg: RkphConfig, replica: int) -> np.ndarray:
    """kappa(-N..N) for one replica."""
    if not 0 <= replica < cfg.replicas:
        raise ValueError(f"replica {replica} outside [0, {cfg.replicas})")
    return cfg.dist.sample(replica_rng(cfg.seed, replica), cfg.sites)


def sech_gram(n: int, tau: float) -> np.ndarray:
    i = np.arange(n)
    d = np.abs(i[:, None] - i[None, :]) * (0.5 * tau)
    return 0.5 / np.cosh(np.minimum(d, 700.0))


def window_matrix(kappa, tau: float, gram: Optional[np.ndarray] = None) -> SymmetricSection:
    k = np.asarray(kappa, dtype=float)
    if np.any(k <= 0.0):
        raise ValueError("weights must be positive")
    G = sech_gram(k.size, tau) if gram is None else gram
    N = (k.size - 1) // 2
    labels = tau * (np.arange(k.size) - N)
    return SymmetricSection(np.sqrt(np.outer(k, k)) * G, "rkph", tau * N, tau, labels)


# -- support -----------------------------------------------------------------

def _merge(intervals: List[Tuple[float, float]]) -> List[Tuple[float, float]]:
    out: List[Tuple[float, float]] = []
    for lo, hi in sorted(intervals):
        if out and lo <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], hi))
        else:
            out.append((lo, hi))
    return out


def spectrum_support(dist: DistributionSpec, tau: float) -> List[Tuple[float, float]]:
    """supp(P0) * [E_min, E_max] as a list of disjoint closed intervals."""
    emin, emax = single_band_edges(tau)
    if isinstance(dist, Uniform):
        # s [E_min, E_max] over s in [lo, hi]: a connected set
        return [(dist.lo * emin, dist.hi * emax)]
    return _merge([(s * emin, s * emax) for s in dist.support])


def support_edges(dist: DistributionSpec, tau: float) -> Tuple[float, float]:
    """(sigma_min, sigma_max) = (kappa_min E_min, kappa_max E_max)."""
    emin, emax = single_band_edges(tau)
    return dist.kappa_min * emin, dist.kappa_max * emax


# -- Monte Carlo -------------------------------------------------------------

def default_rkph_grid(dist: DistributionSpec, tau: float, n: int = 400) -> np.ndarray:
    smin, smax = support_edges(dist, tau)
    return np.linspace(0.5 * smin, smax * 1.1, n)


@dataclass
class McResult:
    curve: IdsCurve
    stderr: np.ndarray
    per_replica: np.ndarray = field(repr=False)
    total_mass: float = 0.0
    eigenvalues: Optional[List[np.ndarray]] = field(default=None, repr=False)
    ipr: Optional[np.ndarray] = None


def _replica_job(cfg: RkphConfig, lam: np.ndarray, gram: np.ndarray, r: int,
                 keep: bool, vectors: bool):
    kappa = sample_weights(cfg, r)
    sp = eig_sym(window_matrix(kappa, cfg.tau, gram), want_vectors=vectors)
    ev = sp.eigenvalues
    counts = count_above(ev, lam) / cfg.length
    ipr = participation_stats(sp)["mean_ipr"] if vectors else None
    return counts, (ev if keep else None), ipr


def mc_ids(cfg: RkphConfig, workers: int = 1, keep_eigenvalues: bool = False,
           with_ipr: bool = False) -> McResult:
    """Replica-averaged nu((lambda, inf)); replicas are reduced in index order."""
    lam = cfg.lambdas if cfg.lambdas is not None else default_rkph_grid(cfg.dist, cfg.tau)
    lam = np.asarray(lam, dtype=float)
    gram = sech_gram(cfg.sites, cfg.tau)
    R = cfg.replicas

    def job(r):
        return _replica_job(cfg, lam, gram, r, keep_eigenvalues, with_ipr)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(job, range(R)))
    else:
        results = [job(r) for r in range(R)]
    per = np.array([res[0] for res in results])
    mean = per.mean(axis=0)
    se = per.std(axis=0, ddof=1) / math.sqrt(R) if R > 1 else np.zeros_like(mean)
    curve = IdsCurve(lam, mean, cfg.length, "rkph", f"rkph tau={cfg.tau:.17g}")
    eig = [res[1] for res in results] if keep_eigenvalues else None
    ipr = np.array([res[2] for res in results]) if with_ipr else None
    return McResult(curve, se, per, cfg.sites / cfg.length, eig, ipr)


def count_in_interval(eigs: Sequence[np.ndarray], lo: float, hi: float) -> int:
    return int(sum(np.count_nonzero((e > lo) & (e < hi)) for e in eigs))


# -- diagnostics -------------------------------------------------------------

class FitError(ValueError):
    """Too few usable points for a fit."""


def lifshitz_slope(curve: IdsCurve, edge: float, fit_window: Tuple[float, float],
                   side: str = "top", total: Optional[float] = None) -> float:
    """Least-squares slope of log(-log nu) against log delta.

    At the top edge nu(delta) = nu((edge - delta, inf)). At the bottom edge
    nu(delta) is the mass in (-inf, edge + delta], i.e. ``total`` minus the
    curve; ``total`` defaults to the curve value at its first grid point.
    """
    lam, val = curve.lambdas, curve.values
    if side == "top":
        delta = edge - lam
        nu = val
    elif side == "bottom":
        t = float(val[0]) if total is None else total
        delta = lam - edge
        nu = t - val
    else:
        raise ValueError("side must be 'top' or 'bottom'")
    lo, hi = fit_window
    m = (delta >= lo) & (delta <= hi) & (nu > 0.0) & (nu < 1.0)
    if np.count_nonzero(m) < 4:
        raise FitError(f"only {np.count_nonzero(m)} usable points in the fit window")
    x = np.log(delta[m])
    y = np.log(-np.log(nu[m]))
    return float(np.polyfit(x, y, 1)[0])


def density_from_curve(curve: IdsCurve, min_spacing: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """-d nu / d lambda by centred differences on a grid thinned to ``min_spacing``."""
    lam, val = curve.lambdas, curve.values
    keep = [0]
    for i in range(1, lam.size):
        if lam[i] - lam[keep[-1]] >= min_spacing * (1.0 - 1e-9):
            keep.append(i)
    idx = np.array(keep)
    if idx.size < 3:
        raise FitError("grid too coarse for a density estimate")
    return lam[idx], -np.gradient(val[idx], lam[idx])


def wegner_ratio(curve: IdsCurve, dist: DistributionSpec, stderr=None) -> float:
    """max over the grid of lambda * density / (rho_max * kappa_max)."""
    rho = getattr(dist, "rho_max", None)
    if rho is None:
        raise ValueError("the weight law has no density bound")
    spacing = 3.0 * float(np.max(stderr)) if stderr is not None and np.size(stderr) else 0.0
    lam, dens = density_from_curve(curve, spacing)
    return float(np.max(lam * dens)) / (rho * dist.kappa_max)


def participation_stats(sp: Spectrum) -> dict:
    if sp.eigenvectors is None:
        raise ValueError("participation ratios need eigenvectors")
    V = sp.eigenvectors
    ipr = np.sum(V**4, axis=0) / np.sum(V**2, axis=0) ** 2
    return {"mean_ipr": float(ipr.mean()) if ipr.size else 0.0, "ipr": ipr}


# -- heavy-tailed support example ---------------------------------------------

_EXACT_CELL = 1 << 20


@dataclass
class HeavyTailSample:
    """Cell counts x(m) = 2^k, P(k) = 2^{-k}, for m = -M..M.

    The measure puts mass 1/x(m) on each of x(m) equidistant points of [m, m+1).
    """

    cells: np.ndarray
    counts_log2: np.ndarray

    @classmethod
    def draw(cls, seed: int, M: int) -> "HeavyTailSample":
        rng = replica_rng(seed, 0)
        k = rng.geometric(0.5, size=2 * M + 1)
        return cls(np.arange(-M, M + 1), np.minimum(k, 1023).astype(np.int64))

    @property
    def M(self) -> int:
        return int(self.cells[-1])

    def support_density(self, M: int) -> float:
        """#(support in [-M, M)) / (2M)."""
        m = (self.cells >= -M) & (self.cells < M)
        return float(np.sum(np.exp2(self.counts_log2[m].astype(float)))) / (2.0 * M)

    def cell_sech_sum(self, m: int, k: int) -> float:
        if abs(m) > 720:
            return 0.0
        x = 2**k
        if x <= _EXACT_CELL:
            xi = m + np.arange(x) / x
            return float(np.sum(1.0 / np.cosh(np.minimum(np.abs(xi), 700.0))))
        # x * integral of sech over [m, m+1) plus the left-endpoint correction
        integral = 2.0 * (math.atan(math.exp(m + 1)) - math.atan(math.exp(m)))
        f0, f1 = 1.0 / math.cosh(m), 1.0 / math.cosh(m + 1)
        return x * integral + 0.5 * (f0 - f1)

    def as_measure(self, M: int) -> AtomicMeasure:
        """Explicit atoms over cells [-M, M); only for small counts."""
        pos, w = [], []
        for m, k in zip(self.cells, self.counts_log2):
            if -M <= m < M:
                x = 2**int(k)
                if x > _EXACT_CELL:
                    raise ValueError("cell too large to enumerate")
                pos.append(m + np.arange(x) / x)
                w.append(np.full(x, 1.0 / x))
        return AtomicMeasure(np.concatenate(pos), np.concatenate(w))

    def blaschke_partial_sums(self, windows: Sequence[int]) -> np.ndarray:
        """Sum of sech over the support inside the cells [-W, W) for each W."""
        order = np.argsort(np.abs(self.cells + 0.5), kind="stable")
        near = [i for i in order if abs(self.cells[i]) <= 720]
        contrib = {int(self.cells[i]): self.cell_sech_sum(int(self.cells[i]), int(self.counts_log2[i]))
                   for i in near}
        out = []
        for W in windows:
            out.append(sum(v for m, v in contrib.items() if -W <= m < W))
        return np.array(out)

    def blaschke(self, windows: Sequence[int], rtol: float = 1e-6) -> BlaschkeResult:
        ps = self.blaschke_partial_sums(windows)
        conv = bool(abs(ps[-1] - ps[len(ps) // 2]) <= rtol * abs(ps[-1]))
        return BlaschkeResult(float(ps[-1]), conv, ps)
