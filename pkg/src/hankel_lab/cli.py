"""Command-line front end.

Every run is described by a config ``{"command": ..., "options": {...}}`` that
is echoed into the JSON envelope; ``--config`` replays a saved config or
envelope. Exit codes: 0 success, 1 could not compute, 2 a built-in check failed.
"""
from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Dict, List, Optional

import numpy as np

from . import __version__
from . import floquet as fq
from . import io
from . import measures as ms
from . import rkph
from .operators import (
    Carleman,
    PositiveFromMeasure,
    ResourceError,
    SingularGramError,
    atom_section,
    symbol_bound,
)
from .spectra import (
    EigenError,
    IdsCurve,
    Spectrum,
    build_section,
    carleman_ids,
    default_lambda_grid,
    eig_sym,
    ids_from_section,
    moment_check,
    szego_triple,
)
from .specfun import ConvergenceError, gamma_abs2_half_line, log_gamma

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 1, 2
TWO_PI = 2.0 * math.pi


class UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------

def parse_dist(text: str) -> rkph.DistributionSpec:
    """'two_point:1,2,0.5' | 'uniform:1,2' | 'point_mass:1'."""
    try:
        kind, _, args = text.partition(":")
        vals = [float(v) for v in args.split(",") if v.strip()]
        if kind == "two_point" and len(vals) in (2, 3):
            return rkph.TwoPoint(*vals)
        if kind == "uniform" and len(vals) == 2:
            return rkph.Uniform(*vals)
        if kind == "point_mass" and len(vals) == 1:
            return rkph.PointMass(vals[0])
    except ValueError as exc:
        raise UsageError(f"bad distribution {text!r}: {exc}") from exc
    raise UsageError(f"bad distribution {text!r}; use two_point:a,b[,p], uniform:lo,hi or point_mass:c")


def parse_floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad number list {text!r}") from exc


PHI: Dict[str, Callable] = {
    "square": lambda x: x * x,
    "cube": lambda x: x ** 3,
    "abs": np.abs,
}


def _mapper(workers: int):
    if workers <= 1:
        return map, None
    pool = ThreadPoolExecutor(max_workers=workers)
    return pool.map, pool


def _positive_model(opts) -> PositiveFromMeasure:
    if opts.get("measure"):
        S = io.load_measure(opts["measure"])
        if S.axis != ms.SIGMA_LINE:
            S = ms.pushforward_sigma_to_Sigma(S)
        return PositiveFromMeasure(S)
    tau = opts["tau"]
    M = opts["M"] + 60.0
    n = int(math.ceil(M / tau))
    if opts["model"] == "lattice":
        return PositiveFromMeasure(ms.AtomicMeasure.lattice(tau, -n, n))
    if opts["model"] == "flat":
        pos = np.concatenate([tau * np.arange(-n, n + 1), tau * np.arange(-n, n + 1) + 0.5 * tau])
        w = np.concatenate([np.ones(2 * n + 1), -np.ones(2 * n + 1)])
        return PositiveFromMeasure(ms.AtomicMeasure(pos, w, ms.SIGMA_LINE, signed=True))
    raise UsageError(f"unknown model {opts['model']!r}")


def _lambda_grid(opts, bound: float) -> np.ndarray:
    lo, hi, n = opts.get("lambda_min"), opts.get("lambda_max"), opts.get("n_lambda", 120)
    if lo is None and hi is None:
        return default_lambda_grid(bound, n)
    lo = lo if lo is not None else 0.02 * math.pi * bound
    hi = hi if hi is not None else math.pi * bound
    if not 0.0 < lo < hi:
        raise UsageError("need 0 < lambda_min < lambda_max")
    return np.linspace(lo, hi, n)


# -- commands ----------------------------------------------------------------
# Each returns (outputs, checks, files) where files maps a path to CSV text.

def cmd_carleman(o, ctx):
    spec = Carleman()
    lam = _lambda_grid(o, 1.0)
    curve = ids_from_section(spec, o["scheme"], o["M"], o["dx"], lam, "carleman")
    sec = build_section(spec, o["scheme"], o["M"], o["dx"])
    top = float(eig_sym(sec).eigenvalues[-1])
    mom = moment_check(spec, o["M"], o["dx"])
    band = (curve.lambdas >= 0.5) & (curve.lambdas <= 2.8)
    sup = float(np.max(np.abs(curve.values[band] - carleman_ids(curve.lambdas[band])))) if band.any() else None
    rows = [(l, v, o["scheme"], o["M"]) for l, v in zip(curve.lambdas, curve.values)]
    files = {o["out"]: io.csv_text(["lambda", "ids", "scheme", "M"], rows)}
    checks = {"norm_bound": top <= math.pi * (1 + 1e-9), "moment_bounds": mom.ok}
    if o.get("tol") is not None and sup is not None:
        checks["sup_distance"] = sup <= o["tol"]
    out = {"top_eigenvalue": top, "sup_distance_0.5_2.8": sup, "m1": mom.m1, "m2": mom.m2}
    return out, checks, files


def cmd_ids(o, ctx):
    spec = _positive_model(o)
    bound = symbol_bound(spec) or 1.0
    lam = _lambda_grid(o, bound)
    label = o.get("measure") or o["model"]
    curve = ids_from_section(spec, o["scheme"], o["M"], o["dx"], lam, label)
    rows = [(l, v, o["scheme"], o["M"]) for l, v in zip(curve.lambdas, curve.values)]
    files = {o["out"]: io.csv_text(["lambda", "ids", "scheme", "M"], rows)}
    checks = {}
    if o["scheme"] == "a":
        mom = moment_check(spec, o["M"], o["dx"])
        checks["moment_bounds"] = mom.ok
    return {"symbol_bound": bound, "ids_low": float(curve.values[0])}, checks, files


def _fourier_data(o) -> fq.FourierData:
    tau, nc = o["tau"], 4 * o["n_fib"]
    if o.get("measure"):
        S = io.load_measure(o["measure"])
        if not isinstance(S, ms.AtomicMeasure) or S.axis != ms.SIGMA_LINE:
            raise UsageError("bands needs the atoms of one period cell of Sigma")
        return fq.measure_coeffs(tau, S.positions, S.weights, nc)
    if o["model"] == "lattice":
        return fq.single_band_data(tau, nc)
    if o["model"] == "flat":
        return fq.flat_pair_data(tau, nc)
    raise UsageError(f"unknown model {o['model']!r}")


def cmd_bands(o, ctx):
    data = _fourier_data(o)
    mapper, pool = _mapper(ctx["workers"])
    try:
        bs = fq.band_structure(data, o["k_count"], o["n_fib"], map_fn=mapper)
    finally:
        if pool:
            pool.shutdown()
    rows = []
    for j, b in enumerate(bs.bands):
        rows.extend((k, j, e, b.flat) for k, e in zip(bs.ks, b.values))
    files = {o["out"]: io.csv_text(["k", "band_index", "E", "flat"], rows)}
    edges = {"tau": bs.tau, "bands": [{"min": b.lo, "max": b.hi, "flat": b.flat, "sign": b.sign}
                                      for b in bs.bands]}
    if o.get("edges"):
        files[o["edges"]] = io.dumps(edges)
    k0 = float(bs.ks[len(bs.ks) // 3])
    route = float(np.max(np.abs(fq.fiber_matrix(data, k0, 6) - fq.fiber_matrix(data, k0, 6, "beta"))))
    mass = float(fq.ids_from_bands(bs, [1e-12]).values[0]) * bs.tau
    checks = {"routes_agree": route <= 1e-11}
    out = {"edges": edges, "route_difference": route, "tau_ids_at_0": mass, "notes": bs.notes}
    return out, checks, files


def cmd_flatband(o, ctx):
    fp = fq.flat_pair_Estar(o["tau"])
    out = {"E_star": fp.estar, "fiber_eigenvalue": fp.eigenvalue, "max_deviation": fp.max_deviation}
    return out, {"constancy": fp.max_deviation <= 1e-10}, {}


def cmd_szego(o, ctx):
    phi = PHI[o["phi"]]
    Ms = parse_floats(o["Ms"])
    rows, diffs = [], []
    for M in Ms:
        opts = dict(o, M=M)
        spec = Carleman() if o["model"] == "carleman" else _positive_model(opts)
        tr = szego_triple(spec, M, o["dx"], phi)
        diffs.append(tr.max_pairwise())
        rows.append((M, tr.tA, tr.tProj, tr.tB, diffs[-1]))
    files = {o["out"]: io.csv_text(["M", "tA", "tProj", "tB", "max_diff"], rows)}
    Ms_a, d = np.array(Ms), np.array(diffs)
    c = float(np.max(d * np.sqrt(Ms_a)))
    checks = {"monotone": bool(np.all(np.diff(d) < 0))}
    return {"c_fit": c, "max_diff": diffs}, checks, files


def ctx_seed(o) -> int:
    return int(o.get("seed", 0))


def _rkph_lambda(o, dist) -> np.ndarray:
    smin, smax = rkph.support_edges(dist, o["tau"])
    lo = o.get("lambda_min") if o.get("lambda_min") is not None else 0.5 * smin
    hi = o.get("lambda_max") if o.get("lambda_max") is not None else 1.1 * smax
    return np.linspace(lo, hi, o.get("n_lambda", 400))


def _manifest(cfg: rkph.RkphConfig) -> dict:
    smin, smax = rkph.support_edges(cfg.dist, cfg.tau)
    return {"tau": cfg.tau, "N": cfg.N, "dist": rkph.dist_to_dict(cfg.dist), "R": cfg.replicas,
            "seed": cfg.seed, "kappa_min": cfg.dist.kappa_min, "kappa_max": cfg.dist.kappa_max,
            "sigma_min": smin, "sigma_max": smax}


def _hist_csv(res: rkph.McResult, R: int) -> str:
    rows = [(l, v, s, R) for l, v, s in zip(res.curve.lambdas, res.curve.values, res.stderr)]
    return io.csv_text(["lambda", "ids_mean", "ids_stderr", "replicas"], rows)


def cmd_rkph(o, ctx):
    dist = parse_dist(o["dist"])
    cfg = rkph.RkphConfig(o["tau"], o["N"], dist, o["replicas"], ctx_seed(o), _rkph_lambda(o, dist))
    res = rkph.mc_ids(cfg, ctx["workers"], keep_eigenvalues=True)
    files = {o["out"]: _hist_csv(res, cfg.replicas)}
    if o.get("manifest"):
        files[o["manifest"]] = io.dumps(_manifest(cfg))
    support = rkph.spectrum_support(dist, cfg.tau)
    checks = {
        "total_mass": res.total_mass == cfg.sites / cfg.length,
        "eigenvalue_count": all(e.size == cfg.sites and e.min() > 0 for e in res.eigenvalues),
    }
    gaps = []
    for (a, b), (c, d) in zip(support[:-1], support[1:]):
        lo, hi = b + o["edge_tol"], c - o["edge_tol"]
        if hi > lo:
            n = rkph.count_in_interval(res.eigenvalues, lo, hi)
            gaps.append({"lo": lo, "hi": hi, "eigenvalues": n})
    if gaps:
        checks["empty_gaps"] = all(g["eigenvalues"] == 0 for g in gaps)
    out = {"support": [list(s) for s in support], "gaps": gaps, "total_mass": res.total_mass}
    return out, checks, files


def cmd_lifshitz(o, ctx):
    dist = parse_dist(o["dist"])
    smin, smax = rkph.support_edges(dist, o["tau"])
    w = smax - smin
    edge = smax if o["side"] == "top" else smin
    lo_f, hi_f = parse_floats(o["window"])
    if o["side"] == "top":
        lam = np.linspace(smax - 1.5 * hi_f * w, smax, o.get("n_lambda", 300))
    else:
        lam = np.linspace(0.5 * smin, smin + 1.5 * hi_f * w, o.get("n_lambda", 300))
    cfg = rkph.RkphConfig(o["tau"], o["N"], dist, o["replicas"], ctx_seed(o), lam)
    res = rkph.mc_ids(cfg, ctx["workers"])
    total = cfg.sites / cfg.length
    slope = rkph.lifshitz_slope(res.curve, edge, (lo_f * w, hi_f * w), o["side"], total)
    files = {o["out"]: _hist_csv(res, cfg.replicas)}
    checks = {}
    if o.get("bracket"):
        a, b = parse_floats(o["bracket"])
        checks["bracket"] = a <= slope <= b
    return {"slope": slope, "edge": edge, "window": [lo_f * w, hi_f * w]}, checks, files


def cmd_wegner(o, ctx):
    dist = parse_dist(o["dist"])
    cfg = rkph.RkphConfig(o["tau"], o["N"], dist, o["replicas"], ctx_seed(o), _rkph_lambda(o, dist))
    res = rkph.mc_ids(cfg, ctx["workers"])
    try:
        ratio = rkph.wegner_ratio(res.curve, dist, res.stderr)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    files = {o["out"]: _hist_csv(res, cfg.replicas)}
    return {"wegner_ratio": ratio}, {"wegner": ratio <= 1.0 + o["tol"]}, files


def cmd_localize(o, ctx):
    dist = parse_dist(o["dist"])
    rows, means = [], []
    for tau in parse_floats(o["taus"]):
        cfg = rkph.RkphConfig(tau, o["N"], dist, o["replicas"], ctx_seed(o),
                              np.array([1.0]))
        res = rkph.mc_ids(cfg, ctx["workers"], with_ipr=True)
        se = float(res.ipr.std(ddof=1) / math.sqrt(res.ipr.size)) if res.ipr.size > 1 else 0.0
        means.append(float(res.ipr.mean()))
        rows.append((tau, means[-1], se))
    files = {o["out"]: io.csv_text(["tau", "mean_ipr", "ipr_stderr"], rows)}
    checks = {}
    if o.get("min_factor") is not None and len(means) >= 2:
        checks["ipr_factor"] = means[-1] >= o["min_factor"] * means[0]
    return {"mean_ipr": means}, checks, files


def cmd_carleson(o, ctx):
    if o.get("measure"):
        m = io.load_measure(o["measure"])
        sigmas = [m if m.axis == ms.SIGMA_HALF_LINE else ms.pushforward_Sigma_to_sigma(m)]
    else:
        rng = rkph.replica_rng(ctx_seed(o), 0)
        sigmas = [ms.random_atomic_sigma(rng) for _ in range(o["count"])]
    rows = []
    fwd_ok = conv_ok = True
    for i, s in enumerate(sigmas):
        c = ms.carleson_constant(s)
        loc = ms.local_bound_constant(ms.pushforward_sigma_to_Sigma(s))
        fwd, conv = loc / (math.e * c), c * (1.0 - math.exp(-1.0)) / loc
        fwd_ok &= fwd <= 1.0 + 1e-12
        conv_ok &= conv <= o["converse_constant"] * (1.0 - math.exp(-1.0)) + 1e-12
        rows.append((i, len(s), c, loc, fwd, conv))
    files = {o["out"]: io.csv_text(["index", "atoms", "carleson", "local", "forward_ratio",
                                    "converse_ratio"], rows)}
    return {"measures": len(sigmas)}, {"forward": bool(fwd_ok), "converse": bool(conv_ok)}, files


def cmd_selftest(o, ctx):
    checks = {}
    u = np.linspace(0.0, 6.0, 200)
    g = [abs(np.exp(log_gamma(complex(0.5, -x)))) ** 2 for x in u]
    checks["gamma_identity"] = bool(np.allclose(g, [gamma_abs2_half_line(x) for x in u], rtol=1e-11, atol=0))
    one = ms.AtomicMeasure([0.0], [2.0])
    checks["projection"] = float(atom_section(one, 1.0).matrix[0, 0]) == 1.0
    d = fq.fourier_coeffs(np.ones(64), TWO_PI, 4)
    checks["fourier_constant"] = abs(d.coeff(0) - 1) < 1e-15 and abs(d.coeff(1)) < 1e-15
    tau = TWO_PI
    cos = np.cos(2 * np.pi * np.arange(64) / 64)
    d = fq.fourier_coeffs(cos, tau, 4)
    checks["fourier_cos"] = abs(d.coeff(1) - 0.5) < 1e-15 and abs(d.coeff(-1) - 0.5) < 1e-15
    s = fq.single_band_data(tau, 8)
    checks["sigma_roundtrip"] = bool(np.allclose(fq.sigma_tilde(fq.p_tilde(s)).coeffs, s.coeffs,
                                                 rtol=0, atol=1e-13))
    cfg = rkph.RkphConfig(tau, 8, rkph.PointMass(1.5), 2, 0)
    checks["point_mass"] = bool(np.all(rkph.sample_weights(cfg, 1) == 1.5))
    cfg = rkph.RkphConfig(tau, 8, rkph.Uniform(1, 2), 2, 7)
    checks["seed_determinism"] = bool(np.array_equal(rkph.sample_weights(cfg, 1),
                                                     rkph.sample_weights(cfg, 1)))
    checks["ipr_basis"] = rkph.participation_stats(Spectrum(np.zeros(5), np.eye(5)))["mean_ipr"] == 1.0
    v = np.full((4, 1), 0.5)
    checks["ipr_uniform"] = abs(rkph.participation_stats(Spectrum(np.zeros(1), v))["mean_ipr"] - 0.25) < 1e-15
    lam = np.linspace(0.01, 0.5, 60)
    curve = IdsCurve(lam, np.exp(-(0.6 - lam) ** -0.5), 1.0, "synthetic")
    checks["lifshitz_synthetic"] = abs(rkph.lifshitz_slope(curve, 0.6, (0.1, 0.59)) + 0.5) < 1e-6
    checks["wegner_zero"] = rkph.wegner_ratio(IdsCurve(lam, np.zeros_like(lam), 1.0, "z"),
                                              rkph.Uniform(1, 2)) == 0.0
    return {"count": len(checks)}, checks, {}


# -- argument parsing ---------------------------------------------------------

def _common(p: argparse.ArgumentParser, out_default: Optional[str]):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=out_default)


def _sub_parser(glob):
    class Sub(argparse.ArgumentParser):
        def __init__(self, **kw):
            kw.setdefault("parents", [glob])
            super().__init__(**kw)
    return Sub


def build_parser() -> argparse.ArgumentParser:
    # global options are accepted before or after the subcommand
    glob = argparse.ArgumentParser(add_help=False)
    glob.add_argument("--workers", type=int, default=argparse.SUPPRESS,
                      help="parallel workers (default: $HANKEL_LAB_WORKERS or 1)")
    glob.add_argument("--config", default=argparse.SUPPRESS,
                      help="replay a saved config or envelope JSON")
    glob.add_argument("--envelope", default=argparse.SUPPRESS,
                      help="write the JSON envelope here instead of stdout")
    ap = argparse.ArgumentParser(prog="hankel-lab", parents=[glob],
                                 description="Spectral experiments for ergodic Hankel operators.")
    ap.add_argument("--version", action="version", version=f"hankel-lab {__version__}")
    sub = ap.add_subparsers(dest="command", parser_class=_sub_parser(glob))

    p = sub.add_parser("carleman", help="Carleman operator IDS from a finite section")
    _common(p, "ids.csv")
    p.add_argument("--M", type=float, default=40.0)
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--scheme", choices=["a", "b"], default="a")
    p.add_argument("--n-lambda", type=int, default=120)
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)
    p.add_argument("--tol", type=float, help="fail if the sup distance on [0.5, 2.8] exceeds this")

    p = sub.add_parser("ids", help="IDS of a positive model from a finite section")
    _common(p, "ids.csv")
    p.add_argument("--measure", help="measure file (Sigma or sigma)")
    p.add_argument("--model", choices=["lattice", "flat"], default="lattice")
    p.add_argument("--tau", type=float, default=TWO_PI)
    p.add_argument("--M", type=float, default=40.0)
    p.add_argument("--dx", type=float, default=0.05)
    p.add_argument("--scheme", choices=["a", "b"], default="b")
    p.add_argument("--n-lambda", type=int, default=120)
    p.add_argument("--lambda-min", type=float)
    p.add_argument("--lambda-max", type=float)

    p = sub.add_parser("bands", help="band structure of a periodic model")
    _common(p, "bands.csv")
    p.add_argument("--tau", type=float, default=TWO_PI)
    p.add_argument("--model", choices=["lattice", "flat"], default="lattice")
    p.add_argument("--measure", help="atoms of one period cell of Sigma")
    p.add_argument("--k-count", type=int, default=64)
    p.add_argument("--n-fib", type=int, default=12)
    p.add_argument("--edges", default="edges.json")

    p = sub.add_parser("flatband", help="flat-band energy and the constancy check")
    _common(p, None)
    p.add_argument("--tau", type=float, default=TWO_PI)

    p = sub.add_parser("szego", help="normalised traces of phi for the three truncations")
    _common(p, "szego.csv")
    p.add_argument("--model", choices=["carleman", "lattice"], default="carleman")
    p.add_argument("--tau", type=float, default=TWO_PI)
    p.add_argument("--Ms", default="10,20,40,80")
    p.add_argument("--dx", type=float, default=0.1)
    p.add_argument("--phi", choices=sorted(PHI), default="square")

    for name, helptext in (("rkph", "Monte-Carlo IDS of the random model"),
                           ("wegner", "Wegner ratio from the Monte-Carlo IDS")):
        p = sub.add_parser(name, help=helptext)
        _common(p, "hist.csv")
        p.add_argument("--tau", type=float, default=TWO_PI if name == "rkph" else 4.0)
        p.add_argument("--N", type=int, default=256)
        p.add_argument("--dist", default="two_point:1,2,0.5" if name == "rkph" else "uniform:1,2")
        p.add_argument("--replicas", type=int, default=50 if name == "rkph" else 200)
        p.add_argument("--n-lambda", type=int, default=400)
        p.add_argument("--lambda-min", type=float)
        p.add_argument("--lambda-max", type=float)
        if name == "rkph":
            p.add_argument("--edge-tol", type=float, default=0.02)
            p.add_argument("--manifest", default="manifest.json")
        else:
            p.add_argument("--tol", type=float, default=0.1)

    p = sub.add_parser("lifshitz", help="Lifshitz-tail slope at a spectral edge")
    _common(p, "lifshitz.csv")
    p.add_argument("--tau", type=float, default=4.0)
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--dist", default="two_point:1,2,0.5")
    p.add_argument("--replicas", type=int, default=10000)
    p.add_argument("--side", choices=["top", "bottom"], default="top")
    p.add_argument("--window", default="0.02,0.2", help="fit window as fractions of the support width")
    p.add_argument("--n-lambda", type=int, default=300)
    p.add_argument("--bracket", help="fail unless lo <= slope <= hi, e.g. -0.9,-0.25")

    p = sub.add_parser("localize", help="mean inverse participation ratio against tau")
    _common(p, "ipr.csv")
    p.add_argument("--taus", default="1,12")
    p.add_argument("--N", type=int, default=256)
    p.add_argument("--dist", default="uniform:1,2")
    p.add_argument("--replicas", type=int, default=50)
    p.add_argument("--min-factor", type=float)

    p = sub.add_parser("carleson", help="Carleson and local-bound constants")
    _common(p, "carleson.csv")
    p.add_argument("--measure")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--converse-constant", type=float, default=1.0 / (1.0 - math.exp(-1.0)))

    p = sub.add_parser("selftest", help="quick built-in examples")
    _common(p, None)
    return ap


COMMANDS = {
    "carleman": cmd_carleman, "ids": cmd_ids, "bands": cmd_bands, "flatband": cmd_flatband,
    "szego": cmd_szego, "rkph": cmd_rkph, "lifshitz": cmd_lifshitz, "wegner": cmd_wegner,
    "localize": cmd_localize, "carleson": cmd_carleson, "selftest": cmd_selftest,
}

_GLOBAL = ("workers", "config", "envelope", "command")


def _resolve_workers(arg: Optional[int]) -> int:
    if arg is not None:
        w = arg
    else:
        env = os.environ.get("HANKEL_LAB_WORKERS", "").strip()
        try:
            w = int(env) if env else 1
        except ValueError:
            raise UsageError(f"HANKEL_LAB_WORKERS={env!r} is not an integer")
    if w < 1:
        raise UsageError("workers must be >= 1")
    return w


def load_config(path: str) -> dict:
    with open(path) as f:
        d = json.load(f)
    if "config" in d and "command" not in d:
        d = d["config"]
    if d.get("command") not in COMMANDS or not isinstance(d.get("options"), dict):
        raise UsageError(f"{path}: not a run config")
    return d


def execute(config: dict, workers: int) -> dict:
    """Run a config; returns the envelope (files already written)."""
    opts = dict(config["options"])
    t0 = time.perf_counter()
    from threadpoolctl import threadpool_limits
    # one BLAS thread so results do not depend on the worker layout
    with threadpool_limits(limits=1):
        outputs, checks, files = COMMANDS[config["command"]](opts, {"workers": workers})
    for path, text in files.items():
        if path:
            with open(path, "w", newline="") as f:
                f.write(text)
    return {
        "config": config,
        "version": __version__,
        "wall_clock_s": time.perf_counter() - t0,
        "outputs": outputs,
        "files": sorted(p for p in files if p),
        "checks": {k: bool(v) for k, v in checks.items()},
        "passed": all(bool(v) for v in checks.values()),
    }


def run(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    for name in ("workers", "config", "envelope"):
        if not hasattr(args, name):
            setattr(args, name, None)
    try:
        workers = _resolve_workers(args.workers)
        if args.config:
            config = load_config(args.config)
            if args.command:
                raise UsageError("give either --config or a subcommand")
        elif args.command:
            opts = {k: v for k, v in vars(args).items() if k not in _GLOBAL}
            config = {"command": args.command, "options": opts}
        else:
            ap.print_usage(sys.stderr)
            return EXIT_USAGE
        env = execute(config, workers)
    except (UsageError, io.MeasureFormatError, ResourceError, SingularGramError,
            fq.ResolutionError, ConvergenceError, EigenError, rkph.FitError,
            FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"hankel-lab: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    text = io.dumps(env)
    if args.envelope:
        with open(args.envelope, "w") as f:
            f.write(text)
    else:
        sys.stdout.write(text)
    if not env["passed"]:
        failed = [k for k, v in env["checks"].items() if not v]
        print(f"hankel-lab: check failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
