"""Experiment runner: eigenvalue sweeps, exponent fits, transition checks and the CLI.

Every sweep produces ordered :class:`SweepRecord` rows, a log-log
:class:`ExponentFit` and a pass flag against a theoretical exponent.  Results
are written as CSV (``param,sym_diff,lambda_pert,lambda_ref,abs_diff``) and a
JSON summary.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import bisect

from .eigensolver import (
    assemble_clamped_biharmonic_1d,
    assemble_dirichlet_laplacian_2d,
    richardson_extrapolate,
    smallest_eigenvalues,
)
from .errors import DegenerateData, NotNested
from .geometry import (
    Profile,
    SubgraphDomain,
    constant,
    load_domain,
    rectangle_domain,
    sector_domain,
    single_chart_domain,
    symmetric_difference_measure,
    tilde_profile,
)
from .sector import SectorSpec, angular_order, sector_mode, sector_spectrum, solve_reduced
from .transition import (
    DIRICHLET,
    GridFunction,
    apply_transition,
    discrete_sobolev_norm,
    domain_grid,
)

DEFAULT_SEED = 0xB1F2
CURVATURE_TOL = 0.05
CSV_HEADER = "param,sym_diff,lambda_pert,lambda_ref,abs_diff"


# records and fits


@dataclass(frozen=True)
class SweepRecord:
    param: float
    sym_diff: float
    lambda_pert: float
    lambda_ref: float
    abs_diff: float = field(init=False)

    def __post_init__(self):
        if not self.sym_diff >= 0:
            raise ValueError("sym_diff must be non-negative")
        object.__setattr__(self, "abs_diff", abs(self.lambda_pert - self.lambda_ref))

    def csv_row(self) -> str:
        return ",".join(f"{v:.17g}" for v in (self.param, self.sym_diff, self.lambda_pert, self.lambda_ref,
                                               self.abs_diff))


@dataclass(frozen=True)
class ExponentFit:
    exponent: float
    intercept: float
    r_squared: float
    window: tuple[int, int]  # [start, stop) in records sorted by sym_diff

    def to_dict(self) -> dict:
        return {"exponent": self.exponent, "intercept": self.intercept, "r2": self.r_squared,
                "window": list(self.window)}


def _second_divided_differences(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    s = np.diff(y) / np.diff(x)
    return 2 * np.diff(s) / (x[2:] - x[:-2])


def fit_exponent(records: Sequence[SweepRecord], curvature_tol: float = CURVATURE_TOL,
                 min_points: int = 4) -> ExponentFit:
    """Least-squares slope of ``log abs_diff`` against ``log sym_diff``.

    When the second divided difference of the log-log data exceeds
    ``curvature_tol`` somewhere, the largest decade of the sweep parameter is
    left out, provided ``min_points`` remain.
    """
    recs = sorted(records, key=lambda r: r.sym_diff)
    if len(recs) < min_points:
        raise DegenerateData(f"need at least {min_points} records")
    xs = np.array([r.sym_diff for r in recs])
    ys = np.array([r.abs_diff for r in recs])
    ps = np.array([r.param for r in recs])
    if np.any(~np.isfinite(xs)) or np.any(~np.isfinite(ys)) or np.any(xs <= 0) or np.any(ys <= 0):
        raise DegenerateData("sym_diff and abs_diff must be positive and finite")
    lx, ly = np.log(xs), np.log(ys)
    if np.any(np.diff(lx) <= 0):
        raise DegenerateData("sym_diff values must be distinct")
    stop = len(recs)
    if len(recs) >= 3 and np.max(np.abs(_second_divided_differences(lx, ly))) > curvature_tol:
        big = np.abs(ps) > np.max(np.abs(ps)) / 10
        keep = int(np.sum(~big))
        if keep >= min_points and np.all(~big[:keep]):
            stop = keep
    X, Y = lx[:stop], ly[:stop]
    slope, intercept = np.polyfit(X, Y, 1)
    resid = Y - (slope * X + intercept)
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((Y - Y.mean()) ** 2))
    if ss_tot > 0:
        r2 = 1.0 - ss_res / ss_tot
    else:
        r2 = 1.0 if ss_res <= 1e-24 * max(1.0, float(Y @ Y)) else 0.0
    return ExponentFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)), (0, stop))


@dataclass(frozen=True, eq=False)
class SweepResult:
    records: tuple[SweepRecord, ...]
    fit: ExponentFit
    target_exponent: float
    tolerance: float
    runtime_s: float = 0.0
    extra: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return abs(self.fit.exponent - self.target_exponent) <= self.tolerance

    def summary(self) -> dict:
        out = {"fit": self.fit.to_dict(), "target_exponent": self.target_exponent, "tolerance": self.tolerance,
               "pass": self.passed, "runtime_s": self.runtime_s}
        out.update(self.extra)
        return out

    def csv_text(self) -> str:
        return "\n".join([CSV_HEADER] + [r.csv_row() for r in self.records]) + "\n"

    def write(self, out_dir, stem: str) -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path, json_path = out / f"{stem}.csv", out / f"{stem}.json"
        with open(csv_path, "w", newline="\n") as fh:
            fh.write(self.csv_text())
        json_path.write_text(json.dumps(self.summary(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _map(fun: Callable, items: Sequence, workers: int | None):
    """Ordered map; threads when ``workers > 1``."""
    items = list(items)
    workers = workers or 1
    if workers <= 1 or len(items) <= 1:
        return [fun(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fun, items))


# sharpness sweep on the sector


def sharpness_sweep(beta: float, bc: str = DIRICHLET, k: int = 1, branch: int = 1, eps: Sequence[float] | None = None,
                    tolerance: float = 0.02, workers: int | None = None) -> SweepResult:
    """``lambda(eps) - lambda_*`` against ``|Omega minus Omega(eps)| = beta eps^2``.

    ``lambda(eps)`` solves the reduced equation; the target is ``nu = pi k / (2 beta)``.
    """
    t0 = time.perf_counter()
    eps = np.logspace(-4, -2, 9) if eps is None else np.asarray(eps, dtype=float)
    spec = SectorSpec(beta, k, bc)
    mode = sector_mode(spec, branch)
    nu = mode.nu

    def point(e):
        return SweepRecord(float(e), beta * e * e, solve_reduced(nu, mode.lam, e, spec.bc), mode.lam)

    recs = tuple(_map(point, eps, workers))
    fit = fit_exponent(recs)
    return SweepResult(recs, fit, nu, tolerance, time.perf_counter() - t0,
                       {"sharpness_regime": angular_order(beta, k).sharpness_regime})


# finite-difference stability sweeps


def _lambda_n(domain, h: float, n: int) -> float:
    return float(smallest_eigenvalues(assemble_dirichlet_laplacian_2d(domain, h), n, vectors=False).values[n - 1])


def _grid_points(domain, h: float) -> np.ndarray:
    x, y = domain_grid(domain, h, margin=1)
    X, Y = np.meshgrid(x, y, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def check_nested(outer, inner, hs: Sequence[float], seed: int = DEFAULT_SEED, samples: int = 4000) -> None:
    """Raise NotNested unless ``inner`` lies in ``outer`` on the grids and on random samples."""
    for h in hs:
        pts = _grid_points(inner, h)
        if np.any(inner.contains(pts) & ~outer.contains(pts)):
            raise NotNested(f"a grid node of the inner domain at h={h} lies outside the outer one")
    x0, x1, y0, y1 = inner.bbox()
    pts = np.random.default_rng(seed).uniform([x0, y0], [x1, y1], (samples, 2))
    if np.any(inner.contains(pts) & ~outer.contains(pts)):
        raise NotNested("the inner domain is not contained in the outer one")


def fd_stability_sweep(omega1, family: Callable[[float], object], params: Sequence[float], n: int = 1,
                       h: float = 1 / 64, richardson_order: int | None = None, target: float = 1.0,
                       tolerance: float = 0.1, workers: int | None = None, seed: int = DEFAULT_SEED) -> SweepResult:
    """Dirichlet ``lambda_n`` of ``family(t)`` inside ``omega1`` on a common grid.

    Each ``family(t)`` must lie in ``omega1`` (NotNested otherwise).  The
    discrete lower bound ``lambda_n[family(t)] >= lambda_n[omega1]`` is
    checked on every grid and violations are counted.  With
    ``richardson_order`` the values at ``h`` and ``h/2`` are extrapolated.
    """
    t0 = time.perf_counter()
    hs = [h] if richardson_order is None else [h, h / 2]
    domains = [family(t) for t in params]
    for d in domains:
        check_nested(omega1, d, hs, seed)
    ref = [_lambda_n(omega1, hh, n) for hh in hs]
    vals = _map(lambda d: [_lambda_n(d, hh, n) for hh in hs], domains, workers)
    violations = sum(int(v < r) for row in vals for v, r in zip(row, ref))
    if richardson_order is None:
        lam_ref, pert = ref[0], [row[0] for row in vals]
    else:
        lam_ref = richardson_extrapolate(*ref, order=richardson_order)
        pert = [richardson_extrapolate(*row, order=richardson_order) for row in vals]
    recs = tuple(SweepRecord(float(t), symmetric_difference_measure(omega1, d).value, lp, lam_ref)
                 for t, d, lp in zip(params, domains, pert))
    fit = fit_exponent(recs)
    return SweepResult(recs, fit, target, tolerance, time.perf_counter() - t0,
                       {"violations": violations, "n": n, "h": h})


def shrinking_square_sweep(h: float = 1 / 256, steps: Sequence[int] = (1, 2, 4, 8, 16), n: int = 1,
                           tolerance: float = 0.1, workers: int | None = None) -> SweepResult:
    """Unit square against ``(0,1) x (0, 1-t)`` with grid-aligned ``t = k h``."""
    sq = rectangle_domain(1.0, 1.0)
    return fd_stability_sweep(sq, lambda t: sq.with_profile(0, constant(1.0 - t)), [k * h for k in steps], n, h,
                              None, 1.0, tolerance, workers)


def sector_tilde_sweep(beta: float = 3 * math.pi / 4, eps: Sequence[float] | None = None, h: float = 1 / 64,
                       richardson_order: int = 1, tolerance: float = 0.05,
                       workers: int | None = None) -> SweepResult:
    """Sector against its vertex-truncated subsets, extrapolated from ``h`` and ``h/2``.

    The staircase error of the slanted cut is first order, hence the default
    ``richardson_order=1``.
    """
    eps = np.geomspace(0.04, 0.3, 6) if eps is None else np.asarray(eps, dtype=float)
    d = sector_domain(beta)
    return fd_stability_sweep(d, lambda e: d.with_profile(0, tilde_profile(beta, e)), eps, 1, h, richardson_order,
                              angular_order(beta).nu.value, tolerance, workers)


def random_nested_pair(rng: np.random.Generator) -> tuple[SubgraphDomain, SubgraphDomain, int]:
    """Random single-chart domain, a subset of it cut by a lower graph, and an index ``n <= 5``."""
    g1 = Profile("sinusoid", {"offset": rng.uniform(0.7, 0.9), "amplitude": rng.uniform(0.0, 0.1),
                              "wavenumber": rng.uniform(1.0, 6.0), "phase": rng.uniform(0.0, 2 * math.pi)})
    q = Profile("sinusoid", {"offset": rng.uniform(0.55, 0.85), "amplitude": rng.uniform(0.0, 0.15),
                             "wavenumber": rng.uniform(1.0, 8.0), "phase": rng.uniform(0.0, 2 * math.pi)})
    d1 = single_chart_domain(g1)
    d2 = d1.with_profile(0, Profile("min", {"parts": [g1, q]}))
    return d1, d2, int(rng.integers(1, 6))


@dataclass(frozen=True)
class MonotonicityReport:
    pairs: int
    violations: int
    min_margin: float


def monotonicity_check(pairs: int = 100, h: float = 1 / 32, seed: int = DEFAULT_SEED) -> MonotonicityReport:
    """Count pairs with ``lambda_n[inner] < lambda_n[outer]`` on a common grid."""
    rng = np.random.default_rng(seed)
    bad, margins = 0, []
    for _ in range(pairs):
        d1, d2, n = random_nested_pair(rng)
        check_nested(d1, d2, [h], int(rng.integers(2**32)))
        a, b = _lambda_n(d1, h, n), _lambda_n(d2, h, n)
        margins.append(b - a)
        bad += int(b < a)
    return MonotonicityReport(pairs, bad, float(min(margins)))


# clamped beam


def clamped_root(index: int = 1) -> float:
    """``index``-th positive root of ``cos(mu) cosh(mu) = 1``."""
    mid = (index + 0.5) * math.pi
    return bisect(lambda m: math.cos(m) * math.cosh(m) - 1.0, mid - 0.5, mid + 0.5, xtol=1e-15)


def biharmonic_lambda1(L: float, h: float) -> float:
    return float(smallest_eigenvalues(assemble_clamped_biharmonic_1d(L, h), 1, vectors=False).values[0])


@dataclass(frozen=True)
class BiharmonicCalibration:
    extrapolated: float
    exact: float
    rel_error: float


def biharmonic_calibration(h: float = 1 / 100) -> BiharmonicCalibration:
    """Richardson over ``h, h/2`` on ``(0, 1)`` against ``mu_1^4``."""
    lam = richardson_extrapolate(biharmonic_lambda1(1.0, h), biharmonic_lambda1(1.0, h / 2))
    exact = clamped_root(1) ** 4
    return BiharmonicCalibration(lam, exact, abs(lam - exact) / exact)


def biharmonic_sweep(h: float = 1e-3, steps: Sequence[int] = (1, 2, 4, 8, 16, 32), tolerance: float = 0.05,
                     workers: int | None = None) -> SweepResult:
    """``(0, 1)`` against ``(0, 1 - t)`` with ``t = k h``; sym_diff is ``t``."""
    t0 = time.perf_counter()
    ref = biharmonic_lambda1(1.0, h)
    ts = [k * h for k in steps]
    vals = _map(lambda t: biharmonic_lambda1(1.0 - t, h), ts, workers)
    recs = tuple(SweepRecord(t, t, v, ref) for t, v in zip(ts, vals))
    return SweepResult(recs, fit_exponent(recs), 1.0, tolerance, time.perf_counter() - t0)


# transition check


def grid_modes(domain, h: float, n: int) -> tuple[np.ndarray, list[GridFunction]]:
    """First ``n`` discrete Dirichlet modes as zero-extended grid functions with unit discrete ``L^2`` norm."""
    op = assemble_dirichlet_laplacian_2d(domain, h)
    res = smallest_eigenvalues(op, n)
    x, y = domain_grid(domain, h)
    ix0, iy0 = round(x[0] / h), round(y[0] / h)
    modes = []
    for k in range(n):
        V = np.zeros((len(x), len(y)))
        V[op.nodes[:, 0] - ix0, op.nodes[:, 1] - iy0] = res.vectors[:, k] / h
        modes.append(GridFunction(x, y, V, domain.contains))
    return res.values, modes


@dataclass(frozen=True)
class TransitionReport:
    probes: int
    identity_defect: float
    identity_fraction: float
    support_defect: float
    norm_ratio_max: float
    norm_ratio_mean: float
    measures: dict

    @property
    def passed(self) -> bool:
        return (self.identity_defect == 0.0 and self.support_defect == 0.0
                and math.isfinite(self.norm_ratio_max))

    def to_dict(self) -> dict:
        return {"probes": self.probes, "identity_defect": self.identity_defect,
                "identity_fraction": self.identity_fraction, "support_defect": self.support_defect,
                "norm_ratio_max": self.norm_ratio_max, "norm_ratio_mean": self.norm_ratio_mean,
                "measures": self.measures, "pass": self.passed}


def transition_check(omega1, omega2, m: int = 1, p: float = 2.0, probes: int = 10, h: float = 1 / 64,
                     modes: int = 6, seed: int = DEFAULT_SEED) -> TransitionReport:
    """Carry random combinations of the first Dirichlet modes of ``omega1`` to ``omega2``.

    Reports the worst agreement on the identity region, the worst value left
    outside ``omega2``, the fraction of ``omega1`` grid nodes in the identity
    region, and ratios of discrete ``W^{m,p}`` norms.
    """
    rng = np.random.default_rng(seed)
    _, basis = grid_modes(omega1, h, modes)
    pts = basis[0].points()
    in1 = omega1.contains(pts).reshape(basis[0].shape)
    in2 = omega2.contains(pts).reshape(basis[0].shape)
    ident = supp = 0.0
    ratios, frac, measures = [], 1.0, {}
    for _ in range(probes):
        coef = rng.standard_normal(modes)
        u = basis[0].with_values(sum(c * b.values for c, b in zip(coef, basis)), omega1.contains)
        res = apply_transition(u, omega1, omega2, DIRICHLET, m=m)
        ident = max(ident, res.identity_defect)
        supp = max(supp, res.support_defect)
        a = discrete_sobolev_norm(res.output, m, p, in2, strict=False)
        b = discrete_sobolev_norm(u, m, p, in1, strict=False)
        ratios.append(a / b)
        frac = float(np.sum(res.omega3_mask & in1) / np.sum(in1))
        measures = res.measures
    return TransitionReport(probes, ident, frac, supp, float(max(ratios)), float(np.mean(ratios)), measures)


# CLI


def _load_config(path) -> dict:
    if path is None:
        return {}
    return json.loads(Path(path).read_text())


def _domain(cfg) -> SubgraphDomain:
    """Domain from a descriptor or a preset ``{"preset": "square" | "sector", ...}``."""
    if "preset" in cfg:
        kind = cfg["preset"]
        if kind == "square":
            return rectangle_domain(cfg.get("width", 1.0), cfg.get("height", 1.0), cfg.get("rho", 0.1))
        if kind == "sector":
            return sector_domain(cfg["beta"], cfg.get("eps_max", 0.3))
        raise ValueError(f"unknown domain preset {kind!r}")
    return load_domain(cfg)


def _family(omega1: SubgraphDomain, cfg: dict) -> Callable[[float], SubgraphDomain]:
    """``{"chart": j, "profile": <descriptor>, "linear": {"name": [a, b]}}``: parameter ``name = a + b t``."""
    chart = int(cfg.get("chart", 0))
    base = cfg["profile"]
    linear = cfg.get("linear", {})

    def make(t):
        params = dict(base.get("params", {}))
        for key, (a, b) in linear.items():
            params[key] = a + b * t
        return omega1.with_profile(chart, Profile.from_descriptor({"kind": base["kind"], "params": params}))

    return make


def _workers(cfg) -> int:
    return int(cfg.get("workers", min(4, os.cpu_count() or 1)))


def _cmd_sector_spectrum(cfg, args) -> dict:
    spec = SectorSpec(cfg.get("beta", 3 * math.pi / 4), 1, cfg.get("bc", DIRICHLET))
    t0 = time.perf_counter()
    lam = sector_spectrum(spec, int(cfg.get("n", 5)), int(cfg.get("k_max", 8)))
    rows = [{"lambda": v, "k": k, "branch": b} for v, k, b in lam]
    out = {"beta": spec.beta, "bc": spec.bc, "eigenvalues": rows, "runtime_s": time.perf_counter() - t0}
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "sector-spectrum.csv", "w", newline="\n") as fh:
        fh.write("lambda,k,branch\n" + "".join(f"{r['lambda']:.17g},{r['k']},{r['branch']}\n" for r in rows))
    (out_dir / "sector-spectrum.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


def _cmd_sharpness(cfg, args) -> dict:
    eps = cfg.get("eps")
    if eps is None and "eps_range" in cfg:
        lo, hi, num = cfg["eps_range"]
        eps = np.geomspace(lo, hi, int(num))
    res = sharpness_sweep(cfg.get("beta", 3 * math.pi / 4), cfg.get("bc", DIRICHLET), int(cfg.get("k", 1)),
                          int(cfg.get("branch", 1)), eps, cfg.get("tolerance", 0.02), _workers(cfg))
    res.write(args.out, "sharpness-sweep")
    return res.summary()


def _cmd_fd_stability(cfg, args) -> dict:
    preset = cfg.get("preset", "square")
    w = _workers(cfg)
    if preset == "random_nested":
        rep = monotonicity_check(int(cfg.get("pairs", 100)), cfg.get("h", 1 / 32), args.seed)
        out = {"pairs": rep.pairs, "violations": rep.violations, "min_margin": rep.min_margin,
               "pass": rep.violations == 0}
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "fd-stability.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
        return out
    if preset == "square":
        res = shrinking_square_sweep(cfg.get("h", 1 / 256), cfg.get("steps", (1, 2, 4, 8, 16)), int(cfg.get("n", 1)),
                                     cfg.get("tolerance", 0.1), w)
    elif preset == "sector_tilde":
        res = sector_tilde_sweep(cfg.get("beta", 3 * math.pi / 4), cfg.get("eps"), cfg.get("h", 1 / 64),
                                 int(cfg.get("richardson_order", 1)), cfg.get("tolerance", 0.05), w)
    elif preset == "custom":
        omega1 = _domain(cfg["omega1"])
        ro = cfg.get("richardson_order")
        res = fd_stability_sweep(omega1, _family(omega1, cfg["family"]), cfg["params"], int(cfg.get("n", 1)),
                                 cfg.get("h", 1 / 64), None if ro is None else int(ro), cfg.get("target", 1.0),
                                 cfg.get("tolerance", 0.1), w, args.seed)
    else:
        raise ValueError(f"unknown fd-stability preset {preset!r}")
    res.write(args.out, "fd-stability")
    return res.summary()


def _cmd_biharmonic(cfg, args) -> dict:
    res = biharmonic_sweep(cfg.get("h", 1e-3), cfg.get("steps", (1, 2, 4, 8, 16, 32)), cfg.get("tolerance", 0.05),
                           _workers(cfg))
    cal = biharmonic_calibration(cfg.get("calibration_h", 1 / 100))
    res = SweepResult(res.records, res.fit, res.target_exponent, res.tolerance, res.runtime_s,
                      {"lambda1_extrapolated": cal.extrapolated, "mu1_fourth": cal.exact,
                       "lambda1_rel_error": cal.rel_error})
    res.write(args.out, "biharmonic-1d")
    return res.summary()


def _cmd_transition(cfg, args) -> dict:
    if "omega1" in cfg:
        omega1 = _domain(cfg["omega1"])
        omega2 = _domain(cfg["omega2"]) if "omega2" in cfg else _family(omega1, cfg["family"])(cfg.get("t", 1.0))
    else:
        omega1 = single_chart_domain(constant(0.3), band=(0.0, 0.5), rho=0.2)
        omega2 = omega1.with_profile(0, Profile("bump", {"offset": 0.3, "amplitude": -0.05, "center": 0.5,
                                                         "width": 0.3}))
    t0 = time.perf_counter()
    rep = transition_check(omega1, omega2, int(cfg.get("m", 1)), float(cfg.get("p", 2.0)),
                           int(cfg.get("probes", 10)), cfg.get("h", 1 / 64), int(cfg.get("modes", 6)), args.seed)
    out = rep.to_dict()
    out["runtime_s"] = time.perf_counter() - t0
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "transition-check.json").write_text(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return out


COMMANDS = {
    "sector-spectrum": (_cmd_sector_spectrum, "exact eigenvalues of a circular sector"),
    "sharpness-sweep": (_cmd_sharpness, "eigenvalue shift against the area of a removed vertex disc"),
    "fd-stability": (_cmd_fd_stability, "finite-difference eigenvalue sweeps over nested domains"),
    "biharmonic-1d": (_cmd_biharmonic, "clamped beam eigenvalue sweep and calibration"),
    "transition-check": (_cmd_transition, "transition operator diagnostics on Dirichlet modes"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specstab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, helptext) in COMMANDS.items():
        sp_ = sub.add_parser(name, help=helptext)
        sp_.add_argument("--config", help="JSON file with the command parameters")
        sp_.add_argument("--out", default=".", help="output directory (default: current)")
        sp_.add_argument("--seed", type=lambda s: int(s, 0), default=DEFAULT_SEED,
                         help="64-bit seed for randomized parts (default 0xB1F2)")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if not 0 <= args.seed < 2**64:
        raise SystemExit("--seed must be an unsigned 64-bit integer")
    summary = COMMANDS[args.command][0](_load_config(args.config), args)
    json.dump(summary, sys.stdout, indent=2, sort_keys=True)
    sys.stdout.write("\n")
    return 0 if summary.get("pass", True) else 1


if __name__ == "__main__":
    raise SystemExit(main())
