"""Transition operators between neighbouring subgraph domains.

On a chart strip ``W x (a, D1)`` carrying two graphs g1, g2 the maps
``Phi_c(x) = (x', x_N + c h(x))`` push ``O2`` onto ``O_{1,c}``; a weighted sum
``T[v] = sum_k delta_k v o Phi_{c_k}`` with Vandermonde weights keeps W^{m,p}
bounds.  Chartwise operators are pasted with a partition of unity into a map
from functions on one domain to functions on the other.

Grid functions live on uniform tensor grids; off-grid values are obtained by
tensor Lagrange interpolation of degree ``m + 1``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import scipy.sparse as sp
from scipy import integrate, optimize

from .errors import (
    AtlasMismatch,
    CoverageGap,
    IllConditioned,
    InsufficientPadding,
    OutOfDomain,
    SupportViolation,
    VanishingCondition,
)
from .geometry import (
    Atlas,
    Chart,
    ChartStrip,
    SubgraphDomain,
    _quadtree_difference,
    symmetric_difference_measure,
)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
COEFF_TOL = 1e-12
SNAP = 1e-9


# coefficients


@dataclass(frozen=True)
class TransitionCoefficients:
    """Weights ``d`` and ascending nodes ``c`` of the pasted map."""

    m: int
    delta: float
    c: tuple[float, ...]
    d: tuple[float, ...]

    def residuals(self) -> np.ndarray:
        return vandermonde_residuals(self.c, self.d)


def vandermonde_residuals(c: Sequence[float], d: Sequence[float]) -> np.ndarray:
    """Relative residuals of ``sum d_k = 1`` and ``sum d_k c_k^tau = 0``, tau < m.

    Evaluated in exact rational arithmetic on the floating inputs and scaled by
    ``sum |d_k c_k^tau|``.
    """
    cf = [Fraction(x) for x in c]
    df = [Fraction(x) for x in d]
    out = []
    for tau in range(len(c)):
        terms = [dk * ck**tau for dk, ck in zip(df, cf)]
        target = 1 if tau == 0 else 0
        scale = sum(abs(t) for t in terms) or Fraction(1)
        out.append(float(abs(sum(terms) - target) / scale))
    return np.asarray(out)


def solve_coefficients(m: int, c: Sequence[float]) -> tuple[float, ...]:
    """Weights with ``sum d_k = 1`` and ``sum d_k c_k^tau = 0`` for ``tau = 1..m-1``.

    The solution is the Lagrange basis at the nodes evaluated at zero,
    ``d_k = prod_{j != k} c_j / (c_j - c_k)``, formed in exact arithmetic.
    """
    c = [float(x) for x in c]
    if len(c) != m or m < 1:
        raise ValueError("need exactly m nodes")
    if any(not math.isfinite(x) for x in c) or any(b <= a for a, b in zip(c, c[1:])):
        raise ValueError("nodes must be finite and strictly increasing")
    cf = [Fraction(x) for x in c]
    d = []
    for k in range(m):
        w = Fraction(1)
        for j in range(m):
            if j != k:
                w *= cf[j] / (cf[j] - cf[k])
        try:
            d.append(float(w))
        except OverflowError:
            raise IllConditioned("weights overflow") from None
    res = vandermonde_residuals(c, d)
    if np.any(res > COEFF_TOL):
        raise IllConditioned(f"residual {res.max():.3g} exceeds {COEFF_TOL}")
    return tuple(d)


def transition_coefficients(m: int, delta: float) -> TransitionCoefficients:
    """Nodes ``c_k = k - 1 + 1/delta`` and their weights."""
    if not delta > 0:
        raise ValueError("delta must be positive")
    c = tuple(k - 1 + 1 / delta for k in range(1, m + 1))
    return TransitionCoefficients(m, float(delta), c, solve_coefficients(m, c))


# the maps Phi_c


def lift(strip: ChartStrip, m: int, local) -> np.ndarray:
    """``h(x)``: zero up to ``g3``, ``(x_N - g3)^{m+1} / (delta^m e^m)`` above it.

    ``e = (g1 - g2)^+``.  Evaluated for any point over ``W``; where ``e = 0``
    the value is zero.
    """
    pts = np.asarray(local, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    e = strip.excess(x)
    t = np.maximum(y - strip.g3(x), 0.0)
    out = np.zeros(len(pts))
    ok = (e > 0) & (t > 0)
    out[ok] = t[ok] ** (m + 1) / (strip.delta**m * e[ok] ** m)
    return out


def phi_c(strip: ChartStrip, coeffs: TransitionCoefficients, k: int, points) -> np.ndarray:
    """``Phi_{c_k}`` on points of the closed set ``O2`` (k counts from 1)."""
    if not 1 <= k <= coeffs.m:
        raise ValueError("k must lie in 1..m")
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    x, y = pts[:, 0], pts[:, 1]
    tol = 1e-12
    inside = (x >= strip.w[0] - tol) & (x <= strip.w[1] + tol) & (y >= strip.a - tol) & (y <= strip.g2(x) + tol)
    if not inside.all():
        raise OutOfDomain(f"{int((~inside).sum())} points outside the closure of O2")
    out = pts.copy()
    out[:, 1] += coeffs.c[k - 1] * lift(strip, coeffs.m, pts)
    return out


# grid functions


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Values ``values[i, j]`` at ``(x[i], y[j])`` on a uniform grid.

    NaN marks points where the function is undefined.  ``support`` is an
    optional membership test outside of which the function is known to vanish;
    interpolation returns exact zeros there.
    """

    x: np.ndarray
    y: np.ndarray
    values: np.ndarray
    support: Callable | None = None

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        v = np.array(self.values, dtype=float)
        if v.shape != (len(x), len(y)):
            raise ValueError("values must have shape (len(x), len(y))")
        if len(x) < 2 or len(y) < 2:
            raise ValueError("need at least two nodes per direction")
        h = x[1] - x[0]
        if not h > 0 or not np.allclose(np.diff(x), h, rtol=1e-9) or not np.allclose(np.diff(y), h, rtol=1e-9):
            raise ValueError("grid must be uniform with equal spacing in x and y")
        v.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "values", v)

    @property
    def h(self) -> float:
        return float(self.x[1] - self.x[0])

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def points(self) -> np.ndarray:
        X, Y = np.meshgrid(self.x, self.y, indexing="ij")
        return np.column_stack([X.ravel(), Y.ravel()])

    def with_values(self, values, support: Callable | None = None) -> "GridFunction":
        return GridFunction(self.x, self.y, np.asarray(values).reshape(self.shape), support)

    @classmethod
    def sample(cls, f: Callable, x, y, support: Callable | None = None, region: Callable | None = None):
        """Sample ``f(points)``; points outside ``region`` get 0 if a support is declared, else NaN."""
        g = cls(x, y, np.zeros((len(x), len(y))))
        pts = g.points()
        vals = np.asarray(f(pts), dtype=float)
        if region is not None:
            inside = region(pts)
            vals = np.where(inside, vals, 0.0 if support is not None else np.nan)
        return g.with_values(vals, support)

    def to_csv(self, path) -> None:
        """``x,y,value`` rows in array order, 17 significant digits."""
        pts = self.points()
        lines = ["x,y,value"] + [f"{a:.17g},{b:.17g},{v:.17g}" for (a, b), v in zip(pts, self.values.ravel())]
        Path(path).write_text("\n".join(lines) + "\n")


def covering_grid(bbox, h: float, margin: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``h * i`` covering ``bbox`` with ``margin`` extra layers."""
    x0, x1, y0, y1 = bbox
    i = np.arange(math.floor(x0 / h) - margin, math.ceil(x1 / h) + margin + 1)
    j = np.arange(math.floor(y0 / h) - margin, math.ceil(y1 / h) + margin + 1)
    return h * i, h * j


def _axis_weights(t: np.ndarray, q: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Windows of ``q`` nodes around fractional indices ``t`` and Lagrange weights."""
    r = np.round(t)
    t = np.where(np.abs(t - r) < SNAP, r, t)
    start = np.clip(np.floor(t).astype(int) - (q // 2 - 1), 0, n - q)
    nodes = start[:, None] + np.arange(q)[None, :]
    w = np.ones((len(t), q))
    for l in range(q):
        for r_ in range(q):
            if r_ != l:
                w[:, l] *= (t - nodes[:, r_]) / (l - r_)
    return nodes, w


def interpolation_matrix(grid: GridFunction, targets, order: int) -> sp.csr_matrix:
    """Sparse rows evaluating the tensor Lagrange interpolant of degree ``order``.

    Raises CoverageGap when a target lies outside the grid.
    """
    tg = np.asarray(targets, dtype=float).reshape(-1, 2)
    h = grid.h
    nx, ny = grid.shape
    q = order + 1
    if nx < q or ny < q:
        raise CoverageGap("grid too small for the interpolation stencil")
    tx = (tg[:, 0] - grid.x[0]) / h
    ty = (tg[:, 1] - grid.y[0]) / h
    off = (tx < -SNAP) | (tx > nx - 1 + SNAP) | (ty < -SNAP) | (ty > ny - 1 + SNAP)
    if off.any():
        raise CoverageGap(f"{int(off.sum())} image points outside the sampled grid")
    ix, wx = _axis_weights(tx, q, nx)
    iy, wy = _axis_weights(ty, q, ny)
    rows = np.repeat(np.arange(len(tg)), q * q)
    cols = (ix[:, :, None] * ny + iy[:, None, :]).ravel()
    vals = (wx[:, :, None] * wy[:, None, :]).ravel()
    keep = vals != 0.0
    return sp.csr_matrix((vals[keep], (rows[keep], cols[keep])), shape=(len(tg), nx * ny))


# the operator T on one strip


@dataclass(frozen=True, eq=False)
class StripOperator:
    """Sparse matrix of ``T`` on a grid with the row classification it used."""

    matrix: sp.csr_matrix
    moved: np.ndarray
    identity: np.ndarray
    undefined: np.ndarray
    outside: np.ndarray  # strictly above g2 over W

    def __call__(self, v: GridFunction) -> GridFunction:
        out = self.matrix @ v.values.ravel()
        out[self.undefined] = np.nan
        return v.with_values(out)


def strip_operator(grid: GridFunction, strip: ChartStrip, coeffs: TransitionCoefficients,
                   chart: Chart | None = None, support: Callable | None = None, pad: bool | float = False,
                   outside: str = "nan") -> StripOperator:
    """Assemble ``T`` for the grid of ``grid``.

    Rows in ``O3`` copy the input; rows in ``O2 minus O3`` combine interpolated
    values at the image points, and images outside ``support`` contribute exact
    zeros.  With ``pad`` the formula is continued above ``g2`` (within a band
    of that width when ``pad`` is a number) and the identity below ``a``.  Remaining rows are undefined, or copies of the input when
    ``outside="copy"``.  A ``chart`` restricts the strip to its box and maps
    grid points to its frame.
    """
    if abs(coeffs.delta - strip.delta) > 1e-14 * strip.delta:
        raise ValueError("coefficients were built for a different delta")
    if outside not in ("nan", "copy"):
        raise ValueError("outside must be 'nan' or 'copy'")
    pts = grid.points()
    loc = chart.to_local(pts) if chart is not None else pts
    x, y = loc[:, 0], loc[:, 1]
    over = (x > strip.w[0]) & (x < strip.w[1])
    if chart is not None:
        over &= chart.in_box(loc)
    active = over & (y > strip.a)
    g2 = np.full(len(pts), -np.inf)
    g2[active] = strip.g2(x[active])
    hv = np.zeros(len(pts))
    hv[active] = lift(strip, coeffs.m, loc[active])
    in_o2 = active & (y < g2)
    above = active & ~in_o2
    band = math.inf if pad is True else float(pad)
    cont = np.zeros(len(pts), dtype=bool)
    if pad:
        cont[above] = y[above] < g2[above] + band
    moved = (in_o2 | cont) & (hv > 0)
    defined = in_o2 | cont | (over & ~active & bool(pad))
    if outside == "copy":
        defined |= ~active
    identity = defined & ~moved
    undefined = ~defined
    n = len(pts)
    idx = np.flatnonzero(moved)
    ii = np.flatnonzero(identity)
    M = sp.csr_matrix((np.ones(len(ii)), (ii, ii)), shape=(n, n))
    for ck, dk in zip(coeffs.c, coeffs.d):
        img = loc[idx].copy()
        img[:, 1] += ck * hv[idx]
        img = chart.to_world(img) if chart is not None else img
        live = support(img) if support is not None else np.ones(len(idx), dtype=bool)
        P = interpolation_matrix(grid, img[live], coeffs.m + 1).tocoo()
        M = M + sp.csr_matrix((dk * P.data, (idx[live][P.row], P.col)), shape=(n, n))
    return StripOperator(M.tocsr(), moved, identity, undefined, active & (y > g2))


def apply_T(v: GridFunction, strip: ChartStrip, coeffs: TransitionCoefficients, chart: Chart | None = None,
            pad: bool | float = False) -> GridFunction:
    """``T[v] = sum_k delta_k v(Phi_{c_k})`` on the grid of ``v``.

    ``v`` must be defined on ``W x (a, sup g_{1,c_m})`` with room for the
    stencils; its declared support (if any) is honoured.  Raises CoverageGap
    when interpolation needs values that are not available.
    """
    op = strip_operator(v, strip, coeffs, chart, v.support, pad)
    out = op(v)
    bad = op.moved & ~np.isfinite(out.values.ravel())
    if bad.any():
        raise CoverageGap(f"{int(bad.sum())} image stencils touch undefined values")
    return out


# discrete norms


def _diff(a: np.ndarray, r: int, axis: int, h: float) -> np.ndarray:
    """Central difference of order ``r`` along ``axis``; NaN where the stencil leaves the array."""
    out = np.array(a, dtype=float)
    steps = [2] * (r // 2) + [1] * (r % 2)
    for s in steps:
        pad = [(0, 0), (0, 0)]
        pad[axis] = (1, 1)
        b = np.pad(out, pad, constant_values=np.nan)
        lo = [slice(None)] * 2
        mid = [slice(None)] * 2
        hi = [slice(None)] * 2
        lo[axis], mid[axis], hi[axis] = slice(0, -2), slice(1, -1), slice(2, None)
        if s == 2:
            out = (b[tuple(hi)] - 2 * b[tuple(mid)] + b[tuple(lo)]) / h**2
        else:
            out = (b[tuple(hi)] - b[tuple(lo)]) / (2 * h)
    return out


def _lp(vals: np.ndarray, p: float, h: float) -> float:
    if math.isinf(p):
        return float(np.max(np.abs(vals))) if len(vals) else 0.0
    return float((h * h * np.sum(np.abs(vals) ** p)) ** (1 / p))


def derivative_terms(u: GridFunction, m: int, mask=None, strict: bool = True) -> dict[tuple[int, int], np.ndarray]:
    """Central-difference ``D^alpha u`` at the masked points for ``|alpha| <= m``.

    The mask defaults to the declared support, else to the defined values.
    Raises InsufficientPadding if a masked point lacks a complete stencil;
    with ``strict=False`` such points are dropped instead.
    """
    if mask is None:
        mask = u.support(u.points()).reshape(u.shape) if u.support is not None else np.isfinite(u.values)
    mask = np.asarray(mask, dtype=bool).reshape(u.shape)
    if not mask.any():
        raise InsufficientPadding("no points to measure")
    full = {}
    for k in range(m + 1):
        for a1 in range(k, -1, -1):
            full[(a1, k - a1)] = _diff(_diff(u.values, a1, 0, u.h), k - a1, 1, u.h)
    ok = np.logical_and.reduce([np.isfinite(d) for d in full.values()])
    if strict and not ok[mask].all():
        raise InsufficientPadding("a difference stencil leaves the defined data")
    mask = mask & ok
    if not mask.any():
        raise InsufficientPadding("no point has a complete stencil")
    return {a: d[mask] for a, d in full.items()}


def discrete_sobolev_norm(u: GridFunction, m: int, p: float, mask=None, strict: bool = True) -> float:
    """``sum_{|alpha| <= m} ||D^alpha u||_p`` with central differences.

    ``L^p`` norms are Riemann sums with weight ``h^2``; ``p = inf`` takes the
    grid maximum.
    """
    if not p >= 1:
        raise ValueError("p must be at least 1")
    return sum(_lp(v, p, u.h) for v in derivative_terms(u, m, mask, strict).values())


# partition of unity


def smoothstep(s, m: int) -> np.ndarray:
    """``C^m`` polynomial step: 0 for ``s <= 0``, 1 for ``s >= 1``."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    tail = sum(math.comb(m + k, k) * (1 - s) ** k for k in range(m + 1))
    return s ** (m + 1) * tail


@dataclass(frozen=True, eq=False)
class PartitionOfUnity:
    """Normalized tensor bumps, one per chart.

    The raw bump of chart j equals 1 on ``(V_j)_rho`` and vanishes outside
    ``(V_j)_{3 rho/4}``; dividing by their sum gives weights summing to one
    wherever some bump is positive, in particular on the union of the
    ``(V_j)_rho``.
    """

    atlas: Atlas
    m: int = 1

    def _bump_1d(self, t, lo: float, hi: float) -> np.ndarray:
        r = self.atlas.rho
        return smoothstep((t - lo - 0.75 * r) / (0.25 * r), self.m) * smoothstep((hi - 0.75 * r - t) / (0.25 * r), self.m)

    def bumps(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.zeros((len(pts), self.atlas.s))
        for j, ch in enumerate(self.atlas.charts):
            loc = ch.to_local(pts)
            a1, b1, aN, bN = ch.box
            out[:, j] = self._bump_1d(loc[:, 0], a1, b1) * self._bump_1d(loc[:, 1], aN, bN)
        return out

    def weights(self, points) -> np.ndarray:
        """``psi_j`` at the points, shape ``(n, s)``; rows vanish where no bump is positive."""
        b = self.bumps(points)
        tot = b.sum(axis=1, keepdims=True)
        return np.divide(b, tot, out=np.zeros_like(b), where=tot > 0)

    @cached_property
    def C3(self) -> float:
        """Sampled bound of ``sum_j |grad psi_j|`` on the union of the ``(V_j)_rho``."""
        x0, x1, y0, y1 = self.atlas.bbox()
        h = self.atlas.rho / 16
        X, Y = np.meshgrid(np.arange(x0, x1, h), np.arange(y0, y1, h), indexing="ij")
        pts = np.column_stack([X.ravel(), Y.ravel()])
        pts = pts[self.atlas.covered(pts)]
        e = 1e-6 * self.atlas.rho
        gx = (self.weights(pts + [e, 0]) - self.weights(pts - [e, 0])) / (2 * e)
        gy = (self.weights(pts + [0, e]) - self.weights(pts - [0, e])) / (2 * e)
        return float(np.max(np.sum(np.hypot(gx, gy), axis=1)))


# extensions


def reflection_coefficients(m: int) -> tuple[float, ...]:
    """``b_i`` with ``sum_i b_i (-1/i)^q = 1`` for ``q = 0..m-1``.

    ``E u(g + t) = sum_i b_i u(g - t/i)`` then matches ``m - 1`` normal
    derivatives across the flattened boundary.
    """
    A = [[Fraction(-1, i) ** q for i in range(1, m + 1)] for q in range(m)]
    # Gauss-Jordan in exact arithmetic
    rhs = [Fraction(1)] * m
    for col in range(m):
        piv = next(r for r in range(col, m) if A[r][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        rhs[col], rhs[piv] = rhs[piv], rhs[col]
        for r in range(m):
            if r != col and A[r][col] != 0:
                f = A[r][col] / A[col][col]
                A[r] = [x - f * y for x, y in zip(A[r], A[col])]
                rhs[r] -= f * rhs[col]
    return tuple(float(rhs[i] / A[i][i]) for i in range(m))


def _aligned(chart: Chart) -> bool:
    return chart.rotation_deg % 90.0 == 0.0


def _column_values(u: GridFunction, chart: Chart, loc_targets: np.ndarray, order: int) -> np.ndarray:
    """Interpolate ``u`` at chart-frame targets along grid lines, skipping undefined nodes."""
    world = chart.to_world(loc_targets)
    normal = chart.to_world([[0.0, 1.0]])[0]
    axis = 0 if abs(normal[0]) > 0.5 else 1
    coords = (u.x, u.y)
    h = u.h
    tx = (world[:, 0] - u.x[0]) / h
    ty = (world[:, 1] - u.y[0]) / h
    along, across = (tx, ty) if axis == 0 else (ty, tx)
    j = np.round(across).astype(int)
    if np.any(np.abs(across - j) > SNAP):
        raise CoverageGap("reflection targets are not on grid lines")
    q = order + 1
    n_along = len(coords[axis])
    out = np.full(len(world), np.nan)
    vals = u.values if axis == 0 else u.values.T
    for r, (t, jj) in enumerate(zip(along, j)):
        if not 0 <= jj < vals.shape[1]:
            continue
        col = vals[:, jj]
        i0 = int(math.floor(t))
        best = None
        for start in range(max(i0 - q + 1, 0), min(i0, n_along - q) + 1):
            if np.all(np.isfinite(col[start:start + q])):
                off = abs(start + (q - 1) / 2 - t)
                if best is None or off < best[0]:
                    best = (off, start)
        if best is None:
            # one-sided window ending below the target
            for start in range(min(i0, n_along - q), max(i0 - 4 * q, 0) - 1, -1):
                if np.all(np.isfinite(col[start:start + q])):
                    best = (0, start)
                    break
        if best is None:
            continue
        nodes = best[1] + np.arange(q)
        w = np.ones(q)
        for l in range(q):
            for s_ in range(q):
                if s_ != l:
                    w[l] *= (t - nodes[s_]) / (l - s_)
        out[r] = float(w @ col[nodes])
    return out


def _differing_charts(d1: SubgraphDomain, d2: SubgraphDomain) -> list[int]:
    return [j for j in d1.boundary_charts if d1.profiles[j] != d2.profiles[j]]


def dirichlet_extension(u: GridFunction, omega1) -> GridFunction:
    """Zero extension of ``u`` from ``omega1``; the result declares ``omega1`` as support."""
    inside = omega1.contains(u.points()).reshape(u.shape)
    vals = u.values
    if np.any(~np.isfinite(vals[inside])):
        raise ValueError("u must be defined at every grid point of the domain")
    outside = vals[~inside]
    if np.any(np.isfinite(outside) & (outside != 0)):
        raise SupportViolation("u does not vanish outside its domain")
    return u.with_values(np.where(inside, vals, 0.0), omega1.contains)


def neumann_extension(u: GridFunction, omega1: SubgraphDomain, charts: Sequence[int], m: int) -> GridFunction:
    """Reflection extension across the boundary in the listed charts.

    In chart coordinates a point ``g(x') + t`` above the graph receives
    ``sum_i b_i u(x', g(x') - t/i)`` (the flattened boundary reflected with
    matching of ``m - 1`` normal derivatives).  Overlapping charts are blended
    with their raw bumps.  Points not covered stay undefined.
    """
    pts = u.points()
    inside = omega1.contains(pts)
    base = np.where(inside, u.values.ravel(), np.nan)
    src = u.with_values(base)
    b = reflection_coefficients(m)
    pou = PartitionOfUnity(omega1.atlas, m)
    acc = np.zeros(len(pts))
    wsum = np.zeros(len(pts))
    for j in charts:
        ch = omega1.atlas.charts[j]
        if not _aligned(ch):
            raise ValueError("reflection extension needs charts aligned with the grid")
        loc = ch.to_local(pts)
        sel = np.flatnonzero(ch.in_box(loc) & ~inside)
        if len(sel) == 0:
            continue
        g = omega1.profiles[j](loc[sel, 0])
        t = loc[sel, 1] - g
        ext = np.zeros(len(sel))
        for i, bi in enumerate(b, start=1):
            tg = np.column_stack([loc[sel, 0], g - t / i])
            ext += bi * _column_values(src, ch, tg, m + 1)
        wj = pou.bumps(pts[sel])[:, j]
        wj = np.where(wj > 0, wj, 1e-300)
        ok = np.isfinite(ext)
        acc[sel[ok]] += wj[ok] * ext[ok]
        wsum[sel[ok]] += wj[ok]
    out = base.copy()
    filled = ~inside & (wsum > 0)
    out[filled] = acc[filled] / wsum[filled]
    return u.with_values(out)


@dataclass(frozen=True, eq=False)
class Omega3:
    """``Omega1`` minus the transition layers ``g3 <= x_N < g1`` of the differing charts."""

    omega1: SubgraphDomain
    strips: dict

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        out = self.omega1.contains(pts)
        for j, strip in self.strips.items():
            ch = self.omega1.atlas.charts[j]
            loc = ch.to_local(pts)
            box = ch.in_box(loc)
            layer = np.zeros(len(pts), dtype=bool)
            layer[box] = loc[box, 1] >= strip.g3(loc[box, 0])
            out &= ~layer
        return out

    def bbox(self):
        return self.omega1.bbox()


@dataclass(frozen=True, eq=False)
class TransitionResult:
    output: GridFunction
    omega3: Omega3
    omega3_mask: np.ndarray
    coeffs: TransitionCoefficients
    measures: dict
    identity_defect: float
    support_defect: float


def common_delta(atlas: Atlas) -> float:
    """``min_j rho / (4 (b_Nj - a_Nj - rho))`` over the boundary charts."""
    r = atlas.rho
    vals = [r / (4 * (ch.box[3] - ch.box[2] - r)) for ch in atlas.charts[: atlas.s_prime]]
    return min(vals) if vals else 0.5


def chart_strip(d1: SubgraphDomain, d2: SubgraphDomain, j: int, delta: float) -> ChartStrip:
    """Strip of chart j with ``a = a_N``, ``D1 = b_N - rho/2``, ``D2 = a_N + rho/2``."""
    a1, b1, aN, bN = d1.atlas.charts[j].box
    r = d1.atlas.rho
    return ChartStrip((a1, b1), aN, bN - r / 2, aN + r / 2, d1.profiles[j], d2.profiles[j], delta_value=delta)


def _layer_measures(strips: dict) -> tuple[float, float]:
    (strip,) = strips.values()
    lo, hi = strip.w
    pts = [p for p in strip.kinks() if lo < p < hi] or None
    kw = dict(points=pts, epsabs=1e-14, epsrel=1e-12, limit=500)
    scal = lambda f: (lambda t: float(f(np.array([t]))[0]))
    e, _ = integrate.quad(scal(strip.excess), lo, hi, **kw)
    back, _ = integrate.quad(scal(lambda x: np.maximum(strip.g2(x) - strip.g1(x), 0.0)), lo, hi, **kw)
    return (1 + strip.delta) * e, strip.delta * e + back


def _riemann_layer(strips: dict, h: float) -> float:
    """Midpoint sum at spacing ``h`` of the chartwise ``|Omega2 minus Omega3|`` layers."""
    tot = 0.0
    for strip in strips.values():
        lo, hi = strip.w
        n = max(1, round((hi - lo) / h))
        xm = lo + (np.arange(n) + 0.5) * (hi - lo) / n
        tot += float(np.sum(strip.delta * strip.excess(xm) + np.maximum(strip.g2(xm) - strip.g1(xm), 0.0))) * (hi - lo) / n
    return tot


def apply_transition(u: GridFunction, omega1: SubgraphDomain, omega2: SubgraphDomain, bc: str = DIRICHLET,
                     pou: PartitionOfUnity | None = None, m: int = 1) -> TransitionResult:
    """Carry ``u`` from ``omega1`` to ``omega2``.

    ``u`` is extended (by zero for Dirichlet, by reflection for Neumann),
    multiplied by the partition of unity, moved chartwise by ``T`` and summed.
    Written as ``v + sum_j (T_j - I)[psi_j v]``, which equals the pasted sum on
    ``omega2`` and leaves ``u`` untouched on ``Omega3``.
    """
    if omega1.atlas != omega2.atlas:
        raise AtlasMismatch("domains use different atlases")
    bc = bc.lower()
    if bc not in (DIRICHLET, NEUMANN):
        raise ValueError(f"unknown boundary condition {bc!r}")
    atlas = omega1.atlas
    pou = pou or PartitionOfUnity(atlas, m)
    delta = common_delta(atlas)
    coeffs = transition_coefficients(m, delta)
    diff = _differing_charts(omega1, omega2)
    strips = {j: chart_strip(omega1, omega2, j, delta) for j in diff}
    pts = u.points()
    if bc == DIRICHLET:
        v = dirichlet_extension(u, omega1)
    else:
        v = neumann_extension(u, omega1, diff, m)
    vv = v.values.ravel()
    out = vv.copy()
    support_defect = 0.0
    if diff:
        psi = pou.weights(pts)
    for j, strip in strips.items():
        w = np.where(psi[:, j] > 0, psi[:, j] * np.nan_to_num(vv), 0.0)
        op = strip_operator(u, strip, coeffs, atlas.charts[j], v.support, pad=bc == DIRICHLET, outside="copy")
        Tw = op.matrix @ w
        Tw[op.undefined] = np.nan
        if bc == DIRICHLET and op.outside.any():
            support_defect = max(support_defect, float(np.max(np.abs(Tw[op.outside]))))
        out += Tw - w
    in2 = omega2.contains(pts)
    out = np.where(in2, out, 0.0 if bc == DIRICHLET else np.nan)
    if np.any(~np.isfinite(out[in2])):
        raise CoverageGap("transition output undefined at points of the target domain")
    o3 = Omega3(omega1, strips)
    mask3 = o3.contains(pts)
    ident = float(np.max(np.abs(out[mask3] - u.values.ravel()[mask3]))) if mask3.any() else 0.0
    sym = symmetric_difference_measure(omega1, omega2)
    if not diff:
        m13 = m23 = 0.0
    elif len(diff) == 1:
        m13, m23 = _layer_measures(strips)
    else:
        m13 = _quadtree_difference(omega1, o3, atlas.bbox()).value
        m23 = _quadtree_difference(omega2, o3, atlas.bbox()).value
    measures = {
        "sym_diff": sym.value,
        "omega1_minus_omega3": m13,
        "omega2_minus_omega3": m23,
        "grid_omega2_minus_omega3": _riemann_layer(strips, u.h),
    }
    result = u.with_values(out, omega2.contains if bc == DIRICHLET else None)
    return TransitionResult(result, o3, mask3.reshape(u.shape), coeffs, measures, ident, support_defect)


def domain_grid(domain, h: float, margin: int = 6) -> tuple[np.ndarray, np.ndarray]:
    """Grid nodes ``h * i`` covering the atlas boxes of ``domain``."""
    return covering_grid(domain.bbox(), h, margin)


# the one-dimensional cancellation inequality


@dataclass(frozen=True)
class CancellationReport:
    lhs: float
    rhs_bound: float
    ratio: float


def _norm_1d(g: Callable, lo: float, hi: float, p: float, n: int = 4001) -> float:
    if math.isinf(p):
        xs = np.linspace(lo, hi, n)
        vals = np.abs(g(xs))
        k = int(np.argmax(vals))
        a, b = xs[max(k - 1, 0)], xs[min(k + 1, n - 1)]
        res = optimize.minimize_scalar(lambda t: -abs(float(g(np.array([t]))[0])), bounds=(a, b), method="bounded",
                                       options={"xatol": 1e-13})
        return max(float(vals[k]), -float(res.fun))
    with warnings.catch_warnings():
        # roundoff warnings are expected when the integrand cancels to ~0
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        val, _ = integrate.quad(lambda t: abs(float(g(np.array([t]))[0])) ** p, lo, hi, epsabs=1e-15,
                                epsrel=1e-12, limit=400)
    return val ** (1 / p)


def lemma_ext_check(gamma: Sequence[float], c: Sequence[float], eta: Callable, f: Callable, fs: Callable, s: int,
                    p: float, a: float, b: float) -> CancellationReport:
    """Both sides of ``||eta^-s sum_k gamma_k c_k f(x + c_k eta)||_p <= C ||f^(s)||_p``.

    ``fs`` is the ``s``-th derivative of ``f``; ``C = sum_k |gamma_k| c_k (c_k - c_1)^s``.
    The left norm is over ``(a, b)``, the right one over ``(a, b + c_mu eta(b))``.
    ``eta`` must be positive and non-decreasing.  Raises VanishingCondition
    unless ``sum_k gamma_k c_k^sigma = 0`` for ``sigma = 1..s``.
    """
    g = np.asarray(gamma, dtype=float)
    cc = np.asarray(c, dtype=float)
    if len(g) != len(cc) or s < 1 or s > len(cc):
        raise ValueError("need len(gamma) == len(c) >= s >= 1")
    if np.any(cc <= 0) or np.any(np.diff(cc) <= 0):
        raise ValueError("c must be positive and strictly increasing")
    if not a < b:
        raise ValueError("need a < b")
    ev = np.asarray(eta(np.linspace(a, b, 2001)), dtype=float)
    if np.any(ev <= 0) or np.any(np.diff(ev) < -1e-14 * np.max(ev)):
        raise ValueError("eta must be positive and non-decreasing on [a, b]")
    for sigma in range(1, s + 1):
        terms = g * cc**sigma
        if abs(terms.sum()) > 1e-12 * max(np.abs(terms).sum(), 1e-300):
            raise VanishingCondition(f"sum gamma_k c_k^{sigma} does not vanish")
    comb = lambda x: eta(x) ** (-s) * sum(gk * ck * f(x + ck * eta(x)) for gk, ck in zip(g, cc))
    lhs = _norm_1d(comb, a, b, p)
    C = float(np.sum(np.abs(g) * cc * (cc - cc[0]) ** s))
    top = b + cc[-1] * float(eta(np.array([b]))[0])
    rhs = C * _norm_1d(fs, a, top, p)
    if rhs > 0:
        ratio = lhs / rhs
    else:
        # both sides vanish up to cancellation error
        ratio = 0.0 if lhs <= 1e-9 * max(1.0, C) else math.inf
    return CancellationReport(lhs, rhs, ratio)


# transition defects on eigenfunctions


def dirichlet_form(u: GridFunction, v: GridFunction, m: int = 1) -> float:
    """Discrete ``sum_{|alpha|=m}`` form of zero-extended grid functions.

    ``m = 1``: sum over grid edges of products of differences (the 5-point
    form); ``m = 2``: ``h^2 sum Lap_h u Lap_h v``.
    """
    a, b = np.nan_to_num(u.values), np.nan_to_num(v.values)
    if m == 1:
        return float(np.sum(np.diff(a, axis=0) * np.diff(b, axis=0)) + np.sum(np.diff(a, axis=1) * np.diff(b, axis=1)))
    if m == 2:
        lap = lambda z: (z[2:, 1:-1] + z[:-2, 1:-1] + z[1:-1, 2:] + z[1:-1, :-2] - 4 * z[1:-1, 1:-1]) / u.h**2
        return float(u.h**2 * np.sum(lap(a) * lap(b)))
    raise ValueError("m must be 1 or 2")


def l2_inner(u: GridFunction, v: GridFunction) -> float:
    return float(u.h**2 * np.sum(np.nan_to_num(u.values) * np.nan_to_num(v.values)))


@dataclass(frozen=True, eq=False)
class TransitionDefect:
    form: np.ndarray
    l2: np.ndarray
    sym_diff: float
    scale: float

    @property
    def scaled_form(self) -> np.ndarray:
        return self.form / self.scale

    @property
    def scaled_l2(self) -> np.ndarray:
        return self.l2 / self.scale


def transition_defect(omega1: SubgraphDomain, omega2: SubgraphDomain, modes: Sequence[GridFunction], m: int = 1,
                      p: float = 4.0) -> TransitionDefect:
    """Deviations of forms and inner products of Dirichlet modes under the transition map.

    Returns ``|Q2(T phi_k, T phi_l) - Q1(phi_k, phi_l)|`` and the ``L^2``
    analogue, with the scale ``|Omega1 sym Omega2|^{1 - 2/p}``.
    """
    n = len(modes)
    G = np.array([[l2_inner(a, b) for b in modes] for a in modes])
    if np.max(np.abs(G - np.eye(n))) > 1e-8:
        raise ValueError("modes are not discretely orthonormal")
    moved = [apply_transition(phi, omega1, omega2, DIRICHLET, m=m).output for phi in modes]
    form = np.array([[abs(dirichlet_form(moved[k], moved[l], m) - dirichlet_form(modes[k], modes[l], m))
                      for l in range(n)] for k in range(n)])
    l2 = np.array([[abs(l2_inner(moved[k], moved[l]) - G[k, l]) for l in range(n)] for k in range(n)])
    sym = symmetric_difference_measure(omega1, omega2).value
    scale = sym ** (1 - 2 / p) if sym > 0 else 1.0
    return TransitionDefect(form, l2, sym, scale)
