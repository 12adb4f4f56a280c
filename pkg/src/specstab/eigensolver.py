"""Finite-difference eigenvalue problems.

Dirichlet Laplacian on planar regions by the 5-point stencil on the nodes of a
vertex grid that fall inside the region (staircase boundary), the clamped
biharmonic operator on an interval, and helpers for symmetric eigensolves,
min-max checks and Richardson extrapolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import GridTooCoarse, NoConvergence

DENSE_LIMIT = 2000
RESIDUAL_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class DiscreteOperator:
    """Symmetric sparse matrix with its grid metadata.

    ``nodes`` holds integer grid indices ``(i, j)`` of the unknowns (2D) or
    ``i`` (1D); world coordinates are ``origin + h * index``.
    """

    matrix: sp.csr_matrix
    h: float
    bc: str
    order: int
    nodes: np.ndarray = field(default_factory=lambda: np.zeros((0, 2), dtype=int))
    origin: tuple[float, ...] = (0.0, 0.0)

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def coords(self) -> np.ndarray:
        return np.asarray(self.origin) + self.h * self.nodes

    def is_symmetric(self) -> bool:
        d = self.matrix - self.matrix.T
        return d.nnz == 0 or np.max(np.abs(d.data)) == 0.0


@dataclass(frozen=True, eq=False)
class EigenResult:
    values: np.ndarray
    vectors: np.ndarray | None
    h: float
    extrapolated: bool = False
    residuals: np.ndarray | None = None


def _grid_nodes(region, h: float, origin=(0.0, 0.0)):
    x0, x1, y0, y1 = region.bbox()
    ox, oy = origin
    i = np.arange(math.floor((x0 - ox) / h) - 1, math.ceil((x1 - ox) / h) + 2)
    j = np.arange(math.floor((y0 - oy) / h) - 1, math.ceil((y1 - oy) / h) + 2)
    I, J = np.meshgrid(i, j, indexing="ij")
    idx = np.column_stack([I.ravel(), J.ravel()])
    pts = np.column_stack([ox + h * idx[:, 0], oy + h * idx[:, 1]])
    inside = region.contains(pts)
    return idx[inside]


def laplacian_on_nodes(nodes: np.ndarray, h: float) -> sp.csr_matrix:
    """5-point Dirichlet Laplacian on an arbitrary set of grid nodes."""
    n = len(nodes)
    key = {tuple(p): k for k, p in enumerate(map(tuple, nodes))}
    rows, cols = [np.arange(n)], [np.arange(n)]
    vals = [np.full(n, 4.0 / h**2)]
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        nb = [key.get((a + di, b + dj), -1) for a, b in nodes]
        nb = np.asarray(nb)
        ok = nb >= 0
        rows.append(np.arange(n)[ok])
        cols.append(nb[ok])
        vals.append(np.full(ok.sum(), -1.0 / h**2))
    A = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    return A.tocsr()


def assemble_dirichlet_laplacian_2d(region, h: float, origin=(0.0, 0.0), min_nodes: int = 10) -> DiscreteOperator:
    """Dirichlet Laplacian on the grid nodes ``origin + h*(i, j)`` lying in ``region``."""
    if not h > 0:
        raise ValueError("h must be positive")
    nodes = _grid_nodes(region, h, origin)
    if len(nodes) == 0 or min(len(np.unique(nodes[:, 0])), len(np.unique(nodes[:, 1]))) < min_nodes:
        raise GridTooCoarse(f"fewer than {min_nodes} interior nodes per direction at h={h}")
    return DiscreteOperator(laplacian_on_nodes(nodes, h), h, "dirichlet", 1, nodes, tuple(origin))


def assemble_clamped_biharmonic_1d(L: float, h: float) -> DiscreteOperator:
    """``u''''`` on (0, L) with ``u = u' = 0`` at both ends (ghost values ``u_{-1} = u_1``)."""
    if not L > 0:
        raise ValueError("L must be positive")
    if h > L / 20 * (1 + 1e-12):
        raise GridTooCoarse("need h <= L/20")
    N = round(L / h)
    if abs(N * h - L) > 1e-9 * L:
        raise ValueError("h must divide L")
    n = N - 1
    main = np.full(n, 6.0)
    main[0] = main[-1] = 7.0
    A = sp.diags([np.ones(n - 2), -4 * np.ones(n - 1), main, -4 * np.ones(n - 1), np.ones(n - 2)],
                 [-2, -1, 0, 1, 2], format="csr") / h**4
    nodes = np.arange(1, N).reshape(-1, 1)
    return DiscreteOperator(A, h, "clamped", 2, nodes, (0.0,))


def _residuals(A, vals, vecs):
    R = A @ vecs - vecs * vals
    return np.linalg.norm(R, axis=0) / np.linalg.norm(vecs, axis=0)


def residual_tolerance(A) -> float:
    """``1e-8``, relaxed to ``1e-12 ||A||_inf`` for badly scaled matrices."""
    norm = spla.norm(A, np.inf) if sp.issparse(A) else np.linalg.norm(A, np.inf)
    return max(RESIDUAL_TOL, 1e-12 * norm)


def smallest_eigenvalues(op, n: int, vectors: bool = True, maxiter: int = 10**4) -> EigenResult:
    """The ``n`` smallest eigenpairs of a symmetric operator.

    Dense solve below dimension 2000, shift-invert Lanczos about 0 above, with a
    Rayleigh-Ritz polish of the returned subspace.
    """
    A = op.matrix if isinstance(op, DiscreteOperator) else op
    h = op.h if isinstance(op, DiscreteOperator) else float("nan")
    dim = A.shape[0]
    if not 1 <= n <= dim / 4:
        raise ValueError("need 1 <= n <= dimension/4")
    if dim < DENSE_LIMIT:
        M = A.toarray() if sp.issparse(A) else np.asarray(A)
        vals, vecs = la.eigh(M, subset_by_index=(0, n - 1))
    else:
        A = sp.csc_matrix(A)
        try:
            vals, vecs = spla.eigsh(A, k=n, sigma=0.0, which="LM", maxiter=maxiter, tol=1e-14)
        except spla.ArpackNoConvergence as exc:
            raise NoConvergence(str(exc)) from exc
        lu = spla.splu(A)
        for _ in range(2):
            vecs = np.column_stack([lu.solve(vecs[:, k]) for k in range(n)])
            Q, _ = np.linalg.qr(vecs)
            T = Q.T @ (A @ Q)
            vals, W = la.eigh((T + T.T) / 2)
            vecs = Q @ W
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
    res = _residuals(A, vals, vecs)
    bad = res > residual_tolerance(A)
    if np.any(bad):
        raise NoConvergence(f"eigenpair residuals {res[bad]} exceed tolerance")
    return EigenResult(np.asarray(vals), vecs if vectors else None, h, False, res)


@dataclass(frozen=True)
class MinMaxReport:
    trials: int
    violations: int
    min_margin: float
    span_error: float


def rayleigh_minmax_check(op, result: EigenResult, trials: int = 50, seed: int = 0xB1F2) -> MinMaxReport:
    """Min-max spot check: random n-dim subspaces never beat lambda_n."""
    if result.vectors is None:
        raise ValueError("result has no eigenvectors")
    A = op.matrix if isinstance(op, DiscreteOperator) else op
    n = len(result.values)
    lam_n = result.values[-1]
    rng = np.random.default_rng(seed)
    margins = []
    for _ in range(trials):
        Q, _ = np.linalg.qr(rng.standard_normal((A.shape[0], n)))
        margins.append(la.eigvalsh(Q.T @ (A @ Q))[-1] - lam_n)
    Q, _ = np.linalg.qr(result.vectors)
    span = la.eigvalsh(Q.T @ (A @ Q))[-1]
    margins = np.asarray(margins)
    return MinMaxReport(trials, int(np.sum(margins < -1e-9)), float(margins.min()), float(abs(span - lam_n)))


def rayleigh_quotient(op, v) -> float:
    A = op.matrix if isinstance(op, DiscreteOperator) else op
    v = np.asarray(v, dtype=float)
    return float(v @ (A @ v) / (v @ v))


def richardson_extrapolate(v_h: float, v_h2: float, order: int = 2) -> float:
    """Eliminate the ``h**order`` term from values at ``h`` and ``h/2``."""
    if not (math.isfinite(v_h) and math.isfinite(v_h2)):
        raise ValueError("values must be finite")
    f = 2.0**order
    return (f * v_h2 - v_h) / (f - 1.0)


def extrapolated_eigenvalues(assemble, h: float, n: int = 1) -> EigenResult:
    """Richardson-extrapolated eigenvalues from ``assemble(h)`` and ``assemble(h/2)``."""
    a = smallest_eigenvalues(assemble(h), n, vectors=False).values
    b = smallest_eigenvalues(assemble(h / 2), n, vectors=False).values
    return EigenResult(np.array([richardson_extrapolate(x, y) for x, y in zip(a, b)]), None, h, True)


def dump_matrix(op: DiscreteOperator, path) -> None:
    """Write ``i j value`` triples, 0-based, 17 significant digits."""
    A = op.matrix.tocoo()
    lines = [f"{i} {j} {v:.17g}" for i, j, v in zip(A.row, A.col, A.data)]
    Path(path).write_text("\n".join(lines) + "\n")
