"""Exact spectra of the Laplacian on circular and annular sectors.

The sector of half-angle ``beta`` is ``{0 < r < 1, |theta| < beta}`` and the
annular sector removes the disc of radius ``eps``.  Separation of variables
gives angular order ``nu = pi k / (2 beta)``; radial eigenvalues are squares of
Bessel zeros (sector) or roots of the cross-product equation (annular sector).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import (
    BranchJump,
    DenominatorVanishing,
    InclusionViolated,
    IntegerOrder,
    InvalidDomain,
    KMaxTooSmall,
    NoConvergence,
    ZeroDerivative,
)
from .geometry import PolarSector, SubgraphDomain, sector_domain, tilde_profile
from .specfun import (
    Order,
    as_order,
    bessel_h,
    bessel_h_prime,
    bessel_j,
    bessel_j_prime,
    bessel_j_zeros,
    bessel_jp_zeros,
    bessel_k,
    bessel_k_prime,
    check_denominator,
)

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
_BCS = (DIRICHLET, NEUMANN)


def _bc(bc: str) -> str:
    b = bc.lower()
    if b not in _BCS:
        raise ValueError(f"boundary condition must be one of {_BCS}")
    return b


@dataclass(frozen=True)
class SectorSpec:
    beta: float
    k: int = 1
    bc: str = DIRICHLET
    epsilon: float = 0.0

    def __post_init__(self):
        if not 0 < self.beta < math.pi:
            raise ValueError("beta must lie in (0, pi)")
        if int(self.k) != self.k or self.k < 1:
            raise ValueError("k must be a positive integer")
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")
        object.__setattr__(self, "bc", _bc(self.bc))

    @property
    def nu(self) -> Order:
        return angular_order(self.beta, self.k).nu


@dataclass(frozen=True)
class AngularOrder:
    nu: Order
    sharpness_regime: bool

    def __float__(self) -> float:
        return self.nu.value


def angular_order(beta: float, k: int = 1) -> AngularOrder:
    """``nu = pi k / (2 beta)``; the sharpness regime is k = 1 with beta in (pi/2, pi)."""
    nu = Order(math.pi * k / (2.0 * beta))
    return AngularOrder(nu, k == 1 and math.pi / 2 < beta < math.pi)


@dataclass(frozen=True)
class RadialMode:
    nu: float
    lam: float
    bc: str
    branch: int
    epsilon: float = 0.0
    residual: float = 0.0
    k: int = 1


@dataclass(frozen=True)
class AsymptoticPrediction:
    lambda_star: float
    slope: float
    eps_exponent: float
    area_exponent: float

    def predict(self, eps):
        return self.lambda_star + self.slope * np.asarray(eps, dtype=float) ** self.eps_exponent


# ---------------------------------------------------------------- sector


def radial_zeros(nu: float, count: int, bc: str) -> list[float]:
    """Squares of the first ``count`` positive zeros of J_nu (Dirichlet) or J'_nu (Neumann)."""
    z = bessel_j_zeros(nu, count) if _bc(bc) == DIRICHLET else bessel_jp_zeros(nu, count)
    return [s * s for s in z]


def sector_spectrum(spec: SectorSpec, n: int, k_max: int) -> list[tuple[float, int, int]]:
    """First ``n`` eigenvalues of the sector as ``(lambda, k, branch)`` triples.

    Neumann includes ``(0, 0, 0)`` for the constant mode.
    """
    if spec.epsilon != 0:
        raise ValueError("sector_spectrum needs epsilon = 0")
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    out: list[tuple[float, int, int]] = []
    ks = range(1, k_max + 1) if spec.bc == DIRICHLET else range(0, k_max + 1)
    for k in ks:
        nu = math.pi * k / (2 * spec.beta)
        for b, lam in enumerate(radial_zeros(nu, n, spec.bc), start=1):
            out.append((lam, k, b))
    if spec.bc == NEUMANN:
        out.append((0.0, 0, 0))
    out.sort()
    out = out[:n]
    frontier_nu = math.pi * (k_max + 1) / (2 * spec.beta)
    frontier = radial_zeros(frontier_nu, 1, spec.bc)[0]
    last = out[-1][0]
    if last > frontier:
        raise KMaxTooSmall(f"k = {k_max + 1} has eigenvalue {frontier:.6g} below the requested range")
    if math.sqrt(last) > math.sqrt(frontier) - math.pi:
        warnings.warn("requested eigenvalues approach the k_max frontier", RuntimeWarning, stacklevel=2)
    return out


def sector_mode(spec: SectorSpec, branch: int = 1) -> RadialMode:
    nu = spec.nu.value
    lam = radial_zeros(nu, branch, spec.bc)[-1]
    return RadialMode(nu, lam, spec.bc, branch, 0.0, 0.0, spec.k)


# ---------------------------------------------------------------- annular sector


def cross_product(nu: float, lam: float, eps: float, bc: str) -> tuple[float, float]:
    """Scaled cross-product function and its lambda-derivative.

    Dirichlet: ``eps**nu [J_nu(s) J_-nu(eps s) - J_-nu(s) J_nu(eps s)]`` with
    ``s = sqrt(lam)``; Neumann uses derivatives and the factor ``eps**(nu+1)``.
    """
    s = math.sqrt(lam)
    t = eps * s
    jp, jm = bessel_j(nu, s), bessel_j(-nu, s)
    dp, dm = bessel_j_prime(nu, s), bessel_j_prime(-nu, s)
    ep, em = bessel_j(nu, t), bessel_j(-nu, t)
    fp, fm = bessel_j_prime(nu, t), bessel_j_prime(-nu, t)
    if _bc(bc) == DIRICHLET:
        w = eps**nu
        G = jp * em - jm * ep
        dG = dp * em - dm * ep + eps * (jp * fm - jm * fp)
    else:
        w = eps ** (nu + 1)
        spp = lambda d, j, x, n: -d / x - (1 - n * n / (x * x)) * j
        G = dp * fm - dm * fp
        dG = (spp(dp, jp, s, nu) * fm - spp(dm, jm, s, -nu) * fp
              + eps * (dp * spp(fm, em, t, -nu) - dm * spp(fp, ep, t, nu)))
    return w * G, w * dG / (2 * s)


def _cross_scale(nu: float, lam: float, eps: float, bc: str) -> float:
    s = math.sqrt(lam)
    t = eps * s
    env = math.sqrt(2 / (math.pi * s))
    if bc == DIRICHLET:
        return abs(eps**nu * bessel_j(-nu, t)) * env
    return abs(eps ** (nu + 1) * bessel_j_prime(-nu, t)) * env


def _newton(fun, x0: float, tol: float = 1e-14, max_iter: int = 60) -> float:
    x = x0
    for _ in range(max_iter):
        f, df = fun(x)
        if df == 0 or not math.isfinite(f):
            raise NoConvergence("Newton derivative vanished")
        dx = f / df
        x_new = x - dx
        if x_new <= 0:
            x_new = x / 2
        if abs(x_new - x) <= tol * max(1.0, abs(x)):
            return x_new
        x = x_new
    raise NoConvergence(f"Newton did not converge from {x0}")


def annular_mode(spec: SectorSpec, branch: int = 1, max_halvings: int = 40) -> RadialMode:
    """Eigenvalue branch of the annular sector, continued in eps from eps = 0."""
    nu = spec.nu
    if nu.is_integer:
        raise IntegerOrder(f"order {nu.value} is an integer; the cross-product needs non-integer order")
    if not 0 < spec.epsilon < 1:
        raise ValueError("annular_mode needs 0 < epsilon < 1")
    n = nu.value
    zs = radial_zeros(n, branch + 1, spec.bc)
    lam = zs[branch - 1]
    neighbours = [zs[branch]] + ([zs[branch - 2]] if branch > 1 else [0.0])
    gap = min(abs(lam - z) for z in neighbours)
    target = spec.epsilon
    e_prev, step, halvings = 0.0, target / 16, 0
    while e_prev < target:
        e_new = min(target, e_prev + step)
        try:
            lam_new = _newton(lambda x: cross_product(n, x, e_new, spec.bc), lam)
            jumped = abs(lam_new - lam) > gap / 4
        except NoConvergence:
            jumped = True
        if jumped:
            halvings += 1
            if halvings > max_halvings:
                raise BranchJump(f"continuation stalled at eps={e_prev:.3g}")
            step /= 2
            continue
        halvings = 0
        lam, e_prev = lam_new, e_new
    g, _ = cross_product(n, lam, target, spec.bc)
    res = abs(g) / _cross_scale(n, lam, target, spec.bc)
    return RadialMode(n, lam, spec.bc, branch, target, res, spec.k)


def _pair(nu: float, lam: float, bc: str) -> tuple[float, float, float, float]:
    """Numerator and denominator of ``f`` with their derivatives."""
    if bc == DIRICHLET:
        return bessel_h(nu, lam), bessel_h_prime(nu, lam), bessel_h(-nu, lam), bessel_h_prime(-nu, lam)
    return bessel_k(nu, lam), bessel_k_prime(nu, lam), bessel_k(-nu, lam), bessel_k_prime(-nu, lam)


def _ratio(nu: float, lam: float, bc: str) -> tuple[float, float]:
    """``f = H_nu/H_-nu`` (Dirichlet) or ``K_nu/K_-nu`` (Neumann) and its derivative."""
    a, da, b, db = _pair(nu, lam, bc)
    return a / b, (da * b - a * db) / (b * b)


def _check_denominator(nu: float, lam: float, bc: str) -> None:
    kind = "h" if bc == DIRICHLET else "k"
    if lam > 0 and check_denominator(-nu, lam, kind) < 1e-8:
        raise DenominatorVanishing(f"J_-nu factor nearly vanishes at lambda={lam}")


def solve_reduced(nu: float, lambda_star: float, eps: float, bc: str = DIRICHLET) -> float:
    """Root of ``f(lam) - eps**(2nu) f(eps**2 lam)`` continued by Newton from ``lambda_star`` at eps = 0."""
    bc = _bc(bc)
    nu = as_order(nu).value
    _check_denominator(nu, lambda_star, bc)
    if eps == 0:
        return lambda_star

    def fun_at(e):
        d, e2 = e ** (2 * nu), e * e

        # denominators cleared so the branch can pass points where both ratios have poles
        def fun(lam):
            a, da, b, db = _pair(nu, lam, bc)
            p, dp, q, dq = _pair(nu, e2 * lam, bc)
            val = a * q - d * b * p
            return val, da * q + e2 * a * dq - d * (db * p + e2 * b * dp)

        return fun

    # continuation in eps; a step is rejected on a jump larger than a tenth of lambda
    lam, e_prev, step = lambda_star, 0.0, eps
    for _ in range(200):
        e_new = min(eps, e_prev + step)
        try:
            lam_new = _newton(fun_at(e_new), lam, tol=1e-15)
            ok = abs(lam_new - lam) <= 0.1 * max(lam, 1.0)
        except NoConvergence:
            ok = False
        if not ok:
            step /= 2
            continue
        lam, e_prev = lam_new, e_new
        if e_prev >= eps:
            _check_denominator(nu, lam, bc)
            return lam
    raise NoConvergence(f"continuation to eps={eps} failed")


def asymptotic_prediction(nu: float, lambda_star: float, bc: str = DIRICHLET) -> AsymptoticPrediction:
    """First-order law ``lam(eps) ~ lambda_star + slope * eps**(2 nu)``."""
    bc = _bc(bc)
    nu = as_order(nu).value
    f0 = 2 ** (-2 * nu) * math.gamma(1 - nu) / math.gamma(1 + nu)
    if bc == NEUMANN:
        f0 = -f0
    _, df = _ratio(nu, lambda_star, bc)
    if not math.isfinite(df) or abs(df) < 1e-12 * abs(f0):
        raise ZeroDerivative(f"derivative vanishes at lambda_star={lambda_star}")
    return AsymptoticPrediction(lambda_star, f0 / df, 2 * nu, nu)


# ---------------------------------------------------------------- eigenfunctions


def _angular(spec: SectorSpec, nu: float, theta, deriv: int = 0):
    a = nu * (np.asarray(theta, dtype=float) + spec.beta)
    if spec.bc == DIRICHLET:
        return np.sin(a) if deriv == 0 else nu * np.cos(a)
    return np.cos(a) if deriv == 0 else -nu * np.sin(a)


def eigenfunction_value(spec: SectorSpec, mode: RadialMode, rho, theta):
    """``J_nu(rho sqrt(lam)) sin(nu(theta+beta))``, or the cosine form for Neumann."""
    s = np.asarray(rho, dtype=float) * math.sqrt(mode.lam)
    val = bessel_j(mode.nu, s) * _angular(spec, mode.nu, theta)
    return float(val) if np.ndim(val) == 0 else val


def eigenfunction_gradient(spec: SectorSpec, mode: RadialMode, rho, theta):
    """Cartesian gradient ``(d/dx1, d/dx2)`` of the eigenfunction."""
    rho = np.asarray(rho, dtype=float)
    theta = np.asarray(theta, dtype=float)
    k = math.sqrt(mode.lam)
    u_r = k * bessel_j_prime(mode.nu, rho * k) * _angular(spec, mode.nu, theta)
    with np.errstate(divide="ignore", invalid="ignore"):
        u_t_over_r = bessel_j(mode.nu, rho * k) / rho * _angular(spec, mode.nu, theta, 1)
    c, s = np.cos(theta), np.sin(theta)
    return c * u_r - s * u_t_over_r, s * u_r + c * u_t_over_r


def grad_integrability_threshold(nu: float) -> float:
    """Largest p with gradient in L^p is ``2/(1 - nu)`` (exclusive); infinite for nu >= 1."""
    nu = float(nu)
    if nu <= 0.5:
        raise ValueError("nu must exceed 1/2")
    return 2.0 / (1.0 - nu) if nu < 1 else math.inf


@dataclass(frozen=True)
class SobolevNorm:
    """``W^{1,p}`` norm split into ``||U||_p``, ``||d1 U||_p`` and ``||d2 U||_p``."""

    u: float
    d1: float
    d2: float

    @property
    def total(self) -> float:
        return self.u + self.d1 + self.d2

    @property
    def gradient(self) -> float:
        return self.d1 + self.d2


def eigenfunction_sobolev_norm(
    spec: SectorSpec, mode: RadialMode, p: float, region: str = "full", eps: float | None = None,
    tol: float = 1e-10, max_order: int = 1024,
) -> SobolevNorm:
    """``W^{1,p}`` norm of the sector eigenfunction over the sector or over ``{r < eps}``.

    Returns infinite parts when ``p`` is at or above the integrability threshold.
    """
    if mode.nu == 0:
        pmax = math.inf
    else:
        pmax = grad_integrability_threshold(mode.nu) if mode.nu > 0.5 else math.inf
    if p >= pmax:
        return SobolevNorm(math.inf, math.inf, math.inf)
    if region == "full":
        r_max = 1.0
    elif region == "annulus_gap":
        if eps is None or not 0 < eps < 1:
            raise ValueError("region 'annulus_gap' needs 0 < eps < 1")
        r_max = eps
    else:
        raise ValueError("region must be 'full' or 'annulus_gap'")
    # rho = t**q removes the algebraic singularity of |grad U|^p rho at the origin
    q = 1.0 / ((mode.nu - 1) * p + 2) if 0 < mode.nu < 1 else 1.0
    t_max = r_max ** (1 / q)

    def integrals(n):
        xt, wt = np.polynomial.legendre.leggauss(n)
        t = 0.5 * t_max * (xt + 1)
        wt = 0.5 * t_max * wt
        th = spec.beta * xt
        wth = spec.beta * wt / (0.5 * t_max)
        T, TH = np.meshgrid(t, th, indexing="ij")
        W = np.outer(wt, wth)
        rho = T**q
        jac = q * T ** (q - 1) * rho
        u = eigenfunction_value(spec, mode, rho, TH)
        g1, g2 = eigenfunction_gradient(spec, mode, rho, TH)
        return np.array([np.sum(W * jac * np.abs(f) ** p) for f in (u, g1, g2)])

    n = 16
    prev = integrals(n)
    while True:
        n *= 2
        cur = integrals(n)
        if np.all(np.abs(cur - prev) <= tol * np.maximum(1.0, np.abs(cur))):
            break
        if n >= max_order:
            warnings.warn("norm quadrature reached its order cap", RuntimeWarning, stacklevel=2)
            break
        prev = cur
    u, d1, d2 = cur ** (1 / p)
    return SobolevNorm(float(u), float(d1), float(d2))


def constant_mode(spec: SectorSpec) -> RadialMode:
    """Neumann constant eigenfunction, labelled k = 0."""
    return RadialMode(0.0, 0.0, NEUMANN, 0, 0.0, 0.0, 0)


# ---------------------------------------------------------------- tilde domain


def tilde_domain(beta: float, eps: float, eps_max: float | None = None) -> SubgraphDomain:
    """Sector with the vertex cut off by the chord at distance ``eps cos(beta/2)``.

    Built on the same atlas as ``sector_domain(beta, eps_max)``.
    """
    if not math.pi / 2 < beta < math.pi:
        raise InvalidDomain("beta must lie in (pi/2, pi)")
    if not 0 < eps < 0.5:
        raise InvalidDomain("eps must lie in (0, 1/2)")
    if eps_max is None:
        eps_max = 0.3 if eps <= 0.3 else min(0.49, eps + 0.01)
    if eps > eps_max:
        raise InvalidDomain("eps exceeds the atlas radius eps_max")
    return sector_domain(beta, eps_max).with_profile(0, tilde_profile(beta, eps))


@dataclass(frozen=True)
class InclusionReport:
    A: float
    samples: int
    verified: bool


def inclusion_check(beta: float, eps: float, n: int = 10**4, seed: int = 0xB1F2,
                    domain: SubgraphDomain | None = None) -> InclusionReport:
    """Check Omega(eps) in tilde(eps) in Omega(A eps) in Omega at random points."""
    A = math.cos(beta / 2)
    tilde = domain if domain is not None else tilde_domain(beta, eps)
    rng = np.random.default_rng(seed)
    r = np.concatenate([np.sqrt(rng.uniform(0, 1, n // 2)), 2 * eps * np.sqrt(rng.uniform(0, 1, n - n // 2))])
    th = rng.uniform(-math.pi, math.pi, n)
    pts = np.column_stack([r * np.cos(th), r * np.sin(th)])
    chain = [PolarSector(beta, eps).contains(pts), tilde.contains(pts),
             PolarSector(beta, A * eps).contains(pts), PolarSector(beta).contains(pts)]
    for inner, outer in zip(chain, chain[1:]):
        bad = inner & ~outer
        if bad.any():
            raise InclusionViolated(f"{int(bad.sum())} sample points break the inclusion chain")
    return InclusionReport(A, n, True)
