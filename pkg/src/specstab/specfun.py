"""Real-order Bessel functions through their entire analytic factors.

For an order ``mu`` that is not a negative integer,

    J_mu(s)  = s**mu     * H_mu(s**2)
    J'_mu(s) = s**(mu-1) * K_mu(s**2)

with ``H_mu(lam) = 2**-mu * sum_j (-lam/4)**j / (j! Gamma(mu+j+1))`` and
``K_mu = mu*H_mu + 2*lam*H_mu'``.  Both factors are evaluated from their power
series; arguments past the double-precision window switch to mpmath so the
alternating series does not cancel away all significant digits.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import mpmath
import numpy as np
from scipy.optimize import brentq

from .errors import BracketExhausted, InvalidOrder, NonconvergentSeries

ORDER_CAP = 50.0
INTEGER_TOL = 1e-9


@dataclass(frozen=True)
class Order:
    """A real Bessel (or angular) order."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not math.isfinite(v) or abs(v) > ORDER_CAP:
            raise InvalidOrder(f"order {self.value!r} outside |mu| <= {ORDER_CAP}")
        object.__setattr__(self, "value", v)

    @property
    def is_integer(self) -> bool:
        return abs(self.value - round(self.value)) < INTEGER_TOL

    @property
    def is_negative_integer(self) -> bool:
        return self.is_integer and round(self.value) < 0

    def __float__(self) -> float:
        return self.value

    def __neg__(self) -> "Order":
        return Order(-self.value)


@dataclass(frozen=True)
class SeriesAccuracy:
    tol: float = 1e-16
    max_terms: int = 600

    def __post_init__(self):
        if not (0.0 < self.tol <= 1e-6):
            raise ValueError("tol must lie in (0, 1e-6]")
        if self.max_terms < 30:
            raise ValueError("max_terms must be >= 30")


DEFAULT_ACCURACY = SeriesAccuracy()


def as_order(mu) -> Order:
    return mu if isinstance(mu, Order) else Order(mu)


def _check_order(mu: Order) -> None:
    if mu.is_negative_integer:
        raise InvalidOrder(f"H_mu undefined for negative integer order {mu.value}")


def _direct_window(mu: float) -> float:
    # cancellation in the alternating series costs ~exp(s) ulps; beyond this
    # window the mpmath path is used
    return min(12.0 + 2.0 * abs(mu), 6.0 + 0.5 * abs(mu))


def _falling(j: int, d: int) -> int:
    out = 1
    for i in range(d):
        out *= j - i
    return out


def _series_float(mu, lam, weight, deriv, acc):
    # a_j = (-1/4)^j / (j! Gamma(mu+j+1)); term_j = a_j * lam^j
    a = 1.0 / math.gamma(mu + 1.0)
    if lam == 0.0:
        for j in range(deriv):
            a *= -0.25 / ((j + 1) * (mu + j + 1))
        return 2.0 ** (-mu) * weight(deriv, mu) * math.factorial(deriv) * a
    term = a
    total = 0.0
    comp = 0.0
    biggest = 0.0
    for j in range(acc.max_terms):
        if j >= deriv:
            contrib = weight(j, mu) * _falling(j, deriv) * term / lam**deriv
            # Kahan summation
            y = contrib - comp
            t = total + y
            comp = (t - total) - y
            total = t
            biggest = max(biggest, abs(contrib))
            decreasing = abs(lam) / 4.0 < (j + 1) * abs(mu + j + 1)
            if decreasing and j > deriv + 2:
                if abs(contrib) <= acc.tol * abs(total) or abs(contrib) <= 1e-19 * biggest:
                    return 2.0 ** (-mu) * total
        term *= -0.25 * lam / ((j + 1) * (mu + j + 1))
    raise NonconvergentSeries(f"series for order {mu} at {lam} exceeded {acc.max_terms} terms")


def _series_mp(mu, lam, weight, deriv, acc):
    s = math.sqrt(abs(lam))
    dps = 25 + int(s / 2.0)
    with mpmath.workdps(dps):
        m = mpmath.mpf(mu)
        L = mpmath.mpf(lam)
        term = 1 / mpmath.gamma(m + 1)
        total = mpmath.mpf(0)
        biggest = mpmath.mpf(0)
        tol = mpmath.mpf(acc.tol) * mpmath.mpf(10) ** -4
        for j in range(acc.max_terms):
            if j >= deriv:
                contrib = weight(j, m) * _falling(j, deriv) * term / L**deriv
                total += contrib
                biggest = max(biggest, abs(contrib))
                decreasing = abs(L) / 4 < (j + 1) * abs(m + j + 1)
                if decreasing and j > deriv + 2 and abs(contrib) <= tol * max(abs(total), biggest * mpmath.mpf(10) ** -(dps - 20)):
                    return float(mpmath.mpf(2) ** (-m) * total)
            term *= -L / (4 * (j + 1) * (m + j + 1))
    raise NonconvergentSeries(f"series for order {mu} at {lam} exceeded {acc.max_terms} terms")


def _series(mu, lam, weight, deriv, acc):
    mu = as_order(mu)
    _check_order(mu)
    m = mu.value
    lam_arr = np.asarray(lam, dtype=float)
    if lam_arr.ndim == 0:
        return _series_scalar(m, float(lam_arr), weight, deriv, acc)
    if not np.all(np.isfinite(lam_arr)):
        raise ValueError("argument must be finite")
    out = np.empty(lam_arr.shape)
    direct = np.sqrt(np.abs(lam_arr)) <= _direct_window(m)
    if np.any(direct):
        out[direct] = _series_vec(m, lam_arr[direct], weight, deriv, acc)
    for idx in zip(*np.nonzero(~direct)):
        out[idx] = _series_mp(m, float(lam_arr[idx]), weight, deriv, acc)
    return out


def _series_vec(mu, lam, weight, deriv, acc):
    a = 1.0 / math.gamma(mu + 1.0)
    for j in range(deriv):
        a *= -0.25 / ((j + 1) * (mu + j + 1))
    # start the recursion at j = deriv: term = a_deriv * lam^0 in the derivative sum
    term = np.full(lam.shape, a)
    total = np.zeros(lam.shape)
    comp = np.zeros(lam.shape)
    biggest = np.zeros(lam.shape)
    lam_max = float(np.max(np.abs(lam))) if lam.size else 0.0
    for j in range(deriv, acc.max_terms):
        contrib = weight(j, mu) * _falling(j, deriv) * term
        y = contrib - comp
        t = total + y
        comp = (t - total) - y
        total = t
        biggest = np.maximum(biggest, np.abs(contrib))
        if lam_max / 4.0 < (j + 1) * abs(mu + j + 1) and j > deriv + 2:
            small = np.abs(contrib) <= np.maximum(acc.tol * np.abs(total), 1e-19 * biggest)
            if np.all(small):
                return 2.0 ** (-mu) * total
        # a_{j+1} lam^{j+1-deriv} = a_j lam^{j-deriv} * (-lam/4) / ((j+1)(mu+j+1))
        term = term * (-0.25 * lam / ((j + 1) * (mu + j + 1)))
    raise NonconvergentSeries(f"series for order {mu} exceeded {acc.max_terms} terms")


def _series_scalar(m, lam, weight, deriv, acc):
    if not math.isfinite(lam):
        raise ValueError("argument must be finite")
    if math.sqrt(abs(lam)) <= _direct_window(m):
        return _series_float(m, lam, weight, deriv, acc)
    return _series_mp(m, lam, weight, deriv, acc)


def _unit(j, m):
    return 1


def _k_weight(j, m):
    return m + 2 * j


def bessel_h(mu, lam, acc: SeriesAccuracy = DEFAULT_ACCURACY):
    """``H_mu(lam)`` so that ``J_mu(s) = s**mu H_mu(s**2)``."""
    return _series(mu, lam, _unit, 0, acc)


def bessel_h_prime(mu, lam, acc: SeriesAccuracy = DEFAULT_ACCURACY):
    """Term-wise derivative ``H_mu'(lam)``."""
    return _series(mu, lam, _unit, 1, acc)


def bessel_k(mu, lam, acc: SeriesAccuracy = DEFAULT_ACCURACY):
    """``K_mu(lam) = mu H_mu(lam) + 2 lam H_mu'(lam)``, so ``J'_mu(s) = s**(mu-1) K_mu(s**2)``."""
    return _series(mu, lam, _k_weight, 0, acc)


def bessel_k_prime(mu, lam, acc: SeriesAccuracy = DEFAULT_ACCURACY):
    return _series(mu, lam, _k_weight, 1, acc)


def _power(s, p):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("argument s must be >= 0")
    with np.errstate(divide="ignore"):
        out = np.where(s == 0.0, 0.0 if p > 0 else (1.0 if p == 0 else np.inf), s ** p)
    return out


def bessel_j(nu, s, acc: SeriesAccuracy = DEFAULT_ACCURACY):
    """``J_nu(s)`` for ``s >= 0``; ``s = 0`` returns the limit (``inf`` if it diverges)."""
    n = as_order(nu).value
    val = _power(s, n) * bessel_h(nu, np.square(np.asarray(s, dtype=float)), acc)
    return float(val) if np.ndim(val) == 0 else val


def bessel_j_prime(nu, s, acc: SeriesAccuracy = DEFAULT_ACCURACY):
    """``J'_nu(s)`` for ``s >= 0``."""
    n = as_order(nu).value
    sa = np.asarray(s, dtype=float)
    k = bessel_k(nu, np.square(sa), acc)
    if sa.ndim == 0 and sa == 0.0 and n == 0.0:
        return 0.0
    with np.errstate(invalid="ignore"):
        val = _power(sa, n - 1.0) * k
    if sa.ndim == 0:
        return float(val)
    if n == 0.0:
        val = np.where(sa == 0.0, 0.0, val)
    return val


# ---------------------------------------------------------------- zeros


@dataclass(frozen=True)
class CertifiedRoot:
    value: float
    residual: float
    bracket: tuple[float, float]


def find_zeros(
    f: Callable[[float], float],
    count: int,
    *,
    s_min: float = 1e-6,
    s_max: float | None = None,
    step: float = math.pi / 16,
    residual_tol: float = 1e-11,
    certify_width: float = 8e-10,
    max_extensions: int = 6,
    certified: bool = False,
) -> list[float] | list[CertifiedRoot]:
    """Ascending list of the first ``count`` positive roots of ``f``.

    Roots are located by a sign-change scan with ``step`` (a fraction of the
    asymptotic zero spacing ~pi), refined by Brent's method, and each one is
    certified by a sign change across a bracket narrower than 1e-9.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if s_max is None:
        s_max = (count + 2) * math.pi
    roots: list[CertifiedRoot] = []
    lo = s_min
    f_lo = f(lo)
    scale = abs(f_lo) if math.isfinite(f_lo) else 0.0
    hi_limit = s_max
    for _ in range(max_extensions + 1):
        grid = np.arange(lo, hi_limit + step, step)
        grid = grid[grid > lo]
        for s in grid:
            f_s = f(float(s))
            scale = max(scale, abs(f_s))
            if f_s == 0.0:
                roots.append(CertifiedRoot(float(s), 0.0, (float(s), float(s))))
            elif math.isfinite(f_lo) and f_lo != 0.0 and (f_lo < 0) != (f_s < 0):
                roots.append(_refine(f, lo, float(s), f_lo, f_s, certify_width))
            lo, f_lo = float(s), f_s
            if len(roots) >= count:
                break
        if len(roots) >= count:
            break
        hi_limit *= 1.5
    if len(roots) < count:
        raise BracketExhausted(f"found {len(roots)} of {count} sign changes up to s={lo:.3f}")
    roots = roots[:count]
    for r in roots:
        if r.residual > residual_tol * max(scale, 1e-300):
            raise BracketExhausted(f"root {r.value} residual {r.residual:.3e} exceeds tolerance")
    vals = [r.value for r in roots]
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise BracketExhausted("roots not strictly increasing")
    return roots if certified else vals


def _refine(f, a, b, fa, fb, width):
    r = brentq(f, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=200)
    half = width / 2.0
    lo, hi = max(a, r - half), min(b, r + half)
    f_lo, f_hi, f_r = f(lo), f(hi), f(r)
    if f_r != 0.0 and (f_lo < 0) == (f_hi < 0):
        # the Brent iterate sits on the far side of the float root; widen once
        lo, hi = max(a, r - width * 0.9), min(b, r + width * 0.9)
        f_lo, f_hi = f(lo), f(hi)
        if (f_lo < 0) == (f_hi < 0):
            raise BracketExhausted(f"sign change not certified near {r}")
    return CertifiedRoot(float(r), abs(f_r), (lo, hi))


def _zero_window(nu: float, count: int) -> float:
    # McMahon: j_{nu,n} ~ (n + nu/2 - 1/4) pi
    return (count + abs(nu) / 2.0 + 1.0) * math.pi


def bessel_j_zeros(nu, count: int, acc: SeriesAccuracy = DEFAULT_ACCURACY) -> list[float]:
    """First ``count`` positive zeros of ``J_nu`` (found on ``H_nu(s**2)``)."""
    n = as_order(nu).value
    return find_zeros(lambda s: bessel_h(n, s * s, acc), count, s_max=_zero_window(n, count))


def bessel_jp_zeros(nu, count: int, acc: SeriesAccuracy = DEFAULT_ACCURACY) -> list[float]:
    """First ``count`` positive zeros of ``J'_nu`` (found on ``K_nu(s**2)``)."""
    n = as_order(nu).value
    return find_zeros(lambda s: bessel_k(n, s * s, acc), count, s_min=1e-3, s_max=_zero_window(n, count))


def check_denominator(mu, lam, kind: str = "h", threshold: float = 1e-8) -> float:
    """Size of ``J_mu`` (or ``J'_mu``) at ``sqrt(lam)`` relative to the Bessel envelope.

    Returns the normalized magnitude; callers compare it with ``threshold``.
    """
    s = math.sqrt(lam)
    envelope = math.sqrt(2.0 / (math.pi * max(s, 1e-300)))
    if kind == "h":
        val = bessel_j(mu, s)
    else:
        val = bessel_j_prime(mu, s)
    return abs(val) / envelope


__all__: Sequence[str] = [
    "Order",
    "SeriesAccuracy",
    "CertifiedRoot",
    "as_order",
    "bessel_h",
    "bessel_h_prime",
    "bessel_k",
    "bessel_k_prime",
    "bessel_j",
    "bessel_j_prime",
    "find_zeros",
    "bessel_j_zeros",
    "bessel_jp_zeros",
    "check_denominator",
]
