"""Planar subgraph domains described by an atlas of rotated boxes.

A domain is given by a finite list of charts.  Each chart is an open box in a
frame obtained by rotating the plane about the origin; inside a boundary chart
the domain is the region below the graph of a profile ``y_N < g(y_1)``, and an
interior chart lies entirely inside the domain.  The module also provides plain
regions (polar sectors), the strip sets used by the transition construction, and
measure computations for symmetric differences.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Protocol, Sequence

import numpy as np
from scipy import integrate, optimize

from .errors import (
    AtlasMismatch,
    InconsistentCharts,
    InvalidC,
    InvalidDomain,
)

BOUNDARY_TOL = 1e-12
QUAD_ABS_TOL = 1e-10

# ---------------------------------------------------------------------------
# profiles


def _crossings(f: Callable, lo: float, hi: float, n: int = 2001) -> list[float]:
    """Sign changes of ``f`` on (lo, hi), and the ends of intervals where it vanishes."""
    x = np.linspace(lo, hi, n)
    sg = np.sign(f(x))
    roots = []
    for i in range(n - 1):
        if sg[i] * sg[i + 1] < 0:
            roots.append(optimize.brentq(lambda t: float(f(np.array([t]))[0]), x[i], x[i + 1], xtol=1e-15))
        elif sg[i] != 0 and sg[i + 1] == 0:
            roots.append(float(x[i + 1]))
        elif sg[i] == 0 and sg[i + 1] != 0:
            roots.append(float(x[i]))
    return roots


_KINDS = {
    "constant": ("value",),
    "affine": ("slope", "intercept"),
    "abs_affine": ("slope", "intercept"),
    "sinusoid": ("offset", "amplitude", "wavenumber", "phase"),
    "bump": ("offset", "amplitude", "center", "width"),
    "circle": ("radius", "center"),
    "tilde": ("eps", "beta"),
    "min": ("parts",),
    "max": ("parts",),
    "sampled": ("x", "y"),
    "full": (),
}


@dataclass(frozen=True)
class Profile:
    """Closed-form or sampled boundary function of one variable.

    ``kind`` selects the formula and ``params`` holds its named parameters:

    ============  ====================================================
    constant      value
    affine        intercept + slope*y
    abs_affine    intercept + slope*|y|
    sinusoid      offset + amplitude*sin(wavenumber*y + phase)
    bump          offset + amplitude*(1 - ((y-center)/width)^2)^3 inside, offset outside
    circle        center + sqrt(radius^2 - y^2)
    tilde         min(-eps + |y| tan(beta/2), -|y| cot(beta))
    min, max      pointwise min / max over ``parts``
    sampled       piecewise-linear interpolation through (x, y)
    full          no boundary in the chart (interior chart)
    ============  ====================================================
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InvalidDomain(f"unknown profile kind {self.kind!r}")
        missing = [k for k in _KINDS[self.kind] if k not in self.params]
        if missing:
            raise InvalidDomain(f"profile {self.kind!r} lacks parameters {missing}")
        if self.kind in ("min", "max"):
            parts = tuple(p if isinstance(p, Profile) else Profile.from_descriptor(p) for p in self.params["parts"])
            if not parts:
                raise InvalidDomain("min/max profile needs parts")
            object.__setattr__(self, "params", {"parts": parts})
        if self.kind == "sampled":
            x = np.asarray(self.params["x"], dtype=float)
            y = np.asarray(self.params["y"], dtype=float)
            if x.ndim != 1 or x.shape != y.shape or x.size < 2 or np.any(np.diff(x) <= 0):
                raise InvalidDomain("sampled profile needs increasing x and matching y")
            object.__setattr__(self, "params", {"x": x, "y": y})

    def __eq__(self, other):
        if not isinstance(other, Profile):
            return NotImplemented
        return self.to_descriptor() == other.to_descriptor()

    def __hash__(self):
        return hash(json.dumps(self.to_descriptor(), sort_keys=True))

    @property
    def is_full(self) -> bool:
        return self.kind == "full"

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        p = self.params
        k = self.kind
        if k == "constant":
            return np.full_like(y, p["value"])
        if k == "affine":
            return p["intercept"] + p["slope"] * y
        if k == "abs_affine":
            return p["intercept"] + p["slope"] * np.abs(y)
        if k == "sinusoid":
            return p["offset"] + p["amplitude"] * np.sin(p["wavenumber"] * y + p["phase"])
        if k == "bump":
            t = (y - p["center"]) / p["width"]
            return p["offset"] + p["amplitude"] * np.where(np.abs(t) < 1, (1 - t * t) ** 3, 0.0)
        if k == "circle":
            r = p["radius"]
            with np.errstate(invalid="ignore"):
                return p["center"] + np.sqrt(r * r - y * y)
        if k == "tilde":
            b = p["beta"]
            return np.minimum(-p["eps"] + np.abs(y) * math.tan(b / 2), -np.abs(y) / math.tan(b))
        if k == "min":
            return np.min([q(y) for q in p["parts"]], axis=0)
        if k == "max":
            return np.max([q(y) for q in p["parts"]], axis=0)
        if k == "sampled":
            return np.interp(y, p["x"], p["y"])
        return np.full_like(y, np.inf)

    def kinks(self, lo: float, hi: float) -> list[float]:
        """Points in (lo, hi) where the profile may fail to be smooth."""
        p = self.params
        k = self.kind
        pts: list[float] = []
        if k in ("abs_affine",):
            pts = [0.0]
        elif k == "tilde":
            s = p["eps"] * math.sin(p["beta"])
            pts = [-s, 0.0, s]
        elif k == "bump":
            pts = [p["center"] - p["width"], p["center"] + p["width"]]
        elif k == "sampled":
            pts = list(map(float, p["x"]))
        elif k in ("min", "max"):
            parts = p["parts"]
            for q in parts:
                pts.extend(q.kinks(lo, hi))
            for i in range(len(parts)):
                for j in range(i + 1, len(parts)):
                    a, b = parts[i], parts[j]
                    pts.extend(_crossings(lambda t, a=a, b=b: a(t) - b(t), lo, hi))
        return sorted({x for x in pts if lo < x < hi})

    def to_descriptor(self) -> dict:
        if self.kind in ("min", "max"):
            return {"kind": self.kind, "params": {"parts": [q.to_descriptor() for q in self.params["parts"]]}}
        if self.kind == "sampled":
            return {"kind": "sampled", "params": {"x": self.params["x"].tolist(), "y": self.params["y"].tolist()}}
        return {"kind": self.kind, "params": {k: float(v) for k, v in self.params.items()}}

    @classmethod
    def from_descriptor(cls, d: dict) -> "Profile":
        if not isinstance(d, dict) or "kind" not in d:
            raise InvalidDomain("profile descriptor must be an object with a 'kind'")
        return cls(d["kind"], dict(d.get("params", {})))


def constant(value: float) -> Profile:
    return Profile("constant", {"value": value})


# ---------------------------------------------------------------------------
# atlas


def _rotation(theta_deg: float) -> np.ndarray:
    """Rotation matrix, exact for multiples of 90 degrees."""
    q, r = divmod(theta_deg, 90.0)
    if r == 0.0:
        c, s = [(1, 0), (0, 1), (-1, 0), (0, -1)][int(q) % 4]
    else:
        t = math.radians(theta_deg)
        c, s = math.cos(t), math.sin(t)
    return np.array([[c, -s], [s, c]], dtype=float)


@dataclass(frozen=True)
class Chart:
    """Open box ``(a1, b1) x (aN, bN)`` in a frame rotated by ``rotation_deg``."""

    box: tuple[float, float, float, float]
    rotation_deg: float = 0.0

    def __post_init__(self):
        a1, b1, aN, bN = map(float, self.box)
        if not (a1 < b1 and aN < bN):
            raise InvalidDomain(f"degenerate chart box {self.box}")
        object.__setattr__(self, "box", (a1, b1, aN, bN))
        object.__setattr__(self, "rotation_deg", float(self.rotation_deg))

    @property
    def matrix(self) -> np.ndarray:
        return _rotation(self.rotation_deg)

    def to_local(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        return pts @ self.matrix

    def to_world(self, local) -> np.ndarray:
        loc = np.asarray(local, dtype=float).reshape(-1, 2)
        return loc @ self.matrix.T

    def in_box(self, local, inset: float = 0.0) -> np.ndarray:
        a1, b1, aN, bN = self.box
        y1, yN = local[:, 0], local[:, 1]
        return (y1 > a1 + inset) & (y1 < b1 - inset) & (yN > aN + inset) & (yN < bN - inset)

    def corners(self) -> np.ndarray:
        a1, b1, aN, bN = self.box
        return self.to_world([[a1, aN], [b1, aN], [b1, bN], [a1, bN]])


@dataclass(frozen=True)
class Atlas:
    """Chart system shared by a family of domains.

    The first ``s_prime`` charts are boundary charts, the rest interior charts.
    """

    rho: float
    charts: tuple[Chart, ...]
    s_prime: int

    def __post_init__(self):
        if not self.rho > 0:
            raise InvalidDomain("rho must be positive")
        object.__setattr__(self, "charts", tuple(self.charts))
        if not 0 <= self.s_prime <= len(self.charts):
            raise InvalidDomain("s_prime must not exceed the chart count")

    @property
    def s(self) -> int:
        return len(self.charts)

    def bbox(self) -> tuple[float, float, float, float]:
        c = np.vstack([ch.corners() for ch in self.charts])
        return float(c[:, 0].min()), float(c[:, 0].max()), float(c[:, 1].min()), float(c[:, 1].max())

    def covered(self, points, inset: float | None = None) -> np.ndarray:
        """Whether each point lies in some inner parallel box ``(V_j)_rho``."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        inset = self.rho if inset is None else inset
        out = np.zeros(len(pts), dtype=bool)
        for ch in self.charts:
            out |= ch.in_box(ch.to_local(pts), inset)
        return out


class Region(Protocol):
    """Anything with a vectorized membership test and a bounding box."""

    def contains(self, points) -> np.ndarray: ...

    def bbox(self) -> tuple[float, float, float, float]: ...


@dataclass(frozen=True, eq=False)
class SubgraphDomain:
    """Open set given chartwise as the subgraph of profiles on an atlas."""

    atlas: Atlas
    profiles: tuple[Profile, ...]
    smoothness: tuple[int, float] = (1, 10.0)
    validate: bool = True

    def __post_init__(self):
        object.__setattr__(self, "profiles", tuple(self.profiles))
        if len(self.profiles) != self.atlas.s:
            raise InvalidDomain("one profile per chart is required")
        for j, g in enumerate(self.profiles):
            if g.is_full != (j >= self.atlas.s_prime):
                raise InvalidDomain("boundary charts must precede interior charts")
        m, M = self.smoothness
        if int(m) < 1 or not M > 0:
            raise InvalidDomain("smoothness needs m >= 1 and M > 0")
        object.__setattr__(self, "smoothness", (int(m), float(M)))
        if self.validate:
            self._check_ranges()
            self._check_consistency()
            self._check_class()

    @property
    def boundary_charts(self) -> range:
        return range(self.atlas.s_prime)

    def chart_profile(self, j: int) -> Profile:
        return self.profiles[j]

    def bbox(self) -> tuple[float, float, float, float]:
        return self.atlas.bbox()

    def _check_ranges(self):
        rho = self.atlas.rho
        for j in self.boundary_charts:
            a1, b1, aN, bN = self.atlas.charts[j].box
            y = np.linspace(a1, b1, 513)
            g = self.profiles[j](y)
            if not np.all(np.isfinite(g)) or np.any(g < aN + rho - 1e-12) or np.any(g > bN - rho + 1e-12):
                raise InvalidDomain(f"profile of chart {j} leaves the band [aN+rho, bN-rho]")

    def _check_consistency(self, n: int = 41):
        for j, ch in enumerate(self.atlas.charts):
            a1, b1, aN, bN = ch.box
            u, v = np.meshgrid(np.linspace(a1, b1, n + 2)[1:-1], np.linspace(aN, bN, n + 2)[1:-1])
            pts = ch.to_world(np.column_stack([u.ravel(), v.ravel()]))
            self.contains(pts)

    def _check_class(self, n: int = 512):
        m, M = self.smoothness
        for j in self.boundary_charts:
            a1, b1, _, _ = self.atlas.charts[j].box
            y = np.linspace(a1, b1, n)
            h = y[1] - y[0]
            d = self.profiles[j](y)
            for _ in range(m - 1):
                d = np.diff(d) / h
            lip = np.max(np.abs(np.diff(d))) / h
            if lip > M * 1.05:
                warnings.warn(
                    f"chart {j}: sampled seminorm {lip:.3g} exceeds M={M:g}", RuntimeWarning, stacklevel=3
                )

    def contains(self, points) -> np.ndarray:
        """Membership test; raises InconsistentCharts when charts disagree."""
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        vote_in = np.zeros(len(pts), dtype=bool)
        vote_out = np.zeros(len(pts), dtype=bool)
        near = np.zeros(len(pts), dtype=bool)
        for ch, g in zip(self.atlas.charts, self.profiles):
            loc = ch.to_local(pts)
            box = ch.in_box(loc)
            if not box.any():
                continue
            if g.is_full:
                vote_in |= box
                continue
            gap = np.full(len(pts), np.inf)
            gap[box] = g(loc[box, 0]) - loc[box, 1]
            vote_in |= box & (gap > 0)
            vote_out |= box & (gap <= 0)
            near |= box & (np.abs(gap) <= BOUNDARY_TOL)
        bad = vote_in & vote_out & ~near
        if bad.any():
            raise InconsistentCharts(f"{int(bad.sum())} points classified differently by overlapping charts")
        return vote_in & ~vote_out

    def with_profile(self, j: int, profile: Profile, validate: bool = True) -> "SubgraphDomain":
        prof = list(self.profiles)
        prof[j] = profile
        return SubgraphDomain(self.atlas, tuple(prof), self.smoothness, validate)

    def to_descriptor(self) -> dict:
        return {
            "atlas": {
                "rho": self.atlas.rho,
                "charts": [{"box": list(c.box), "rotation_deg": c.rotation_deg} for c in self.atlas.charts],
            },
            "charts": [{"g": g.to_descriptor()} for g in self.profiles],
            "smoothness": {"m": self.smoothness[0], "M": self.smoothness[1]},
        }


def load_domain(source) -> SubgraphDomain:
    """Build a domain from a JSON descriptor given as a dict, a path, or a JSON string."""
    if isinstance(source, (str, Path)):
        text = str(source)
        d = json.loads(text) if text.lstrip().startswith("{") else json.loads(Path(source).read_text())
    else:
        d = source
    try:
        at = d["atlas"]
        charts = tuple(Chart(tuple(c["box"]), c.get("rotation_deg", 0.0)) for c in at["charts"])
        profiles = tuple(Profile.from_descriptor(c["g"]) for c in d["charts"])
        sm = d.get("smoothness", {"m": 1, "M": 10.0})
    except (KeyError, TypeError) as exc:
        raise InvalidDomain(f"malformed domain descriptor: {exc}") from exc
    s_prime = sum(not g.is_full for g in profiles)
    return SubgraphDomain(Atlas(float(at["rho"]), charts, s_prime), profiles, (sm["m"], sm["M"]))


def single_chart_domain(
    profile: Profile, w: tuple[float, float] = (0.0, 1.0), band: tuple[float, float] = (0.0, 1.5), rho: float = 0.1,
    smoothness: tuple[int, float] = (1, 10.0),
) -> SubgraphDomain:
    """Region ``{w0 < x < w1, band0 < y < g(x)}`` described by one chart."""
    atlas = Atlas(rho, (Chart((w[0], w[1], band[0], band[1])),), 1)
    return SubgraphDomain(atlas, (profile,), smoothness)


def rectangle_domain(width: float, height: float, rho: float = 0.1) -> SubgraphDomain:
    """Rectangle ``(0, width) x (0, height)`` with a flat top profile."""
    return single_chart_domain(constant(height), (0.0, width), (0.0, height + 2 * rho), rho)


# ---------------------------------------------------------------------------
# polar regions


@dataclass(frozen=True)
class PolarSector:
    """Sector ``{eps < r < radius, |theta| < beta}`` rotated by ``rotation`` radians."""

    beta: float
    eps: float = 0.0
    radius: float = 1.0
    rotation: float = 0.0

    def __post_init__(self):
        if not 0 < self.beta < math.pi:
            raise InvalidDomain("beta must lie in (0, pi)")
        if not 0 <= self.eps < self.radius:
            raise InvalidDomain("need 0 <= eps < radius")

    def contains(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        r = np.hypot(pts[:, 0], pts[:, 1])
        th = np.angle((pts[:, 0] + 1j * pts[:, 1]) * np.exp(-1j * self.rotation))
        return (r < self.radius) & (r > self.eps) & (np.abs(th) < self.beta)

    def bbox(self) -> tuple[float, float, float, float]:
        r = self.radius
        return (-r, r, -r, r)

    @property
    def area(self) -> float:
        return self.beta * (self.radius**2 - self.eps**2)


# ---------------------------------------------------------------------------
# sector atlas


def _ray_hits_box(direction: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> bool:
    """Whether the ray ``t*direction, t >= 0`` meets the closed box [lo, hi]."""
    t0, t1 = 0.0, np.inf
    for d, a, b in zip(direction, lo, hi):
        if abs(d) < 1e-300:
            if not a <= 0.0 <= b:
                return False
            continue
        ta, tb = sorted((a / d, b / d))
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def _box_inside_sector(lo, hi, beta: float) -> bool:
    """Axis box strictly inside the unit sector of half-angle beta > pi/2."""
    corners = np.array([[lo[0], lo[1]], [hi[0], lo[1]], [hi[0], hi[1]], [lo[0], hi[1]]])
    if np.any(np.hypot(corners[:, 0], corners[:, 1]) >= 1.0):
        return False
    if lo[0] <= 0 <= hi[0] and lo[1] <= 0 <= hi[1]:
        return False
    th = np.abs(np.arctan2(corners[:, 1], corners[:, 0]))
    if np.any(th >= beta):
        return False
    for sgn in (1.0, -1.0):
        if _ray_hits_box(np.array([math.cos(beta), sgn * math.sin(beta)]), np.asarray(lo), np.asarray(hi)):
            return False
    return True


def _box_meets_disc(lo, hi, r: float) -> bool:
    px = min(max(0.0, lo[0]), hi[0])
    py = min(max(0.0, lo[1]), hi[1])
    return math.hypot(px, py) <= r


def sector_atlas(beta: float, eps_max: float = 0.3, rho: float = 0.05, cell: float = 0.05) -> tuple[Atlas, list[Profile]]:
    """Atlas and profiles of the unit sector ``{x1 > |x2| cot beta, |x| < 1}``.

    The corner chart at the origin contains the closed disc of radius ``eps_max``
    and no other chart meets it, so every set that differs from the sector only
    inside that disc and is a subgraph in the corner frame belongs to the
    same atlas.
    """
    if not math.pi / 2 < beta < math.pi:
        raise InvalidDomain("sector atlas needs beta in (pi/2, pi)")
    if not 0 < eps_max < 0.5:
        raise InvalidDomain("eps_max must lie in (0, 1/2)")
    cb = abs(1.0 / math.tan(beta))
    charts: list[Chart] = []
    profiles: list[Profile] = []

    # corner at the origin: y1 = x2, yN = -x1
    w = eps_max + 0.2
    top = max(w, w * cb + rho)
    bottom = min(-w, -eps_max - 2 * rho)
    if math.hypot(w, max(top, -bottom)) >= 1.0:
        raise InvalidDomain("eps_max too large for a corner chart inside the unit disc")
    charts.append(Chart((-w, w, bottom, top), 90.0))
    profiles.append(Profile("abs_affine", {"slope": cb, "intercept": 0.0}))

    # straight edges: yN along the outward normal, y1 along the edge
    r_a, r_b, h = eps_max + 0.02, 0.85, 0.25
    c = 0.2
    circ = Profile("circle", {"radius": 1.0, "center": 0.0})
    for sgn in (1.0, -1.0):
        n_edge = np.array([-math.sin(beta), sgn * math.cos(beta)])
        n_circ = np.array([math.cos(beta), sgn * math.sin(beta)])
        rot = math.degrees(math.atan2(n_edge[1], n_edge[0])) - 90.0
        along = Chart((0, 1, 0, 1), rot).to_local(n_circ)[0, 0]
        charts.append(Chart((r_a, r_b, -h, h) if along > 0 else (-r_b, -r_a, -h, h), rot))
        profiles.append(constant(0.0))

        # convex corner on the unit circle: yN along the outward bisector
        d = n_edge + n_circ
        rot = math.degrees(math.atan2(d[1], d[0])) - 90.0
        frame = Chart((0, 1, 0, 1), rot)
        p = frame.to_local(n_circ)[0]
        ne = frame.to_local(n_edge)[0]
        line = Profile("affine", {"slope": -ne[0] / ne[1], "intercept": 0.0})
        charts.append(Chart((p[0] - c, p[0] + c, p[1] - 2 * c, p[1] + c), rot))
        profiles.append(Profile("min", {"parts": (circ, line)}))

    # arc charts: yN radial
    wa, depth = 0.15, 0.7
    phi_max = beta - math.atan2(wa, depth) - 0.02
    n_arc = max(2, math.ceil(2 * phi_max / 0.2) + 1)
    for phi in np.linspace(-phi_max, phi_max, n_arc):
        charts.append(Chart((-wa, wa, depth, 1.0 + 2 * rho), math.degrees(phi) - 90.0))
        profiles.append(circ)

    s_prime = len(charts)

    # interior: runs of grid cells whose rho-expanded boxes lie in the sector
    edges = np.arange(-1.0, 1.0 + cell / 2, cell)
    for y0 in edges[:-1]:
        run = None
        for x0 in edges[:-1]:
            lo = (x0 - rho, y0 - rho)
            hi = (x0 + cell + rho, y0 + cell + rho)
            ok = _box_inside_sector(lo, hi, beta) and not _box_meets_disc(lo, hi, eps_max)
            if ok:
                run = (run[0] if run else x0, x0 + cell)
            if run and (not ok or x0 == edges[-2]):
                box = (run[0] - rho, run[1] + rho, y0 - rho, y0 + cell + rho)
                if _box_inside_sector(box[:1] + box[2:3], box[1:2] + box[3:4], beta):
                    charts.append(Chart(box, 0.0))
                    profiles.append(Profile("full"))
                run = None
    return Atlas(rho, tuple(charts), s_prime), profiles


def sector_domain(beta: float, eps_max: float = 0.3, validate: bool = True) -> SubgraphDomain:
    """The unit sector of half-angle beta on :func:`sector_atlas`."""
    atlas, profiles = sector_atlas(beta, eps_max)
    return SubgraphDomain(atlas, tuple(profiles), (1, 1.0 / math.sin(beta) ** 2 * 10), validate)


def tilde_profile(beta: float, eps: float) -> Profile:
    return Profile("tilde", {"eps": eps, "beta": beta})


def coverage_gaps(domain: SubgraphDomain, n: int = 200) -> np.ndarray:
    """Sample points of the domain not covered by any ``(V_j)_rho``."""
    x0, x1, y0, y1 = domain.bbox()
    u, v = np.meshgrid(np.linspace(x0, x1, n), np.linspace(y0, y1, n))
    pts = np.column_stack([u.ravel(), v.ravel()])
    inside = domain.contains(pts)
    return pts[inside & ~domain.atlas.covered(pts)]


# ---------------------------------------------------------------------------
# measures


@dataclass(frozen=True)
class AreaEstimate:
    value: float
    error: float
    method: str


def integrate_profile_gap(g1: Callable, g2: Callable, lo: float, hi: float, kinks: Sequence[float] = ()) -> float:
    """Adaptive quadrature of ``|g1 - g2|`` on (lo, hi)."""
    diff = lambda t: g1(t) - g2(t)
    pts = sorted(set(list(kinks) + _crossings(diff, lo, hi)))
    pts = [p for p in pts if lo < p < hi]
    f = lambda t: abs(float(diff(np.array([t]))[0]))
    val, _ = integrate.quad(f, lo, hi, points=pts or None, epsabs=QUAD_ABS_TOL * 1e-3, epsrel=1e-12, limit=500)
    return val


def _quadtree_difference(r1: Region, r2: Region, bbox, n0: int = 64, depth: int = 9) -> AreaEstimate:
    x0, x1, y0, y1 = bbox
    hx, hy = (x1 - x0) / n0, (y1 - y0) / n0
    ix, iy = np.meshgrid(np.arange(n0), np.arange(n0))
    cells = np.column_stack([x0 + ix.ravel() * hx, y0 + iy.ravel() * hy])
    q = (0.0, 0.25, 0.5, 0.75, 1.0)
    offs = np.array([(a, b) for a in q for b in q]) * (1 - 2e-9) + 1e-9
    area, err = 0.0, 0.0
    for level in range(depth + 1):
        if len(cells) == 0:
            break
        pts = (cells[:, None, :] + offs[None, :, :] * np.array([hx, hy])).reshape(-1, 2)
        ind = (r1.contains(pts) != r2.contains(pts)).reshape(len(cells), len(offs))
        full, empty = ind.all(axis=1), ~ind.any(axis=1)
        area += full.sum() * hx * hy
        mixed = cells[~(full | empty)]
        if level == depth:
            area += 0.5 * len(mixed) * hx * hy
            err += 0.5 * len(mixed) * hx * hy
            break
        hx, hy = hx / 2, hy / 2
        cells = np.vstack([mixed + np.array([a * hx, b * hy]) for a in (0, 1) for b in (0, 1)])
    return AreaEstimate(float(area), float(err), "quadtree")


def symmetric_difference_measure(d1, d2) -> AreaEstimate:
    """Lebesgue measure of ``d1 symmetric-difference d2``.

    Two subgraph domains on one atlas that differ in a single chart are handled
    by exact quadrature of the profile gap; other pairs by a refined indicator
    grid whose error bound is reported.
    """
    if isinstance(d1, SubgraphDomain) and isinstance(d2, SubgraphDomain):
        if d1.atlas != d2.atlas:
            raise AtlasMismatch("domains are described on different atlases")
        diff = [j for j in range(d1.atlas.s) if d1.profiles[j] != d2.profiles[j]]
        if not diff:
            return AreaEstimate(0.0, 0.0, "identical")
        if len(diff) == 1:
            j = diff[0]
            a1, b1, _, _ = d1.atlas.charts[j].box
            g1, g2 = d1.profiles[j], d2.profiles[j]
            kinks = g1.kinks(a1, b1) + g2.kinks(a1, b1)
            return AreaEstimate(integrate_profile_gap(g1, g2, a1, b1, kinks), QUAD_ABS_TOL, "quadrature")
    b1, b2 = d1.bbox(), d2.bbox()
    bbox = (min(b1[0], b2[0]), max(b1[1], b2[1]), min(b1[2], b2[2]), max(b1[3], b2[3]))
    return _quadtree_difference(d1, d2, bbox)


# ---------------------------------------------------------------------------
# strips


@dataclass(frozen=True)
class ChartStrip:
    """Single-chart strip ``W x (a, D1)`` carrying two boundary graphs g1, g2."""

    w: tuple[float, float]
    a: float
    D1: float
    D2: float
    g1: Callable
    g2: Callable
    samples: int = 2001
    delta_value: float | None = None

    def __post_init__(self):
        if not self.a < self.D2 < self.D1:
            raise InvalidDomain("need a < D2 < D1")
        if self.delta_value is not None and not 0 < self.delta_value <= self.natural_delta * (1 + 1e-14):
            raise InvalidDomain("delta must lie in (0, (D2-a)/(2(D1-D2))]")
        if not self.w[0] < self.w[1]:
            raise InvalidDomain("degenerate base interval")
        x = self.grid()
        g1, g2 = self.g1(x), self.g2(x)
        if np.any(g2 <= self.D2) or np.any(g1 >= self.D1):
            raise InvalidDomain("graphs must satisfy D2 < g2 and g1 < D1")
        if np.any(self.g3(x) <= self.a):
            raise InvalidDomain("O3 would touch the strip bottom")

    def grid(self, n: int | None = None) -> np.ndarray:
        return np.linspace(self.w[0], self.w[1], n or self.samples)

    @property
    def natural_delta(self) -> float:
        return (self.D2 - self.a) / (2 * (self.D1 - self.D2))

    @property
    def delta(self) -> float:
        """``(D2-a)/(2(D1-D2))`` unless a smaller common value was imposed."""
        return self.natural_delta if self.delta_value is None else float(self.delta_value)

    @property
    def c_min(self) -> float:
        return 1.0 / self.delta

    def excess(self, x) -> np.ndarray:
        return np.maximum(self.g1(x) - self.g2(x), 0.0)

    def g3(self, x) -> np.ndarray:
        return self.g2(x) - self.delta * self.excess(x)

    def g1c(self, x, c: float) -> np.ndarray:
        return self.g2(x) + c * self.delta * self.excess(x)

    def kinks(self) -> list[float]:
        return list(self._kinks)

    @cached_property
    def _kinks(self) -> tuple[float, ...]:
        lo, hi = self.w
        pts = _crossings(lambda t: self.g1(t) - self.g2(t), lo, hi, self.samples)
        for g in (self.g1, self.g2):
            if isinstance(g, Profile):
                pts += g.kinks(lo, hi)
        return tuple(sorted(set(pts)))

    def check_c(self, c: float) -> None:
        if c < self.c_min * (1 - 1e-14):
            raise InvalidC(f"c={c} below 1/delta={self.c_min}")

    def in_O1(self, pts) -> np.ndarray:
        return self._in(pts, lambda x: self.g1(x))

    def in_O2(self, pts) -> np.ndarray:
        return self._in(pts, lambda x: self.g2(x))

    def in_O3(self, pts) -> np.ndarray:
        return self._in(pts, self.g3)

    def in_O1c(self, pts, c: float) -> np.ndarray:
        return self._in(pts, lambda x: self.g1c(x, c))

    def _in(self, pts, g) -> np.ndarray:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        x, y = pts[:, 0], pts[:, 1]
        return (x > self.w[0]) & (x < self.w[1]) & (y > self.a) & (y < g(x))


def _piecewise_integral(f: Callable, breaks: Sequence[float], pieces: int, order: int = 20) -> float:
    """Composite Gauss-Legendre over ``pieces`` equal parts of each interval between breaks."""
    nodes, weights = np.polynomial.legendre.leggauss(order)
    edges = np.concatenate([np.linspace(a, b, pieces + 1)[:-1] for a, b in zip(breaks, breaks[1:])] + [[breaks[-1]]])
    mid, half = (edges[1:] + edges[:-1]) / 2, (edges[1:] - edges[:-1]) / 2
    x = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    return float(np.sum(f(x).reshape(len(mid), order) * weights[None, :] * half[:, None]))


def strip_measures(strip: ChartStrip, c: float) -> tuple[float, float, float]:
    """Return ``(|O1 minus O2|, |O2 minus O3|, |O1c minus O2|)``.

    The integrands are smooth between the kinks of the strip, where composite
    Gauss-Legendre is used; if two resolutions disagree beyond ``1e-14`` the
    integral falls back to adaptive quadrature.
    """
    strip.check_c(c)
    lo, hi = strip.w
    pts = [p for p in strip.kinks() if lo < p < hi]
    breaks = [lo] + pts + [hi]
    kw = dict(points=pts or None, epsabs=1e-14, epsrel=1e-13, limit=500)
    scal = lambda f: (lambda t: float(f(np.array([t]))[0]))

    def integral(f):
        a, b = _piecewise_integral(f, breaks, 8), _piecewise_integral(f, breaks, 16)
        if abs(a - b) <= 1e-14 * max(1.0, abs(b)):
            return b
        return integrate.quad(scal(f), lo, hi, **kw)[0]

    m12 = integral(strip.excess)
    m23 = integral(lambda x: strip.g2(x) - strip.g3(x))
    m1c2 = integral(lambda x: np.maximum(strip.g1c(x, c) - strip.g2(x), 0.0))
    return m12, m23, m1c2
