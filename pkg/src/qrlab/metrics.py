"""Conformal metrics: densities, distances, metric spheres, Escher ratios.

Four kinds are supported:

* ``euclidean``       density 1 on R^n (or on a subregion),
* ``spherical``       density 2/(1+|x|^2) on R^n ∪ {∞},
* ``hyperbolic-ball`` density 2/(1-|x|^2) on the unit ball,
* ``quasihyperbolic`` density 1/dist(x, ∂X) on a proper subdomain X.

Closed forms are used for the first three distances.  The quasihyperbolic
distance is bracketed by a graph search (:func:`dist_quasihyperbolic`).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from . import points as P
from .errors import DomainError, ParameterError, RangeError
from .rng import SplitMix64

KINDS = ("euclidean", "spherical", "hyperbolic-ball", "quasihyperbolic")


# --------------------------------------------------------------------------
# regions


@dataclass(frozen=True, eq=False)
class Region:
    """A domain in R^n ∪ {∞}.

    ``boundary_distance`` returns the Euclidean distance to the boundary for
    interior points and a non-positive number outside; it is ``None`` for the
    whole space and for the sphere, which have no boundary.
    """

    kind: str
    dim: int
    boundary_distance: Optional[Callable[[np.ndarray], np.ndarray]] = None
    bbox: Optional[tuple] = None
    includes_infinity: bool = False
    description: str = ""

    @property
    def bounded(self) -> bool:
        return self.bbox is not None

    @property
    def proper(self) -> bool:
        return self.boundary_distance is not None

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        inf = P.is_infinite(x)
        if self.boundary_distance is None:
            return ~inf | self.includes_infinity
        safe = np.where(inf[..., None], 0.0, x)
        with np.errstate(invalid="ignore"):
            inside = self.boundary_distance(safe) > 0.0
        return inside & ~inf

    def dist_to_boundary(self, x) -> np.ndarray:
        if self.boundary_distance is None:
            raise DomainError(f"region {self.kind!r} has no boundary")
        return self.boundary_distance(np.asarray(x, dtype=np.float64))


def whole_space(n: int) -> Region:
    return Region("space", n, description="R^n")


def riemann_sphere(n: int) -> Region:
    return Region("sphere", n, includes_infinity=True, description="S^n")


def unit_ball(n: int) -> Region:
    return Region(
        "ball",
        n,
        boundary_distance=lambda x: 1.0 - np.linalg.norm(x, axis=-1),
        bbox=(-np.ones(n), np.ones(n)),
        description="unit ball",
    )


def ball(center, radius: float) -> Region:
    """Open Euclidean ball."""
    c = np.asarray(center, dtype=np.float64)
    if not radius > 0:
        raise ParameterError("ball radius must be positive")
    return Region(
        "ball",
        c.size,
        boundary_distance=lambda x: radius - np.linalg.norm(x - c, axis=-1),
        bbox=(c - radius, c + radius),
        description=f"ball of radius {radius:g}",
    )


def half_space(n: int, axis: int = -1) -> Region:
    """The half-space {x : x[axis] > 0}."""
    return Region(
        "halfspace",
        n,
        boundary_distance=lambda x: x[..., axis],
        description=f"half-space x[{axis}] > 0",
    )


def box(lo, hi) -> Region:
    """Open axis-parallel box."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    if lo.shape != hi.shape or np.any(hi <= lo):
        raise ParameterError("box needs lo < hi componentwise")

    def bd(x):
        return np.min(np.minimum(x - lo, hi - x), axis=-1)

    return Region("box", lo.size, boundary_distance=bd, bbox=(lo, hi), description="box")


def custom_region(n: int, boundary_distance, bbox=None, description="custom") -> Region:
    if bbox is not None:
        bbox = (np.asarray(bbox[0], dtype=np.float64), np.asarray(bbox[1], dtype=np.float64))
    return Region("custom", n, boundary_distance=boundary_distance, bbox=bbox,
                  description=description)


# --------------------------------------------------------------------------
# metrics


@dataclass(frozen=True, eq=False)
class ConformalMetric:
    kind: str
    dim: int
    region: Region = field(default=None)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown metric kind {self.kind!r}")
        if self.dim < 2:
            raise ParameterError("dimension must be at least 2")
        if self.region is None:
            default = {
                "euclidean": whole_space,
                "spherical": riemann_sphere,
                "hyperbolic-ball": unit_ball,
            }.get(self.kind)
            if default is None:
                raise ParameterError("the quasihyperbolic metric needs a proper subdomain")
            object.__setattr__(self, "region", default(self.dim))
        if self.kind == "quasihyperbolic" and not self.region.proper:
            raise DomainError("the quasihyperbolic metric is undefined on all of R^n")

    def density(self, x):
        return density(self, x)

    def distance(self, u, v):
        return distance(self, u, v)

    @property
    def diameter(self) -> float:
        if self.kind == "spherical":
            return np.pi
        if self.kind == "euclidean" and self.region.bounded:
            lo, hi = self.region.bbox
            return float(np.linalg.norm(hi - lo))
        return np.inf


def euclidean(n: int, region: Region | None = None) -> ConformalMetric:
    return ConformalMetric("euclidean", n, region)


def spherical(n: int) -> ConformalMetric:
    return ConformalMetric("spherical", n)


def hyperbolic(n: int) -> ConformalMetric:
    return ConformalMetric("hyperbolic-ball", n)


def quasihyperbolic(region: Region) -> ConformalMetric:
    return ConformalMetric("quasihyperbolic", region.dim, region)


def _check_inside(metric: ConformalMetric, x: np.ndarray) -> None:
    if metric.kind == "spherical":
        return
    if np.any(P.is_infinite(x)):
        raise DomainError(f"∞ is not a point of the {metric.kind} space")
    if not np.all(metric.region.contains(x)):
        raise DomainError(f"point outside the domain of the {metric.kind} metric")


def density(metric: ConformalMetric, x) -> np.ndarray:
    """Conformal density τ(x)."""
    x = P.as_points(x)
    _check_inside(metric, x)
    if metric.kind == "euclidean":
        return np.ones(x.shape[:-1])
    if metric.kind == "spherical":
        # at ∞ the chart swap x -> x/|x|^2 gives the density at the image 0
        r = P.norm(x)
        with np.errstate(over="ignore"):
            return np.where(np.isinf(r), 2.0, 2.0 / (1.0 + r * r))
    if metric.kind == "hyperbolic-ball":
        r = np.linalg.norm(x, axis=-1)
        return 2.0 / ((1.0 - r) * (1.0 + r))
    return 1.0 / metric.region.dist_to_boundary(x)


def dist_euclidean(u, v) -> np.ndarray:
    u, v = P.as_points(u), P.as_points(v)
    if np.any(P.is_infinite(u)) or np.any(P.is_infinite(v)):
        raise DomainError("∞ is not a point of R^n")
    return np.linalg.norm(u - v, axis=-1)


def dist_spherical(u, v) -> np.ndarray:
    """Great-circle distance σ on S^n = R^n ∪ {∞}, values in [0, π].

    Computed as 2 atan2(|p - q|, |p + q|) for the lifted points p, q, which
    keeps full relative accuracy for nearby points close to 0 or to ∞ and
    for nearly antipodal points.
    """
    p = P.lift(P.as_points(u))
    q = P.lift(P.as_points(v))
    return 2.0 * np.arctan2(P.safe_norm(p - q), P.safe_norm(p + q))


def dist_hyperbolic(x, y) -> np.ndarray:
    """Hyperbolic distance ρ on the unit ball."""
    x, y = np.broadcast_arrays(P.as_points(x), P.as_points(y))
    if np.any(P.is_infinite(x)) or np.any(P.is_infinite(y)):
        raise DomainError("∞ is not a point of the unit ball")
    rx = np.linalg.norm(x, axis=-1)
    ry = np.linalg.norm(y, axis=-1)
    if np.any(rx >= 1.0) or np.any(ry >= 1.0):
        raise DomainError("hyperbolic distance needs points of the open unit ball")
    d = np.linalg.norm(x - y, axis=-1)
    gx = (1.0 - rx) * (1.0 + rx)
    gy = (1.0 - ry) * (1.0 + ry)
    return 2.0 * np.arctanh(d / np.sqrt(d * d + gx * gy))


def distance(metric: ConformalMetric, u, v) -> np.ndarray:
    """Distance in ``metric``; quasihyperbolic returns the graph estimate value."""
    if metric.kind == "euclidean":
        return dist_euclidean(u, v)
    if metric.kind == "spherical":
        return dist_spherical(u, v)
    if metric.kind == "hyperbolic-ball":
        return dist_hyperbolic(u, v)
    u, v = np.broadcast_arrays(P.as_points(u), P.as_points(v))
    flat_u, flat_v = u.reshape(-1, u.shape[-1]), v.reshape(-1, v.shape[-1])
    vals = [dist_quasihyperbolic(metric.region, a, b).value for a, b in zip(flat_u, flat_v)]
    return np.array(vals).reshape(u.shape[:-1])


# --------------------------------------------------------------------------
# quasihyperbolic distance by graph refinement


@dataclass(frozen=True)
class GeodesicEstimate:
    value: float
    lower_bound: float
    upper_bound: float
    method: str
    history: tuple = ()

    def __post_init__(self):
        if not (self.lower_bound <= self.value <= self.upper_bound):
            raise ValueError("estimate outside its own bracket")


def _simpson_lengths(density_fn, a: np.ndarray, b: np.ndarray, intervals: int) -> np.ndarray:
    """Composite Simpson integral of the density along segments a -> b."""
    t = np.linspace(0.0, 1.0, intervals + 1)
    w = np.ones(intervals + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    w /= 3.0 * intervals
    pts = a[:, None, :] + t[None, :, None] * (b - a)[:, None, :]
    dens = density_fn(pts)
    return np.linalg.norm(b - a, axis=-1) * (dens @ w)


def _j_bound(region: Region, x: np.ndarray, y: np.ndarray) -> float:
    """Closed-form lower bound log(1 + |x-y| / min(d(x), d(y)))."""
    dx, dy = region.dist_to_boundary(x), region.dist_to_boundary(y)
    return float(np.log1p(np.linalg.norm(x - y) / min(dx, dy)))


def dist_quasihyperbolic(region: Region, x, y, cells: int = 16, levels: int = 3,
                         simpson_intervals: int = 4) -> GeodesicEstimate:
    """Bracket the quasihyperbolic distance between ``x`` and ``y``.

    The upper bound is the length of the best polygonal path found on a
    graph of grid vertices (spacing halves at each of ``levels`` levels),
    with every edge length integrated by Simpson's rule.  The lower bound is
    the closed-form j-distance, which never exceeds the quasihyperbolic
    distance.  Bounds are monotone in the refinement by construction.
    """
    if not region.proper:
        raise DomainError("the quasihyperbolic metric is undefined without a boundary")
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = region.dim
    if np.any(P.is_infinite(x)) or np.any(P.is_infinite(y)):
        raise DomainError("∞ is not a point of a proper subdomain of R^n")
    if not (region.contains(x) and region.contains(y)):
        raise DomainError("quasihyperbolic endpoints must be interior points")
    if np.array_equal(x, y):
        return GeodesicEstimate(0.0, 0.0, 0.0, "closed-form")
    if levels < 1 or cells < 2:
        raise ParameterError("need levels >= 1 and cells >= 2")

    def dens(p):
        d = region.boundary_distance(p)
        with np.errstate(divide="ignore"):
            return np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), np.inf)

    if region.bounded:
        lo, hi = region.bbox
    else:
        half = 0.5 * np.linalg.norm(x - y) + max(region.dist_to_boundary(x),
                                                   region.dist_to_boundary(y))
        mid = 0.5 * (x + y)
        lo, hi = mid - half, mid + half

    lower = _j_bound(region, x, y)
    direct = float(_simpson_lengths(dens, x[None], y[None], 8 * simpson_intervals)[0])
    upper = direct if np.isfinite(direct) else np.inf
    history = []
    offsets = np.array([o for o in itertools.product((-1, 0, 1), repeat=n) if any(o)])
    for level in range(levels):
        m = cells * 2**level
        axes = [np.linspace(lo[i], hi[i], m + 1) for i in range(n)]
        h = (hi - lo) / m
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, n)
        idx = np.arange(grid.shape[0]).reshape((m + 1,) * n)
        inside = (region.boundary_distance(grid) > 0).reshape((m + 1,) * n)
        src, dst = [], []
        for off in offsets:
            if next(o for o in off if o != 0) < 0:
                continue  # each undirected edge once
            sl_a = tuple(slice(0, m + 1 - o) if o >= 0 else slice(-o, m + 1) for o in off)
            sl_b = tuple(slice(o, m + 1) if o >= 0 else slice(0, m + 1 + o) for o in off)
            ok = inside[sl_a] & inside[sl_b]
            src.append(idx[sl_a][ok])
            dst.append(idx[sl_b][ok])
        src = np.concatenate(src)
        dst = np.concatenate(dst)
        wts = _simpson_lengths(dens, grid[src], grid[dst], simpson_intervals)
        # connect the endpoints to nearby grid vertices
        N = grid.shape[0]
        reach = 1.5 * np.linalg.norm(h)
        extra_s, extra_d, extra_w = [], [], []
        for k, p in ((N, x), (N + 1, y)):
            near = np.nonzero((np.linalg.norm(grid - p, axis=-1) <= reach) & inside.ravel())[0]
            w = _simpson_lengths(dens, np.repeat(p[None], near.size, 0), grid[near],
                                 simpson_intervals)
            extra_s.append(np.full(near.size, k))
            extra_d.append(near)
            extra_w.append(w)
        src = np.concatenate([src] + extra_s)
        dst = np.concatenate([dst] + extra_d)
        wts = np.concatenate([wts] + extra_w)
        good = np.isfinite(wts)
        graph = coo_matrix((wts[good], (src[good], dst[good])), shape=(N + 2, N + 2)).tocsr()
        d = dijkstra(graph, directed=False, indices=N)[N + 1]
        upper = min(upper, float(d))
        history.append((m, upper))
    if not np.isfinite(upper):
        raise DomainError("no path between the endpoints was found inside the region")
    upper = max(upper, lower)
    return GeodesicEstimate(upper, lower, upper, "graph-refinement", tuple(history))


# --------------------------------------------------------------------------
# metric spheres


def metric_sphere_sample(metric: ConformalMetric, center, r: float, count: int,
                         seed: int) -> np.ndarray:
    """``count`` points at distance ``r`` from ``center``, shape (count, n).

    Each point is placed along a seeded random direction at the radius that
    solves d(center, y) = r; the radial equation has a closed-form root in
    every supported metric (tan, tanh or identity of r/2 after moving the
    center to 0 by an isometry).
    """
    if count < 1:
        raise ParameterError("count must be at least 1")
    if r < 0:
        raise ParameterError("radius must be nonnegative")
    center = np.asarray(center, dtype=np.float64)
    n = metric.dim
    rng = SplitMix64(seed)
    if metric.kind == "spherical":
        if r >= np.pi:
            raise RangeError("spherical radius must be smaller than π")
        return sphere_circle(center[None], np.array([r]), rng.normal(1, count, n + 1))[0]
    dirs = rng.directions(count, n)
    if metric.kind == "euclidean":
        _check_inside(metric, center)
        if metric.region.bounded and r >= metric.diameter:
            raise RangeError("radius exceeds the diameter of the region")
        return center + r * dirs
    if metric.kind == "hyperbolic-ball":
        _check_inside(metric, center)
        s = np.tanh(0.5 * r)
        if s >= 1.0:
            raise RangeError("hyperbolic radius too large for double precision")
        return mobius_translate(center, s * dirs)
    raise ParameterError("metric spheres are not available for the quasihyperbolic metric")


def sphere_circle(centers: np.ndarray, radii: np.ndarray, gauss: np.ndarray) -> np.ndarray:
    """Vectorised spherical circles.

    ``centers`` (B, n), ``radii`` (B,) and ``gauss`` (B, S, n+1) of standard
    normals give (B, S, n) points at σ-distance ``radii`` from ``centers``.
    """
    p = P.lift(centers)[:, None, :]
    t = gauss - np.sum(gauss * p, axis=-1, keepdims=True) * p
    t /= np.linalg.norm(t, axis=-1, keepdims=True)
    r = np.asarray(radii, dtype=np.float64)[:, None, None]
    q = np.cos(r) * p + np.sin(r) * t
    return P.project(q)


def mobius_translate(a, x) -> np.ndarray:
    """The ball automorphism sending 0 to ``a``, applied to ``x``."""
    a = np.asarray(a, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    aa = np.sum(a * a, axis=-1, keepdims=True)
    xx = np.sum(x * x, axis=-1, keepdims=True)
    ax = np.sum(a * x, axis=-1, keepdims=True)
    num = (1.0 - aa) * x + (1.0 + 2.0 * ax + xx) * a
    den = 1.0 + 2.0 * ax + aa * xx
    return num / den


# --------------------------------------------------------------------------
# Escher condition


@dataclass(frozen=True)
class EscherProfile:
    params: np.ndarray
    ratios: np.ndarray
    escher: bool
    tolerance: float

    def rows(self):
        return [{"parameter": float(t), "ratio": float(q)} for t, q in zip(self.params, self.ratios)]


def escher_ratio_profile(tau_Y: ConformalMetric, tau_Z: ConformalMetric, ray,
                         steps: int = 6, params: Sequence[float] | None = None,
                         decay: float = 1e-3) -> EscherProfile:
    """Sample τ_Z/τ_Y along a ray running to a boundary point ζ of Y.

    ``ray`` is ``(center, zeta)`` or, when ζ = ∞, ``(center, zeta, direction)``
    with ``direction`` defaulting to e_1.  Finite ζ is approached through
    center + t (ζ - center), t = 1 - 10^-j; ζ = ∞ through center + 10^j u.
    Escher evidence means the ratios are nonincreasing and end below
    ``decay`` times their first value; a ratio that stalls is a failure.
    """
    center = np.asarray(ray[0], dtype=np.float64)
    zeta = np.asarray(ray[1], dtype=np.float64)
    to_infinity = bool(np.any(P.is_infinite(zeta)))
    if params is None:
        js = np.arange(1, steps + 1, dtype=np.float64)
        params = 10.0**js if to_infinity else 1.0 - 10.0**-js
    params = np.asarray(params, dtype=np.float64)
    if to_infinity:
        if len(ray) > 2:
            u = np.asarray(ray[2], dtype=np.float64)
        else:
            u = np.eye(center.size)[0]
        pts = center + params[:, None] * (u / np.linalg.norm(u))
    else:
        pts = center + params[:, None] * (zeta - center)
    if not np.all(tau_Y.region.contains(pts)):
        raise DomainError("the ray leaves Y before reaching its endpoint")
    ratios = density(tau_Z, pts) / density(tau_Y, pts)
    monotone = bool(np.all(np.diff(ratios) <= 1e-12 * np.abs(ratios[:-1])))
    escher = monotone and ratios[-1] <= decay * ratios[0]
    return EscherProfile(params, ratios, bool(escher), decay)
