"""Estimators for continuity, normality, Bloch and growth quantities.

All estimators are pure functions of their inputs and seed.  Random samples
come from per-task SplitMix64 streams (see :mod:`qrlab.rng`), so enlarging a
sample keeps the earlier draws and sups taken over it can only grow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import points as P
from . import rng as R
from .errors import DomainError, NumericError, ParameterError
from .maps import IsometrySampler, QRMap, distortion, evaluate
from .metrics import (ConformalMetric, Region, dist_hyperbolic, dist_spherical, distance,
                      metric_sphere_sample, mobius_translate, sphere_circle)


def _unit(z: np.ndarray) -> np.ndarray:
    return z / np.linalg.norm(z, axis=-1, keepdims=True)


def _axes(n: int) -> np.ndarray:
    e = np.eye(n)
    return np.concatenate([e, -e])


def _eval(f: QRMap, x: np.ndarray) -> np.ndarray:
    with np.errstate(all="ignore"):
        return P.normalize(f.func(x))


def surface_measure(n: int) -> float:
    """ω_n, the area of the unit n-sphere in R^{n+1}."""
    return 2.0 * math.pi ** ((n + 1) / 2) / math.gamma((n + 1) / 2)


# --------------------------------------------------------------------------
# Hölder constants and exponents


@dataclass(frozen=True)
class HolderFit:
    alpha_used: float
    L_hat: float
    exponent_hat: float
    residual: float
    pair_count: int
    seed: int
    argmax: tuple = ()
    degenerate: bool = False
    scales: Optional[np.ndarray] = None
    oscillation: Optional[np.ndarray] = None

    def rows(self) -> list:
        if self.scales is None:
            return [{"alpha": self.alpha_used, "L_hat": self.L_hat,
                     "exponent_hat": self.exponent_hat, "residual": self.residual,
                     "pairs": self.pair_count}]
        return [{"scale": s, "oscillation": o} for s, o in zip(self.scales, self.oscillation)]


def _fit_slope(x: np.ndarray, y: np.ndarray) -> tuple:
    """Least-squares slope of y against x and the RMS residual."""
    A = np.column_stack([x, np.ones_like(x)])
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - A @ coef
    return float(coef[0]), float(np.sqrt(np.mean(res * res)))


def _region_pairs(region: Region, count: int, seps: Sequence[float], seed: int,
                  anchor=None, tries: int = 64) -> tuple:
    """Pairs (x, y) in ``region`` with |x - y| log-uniform in ``seps``.

    Pair i depends only on (seed, i), so a larger ``count`` extends the
    sample.  Pairs whose candidates all leave the region are dropped.
    """
    lo, hi = region.bbox
    n = region.dim
    smin, smax = seps
    ids = R.task_seeds(seed, count)
    u = R.uniform(ids ^ np.uint64(0xA5A5), 1)[:, 0]
    s = np.exp(np.log(smin) + u * (np.log(smax) - np.log(smin)))
    d = _unit(R.normal(ids ^ np.uint64(0x5A5A), tries * n).reshape(count, tries, n))
    if anchor is None:
        x = lo + (hi - lo) * R.uniform(ids, tries * n).reshape(count, tries, n)
    else:
        x = np.broadcast_to(np.asarray(anchor, dtype=np.float64), (count, tries, n))
    y = x + s[:, None, None] * d
    ok = region.contains(x) & region.contains(y)
    first = np.argmax(ok, axis=1)
    keep = ok[np.arange(count), first]
    rows = np.arange(count)[keep]
    return x[rows, first[keep]], y[rows, first[keep]]


def _check_compact_in(region: Region, f: QRMap, seed: int) -> None:
    if not region.bounded:
        raise DomainError("the sampling region must be bounded")
    lo, hi = region.bbox
    u = R.uniform(R.task_seeds(seed, 4096), region.dim)
    pts = lo + (hi - lo) * u
    pts = pts[region.contains(pts)]
    if pts.size == 0:
        raise DomainError("the sampling region is empty")
    if not np.all(f.domain.contains(pts)):
        raise DomainError("the sampling region leaves the domain of the map")
    if f.domain.proper:
        gap = f.domain.dist_to_boundary(pts) - region.dist_to_boundary(pts)
        if np.min(gap) <= 1e-9 * max(1.0, float(np.max(np.abs(hi - lo)))):
            raise DomainError("the sampling region touches the boundary of the domain")


def holder_constant(f: QRMap, metric_in: ConformalMetric, metric_out: ConformalMetric,
                    region: Region, alpha: float, pairs: int = 4096, seed: int = 0,
                    separations=(1e-4, 1.0), anchor=None,
                    modulus: str = "holder") -> HolderFit:
    """Sampled sup of d_Y(f(x), f(y)) / ω(d_X(x, y)) over pairs in ``region``.

    ``ω(t) = t^alpha`` for ``modulus="holder"`` and ``max(t^alpha, t)`` for
    ``"holder-lipschitz"``.  Separations are log-uniform between the two
    bounds, which must span at least four decades.  With ``anchor`` every
    pair starts at that point.
    """
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("alpha must lie in (0, 1]")
    smin, smax = map(float, separations)
    if not (0 < smin and smax >= 1e4 * smin * (1 - 1e-12)):
        raise ParameterError("separations must span at least four decades")
    if modulus not in ("holder", "holder-lipschitz"):
        raise ParameterError(f"unknown modulus {modulus!r}")
    _check_compact_in(region, f, seed)
    x, y = _region_pairs(region, pairs, (smin, smax), seed, anchor)
    if len(x) == 0:
        raise DomainError("no sample pair fits in the region")
    dx = distance(metric_in, x, y)
    dy = distance(metric_out, _eval(f, x), _eval(f, y))
    good = dx > 0
    x, y, dx, dy = x[good], y[good], dx[good], dy[good]
    w = dx**alpha if modulus == "holder" else np.maximum(dx**alpha, dx)
    ratio = dy / w
    k = int(np.argmax(ratio))
    pos = dy > 0
    if np.count_nonzero(pos) >= 2:
        slope, res = _fit_slope(np.log(dx[pos]), np.log(dy[pos]))
    else:
        slope, res = float("nan"), float("nan")
    return HolderFit(alpha, float(ratio[k]), slope, res, int(len(dx)), seed,
                     (x[k].copy(), y[k].copy()), degenerate=not np.any(pos))


def local_holder_exponent(f: QRMap, metric_in: ConformalMetric, metric_out: ConformalMetric,
                          x0, scales=None, samples: int = 64, seed: int = 0) -> HolderFit:
    """Slope of log osc(s) against log s, osc(s) = max d_Y(f(y), f(x0)) over d_X(y, x0) = s."""
    x0 = np.asarray(x0, dtype=np.float64)
    scales = np.geomspace(1e-1, 1e-6, 11) if scales is None else np.asarray(scales, float)
    if scales.size < 2 or np.any(np.diff(scales) >= 0) or scales[-1] < 1e-8:
        raise ParameterError("scales must decrease and stay above 1e-8")
    if not f.domain.contains(x0):
        raise DomainError("x0 must be an interior point of the domain")
    fx0 = evaluate(f, x0)
    osc = np.empty(scales.size)
    for i, s in enumerate(scales):
        y = metric_sphere_sample(metric_in, x0, float(s), samples, seed)
        osc[i] = np.max(distance(metric_out, _eval(f, y), fx0[None]))
    if np.any(osc <= 0):
        return HolderFit(float("nan"), 0.0, float("nan"), float("nan"),
                         samples * scales.size, seed, degenerate=True,
                         scales=scales, oscillation=osc)
    slope, res = _fit_slope(np.log(scales), np.log(osc))
    L = float(np.max(osc / scales**slope))
    return HolderFit(slope, L, slope, res, samples * scales.size, seed,
                     scales=scales, oscillation=osc)


# --------------------------------------------------------------------------
# continuity profiles


@dataclass(frozen=True)
class Witness:
    """A pair showing large oscillation of f∘A; ``point`` is A(x) in the original chart."""
    anchor: np.ndarray
    x: np.ndarray
    y: np.ndarray
    point: np.ndarray
    d_in: float
    d_out: float


@dataclass(frozen=True)
class ContinuityProfile:
    deltas: np.ndarray
    omega_hat: np.ndarray
    samples: np.ndarray
    verdict: str
    threshold: float
    witnesses: tuple = ()
    base_point: Optional[np.ndarray] = None

    def rows(self) -> list:
        return [{"delta": d, "omega_hat": o, "samples": int(s)}
                for d, o, s in zip(self.deltas, self.omega_hat, self.samples)]


def _pairs_in_space(metric: ConformalMetric, count: int, smin: float, smax: float,
                    window: float, seed: int) -> tuple:
    """Pairs with d(x, y) log-uniform in [smin, smax], x within ``window`` of 0."""
    n = metric.dim
    ids = R.task_seeds(seed, count)
    u = R.uniform(ids, 2)
    s = np.exp(np.log(smin) + u[:, 0] * (np.log(smax) - np.log(smin)))
    d1 = _unit(R.normal(ids ^ np.uint64(0x1111), n).reshape(count, n))
    if metric.kind == "spherical":
        x = P.project(_unit(R.normal(ids ^ np.uint64(0x3333), n + 1)))
        g = R.normal(ids ^ np.uint64(0x2222), n + 1).reshape(count, 1, n + 1)
        y = sphere_circle(x, s, g)[:, 0]
        return x, y, s
    d2 = _unit(R.normal(ids ^ np.uint64(0x2222), n).reshape(count, n))
    radial = u[:, 1] ** (1.0 / n)
    if metric.kind == "euclidean":
        x = window * radial[:, None] * d1
        return x, x + s[:, None] * d2, s
    if metric.kind == "hyperbolic-ball":
        x = np.tanh(0.5 * window) * radial[:, None] * d1
        return x, mobius_translate(x, np.tanh(0.5 * s)[:, None] * d2), s
    raise ParameterError("continuity profiles need a euclidean, spherical or hyperbolic input")


def continuity_profile(f: QRMap, sampler: IsometrySampler, metric_in: ConformalMetric,
                       metric_out: ConformalMetric, deltas, samples: int = 2000,
                       seed: int = 0, anchors=64, window: float = 1.0, x0=None,
                       threshold: Optional[float] = None, witnesses: int = 16,
                       scale: Optional[float] = None) -> ContinuityProfile:
    """Modulus of continuity of the family {f∘A} sampled over anchors of ``sampler``.

    For each δ a batch of ``samples`` pairs with separation in [δ/10, δ] is
    drawn; omega_hat(δ) is the sup of d_Y(f(A x), f(A y)) over all anchors and
    all pooled pairs with d_X(x, y) <= δ, so it is nonincreasing as δ shrinks.
    With euclidean range the family is recentred at ``x0`` (default 0).
    The verdict is normal-evidence iff omega_hat(δ_min) < threshold, which
    defaults to 1e-2 of ``scale`` (π for the sphere, the diameter of a bounded
    range, else 1).
    """
    deltas = np.sort(np.asarray(deltas, dtype=np.float64))[::-1]
    if deltas.size == 0:
        raise ParameterError("deltas must be nonempty")
    if np.any(deltas <= 0):
        raise ParameterError("deltas must be positive")
    n = f.dim
    if sampler.dim != n or metric_in.dim != n:
        raise ParameterError("sampler, metric and map dimensions disagree")
    A_pts = sampler.anchors(anchors) if np.isscalar(anchors) else np.atleast_2d(anchors)
    isos = [sampler.isometry(a) for a in A_pts]

    xs, ys, ss = [], [], []
    for k, d in enumerate(deltas):
        x, y, s = _pairs_in_space(metric_in, samples, d / 10.0, d, window,
                                  R.hash_seed(seed, k))
        xs.append(x)
        ys.append(y)
        ss.append(s)
    x, y, s = np.concatenate(xs), np.concatenate(ys), np.concatenate(ss)

    recentre = metric_out.kind == "euclidean"
    base = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    best = np.full((len(isos), deltas.size), 0.0)
    ratio_best = np.full(len(isos), -np.inf)
    arg = np.zeros(len(isos), dtype=int)
    for i, A in enumerate(isos):
        fx = _eval(f, A.func(x))
        fy = _eval(f, A.func(y))
        if recentre:
            shift = _eval(f, A.func(base[None]))[0]
            fx, fy = fx - shift, fy - shift
        dv = distance(metric_out, fx, fy)
        dv = np.where(np.isnan(dv), np.inf, dv)
        for k, d in enumerate(deltas):
            m = s <= d
            best[i, k] = np.max(dv[m]) if np.any(m) else 0.0
        r = dv / s
        arg[i] = int(np.argmax(r))
        ratio_best[i] = r[arg[i]]
    omega = best.max(axis=0)

    if scale is None:
        if metric_out.kind == "spherical":
            scale = math.pi
        else:
            diam = metric_out.diameter
            scale = diam if np.isfinite(diam) else 1.0
    thr = 1e-2 * scale if threshold is None else float(threshold)
    verdict = "normal-evidence" if omega[-1] < thr else "not-normal-evidence"

    order = np.argsort(-ratio_best, kind="stable")[:witnesses]
    wit = []
    for i in order:
        j = arg[i]
        point = isos[i].func(x[j][None])[0]
        fx = _eval(f, isos[i].func(x[j][None]))
        fy = _eval(f, isos[i].func(y[j][None]))
        wit.append(Witness(A_pts[i].copy(), x[j].copy(), y[j].copy(), point,
                           float(s[j]), float(distance(metric_out, fx, fy)[0])))
    counts = np.array([np.count_nonzero(s <= d) for d in deltas])
    return ContinuityProfile(deltas, omega, counts, verdict, thr, tuple(wit), base)


# --------------------------------------------------------------------------
# the quantity Q_f


def q_ratios(f: QRMap, metric_in: ConformalMetric, metric_out: ConformalMetric, x,
             alpha: float, scales, samples: int = 64, seed: int = 0) -> np.ndarray:
    """Per-scale max of d_Y(f(y), f(x)) / s^alpha over d_X(y, x) = s."""
    x = np.asarray(x, dtype=np.float64)
    fx = evaluate(f, x)
    out = []
    for s in np.asarray(scales, dtype=np.float64):
        y = metric_sphere_sample(metric_in, x, float(s), samples, seed)
        out.append(np.max(distance(metric_out, _eval(f, y), fx[None])) / s**alpha)
    return np.asarray(out)


def q_estimate(f: QRMap, metric_in: ConformalMetric, metric_out: ConformalMetric, x,
               alpha: float, scales, samples: int = 64, seed: int = 0) -> float:
    """Estimate of Q_f(x): the largest oscillation ratio over the given scales."""
    return float(np.max(q_ratios(f, metric_in, metric_out, x, alpha, scales, samples, seed)))


def q_grid(f: QRMap, metric_in: ConformalMetric, metric_out: ConformalMetric, grid,
           alpha: float, scales, samples: int = 64, seed: int = 0) -> float:
    """Sup of :func:`q_estimate` over the points of ``grid``."""
    return max(q_estimate(f, metric_in, metric_out, p, alpha, scales, samples, seed)
               for p in np.atleast_2d(grid))


# --------------------------------------------------------------------------
# Bloch statistics


@dataclass(frozen=True)
class BlochStats:
    R_hat: float
    f0_norm: float
    centers: np.ndarray
    diameters: np.ndarray
    little_bloch_radii: np.ndarray
    little_bloch_curve: np.ndarray
    bloch_radius_probe: float
    radius: float = 1.0

    @property
    def little_bloch_liminf(self) -> float:
        """Min of the axis curve over the outer half of the probed levels."""
        k = len(self.little_bloch_curve)
        return float(np.min(self.little_bloch_curve[k // 2:])) if k else float("nan")

    def rows(self) -> list:
        return [{"r": r, "diam": d} for r, d in zip(self.little_bloch_radii,
                                                   self.little_bloch_curve)]


def _ball_images(f: QRMap, centers: np.ndarray, dirs: np.ndarray, radius: float) -> np.ndarray:
    s = math.tanh(0.5 * radius)
    pts = mobius_translate(centers[:, None, :], s * dirs[None, :, :])
    return _eval(f, pts)


def _diameters(img: np.ndarray, chunk: int = 64) -> np.ndarray:
    out = np.empty(img.shape[0])
    for i in range(0, img.shape[0], chunk):
        b = img[i:i + chunk]
        with np.errstate(invalid="ignore"):
            d = np.linalg.norm(b[:, :, None, :] - b[:, None, :, :], axis=-1)
        d = np.where(np.isnan(d), np.inf, d)
        out[i:i + chunk] = d.max(axis=(1, 2))
    return out


def _sphere_dirs(n: int, count: int, seed: int) -> np.ndarray:
    extra = max(count - 2 * n, 0)
    rnd = R.SplitMix64(seed).directions(extra, n)
    return np.concatenate([_axes(n), rnd])


def _check_ball_map(f: QRMap) -> None:
    for p in f.poles:
        if np.linalg.norm(np.asarray(p, dtype=np.float64)) < 1.0:
            raise DomainError(f"{f.kind} has a pole inside the unit ball")
    if not np.all(f.domain.contains(0.5 * _axes(f.dim))):
        raise DomainError(f"{f.kind} is not defined on the unit ball")


def little_bloch_curve(f: QRMap, radii, direction=None, ball_samples: int = 64,
                       seed: int = 0, radius: float = 1.0) -> np.ndarray:
    """diam f(B_ρ(r·u, radius)) for each r, with u = ``direction`` (default -e_n)."""
    _check_ball_map(f)
    n = f.dim
    u = -np.eye(n)[-1] if direction is None else _unit(np.asarray(direction, float))
    centers = np.asarray(radii, dtype=np.float64)[:, None] * u
    dirs = _sphere_dirs(n, ball_samples, seed)
    return _diameters(_ball_images(f, centers, dirs, radius))


def bloch_R(f: QRMap, centers: int = 1000, boundary_approach=(0.0, 0.5, 0.9, 0.99, 0.999),
            ball_samples: int = 64, seed: int = 0, radius: float = 1.0) -> BlochStats:
    """R_hat = |f(0)| + max over sampled centers of the diameter of f(B_ρ(x, radius)).

    Centers are spread over the levels |x| in ``boundary_approach``; every
    level contains the 2n axis points, the rest are seeded random directions.
    The image of a ball is sampled on its boundary sphere.
    """
    _check_ball_map(f)
    n = f.dim
    levels = np.asarray(boundary_approach, dtype=np.float64)
    if levels.size == 0 or np.any(levels < 0) or np.any(levels >= 1):
        raise ParameterError("boundary_approach levels must lie in [0, 1)")
    per = max(int(math.ceil(centers / levels.size)), 1)
    rng = R.SplitMix64(R.hash_seed(seed, 7))
    cs = []
    for lv in levels:
        if lv == 0.0:
            cs.append(np.zeros((1, n)))
            continue
        extra = max(per - 2 * n, 0)
        cs.append(lv * np.concatenate([_axes(n), rng.directions(extra, n)]))
    C = np.concatenate(cs)
    dirs = _sphere_dirs(n, ball_samples, seed)
    img = _ball_images(f, C, dirs, radius)
    diam = _diameters(img)
    f0 = float(np.linalg.norm(evaluate(f, np.zeros(n))))
    R_hat = f0 + float(np.max(diam))

    axis_levels = levels[levels > 0]
    curve = little_bloch_curve(f, axis_levels, None, ball_samples, seed, radius)

    # radius of the largest image ball B(f(c), t) ⊂ f(B_ρ(c, radius)) at
    # centers where the Jacobian is positive
    fc = _eval(f, C)
    gap = np.min(np.linalg.norm(img - fc[:, None, :], axis=-1), axis=1)
    J = distortion(f, C)["J"]
    valid = np.isfinite(gap) & (J > 0)
    probe = float(np.max(gap[valid])) if np.any(valid) else 0.0
    return BlochStats(R_hat, f0, C, diam, axis_levels, curve, probe, radius)


# --------------------------------------------------------------------------
# growth


@dataclass(frozen=True)
class GrowthSeries:
    radii: np.ndarray
    M: np.ndarray
    A: np.ndarray
    A_stderr: np.ndarray
    mu_hat: float
    lambda_hat: float
    omega_n: float
    dim: int
    ball: bool = False
    x0: Optional[np.ndarray] = None

    def rows(self) -> list:
        return [{"r": r, "M": m, "A": a, "A_stderr": e}
                for r, m, a, e in zip(self.radii, self.M, self.A, self.A_stderr)]


def max_modulus(f: QRMap, radii, samples: int = 256, seed: int = 0) -> np.ndarray:
    """Sampled M(r, f) = sup_{|x| = r} |f(x)|, as a running max over r.

    By the maximum principle the sup over |x| = r equals the sup over
    |x| <= r, so the running max over smaller sampled spheres is admissible.
    """
    radii = np.asarray(radii, dtype=np.float64)
    if np.any(np.diff(radii) <= 0):
        raise ParameterError("radii must increase")
    dirs = _sphere_dirs(f.dim, samples, seed)
    M = np.empty(radii.size)
    for i, r in enumerate(radii):
        M[i] = np.max(P.norm(_eval(f, r * dirs)))
    return np.maximum.accumulate(M)


def spherical_integrand(f: QRMap, x: np.ndarray) -> tuple:
    """2^n J_f / (1 + |f|^2)^n at x and a mask of failed evaluations."""
    n = f.dim
    d = distortion(f, x)
    J = d["J"]
    fx = _eval(f, x)
    r = P.norm(fx)
    # (2/(1+r^2))^n via min(r, 1/r) to stay finite for large |f|
    s = np.minimum(r, 1.0 / np.where(r > 0, r, 1.0))
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logfac = n * (math.log(2.0) - np.log1p(s * s))
        logfac = np.where(r > 1.0, logfac - 2.0 * n * np.log(r), logfac)
        g = np.exp(logfac + np.log(np.maximum(J, 0.0)))
    bad = ~np.isfinite(J) | ~np.isfinite(g)
    return np.where(bad, 0.0, g), bad


def spherical_average(f: QRMap, x0, radii, samples: int, seed: int = 0,
                      chunk: int = 200_000) -> tuple:
    """Monte Carlo A(x0, r) with standard errors for each r in ``radii``.

    A(x0, r) is the spherical volume of f(B(x0, r)) with multiplicity,
    divided by ω_n.  One sample of the largest ball is shared by all radii,
    so A is nondecreasing in r.
    """
    x0 = np.asarray(x0, dtype=np.float64)
    radii = np.asarray(radii, dtype=np.float64)
    n = f.dim
    rmax = float(np.max(radii))
    vol = math.pi ** (n / 2) / math.gamma(n / 2 + 1) * rmax**n
    s1 = np.zeros(radii.size)
    s2 = np.zeros(radii.size)
    failures = 0
    for start in range(0, samples, chunk):
        m = min(chunk, samples - start)
        ids = R.task_seeds(seed, m, start)
        d = _unit(R.normal(ids, n).reshape(m, n))
        rad = rmax * R.uniform(ids ^ np.uint64(0xBEEF), 1)[:, 0] ** (1.0 / n)
        x = x0 + rad[:, None] * d
        if not np.all(f.domain.contains(x)):
            raise DomainError("the averaging ball leaves the domain")
        g, bad = spherical_integrand(f, x)
        failures += int(np.count_nonzero(bad))
        inside = rad[:, None] <= radii[None, :]
        v = np.where(inside, g[:, None], 0.0)
        s1 += v.sum(axis=0)
        s2 += (v * v).sum(axis=0)
    if failures > 0.01 * samples:
        raise NumericError(f"Jacobian evaluation failed at {failures} of {samples} samples")
    mean = s1 / samples
    var = np.maximum(s2 / samples - mean**2, 0.0)
    wn = surface_measure(n)
    return vol * mean / wn, vol * np.sqrt(var / samples) / wn


def growth_order(radii, values, n: int, ball: bool = False, window: int = 4,
                 use_loglog: bool = True) -> tuple:
    """(mu_hat, lambda_hat) from sliding-window slopes.

    With ``use_loglog`` the regressed quantity is log log M and the slope
    is multiplied by n - 1; otherwise log A is regressed as it stands.  The
    abscissa is log r, or log(1/(1-r)) for ball domains.
    """
    r = np.asarray(radii, dtype=np.float64)
    v = np.asarray(values, dtype=np.float64)
    x = -np.log1p(-r) if ball else np.log(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        y = np.log(np.log(v)) if use_loglog else np.log(v)
    ok = np.isfinite(x) & np.isfinite(y)
    if ball:
        ok &= r > 0
    else:
        ok &= r > 1
    x, y = x[ok], y[ok]
    if x.size < window:
        return float("nan"), float("nan")
    slopes = [_fit_slope(x[i:i + window], y[i:i + window])[0]
              for i in range(x.size - window + 1)]
    factor = (n - 1) if use_loglog else 1.0
    return factor * float(max(slopes)), factor * float(min(slopes))


def growth_suite(f: QRMap, x0=None, radii=None, sphere_samples: int = 256,
                 mc_samples: int = 0, seed: int = 0, window: int = 4) -> GrowthSeries:
    """M(r, f), A(x0, r) and the growth order estimates for one map.

    Pole-free maps use (n-1) log log M / log r; maps with poles use
    log A / log r.  Ball domains replace log r by log(1/(1-r)).
    ``mc_samples = 0`` skips A.
    """
    n = f.dim
    if radii is None:
        raise ParameterError("radii are required")
    radii = np.asarray(radii, dtype=np.float64)
    ball = f.domain.kind == "ball"
    if ball and np.any(radii >= 1):
        raise DomainError("radii must be below 1 for maps on the unit ball")
    x0 = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    M = max_modulus(f, radii, sphere_samples, seed)
    if mc_samples > 0:
        A, se = spherical_average(f, x0, radii, mc_samples, R.hash_seed(seed, 1))
    else:
        A = np.full(radii.size, np.nan)
        se = np.full(radii.size, np.nan)
    if f.poles:
        mu, lam = growth_order(radii, A, n, ball, window, use_loglog=False)
    else:
        mu, lam = growth_order(radii, M, n, ball, window)
    return GrowthSeries(radii, M, A, se, mu, lam, surface_measure(n), n, ball, x0)


@dataclass(frozen=True)
class GrowthCheck:
    r: float
    M: float
    bound: float
    passed: bool


def bloch_growth_check(f: QRMap, radii, stats: BlochStats, samples: int = 512,
                       seed: int = 0, slack: float = 1.05) -> list:
    """Compare sampled M(r, f) with R_hat·max{1, log((1+r)/(1-r))}."""
    radii = np.asarray(radii, dtype=np.float64)
    M = max_modulus(f, radii, samples, seed)
    out = []
    for r, m in zip(radii, M):
        bound = stats.R_hat * max(1.0, math.log((1 + r) / (1 - r)))
        out.append(GrowthCheck(float(r), float(m), bound, bool(m <= slack * bound)))
    return out


# --------------------------------------------------------------------------
# Zalcman rescaling


@dataclass(frozen=True)
class Certificate:
    w1: np.ndarray
    w2: np.ndarray
    separation: float


@dataclass(frozen=True)
class RescalingSequence:
    """Rescaled maps g_m(w) = f(a_m + x_m + ρ_m w) from the Zalcman search.

    ``sup_values`` holds the weighted ratio M_m at the chosen pair, and
    ``holder_excess`` the largest σ(g(w1), g(w2)) - 2|w1 - w2|^α on probes.
    """

    f: QRMap
    alpha: float
    window: float
    indices: np.ndarray
    anchors: np.ndarray
    centers: np.ndarray
    scales: np.ndarray
    witnesses: np.ndarray
    sup_values: np.ndarray
    certificates: tuple
    holder_excess: np.ndarray
    searched: int = 0
    max_ratio: float = 0.0

    @property
    def yosida_evidence(self) -> bool:
        return len(self.scales) == 0

    def __len__(self) -> int:
        return len(self.scales)

    def g(self, k: int, w) -> np.ndarray:
        w = np.asarray(w, dtype=np.float64)
        return _eval(self.f, self.anchors[k] + self.centers[k] + self.scales[k] * w)

    def identity_residuals(self) -> np.ndarray:
        """|ρ_m^α σ(f_m(x_m), f_m(y_m)) - |x_m - y_m|^α| for each m."""
        fx = _eval(self.f, self.anchors + self.centers)
        fy = _eval(self.f, self.anchors + self.witnesses)
        sig = dist_spherical(fx, fy)
        sep = np.linalg.norm(self.centers - self.witnesses, axis=-1)
        return np.abs(self.scales**self.alpha * sig - sep**self.alpha)

    def rows(self) -> list:
        out = []
        for k in range(len(self)):
            c = self.certificates[k]
            out.append({"m": int(self.indices[k]), "rho": self.scales[k],
                        "M": self.sup_values[k],
                        "certificate": c.separation if c is not None else float("nan"),
                        "holder_excess": self.holder_excess[k]})
        return out


def _weighted(f: QRMap, a: np.ndarray, x: np.ndarray, y: np.ndarray, alpha: float,
              r: float) -> np.ndarray:
    sig = dist_spherical(_eval(f, a + x), _eval(f, a + y))
    sep = np.linalg.norm(x - y, axis=-1)
    wt = 1.0 - np.sum(x * x, axis=-1) / (r * r)
    with np.errstate(divide="ignore", invalid="ignore"):
        v = wt * sig / sep**alpha
    return np.where((sep > 0) & np.isfinite(v), v, -np.inf)


def _grid(n: int, r: float) -> np.ndarray:
    k = 33 if n == 2 else 13
    ax = np.linspace(-r, r, k)
    g = np.stack(np.meshgrid(*([ax] * n), indexing="ij"), axis=-1).reshape(-1, n)
    return g[np.linalg.norm(g, axis=-1) <= r]


def _search(f: QRMap, a: np.ndarray, alpha: float, r: float, refinement: int,
            seed: int, keep: int = 8) -> tuple:
    n = f.dim
    G = _grid(n, r)
    h = 2.0 * r / (32 if n == 2 else 12)
    # coarse stage: all grid pairs and short hops from each grid point
    i, j = np.triu_indices(len(G), 1)
    hops = []
    for e in np.concatenate([np.eye(n), -np.eye(n)]):
        for eps in (0.5 * h, 0.05 * h, 0.005 * h):
            hops.append(G + eps * e)
    cand_x = np.concatenate([G[i]] + [G] * len(hops))
    cand_y = np.concatenate([G[j]] + hops)
    inside = np.linalg.norm(cand_y, axis=-1) <= r
    cand_x, cand_y = cand_x[inside], cand_y[inside]
    vals = np.concatenate([_weighted(f, a, cand_x[s:s + 200_000], cand_y[s:s + 200_000], alpha, r)
                           for s in range(0, len(cand_x), 200_000)])
    top = np.argsort(-vals, kind="stable")[:keep]
    X, Y, V = cand_x[top].copy(), cand_y[top].copy(), vals[top].copy()
    # local stage: seeded random perturbations with a shrinking step
    rng = R.SplitMix64(seed)
    step = h
    for _ in range(refinement):
        sep = np.linalg.norm(X - Y, axis=-1)[:, None]
        sx = np.minimum(step, 0.5 * sep)
        dx = rng.normal(keep, n) * sx
        dy = rng.normal(keep, n) * sx
        Xn, Yn = X + dx, Y + dy
        ok = (np.linalg.norm(Xn, axis=-1) <= r) & (np.linalg.norm(Yn, axis=-1) <= r)
        Vn = np.where(ok, _weighted(f, a, Xn, Yn, alpha, r), -np.inf)
        better = Vn > V
        X[better], Y[better], V[better] = Xn[better], Yn[better], Vn[better]
        step *= 0.97
    b = int(np.argmax(V))
    return X[b], Y[b], float(V[b])


def zalcman_rescale(f: QRMap, alpha: Optional[float] = None, window: float = 1.0,
                    refinement: int = 200, seed: int = 0, witnesses=None,
                    threshold: float = 10.0, probes: int = 1000,
                    certificate_gap: float = 0.1, probe_radius: float = 1.0) -> RescalingSequence:
    """Zalcman rescaling of the translation family f_m(x) = f(x + a_m).

    The anchors a_m come from ``witnesses`` (:class:`Witness` objects from
    :func:`continuity_profile` or plain points).  For each anchor the
    weighted ratio (1 - |x|^2/r^2) σ(f_m(x), f_m(y)) / |x - y|^α is maximised
    over |x|, |y| <= r by a grid search followed by local refinement.  Anchors
    whose maximum M_m exceeds ``threshold`` give a rescaled map with
    ρ_m^α = |x_m - y_m|^α / σ(f_m(x_m), f_m(y_m)); the emitted sequence is
    ordered by decreasing ρ_m.  No such anchor means Yosida-evidence and an
    empty sequence.
    """
    if witnesses is None or len(witnesses) == 0:
        raise ParameterError("zalcman_rescale needs a nonempty witness list")
    alpha = f.alpha if alpha is None else float(alpha)
    if not 0.0 < alpha <= 1.0:
        raise ParameterError("alpha must lie in (0, 1]")
    n = f.dim
    pts = np.array([w.point if isinstance(w, Witness) else np.asarray(w, float)
                    for w in witnesses])
    if pts.shape[1] != n:
        raise ParameterError("witness dimension does not match the map")
    found = []
    best_ratio = 0.0
    for m, a in enumerate(pts):
        x, y, M = _search(f, a, alpha, window, refinement, R.hash_seed(seed, m))
        best_ratio = max(best_ratio, M)
        if M > threshold:
            sig = float(dist_spherical(_eval(f, a + x), _eval(f, a + y)))
            sep = float(np.linalg.norm(x - y))
            rho = (sep**alpha / sig) ** (1.0 / alpha)
            found.append((rho, m, a, x, y, M))
    found.sort(key=lambda t: -t[0])
    seq = []
    for item in found:
        if not seq or item[0] < seq[-1][0]:
            seq.append(item)

    certs, excess = [], []
    for k, (rho, m, a, x, y, M) in enumerate(seq):
        Rm = (window - np.linalg.norm(x)) / rho
        rp = min(probe_radius, Rm / 4.0)
        pr = R.SplitMix64(R.hash_seed(seed, 1_000_003, m))
        w1 = pr.ball(probes, n, rp)
        w2 = pr.ball(probes, n, rp)

        def g(w, a=a, x=x, rho=rho):
            return _eval(f, a + x + rho * w)

        s12 = dist_spherical(g(w1), g(w2))
        excess.append(float(np.max(s12 - 2.0 * np.linalg.norm(w1 - w2, axis=-1) ** alpha)))
        xi = (y - x) / rho
        s0 = float(dist_spherical(g(np.zeros(n)), g(xi)))
        if s0 >= certificate_gap:
            certs.append(Certificate(np.zeros(n), xi, s0))
        else:
            i = int(np.argmax(s12))
            certs.append(Certificate(w1[i], w2[i], float(s12[i]))
                         if s12[i] >= certificate_gap else None)

    def col(i, shape):
        return np.array([t[i] for t in seq]) if seq else np.zeros(shape)

    return RescalingSequence(f, alpha, window, col(1, (0,)).astype(int), col(2, (0, n)),
                             col(3, (0, n)), col(0, (0,)), col(4, (0, n)), col(5, (0,)),
                             tuple(certs), np.asarray(excess), len(pts), best_ratio)


# --------------------------------------------------------------------------
# orbits of families


@dataclass(frozen=True)
class OrbitProbe:
    verdict: str
    witness: int
    escape: np.ndarray
    orbit: np.ndarray
    tolerance: float


def _escape(metric: ConformalMetric, y: np.ndarray) -> np.ndarray:
    if metric.kind == "spherical":
        return np.zeros(len(y))
    if metric.kind == "hyperbolic-ball":
        return dist_hyperbolic(y, y[:1])
    region = metric.region
    if region is not None and region.proper:
        d = region.dist_to_boundary(y)
        d0 = d[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.log1p(np.linalg.norm(y - y[0], axis=-1) / np.minimum(d, d0))
        return np.where(d > 0, e, np.inf)
    return P.norm(y)


def orbit_compactness_probe(family: Sequence[QRMap], x0, metric_out: ConformalMetric,
                            tol: float = 0.5) -> OrbitProbe:
    """Does the orbit {f(x0) : f in family} stay in a compact part of the range?

    The escape coordinate is |y| in R^n, the hyperbolic distance from the
    first orbit point in the ball, and the j-distance
    log(1 + |y - y_0| / min(d(y), d(y_0))) in other proper regions; the
    sphere is compact, so every orbit there is bounded.  The verdict is
    unbounded when the escape coordinate over the second half of the family
    exceeds its max over the first half by more than ``tol``; the witness
    is the member with the largest escape coordinate.
    """
    if len(family) == 0:
        raise ParameterError("the family is empty")
    x0 = np.asarray(x0, dtype=np.float64)
    ys = np.array([evaluate(g, x0) for g in family])
    e = _escape(metric_out, ys)
    h = max(len(e) // 2, 1)
    first = float(np.max(e[:h]))
    second = float(np.max(e[h:])) if len(e) > h else first
    unbounded = (not np.isfinite(second)) or second > first + tol
    verdict = "unbounded" if unbounded else "bounded"
    return OrbitProbe(verdict, int(np.argmax(e)), e, ys, tol)


def recentred_family(f: QRMap, isometries: Sequence[QRMap], x0=None) -> list:
    """The maps f∘A - f(A(x0)) for each isometry A."""
    n = f.dim
    base = np.zeros(n) if x0 is None else np.asarray(x0, dtype=np.float64)
    out = []
    for A in isometries:
        shift = _eval(f, A.func(base[None]))[0]

        def func(x, A=A, shift=shift):
            return f.func(A.func(x)) - shift

        out.append(QRMap("recentred", n, func, f.K, {"base": f.kind}, domain=A.domain))
    return out


def shifted_family(f: QRMap, vectors) -> list:
    """The maps x -> f(x) + v for each v."""
    out = []
    for v in np.atleast_2d(np.asarray(vectors, dtype=np.float64)):
        out.append(QRMap("shifted", f.dim, lambda x, v=v: f.func(x) + v, f.K,
                         {"base": f.kind}, domain=f.domain))
    return out
