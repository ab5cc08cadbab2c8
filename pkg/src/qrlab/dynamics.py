"""Julia-set evidence from spherical oscillation of iterates.

For a uniformly K-quasiregular map f with α = K^{1/(1-n)}, the indicator
at x is the max over a finite (m, r) grid of L(x, f^m, r) / r^α, where
L(x, g, r) is the largest σ(g(y), g(x)) over the spherical circle
σ(y, x) = r.  Points with indicator above the threshold are julia-evidence.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from . import points as P
from . import rng as R
from .errors import NumericError, ParameterError
from .maps import QRMap
from .metrics import dist_spherical, metric_sphere_sample, spherical, sphere_circle

DEFAULT_R = tuple(2.0 ** -k for k in range(1, 11))
DEFAULT_M = tuple(range(1, 21))
DEFAULT_THRESHOLD = 1e3


def L_value(f: QRMap, x, r: float, samples: int = 64, seed: int = 0) -> float:
    """Sampled L(x, f, r) = max σ(f(y), f(x)) over σ(y, x) = r."""
    if not 0.0 < r < np.pi:
        raise ParameterError("r must lie in (0, π)")
    if samples < 8:
        raise ParameterError("at least 8 samples are required")
    x = np.asarray(x, dtype=np.float64)
    y = metric_sphere_sample(spherical(f.dim), x, r, samples, seed)
    with np.errstate(all="ignore"):
        fy = P.normalize(f.func(y))
        fx = P.normalize(f.func(x[None]))
    return float(np.max(dist_spherical(fy, fx)))


def _check_lists(r_list, m_list) -> tuple:
    r = np.asarray(r_list, dtype=np.float64)
    m = np.asarray(m_list, dtype=int)
    if r.size == 0 or m.size == 0:
        raise ParameterError("r_list and m_list must be nonempty")
    if np.any(np.diff(r) >= 0) or r[0] >= np.pi or r[-1] <= 0:
        raise ParameterError("r_list must decrease within (0, π)")
    if np.any(np.diff(m) <= 0) or m[0] < 0:
        raise ParameterError("m_list must increase from a nonnegative start")
    return r, m


def _oscillation_table(f: QRMap, centers: np.ndarray, keys: np.ndarray, r: np.ndarray,
                       m: np.ndarray, samples: int) -> np.ndarray:
    """L(x_b, f^m, r) for a batch of centers; shape (B, len(m), len(r)).

    ``keys[b]`` is the base seed of center b; the circle of radius r[k] uses
    the stream keys[b] + k.
    """
    B, n = centers.shape
    K = r.size
    seeds = keys[:, None] + np.arange(K, dtype=np.uint64)[None, :]
    gauss = R.normal(seeds.reshape(-1), samples * (n + 1)).reshape(B * K, samples, n + 1)
    circ = sphere_circle(np.repeat(centers, K, axis=0), np.tile(r, B), gauss)
    pts = np.concatenate([centers[:, None, :], circ.reshape(B, K * samples, n)], axis=1)
    table = np.empty((B, m.size, K))
    y = pts.reshape(-1, n)
    done = 0
    for j, target in enumerate(m):
        for _ in range(target - done):
            with np.errstate(all="ignore"):
                y = P.normalize(f.func(y))
        done = target
        z = y.reshape(B, 1 + K * samples, n)
        d = dist_spherical(z[:, 1:, :], z[:, :1, :]).reshape(B, K, samples)
        if np.any(np.isnan(d)):
            b = int(np.argwhere(np.isnan(d))[0][0])
            raise NumericError(f"orbit evaluation failed at m = {target}, point index {b}")
        table[:, j, :] = d.max(axis=-1)
    return table


@dataclass(frozen=True)
class JuliaProbe:
    point: np.ndarray
    m_list: np.ndarray
    r_list: np.ndarray
    table: np.ndarray
    alpha: float
    threshold: float

    @property
    def ratios(self) -> np.ndarray:
        return self.table / self.r_list[None, :] ** self.alpha

    @property
    def indicator(self) -> float:
        return float(np.max(self.ratios))

    @property
    def classification(self) -> str:
        return "julia-evidence" if self.indicator > self.threshold else "fatou-evidence"

    def rows(self) -> list:
        rat = self.ratios
        return [{"m": int(mm), "r": rr, "L_hat": self.table[i, k], "ratio": rat[i, k]}
                for i, mm in enumerate(self.m_list) for k, rr in enumerate(self.r_list)]


def julia_indicator(f: QRMap, x, alpha: Optional[float] = None, r_list=DEFAULT_R,
                    m_list=DEFAULT_M, samples: int = 16, seed: int = 0,
                    threshold: float = DEFAULT_THRESHOLD) -> JuliaProbe:
    """Max of L(x, f^m, r) / r^α over the (m, r) grid at one point."""
    r, m = _check_lists(r_list, m_list)
    if samples < 8:
        raise ParameterError("at least 8 samples are required")
    alpha = f.alpha if alpha is None else float(alpha)
    x = np.asarray(x, dtype=np.float64)
    keys = np.array([R.as_seed(seed)], dtype=np.uint64)
    table = _oscillation_table(f, x[None], keys, r, m, samples)[0]
    return JuliaProbe(x, m, r, table, alpha, float(threshold))


@dataclass(frozen=True)
class JuliaGrid:
    """Indicators on a pixel grid; row 0 is the top edge of the window.

    ``window`` is (xmin, xmax, ymin, ymax) in the plane spanned by
    ``axes`` through ``origin`` (the plane itself when n = 2).
    """

    window: tuple
    resolution: tuple
    indicator: np.ndarray
    threshold: float
    seed: int
    alpha: float
    origin: np.ndarray
    axes: tuple

    @property
    def julia_mask(self) -> np.ndarray:
        return self.indicator > self.threshold

    def pixel_points(self) -> np.ndarray:
        return pixel_centers(self.window, self.resolution, self.origin, self.axes)

    def rows(self) -> list:
        pts = self.pixel_points()
        h, w = self.resolution[1], self.resolution[0]
        out = []
        for j in range(h):
            for i in range(w):
                p = pts[j, i]
                out.append({"row": j, "col": i, "x": p[self.axes[0]], "y": p[self.axes[1]],
                            "indicator": self.indicator[j, i],
                            "julia": int(self.indicator[j, i] > self.threshold)})
        return out


def pixel_centers(window, resolution, origin=None, axes=(0, 1)) -> np.ndarray:
    """Pixel-center points, shape (height, width, n)."""
    xmin, xmax, ymin, ymax = map(float, window)
    w, h = map(int, resolution)
    origin = np.zeros(2) if origin is None else np.asarray(origin, dtype=np.float64)
    xs = xmin + (np.arange(w) + 0.5) * (xmax - xmin) / w
    ys = ymax - (np.arange(h) + 0.5) * (ymax - ymin) / h
    pts = np.broadcast_to(origin, (h, w, origin.size)).copy()
    pts[..., axes[0]] = xs[None, :]
    pts[..., axes[1]] = ys[:, None]
    return pts


def julia_grid(f: QRMap, window, resolution=(256, 256), alpha: Optional[float] = None,
               r_list=DEFAULT_R, m_list=DEFAULT_M, samples: int = 16,
               threshold: float = DEFAULT_THRESHOLD, seed: int = 0, origin=None,
               axes=(0, 1), threads: int = 1, chunk: int = 2048) -> JuliaGrid:
    """Per-pixel :func:`julia_indicator` over a window.

    Pixel p (row-major) uses the same streams as ``julia_indicator`` with
    seed ``seed + p·len(r_list)``, so a pixel's value does not depend on the
    chunking or on ``threads``.
    """
    r, m = _check_lists(r_list, m_list)
    w, h = map(int, resolution)
    if w < 16 or h < 16:
        raise ParameterError("resolution must be at least 16 x 16")
    xmin, xmax, ymin, ymax = map(float, window)
    if not (xmax > xmin and ymax > ymin):
        raise ParameterError("window must have positive width and height")
    n = f.dim
    origin = np.zeros(n) if origin is None else np.asarray(origin, dtype=np.float64)
    if origin.size != n or len(set(axes)) != 2:
        raise ParameterError("origin and axes must describe a plane in the map's space")
    alpha = f.alpha if alpha is None else float(alpha)
    pts = pixel_centers(window, resolution, origin, axes).reshape(-1, n)
    keys = R.task_seeds(0, pts.shape[0]) * np.uint64(r.size) + R.as_seed(seed)

    def work(start: int) -> np.ndarray:
        sl = slice(start, start + chunk)
        t = _oscillation_table(f, pts[sl], keys[sl], r, m, samples)
        return np.max(t / r[None, None, :] ** alpha, axis=(1, 2))

    starts = range(0, pts.shape[0], chunk)
    if threads == 1:
        parts = [work(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=threads if threads > 0 else None) as ex:
            parts = list(ex.map(work, starts))
    ind = np.concatenate(parts).reshape(h, w)
    return JuliaGrid((xmin, xmax, ymin, ymax), (w, h), ind, float(threshold), int(seed),
                     alpha, origin, tuple(axes))
