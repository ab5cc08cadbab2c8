"""Points of the extended space R^n ∪ {∞}.

A point is a float array whose last axis holds the n coordinates.  The point
at infinity is any row containing a non-finite entry; :func:`infinity`
returns the canonical form (all entries ``inf``).  Every helper works on
batches of shape ``(..., n)``.
"""

from __future__ import annotations

import numpy as np

OVERFLOW = 1e300


def as_points(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 0:
        raise ValueError("a point needs at least one coordinate")
    return x


def infinity(n: int) -> np.ndarray:
    return np.full(n, np.inf)


def is_infinite(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return ~np.all(np.isfinite(x), axis=-1)


def safe_norm(x) -> np.ndarray:
    """Euclidean norm along the last axis, free of overflow and underflow.

    Non-finite rows give ``inf`` or ``nan``.
    """
    x = np.asarray(x, dtype=np.float64)
    r = np.abs(x[..., 0])
    for k in range(1, x.shape[-1]):
        r = np.hypot(r, x[..., k])
    return r


def norm(x) -> np.ndarray:
    """Euclidean norm; ``inf`` at the point at infinity."""
    r = safe_norm(x)
    return np.where(np.isfinite(r), r, np.inf)


def normalize(x, limit: float = OVERFLOW) -> np.ndarray:
    """Canonicalise: rows that are non-finite or beyond ``limit`` become ∞."""
    x = np.array(x, dtype=np.float64, copy=True)
    big = ~(safe_norm(x) <= limit)
    x[big] = np.inf
    return x


def chart_swap(x) -> np.ndarray:
    """Inversion x -> x/|x|^2, exchanging 0 and ∞ (a spherical isometry)."""
    x = np.asarray(x, dtype=np.float64)
    inf = is_infinite(x)
    safe = np.where(inf[..., None], 1.0, x)
    r = safe_norm(safe)[..., None]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = (safe / r) / r
    out = np.where((r == 0.0) | ~np.isfinite(out), np.inf, out)
    return np.where(inf[..., None], 0.0, out)


def lift(x) -> np.ndarray:
    """Inverse stereographic projection onto the unit sphere S^n ⊂ R^{n+1}.

    0 goes to the south pole (0, ..., 0, -1) and ∞ to the north pole.
    """
    x = np.asarray(x, dtype=np.float64)
    r = safe_norm(x)
    r = np.where(np.isnan(r), np.inf, r)[..., None]
    big = r > 1.0
    # with s = min(r, 1/r) and w = x or x/r^2 every quantity stays bounded
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        inv = np.where(big, 1.0 / r, 1.0)
        s = np.where(big, inv, r)
        horiz = (x * inv) * (2.0 * inv / (1.0 + s * s))
    horiz[np.broadcast_to(np.isinf(r), horiz.shape)] = 0.0
    vert = (1.0 - s * s) / (1.0 + s * s)
    vert = np.where(big, vert, -vert)
    return np.concatenate([horiz, vert], axis=-1)


def project(q) -> np.ndarray:
    """Stereographic projection S^n -> R^n ∪ {∞}; inverse of :func:`lift`."""
    q = np.asarray(q, dtype=np.float64)
    q = q / np.linalg.norm(q, axis=-1, keepdims=True)
    h, t = q[..., :-1], q[..., -1:]
    # x = h / (1 - t); use 1 - t = |h|^2 / (1 + t) when t is close to -1
    with np.errstate(divide="ignore", invalid="ignore"):
        hh = np.sum(h * h, axis=-1, keepdims=True)
        denom = np.where(t < 0.0, 1.0 - t, hh / (1.0 + t))
        x = h / denom
    bad = (denom[..., 0] <= 0.0) | ~np.all(np.isfinite(x), axis=-1)
    return np.where(bad[..., None], np.inf, x)
