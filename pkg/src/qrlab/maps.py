"""A zoo of quasiregular maps and isometry families.

Every map is a :class:`QRMap`: an immutable descriptor wrapping a vectorised
function ``(..., n) -> (..., n)`` together with its dimension, declared
dilatation ``K`` and the derived Hölder exponent ``alpha = K**(1/(1-n))``.
Points use the conventions of :mod:`qrlab.points` (non-finite rows are ∞).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from . import points as P
from .errors import DomainError, NumericError, ParameterError
from .metrics import (Region, box, dist_hyperbolic, dist_spherical, mobius_translate,
                      riemann_sphere, unit_ball, whole_space, half_space)
from .rng import SplitMix64

HALF_PI = 0.5 * np.pi


@dataclass(frozen=True, eq=False)
class QRMap:
    kind: str
    dim: int
    func: Callable[[np.ndarray], np.ndarray]
    K: float = 1.0
    params: Mapping = field(default_factory=dict)
    domain: Optional[Region] = None
    codomain: Optional[Region] = None
    poles: tuple = ()
    inverse_func: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.dim < 2:
            raise ParameterError("dimension must be at least 2")
        if not self.K >= 1.0:
            raise ParameterError(f"dilatation must be >= 1, got {self.K}")
        if self.domain is None:
            object.__setattr__(self, "domain", riemann_sphere(self.dim))
        if self.codomain is None:
            object.__setattr__(self, "codomain", riemann_sphere(self.dim))

    @property
    def alpha(self) -> float:
        return float(self.K ** (1.0 / (1.0 - self.dim)))

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def inverse(self, y) -> np.ndarray:
        if self.inverse_func is None:
            raise NotImplementedError(f"{self.kind} has no explicit inverse")
        return self.inverse_func(np.asarray(y, dtype=np.float64))

    def with_K(self, K: float) -> "QRMap":
        return QRMap(self.kind, self.dim, self.func, K, self.params, self.domain,
                     self.codomain, self.poles, self.inverse_func)


MapDescriptor = QRMap


def evaluate(f: QRMap, x) -> np.ndarray:
    """f(x) with a domain check; poles and overflow come back as ∞."""
    x = P.as_points(x)
    if x.shape[-1] != f.dim:
        raise DomainError(f"{f.kind} acts on R^{f.dim}, got points of length {x.shape[-1]}")
    if not np.all(f.domain.contains(x)):
        raise DomainError(f"point outside the domain of {f.kind}")
    with np.errstate(all="ignore"):
        y = f.func(x)
    return P.normalize(y)


# --------------------------------------------------------------------------
# elementary maps


def identity(n: int) -> QRMap:
    return QRMap("identity", n, lambda x: np.array(x, dtype=np.float64), 1.0,
                 inverse_func=lambda y: np.array(y, dtype=np.float64))


def constant(n: int, value=None) -> QRMap:
    value = np.zeros(n) if value is None else np.asarray(value, dtype=np.float64)

    def func(x):
        return np.broadcast_to(value, np.shape(x)).copy()

    return QRMap("constant", n, func, 1.0, {"value": value.tolist()})


def radial_power(t: float, n: int) -> QRMap:
    """f_t(x) = x |x|^(t-1), K = max(t, 1/t)^(n-1)."""
    if not t > 0:
        raise ParameterError("radial power exponent must be positive")
    if n < 2:
        raise ParameterError("dimension must be at least 2")

    def power(x, s):
        r = P.safe_norm(x)[..., None]
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            y = x * r ** (s - 1.0)
        return np.where(r > 0, y, 0.0)

    def func(x):
        inf = P.is_infinite(x)[..., None]
        return np.where(inf, np.inf, power(np.where(inf, 0.0, x), t))

    def inv(y):
        inf = P.is_infinite(y)[..., None]
        return np.where(inf, np.inf, power(np.where(inf, 0.0, y), 1.0 / t))

    K = max(t, 1.0 / t) ** (n - 1)
    return QRMap("radial-power", n, func, K, {"t": t}, inverse_func=inv)


def linear(matrix) -> QRMap:
    """x -> A x for an invertible matrix; K from its singular values."""
    A = np.asarray(matrix, dtype=np.float64)
    n = A.shape[0]
    s = np.linalg.svd(A, compute_uv=False)
    det = np.linalg.det(A)
    if abs(det) < 1e-300:
        raise ParameterError("linear map must be invertible")
    KO = s[0] ** n / abs(det)
    KI = abs(det) / s[-1] ** n
    Ainv = np.linalg.inv(A)

    def func(x):
        inf = P.is_infinite(x)[..., None]
        return np.where(inf, np.inf, np.where(inf, 0.0, x) @ A.T)

    def inv(y):
        inf = P.is_infinite(y)[..., None]
        return np.where(inf, np.inf, np.where(inf, 0.0, y) @ Ainv.T)

    return QRMap("linear", n, func, float(max(KO, KI, 1.0)), {"matrix": A.tolist()},
                 inverse_func=inv)


def stretch_family(K: float) -> QRMap:
    """The planar map x + iy -> Kx + iy."""
    f = linear(np.diag([K, 1.0]))
    return QRMap("stretch", 2, f.func, f.K, {"K": K}, inverse_func=f.inverse_func)


def translation(a) -> QRMap:
    a = np.asarray(a, dtype=np.float64)
    return QRMap("translation", a.size, lambda x: x + a, 1.0, {"a": a.tolist()},
                 domain=whole_space(a.size), codomain=whole_space(a.size),
                 inverse_func=lambda y: y - a)


def rotation(Q) -> QRMap:
    Q = np.asarray(Q, dtype=np.float64)
    if not np.allclose(Q @ Q.T, np.eye(Q.shape[0]), atol=1e-12):
        raise ParameterError("rotation matrix must be orthogonal")
    f = linear(Q)
    return QRMap("rotation", Q.shape[0], f.func, 1.0, {"matrix": Q.tolist()},
                 inverse_func=f.inverse_func)


# --------------------------------------------------------------------------
# Möbius maps


def mobius_ball_isometry(a) -> QRMap:
    """Orientation-preserving automorphism φ of the unit ball with φ(0) = a."""
    a = np.asarray(a, dtype=np.float64)
    if not np.linalg.norm(a) < 1.0:
        raise ParameterError("Möbius anchor must lie in the open unit ball")
    n = a.size
    return QRMap("mobius-ball", n, lambda x: mobius_translate(a, x), 1.0,
                 {"a": a.tolist()}, domain=unit_ball(n), codomain=unit_ball(n),
                 inverse_func=lambda y: mobius_translate(-a, y))


def mobius_ball_to_halfspace(n: int) -> QRMap:
    """A Möbius map of the unit ball onto {x_n > 0} sending e_n to ∞ and 0 to e_n."""
    e = np.eye(n)[-1]

    def inv_sphere(x):
        d = x - e
        r2 = np.sum(d * d, axis=-1, keepdims=True)
        return e + 2.0 * d / r2

    def func(x):
        g = inv_sphere(x)
        g[..., -1] = -g[..., -1]
        return g

    def inv(y):
        z = np.array(y, dtype=np.float64, copy=True)
        z[..., -1] = -z[..., -1]
        return inv_sphere(z)

    return QRMap("mobius-halfspace", n, func, 1.0, {}, domain=unit_ball(n),
                 codomain=half_space(n), poles=(tuple(e),), inverse_func=inv)


def _householder(v: np.ndarray) -> np.ndarray:
    v = v / np.linalg.norm(v)
    return np.eye(v.size) - 2.0 * np.outer(v, v)


def _sphere_rotation_to_south(p) -> np.ndarray:
    """Rotation R of R^{n+1} with R lift(p) = south pole; identity for p = 0."""
    p = np.asarray(p, dtype=np.float64)
    n = p.size
    q = P.lift(p)
    south = np.zeros(n + 1)
    south[-1] = -1.0
    if np.allclose(q, south, atol=0.0, rtol=0.0) or np.linalg.norm(q - south) < 1e-300:
        return np.eye(n + 1)
    H1 = _householder(q - south)
    H2 = np.eye(n + 1)
    H2[0, 0] = -1.0  # reflection fixing the south pole; restores orientation
    return H2 @ H1


def spherical_rotation(R) -> QRMap:
    """The isometry of (S^n, σ) induced by an orthogonal matrix of R^{n+1}."""
    R = np.asarray(R, dtype=np.float64)
    n = R.shape[0] - 1

    def func(x):
        return P.project(P.lift(x) @ R.T)

    def inv(y):
        return P.project(P.lift(y) @ R)

    return QRMap("spherical-rotation", n, func, 1.0, {"matrix": R.tolist()},
                 inverse_func=inv)


def spherical_isometry_to_zero(p) -> QRMap:
    """A σ-isometry A with A(p) = 0 (p may be ∞)."""
    p = np.asarray(p, dtype=np.float64)
    f = spherical_rotation(_sphere_rotation_to_south(p))
    return QRMap("spherical-isometry", p.size, f.func, 1.0, {"p": p.tolist()},
                 inverse_func=f.inverse_func)


def spherical_isometry_from_zero(a) -> QRMap:
    """A σ-isometry A with A(0) = a."""
    f = spherical_isometry_to_zero(a)
    return QRMap("spherical-isometry", f.dim, f.inverse_func, 1.0, {"a": f.params["p"]},
                 inverse_func=f.func)


# --------------------------------------------------------------------------
# Zorich maps (n = 3)


def _square_to_disk(a, b):
    """ℓ∞ -> ℓ2 radial map; returns (|v|, unit direction components)."""
    m = np.maximum(np.abs(a), np.abs(b))
    ell = np.hypot(a, b)
    with np.errstate(invalid="ignore", divide="ignore"):
        ua = np.where(ell > 0, a / ell, 0.0)
        ub = np.where(ell > 0, b / ell, 0.0)
    return m, ua, ub


def _zorich(x):
    a, b, c = x[..., 0], x[..., 1], x[..., 2]
    ka = np.round(a / np.pi)
    kb = np.round(b / np.pi)
    a1 = (a - ka * np.pi) * np.where(ka % 2 == 0, 1.0, -1.0)
    b1 = (b - kb * np.pi) * np.where(kb % 2 == 0, 1.0, -1.0)
    sign = np.where((ka + kb) % 2 == 0, 1.0, -1.0)
    s, ua, ub = _square_to_disk(a1, b1)
    with np.errstate(over="ignore"):
        scale = np.exp(c)
    sn = np.sin(s)
    out = np.stack([scale * sn * ua, scale * sn * ub, scale * sign * np.cos(s)], axis=-1)
    return out


def _zorich_inverse(p):
    p = np.asarray(p, dtype=np.float64)
    r = P.safe_norm(p)
    with np.errstate(invalid="ignore", divide="ignore"):
        u = p / r[..., None]
    horiz = np.hypot(u[..., 0], u[..., 1])
    s = np.arctan2(horiz, u[..., 2])
    with np.errstate(invalid="ignore", divide="ignore"):
        da = np.where(horiz > 0, u[..., 0] / horiz, 0.0)
        db = np.where(horiz > 0, u[..., 1] / horiz, 0.0)
        m = np.maximum(np.abs(da), np.abs(db))
        k = np.where(m > 0, s / np.where(m > 0, m, 1.0), 0.0)
    return np.stack([da * k, db * k, np.log(r)], axis=-1)


def _beam(n=3) -> Region:
    def bd(x):
        return np.minimum(HALF_PI - np.abs(x[..., 0]), HALF_PI - np.abs(x[..., 1]))

    return Region("beam", 3, boundary_distance=bd, description="beam |a|,|b| < π/2")


def measure_dilatation(f: QRMap, pts: np.ndarray, h: float | None = None) -> float:
    """Largest max(K_O, K_I) over sample points where the Jacobian is positive."""
    d = distortion(f, pts, h)
    ok = d["J"] > 1e-12
    if not np.any(ok):
        raise NumericError("no sample point with positive Jacobian")
    return float(np.max(np.maximum(d["K_O"][ok], d["K_I"][ok])))


_ZORICH_K: dict = {}


def _zorich_K(cells: int = 400) -> float:
    # Dilatation does not depend on c and is symmetric in a and b, so a grid
    # over one quadrant of the slice c = 0 running up to the corner suffices.
    if "K" not in _ZORICH_K:
        t = np.linspace(0.0, 0.5 * np.pi * (1.0 - 1e-4), cells + 1)
        a, b = np.meshgrid(t, t, indexing="ij")
        pts = np.column_stack([a.ravel(), b.ravel(), np.zeros(a.size)])
        raw = QRMap("zorich", 3, _zorich, 1.0, domain=whole_space(3))
        _ZORICH_K["K"] = max(1.0, measure_dilatation(raw, pts))
    return _ZORICH_K["K"]


def zorich() -> QRMap:
    """A Zorich map of R^3.

    On the beam |a|, |b| < π/2 it is e^c h(v(a, b)) with v the radial
    square-to-disk map onto the disk of radius π/2 and
    h(v) = (sin|v| v/|v|, cos|v|); horizontal slices go onto hemispheres of
    radius e^c.  Reflection in the beam's side faces corresponds to
    reflection in the plane x_3 = 0, which extends the map to all of R^3.
    The declared K is the largest dilatation measured on a grid over the beam.
    """
    return QRMap("zorich", 3, _zorich, _zorich_K(), {}, domain=whole_space(3),
                 inverse_func=_zorich_inverse)


def zorich_inverse(p) -> np.ndarray:
    """Inverse of the beam branch, from the open upper half-space onto the beam."""
    p = P.as_points(p)
    if p.shape[-1] != 3 or np.any(P.is_infinite(p)) or np.any(p[..., 2] <= 0.0):
        raise DomainError("zorich_inverse is defined on the open upper half-space of R^3")
    return _zorich_inverse(p)


def zorich_bloch() -> QRMap:
    """x -> Z^{-1}(x + e_3) on the unit ball of R^3; its image lies in the beam."""
    e3 = np.array([0.0, 0.0, 1.0])

    def func(x):
        return _zorich_inverse(x + e3)

    def inv(y):
        return _zorich(y) - e3

    return QRMap("zorich-bloch", 3, func, _zorich_K(), {}, domain=unit_ball(3),
                 codomain=_beam(), inverse_func=inv)


# --------------------------------------------------------------------------
# planar maps via complex arithmetic


def _to_complex(x):
    return x[..., 0] + 1j * x[..., 1]


def _from_complex(z):
    out = np.stack([z.real, z.imag], axis=-1)
    bad = ~np.isfinite(z) | (np.abs(z) > P.OVERFLOW)
    out[bad] = np.inf
    return out


def _complex_map(fn):
    def func(x):
        inf = P.is_infinite(x)
        z = _to_complex(np.where(inf[..., None], 0.0, x))
        with np.errstate(all="ignore"):
            w = fn(z, inf)
        return _from_complex(w)

    return func


def planar_polynomial(coeffs: Sequence[complex]) -> QRMap:
    """p(z) = sum_k coeffs[k] z^k, acting on R^2 ∪ {∞} (lowest degree first)."""
    c = np.asarray(coeffs, dtype=np.complex128)
    c = np.trim_zeros(c, "b")
    if c.size == 0:
        c = np.zeros(1, dtype=np.complex128)
    degree = c.size - 1
    rev = c[::-1]

    def fn(z, inf):
        w = np.full(z.shape, rev[0], dtype=np.complex128)
        for a in rev[1:]:
            w = w * z + a
            w = np.where(np.abs(w) > P.OVERFLOW, np.inf, w)
        if degree >= 1:
            w = np.where(inf, np.inf, w)
        else:
            w = np.where(inf, rev[0], w)
        return w

    return QRMap("planar-polynomial", 2, _complex_map(fn), 1.0,
                 {"coeffs": [[v.real, v.imag] for v in c]})


def complex_exp() -> QRMap:
    """e^z on the plane (essential singularity at ∞, so ∞ is excluded)."""

    def fn(z, inf):
        return np.exp(z)

    return QRMap("exp", 2, _complex_map(fn), 1.0, {}, domain=whole_space(2))


def exp_exp() -> QRMap:
    """e^{e^z}: 1-quasiregular, of infinite order."""

    def fn(z, inf):
        w = np.exp(z)
        big = w.real > 700.0
        out = np.exp(np.where(big, 0.0, w))
        return np.where(big, np.inf, out)

    return QRMap("exp-exp", 2, _complex_map(fn), 1.0, {}, domain=whole_space(2))


def qc_conjugate(base: QRMap, stretch) -> QRMap:
    """ψ ∘ f ∘ ψ^{-1} for the diagonal map ψ = diag(stretch); K = K(ψ)^2 K(f)."""
    s = np.asarray(stretch, dtype=np.float64)
    if s.ndim == 2:
        if np.any(s != np.diag(np.diag(s))):
            raise ParameterError("stretch must be diagonal")
        s = np.diag(s)
    if s.size != base.dim:
        raise ParameterError("stretch dimension does not match the map")
    if np.any(s <= 0):
        raise ParameterError("stretch entries must be positive")
    psi = linear(np.diag(s))

    def func(x):
        return psi.func(base.func(psi.inverse_func(x)))

    inv = None
    if base.inverse_func is not None:
        def inv(y):
            return psi.func(base.inverse_func(psi.inverse_func(y)))

    return QRMap("qc-conjugate", base.dim, func, psi.K**2 * base.K,
                 {"base": base.kind, "stretch": s.tolist(), **dict(base.params)},
                 inverse_func=inv)


def piecewise_linear(m: int) -> QRMap:
    """f_m(x, y) = (p_m(x), y) on the square (-1, 1)^2 (m >= 2)."""
    if m < 2:
        raise ParameterError("the piecewise-linear family starts at m = 2")

    def func(x):
        u = x[..., 0]
        pu = np.where(u <= 0.0, u,
                      np.where(u < 0.5, 2.0 * (m - 1) * u / m, (2.0 * u + m - 2.0) / m))
        return np.stack([pu, x[..., 1]], axis=-1)

    square = box([-1.0, -1.0], [1.0, 1.0])
    K = float(max(2.0 * (m - 1) / m, m / (2.0 * (m - 1)), 2.0 / m, m / 2.0))
    return QRMap("piecewise-linear", 2, func, K, {"m": m}, domain=square, codomain=square)


# --------------------------------------------------------------------------
# distortion


@dataclass(frozen=True)
class DistortionSample:
    jacobian: np.ndarray
    J: float
    opnorm: float
    minnorm: float
    K_O: float
    K_I: float


def jacobians(f: QRMap, pts, h: float | None = None) -> np.ndarray:
    """Central-difference Jacobian matrices, shape (..., n, n)."""
    x = np.asarray(pts, dtype=np.float64)
    n = f.dim
    if h is None:
        step = 1e-5 * np.maximum(1.0, P.safe_norm(x))
    else:
        step = np.full(x.shape[:-1], float(h))
    cols = []
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        d = step[..., None] * e
        with np.errstate(all="ignore"):
            fp = f.func(x + d)
            fm = f.func(x - d)
            cols.append((fp - fm) / (2.0 * step[..., None]))
    return np.stack(cols, axis=-1)


def distortion(f: QRMap, pts, h: float | None = None) -> dict:
    Jm = jacobians(f, pts, h)
    n = f.dim
    ok = np.all(np.isfinite(Jm), axis=(-2, -1))
    safe = np.where(ok[..., None, None], Jm, 0.0)
    s = np.linalg.svd(safe, compute_uv=False)
    J = np.linalg.det(safe)
    with np.errstate(divide="ignore", invalid="ignore"):
        KO = s[..., 0] ** n / J
        KI = J / s[..., -1] ** n
    return {"jacobian": Jm, "J": np.where(ok, J, np.nan), "opnorm": s[..., 0],
            "minnorm": s[..., -1], "K_O": KO, "K_I": KI, "ok": ok}


def numeric_jacobian(f: QRMap, x, h: float | None = None) -> DistortionSample:
    """Distortion data of ``f`` at one interior point."""
    x = np.asarray(x, dtype=np.float64)
    if h is not None and not h > 0:
        raise ParameterError("finite-difference step must be positive")
    if not f.domain.contains(x):
        raise DomainError("numeric_jacobian needs an interior point")
    d = distortion(f, x[None], h)
    if not d["ok"][0]:
        raise NumericError(f"evaluation of {f.kind} failed inside the stencil at {x}")
    return DistortionSample(d["jacobian"][0], float(d["J"][0]), float(d["opnorm"][0]),
                            float(d["minnorm"][0]), float(d["K_O"][0]), float(d["K_I"][0]))


# --------------------------------------------------------------------------
# iteration


def orbit(f: QRMap, x, m: int) -> np.ndarray:
    """f^m(x); moduli beyond 1e300 are replaced by ∞ and iteration continues."""
    if m < 0:
        raise ParameterError("iteration count must be nonnegative")
    y = P.normalize(P.as_points(x))
    for _ in range(m):
        with np.errstate(all="ignore"):
            y = P.normalize(f.func(y))
    return y


# --------------------------------------------------------------------------
# isometry families


@dataclass(frozen=True)
class IsometrySampler:
    """Isometries A of a space with A(0) = a (or A(x) = x + a).

    ``kind`` is ``hyperbolic`` (ball automorphisms), ``translation`` or
    ``spherical`` (rotations of S^n).  Random anchors are drawn with
    :meth:`anchors`: hyperbolic anchors have |a| spread over levels up to
    ``spread`` (< 1), translation anchors fill the cube [-spread, spread]^n.
    """

    kind: str
    dim: int
    seed: int = 0
    spread: float = 0.99

    def __post_init__(self):
        if self.kind not in ("hyperbolic", "translation", "spherical"):
            raise ParameterError(f"unknown isometry family {self.kind!r}")

    def anchors(self, count: int) -> np.ndarray:
        rng = SplitMix64(self.seed)
        if self.kind == "hyperbolic":
            d = rng.directions(count, self.dim)
            # hyperbolic radius uniform up to that of `spread`
            tmax = np.arctanh(self.spread)
            return d * np.tanh(tmax * rng.uniform(count))[:, None]
        if self.kind == "translation":
            return (2.0 * rng.uniform(count, self.dim) - 1.0) * self.spread
        return P.project(rng.directions(count, self.dim + 1))

    def isometry(self, a) -> QRMap:
        a = np.asarray(a, dtype=np.float64)
        if self.kind == "hyperbolic":
            if not np.linalg.norm(a) < 1.0:
                raise DomainError("hyperbolic anchor outside the unit ball")
            return mobius_ball_isometry(a)
        if self.kind == "translation":
            if np.any(P.is_infinite(a)):
                raise DomainError("translation anchor must be finite")
            return translation(a)
        return spherical_isometry_from_zero(a)

    def metric_check(self, A: QRMap, count: int = 200, tol: float = 1e-9) -> bool:
        """Whether A preserves the space's distance on seeded pairs."""
        rng = SplitMix64(self.seed ^ 0x5EED)
        if self.kind == "hyperbolic":
            x = rng.ball(count, self.dim, 0.95)
            y = rng.ball(count, self.dim, 0.95)
            d0 = dist_hyperbolic(x, y)
            d1 = dist_hyperbolic(A.func(x), A.func(y))
        elif self.kind == "translation":
            x = rng.ball(count, self.dim, 10.0)
            y = rng.ball(count, self.dim, 10.0)
            d0 = np.linalg.norm(x - y, axis=-1)
            d1 = np.linalg.norm(A.func(x) - A.func(y), axis=-1)
        else:
            x = P.project(rng.directions(count, self.dim + 1))
            y = P.project(rng.directions(count, self.dim + 1))
            d0 = dist_spherical(x, y)
            d1 = dist_spherical(A.func(x), A.func(y))
        return bool(np.all(np.abs(d1 - d0) <= tol * np.maximum(1.0, d0)))


def sample_isometries(sampler: IsometrySampler, anchors) -> list:
    return [sampler.isometry(a) for a in np.atleast_2d(np.asarray(anchors, dtype=np.float64))]
