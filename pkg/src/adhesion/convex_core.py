"""Convex-analysis and small computational-geometry kernel.

Everything here acts on finite sets of momenta.  Directional derivatives of
the limit potential are minima of linear forms over such sets, and the limit
velocity is the center of their minimal enclosing ball.
"""

from __future__ import annotations

import functools
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "PLUS_INFINITY",
    "Ball",
    "DegenerateConfigurationError",
    "DimensionMismatchError",
    "MomentumSet",
    "UnsupportedDimensionError",
    "circumcenter",
    "directional_min",
    "legendre_lagrangian",
    "min_enclosing_ball",
    "spacetime_directional_derivative",
    "triangle_cosines",
]

#: Tie tolerance for ball containment, relative to the coordinate scale.
BALL_TIE_RTOL = 1e-12
#: Support-set membership tolerance, relative to the coordinate scale.
BALL_SUPPORT_RTOL = 1e-9
#: Collinearity / cocircularity tolerance, relative to scale**2.
DEGENERACY_RTOL = 1e-10

_EXACT_SUBSET_LIMIT = 200_000


class DimensionMismatchError(ValueError):
    pass


class UnsupportedDimensionError(ValueError):
    pass


class DegenerateConfigurationError(ValueError):
    pass


@functools.total_ordering
class _PlusInfinity:
    """The extended-real value ``+inf`` (Legendre transforms take it)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "PLUS_INFINITY"

    def __float__(self):
        return math.inf

    def __eq__(self, other):
        return other is self or (isinstance(other, float) and other == math.inf)

    def __hash__(self):
        return hash(math.inf)

    def __lt__(self, other):
        return False

    def __gt__(self, other):
        return not self.__eq__(other)

    def __add__(self, other):
        if isinstance(other, (int, float, np.floating)) and other == -math.inf:
            raise ValueError("+inf + -inf is undefined")
        return self

    __radd__ = __add__

    def __sub__(self, other):
        if other is self:
            raise ValueError("+inf - +inf is undefined")
        return self


PLUS_INFINITY = _PlusInfinity()


def _as_points(points, dim=None) -> np.ndarray:
    arr = np.asarray(points, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None] if dim == 1 else arr[None, :]
    if arr.ndim != 2:
        raise ValueError("points must form a 2-d array")
    return arr


@dataclass(frozen=True)
class MomentumSet:
    """Nonempty finite set of ``d``-dimensional momenta.

    Exact duplicates are removed on construction (first occurrence wins, so
    the order of distinct elements is preserved).
    """

    elements: np.ndarray

    def __post_init__(self):
        arr = _as_points(self.elements)
        if arr.shape[0] == 0:
            raise ValueError("MomentumSet must be nonempty")
        if not np.all(np.isfinite(arr)):
            raise ValueError("momenta must be finite")
        seen = {}
        for row in arr:
            seen.setdefault(tuple(row.tolist()), row)
        arr = np.array(list(seen.values()), dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "elements", arr)

    @classmethod
    def of(cls, *momenta) -> "MomentumSet":
        return cls(np.array(momenta, dtype=float).reshape(len(momenta), -1))

    @property
    def dim(self) -> int:
        return self.elements.shape[1]

    def __len__(self):
        return self.elements.shape[0]

    def __iter__(self):
        return iter(self.elements)

    def scale(self) -> float:
        """Coordinate scale used to make tolerances relative."""
        spread = float(np.max(np.abs(self.elements - self.elements.mean(axis=0))))
        return max(spread, float(np.max(np.abs(self.elements))), 1e-300)

    def translated(self, shift) -> "MomentumSet":
        return MomentumSet(self.elements + np.asarray(shift, dtype=float))


def _coerce_set(S) -> MomentumSet:
    return S if isinstance(S, MomentumSet) else MomentumSet(S)


@dataclass(frozen=True)
class Ball:
    center: np.ndarray
    radius: float
    #: indices (into the generating set) of the points on the boundary sphere
    support: tuple[int, ...] = field(default=())

    def __post_init__(self):
        c = np.array(self.center, dtype=float).reshape(-1)
        c.setflags(write=False)
        object.__setattr__(self, "center", c)
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")

    def contains(self, point, tol: float = 0.0) -> bool:
        return bool(np.linalg.norm(np.asarray(point, dtype=float) - self.center)
                    <= self.radius + tol)


def _circumballs(points: np.ndarray, combos: np.ndarray):
    """Circumscribed balls of point subsets, restricted to their affine hulls.

    Returns centers, squared radii, barycentric coordinates and a mask of
    affinely independent subsets.
    """
    base = points[combos[:, 0]]
    k = combos.shape[1]
    if k == 1:
        return base, np.zeros(len(combos)), np.ones((len(combos), 1)), np.ones(len(combos), bool)
    D = points[combos[:, 1:]] - base[:, None, :]
    G = D @ np.swapaxes(D, 1, 2)
    diag = np.einsum("mii->mi", G)
    det = np.linalg.det(G)
    ok = det > DEGENERACY_RTOL * np.prod(diag, axis=1)
    mu = np.zeros((len(combos), k - 1))
    if np.any(ok):
        mu[ok] = np.linalg.solve(G[ok], 0.5 * diag[ok][..., None])[..., 0]
    centers = base + np.einsum("mj,mjd->md", mu, D)
    r2 = np.sum((centers - base) ** 2, axis=1)
    bary = np.concatenate([1.0 - mu.sum(axis=1, keepdims=True), mu], axis=1)
    return centers, r2, bary, ok


def _support_of(points, center, radius, scale):
    d = np.linalg.norm(points - center, axis=1)
    return tuple(int(i) for i in np.flatnonzero(np.abs(d - radius) <= BALL_SUPPORT_RTOL * scale))


def _ball_exact(points: np.ndarray, scale: float) -> Ball:
    n, d = points.shape
    tie = BALL_TIE_RTOL * scale
    best = None
    for k in range(1, min(n, d + 1) + 1):
        combos = np.array(list(itertools.combinations(range(n), k)), dtype=int)
        centers, r2, bary, ok = _circumballs(points, combos)
        ok &= np.all(bary >= -1e-12, axis=1)
        if not np.any(ok):
            continue
        centers, r2 = centers[ok], r2[ok]
        r = np.sqrt(r2)
        dist = np.linalg.norm(points[None, :, :] - centers[:, None, :], axis=2)
        enclosing = np.all(dist <= r[:, None] + tie, axis=1)
        if not np.any(enclosing):
            continue
        j = int(np.argmin(np.where(enclosing, r, np.inf)))
        if best is None or r[j] < best[1] - tie:
            best = (centers[j], float(r[j]))
    center, radius = best
    return Ball(center, radius, _support_of(points, center, radius, scale))


def _ball_welzl(points: np.ndarray, scale: float) -> Ball:
    """Move-to-front randomized incremental method (deterministic shuffle)."""
    n, d = points.shape
    tie = BALL_TIE_RTOL * scale
    order = list(np.random.default_rng(0).permutation(n))

    def from_boundary(R):
        if not R:
            return np.zeros(d), -1.0
        combos = np.array([R], dtype=int)
        c, r2, _, ok = _circumballs(points, combos)
        if not ok[0]:
            # affinely dependent boundary: fall back to the exact search on R
            b = _ball_exact(points[R], scale)
            return b.center, b.radius
        return c[0], float(np.sqrt(r2[0]))

    def mtf(m, R):
        c, r = from_boundary(R)
        if len(R) == d + 1:
            return c, r
        i = 0
        while i < m:
            p = order[i]
            if r < 0 or np.linalg.norm(points[p] - c) > r + tie:
                c, r = mtf(i, R + [p])
                order.insert(0, order.pop(i))
            i += 1
        return c, r

    center, radius = mtf(n, [])
    return Ball(center, radius, _support_of(points, center, radius, scale))


def min_enclosing_ball(S, method: str = "auto") -> Ball:
    """Smallest ball containing a finite momentum set.

    The default exact method enumerates support subsets of size at most
    ``d + 1``; ``method="welzl"`` uses the randomized incremental algorithm,
    which ``"auto"`` picks only when the enumeration would be large.
    """
    S = _coerce_set(S)
    pts = S.elements
    n, d = pts.shape
    if d > 3:
        raise UnsupportedDimensionError(f"minimal enclosing ball supports d <= 3, got d={d}")
    scale = S.scale()
    if n == 1:
        return Ball(pts[0], 0.0, (0,))
    if method == "auto":
        method = "exact" if math.comb(n, min(n, d + 1)) <= _EXACT_SUBSET_LIMIT else "welzl"
    if method == "exact":
        return _ball_exact(pts, scale)
    if method == "welzl":
        return _ball_welzl(pts, scale)
    raise ValueError(f"unknown method {method!r}")


def circumcenter(p1, p2, p3) -> np.ndarray:
    """Center of the circle through three points (in their affine plane)."""
    pts = np.array([p1, p2, p3], dtype=float)
    if pts.ndim != 2:
        raise ValueError("points must be vectors")
    scale = max(float(np.max(np.abs(pts - pts.mean(axis=0)))), 1e-300)
    D = pts[1:] - pts[0]
    G = D @ D.T
    area2 = math.sqrt(max(np.linalg.det(G), 0.0))  # twice the triangle area
    if area2 <= DEGENERACY_RTOL * scale * scale:
        raise DegenerateConfigurationError("circumcenter of collinear points")
    mu = np.linalg.solve(G, 0.5 * np.diag(G))
    return pts[0] + mu @ D


def triangle_cosines(p1, p2, p3) -> np.ndarray:
    """Cosines of the interior angles at ``p1``, ``p2``, ``p3``."""
    pts = np.array([p1, p2, p3], dtype=float)
    out = np.empty(3)
    for i in range(3):
        u = pts[(i + 1) % 3] - pts[i]
        v = pts[(i + 2) % 3] - pts[i]
        nu, nv = np.linalg.norm(u), np.linalg.norm(v)
        if nu == 0 or nv == 0:
            raise DegenerateConfigurationError("triangle has coincident vertices")
        out[i] = float(u @ v) / (nu * nv)
    return out


def _check_direction(S: MomentumSet, q) -> np.ndarray:
    q = np.atleast_1d(np.asarray(q, dtype=float))
    if q.shape[-1] != S.dim:
        raise DimensionMismatchError(f"direction has dimension {q.shape[-1]}, set has {S.dim}")
    return q


def directional_min(S, q) -> float:
    """``min_{p in S} p . q`` (the same over the convex hull of ``S``)."""
    S = _coerce_set(S)
    q = _check_direction(S, q)
    return float(np.min(S.elements @ q))


def spacetime_directional_derivative(S, U_star: float, q, tau: float) -> float:
    """``min_{p in S} (p . q - tau |p|^2 / 2) - U_star tau``."""
    S = _coerce_set(S)
    q = _check_direction(S, q)
    P = S.elements
    return float(np.min(P @ q - 0.5 * tau * np.sum(P * P, axis=1)) - U_star * tau)


def legendre_lagrangian(q, tau: float):
    """Legendre transform of ``h(p, sigma) = |p|^2/2 + sigma``.

    ``|q|^2 / 2`` on the slice ``tau == 1`` and :data:`PLUS_INFINITY` elsewhere.
    """
    if tau != 1:
        return PLUS_INFINITY
    q = np.atleast_1d(np.asarray(q, dtype=float))
    return 0.5 * float(q @ q)


def as_momentum_set(points: Iterable[Sequence[float]] | np.ndarray) -> MomentumSet:
    return _coerce_set(points)
