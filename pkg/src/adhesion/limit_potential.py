"""Representations of the inviscid limit potential and its momentum sets.

Every model exposes its locally minimal smooth *branches* at a point
``(x, t)``: a key identifying the branch, its value and its momentum
(spatial gradient).  The limit potential is the minimum over branches, the
set ``k_{x,t}`` consists of the momenta of the branches attaining it, and
the limit velocity is the center of their minimal enclosing ball.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import optimize

from .convex_core import (
    DEGENERACY_RTOL,
    DegenerateConfigurationError,
    MomentumSet,
    min_enclosing_ball,
    spacetime_directional_derivative,
    triangle_cosines,
)
from .fourier import FourierSeries

__all__ = [
    "A3EndpointModel",
    "A3ShockHalfplane",
    "AffineBranch",
    "Branch",
    "FiniteMinFamily",
    "GenericityError",
    "HopfLaxPotential",
    "InvalidModelError",
    "LocalLinearModel",
    "PotentialModel",
    "QuadraticBranch",
    "TangentReport",
    "a3_shock_halfplane",
    "a3_tangent_check",
    "active_momenta",
    "check_planar_genericity",
    "extract_a3_model",
    "hopf_lax_eval",
    "limit_velocity",
    "local_model_derivative",
]

#: relative tolerance for branch activation
ACTIVE_RTOL = 1e-6
#: an angle counts as right when |cos| is below this
RIGHT_ANGLE_TOL = 1e-9


class InvalidModelError(ValueError):
    pass


class GenericityError(DegenerateConfigurationError):
    """Momentum configuration violates a genericity condition.

    ``condition`` is one of ``"three collinear"``, ``"four cocircular"``,
    ``"right triangle"`` or ``"coincident momenta"``.
    """

    def __init__(self, condition: str, indices: tuple = ()):
        self.condition = condition
        self.indices = tuple(indices)
        super().__init__(f"non-generic momenta: {condition} {self.indices}")


def _point(x, dim: int | None = None) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float)).reshape(-1)
    if dim is not None and x.size != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.size}")
    return x


@dataclass(frozen=True)
class Branch:
    key: object
    value: float
    momentum: np.ndarray


class PotentialModel:
    """Common interface of the limit-potential representations."""

    #: whether branch keys vary continuously (matched by proximity) or are labels
    continuous_keys: bool = False
    dim: int

    def branches(self, x, t) -> list[Branch]:
        raise NotImplementedError

    def value_scale(self) -> float:
        return 1.0

    def value(self, x, t) -> float:
        return min(b.value for b in self.branches(x, t))

    def default_tol(self) -> float:
        return ACTIVE_RTOL * self.value_scale()

    def active_branches(self, x, t, tol: float | None = None, branches=None) -> list[Branch]:
        brs = self.branches(x, t) if branches is None else branches
        tol = self.default_tol() if tol is None else tol
        vmin = min(b.value for b in brs)
        return [b for b in brs if b.value <= vmin + tol]

    def active_momenta(self, x, t, tol: float | None = None) -> MomentumSet:
        return MomentumSet(np.array([b.momentum for b in self.active_branches(x, t, tol)]))

    def limit_velocity(self, x, t, tol: float | None = None) -> np.ndarray:
        return min_enclosing_ball(self.active_momenta(x, t, tol)).center

    def match(self, key, branches: Sequence[Branch]) -> Branch | None:
        """Continuation of branch ``key`` among ``branches``."""
        if not branches:
            return None
        if self.continuous_keys:
            return min(branches, key=lambda b: float(np.linalg.norm(np.asarray(b.key) - np.asarray(key))))
        for b in branches:
            if b.key == key:
                return b
        return None

    def velocity_bound(self) -> float | None:
        return None


def active_momenta(model: PotentialModel, x, t, tol: float | None = None) -> MomentumSet:
    """Momenta of the branches within ``tol`` of the minimum (the set ``k_{x,t}``)."""
    return model.active_momenta(x, t, tol)


def limit_velocity(model: PotentialModel, x, t, tol: float | None = None) -> np.ndarray:
    """Center of the minimal ball containing the active momenta."""
    return model.limit_velocity(x, t, tol)


# ---------------------------------------------------------------------------
# Hopf-Lax potential on the torus
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HopfLaxPotential(PotentialModel):
    """``phi(x, t) = min_a phi0(a) + |x - a|^2 / (2 t)`` with periodic ``phi0``.

    In one dimension the minimization scans a uniform grid of
    ``cells_per_period`` cells, then refines every discrete local minimum by
    ``bisection_steps`` bisections on the derivative.  In two dimensions the
    grid is coarser and candidates are refined by Newton's method.
    """

    phi0: FourierSeries
    cells_per_period: int | None = None
    bisection_steps: int = 40
    continuous_keys = True
    _table: np.ndarray = field(init=False, repr=False, compare=False)
    _osc: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.phi0.dim not in (1, 2):
            raise ValueError("Hopf-Lax potential supports d = 1, 2")
        n = self.cells_per_period or (2048 if self.phi0.dim == 1 else 256)
        object.__setattr__(self, "cells_per_period", int(n))
        _, tab = self.phi0.sample_grid(n)
        tab.setflags(write=False)
        object.__setattr__(self, "_table", tab)
        object.__setattr__(self, "_osc", self.phi0.oscillation())

    @property
    def dim(self) -> int:
        return self.phi0.dim

    @property
    def period(self) -> np.ndarray:
        return self.phi0.period

    def value_scale(self) -> float:
        return max(1.0, self._osc)

    def velocity_bound(self) -> float:
        return self.phi0.gradient_bound()

    def _window(self, t: float) -> float:
        # beyond this distance the quadratic penalty exceeds twice the oscillation
        return math.sqrt(4.0 * t * self._osc) + 2.0 * float(np.max(self.period)) / self.cells_per_period

    # -- one dimension -------------------------------------------------------

    def _grid_1d(self, x: np.ndarray, t: np.ndarray):
        L = float(self.period[0])
        n = self.cells_per_period
        h = L / n
        K = int(math.ceil(self._window(float(np.max(t))) / h)) + 2
        base = np.floor(x / h).astype(np.int64)
        off = np.arange(-K, K + 1)
        # rows of the periodically extended table, gathered as contiguous windows
        ext = self._table[np.mod(np.arange(-K, n + K + 1), n)]
        F = np.lib.stride_tricks.sliding_window_view(ext, 2 * K + 1)[np.mod(base, n)]
        r = (x - base * h)[:, None] - off[None, :] * h
        F = F + r * r / (2.0 * t[:, None])
        a = (base[:, None] + off[None, :]) * h
        return a, F, h

    def _refine_1d(self, a0: np.ndarray, x: np.ndarray, t: np.ndarray, h: float):
        """Bisection on ``F'(a) = phi0'(a) + (a - x)/t`` inside ``[a0-h, a0+h]``."""
        def dF(a):
            return self.phi0.derivative(a, 1) + (a - x) / t

        lo, hi = a0 - h, a0 + h
        for _ in range(4):
            # widen brackets that do not change sign
            glo, ghi = dF(lo) > 0, dF(hi) < 0
            if not (np.any(glo) or np.any(ghi)):
                break
            lo = np.where(glo, lo - h, lo)
            hi = np.where(ghi, hi + h, hi)
        for _ in range(self.bisection_steps):
            mid = 0.5 * (lo + hi)
            neg = dF(mid) < 0
            lo = np.where(neg, mid, lo)
            hi = np.where(neg, hi, mid)
        a = 0.5 * (lo + hi)
        F = self.phi0(a) + (x - a) ** 2 / (2.0 * t)
        Fg = self.phi0(a0) + (x - a0) ** 2 / (2.0 * t)
        worse = Fg < F
        return np.where(worse, a0, a), np.where(worse, Fg, F)

    def _minimizers_1d(self, x: np.ndarray, t: np.ndarray, count: int):
        """``count`` lowest refined local minima per query, as ``(a, F)`` arrays."""
        out_a = np.empty((x.size, count))
        out_F = np.empty((x.size, count))
        h = float(self.period[0]) / self.cells_per_period
        # similar times share a search window
        order = np.argsort(t, kind="stable")
        s = 0
        while s < x.size:
            width = 2 * int(math.ceil(self._window(float(t[order[min(s + 255, x.size - 1)]])) / h)) + 5
            e = min(x.size, s + max(256, 4_000_000 // width))
            sel = order[s:e]
            xs, ts = x[sel], t[sel]
            a, F, h = self._grid_1d(xs, ts)
            locmin = np.zeros_like(F, dtype=bool)
            locmin[:, 1:-1] = (F[:, 1:-1] <= F[:, :-2]) & (F[:, 1:-1] <= F[:, 2:])
            Fm = np.where(locmin, F, np.inf)
            c = min(count, F.shape[1])
            idx = np.argpartition(Fm, c - 1, axis=1)[:, :c] if c < F.shape[1] else \
                np.broadcast_to(np.arange(F.shape[1]), F.shape)
            a0 = np.take_along_axis(a, idx, 1)
            F0 = np.take_along_axis(Fm, idx, 1)
            finite = np.isfinite(F0)
            xr = np.broadcast_to(xs[:, None], a0.shape)
            tr = np.broadcast_to(ts[:, None], a0.shape)
            ar, Fr = self._refine_1d(np.where(finite, a0, xr), xr, tr, h)
            out_a[sel, :c] = np.where(finite, ar, np.nan)
            out_F[sel, :c] = np.where(finite, Fr, np.inf)
            out_a[sel, c:] = np.nan
            out_F[sel, c:] = np.inf
            s = e
        return out_a, out_F

    def value_many(self, x, t) -> np.ndarray:
        """Vectorized values for arrays of ``x`` and ``t`` (one dimension)."""
        if self.dim != 1:
            return np.array([self.value(xi, ti) for xi, ti in zip(np.atleast_1d(x), np.atleast_1d(t))])
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        shape = x.shape
        x, t = x.reshape(-1), t.reshape(-1)
        if np.any(t <= 0):
            raise ValueError("Hopf-Lax potential requires t > 0")
        if self._osc == 0.0:
            return np.full(shape, float(self.phi0.constant))
        _, F = self._minimizers_1d(x, t, 3)
        return F.min(axis=1).reshape(shape)

    def argmin_many(self, x, t) -> np.ndarray:
        """Global minimizer for arrays of ``x`` at a common or matching ``t`` (1-D)."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float).reshape(-1),
                                   np.asarray(t, dtype=float).reshape(-1))
        if self._osc == 0.0:
            return x.copy()
        a, F = self._minimizers_1d(x, t, 3)
        return np.take_along_axis(a, np.argmin(F, axis=1)[:, None], 1)[:, 0]

    # -- two dimensions ------------------------------------------------------

    def _minima_2d(self, x: np.ndarray, t: float):
        L = self.period
        n = self.cells_per_period
        h = L / n
        W = self._window(t)
        K = np.ceil(W / h).astype(int) + 2
        base = np.floor(x / h).astype(int)
        j0 = np.arange(base[0] - K[0], base[0] + K[0] + 1)
        j1 = np.arange(base[1] - K[1], base[1] + K[1] + 1)
        tab = self._table[np.ix_(np.mod(j0, n), np.mod(j1, n))]
        a0, a1 = j0 * h[0], j1 * h[1]
        F = tab + ((x[0] - a0)[:, None] ** 2 + (x[1] - a1)[None, :] ** 2) / (2 * t)
        c = F[1:-1, 1:-1]
        loc = np.ones_like(c, dtype=bool)
        for di, dj in itertools.product((-1, 0, 1), repeat=2):
            if di or dj:
                loc &= c <= F[1 + di:F.shape[0] - 1 + di, 1 + dj:F.shape[1] - 1 + dj]
        ii, jj = np.nonzero(loc)
        cand = np.stack([a0[ii + 1], a1[jj + 1]], axis=1)
        out = []
        for a in cand:
            a = self._newton_2d(a, x, t, h)
            F_a = float(self.phi0(a) + np.sum((x - a) ** 2) / (2 * t))
            if not any(np.linalg.norm(a - b) < 1e-8 for b, _ in out):
                out.append((a, F_a))
        return out

    def _newton_2d(self, a, x, t, h):
        a = a.astype(float).copy()
        start = a.copy()
        for _ in range(50):
            g = self.phi0.gradient(a) + (a - x) / t
            H = self.phi0.hessian(a) + np.eye(2) / t
            try:
                step = np.linalg.solve(H, g)
            except np.linalg.LinAlgError:
                break
            if np.linalg.eigvalsh(H).min() <= 0 or np.linalg.norm(a - step - start) > 4 * np.max(h):
                break
            a = a - step
            if np.linalg.norm(step) < 1e-15 * max(1.0, np.linalg.norm(a)):
                return a
        res = optimize.minimize(lambda z: float(self.phi0(z) + np.sum((x - z) ** 2) / (2 * t)),
                                start, jac=lambda z: self.phi0.gradient(z) + (z - x) / t,
                                method="BFGS", options={"gtol": 1e-13})
        return res.x

    # -- model interface -----------------------------------------------------

    def minimizers(self, x, t) -> list[tuple[np.ndarray, float]]:
        """All refined local minima ``(a, F(a))`` in the search window."""
        x = _point(x, self.dim)
        if t <= 0:
            raise ValueError("Hopf-Lax potential requires t > 0")
        if self._osc == 0.0:
            # constant initial data: the minimizer is x itself
            return [(x.copy(), float(self.phi0.constant))]
        if self.dim == 1:
            a, F, h = self._grid_1d(x.copy(), np.array([float(t)]))
            a, F = a[0], F[0]
            j = 1 + np.flatnonzero((F[1:-1] <= F[:-2]) & (F[1:-1] <= F[2:]))
            ar, Fr = self._refine_1d(a[j], np.full(j.size, x[0]), np.full(j.size, float(t)), h)
            out = []
            for ai, Fi in sorted(zip(ar, Fr)):
                if out and abs(ai - out[-1][0][0]) < 1e-9:
                    if Fi < out[-1][1]:
                        out[-1] = (np.array([ai]), float(Fi))
                    continue
                out.append((np.array([ai]), float(Fi)))
            return out
        return self._minima_2d(x, float(t))

    def branches(self, x, t) -> list[Branch]:
        x = _point(x, self.dim)
        if t == 0:
            # initial data: the single smooth branch phi0
            g = np.atleast_1d(self.phi0.gradient(x if self.dim > 1 else x[0]))
            return [Branch(tuple(x.tolist()), float(self.phi0(x if self.dim > 1 else x[0])), g)]
        return [Branch(tuple(a.tolist()), F, (x - a) / t) for a, F in self.minimizers(x, t)]

    def value(self, x, t) -> float:
        if t <= 0:
            raise ValueError("Hopf-Lax potential requires t > 0")
        if self.dim == 1:
            return float(self.value_many(np.array([float(_point(x, 1)[0])]), np.array([float(t)]))[0])
        return min(F for _, F in self.minimizers(x, t))

    def find_shocks_1d(self, t: float, samples: int = 4096) -> list[float]:
        """Shock positions in one period at time ``t`` (one dimension).

        Jumps of the global minimizer between neighbouring samples are refined
        by bisection and kept when two distinct minimizers tie there.
        """
        if self.dim != 1:
            raise ValueError("find_shocks_1d is for one-dimensional potentials")
        L = float(self.period[0])
        dx = L / samples
        # offset grid so that symmetric shocks do not sit on a sample
        xs = (np.arange(samples + 1) - 0.3819660112501051) * dx
        a = self.argmin_many(xs, np.full(xs.size, float(t)))
        jumps = np.flatnonzero(np.diff(a) > max(50 * dx, 1e-3 * L))
        shocks = []
        for j in jumps:
            lo, hi = xs[j], xs[j + 1]
            alo, ahi = a[j], a[j + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                am = self.argmin_many(np.array([mid]), np.array([float(t)]))[0]
                if abs(am - alo) < abs(am - ahi):
                    lo = mid
                else:
                    hi = mid
            xm = 0.5 * (lo + hi)
            if len(self.active_momenta(xm, t)) >= 2:
                shocks.append(float(np.mod(xm, L)))
        return sorted(shocks)


def hopf_lax_eval(P: HopfLaxPotential, x, t: float) -> float:
    """Value of the Hopf-Lax potential at ``(x, t)``."""
    if t <= 0:
        raise ValueError("Hopf-Lax potential requires t > 0")
    return P.value(x, t)


# ---------------------------------------------------------------------------
# finite families of smooth Hamilton-Jacobi solutions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AffineBranch:
    """``p . x - |p|^2 t / 2 + offset``."""

    momentum: np.ndarray
    offset: float = 0.0

    def __post_init__(self):
        p = _point(self.momentum)
        p.setflags(write=False)
        object.__setattr__(self, "momentum", p)
        object.__setattr__(self, "offset", float(self.offset))

    def value(self, x, t):
        p = self.momentum
        return float(p @ x - 0.5 * (p @ p) * t + self.offset)

    def gradient(self, x, t):
        return self.momentum.copy()

    def time_derivative(self, x, t):
        return -0.5 * float(self.momentum @ self.momentum)


@dataclass(frozen=True)
class QuadraticBranch:
    """``(x - c)^T A(t) (x - c) / 2 + offset`` with ``A(t) = A (I + (t - t_ref) A)^-1``.

    Valid while ``I + (t - t_ref) A`` is positive definite.
    """

    matrix: np.ndarray
    center: np.ndarray
    offset: float = 0.0
    t_ref: float = 0.0

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.matrix, dtype=float))
        A = 0.5 * (A + A.T)
        c = _point(self.center, A.shape[0])
        for name, v in (("matrix", A), ("center", c)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)

    def matrix_at(self, t) -> np.ndarray:
        n = self.matrix.shape[0]
        M = np.eye(n) + (t - self.t_ref) * self.matrix
        if np.linalg.eigvalsh(0.5 * (M + M.T)).min() <= 0:
            raise InvalidModelError(f"quadratic branch is not defined at t={t}")
        return np.linalg.solve(M.T, self.matrix.T).T

    def value(self, x, t):
        y = x - self.center
        return float(0.5 * y @ self.matrix_at(t) @ y + self.offset)

    def gradient(self, x, t):
        return self.matrix_at(t) @ (x - self.center)

    def time_derivative(self, x, t):
        g = self.gradient(x, t)
        return -0.5 * float(g @ g)


@dataclass(frozen=True)
class FiniteMinFamily(PotentialModel):
    """``phi = min_i phi^i - U_star t`` for closed-form solutions ``phi^i``."""

    members: tuple
    U_star: float = 0.0

    def __post_init__(self):
        members = tuple(self.members)
        if not members:
            raise InvalidModelError("family needs at least one branch")
        dims = {len(m.center) if isinstance(m, QuadraticBranch) else len(m.momentum) for m in members}
        if len(dims) != 1:
            raise InvalidModelError("branches have different dimensions")
        object.__setattr__(self, "members", members)
        object.__setattr__(self, "U_star", float(self.U_star))

    @property
    def dim(self) -> int:
        m = self.members[0]
        return len(m.center) if isinstance(m, QuadraticBranch) else len(m.momentum)

    def branches(self, x, t) -> list[Branch]:
        x = _point(x, self.dim)
        return [Branch(i, m.value(x, t) - self.U_star * t, m.gradient(x, t))
                for i, m in enumerate(self.members)]

    def hj_residual(self, x, t) -> float:
        """Largest ``|phi_t + |grad phi|^2/2 + U_star|`` over branches."""
        x = _point(x, self.dim)
        res = 0.0
        for m in self.members:
            g = m.gradient(x, t)
            res = max(res, abs(m.time_derivative(x, t) - self.U_star + 0.5 * g @ g + self.U_star))
        return res

    def value_scale(self) -> float:
        return 1.0

    def velocity_bound(self) -> float | None:
        if all(isinstance(m, AffineBranch) for m in self.members):
            return max(float(np.linalg.norm(m.momentum)) for m in self.members)
        return None

    @property
    def is_affine(self) -> bool:
        return all(isinstance(m, AffineBranch) for m in self.members)


# ---------------------------------------------------------------------------
# local linear model at a point of the shock
# ---------------------------------------------------------------------------


def _scale(points: np.ndarray) -> float:
    return max(float(np.max(np.abs(points - points.mean(axis=0)))), 1e-300)


def check_planar_genericity(points, right_tol: float = RIGHT_ANGLE_TOL) -> None:
    """Raise :class:`GenericityError` unless the planar momenta are generic.

    Generic means: distinct, no three on a line, no four on a circle and no
    right-angled triangle among any three.
    """
    P = np.asarray(points, dtype=float)
    n = len(P)
    s = _scale(P)
    for i, j in itertools.combinations(range(n), 2):
        if np.linalg.norm(P[i] - P[j]) <= DEGENERACY_RTOL * s:
            raise GenericityError("coincident momenta", (i, j))
    for tri in itertools.combinations(range(n), 3):
        u, v = P[tri[1]] - P[tri[0]], P[tri[2]] - P[tri[0]]
        if abs(u[0] * v[1] - u[1] * v[0]) <= DEGENERACY_RTOL * s * s:
            raise GenericityError("three collinear", tri)
        if np.any(np.abs(triangle_cosines(*P[list(tri)])) < right_tol):
            raise GenericityError("right triangle", tri)
    for quad in itertools.combinations(range(n), 4):
        Q = P[list(quad)]
        # in-circle determinant
        D = Q[1:] - Q[0]
        M = np.column_stack([D, np.sum(D * D, axis=1)])
        if abs(np.linalg.det(M)) <= DEGENERACY_RTOL * s ** 4:
            raise GenericityError("four cocircular", quad)


def local_model_derivative(M: "LocalLinearModel", q, tau: float) -> float:
    """``min_i (p_i . q - tau |p_i|^2 / 2) - U_star tau``."""
    return spacetime_directional_derivative(M.momenta, M.U_star, q, tau)


@dataclass(frozen=True)
class LocalLinearModel(PotentialModel):
    """First-order model of the potential near a shock point ``(x*, t*)``.

    ``phi(x, t) = phi_star + phi'_*(x - x*, t - t*)`` where ``phi'_*`` is a
    minimum of the affine forms ``p_i . q - tau |p_i|^2 / 2 - U_star tau``.
    Planar momenta are checked for genericity on construction.
    """

    momenta: MomentumSet
    U_star: float = 0.0
    x_star: np.ndarray | None = None
    t_star: float = 0.0
    phi_star: float = 0.0
    validate: bool = True

    def __post_init__(self):
        S = self.momenta if isinstance(self.momenta, MomentumSet) else MomentumSet(self.momenta)
        object.__setattr__(self, "momenta", S)
        xs = np.zeros(S.dim) if self.x_star is None else _point(self.x_star, S.dim)
        xs.setflags(write=False)
        object.__setattr__(self, "x_star", xs)
        object.__setattr__(self, "U_star", float(self.U_star))
        if self.validate and S.dim == 2:
            check_planar_genericity(S.elements)

    @property
    def dim(self) -> int:
        return self.momenta.dim

    def offsets(self, tau: float) -> np.ndarray:
        P = self.momenta.elements
        return -0.5 * tau * np.sum(P * P, axis=1) - self.U_star * tau

    def branches(self, x, t) -> list[Branch]:
        q = _point(x, self.dim) - self.x_star
        tau = t - self.t_star
        vals = self.momenta.elements @ q + self.offsets(tau) + self.phi_star
        return [Branch(i, float(v), p.copy()) for i, (v, p) in enumerate(zip(vals, self.momenta.elements))]

    def derivative(self, q, tau) -> float:
        return local_model_derivative(self, q, tau)

    def velocity_bound(self) -> float:
        return float(np.max(np.linalg.norm(self.momenta.elements, axis=1)))

    def value_scale(self) -> float:
        return 1.0


# ---------------------------------------------------------------------------
# A3 endpoint model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class A3EndpointModel(PotentialModel):
    """Truncated normal form of an A3 minimum at a shock end point.

    ``phi(x, t) = phi_star + p*.q - tau |p*|^2/2 - U_star tau + min_{a,b} G``
    with ``q = x - x*``, ``tau = t - t*`` and

        G = A a^4 + 2 sum B_i a^2 b_i + sum C_ij b_i b_j
            + alpha(q,tau) a + beta(q,tau) a^2 + sum gamma_i(q,tau) b_i.

    ``alpha``, ``beta`` and each row of ``gamma`` are linear forms given as
    vectors over ``(q, tau)``.
    """

    A: float
    B: np.ndarray
    C: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    p_star: np.ndarray
    U_star: float = 0.0
    x_star: np.ndarray | None = None
    t_star: float = 0.0
    phi_star: float = 0.0
    continuous_keys = True

    def __post_init__(self):
        B = np.atleast_1d(np.asarray(self.B, dtype=float))
        k = B.size
        C = np.asarray(self.C, dtype=float).reshape(k, k)
        p = _point(self.p_star)
        d = p.size
        alpha = _point(self.alpha, d + 1)
        beta = _point(self.beta, d + 1)
        gamma = np.asarray(self.gamma, dtype=float).reshape(k, d + 1)
        xs = np.zeros(d) if self.x_star is None else _point(self.x_star, d)
        if not self.A > 0:
            raise InvalidModelError("A must be positive")
        if not np.allclose(C, C.T, atol=1e-12 * max(1.0, np.abs(C).max())):
            raise InvalidModelError("C must be symmetric")
        if k and np.linalg.eigvalsh(C).min() <= 1e-12 * max(1.0, np.abs(C).max()):
            raise InvalidModelError("C must be positive definite")
        block = np.block([[np.array([[self.A]]), B[None, :]], [B[:, None], C]])
        if np.linalg.eigvalsh(block).min() <= 0:
            raise InvalidModelError("quartic-quadratic form is not positive definite")
        for name, v in (("B", B), ("C", C), ("alpha", alpha), ("beta", beta),
                        ("gamma", gamma), ("p_star", p), ("x_star", xs)):
            v.setflags(write=False)
            object.__setattr__(self, name, v)
        object.__setattr__(self, "A", float(self.A))
        object.__setattr__(self, "U_star", float(self.U_star))

    @property
    def dim(self) -> int:
        return self.p_star.size

    @property
    def k(self) -> int:
        return self.B.size

    def local_coords(self, x, t) -> np.ndarray:
        return np.append(_point(x, self.dim) - self.x_star, t - self.t_star)

    def reduced_quartic(self, Q) -> tuple[float, float, float, float]:
        """Coefficients ``(c4, c2, c1, c0)`` after eliminating ``b``."""
        Ci = np.linalg.inv(self.C) if self.k else np.zeros((0, 0))
        g = self.gamma @ Q
        c4 = self.A - self.B @ Ci @ self.B
        c2 = float(self.beta @ Q - self.B @ Ci @ g)
        c1 = float(self.alpha @ Q)
        c0 = float(-0.25 * g @ Ci @ g)
        return c4, c2, c1, c0

    def _b_of(self, a, Q):
        if not self.k:
            return np.zeros(0)
        return -np.linalg.solve(self.C, self.B * a * a + 0.5 * (self.gamma @ Q))

    def branches(self, x, t) -> list[Branch]:
        Q = self.local_coords(x, t)
        q, tau = Q[:-1], Q[-1]
        c4, c2, c1, c0 = self.reduced_quartic(Q)
        scale = max(abs(c4), abs(c2), abs(c1), 1e-300)
        roots = np.roots([4 * c4, 0.0, 2 * c2, c1])
        real = roots[np.abs(roots.imag) <= 1e-7 * max(1.0, float(np.max(np.abs(roots))))].real
        base = (self.phi_star + self.p_star @ q - 0.5 * tau * self.p_star @ self.p_star
                - self.U_star * tau)
        out = []
        for a in np.sort(real):
            if 12 * c4 * a * a + 2 * c2 < -1e-12 * scale:
                continue  # local maximum
            if any(abs(a - b.key) <= 1e-9 * max(1.0, abs(a)) for b in out):
                continue
            b = self._b_of(a, Q)
            val = base + c4 * a ** 4 + c2 * a * a + c1 * a + c0
            mom = (self.p_star + self.alpha[:-1] * a + self.beta[:-1] * a * a
                   + (self.gamma[:, :-1].T @ b if self.k else 0.0))
            out.append(Branch(float(a), float(val), np.asarray(mom, dtype=float)))
        return out

    def normal_form(self, a, b, Q) -> float:
        """``G(a, b; q, tau)`` of the truncated normal form."""
        b = np.atleast_1d(np.asarray(b, dtype=float))
        return float(self.A * a ** 4 + 2 * a * a * (self.B @ b) + b @ self.C @ b
                     + (self.alpha @ Q) * a + (self.beta @ Q) * a * a + (self.gamma @ Q) @ b)

    def value_scale(self) -> float:
        return 1.0

    def with_forms(self, **changes) -> "A3EndpointModel":
        fields_ = dict(A=self.A, B=self.B, C=self.C, alpha=self.alpha, beta=self.beta,
                       gamma=self.gamma, p_star=self.p_star, U_star=self.U_star,
                       x_star=self.x_star, t_star=self.t_star, phi_star=self.phi_star)
        fields_.update(changes)
        return A3EndpointModel(**fields_)


@dataclass(frozen=True)
class A3ShockHalfplane:
    """Approximate shock of an A3 model: ``alpha = 0`` and bordered determinant ``<= 0``."""

    alpha: np.ndarray
    model: A3EndpointModel

    def alpha_value(self, Q) -> float:
        return float(self.alpha @ np.asarray(Q, dtype=float))

    def determinant(self, Q) -> float:
        """``det [[beta, gamma^T], [B, C]]`` evaluated at ``Q = (q, tau)``."""
        m = self.model
        Q = np.asarray(Q, dtype=float)
        top = np.concatenate([[m.beta @ Q], m.gamma @ Q])
        low = np.column_stack([m.B[:, None], m.C]) if m.k else np.zeros((0, 1))
        return float(np.linalg.det(np.vstack([top[None, :], low])))

    def contains(self, Q, atol: float = 1e-9) -> bool:
        Q = np.asarray(Q, dtype=float)
        s = max(1.0, float(np.linalg.norm(Q)))
        return abs(self.alpha_value(Q)) <= atol * s * max(1.0, np.linalg.norm(self.alpha)) \
            and self.determinant(Q) <= atol * s

    def __call__(self, Q) -> bool:
        return self.contains(Q)


def a3_shock_halfplane(M: A3EndpointModel) -> A3ShockHalfplane:
    """Half-hyperplane approximating the shock near the end point."""
    if M.k and abs(np.linalg.det(M.C)) <= 1e-14 * max(1.0, np.abs(M.C).max()) ** M.k:
        raise InvalidModelError("C is singular")
    return A3ShockHalfplane(M.alpha.copy(), M)


@dataclass(frozen=True)
class TangentReport:
    ok: bool
    alpha: float
    gamma: np.ndarray
    beta: float
    determinant: float
    message: str


def a3_tangent_check(M: A3EndpointModel, atol: float = 1e-6) -> TangentReport:
    """Check that the trajectory leaving the end point enters the shock.

    The direction ``(p*, 1)`` must satisfy ``alpha = 0``, ``gamma_i = 0`` and
    ``beta < 0``; it then lies in the shock half-hyperplane because ``det C > 0``.
    """
    Q = np.append(M.p_star, 1.0)
    scale = max(1.0, float(np.linalg.norm(Q)))
    a = float(M.alpha @ Q)
    g = M.gamma @ Q
    b = float(M.beta @ Q)
    det = a3_shock_halfplane(M).determinant(Q)
    msgs = []
    if abs(a) > atol * scale * max(1.0, np.linalg.norm(M.alpha)):
        msgs.append(f"alpha(p*,1) = {a:.3e} != 0")
    if g.size and np.max(np.abs(g)) > atol * scale * max(1.0, np.abs(M.gamma).max()):
        msgs.append(f"gamma(p*,1) = {np.array2string(g, precision=3)} != 0")
    if not b < 0:
        msgs.append("trajectory exits shock: beta(p*,1) >= 0")
    if not det <= 0 and not msgs:
        msgs.append("direction (p*,1) outside the shock half-hyperplane")
    ok = not msgs
    return TangentReport(ok, a, g, b, det, "ok" if ok else "; ".join(msgs))


def _d1(f, x0, h):
    """Fourth-order central first derivative."""
    return (-f(x0 + 2 * h) + 8 * f(x0 + h) - 8 * f(x0 - h) + f(x0 - 2 * h)) / (12 * h)


def extract_a3_model(F: Callable, xi_star, x_star, t_star: float,
                     h_xi: float = 0.05, h_xt: float = 2e-3, phi_star: float | None = None
                     ) -> A3EndpointModel:
    """A3 coefficients of a generating family by finite differences.

    ``F(xi, x, t)`` must be given in normal-form coordinates ``xi = (a, b)``
    at the A3 point: ``F_a = F_aa = F_aaa = 0``, ``F_b = 0`` and ``F_ab = 0``.
    """
    xi_star = _point(xi_star)
    x_star = _point(x_star)
    k = xi_star.size - 1
    d = x_star.size
    e = np.eye(k + 1)

    def Fxi(xi):
        return F(xi, x_star, t_star)

    def shift(i, s):
        return xi_star + s * e[i]

    h = h_xi
    # pure a-derivatives
    A = (Fxi(shift(0, 2 * h)) - 4 * Fxi(shift(0, h)) + 6 * Fxi(xi_star)
         - 4 * Fxi(shift(0, -h)) + Fxi(shift(0, -2 * h))) / h ** 4 / 24.0
    B = np.zeros(k)
    C = np.zeros((k, k))
    for i in range(k):
        ei = e[i + 1]

        def aa(base):
            return (Fxi(base + h * e[0]) - 2 * Fxi(base) + Fxi(base - h * e[0])) / h ** 2

        B[i] = (aa(xi_star + h * ei) - aa(xi_star - h * ei)) / (2 * h) / 4.0
        for j in range(k):
            ej = e[j + 1]
            C[i, j] = (Fxi(xi_star + h * ei + h * ej) - Fxi(xi_star + h * ei - h * ej)
                       - Fxi(xi_star - h * ei + h * ej) + Fxi(xi_star - h * ei - h * ej)) / (4 * h * h) / 2.0
    C = 0.5 * (C + C.T)

    hx = h_xt
    z = np.append(x_star, t_star)

    def at(zz, xi):
        return F(xi, zz[:-1], zz[-1])

    def grad_xt(g):
        out = np.empty(d + 1)
        for m in range(d + 1):
            em = np.eye(d + 1)[m]
            out[m] = _d1(lambda s: g(z + s * em), 0.0, hx)
        return out

    hs = 1e-3

    def Fa(zz):
        return _d1(lambda s: at(zz, xi_star + s * e[0]), 0.0, hs)

    def Faa(zz):
        return (-at(zz, xi_star + 2 * hs * e[0]) + 16 * at(zz, xi_star + hs * e[0]) - 30 * at(zz, xi_star)
                + 16 * at(zz, xi_star - hs * e[0]) - at(zz, xi_star - 2 * hs * e[0])) / (12 * hs * hs)

    alpha = grad_xt(Fa)
    beta = grad_xt(Faa) / 2.0
    gamma = np.array([grad_xt(lambda zz, i=i: _d1(lambda s: at(zz, xi_star + s * e[i + 1]), 0.0, hs))
                      for i in range(k)]).reshape(k, d + 1)
    g_all = grad_xt(lambda zz: at(zz, xi_star))
    p_star = g_all[:-1]
    U_star = -g_all[-1] - 0.5 * p_star @ p_star
    if phi_star is None:
        phi_star = float(F(xi_star, x_star, t_star))
    return A3EndpointModel(float(A), B, C, alpha, beta, gamma, p_star, float(U_star),
                           x_star, float(t_star), phi_star)
