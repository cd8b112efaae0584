"""Gradient differential equations for semiconcave potentials.

A potential ``phi = e - f`` (``e`` a positive-semidefinite quadratic form,
``f`` convex) has directional derivatives ``phi'_X(Q) = min_{P in D_X} P . Q``
over a compact convex set ``D_X`` of sub-differentials.  For a convex
Hamiltonian ``h`` the *h-gradient* is ``h'(P_X)`` where ``P_X`` minimizes ``h``
on ``D_X``; equivalently it is the minimizer of ``l(Q) - phi'_X(Q)`` with
``l`` the Legendre transform of ``h``.  Hamiltonians here are linear plus
positive-semidefinite quadratic, for which the Cauchy problem
``X^+(t) = grad_h phi(X(t))`` is well posed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .convex_core import PLUS_INFINITY, MomentumSet, directional_min

__all__ = [
    "FlowMap",
    "GridResolutionError",
    "GridSpec",
    "HGradientConsistencyError",
    "Hamiltonian",
    "InvalidPotentialError",
    "Polyline",
    "SemiconcavePotential",
    "flow",
    "grid_argmin",
    "gronwall_bound",
    "h_gradient",
    "h_gradient_lagrangian",
    "hamiltonian_minimizers",
    "invariance_suite",
]

DEFAULT_STEP = 1e-3


class InvalidPotentialError(ValueError):
    pass


class GridResolutionError(RuntimeError):
    pass


class HGradientConsistencyError(AssertionError):
    """Two minimizers of the Hamiltonian gave different velocities."""


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Hamiltonian:
    """``h(P) = linear . P + P^T quadratic P / 2`` with ``quadratic`` PSD."""

    linear: np.ndarray
    quadratic: np.ndarray

    def __post_init__(self):
        L = _frozen(np.atleast_1d(self.linear))
        M = _frozen(np.atleast_2d(self.quadratic))
        if M.shape != (L.size, L.size):
            raise ValueError("quadratic part must be m x m with m = len(linear)")
        if not np.allclose(M, M.T, atol=1e-14 * max(1.0, np.abs(M).max())):
            raise ValueError("quadratic part must be symmetric")
        scale = max(1.0, float(np.abs(M).max()))
        if np.linalg.eigvalsh(M).min() < -1e-12 * scale:
            raise ValueError("quadratic part must be positive semidefinite")
        object.__setattr__(self, "linear", L)
        object.__setattr__(self, "quadratic", M)

    @classmethod
    def burgers(cls, d: int) -> "Hamiltonian":
        """``h(p, sigma) = |p|^2/2 + sigma`` on space-time momenta ``(p, sigma)``."""
        L = np.zeros(d + 1)
        L[-1] = 1.0
        M = np.zeros((d + 1, d + 1))
        M[:d, :d] = np.eye(d)
        return cls(L, M)

    @property
    def dim(self) -> int:
        return self.linear.size

    def __call__(self, P):
        P = np.asarray(P, dtype=float)
        return P @ self.linear + 0.5 * np.einsum("...i,ij,...j->...", P, self.quadratic, P)

    def differential(self, P) -> np.ndarray:
        return self.linear + np.asarray(P, dtype=float) @ self.quadratic

    def range_basis(self, rtol: float = 1e-12) -> tuple[np.ndarray, np.ndarray]:
        """Orthonormal basis of range(quadratic) and the matching eigenvalues."""
        w, V = np.linalg.eigh(self.quadratic)
        keep = w > rtol * max(1.0, float(np.abs(w).max()))
        return V[:, keep], w[keep]

    def lagrangian(self, Q):
        """Legendre transform ``l(Q) = max_P (P . Q - h(P))``."""
        Q = np.asarray(Q, dtype=float)
        V, w = self.range_basis()
        R = Q - self.linear
        z = V.T @ R
        if np.linalg.norm(R - V @ z) > 1e-12 * max(1.0, float(np.linalg.norm(R))):
            return PLUS_INFINITY
        return 0.5 * float(np.sum(z * z / w))


@dataclass(frozen=True)
class SemiconcavePotential:
    """Potential with a sub-differential oracle.

    ``subdifferential(X)`` returns a :class:`MomentumSet` whose convex hull is
    ``D_X``; ``quadratic_bound`` is a PSD matrix ``E`` such that
    ``X^T E X / 2 - phi(X)`` is convex.
    """

    evaluator: Callable[[np.ndarray], float]
    subdifferential: Callable[[np.ndarray], MomentumSet]
    quadratic_bound: np.ndarray

    def __post_init__(self):
        E = _frozen(np.atleast_2d(self.quadratic_bound))
        if np.linalg.eigvalsh(0.5 * (E + E.T)).min() < -1e-12 * max(1.0, np.abs(E).max()):
            raise InvalidPotentialError("quadratic bound must be positive semidefinite")
        object.__setattr__(self, "quadratic_bound", E)

    @property
    def dim(self) -> int:
        return self.quadratic_bound.shape[0]

    def __call__(self, X) -> float:
        return self.evaluator(np.asarray(X, dtype=float))

    def directional_derivative(self, X, Q) -> float:
        return directional_min(self.subdifferential(np.asarray(X, dtype=float)), Q)

    # -- standard families ---------------------------------------------------

    @classmethod
    def min_of_affine(cls, momenta, offsets, active_tol: float = 1e-9) -> "SemiconcavePotential":
        """``phi(X) = min_i (P_i . X + c_i)``: concave, so ``E = 0``."""
        P = _frozen(np.atleast_2d(momenta))
        c = _frozen(np.atleast_1d(offsets))
        if c.size != P.shape[0]:
            raise ValueError("one offset per momentum required")

        def values(X):
            return P @ X + c

        def evaluator(X):
            return float(np.min(values(X)))

        def oracle(X):
            v = values(X)
            scale = max(1.0, float(np.max(np.abs(v))))
            return MomentumSet(P[v <= v.min() + active_tol * scale])

        return cls(evaluator, oracle, np.zeros((P.shape[1], P.shape[1])))

    @classmethod
    def smooth_quadratic(cls, A, b, c: float = 0.0) -> "SemiconcavePotential":
        """``phi(X) = X^T A X / 2 + b . X + c``; ``E`` is the PSD part of ``A``."""
        A = _frozen(np.atleast_2d(A))
        A = _frozen(0.5 * (A + A.T))
        b = _frozen(np.atleast_1d(b))
        w, V = np.linalg.eigh(A)
        E = (V * np.maximum(w, 0.0)) @ V.T

        def evaluator(X):
            return float(0.5 * X @ A @ X + b @ X + c)

        def oracle(X):
            return MomentumSet((A @ X + b)[None, :])

        return cls(evaluator, oracle, E)

    @classmethod
    def min_of_quadratics(cls, pieces: Sequence[tuple], active_tol: float = 1e-9):
        """``phi(X) = min_i (X^T A_i X / 2 + b_i . X + c_i)``."""
        As = [np.atleast_2d(np.asarray(p[0], dtype=float)) for p in pieces]
        As = [0.5 * (A + A.T) for A in As]
        bs = [np.atleast_1d(np.asarray(p[1], dtype=float)) for p in pieces]
        cs = [float(p[2]) for p in pieces]
        m = bs[0].size
        lam = max(0.0, max(float(np.linalg.eigvalsh(A).max()) for A in As))

        def values(X):
            return np.array([0.5 * X @ A @ X + b @ X + c for A, b, c in zip(As, bs, cs)])

        def evaluator(X):
            return float(np.min(values(X)))

        def oracle(X):
            v = values(X)
            scale = max(1.0, float(np.max(np.abs(v))))
            grads = [A @ X + b for A, b, vi in zip(As, bs, v) if vi <= v.min() + active_tol * scale]
            return MomentumSet(np.array(grads))

        return cls(evaluator, oracle, lam * np.eye(m))

    # -- invariance transformations -----------------------------------------

    def plus_constant(self, const: float) -> "SemiconcavePotential":
        ev, orc = self.evaluator, self.subdifferential
        return SemiconcavePotential(lambda X: ev(X) + const, orc, self.quadratic_bound)

    def translated(self, shift) -> "SemiconcavePotential":
        """``X -> phi(X - shift)``."""
        shift = _frozen(np.atleast_1d(shift))
        ev, orc = self.evaluator, self.subdifferential
        return SemiconcavePotential(lambda X: ev(X - shift), lambda X: orc(X - shift),
                                    self.quadratic_bound)

    def dilated(self, lam: float) -> "SemiconcavePotential":
        """``X -> lam * phi(X / lam)``; stays in the same class for ``lam >= 1``."""
        if lam <= 0:
            raise ValueError("dilation factor must be positive")
        ev, orc = self.evaluator, self.subdifferential
        return SemiconcavePotential(lambda X: lam * ev(X / lam), lambda X: orc(X / lam),
                                    self.quadratic_bound / lam)


def hamiltonian_minimizers(ham: Hamiltonian, D: MomentumSet, rtol: float = 1e-10):
    """All KKT points of ``min h`` over ``conv(D)`` found by face enumeration.

    Faces spanned by up to ``m + 1`` generators are searched; on each face the
    restricted quadratic is minimized over its affine hull and kept if the
    barycentric weights are nonnegative and the first-order condition holds
    against every generator.
    """
    P = D.elements
    n, m = P.shape
    if m != ham.dim:
        raise ValueError(f"sub-differentials have dimension {m}, Hamiltonian {ham.dim}")
    L, M = ham.linear, ham.quadratic
    scale = max(1.0, float(np.max(np.abs(P))))
    found = []
    for k in range(1, min(n, m + 1) + 1):
        combos = np.array(list(itertools.combinations(range(n), k)), dtype=int)
        base = P[combos[:, 0]]
        if k == 1:
            cand = base
            bary = np.ones((len(combos), 1))
            ok = np.ones(len(combos), bool)
        else:
            Dm = P[combos[:, 1:]] - base[:, None, :]          # (c, k-1, m)
            H = Dm @ M @ np.swapaxes(Dm, 1, 2)                 # (c, k-1, k-1)
            g = Dm @ (L + base @ M)[..., None]                 # (c, k-1, 1)
            mu = -(np.linalg.pinv(H, rcond=1e-12) @ g)
            resid = np.linalg.norm((H @ mu + g)[..., 0], axis=1)
            gscale = 1.0 + np.linalg.norm(g[..., 0], axis=1)
            mu = mu[..., 0]
            cand = base + np.einsum("cj,cjm->cm", mu, Dm)
            bary = np.concatenate([1.0 - mu.sum(axis=1, keepdims=True), mu], axis=1)
            ok = resid <= 1e-9 * gscale
        ok &= np.all(bary >= -rtol, axis=1)
        if not np.any(ok):
            continue
        cand = cand[ok]
        grad = L + cand @ M
        # first-order optimality against all generators
        slack = np.einsum("cm,ncm->cn", grad, P[:, None, :] - cand[None, :, :])
        tol = rtol * (1.0 + np.linalg.norm(grad, axis=1)) * scale
        good = np.all(slack >= -tol[:, None], axis=1)
        found.extend(cand[good])
    return found


def _velocity_from_set(ham: Hamiltonian, D: MomentumSet) -> np.ndarray:
    if len(D) == 1:
        return ham.differential(D.elements[0])
    mins = hamiltonian_minimizers(ham, D)
    if not mins:
        raise InvalidPotentialError("no minimizer of the Hamiltonian found on the sub-differential hull")
    vel = np.array([ham.differential(p) for p in mins])
    spread = float(np.max(np.linalg.norm(vel - vel[0], axis=1)))
    if spread > 1e-8 * max(1.0, float(np.max(np.abs(vel)))):
        raise HGradientConsistencyError(
            f"minimizers of h give velocities differing by {spread:.3e}")
    return vel[0]


def h_gradient(potential: SemiconcavePotential, ham: Hamiltonian, X) -> np.ndarray:
    """Hamiltonian form: ``h'(P_X)`` with ``P_X = argmin_{conv D_X} h``."""
    D = potential.subdifferential(np.asarray(X, dtype=float))
    if D is None or len(D) == 0:
        raise InvalidPotentialError("empty sub-differential")
    return _velocity_from_set(ham, D)


@dataclass(frozen=True)
class GridSpec:
    """Cartesian search grid: final ``spacing`` inside a box of half-width ``radius``.

    ``radius=None`` derives the box from the sub-differential bound.
    """

    spacing: float
    radius: float | None = None
    coarse_points: int = 64


def grid_argmin(f: Callable[[np.ndarray], np.ndarray], dim: int, radius: float,
                spacing: float, center=None, coarse_points: int = 64) -> np.ndarray:
    """Argmin of a convex function over a ``spacing``-grid of the box.

    The whole box is scanned at a coarse spacing, then ever finer windows are
    scanned around the running argmin until the target spacing is reached.
    Windows are re-centred while the argmin sits on their edge.  The final
    answer is a node of the grid ``center + spacing * Z^dim``.

    Along the valley of a maximum of smooth pieces the discrete argmin can
    drift from the true minimizer by order ``spacing^(2/3)``.

    Raises :class:`GridResolutionError` when the coarse argmin lies on the
    outer boundary, i.e. the box does not bracket the minimizer.
    """
    center = np.zeros(dim) if center is None else np.asarray(center, dtype=float)
    n_half = max(1, int(math.ceil(radius / spacing)))
    # coarse level: integer multiples of the final spacing
    stride = max(1, int(math.ceil(2 * n_half / coarse_points)))
    idx = np.arange(-n_half, n_half + 1, stride)
    if idx[-1] != n_half:
        idx = np.append(idx, n_half)
    mesh = np.stack(np.meshgrid(*([idx] * dim), indexing="ij"), -1).reshape(-1, dim)
    vals = f(center + spacing * mesh)
    best = mesh[int(np.argmin(vals))]
    if np.any(np.abs(best) == n_half) and n_half > 1:
        raise GridResolutionError("grid argmin on the search-box boundary; enlarge the radius")
    while stride > 1:
        new_stride = max(1, stride // 8)
        half = 2 * stride
        for _ in range(100):
            offs = np.arange(-half, half + 1, new_stride)
            mesh = best + np.stack(np.meshgrid(*([offs] * dim), indexing="ij"), -1).reshape(-1, dim)
            mesh = mesh[np.all(np.abs(mesh) <= n_half, axis=1)]
            vals = f(center + spacing * mesh)
            j = int(np.argmin(vals))
            moved = mesh[j]
            on_edge = np.any(np.abs(moved - best) >= half - new_stride // 2)
            best = moved
            if not on_edge:
                break
        stride = new_stride
    return center + spacing * best


def h_gradient_lagrangian(potential: SemiconcavePotential, ham: Hamiltonian, X,
                          grid: GridSpec) -> np.ndarray:
    """Lagrangian form: argmin of ``l(Q) - phi'_X(Q)`` on a grid.

    ``Q`` ranges over ``linear + range(quadratic)`` where ``l`` is finite.
    A grid scan brackets the minimizer; the epigraph form of the same
    objective, ``min |z|^2_w / 2 + s`` subject to ``s >= -P_i . Q(z)``, is
    then solved from the grid argmin and the answer snapped to the grid.
    The plain discrete argmin alone can sit many cells away from the
    minimizer when it lies on a kink.
    """
    X = np.asarray(X, dtype=float)
    D = potential.subdifferential(X)
    if len(D) == 0:
        raise InvalidPotentialError("empty sub-differential")
    P = D.elements
    V, w = ham.range_basis()
    L = ham.linear
    r = V.shape[1]
    if r == 0:
        return L.copy()
    radius = grid.radius
    if radius is None:
        bound = float(np.max(np.linalg.norm(P, axis=1))) * float(w.max())
        radius = 1.25 * bound + 10 * grid.spacing

    def objective(Z):
        Q = L + Z @ V.T
        return 0.5 * np.sum(Z * Z / w, axis=1) - np.min(Q @ P.T, axis=1)

    z = grid_argmin(objective, r, radius, grid.spacing, coarse_points=grid.coarse_points)
    A = P @ V  # constraint rows: s + A z + P.L >= 0
    b = P @ L
    y0 = np.append(z, -float(np.min(A @ z + b)))
    res = minimize(
        lambda y: 0.5 * float(np.sum(y[:r] ** 2 / w)) + y[r],
        y0,
        jac=lambda y: np.append(y[:r] / w, 1.0),
        constraints=[{"type": "ineq", "fun": lambda y: y[r] + A @ y[:r] + b,
                      "jac": lambda y: np.hstack([A, np.ones((len(b), 1))])}],
        method="SLSQP",
        options={"ftol": 1e-15, "maxiter": 500},
    )
    # SLSQP often flags a converged point as a failed line search, so judge by the objective
    zr = res.x[:r]
    if np.all(np.isfinite(zr)) and objective(zr[None, :])[0] <= objective(z[None, :])[0]:
        z = grid.spacing * np.round(zr / grid.spacing)
    return L + V @ z


@dataclass(frozen=True)
class FlowMap:
    potential: SemiconcavePotential
    hamiltonian: Hamiltonian
    step_size: float = DEFAULT_STEP

    def __post_init__(self):
        if not self.step_size > 0:
            raise ValueError("step_size must be positive")

    def with_potential(self, potential) -> "FlowMap":
        return FlowMap(potential, self.hamiltonian, self.step_size)


@dataclass(frozen=True)
class Polyline:
    times: np.ndarray
    points: np.ndarray

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]


def flow(fmap: FlowMap, X0, T: float, step: float | None = None) -> Polyline:
    """One-way Euler polyline ``X_{k+1} = X_k + h grad_h phi(X_k)`` on ``[0, T]``.

    The last step is shortened when ``T`` is not a multiple of the step.
    """
    if T < 0:
        raise ValueError("horizon must be nonnegative")
    h = fmap.step_size if step is None else step
    n = int(math.ceil(T / h - 1e-9))
    X = np.array(X0, dtype=float).reshape(-1)
    times = [0.0]
    pts = [X.copy()]
    t = 0.0
    for k in range(n):
        dt = min(h, T - k * h) if k == n - 1 else h
        X = X + dt * h_gradient(fmap.potential, fmap.hamiltonian, X)
        t = (k + 1) * h if k < n - 1 else T
        times.append(t)
        pts.append(X.copy())
    return Polyline(np.array(times), np.array(pts))


def invariance_suite(fmap: FlowMap, lam: float, X_shift, t_shift: float, const: float,
                     X0, T: float) -> dict[str, float]:
    """Maximum violation of the four invariance properties of the flow map.

    * constant:    ``g_{phi+c} = g_phi``
    * translation: ``g_{phi(X - X1)}(X0 + X1) = g_phi(X0) + X1``
    * semigroup:   ``g^{t1+t2} = g^{t2} o g^{t1}`` with ``t1 = t_shift``
    * dilation:    ``g^{lam t}_{lam phi(X/lam)}(lam X0) = lam g^t_phi(X0)``

    The dilated flow is run with step ``lam * h`` so that both sides use the
    same discretization; the remaining violations are then round-off.
    """
    if lam < 1:
        raise ValueError("dilation factor must be >= 1")
    h = fmap.step_size
    X0 = np.asarray(X0, dtype=float)
    X_shift = np.asarray(X_shift, dtype=float)
    ref = flow(fmap, X0, T)

    shifted = flow(fmap.with_potential(fmap.potential.plus_constant(const)), X0, T)
    v_const = float(np.max(np.abs(shifted.points - ref.points)))

    moved = flow(fmap.with_potential(fmap.potential.translated(X_shift)), X0 + X_shift, T)
    v_trans = float(np.max(np.abs(moved.points - (ref.points + X_shift))))

    k1 = int(round(t_shift / h))
    t1 = k1 * h
    first = flow(fmap, X0, t1)
    second = flow(fmap, first.end, T - t1)
    v_semi = float(np.max(np.abs(second.end - ref.end)))

    dil = FlowMap(fmap.potential.dilated(lam), fmap.hamiltonian, lam * h)
    big = flow(dil, lam * X0, lam * T)
    v_dil = float(np.max(np.abs(big.points - lam * ref.points)))

    return {"constant": v_const, "translation": v_trans, "semigroup": v_semi, "dilation": v_dil}


def gronwall_bound(eps: float, alpha1: float, alpha2: float, C: float, B: float, t):
    """Upper bound for ``|delta X_2(t)|^2`` between two perturbed flows.

    ``eps`` is the sup-distance of the potentials, ``alpha1``/``alpha2`` the
    initial offsets in the kernel/range coordinates of the Hamiltonian,
    ``C`` satisfies ``2 e(dX) <= C |dX|^2`` and ``B`` bounds sub-differentials.
    """
    t = np.asarray(t, dtype=float)
    a = 2 * eps + C * alpha1 ** 2 + 2 * B * alpha1
    if C == 0:
        return 2 * a * t + alpha2 ** 2
    return a * np.expm1(2 * C * t) / C + alpha2 ** 2 * np.exp(2 * C * t)
