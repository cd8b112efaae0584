"""Exact viscous reference solution on the circle (no force).

The Cole-Hopf substitution ``psi = -2 nu log w`` turns the viscous potential
equation ``psi_t + psi_x^2/2 = nu psi_xx`` into the heat equation
``w_t = nu w_xx``.  Hence

    psi(x, t) = -2 nu log( (4 pi nu t)^(-1/2) int exp(-[phi0(a) + (x-a)^2/(2t)]/(2 nu)) da ),

which is evaluated by a Riemann sum with a running-max log-sum-exp.  This
normalization gives ``psi(., 0) = phi0`` exactly, so the spatial means agree
at ``t = 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .fourier import FourierSeries
from .hgrad import Polyline

__all__ = [
    "SemiconcavityReport",
    "ViscousSolution",
    "second_derivative_bound_check",
    "second_difference_sample",
    "spacetime_hessian_bound",
    "viscous_trajectory",
]

#: terms whose exponent is this far below the maximum are dropped
_LOG_CUTOFF = 40.0
_CHUNK = 2_000_000


@dataclass(frozen=True)
class ViscousSolution:
    phi0: FourierSeries
    nu: float
    quadrature_points: int = 4096
    _osc: float = field(init=False, repr=False, compare=False)
    _curv: float = field(init=False, repr=False, compare=False)
    _table: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.phi0.dim != 1:
            raise ValueError("the viscous solution is implemented in one dimension")
        if not self.nu > 0:
            raise ValueError("viscosity must be positive")
        if self.quadrature_points < 256:
            raise ValueError("quadrature_points must be at least 256")
        object.__setattr__(self, "_osc", self.phi0.oscillation())
        amp = np.hypot(self.phi0.cos_coeffs, self.phi0.sin_coeffs)
        curv = float(np.sum(amp * self.phi0._freq[:, 0] ** 2))
        object.__setattr__(self, "_curv", curv)
        _, tab = self.phi0.sample_grid(self.quadrature_points)
        object.__setattr__(self, "_table", tab)

    @property
    def period(self) -> float:
        return float(self.phi0.period[0])

    def _spacing(self, t: np.ndarray) -> np.ndarray:
        """Quadrature spacing: the periodic grid, refined where the kernel is narrow."""
        h = self.period / self.quadrature_points
        width = np.sqrt(2 * self.nu * t / (1.0 + t * self._curv))
        return np.minimum(h, width / 8.0)

    def _lse(self, x: np.ndarray, t: np.ndarray, with_velocity: bool):
        """Log of the heat-kernel integral and the weighted mean momentum."""
        hq = self._spacing(t)
        W = np.sqrt(2 * t * (self._osc + 2 * _LOG_CUTOFF * self.nu)) + 2 * hq
        K = np.ceil(W / hq).astype(np.int64)
        h0 = self.period / self.quadrature_points
        on_grid = hq >= h0
        logI = np.empty(x.size)
        vel = np.empty(x.size) if with_velocity else None
        for group in (np.flatnonzero(on_grid), np.flatnonzero(~on_grid)):
            order = group[np.argsort(K[group], kind="stable")]
            s = 0
            while s < order.size:
                kmax = int(K[order[min(s + 127, order.size - 1)]])
                e = min(order.size, s + max(128, _CHUNK // (2 * kmax + 1)))
                sel = order[s:e]
                kmax = int(K[sel].max())
                off = np.arange(-kmax, kmax + 1)
                xs, ts, hs = x[sel], t[sel], hq[sel]
                # grid anchored to multiples of the spacing
                base = np.floor(xs / hs)
                r = (xs - base * hs)[:, None] - off[None, :] * hs[:, None]
                if on_grid[sel[0]]:
                    phi = self._window_table(base.astype(np.int64), kmax)
                else:
                    phi = self.phi0((base[:, None] + off[None, :]) * hs[:, None])
                E = -(phi + r * r / (2 * ts[:, None])) / (2 * self.nu)
                E[np.abs(off)[None, :] > K[sel][:, None]] = -np.inf
                m = E.max(axis=1)
                w = np.exp(E - m[:, None])
                S = w.sum(axis=1)
                logI[sel] = m + np.log(S) + np.log(hs) - 0.5 * np.log(4 * np.pi * self.nu * ts)
                if with_velocity:
                    vel[sel] = (w * r).sum(axis=1) / S / ts
                s = e
        return logI, vel

    def _window_table(self, base: np.ndarray, K: int) -> np.ndarray:
        n = self.quadrature_points
        tab = self._table
        ext = tab[np.mod(np.arange(-K, n + K + 1), n)]
        return np.lib.stride_tricks.sliding_window_view(ext, 2 * K + 1)[np.mod(base, n)]

    def psi(self, x, t):
        """``psi^nu(x, t)``; arrays broadcast."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise ValueError("time must be nonnegative")
        shape = x.shape
        x, t = x.reshape(-1), t.reshape(-1)
        out = np.empty(x.size)
        zero = t == 0
        out[zero] = self.phi0(x[zero])
        if np.any(~zero):
            logI, _ = self._lse(x[~zero], t[~zero], False)
            out[~zero] = -2 * self.nu * logI
        return out.reshape(shape) if shape else float(out[0])

    def velocity(self, x, t):
        """``psi_x`` as the kernel-weighted mean of ``(x - a)/t``."""
        x, t = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(t, dtype=float))
        if np.any(t < 0):
            raise ValueError("time must be nonnegative")
        shape = x.shape
        x, t = x.reshape(-1), t.reshape(-1)
        out = np.empty(x.size)
        zero = t == 0
        out[zero] = self.phi0.gradient(x[zero])
        if np.any(~zero):
            _, v = self._lse(x[~zero], t[~zero], True)
            out[~zero] = v
        return out.reshape(shape) if shape else float(out[0])


def psi_eval(S: ViscousSolution, x, t):
    return S.psi(x, t)


def viscous_velocity(S: ViscousSolution, x, t):
    return S.velocity(x, t)


def viscous_trajectory(S: ViscousSolution, a, T: float, step: float = 1e-3) -> Polyline:
    """RK4 paths of ``y' = psi_x(y, t)`` from the starting points ``a``.

    ``a`` may be a scalar or an array; the result has points of shape
    ``(n_steps + 1, n_starts)``.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    y = np.atleast_1d(np.asarray(a, dtype=float)).copy()
    n = int(math.ceil(T / step - 1e-9))
    times = np.empty(n + 1)
    pts = np.empty((n + 1, y.size))
    times[0], pts[0] = 0.0, y
    t = 0.0
    for k in range(n):
        h = min(step, T - t)
        k1 = S.velocity(y, t)
        k2 = S.velocity(y + 0.5 * h * k1, t + 0.5 * h)
        k3 = S.velocity(y + 0.5 * h * k2, t + 0.5 * h)
        k4 = S.velocity(y + h * k3, t + h)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t = T if k == n - 1 else (k + 1) * step
        times[k + 1], pts[k + 1] = t, y
    return Polyline(times, pts)


def spacetime_hessian_bound(phi0: FourierSeries, nu: float = 0.0, samples: int = 4096) -> float:
    """Largest eigenvalue of the space-time Hessian of ``psi^nu`` at ``t = 0``.

    The time derivatives follow from the equation itself:
    ``psi_t = nu psi_xx - psi_x^2/2``.  This is the constant of the
    maximum-principle bound on second derivatives along unit space-time
    directions (no force).
    """
    x = np.arange(samples) * (float(phi0.period[0]) / samples)
    f1, f2, f3, f4 = (phi0.derivative(x, k) for k in (1, 2, 3, 4))
    hxx = f2
    hxt = nu * f3 - f1 * f2
    htt = nu * nu * f4 - nu * (f2 * f2 + 2 * f1 * f3) + f1 * f1 * f2
    tr, det = hxx + htt, hxx * htt - hxt * hxt
    lam = 0.5 * tr + np.sqrt(np.maximum(0.25 * tr * tr - det, 0.0))
    return float(lam.max())


def second_difference_sample(fn, period: float, T: float, n_samples: int, directions: int,
                             delta: float, seed: int, t_min: float | None = None):
    """Second difference quotients of ``fn(x, t)`` on random space-time samples.

    Directions are ``(cos theta_j, sin theta_j)`` with ``theta_j = j pi / directions``.
    Returns the quotient array of shape ``(n_samples, directions)`` and the samples.
    """
    rng = np.random.default_rng(seed)
    t_lo = delta if t_min is None else t_min
    x = rng.uniform(0.0, period, n_samples)
    t = rng.uniform(t_lo, T, n_samples)
    th = np.arange(directions) * np.pi / directions
    qx, qt = np.cos(th), np.sin(th)
    X = np.concatenate([x, (x[:, None] + delta * qx).ravel(), (x[:, None] - delta * qx).ravel()])
    Tm = np.concatenate([t, (t[:, None] + delta * qt).ravel(), (t[:, None] - delta * qt).ravel()])
    v = fn(X, Tm)
    c = v[:n_samples]
    p = v[n_samples:n_samples * (1 + directions)].reshape(n_samples, directions)
    m = v[n_samples * (1 + directions):].reshape(n_samples, directions)
    return (p - 2 * c[:, None] + m) / delta ** 2, x, t


@dataclass(frozen=True)
class SemiconcavityReport:
    max_quotient: float
    argmax_x: float
    argmax_t: float
    argmax_theta: float
    nominal_bound: float
    spacetime_bound: float
    tolerance: float
    samples: int

    @property
    def within_nominal(self) -> bool:
        return self.max_quotient <= self.nominal_bound + self.tolerance

    @property
    def within_spacetime(self) -> bool:
        return self.max_quotient <= self.spacetime_bound + self.tolerance

    def to_dict(self) -> dict:
        return {
            "max_quotient": self.max_quotient,
            "argmax": {"x": self.argmax_x, "t": self.argmax_t, "theta": self.argmax_theta},
            "nominal_bound": self.nominal_bound,
            "spacetime_bound": self.spacetime_bound,
            "tolerance": self.tolerance,
            "samples": self.samples,
            "within_nominal": self.within_nominal,
            "within_spacetime": self.within_spacetime,
        }


def second_derivative_bound_check(S: ViscousSolution, T: float, direction_samples: int = 8,
                                  delta: float = 1e-3, n_samples: int = 10_000, seed: int = 0,
                                  tol: float = 1e-2) -> SemiconcavityReport:
    """Largest sampled ``psi_QQ`` over unit space-time directions ``Q``.

    ``nominal_bound`` is ``max phi0''``.  ``spacetime_bound`` is the largest
    eigenvalue of the full space-time Hessian at ``t = 0``, which also picks
    up the time derivatives implied by the equation.
    """
    q, x, t = second_difference_sample(S.psi, S.period, T, n_samples, direction_samples, delta, seed)
    i, j = np.unravel_index(int(np.argmax(q)), q.shape)
    grid = np.arange(4096) * (S.period / 4096)
    nominal = max(0.0, float(np.max(S.phi0.derivative(grid, 2))))
    st = max(0.0, spacetime_hessian_bound(S.phi0, S.nu))
    return SemiconcavityReport(float(q[i, j]), float(x[i]), float(t[i]),
                               float(j * np.pi / direction_samples), nominal, st, tol, int(q.size))
