"""Limit trajectories ``x'(t) = u(x(t), t)`` with adhesion.

The limit velocity is only one-way continuous along trajectories, so the
integrator is the explicit one-way Euler scheme.  A sample is flagged as
merged once the particle has reached a shock: either several branches are
active there, or the branch carrying the particle stopped being the
minimal one between two samples (the step jumped across the shock).  After
that the flag stays set; the Euler step keeps the particle within one step
of the shock because the velocities on both sides point into it.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .convex_core import min_enclosing_ball
from .limit_potential import PotentialModel

__all__ = [
    "LimitTrajectory",
    "Preimages",
    "ReachabilityWarning",
    "UniquenessReport",
    "backward_reachability",
    "forward_uniqueness_check",
    "integrate",
]


class ReachabilityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class LimitTrajectory:
    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    merge_flags: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if not (len(self.times) == len(self.positions) == len(self.velocities) == len(self.merge_flags)):
            raise ValueError("trajectory arrays have different lengths")
        for name in ("times", "positions", "velocities", "merge_flags"):
            getattr(self, name).setflags(write=False)

    @property
    def end(self) -> np.ndarray:
        return self.positions[-1]

    @property
    def merge_time(self) -> float | None:
        idx = np.flatnonzero(self.merge_flags)
        return float(self.times[idx[0]]) if idx.size else None

    def __len__(self):
        return len(self.times)


def _n_steps(t0: float, T: float, step: float) -> int:
    return int(math.ceil((T - t0) / step - 1e-9))


def integrate(model: PotentialModel, x0, t0: float, T: float, step: float = 1e-3,
              tol: float | None = None) -> LimitTrajectory:
    """One-way Euler polyline of the limit velocity field from ``(x0, t0)`` to ``T``."""
    if not step > 0:
        raise ValueError("step must be positive")
    if T < t0:
        raise ValueError("T must not precede t0")
    n = _n_steps(t0, T, step)
    x = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    d = x.size
    times = np.empty(n + 1)
    pos = np.empty((n + 1, d))
    vel = np.empty((n + 1, d))
    flags = np.zeros(n + 1, dtype=bool)
    merged = False
    prev_key = None
    t = float(t0)
    for k in range(n + 1):
        brs = model.branches(x, t)
        act = model.active_branches(x, t, tol, branches=brs)
        if len(act) >= 2:
            merged = True
        elif not merged and prev_key is not None:
            cont = model.match(prev_key, brs)
            if cont is None or cont.key != act[0].key:
                merged = True
        prev_key = act[0].key if len(act) == 1 else None
        v = min_enclosing_ball(np.array([b.momentum for b in act])).center
        times[k], pos[k], vel[k], flags[k] = t, x, v, merged
        if k < n:
            h = min(step, T - t)
            x = x + h * v
            t = T if k == n - 1 else t0 + (k + 1) * step
    return LimitTrajectory(times, pos, vel, flags)


@dataclass(frozen=True)
class UniquenessReport:
    met: bool
    first_meet_time: float | None
    post_meet_max_gap: float
    bound: float
    meet_tol: float
    velocity_bound: float

    @property
    def passed(self) -> bool:
        return (not self.met) or self.post_meet_max_gap <= self.bound

    def to_dict(self) -> dict:
        return {
            "met": self.met,
            "first_meet_time": self.first_meet_time,
            "post_meet_max_gap": self.post_meet_max_gap,
            "bound": self.bound,
            "meet_tol": self.meet_tol,
            "velocity_bound": self.velocity_bound,
            "passed": self.passed,
        }


def _velocity_bound(model: PotentialModel, *trajs: LimitTrajectory) -> float:
    B = model.velocity_bound()
    if B is None:
        B = max(float(np.max(np.linalg.norm(tr.velocities, axis=1))) for tr in trajs)
    return float(B)


def forward_uniqueness_check(model: PotentialModel, x0a, x0b, T: float, step: float = 1e-3,
                             t0: float = 0.0, t_meet_tol: float | None = None,
                             tol: float | None = None) -> UniquenessReport:
    """Integrate two trajectories and measure their separation after they meet.

    They *meet* at the first sample closer than ``t_meet_tol`` (default
    ``3 step B`` with ``B`` the velocity bound).  At every later sample the
    separation must stay below ``2 step B``.
    """
    ta = integrate(model, x0a, t0, T, step, tol)
    tb = integrate(model, x0b, t0, T, step, tol)
    B = _velocity_bound(model, ta, tb)
    meet_tol = 3 * step * B if t_meet_tol is None else t_meet_tol
    gap = np.linalg.norm(ta.positions - tb.positions, axis=1)
    hits = np.flatnonzero(gap <= meet_tol)
    if hits.size == 0:
        return UniquenessReport(False, None, float("nan"), 2 * step * B, meet_tol, B)
    i = int(hits[0])
    after = gap[i + 1:]
    post = float(after.max()) if after.size else 0.0
    return UniquenessReport(True, float(ta.times[i]), post, 2 * step * B, meet_tol, B)


@dataclass(frozen=True)
class Preimages:
    points: np.ndarray
    tolerance: float
    warning: str | None = None

    def __len__(self):
        return len(self.points)


def backward_reachability(model: PotentialModel, x_star, t_star: float, sample_count: int = 64,
                          t0: float = 0.0, step: float = 1e-2, radius: float | None = None,
                          tol: float | None = None) -> Preimages:
    """Initial points whose trajectories pass through ``x_star`` at ``t_star``.

    Starting points are sampled in a box around ``x_star`` whose half-width
    is ``B (t_star - t0)`` plus a margin; trajectories are shot forward with
    the one-way Euler integrator.  In one dimension the order-preserving map
    ``a -> X(a)`` is bracketed on the samples and bisected: an isolated
    preimage is a sign change of ``X(a) - x_star``, while a shock target has
    a whole interval of preimages whose two end points are returned.  In
    higher dimensions the sampled points within tolerance are returned.
    """
    if not t_star > t0:
        raise ValueError("t_star must be after t0")
    xs = np.atleast_1d(np.asarray(x_star, dtype=float))
    d = xs.size
    B = model.velocity_bound()
    if B is None:
        B = float(np.max(np.linalg.norm(model.active_momenta(xs, t_star).elements, axis=1)))
    tol = 3 * step * max(B, 1e-12) if tol is None else tol
    R = (B * (t_star - t0) + 4 * tol) if radius is None else radius

    def shoot(a):
        tr = integrate(model, a, t0, t_star, step)
        return tr.end, bool(tr.merge_flags[-1])

    if d > 1:
        axes = [np.linspace(c - R, c + R, sample_count) for c in xs]
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d)
        hits = np.array([g for g in grid if np.linalg.norm(shoot(g)[0] - xs) <= tol])
        msg = None
        if hits.size == 0:
            msg = "no preimage found on the sample grid; refine"
            warnings.warn(msg, ReachabilityWarning)
            hits = np.zeros((0, d))
        return Preimages(hits, tol, msg)

    a = np.linspace(xs[0] - R, xs[0] + R, sample_count)
    shots = [shoot(ai) for ai in a]
    r = np.array([e[0] for e, _ in shots]) - xs[0]
    # a shock target collects an interval of merged trajectories
    inside = (np.abs(r) <= tol) & np.array([m for _, m in shots])

    def bisect(lo, hi, pred, iters=50):
        # pred(lo) is False, pred(hi) is True
        for _ in range(iters):
            if abs(hi - lo) <= 1e-10 * max(1.0, abs(lo)):
                break
            mid = 0.5 * (lo + hi)
            if pred(mid):
                hi = mid
            else:
                lo = mid
        return hi

    def captured(ai):
        e, m = shoot(ai)
        return m and abs(e[0] - xs[0]) <= tol

    found = []
    if np.any(inside):
        idx = np.flatnonzero(inside)
        i0, i1 = int(idx[0]), int(idx[-1])
        left = a[i0] if i0 == 0 else bisect(a[i0 - 1], a[i0], captured)
        right = a[i1] if i1 == len(a) - 1 else bisect(a[i1 + 1], a[i1], captured)
        found = [left] if abs(right - left) <= 1e-9 else [left, right]
    else:
        sc = np.flatnonzero(np.sign(r[:-1]) != np.sign(r[1:]))
        for j in sc:
            lo, hi = a[j], a[j + 1]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                rm = shoot(mid)[0][0] - xs[0]
                if rm == 0 or hi - lo <= 1e-10 * max(1.0, abs(mid)):
                    lo = hi = mid
                    break
                if np.sign(rm) == np.sign(r[j]):
                    lo = mid
                else:
                    hi = mid
            found.append(0.5 * (lo + hi))
    msg = None
    if not found:
        msg = "no preimage found on the sample grid; refine"
        warnings.warn(msg, ReachabilityWarning)
    return Preimages(np.array(found, dtype=float).reshape(-1, 1), tol, msg)
