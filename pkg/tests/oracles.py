"""Independent reference computations used by the tests.

Each oracle solves the same problem as the library by a different and
deliberately naive route.
"""

import itertools
import math

import numpy as np


def brute_force_ball(P):
    """Smallest enclosing ball by trying every subset of at most ``d + 1`` points.

    The circumsphere of a subset is found by least squares in its affine hull.
    """
    P = np.asarray(P, dtype=float)
    n, d = P.shape
    best = None
    for k in range(1, min(n, d + 1) + 1):
        for idx in itertools.combinations(range(n), k):
            S = P[list(idx)]
            D = S[1:] - S[0]
            if k > 1:
                mu, *_ = np.linalg.lstsq(D @ D.T, 0.5 * np.sum(D * D, axis=1), rcond=None)
                c = S[0] + mu @ D
            else:
                c = S[0]
            r = float(np.max(np.linalg.norm(S - c, axis=1)))
            if np.max(np.linalg.norm(P - c, axis=1)) <= r + 1e-12 and (best is None or r < best[1]):
                best = (c, r)
    return best


def fd_psi(phi0_values, nu: float, T: float, L: float = 2 * math.pi, dt: float = 2e-4):
    """Method of lines for ``psi_t + psi_x^2/2 = nu psi_xx`` on a periodic grid.

    Fourth-order differences in space, RK4 in time.  Returns the grid values at ``T``.
    """
    p = np.array(phi0_values, dtype=float)
    N = p.size
    dx = L / N

    def rhs(p):
        px = (-np.roll(p, -2) + 8 * np.roll(p, -1) - 8 * np.roll(p, 1) + np.roll(p, 2)) / (12 * dx)
        pxx = (-np.roll(p, -2) + 16 * np.roll(p, -1) - 30 * p + 16 * np.roll(p, 1) - np.roll(p, 2)) / (12 * dx * dx)
        return nu * pxx - 0.5 * px * px

    n = int(round(T / dt))
    for _ in range(n):
        k1 = rhs(p)
        k2 = rhs(p + 0.5 * dt * k1)
        k3 = rhs(p + 0.5 * dt * k2)
        k4 = rhs(p + dt * k3)
        p = p + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return p


def spectral_eval(values, x, L: float = 2 * math.pi):
    """Trigonometric interpolation of periodic grid values at points ``x``."""
    N = len(values)
    c = np.fft.rfft(values) / N
    k = np.arange(c.size) * (2 * math.pi / L)
    x = np.atleast_1d(x)
    m = N // 2
    terms = c[1:m, None] * np.exp(1j * k[1:m, None] * x[None, :])
    return np.real(c[0] + 2 * terms.sum(axis=0))


def cos_characteristics(x: float, t: float, L: float = 2 * math.pi):
    """Roots of ``a - t sin a = x`` near ``x`` by dense scan and bisection.

    These are the critical points of ``cos a + (x - a)^2 / (2t)``.
    """
    f = lambda a: a - t * math.sin(a) - x
    grid = np.linspace(x - t - 1, x + t + 1, 20001)
    v = grid - t * np.sin(grid) - x
    roots = []
    for i in np.flatnonzero(np.sign(v[:-1]) != np.sign(v[1:])):
        lo, hi = grid[i], grid[i + 1]
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if (f(lo) > 0) == (f(mid) > 0):
                lo = mid
            else:
                hi = mid
        roots.append(0.5 * (lo + hi))
    return roots


def cos_hopf_lax(x: float, t: float):
    """Value and global minimizers of ``cos a + (x - a)^2/(2t)`` via characteristics."""
    roots = cos_characteristics(x, t)
    vals = [math.cos(a) + (x - a) ** 2 / (2 * t) for a in roots]
    m = min(vals)
    return m, [a for a, v in zip(roots, vals) if v <= m + 1e-9]


def dense_double_minimizers(F, lo: float, hi: float, n: int = 400001, rel: float = 1e-6):
    """Distinct near-global minima of ``F`` on a dense grid."""
    a = np.linspace(lo, hi, n)
    v = F(a)
    m = v.min()
    idx = np.flatnonzero(v <= m + rel * max(1.0, abs(m)))
    groups = np.split(idx, np.flatnonzero(np.diff(idx) > 1) + 1)
    return [float(a[g[np.argmin(v[g])]]) for g in groups]


def tie_loci_by_distance(points, tau: float, box, n: int = 300):
    """Cells of the grid where the nearest (tau < 0) or farthest (tau > 0) of
    ``tau p_i`` changes between neighbours; returns cell centers and cell size."""
    S = tau * np.asarray(points, dtype=float)
    xs = np.linspace(box[0], box[1], n)
    ys = np.linspace(box[2], box[3], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    D = (X[..., None] - S[:, 0]) ** 2 + (Y[..., None] - S[:, 1]) ** 2
    lab = np.argmax(D, axis=-1) if tau > 0 else np.argmin(D, axis=-1)
    mark = np.zeros(lab.shape, dtype=bool)
    dx = lab[1:, :] != lab[:-1, :]
    dy = lab[:, 1:] != lab[:, :-1]
    mark[1:, :] |= dx
    mark[:-1, :] |= dx
    mark[:, 1:] |= dy
    mark[:, :-1] |= dy
    return np.stack([X[mark], Y[mark]], axis=1), float(xs[1] - xs[0]), lab


def sample_edges(cx, spacing: float):
    pts = []
    for e in cx.edges:
        seg = e.segment(cx.box)
        if seg is None:
            continue
        a, b = seg
        m = max(2, int(math.ceil(np.linalg.norm(b - a) / spacing)) + 1)
        pts.append(a + np.linspace(0, 1, m)[:, None] * (b - a))
    return np.concatenate(pts) if pts else np.zeros((0, 2))


def hausdorff(A, B):
    dAB = np.sqrt(((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)).min(axis=1).max()
    dBA = np.sqrt(((B[:, None, :] - A[None, :, :]) ** 2).sum(-1)).min(axis=1).max()
    return float(max(dAB, dBA))


def analytic_a3(g, c_b, A4, B, t_star):
    """Closed-form coefficients of the constructed planar A3 family."""
    g = np.asarray(g, dtype=float)
    ts = t_star
    return {
        "A": A4,
        "B": np.array([B]),
        "C": np.array([[0.5 * (c_b + 1 / ts)]]),
        "alpha": np.array([-1 / ts, 0.0, g[0] / ts]),
        "beta": np.array([0.0, 0.0, -1 / (2 * ts * ts)]),
        "gamma": np.array([[0.0, -1 / ts, g[1] / ts]]),
        "p_star": g,
        "U_star": 0.0,
    }
