"""Seeded verification suites behind ``adhesion verify``.

Every suite returns a :class:`SuiteResult` whose report is plain JSON data
containing no timings or other run-dependent values, so that identical
seeds give identical bytes.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .convex_core import MomentumSet, circumcenter, min_enclosing_ball, triangle_cosines
from .fourier import FourierSeries
from .hgrad import (
    FlowMap,
    GridSpec,
    Hamiltonian,
    SemiconcavePotential,
    flow,
    h_gradient,
    h_gradient_lagrangian,
    invariance_suite,
)
from .limit_potential import (
    A3EndpointModel,
    GenericityError,
    HopfLaxPotential,
    LocalLinearModel,
    a3_shock_halfplane,
    a3_tangent_check,
    extract_a3_model,
)
from .shock_geometry import (
    ConfigClass,
    NodeClass,
    affine_diagram,
    classify_configuration,
    classify_node,
    node_trapping,
    shock_diagram,
)
from .trajectory import forward_uniqueness_check, integrate
from .viscous import (ViscousSolution, second_derivative_bound_check, second_difference_sample,
                      spacetime_hessian_bound, viscous_trajectory)

__all__ = [
    "CONVERGENCE_NU",
    "SUITES",
    "SuiteResult",
    "constructed_a3_family",
    "convergence_table",
    "grid_tie_points",
    "hausdorff",
    "run_suite",
    "trajectory_convergence",
]

CONVERGENCE_NU = (0.1, 0.05, 0.02, 0.01)
TRAJECTORY_NU = (0.1, 0.05, 0.02, 0.01, 0.005)
TRAJECTORY_STARTS = (math.pi / 2, math.pi / 4, 3 * math.pi / 2)
GOLDEN = "convergence_golden.json"


@dataclass
class SuiteResult:
    name: str
    seed: int
    passed: bool
    report: dict
    counterexamples: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "suite": self.name,
            "seed": self.seed,
            "passed": self.passed,
            "report": self.report,
            "counterexamples": self.counterexamples,
        }

    def to_json(self) -> str:
        return json.dumps(_plain(self.to_dict()), indent=2, sort_keys=True) + "\n"


def _plain(obj):
    """Recursively convert numpy scalars and arrays to JSON-ready values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    return obj


# ---------------------------------------------------------------------------
# shared computations
# ---------------------------------------------------------------------------


def convergence_table(phi0: FourierSeries, nus, T: float, n_grid: int = 512) -> list[dict]:
    """Mean-aligned sup-differences between viscous and limit potentials at ``T``."""
    x = np.arange(n_grid) * (float(phi0.period[0]) / n_grid)
    phi = HopfLaxPotential(phi0).value_many(x, np.full(n_grid, T))
    rows = []
    for nu in nus:
        psi = ViscousSolution(phi0, nu).psi(x, np.full(n_grid, T))
        d = psi - phi
        rows.append({"nu": float(nu), "sup_diff": float(np.max(np.abs(d - d.mean())))})
    return rows


def strictly_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))


def trajectory_convergence(phi0: FourierSeries, starts, nus, T: float, step: float = 1e-3) -> dict:
    """Viscous paths for decreasing ``nu`` against the limit trajectories."""
    paths = [viscous_trajectory(ViscousSolution(phi0, nu), np.asarray(starts), T, step).points for nu in nus]
    gaps = [float(np.max(np.abs(a - b))) for a, b in zip(paths[:-1], paths[1:])]
    model = HopfLaxPotential(phi0)
    limit = [integrate(model, s, 0.0, T, step) for s in starts]
    ends = np.array([tr.end[0] for tr in limit])
    end_gap = np.abs(ends - paths[-1][-1])
    return {
        "nu": [float(v) for v in nus],
        "consecutive_sup_distance": gaps,
        "decreasing": strictly_decreasing(gaps),
        "limit_endpoints": ends,
        "viscous_endpoints": paths[-1][-1],
        "endpoint_gap": end_gap,
        "merge_times": [tr.merge_time for tr in limit],
    }


def grid_tie_points(P, c, box, n: int = 400) -> tuple[np.ndarray, float]:
    """Centers of grid cells whose minimizing index differs from a neighbour's.

    Returns the points and the cell size.
    """
    P, c = np.asarray(P, dtype=float), np.asarray(c, dtype=float)
    xs = np.linspace(box[0], box[1], n)
    ys = np.linspace(box[2], box[3], n)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    lab = np.argmin(X[..., None] * P[:, 0] + Y[..., None] * P[:, 1] + c, axis=-1)
    mark = np.zeros_like(lab, dtype=bool)
    dx = lab[1:, :] != lab[:-1, :]
    dy = lab[:, 1:] != lab[:, :-1]
    mark[1:, :] |= dx
    mark[:-1, :] |= dx
    mark[:, 1:] |= dy
    mark[:, :-1] |= dy
    h = max(xs[1] - xs[0], ys[1] - ys[0])
    return np.stack([X[mark], Y[mark]], axis=1), float(h)


def _edge_samples(cx, spacing: float) -> np.ndarray:
    pts = []
    for e in cx.edges:
        seg = e.segment(cx.box)
        if seg is None:
            continue
        a, b = seg
        m = max(2, int(math.ceil(np.linalg.norm(b - a) / spacing)) + 1)
        pts.append(a + np.linspace(0, 1, m)[:, None] * (b - a))
    return np.concatenate(pts) if pts else np.zeros((0, 2))


def hausdorff(A: np.ndarray, B: np.ndarray) -> float:
    from scipy.spatial import cKDTree

    if len(A) == 0 or len(B) == 0:
        return 0.0 if len(A) == len(B) else math.inf
    return float(max(cKDTree(B).query(A)[0].max(), cKDTree(A).query(B)[0].max()))


def _generic_momenta(rng, k: int) -> np.ndarray:
    from .limit_potential import check_planar_genericity

    while True:
        P = rng.normal(size=(k, 2))
        try:
            check_planar_genericity(P, right_tol=1e-6)
        except GenericityError:
            continue
        return P


def constructed_a3_family(g, c_b: float, A4: float, B: float, t_star: float, e1: float = 0.0, e2: float = 0.0):
    """Generating family ``F(xi, x, t) = phi0(xi) + |x - xi|^2 / (2t)`` in the plane with an
    A3 point at ``xi = 0``, ``x = t_star g``, ``t = t_star``."""
    g = np.asarray(g, dtype=float)

    def F(xi, x, t):
        a, b = xi
        phi0 = (g @ xi - a * a / (2 * t_star) + 0.5 * c_b * b * b + A4 * a ** 4 + 2 * B * a * a * b
                + e1 * a * b * b + e2 * b ** 3)
        y = np.asarray(x, dtype=float) - xi
        return phi0 + (y @ y) / (2 * t)

    return F


def constructed_a3_model(g, c_b: float, A4: float, B: float, t_star: float) -> A3EndpointModel:
    """Closed-form A3 model of :func:`constructed_a3_family`."""
    g = np.asarray(g, dtype=float)
    ts = t_star
    return A3EndpointModel(
        A=A4, B=[B], C=[[0.5 * (c_b + 1.0 / ts)]],
        alpha=[-1.0 / ts, 0.0, g[0] / ts],
        beta=[0.0, 0.0, -1.0 / (2 * ts * ts)],
        gamma=[[0.0, -1.0 / ts, g[1] / ts]],
        p_star=g, U_star=0.0, x_star=ts * g, t_star=ts,
        phi_star=float(0.5 * ts * (g @ g)),
    )


def _a3_trajectory_inside(M: A3EndpointModel, horizon: float, step: float) -> tuple[bool, float | None]:
    H = a3_shock_halfplane(M)
    tr = integrate(M, M.x_star, M.t_star, M.t_star + horizon, step)
    for x, t in zip(tr.positions[1:], tr.times[1:]):
        if not H.contains(M.local_coords(x, t)):
            return False, float(t - M.t_star)
    return True, None


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------


def suite_convergence(seed: int, step: float | None = None, tol: float | None = None) -> SuiteResult:
    phi0 = FourierSeries.cosine()
    h = 1e-3 if step is None else step
    cap = 0.05 if tol is None else tol
    table = convergence_table(phi0, CONVERGENCE_NU, 2.0)
    sup = [r["sup_diff"] for r in table]
    traj = trajectory_convergence(phi0, TRAJECTORY_STARTS, TRAJECTORY_NU, 3.0, h)
    report = {
        "benchmark": "phi0 = cos x, U = 0",
        "potential_table": table,
        "potential_decreasing": strictly_decreasing(sup),
        "potential_cap": cap,
        "trajectories": traj,
    }
    cex = []
    if not report["potential_decreasing"]:
        cex.append({"invariant": "sup-difference decreases in nu", "table": table})
    if not sup[-1] <= cap:
        cex.append({"invariant": "sup-difference cap at the smallest nu", "value": sup[-1], "cap": cap})
    if not traj["decreasing"]:
        cex.append({"invariant": "trajectory distances decrease in nu", "distances": traj["consecutive_sup_distance"]})
    if not np.all(traj["endpoint_gap"] <= 2e-2):
        cex.append({"invariant": "limit endpoint close to the viscous endpoint", "gap": traj["endpoint_gap"]})
    golden = json.loads(resources.files("adhesion.data").joinpath(GOLDEN).read_text())
    if step is None:
        dev = max(abs(a["sup_diff"] - b["sup_diff"]) for a, b in zip(table, golden["potential_table"]))
        report["golden_max_deviation"] = dev
        if not dev <= 1e-10:
            cex.append({"invariant": "table matches the stored golden values", "deviation": dev})
    else:
        report["golden_max_deviation"] = "skipped: non-default step"
    return SuiteResult("convergence", seed, not cex, report, cex)


def suite_uniqueness(seed: int, step: float | None = None, tol: float | None = None) -> SuiteResult:
    rng = np.random.default_rng(seed)
    h = 1e-3 if step is None else step
    model = HopfLaxPotential(FourierSeries.cosine())
    cex, rows = [], []
    gaps = []
    for hh in (h, h / 2):
        r = forward_uniqueness_check(model, -0.5, 0.5, 2.0, hh)
        rows.append({"model": "cos benchmark", "starts": [-0.5, 0.5], "step": hh, **r.to_dict()})
        gaps.append(r.post_meet_max_gap)
        if not (r.met and r.passed):
            cex.append(rows[-1])
    ratio = gaps[0] / gaps[1] if gaps[1] > 0 else math.inf
    # random planar local models: pairs started on both sides of an edge
    for _ in range(5):
        P = _generic_momenta(rng, 3)
        M = LocalLinearModel(MomentumSet(P))
        cx = shock_diagram(M, 1.0)
        e = cx.edges[int(rng.integers(len(cx.edges)))]
        s = e.s_max - 0.3 if math.isfinite(e.s_max) else e.s_min + 0.3
        base = e.point(s)
        nrm = np.array([-e.direction[1], e.direction[0]])
        delta = float(rng.uniform(0.02, 0.1))
        r = forward_uniqueness_check(M, base + delta * nrm, base - delta * nrm, 2.0, h, t0=1.0)
        rows.append({"model": "local", "momenta": P, "starts": [base + delta * nrm, base - delta * nrm],
                     "step": h, **r.to_dict()})
        if not (r.met and r.passed):
            cex.append(rows[-1])
    report = {"pairs": rows, "step_ratio_of_gaps": ratio}
    return SuiteResult("uniqueness", seed, not cex, report, cex)


def suite_geometry(seed: int, step: float | None = None, tol: float | None = None,
                   n_triangles: int = 1000, n_configs: int = 1000, n_diagrams: int = 10) -> SuiteResult:
    rng = np.random.default_rng(seed)
    eps = 1e-10 if tol is None else tol
    cex = []
    counts = {"Acute": 0, "Obtuse": 0, "RightDegenerate": 0}
    worst = 0.0
    for _ in range(n_triangles):
        P = rng.normal(size=(3, 2))
        try:
            c = classify_node(*P)
        except Exception as exc:  # collinear draws are measure zero
            cex.append({"triangle": P, "error": str(exc)})
            continue
        counts[c.kind.value] += 1
        if c.kind is NodeClass.ACUTE:
            err = float(np.linalg.norm(c.particle_velocity - circumcenter(*P)))
        elif c.kind is NodeClass.OBTUSE:
            i, j = c.exit_pair
            err = float(np.linalg.norm(c.particle_velocity - 0.5 * (P[i] + P[j])))
            side = [np.linalg.norm(P[(k + 1) % 3] - P[(k + 2) % 3]) for k in range(3)]
            if int(np.argmax(side)) not in ({0, 1, 2} - {i, j}):
                cex.append({"triangle": P, "invariant": "exit edge is the longest side"})
        else:
            continue
        worst = max(worst, err)
        if err > eps:
            cex.append({"triangle": P, "invariant": "ball center matches the triangle class", "error": err})
    classes = {"TotallyObtuse": 0, "Narrow": 0, "Wide": 0}
    transitions = {"Fifth": 0, "Sixth": 0}
    for _ in range(n_configs):
        P = _generic_momenta(rng, 4)
        try:
            cls = classify_configuration(P)
        except AssertionError:
            cex.append({"configuration": P, "invariant": "totally obtuse implies narrow"})
            continue
        classes[cls.config.value] += 1
        transitions[cls.transition.value] += 1
        if cls.config is ConfigClass.TOTALLY_OBTUSE and cls.support_size != 2:
            cex.append({"configuration": P, "invariant": "totally obtuse implies narrow"})
    diagrams = []
    for _ in range(n_diagrams):
        k = int(rng.integers(3, 5))
        P = _generic_momenta(rng, k)
        tau = float(rng.choice([-1.0, 1.0]))
        M = LocalLinearModel(MomentumSet(P))
        cx = shock_diagram(M, tau)
        pts, cell = grid_tie_points(P, M.offsets(tau), cx.box)
        dist = hausdorff(pts, _edge_samples(cx, cell / 2))
        trap = all(node_trapping(cx, n) == (n.kind is NodeClass.ACUTE) for n in cx.nodes)
        diagrams.append({"k": k, "tau": tau, "hausdorff_cells": dist / cell, "trapping_consistent": trap})
        if dist > 2 * cell or not trap:
            cex.append({"momenta": P, "tau": tau, **diagrams[-1]})
    report = {
        "triangles": n_triangles,
        "triangle_classes": counts,
        "max_center_error": worst,
        "configurations": n_configs,
        "configuration_classes": classes,
        "transitions": transitions,
        "diagrams": diagrams,
    }
    return SuiteResult("geometry", seed, not cex, report, cex)


def _random_semiconcave(rng, m: int):
    """A random semiconcave potential and a sample point, on a kink half the time."""
    X = rng.normal(size=m)
    if rng.random() < 0.5:
        k = int(rng.integers(2, 6))
        P, c = rng.normal(size=(k, m)), rng.normal(size=k)
        if rng.random() < 0.5:
            i, j = np.argsort(P @ X + c)[:2]
            n = P[i] - P[j]
            X = X - ((n @ X + c[i] - c[j]) / (n @ n)) * n
        return SemiconcavePotential.min_of_affine(P, c), "affine", X
    k = int(rng.integers(1, 4))
    pieces = []
    for _ in range(k):
        G = rng.normal(size=(m, m))
        pieces.append((0.3 * (G + G.T) / 2 - np.eye(m), rng.normal(size=m), rng.normal()))
    return SemiconcavePotential.min_of_quadratics(pieces), "quadratics", X


def suite_hgrad(seed: int, step: float | None = None, tol: float | None = None,
                n_potentials: int = 100, n_homogeneous: int = 20) -> SuiteResult:
    rng = np.random.default_rng(seed)
    spacing = 1e-3
    h = 1e-4 if step is None else step
    cex = []
    worst_dual = 0.0
    for _ in range(n_potentials):
        d = int(rng.integers(1, 3))
        ham = Hamiltonian.burgers(d)
        pot, family, X = _random_semiconcave(rng, d + 1)
        v1 = h_gradient(pot, ham, X)
        v2 = h_gradient_lagrangian(pot, ham, X, GridSpec(spacing))
        r = ham.range_basis()[0].shape[1]
        err = float(np.linalg.norm(v1 - v2))
        worst_dual = max(worst_dual, err)
        if err > spacing * math.sqrt(r) + 1e-12:
            cex.append({"invariant": "Hamiltonian and Lagrangian forms agree", "X": X, "family": family,
                        "hamiltonian_form": v1, "lagrangian_form": v2})
    worst_line = 0.0
    for _ in range(n_homogeneous):
        d = int(rng.integers(1, 3))
        ham = Hamiltonian.burgers(d)
        k = int(rng.integers(2, 6))
        pot = SemiconcavePotential.min_of_affine(rng.normal(size=(k, d + 1)), np.zeros(k))
        v0 = h_gradient(pot, ham, np.zeros(d + 1))
        line = flow(FlowMap(pot, ham, h), np.zeros(d + 1), 100 * h)
        dev = float(np.max(np.linalg.norm(line.points - line.times[:, None] * v0, axis=1)))
        worst_line = max(worst_line, dev)
        if dev > 10 * h:
            cex.append({"invariant": "straight-line flow of a concave homogeneous potential", "deviation": dev})
    inv = []
    for i, (pot, X0) in enumerate(_standard_potentials()):
        fm = FlowMap(pot, Hamiltonian.burgers(pot.dim - 1), h)
        viol = invariance_suite(fm, 2.0, np.full(pot.dim, 0.3), 50 * h, 1.7, X0, 100 * h)
        inv.append({"potential": i, **viol})
        bound = 1e-6 if tol is None else tol
        for key, v in viol.items():
            if v > bound:
                cex.append({"invariant": f"{key} invariance", "potential": i, "violation": v})
    report = {
        "potentials": n_potentials,
        "max_duality_gap": worst_dual,
        "grid_spacing": spacing,
        "homogeneous": n_homogeneous,
        "max_line_deviation": worst_line,
        "step": h,
        "invariance": inv,
    }
    return SuiteResult("hgrad", seed, not cex, report, cex)


def _standard_potentials():
    """Fixed test potentials for the invariance properties, with start points."""
    rng = np.random.default_rng(20240611)
    out = []
    out.append((SemiconcavePotential.min_of_affine([[1.0, -0.5], [-1.0, -0.5], [0.2, 0.1]], [0.0, 0.0, -0.3]),
                np.array([0.05, 0.0])))
    out.append((SemiconcavePotential.smooth_quadratic([[0.5, 0.1], [0.1, -0.2]], [0.3, -0.1]),
                np.array([0.2, -0.1])))
    pieces = [(np.diag([0.4, -0.5, 0.1]), rng.normal(size=3), 0.0),
              (np.diag([-0.3, 0.2, 0.0]), rng.normal(size=3), 0.1)]
    out.append((SemiconcavePotential.min_of_quadratics(pieces), np.array([0.1, -0.2, 0.3])))
    out.append((SemiconcavePotential.min_of_affine(rng.normal(size=(4, 3)), rng.normal(size=4)),
                np.array([0.0, 0.1, 0.2])))
    return out


def suite_semiconcavity(seed: int, step: float | None = None, tol: float | None = None,
                        n_samples: int = 2000, directions: int = 8) -> SuiteResult:
    phi0 = FourierSeries.cosine()
    eps = 1e-2 if tol is None else tol
    rows, cex = [], []
    for nu in CONVERGENCE_NU:
        rep = second_derivative_bound_check(ViscousSolution(phi0, nu), 2.0, directions, 1e-3,
                                            n_samples, seed, eps)
        rows.append({"nu": nu, **rep.to_dict()})
        if not rep.within_spacetime:
            cex.append({"invariant": "second differences below the space-time bound", **rows[-1]})
    model = HopfLaxPotential(phi0)
    q, x, t = second_difference_sample(model.value_many, float(phi0.period[0]), 2.0, n_samples,
                                       directions, 1e-3, seed)
    limit_max = float(q.max())
    nominal = 1.0
    report = {
        "viscous": rows,
        "limit_max_quotient": limit_max,
        "limit_within_nominal": limit_max <= nominal + eps,
        "nominal_bound": nominal,
    }
    limit_bound = spacetime_hessian_bound(phi0, 0.0)
    report["limit_spacetime_bound"] = limit_bound
    if limit_max > limit_bound + eps:
        cex.append({"invariant": "limit second differences below the space-time bound", "value": limit_max})
    return SuiteResult("semiconcavity", seed, not cex, report, cex)


def suite_a3(seed: int, step: float | None = None, tol: float | None = None, n_models: int = 20) -> SuiteResult:
    rng = np.random.default_rng(seed)
    h = 1e-3 if step is None else step
    atol = 1e-6 if tol is None else tol
    rows, cex = [], []
    M0 = constructed_a3_model([0.4, -0.2], 1.0, 1.0, 0.1, 1.0)
    entries = [("constructed", M0)]
    for i in range(n_models):
        g = rng.uniform(-1, 1, 2)
        c_b, A4, t_star = rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0), rng.uniform(0.5, 2.0)
        B = rng.uniform(-0.3, 0.3)
        e1, e2 = rng.uniform(-0.3, 0.3), rng.uniform(-0.3, 0.3)
        F = constructed_a3_family(g, c_b, A4, B, t_star, e1, e2)
        entries.append((f"extracted-{i}", extract_a3_model(F, [0.0, 0.0], t_star * g, t_star)))
    for name, M in entries:
        rep = a3_tangent_check(M, atol)
        inside, t_out = _a3_trajectory_inside(M, 0.1, h)
        rows.append({"model": name, "tangent_ok": rep.ok, "message": rep.message, "beta": rep.beta,
                     "inside_shock": inside, "first_exit": t_out})
        if not (rep.ok and inside):
            cex.append(rows[-1])
    return SuiteResult("a3", seed, not cex, {"models": rows, "horizon": 0.1, "step": h}, cex)


SUITES = {
    "convergence": suite_convergence,
    "uniqueness": suite_uniqueness,
    "geometry": suite_geometry,
    "hgrad": suite_hgrad,
    "semiconcavity": suite_semiconcavity,
    "a3": suite_a3,
}


def run_suite(name: str, seed: int = 0, step: float | None = None, tol: float | None = None) -> SuiteResult:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    return SUITES[name](seed, step=step, tol=tol)
