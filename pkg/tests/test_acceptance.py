"""Acceptance criteria, each at its stated tolerance.

Run ``pytest -m acceptance -rA`` to get one PASS/FAIL line per criterion in
the terminal summary.
"""

import io
import itertools
import math
import time
from contextlib import redirect_stdout

import numpy as np
import pytest
from scipy.spatial import cKDTree

from adhesion import FourierSeries, HopfLaxPotential, LocalLinearModel, MomentumSet, limit_velocity
from adhesion.cli import main
from adhesion.convex_core import min_enclosing_ball
from adhesion.hgrad import (FlowMap, GridSpec, Hamiltonian, SemiconcavePotential, flow, h_gradient,
                            h_gradient_lagrangian, invariance_suite)
from adhesion.limit_potential import (GenericityError, a3_shock_halfplane, a3_tangent_check,
                                      check_planar_genericity, extract_a3_model)
from adhesion.shock_geometry import ConfigClass, NodeClass, classify_configuration, classify_node, shock_diagram
from adhesion.suites import (CONVERGENCE_NU, SUITES, TRAJECTORY_NU, TRAJECTORY_STARTS, _standard_potentials,
                             constructed_a3_family, constructed_a3_model, convergence_table,
                             trajectory_convergence)
from adhesion.trajectory import forward_uniqueness_check, integrate
from adhesion.viscous import ViscousSolution, second_difference_sample

from oracles import analytic_a3, sample_edges, tie_loci_by_distance

pytestmark = pytest.mark.acceptance

COS = FourierSeries.cosine()


def _generic(rng, k):
    while True:
        P = rng.normal(size=(k, 2))
        try:
            check_planar_genericity(P, right_tol=1e-6)
        except GenericityError:
            continue
        return P


def _cos(P):
    out = []
    for i in range(3):
        u, v = P[(i + 1) % 3] - P[i], P[(i + 2) % 3] - P[i]
        out.append(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
    return np.array(out)


def _circumcenter(P):
    (ax, ay), (bx, by), (cx, cy) = P
    d = 2 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by))
    ux = ((ax * ax + ay * ay) * (by - cy) + (bx * bx + by * by) * (cy - ay) + (cx * cx + cy * cy) * (ay - by)) / d
    uy = ((ax * ax + ay * ay) * (cx - bx) + (bx * bx + by * by) * (ax - cx) + (cx * cx + cy * cy) * (bx - ax)) / d
    return np.array([ux, uy])


@pytest.mark.criterion(1, "viscous potentials converge to the limit potential")
def test_criterion_1_potential_convergence():
    t0 = time.perf_counter()
    table = convergence_table(COS, CONVERGENCE_NU, 2.0)
    elapsed = time.perf_counter() - t0
    sup = [r["sup_diff"] for r in table]
    assert all(b < a for a, b in zip(sup, sup[1:])), sup
    assert sup[-1] <= 0.05, sup
    assert elapsed < 30, elapsed


@pytest.mark.criterion(2, "viscous trajectories converge to the limit trajectories")
def test_criterion_2_trajectory_convergence():
    t0 = time.perf_counter()
    res = trajectory_convergence(COS, TRAJECTORY_STARTS, TRAJECTORY_NU, 3.0, 1e-3)
    elapsed = time.perf_counter() - t0
    gaps = res["consecutive_sup_distance"]
    assert all(b < a for a, b in zip(gaps, gaps[1:])), gaps
    assert np.all(np.asarray(res["endpoint_gap"]) <= 2e-2), res["endpoint_gap"]
    assert elapsed < 60, elapsed


def _hopf_lax_shock_points(n):
    rng = np.random.default_rng(3)
    pts = []
    while len(pts) < n:
        terms = [{"k": [k], "cos": rng.normal() / k, "sin": rng.normal() / k} for k in (1, 2, 3)]
        model = HopfLaxPotential(FourierSeries.from_terms(terms, [2 * math.pi]))
        t = float(rng.uniform(1.0, 3.0))
        for x in model.find_shocks_1d(t, samples=1024):
            pts.append((model, x, t))
    return pts[:n]


def _convex_grid_argmin(f, lo: int, hi: int) -> int:
    """Exact argmin of a strictly convex sequence ``f(i)`` on ``lo..hi``."""
    while hi - lo > 2:
        m1 = lo + (hi - lo) // 3
        m2 = hi - (hi - lo) // 3
        a, b = f(m1), f(m2)
        if a < b:
            hi = m2 - 1
        elif a > b:
            lo = m1 + 1
        else:
            lo, hi = m1, m2
    return min(range(lo, hi + 1), key=f)


@pytest.mark.criterion(3, "limit velocity is the grid argmin of the minimum principle")
def test_criterion_3_minimum_principle():
    spacing = 1e-3
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(200):
        P = _generic(rng, 3)
        U = float(rng.normal())
        M = LocalLinearModel(MomentumSet(P), U_star=U)
        v = limit_velocity(M, M.x_star, M.t_star)
        st = np.column_stack([P, -0.5 * np.sum(P * P, axis=1) - U])
        pot = SemiconcavePotential.min_of_affine(st, np.zeros(3))
        g = h_gradient_lagrangian(pot, Hamiltonian.burgers(2), np.zeros(3), GridSpec(spacing))
        worst = max(worst, float(np.max(np.abs(g[:2] - v))))
    assert worst <= spacing, worst

    eps = 1e-6
    worst_hl = 0.0
    for model, x, t in _hopf_lax_shock_points(100):
        v = float(limit_velocity(model, x, t)[0])
        n = int(math.ceil((model.velocity_bound() + 1) / spacing))
        base = model.value(x, t)

        def objective(i):
            q = i * spacing
            return 0.5 * q * q - (model.value(x + eps * q, t + eps) - base) / eps

        i = _convex_grid_argmin(objective, -n, n)
        assert -n < i < n
        qbest = i * spacing
        worst_hl = max(worst_hl, abs(qbest - v))
    assert worst_hl <= spacing, worst_hl
    assert time.perf_counter() - t0 < 60


@pytest.mark.criterion(4, "forward uniqueness with O(step) post-meet separation")
def test_criterion_4_forward_uniqueness():
    model = HopfLaxPotential(COS)
    gaps = []
    for step in (1e-3, 5e-4):
        r = forward_uniqueness_check(model, -0.5, 0.5, 2.0, step)
        assert r.met
        assert r.post_meet_max_gap <= 2 * step * r.velocity_bound, r.to_dict()
        gaps.append(r.post_meet_max_gap)
    assert 1.5 <= gaps[0] / gaps[1] <= 2.5, gaps


@pytest.mark.criterion(5, "second difference quotients below max phi0'' + 1e-2")
def test_criterion_5_semiconcavity():
    n, dirs, delta = 10_000, 8, 1e-3
    worst = {}
    for nu in CONVERGENCE_NU:
        S = ViscousSolution(COS, nu)
        q, _, _ = second_difference_sample(S.psi, 2 * math.pi, 2.0, n, dirs, delta, seed=0)
        worst[f"nu={nu}"] = float(q.max())
    model = HopfLaxPotential(COS)
    q, _, _ = second_difference_sample(model.value_many, 2 * math.pi, 2.0, n, dirs, delta, seed=0)
    worst["limit"] = float(q.max())
    bound = float(np.max(COS.derivative(np.linspace(0, 2 * math.pi, 4097), 2)))
    assert all(v <= bound + 1e-2 for v in worst.values()), worst


def _random_potential(rng, m):
    X = rng.normal(size=m)
    if rng.random() < 0.5:
        k = int(rng.integers(2, 6))
        P, c = rng.normal(size=(k, m)), rng.normal(size=k)
        if rng.random() < 0.5:
            i, j = np.argsort(P @ X + c)[:2]
            n = P[i] - P[j]
            X = X - ((n @ X + c[i] - c[j]) / (n @ n)) * n
        return SemiconcavePotential.min_of_affine(P, c), X
    pieces = []
    for _ in range(int(rng.integers(1, 4))):
        G = rng.normal(size=(m, m))
        pieces.append((0.3 * (G + G.T) / 2 - np.eye(m), rng.normal(size=m), rng.normal()))
    return SemiconcavePotential.min_of_quadratics(pieces), X


@pytest.mark.criterion(6, "Hamiltonian and Lagrangian h-gradients agree; homogeneous flows are straight")
def test_criterion_6_hgrad_duality():
    rng = np.random.default_rng(5)
    spacing = 1e-3
    for _ in range(100):
        d = int(rng.integers(1, 3))
        ham = Hamiltonian.burgers(d)
        pot, X = _random_potential(rng, d + 1)
        a = h_gradient(pot, ham, X)
        b = h_gradient_lagrangian(pot, ham, X, GridSpec(spacing))
        assert np.linalg.norm(a - b) <= spacing * math.sqrt(d), (X, a, b)
    h = 1e-4
    for _ in range(20):
        d = int(rng.integers(1, 3))
        ham = Hamiltonian.burgers(d)
        k = int(rng.integers(2, 6))
        pot = SemiconcavePotential.min_of_affine(rng.normal(size=(k, d + 1)), np.zeros(k))
        v0 = h_gradient(pot, ham, np.zeros(d + 1))
        line = flow(FlowMap(pot, ham, h), np.zeros(d + 1), 100 * h)
        dev = np.max(np.linalg.norm(line.points - line.times[:, None] * v0, axis=1))
        assert dev <= 10 * h, dev


@pytest.mark.criterion(7, "constant, translation, semigroup and dilation invariance")
def test_criterion_7_invariance():
    h = 1e-4
    for pot, X0 in _standard_potentials():
        fm = FlowMap(pot, Hamiltonian.burgers(pot.dim - 1), h)
        viol = invariance_suite(fm, 2.0, np.full(pot.dim, 0.3), 50 * h, 1.7, X0, 100 * h)
        assert max(viol.values()) <= 1e-6, viol


@pytest.mark.criterion(8, "node, configuration and diagram taxonomy")
def test_criterion_8_geometry():
    rng = np.random.default_rng(8)
    for _ in range(10_000):
        P = rng.normal(size=(3, 2))
        c = _cos(P)
        if np.min(np.abs(c)) < 1e-9:
            continue
        node = classify_node(*P)
        ball = min_enclosing_ball(P)
        if np.all(c > 0):
            assert node.kind is NodeClass.ACUTE
            assert np.linalg.norm(ball.center - _circumcenter(P)) <= 1e-10
            assert np.linalg.norm(node.particle_velocity - _circumcenter(P)) <= 1e-10
        else:
            assert node.kind is NodeClass.OBTUSE
            side = [np.linalg.norm(P[(i + 1) % 3] - P[(i + 2) % 3]) for i in range(3)]
            i = int(np.argmax(side))
            mid = 0.5 * (P[(i + 1) % 3] + P[(i + 2) % 3])
            assert np.linalg.norm(ball.center - mid) <= 1e-10
            assert np.linalg.norm(node.particle_velocity - mid) <= 1e-10

    for _ in range(10_000):
        P = _generic(rng, 4)
        cls = classify_configuration(P)
        assert isinstance(cls.config, ConfigClass)
        all_obtuse = all(np.min(_cos(P[list(t)])) < 0 for t in itertools.combinations(range(4), 3))
        support = len(min_enclosing_ball(P).support)
        assert (cls.config is ConfigClass.TOTALLY_OBTUSE) == all_obtuse
        if all_obtuse:
            assert support == 2
        else:
            assert cls.config is (ConfigClass.NARROW if support == 2 else ConfigClass.WIDE)

    for _ in range(50):
        k = int(rng.integers(3, 6))
        P = _generic(rng, k)
        tau = float(rng.choice([-1.0, 1.0]))
        cx = shock_diagram(LocalLinearModel(MomentumSet(P)), tau)
        ties, cell, _ = tie_loci_by_distance(P, tau, cx.box)
        edges = sample_edges(cx, cell / 2)
        dist = max(cKDTree(edges).query(ties)[0].max(), cKDTree(ties).query(edges)[0].max())
        assert dist <= 2 * cell, (P, tau, dist / cell)


@pytest.mark.criterion(9, "A3 end point: tangent condition and trajectory inside the shock")
def test_criterion_9_a3():
    rng = np.random.default_rng(9)
    h = 1e-3
    M0 = constructed_a3_model([0.4, -0.2], 1.0, 1.0, 0.1, 1.0)
    ref = analytic_a3([0.4, -0.2], 1.0, 1.0, 0.1, 1.0)
    for key in ("alpha", "beta", "gamma", "B", "C"):
        np.testing.assert_allclose(getattr(M0, key), ref[key], atol=1e-12)
    models = [M0]
    for _ in range(20):
        g = rng.uniform(-1, 1, 2)
        c_b, A4, ts = rng.uniform(0.5, 2.0, 3)
        B, e1, e2 = rng.uniform(-0.3, 0.3, 3)
        F = constructed_a3_family(g, c_b, A4, B, ts, e1, e2)
        models.append(extract_a3_model(F, [0.0, 0.0], ts * g, ts))
    for M in models:
        assert a3_tangent_check(M).ok
        H = a3_shock_halfplane(M)
        tr = integrate(M, M.x_star, M.t_star, M.t_star + 0.1, h)
        for x, t in zip(tr.positions[1:], tr.times[1:]):
            assert H.contains(M.local_coords(x, t)), t - M.t_star


@pytest.mark.criterion(10, "verify reports are byte-identical across runs")
def test_criterion_10_determinism(tmp_path):
    for name in sorted(SUITES):
        texts = []
        for run in range(2):
            out = tmp_path / f"{name}-{run}.json"
            with redirect_stdout(io.StringIO()):
                main(["verify", name, "--seed", "7", "--out", str(out)])
            texts.append(out.read_bytes())
        assert texts[0] == texts[1], name
