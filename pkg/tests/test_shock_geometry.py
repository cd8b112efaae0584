import itertools
import math
import zlib

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from scipy.spatial import ConvexHull, cKDTree

from adhesion import AffineBranch, FiniteMinFamily, LocalLinearModel, MomentumSet
from adhesion.convex_core import DegenerateConfigurationError
from adhesion.limit_potential import GenericityError, check_planar_genericity
from adhesion.shock_geometry import (
    ClusterKind,
    ConfigClass,
    EventKind,
    NodeClass,
    NonGenericIntervalError,
    Transition,
    classify_configuration,
    classify_node,
    detect_cluster_events,
    family_diagram,
    node_trapping,
    shock_diagram,
)

from oracles import brute_force_ball, sample_edges, tie_loci_by_distance

coords = st.floats(-2, 2, allow_nan=False, width=32)


def generic(k):
    def ok(P):
        # well-conditioned draws: separated points and non-thin triangles
        for i, j in itertools.combinations(range(k), 2):
            if np.linalg.norm(P[i] - P[j]) < 1e-2:
                return False
        for t in itertools.combinations(range(k), 3):
            u, v = P[t[1]] - P[t[0]], P[t[2]] - P[t[0]]
            if abs(u[0] * v[1] - u[1] * v[0]) < 1e-3:
                return False
        try:
            check_planar_genericity(P, right_tol=1e-3)
        except GenericityError:
            return False
        return True

    return arrays(np.float64, (k, 2), elements=coords).filter(ok)


def _cosines(P):
    out = []
    for i in range(3):
        u, v = P[(i + 1) % 3] - P[i], P[(i + 2) % 3] - P[i]
        out.append(u @ v / (np.linalg.norm(u) * np.linalg.norm(v)))
    return np.array(out)


@given(generic(3))
def test_node_classification(P):
    c = classify_node(*P)
    cos = _cosines(P)
    center, _ = brute_force_ball(P)
    np.testing.assert_allclose(c.particle_velocity, center, atol=1e-9)
    d = np.linalg.norm(P - c.node_velocity, axis=1)
    np.testing.assert_allclose(d, d[0], rtol=1e-9)
    if np.all(cos > 0):
        assert c.kind is NodeClass.ACUTE and c.exit_pair is None
    else:
        assert c.kind is NodeClass.OBTUSE
        side = [np.linalg.norm(P[(i + 1) % 3] - P[(i + 2) % 3]) for i in range(3)]
        assert set(c.exit_pair) == set(range(3)) - {int(np.argmax(side))}


def test_right_triangle_is_degenerate():
    assert classify_node([0, 0], [1, 0], [0, 1]).kind is NodeClass.RIGHT_DEGENERATE


@given(generic(4))
def test_configuration_classes(P):
    c = classify_configuration(P)
    obtuse = [np.min(_cosines(P[list(t)])) < 0 for t in itertools.combinations(range(4), 3)]
    support = len(brute_force_support(P))
    assert (c.config is ConfigClass.TOTALLY_OBTUSE) == all(obtuse)
    if c.config is ConfigClass.TOTALLY_OBTUSE:
        assert support == 2 and c.cluster is ClusterKind.NONE
    elif support == 2:
        assert c.config is ConfigClass.NARROW and c.cluster is ClusterKind.STABLE
    else:
        assert c.config is ConfigClass.WIDE and c.cluster is ClusterKind.GROWING
    hull = len(ConvexHull(P).vertices)
    assert c.transition is (Transition.FIFTH if hull == 3 else Transition.SIXTH)


def brute_force_support(P):
    center, r = brute_force_ball(P)
    return [i for i in range(len(P)) if abs(np.linalg.norm(P[i] - center) - r) <= 1e-9 * max(1.0, r)]


@settings(max_examples=25)
@given(st.integers(3, 5).flatmap(generic), st.sampled_from([-1.0, 1.0, 0.5]))
def test_diagram_matches_distance_oracle(P, tau):
    cx = shock_diagram(LocalLinearModel(MomentumSet(P), validate=False), tau)
    ties, cell, _ = tie_loci_by_distance(P, tau, cx.box, n=200)
    edges = sample_edges(cx, cell / 2)
    assert len(edges) > 0
    dist = max(cKDTree(edges).query(ties)[0].max(), cKDTree(ties).query(edges)[0].max())
    assert dist <= 2 * cell


@settings(max_examples=25)
@given(st.integers(3, 5).flatmap(generic), st.sampled_from([-1.0, 1.0]))
def test_diagram_structure(P, tau):
    cx = shock_diagram(LocalLinearModel(MomentumSet(P), validate=False), tau)
    for e in cx.edges:
        i, j = e.indices
        np.testing.assert_allclose(e.velocity, 0.5 * (P[i] + P[j]), atol=1e-12)
        lo, hi = math.isfinite(e.s_min), math.isfinite(e.s_max)
        s = 0.5 * (e.s_min + e.s_max) if lo and hi else (e.s_min + 0.5 if lo else (e.s_max - 0.5 if hi else 0.0))
        v = cx.values(e.point(s))
        assert v[i] == pytest.approx(v[j], abs=1e-9) and v[i] <= v.min() + 1e-9
    for n in cx.nodes:
        v = cx.values(n.position)
        assert np.ptp(v[list(n.indices)]) <= 1e-9
        assert cx.distance_to_shock(n.position) <= 1e-9
        assert node_trapping(cx, n) == (n.kind is NodeClass.ACUTE)
    for cell in cx.cells:
        c = cell.polygon.mean(axis=0)
        assert int(np.argmin(cx.values(c))) == cell.index
    if tau > 0:
        np.testing.assert_allclose(cx.special_point, tau * brute_force_ball(P)[0], atol=1e-9)


def test_positive_tau_uses_farthest_point_diagram():
    P = np.array([[0.0, 1.0], [-0.9, -0.4], [0.8, -0.5]])
    cx = shock_diagram(LocalLinearModel(MomentumSet(P)), 1.0)
    q = np.array([0.0, 3.0])
    far = int(np.argmax(np.linalg.norm(q - P, axis=1)))
    assert int(np.argmin(cx.values(q))) == far


def test_zero_tau_rejected():
    with pytest.raises(ValueError):
        shock_diagram(LocalLinearModel(MomentumSet([[0.0, 1.0], [-0.9, -0.4], [0.8, -0.5]])), 0.0)


@pytest.mark.parametrize("h,kind", [(lambda t: t + 0.003, EventKind.BIRTH), (lambda t: 2.003 - t, EventKind.RELEASE)])
def test_path_events(h, kind):
    # the apex angle over a base of half-width 1 is acute iff the height exceeds 1
    path = lambda t: np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, h(t)]])
    ev = detect_cluster_events(path, (0.5, 1.5), 0.01)
    assert [e.kind for e in ev] == [kind]
    assert ev[0].time == pytest.approx(0.997 if kind is EventKind.BIRTH else 1.003, abs=1e-4)


def test_path_right_angle_interval_rejected():
    path = lambda t: np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0 + t]])
    with pytest.raises(NonGenericIntervalError):
        detect_cluster_events(path, (0.0, 1.0), 0.1)
    assert issubclass(NonGenericIntervalError, DegenerateConfigurationError)


@pytest.mark.parametrize("config,transition", list(itertools.product(ConfigClass, Transition)))
def test_transition_events_follow_acute_count(config, transition):
    rng = np.random.default_rng(zlib.crc32(f"{config.value}-{transition.value}".encode()))
    try:
        P = _find_bounded(rng, config, transition)
    except LookupError:
        pytest.skip("class not realizable with this transition")
    M = LocalLinearModel(MomentumSet(P), t_star=0.5)
    ev = detect_cluster_events(M, (0.0, 1.0), 0.01)
    pre = sum(n.kind is NodeClass.ACUTE for n in shock_diagram(M, -1.0).nodes)
    cls = classify_configuration(P)
    kinds = [e.kind for e in ev]
    if pre >= 2:
        assert kinds == [EventKind.MERGE]
    elif pre == 0 and cls.cluster is not ClusterKind.NONE:
        assert kinds == [EventKind.BIRTH]
    elif pre == 1 and cls.cluster is not ClusterKind.GROWING:
        assert kinds == [EventKind.RELEASE]
    else:
        assert kinds == []
    for e in ev:
        assert e.time == 0.5 and e.transition is cls.transition and e.cluster is cls.cluster


def _find_bounded(rng, config, transition, tries=20000):
    for _ in range(tries):
        P = rng.normal(size=(4, 2))
        try:
            check_planar_genericity(P, right_tol=1e-3)
        except GenericityError:
            continue
        c = classify_configuration(P)
        if c.config is config and c.transition is transition:
            return P
    raise LookupError


S3 = math.sqrt(3) / 2
EQUILATERAL = FiniteMinFamily((AffineBranch([0.0, 1.0]), AffineBranch([-S3, -0.5]), AffineBranch([S3, -0.5])))
OBTUSE = FiniteMinFamily((AffineBranch([0.0, 0.2]), AffineBranch([-1.0, -0.5]), AffineBranch([1.0, -0.5])))


def test_cluster_merges_into_acute_node():
    cx = family_diagram(EQUILATERAL, 1.0, (-3, 3, -3, 3))
    e = next(e for e in cx.edges if e.indices == (0, 2))
    start = e.point(0.5)  # moves toward the fixed node at speed 1/2
    ev = detect_cluster_events(EQUILATERAL, (1.0, 3.0), 0.01, clusters=[start], step=1e-3)
    assert [x.kind for x in ev] == [EventKind.MERGE]
    assert ev[0].time == pytest.approx(2.0, abs=1e-2)
    np.testing.assert_allclose(ev[0].location, 0.0, atol=1e-9)


def test_cluster_passes_through_obtuse_node():
    cx = family_diagram(OBTUSE, 1.0, (-4, 4, -4, 4))
    node = cx.nodes[0]
    assert node.kind is NodeClass.OBTUSE
    e = next(e for e in cx.edges if e.indices == (0, 1))
    start = e.point(e.s_max - 0.5)
    ev = detect_cluster_events(OBTUSE, (1.0, 3.0), 0.01, clusters=[start], step=1e-3)
    assert [x.kind for x in ev] == [EventKind.PASS_THROUGH]
    assert 1.0 < ev[0].time < 2.0


def test_event_dict_is_plain():
    ev = detect_cluster_events(lambda t: np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, t + 0.003]]), (0.5, 1.5), 0.01)
    d = ev[0].to_dict()
    assert d["kind"] == "Birth" and d["cluster"] == "Growing" and isinstance(d["location"][0], float)
