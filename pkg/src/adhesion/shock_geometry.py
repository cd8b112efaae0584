"""Planar shock complexes and cluster taxonomy.

Near a point of the shock the potential is a minimum of affine functions
``f_i(q) = p_i . q + c_i``.  The shock is where the minimum is attained at
least twice.  For the local model, ``c_i = -tau |p_i|^2 / 2`` and

    p . q - tau |p|^2 / 2 = |q|^2 / (2 tau) - |q - tau p|^2 / (2 tau),

so the shock is the farthest-point diagram of ``{tau p_i}`` for ``tau > 0``
(only hull vertices own cells) and the nearest-point (Voronoi) diagram for
``tau < 0``.  The diagram is built directly from the affine functions, which
covers both cases.

Particles on an edge between cells ``i`` and ``j`` move with the midpoint
velocity; a node moves with the circumcenter of its three momenta, while a
particle sitting there moves with the center of their minimal disk.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import ConvexHull

from .convex_core import (
    DegenerateConfigurationError,
    MomentumSet,
    circumcenter,
    min_enclosing_ball,
    triangle_cosines,
)
from .limit_potential import (
    RIGHT_ANGLE_TOL,
    FiniteMinFamily,
    GenericityError,
    LocalLinearModel,
    check_planar_genericity,
)

__all__ = [
    "Cell",
    "ClusterEvent",
    "ClusterKind",
    "ConfigClass",
    "ConfigurationClass",
    "Edge",
    "EventKind",
    "Node",
    "NodeClass",
    "NodeClassification",
    "NonGenericIntervalError",
    "ShockComplex",
    "Transition",
    "affine_diagram",
    "classify_configuration",
    "classify_node",
    "detect_cluster_events",
    "family_diagram",
    "node_trapping",
    "shock_diagram",
    "transition_analysis",
]


class NodeClass(enum.Enum):
    ACUTE = "Acute"
    OBTUSE = "Obtuse"
    RIGHT_DEGENERATE = "RightDegenerate"


class ConfigClass(enum.Enum):
    TOTALLY_OBTUSE = "TotallyObtuse"
    NARROW = "Narrow"
    WIDE = "Wide"


class Transition(enum.Enum):
    FIFTH = "Fifth"
    SIXTH = "Sixth"


class ClusterKind(enum.Enum):
    NONE = "None"
    STABLE = "Stable"
    GROWING = "Growing"


class EventKind(enum.Enum):
    BIRTH = "Birth"
    RELEASE = "Release"
    PASS_THROUGH = "PassThrough"
    MERGE = "Merge"


class NonGenericIntervalError(DegenerateConfigurationError):
    """A degeneracy persists over a time interval instead of an isolated instant."""


# ---------------------------------------------------------------------------
# triangles and four-point configurations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeClassification:
    kind: NodeClass
    node_velocity: np.ndarray
    particle_velocity: np.ndarray
    cosines: np.ndarray

    @property
    def exit_pair(self) -> tuple[int, int] | None:
        """Local indices of the longest side, along whose edge particles leave."""
        if self.kind is not NodeClass.OBTUSE:
            return None
        k = int(np.argmin(self.cosines))  # obtuse vertex
        return tuple(sorted({0, 1, 2} - {k}))


def classify_node(p1, p2, p3) -> NodeClassification:
    """Acute / obtuse / right classification of a node's momentum triangle."""
    P = np.array([p1, p2, p3], dtype=float)
    c = circumcenter(*P)
    cos = triangle_cosines(*P)
    ball = min_enclosing_ball(MomentumSet(P))
    if np.any(np.abs(cos) < RIGHT_ANGLE_TOL):
        kind = NodeClass.RIGHT_DEGENERATE
    elif np.all(cos > 0):
        kind = NodeClass.ACUTE
    else:
        kind = NodeClass.OBTUSE
    return NodeClassification(kind, c, ball.center.copy(), cos)


@dataclass(frozen=True)
class ConfigurationClass:
    config: ConfigClass
    transition: Transition
    cluster: ClusterKind
    support_size: int
    hull_size: int
    triangle_kinds: tuple


def classify_configuration(momenta) -> ConfigurationClass:
    """Class of a generic four-momentum configuration.

    Totally obtuse if all four sub-triangles are obtuse; otherwise narrow
    or wide according to whether the minimal disk is supported by two or
    three momenta.  The transition is the fifth one when the convex hull is
    a triangle and the sixth one when it is a quadrangle.
    """
    P = np.asarray(momenta.elements if isinstance(momenta, MomentumSet) else momenta, dtype=float)
    if P.shape != (4, 2):
        raise ValueError("a configuration consists of four planar momenta")
    check_planar_genericity(P)
    kinds = tuple(classify_node(*P[list(tri)]).kind for tri in itertools.combinations(range(4), 3))
    ball = min_enclosing_ball(MomentumSet(P))
    support = len(ball.support)
    hull = len(ConvexHull(P).vertices)
    if all(k is NodeClass.OBTUSE for k in kinds):
        if support != 2:
            raise AssertionError("totally obtuse configuration with a wide minimal disk")
        config, cluster = ConfigClass.TOTALLY_OBTUSE, ClusterKind.NONE
    elif support == 2:
        config, cluster = ConfigClass.NARROW, ClusterKind.STABLE
    else:
        config, cluster = ConfigClass.WIDE, ClusterKind.GROWING
    transition = Transition.FIFTH if hull == 3 else Transition.SIXTH
    return ConfigurationClass(config, transition, cluster, support, hull, kinds)


# ---------------------------------------------------------------------------
# diagrams of minima of affine functions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Cell:
    index: int
    polygon: np.ndarray  # vertices in counter-clockwise order, clipped to the box


@dataclass(frozen=True)
class Edge:
    indices: tuple[int, int]
    origin: np.ndarray
    direction: np.ndarray  # unit vector
    s_min: float
    s_max: float
    velocity: np.ndarray

    @property
    def kind(self) -> str:
        bounded = math.isfinite(self.s_min) + math.isfinite(self.s_max)
        return ("line", "ray", "segment")[bounded]

    def point(self, s: float) -> np.ndarray:
        return self.origin + s * self.direction

    def segment(self, box) -> tuple[np.ndarray, np.ndarray] | None:
        """Part of the edge inside ``box = (xmin, xmax, ymin, ymax)``."""
        lo, hi = self.s_min, self.s_max
        bounds = ((box[0], box[1]), (box[2], box[3]))
        for ax in range(2):
            o, dv = self.origin[ax], self.direction[ax]
            a, b = bounds[ax]
            if abs(dv) < 1e-300:
                if o < a or o > b:
                    return None
                continue
            s1, s2 = (a - o) / dv, (b - o) / dv
            lo, hi = max(lo, min(s1, s2)), min(hi, max(s1, s2))
        if not lo < hi:
            return None
        return self.point(lo), self.point(hi)

    def distance(self, q) -> float:
        q = np.asarray(q, dtype=float)
        s = float(np.clip((q - self.origin) @ self.direction, self.s_min, self.s_max))
        return float(np.linalg.norm(q - self.point(s)))


@dataclass(frozen=True)
class Node:
    indices: tuple[int, int, int]
    position: np.ndarray
    classification: NodeClassification

    @property
    def kind(self) -> NodeClass:
        return self.classification.kind


@dataclass(frozen=True)
class ShockComplex:
    tau: float
    momenta: MomentumSet
    offsets: np.ndarray
    cells: tuple
    edges: tuple
    nodes: tuple
    special_point: np.ndarray | None
    box: tuple

    def values(self, q) -> np.ndarray:
        q = np.asarray(q, dtype=float)
        return q @ self.momenta.elements.T + self.offsets

    def distance_to_shock(self, q) -> float:
        if not self.edges:
            return math.inf
        return min(e.distance(q) for e in self.edges)


def _polygon_clip(poly: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Clip a convex polygon to the half-plane ``a . q <= b``."""
    if len(poly) == 0:
        return poly
    out = []
    n = len(poly)
    for i in range(n):
        P, Q = poly[i], poly[(i + 1) % n]
        fp, fq = a @ P - b, a @ Q - b
        if fp <= 0:
            out.append(P)
        if fp * fq < 0:
            out.append(P + (Q - P) * (fp / (fp - fq)))
    return np.array(out).reshape(-1, 2)


def affine_diagram(P, c, box, tau: float = math.nan, tol: float = 1e-12) -> ShockComplex:
    """Cells, edges and nodes of ``q -> min_i (P_i . q + c_i)`` in the plane."""
    P = np.asarray(P, dtype=float)
    c = np.asarray(c, dtype=float)
    k = len(P)
    scale = max(1.0, float(np.max(np.abs(P))) * max(abs(b) for b in box), float(np.max(np.abs(c))))
    eps = tol * scale

    def minimal(q, idx):
        v = P @ q + c
        return v[idx[0]] <= v.min() + eps

    nodes = []
    for tri in itertools.combinations(range(k), 3):
        i, j, m = tri
        A = np.array([P[i] - P[j], P[i] - P[m]])
        if abs(np.linalg.det(A)) <= 1e-14 * max(1.0, np.abs(A).max()) ** 2:
            continue
        q = np.linalg.solve(A, np.array([c[j] - c[i], c[m] - c[i]]))
        if minimal(q, tri):
            nodes.append(Node(tri, q, classify_node(P[i], P[j], P[m])))

    edges = []
    for i, j in itertools.combinations(range(k), 2):
        n = P[i] - P[j]
        nn = float(n @ n)
        if nn == 0:
            continue
        q0 = n * (c[j] - c[i]) / nn
        dvec = np.array([-n[1], n[0]]) / math.sqrt(nn)
        lo, hi = -math.inf, math.inf
        for m in range(k):
            if m in (i, j):
                continue
            # (P_i - P_m) . (q0 + s d) <= c_m - c_i
            al = float((P[i] - P[m]) @ dvec)
            be = float(c[m] - c[i] - (P[i] - P[m]) @ q0)
            if abs(al) <= 1e-15:
                if be < -eps:
                    lo, hi = 1.0, 0.0
                continue
            if al > 0:
                hi = min(hi, be / al)
            else:
                lo = max(lo, be / al)
        if lo < hi - 1e-12 * max(1.0, abs(lo) if math.isfinite(lo) else 1.0):
            edges.append(Edge((i, j), q0, dvec, lo, hi, 0.5 * (P[i] + P[j])))

    square = np.array([[box[0], box[2]], [box[1], box[2]], [box[1], box[3]], [box[0], box[3]]], dtype=float)
    cells = []
    for i in range(k):
        poly = square
        for m in range(k):
            if m != i:
                poly = _polygon_clip(poly, P[i] - P[m], c[m] - c[i])
        if len(poly) >= 3:
            cells.append(Cell(i, poly))

    return ShockComplex(tau, MomentumSet(P), c, tuple(cells), tuple(edges), tuple(nodes), None, tuple(box))


def _default_box(P: np.ndarray, tau: float) -> tuple:
    R = abs(tau) * (2.0 * float(np.max(np.linalg.norm(P, axis=1))) + 1.0)
    return (-R, R, -R, R)


def shock_diagram(M: LocalLinearModel, tau: float, box: tuple | None = None) -> ShockComplex:
    """Shock complex of the local model at time offset ``tau`` (coordinates ``q``)."""
    if tau == 0:
        raise DegenerateConfigurationError("the shock complex is degenerate at tau = 0")
    P = M.momenta.elements
    if P.shape[1] != 2:
        raise ValueError("shock complexes are planar")
    check_planar_genericity(P)
    box = _default_box(P, tau) if box is None else tuple(box)
    cx = affine_diagram(P, M.offsets(tau), box, tau)
    special = tau * min_enclosing_ball(M.momenta).center if tau > 0 else None
    return ShockComplex(tau, M.momenta, cx.offsets, cx.cells, cx.edges, cx.nodes, special, box)


def family_diagram(F: FiniteMinFamily, t: float, box: tuple) -> ShockComplex:
    """Shock complex of a planar family of affine branches at time ``t``."""
    if not F.is_affine or F.dim != 2:
        raise ValueError("family diagrams need planar affine branches")
    P = np.array([m.momentum for m in F.members])
    c = np.array([m.offset - 0.5 * (m.momentum @ m.momentum) * t for m in F.members]) - F.U_star * t
    return affine_diagram(P, c, box, t)


def node_trapping(cx: ShockComplex, node: Node) -> bool:
    """True iff particles on every edge at ``node`` move toward it relative to the node."""
    v = node.classification.node_velocity
    incident = [e for e in cx.edges if set(e.indices) <= set(node.indices)]
    if len(incident) != 3:
        raise DegenerateConfigurationError("node does not have three incident edges")
    for e in incident:
        s = float((node.position - e.origin) @ e.direction)
        # the edge leaves the node toward its unbounded / far side
        if math.isclose(s, e.s_min, rel_tol=1e-9, abs_tol=1e-9):
            out = e.direction
        else:
            out = -e.direction
        rel = e.velocity - v
        if rel @ out >= 0:
            return False
    return True


def transition_analysis(M: LocalLinearModel) -> dict:
    """Node structure on both sides of a four-momentum transition at ``tau = 0``."""
    if len(M.momenta) != 4:
        raise ValueError("transitions involve four momenta")
    cls = classify_configuration(M.momenta)
    before = shock_diagram(M, -1.0)
    after = shock_diagram(M, 1.0)
    return {
        "classification": cls,
        "before_nodes": [n for n in before.nodes],
        "after_nodes": [n for n in after.nodes],
        "before_acute": [n for n in before.nodes if n.kind is NodeClass.ACUTE],
        "after_acute": [n for n in after.nodes if n.kind is NodeClass.ACUTE],
        "cluster_velocity": min_enclosing_ball(M.momenta).center.copy(),
    }


# ---------------------------------------------------------------------------
# cluster events
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ClusterEvent:
    kind: EventKind
    time: float
    location: np.ndarray
    configuration: MomentumSet
    transition: Transition | None = None
    cluster: ClusterKind | None = None

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "time": self.time,
            "location": [float(v) for v in self.location],
            "configuration": self.configuration.elements.tolist(),
            "transition": None if self.transition is None else self.transition.value,
            "cluster": None if self.cluster is None else self.cluster.value,
        }


def _bisect_root(g: Callable[[float], float], a: float, b: float, tol: float) -> float:
    ga = g(a)
    while b - a > tol:
        m = 0.5 * (a + b)
        gm = g(m)
        if (gm > 0) == (ga > 0):
            a, ga = m, gm
        else:
            b = m
    return float(0.5 * (a + b))


def _path_events(path: Callable[[float], np.ndarray], t_span, dt: float, origin) -> list[ClusterEvent]:
    ts = _scan_times(t_span, dt)
    n = len(ts) - 1

    def tri(t):
        P = np.asarray(path(t), dtype=float)
        if P.shape != (3, 2):
            raise ValueError("momentum paths must give three planar momenta")
        return P

    def g(t):
        return float(np.min(triangle_cosines(*tri(t))))

    gs = np.array([g(t) for t in ts])
    small = np.abs(gs) < RIGHT_ANGLE_TOL
    if np.any(small[1:] & small[:-1]):
        raise NonGenericIntervalError("right-angled triangle over a time interval")
    vel = np.array([circumcenter(*tri(t)) for t in ts])
    # node position by trapezoidal integration of its velocity
    pos = np.concatenate([[np.zeros(2)], np.cumsum(0.5 * (vel[1:] + vel[:-1]) * np.diff(ts)[:, None], axis=0)])
    pos = pos + np.asarray(origin, dtype=float)
    events = []
    for j in range(n):
        if (gs[j] > 0) == (gs[j + 1] > 0):
            continue
        te = _bisect_root(g, ts[j], ts[j + 1], dt * 1e-3)
        w = (te - ts[j]) / (ts[j + 1] - ts[j])
        loc = (1 - w) * pos[j] + w * pos[j + 1]
        kind = EventKind.BIRTH if gs[j + 1] > 0 else EventKind.RELEASE
        cl = ClusterKind.GROWING if kind is EventKind.BIRTH else ClusterKind.STABLE
        events.append(ClusterEvent(kind, te, loc, MomentumSet(tri(te)), None, cl))
    return events


def _transition_events(pre_acute: int, cls: ConfigurationClass, time: float, loc, conf: MomentumSet):
    """Events of a four-momentum transition given the acute nodes arriving at it."""
    if pre_acute >= 2:
        kind = EventKind.MERGE
    elif pre_acute == 0 and cls.cluster is not ClusterKind.NONE:
        kind = EventKind.BIRTH
    elif pre_acute == 1 and cls.cluster is not ClusterKind.GROWING:
        kind = EventKind.RELEASE
    else:
        return []
    return [ClusterEvent(kind, float(time), np.asarray(loc, dtype=float).copy(), conf, cls.transition, cls.cluster)]


def _local_model_events(M: LocalLinearModel, t_span) -> list[ClusterEvent]:
    t0, t1 = t_span
    tau0 = M.t_star
    if len(M.momenta) == 3 or not (t0 < tau0 < t1):
        return []
    if len(M.momenta) != 4:
        raise ValueError("local-model events are implemented for three or four momenta")
    info = transition_analysis(M)
    return _transition_events(len(info["before_acute"]), info["classification"], tau0, M.x_star, M.momenta)


def _family_nodes(F: FiniteMinFamily, t: float, box) -> dict | None:
    """Nodes keyed by index triple, or None at a degenerate instant (coinciding nodes)."""
    cx = family_diagram(F, t, box)
    pos = [n.position for n in cx.nodes]
    scale = max(1.0, max(abs(b) for b in box))
    for a, b in itertools.combinations(pos, 2):
        if np.linalg.norm(a - b) <= 1e-9 * scale:
            return None
    return {n.indices: n for n in cx.nodes}


def _scan_times(t_span, dt: float) -> np.ndarray:
    t0, t1 = t_span
    n = int(math.ceil((t1 - t0) / dt - 1e-9))
    ts = t0 + dt * np.arange(n + 1)
    ts[-1] = min(ts[-1], t1)
    return ts


def _family_events(F: FiniteMinFamily, t_span, dt: float, box, clusters, step) -> list[ClusterEvent]:
    from .trajectory import integrate

    ts = _scan_times(t_span, dt)
    P = np.array([m.momentum for m in F.members])
    events: list[ClusterEvent] = []
    samples = [(float(t), _family_nodes(F, t, box)) for t in ts]
    samples = [(t, s) for t, s in samples if s is not None]

    for (ta, before), (tb, after) in zip(samples[:-1], samples[1:]):
        born = [tri for tri in after if tri not in before]
        gone = [tri for tri in before if tri not in after]
        if not born and not gone:
            continue
        changed = born[0] if born else gone[0]
        present = changed in after

        def side(s, tri=changed, present=present):
            nodes = _family_nodes(F, s, box)
            return 1.0 if nodes is not None and (tri in nodes) == present else -1.0

        te = _bisect_root(side, ta, tb, dt * 1e-3)
        involved = sorted(set(itertools.chain(*born, *gone)))
        if len(involved) == 4:
            cls = classify_configuration(P[involved])
            locs = [after[tri].position for tri in born] + [before[tri].position for tri in gone]
            loc = np.mean(locs, axis=0)
            pre = sum(before[tri].kind is NodeClass.ACUTE for tri in gone)
            events += _transition_events(pre, cls, te, loc, MomentumSet(P[involved]))
            continue
        for tri in born:
            if after[tri].kind is NodeClass.ACUTE:
                events.append(ClusterEvent(EventKind.BIRTH, te, after[tri].position,
                                           MomentumSet(P[list(tri)]), None, ClusterKind.GROWING))
        for tri in gone:
            if before[tri].kind is NodeClass.ACUTE:
                events.append(ClusterEvent(EventKind.RELEASE, te, before[tri].position,
                                           MomentumSet(P[list(tri)]), None, ClusterKind.STABLE))

    B = float(np.max(np.linalg.norm(P, axis=1)))
    h = dt if step is None else step
    reach = 3 * h * B
    for x0 in clusters or []:
        tr = integrate(F, x0, t_span[0], t_span[1], h)
        at_node = None
        for t, x in zip(tr.times, tr.positions):
            nodes = _family_nodes(F, t, box) or {}
            hit = next((n for n in nodes.values() if np.linalg.norm(n.position - x) <= reach), None)
            if hit is not None and at_node != hit.indices:
                conf = MomentumSet(P[list(hit.indices)])
                if hit.kind is NodeClass.ACUTE:
                    events.append(ClusterEvent(EventKind.MERGE, float(t), hit.position, conf, None,
                                               ClusterKind.GROWING))
                    break
                events.append(ClusterEvent(EventKind.PASS_THROUGH, float(t), hit.position, conf, None,
                                           ClusterKind.STABLE))
            at_node = None if hit is None else hit.indices
    events.sort(key=lambda e: e.time)
    return events


def detect_cluster_events(source, t_span: tuple[float, float], dt: float, *, box: tuple | None = None,
                          clusters: Sequence | None = None, step: float | None = None,
                          origin=(0.0, 0.0)) -> list[ClusterEvent]:
    """Cluster events over ``t_span``.

    ``source`` is one of

    * a callable ``t -> (3, 2)`` momentum array (a node's momentum triangle
      over time): births where the triangle turns acute, releases where it
      turns obtuse, localized by bisection on the smallest angle cosine;
    * a :class:`LocalLinearModel` with four momenta: the transition at its
      reference time, typed by :func:`classify_configuration`;
    * a planar :class:`FiniteMinFamily` of affine branches: births and
      releases of acute nodes, plus pass-through and merge events of the
      stable clusters started at ``clusters``.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    if isinstance(source, LocalLinearModel):
        return _local_model_events(source, t_span)
    if isinstance(source, FiniteMinFamily):
        if box is None:
            R = 4.0 * max(abs(t_span[0]), abs(t_span[1]), 1.0) * max(
                float(np.linalg.norm(m.momentum)) for m in source.members)
            box = (-R, R, -R, R)
        return _family_events(source, t_span, dt, box, clusters, step)
    if callable(source):
        return _path_events(source, t_span, dt, origin)
    raise TypeError("unsupported event source")
