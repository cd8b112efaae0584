"""Deterministic SVG pictures of planar shock complexes.

Coordinates are in velocity units (positions ``q`` divided by ``|tau|``),
drawn at 100 user units per velocity unit with the origin at the center of
the canvas and the y axis pointing up.  Shock edges are solid lines,
particle velocities arrows, stable clusters white disks and growing
clusters black disks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .shock_geometry import ClusterKind, NodeClass, ShockComplex

__all__ = ["Scene", "render_svg", "UNITS_PER_VELOCITY"]

UNITS_PER_VELOCITY = 100.0

_DEFAULT_STYLE = {
    "edge_stroke": "#000000",
    "edge_width": 2.0,
    "arrow_stroke": "#1f4e9c",
    "arrow_width": 1.5,
    "arrow_head": 6.0,
    "cluster_radius": 6.0,
    "cluster_stroke": "#000000",
    "background": "#ffffff",
}


@dataclass
class Scene:
    """Geometry to draw, in velocity units."""

    extent: float
    edges: list = field(default_factory=list)     # (start, end) pairs
    arrows: list = field(default_factory=list)    # (base, vector) pairs
    clusters: list = field(default_factory=list)  # (position, ClusterKind) pairs

    def is_empty(self) -> bool:
        return not (self.edges or self.arrows or self.clusters)

    @classmethod
    def from_complex(cls, cx: ShockComplex, particles=None, arrow_offset: float = 0.5,
                     exit_offset: float = 0.25) -> "Scene":
        """Scene of a shock complex.

        Each edge gets one arrow at distance ``arrow_offset`` from its node (or
        at its foot point if it has none) showing the particle velocity in the
        frame of that node.  Acute nodes carry a growing cluster; at an obtuse
        node a stable cluster is drawn ``exit_offset`` along the exit edge.
        ``particles`` is an optional list of ``(position, velocity)`` pairs in
        ``q`` coordinates.
        """
        s = abs(cx.tau) if cx.tau and math.isfinite(cx.tau) else 1.0
        box = np.asarray(cx.box, dtype=float) / s
        scene = cls(extent=float(np.max(np.abs(box))))
        for e in cx.edges:
            seg = e.segment(cx.box)
            if seg is not None:
                scene.edges.append((seg[0] / s, seg[1] / s))
        for e in cx.edges:
            node = next((n for n in cx.nodes if set(e.indices) <= set(n.indices)), None)
            if node is None:
                base, frame, out = e.origin / s, np.zeros(2), e.direction
            else:
                base = node.position / s
                frame = node.classification.node_velocity
                sn = float((node.position - e.origin) @ e.direction)
                out = e.direction if math.isclose(sn, e.s_min, rel_tol=1e-9, abs_tol=1e-9) else -e.direction
            scene.arrows.append((base + arrow_offset * out, e.velocity - frame))
        for n in cx.nodes:
            pos = n.position / s
            if n.kind is NodeClass.ACUTE:
                scene.clusters.append((pos, ClusterKind.GROWING))
            elif n.kind is NodeClass.OBTUSE:
                v = n.classification.particle_velocity - n.classification.node_velocity
                nv = float(np.linalg.norm(v))
                if nv > 0:
                    scene.clusters.append((pos + exit_offset * v / nv, ClusterKind.STABLE))
        for x, v in particles or []:
            scene.arrows.append((np.asarray(x, dtype=float) / s, np.asarray(v, dtype=float)))
        return scene


def _f(v: float) -> str:
    out = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if out in ("-0", "") else out


def _pt(p) -> tuple[str, str]:
    return _f(UNITS_PER_VELOCITY * float(p[0])), _f(-UNITS_PER_VELOCITY * float(p[1]))


def render_svg(scene, style: dict | None = None) -> str:
    """SVG 1.1 text of a :class:`Scene` or a :class:`ShockComplex`."""
    if isinstance(scene, ShockComplex):
        scene = Scene.from_complex(scene)
    if scene.is_empty():
        raise ValueError("nothing to render")
    st = dict(_DEFAULT_STYLE, **(style or {}))
    half = UNITS_PER_VELOCITY * scene.extent
    size = _f(2 * half)
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        "<!-- adhesion shock picture: 100 user units per velocity unit, origin at the center, y axis up -->",
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="{_f(-half)} {_f(-half)} {size} {size}">',
        f'<rect x="{_f(-half)}" y="{_f(-half)}" width="{size}" height="{size}" fill="{st["background"]}"/>',
    ]
    for a, b in scene.edges:
        (x1, y1), (x2, y2) = _pt(a), _pt(b)
        lines.append(f'<line x1="{x1}" y1="{y1}" x2="{x2}" y2="{y2}" stroke="{st["edge_stroke"]}" '
                     f'stroke-width="{_f(st["edge_width"])}"/>')
    for base, vec in scene.arrows:
        base, vec = np.asarray(base, dtype=float), np.asarray(vec, dtype=float)
        tip = base + vec
        n = float(np.linalg.norm(vec)) * UNITS_PER_VELOCITY
        if n == 0:
            continue
        u = np.array([vec[0], vec[1]]) / np.linalg.norm(vec)
        hd = min(st["arrow_head"], 0.5 * n) / UNITS_PER_VELOCITY
        w = np.array([-u[1], u[0]])
        left, right = tip - hd * u + 0.5 * hd * w, tip - hd * u - 0.5 * hd * w
        (bx, by), (tx, ty), (lx, ly), (rx, ry) = _pt(base), _pt(tip), _pt(left), _pt(right)
        lines.append(f'<path d="M {bx} {by} L {tx} {ty} M {lx} {ly} L {tx} {ty} L {rx} {ry}" fill="none" '
                     f'stroke="{st["arrow_stroke"]}" stroke-width="{_f(st["arrow_width"])}"/>')
    for pos, kind in scene.clusters:
        cx, cy = _pt(pos)
        fill = "#000000" if kind is ClusterKind.GROWING else "#ffffff"
        lines.append(f'<circle cx="{cx}" cy="{cy}" r="{_f(st["cluster_radius"])}" fill="{fill}" '
                     f'stroke="{st["cluster_stroke"]}" stroke-width="1"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
