"""Named example configurations."""

from __future__ import annotations

import cmath
import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from circlepattern.crsys import AngleStructure, CrossRatioSystem
from circlepattern.develop import DevelopingMap, extract_cross_ratios
from circlepattern.moebius import stereographic
from circlepattern.surface import TriangulatedSurface, build_surface, lattice_coordinates, regular_torus

OMEGA = cmath.exp(1j * math.pi / 3)
GOLDEN = (1 + math.sqrt(5)) / 2


@dataclass
class Fixture:
    name: str
    surface: TriangulatedSurface
    cr: CrossRatioSystem | None = None
    theta: AngleStructure | None = None
    dev: DevelopingMap | None = None
    q: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def _lattice_map(surface, m, n, basis=(1.0, OMEGA)):
    def pos(v, w):
        a, b = lattice_coordinates(m, n, v, w)
        return a * basis[0] + b * basis[1]

    return DevelopingMap.from_positions(surface, pos)


def regular_torus_fixture(m: int = 2, n: int = 2) -> Fixture:
    """Equilateral pattern on the m x n lattice torus (all angles pi/3)."""
    s = regular_torus(m, n)
    cr = CrossRatioSystem(s, np.full(s.n_edges, OMEGA))
    theta = AngleStructure.constant(s, math.pi / 3)
    return Fixture(f"regular-torus({m},{n})", s, cr, theta, _lattice_map(s, m, n), meta={"m": m, "n": n})


def one_vertex_torus_a() -> Fixture:
    """One-vertex torus with ``cr1 cr2 cr3 = -1`` (equilateral)."""
    fx = regular_torus_fixture(1, 1)
    fx.name = "one-vertex-torus-a"
    return fx


def case_b_values(b) -> tuple:
    b = complex(b)
    return b, -(b + 1) / b, -1 / (1 + b)


def one_vertex_torus_b(b=2.0) -> Fixture:
    """One-vertex torus with ``cr1 cr2 cr3 = 1`` and vanishing partial sum.

    The values ``b, -(b+1)/b, -1/(1+b)`` are assigned to the edges in the
    clockwise star order of the vertex.
    """
    s = regular_torus(1, 1)
    star = s.vertex_star(0)[:3]
    cr = np.zeros(s.n_edges, dtype=complex)
    for h, val in zip(star, case_b_values(b)):
        cr[int(s.edge_of[h])] = val
    return Fixture(f"one-vertex-torus-b({complex(b)})", s, CrossRatioSystem(s, cr), meta={"b": complex(b)})


def square_torus_fixture(m: int = 2, n: int = 2) -> Fixture:
    """Right isosceles triangles: the lattice torus laid out on Z[i]."""
    s = regular_torus(m, n)
    dev = _lattice_map(s, m, n, basis=(1.0, 1j))
    cr = extract_cross_ratios(dev)
    return Fixture(f"square-torus({m},{n})", s, cr, AngleStructure(s, cr.arguments), dev)


def _triangle_faces(edges, n_vertices):
    adj = {v: set() for v in range(n_vertices)}
    for i, j in edges:
        adj[i].add(j)
        adj[j].add(i)
    tris = []
    for i in range(n_vertices):
        for j, k in itertools.combinations(sorted(adj[i]), 2):
            if i < j < k and k in adj[j]:
                tris.append([i, j, k])
    return tris


def _orient_consistently(tris):
    """Flip triangles so that shared edges are traversed oppositely."""
    tris = [list(t) for t in tris]
    done = {0}
    stack = [0]
    edge_owner = {}
    for f, t in enumerate(tris):
        for a, b in zip(t, t[1:] + t[:1]):
            edge_owner.setdefault(frozenset((a, b)), []).append(f)
    while stack:
        f = stack.pop()
        t = tris[f]
        for a, b in zip(t, t[1:] + t[:1]):
            for g in edge_owner[frozenset((a, b))]:
                if g == f or g in done:
                    continue
                u = tris[g]
                if any((x, y) == (a, b) for x, y in zip(u, u[1:] + u[:1])):
                    u.reverse()
                done.add(g)
                stack.append(g)
    return tris


def _signed_area(z):
    return ((z[1] - z[0]).conjugate() * (z[2] - z[0])).imag


def jessen_fixture() -> Fixture:
    """Jessen's orthogonal icosahedron projected stereographically.

    Vertices are the cyclic placements of (0, +-1, +-2); short edges have
    squared length 6, the six long edges squared length 16. The attached
    quadratic differential is 1 on short and -4 on long edges.
    """
    names = ["A", "E", "D", "H", "B", "I", "F", "G", "bA", "bE", "C", "bI"]
    pts = np.array(
        [
            (1, -2, 0), (-1, -2, 0), (2, 0, 1), (2, 0, -1), (0, -1, 2), (0, 1, 2),
            (-2, 0, 1), (-2, 0, -1), (1, 2, 0), (-1, 2, 0), (0, -1, -2), (0, 1, -2),
        ],
        dtype=float,
    )
    nv = len(pts)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    short = [(i, j) for i in range(nv) for j in range(i + 1, nv) if d2[i, j] == 6]
    long = [(i, j) for i in range(nv) for j in range(i + 1, nv) if d2[i, j] == 16]
    tris = _orient_consistently(_triangle_faces(short + long, nv))
    pole = np.array([0.0, 0.0, math.sqrt(5)])
    z = [stereographic(p, pole) for p in pts]
    if sum(_signed_area([z[v] for v in t]) > 0 for t in tris) < len(tris) / 2:
        tris = [t[::-1] for t in tris]
    s = build_surface(tris, 0)
    longset = {frozenset(e) for e in long}
    q = np.array([-4.0 if frozenset(s.edge_vertices(e)) in longset else 1.0 for e in range(s.n_edges)])
    dev = DevelopingMap.from_positions(s, z)
    return Fixture(
        "jessen", s, extract_cross_ratios(dev), dev=dev, q=q,
        meta={"names": names, "points": pts, "short": short, "long": long, "pole": pole},
    )


def icosahedron_surface() -> tuple:
    pts = []
    for s1, s2 in itertools.product((1, -1), repeat=2):
        base = (0.0, s1 * 1.0, s2 * GOLDEN)
        for k in range(3):
            pts.append(base[-k:] + base[:-k] if k else base)
    pts = np.array(pts)
    nv = len(pts)
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    edges = [(i, j) for i in range(nv) for j in range(i + 1, nv) if abs(d2[i, j] - 4) < 1e-9]
    tris = []
    for t in _triangle_faces(edges, nv):
        a, b, c = pts[t]
        if np.dot(np.cross(b - a, c - a), a + b + c) < 0:
            t = t[::-1]
        tris.append(t)
    return build_surface(tris, 0), pts


def icosahedron_fixture() -> Fixture:
    """Icosahedron with all intersection angles 2 pi / 5."""
    s, pts = icosahedron_surface()
    theta = AngleStructure.constant(s, 2 * math.pi / 5)
    return Fixture("icosahedron-sphere", s, theta=theta, meta={"points": pts})


FIXTURES = {
    "one-vertex-torus-a": one_vertex_torus_a,
    "one-vertex-torus-b": one_vertex_torus_b,
    "regular-torus": regular_torus_fixture,
    "square-torus": square_torus_fixture,
    "jessen": jessen_fixture,
    "icosahedron-sphere": icosahedron_fixture,
}


def get_fixture(name: str, *params) -> Fixture:
    if name not in FIXTURES:
        raise KeyError(f"unknown fixture {name!r}; choose from {sorted(FIXTURES)}")
    return FIXTURES[name](*params)
