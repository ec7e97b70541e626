import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlepattern.errors import MeshError
from circlepattern.fixtures import icosahedron_surface
from circlepattern.surface import (
    TriangulatedSurface,
    build_surface,
    dual_cycles,
    lift_patch,
    regular_torus,
)

dims = st.integers(1, 4)


def test_one_vertex_torus_counts():
    s = regular_torus(1, 1)
    assert (s.n_vertices, s.n_edges, s.n_faces) == (1, 3, 2)
    assert s.degree(0) == 6


def test_one_vertex_torus_from_labelled_faces():
    # square with identified sides, split along a diagonal
    labels = np.array([(1, 0), (0, 1), (-1, -1), (1, 1), (-1, 0), (0, -1)])
    s = build_surface([[0, 0, 0], [0, 0, 0]], 1, deck_labels=labels)
    assert (s.n_vertices, s.n_edges, s.n_faces) == (1, 3, 2)


@pytest.mark.parametrize("m,n,counts", [(2, 2, (4, 12, 8)), (3, 1, (3, 9, 6)), (3, 3, (9, 27, 18))])
def test_regular_torus_counts(m, n, counts):
    s = regular_torus(m, n)
    assert (s.n_vertices, s.n_edges, s.n_faces) == counts
    assert s.euler_characteristic == 0


@settings(max_examples=16, deadline=None)
@given(dims, dims)
def test_regular_torus_structure(m, n):
    s = regular_torus(m, n)
    assert s.n_edges == 3 * m * n
    for h in range(s.n_half_edges):
        h2 = s.twin[h]
        assert s.twin[h2] == h
        assert s.origin(h) == s.target(h2)
        assert s.label(h2) == tuple(-x for x in s.label(h))
    # deck words around each face cancel
    for f in range(s.n_faces):
        assert tuple(np.sum([s.label(3 * f + t) for t in range(3)], axis=0)) == (0, 0)
    for v in range(s.n_vertices):
        assert s.degree(v) == 6


def test_icosahedron():
    s, _ = icosahedron_surface()
    assert (s.n_vertices, s.n_edges, s.n_faces, s.genus) == (12, 30, 20, 0)
    assert s.euler_characteristic == 2


def test_non_manifold_rejected():
    faces = [[0, 1, 2], [1, 0, 3], [0, 1, 4], [2, 1, 3]]
    with pytest.raises(MeshError):
        build_surface(faces, 0)


def test_inconsistent_orientation_rejected():
    s, _ = icosahedron_surface()
    faces = s.faces.tolist()
    faces[0] = faces[0][::-1]
    with pytest.raises(MeshError):
        build_surface(faces, 0)


def test_wrong_genus_rejected():
    s, _ = icosahedron_surface()
    with pytest.raises(MeshError):
        build_surface(s.faces.tolist(), 1)


def test_vertex_star_is_cyclic():
    s = regular_torus(2, 3)
    for v in range(s.n_vertices):
        star = s.vertex_star(v)
        assert all(s.origin(h) == v for h in star)
        assert len(set(star)) == len(star) == s.degree(v)
        for a, b in zip(star, star[1:] + star[:1]):
            assert s.cw_next(a) == b


def test_json_round_trip():
    s = regular_torus(2, 3)
    d = json.loads(json.dumps(s.to_json_dict()))
    t = TriangulatedSurface.from_json_dict(d)
    assert np.array_equal(s.faces, t.faces)
    assert np.array_equal(s.twin, t.twin)
    assert np.array_equal(s.labels, t.labels)


def test_patch_counts():
    assert len(lift_patch(regular_torus(1, 1), ((0, 1), (0, 1))).lifted_vertices) == 4
    p = lift_patch(regular_torus(2, 2))
    assert len(p.lifted_vertices) == 4 and len(p.face_lifts) == 8
    assert p.is_edge_connected()


def test_lifted_star_has_six_faces():
    # walk the lifted star through next/twin with deck bookkeeping
    s = regular_torus(1, 1)
    p = lift_patch(s, (range(-1, 2), range(-1, 2)))
    assert len(p.lifted_vertices) == 9
    centre = (0, (0, 0))
    f, t = divmod(s.vertex_star(0)[0], 3)
    anchor = next(a for g, a in p.face_lifts if g == f and s.corner_word(g, a, t) == (0, 0))
    walked = set()
    cur = (f, anchor, t)
    for _ in range(12):
        walked.add(cur[:2])
        g, a, u = cur
        # pass to the face across the edge entering the corner
        cur = s.cross(g, a, (u + 2) % 3)
        assert (int(s.faces[cur[0], cur[2]]), s.corner_word(*cur)) == centre
    assert len(walked) == 6
    assert sorted(walked) == sorted(p.faces_at(centre))


def test_generators_have_unit_words():
    s = regular_torus(3, 2)
    p = lift_patch(s)
    for walk, word in zip(p.generators, ((1, 0), (0, 1))):
        assert tuple(np.sum([s.label(h) for h in walk], axis=0)) == word
        for a, b in zip(walk, walk[1:] + walk[:1]):
            assert s.target(a) == s.origin(b)


def test_dual_cycles_icosahedron():
    s, _ = icosahedron_surface()
    assert not [c for c in dual_cycles(s, 4) if c.contractible]
    five = [c for c in dual_cycles(s, 5) if len(c) == 5]
    assert len(five) == 12
    assert all(c.enclosed == 1 for c in five)


def test_dual_cycles_one_vertex_torus():
    s = regular_torus(1, 1)
    for c in dual_cycles(s, 6):
        assert c.deck_word != (0, 0) or c.enclosed == 1


def test_dual_cycle_around_vertex():
    s = regular_torus(3, 3)
    around = [c for c in dual_cycles(s, 6) if c.contractible and c.enclosed == 1]
    assert len(around) == 9
    assert all(len(c) == 6 for c in around)
