import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlepattern.crsys import CrossRatioSystem, is_delaunay
from circlepattern.develop import (
    DevelopingMap,
    close_vertex_star,
    conformal_modulus,
    develop,
    extract_cross_ratios,
    geometric_delaunay_check,
    holonomy,
)
from circlepattern.errors import DevelopError
from circlepattern.fixtures import (
    jessen_fixture,
    one_vertex_torus_a,
    one_vertex_torus_b,
    regular_torus_fixture,
    square_torus_fixture,
)
from circlepattern.moebius import INF, cross_ratio, moebius_through
from circlepattern.surface import build_surface, lattice_coordinates, lift_patch, regular_torus

W = cmath.exp(1j * math.pi / 3)


def _lattice_dev(m, n, tau, offsets):
    s = regular_torus(m, n)

    def pos(v, w):
        a, b = lattice_coordinates(m, n, v, w)
        return a + b * tau + offsets[v]

    return s, DevelopingMap.from_positions(s, pos, lift_patch(s, (range(-1, 2), range(-1, 2))))


def test_equilateral_layout_is_lattice():
    fx = one_vertex_torus_a()
    patch = lift_patch(fx.surface, (range(-1, 2), range(-1, 2)))
    dev = develop(fx.cr, patch, seed=(0, 1, W))
    for (v, w), z in dev.positions.items():
        assert z == pytest.approx(w[0] + w[1] * W, abs=1e-12)
    hol = holonomy(dev)
    assert hol.kind == "I"
    assert hol.beta[0] == pytest.approx(1)
    assert hol.beta[1] == pytest.approx(W)


def test_develop_reproduces_given_lattice():
    fx = regular_torus_fixture(2, 2)
    dev = develop(fx.cr, fx.dev.patch, seed=fx.dev.face_positions(0))
    for key, z in fx.dev.positions.items():
        assert dev.positions[key] == pytest.approx(z, abs=1e-12)


def test_case_b_lifts_coincide():
    fx = one_vertex_torus_b(2.0)
    dev = develop(fx.cr, lift_patch(fx.surface, (range(-1, 2), range(-1, 2))))
    for w in ((1, 0), (0, 1), (1, 1), (1, -1)):
        assert dev.position(0, w) == pytest.approx(dev.position(0, (-w[0], -w[1])), abs=1e-12)


def test_case_b_holonomy_exchanges_fixed_points():
    fx = one_vertex_torus_b(2.0)
    hol = holonomy(develop(fx.cr))
    assert hol.kind == "III"
    p, q = hol.fixed_points
    assert hol.rho[0](p) == pytest.approx(p)
    assert hol.rho[1](p) == pytest.approx(q)
    assert hol.rho[1](q) == pytest.approx(p)


def test_inconsistent_system_raises():
    s = regular_torus(1, 1)
    bad = CrossRatioSystem(s, np.array([W, W, 1.2 * W]))
    with pytest.raises(DevelopError):
        develop(bad)


@settings(max_examples=25, deadline=None)
@given(
    st.floats(-0.4, 0.4),
    st.floats(0.7, 1.5),
    st.lists(st.complex_numbers(max_magnitude=0.08), min_size=4, max_size=4),
    st.integers(0, 10**6),
)
def test_traversal_order_independent(re_tau, im_tau, offsets, seed):
    s, dev = _lattice_dev(2, 2, complex(re_tau, im_tau), offsets)
    cr = extract_cross_ratios(dev)
    assert cr.residual_norm() < 1e-9
    patch = dev.patch
    a = develop(cr, patch, order="bfs")
    b = develop(cr, patch, order="dfs")
    c = develop(cr, patch, order=seed)
    for key, z in a.positions.items():
        assert b.positions[key] == pytest.approx(z, abs=1e-8)
        assert c.positions[key] == pytest.approx(z, abs=1e-8)


def _random_star(rng, n):
    angles = np.sort(rng.uniform(0, 2 * np.pi, n))[::-1]
    while np.min(np.abs(np.diff(np.r_[angles, angles[0] - 2 * np.pi]))) < 0.05:
        angles = np.sort(rng.uniform(0, 2 * np.pi, n))[::-1]
    return rng.normal() + 1j * rng.normal() + rng.uniform(0.5, 2, n) * np.exp(1j * angles)


def _star_values(centre, ring):
    # ring runs clockwise; the edge to ring[s] has apexes ring[s-1] and ring[s+1]
    n = len(ring)
    return np.array([cross_ratio(centre, ring[s % n], ring[s - 1], ring[(s + 1) % n]) for s in range(1, n + 1)])


@pytest.mark.parametrize("seed", range(25))
def test_random_star_closes(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(3, 10))
    centre = 0.1 + 0.2j
    ring = _random_star(rng, n) + centre
    vals = _star_values(centre, ring)
    assert abs(np.prod(vals) - 1) < 1e-10
    assert abs(np.cumsum(np.cumprod(vals))[-1]) < 1e-10
    out = close_vertex_star(vals)
    # reconstruction is the Moebius image with centre, ring[0], ring[1] -> inf, 0, 1
    m = moebius_through((centre, ring[0], ring[1]), (INF, 0, 1))
    for s in range(n):
        assert out.positions[s] == pytest.approx(m(ring[s]), abs=1e-9)
    assert out.positions[n] == pytest.approx(0, abs=1e-9)
    assert out.positions[n + 1] == pytest.approx(1, abs=1e-9)


def test_star_examples():
    out = close_vertex_star([W] * 6)
    assert out.gap < 1e-12
    assert not out.degenerate
    alt = close_vertex_star([-1, -1, -1, -1])
    assert alt.gap < 1e-12
    assert alt.degenerate
    with pytest.raises(DevelopError):
        close_vertex_star([W, W, W, W, W, 1.1 * W])


def test_extract_examples():
    assert np.allclose(regular_torus_fixture(2, 2).cr.cr, W)
    sq = square_torus_fixture(2, 2).cr
    assert set(np.round(sq.arguments, 12)) == {0.0, round(math.pi / 2, 12)}
    jes = jessen_fixture().cr
    assert jes.arguments.min() < 0 < jes.arguments.max()
    assert not is_delaunay(jes)


def test_geometric_delaunay_check():
    assert geometric_delaunay_check(regular_torus_fixture(2, 2).dev)
    assert geometric_delaunay_check(square_torus_fixture(2, 2).dev)
    s = build_surface([[0, 1, 2], [1, 0, 3], [2, 1, 3], [0, 2, 3]], 0)
    # apex l on the same side as k is a fold, cocircular or not
    for l in (1 + 1j, 2j):
        rep = geometric_delaunay_check(DevelopingMap.from_positions(s, [0, 1, 1j, l]))
        assert not rep and "folded" in rep.reason
    rep = geometric_delaunay_check(DevelopingMap.from_positions(s, [0, 1, 1j, 0.5 - 0.1j]))
    assert not rep and "circumdisk" in rep.reason


def test_modulus_equilateral():
    rep = conformal_modulus(develop(one_vertex_torus_a().cr))
    assert rep.euclidean
    assert rep.tau == pytest.approx(W, abs=1e-12)


@pytest.mark.parametrize("m,n", [(2, 2), (3, 3), (2, 1), (1, 3)])
def test_modulus_regular_torus(m, n):
    fx = regular_torus_fixture(m, n)
    rep = conformal_modulus(develop(fx.cr))
    assert rep.tau == pytest.approx(n * W / m, abs=1e-10)


@settings(max_examples=15, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(0.8, 1.4))
def test_modulus_of_lattice_layout(re_tau, im_tau):
    tau = complex(re_tau, im_tau)
    _, dev = _lattice_dev(2, 2, tau, [0, 0.03, 0.02j, -0.01])
    rep = conformal_modulus(develop(extract_cross_ratios(dev)))
    assert rep.euclidean
    assert rep.tau == pytest.approx(tau, abs=1e-9)
