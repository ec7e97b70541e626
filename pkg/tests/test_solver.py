import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from circlepattern.crsys import AngleStructure, is_delaunay, ramification_index, validate_angle_structure
from circlepattern.errors import InvalidSystemError
from circlepattern.develop import affine_normalize, geometric_delaunay_check
from circlepattern.fixtures import icosahedron_fixture, regular_torus_fixture
from circlepattern.hqd import cotangent_weights
from circlepattern.solver import (
    AngleProblem,
    continuation_path,
    covering_scan,
    newton_step,
    perturbed_sphere_angles,
    rigidity_check,
    solve_pattern,
    solve_sphere_pattern,
)
from circlepattern.surface import regular_torus

W = cmath.exp(1j * math.pi / 3)


@pytest.fixture(scope="module")
def torus():
    fx = regular_torus_fixture(2, 2)
    return fx.surface, fx.theta


def test_symmetric_point(torus):
    pt = solve_pattern(*torus, 0, 0)
    assert np.abs(pt.x.x).max() < 1e-12
    assert np.allclose(pt.cr.cr, W, atol=1e-12)
    assert pt.modulus.euclidean
    assert pt.tau == pytest.approx(W, abs=1e-10)
    assert pt.hqd_dimension == 2


def test_one_vertex_symmetric_point():
    fx = regular_torus_fixture(1, 1)
    pt = solve_pattern(fx.surface, fx.theta, 0, 0)
    assert np.prod(pt.cr.cr) == pytest.approx(-1, abs=1e-12)


@pytest.mark.parametrize("a1,a2", [(0.5, -0.3), (-0.8, 0.1), (0.2, 0.9)])
def test_round_trip(torus, a1, a2):
    pt = solve_pattern(*torus, a1, a2)
    h1, h2 = pt.modulus.h
    assert h1.real == pytest.approx(a1, abs=1e-8)
    assert h2.real == pytest.approx(a2, abs=1e-8)
    assert not pt.modulus.euclidean
    assert pt.hqd_dimension == 2
    assert is_delaunay(pt.cr)
    assert (ramification_index(pt.cr) == 1).all()
    assert cotangent_weights(pt.dev).min() >= -1e-10
    assert geometric_delaunay_check(pt.dev)
    assert geometric_delaunay_check(affine_normalize(pt.dev)[0])


def test_invalid_theta_rejected():
    s = regular_torus(2, 2)
    with pytest.raises(InvalidSystemError):
        solve_pattern(s, AngleStructure.constant(s, math.pi / 2), 0, 0)


def test_newton_step_at_solution(torus):
    pt = solve_pattern(*torus, 0.4, 0.1)
    problem = AngleProblem(*torus)
    a, rn = newton_step(problem, pt.angles, np.array([0.4, 0.1]))
    assert np.abs(a - pt.angles).max() < 1e-12
    assert rn < 1e-12


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6))
def test_residual_decreases(seed):
    s, th = regular_torus_fixture(2, 2).surface, regular_torus_fixture(2, 2).theta
    problem = AngleProblem(s, th)
    rng = np.random.default_rng(seed)
    null = problem.linear_null_space()
    a = problem.interior_point() + 0.05 * null @ rng.normal(size=null.shape[1])
    targets = rng.uniform(-0.3, 0.3, 2)
    norm = float(np.abs(problem.residual(a, targets)).max())
    for _ in range(6):
        a, rn = newton_step(problem, a, targets)
        assert rn <= norm
        norm = rn


def test_closed_loop(torus):
    path = continuation_path(*torus, [(0, 0), (1, 0), (1, 1), (0, 1), (0, 0)])
    assert np.abs(path[-1].x.x - path[0].x.x).max() < 1e-7
    assert [p.modulus.euclidean for p in path] == [True, False, False, False, True]


def test_ray_holonomy(torus):
    end = continuation_path(*torus, [(0, 0), (1, 0), (2, 0), (3, 0)])[-1]
    assert math.log(abs(end.holonomy.alpha[0])) == pytest.approx(3, abs=1e-7)


def test_type_two_at_unit_point(torus):
    pt = solve_pattern(*torus, 1, 0)
    assert pt.holonomy.kind == "II"
    assert math.log(abs(pt.holonomy.alpha[0])) == pytest.approx(1, abs=1e-7)


def test_sign_symmetry(torus):
    a = solve_pattern(*torus, 0.6, -0.4)
    b = solve_pattern(*torus, -0.6, 0.4)
    assert a.tau == pytest.approx(b.tau, abs=1e-8)
    assert a.tau.imag > 0


def test_small_scan(torus):
    res = covering_scan(*torus, n=5)
    assert res.symmetry_defect < 1e-8
    assert not res.duplicates
    assert abs(res.jacobian_det[(0.5, 0.5)]) > 1e-6


def test_rigidity_at_origin(torus):
    rep = rigidity_check(*torus, 0, 0, trials=20)
    assert rep.converged == 20
    assert rep.max_cr_deviation < 1e-7
    assert np.allclose(rep.reference.cr.cr, W, atol=1e-12)


def test_rigidity_single_cluster(torus):
    rep = rigidity_check(*torus, 0.7, -0.2, trials=20, seed=3)
    assert rep.converged == 20
    assert rep.max_sigma_spread < 1e-7


def test_icosahedron_regular_pattern():
    fx = icosahedron_fixture()
    cr = solve_sphere_pattern(fx.surface, fx.theta)
    assert np.allclose(cr.arguments, 2 * math.pi / 5)
    assert np.allclose(np.abs(cr.cr), 1, atol=1e-12)


def test_perturbed_sphere_unique():
    fx = icosahedron_fixture()
    th = perturbed_sphere_angles(fx.surface, fx.theta, seed=1)
    assert validate_angle_structure(AngleStructure(fx.surface, th))
    ref = solve_sphere_pattern(fx.surface, th)
    rng = np.random.default_rng(5)
    for _ in range(10):
        other = solve_sphere_pattern(fx.surface, th, init=rng.normal(scale=0.3, size=fx.surface.n_edges))
        assert np.abs(other.cr - ref.cr).max() < 1e-7
