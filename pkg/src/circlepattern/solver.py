"""The Delaunay family of circle patterns on a torus.

Patterns are computed in corner-angle coordinates: ``angles[f, t]`` is the
angle of face ``f`` at its corner ``t``. A pattern with intersection angles
Theta and affine holonomy scaling ``|alpha_r| = exp(A_r)`` solves

* face rows: the three angles of each face sum to pi;
* edge rows: the two angles opposite an edge sum to ``pi - Theta_e``;
* vertex rows: the edge-length ratios (law of sines) multiply to 1 around
  each vertex;
* holonomy rows: along a dual path realizing ``gamma_r`` the length ratios
  multiply to ``exp(A_r)``.

The first two families are linear, the last two are linear in
``log sin(angles)``.
"""

from __future__ import annotations

import cmath
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from circlepattern.crsys import (
    AngleStructure,
    CrossRatioSystem,
    LogCoordinates,
    exp_theta,
    is_delaunay,
    ramification_index,
    validate_angle_structure,
)
from circlepattern.develop import (
    DevelopingMap,
    Holonomy,
    ModulusReport,
    conformal_modulus,
    develop,
)
from circlepattern.errors import ConvergenceError, InvalidSystemError, MeshError, RigidityCounterexample
from circlepattern.hqd import hqd_system_cr_form, kernel_basis
from circlepattern.surface import TriangulatedSurface

NEWTON_TOL = 1e-13
MAX_ITER = 60


def _combinatorial_dual_path(surface, word, start_face=0):
    """Face lifts and crossings of a shortest dual walk from
    ``(start_face, 0)`` to ``(start_face, word)``."""
    start = (start_face, (0, 0))
    goal = (start_face, tuple(word))
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for t in range(3):
            f2, a2, t2 = surface.cross(*node, t)
            if (f2, a2) not in prev and max(abs(a2[0]), abs(a2[1])) <= 4:
                prev[(f2, a2)] = (node, t, t2)
                queue.append((f2, a2))
    if goal not in prev:
        raise MeshError(f"no dual path realizes deck word {word}")
    steps = []
    node = goal
    while prev[node] is not None:
        node, t, t2 = prev[node]
        steps.append((node[0], t, t2))
    steps.reverse()
    # steps[p] = (face F_p, exit index of F_p, entry index of F_{p+1})
    return steps


class AngleProblem:
    """Residual and Jacobian of the angle system for fixed Theta."""

    def __init__(self, surface: TriangulatedSurface, theta):
        if surface.genus != 1:
            raise MeshError("the affine family lives on a torus")
        self.surface = surface
        self.theta = np.asarray(getattr(theta, "theta", theta), dtype=float)
        s = surface
        nf, ne, nv = s.n_faces, s.n_edges, s.n_vertices
        n = 3 * nf
        self.n = n
        lin = np.zeros((nf + ne, n))
        rhs = np.zeros(nf + ne)
        for f in range(nf):
            lin[f, 3 * f : 3 * f + 3] = 1.0
            rhs[f] = math.pi
        for e in range(ne):
            h, h2 = (int(x) for x in s.edge_half_edges[e])
            lin[nf + e, _opp(h)] += 1.0
            lin[nf + e, _opp(h2)] += 1.0
            rhs[nf + e] = math.pi - self.theta[e]
        self.lin, self.lin_rhs = lin, rhs
        # rows acting on log sin(angles)
        log_rows = np.zeros((nv + 2, n))
        for h in range(s.n_half_edges):
            f, t = divmod(h, 3)
            v = s.origin(h)
            log_rows[v, 3 * f + (t + 1) % 3] += 1.0
            log_rows[v, 3 * f + (t + 2) % 3] -= 1.0
        self.paths = []
        for r, word in enumerate(((1, 0), (0, 1))):
            steps = _combinatorial_dual_path(s, word)
            self.paths.append(steps)
            n_steps = len(steps)
            for p in range(1, n_steps + 1):
                f = steps[p % n_steps][0] if p < n_steps else steps[0][0]
                entry = steps[p - 1][2]
                exit_ = steps[p][1] if p < n_steps else steps[0][1]
                log_rows[nv + r, 3 * f + (exit_ + 2) % 3] += 1.0
                log_rows[nv + r, 3 * f + (entry + 2) % 3] -= 1.0
        self.log_rows = log_rows

    def residual(self, angles, targets) -> np.ndarray:
        a = np.asarray(angles)
        ls = np.log(np.sin(a))
        tail = self.log_rows @ ls
        tail[-2:] -= targets
        return np.concatenate([self.lin @ a - self.lin_rhs, tail])

    def jacobian(self, angles) -> np.ndarray:
        cot = 1.0 / np.tan(np.asarray(angles))
        return np.vstack([self.lin, self.log_rows * cot[None, :]])

    def interior_point(self) -> np.ndarray:
        """Angles satisfying the linear rows with the largest minimum angle."""
        n = self.n
        c = np.zeros(n + 1)
        c[-1] = -1.0
        a_eq = np.hstack([self.lin, np.zeros((self.lin.shape[0], 1))])
        a_ub = np.hstack([-np.eye(n), np.ones((n, 1))])
        res = linprog(
            c,
            A_ub=a_ub,
            b_ub=np.zeros(n),
            A_eq=a_eq,
            b_eq=self.lin_rhs,
            bounds=[(0, math.pi)] * n + [(None, None)],
            method="highs",
        )
        if res.status != 0 or res.x[-1] <= 1e-9:
            raise InvalidSystemError("no triangulation with positive angles realizes Theta")
        return res.x[:n]

    def linear_null_space(self) -> np.ndarray:
        _, sv, vh = np.linalg.svd(self.lin)
        rank = int(np.sum(sv > 1e-10 * sv[0]))
        return vh[rank:].T


def _opp(h):
    return 3 * (h // 3) + (h + 2) % 3


def newton_step(problem: AngleProblem, angles, targets):
    """One damped Gauss-Newton step with backtracking.

    Returns ``(angles, residual_norm)``; the step is only taken if it keeps
    all angles in (0, pi) and lowers the residual.
    """
    a = np.asarray(angles, dtype=float)
    r = problem.residual(a, targets)
    norm = float(np.abs(r).max())
    if norm == 0.0:
        return a.copy(), 0.0
    step, *_ = np.linalg.lstsq(problem.jacobian(a), -r, rcond=None)
    lam = 1.0
    while lam > 1e-6:
        cand = a + lam * step
        if np.all(cand > 0) and np.all(cand < math.pi):
            rn = float(np.abs(problem.residual(cand, targets)).max())
            if rn < norm:
                return cand, rn
        lam *= 0.5
    return a.copy(), norm


def newton_solve(problem, angles, targets, tol=NEWTON_TOL, max_iter=MAX_ITER):
    a = np.asarray(angles, dtype=float)
    targets = np.asarray(targets, dtype=float)
    trace = [float(np.abs(problem.residual(a, targets)).max())]
    for _ in range(max_iter):
        if trace[-1] <= tol:
            break
        a_new, rn = newton_step(problem, a, targets)
        if rn >= trace[-1]:
            break
        a = a_new
        trace.append(rn)
    if trace[-1] > max(tol, 1e-11):
        raise ConvergenceError(f"Newton stalled at residual {trace[-1]:.3g}", trace=trace)
    return a, trace


@dataclass
class AffineFamilyPoint:
    theta: AngleStructure
    A: tuple
    angles: np.ndarray
    x: LogCoordinates
    cr: CrossRatioSystem
    dev: DevelopingMap
    holonomy: Holonomy
    modulus: ModulusReport
    newton_residual: float
    iterations: int
    phi_residual: float
    hqd_dimension: int = field(default=-1)

    @property
    def tau(self) -> complex:
        return self.modulus.tau

    def to_json_dict(self) -> dict:
        m = self.modulus
        return {
            "A": list(self.A),
            "x": {str(e): float(v) for e, v in enumerate(self.x.x)},
            **self.cr.to_json_dict(),
            **self.theta.to_json_dict(),
            "holonomy": {
                "type": self.holonomy.kind,
                "alpha": [[a.real, a.imag] for a in self.holonomy.alpha],
                "beta": [[b.real, b.imag] for b in self.holonomy.beta],
            },
            "modulus": {
                "h": [[h.real, h.imag] for h in m.h],
                "tau": [m.tau.real, m.tau.imag],
                "euclidean": m.euclidean,
                "flipped": m.flipped,
            },
            "newton_residual": self.newton_residual,
            "phi_residual": self.phi_residual,
            "iterations": self.iterations,
            **self.dev.to_json_dict(),
        }


def log_coordinates_from_angles(surface, angles) -> np.ndarray:
    ls = np.log(np.sin(np.asarray(angles)))
    x = np.empty(surface.n_edges)
    for e in range(surface.n_edges):
        h, h2 = (int(v) for v in surface.edge_half_edges[e])
        f, t = divmod(h, 3)
        f2, t2 = divmod(h2, 3)
        x[e] = ls[3 * f + (t + 1) % 3] - ls[3 * f + t] + ls[3 * f2 + (t2 + 1) % 3] - ls[3 * f2 + t2]
    return x


def point_from_angles(problem: AngleProblem, angles, targets, trace=(0.0,), check=True) -> AffineFamilyPoint:
    """Assemble cross ratios, layout, holonomy and modulus from angles."""
    s = problem.surface
    theta = AngleStructure(s, problem.theta)
    x = LogCoordinates(s, log_coordinates_from_angles(s, angles))
    cr = exp_theta(x, theta)
    phi = cr.residual_norm()
    if phi > 1e-10:
        raise ConvergenceError(f"vertex equations not met (residual {phi:.3g})", trace=list(trace))
    a0, a1, a2 = angles[0:3]
    seed = (0j, 1 + 0j, math.sin(a1) / math.sin(a2) * cmath.exp(1j * a0))
    dev = develop(cr, seed=seed, seed_face=(0, (0, 0)))
    hol = dev.holonomy()
    mod = conformal_modulus(dev)
    if check:
        rep = is_delaunay(cr, check_valid=False)
        if not rep.ok:
            raise InvalidSystemError(f"converged pattern is not Delaunay: {rep.reason}")
        if np.any(ramification_index(cr) != 1):
            raise InvalidSystemError("converged pattern has branch points")
    return AffineFamilyPoint(
        theta, (float(targets[0]), float(targets[1])), np.asarray(angles), x, cr, dev, hol, mod,
        float(trace[-1]), len(trace) - 1, phi,
    )


def _solve_angles(problem, targets, init=None, start=None):
    """Newton from ``init``; else from the interior point, falling back to a
    continuation from ``start`` (angles at A = 0 by default)."""
    targets = np.asarray(targets, dtype=float)
    if init is not None:
        return newton_solve(problem, init, targets)
    a0 = problem.interior_point()
    try:
        return newton_solve(problem, a0, targets)
    except ConvergenceError:
        pass
    base, _ = newton_solve(problem, a0, np.zeros(2)) if start is None else (start, None)
    return _continue(problem, base, np.zeros(2), targets, depth=0)


def _continue(problem, angles, src, dst, depth, max_depth=10):
    try:
        return newton_solve(problem, angles, dst)
    except ConvergenceError:
        if depth >= max_depth:
            raise
    mid = 0.5 * (src + dst)
    a_mid, _ = _continue(problem, angles, src, mid, depth + 1, max_depth)
    return _continue(problem, a_mid, mid, dst, depth + 1, max_depth)


def solve_pattern(surface, theta, a1: float, a2: float, init=None, check: bool = True) -> AffineFamilyPoint:
    """The pattern with intersection angles Theta and ``log|alpha_r| = A_r``.

    ``init`` may be an angle array (e.g. a neighbouring solution).
    """
    th = theta if isinstance(theta, AngleStructure) else AngleStructure(surface, theta)
    if check:
        rep = validate_angle_structure(th)
        if not rep.ok:
            raise InvalidSystemError(f"invalid angle structure: {rep.reason}")
    problem = AngleProblem(surface, th)
    targets = np.array([a1, a2], dtype=float)
    angles, trace = _solve_angles(problem, targets, init)
    pt = point_from_angles(problem, angles, targets, trace, check)
    pt.hqd_dimension = kernel_basis(hqd_system_cr_form(pt.cr)).dimension
    return pt


def continuation_path(surface, theta, waypoints, start: AffineFamilyPoint | None = None, max_depth: int = 10) -> list:
    """Solve at each waypoint from the previous solution, bisecting segments
    on which Newton fails."""
    th = theta if isinstance(theta, AngleStructure) else AngleStructure(surface, theta)
    problem = AngleProblem(surface, th)
    waypoints = [np.asarray(w, dtype=float) for w in waypoints]
    if start is None:
        angles, trace = _solve_angles(problem, waypoints[0])
    else:
        angles, trace = start.angles, [start.newton_residual]
    out = [point_from_angles(problem, angles, waypoints[0], trace)]
    for src, dst in zip(waypoints[:-1], waypoints[1:]):
        angles, trace = _continue(problem, angles, src, dst, 0, max_depth)
        out.append(point_from_angles(problem, angles, dst, trace))
    return out


# ---------------------------------------------------------------------------
# scans


@dataclass
class ScanResult:
    grid: list
    moduli: list
    duplicates: list
    symmetry_defect: float
    jacobian_det: dict
    points: list = field(default_factory=list, repr=False)

    def to_json_dict(self) -> dict:
        return {
            "grid": [list(g) for g in self.grid],
            "tau": [[t.real, t.imag] for t in self.moduli],
            "duplicates": [list(map(list, d)) for d in self.duplicates],
            "symmetry_defect": self.symmetry_defect,
            "jacobian_det": [[a, b, d] for (a, b), d in sorted(self.jacobian_det.items())],
        }


def _tau_at(problem, angles, target):
    a, _ = newton_solve(problem, angles, target)
    return point_from_angles(problem, a, target, check=False).tau


def covering_scan(surface, theta, n: int = 9, radius: float = 1.0, delta: float = 1e-4, dup_tol: float = 1e-6) -> ScanResult:
    """Moduli on an ``n x n`` grid over ``[-radius, radius]^2``.

    Grid points are solved by continuation from their already solved
    neighbour. Duplicates are pairs with equal modulus other than ``A`` and
    ``-A``; the Jacobian of ``A -> tau`` is estimated by central differences.
    """
    th = theta if isinstance(theta, AngleStructure) else AngleStructure(surface, theta)
    problem = AngleProblem(surface, th)
    ticks = np.linspace(-radius, radius, n)
    centre = n // 2
    solved = {}
    a0, _ = _solve_angles(problem, np.zeros(2))
    order = sorted(((i, j) for i in range(n) for j in range(n)), key=lambda ij: (abs(ij[0] - centre) + abs(ij[1] - centre), ij))
    for i, j in order:
        target = np.array([ticks[i], ticks[j]])
        nb = [(i + di, j + dj) for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)) if (i + di, j + dj) in solved]
        if nb:
            init, src = solved[nb[0]].angles, np.array([ticks[nb[0][0]], ticks[nb[0][1]]])
        else:
            init, src = a0, np.zeros(2)
        angles, trace = _continue(problem, init, src, target, 0)
        solved[(i, j)] = point_from_angles(problem, angles, target, trace)

    grid, moduli, pts = [], [], []
    for i in range(n):
        for j in range(n):
            grid.append((float(ticks[i]), float(ticks[j])))
            moduli.append(complex(solved[(i, j)].tau))
            pts.append(solved[(i, j)])

    index = {g: k for k, g in enumerate(grid)}
    sym = 0.0
    for k, (a, b) in enumerate(grid):
        m = index.get((-a if a != 0 else 0.0, -b if b != 0 else 0.0))
        if m is not None:
            sym = max(sym, abs(moduli[k] - moduli[m]))
    dups = []
    for k in range(len(grid)):
        for m in range(k + 1, len(grid)):
            ga, gb = grid[k], grid[m]
            if abs(ga[0] + gb[0]) < 1e-12 and abs(ga[1] + gb[1]) < 1e-12:
                continue
            if abs(moduli[k] - moduli[m]) < dup_tol:
                dups.append((ga, gb))

    dets = {}
    for k, g in enumerate(grid):
        if abs(g[0]) < 1e-12 and abs(g[1]) < 1e-12:
            continue
        base = pts[k].angles
        cols = []
        for d in (np.array([delta, 0.0]), np.array([0.0, delta])):
            tp = _tau_at(problem, base, np.asarray(g) + d)
            tm = _tau_at(problem, base, np.asarray(g) - d)
            diff = (tp - tm) / (2 * delta)
            cols.append((diff.real, diff.imag))
        dets[g] = float(cols[0][0] * cols[1][1] - cols[0][1] * cols[1][0])
    return ScanResult(grid, moduli, dups, float(sym), dets, pts)


# ---------------------------------------------------------------------------
# rigidity


@dataclass
class RigidityReport:
    trials: int
    converged: int
    max_cr_deviation: float
    max_sigma_spread: float
    reference: AffineFamilyPoint = field(repr=False)


def _circumradii(dev: DevelopingMap) -> np.ndarray:
    from circlepattern.moebius import circumcircle

    s = dev.surface
    return np.array([circumcircle(*dev.face_positions(f, (0, 0))).radius for f in range(s.n_faces)])


def rigidity_check(surface, theta, a1: float, a2: float, trials: int = 20, seed: int = 0, tol: float = 1e-7) -> RigidityReport:
    """Solve from random starting angles and compare the solutions.

    Starting points are random interior points of the polytope cut out by
    the linear rows. Converged Delaunay solutions must agree in cross ratio
    and have constant circumradius ratio; otherwise
    :class:`RigidityCounterexample` is raised.
    """
    th = theta if isinstance(theta, AngleStructure) else AngleStructure(surface, theta)
    problem = AngleProblem(surface, th)
    targets = np.array([a1, a2], dtype=float)
    ref = solve_pattern(surface, th, a1, a2)
    r_ref = _circumradii(ref.dev)
    base = problem.interior_point()
    null = problem.linear_null_space()
    rng = np.random.default_rng(seed)
    converged, worst_cr, worst_sigma = 0, 0.0, 0.0
    for _ in range(trials):
        d = null @ rng.normal(size=null.shape[1])
        d /= max(np.abs(d).max(), 1e-300)
        room = min(base.min(), math.pi - base.max())
        init = base + 0.9 * room * rng.uniform(0.2, 1.0) * d
        try:
            angles, trace = newton_solve(problem, init, targets)
        except ConvergenceError:
            continue
        try:
            pt = point_from_angles(problem, angles, targets, trace)
        except (InvalidSystemError, ConvergenceError):
            continue
        converged += 1
        dev_cr = float(np.abs(pt.cr.cr - ref.cr.cr).max())
        sigma = _circumradii(pt.dev) / r_ref
        spread = float(sigma.max() / sigma.min() - 1.0)
        worst_cr, worst_sigma = max(worst_cr, dev_cr), max(worst_sigma, spread)
        if dev_cr > tol or spread > tol:
            raise RigidityCounterexample(
                f"distinct Delaunay solution at A = ({a1}, {a2}): cr deviation {dev_cr:.3g}, sigma spread {spread:.3g}"
            )
    return RigidityReport(trials, converged, worst_cr, worst_sigma, ref)


# ---------------------------------------------------------------------------
# spheres


def _phi_and_jacobian(surface, theta, x):
    s = surface
    cr = np.exp(x + 1j * theta)
    nv, ne = s.n_vertices, s.n_edges
    res = np.zeros(4 * nv)
    jac = np.zeros((4 * nv, ne))
    for v in range(nv):
        edges = [int(s.edge_of[h]) for h in s.vertex_star(v)]
        partial = np.cumprod(cr[edges])
        tails = np.cumsum(partial[::-1])[::-1]
        phi1, phi2 = partial[-1] - 1, partial.sum()
        res[4 * v : 4 * v + 4] = (phi1.real, phi1.imag, phi2.real, phi2.imag)
        for e, tail in zip(edges, tails):
            jac[4 * v, e] += partial[-1].real
            jac[4 * v + 1, e] += partial[-1].imag
            jac[4 * v + 2, e] += tail.real
            jac[4 * v + 3, e] += tail.imag
    return res, jac


def solve_sphere_pattern(surface, theta, init=None, tol: float = 1e-13, max_iter: int = 100) -> CrossRatioSystem:
    """The Delaunay cross ratio system on a sphere with arguments Theta.

    Gauss-Newton on the log-moduli ``X`` starting from ``init`` (zero by
    default).
    """
    if surface.genus != 0:
        raise MeshError("solve_sphere_pattern needs a sphere")
    th = np.asarray(getattr(theta, "theta", theta), dtype=float)
    x = np.zeros(surface.n_edges) if init is None else np.asarray(init, dtype=float).copy()
    res, jac = _phi_and_jacobian(surface, th, x)
    trace = [float(np.abs(res).max())]
    for _ in range(max_iter):
        if trace[-1] <= tol:
            break
        step, *_ = np.linalg.lstsq(jac, -res, rcond=None)
        lam = 1.0
        while lam > 1e-8:
            cand = x + lam * step
            r2, j2 = _phi_and_jacobian(surface, th, cand)
            if np.abs(r2).max() < trace[-1]:
                x, res, jac = cand, r2, j2
                break
            lam *= 0.5
        else:
            break
        trace.append(float(np.abs(res).max()))
    if trace[-1] > 1e-11:
        raise ConvergenceError(f"sphere solve stalled at residual {trace[-1]:.3g}", trace=trace)
    sys_ = CrossRatioSystem(surface, np.exp(x + 1j * th))
    rep = is_delaunay(sys_)
    if not rep.ok:
        raise InvalidSystemError(f"sphere solution is not Delaunay: {rep.reason}")
    return sys_


def perturbed_sphere_angles(surface, theta, scale: float = 0.05, seed: int = 0) -> np.ndarray:
    """Theta moved inside the null space of the vertex-edge incidence matrix,
    which keeps every vertex sum at 2 pi."""
    th = np.asarray(getattr(theta, "theta", theta), dtype=float)
    inc = np.zeros((surface.n_vertices, surface.n_edges))
    for h in range(surface.n_half_edges):
        inc[surface.origin(h), int(surface.edge_of[h])] += 1.0
    _, sv, vh = np.linalg.svd(inc)
    rank = int(np.sum(sv > 1e-10 * sv[0]))
    null = vh[rank:].T
    rng = np.random.default_rng(seed)
    d = null @ rng.normal(size=null.shape[1])
    return th + scale * d / np.abs(d).max()
