"""Developing maps, holonomy and the conformal modulus.

A developing map assigns a point of the extended plane to every lifted
vertex ``(v, word)`` of a cover patch such that neighbouring faces realize
the prescribed cross ratios.
"""

from __future__ import annotations

import cmath
import itertools
import math
import random
import warnings
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from circlepattern.config import EUCLIDEAN_TOL, PARABOLIC_TOL
from circlepattern.crsys import CrossRatioSystem, Report
from circlepattern.errors import DevelopError, HolonomyError, MeshError
from circlepattern.moebius import (
    INF,
    MoebiusMap,
    chordal_distance,
    circumcenter,
    circumcircle,
    cross_ratio,
    is_inf,
    moebius_through,
    solve_fourth_point,
)
from circlepattern.surface import CoverPatch, TriangulatedSurface, lift_patch, trivial_patch

DEFAULT_SEED = (0j, 1 + 0j, cmath.exp(1j * math.pi / 3))
UNIT_WORDS = ((1, 0), (0, 1))


def _gap(a, b) -> float:
    """Relative distance, falling back to the chordal metric at infinity."""
    if is_inf(a) or is_inf(b):
        return chordal_distance(a, b)
    return abs(a - b) / max(1.0, abs(a), abs(b))


def _key(v, w):
    return (int(v), (int(w[0]), int(w[1])))


def default_patch(surface: TriangulatedSurface) -> CoverPatch:
    if surface.genus == 0:
        return trivial_patch(surface)
    return lift_patch(surface, ((0, 1), (0, 1)))


@dataclass
class DevelopingMap:
    """Positions of lifted vertices.

    ``position(v, w)`` also answers for lifts outside the patch by applying
    the holonomy to a stored lift.
    """

    surface: TriangulatedSurface
    patch: CoverPatch
    positions: dict
    seed_face: tuple | None = None
    seed: tuple | None = None
    system: CrossRatioSystem | None = None
    _func: object = field(default=None, repr=False)
    _hol: object = field(default=None, repr=False)

    @classmethod
    def from_positions(cls, surface, positions, patch=None) -> DevelopingMap:
        """Wrap given positions.

        ``positions`` is a dict ``(v, word) -> z``, a callable ``(v, word)
        -> z``, or (for spheres) a sequence indexed by vertex.
        """
        patch = patch or default_patch(surface)
        func = None
        if callable(positions):
            func = positions
            table = {}
            for corners in patch.lifted_faces:
                for v, w in corners:
                    table[_key(v, w)] = complex(func(v, w))
        elif isinstance(positions, dict):
            table = {_key(v, w): complex(z) for (v, w), z in positions.items()}
        else:
            table = {_key(v, (0, 0)): complex(z) for v, z in enumerate(positions)}
        return cls(surface, patch, table, _func=func)

    def position(self, v, w=(0, 0)) -> complex:
        key = _key(v, w)
        if key in self.positions:
            return self.positions[key]
        if self._func is not None:
            z = complex(self._func(*key))
            self.positions[key] = z
            return z
        if self.surface.genus == 0:
            raise KeyError(f"no position for {key}")
        v, w = key
        base = None
        for w0 in sorted(self.patch.words, key=lambda u: abs(u[0] - w[0]) + abs(u[1] - w[1])):
            if (v, w0) in self.positions:
                base = w0
                break
        if base is None:
            raise KeyError(f"no lift of vertex {v} in the patch")
        rho1, rho2 = self.holonomy().rho
        z = self.positions[(v, base)]
        z = _power(rho1, w[0] - base[0])(z)
        z = _power(rho2, w[1] - base[1])(z)
        self.positions[key] = z
        return z

    def face_positions(self, f, anchor=(0, 0)) -> tuple:
        s = self.surface
        return tuple(self.position(int(s.faces[f, t]), s.corner_word(f, anchor, t)) for t in range(3))

    def holonomy(self) -> Holonomy:
        if self._hol is None:
            self._hol = holonomy(self)
        return self._hol

    def base_positions(self) -> np.ndarray:
        return np.array([self.position(v) for v in range(self.surface.n_vertices)])

    def to_json_dict(self) -> dict:
        out = []
        for (v, w), z in sorted(self.positions.items()):
            out.append([v, w[0], w[1], _num(z.real), _num(z.imag)])
        return {"positions": out}


def _num(x):
    return x if math.isfinite(x) else ("inf" if x > 0 else "-inf")


def _power(m: MoebiusMap, k: int) -> MoebiusMap:
    out = MoebiusMap.identity()
    step = m if k >= 0 else m.inverse()
    for _ in range(abs(k)):
        out = step @ out
    return out


# ---------------------------------------------------------------------------
# layout


def develop(
    system: CrossRatioSystem,
    patch: CoverPatch | None = None,
    seed=None,
    order=None,
    tol: float = 1e-8,
    seed_face=None,
) -> DevelopingMap:
    """Lay out the faces of ``patch`` one by one.

    ``order`` selects the face traversal: None or "bfs", "dfs", or an
    integer seeding a random traversal. Any inconsistency between two ways
    of reaching a vertex raises :class:`DevelopError`.
    """
    s = system.surface
    for v in range(s.n_vertices):
        partial = np.cumprod(system.star_values(v))
        scale = max(1.0, float(np.abs(partial).max()))
        gap = max(abs(partial[-1] - 1), abs(partial.sum())) / scale
        if gap > tol:
            raise DevelopError(f"vertex star of {v} does not close (gap {gap:.3g})", vertex=v, gap=gap)
    patch = patch or default_patch(s)
    seed = tuple(complex(z) for z in (seed if seed is not None else DEFAULT_SEED))
    if len(seed) != 3 or min(_gap(a, b) for a, b in itertools.combinations(seed, 2)) == 0:
        raise DevelopError("seed positions must be three distinct points")
    present = set(patch.face_lifts)
    if seed_face is None:
        seed_face = (0, (0, 0)) if (0, (0, 0)) in present else patch.face_lifts[0]
    start = seed_face
    start = (int(start[0]), (int(start[1][0]), int(start[1][1])))
    if start not in present:
        raise DevelopError(f"seed face {start} is not in the patch")

    def corner(f, a, t):
        return (int(s.faces[f, t]), s.corner_word(f, a, t))

    pos = {}
    for t in range(3):
        c = corner(*start, t)
        if c in pos and _gap(pos[c], seed[t]) > 0:
            raise DevelopError("seed face has a repeated lifted corner")
        pos[c] = seed[t]

    rng = random.Random(order) if isinstance(order, int) and not isinstance(order, bool) else None
    frontier = deque([start])
    visited = {start}
    while frontier:
        if rng is not None:
            k = rng.randrange(len(frontier))
            frontier.rotate(-k)
            f, a = frontier.popleft()
        elif order == "dfs":
            f, a = frontier.pop()
        else:
            f, a = frontier.popleft()
        ts = [0, 1, 2]
        if rng is not None:
            rng.shuffle(ts)
        for t in ts:
            f2, a2, t2 = s.cross(f, a, t)
            if (f2, a2) not in present or (f2, a2) in visited:
                continue
            zi, zj, zk = (pos[corner(f, a, u)] for u in (t, (t + 1) % 3, (t + 2) % 3))
            cr = system.cr[int(s.edge_of[3 * f + t])]
            zl = solve_fourth_point(cr, zi, zj, zk)
            lv = corner(f2, a2, (t2 + 2) % 3)
            if lv in pos:
                g = _gap(pos[lv], zl)
                if g > tol:
                    raise DevelopError(
                        f"layout does not close at lifted vertex {lv} (gap {g:.3g})", vertex=lv, gap=g
                    )
            else:
                pos[lv] = zl
            visited.add((f2, a2))
            frontier.append((f2, a2))
    if len(visited) != len(present):
        raise MeshError("patch is not edge-connected")

    dev = DevelopingMap(s, patch, pos, start, seed, system)
    err, where = _cross_ratio_defect(dev, system.cr)
    if err > tol:
        raise DevelopError(f"cross ratio mismatch {err:.3g} at edge lift {where}", vertex=where, gap=err)
    return dev


def _interior_edge_lifts(dev):
    s = dev.surface
    present = set(dev.patch.face_lifts)
    for f, a in dev.patch.face_lifts:
        for t in range(3):
            f2, a2, t2 = s.cross(f, a, t)
            if (f2, a2) in present:
                yield f, a, t, f2, a2, t2


def _quad(dev, f, a, t, f2, a2, t2):
    s = dev.surface

    def z(ff, aa, u):
        return dev.position(int(s.faces[ff, u]), s.corner_word(ff, aa, u))

    return z(f, a, t), z(f, a, (t + 1) % 3), z(f, a, (t + 2) % 3), z(f2, a2, (t2 + 2) % 3)


def _cross_ratio_defect(dev, cr):
    worst, where = 0.0, None
    s = dev.surface
    for f, a, t, f2, a2, t2 in _interior_edge_lifts(dev):
        got = cross_ratio(*_quad(dev, f, a, t, f2, a2, t2))
        want = cr[int(s.edge_of[3 * f + t])]
        g = abs(got - want) / max(1.0, abs(want))
        if g > worst:
            worst, where = g, (f, a, t)
    return worst, where


def extract_cross_ratios(dev: DevelopingMap, tol: float = 1e-8) -> CrossRatioSystem:
    """Cross ratios realized by the developing map on every edge.

    Every interior edge lift of the patch must give the same value.
    """
    s = dev.surface
    cr = np.empty(s.n_edges, dtype=complex)
    for e in range(s.n_edges):
        h = int(s.edge_half_edges[e, 0])
        f, t = divmod(h, 3)
        f2, a2, t2 = s.cross(f, (0, 0), t)
        cr[e] = cross_ratio(*_quad(dev, f, (0, 0), t, f2, a2, t2))
    err, where = _cross_ratio_defect(dev, cr)
    if err > tol:
        raise DevelopError(f"positions are not equivariant (defect {err:.3g} at {where})", vertex=where, gap=err)
    return CrossRatioSystem(s, cr)


# ---------------------------------------------------------------------------
# vertex stars


@dataclass(frozen=True)
class StarClosure:
    """Neighbour positions ``z_0 .. z_{n+1}`` with the centre at infinity."""

    positions: np.ndarray
    gap: float
    degenerate: bool


def close_vertex_star(values, tol: float = 1e-9) -> StarClosure:
    """Lay out the neighbours of a vertex sent to infinity.

    ``z_0 = 0``, ``z_1 = 1`` and ``z_{k+1} = z_k + cr_1 ... cr_k``. The
    star closes when ``z_n = z_0`` and ``z_{n+1} = z_1``.
    """
    values = np.asarray(values, dtype=complex)
    n = len(values)
    partial = np.cumprod(values)
    z = np.zeros(n + 2, dtype=complex)
    z[1] = 1.0
    for k in range(1, n + 1):
        z[k + 1] = z[k] + partial[k - 1]
    scale = max(1.0, float(np.abs(z).max()))
    gap = max(abs(z[n] - z[0]), abs(z[n + 1] - z[1])) / scale
    if gap > tol:
        raise DevelopError(f"vertex star does not close (gap {gap:.3g})", gap=gap)
    ring = z[:n]
    diffs = np.abs(ring[:, None] - ring[None, :]) + np.eye(n)
    degenerate = bool(diffs.min() <= tol * scale)
    return StarClosure(z, float(gap), degenerate)


# ---------------------------------------------------------------------------
# holonomy


@dataclass(frozen=True)
class Holonomy:
    """Holonomy generators and their classification.

    ``kind`` is one of "identity", "I" (translations), "II" (stretch
    rotations) or "III" (exchanging fixed points). For the first three,
    ``normalizer`` conjugates both generators to affine maps
    ``z -> alpha_r z + beta_r``.
    """

    rho: tuple
    kind: str
    fixed_points: tuple
    normalizer: MoebiusMap | None
    alpha: tuple | None
    beta: tuple | None
    commutator_defect: float

    @property
    def rho1(self):
        return self.rho[0]

    @property
    def rho2(self):
        return self.rho[1]

    def normalized_rho(self) -> tuple:
        if self.normalizer is None:
            raise HolonomyError("type III holonomy has no affine normalization")
        n = self.normalizer
        return tuple(n @ r @ n.inverse() for r in self.rho)


def _pick_pairs(pairs):
    """Three pairs with well separated sources and targets."""
    chosen = [pairs[0]]
    while len(chosen) < 3:
        best, best_d = None, -1.0
        for p in pairs:
            d = min(min(chordal_distance(p[0], c[0]), chordal_distance(p[1], c[1])) for c in chosen)
            if d > best_d:
                best, best_d = p, d
        if best_d <= 1e-9:
            raise HolonomyError("patch does not contain three distinct lift pairs")
        chosen.append(best)
    return chosen


def _generator(dev, word, tol):
    pairs = []
    for (v, w), z in dev.positions.items():
        key = (v, (w[0] + word[0], w[1] + word[1]))
        if key in dev.positions:
            pairs.append((z, dev.positions[key]))
    if len(pairs) < 3:
        raise HolonomyError(f"patch has fewer than three lift pairs for deck word {word}")
    src, dst = zip(*_pick_pairs(pairs))
    rho = moebius_through(src, dst)
    worst = max(_gap(rho(z), w) for z, w in pairs)
    if worst > tol:
        raise HolonomyError(f"positions are not equivariant under deck word {word} (defect {worst:.3g})")
    return rho


def _is_parabolic(m: MoebiusMap) -> bool:
    t = m.trace()
    return abs(t * t - 4) < PARABOLIC_TOL * max(1.0, abs(t) ** 2)


def classify(rho1: MoebiusMap, rho2: MoebiusMap, tol: float = 1e-7) -> Holonomy:
    """Classify a commuting pair and compute its affine normalization."""
    m1, m2 = rho1.matrix, rho2.matrix
    defect = float(min(np.abs(m1 @ m2 - m2 @ m1).max(), np.abs(m1 @ m2 + m2 @ m1).max()))
    scale = max(1.0, float(np.abs(m1).max() * np.abs(m2).max()))
    if defect > 1e-6 * scale:
        raise HolonomyError(f"holonomy generators do not commute (defect {defect:.3g})")
    id1, id2 = rho1.is_identity(tol), rho2.is_identity(tol)
    if id1 and id2:
        return Holonomy((rho1, rho2), "identity", (), MoebiusMap.identity(), (1, 1), (0, 0), defect)
    main, other = (rho2, rho1) if id1 else (rho1, rho2)

    if _is_parabolic(main):
        pts = main.fixed_points()
        finite = [p for p in pts if not is_inf(p)]
        p = INF if len(finite) < len(pts) else complex(np.mean(finite))
        kind = "I"
        norm = MoebiusMap.identity() if is_inf(p) else MoebiusMap(0, 1, 1, -p)
        fixed = (p,)
    else:
        pts = main.fixed_points()
        if len(pts) != 2:
            raise HolonomyError("non-parabolic generator without two fixed points")
        p, q = pts
        if not other.is_identity(tol) and _gap(other(p), q) < tol and _gap(other(q), p) < tol:
            return Holonomy((rho1, rho2), "III", (p, q), None, None, None, defect)
        kind = "II"
        if is_inf(q):
            p, q = q, p
        if is_inf(p):
            norm = MoebiusMap(1, -q, 0, 1)
        else:
            # send the repelling fixed point of rho1 to 0
            ref = rho1 if not id1 else rho2
            if abs(ref.multiplier_at(q)) < abs(ref.multiplier_at(p)):
                p, q = q, p
            norm = MoebiusMap(1, -q, 1, -p)
        fixed = (p, q)
    alphas, betas = [], []
    for r in (rho1, rho2):
        c = norm @ r @ norm.inverse()
        alphas.append(c.a / c.d)
        betas.append(c.b / c.d)
    return Holonomy((rho1, rho2), kind, fixed, norm, tuple(alphas), tuple(betas), defect)


def holonomy(dev: DevelopingMap, tol: float = 1e-7) -> Holonomy:
    """Holonomy generators from matched lifts, classified and normalized."""
    if dev.surface.genus == 0:
        ident = MoebiusMap.identity()
        return Holonomy((ident, ident), "identity", (), ident, (1, 1), (0, 0), 0.0)
    rho1, rho2 = (_generator(dev, w, tol) for w in UNIT_WORDS)
    return classify(rho1, rho2, tol)


def affine_normalize(dev: DevelopingMap) -> tuple:
    """Conjugate the developing map so that both generators are affine.

    Returns ``(DevelopingMap, Holonomy)``; the holonomy of the result has
    the identity as normalizer.
    """
    hol = dev.holonomy()
    if hol.normalizer is None:
        raise HolonomyError("type III holonomy cannot be made affine")
    n = hol.normalizer
    pos = {k: n(z) for k, z in dev.positions.items()}
    if hol.kind == "II":
        # only the multipliers matter here, so bring the layout to unit size
        mags = [abs(z) for z in pos.values() if not is_inf(z) and z != 0]
        if mags:
            n = MoebiusMap(1 / float(np.median(mags)), 0, 0, 1) @ n
            pos = {k: n(z) for k, z in dev.positions.items()}
    seed = tuple(n(z) for z in dev.seed) if dev.seed else None
    ndev = DevelopingMap(dev.surface, dev.patch, pos, dev.seed_face, seed, dev.system)
    r1, r2 = (n @ r @ n.inverse() for r in hol.rho)
    fixed = tuple(n(p) for p in hol.fixed_points)
    ndev._hol = Holonomy((r1, r2), hol.kind, fixed, MoebiusMap.identity(), hol.alpha, hol.beta, hol.commutator_defect)
    return ndev, ndev._hol


# ---------------------------------------------------------------------------
# empty circle check


def geometric_delaunay_check(dev: DevelopingMap, tol: float = 1e-12) -> Report:
    """Local empty circle test on one lift of every edge.

    For the faces ijk and jil the apexes k and l must lie on opposite sides
    of ij (no fold), and l must not lie in the open circumdisk of ijk (nor k
    in that of jil).
    """
    s = dev.surface
    for e in range(s.n_edges):
        h = int(s.edge_half_edges[e, 0])
        f, t = divmod(h, 3)
        f2, a2, t2 = s.cross(f, (0, 0), t)
        zi, zj, zk, zl = _quad(dev, f, (0, 0), t, f2, a2, t2)
        if any(is_inf(z) for z in (zi, zj, zk, zl)):
            raise DevelopError("a vertex lies at infinity; normalize the developing map first")
        a1 = ((zj - zi).conjugate() * (zk - zi)).imag
        a2 = ((zi - zj).conjugate() * (zl - zj)).imag
        if a1 * a2 <= 0:
            return Report(False, f"edge {e}: folded, apexes k and l lie on the same side of ij", e)
        c1 = circumcircle(zi, zj, zk)
        c2 = circumcircle(zj, zi, zl)
        if c1.contains(zl, tol):
            return Report(False, f"edge {e}: apex l lies in the circumdisk of ijk", e)
        if c2.contains(zk, tol):
            return Report(False, f"edge {e}: apex k lies in the circumdisk of jil", e)
    return Report(True)


# ---------------------------------------------------------------------------
# conformal modulus


@dataclass(frozen=True)
class DualPath:
    """Closed dual walk in the cover from face lift ``(start_face, 0)``.

    ``crossings[p]`` is the local index of the edge crossed when leaving the
    p-th face lift.
    """

    start_face: int
    crossings: tuple

    def face_lifts(self, surface) -> list:
        out = [(self.start_face, (0, 0))]
        for t in self.crossings:
            f, a, _ = surface.cross(*out[-1], t)
            out.append((f, a))
        return out


@dataclass(frozen=True)
class ModulusReport:
    h: tuple
    c: complex
    tau: complex
    euclidean: bool
    flipped: bool
    paths: tuple

    @property
    def h1(self):
        return self.h[0]

    @property
    def h2(self):
        return self.h[1]


def _face_center(dev, f, a, cache):
    key = (f, a)
    if key not in cache:
        cache[key] = circumcenter(*dev.face_positions(f, a))
    return cache[key]


def find_dual_path(dev: DevelopingMap, word, start_face: int = 0, radius: int = 4) -> DualPath:
    """Shortest dual walk from ``(start_face, 0)`` to ``(start_face, word)``
    that avoids edges whose two circumcentres coincide."""
    s = dev.surface
    cache = {}
    start = (start_face, (0, 0))
    goal = (start_face, tuple(word))
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        c0 = _face_center(dev, *node, cache)
        for t in range(3):
            f2, a2, _ = s.cross(*node, t)
            nxt = (f2, a2)
            if nxt in prev or max(abs(a2[0]), abs(a2[1])) > radius:
                continue
            c1 = _face_center(dev, f2, a2, cache)
            if abs(c1 - c0) <= 1e-9 * max(1.0, abs(c0)):
                continue
            prev[nxt] = (node, t)
            queue.append(nxt)
    if goal not in prev:
        raise HolonomyError(f"no dual path realizes deck word {word}")
    steps = []
    node = goal
    while prev[node] is not None:
        node, t = prev[node]
        steps.append(t)
    return DualPath(start_face, tuple(reversed(steps)))


def dual_path_log(dev: DevelopingMap, path: DualPath, word) -> complex:
    """Sum of principal logs of successive circumcentre step ratios."""
    s = dev.surface
    lifts = path.face_lifts(s)
    f0, a0 = lifts[0]
    if lifts[-1] != (f0, (a0[0] + word[0], a0[1] + word[1])):
        raise HolonomyError("dual path does not close up to the requested deck word")
    if len(lifts) < 2:
        raise HolonomyError("dual path is empty")
    f1, a1 = lifts[1]
    lifts = lifts + [(f1, (a1[0] + word[0], a1[1] + word[1]))]
    cache = {}
    z = [_face_center(dev, f, a, cache) for f, a in lifts]
    total = 0j
    for i in range(1, len(z) - 1):
        term = cmath.log((z[i + 1] - z[i]) / (z[i] - z[i - 1]))
        if abs(term.imag) > math.pi - 1e-6:
            warnings.warn("circumcentre path turns by nearly pi; modulus is ill-conditioned", stacklevel=2)
        total += term
    return total


def conformal_modulus(dev: DevelopingMap, paths=None) -> ModulusReport:
    """Complex modulus of the torus carried by the developing map."""
    if dev.surface.genus != 1:
        raise MeshError("conformal modulus needs a torus")
    ndev, hol = affine_normalize(dev)
    if paths is None:
        paths = tuple(find_dual_path(ndev, w) for w in UNIT_WORDS)
    h = tuple(dual_path_log(ndev, p, w) for p, w in zip(paths, UNIT_WORDS))
    euclidean = abs(h[0]) < EUCLIDEAN_TOL and abs(h[1]) < EUCLIDEAN_TOL
    if euclidean:
        if hol.kind not in ("I", "identity") or hol.beta[0] == 0:
            raise HolonomyError("vanishing h without a translation lattice")
        c = 0j
        tau = hol.beta[1] / hol.beta[0]
    else:
        if abs(h[0]) < EUCLIDEAN_TOL:
            raise HolonomyError("h_1 vanishes while h_2 does not")
        c = h[0]
        tau = h[1] / h[0]
    flipped = False
    if abs(tau.imag) < 1e-12:
        raise HolonomyError(f"degenerate modulus {tau}")
    if tau.imag < 0:
        tau, flipped = -tau, True
    return ModulusReport(h, c, tau, euclidean, flipped, tuple(paths))
