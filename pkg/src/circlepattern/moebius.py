"""Moebius transformations, cross ratios and circumcircles.

Points of the Riemann sphere are plain Python/numpy complex numbers; the
point at infinity is :data:`INF` (any complex with an infinite component is
treated as infinity).
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np

from circlepattern.config import RTOL
from circlepattern.errors import DegenerateConfigurationError

INF = complex(math.inf, 0.0)


def is_inf(z) -> bool:
    return cmath.isinf(z)


def _close(a, b, scale=1.0, tol=RTOL) -> bool:
    if is_inf(a) or is_inf(b):
        return is_inf(a) and is_inf(b)
    return abs(a - b) <= tol * max(1.0, scale, abs(a), abs(b))


@dataclass(frozen=True)
class MoebiusMap:
    """z -> (a z + b) / (c z + d), stored with ad - bc = 1.

    The sign of the matrix is not meaningful (PSL(2, C)); use :meth:`isclose`
    for comparisons.
    """

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        det = self.a * self.d - self.b * self.c
        if det == 0 or not cmath.isfinite(det):
            raise DegenerateConfigurationError("singular Moebius matrix")
        if abs(det - 1) > 1e-14:
            s = cmath.sqrt(det)
            object.__setattr__(self, "a", self.a / s)
            object.__setattr__(self, "b", self.b / s)
            object.__setattr__(self, "c", self.c / s)
            object.__setattr__(self, "d", self.d / s)

    @classmethod
    def from_matrix(cls, m) -> MoebiusMap:
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def identity(cls) -> MoebiusMap:
        return cls(1, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    def __call__(self, z):
        a, b, c, d = self.a, self.b, self.c, self.d
        if is_inf(z):
            return INF if c == 0 else a / c
        den = c * z + d
        if den == 0:
            return INF
        return (a * z + b) / den

    def __matmul__(self, other: MoebiusMap) -> MoebiusMap:
        return MoebiusMap.from_matrix(self.matrix @ other.matrix)

    def inverse(self) -> MoebiusMap:
        return MoebiusMap(self.d, -self.b, -self.c, self.a)

    def trace(self) -> complex:
        return self.a + self.d

    def isclose(self, other: MoebiusMap, tol: float = 1e-9) -> bool:
        m, n = self.matrix, other.matrix
        scale = max(np.abs(m).max(), 1.0)
        return min(np.abs(m - n).max(), np.abs(m + n).max()) <= tol * scale

    def is_identity(self, tol: float = 1e-9) -> bool:
        return self.isclose(MoebiusMap.identity(), tol)

    def fixed_points(self) -> list:
        """Fixed points of the map (one entry for parabolic elements)."""
        a, b, c, d = self.a, self.b, self.c, self.d
        scale = max(abs(a), abs(b), abs(c), abs(d))
        if abs(c) <= 1e-14 * scale:
            # infinity is fixed; the other solves (a - d) z = -b
            if abs(a - d) <= 1e-14 * scale:
                return [INF]
            return [INF, b / (d - a)]
        disc = cmath.sqrt((a - d) ** 2 + 4 * b * c)
        z1 = ((a - d) + disc) / (2 * c)
        z2 = ((a - d) - disc) / (2 * c)
        if abs(disc) <= 1e-14 * scale:
            return [z1]
        return [z1, z2]

    def multiplier_at(self, p) -> complex:
        """Derivative of the map at a fixed point ``p``."""
        if is_inf(p):
            # in the chart 1/z the map reads w -> d w / (a + b w)
            return self.d / self.a
        return 1.0 / (self.c * p + self.d) ** 2


def _to_01inf(p1, p2, p3) -> MoebiusMap:
    """The map sending p1, p2, p3 to 0, 1, infinity."""
    if is_inf(p1):
        return MoebiusMap(0, p2 - p3, 1, -p3)
    if is_inf(p2):
        return MoebiusMap(1, -p1, 1, -p3)
    if is_inf(p3):
        return MoebiusMap(1, -p1, 0, p2 - p1)
    return MoebiusMap(p2 - p3, -p1 * (p2 - p3), p2 - p1, -p3 * (p2 - p1))


def _check_distinct(pts, what="points"):
    for s in range(len(pts)):
        for t in range(s + 1, len(pts)):
            if _close(pts[s], pts[t], tol=1e-14):
                raise DegenerateConfigurationError(f"coincident {what}: {pts[s]!r}")


def moebius_through(p, q) -> MoebiusMap:
    """Unique Moebius map with p[t] -> q[t] for t = 0, 1, 2."""
    p = tuple(complex(x) for x in p)
    q = tuple(complex(x) for x in q)
    if len(p) != 3 or len(q) != 3:
        raise ValueError("need exactly three source and three target points")
    _check_distinct(p, "source points")
    _check_distinct(q, "target points")
    return _to_01inf(*q).inverse() @ _to_01inf(*p)


def cross_ratio(zi, zj, zk, zl) -> complex:
    """Signed cross ratio -(zk - zi)(zl - zj) / ((zi - zl)(zj - zk)).

    ``zk`` and ``zl`` are the apexes of the faces ijk and jil sharing the
    edge ij. At most one argument may be infinite; its two factors then
    contribute the limit ratio -1.
    """
    zi, zj, zk, zl = (complex(z) for z in (zi, zj, zk, zl))
    pts = (zi, zj, zk, zl)
    ninf = sum(is_inf(z) for z in pts)
    if ninf > 1:
        raise DegenerateConfigurationError("more than one point at infinity")
    for s, t in ((0, 3), (1, 2), (0, 2), (1, 3)):
        if not is_inf(pts[s]) and not is_inf(pts[t]) and pts[s] == pts[t]:
            raise DegenerateConfigurationError("coincident points in cross ratio")
    if ninf == 0:
        return -(zk - zi) * (zl - zj) / ((zi - zl) * (zj - zk))
    if is_inf(zi):
        return (zl - zj) / (zj - zk)
    if is_inf(zj):
        return (zk - zi) / (zi - zl)
    if is_inf(zk):
        return (zl - zj) / (zi - zl)
    return (zk - zi) / (zj - zk)


def solve_fourth_point(cr, zi, zj, zk):
    """The point zl with cross_ratio(zi, zj, zk, zl) == cr."""
    cr = complex(cr)
    if cr == 0 or not cmath.isfinite(cr):
        raise DegenerateConfigurationError("cross ratio must be finite and nonzero")
    zi, zj, zk = complex(zi), complex(zj), complex(zk)
    if not (is_inf(zi) or is_inf(zj) or is_inf(zk)):
        if zi == zj or zj == zk or zi == zk:
            raise DegenerateConfigurationError("coincident points")
        kappa = -(zk - zi) / (zj - zk)
        den = kappa + cr
        if den == 0:
            return INF
        return (cr * zi + kappa * zj) / den
    # normalize zi, zj, zk -> inf, 0, 1 where the cross ratio reads -zl
    _check_distinct((zi, zj, zk))
    t = moebius_through((zi, zj, zk), (INF, 0, 1))
    return t.inverse()(-cr)


@dataclass(frozen=True)
class Circumcircle:
    """Oriented circle through three points.

    For a finite circle ``center`` and ``radius`` are set and ``orientation``
    is +1 when the generating triple runs counterclockwise. When the points
    lie on a line (or one of them is infinity) ``is_line`` is set and
    ``center``/``radius`` are None; ``line`` then holds a point and a unit
    direction.
    """

    center: complex | None
    radius: float | None
    orientation: int
    is_line: bool = False
    line: tuple | None = None

    def contains(self, z, tol: float = 1e-12) -> bool:
        """Membership in the open disk bounded positively by the circle."""
        if self.is_line:
            p, u = self.line
            side = (np.conj(u) * (z - p)).imag
            return self.orientation * side > tol
        r2 = self.radius**2
        return self.orientation * (r2 - abs(z - self.center) ** 2) > tol * max(r2, 1.0)

    def is_bounded_disk(self) -> bool:
        return not self.is_line and self.orientation > 0


def orientation(zi, zj, zk) -> float:
    """Twice the signed area of the triangle (positive if counterclockwise)."""
    return ((zj - zi).conjugate() * (zk - zi)).imag


def circumcircle(zi, zj, zk) -> Circumcircle:
    zi, zj, zk = complex(zi), complex(zj), complex(zk)
    _check_distinct((zi, zj, zk))
    finite = [z for z in (zi, zj, zk) if not is_inf(z)]
    if len(finite) == 2:
        # cyclic order p -> q -> infinity: the disk lies to the left of p->q
        order = [zi, zj, zk]
        k = [is_inf(z) for z in order].index(True)
        a, b = order[(k + 1) % 3], order[(k + 2) % 3]
        u = (b - a) / abs(b - a)
        return Circumcircle(None, None, 1, True, (a, u))
    area = orientation(zi, zj, zk)
    scale = max(abs(zj - zi), abs(zk - zi)) ** 2
    if abs(area) <= 1e-14 * scale:
        u = (zj - zi) / abs(zj - zi)
        return Circumcircle(None, None, 0, True, (zi, u))
    # intersection of perpendicular bisectors
    b, c = zj - zi, zk - zi
    d = 2 * area
    center = zi + 1j * (abs(c) ** 2 * b - abs(b) ** 2 * c) / d
    radius = abs(center - zi)
    return Circumcircle(center, radius, 1 if area > 0 else -1)


def circumcenter(zi, zj, zk) -> complex:
    b, c = zj - zi, zk - zi
    d = 2 * orientation(zi, zj, zk)
    if d == 0:
        raise DegenerateConfigurationError("collinear triangle has no circumcenter")
    return zi + 1j * (abs(c) ** 2 * b - abs(b) ** 2 * c) / d


def stereographic(p, pole):
    """Project ``p`` from ``pole`` onto the plane through the origin
    orthogonal to the pole; both lie on the sphere of radius ``|pole|``.

    For the pole on the positive z-axis this is R (x + i y) / (R - z).
    Returns :data:`INF` for ``p == pole``.
    """
    p = np.asarray(p, dtype=float)
    pole = np.asarray(pole, dtype=float)
    r = float(np.linalg.norm(pole))
    if abs(np.linalg.norm(p) - r) > 1e-9 * max(r, 1.0):
        raise ValueError("point is not on the sphere of the pole")
    n = pole / r
    e1, e2 = _plane_frame(n)
    h = float(p @ n)
    if abs(r - h) <= 1e-14 * r:
        return INF
    return r * complex(p @ e1, p @ e2) / (r - h)


def _plane_frame(n):
    if np.allclose(n, [0.0, 0.0, 1.0]):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, 1.0, 0.0])
    if np.allclose(n, [0.0, 0.0, -1.0]):
        return np.array([1.0, 0.0, 0.0]), np.array([0.0, -1.0, 0.0])
    e1 = np.cross([0.0, 0.0, 1.0], n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    return e1, e2


def chordal_distance(z, w) -> float:
    """Chordal distance on the unit Riemann sphere (values in [0, 2])."""
    if is_inf(z) and is_inf(w):
        return 0.0
    if is_inf(z):
        z, w = w, z
    if is_inf(w):
        return 2.0 / math.sqrt(1.0 + abs(z) ** 2)
    return 2.0 * abs(z - w) / math.sqrt((1.0 + abs(z) ** 2) * (1.0 + abs(w) ** 2))
