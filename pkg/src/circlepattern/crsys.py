"""Cross ratio systems: the vertex equations, Delaunay predicates and angle
structures.

All per-edge data are numpy arrays indexed by the dense edge ids of the
surface. Around a vertex the edges are visited in the clockwise order of
:meth:`TriangulatedSurface.vertex_star`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from circlepattern.config import ARG_ZERO_TOL, DUAL_CYCLE_BOUND
from circlepattern.errors import InvalidSystemError
from circlepattern.surface import TriangulatedSurface, dual_cycles

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class CrossRatioSystem:
    surface: TriangulatedSurface
    cr: np.ndarray

    def __post_init__(self):
        cr = np.asarray(self.cr, dtype=complex).copy()
        if cr.shape != (self.surface.n_edges,):
            raise ValueError(f"expected {self.surface.n_edges} cross ratios, got {cr.shape}")
        if np.any(cr == 0) or not np.all(np.isfinite(cr)):
            raise InvalidSystemError("cross ratios must be finite and nonzero")
        cr.setflags(write=False)
        object.__setattr__(self, "cr", cr)

    @property
    def arguments(self) -> np.ndarray:
        return np.angle(self.cr)

    @property
    def log_moduli(self) -> np.ndarray:
        return np.log(np.abs(self.cr))

    def star_values(self, v) -> np.ndarray:
        s = self.surface
        return self.cr[[int(s.edge_of[h]) for h in s.vertex_star(v)]]

    def residual(self) -> np.ndarray:
        return phi_residual(self)

    def residual_norm(self) -> float:
        return float(np.abs(phi_residual(self)).max())

    def is_valid(self, tol: float = 1e-9) -> bool:
        return self.residual_norm() <= tol

    def to_json_dict(self) -> dict:
        return {"cr": {str(e): [float(z.real), float(z.imag)] for e, z in enumerate(self.cr)}}

    @classmethod
    def from_json_dict(cls, surface, d) -> CrossRatioSystem:
        cr = np.zeros(surface.n_edges, dtype=complex)
        seen = set()
        for k, (re, im) in d["cr"].items():
            cr[int(k)] = complex(re, im)
            seen.add(int(k))
        if len(seen) != surface.n_edges:
            raise InvalidSystemError("cross ratio missing for some edge")
        return cls(surface, cr)


@dataclass(frozen=True)
class AngleStructure:
    surface: TriangulatedSurface
    theta: np.ndarray

    def __post_init__(self):
        th = np.asarray(self.theta, dtype=float).copy()
        if th.shape != (self.surface.n_edges,):
            raise ValueError(f"expected {self.surface.n_edges} angles, got {th.shape}")
        th.setflags(write=False)
        object.__setattr__(self, "theta", th)

    @classmethod
    def constant(cls, surface, value) -> AngleStructure:
        return cls(surface, np.full(surface.n_edges, float(value)))

    def to_json_dict(self) -> dict:
        return {"theta": {str(e): float(t) for e, t in enumerate(self.theta)}}

    @classmethod
    def from_json_dict(cls, surface, d) -> AngleStructure:
        th = np.full(surface.n_edges, np.nan)
        for k, v in d["theta"].items():
            th[int(k)] = float(v)
        if np.isnan(th).any():
            raise InvalidSystemError("angle missing for some edge")
        return cls(surface, th)


@dataclass(frozen=True)
class LogCoordinates:
    surface: TriangulatedSurface
    x: np.ndarray


def _values(obj, attr):
    if hasattr(obj, attr):
        return obj.surface, np.asarray(getattr(obj, attr))
    return None, np.asarray(obj)


def exp_theta(x, theta, surface: TriangulatedSurface | None = None) -> CrossRatioSystem:
    """Cross ratios ``exp(X + i Theta)``."""
    s1, xv = _values(x, "x")
    s2, tv = _values(theta, "theta")
    surface = surface or s1 or s2
    if surface is None:
        raise ValueError("a surface is needed to build a cross ratio system")
    if xv.shape != tv.shape:
        raise ValueError("X and Theta must have the same shape")
    return CrossRatioSystem(surface, np.exp(xv.astype(float) + 1j * tv.astype(float)))


def log_coordinates(sys: CrossRatioSystem) -> tuple:
    """Inverse of :func:`exp_theta`: ``(LogCoordinates, AngleStructure)``."""
    return LogCoordinates(sys.surface, sys.log_moduli), AngleStructure(sys.surface, sys.arguments)


def phi_residual(sys: CrossRatioSystem) -> np.ndarray:
    """Per-vertex residuals ``(prod - 1, sum of partial products)``.

    Returns a complex array of shape ``(V, 2)``.
    """
    s = sys.surface
    out = np.zeros((s.n_vertices, 2), dtype=complex)
    for v in range(s.n_vertices):
        partial = np.cumprod(sys.star_values(v))
        out[v, 0] = partial[-1] - 1
        out[v, 1] = partial.sum()
    return out


# ---------------------------------------------------------------------------
# Delaunay predicates


@dataclass(frozen=True)
class Report:
    ok: bool
    reason: str = ""
    witness: object = None

    def __bool__(self):
        return self.ok


def zero_edge_structure(surface: TriangulatedSurface, zero_edges) -> Report:
    """Check that deleting ``zero_edges`` leaves a cell decomposition.

    The merged faces are disks when the deleted edges form a forest in the
    dual graph; every vertex must keep at least two edge slots and the
    remaining graph must stay connected.
    """
    zero = {int(e) for e in zero_edges}
    parent = list(range(surface.n_faces))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for e in sorted(zero):
        h, h2 = (int(x) for x in surface.edge_half_edges[e])
        a, b = find(h // 3), find(h2 // 3)
        if a == b:
            return Report(False, f"merged face across edge {e} is not a disk", e)
        parent[a] = b

    for v in range(surface.n_vertices):
        kept = [h for h in surface.vertex_star(v) if int(surface.edge_of[h]) not in zero]
        if len(kept) < 2:
            return Report(False, f"vertex {v} loses its disk link", v)

    seen = {0}
    stack = [0]
    while stack:
        v = stack.pop()
        for h in surface.vertex_star(v):
            if int(surface.edge_of[h]) in zero:
                continue
            w = surface.target(h)
            if w not in seen:
                seen.add(w)
                stack.append(w)
    if len(seen) != surface.n_vertices:
        return Report(False, "remaining edges do not connect all vertices")
    return Report(True)


def is_delaunay(sys: CrossRatioSystem, tol: float = ARG_ZERO_TOL, check_valid: bool = True) -> Report:
    """Arguments in [0, pi) and a cell decomposition after merging
    faces across cocircular edges."""
    if check_valid and not sys.is_valid(1e-8):
        raise InvalidSystemError(f"vertex equations violated (residual {sys.residual_norm():.3g})")
    args = sys.arguments
    for e, a in enumerate(args):
        # np.angle maps negative reals to +pi, which is excluded
        if a < -tol or a >= math.pi:
            return Report(False, f"edge {e}: Arg cr = {a:.6g} outside [0, pi)", e)
    s = sys.surface
    for v in range(s.n_vertices):
        total = sum(args[int(s.edge_of[h])] for h in s.vertex_star(v))
        if abs(total - TWO_PI) > 1e-6:
            return Report(False, f"vertex {v}: branched, angle sum {total / TWO_PI:.6g} x 2pi", v)
    zero = np.flatnonzero(np.abs(args) < tol)
    return zero_edge_structure(sys.surface, zero)


def ramification_index(sys: CrossRatioSystem, tol: float = 1e-6) -> np.ndarray:
    """Per-vertex ``sum Arg cr / 2 pi`` as integers."""
    s = sys.surface
    args = sys.arguments
    out = np.zeros(s.n_vertices, dtype=np.int64)
    for v in range(s.n_vertices):
        total = sum(args[int(s.edge_of[h])] for h in s.vertex_star(v)) / TWO_PI
        k = round(total)
        if abs(total - k) > tol:
            raise InvalidSystemError(f"vertex {v}: angle sum {total:.9g} x 2pi is not integral")
        out[v] = k
    return out


def validate_angle_structure(theta: AngleStructure, bound: int = DUAL_CYCLE_BOUND, tol: float = 1e-9) -> Report:
    """Vertex sums equal 2 pi and every contractible dual cycle of length at
    most ``bound`` that does not surround a single vertex has angle sum
    above 2 pi.

    Cycles longer than ``bound`` are not examined.
    """
    s = theta.surface
    th = theta.theta
    problems = []
    witness = None
    bad = np.flatnonzero((th < 0) | (th >= math.pi))
    if bad.size:
        problems.append(f"edge {int(bad[0])}: angle {th[bad[0]]:.6g} outside [0, pi)")
    for v in range(s.n_vertices):
        total = sum(th[int(s.edge_of[h])] for h in s.vertex_star(v))
        if abs(total - TWO_PI) > tol:
            problems.append(f"vertex {v}: angle sum {total:.9g} != 2 pi")
            break
    for cyc in dual_cycles(s, bound):
        if not cyc.contractible or cyc.enclosed == 1:
            continue
        total = sum(th[int(s.edge_of[h])] for h in cyc.half_edges)
        if total <= TWO_PI + tol:
            problems.append(f"dual cycle of length {len(cyc)} around {cyc.enclosed} vertices has angle sum {total:.9g}")
            witness = cyc
            break
    if problems:
        return Report(False, "; ".join(problems), witness)
    return Report(True)
