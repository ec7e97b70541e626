"""Discrete holomorphic quadratic differentials and harmonic functions.

A quadratic differential ``q`` is a vector indexed by edges. It lies in the
kernel of the linearized vertex equations, which can be assembled either
from the cross ratios or from a developing map.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from circlepattern.config import GAP_RATIO_MIN, RANK_RTOL
from circlepattern.crsys import CrossRatioSystem
from circlepattern.develop import UNIT_WORDS, DevelopingMap, affine_normalize
from circlepattern.errors import (
    DegenerateConfigurationError,
    HolonomyError,
    IllConditionedError,
    InvalidSystemError,
)
from circlepattern.moebius import circumcenter, is_inf

# ---------------------------------------------------------------------------
# linear systems


def _split(rows_c, rows_r, field):
    """Stack real rows and complex rows as a real or complex matrix."""
    if field == "real":
        return np.vstack([np.asarray(rows_r, dtype=float), rows_c.real, rows_c.imag])
    if field == "complex":
        return np.vstack([np.asarray(rows_r, dtype=complex), rows_c])
    raise ValueError(f"unknown field {field!r}")


def hqd_system_cr_form(system: CrossRatioSystem, theta=None, field: str = "real") -> np.ndarray:
    """Linearization of the vertex equations in the direction ``cr * exp(q)``.

    For ``field="real"`` the rows are, per vertex block: the sum of ``q``
    around the vertex, then the real and imaginary parts of the weighted
    partial-product row. Shape ``(3V, E)`` (real) or ``(2V, E)`` (complex).
    """
    s = system.surface
    if theta is not None:
        th = np.asarray(getattr(theta, "theta", theta), dtype=float)
        diff = np.angle(np.exp(1j * (system.arguments - th)))
        if np.abs(diff).max() > 1e-8:
            raise InvalidSystemError(f"Arg cr differs from Theta by {np.abs(diff).max():.3g}")
    nv, ne = s.n_vertices, s.n_edges
    sums = np.zeros((nv, ne))
    weighted = np.zeros((nv, ne), dtype=complex)
    for v in range(nv):
        star = s.vertex_star(v)
        edges = [int(s.edge_of[h]) for h in star]
        partial = np.cumprod(system.cr[edges])
        # q_j enters every partial product from slot j on
        tails = np.cumsum(partial[::-1])[::-1]
        for e, tail in zip(edges, tails):
            sums[v, e] += 1
            weighted[v, e] += tail
    return _split(weighted, sums, field)


def hqd_system_z_form(dev: DevelopingMap, field: str = "real", lift=(0, 0)) -> np.ndarray:
    """Vertex equations ``sum q = 0`` and ``sum q / (z_j - z_i) = 0``.

    Assembled at the lift ``(v, lift)`` of every base vertex.
    """
    s = dev.surface
    nv, ne = s.n_vertices, s.n_edges
    sums = np.zeros((nv, ne))
    weighted = np.zeros((nv, ne), dtype=complex)
    for v in range(nv):
        zi = dev.position(v, lift)
        if is_inf(zi):
            raise DegenerateConfigurationError(f"vertex {v} lies at infinity")
        for h in s.vertex_star(v):
            lab = s.label(h)
            zj = dev.position(s.target(h), (lift[0] + lab[0], lift[1] + lab[1]))
            if is_inf(zj) or zj == zi:
                raise DegenerateConfigurationError(f"degenerate edge at vertex {v}")
            e = int(s.edge_of[h])
            sums[v, e] += 1
            weighted[v, e] += 1.0 / (zj - zi)
    return _split(weighted, sums, field)


@dataclass(frozen=True)
class QuadDiffBasis:
    """Orthonormal kernel basis (columns) with SVD diagnostics."""

    basis: np.ndarray
    singular_values: np.ndarray
    dimension: int
    field: str
    gap_ratio: float
    ill_conditioned: bool

    def __iter__(self):
        return iter(self.basis.T)

    def project(self, q) -> np.ndarray:
        """Component of ``q`` orthogonal to the kernel."""
        q = np.asarray(q)
        b = self.basis
        return q - b @ (b.conj().T @ q)


def kernel_basis(op, field: str = "real", rtol: float = RANK_RTOL, strict: bool = False) -> QuadDiffBasis:
    """Numerical kernel of ``op`` by singular value decomposition.

    Singular values below ``rtol * s_max`` count as zero. The ratio between
    the smallest retained and the largest discarded singular value is
    reported; below 10 the dimension is flagged as ill-conditioned.
    """
    a = np.asarray(op)
    if field == "real":
        if np.iscomplexobj(a):
            a = np.vstack([a.real, a.imag])
        a = a.astype(float)
    elif field == "complex":
        a = a.astype(complex)
    else:
        raise ValueError(f"unknown field {field!r}")
    n = a.shape[1]
    _, sv, vh = np.linalg.svd(a, full_matrices=True)
    smax = sv[0] if sv.size else 0.0
    rank = int(np.sum(sv > rtol * smax)) if smax > 0 else 0
    if rank == 0:
        gap = math.inf
    elif rank < sv.size:
        gap = sv[rank - 1] / sv[rank] if sv[rank] > 0 else math.inf
    else:
        gap = math.inf
    ill = gap < GAP_RATIO_MIN
    if ill and strict:
        raise IllConditionedError(f"singular value gap ratio {gap:.3g} below {GAP_RATIO_MIN}")
    basis = vh[rank:].conj().T
    return QuadDiffBasis(basis, sv, n - rank, field, float(gap), bool(ill))


# ---------------------------------------------------------------------------
# cotangent weights


def _cot(p0, p1, p2) -> float:
    """Signed cotangent of the angle at ``p2`` in the triangle p0 p1 p2."""
    w = np.conj(p0 - p2) * (p1 - p2)
    if w.imag == 0:
        raise DegenerateConfigurationError("zero-area triangle")
    return w.real / w.imag


def edge_lift_cotangents(dev, f, anchor, t) -> tuple:
    """Cotangents at the two apexes of the edge lift ``(f, anchor, t)``."""
    s = dev.surface
    f2, a2, t2 = s.cross(f, anchor, t)
    z = dev.face_positions(f, anchor)
    w = dev.face_positions(f2, a2)
    ck = _cot(z[t], z[(t + 1) % 3], z[(t + 2) % 3])
    cl = _cot(w[t2], w[(t2 + 1) % 3], w[(t2 + 2) % 3])
    return ck, cl


def cotangent_weights(dev: DevelopingMap, lift=(0, 0)) -> np.ndarray:
    """``c_e = cot(angle at k) + cot(angle at l)`` for each edge."""
    s = dev.surface
    c = np.empty(s.n_edges)
    for e in range(s.n_edges):
        h = int(s.edge_half_edges[e, 0])
        f, t = divmod(h, 3)
        c[e] = sum(edge_lift_cotangents(dev, f, lift, t))
    return c


# ---------------------------------------------------------------------------
# deformations


@dataclass(frozen=True)
class Deformation:
    """Vertex velocities on the lifted vertices of a patch."""

    dev: DevelopingMap
    velocity: dict
    q: np.ndarray
    defect: float


def _log_derivative(z, zd):
    zi, zj, zk, zl = z
    di, dj, dk, dl = zd
    return (dk - di) / (zk - zi) + (dl - dj) / (zl - zj) - (di - dl) / (zi - zl) - (dj - dk) / (zj - zk)


def hqd_to_deformation(q, dev: DevelopingMap, seed_velocities=(0, 0, 0), tol: float = 1e-7) -> Deformation:
    """Integrate ``q`` to velocities whose log cross ratio derivative is ``q``.

    Velocities on the seed face are given; the rest follows face by face.
    Raises :class:`InvalidSystemError` when ``q`` is not in the kernel.
    """
    s = dev.surface
    q = np.asarray(q)
    present = set(dev.patch.face_lifts)
    start = dev.seed_face if dev.seed_face in present else dev.patch.face_lifts[0]

    def corner(f, a, t):
        return (int(s.faces[f, t]), s.corner_word(f, a, t))

    vel = {corner(*start, t): complex(seed_velocities[t]) for t in range(3)}
    visited = {start}
    queue = deque([start])
    worst = 0.0
    while queue:
        f, a = queue.popleft()
        for t in range(3):
            f2, a2, t2 = s.cross(f, a, t)
            if (f2, a2) not in present:
                continue
            ci, cj, ck = (corner(f, a, u) for u in (t, (t + 1) % 3, (t + 2) % 3))
            cl = corner(f2, a2, (t2 + 2) % 3)
            zi, zj, zk, zl = (dev.position(*c) for c in (ci, cj, ck, cl))
            di, dj, dk = vel[ci], vel[cj], vel[ck]
            rest = (dk - di) / (zk - zi) - dj / (zl - zj) - di / (zi - zl) - (dj - dk) / (zj - zk)
            coef = (zi - zj) / ((zl - zj) * (zi - zl))
            dl = (q[int(s.edge_of[3 * f + t])] - rest) / coef
            if cl in vel:
                scale = max(1.0, abs(dl), abs(vel[cl]))
                worst = max(worst, abs(vel[cl] - dl) / scale)
            else:
                vel[cl] = dl
            if (f2, a2) not in visited:
                visited.add((f2, a2))
                queue.append((f2, a2))
    if worst > tol:
        raise InvalidSystemError(f"q is not in the kernel: propagation defect {worst:.3g}")
    return Deformation(dev, vel, q, worst)


def deformation_q(defo: Deformation) -> tuple:
    """Log cross ratio derivative of the velocities per edge.

    Returns ``(q, spread)`` where ``spread`` is the largest deviation between
    lifts of the same edge.
    """
    dev = defo.dev
    s = dev.surface
    present = set(dev.patch.face_lifts)
    out = np.zeros(s.n_edges, dtype=complex)
    dev_max = np.zeros(s.n_edges)
    seen = np.zeros(s.n_edges, dtype=bool)
    for f, a in dev.patch.face_lifts:
        for t in range(3):
            f2, a2, t2 = s.cross(f, a, t)
            if (f2, a2) not in present:
                continue
            cs = [
                (int(s.faces[f, u]), s.corner_word(f, a, u)) for u in (t, (t + 1) % 3, (t + 2) % 3)
            ] + [(int(s.faces[f2, (t2 + 2) % 3]), s.corner_word(f2, a2, (t2 + 2) % 3))]
            val = _log_derivative([dev.position(*c) for c in cs], [defo.velocity[c] for c in cs])
            e = int(s.edge_of[3 * f + t])
            if seen[e]:
                dev_max[e] = max(dev_max[e], abs(val - out[e]))
            else:
                out[e], seen[e] = val, True
    return out, dev_max


# ---------------------------------------------------------------------------
# harmonic functions


@dataclass
class HarmonicFunction:
    """A cotangent-harmonic ``u`` on lifted vertices and its conjugate on
    face lifts.

    ``periods`` holds ``A_r = (u o gamma_r - u) + i (u* o gamma_r - u*)``
    once the periods are constant, else None.
    """

    dev: DevelopingMap
    u: dict
    ustar: dict
    periods: tuple | None = None
    gauge: complex = 0j
    face_defect: float = 0.0
    conjugate_defect: float = 0.0

    def values(self, lifted_vertices) -> np.ndarray:
        return np.array([self.u[k] for k in lifted_vertices])


def _inner(a, z):
    return (a * np.conj(z)).real


def deformation_to_harmonic(defo: Deformation, tol: float = 1e-7) -> HarmonicFunction:
    """``u_i = Im(D_ij + D_ik - D_jk)`` with ``D_ab = (dz_b - dz_a)/(z_b - z_a)``
    and its conjugate function on faces."""
    dev = defo.dev
    s = dev.surface
    vel = defo.velocity
    samples = {}
    present = set(dev.patch.face_lifts)
    for f, a in dev.patch.face_lifts:
        cs = [(int(s.faces[f, t]), s.corner_word(f, a, t)) for t in range(3)]
        z = [dev.position(*c) for c in cs]
        d = [vel[c] for c in cs]

        def D(p, r):
            return (d[r] - d[p]) / (z[r] - z[p])

        for t in range(3):
            j, k = (t + 1) % 3, (t + 2) % 3
            samples.setdefault(cs[t], []).append((D(t, j) + D(t, k) - D(j, k)).imag)
    u = {}
    face_defect = 0.0
    for key, vals in samples.items():
        u[key] = float(np.mean(vals))
        spread = max(vals) - min(vals)
        face_defect = max(face_defect, spread / max(1.0, abs(u[key])))
    if face_defect > tol:
        raise InvalidSystemError(f"u depends on the face (defect {face_defect:.3g}); deformation changes angles")

    start = dev.seed_face if dev.seed_face in present else dev.patch.face_lifts[0]
    ustar = {start: 0.0}
    queue = deque([start])
    conj_defect = 0.0
    while queue:
        f, a = queue.popleft()
        for t in range(3):
            f2, a2, _ = s.cross(f, a, t)
            if (f2, a2) not in present:
                continue
            ci = (int(s.faces[f, t]), s.corner_word(f, a, t))
            cj = (int(s.faces[f, (t + 1) % 3]), s.corner_word(f, a, (t + 1) % 3))
            c = sum(edge_lift_cotangents(dev, f, a, t))
            val = ustar[(f, a)] - 0.5 * c * (u[cj] - u[ci])
            if (f2, a2) in ustar:
                conj_defect = max(conj_defect, abs(ustar[(f2, a2)] - val) / max(1.0, abs(val)))
            else:
                ustar[(f2, a2)] = val
                queue.append((f2, a2))
    if conj_defect > tol:
        raise InvalidSystemError(f"u is not harmonic (conjugate defect {conj_defect:.3g})")
    return HarmonicFunction(dev, u, ustar, face_defect=face_defect, conjugate_defect=conj_defect)


def conjugate_edge_residual(hf: HarmonicFunction, defo: Deformation) -> float:
    """Spread of ``Re D_ij + (u*_ijk cot_l + u*_jil cot_k) / (cot_k + cot_l)``
    over edge lifts; the expression is constant when u* matches ż."""
    dev = hf.dev
    s = dev.surface
    vals = []
    for f, a in dev.patch.face_lifts:
        for t in range(3):
            f2, a2, _ = s.cross(f, a, t)
            if (f2, a2) not in hf.ustar:
                continue
            ck, cl = edge_lift_cotangents(dev, f, a, t)
            if abs(ck + cl) < 1e-9:
                continue
            ci = (int(s.faces[f, t]), s.corner_word(f, a, t))
            cj = (int(s.faces[f, (t + 1) % 3]), s.corner_word(f, a, (t + 1) % 3))
            d = (defo.velocity[cj] - defo.velocity[ci]) / (dev.position(*cj) - dev.position(*ci))
            vals.append(d.real + (hf.ustar[(f, a)] * cl + hf.ustar[(f2, a2)] * ck) / (ck + cl))
    return float(max(vals) - min(vals)) if vals else 0.0


def _fit_linear(points, values):
    """Least-squares ``values ~ <a, z> + b``; returns (a, b, max residual)."""
    z = np.asarray(points, dtype=complex)
    m = np.column_stack([z.real, z.imag, np.ones(len(z))])
    sol, *_ = np.linalg.lstsq(m, np.asarray(values, dtype=float), rcond=None)
    res = float(np.abs(m @ sol - values).max()) if len(z) else 0.0
    return complex(sol[0], sol[1]), float(sol[2]), res


def _vertex_differences(hf, word):
    pts, diffs = [], []
    for (v, w), val in hf.u.items():
        k = (v, (w[0] + word[0], w[1] + word[1]))
        if k in hf.u:
            pts.append(hf.dev.position(v, w))
            diffs.append(hf.u[k] - val)
    return pts, np.array(diffs)


def _face_differences(hf, word):
    diffs = []
    for (f, a), val in hf.ustar.items():
        k = (f, (a[0] + word[0], a[1] + word[1]))
        if k in hf.ustar:
            diffs.append(hf.ustar[k] - val)
    return np.array(diffs)


def gauge_constant_periods(hf: HarmonicFunction, tol: float = 1e-7) -> HarmonicFunction:
    """Subtract a linear function so that u and u* have constant periods.

    Needs an affine developing map. The period of u under ``gamma_r`` is
    ``<a_r, z> + b_r``; subtracting ``<a, z>`` with ``a (conj(alpha_r) - 1)
    = a_r`` removes the linear part, and ``<a, -i z*>`` does the same for
    the conjugate.
    """
    dev = hf.dev
    hol = dev.holonomy()
    if hol.kind == "III" or hol.alpha is None:
        raise HolonomyError("constant periods need affine holonomy")
    fits = []
    for w in UNIT_WORDS:
        pts, diffs = _vertex_differences(hf, w)
        if len(pts) < 3:
            raise HolonomyError("patch too small to measure periods")
        fits.append(_fit_linear(pts, diffs))
    scale = max(1.0, max(abs(x) for f_ in fits for x in f_[:2]))
    rows, rhs = [], []
    for (ar, _, _), alpha in zip(fits, hol.alpha):
        rows.append(np.conj(alpha) - 1)
        rhs.append(ar)
    rows, rhs = np.array(rows), np.array(rhs)
    if np.abs(rows).max() < 1e-12:
        if np.abs(rhs).max() > tol * scale:
            raise HolonomyError("non-constant periods on a Euclidean torus cannot be gauged away")
        a = 0j
    else:
        a = complex(np.vdot(rows, rhs) / np.vdot(rows, rows))
        if np.abs(rows * a - rhs).max() > 1e-6 * scale:
            raise HolonomyError("period drift is not induced by a linear function")
    centers = {}
    for key in hf.ustar:
        centers[key] = circumcenter(*dev.face_positions(*key))
    u = {k: val - _inner(a, dev.position(*k)) for k, val in hf.u.items()}
    ustar = {k: val - _inner(a, -1j * centers[k]) for k, val in hf.ustar.items()}
    out = HarmonicFunction(dev, u, ustar, None, a, hf.face_defect, hf.conjugate_defect)
    periods = []
    for w in UNIT_WORDS:
        _, du = _vertex_differences(out, w)
        ds = _face_differences(out, w)
        if du.size == 0 or ds.size == 0:
            raise HolonomyError("patch too small to measure periods")
        spread = max(np.ptp(du), np.ptp(ds))
        if spread > 1e-6 * max(1.0, np.abs(du).max(), np.abs(ds).max()):
            raise HolonomyError(f"periods are not constant after gauge (spread {spread:.3g})")
        periods.append(complex(du.mean(), ds.mean()))
    out.periods = tuple(periods)
    return out


def dirichlet_energy(hf: HarmonicFunction, weights=None) -> float:
    """``1/2 sum_e c_e (u_j - u_i)^2`` over the edges of the base torus."""
    dev = hf.dev
    s = dev.surface
    if s.genus == 1 and hf.periods is None:
        raise HolonomyError("energy on the torus needs constant periods; call gauge_constant_periods")
    c = cotangent_weights(dev) if weights is None else np.asarray(weights)
    total = 0.0
    for e in range(s.n_edges):
        h = int(s.edge_half_edges[e, 0])
        lab = s.label(h)
        i, j = s.origin(h), s.target(h)
        for w in sorted({w for _, w in hf.u}):
            ki, kj = (i, w), (j, (w[0] + lab[0], w[1] + lab[1]))
            if ki in hf.u and kj in hf.u:
                break
        else:
            raise KeyError(f"edge {e} has no lift inside the harmonic function's domain")
        total += c[e] * (hf.u[kj] - hf.u[ki]) ** 2
    return 0.5 * total


def period_energy(hf: HarmonicFunction) -> float:
    """``-Im(A_1 conj(A_2))``."""
    if hf.periods is None:
        raise HolonomyError("periods are not constant")
    a1, a2 = hf.periods
    return -(a1 * np.conj(a2)).imag


def harmonic_from_q(q, dev: DevelopingMap, seed_velocities=(0, 0, 0)) -> HarmonicFunction:
    """q -> velocities -> harmonic function with constant periods, on the
    affine normalization of ``dev``."""
    ndev, _ = affine_normalize(dev)
    defo = hqd_to_deformation(q, ndev, seed_velocities)
    return gauge_constant_periods(deformation_to_harmonic(defo))
