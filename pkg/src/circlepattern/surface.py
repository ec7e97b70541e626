"""Combinatorics of closed oriented triangulated surfaces.

Half-edge ``h = 3*f + t`` runs from ``faces[f][t]`` to ``faces[f][(t+1) % 3]``.
On a torus every half-edge carries a deck label in Z^2: lifting a face to the
universal cover, the corner words are ``A``, ``A + lab[3f]`` and
``A + lab[3f] + lab[3f+1]`` for some anchor word ``A``.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from math import gcd

import numpy as np

from circlepattern.config import DUAL_CYCLE_BOUND
from circlepattern.errors import MeshError


def _freeze(a):
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


class TriangulatedSurface:
    """Closed oriented triangulation of a sphere (genus 0) or torus (genus 1).

    Built through :func:`build_surface` or :func:`regular_torus`. Instances
    are treated as immutable.
    """

    def __init__(self, faces, genus, twin, labels):
        self.faces = _freeze(np.asarray(faces, dtype=np.int64).reshape(-1, 3))
        self.genus = int(genus)
        self.twin = _freeze(np.asarray(twin, dtype=np.int64))
        self.labels = _freeze(np.asarray(labels, dtype=np.int64).reshape(-1, 2))
        self.n_vertices = int(self.faces.max()) + 1 if len(self.faces) else 0
        self.n_faces = len(self.faces)
        self.n_half_edges = 3 * self.n_faces
        h = np.arange(self.n_half_edges)
        canon = np.minimum(h, self.twin)
        reps = np.unique(canon)
        edge_of = np.searchsorted(reps, canon)
        self.edge_of = _freeze(edge_of)
        # each edge is stored by its smaller half-edge first
        self.edge_half_edges = _freeze(np.stack([reps, self.twin[reps]], axis=1))
        self.n_edges = len(reps)
        lab = self.labels.reshape(-1, 3, 2)
        off = np.zeros((self.n_faces, 3, 2), dtype=np.int64)
        off[:, 1] = lab[:, 0]
        off[:, 2] = lab[:, 0] + lab[:, 1]
        self.corner_offsets = _freeze(off)
        self._cycle_cache = {}
        self._star_cache = {}

    # -- half-edge queries --------------------------------------------
    def origin(self, h) -> int:
        return int(self.faces[h // 3, h % 3])

    def target(self, h) -> int:
        return int(self.faces[h // 3, (h + 1) % 3])

    @staticmethod
    def next(h) -> int:
        return 3 * (h // 3) + (h + 1) % 3

    @staticmethod
    def prev(h) -> int:
        return 3 * (h // 3) + (h + 2) % 3

    @staticmethod
    def face_of(h) -> int:
        return h // 3

    def apex(self, h) -> int:
        """Vertex of the face of ``h`` opposite to ``h``."""
        return int(self.faces[h // 3, (h + 2) % 3])

    def label(self, h) -> tuple:
        return (int(self.labels[h, 0]), int(self.labels[h, 1]))

    def cw_next(self, h) -> int:
        """Next outgoing half-edge at the same origin, turning clockwise."""
        return self.next(int(self.twin[h]))

    def edge_vertices(self, e) -> tuple:
        h = int(self.edge_half_edges[e, 0])
        return self.origin(h), self.target(h)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - self.n_edges + self.n_faces

    def vertex_star(self, v) -> list:
        """Outgoing half-edges at ``v`` in clockwise order.

        The walk starts at the smallest outgoing half-edge. Loops at ``v``
        occur twice, once per end.
        """
        v = int(v)
        if v in self._star_cache:
            return list(self._star_cache[v])
        start = None
        for h in range(self.n_half_edges):
            if self.origin(h) == v:
                start = h
                break
        if start is None:
            raise MeshError(f"vertex {v} has no incident face")
        star = [start]
        h = self.cw_next(start)
        while h != start:
            star.append(h)
            h = self.cw_next(h)
        self._star_cache[v] = tuple(star)
        return star

    def degree(self, v) -> int:
        return len(self.vertex_star(v))

    def cross(self, f, anchor, t):
        """Cross edge ``t`` of the face lift ``(f, anchor)``.

        Returns ``(f2, anchor2, t2)`` where ``3*f2 + t2`` is the twin.
        """
        h = 3 * f + t
        h2 = int(self.twin[h])
        f2, t2 = divmod(h2, 3)
        w = np.asarray(anchor) + self.corner_offsets[f, (t + 1) % 3] - self.corner_offsets[f2, t2]
        return f2, (int(w[0]), int(w[1])), t2

    def corner_word(self, f, anchor, t) -> tuple:
        w = np.asarray(anchor) + self.corner_offsets[f, t]
        return (int(w[0]), int(w[1]))

    # -- serialization --------------------------------------------------
    def to_json_dict(self) -> dict:
        d = {"genus": self.genus, "faces": self.faces.tolist()}
        if self.genus == 1:
            d["deck_labels"] = {str(h): list(self.label(h)) for h in range(self.n_half_edges)}
        return d

    @classmethod
    def from_json_dict(cls, d) -> TriangulatedSurface:
        labels = d.get("deck_labels")
        if labels is not None:
            n = 3 * len(d["faces"])
            arr = np.zeros((n, 2), dtype=np.int64)
            for k, v in labels.items():
                arr[int(k)] = v
            labels = arr
        return build_surface(d["faces"], d["genus"], deck_labels=labels)

    def __repr__(self):
        return (
            f"TriangulatedSurface(genus={self.genus}, V={self.n_vertices}, "
            f"E={self.n_edges}, F={self.n_faces})"
        )


# ---------------------------------------------------------------------------
# construction


def _pair_by_vertices(faces):
    n = 3 * len(faces)
    directed = {}
    undirected = {}
    for h in range(n):
        f, t = divmod(h, 3)
        i, j = int(faces[f][t]), int(faces[f][(t + 1) % 3])
        directed.setdefault((i, j), []).append(h)
        undirected[frozenset((i, j))] = undirected.get(frozenset((i, j)), 0) + 1
    for key, c in undirected.items():
        if c > 2:
            raise MeshError(f"non-manifold edge {sorted(key)}: {c} incident face sides")
    twin = np.full(n, -1, dtype=np.int64)
    for (i, j), hs in directed.items():
        if len(hs) > 1:
            if i == j:
                raise MeshError(f"loop at vertex {i} is ambiguous without deck labels")
            raise MeshError(f"inconsistent orientation along edge ({i}, {j})")
        back = directed.get((j, i))
        if back is None:
            raise MeshError(f"edge ({i}, {j}) has only one incident face")
        twin[hs[0]] = back[0]
    return twin


def _pair_by_labels(faces, labels):
    n = 3 * len(faces)
    key_of = {}
    undirected = {}
    for h in range(n):
        f, t = divmod(h, 3)
        i, j = int(faces[f][t]), int(faces[f][(t + 1) % 3])
        lab = (int(labels[h, 0]), int(labels[h, 1]))
        k = (i, j, lab)
        if k in key_of:
            raise MeshError(f"inconsistent orientation or duplicate edge ({i}, {j}) label {lab}")
        key_of[k] = h
        uk = (i, j, lab) if (i, j, lab) <= (j, i, (-lab[0], -lab[1])) else (j, i, (-lab[0], -lab[1]))
        undirected[uk] = undirected.get(uk, 0) + 1
    for uk, c in undirected.items():
        if c > 2:
            raise MeshError(f"non-manifold edge {uk[:2]}")
    twin = np.full(n, -1, dtype=np.int64)
    for (i, j, lab), h in key_of.items():
        h2 = key_of.get((j, i, (-lab[0], -lab[1])))
        if h2 is None:
            raise MeshError(f"half-edge {h} ({i}->{j}, label {lab}) has no twin")
        twin[h] = h2
    return twin


def _face_components(twin, n_faces):
    seen = np.zeros(n_faces, dtype=bool)
    comps = 0
    for s in range(n_faces):
        if seen[s]:
            continue
        comps += 1
        seen[s] = True
        stack = [s]
        while stack:
            f = stack.pop()
            for t in range(3):
                g = int(twin[3 * f + t]) // 3
                if not seen[g]:
                    seen[g] = True
                    stack.append(g)
    return comps


def _tree_cotree_labels(faces, twin, n_vertices):
    """Deck labels from a primal spanning tree and a dual spanning cotree."""
    n = len(twin)
    edges = sorted({min(h, int(twin[h])) for h in range(n)})
    origin = lambda h: int(faces[h // 3][h % 3])  # noqa: E731
    target = lambda h: int(faces[h // 3][(h + 1) % 3])  # noqa: E731

    in_tree = set()
    seen = {0}
    queue = deque([0])
    out = {}
    for h in range(n):
        out.setdefault(origin(h), []).append(h)
    while queue:
        v = queue.popleft()
        for h in out[v]:
            w = target(h)
            if w not in seen:
                seen.add(w)
                in_tree.add(min(h, int(twin[h])))
                queue.append(w)

    n_faces = len(faces)
    in_cotree = set()
    fseen = {0}
    queue = deque([0])
    while queue:
        f = queue.popleft()
        for t in range(3):
            h = 3 * f + t
            e = min(h, int(twin[h]))
            if e in in_tree:
                continue
            g = int(twin[h]) // 3
            if g not in fseen:
                fseen.add(g)
                in_cotree.add(e)
                queue.append(g)
    if len(fseen) != n_faces:
        raise MeshError("dual graph is disconnected")

    leftover = [e for e in edges if e not in in_tree and e not in in_cotree]
    if len(leftover) != 2:
        raise MeshError(f"expected 2 homology generators, found {len(leftover)}")
    labels = np.zeros((n, 2), dtype=np.int64)
    known = set(in_tree) | set(leftover)
    for e, lab in zip(leftover, ((1, 0), (0, 1))):
        labels[e] = lab
        labels[int(twin[e])] = (-lab[0], -lab[1])

    # peel leaves of the cotree: a face with one unknown edge fixes it
    unknown = {f: [] for f in range(n_faces)}
    for e in in_cotree:
        unknown[e // 3].append(e)
        unknown[int(twin[e]) // 3].append(e)
    queue = deque(f for f in range(n_faces) if len(unknown[f]) == 1)
    while queue:
        f = queue.popleft()
        if len(unknown[f]) != 1:
            continue
        e = unknown[f][0]
        h = e if e // 3 == f else int(twin[e])
        others = [3 * f + t for t in range(3) if 3 * f + t != h]
        labels[h] = -(labels[others[0]] + labels[others[1]])
        labels[int(twin[h])] = -labels[h]
        known.add(e)
        for g in (e // 3, int(twin[e]) // 3):
            if e in unknown[g]:
                unknown[g].remove(e)
            if len(unknown[g]) == 1:
                queue.append(g)
    if len(known) != len(edges):
        raise MeshError("failed to solve cotree labels")
    return labels


def _label_lattice_index(faces, twin, labels, n_vertices):
    """Index in Z^2 of the lattice of periods of closed primal loops."""
    n = len(twin)
    word = {0: np.zeros(2, dtype=np.int64)}
    out = {}
    for h in range(n):
        out.setdefault(int(faces[h // 3][h % 3]), []).append(h)
    queue = deque([0])
    periods = []
    while queue:
        v = queue.popleft()
        for h in out[v]:
            w = int(faces[h // 3][(h + 1) % 3])
            cand = word[v] + labels[h]
            if w not in word:
                word[w] = cand
                queue.append(w)
            else:
                p = cand - word[w]
                if p.any():
                    periods.append(p)
    if not periods:
        return 0
    g = 0
    for s in range(len(periods)):
        for t in range(s + 1, len(periods)):
            a, b = periods[s], periods[t]
            g = gcd(g, int(abs(a[0] * b[1] - a[1] * b[0])))
    return g


def build_surface(faces, genus, deck_labels=None) -> TriangulatedSurface:
    """Validate a face list and assemble the half-edge structure.

    ``deck_labels`` (torus only) is an array of shape ``(3F, 2)``; when
    omitted for a torus, labels are derived from a tree-cotree decomposition.
    Raises :class:`MeshError` on invalid input.
    """
    faces = [tuple(int(x) for x in f) for f in faces]
    if not faces:
        raise MeshError("empty face list")
    if any(len(f) != 3 for f in faces):
        raise MeshError("faces must be vertex triples")
    genus = int(genus)
    if genus not in (0, 1):
        raise MeshError(f"unsupported genus {genus}")
    used = sorted({v for f in faces for v in f})
    if used[0] != 0 or used[-1] != len(used) - 1:
        raise MeshError("vertex indices must form a contiguous range starting at 0")
    nv = len(used)
    n = 3 * len(faces)

    if deck_labels is not None:
        labels = np.asarray(deck_labels, dtype=np.int64).reshape(-1, 2)
        if labels.shape[0] != n:
            raise MeshError(f"expected {n} deck labels, got {labels.shape[0]}")
        if genus == 0 and labels.any():
            raise MeshError("sphere must carry zero deck labels")
        twin = _pair_by_labels(faces, labels)
    else:
        labels = None
        twin = _pair_by_vertices(faces)

    if genus == 0 and any(len(set(f)) < 3 for f in faces):
        raise MeshError("sphere triangulation has a degenerate face")
    if _face_components(twin, len(faces)) != 1:
        raise MeshError("surface is disconnected")
    n_edges = n // 2
    chi = nv - n_edges + len(faces)
    if chi != 2 - 2 * genus:
        raise MeshError(f"Euler characteristic {chi} does not match genus {genus}")

    if labels is None:
        if genus == 1:
            labels = _tree_cotree_labels(faces, twin, nv)
        else:
            labels = np.zeros((n, 2), dtype=np.int64)
    if np.any(labels[twin] != -labels):
        raise MeshError("deck labels are not antisymmetric under twin")
    if np.any(labels.reshape(-1, 3, 2).sum(axis=1) != 0):
        raise MeshError("deck labels do not sum to zero around every face")
    if genus == 1 and _label_lattice_index(faces, twin, labels, nv) != 1:
        raise MeshError("deck labels do not generate Z^2")
    return TriangulatedSurface(faces, genus, twin, labels)


def regular_torus(m: int, n: int) -> TriangulatedSurface:
    """The m x n quotient of the regular triangular lattice.

    Lattice point (a, b) is vertex ``(a mod m) + m (b mod n)``; its deck
    word is ``(a div m, b div n)``.
    """
    if m < 1 or n < 1:
        raise MeshError("m and n must be positive")

    def vid(a, b):
        return (a % m) + m * (b % n)

    def word(a, b):
        return np.array([a // m, b // n])

    faces, labels = [], []
    for b in range(n):
        for a in range(m):
            for tri in (((a, b), (a + 1, b), (a, b + 1)), ((a + 1, b), (a + 1, b + 1), (a, b + 1))):
                faces.append([vid(*p) for p in tri])
                for t in range(3):
                    labels.append(word(*tri[(t + 1) % 3]) - word(*tri[t]))
    return build_surface(faces, 1, deck_labels=np.array(labels))


def lattice_coordinates(m: int, n: int, v: int, word=(0, 0)) -> tuple:
    """Lattice point of the lift ``(v, word)`` of a regular_torus vertex."""
    a, b = v % m, v // m
    return a + m * word[0], b + n * word[1]


# ---------------------------------------------------------------------------
# cover patches


@dataclass(frozen=True)
class CoverPatch:
    """Finite patch of the universal cover.

    ``face_lifts`` are pairs ``(f, anchor)``; the corner ``t`` of such a lift
    is the lifted vertex ``(faces[f][t], anchor + offset[f, t])``.
    ``generators`` hold two closed half-edge walks based at ``base_vertex``
    with total deck words (1, 0) and (0, 1).
    """

    surface: TriangulatedSurface
    words: tuple
    lifted_vertices: tuple
    face_lifts: tuple
    generators: tuple
    base_vertex: int = 0
    _corner_cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def lifted_faces(self) -> list:
        s = self.surface
        return [
            tuple((int(s.faces[f, t]), s.corner_word(f, a, t)) for t in range(3))
            for f, a in self.face_lifts
        ]

    def faces_at(self, lifted_vertex) -> list:
        """Face lifts of the patch having ``lifted_vertex`` as a corner."""
        if not self._corner_cache:
            for k, corners in enumerate(self.lifted_faces):
                for c in corners:
                    self._corner_cache.setdefault(c, []).append(k)
        return [self.face_lifts[k] for k in self._corner_cache.get(lifted_vertex, [])]

    def is_edge_connected(self) -> bool:
        s = self.surface
        present = set(self.face_lifts)
        if not present:
            return False
        start = self.face_lifts[0]
        seen = {start}
        stack = [start]
        while stack:
            f, a = stack.pop()
            for t in range(3):
                f2, a2, _ = s.cross(f, a, t)
                if (f2, a2) in present and (f2, a2) not in seen:
                    seen.add((f2, a2))
                    stack.append((f2, a2))
        return len(seen) == len(present)


def _generator_walk(surface, v0, target_word):
    """Shortest closed half-edge walk at v0 with the given total deck word."""
    target = (v0, tuple(target_word))
    start = (v0, (0, 0))
    out = {}
    for h in range(surface.n_half_edges):
        out.setdefault(surface.origin(h), []).append(h)
    prev = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == target:
            break
        v, w = node
        for h in out[v]:
            lab = surface.label(h)
            nxt = (surface.target(h), (w[0] + lab[0], w[1] + lab[1]))
            if nxt not in prev:
                prev[nxt] = (node, h)
                queue.append(nxt)
    if target not in prev:
        raise MeshError("no closed walk realizes the requested deck word")
    walk = []
    node = target
    while prev[node] is not None:
        node, h = prev[node]
        walk.append(h)
    return tuple(reversed(walk))


def _as_range(r):
    if isinstance(r, int):
        return [r]
    return sorted({int(x) for x in r})


def lift_patch(surface: TriangulatedSurface, copies=((0,), (0,)), base_vertex: int = 0) -> CoverPatch:
    """Lift the torus to the deck words ``m_range x n_range``.

    One lift of each base vertex and one lift of each face (by anchor word)
    is included per deck word.
    """
    if surface.genus != 1:
        raise MeshError("lift_patch needs a torus; genus 0 surfaces are simply connected")
    mr, nr = (_as_range(r) for r in copies)
    if not mr or not nr:
        raise MeshError("deck word ranges must be nonempty")
    words = tuple((a, b) for b in nr for a in mr)
    verts = tuple((v, w) for w in words for v in range(surface.n_vertices))
    faces = tuple((f, w) for w in words for f in range(surface.n_faces))
    gens = (
        _generator_walk(surface, base_vertex, (1, 0)),
        _generator_walk(surface, base_vertex, (0, 1)),
    )
    return CoverPatch(surface, words, verts, faces, gens, base_vertex)


def trivial_patch(surface: TriangulatedSurface) -> CoverPatch:
    """The surface itself as a one-sheet patch (for spheres)."""
    words = ((0, 0),)
    verts = tuple((v, (0, 0)) for v in range(surface.n_vertices))
    faces = tuple((f, (0, 0)) for f in range(surface.n_faces))
    return CoverPatch(surface, words, verts, faces, ((), ()), 0)


# ---------------------------------------------------------------------------
# dual cycles


@dataclass(frozen=True)
class DualCycle:
    """Simple closed walk in the dual graph.

    ``half_edges[p]`` is the half-edge of ``faces[p]`` through which the walk
    leaves that face. ``enclosed`` counts primal vertices on the disk side
    of a contractible cycle and is None otherwise.
    """

    faces: tuple
    half_edges: tuple
    deck_word: tuple
    contractible: bool
    enclosed: int | None

    @property
    def edges(self) -> frozenset:
        return frozenset(self.half_edges)

    def __len__(self):
        return len(self.faces)


def _enclosed_count(surface, crossed_edges):
    """Vertices on the disk side of a separating set of crossed edges."""
    adj = {v: [] for v in range(surface.n_vertices)}
    for h in range(surface.n_half_edges):
        if int(surface.edge_of[h]) in crossed_edges:
            continue
        adj[surface.origin(h)].append(h)
    comp_of = {}
    comps = []
    for s in range(surface.n_vertices):
        if s in comp_of:
            continue
        idx = len(comps)
        comp_of[s] = idx
        words = {s: np.zeros(2, dtype=np.int64)}
        trivial = True
        members = [s]
        stack = [s]
        while stack:
            v = stack.pop()
            for h in adj[v]:
                w = surface.target(h)
                cand = words[v] + surface.labels[h]
                if w not in words:
                    words[w] = cand
                    comp_of[w] = idx
                    members.append(w)
                    stack.append(w)
                elif np.any(words[w] != cand):
                    trivial = False
        comps.append((len(members), trivial))
    if len(comps) < 2:
        return None
    if surface.genus == 0:
        return min(c for c, _ in comps)
    disks = [c for c, trivial in comps if trivial]
    return min(disks) if disks else None


def dual_cycles(surface: TriangulatedSurface, bound: int = DUAL_CYCLE_BOUND) -> list:
    """All simple closed dual walks of length at most ``bound``.

    Each cycle is reported once, starting at its smallest face. Results are
    cached on the surface.
    """
    if bound in surface._cycle_cache:
        return list(surface._cycle_cache[bound])
    s = surface
    nbrs = []
    for f in range(s.n_faces):
        nbrs.append([(3 * f + t, int(s.twin[3 * f + t]) // 3) for t in range(3)])

    found = {}

    def record(face_path, hs):
        key = frozenset(int(s.edge_of[h]) for h in hs)
        if key in found:
            return
        anchor = (0, 0)
        for f, h in zip(face_path, hs):
            _, anchor, _ = s.cross(f, anchor, h % 3)
        contractible = anchor == (0, 0)
        enclosed = _enclosed_count(s, key) if contractible else None
        found[key] = DualCycle(tuple(face_path), tuple(hs), anchor, contractible, enclosed)

    for start in range(s.n_faces):
        face_path = [start]
        hs = []
        used_edges = set()
        on_path = {start}

        def dfs(f):
            for h, g in nbrs[f]:
                e = int(s.edge_of[h])
                if e in used_edges:
                    continue
                if g == start:
                    hs.append(h)
                    record(face_path, hs)
                    hs.pop()
                    continue
                if g < start or g in on_path or len(face_path) >= bound:
                    continue
                used_edges.add(e)
                on_path.add(g)
                face_path.append(g)
                hs.append(h)
                dfs(g)
                hs.pop()
                face_path.pop()
                on_path.discard(g)
                used_edges.discard(e)

        dfs(start)

    cycles = sorted(found.values(), key=lambda c: (len(c), c.faces, c.half_edges))
    surface._cycle_cache[bound] = tuple(cycles)
    return cycles
