"""Polygon meshes and the refinement, averaging and midpoint operators.

Every operator is split into a purely topological :class:`Step` (new faces
plus, for each new vertex, the old vertices it averages) and the geometric
application of that step.  Keeping the two apart lets the same step drive
float geometry, exact stencil composition and lattice labels.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (
    BoundaryNotAllowed,
    DanglingVertex,
    DegreeOutOfRange,
    MeshError,
    NonManifoldEdge,
    OrientationConflict,
)

__all__ = [
    "PolyMesh",
    "Step",
    "build_mesh",
    "refine_step",
    "average_step",
    "apply_step",
    "refine_R",
    "average_A",
    "midpoint_Mn",
    "midpoint_chain",
]


@dataclass(frozen=True)
class Step:
    """One topological step: ``vertex k of the new mesh = mean(old[sources[k]])``."""

    faces: tuple[tuple[int, ...], ...]
    sources: tuple[tuple[int, ...], ...]


@dataclass(frozen=True, eq=False)
class PolyMesh:
    """Oriented two-manifold polygon mesh.

    ``vertices`` is an ``(N, d)`` float array, ``faces`` a tuple of index
    cycles in counter-clockwise order.  The mesh is validated on
    construction and immutable afterwards.
    """

    vertices: np.ndarray
    faces: tuple[tuple[int, ...], ...]
    allow_boundary: bool = False
    _halfedges: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        verts = np.array(self.vertices, dtype=float)
        if verts.ndim != 2:
            raise MeshError("vertices must be an (N, d) array")
        verts.setflags(write=False)
        faces = tuple(tuple(int(v) for v in f) for f in self.faces)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "faces", faces)
        object.__setattr__(self, "_halfedges", _validate(len(verts), faces, self.allow_boundary))

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def halfedges(self) -> dict[tuple[int, int], int]:
        """Directed edge ``(u, v)`` -> index of the face traversing it."""
        return self._halfedges

    @cached_property
    def edges(self) -> tuple[tuple[int, int], ...]:
        """Undirected edges ``(min, max)`` in order of first appearance."""
        seen = {}
        for f in self.faces:
            for a, b in zip(f, f[1:] + f[:1]):
                seen.setdefault((min(a, b), max(a, b)), None)
        return tuple(seen)

    @cached_property
    def edge_faces(self) -> dict[tuple[int, int], tuple[int, ...]]:
        out: dict[tuple[int, int], tuple[int, ...]] = {}
        for (a, b), fi in self._halfedges.items():
            key = (min(a, b), max(a, b))
            out[key] = out.get(key, ()) + (fi,)
        return out

    @cached_property
    def vertex_faces(self) -> tuple[tuple[int, ...], ...]:
        inc: list[list[int]] = [[] for _ in range(self.n_vertices)]
        for fi, f in enumerate(self.faces):
            for v in f:
                inc[v].append(fi)
        return tuple(tuple(x) for x in inc)

    @cached_property
    def boundary_vertices(self) -> frozenset[int]:
        out = set()
        for (a, b), fs in self.edge_faces.items():
            if len(fs) == 1:
                out.update((a, b))
        return frozenset(out)

    @cached_property
    def valences(self) -> np.ndarray:
        val = np.zeros(self.n_vertices, dtype=int)
        for a, b in self.edge_faces:
            val[a] += 1
            val[b] += 1
        return val

    def extraordinary_counts(self) -> tuple[int, int]:
        """``(irregular inner vertices, irregular faces)``; regular means valence 4."""
        bnd = self.boundary_vertices
        nv = sum(1 for v, k in enumerate(self.valences) if v not in bnd and k != 4)
        nf = sum(1 for f in self.faces if len(f) != 4)
        return nv, nf

    def face_centroids(self) -> np.ndarray:
        return np.array([self.vertices[list(f)].mean(axis=0) for f in self.faces])


def _validate(nverts, faces, allow_boundary):
    used = np.zeros(nverts, dtype=bool)
    counts: dict[tuple[int, int], int] = {}
    for fi, f in enumerate(faces):
        if len(f) < 3:
            raise MeshError(f"face {fi} has fewer than 3 vertices")
        if len(set(f)) != len(f):
            raise MeshError(f"face {fi} repeats a vertex")
        for v in f:
            if not 0 <= v < nverts:
                raise MeshError(f"face {fi} references vertex {v} out of range")
        used[list(f)] = True
        for a, b in zip(f, f[1:] + f[:1]):
            key = (min(a, b), max(a, b))
            counts[key] = counts.get(key, 0) + 1
    for key, c in counts.items():
        if c > 2:
            raise NonManifoldEdge(f"edge {key} borders {c} faces")
        if c == 1 and not allow_boundary:
            raise BoundaryNotAllowed(f"edge {key} borders only one face")
    halfedges: dict[tuple[int, int], int] = {}
    for fi, f in enumerate(faces):
        for a, b in zip(f, f[1:] + f[:1]):
            if (a, b) in halfedges:
                raise OrientationConflict(
                    f"faces {halfedges[(a, b)]} and {fi} traverse edge ({a}, {b}) "
                    "in the same direction"
                )
            halfedges[(a, b)] = fi
    if not used.all():
        raise DanglingVertex(f"vertex {int(np.argmin(used))} belongs to no face")
    return halfedges


def build_mesh(vertices, faces, allow_boundary: bool = False) -> PolyMesh:
    """Validate ``vertices``/``faces`` and return a :class:`PolyMesh`.

    Raises :class:`NonManifoldEdge` for edges with three or more faces,
    :class:`OrientationConflict` for inconsistently oriented neighbours,
    :class:`DanglingVertex` for unused vertices and
    :class:`BoundaryNotAllowed` for boundary edges unless ``allow_boundary``.
    """
    return PolyMesh(np.asarray(vertices, dtype=float), tuple(map(tuple, faces)), allow_boundary)


def refine_step(mesh: PolyMesh) -> Step:
    """Topology of R: old vertices, then edge midpoints, then face centres."""
    nv = mesh.n_vertices
    edge_index = {e: nv + k for k, e in enumerate(mesh.edges)}
    ne = len(edge_index)
    sources: list[tuple[int, ...]] = [(v,) for v in range(nv)]
    sources.extend(mesh.edges)
    faces = []
    for fi, f in enumerate(mesh.faces):
        center = nv + ne + fi
        k = len(f)
        for i in range(k):
            prev, cur, nxt = f[i - 1], f[i], f[(i + 1) % k]
            e_next = edge_index[(min(cur, nxt), max(cur, nxt))]
            e_prev = edge_index[(min(prev, cur), max(prev, cur))]
            faces.append((cur, e_next, center, e_prev))
    sources.extend(mesh.faces)
    return Step(tuple(faces), tuple(sources))


def average_step(mesh: PolyMesh) -> Step:
    """Topology of A: the dual mesh restricted to inner vertices.

    Faces around boundary vertices are dropped; face centres that end up in
    no output face are discarded.
    """
    he = mesh.halfedges
    faces = mesh.faces
    # position of each vertex inside each incident face
    pred = {}
    for fi, f in enumerate(faces):
        for i, v in enumerate(f):
            pred[(fi, v)] = f[i - 1]
    cycles = []
    for v, inc in enumerate(mesh.vertex_faces):
        if not inc:
            continue
        start = inc[0]
        cycle = [start]
        cur = start
        ok = True
        while True:
            u = pred[(cur, v)]
            nxt = he.get((v, u))
            if nxt is None:
                ok = False
                break
            if nxt == start:
                break
            cycle.append(nxt)
            cur = nxt
            if len(cycle) > len(inc):
                raise MeshError(f"non-manifold vertex {v}")
        if ok:
            if len(cycle) != len(inc):
                raise MeshError(f"non-manifold vertex {v}")
            cycles.append(cycle)
    used = sorted({fi for c in cycles for fi in c})
    remap = {fi: k for k, fi in enumerate(used)}
    new_faces = tuple(tuple(remap[fi] for fi in c) for c in cycles)
    return Step(new_faces, tuple(faces[fi] for fi in used))


def apply_step(mesh: PolyMesh, step: Step, allow_boundary: bool | None = None) -> PolyMesh:
    """Place each new vertex at the mean of its sources."""
    verts = mesh.vertices
    out = np.empty((len(step.sources), verts.shape[1]))
    by_len: dict[int, list[int]] = {}
    for k, src in enumerate(step.sources):
        by_len.setdefault(len(src), []).append(k)
    for size, rows in by_len.items():
        idx = np.array([step.sources[k] for k in rows], dtype=int)
        out[rows] = verts[idx].mean(axis=1)
    if allow_boundary is None:
        allow_boundary = mesh.allow_boundary
    return PolyMesh(out, step.faces, allow_boundary)


def refine_R(mesh: PolyMesh) -> PolyMesh:
    """Connect each face centre with the midpoints of the face's edges."""
    return apply_step(mesh, refine_step(mesh))


def average_A(mesh: PolyMesh) -> PolyMesh:
    """Connect the centres of adjacent faces."""
    return apply_step(mesh, average_step(mesh))


def midpoint_chain(mesh: PolyMesh, n: int) -> tuple[PolyMesh, list[Step]]:
    """Apply ``A^(n-1) R`` and return the result with the steps used."""
    if n < 1:
        raise DegreeOutOfRange(f"degree must be >= 1, got {n}")
    steps = [refine_step(mesh)]
    cur = apply_step(mesh, steps[0])
    for _ in range(n - 1):
        st = average_step(cur)
        steps.append(st)
        cur = apply_step(cur, st)
    return cur, steps


def midpoint_Mn(mesh: PolyMesh, n: int) -> PolyMesh:
    """Midpoint subdivision of degree ``n``: one R step, then ``n - 1`` A steps."""
    return midpoint_chain(mesh, n)[0]
