"""Ringnets around one extraordinary vertex (primal) or face (dual).

Labels
------
A vertex is labelled ``(l, i, j)`` with ``l`` the segment.  Primal nets
store the centre as ``(0, 0, 0)`` and every other vertex with ``i >= 1,
j >= 0``; the spoke vertex ``(l, 0, j)`` is the same vertex as
``(l + 1, j, 0)`` and is stored under the latter.  Dual nets use ``i, j >= 1``
and have no identifications.  Labels are ordered by ring, then segment,
then ``(i, j)`` lexicographically, so the first entries of a larger net are
exactly the labels of a smaller one.

Lattice positions
-----------------
Subdivision is carried out on an ordinary :class:`~midpoint.mesh.PolyMesh`.
To find the new labels, every vertex also carries a position on the
quadrant lattice of its segment, in quarter units: primal ``(4i, 4j)``,
dual ``(4i - 2, 4j - 2)``.  Segment ``l`` and ``l + 1`` are glued along the
spoke ``x = 0`` by ``(l, x, y) ~ (l + 1, y, -x)``.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import (
    AngleOutOfRange,
    BadFrequency,
    BadValence,
    MidpointError,
    ParityMismatch,
    TooFewRings,
    TopologyMismatch,
)
from .mesh import PolyMesh, midpoint_chain, midpoint_Mn

PRIMAL = "primal"
DUAL = "dual"
KINDS = (PRIMAL, DUAL)

ORDER_TOL = 1e-12
SYMMETRY_TOL = 1e-12

__all__ = [
    "PRIMAL",
    "DUAL",
    "Ringnet",
    "FrameK",
    "NetOrder",
    "omega",
    "rho",
    "kind_for_degree",
    "net_labels",
    "make_grid_mesh",
    "influence_range",
    "subdivide_ringnet",
    "core_mesh",
    "frame_K",
    "half_segment",
    "half_segment_labels",
    "symmetry_check",
    "compare_nets",
    "min_max_norm",
    "symmetric_net",
]


def omega(n: int) -> int:
    """Core-mesh size ``floor((n - 1) / 2)``."""
    return (n - 1) // 2


def rho(n: int) -> int:
    """Rings that determine one spline difference ring, ``ceil(3n/2 - 3/2)``."""
    return -((3 - 3 * n) // 2)


def kind_for_degree(n: int) -> str:
    return PRIMAL if n % 2 else DUAL


def _check_parity(n: int, kind: str) -> None:
    if kind not in KINDS:
        raise ValueError(f"unknown ringnet kind {kind!r}")
    if kind_for_degree(n) != kind:
        raise ParityMismatch(f"degree {n} needs a {kind_for_degree(n)} ringnet, got {kind}")


def _check_valence(m: int) -> None:
    if m < 3:
        raise BadValence(f"valence must be >= 3, got {m}")


# -- labels -------------------------------------------------------------------


@lru_cache(maxsize=None)
def net_labels(m: int, kind: str, j: int) -> tuple[tuple[int, int, int], ...]:
    """Canonical labels of a ``j``-net in storage order."""
    out: list[tuple[int, int, int]] = []
    for r in range(j + 1):
        if kind == PRIMAL:
            if r == 0:
                out.append((0, 0, 0))
                continue
            k = r
            seg = [(i, k) for i in range(1, k)] + [(k, jj) for jj in range(k + 1)]
        else:
            k = r + 1
            seg = [(i, k) for i in range(1, k)] + [(k, jj) for jj in range(1, k + 1)]
        for l in range(m):
            out.extend((l, a, b) for a, b in seg)
    return tuple(out)


@lru_cache(maxsize=None)
def label_index(m: int, kind: str, j: int) -> dict[tuple[int, int, int], int]:
    return {lab: k for k, lab in enumerate(net_labels(m, kind, j))}


def ring_of(kind: str, i: int, j: int) -> int:
    return max(i, j) if kind == PRIMAL else max(i, j) - 1


def canonical_label(m: int, kind: str, l: int, i: int, j: int) -> tuple[int, int, int]:
    """Resolve the spoke identification and segment wrap-around."""
    l %= m
    if kind == PRIMAL:
        if i == 0 and j == 0:
            return (0, 0, 0)
        if i == 0:
            return ((l + 1) % m, j, 0)
    elif i < 1 or j < 1:
        raise KeyError((l, i, j))
    return (l, i, j)


@lru_cache(maxsize=None)
def ring_slices(m: int, kind: str, j: int) -> tuple[slice, ...]:
    out = []
    start = 0
    for r in range(j + 1):
        if kind == PRIMAL:
            size = 1 if r == 0 else 2 * r * m
        else:
            size = (2 * r + 1) * m
        out.append(slice(start, start + size))
        start += size
    return tuple(out)


# -- lattice positions --------------------------------------------------------

CENTER = None


def _canonical_position(m, l, x, y):
    if x == 0 and y == 0:
        return CENTER
    for _ in range(3):
        if x > 0 and y >= 0:
            return (l % m, x, y)
        if (x <= 0 and y > 0) or (x < 0 and y == 0):
            l, x, y = l + 1, y, -x
        elif y <= 0 and x >= 0:
            l, x, y = l - 1, -y, x
        else:
            raise MidpointError(f"lattice point ({x}, {y}) lies in the excluded quadrant")
    raise MidpointError("position canonicalisation did not terminate")


def _mean_position(m, pts):
    charts = {p[0] for p in pts if p is not CENTER}
    if not charts:
        return CENTER
    if len(charts) > 2:
        if len(pts) == m and len(charts) == m:
            return CENTER
        raise MidpointError("face spans more than two segments")
    if len(charts) == 1:
        (ref,) = charts
    else:
        a, b = charts
        ref = a if (a + 1) % m == b else b
    nxt = (ref + 1) % m
    sx = sy = 0
    for p in pts:
        if p is CENTER:
            continue
        c, x, y = p
        if c == ref:
            sx += x
            sy += y
        elif c == nxt:
            sx -= y
            sy += x
        else:
            raise MidpointError("face spans non-adjacent segments")
    k = len(pts)
    if sx % k or sy % k:
        raise MidpointError("averaged position left the quarter lattice")
    return _canonical_position(m, ref, sx // k, sy // k)


def _position(kind, label):
    l, i, j = label
    if kind == PRIMAL:
        if i == 0 and j == 0:
            return CENTER
        return (l, 4 * i, 4 * j)
    return (l, 4 * i - 2, 4 * j - 2)


def _label_from_position(m, kind, pos):
    if pos is CENTER:
        if kind != PRIMAL:
            raise MidpointError("dual net has no centre vertex")
        return (0, 0, 0)
    l, x, y = pos
    off = 0 if kind == PRIMAL else 2
    if (x + off) % 4 or (y + off) % 4:
        raise MidpointError(f"position {pos} is not a {kind} lattice point")
    return canonical_label(m, kind, l, (x + off) // 4, (y + off) // 4)


def _grid_faces(m, kind, j):
    """Faces of the ``j``-net, counter-clockwise, as label tuples."""
    idx = label_index(m, kind, j)
    faces = []
    if kind == PRIMAL:
        # cells [a, a+1] x [b, b+1] of every segment
        for l in range(m):
            for a in range(j):
                for b in range(j):
                    corners = [(a, b), (a + 1, b), (a + 1, b + 1), (a, b + 1)]
                    faces.append(tuple(idx[canonical_label(m, kind, l, x, y)] for x, y in corners))
    else:
        faces.append(tuple(idx[(l, 1, 1)] for l in range(m)))
        # cells centred at lattice point (a, b), a >= 1, b >= 0, in quarter units
        for l in range(m):
            for a in range(1, j + 1):
                for b in range(0, j + 1):
                    cx, cy = 4 * a, 4 * b
                    corners = [(cx - 2, cy - 2), (cx + 2, cy - 2), (cx + 2, cy + 2), (cx - 2, cy + 2)]
                    faces.append(
                        tuple(
                            idx[_label_from_position(m, kind, _canonical_position(m, l, x, y))]
                            for x, y in corners
                        )
                    )
    return faces


@lru_cache(maxsize=64)
def _subdivision_plan(m: int, kind: str, j: int, n: int, pad: int):
    """Padded topology, M_n steps and the output vertices holding rings ``0..j``.

    Returns ``(faces, steps, out_index)`` where ``out_index[k]`` is the
    final-mesh vertex carrying label ``net_labels(m, kind, j)[k]``.
    """
    big = j + pad
    labels = net_labels(m, kind, big)
    faces = _grid_faces(m, kind, big)
    dummy = PolyMesh(np.zeros((len(labels), 1)), tuple(faces), allow_boundary=True)
    _, steps = midpoint_chain(dummy, n)
    pos = [_position(kind, lab) for lab in labels]
    for st in steps:
        pos = [_mean_position(m, [pos[s] for s in src]) for src in st.sources]
    where = {}
    for k, p in enumerate(pos):
        if p is not CENTER:
            p = (p[0], 2 * p[1], 2 * p[2])
        try:
            lab = _label_from_position(m, kind, p)
        except MidpointError:
            continue
        where.setdefault(lab, k)
    try:
        out = tuple(where[lab] for lab in net_labels(m, kind, j))
    except KeyError as exc:
        raise MidpointError(f"padding of {pad} rings does not cover label {exc}") from None
    return tuple(faces), tuple(steps), out


def default_pad(n: int) -> int:
    # any label that survives the boundary-truncated steps is already exact;
    # the padding only has to exist so that independence can be checked
    return 2


# -- ringnets -----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class Ringnet:
    """Complex vertex values ``p_ij^l`` of a ``j``-net in storage order."""

    m: int
    kind: str
    j: int
    points: np.ndarray
    f: int | None = None

    def __post_init__(self):
        _check_valence(self.m)
        if self.kind not in KINDS:
            raise ValueError(f"unknown ringnet kind {self.kind!r}")
        if self.j < 0:
            raise TooFewRings("ring index must be >= 0")
        pts = np.array(self.points, dtype=complex).reshape(-1)
        if len(pts) != len(net_labels(self.m, self.kind, self.j)):
            raise TopologyMismatch(
                f"{len(pts)} values for a {self.kind} {self.j}-net of valence {self.m}"
            )
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def ring_count(self) -> int:
        return self.j + 1

    @property
    def labels(self) -> tuple[tuple[int, int, int], ...]:
        return net_labels(self.m, self.kind, self.j)

    @property
    def phi(self) -> float:
        f = 1 if self.f is None else self.f
        return 2 * np.pi * f / self.m

    def index(self, l: int, i: int, j: int) -> int:
        return label_index(self.m, self.kind, self.j)[canonical_label(self.m, self.kind, l, i, j)]

    def at(self, l: int, i: int, j: int) -> complex:
        return complex(self.points[self.index(l, i, j)])

    def ring(self, r: int) -> np.ndarray:
        return self.points[ring_slices(self.m, self.kind, self.j)[r]]

    def truncate(self, j: int) -> "Ringnet":
        if j > self.j:
            raise TooFewRings(f"cannot truncate a {self.j}-net to {j} rings")
        size = ring_slices(self.m, self.kind, j)[-1].stop
        return Ringnet(self.m, self.kind, j, self.points[:size], self.f)

    def with_points(self, points) -> "Ringnet":
        return Ringnet(self.m, self.kind, self.j, points, self.f)

    def same_topology(self, other: "Ringnet") -> bool:
        return (self.m, self.kind, self.j) == (other.m, other.kind, other.j)

    # -- I/O --

    def to_dict(self) -> dict:
        doc = {"m": self.m, "kind": self.kind, "rings": self.ring_count}
        if self.f is not None:
            doc["f"] = self.f
        doc["vertices"] = [
            {"l": l, "i": i, "j": j, "re": float(p.real), "im": float(p.imag)}
            for (l, i, j), p in zip(self.labels, self.points)
        ]
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Ringnet":
        m, kind, j = int(doc["m"]), doc["kind"], int(doc["rings"]) - 1
        idx = label_index(m, kind, j)
        pts = np.zeros(len(idx), dtype=complex)
        seen = np.zeros(len(idx), dtype=bool)
        for v in doc["vertices"]:
            k = idx[canonical_label(m, kind, v["l"], v["i"], v["j"])]
            pts[k] = complex(v["re"], v["im"])
            seen[k] = True
        if not seen.all():
            raise TopologyMismatch("ringnet JSON is missing vertices")
        return cls(m, kind, j, pts, doc.get("f"))

    @classmethod
    def from_json(cls, text: str) -> "Ringnet":
        return cls.from_dict(json.loads(text))


def make_grid_mesh(m: int, f: int, kind: str, rings: int) -> Ringnet:
    """Grid mesh of valence ``m`` and frequency ``f`` with ``rings`` rings."""
    _check_valence(m)
    if not 1 <= f <= m - 1:
        raise BadFrequency(f"frequency must lie in 1..{m - 1}, got {f}")
    if rings < 1:
        raise TooFewRings("a ringnet has at least one ring")
    if kind not in KINDS:
        raise ValueError(f"unknown ringnet kind {kind!r}")
    j = rings - 1
    lab = np.array(net_labels(m, kind, j), dtype=float)
    l, i, jj = lab[:, 0], lab[:, 1], lab[:, 2]
    e0 = np.exp(2j * np.pi * l * f / m)
    e1 = np.exp(2j * np.pi * (l + 1) * f / m)
    if kind == PRIMAL:
        pts = i * e0 + jj * e1
    else:
        # quarter average of g_{i-1,j-1}, g_{i,j-1}, g_{i-1,j}, g_{ij}
        pts = (i - 0.5) * e0 + (jj - 0.5) * e1
    return Ringnet(m, kind, j, pts, f)


def influence_range(n: int, i: int, kind: str) -> tuple[int, int]:
    """Rings of the subdivided net influenced by ring ``i``."""
    _check_parity(n, kind)
    if i < 0:
        raise ValueError("ring index must be >= 0")
    lo = 2 * i - (n + 1) // 2
    hi = 2 * i - (-(n + 1) // 2)
    return max(lo, 0), hi


def subdivide_ringnet(net: Ringnet, n: int, pad: int | None = None, fill=None) -> Ringnet:
    """First ``j + 1`` rings of ``M_n`` applied to a padded copy of ``net``.

    ``fill`` sets the geometry of the padding rings (zeros by default); by
    the band structure of M_n the result does not depend on it.
    """
    _check_parity(n, net.kind)
    if net.j < omega(n):
        raise TooFewRings(f"degree {n} needs at least {omega(n)} rings, net has {net.j}")
    if pad is None:
        pad = default_pad(n)
    faces, _, out = _subdivision_plan(net.m, net.kind, net.j, n, pad)
    total = len(net_labels(net.m, net.kind, net.j + pad))
    vals = np.zeros(total, dtype=complex)
    vals[: len(net.points)] = net.points
    if fill is not None:
        vals[len(net.points):] = np.asarray(fill, dtype=complex)
    coords = np.column_stack([vals.real, vals.imag])
    mesh = PolyMesh(coords, faces, allow_boundary=True)
    final = midpoint_Mn(mesh, n)
    v = final.vertices[list(out)]
    return Ringnet(net.m, net.kind, net.j, v[:, 0] + 1j * v[:, 1], net.f)


def core_mesh(net: Ringnet, n: int) -> Ringnet:
    """Rings ``0..omega(n)``."""
    w = omega(n)
    if net.j < w:
        raise TooFewRings(f"core mesh of degree {n} needs {w + 1} rings")
    return net.truncate(w)


# -- frame, order, norms ------------------------------------------------------


@dataclass(frozen=True)
class FrameK:
    """Basis ``[cos t, sin t]``, ``[0, 1]`` with ``t = phi/2 - pi/2``."""

    phi: float

    @property
    def theta(self) -> float:
        return self.phi / 2 - np.pi / 2

    @property
    def basis(self) -> np.ndarray:
        t = self.theta
        return np.array([[np.cos(t), np.sin(t)], [0.0, 1.0]])

    def coords(self, points) -> np.ndarray:
        """Coordinates in this frame of complex points, shape ``(N, 2)``."""
        p = np.asarray(points, dtype=complex).reshape(-1)
        x = p.real / np.cos(self.theta)
        y = p.imag - x * np.sin(self.theta)
        return np.column_stack([x, y])

    def point(self, coords) -> np.ndarray:
        c = np.asarray(coords, dtype=float).reshape(-1, 2)
        b = self.basis
        xy = c[:, :1] * b[0] + c[:, 1:] * b[1]
        return xy[:, 0] + 1j * xy[:, 1]


def frame_K(phi: float) -> FrameK:
    if not 0 < phi < 2 * np.pi:
        raise AngleOutOfRange(f"segment angle must lie in (0, 2pi), got {phi}")
    return FrameK(float(phi))


class NetOrder(Enum):
    LESS = "less"
    LESS_EQ = "less-eq"
    EQUAL = "equal"
    GREATER_EQ = "greater-eq"
    GREATER = "greater"
    INCOMPARABLE = "incomparable"


@lru_cache(maxsize=None)
def _half_segment_index(m, kind, j):
    idx = label_index(m, kind, j)
    labs = sorted(lab for lab in idx if lab[0] == 0 and lab[1] >= lab[2] and lab[1:] != (0, 0))
    return tuple(labs), np.array([idx[lab] for lab in labs], dtype=int)


def half_segment_labels(net: Ringnet) -> tuple[tuple[int, int, int], ...]:
    return _half_segment_index(net.m, net.kind, net.j)[0]


def half_segment(net: Ringnet) -> np.ndarray:
    """Values of the first half segment, ``l = 0, i >= j``, lexicographic in ``(i, j)``."""
    return net.points[_half_segment_index(net.m, net.kind, net.j)[1]]


def symmetry_check(net: Ringnet, f: int, tol: float = SYMMETRY_TOL) -> dict[str, bool]:
    """Rotation symmetry with frequency ``f`` and reflection symmetry."""
    m, kind = net.m, net.kind
    pts = net.points
    scale = max(1.0, float(np.abs(pts).max(initial=0.0)))
    rot_perm, ref_perm = _symmetry_perms(m, kind, net.j)
    zeta = np.exp(2j * np.pi * f / m)
    rotation = bool(np.abs(pts * zeta - pts[rot_perm]).max() <= tol * scale)
    reflection = bool(np.abs(np.conj(pts) - pts[ref_perm]).max() <= tol * scale)
    return {"rotation": rotation, "reflection": reflection}


@lru_cache(maxsize=None)
def _symmetry_perms(m, kind, j):
    idx = label_index(m, kind, j)
    labs = net_labels(m, kind, j)
    rot = np.empty(len(labs), dtype=int)
    ref = np.empty(len(labs), dtype=int)
    for k, (l, a, b) in enumerate(labs):
        if kind == PRIMAL and (a, b) == (0, 0):
            rot[k] = ref[k] = k
            continue
        rot[k] = idx[canonical_label(m, kind, l + 1, a, b)]
        ref[k] = idx[canonical_label(m, kind, (m - 1) - l, b, a)]
    return rot, ref


def compare_nets(a: Ringnet, b: Ringnet, frame: FrameK, tol: float = ORDER_TOL) -> NetOrder:
    """Pointwise comparison of the first half segments in ``frame``."""
    if not a.same_topology(b):
        raise TopologyMismatch("nets differ in valence, kind or ring count")
    d = (frame.coords(half_segment(a)) - frame.coords(half_segment(b))).ravel()
    if np.all(np.abs(d) <= tol):
        return NetOrder.EQUAL
    if np.all(d > tol):
        return NetOrder.GREATER
    if np.all(d < -tol):
        return NetOrder.LESS
    if np.all(d >= -tol):
        return NetOrder.GREATER_EQ
    if np.all(d <= tol):
        return NetOrder.LESS_EQ
    return NetOrder.INCOMPARABLE


def min_max_norm(net: Ringnet, frame: FrameK) -> tuple[float, float]:
    """``(MIN, MAX)`` of ``max(|x|, |y|)`` over the first half segment."""
    c = np.abs(frame.coords(half_segment(net))).max(axis=1)
    return float(c.min()), float(c.max())


def max_norm(net: Ringnet, frame: FrameK) -> float:
    return min_max_norm(net, frame)[1]


def symmetric_net(m: int, kind: str, j: int, f: int, half_values, center: complex = 0.0) -> Ringnet:
    """Symmetric net with frequency ``f`` generated from first-half-segment values.

    Values on the spokes ``S_0`` and ``S_0.5`` are projected onto them.
    """
    labs, _ = _half_segment_index(m, kind, j)
    half = np.asarray(half_values, dtype=complex).reshape(-1)
    if len(half) != len(labs):
        raise TopologyMismatch(f"expected {len(labs)} half-segment values, got {len(half)}")
    mid = np.exp(1j * np.pi * f / m)
    base = {}
    for (_, a, b), v in zip(labs, half):
        if kind == PRIMAL and b == 0:
            v = complex(v.real, 0.0)
        elif a == b:
            v = (v * np.conj(mid)).real * mid
        base[(a, b)] = v
    zeta = np.exp(2j * np.pi * f / m)
    pts = []
    for l, a, b in net_labels(m, kind, j):
        if kind == PRIMAL and (a, b) == (0, 0):
            pts.append(center)
        elif a >= b:
            pts.append(zeta ** l * base[(a, b)])
        else:
            pts.append(zeta ** (l + 1) * np.conj(base[(b, a)]))
    return Ringnet(m, kind, j, np.array(pts), f)


def h_coordinates_csv(net: Ringnet, frame: FrameK | None = None) -> str:
    """First half segment as CSV rows ``l,i,j,x,y`` in frame K."""
    frame = frame or frame_K(net.phi)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["l", "i", "j", "x", "y"])
    for (l, a, b), (x, y) in zip(half_segment_labels(net), frame.coords(half_segment(net))):
        w.writerow([l, a, b, f"{x:.15e}", f"{y:.15e}"])
    return buf.getvalue()
