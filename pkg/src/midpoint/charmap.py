"""Characteristic map: spline ring of the characteristic mesh, cone test, C1 certificate."""

from __future__ import annotations

import csv
import io
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import serialize
from .errors import DomainError, MidpointError, SubnetIrregular, TooFewRings
from .ringnet import (
    PRIMAL,
    Ringnet,
    _canonical_position,
    _check_parity,
    _label_from_position,
    label_index,
    rho,
)

__all__ = [
    "CharacteristicMap",
    "EdgeDirectionSet",
    "ConeResult",
    "C1Certificate",
    "extract_spline_ring",
    "evaluate",
    "evaluate_derivatives",
    "edge_directions",
    "cone_test",
    "jacobian_samples",
    "certify_C1",
    "in_open_Q",
    "check_control_points",
]

CONE_TOL = 1e-9


def in_open_Q(z, tol: float = 0.0) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return (z.real > tol) & (z.imag > tol)


# -- spline evaluation --------------------------------------------------------


def _de_boor(P: np.ndarray, t: float) -> np.ndarray:
    """Value at ``t in [0, 1]`` of the uniform B-spline span with control points ``P[0..n]``.

    Works along axis 0; knots are the integers, the span is ``[0, 1]``.
    """
    d = np.array(P, dtype=complex)
    n = len(d) - 1
    for r in range(1, n + 1):
        for k in range(n, r - 1, -1):
            a = (t - k + n) / (n + 1 - r)
            d[k] = (1 - a) * d[k - 1] + a * d[k]
    return d[n]


def _tensor_eval(P: np.ndarray, t: float, s: float) -> complex:
    return complex(_de_boor(_de_boor(P, t), s))


def _bspline_to_bezier_matrix(n: int) -> np.ndarray:
    """``Bez = M @ P`` for one uniform degree-``n`` span on ``[0, 1]``."""
    return _b2b(n).copy()


@lru_cache(maxsize=None)
def _b2b(n: int) -> np.ndarray:
    from math import comb

    ts = np.linspace(0.0, 1.0, n + 1)
    # values of each B-spline basis function at the nodes
    B = np.array([[_de_boor(np.eye(n + 1)[:, k], t).real for k in range(n + 1)] for t in ts])
    bern = np.array([[comb(n, k) * t**k * (1 - t) ** (n - k) for k in range(n + 1)] for t in ts])
    out = np.linalg.solve(bern, B)
    out.setflags(write=False)
    return out


# -- the spline ring ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CharacteristicMap:
    """Spline ring defined by a frequency-1 ringnet.

    ``patches[l][(a, b)]`` is the ``(n+1) x (n+1)`` complex control net of the
    cell ``[a, a+1] x [b, b+1]`` of segment ``l`` in lattice units; the
    parameter ``(u, v)`` of ``Omega = [0,2]^2 \\ [0,1)^2`` corresponds to
    lattice point ``(u s, v s)`` with ``s = n // 2``.  Control nets are
    stored already multiplied by ``rotation``.
    """

    n: int
    m: int
    patches: tuple[dict[tuple[int, int], np.ndarray], ...]
    rotation: complex
    net: Ringnet = field(repr=False)

    @property
    def s(self) -> int:
        return self.n // 2

    @property
    def patch_count(self) -> int:
        return sum(len(p) for p in self.patches)

    def cells(self) -> list[tuple[int, int]]:
        return _cells(self.s)


def _cells(s: int) -> list[tuple[int, int]]:
    return [(a, b) for b in range(2 * s) for a in range(2 * s) if a >= s or b >= s]


def _block_positions(n: int, a: int) -> np.ndarray:
    """Lattice positions, in quarter units, of the control block of cell ``a``."""
    start = 4 * a + 2 - 2 * n
    return start + 4 * np.arange(n + 1)


def _value_at(net: Ringnet, l: int, X: int, Y: int, idx) -> complex:
    # the centre may be a corner of a block; a block reaching the third
    # quadrant would need faces that do not exist around it
    if X < 0 and Y < 0:
        raise SubnetIrregular(f"control point ({X / 4}, {Y / 4}) lies behind the extraordinary element")
    pos = _canonical_position(net.m, l, X, Y)
    lab = _label_from_position(net.m, net.kind, pos)
    try:
        return net.points[idx[lab]]
    except KeyError:
        raise TooFewRings(f"control point {lab} is outside the {net.j}-net") from None


def extract_spline_ring(net: Ringnet, n: int) -> CharacteristicMap:
    """Control nets of all ``3 m (n//2)^2`` patches of the ring defined by ``net``."""
    if n < 2:
        raise MidpointError("the spline ring needs degree n >= 2")
    _check_parity(n, net.kind)
    if net.j < rho(n):
        raise TooFewRings(f"degree {n} spline ring needs {rho(n) + 1} rings, net has {net.ring_count}")
    idx = label_index(net.m, net.kind, net.j)
    s = n // 2
    segments = []
    for l in range(net.m):
        seg = {}
        for a, b in _cells(s):
            xs, ys = _block_positions(n, a), _block_positions(n, b)
            seg[(a, b)] = np.array([[_value_at(net, l, X, Y, idx) for Y in ys] for X in xs])
        segments.append(seg)
    raw = CharacteristicMap(n, net.m, tuple(segments), 1.0 + 0j, net)
    c11 = evaluate(raw, 0, 1.0, 1.0)
    if abs(c11) == 0:
        raise MidpointError("c(1,1) vanishes; cannot normalise the rotation")
    rot = np.conj(c11) / abs(c11)
    for seg in segments:
        for key in seg:
            seg[key] = seg[key] * rot
            seg[key].setflags(write=False)
    return CharacteristicMap(n, net.m, tuple(segments), complex(rot), net)


def _locate(cmap: CharacteristicMap, u: float, v: float):
    if not (0 <= u <= 2 and 0 <= v <= 2) or (u < 1 and v < 1):
        raise DomainError(f"({u}, {v}) is not in [0,2]^2 minus [0,1)^2")
    s = cmap.s
    a = min(int(np.floor(u * s)), 2 * s - 1)
    b = min(int(np.floor(v * s)), 2 * s - 1)
    # points on the inner boundary u = 1 (or v = 1) with the other below 1
    if a < s and b < s:
        if u >= 1:
            a = s
        else:
            b = s
    return (a, b), u * s - a, v * s - b


def evaluate(cmap: CharacteristicMap, segment: int, u: float, v: float) -> complex:
    (a, b), t, r = _locate(cmap, u, v)
    return _tensor_eval(cmap.patches[segment % cmap.m][(a, b)], t, r)


def evaluate_derivatives(cmap: CharacteristicMap, segment: int, u: float, v: float) -> tuple[complex, complex]:
    """``(c_u, c_v)`` from the difference nets, scaled by ``s`` for the parameter map."""
    (a, b), t, r = _locate(cmap, u, v)
    P = cmap.patches[segment % cmap.m][(a, b)]
    s = cmap.s
    du = P[1:] - P[:-1]
    dv = P[:, 1:] - P[:, :-1]
    # a degree-n span on unit knots differentiates to the differences on degree n-1
    cu = s * complex(_de_boor(_de_boor(du, t), r))
    cv = s * complex(_de_boor(_de_boor(dv, t), r))
    return cu, cv


def sample_grid(cmap: CharacteristicMap, per_patch: int = 17):
    """``(segment, u, v, value)`` rows over a ``per_patch`` grid of every patch."""
    s = cmap.s
    ts = np.linspace(0.0, 1.0, per_patch)
    rows = []
    for l, seg in enumerate(cmap.patches):
        for (a, b), P in seg.items():
            for t in ts:
                Pt = _de_boor(P, t)
                for r in ts:
                    rows.append((l, (a + t) / s, (b + r) / s, complex(_de_boor(Pt, r))))
    return rows


def samples_csv(cmap: CharacteristicMap, per_patch: int = 9) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["u", "v", "segment", "re", "im"])
    for l, u, v, z in sample_grid(cmap, per_patch):
        w.writerow([serialize.fmt(u), serialize.fmt(v), l, serialize.fmt(z.real), serialize.fmt(z.imag)])
    return buf.getvalue()


def samples_obj(cmap: CharacteristicMap, per_patch: int = 9) -> str:
    """Sampled quads of every patch, one OBJ group per segment."""
    lines = []
    k = per_patch
    base = 1
    ts = np.linspace(0.0, 1.0, k)
    for l, seg in enumerate(cmap.patches):
        lines.append(f"g segment{l}")
        for (a, b), P in sorted(seg.items()):
            for t in ts:
                Pt = _de_boor(P, t)
                for r in ts:
                    z = complex(_de_boor(Pt, r))
                    lines.append(f"v {z.real:.15e} {z.imag:.15e} 0")
            for i in range(k - 1):
                for j in range(k - 1):
                    q = base + i * k + j
                    lines.append(f"f {q} {q + k} {q + k + 1} {q + 1}")
            base += k * k
    return "\n".join(lines) + "\n"


# -- edge directions and the cone test ----------------------------------------


@dataclass(frozen=True)
class EdgeDirectionSet:
    directions: np.ndarray
    u0: np.ndarray
    u1: np.ndarray
    rotation: complex

    @property
    def all(self) -> np.ndarray:
        return np.concatenate([self.directions, self.u1, 1j * self.u0])

    def in_Q(self, tol: float = 0.0) -> bool:
        return bool(in_open_Q(self.all, tol).all())

    def in_closed_Q(self, tol: float = 1e-12) -> bool:
        z = self.all
        return bool(((z.real >= -tol) & (z.imag >= -tol)).all())


def edge_directions(net: Ringnet, rotation: complex | None = None) -> EdgeDirectionSet:
    """Edge directions ``p_{i,j+1} - p_{i,j}`` of segment 0 plus the spoke directions.

    Directions are reported in the frame where the spoke ``S_0.5`` is the
    positive real axis (the frame of ``c(1,1) > 0``) unless ``rotation`` is
    given.  ``u0`` holds successive steps along ``S_0``; ``u1`` the same
    steps rotated onto ``S_1``.
    """
    m, kind = net.m, net.kind
    if rotation is None:
        rotation = np.exp(-1j * np.pi / m)
    idx = label_index(m, kind, net.j)
    lo = 0 if kind == PRIMAL else 1
    dirs = []
    for lab, k in idx.items():
        l, i, j = lab
        if l != 0:
            continue
        nxt = (0, i, j + 1)
        if nxt in idx and ((kind == PRIMAL and (i, j) != (0, 0)) or kind != PRIMAL):
            dirs.append(net.points[idx[nxt]] - net.points[k])
    # primal spoke (l, 0, j) is stored as (l+1, j, 0)
    if kind == PRIMAL:
        for j in range(0, net.j):
            a = net.at(0, 0, j) if j else net.points[idx[(0, 0, 0)]]
            dirs.append(net.at(0, 0, j + 1) - a)
    # spoke S_0: steps between points on it (primal) or mirrored midpoints (dual)
    u0 = []
    if kind == PRIMAL:
        prev = net.points[idx[(0, 0, 0)]]
        for i in range(1, net.j + 1):
            cur = net.at(0, i, 0)
            u0.append(cur - prev)
            prev = cur
    else:
        mids = [0.5 * (net.at(0, i, 1) + net.at(m - 1, 1, i)) for i in range(1, net.j + 2)]
        u0 = list(np.diff(mids))
    u0 = np.array(u0, dtype=complex)
    zeta = np.exp(2j * np.pi / m)
    return EdgeDirectionSet(
        directions=np.array(dirs, dtype=complex) * rotation,
        u0=u0 * rotation,
        u1=u0 * zeta * rotation,
        rotation=complex(rotation),
    )


@dataclass
class ConeResult:
    passed: bool
    method: str
    margin: float
    witnesses: list = field(default_factory=list)

    def __bool__(self):
        return self.passed


def _derivative_nets(cmap: CharacteristicMap, segment: int = 0):
    s = cmap.s
    for key, P in sorted(cmap.patches[segment].items()):
        yield key, s * (P[:, 1:] - P[:, :-1])


def _cone_margin(pts: np.ndarray, scale: float) -> float:
    return float(np.minimum(pts.real, pts.imag).min() / scale)


def check_control_points(nets, tol: float = 0.0, scale: float | None = None):
    """Witnesses ``(key, (i, j), value)`` of control points outside ``Q`` shrunk by ``tol``.

    ``nets`` is an iterable of ``(key, complex array)``; ``tol`` is relative
    to ``scale`` (largest modulus over all nets by default).
    """
    nets = list(nets)
    if scale is None:
        scale = max((float(np.abs(D).max()) for _, D in nets), default=1.0) or 1.0
    witnesses = []
    margin = np.inf
    for key, D in nets:
        margin = min(margin, _cone_margin(D, scale))
        bad = np.argwhere(~in_open_Q(D, tol * scale))
        witnesses.extend((key, tuple(int(x) for x in ij), complex(D[tuple(ij)])) for ij in bad)
    return witnesses, float(margin)


def cone_test(cmap: CharacteristicMap, tol: float = CONE_TOL, bezier_depth: int = 3) -> ConeResult:
    """Does ``c_v`` map segment 0 into the open quadrant Q?

    First the control points of the derivative B-spline nets are checked;
    by the convex hull property, all of them inside Q (with relative margin
    above ``10 * tol``) proves the claim.  Patches that fail are retried on
    the Bezier nets of their ``c_v`` polynomial, split by de Casteljau up
    to ``bezier_depth`` times; that hull is tighter and the conclusion just
    as strict.  ``method`` names the stage that decided.
    """
    nets = list(_derivative_nets(cmap))
    scale = max(float(np.abs(D).max()) for _, D in nets) or 1.0
    band = 10 * tol
    witnesses, margin = check_control_points(nets, band, scale)
    if not witnesses or bezier_depth <= 0:
        return ConeResult(not witnesses, "bspline", margin, witnesses)
    failing = sorted({w[0] for w in witnesses})
    n = cmap.n
    Mu, Mv = _b2b(n), _b2b(n - 1)
    lookup = dict(nets)
    bez_margin = np.inf
    still = []
    for key in failing:
        bz = Mu @ lookup[key] @ Mv.T
        ok, mg = _bezier_in_Q(bz, bezier_depth, scale, band)
        bez_margin = min(bez_margin, mg)
        if not ok:
            still.append(key)
    # patches that passed stage 1 keep their B-spline margin
    passed_margin = min(
        (_cone_margin(D, scale) for key, D in nets if key not in failing), default=np.inf
    )
    wit = [w for w in witnesses if w[0] in still]
    return ConeResult(not wit, "bezier", float(min(bez_margin, passed_margin)), wit)


def _split(bz: np.ndarray, axis: int):
    """de Casteljau halves of a Bezier net along ``axis``."""
    b = np.moveaxis(np.array(bz, dtype=complex), axis, 0)
    left, right = [b[0]], [b[-1]]
    cur = b
    while len(cur) > 1:
        cur = 0.5 * (cur[:-1] + cur[1:])
        left.append(cur[0])
        right.append(cur[-1])
    L = np.moveaxis(np.array(left), 0, axis)
    R = np.moveaxis(np.array(right[::-1]), 0, axis)
    return L, R


def _bezier_in_Q(bz, depth, scale, tol):
    mg = _cone_margin(bz, scale)
    if in_open_Q(bz, tol * scale).all():
        return True, mg
    if depth == 0:
        return False, mg
    worst = np.inf
    for half in _split(bz, 0):
        for quarter in _split(half, 1):
            ok, m2 = _bezier_in_Q(quarter, depth - 1, scale, tol)
            worst = min(worst, m2)
            if not ok:
                return False, worst
    return True, worst


def jacobian_samples(cmap: CharacteristicMap, per_patch: int = 17) -> np.ndarray:
    """``det(c_u, c_v) = Im(conj(c_u) c_v)`` on a ``per_patch`` grid of every segment-0 patch."""
    s = cmap.s
    ts = np.linspace(0.0, 1.0, per_patch)
    out = []
    for (a, b), P in sorted(cmap.patches[0].items()):
        du = s * (P[1:] - P[:-1])
        dv = s * (P[:, 1:] - P[:, :-1])
        for t in ts:
            du_t = _de_boor(du, t)
            dv_t = _de_boor(dv, t)
            for r in ts:
                cu = complex(_de_boor(du_t, r))
                cv = complex(_de_boor(dv_t, r))
                out.append((np.conj(cu) * cv).imag)
    return np.array(out)


# -- certificate --------------------------------------------------------------


@dataclass
class C1Certificate:
    n: int
    m: int
    checks: dict[str, bool]
    verdict: str
    tolerances: dict[str, float]
    margins: dict[str, float]
    values: dict
    started: str
    finished: str
    elapsed: float

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def to_dict(self, timestamps: bool = True) -> dict:
        doc = {
            "n": self.n,
            "m": self.m,
            "verdict": self.verdict,
            "checks": dict(self.checks),
            "values": dict(self.values),
            "margins": dict(self.margins),
            "tolerances": dict(self.tolerances),
        }
        if timestamps:
            doc["started"] = self.started
            doc["finished"] = self.finished
            doc["elapsed"] = self.elapsed
        return doc

    def to_json(self, timestamps: bool = True) -> str:
        return serialize.dumps(self.to_dict(timestamps))


def _stamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def certify_C1(n: int, m: int, tol: float = 1e-11, max_iter: int = 20000) -> C1Certificate:
    """Numerical check of the C1 criterion for ``M_n`` at valence ``m``.

    ``pass`` needs a simple dominant eigenvalue 1, a real positive
    subdominant eigenvalue of multiplicity ``(2, 2)`` and a passing cone
    test on the characteristic map.  Any margin within ten times its
    tolerance makes the verdict ``inconclusive``.
    """
    from .spectral import CLUSTER_REL, SPECTRUM_TOL, characteristic_mesh, spectral_report

    if n < 2:
        raise MidpointError(f"C1 certification covers n >= 2, got {n}")
    if m < 3:
        raise MidpointError(f"valence must be >= 3, got {m}")
    t0 = time.perf_counter()
    started = _stamp()
    rep = spectral_report(n, m)
    cm = characteristic_mesh(n, m, tol=tol, max_iter=max_iter)
    cmap = extract_spline_ring(cm.net, n)
    cone = cone_test(cmap)
    flags = rep.pass_flags
    checks = {
        "stochastic": flags["stochastic"],
        "dominant_simple": flags["dominant_simple"],
        "subdominant_real_mult2": bool(
            flags["subdominant_real_positive"]
            and flags["subdominant_mult2"]
            and flags["subdominant_is_second"]
            and flags["subdominant_frequencies"]
        ),
        "charmap_regular_injective": cone.passed,
    }
    lam = rep.lambda_sub
    margins = {
        # distance of each numeric decision from its threshold
        "row_sum": SPECTRUM_TOL - rep.diagnostics["row_sum_error"],
        "dominant": rep.diagnostics["gap_below_dominant"],
        "subdominant_gap": rep.diagnostics["gap_below_subdominant"],
        "subdominant_imag": SPECTRUM_TOL - abs(lam.imag),
        "cone": cone.margin,
        "eigen_residual": 10 * tol - cm.residual,
    }
    tolerances = {
        "spectrum": SPECTRUM_TOL,
        "cluster_radius": CLUSTER_REL * max(1.0, abs(lam)),
        "power_iteration": tol,
        "cone": CONE_TOL,
    }
    close = (
        margins["row_sum"] < 10 * 1e-12
        or abs(margins["dominant"]) < 10 * tolerances["cluster_radius"]
        or abs(margins["subdominant_gap"]) < 10 * tolerances["cluster_radius"]
        or abs(margins["cone"]) < 10 * CONE_TOL
        or margins["eigen_residual"] < 0.1 * tol
    )
    if not all(checks.values()):
        verdict = "inconclusive" if close else "fail"
    else:
        verdict = "inconclusive" if close else "pass"
    return C1Certificate(
        n=n,
        m=m,
        checks=checks,
        verdict=verdict,
        tolerances=tolerances,
        margins=margins,
        values={
            "lambda": float(lam.real),
            "mult_alg": rep.mult_alg,
            "mult_geo": rep.mult_geo,
            "iterations": cm.iterations,
            "residual": cm.residual,
            "patches": cmap.patch_count,
            "cone_method": cone.method,
        },
        started=started,
        finished=_stamp(),
        elapsed=time.perf_counter() - t0,
    )
