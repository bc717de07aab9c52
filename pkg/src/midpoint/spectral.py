"""Subdivision matrices on ringnets and their spectral structure."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import serialize
from .errors import (
    ConvergenceFailure,
    IllConditioned,
    MidpointError,
    NoConvergence,
    OrbitMismatch,
    OrderingViolation,
    PositivityViolation,
    TooFewRings,
)
from .ringnet import (
    PRIMAL,
    Ringnet,
    _check_parity,
    _check_valence,
    _subdivision_plan,
    default_pad,
    frame_K,
    half_segment,
    kind_for_degree,
    label_index,
    make_grid_mesh,
    max_norm,
    net_labels,
    omega,
    rho,
    ring_slices,
    symmetry_check,
)
from .stencil import compose_exact

__all__ = [
    "SubdivisionMatrix",
    "BlockPartition",
    "FrequencyBlocks",
    "CharacteristicMesh",
    "Multiplicity",
    "SpectralReport",
    "assemble_matrix",
    "block_partition",
    "block_norm_bounds",
    "frequency_blocks",
    "dominant_pair_per_frequency",
    "characteristic_mesh",
    "multiplicity",
    "spectral_report",
]

ROW_SUM_TOL = 1e-12
UPPER_BLOCK_TOL = 1e-14
SPECTRUM_TOL = 1e-9
CLUSTER_REL = 1e-6
NULLSPACE_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class SubdivisionMatrix:
    """M_n restricted to ``j``-nets, rows/columns in ringnet storage order.

    ``numerators[r]`` maps column -> integer numerator; every entry equals
    ``numerator / denominator`` exactly and ``entries`` holds the rounded
    floats.
    """

    n: int
    m: int
    kind: str
    j: int
    entries: np.ndarray
    numerators: tuple[dict[int, int], ...] = field(repr=False)
    denominator: int

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    @property
    def labels(self) -> tuple[tuple[int, int, int], ...]:
        return net_labels(self.m, self.kind, self.j)

    @property
    def omega(self) -> int:
        return omega(self.n)

    def exact(self, r: int, c: int) -> Fraction:
        return Fraction(self.numerators[r].get(c, 0), self.denominator)

    def exact_row_sums(self) -> list[Fraction]:
        return [Fraction(sum(row.values()), self.denominator) for row in self.numerators]

    def apply(self, net: Ringnet) -> Ringnet:
        if (net.m, net.kind, net.j) != (self.m, self.kind, self.j):
            raise MidpointError("net topology does not match the matrix")
        return net.with_points(self.entries @ net.points)

    @cached_property
    def partition(self) -> dict[str, np.ndarray]:
        """Index groups ``core``, ``b``, ``c`` and ``outer`` (rings ``omega+2..j``)."""
        w = self.omega
        sl = ring_slices(self.m, self.kind, self.j)
        core = np.arange(0, sl[w].stop)
        if self.j < w + 1:
            empty = np.array([], dtype=int)
            return {"core": core, "b": empty, "c": empty, "outer": empty}
        corner = w + 1 if self.kind == PRIMAL else w + 2
        ring = range(sl[w + 1].start, sl[w + 1].stop)
        labs = self.labels
        c = np.array([k for k in ring if labs[k][1:] == (corner, corner)], dtype=int)
        b = np.array([k for k in ring if labs[k][1:] != (corner, corner)], dtype=int)
        outer = np.arange(sl[w + 1].stop, self.size)
        return {"core": core, "b": b, "c": c, "outer": outer}

    def outer_rings(self) -> list[np.ndarray]:
        sl = ring_slices(self.m, self.kind, self.j)
        return [np.arange(sl[r].start, sl[r].stop) for r in range(self.omega + 2, self.j + 1)]


@lru_cache(maxsize=32)
def assemble_matrix(n: int, m: int, kind: str | None = None, j: int | None = None) -> SubdivisionMatrix:
    """Exact matrix of M_n on ``j``-nets (``j = rho(n)`` by default).

    Column ``k`` is the subdivided unit net ``e_k``.  Rows are composed in
    exact integer arithmetic through the padded-mesh steps; any weight on a
    padding vertex would contradict the band structure and raises.
    """
    _check_valence(m)
    kind = kind or kind_for_degree(n)
    _check_parity(n, kind)
    j = rho(n) if j is None else j
    if j < omega(n):
        raise TooFewRings(f"degree {n} needs at least {omega(n)} rings, got {j}")
    _, steps, out = _subdivision_plan(m, kind, j, n, default_pad(n))
    rows, denom = compose_exact(steps, out)
    size = len(out)
    entries = np.zeros((size, size))
    for r, row in enumerate(rows):
        for c, w in row.items():
            if c >= size:
                raise MidpointError(f"row {r} depends on padding vertex {c}")
            entries[r, c] = w / denom
    entries.setflags(write=False)
    return SubdivisionMatrix(n, m, kind, j, entries, tuple(rows), denom)


# -- block structure ----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class BlockPartition:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    order: np.ndarray
    groups: tuple[np.ndarray, ...]
    max_upper: float
    note: str = "eigenvalues of S are those of A, B and C together with zeros"


def _groups(S: SubdivisionMatrix):
    p = S.partition
    return (p["core"], p["b"], p["c"], *S.outer_rings())


def block_partition(S: SubdivisionMatrix, tol: float = UPPER_BLOCK_TOL) -> BlockPartition:
    """Reorder to ``[core | b | c | outer rings]`` and check lower block-triangularity."""
    if S.j < S.omega + 1:
        raise TooFewRings("block partition needs j >= omega + 1")
    groups = _groups(S)
    E = S.entries
    worst = 0.0
    for r, gr in enumerate(groups):
        for c in range(r + 1, len(groups)):
            worst = max(worst, float(np.abs(E[np.ix_(gr, groups[c])]).max(initial=0.0)))
    for g in groups[3:]:
        worst = max(worst, float(np.abs(E[np.ix_(g, g)]).max(initial=0.0)))
    if worst > tol:
        raise OrderingViolation(f"entry {worst:.3e} above the block diagonal")
    core, b, c = groups[:3]
    return BlockPartition(
        A=E[np.ix_(core, core)],
        B=E[np.ix_(b, b)],
        C=E[np.ix_(c, c)],
        order=np.concatenate(groups),
        groups=groups,
        max_upper=worst,
    )


def block_norm_bounds(S: SubdivisionMatrix) -> dict:
    """Infinity norms of B and C against ``2^-n`` and ``4^-n``, exactly and in floats."""
    block_partition(S)
    p = S.partition

    def exact_norm(idx):
        cols = set(int(i) for i in idx)
        best = Fraction(0)
        for r in idx:
            row = S.numerators[int(r)]
            best = max(best, Fraction(sum(w for c, w in row.items() if c in cols), S.denominator))
        return best

    nb, nc = exact_norm(p["b"]), exact_norm(p["c"])
    bound_b, bound_c = Fraction(1, 2 ** S.n), Fraction(1, 4 ** S.n)
    fb = float(np.abs(S.entries[np.ix_(p["b"], p["b"])]).sum(axis=1).max(initial=0.0))
    fc = float(np.abs(S.entries[np.ix_(p["c"], p["c"])]).sum(axis=1).max(initial=0.0))
    return {
        "normB": fb,
        "normC": fc,
        "normB_exact": nb,
        "normC_exact": nc,
        "pass": nb <= bound_b and nc <= bound_c and fb <= 2.0 ** -S.n + 1e-12 and fc <= 4.0 ** -S.n + 1e-12,
    }


# -- frequency decomposition --------------------------------------------------


class FrequencyBlocks(list):
    """``blocks[f]`` is M_n acting on frequency-``f`` rotation-symmetric nets.

    A frequency-``f`` net has ``p^l = zeta^(l f) p^0`` on every orbit; the
    block works on the segment-0 values, plus the centre for ``f = 0``.
    """

    def __init__(self, blocks, S: SubdivisionMatrix, orbits, center):
        super().__init__(blocks)
        self.S = S
        self.orbits = orbits
        self.center = center

    def expand(self, f: int, x) -> Ringnet:
        """Full ringnet of the frequency-``f`` block vector ``x``."""
        S = self.S
        x = np.asarray(x, dtype=complex)
        pts = np.zeros(S.size, dtype=complex)
        zeta = np.exp(2j * np.pi * f * np.arange(S.m) / S.m)
        off = 0
        if self.center is not None and f == 0:
            pts[self.center] = x[0]
            off = 1
        for k, orbit in enumerate(self.orbits):
            pts[orbit] = zeta * x[off + k]
        return Ringnet(S.m, S.kind, S.j, pts, f)


def frequency_blocks(S: SubdivisionMatrix) -> FrequencyBlocks:
    """Similarity transform of ``S`` by the discrete Fourier basis over segments."""
    m = S.m
    groups: dict[tuple[int, int], list[tuple[int, int]]] = {}
    center = None
    for k, (l, a, b) in enumerate(S.labels):
        if S.kind == PRIMAL and (a, b) == (0, 0):
            center = k
            continue
        groups.setdefault((a, b), []).append((l, k))
    orbits = []
    for key in sorted(groups, key=lambda ab: label_index(S.m, S.kind, S.j)[(0, *ab)]):
        members = sorted(groups[key])
        if [l for l, _ in members] != list(range(m)):
            raise OrbitMismatch(f"orbit {key} is not a full segment orbit")
        orbits.append(np.array([k for _, k in members], dtype=int))
    E = S.entries
    first = np.array([o[0] for o in orbits], dtype=int)
    cols = np.stack(orbits, axis=1)  # (m, n_orbits)
    blocks = []
    for f in range(m):
        zeta = np.exp(2j * np.pi * f * np.arange(m) / m)
        core = np.einsum("l,rlb->rb", zeta, E[first][:, cols])
        if f == 0 and center is not None:
            blk = np.zeros((len(orbits) + 1, len(orbits) + 1), dtype=complex)
            blk[0, 0] = E[center, center]
            blk[0, 1:] = E[center][cols].sum(axis=0)
            blk[1:, 0] = E[first, center]
            blk[1:, 1:] = core
            core = blk
        blocks.append(core)
    return FrequencyBlocks(blocks, S, tuple(orbits), center)


def _align_reflection(net: Ringnet) -> Ringnet:
    """Multiply by a unit complex number so the net is reflection symmetric if it can be."""
    from .ringnet import _symmetry_perms

    _, ref = _symmetry_perms(net.m, net.kind, net.j)
    p = net.points
    # want conj(c p) = c p[ref]  <=>  c^2 = conj(p) . conj(p[ref]) / |.|
    s = np.vdot(p[ref], np.conj(p))
    if abs(s) < 1e-300:
        return net
    c = np.sqrt(s / abs(s))
    return net.with_points(p * c)


def dominant_pair_per_frequency(blocks: FrequencyBlocks, f: int) -> tuple[complex, Ringnet]:
    """Largest-modulus eigenvalue of block ``f`` and its eigennet.

    The eigennet is rotated to be reflection symmetric where possible and
    scaled to unit MAX norm with a positive first half-segment vertex.
    """
    blk = blocks[f]
    try:
        vals, vecs = np.linalg.eig(blk)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"eigendecomposition of block {f} failed: {exc}") from exc
    k = int(np.argmax(np.abs(vals)))
    lam = complex(vals[k])
    net = _align_reflection(blocks.expand(f, vecs[:, k]))
    S = blocks.S
    if not symmetry_check(net, f, tol=1e-8)["reflection"]:
        # repeated eigenvalue: pick the symmetric member of the eigenspace
        project = _symmetrizer(S.m, S.kind, S.j, f)
        cands = [project(net.points), project(1j * net.points)]
        net = net.with_points(max(cands, key=lambda x: np.abs(x).max()))
    if 0 < f < S.m:
        fr = frame_K(2 * np.pi * f / S.m)
        nrm = max_norm(net, fr)
        if nrm > 0:
            net = net.with_points(net.points / nrm)
        h = fr.coords(half_segment(net))
        if h.sum() < 0:
            net = net.with_points(-net.points)
    else:
        net = net.with_points(net.points / np.abs(net.points).max())
        if net.points[np.argmax(np.abs(net.points))].real < 0:
            net = net.with_points(-net.points)
    return lam, net


# -- characteristic mesh ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class CharacteristicMesh:
    net: Ringnet
    lam: float
    iterations: int
    residual: float
    last_step: float

    def __iter__(self):
        # allows ``net, lam = characteristic_mesh(...)``
        return iter((self.net, self.lam))


def _symmetrizer(m: int, kind: str, j: int, f: int):
    """Orthogonal projector onto frequency-``f`` reflection-symmetric nets.

    Exact iterates already lie in that subspace; re-projecting removes
    rounding noise in other frequencies, which power iteration would
    otherwise amplify by ``1/lambda`` per step.
    """
    from .ringnet import _symmetry_perms

    rot, ref = _symmetry_perms(m, kind, j)
    zeta = np.exp(-2j * np.pi * f / m)
    perms = [np.arange(len(rot))]
    for _ in range(m - 1):
        perms.append(rot[perms[-1]])
    weights = zeta ** np.arange(m)

    def project(x):
        y = sum(w * x[p] for w, p in zip(weights, perms)) / m
        return 0.5 * (y + np.conj(y[ref]))

    return project


def characteristic_mesh(n: int, m: int, tol: float = 1e-11, max_iter: int = 20000) -> CharacteristicMesh:
    """Normalized power iteration of the frequency-1 grid mesh on ``rho``-nets."""
    if n < 2:
        raise MidpointError("the characteristic mesh is defined for n >= 2")
    _check_valence(m)
    S = assemble_matrix(n, m)
    frame = frame_K(2 * np.pi / m)
    net = make_grid_mesh(m, 1, S.kind, S.j + 1)
    x = net.points / max_norm(net, frame)
    E = S.entries
    project = _symmetrizer(m, S.kind, S.j, 1)
    step = np.inf
    for it in range(1, max_iter + 1):
        y = project(E @ x)
        y = y / max_norm(net.with_points(y), frame)
        step = float(np.abs(y - x).max())
        x = y
        if step < tol:
            break
    else:
        raise NoConvergence(f"no convergence after {max_iter} iterations (last step {step:.3e})")
    limit = net.with_points(x)
    sx = E @ x
    lam = max_norm(net.with_points(sx), frame)
    residual = float(np.abs(sx - lam * x).max())
    h = frame.coords(half_segment(limit))
    if not (h > 0).all():
        raise PositivityViolation(f"characteristic mesh not positive in K (min {h.min():.3e})")
    if residual >= 10 * tol:
        raise ConvergenceFailure(f"eigen-residual {residual:.3e} exceeds {10 * tol:.1e}")
    return CharacteristicMesh(limit, lam, it, residual, step)


# -- multiplicities -----------------------------------------------------------


@dataclass(frozen=True)
class Multiplicity:
    algebraic: int
    geometric: int
    radius: float


def multiplicity(
    S: SubdivisionMatrix | np.ndarray,
    lam: complex,
    tol: float = NULLSPACE_TOL,
    eigenvalues: np.ndarray | None = None,
) -> Multiplicity:
    """Algebraic (eigenvalue cluster) and geometric (null space) multiplicity of ``lam``.

    Raises :class:`IllConditioned` when eigenvalues sit just outside the
    cluster radius, i.e. when the count would depend on the radius chosen.
    """
    E = S.entries if isinstance(S, SubdivisionMatrix) else np.asarray(S)
    if eigenvalues is None:
        eigenvalues = np.linalg.eigvals(E)
    radius = CLUSTER_REL * max(1.0, abs(lam))
    dist = np.abs(eigenvalues - lam)
    alg = int((dist <= radius).sum())
    near = int(((dist > radius) & (dist <= 100 * radius)).sum())
    if near:
        raise IllConditioned(
            f"{near} eigenvalue(s) within {100 * radius:.1e} of {lam} but outside the cluster radius"
        )
    sv = np.linalg.svd(E - lam * np.eye(E.shape[0]), compute_uv=False)
    geo = int((sv < tol * np.linalg.norm(E, 2)).sum())
    return Multiplicity(alg, geo, radius)


def match_spectra(a, b) -> float:
    """Largest distance in an optimal one-to-one matching of two eigenvalue multisets."""
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if len(a) != len(b):
        return np.inf
    cost = np.abs(a[:, None] - b[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max(initial=0.0))


# -- report -------------------------------------------------------------------


@dataclass
class FrequencyEntry:
    f: int
    eigenvalues: np.ndarray
    dominant: complex


@dataclass
class SpectralReport:
    n: int
    m: int
    j: int
    kind: str
    frequencies: list[FrequencyEntry]
    dominant: complex
    dominant_mult: Multiplicity
    lambda_sub: complex
    mult_alg: int
    mult_geo: int
    sub_frequencies: tuple[int, ...]
    normB: float
    normC: float
    pass_flags: dict[str, bool]
    diagnostics: dict[str, float]

    @property
    def passed(self) -> bool:
        return all(self.pass_flags.values())

    def lambda_hat(self, f: int) -> complex:
        return self.frequencies[f].dominant

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "m": self.m,
            "j": self.j,
            "kind": self.kind,
            "frequencies": [
                {
                    "f": e.f,
                    "dominant": [e.dominant.real, e.dominant.imag],
                    "eigenvalues": [[complex(z).real, complex(z).imag] for z in e.eigenvalues],
                }
                for e in self.frequencies
            ],
            "lambda_sub": float(self.lambda_sub.real),
            "mult_alg": self.mult_alg,
            "mult_geo": self.mult_geo,
            "normB": self.normB,
            "normC": self.normC,
            "pass_flags": dict(self.pass_flags),
            "diagnostics": dict(self.diagnostics),
        }

    def to_json(self) -> str:
        return serialize.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["f", "k", "re", "im", "abs"])
        for e in self.frequencies:
            for k, z in enumerate(e.eigenvalues):
                z = complex(z)
                w.writerow([e.f, k, serialize.fmt(z.real), serialize.fmt(z.imag), serialize.fmt(abs(z))])
        return buf.getvalue()


def _sorted_by_modulus(vals):
    vals = np.asarray(vals, dtype=complex)
    # modulus first, then real part, so conjugate pairs stay in a fixed order
    order = np.lexsort((-vals.imag, -vals.real, -np.round(np.abs(vals), 12)))
    return vals[order]


def spectral_report(n: int, m: int) -> SpectralReport:
    """Everything the C1 analysis needs from the subdivision matrix on ``rho``-nets."""
    if n < 2:
        raise MidpointError("spectral report requires n >= 2")
    _check_valence(m)
    S = assemble_matrix(n, m)
    E = S.entries
    eig = np.linalg.eigvals(E)
    blocks = frequency_blocks(S)
    entries = []
    block_eigs = []
    for f, blk in enumerate(blocks):
        ev = _sorted_by_modulus(np.linalg.eigvals(blk))
        block_eigs.append(ev)
        lam_f, _ = dominant_pair_per_frequency(blocks, f)
        entries.append(FrequencyEntry(f, ev, lam_f))
    union_err = match_spectra(np.concatenate(block_eigs), eig)

    mods = np.sort(np.abs(eig))[::-1]
    dominant = complex(eig[np.argmax(np.abs(eig))])
    dom_mult = multiplicity(S, 1.0, eigenvalues=eig)
    lam = entries[1].dominant
    sub_mult = multiplicity(S, lam, eigenvalues=eig)
    radius = sub_mult.radius
    # frequencies whose dominant eigenvalue is the subdominant one
    sub_freqs = tuple(
        f for f in range(1, m) if abs(entries[f].dominant - lam) <= radius
    )
    # largest modulus below lambda: next eigenvalue in the spectrum
    rest = mods[(mods < abs(lam) - radius)]
    below = float(rest[0]) if len(rest) else 0.0
    second = float(mods[dom_mult.algebraic]) if len(mods) > 1 else 0.0
    bounds = block_norm_bounds(S)
    hats = [entries[f].dominant.real for f in range(1, m // 2 + 1)]
    monotone = all(a - b > SPECTRUM_TOL for a, b in zip(hats, hats[1:]))
    half_turn_ok = True
    for f in range(1, m // 2 + 1):
        if 2 * f < m and not hats[f - 1] - 0.25 > SPECTRUM_TOL:
            half_turn_ok = False
        if 2 * f == m and abs(hats[f - 1] - 0.25) > SPECTRUM_TOL:
            half_turn_ok = False
    row_err = float(np.abs(E.sum(axis=1) - 1).max())
    S2 = E @ E
    flags = {
        "stochastic": bool(
            row_err <= ROW_SUM_TOL
            and all(sum(r.values()) == S.denominator for r in S.numerators)
            and (E >= 0).all()
        ),
        "positive_column": bool((S2 > 0).all(axis=0).any()),
        "dominant_simple": bool(
            abs(dominant - 1) <= SPECTRUM_TOL and (dom_mult.algebraic, dom_mult.geometric) == (1, 1)
        ),
        "subdominant_real_positive": bool(abs(lam.imag) < SPECTRUM_TOL and lam.real > 0),
        "subdominant_mult2": (sub_mult.algebraic, sub_mult.geometric) == (2, 2),
        "subdominant_is_second": bool(abs(second - abs(lam)) <= radius),
        "subdominant_frequencies": sub_freqs == (1, m - 1),
        "lambda_range": bool(
            abs(lam.real - 0.5) <= SPECTRUM_TOL if m == 4 else 0.25 < lam.real < 1
        ),
        "monotone": bool(monotone and half_turn_ok),
        "block_bounds": bool(bounds["pass"]),
        "spectrum_union": bool(union_err <= SPECTRUM_TOL),
    }
    diagnostics = {
        "row_sum_error": row_err,
        "spectrum_union_error": union_err,
        "cluster_radius": radius,
        "gap_below_subdominant": abs(lam) - below,
        "gap_below_dominant": 1.0 - second,
        "normB_bound": 2.0 ** -n,
        "normC_bound": 4.0 ** -n,
    }
    return SpectralReport(
        n=n,
        m=m,
        j=S.j,
        kind=S.kind,
        frequencies=entries,
        dominant=dominant,
        dominant_mult=dom_mult,
        lambda_sub=lam,
        mult_alg=sub_mult.algebraic,
        mult_geo=sub_mult.geometric,
        sub_frequencies=sub_freqs,
        normB=bounds["normB"],
        normC=bounds["normC"],
        pass_flags=flags,
        diagnostics=diagnostics,
    )
