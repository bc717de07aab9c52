"""Exact stencil composition and the regular-grid masks of M_n."""

from __future__ import annotations

from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Sequence

import numpy as np

from . import serialize
from .errors import DegreeOutOfRange
from .mesh import PolyMesh, Step, build_mesh, midpoint_chain

__all__ = ["compose_exact", "StencilTable", "regular_mask", "regular_grid"]


def compose_exact(
    steps: Sequence[Step], outputs: Iterable[int]
) -> tuple[list[dict[int, int]], int]:
    """Weights of selected final vertices in terms of the initial ones.

    Returns integer numerators per output row and one common denominator,
    so that ``final[o] = sum(num * initial[i]) / denom`` exactly.
    """
    rows = [{int(o): 1} for o in outputs]
    denom = 1
    for step in reversed(steps):
        sizes = {len(s) for s in step.sources}
        scale = lcm(*sizes)
        denom *= scale
        src = step.sources
        new_rows = []
        for row in rows:
            acc: dict[int, int] = {}
            for v, w in row.items():
                s = src[v]
                q = w * (scale // len(s))
                for u in s:
                    acc[u] = acc.get(u, 0) + q
            new_rows.append(acc)
        rows = new_rows
    # common factor cleanup keeps numbers small for printing
    g = denom
    for row in rows:
        for w in row.values():
            g = gcd(g, w)
            if g == 1:
                break
    g = int(g)
    if g > 1:
        rows = [{k: w // g for k, w in row.items()} for row in rows]
        denom //= g
    return rows, denom


class StencilTable(dict):
    """``role -> ((dx, dy), Fraction) pairs``, offsets relative to the role's anchor."""

    def weights(self, role: str) -> dict[tuple[int, int], Fraction]:
        return dict(self[role])

    def to_json(self) -> str:
        doc = []
        for role in sorted(self):
            entries = self[role]
            doc.append(
                {
                    "role": role,
                    "offsets": [list(off) for off, _ in entries],
                    "weights": [f"{w.numerator}/{w.denominator}" for _, w in entries],
                }
            )
        return serialize.dumps(doc).rstrip("\n")


def regular_grid(size: int) -> PolyMesh:
    """Quad grid with ``size x size`` faces and integer vertex positions."""
    verts = [(x, y) for y in range(size + 1) for x in range(size + 1)]
    w = size + 1
    faces = [
        (y * w + x, y * w + x + 1, (y + 1) * w + x + 1, (y + 1) * w + x)
        for y in range(size)
        for x in range(size)
    ]
    return build_mesh(verts, faces, allow_boundary=True)


_ODD_ROLES = {(0, 0): "vertex", (2, 0): "edge-u", (0, 2): "edge-v", (2, 2): "face"}
_EVEN_ROLES = {(1, 1): "corner-00", (3, 1): "corner-10", (1, 3): "corner-01", (3, 3): "corner-11"}


def regular_mask(n: int) -> StencilTable:
    """Exact stencils of M_n on the regular quad grid.

    Output vertices are classified by their position inside the enclosing
    input cell, in quarter units: for odd ``n`` the roles are ``vertex``,
    ``edge-u``, ``edge-v`` and ``face``; for even ``n`` the four
    ``corner-ab`` roles.  Offsets are measured from the input vertex at the
    floor of the output position.
    """
    if n < 1:
        raise DegreeOutOfRange(f"degree must be >= 1, got {n}")
    size = 2 * n + 6
    grid = regular_grid(size)
    final, steps = midpoint_chain(grid, n)
    roles = _ODD_ROLES if n % 2 else _EVEN_ROLES
    mid = size / 2
    best: dict[tuple[int, int], tuple[float, int, tuple[int, int]]] = {}
    for k, p in enumerate(final.vertices):
        q = np.rint(p * 4).astype(int)
        if not np.allclose(q, p * 4, atol=1e-9):
            raise AssertionError("regular grid output off the quarter lattice")
        frac = (int(q[0]) % 4, int(q[1]) % 4)
        anchor = (int(q[0]) // 4, int(q[1]) // 4)
        d = abs(p[0] - mid) + abs(p[1] - mid)
        if frac in roles and (frac not in best or d < best[frac][0]):
            best[frac] = (d, k, anchor)
    rows, denom = compose_exact(steps, [best[fr][1] for fr in roles])
    table = StencilTable()
    w = size + 1
    for (frac, name), row in zip(roles.items(), rows):
        ax, ay = best[frac][2]
        entries = []
        for idx, num in row.items():
            x, y = idx % w, idx // w
            entries.append(((x - ax, y - ay), Fraction(num, denom)))
        entries.sort(key=lambda e: (e[0][1], e[0][0]))
        table[name] = tuple(entries)
    return table
