"""OBJ and OFF reading, OBJ writing."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ParseError
from .mesh import PolyMesh, build_mesh

__all__ = ["read_obj", "read_off", "read_mesh", "write_obj", "parse_obj", "parse_off", "format_obj"]


def _floats(parts, line, what):
    try:
        return [float(x) for x in parts]
    except ValueError:
        raise ParseError(f"bad {what} coordinate in {' '.join(parts)!r}", line) from None


def parse_obj(text: str, allow_boundary: bool = False) -> PolyMesh:
    """Vertices (``v``) and faces (``f``) of an OBJ file; other records are ignored.

    Face entries may be ``v``, ``v/vt``, ``v//vn`` or ``v/vt/vn``; negative
    indices count from the end as usual.
    """
    verts: list[list[float]] = []
    faces: list[tuple[int, ...]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        head, *rest = line.split()
        if head == "v":
            if len(rest) < 3:
                raise ParseError("vertex needs three coordinates", lineno)
            verts.append(_floats(rest[:3], lineno, "vertex"))
        elif head == "f":
            if len(rest) < 3:
                raise ParseError("face needs at least three vertices", lineno)
            face = []
            for tok in rest:
                ref = tok.split("/", 1)[0]
                try:
                    k = int(ref)
                except ValueError:
                    raise ParseError(f"bad face index {tok!r}", lineno) from None
                if k == 0:
                    raise ParseError("face index 0 is not allowed", lineno)
                k = k - 1 if k > 0 else len(verts) + k
                if not 0 <= k < len(verts):
                    raise ParseError(f"face index {tok} out of range", lineno)
                face.append(k)
            faces.append(tuple(face))
    if not verts:
        raise ParseError("no vertices", None)
    return build_mesh(np.array(verts), faces, allow_boundary)


def parse_off(text: str, allow_boundary: bool = False) -> PolyMesh:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            rows.append((lineno, line.split()))
    if not rows:
        raise ParseError("empty OFF file", None)
    lineno, first = rows[0]
    if first[0] != "OFF":
        raise ParseError("missing OFF header", lineno)
    first = first[1:]
    pos = 1
    if not first:
        if len(rows) < 2:
            raise ParseError("missing element counts", lineno)
        lineno, first = rows[1]
        pos = 2
    try:
        nv, nf = int(first[0]), int(first[1])
    except (ValueError, IndexError):
        raise ParseError("bad element counts", lineno) from None
    if len(rows) < pos + nv + nf:
        raise ParseError(f"expected {nv} vertices and {nf} faces", rows[-1][0])
    verts = []
    for lineno, parts in rows[pos : pos + nv]:
        if len(parts) < 3:
            raise ParseError("vertex needs three coordinates", lineno)
        verts.append(_floats(parts[:3], lineno, "vertex"))
    faces = []
    for lineno, parts in rows[pos + nv : pos + nv + nf]:
        try:
            k = int(parts[0])
            idx = [int(x) for x in parts[1 : 1 + k]]
        except (ValueError, IndexError):
            raise ParseError("bad face record", lineno) from None
        if k < 3 or len(idx) != k:
            raise ParseError("face needs at least three vertices", lineno)
        if any(not 0 <= v < nv for v in idx):
            raise ParseError("face index out of range", lineno)
        faces.append(tuple(idx))
    return build_mesh(np.array(verts), faces, allow_boundary)


def read_obj(path, allow_boundary: bool = False) -> PolyMesh:
    return parse_obj(Path(path).read_text(), allow_boundary)


def read_off(path, allow_boundary: bool = False) -> PolyMesh:
    return parse_off(Path(path).read_text(), allow_boundary)


def read_mesh(path, allow_boundary: bool = False) -> PolyMesh:
    """Dispatch on the file suffix (``.obj`` or ``.off``)."""
    suffix = Path(path).suffix.lower()
    if suffix == ".off":
        return read_off(path, allow_boundary)
    if suffix == ".obj":
        return read_obj(path, allow_boundary)
    raise ParseError(f"unknown mesh format {suffix!r}", None)


def format_obj(mesh: PolyMesh) -> str:
    v = mesh.vertices
    if v.shape[1] < 3:
        v = np.column_stack([v, np.zeros((len(v), 3 - v.shape[1]))])
    lines = [f"v {x:.15e} {y:.15e} {z:.15e}" for x, y, z in v[:, :3]]
    lines += ["f " + " ".join(str(i + 1) for i in f) for f in mesh.faces]
    return "\n".join(lines) + "\n"


def write_obj(mesh: PolyMesh, path) -> None:
    Path(path).write_text(format_obj(mesh))
