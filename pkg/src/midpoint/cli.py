"""Command line front end: ``midpoint subdivide | certify | analyze | mask``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import serialize
from .errors import MeshError, MidpointError, ParseError, ParityMismatch

log = logging.getLogger("midpoint")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {
    "degree": None,
    "valence": None,
    "kind": None,
    "iterations": 1,
    "rings": None,
    "tol": 1e-11,
    "max_iter": 20000,
    "jobs": 1,
    "input": None,
    "output": None,
    "format": None,
    "timestamps": False,
}


class UsageError(MidpointError):
    pass


@dataclass
class RunConfig:
    command: str
    degrees: list[int] = field(default_factory=list)
    valences: list[int] = field(default_factory=list)
    kind: str | None = None
    iterations: int = 1
    rings: int | None = None
    tol: float = 1e-11
    max_iter: int = 20000
    jobs: int = 1
    input: str | None = None
    output: str | None = None
    formats: tuple[str, ...] = ()
    timestamps: bool = False


def parse_range(text) -> list[int]:
    """``"3"``, ``"2..5"``, ``"2-5"`` or ``"2,3,7"`` (mixed forms allowed)."""
    if isinstance(text, int):
        return [text]
    if isinstance(text, list):
        return [int(x) for x in text]
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        for sep in ("..", "-"):
            if sep in part[1:]:
                lo, hi = part.split(sep, 1) if sep == ".." else part.rsplit("-", 1)
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise UsageError(f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
                break
        else:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty range {text!r}")
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="midpoint", description="Midpoint subdivision kernel and C1 analysis.")
    p.add_argument("--config", help="JSON file with default option values")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--degree", "-n", help="degree n, or a range such as 2..5")
        sp.add_argument("--output", "-o", help="output file (subdivide) or directory")
        sp.add_argument("--format", help="comma list of output formats: obj, json, csv")
        sp.add_argument("--config", default=argparse.SUPPRESS, help=argparse.SUPPRESS)

    s = sub.add_parser("subdivide", help="apply M_n k times to an OBJ/OFF mesh")
    common(s)
    s.add_argument("--input", "-i", help="input mesh (.obj or .off)")
    s.add_argument("--iterations", "-k", type=int)

    for name, text in (("certify", "C1 certificates over an (n, m) grid"), ("analyze", "spectral reports")):
        c = sub.add_parser(name, help=text)
        common(c)
        c.add_argument("--valence", "-m", help="valence m, or a range such as 3,5..7")
        c.add_argument("--kind", choices=("primal", "dual"))
        c.add_argument("--rings", type=int, help="ring count of the extra j-net check (analyze)")
        c.add_argument("--tol", type=float)
        c.add_argument("--max-iter", dest="max_iter", type=int)
        c.add_argument("--jobs", type=int)
        c.add_argument("--timestamps", action="store_true", default=None, help="record wall-clock times")

    k = sub.add_parser("mask", help="exact regular-grid stencils as JSON")
    common(k)
    return p


def build_config(argv) -> RunConfig:
    """Flags override the JSON config file, which overrides the defaults."""
    args = _parser().parse_args(argv)
    merged = dict(DEFAULTS)
    if args.config:
        try:
            doc = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise UsageError("config file must hold a JSON object")
        unknown = set(doc) - set(DEFAULTS)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(sorted(unknown))}")
        merged.update(doc)
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            merged[key] = val
    cmd = args.command
    if merged["degree"] is None:
        raise UsageError("--degree is required")
    degrees = parse_range(merged["degree"])
    valences = []
    if cmd in ("certify", "analyze"):
        if merged["valence"] is None:
            raise UsageError("--valence is required")
        valences = parse_range(merged["valence"])
    if cmd == "subdivide":
        if not merged["input"]:
            raise UsageError("--input is required")
        if len(degrees) != 1:
            raise UsageError("subdivide takes a single degree")
        if int(merged["iterations"]) < 1:
            raise UsageError("--iterations must be >= 1")
    if merged["kind"] is not None:
        want = merged["kind"]
        for n in degrees:
            if n >= 1 and ("primal" if n % 2 else "dual") != want:
                raise ParityMismatch(f"degree {n} gives {'primal' if n % 2 else 'dual'} nets, not {want}")
    fmt = merged["format"]
    formats = tuple(x.strip() for x in fmt.split(",")) if isinstance(fmt, str) else tuple(fmt or ())
    bad = set(formats) - {"obj", "json", "csv"}
    if bad:
        raise UsageError(f"unknown format(s): {', '.join(sorted(bad))}")
    if int(merged["jobs"]) < 1:
        raise UsageError("--jobs must be >= 1")
    return RunConfig(
        command=cmd,
        degrees=degrees,
        valences=valences,
        kind=merged["kind"],
        iterations=int(merged["iterations"]),
        rings=merged["rings"],
        tol=float(merged["tol"]),
        max_iter=int(merged["max_iter"]),
        jobs=int(merged["jobs"]),
        input=merged["input"],
        output=merged["output"],
        formats=formats,
        timestamps=bool(merged["timestamps"]),
    )


# -- commands -----------------------------------------------------------------


def cmd_subdivide(cfg: RunConfig) -> int:
    from .mesh import midpoint_Mn
    from .meshio import format_obj, read_mesh

    if cfg.formats and cfg.formats != ("obj",):
        raise UsageError("subdivide writes OBJ only")
    n = cfg.degrees[0]
    mesh = read_mesh(cfg.input)
    ev, ef = mesh.extraordinary_counts()
    log.info("step 0: %d vertices, %d faces, %d extraordinary vertices, %d extraordinary faces",
             mesh.n_vertices, mesh.n_faces, ev, ef)
    for k in range(1, cfg.iterations + 1):
        mesh = midpoint_Mn(mesh, n)
        ev, ef = mesh.extraordinary_counts()
        log.info("step %d: %d vertices, %d faces, %d extraordinary vertices, %d extraordinary faces",
                 k, mesh.n_vertices, mesh.n_faces, ev, ef)
    text = format_obj(mesh)
    if cfg.output:
        Path(cfg.output).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _certify_case(args):
    n, m, tol, max_iter, timestamps = args
    from .charmap import certify_C1

    if n < 2 or m < 3:
        return {"n": n, "m": m, "verdict": "rejected",
                "reason": f"outside the certified scope (n >= 2, m >= 3)"}, None
    cert = certify_C1(n, m, tol=tol, max_iter=max_iter)
    row = {"n": n, "m": m, "lambda": cert.values["lambda"], "mult_alg": cert.values["mult_alg"],
           "mult_geo": cert.values["mult_geo"], "verdict": cert.verdict}
    return row, cert.to_json(timestamps=timestamps)


def _run_cases(fn, cases, jobs):
    if jobs <= 1 or len(cases) <= 1:
        return [fn(c) for c in cases]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, cases))


def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.output or ".")
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_certify(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    formats = cfg.formats or ("json", "csv")
    cases = [(n, m, cfg.tol, cfg.max_iter, cfg.timestamps) for n in cfg.degrees for m in cfg.valences]
    results = _run_cases(_certify_case, cases, cfg.jobs)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "m", "lambda", "mult_alg", "mult_geo", "verdict"])
    status = EXIT_OK
    for row, text in results:
        n, m = row["n"], row["m"]
        if text is not None and "json" in formats:
            (out / f"certificate_n{n}_m{m}.json").write_text(text)
        lam = serialize.fmt(row["lambda"]) if "lambda" in row else ""
        w.writerow([n, m, lam, row.get("mult_alg", ""), row.get("mult_geo", ""), row["verdict"]])
        log.info("n=%d m=%d: %s", n, m, row["verdict"])
        if row["verdict"] != "pass":
            status = EXIT_FAIL
    if "csv" in formats:
        (out / "summary.csv").write_text(buf.getvalue())
    sys.stdout.write(buf.getvalue())
    return status


def _analyze_case(args):
    n, m, kind, rings, tol, max_iter = args
    from .ringnet import omega
    from .spectral import assemble_matrix, characteristic_mesh, spectral_report

    rep = spectral_report(n, m)
    doc = rep.to_dict()
    if rings is not None:
        j = rings - 1
        if j < omega(n) + 1:
            raise UsageError(f"--rings must be >= {omega(n) + 2} for degree {n}")
        import numpy as np

        ev = np.linalg.eigvals(assemble_matrix(n, m, kind, j).entries)
        mods = np.sort(np.abs(ev))[::-1]
        doc["j_net"] = {"j": j, "subdominant": float(mods[1])}
    cm = characteristic_mesh(n, m, tol=tol, max_iter=max_iter)
    doc["characteristic"] = {"lambda": cm.lam, "iterations": cm.iterations, "residual": cm.residual}
    return n, m, serialize.dumps(doc), rep.to_csv(), serialize.dumps(cm.net.to_dict()), rep.passed


def cmd_analyze(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    formats = cfg.formats or ("json", "csv")
    bad = [(n, m) for n in cfg.degrees for m in cfg.valences if n < 2 or m < 3]
    if bad:
        raise UsageError(f"analysis needs n >= 2 and m >= 3, got {bad}")
    cases = [(n, m, cfg.kind, cfg.rings, cfg.tol, cfg.max_iter) for n in cfg.degrees for m in cfg.valences]
    status = EXIT_OK
    for n, m, report, eig_csv, net_json, ok in _run_cases(_analyze_case, cases, cfg.jobs):
        if "json" in formats:
            (out / f"spectral_n{n}_m{m}.json").write_text(report)
            (out / f"charmesh_n{n}_m{m}.json").write_text(net_json)
        if "csv" in formats:
            (out / f"eigenvalues_n{n}_m{m}.csv").write_text(eig_csv)
        log.info("n=%d m=%d: %s", n, m, "pass" if ok else "fail")
        print(f"n={n} m={m} {'pass' if ok else 'fail'}")
        if not ok:
            status = EXIT_FAIL
    return status


def cmd_mask(cfg: RunConfig) -> int:
    from .stencil import regular_mask

    for n in cfg.degrees:
        text = regular_mask(n).to_json() + "\n"
        if cfg.output:
            Path(cfg.output).mkdir(parents=True, exist_ok=True)
            (Path(cfg.output) / f"mask_n{n}.json").write_text(text)
        else:
            sys.stdout.write(text)
    return EXIT_OK


COMMANDS = {"subdivide": cmd_subdivide, "certify": cmd_certify, "analyze": cmd_analyze, "mask": cmd_mask}


def main(argv=None) -> int:
    level = os.environ.get("MIDPOINT_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), format="%(levelname)s %(message)s")
    try:
        cfg = build_config(argv)
    except SystemExit as exc:  # argparse
        return int(exc.code or 0)
    except (UsageError, ParityMismatch, ValueError) as exc:
        print(f"midpoint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[cfg.command](cfg)
    except (UsageError, ParseError, MeshError, OSError) as exc:
        print(f"midpoint: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MidpointError as exc:
        print(f"midpoint: failed: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
