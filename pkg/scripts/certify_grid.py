"""Certify the C1 conditions over a (degree, valence) grid and print a table.

    python scripts/certify_grid.py --degrees 2..9 --valences 3,5,6,7 --jobs 4

Writes one row per case: lambda, multiplicities, cone-test method and margin,
eigen-residual, verdict and wall time.  Exit status 1 if any case does not pass.
"""

import argparse
import csv
import sys
import time
from concurrent.futures import ProcessPoolExecutor

from midpoint.charmap import certify_C1
from midpoint.cli import parse_range


def run(case):
    n, m = case
    t0 = time.perf_counter()
    cert = certify_C1(n, m)
    return {
        "n": n,
        "m": m,
        "lambda": f"{cert.values['lambda']:.12f}",
        "mult": f"{cert.values['mult_alg']}/{cert.values['mult_geo']}",
        "patches": cert.values["patches"],
        "cone": cert.values["cone_method"],
        "cone_margin": f"{cert.margins['cone']:.3e}",
        "residual": f"{cert.values['residual']:.1e}",
        "verdict": cert.verdict,
        "seconds": f"{time.perf_counter() - t0:.2f}",
    }


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--degrees", default="2..9")
    p.add_argument("--valences", default="3,5,6,7")
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--output", help="CSV file (stdout if omitted)")
    args = p.parse_args(argv)
    cases = [(n, m) for n in parse_range(args.degrees) for m in parse_range(args.valences)]
    t0 = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            rows = list(pool.map(run, cases))
    else:
        rows = [run(c) for c in cases]
    out = open(args.output, "w", newline="") if args.output else sys.stdout
    w = csv.DictWriter(out, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    if args.output:
        out.close()
    passed = sum(r["verdict"] == "pass" for r in rows)
    print(f"# {passed}/{len(rows)} pass in {time.perf_counter() - t0:.1f}s", file=sys.stderr)
    return 0 if passed == len(rows) else 1


if __name__ == "__main__":
    sys.exit(main())
