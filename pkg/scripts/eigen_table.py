"""Per-frequency dominant eigenvalues for a range of degrees and valences.

    python scripts/eigen_table.py --degrees 2..6 --valences 3..8

Columns: n, m, then lambda_hat(f) for f = 0..floor(m/2).  The closed forms for
n = 2 and n = 3 are printed alongside the subdominant value as a cross-check.
"""

import argparse
import sys

import numpy as np

from midpoint.cli import parse_range
from midpoint.spectral import spectral_report


def closed_form(n, m):
    c1 = np.cos(2 * np.pi / m)
    if n == 2:
        return 0.5 + 0.25 * c1
    if n == 3:
        return (5 + c1 + np.cos(np.pi / m) * np.sqrt(2 * (9 + c1))) / 16
    return None


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--degrees", default="2..6")
    p.add_argument("--valences", default="3..8")
    args = p.parse_args(argv)
    for n in parse_range(args.degrees):
        for m in parse_range(args.valences):
            rep = spectral_report(n, m)
            lams = [rep.lambda_hat(f).real for f in range(m // 2 + 1)]
            ref = closed_form(n, m)
            extra = "" if ref is None else f"  closed form {ref:.12f} (diff {abs(ref - lams[1]):.1e})"
            print(f"n={n} m={m}  " + "  ".join(f"{x:.9f}" for x in lams) + extra)
    return 0


if __name__ == "__main__":
    sys.exit(main())
