"""Dump density-ratio traces of a fixture at its marked points as CSV.

Usage: python3 scripts/trace_convergence.py <fixture> [outdir]

Writes one file per marked point with columns r, upper, upper_err, lower,
lower_err, ready for any plotting tool.
"""
import os
import sys

import numpy as np

from gmtjet.density import lower_density, upper_density
from gmtjet.fixtures import make_fixture


def main():
    if len(sys.argv) < 2:
        print(__doc__)
        return 2
    name = sys.argv[1]
    outdir = sys.argv[2] if len(sys.argv) > 2 else "."
    fx = make_fixture(name)
    os.makedirs(outdir, exist_ok=True)
    for idx, a in enumerate(fx.marked_points):
        a = np.asarray(a, dtype=float)
        up = upper_density(fx.oracle, a, fx.m, fx.schedule)
        lo = lower_density(fx.oracle, a, fx.m, fx.schedule)
        path = os.path.join(outdir, f"{name}_point{idx}.csv")
        with open(path, "w") as fp:
            fp.write("r,upper,upper_err,lower,lower_err\n")
            for (r, uv, ue), (_, lv, le) in zip(up.entries, lo.entries):
                fp.write(f"{r!r},{uv!r},{ue!r},{lv!r},{le!r}\n")
        print(f"{path}: upper {up.verdict} (est {up.estimate}), "
              f"lower {lo.verdict} (est {lo.estimate})")
    return 0


if __name__ == "__main__":
    sys.exit(main())
