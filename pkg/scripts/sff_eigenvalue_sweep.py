"""Principal curvatures of fitted sphere jets across radii.

Usage: python3 scripts/sff_eigenvalue_sweep.py [R ...]

For each radius, fits an order-2 jet at the marked point from the chart
oracle alone and compares the eigenvalues of the recovered second
fundamental form against the exact value 1/R.
"""
import sys
import time

import numpy as np

from gmtjet.fixtures import make_fixture, point_key
from gmtjet.jetfit import iterated_jet_fit
from gmtjet.sff import approximate_sff


def main():
    radii = [float(tok) for tok in sys.argv[1:]] or [0.5, 1.0, 2.0]
    print(f"{'R':>6s} {'verdict':10s} {'eigenvalues':24s} {'1/R':>8s} "
          f"{'max err':>9s} {'time':>7s}")
    for R in radii:
        fx = make_fixture("sphere", R=R)
        a = fx.marked_points[0]
        t0 = time.perf_counter()
        jet, verdict = iterated_jet_fit(fx.oracle, np.asarray(a), 2, 0.0,
                                        fx.schedule)
        elapsed = time.perf_counter() - t0
        form = approximate_sff(jet)
        chart = fx.sff_charts[point_key(a)]
        nu = chart.normal(np.atleast_2d(chart.t0))[0]
        eig = np.sort(np.linalg.eigvalsh(-form.matrix(nu)))
        err = float(np.max(np.abs(eig - 1.0 / R)))
        print(f"{R:6.2f} {verdict.status:10s} "
              f"{np.array2string(eig, precision=5):24s} {1.0 / R:8.4f} "
              f"{err:9.2e} {elapsed:6.1f}s")


if __name__ == "__main__":
    main()
