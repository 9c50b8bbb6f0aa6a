"""End-to-end acceptance checks, one pass/fail line per criterion."""
import json
import time

import numpy as np

from gmtjet.cli import main, suite_equivalence, suite_transfer
from gmtjet.density import (
    DYADIC_GAP_SCHEDULE,
    DYADIC_SCHEDULE,
    blow_up_tangent,
    density_ratio,
    in_lower_tangent_cone,
    in_upper_tangent_cone,
    lower_density,
)
from gmtjet.fixtures import make_fixture, point_key
from gmtjet.geometry import Plane
from gmtjet.jetfit import (
    estimate_tangent_plane,
    iterated_jet_fit,
    jet_uniqueness_crosscheck,
)
from gmtjet.pointwise import carve_full_density_subset, pt_diff_order1_test, \
    touching_ball_check
from gmtjet.sff import normal_field_identity_check


def report(num, ok, detail=""):
    line = f"criterion {num}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f" ({detail})"
    print(line)
    assert ok, line


def test_criterion_1_dyadic_densities():
    t0 = time.perf_counter()
    fx = make_fixture("dyadic_annuli")
    a = np.zeros(1)
    worst = 0.0
    for i in range(2, 9):
        lo, err = density_ratio(fx.oracle, a, 1, 2.0 ** (-2 * i - 1))
        hi, _ = density_ratio(fx.oracle, a, 1, 2.0 ** (-2 * i))
        worst = max(worst, abs(lo - 1 / 3), abs(hi - 2 / 3), err)
    cones_ok = all(
        in_lower_tangent_cone(fx.oracle, a, 1, np.array([v]),
                              schedule=DYADIC_GAP_SCHEDULE).status == "fails"
        and in_upper_tangent_cone(fx.oracle, a, 1, np.array([v]),
                                  schedule=DYADIC_SCHEDULE).status == "holds"
        for v in (1.0, -1.0))
    elapsed = time.perf_counter() - t0
    report(1, worst <= 1e-9 and cones_ok and elapsed < 5.0,
           f"ratio err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_aag_divergence():
    t0 = time.perf_counter()
    fx = make_fixture("a_alpha_gamma", gamma=2.0, alpha=0.75)
    a = np.zeros(2)
    tail = lower_density(fx.oracle, a, 1, fx.schedule).ratios()[-10:]
    diverges = bool(np.all(np.diff(tail) > 0)) and tail[-1] > 10
    est = estimate_tangent_plane(fx.oracle, a, fx.schedule)
    gap = est[1].distance_to(Plane.axis(2, [0])) if est else float("inf")
    blow = blow_up_tangent(fx.oracle, a, 1, schedule=fx.schedule)
    elapsed = time.perf_counter() - t0
    report(2, diverges and gap <= 1e-2 and blow is None and elapsed < 30.0,
           f"tail {tail[-1]:.1f}, angle {gap:.1e}, {elapsed:.1f}s")


def test_criterion_3_jet_recovery():
    t0 = time.perf_counter()
    worst = 0.0
    worst_cross = 0.0
    for c2, c3 in ((1.0, 0.0), (0.5, 2.0), (0.0, 1.0)):
        fx = make_fixture("graph_poly", coeffs=(c2, c3))
        a = np.zeros(2)
        jet, verdict = iterated_jet_fit(fx.oracle, a, 3, 0.0, fx.schedule)
        assert verdict.status == "holds", (c2, c3, verdict.status)
        for deg, want in ((2, c2 / 2), (3, c3 / 6)):
            got = float(np.linalg.norm(
                jet.forms[deg].coefficients[(deg,)]))
            err = abs(got - abs(want)) / max(abs(want), 1.0)
            worst = max(worst, err)
        cross = jet_uniqueness_crosscheck(fx.oracle, a, jet.plane, 3,
                                          fx.schedule)
        worst_cross = max(worst_cross, cross.diagnostics["gap"])
    elapsed = time.perf_counter() - t0
    report(3, worst <= 1e-2 and worst_cross <= 1e-2 and elapsed < 60.0,
           f"coeff err {worst:.1e}, crosscheck gap {worst_cross:.1e}, "
           f"{elapsed:.1f}s")


CLASSIFY_FIXTURES = [
    ("line", {}),
    ("graph_poly", dict(coeffs=(1.0, 0.0))),
    ("graph_poly", dict(coeffs=(0.5, 2.0))),
    ("graph_poly", dict(coeffs=(0.0, 1.0))),
    ("circle", {}),
    ("sphere", {}),
    ("torus", {}),
    ("a_alpha_gamma", dict(gamma=2.0, alpha=0.75)),
    ("comb", {}),
]


def test_criterion_4_classification_sweep():
    mismatches = []
    for name, kwargs in CLASSIFY_FIXTURES:
        fx = make_fixture(name, **kwargs)
        for a in fx.marked_points:
            table = fx.ground_truth.get(point_key(a), {}).get("classify")
            if not table:
                continue
            est = estimate_tangent_plane(fx.oracle, np.asarray(a), fx.schedule)
            for key, expected in table.items():
                k, alpha = (float(tok) for tok in key.strip("()").split(","))
                _, verdict = iterated_jet_fit(fx.oracle, np.asarray(a),
                                              int(k), alpha, fx.schedule,
                                              tangent=est)
                if verdict.status != expected:
                    mismatches.append((name, key, expected, verdict.status))
    report(4, not mismatches, f"mismatches: {mismatches}" if mismatches
           else f"{len(CLASSIFY_FIXTURES)} fixtures match ground truth")


def test_criterion_5_cone_equivalence():
    checks = suite_equivalence(0)
    bad = [c["name"] for c in checks if not c["pass"]]
    report(5, len(checks) >= 20 and not bad,
           f"{len(checks)} cases, disagreements: {bad}")


def test_criterion_6_touching_ball():
    fx = make_fixture("parabola_touch")
    a = np.zeros(2)
    jet = fx.jets[point_key(a)]
    nu = np.array([0.0, 1.0])
    edge = touching_ball_check(fx, a, nu, 1.0, jet)
    slack = touching_ball_check(fx, a, nu, 0.9, jet)
    above = touching_ball_check(fx, a, nu, 1.1, jet)
    ok = (edge.status == "holds"
          and abs(edge.diagnostics["max_violation"]) <= 1e-6
          and slack.status == "holds"
          and slack.diagnostics["max_violation"] < -1e-2
          and above.status == "precondition_failed")
    report(6, ok, f"edge violation {edge.diagnostics['max_violation']:.1e}, "
                  f"r=1.1 {above.status}")


def test_criterion_7_normal_field_identity():
    worst = 0.0
    for name, kwargs in (("circle", {}), ("sphere", {}),
                         ("graph_poly", dict(coeffs=(1.0, 0.0)))):
        fx = make_fixture(name, **kwargs)
        out = normal_field_identity_check(fx, fx.marked_points[0])
        assert out.status == "holds", (name, out.status)
        worst = max(worst, out.diagnostics["worst_gap"])
    report(7, worst <= 1e-2, f"worst relative gap {worst:.1e}")


def test_criterion_8_carving():
    fx = make_fixture("noisy_parabola", k=2)
    a = np.zeros(2)
    jet, verdict = iterated_jet_fit(fx.oracle, a, 2, 0.0, fx.schedule)
    assert verdict.status == "holds"
    carved, carve_verdict = carve_full_density_subset(fx.oracle, a, jet,
                                                      fx.schedule)
    removed_ok = (carve_verdict.status == "holds" and
                  carve_verdict.diagnostics["removed_trace"].verdict
                  == "limit_zero")
    T = pt_diff_order1_test(carved, a, fx.schedule)
    plane_gap = T.distance_to(jet.plane) if T is not None else float("inf")
    pt_jet, pt_verdict = iterated_jet_fit(carved, a, 2, 0.0, fx.schedule)
    coeff_gap = (pt_jet.max_coefficient_gap(jet)
                 if pt_verdict.status == "holds" else float("inf"))
    report(8, removed_ok and plane_gap <= 1e-2 and coeff_gap <= 1e-2,
           f"plane gap {plane_gap:.1e}, jet gap {coeff_gap:.1e}")


def test_criterion_9_density_transfer():
    checks = suite_transfer(0)
    bad = [c["name"] for c in checks if not c["pass"]]
    report(9, len(checks) == 50 and not bad,
           f"50 trials, violations: {bad}")


def test_criterion_10_determinism(tmp_path):
    t0 = time.perf_counter()
    one, two = str(tmp_path / "one.json"), str(tmp_path / "two.json")
    code1 = main(["verify", "--suite", "all", "--out", one])
    code2 = main(["verify", "--suite", "all", "--out", two])
    elapsed = time.perf_counter() - t0
    identical = open(one, "rb").read() == open(two, "rb").read()
    all_pass = code1 == 0 and code2 == 0
    n = sum(len(s["checks"]) for s in
            json.load(open(one))["suites"].values())
    report(10, identical and all_pass and elapsed <= 600.0,
           f"{n} checks twice, byte-identical={identical}, {elapsed:.0f}s")
