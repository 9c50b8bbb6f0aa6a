"""Density ratios over geometric scale schedules and approximate tangent cones.

The limits "r -> 0" become traces over a geometric schedule of radii; a
deterministic rule turns each trace into a verdict (limit_zero,
limit_positive, diverges, inconclusive).  Upper quantities track a running
window maximum, lower quantities a running window minimum.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT_GRIDS, DEFAULT_TOL, Grids, Tolerances
from .geometry import (
    ClosedBall,
    Complement,
    Cone,
    Intersection,
    OpenBall,
    Plane,
    PlaneCone,
    Region,
    vertical_excess,
)
from .measure import MeasureOracle, unit_ball_volume


@dataclass(frozen=True)
class ScaleSchedule:
    """Geometric radii r_j = r0 * q^j for j = 0..J-1."""

    r0: float = 0.5
    q: float = 2 ** -0.5
    J: int = 24

    def __post_init__(self):
        if self.r0 <= 0 or not (0 < self.q < 1) or self.J < 8:
            raise ValueError("need r0 > 0, q in (0,1), J >= 8")

    @property
    def radii(self) -> np.ndarray:
        return self.r0 * self.q ** np.arange(self.J)

    def clip_for(self, oracle: MeasureOracle,
                 tol: Tolerances = DEFAULT_TOL,
                 factor: float | None = None) -> "ScaleSchedule":
        """Drop scales where a single sample weight dominates the ball mass.

        `factor` overrides the default granularity factor; vanishing-density
        checks tolerate a much smaller one because their deep-scale masses
        are exact zeros rather than noisy positives.
        """
        g = oracle.granularity()
        if g <= 0:
            return self
        if factor is None:
            factor = tol.granularity_factor
        keep = self.radii ** oracle.m >= factor * g
        J = int(keep.sum())
        if J < 8:
            raise ValueError("schedule has fewer than 8 reliable scales for this oracle")
        return ScaleSchedule(self.r0, self.q, J)

    def to_dict(self) -> dict:
        return {"r0": self.r0, "q": self.q, "J": self.J}


DYADIC_SCHEDULE = ScaleSchedule(r0=0.5, q=0.5, J=24)
# radii 0.75 * 2^-j land in the gaps of the dyadic annuli at every other step
DYADIC_GAP_SCHEDULE = ScaleSchedule(r0=0.75, q=0.5, J=24)


@dataclass
class Verdict:
    status: str                      # holds / fails / inconclusive / precondition_failed
    diagnostics: dict = field(default_factory=dict)

    def __bool__(self):
        return self.status == "holds"


@dataclass
class DensityTrace:
    point: np.ndarray
    m: int
    schedule: ScaleSchedule
    entries: list                    # [(r, ratio, err), ...]
    verdict: str = "inconclusive"
    estimate: float | None = None

    def ratios(self) -> np.ndarray:
        return np.array([e[1] for e in self.entries])

    def to_json(self) -> str:
        obj = {
            "point": [float(c) for c in np.atleast_1d(self.point)],
            "m": self.m,
            "schedule": self.schedule.to_dict(),
            "entries": [[float(r), float(v), float(e)] for r, v, e in self.entries],
            "verdict": self.verdict,
        }
        if self.estimate is not None:
            obj["estimate"] = float(self.estimate)
        return json.dumps(obj, sort_keys=True)

    @staticmethod
    def from_json(text: str) -> "DensityTrace":
        obj = json.loads(text)
        sched = ScaleSchedule(**obj["schedule"])
        return DensityTrace(np.array(obj["point"]), obj["m"], sched,
                            [tuple(e) for e in obj["entries"]],
                            obj["verdict"], obj.get("estimate"))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["r", "ratio", "err"])
        for r, v, e in self.entries:
            writer.writerow([repr(float(r)), repr(float(v)), repr(float(e))])
        return buf.getvalue()


# ---------------------------------------------------------------------------
# verdict rule


def _running_window(values: np.ndarray, errs: np.ndarray, w: int, fn):
    out_v = np.array([fn(values[j - w + 1:j + 1]) for j in range(w - 1, len(values))])
    out_e = np.array([errs[j - w + 1:j + 1].max() for j in range(w - 1, len(values))])
    return out_v, out_e


def decide_verdict(ratios: np.ndarray, errs: np.ndarray, window_fn,
                   tol: Tolerances = DEFAULT_TOL) -> tuple[str, float | None]:
    """Deterministic verdict from a ratio trace.

    The trace is first reduced to a running-window statistic (max for upper
    limits, min for lower limits), then classified from its trailing window.
    """
    w = tol.trailing_window
    ratios = np.asarray(ratios, dtype=float)
    errs = np.asarray(errs, dtype=float)
    if len(ratios) < 3 * w - 1:
        return "inconclusive", None
    der, der_e = _running_window(ratios, errs, w, window_fn)
    trail, trail_e = der[-w:], der_e[-w:]
    prev = der[-2 * w:-w]
    if np.all(trail + trail_e < tol.tol_zero) and trail.max() <= 0.5 * prev.max() + 1e-300:
        return "limit_zero", 0.0
    if np.all(np.diff(trail) > 0) and trail[-1] - trail_e[-1] > tol.diverge_threshold:
        return "diverges", None
    est = float(trail.mean())
    spread = (trail.max() - trail.min()) / max(est, 1e-300)
    if est > tol.tol_zero and spread < tol.positive_spread \
            and trail_e.max() <= tol.positive_spread * max(est, 1e-300):
        return "limit_positive", est
    return "inconclusive", None


# ---------------------------------------------------------------------------
# densities


def density_ratio(oracle: MeasureOracle, a: np.ndarray, m: int, r: float) -> tuple[float, float]:
    """mass(B(a,r)) normalized by alpha(m) r^m."""
    if r <= 0:
        raise ValueError("r must be positive")
    val, err = oracle.mass(ClosedBall(np.asarray(a, dtype=float), r))
    norm = unit_ball_volume(m) * r ** m
    return val / norm, err / norm


def _trace(oracle: MeasureOracle, a, m: int, schedule: ScaleSchedule, window_fn,
           tol: Tolerances = DEFAULT_TOL,
           ratio_fn: Callable[[float], tuple[float, float]] | None = None,
           clip_factor: float | None = None) -> DensityTrace:
    a = np.asarray(a, dtype=float)
    schedule = schedule.clip_for(oracle, tol, factor=clip_factor)
    fn = ratio_fn or (lambda r: density_ratio(oracle, a, m, r))
    entries = [(float(r),) + fn(float(r)) for r in schedule.radii]
    ratios = np.array([e[1] for e in entries])
    errs = np.array([e[2] for e in entries])
    verdict, est = decide_verdict(ratios, errs, window_fn, tol)
    return DensityTrace(a, m, schedule, entries, verdict, est)


def upper_density(oracle: MeasureOracle, a, m: int, schedule: ScaleSchedule,
                  tol: Tolerances = DEFAULT_TOL,
                  clip_factor: float | None = None) -> DensityTrace:
    return _trace(oracle, a, m, schedule, np.max, tol, clip_factor=clip_factor)


def lower_density(oracle: MeasureOracle, a, m: int, schedule: ScaleSchedule,
                  tol: Tolerances = DEFAULT_TOL) -> DensityTrace:
    return _trace(oracle, a, m, schedule, np.min, tol)


# ---------------------------------------------------------------------------
# tangent cone membership


def _positive_density(trace: DensityTrace) -> str:
    if trace.verdict in ("limit_positive", "diverges"):
        return "holds"
    if trace.verdict == "limit_zero":
        return "fails"
    return "inconclusive"


def _combine(per_eps: dict) -> str:
    statuses = list(per_eps.values())
    if any(s == "fails" for s in statuses):
        return "fails"
    if all(s == "holds" for s in statuses):
        return "holds"
    return "inconclusive"


def _normalized(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = float(np.linalg.norm(v))
    if norm == 0:
        return v
    if not (0.5 <= norm <= 2.0):
        v = v / norm
    return v


def in_upper_tangent_cone(oracle: MeasureOracle, a, m: int, v,
                          eps_grid: Sequence[float] = DEFAULT_GRIDS.eps_grid,
                          schedule: ScaleSchedule = ScaleSchedule(),
                          tol: Tolerances = DEFAULT_TOL) -> Verdict:
    """v in Tan*^m(phi, a): positive upper density along every cone E(a,v,eps)."""
    a = np.asarray(a, dtype=float)
    v = _normalized(v)
    per_eps, traces = {}, {}
    if np.linalg.norm(v) == 0:
        trace = upper_density(oracle, a, m, schedule, tol)
        status = _positive_density(trace)
        return Verdict(status, {"v": v.tolist(), "trace": trace})
    for eps in eps_grid:
        restricted = oracle.restrict(Cone(a, v, eps))
        trace = upper_density(restricted, a, m, schedule, tol)
        per_eps[eps] = _positive_density(trace)
        traces[eps] = trace
    return Verdict(_combine(per_eps), {"v": v.tolist(), "per_eps": per_eps, "traces": traces})


def eta_uniform_condition(oracle: MeasureOracle, m: int, schedule: ScaleSchedule,
                          eps: float, mass_fn: Callable[[float], tuple[float, float]],
                          eta_grid: Sequence[float] = DEFAULT_GRIDS.eta_grid,
                          tol: Tolerances = DEFAULT_TOL,
                          norm: float = 1.0) -> tuple[str, dict]:
    """Grid test of "exists eta > 0 with mass_fn(r) >= eta norm r^m at small r".

    A scale r is eligible when the lateral resolution eps*r clears the
    granularity rule and r <= eps * r0: the aperture sets how deep the
    schedule must reach before it says anything about that eps.  The finest
    few eligible scales stand in for "all small r".  Returns "untested" when
    fewer than three scales are eligible.
    """
    g = oracle.granularity()
    radii = [float(r) for r in schedule.radii
             if (g <= 0 or (eps * r) ** m >= tol.granularity_factor * g)
             and r <= eps * schedule.r0]
    radii = radii[-max(3, tol.trailing_window):]
    if len(radii) < 3:
        return "untested", {"eps": eps, "radii": radii}
    rows = [(r,) + tuple(mass_fn(r)) for r in radii]
    diag = {"eps": eps, "rows": rows}
    for eta in eta_grid:
        if all(val - err >= eta * norm * r ** m for r, val, err in rows):
            diag["eta"] = eta
            return "holds", diag
    eta_min = min(eta_grid)
    if any(val + err < eta_min * norm * r ** m for r, val, err in rows):
        return "fails", diag
    return "inconclusive", diag


def in_lower_tangent_cone(oracle: MeasureOracle, a, m: int, v,
                          eps_grid: Sequence[float] = DEFAULT_GRIDS.eps_grid,
                          schedule: ScaleSchedule = ScaleSchedule(),
                          tol: Tolerances = DEFAULT_TOL,
                          eta_grid: Sequence[float] = DEFAULT_GRIDS.eta_grid) -> Verdict:
    """v in Tan_*^m(phi, a): positive lower density plus the eta-uniform
    ball-mass condition mass(U(a + r v, eps r)) >= eta r^m on the finest
    eligible scales of each aperture."""
    a = np.asarray(a, dtype=float)
    v = _normalized(v)
    base = lower_density(oracle, a, m, schedule.clip_for(oracle, tol), tol)
    density_status = _positive_density(base)
    diag = {"v": v.tolist(), "lower_density": base}
    if density_status == "fails":
        return Verdict("fails", diag)
    vn = float(np.linalg.norm(v))
    if vn == 0:
        return Verdict(density_status, diag)

    per_eps, details = {}, {}
    for eps in eps_grid:
        def mass_fn(r, eps=eps):
            # the enclosing ball centered at a keeps the oracle's sample
            # culling anchored to one center across all scales
            hull = ClosedBall(a, (vn + eps) * r)
            return oracle.mass(Intersection(hull, OpenBall(a + r * v, eps * r)))

        status, d = eta_uniform_condition(oracle, m, schedule, eps, mass_fn,
                                          eta_grid, tol)
        per_eps[eps] = status
        details[eps] = d
    diag["per_eps"] = per_eps
    diag["eta_details"] = details
    tested = [s for s in per_eps.values() if s != "untested"]
    if any(s == "fails" for s in tested):
        combined = "fails"
    elif not tested or any(s == "inconclusive" for s in tested):
        combined = "inconclusive"
    else:
        combined = "holds"
    if combined == "holds" and density_status == "inconclusive":
        combined = "inconclusive"
    return Verdict(combined, diag)


# ---------------------------------------------------------------------------
# vanishing-density conditions

# when a vanishing condition holds the deep-scale masses are exact zeros, so
# a much smaller granularity clip is safe and buys the decisive tail; when it
# fails the tail is a noisy positive, for which only the conservative prefix
# is trustworthy.  Traces are taken with this clip first, then settled
# against the factor-clipped prefix of the same entries.
VANISHING_CLIP = 4.0


def settle_vanishing(oracle: MeasureOracle, trace: DensityTrace, m: int,
                     tol: Tolerances = DEFAULT_TOL) -> str:
    """holds / fails / inconclusive for an upper trace expected to vanish."""
    if trace.verdict == "limit_zero":
        return "holds"
    if trace.verdict in ("limit_positive", "diverges"):
        return "fails"
    g = oracle.granularity()
    keep = [e for e in trace.entries
            if g <= 0 or e[0] ** m >= tol.granularity_factor * g]
    ratios = np.array([e[1] for e in keep])
    errs = np.array([e[2] for e in keep])
    verdict, est = decide_verdict(ratios, errs, np.max, tol)
    if verdict != "inconclusive":
        trace.verdict, trace.estimate = verdict, est
    if verdict == "limit_zero":
        return "holds"
    if verdict in ("limit_positive", "diverges"):
        return "fails"
    # failing the vanishing condition does not require a clean limit: a
    # trailing window bounded away from zero beyond its error bars is
    # decisive, provided the trace has stopped decreasing (a steady
    # decay means the transition scale just is not resolved yet)
    w = tol.trailing_window
    if len(ratios) >= 3 * w - 1:
        der, der_e = _running_window(ratios, errs, w, np.min)
        trail, trail_e = der[-w:], der_e[-w:]
        prev = der[-2 * w:-w]
        slack = trail_e.max() + tol.positive_spread * prev.min()
        if np.all(trail - trail_e > tol.tol_zero) \
                and trail.min() >= prev.min() - slack:
            return "fails"
    return "inconclusive"


def vanishing_density_trace(oracle: MeasureOracle, a, m: int,
                            schedule: ScaleSchedule,
                            region_fn: Callable[[float], Region],
                            tol: Tolerances = DEFAULT_TOL) -> tuple[str, DensityTrace]:
    """Upper-density trace of mass(B(a,r) ^ region_fn(r)), settled."""
    a = np.asarray(a, dtype=float)

    def ratio_fn(r):
        val, err = oracle.mass(Intersection(ClosedBall(a, r), region_fn(r)))
        norm = unit_ball_volume(m) * r ** m
        return val / norm, err / norm

    trace = _trace(oracle, a, m, schedule, np.max, tol, ratio_fn=ratio_fn,
                   clip_factor=VANISHING_CLIP)
    return settle_vanishing(oracle, trace, m, tol), trace


# ---------------------------------------------------------------------------
# cone condition equivalence


def cone_condition_check(oracle: MeasureOracle, a, T: Plane,
                         eps_grid: Sequence[float] = DEFAULT_GRIDS.eps_grid,
                         schedule: ScaleSchedule = ScaleSchedule(),
                         tol: Tolerances = DEFAULT_TOL) -> tuple[Verdict, Verdict]:
    """Conditions (ii) and (iii) of the tangent-cone equivalence.

    (ii): density of the set outside every cone X(a, T, eps) vanishes.
    (iii): the fraction of B(a,r) lying at vertical distance > eps r from
    a + T vanishes as r -> 0.
    """
    a = np.asarray(a, dtype=float)
    m = T.m

    ii_eps, iii_eps, traces_ii, traces_iii = {}, {}, {}, {}
    for eps in eps_grid:
        outside = oracle.restrict(Complement(PlaneCone(T, a, eps)))
        trace = upper_density(outside, a, m, schedule, tol,
                              clip_factor=VANISHING_CLIP)
        traces_ii[eps] = trace
        ii_eps[eps] = settle_vanishing(oracle, trace, m, tol)

        status, trace = vanishing_density_trace(
            oracle, a, m, schedule,
            lambda r, eps=eps: vertical_excess(T, a, eps * r), tol)
        traces_iii[eps] = trace
        iii_eps[eps] = status
    vii = Verdict(_combine(ii_eps), {"per_eps": ii_eps, "traces": traces_ii})
    viii = Verdict(_combine(iii_eps), {"per_eps": iii_eps, "traces": traces_iii})
    return vii, viii


# ---------------------------------------------------------------------------
# density transfer


class FnPositive(Region):
    """{x : g(x) > 0} for a vectorized scalar field g."""

    def __init__(self, g: Callable[[np.ndarray], np.ndarray]):
        self.g = g

    def contains_many(self, X):
        return np.asarray(self.g(np.atleast_2d(X))) > 0


def density_transfer_check(domain_oracle: MeasureOracle,
                           f: Callable[[np.ndarray], np.ndarray],
                           a, gamma: float, lam: float, M: float,
                           schedule: ScaleSchedule = ScaleSchedule(),
                           tol: Tolerances = DEFAULT_TOL) -> Verdict:
    """Hypothesis: the sublevel failure set {|f| > lam r^gamma} has density < M
    in B(a,r) at every scale.  Conclusion checked: the density of
    {|f(x)| > 2^gamma lam |x - a|^gamma} stays below M (1 - 2^-m)^-1.
    """
    a = np.asarray(a, dtype=float)
    m = domain_oracle.m
    norm_of = lambda r: unit_ball_volume(m) * r ** m
    schedule = schedule.clip_for(domain_oracle, tol)
    bound = M / (1 - 2.0 ** -m)
    hyp_rows, con_rows = [], []
    for r in schedule.radii:
        r = float(r)
        bad = FnPositive(lambda X, r=r: np.abs(f(X)) - lam * r ** gamma)
        val, err = domain_oracle.mass(Intersection(ClosedBall(a, r), bad))
        hyp = val / norm_of(r)
        hyp_rows.append((r, hyp, err / norm_of(r)))
        if hyp - err / norm_of(r) >= M:
            return Verdict("precondition_failed",
                           {"scale": r, "hypothesis_ratio": hyp, "M": M})
        worse = FnPositive(lambda X: np.abs(f(X))
                           - 2 ** gamma * lam * np.linalg.norm(np.atleast_2d(X) - a, axis=1) ** gamma)
        val, err = domain_oracle.mass(Intersection(ClosedBall(a, r), worse))
        con_rows.append((r, val / norm_of(r), err / norm_of(r)))
    diag = {"hypothesis": hyp_rows, "conclusion": con_rows, "bound": bound}
    if all(v + e < bound for _, v, e in con_rows):
        return Verdict("holds", diag)
    if any(v - e >= bound for _, v, e in con_rows):
        return Verdict("fails", diag)
    return Verdict("inconclusive", diag)


# ---------------------------------------------------------------------------
# blow-up tangent plane (functional convergence)


def _bump_family(n: int, rho: float = 0.5):
    """Tensor bumps max(0, 1 - |x - c|/rho)^2 at 2n+1 fixed centers."""
    centers = [np.zeros(n)]
    for i in range(n):
        for sign in (1.0, -1.0):
            c = np.zeros(n)
            c[i] = sign * 0.5
            centers.append(c)

    def make(c):
        def f(X):
            d = np.linalg.norm(np.atleast_2d(X) - c, axis=1)
            return np.maximum(0.0, 1.0 - d / rho) ** 2
        return f

    return [(c, make(c)) for c in centers], rho


def _plane_integral(plane: Plane, fn, c: np.ndarray, rho: float,
                    resolution: int = 256) -> float:
    """Integral of fn over the plane through 0, supported in B(c, rho)."""
    c_t = plane.tangential(c)
    offset2 = float(np.dot(c - c_t, c - c_t))
    if offset2 >= rho ** 2:
        return 0.0
    rad = math.sqrt(rho ** 2 - offset2)
    m = plane.m
    axes = [np.linspace(-rad, rad, resolution, endpoint=False) + rad / resolution
            for _ in range(m)]
    grids = np.meshgrid(*axes, indexing="ij")
    chi = np.stack([g.ravel() for g in grids], axis=1)
    pts = plane.from_coords(chi + plane.tangent_coords(c_t[None, :]))
    cell = (2 * rad / resolution) ** m
    return float(fn(pts).sum() * cell)


def _candidate_planes(base: Plane, n: int) -> list[Plane]:
    cands = [base]
    normal = base.normal_basis()
    for i in range(base.m):
        for n_row in normal:
            for ang in (0.05, -0.05, 0.15, -0.15):
                tilted = base.basis.copy()
                tilted[i] = math.cos(ang) * base.basis[i] + math.sin(ang) * n_row
                cands.append(Plane.from_spanning(tilted))
    return cands


def estimate_plane_pca(oracle: MeasureOracle, a, m: int,
                       radii: Sequence[float]) -> Plane | None:
    """Weighted second-moment plane from samples at the given radii."""
    a = np.asarray(a, dtype=float)
    best = None
    for r in radii:
        pts, w = oracle.samples_in_ball(a, float(r))
        if len(pts) < 2 * m or w.sum() <= 0:
            continue
        d = (pts - a) / r
        cov = (d * w[:, None]).T @ d / w.sum()
        vals, vecs = np.linalg.eigh(cov)
        best = Plane.from_spanning(vecs[:, ::-1][:, :m].T)
    return best


def blow_up_tangent(oracle: MeasureOracle, a, m: int,
                    schedule: ScaleSchedule = ScaleSchedule(),
                    probe_fns=None,
                    tol: Tolerances = DEFAULT_TOL):
    """Rescaled-integral tangent plane in the functional sense.

    Returns (plane, theta_hat) when r^-m integrals of the probe bumps against
    the rescaled measure stabilize and match theta times the plane integrals
    for a candidate plane; returns None otherwise.
    """
    a = np.asarray(a, dtype=float)
    n = oracle.n
    schedule = schedule.clip_for(oracle, tol)
    radii = schedule.radii
    if probe_fns is None:
        probe_fns, rho = _bump_family(n)
    else:
        probe_fns, rho = probe_fns
    support = 0.5 + rho  # centers at distance <= 1/2

    # empirical traces per probe
    w = tol.trailing_window
    limits = []
    for c, fn in probe_fns:
        vals = []
        for r in radii:
            r = float(r)
            integ = oracle.integral_in_ball(lambda X: fn((X - a) / r), a, support * r)
            vals.append(integ / r ** m)
        trail = np.array(vals[-w:])
        spread = trail.max() - trail.min()
        level = max(abs(trail).max(), 1e-300)
        stable_zero = abs(trail).max() < tol.tol_zero
        stable_pos = spread <= tol.positive_spread * level
        if not (stable_zero or stable_pos):
            return None
        limits.append(float(trail.mean()))

    pca = estimate_plane_pca(oracle, a, m, radii[-3:])
    if pca is None:
        return None
    best = None
    for plane in _candidate_planes(pca, n):
        thetas = []
        consistent = True
        for (c, fn), lim in zip(probe_fns, limits):
            pint = _plane_integral(plane, fn, c, rho)
            if pint < tol.tol_zero:
                if abs(lim) > tol.tol_zero:
                    consistent = False
                    break
                continue
            thetas.append(lim / pint)
        if not consistent or not thetas:
            continue
        thetas = np.array(thetas)
        if thetas.min() <= 0:
            continue
        spread = (thetas.max() - thetas.min()) / thetas.mean()
        if spread < 2 * tol.positive_spread:
            score = spread
            if best is None or score < best[0]:
                best = (score, plane, float(thetas.mean()))
    if best is None:
        return None
    return best[1], best[2]
