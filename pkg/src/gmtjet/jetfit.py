"""Higher-order jet estimation by the iterated homogeneous scheme.

The pipeline at a point a: estimate the tangent plane (second-moment
eigen-gap plus the cone-condition and lower-cone validations), then fit one
homogeneous form per degree 2..k, checking at each stage that the set keeps
uniform mass in thin cylinders around the lifted probes and that the
vertical residual above the fitted graph has vanishing density.  Between
stages the fitted form is sheared away so the next degree sees a flattened
set.  For alpha > 0 a Hoelder constant is searched on a dyadic grid.
"""
from __future__ import annotations

import json

import numpy as np

from .config import DEFAULT_GRIDS, DEFAULT_TOL, Grids, Tolerances
from .density import (
    DensityTrace,
    FnPositive,
    ScaleSchedule,
    VANISHING_CLIP,
    Verdict,
    cone_condition_check,
    eta_uniform_condition,
    in_lower_tangent_cone,
    lower_density,
    settle_vanishing,
    upper_density,
    vanishing_density_trace,
)
from .geometry import (
    ClosedBall,
    Complement,
    Cylinder,
    GraphNbhd,
    HomogeneousForm,
    Intersection,
    Jet,
    Plane,
    ShearMap,
    monomials,
    multi_indices,
)
from .measure import MappedOracle, MeasureOracle, unit_ball_volume


# ---------------------------------------------------------------------------
# tangent plane


def _estimate_tangent(oracle: MeasureOracle, a, schedule: ScaleSchedule,
                      tol: Tolerances, grids: Grids,
                      force_m: int | None = None):
    a = np.asarray(a, dtype=float)
    n = oracle.n
    diag: dict = {}
    try:
        sched = schedule.clip_for(oracle, tol)
    except ValueError:
        diag["reason"] = "schedule_too_coarse"
        return None, diag

    cov = np.zeros((n, n))
    used = 0
    for r in sched.radii[-3:]:
        pts, w = oracle.samples_in_ball(a, float(r))
        if len(pts) == 0 or w.sum() <= 0:
            continue
        d = (pts - a) / float(r)
        cov += (d * w[:, None]).T @ d / w.sum()
        used += 1
    if used == 0:
        diag["reason"] = "no_local_mass"
        return None, diag
    vals, vecs = np.linalg.eigh(cov / used)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    diag["eigenvalues"] = [float(v) for v in vals]

    if force_m is None:
        # a curved m-set opens a second spectral gap at scale r (curvature
        # contributes r^2 along the normal eigenvectors), so several gap
        # positions can coexist; try them from the largest m down and let the
        # density and cone validations arbitrate
        gaps = [j for j in range(1, n)
                if vals[j - 1] >= tol.eigen_gap * max(vals[j], 1e-300)]
        if not gaps:
            diag["reason"] = "rank_ambiguous"
            return None, diag
        candidates = sorted(gaps, reverse=True)
    else:
        m = int(force_m)
        if not 1 <= m <= n:
            raise ValueError("force_m out of range")
        candidates = [m]

    attempts = []
    any_open = False
    for m in candidates:
        cdiag: dict = {"m": m}
        T = Plane.from_spanning(vecs[:, :m].T)
        if m < n:
            T = refine_tangent_plane(oracle, a, T,
                                     sched.radii[-tol.fit_scales:], tol)
        cdiag["plane"] = T
        diag.setdefault("candidate_plane", T)
        diag["candidate_m"] = m

        lo = lower_density(oracle, a, m, sched, tol)
        cdiag["lower_density"] = lo
        if lo.verdict == "limit_zero":
            cdiag["reason"] = "theta_zero"
            attempts.append(cdiag)
            continue

        vii, viii = cone_condition_check(oracle, a, T, grids.eps_grid,
                                         schedule, tol)
        cdiag["cone_ii"], cdiag["cone_iii"] = vii, viii
        statuses = [vii.status, viii.status]
        if "fails" not in statuses:
            cone_members = []
            for row in T.basis:
                for sign in (1.0, -1.0):
                    v = in_lower_tangent_cone(oracle, a, m, sign * row,
                                              grids.eps_grid, schedule, tol,
                                              grids.eta_grid)
                    cone_members.append(v)
                    statuses.append(v.status)
                    if v.status == "fails":
                        break
                if statuses[-1] == "fails":
                    break
            cdiag["lower_cone"] = cone_members
        if all(s == "holds" for s in statuses):
            diag["attempts"] = attempts
            diag["validation"] = cdiag
            return (m, T), diag
        if "fails" not in statuses:
            any_open = True
        attempts.append(cdiag)
    diag["attempts"] = attempts
    if attempts and all(a.get("reason") == "theta_zero" for a in attempts):
        diag["reason"] = "theta_zero"
    else:
        diag["reason"] = ("validation_inconclusive" if any_open
                          else "validation_failed")
    return None, diag


def estimate_tangent_plane(oracle: MeasureOracle, a,
                           schedule: ScaleSchedule = ScaleSchedule(),
                           tol: Tolerances = DEFAULT_TOL,
                           grids: Grids = DEFAULT_GRIDS,
                           force_m: int | None = None):
    """Validated approximate tangent plane at a, or None.

    Returns (m, Plane).  The dimension comes from the eigen-gap rule on the
    local second-moment matrix (largest split with ratio >= eigen_gap);
    `force_m` overrides it, in which case the validations decide alone.
    """
    result, _ = _estimate_tangent(oracle, a, schedule, tol, grids, force_m)
    return result


# ---------------------------------------------------------------------------
# homogeneous form fitting


def refine_tangent_plane(oracle: MeasureOracle, a, T: Plane, fit_scales,
                         tol: Tolerances = DEFAULT_TOL, rounds: int = 3) -> Plane:
    """Rotate T to kill the linear term of the local graph regression.

    The second-moment plane is only accurate to roughly 1e-6 in angle.  That
    is plenty for order <= 2, but a tilt theta contributes theta * r to the
    vertical residual, which crosses the order-3 thresholds eps * r^3 well
    inside the tested scales.  A few rounds of low-degree regression drive
    the tilt to roundoff on graph-like sets and are a no-op on sets with no
    local graph structure (the linear term comes back empty or zero).
    """
    a = np.asarray(a, dtype=float)
    if T.m >= T.n:
        return T
    for _ in range(rounds):
        m = T.m
        deg_betas = [(d, beta) for d in (1, 2) for beta in multi_indices(m, d)]
        nuis = [(d, beta) for d in (3, 4) for beta in multi_indices(m, d)]
        per_scale = []
        for r in fit_scales:
            r = float(r)
            pts, w = oracle.samples_in_ball(a, r)
            if len(pts) == 0:
                continue
            d = pts - a
            normal = d @ T.normal_projector
            keep = (np.linalg.norm(normal, axis=1) <= tol.trim_factor * r) & (w > 0)
            if keep.sum() < len(deg_betas):
                continue
            chi = T.tangent_coords(d[keep]) / r
            cols = [monomials(chi, [beta]) * r**(deg - 1)
                    for deg, beta in deg_betas]
            if keep.sum() >= len(deg_betas) + len(nuis):
                cols += [monomials(chi, [beta]) * r**(deg - 1)
                         for deg, beta in nuis]
            A = np.hstack(cols)
            sol = _ridge_solve(A, normal[keep] / r, w[keep], tol.ridge)
            per_scale.append(sol[:m])
        if not per_scale:
            return T
        b = np.median(np.stack(per_scale), axis=0) @ T.normal_projector
        tilt = float(np.abs(b).max())
        T = Plane.from_spanning(T.basis + b)
        if tilt < 1e-13:
            break
    return T


def fit_homogeneous_form(oracle: MeasureOracle, a, T: Plane, i: int,
                         fit_scales, tol: Tolerances = DEFAULT_TOL) -> HomogeneousForm:
    """Weighted least-squares degree-i form over the given fit scales.

    Per scale the samples within trim_factor * r of the plane are fitted and
    the coefficient-wise median across scales is returned.  Columns of
    degree i + 2 are included as nuisance when the sample count allows: they
    absorb the leading truncation bias of the local graph, which otherwise
    leaks into the degree-i coefficients at the square of the fit scale.
    """
    a = np.asarray(a, dtype=float)
    if T.m >= T.n:
        raise ValueError("plane has no normal directions to fit")
    betas = multi_indices(T.m, i)
    nuis = multi_indices(T.m, i + 2)
    per_scale = []
    for r in fit_scales:
        r = float(r)
        pts, w = oracle.samples_in_ball(a, r)
        if len(pts) == 0:
            continue
        d = pts - a
        normal = d @ T.normal_projector
        keep = (np.linalg.norm(normal, axis=1) <= tol.trim_factor * r) & (w > 0)
        if keep.sum() < len(betas):
            continue
        chi = T.tangent_coords(d[keep]) / r
        target = normal[keep] / r**i
        design = monomials(chi, betas)
        cols = len(betas)
        if keep.sum() >= len(betas) + len(nuis):
            design = np.hstack([design, monomials(chi, nuis) * r**2])
        sol = _ridge_solve(design, target, w[keep], tol.ridge)
        per_scale.append(sol[:cols])
    if not per_scale:
        raise ValueError(
            f"degree-{i} fit underdetermined: need {len(betas)} in-band samples")
    med = np.median(np.stack(per_scale), axis=0)
    coeffs = {beta: med[j] @ T.normal_projector for j, beta in enumerate(betas)}
    return HomogeneousForm(i, T, coeffs)


# ---------------------------------------------------------------------------
# residual regions and shears


def _ridge_solve(A, B, w, ridge):
    """Weighted least squares with a scale-invariant ridge.

    Columns are normalized to unit weighted norm before the ridge is added,
    otherwise columns with small natural scale (high-degree monomials times
    powers of r, times sample weights) fall below the ridge and get shrunk
    to zero, which leaks their signal into the surviving coefficients.
    """
    sw = np.sqrt(w)[:, None]
    Aw = A * sw
    norms = np.linalg.norm(Aw, axis=0)
    norms[norms == 0] = 1.0
    Aw = Aw / norms
    gram = Aw.T @ Aw + ridge * np.eye(A.shape[1])
    sol = np.linalg.solve(gram, Aw.T @ (B * sw))
    return sol / norms[:, None]


def _residual_region(T: Plane, a: np.ndarray, eval_fn, thresh: float) -> FnPositive:
    """{x : |vertical part of (x - a) minus the graph value| > thresh}."""

    def g(X):
        X = np.atleast_2d(X)
        d = X - a
        vert = d @ T.normal_projector - eval_fn(T.tangent_coords(d))
        return np.linalg.norm(vert, axis=1) - thresh

    return FnPositive(g)


def shear_displacement_bound(T: Plane, a, forms):
    """Bound on the vertical shift of the reduction shear over B(center, radius)."""
    a = np.asarray(a, dtype=float)
    chi_a = T.tangent_coords(a[None, :])[0]
    forms = list(forms)

    def bound(center, radius):
        chi_c = T.tangent_coords(np.asarray(center, dtype=float)[None, :])[0]
        R = float(np.linalg.norm(chi_c - chi_a)) + float(radius)
        total = 0.0
        for form in forms:
            csum = sum(float(np.linalg.norm(c)) for c in form.coefficients.values())
            total += csum * R**form.degree
        return total

    return bound


def _reduction_shear(T: Plane, a: np.ndarray, form: HomogeneousForm) -> ShearMap:
    chi_a = T.tangent_coords(a[None, :])[0]

    def q_poly(chi):
        return form.eval_coords(np.atleast_2d(chi) - chi_a)

    def p_poly(chi):
        return np.zeros((np.atleast_2d(chi).shape[0], T.n))

    return ShearMap(T, q_poly, p_poly)


# ---------------------------------------------------------------------------
# stage conditions


def _combine_eps(per_eps: dict) -> str:
    tested = [s for s in per_eps.values() if s != "untested"]
    if any(s == "fails" for s in tested):
        return "fails"
    if not tested or any(s == "inconclusive" for s in tested):
        return "inconclusive"
    return "holds"


def _cylinder_condition(cur: MeasureOracle, a: np.ndarray, T: Plane,
                        form: HomogeneousForm, i: int, schedule: ScaleSchedule,
                        grids: Grids, tol: Tolerances) -> tuple[str, dict]:
    """Uniform mass in thin cylinders around probes lifted through the form."""
    m = T.m
    probes = [np.zeros(m)]
    for j in range(m):
        e = np.zeros(m)
        e[j] = 1.0
        probes.extend([e, -e])
    norm = unit_ball_volume(m)
    per_eps, details = {}, {}
    for eps in grids.eps_grid:
        def mass_fn(r, eps=eps):
            hull = ClosedBall(a, 2 * r)
            los, his = [], []
            for p in probes:
                chi = (r / 2) * p
                z = a + T.from_coords(chi[None, :])[0] + form.eval_coords(chi[None, :])[0]
                cyl = Cylinder(T, z, eps * r, eps * r**i)
                val, err = cur.mass(Intersection(hull, cyl))
                los.append(val - err)
                his.append(val + err)
            lo, hi = min(los), min(his)
            return (lo + hi) / 2, (hi - lo) / 2

        status, d = eta_uniform_condition(cur, m, schedule, eps, mass_fn,
                                          grids.eta_grid, tol, norm=norm)
        per_eps[eps] = status
        details[eps] = d
    return _combine_eps(per_eps), {"per_eps": per_eps, "eta": details}


def _residual_condition(cur: MeasureOracle, a: np.ndarray, T: Plane,
                        eval_fn, exponent: float, schedule: ScaleSchedule,
                        grids: Grids, tol: Tolerances) -> tuple[str, dict]:
    """Vanishing density of {vertical residual > eps r^exponent} per aperture."""
    per_eps, traces = {}, {}
    for eps in grids.eps_grid:
        status, trace = vanishing_density_trace(
            cur, a, T.m, schedule,
            lambda r, eps=eps: _residual_region(T, a, eval_fn, eps * r**exponent),
            tol)
        per_eps[eps] = status
        traces[eps] = trace
    return _combine_eps(per_eps), {"per_eps": per_eps, "traces": traces}


def _hoelder_search(cur: MeasureOracle, a: np.ndarray, T: Plane, eval_fn,
                    exponent: float, schedule: ScaleSchedule, grids: Grids,
                    tol: Tolerances):
    """Smallest dyadic lambda whose residual set has vanishing density."""
    last = ("inconclusive", None)
    for j in sorted(grids.lambda_exponents):
        lam = 2.0**j
        status, trace = vanishing_density_trace(
            cur, a, T.m, schedule,
            lambda r: _residual_region(T, a, eval_fn, lam * r**exponent), tol)
        if status == "holds":
            return lam, "holds", trace
        last = (status, trace)
    return None, last[0], last[1]


# ---------------------------------------------------------------------------
# the iterated scheme


def iterated_jet_fit(oracle: MeasureOracle, a, k: int, alpha: float,
                     schedule: ScaleSchedule = ScaleSchedule(),
                     tol: Tolerances = DEFAULT_TOL,
                     grids: Grids = DEFAULT_GRIDS,
                     tangent: tuple[int, Plane] | None = None) -> tuple[Jet, Verdict]:
    """Order-(k, alpha) jet of the set at a, with a holds/fails verdict.

    `tangent` short-circuits the tangent-plane stage with a known (m, T).
    """
    a = np.asarray(a, dtype=float)
    if k < 1:
        raise ValueError("jet order k must be >= 1")
    diag: dict = {"k": k, "alpha": alpha}
    if tangent is None:
        est, tdiag = _estimate_tangent(oracle, a, schedule, tol, grids)
        diag["tangent"] = tdiag
        if est is None:
            reason = tdiag.get("reason", "")
            status = "fails" if reason in ("validation_failed", "theta_zero",
                                           "no_local_mass") \
                else "inconclusive"
            plane = tdiag.get("candidate_plane")
            if plane is None:
                plane = Plane.axis(oracle.n, list(range(max(1, min(oracle.m, oracle.n - 1)))))
            diag["stage"] = "tangent_plane"
            return Jet.zero(a, plane, k, alpha), Verdict(status, diag)
        m, T = est
    else:
        m, T = tangent
        if k >= 2:
            try:
                sched = schedule.clip_for(oracle, tol)
                T = refine_tangent_plane(oracle, a, T, sched.radii[-tol.fit_scales:], tol)
            except ValueError:
                pass
    diag["m"] = m

    forms: dict[int, HomogeneousForm] = {}
    cur: MeasureOracle = oracle
    status = "holds"
    stages = []
    lam = 0.0
    for i in range(2, k + 1):
        stage: dict = {"degree": i}
        try:
            fit_sched = schedule.clip_for(cur, tol)
        except ValueError:
            stage["error"] = "no reliable fit scales"
            stages.append(stage)
            status, diag["stage"] = "inconclusive", f"fit_{i}"
            break
        try:
            form = fit_homogeneous_form(cur, a, T, i,
                                        fit_sched.radii[-tol.fit_scales:], tol)
        except ValueError as exc:
            stage["error"] = str(exc)
            stages.append(stage)
            status, diag["stage"] = "inconclusive", f"fit_{i}"
            break
        stage["coefficients"] = {beta: c for beta, c in form.coefficients.items()}

        cond_a, da = _cylinder_condition(cur, a, T, form, i, schedule, grids, tol)
        stage["cylinder_mass"] = da
        stage["cylinder_status"] = cond_a
        if cond_a != "holds":
            stages.append(stage)
            status, diag["stage"] = cond_a, f"cylinder_{i}"
            break
        chi_a = T.tangent_coords(a[None, :])[0]
        eval_fn = lambda chi, form=form: form.eval_coords(np.atleast_2d(chi) - chi_a)
        cond_b, db = _residual_condition(cur, a, T, eval_fn, float(i),
                                         schedule, grids, tol)
        stage["residual"] = db
        stage["residual_status"] = cond_b
        stages.append(stage)
        if cond_b != "holds":
            status, diag["stage"] = cond_b, f"residual_{i}"
            break
        forms[i] = form
        if i < k and form.coefficient_norm() > 1e-12:
            # a zero form shears by the identity; skip the wrapper so exact
            # backends keep their analytic region handling
            shear = _reduction_shear(T, a, form)
            cur = MappedOracle(cur, shear.apply, shear.invert,
                               shear_displacement_bound(T, a, [form]))
    diag["stages"] = stages

    if status == "holds" and alpha > 0:
        chi_a = T.tangent_coords(a[None, :])[0]
        if k in forms:
            top = forms[k]
            eval_fn = lambda chi: top.eval_coords(np.atleast_2d(chi) - chi_a)
        else:
            eval_fn = lambda chi: np.zeros((np.atleast_2d(chi).shape[0], T.n))
        lam_found, lam_status, trace = _hoelder_search(cur, a, T, eval_fn,
                                                       k + alpha, schedule,
                                                       grids, tol)
        diag["hoelder"] = {"lambda": lam_found, "status": lam_status,
                           "trace": trace}
        if lam_found is None:
            status, diag["stage"] = lam_status, "hoelder"
        else:
            lam = lam_found

    jet = Jet(a, T, k, alpha, forms, lam)
    return jet, Verdict(status, diag)


# ---------------------------------------------------------------------------
# graph-neighborhood verification


def verify_graph_residual(oracle: MeasureOracle, a, T: Plane, jet: Jet,
                          schedule: ScaleSchedule = ScaleSchedule(),
                          tol: Tolerances = DEFAULT_TOL,
                          grids: Grids = DEFAULT_GRIDS) -> Verdict:
    """Check the jet's residual hypotheses, then the kappa-neighborhood claim.

    When the residual density vanishes at every aperture and a Hoelder
    constant lambda is available, the set must live in the graph
    neighborhood of width kappa = 2^(k+alpha) lambda (1 + 1e-2) at small
    scales (i.e. the density outside it vanishes).
    """
    a = np.asarray(a, dtype=float)
    k, alpha = jet.degree, jet.alpha
    chi_a = T.tangent_coords(a[None, :])[0]
    eval_fn = lambda chi: jet.eval_coords(np.atleast_2d(chi) - chi_a)
    diag: dict = {}

    hyp, dh = _residual_condition(oracle, a, T, eval_fn, float(k),
                                  schedule, grids, tol)
    diag["residual"] = dh
    if hyp != "holds":
        return Verdict(hyp, dict(diag, stage="residual"))

    lam = jet.hoelder_constant
    if not lam or lam <= 0:
        lam, lam_status, trace = _hoelder_search(oracle, a, T, eval_fn,
                                                 k + alpha, schedule, grids, tol)
        diag["hoelder_trace"] = trace
        if lam is None:
            return Verdict(lam_status, dict(diag, stage="hoelder"))
    diag["lambda"] = lam

    kappa = 2.0**(k + alpha) * lam * (1 + 1e-2)
    diag["kappa"] = kappa
    nbhd = GraphNbhd(a, T, lambda chi: a + eval_fn(chi), kappa, k + alpha)
    outside = oracle.restrict(Complement(nbhd))
    trace = upper_density(outside, a, T.m, schedule, tol,
                          clip_factor=VANISHING_CLIP)
    diag["outside_trace"] = trace
    return Verdict(settle_vanishing(oracle, trace, T.m, tol), diag)


# ---------------------------------------------------------------------------
# cross-checks


def jet_uniqueness_crosscheck(oracle: MeasureOracle, a, T: Plane, k: int,
                              schedule: ScaleSchedule = ScaleSchedule(),
                              tol: Tolerances = DEFAULT_TOL,
                              grids: Grids = DEFAULT_GRIDS) -> Verdict:
    """Direct all-degrees fit vs the iterated scheme; coefficients must agree."""
    a = np.asarray(a, dtype=float)
    m = T.m
    sched = schedule.clip_for(oracle, tol)
    T = refine_tangent_plane(oracle, a, T, sched.radii[-tol.fit_scales:], tol)
    degree_betas = [(i, beta) for i in range(2, k + 1)
                    for beta in multi_indices(m, i)]
    nuis = [(d, beta) for d in (k + 1, k + 2) for beta in multi_indices(m, d)]
    per_scale = []
    for r in sched.radii[-tol.fit_scales:]:
        r = float(r)
        pts, w = oracle.samples_in_ball(a, r)
        if len(pts) == 0:
            continue
        d = pts - a
        normal = d @ T.normal_projector
        keep = (np.linalg.norm(normal, axis=1) <= tol.trim_factor * r) & (w > 0)
        if keep.sum() < len(degree_betas):
            continue
        chi = T.tangent_coords(d[keep]) / r
        cols = [monomials(chi, [beta]) * r**(deg - 2)
                for deg, beta in degree_betas]
        ncols = len(cols)
        if keep.sum() >= len(degree_betas) + len(nuis):
            cols += [monomials(chi, [beta]) * r**(deg - 2)
                     for deg, beta in nuis]
        A = np.hstack(cols)
        sol = _ridge_solve(A, normal[keep] / r**2, w[keep], tol.ridge)
        per_scale.append(sol[:ncols])
    if not per_scale:
        return Verdict("inconclusive", {"error": "direct fit underdetermined"})
    med = np.median(np.stack(per_scale), axis=0)
    direct_forms: dict[int, HomogeneousForm] = {}
    for i in range(2, k + 1):
        coeffs = {}
        for j, (deg, beta) in enumerate(degree_betas):
            if deg == i:
                coeffs[beta] = med[j] @ T.normal_projector
        direct_forms[i] = HomogeneousForm(i, T, coeffs)
    direct = Jet(a, T, k, 0.0, direct_forms)

    iterated, verdict = iterated_jet_fit(oracle, a, k, 0.0, schedule, tol,
                                         grids, tangent=(m, T))
    gap = direct.max_coefficient_gap(iterated)
    diag = {"gap": gap, "direct": direct, "iterated": iterated,
            "iterated_verdict": verdict}
    if verdict.status != "holds":
        return Verdict(verdict.status, diag)
    return Verdict("holds" if gap <= tol.tol_unique else "fails", diag)


def shear_invariance_check(oracle: MeasureOracle, a, jet: Jet,
                           schedule: ScaleSchedule = ScaleSchedule(),
                           tol: Tolerances = DEFAULT_TOL,
                           grids: Grids = DEFAULT_GRIDS) -> Verdict:
    """Residual verdicts must survive shearing the jet graph flat."""
    a = np.asarray(a, dtype=float)
    T = jet.plane
    k = jet.degree
    chi_a = T.tangent_coords(a[None, :])[0]
    eval_fn = lambda chi: jet.eval_coords(np.atleast_2d(chi) - chi_a)
    pre, dpre = _residual_condition(oracle, a, T, eval_fn, float(k),
                                    schedule, grids, tol)

    shear = ShearMap(T, lambda chi: jet.eval_coords(np.atleast_2d(chi) - chi_a),
                     lambda chi: np.zeros((np.atleast_2d(chi).shape[0], T.n)))
    flat = MappedOracle(oracle, shear.apply, shear.invert,
                        shear_displacement_bound(T, a, jet.forms.values()))
    zero_fn = lambda chi: np.zeros((np.atleast_2d(chi).shape[0], T.n))
    post, dpost = _residual_condition(flat, a, T, zero_fn, float(k),
                                      schedule, grids, tol)
    diag = {"before": dpre, "after": dpost, "before_status": pre,
            "after_status": post}
    if "inconclusive" in (pre, post):
        return Verdict("inconclusive", diag)
    return Verdict("holds" if pre == post else "fails", diag)


def order_monotonicity_check(oracle: MeasureOracle, a, k: int, alpha: float,
                             schedule: ScaleSchedule = ScaleSchedule(),
                             tol: Tolerances = DEFAULT_TOL,
                             grids: Grids = DEFAULT_GRIDS,
                             tangent: tuple[int, Plane] | None = None) -> Verdict:
    """If the order-(k, alpha) jet holds, every lower order must hold too."""
    a = np.asarray(a, dtype=float)
    jet, top = iterated_jet_fit(oracle, a, k, alpha, schedule, tol, grids,
                                tangent=tangent)
    if top.status != "holds":
        return Verdict("precondition_failed", {"top": top})
    tangent = (jet.plane.m, jet.plane)
    orders = [(l, b) for l in range(1, k) for b in (0.0, 1.0)]
    orders += [(k, b) for b in sorted({0.0, alpha / 2, alpha}) if b < alpha]
    results = {}
    for l, b in orders:
        _, sub = iterated_jet_fit(oracle, a, l, b, schedule, tol, grids,
                                  tangent=tangent)
        results[f"({l}, {b})"] = sub.status
    diag = {"orders": results, "top": top}
    if any(s == "fails" for s in results.values()):
        return Verdict("fails", diag)
    if all(s == "holds" for s in results.values()):
        return Verdict("holds", diag)
    return Verdict("inconclusive", diag)


# ---------------------------------------------------------------------------
# serialization


def jet_to_json(jet: Jet, verdict: Verdict | None = None,
                diagnostics: dict | None = None) -> str:
    obj = {
        "base": [float(c) for c in jet.base],
        "plane_basis": jet.plane.basis.tolist(),
        "k": jet.degree,
        "alpha": float(jet.alpha),
        "lambda": float(jet.hoelder_constant),
        "forms": {
            str(i): [[list(beta), np.asarray(c, dtype=float).tolist()]
                     for beta, c in sorted(form.coefficients.items())]
            for i, form in sorted(jet.forms.items())
        },
    }
    if verdict is not None:
        obj["verdict"] = verdict.status
    if diagnostics is not None:
        obj["diagnostics"] = jsonable(diagnostics)
    return json.dumps(obj, sort_keys=True)


def jet_from_json(text: str) -> Jet:
    obj = json.loads(text)
    plane = Plane.from_spanning(np.array(obj["plane_basis"]))
    forms = {}
    for key, entries in obj["forms"].items():
        i = int(key)
        coeffs = {tuple(beta): np.array(c, dtype=float) for beta, c in entries}
        forms[i] = HomogeneousForm(i, plane, coeffs)
    return Jet(np.array(obj["base"], dtype=float), plane, int(obj["k"]),
               float(obj["alpha"]), forms, float(obj.get("lambda", 0.0)))


def jsonable(obj):
    """Recursively convert verdicts, traces and arrays to plain JSON values."""
    if isinstance(obj, Verdict):
        return {"status": obj.status, "diagnostics": jsonable(obj.diagnostics)}
    if isinstance(obj, DensityTrace):
        return json.loads(obj.to_json())
    if isinstance(obj, Jet):
        return json.loads(jet_to_json(obj))
    if isinstance(obj, HomogeneousForm):
        return {"degree": obj.degree,
                "coefficients": [[list(b), np.asarray(c).tolist()]
                                 for b, c in sorted(obj.coefficients.items())]}
    if isinstance(obj, Plane):
        return obj.basis.tolist()
    if isinstance(obj, ScaleSchedule):
        return obj.to_dict()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    return obj
