import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gmtjet.fixtures import SffChart, make_fixture, point_key
from gmtjet.geometry import HomogeneousForm, Jet, Plane
from gmtjet.jetfit import estimate_tangent_plane, iterated_jet_fit
from gmtjet.sff import approximate_sff, normal_field_identity_check


def analytic_form(fx):
    a = fx.marked_points[0]
    return approximate_sff(fx.jets[point_key(a)])


def chart_normal_at_base(fx):
    ch = fx.sff_charts[point_key(fx.marked_points[0])]
    return ch.normal(np.atleast_2d(ch.t0))[0]


# ---------------------------------------------------------------------------
# the form itself


def test_line_sff_is_zero():
    fx = make_fixture("line")
    form = analytic_form(fx)
    e1 = np.array([1.0, 0.0])
    assert np.linalg.norm(form(e1, e1)) <= 1e-15


def test_parabola_sff_is_curvature():
    fx = make_fixture("graph_poly", coeffs=(1.0, 0.0))
    form = analytic_form(fx)
    e1 = np.array([1.0, 0.0])
    assert np.allclose(form(e1, e1), [0.0, 1.0], atol=1e-12)


def test_degree_one_jet_rejected():
    plane = Plane.axis(2, [0])
    jet = Jet(np.zeros(2), plane, 1, 0.0, {})
    with pytest.raises(ValueError):
        approximate_sff(jet)


def test_tangential_values_rejected():
    plane = Plane.axis(2, [0])
    # coefficients pointing along the plane never make it into a jet
    with pytest.raises(ValueError):
        HomogeneousForm(2, plane, {(2,): np.array([1.0, 0.0])})


def test_sphere_eigenvalues_from_fitted_jet():
    fx = make_fixture("sphere", R=1.0)
    a = fx.marked_points[0]
    tangent = estimate_tangent_plane(fx.oracle, a, fx.schedule)
    jet, verdict = iterated_jet_fit(fx.oracle, a, 2, 0.0, fx.schedule,
                                    tangent=tangent)
    assert verdict.status == "holds"
    form = approximate_sff(jet)
    nu = chart_normal_at_base(fx)
    eig = np.linalg.eigvalsh(-form.matrix(nu))
    assert np.allclose(eig, [1.0, 1.0], rtol=1e-2)


@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_sphere_eigenvalues_scale_with_radius(R):
    fx = make_fixture("sphere", R=R)
    form = analytic_form(fx)
    nu = chart_normal_at_base(fx)
    eig = np.linalg.eigvalsh(-form.matrix(nu))
    assert np.allclose(eig, [1.0 / R, 1.0 / R], rtol=1e-2)


def test_torus_principal_curvatures():
    fx = make_fixture("torus")
    R, r = fx.params["R"], fx.params["r"]
    form = analytic_form(fx)
    nu = chart_normal_at_base(fx)
    eig = sorted(np.linalg.eigvalsh(-form.matrix(nu)))
    assert np.allclose(eig, sorted([1.0 / (R + r), 1.0 / r]), rtol=1e-9)


# ---------------------------------------------------------------------------
# invariances


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_symmetry(seed):
    rng = np.random.default_rng(seed)
    plane = Plane.axis(3, [0, 1])
    coeffs = {b: np.array([0.0, 0.0, rng.normal()])
              for b in [(2, 0), (1, 1), (0, 2)]}
    jet = Jet(np.zeros(3), plane, 2, 0.0, {2: HomogeneousForm(2, plane, coeffs)})
    form = approximate_sff(jet)
    u, v = rng.normal(size=3), rng.normal(size=3)
    assert np.allclose(form(u, v), form(v, u), atol=1e-12)


def test_frame_independence():
    rng = np.random.default_rng(3)
    plane = Plane.axis(3, [0, 1])
    coeffs = {b: np.array([0.0, 0.0, rng.normal()])
              for b in [(2, 0), (1, 1), (0, 2)]}
    jet = Jet(np.zeros(3), plane, 2, 0.0, {2: HomogeneousForm(2, plane, coeffs)})
    form = approximate_sff(jet)

    th = 0.8
    R = np.array([[np.cos(th), 0.0, -np.sin(th)],
                  [0.0, 1.0, 0.0],
                  [np.sin(th), 0.0, np.cos(th)]])
    plane_r = Plane.from_spanning(plane.basis @ R.T)
    coeffs_r = {b: R @ c for b, c in coeffs.items()}
    jet_r = Jet(np.zeros(3), plane_r, 2, 0.0,
                {2: HomogeneousForm(2, plane_r, coeffs_r)})
    form_r = approximate_sff(jet_r)
    for _ in range(10):
        u, v = rng.normal(size=3), rng.normal(size=3)
        assert np.allclose(R @ form(u, v), form_r(R @ u, R @ v), atol=1e-6)


# ---------------------------------------------------------------------------
# the normal-field identity


@pytest.mark.parametrize("name,kwargs", [
    ("circle", {}),
    ("sphere", {}),
    ("torus", {}),
    ("graph_poly", dict(coeffs=(1.0, 0.0))),
])
def test_identity_on_smooth_fixtures(name, kwargs):
    fx = make_fixture(name, **kwargs)
    a = fx.marked_points[0]
    out = normal_field_identity_check(fx, a)
    assert out.status == "holds", out.diagnostics
    assert out.diagnostics["worst_gap"] <= 1e-2


def test_identity_value_on_circle():
    fx = make_fixture("circle", R=1.0)
    out = normal_field_identity_check(fx, fx.marked_points[0])
    tangent_pairs = [p for p in out.diagnostics["pairs"] if abs(p["rhs"]) > 0.5]
    assert tangent_pairs
    for p in tangent_pairs:
        assert abs(abs(p["lhs"]) - 1.0) <= 1e-6


def test_identity_rejects_bad_normal_field():
    fx = make_fixture("circle")
    key = point_key(fx.marked_points[0])
    ch = fx.sff_charts[key]
    fx.sff_charts[key] = SffChart(ch.mapping, ch.jacobian,
                                  lambda p: 1.5 * ch.normal(p), ch.t0)
    out = normal_field_identity_check(fx, fx.marked_points[0])
    assert out.status == "precondition_failed"


def test_identity_rejects_tangential_field():
    fx = make_fixture("circle")
    key = point_key(fx.marked_points[0])
    ch = fx.sff_charts[key]

    def tangential(p):
        J = ch.jacobian(np.atleast_2d(p))
        col = J[:, :, 0]
        return col / np.linalg.norm(col, axis=1, keepdims=True)

    fx.sff_charts[key] = SffChart(ch.mapping, ch.jacobian, tangential, ch.t0)
    out = normal_field_identity_check(fx, fx.marked_points[0])
    assert out.status == "precondition_failed"
