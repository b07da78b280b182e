import numpy as np
import pytest

from conformal_zeros import fixtures
from conformal_zeros.fields import FlatConformalField, evaluate, flow_conjugate, jet_at
from conformal_zeros.pseudo_euclidean import MetricSpace, Subspace
from conformal_zeros.zeros import (
    classify_zero,
    component_scan,
    find_zeros,
    grid_points,
    kobayashi_model,
    local_model,
    newton,
    null_geodesic_jet_transport,
    range_residual,
    simultaneous_kernel,
)


def test_grid_points_shape_and_box_forms():
    assert grid_points(1.0, 3, 4).shape == (64, 3)
    pts = grid_points([[0, 1], [2, 3]], 2, 3)
    assert pts.min(axis=0).tolist() == [0, 2] and pts.max(axis=0).tolist() == [1, 3]
    with pytest.raises(ValueError):
        grid_points([[1, 0], [0, 1]], 2, 3)
    with pytest.raises(ValueError):
        grid_points(1.0, 2, 1)


def test_newton_converges_to_isolated_zero():
    sp, f = fixtures.dilation(3)
    f = fixtures.translated(f, [0.2, -0.1, 0.3])
    x = newton(f, [[0.5, 0.5, 0.5]])[0]
    np.testing.assert_allclose(x, [0.2, -0.1, 0.3], atol=1e-12)


def test_rotation_zeros_are_the_axis():
    sp, f = fixtures.rotation(3)
    pts = find_zeros(f, 1.0, 5)
    assert len(pts) == 5
    np.testing.assert_allclose(pts[:, :2], 0.0, atol=1e-12)
    np.testing.assert_allclose(sorted(pts[:, 2]), np.linspace(-1, 1, 5), atol=1e-12)
    assert np.all(np.linalg.norm(evaluate(f, pts), axis=1) < 1e-9)


def test_find_zeros_returns_empty_array_when_there_are_none():
    sp = MetricSpace(3, 3, 0)
    f = FlatConformalField(sp, [1.0, 0, 0], np.zeros((3, 3)), 0.0, np.zeros(3))
    assert find_zeros(f, 1.0, 3).shape == (0, 3)


def test_rotation_classifies_as_nonessential_alpha():
    sp, f = fixtures.rotation(3)
    cls = classify_zero(jet_at(f, np.zeros(3)), sp)
    assert (cls.kind, cls.case, cls.singular) == ("nonessential", "alpha", False)
    assert not cls.essential


def test_dilation_is_essential_because_phi_is_nonzero():
    sp, f = fixtures.dilation(3, c=1.5)
    cls = classify_zero(jet_at(f, np.zeros(3)), sp)
    assert cls.essential and cls.phi == pytest.approx(3.0)
    assert cls.case == "beta" and cls.H_dim == 0


def test_special_conformal_is_essential_because_grad_phi_leaves_the_range():
    sp, f = fixtures.special_conformal(3)
    jet = jet_at(f, np.zeros(3))
    assert jet.phi == 0.0
    assert range_residual(jet, sp) == pytest.approx(1.0)
    cls = classify_zero(jet, sp)
    assert cls.essential and cls.case == "beta"


def test_lorentz_cone_vertex_is_singular_gamma():
    sp, f = fixtures.lorentz_cone(4)
    cls = classify_zero(jet_at(f, np.zeros(4)), sp)
    assert (cls.case, cls.singular) == ("gamma", True)
    assert cls.H_dim == 3 and cls.H_signature == (1, 2, 0)


def test_classify_rejects_nonzero_points():
    sp, f = fixtures.dilation(3)
    with pytest.raises(ValueError, match="not a zero"):
        classify_zero(jet_at(f, np.ones(3)), sp)


def test_euclidean_special_conformal_zero_is_isolated(rng):
    sp, f = fixtures.special_conformal(3)
    model = local_model(jet_at(f, np.zeros(3)), sp)
    # H = u-perp is definite, so C n H = {0}
    assert model.H.dim == 2 and model.sing.dim == 0
    with pytest.raises(ValueError):
        model.sample(rng, 1)
    assert len(find_zeros(f, 1.0, 5)) == 1


def test_cone_model_membership(rng):
    sp, f = fixtures.lorentz_cone(4)
    model = local_model(jet_at(f, np.zeros(4)), sp)
    pts = model.sample(rng, 30, radius=0.5)
    assert np.max(np.linalg.norm(evaluate(f, pts), axis=1)) < 1e-12
    assert all(model.contains(y) for y in pts)
    assert not model.contains([0.3, 0.0, 0.0, 0.0])
    assert model.membership_residual([0.0, 0.3, 0.0, 0.0]) > 0.05


def test_local_model_refuses_nonessential_zero():
    sp, f = fixtures.rotation(3)
    with pytest.raises(ValueError):
        local_model(jet_at(f, np.zeros(3)), sp)


def test_kobayashi_model_for_rotation_is_the_axis(rng):
    sp, f = fixtures.rotation(4)
    model = kobayashi_model(jet_at(f, np.zeros(4)), sp)
    assert model.kind == "kobayashi"
    assert model.H.equals(Subspace(np.eye(4)[:, 2:], 4))
    pts = model.sample(rng, 10)
    assert np.max(np.linalg.norm(evaluate(f, pts), axis=1)) < 1e-12
    dsp, dil = fixtures.dilation(3)
    with pytest.raises(ValueError):
        kobayashi_model(jet_at(dil, np.zeros(3)), dsp)


def test_nonessential_zero_of_non_killing_field_gets_tangent_model(rng):
    # conjugating a rotation by a special conformal flow keeps a nonessential zero at 0 but makes phi nonconstant
    sp, rot = fixtures.rotation(3)
    X = FlatConformalField(sp, np.zeros(3), np.zeros((3, 3)), 0.0, [0.7, 0.0, 0.0])
    f = flow_conjugate(rot, X, 1.0)
    jet = jet_at(f, np.zeros(3))
    assert np.linalg.norm(jet.v) < 1e-12 and np.any(np.abs(jet.dphi) > 1e-6)
    model = kobayashi_model(jet, sp)
    assert model.kind == "kobayashi-tangent"
    assert model.H.dim == 1


def test_simultaneous_kernel_of_counterexample_is_a_null_line():
    sp, f = fixtures.neutral_counterexample(4)
    H = simultaneous_kernel(jet_at(f, np.zeros(4)))
    assert H.dim == 1
    assert H.contains(fixtures.counterexample_line(4))


def test_component_scan_rotation_has_one_nonessential_component():
    sp, f = fixtures.rotation(3)
    rep = component_scan(f, 1.0, 5)
    assert len(rep.components) == 1
    comp = rep.components[0]
    assert comp.kind == "nonessential"
    checks = {c.name: c for c in comp.checks}
    assert checks["even-codimension"].passed
    assert checks["even-codimension"].measured["codimensions"] == [2]
    assert all(c.passed is not False for c in comp.checks)


def test_component_scan_counterexample_has_one_essential_line():
    sp, f = fixtures.neutral_counterexample(4)
    rep = component_scan(f, 1.0, 5, seed=1)
    assert len(rep.components) == 1
    comp = rep.components[0]
    assert comp.kind == "essential" and comp.dims == {"dim_Sigma": 1}
    pts = rep.points()[comp.indices]
    line = Subspace.span([fixtures.counterexample_line(4)])
    assert max(line.distance(p) for p in pts) < 1e-7
    assert all(c.passed for c in comp.checks)


def test_component_scan_lorentz_cone_is_mixed():
    sp, f = fixtures.lorentz_cone(4)
    rep = component_scan(f, 1.0, 5, seed=3)
    mixed = [c for c in rep.components if c.sigma and c.rest]
    assert len(mixed) == 1
    assert mixed[0].dims == {"dim_Sigma": 0, "dim_N_minus_Sigma": 2, "r": 1}
    assert all(c.passed is not False for c in mixed[0].checks)


def test_translated_dilation_has_a_single_point_component():
    sp, f = fixtures.dilation(3)
    rep = component_scan(fixtures.translated(f, [0.5, 0.5, 0.5]), 1.0, 4)
    assert len(rep.components) == 1 and rep.components[0].dims == {"dim_Sigma": 0}


def test_null_line_transport_on_counterexample_and_rejection():
    sp, f = fixtures.neutral_counterexample(4)
    m2 = fixtures.counterexample_line(4)
    out = null_geodesic_jet_transport(f, np.zeros(4), m2, t_max=0.3, steps=7)
    assert out.passed and out.samples == 21
    with pytest.raises(ValueError, match="null cone"):
        null_geodesic_jet_transport(f, np.zeros(4), np.array([1.0, 0, 0, 0]))


def test_null_line_transport_for_killing_field_is_exact():
    sp, f = fixtures.killing_null_line(3)
    l = np.array([1.0, 1.0, 0.0]) / np.sqrt(2)
    out = null_geodesic_jet_transport(f, np.zeros(3), l)
    assert out.residual_b == 0.0 and out.residual_a < 1e-9
