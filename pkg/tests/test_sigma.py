import numpy as np
import pytest

from conformal_zeros import fixtures
from conformal_zeros.fields import jet_at
from conformal_zeros.pseudo_euclidean import Subspace
from conformal_zeros.sigma import (
    kernel_dim_locally_constant,
    nullspace_distribution_check,
    sym_dxi_divisibility,
    unique_continuation_check,
    xi_at,
    xi_kernel_transport,
)
from conformal_zeros.zeros import local_model


@pytest.fixture
def xi_field():
    space, f = fixtures.xi_nonzero(1.0)
    L, _ = fixtures.null_pairs(space)
    return space, f, L


@pytest.mark.parametrize("alpha", [1.0, 2.5])
@pytest.mark.parametrize("abc", [(0.2, -0.1, 0.3), (-0.4, 0.25, 0.0), (0.0, 0.0, 0.6)])
def test_xi_matches_closed_form(alpha, abc):
    # solving J u = 0, g(u, grad phi) = 1 by hand at a l1 + b l2 + c l3 gives
    # xi(l1) = -b / (2 alpha), xi(l2) = a / (2 alpha), xi(l3) = 1/4
    space, f = fixtures.xi_nonzero(alpha)
    L, _ = fixtures.null_pairs(space)
    a, b, c = abc
    sample = xi_at(jet_at(f, a * L[0] + b * L[1] + c * L[2]), space)
    assert sample.defined_by == "phi_zero_rule"
    assert sample.tangent_basis.equals(Subspace.span(L))
    np.testing.assert_allclose([sample.form @ l for l in L], [-b / (2 * alpha), a / (2 * alpha), 0.25], atol=1e-12)
    assert sample.choice_gap < 1e-10
    assert not sample.is_zero


def test_xi_is_zero_by_declaration_when_phi_is_nonzero():
    space, f = fixtures.neutral_counterexample(4)
    m2 = fixtures.counterexample_line(4)
    sample = xi_at(jet_at(f, 0.3 * m2), space)
    assert sample.defined_by == "phi_nonzero_rule" and sample.is_zero
    assert sample.tangent_basis.contains(m2)


def test_xi_on_isolated_zero_is_empty():
    space, f = fixtures.special_conformal(3)
    sample = xi_at(jet_at(f, np.zeros(3)), space)
    assert sample.tangent_basis.dim == 0 and sample.xi.shape == (0,)


def test_xi_accepts_an_explicit_model(xi_field):
    space, f, L = xi_field
    jet = jet_at(f, 0.1 * L[0])
    assert np.allclose(xi_at(jet, space, local_model(jet, space)).xi, xi_at(jet, space).xi)


def test_kernel_transport_and_negative_control(xi_field):
    space, f, L = xi_field
    x = 0.2 * L[0] - 0.1 * L[1] + 0.3 * L[2]
    sample = xi_at(jet_at(f, x), space)
    K = sample.kernel()
    assert K.dim == 2
    d = K.basis[:, 0]
    assert xi_kernel_transport(f, x, d) < 1e-7
    # a direction of Sigma outside Ker xi
    off = L[2]
    assert abs(sample.form @ off) > 0.1
    assert xi_kernel_transport(f, x, off) > 0.1


def test_kernel_transport_rejects_leaving_sigma(xi_field):
    space, f, L = xi_field
    _, Lp = fixtures.null_pairs(space)
    with pytest.raises(ValueError, match="leaves"):
        xi_kernel_transport(f, 0.1 * L[0], Lp[2])


def test_sym_dxi_divisibility_and_corrupted_control(xi_field):
    space, f, L = xi_field
    x = -0.3 * L[0] + 0.25 * L[1]
    out = sym_dxi_divisibility(f, x)
    assert out.passed()
    T = xi_at(jet_at(f, x), space).tangent_basis.basis

    def honest(s):
        return xi_at(jet_at(f, x + T @ s), space).form @ T

    quad = np.array([[1.0, 0.5, 0.0], [0.5, -2.0, 0.3], [0.0, 0.3, 1.0]])

    def corrupted(s):
        # symmetric noise with a gradient term not divisible by xi
        return honest(s) + quad @ s

    bad = sym_dxi_divisibility(f, x, xi_fn=corrupted)
    assert bad.restricted_residual > 1e-2
    assert not bad.passed()


def test_sym_dxi_needs_nonzero_xi():
    space, f = fixtures.neutral_counterexample(4)
    with pytest.raises(ValueError, match="vanishes"):
        sym_dxi_divisibility(f, 0.2 * fixtures.counterexample_line(4))


def test_nullspace_on_lorentz_cone_is_generator(rng):
    space, f = fixtures.lorentz_cone(4)
    model = local_model(jet_at(f, np.zeros(4)), space)
    samples = model.sample(rng, 12, radius=0.5)
    samples = samples[np.linalg.norm(samples, axis=1) > 0.05]
    rep = nullspace_distribution_check(f, samples, base=np.zeros(4))
    assert rep.passed and set(rep.nullities) == {1}
    assert {c.name for c in rep.checks} == {"P-null", "P-lines-in-zero-set", "generators-in-P"}


def test_nullspace_on_counterexample_line_contains_m2():
    space, f = fixtures.neutral_counterexample(4)
    m2 = fixtures.counterexample_line(4)
    rep = nullspace_distribution_check(f, [t * m2 for t in (-0.4, 0.2, 0.5)], base=np.zeros(4))
    assert rep.passed and set(rep.nullities) == {1}


def test_nullspace_is_vacuous_for_riemannian_rotation():
    space, f = fixtures.rotation(3)
    rep = nullspace_distribution_check(f, [[0, 0, t] for t in (0.1, 0.5)])
    assert rep.checks[0].passed is None and rep.passed


def test_nullspace_rejects_non_zeros():
    space, f = fixtures.rotation(3)
    with pytest.raises(ValueError):
        nullspace_distribution_check(f, [[1.0, 0.0, 0.0]])


def test_unique_continuation():
    space, f = fixtures.neutral_counterexample(4)
    m2 = fixtures.counterexample_line(4)
    check = unique_continuation_check(f, [t * m2 for t in (-0.3, -0.1, 0.2, 0.4)])
    assert check.passed is True
    space, f = fixtures.xi_nonzero(1.0)
    L, _ = fixtures.null_pairs(space)
    # xi vanishes nowhere on L (xi(l3) = 1/4), so the check is inapplicable
    assert unique_continuation_check(f, [0.1 * L[0], 0.2 * L[1]]).passed is None


def test_kernel_dimension_flag_marks_the_jump_on_the_counterexample():
    space, f = fixtures.neutral_counterexample(4)
    m2 = fixtures.counterexample_line(4)
    line = Subspace.span([m2])
    assert kernel_dim_locally_constant(f, np.zeros(4), line) == (False, [2, 1, 1])
    assert kernel_dim_locally_constant(f, 0.3 * m2, line) == (True, [1, 1, 1])
    # probing off the zero set finds no essential neighbour
    off = Subspace.span([[1.0, 0.0, 0.0, 0.0]])
    assert kernel_dim_locally_constant(f, 0.3 * m2, off)[0] is None


def test_kernel_dimension_is_constant_on_the_xi_plane(xi_field):
    space, f, L = xi_field
    x = 0.2 * L[0] - 0.1 * L[1] + 0.3 * L[2]
    stable, dims = kernel_dim_locally_constant(f, x, Subspace.span(L))
    assert stable and len(dims) == 7
