import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conformal_zeros.pseudo_euclidean import (
    MetricSpace,
    Subspace,
    adjoint,
    component_representatives,
    gram,
    intersect,
    is_null,
    is_semidefinite_on,
    isometry_from_params,
    kernel,
    normal_frame,
    orth_complement,
    params_from_skew,
    radical,
    range_space,
    rank,
    restricted_signature,
    sample_null,
    skew_from_params,
    skew_part,
    sym_part,
)

signatures = st.integers(2, 6).flatmap(lambda n: st.tuples(st.just(n), st.integers(0, n)))
seeds = st.integers(0, 2**32 - 1)


def make_space(sig) -> MetricSpace:
    n, p = sig
    return MetricSpace(n, p, n - p)


def test_default_metric_is_diagonal():
    sp = MetricSpace(4, 1, 3)
    np.testing.assert_array_equal(sp.g, np.diag([1.0, -1.0, -1.0, -1.0]))
    np.testing.assert_array_equal(sp.g_inv, sp.g)


@pytest.mark.parametrize(
    "kwargs, message",
    [
        (dict(n=3, p=2, q=2), "does not add up"),
        (dict(n=1, p=1, q=0), "dimension must be"),
        (dict(n=2, p=1, q=1, g=np.eye(2)), "signature"),
        (dict(n=2, p=2, q=0, g=[[1.0, 2.0], [0.0, 1.0]]), "symmetric"),
        (dict(n=2, p=1, q=1, g=[[1.0, 1.0], [1.0, 1.0]]), "degenerate"),
    ],
)
def test_metric_space_rejects_bad_input(kwargs, message):
    with pytest.raises(ValueError, match=message):
        MetricSpace(**kwargs)


def test_full_metric_is_accepted():
    g = np.array([[0.0, 1.0], [1.0, 0.0]])
    sp = MetricSpace(2, 1, 1, g)
    assert sp.inner([1, 0], [0, 1]) == 1.0
    assert is_null([1.0, 0.0], sp)


def test_kernel_and_range_of_known_matrix():
    A = np.array([[1.0, 0, 0], [0, 2.0, 0], [0, 0, 0]])
    assert kernel(A).equals(Subspace(np.array([[0.0], [0.0], [1.0]]), 3))
    assert range_space(A).equals(Subspace(np.eye(3)[:, :2], 3))
    assert rank(A) == 2


def test_tiny_matrix_has_rank_zero():
    # an absolute floor: a Jacobian of size 1e-20 counts as zero
    assert rank(1e-20 * np.eye(3)) == 0
    assert kernel(1e-20 * np.eye(3)).dim == 3


def test_kernel_rejects_nonpositive_tolerance():
    with pytest.raises(ValueError):
        kernel(np.eye(2), 0.0)


@settings(max_examples=40, deadline=None)
@given(sig=signatures, seed=seeds)
def test_orth_complement_dimension_and_orthogonality(sig, seed):
    sp = make_space(sig)
    rng = np.random.default_rng(seed)
    k = int(rng.integers(0, sp.n + 1))
    S = Subspace.span(rng.standard_normal((k, sp.n)), sp.n)
    C = orth_complement(S, sp)
    assert S.dim + C.dim == sp.n
    if S.dim and C.dim:
        assert np.max(np.abs(S.basis.T @ sp.g @ C.basis)) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=seeds)
def test_intersection_of_planted_subspaces(seed):
    rng = np.random.default_rng(seed)
    common = rng.standard_normal((2, 6))
    S1 = Subspace.span(np.vstack([common, rng.standard_normal((1, 6))]))
    S2 = Subspace.span(np.vstack([common, rng.standard_normal((2, 6))]))
    I = intersect(S1, S2)
    assert I.equals(Subspace.span(common))


def test_intersect_rejects_mismatched_ambient():
    with pytest.raises(ValueError):
        intersect(Subspace.full(2), Subspace.full(3))


def test_restricted_signature_and_radical_on_null_plane():
    sp = MetricSpace(4, 2, 2)
    l1 = np.array([1.0, 0, 1, 0]) / np.sqrt(2)
    e1 = np.array([0.0, 1, 0, 0])
    S = Subspace.span([l1, e1])
    assert restricted_signature(S, sp) == (1, 0, 1)
    assert is_semidefinite_on(S, sp)
    assert radical(S, sp).equals(Subspace.span([l1]))
    L = Subspace.span([l1, [0, 1, 0, 1]])
    assert restricted_signature(L, sp) == (0, 0, 2)
    assert not is_semidefinite_on(Subspace.full(4), sp)


@settings(max_examples=40, deadline=None)
@given(sig=signatures, seed=seeds)
def test_skew_and_sym_parts(sig, seed):
    sp = make_space(sig)
    A = np.random.default_rng(seed).standard_normal((sp.n, sp.n))
    K, S = skew_part(A, sp), sym_part(A, sp)
    np.testing.assert_allclose(K + S, A, atol=1e-12)
    np.testing.assert_allclose(sp.g @ K, -(sp.g @ K).T, atol=1e-12)
    np.testing.assert_allclose(sp.g @ S, (sp.g @ S).T, atol=1e-12)
    np.testing.assert_allclose(adjoint(adjoint(A, sp), sp), A, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(sig=signatures, seed=seeds)
def test_skew_params_round_trip_and_isometry(sig, seed):
    sp = make_space(sig)
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(sp.n * (sp.n - 1) // 2) * 0.5
    K = skew_from_params(theta, sp)
    np.testing.assert_allclose(params_from_skew(K, sp), theta, atol=1e-12)
    R = isometry_from_params(theta, sp)
    np.testing.assert_allclose(R.T @ sp.g @ R, sp.g, atol=1e-9 * np.linalg.norm(R) ** 2)


@settings(max_examples=30, deadline=None)
@given(sig=signatures)
def test_normal_frame_and_component_representatives(sig):
    sp = make_space(sig)
    P = normal_frame(sp)
    np.testing.assert_allclose(P.T @ sp.g @ P, np.diag([1.0] * sp.p + [-1.0] * sp.q), atol=1e-12)
    reps = component_representatives(sp)
    assert len(reps) == (4 if sp.p and sp.q else 2)
    for R in reps:
        np.testing.assert_allclose(R.T @ sp.g @ R, sp.g, atol=1e-12)
    # distinct components: the determinant and the orientation of the positive block separate them
    Pinv = np.linalg.inv(P)
    labels = set()
    for R in reps:
        M = Pinv @ R @ P
        labels.add((np.sign(np.linalg.det(M[: sp.p, : sp.p])) if sp.p else 1.0, np.sign(np.linalg.det(M[sp.p :, sp.p :])) if sp.q else 1.0))
    assert len(labels) == len(reps)


@settings(max_examples=40, deadline=None)
@given(sig=signatures.filter(lambda s: 0 < s[1] < s[0]), seed=seeds)
def test_sample_null_is_null_and_in_subspace(sig, seed):
    sp = make_space(sig)
    rng = np.random.default_rng(seed)
    x = sample_null(Subspace.full(sp.n), sp, rng)
    assert abs(np.linalg.norm(x) - 1.0) < 1e-12
    assert abs(sp.inner(x, x)) < 1e-10


def test_sample_null_rejects_definite_subspace():
    sp = MetricSpace(3, 3, 0)
    with pytest.raises(ValueError):
        sample_null(Subspace.full(3), sp, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_null(Subspace.zero(3), sp, np.random.default_rng(0))


def test_gram_of_standard_basis_is_metric():
    sp = MetricSpace(3, 1, 2)
    np.testing.assert_array_equal(gram(Subspace.full(3), sp), sp.g)
