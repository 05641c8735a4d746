import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from curvedflats.pseudo_linalg import (
    MetricSpace,
    Subspace,
    adapted_basis,
    bracket,
    normalize_rp1,
    null_plane_rulings,
    ruling_coefficients,
)

SP = MetricSpace(2)
vectors = st.lists(st.floats(-3, 3), min_size=6, max_size=6).map(np.array)


def test_metric_signature():
    assert SP.dim == 6
    assert list(SP.signs) == [1, 1, 1, 1, -1, -1]
    with pytest.raises(ValueError):
        MetricSpace(1)
    with pytest.raises(ValueError):
        SP.inner(np.ones(5), np.ones(6))


@settings(max_examples=30, deadline=None)
@given(vectors, vectors, vectors)
def test_wedge_is_skew_and_matches_formula(a, b, c):
    W = np.asarray(SP.wedge(a, b))
    expected = SP.inner(a, c) * b - SP.inner(b, c) * a
    assert np.allclose(W @ c, expected, atol=1e-10)
    assert SP.skew_defect(W) <= 1e-10 * max(1.0, np.abs(W).max())
    assert np.allclose(W, -np.asarray(SP.wedge(b, a)))


def test_random_orthogonal_preserves_form(rng):
    R = SP.random_orthogonal(rng)
    assert np.allclose(R.T @ SP.gram @ R, SP.gram, atol=1e-12)
    assert np.allclose(SP.inv_orthogonal(R) @ R, np.eye(6), atol=1e-12)


def test_as_skew_rejects_non_skew():
    with pytest.raises(ValueError):
        SP.as_skew(np.eye(6))


def test_bracket_of_commuting_wedges():
    e = SP.e
    X, Y = SP.wedge(e(0), e(2)), SP.wedge(e(4), e(3))
    assert np.abs(np.asarray(bracket(X, Y))).max() == 0


def test_subspace_signature_and_intersection():
    e = SP.e
    V = Subspace(np.column_stack([e(0), e(1), e(4), e(5)]), SP)
    assert V.signature() == (2, 2, 0)
    null = Subspace(np.column_stack([e(0) + e(4), e(1) + e(5)]), SP)
    assert null.is_null()
    assert null.signature() == (0, 0, 2)
    assert V.intersect(null).rank == 2
    assert V.orth_complement().signature() == (2, 0, 0)
    assert V.contains(e(0) - e(5)) and not V.contains(e(2))


def test_normalize_rp1_is_projective():
    assert normalize_rp1((2.0, -4.0)) == normalize_rp1((-1.0, 2.0))
    with pytest.raises(ValueError):
        normalize_rp1((0.0, 0.0))


def test_adapted_basis_gram(rng):
    R = SP.random_orthogonal(rng, 0.5)
    e = SP.e
    B = R @ np.column_stack([e(0), e(4), e(1), e(5)])
    ab = adapted_basis(B, SP)
    assert np.allclose(ab.T @ SP.gram @ ab, np.diag([1, 1, -1, -1]), atol=1e-10)
    assert Subspace(ab, SP).distance(Subspace(B, SP)) < 1e-10


@settings(max_examples=20, deadline=None)
@given(st.floats(0, np.pi), st.floats(0, np.pi))
def test_rulings_null_and_meeting(t, s):
    e = SP.e
    V = Subspace(np.column_stack([e(0), e(1), e(4), e(5)]), SP)
    A = null_plane_rulings(V, "A", (np.cos(t), np.sin(t)))
    B = null_plane_rulings(V, "B", (np.cos(s), np.sin(s)))
    assert A.is_null() and B.is_null()
    assert A.intersect(B).rank == 1


def test_ruling_family_name_checked():
    with pytest.raises(ValueError):
        ruling_coefficients("C", (1, 0))
