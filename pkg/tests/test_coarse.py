from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sfcdd import oracles
from sfcdd.coarse import (
    CoarseSpace,
    agglomerate_sizes,
    build_restriction,
    galerkin_coarse,
    nicolaides_restriction,
)
from sfcdd.errors import ConfigurationError
from sfcdd.grid import GridSpec, diagonal_transform, discretize
from sfcdd.partition import build_partition, compute_weights


def laplace(levels):
    return diagonal_transform(discretize(GridSpec(levels)).A).A


def test_agglomerate_sizes():
    assert agglomerate_sizes(10, 3).tolist() == [4, 3, 3]


def test_single_agglomerate_per_block():
    part = build_partition(10, 3, Fraction(1, 2))
    R0 = build_restriction(part, 1).toarray()
    for i in range(3):
        np.testing.assert_array_equal(np.flatnonzero(R0[i]), part.core(i))
    np.testing.assert_array_equal(R0.sum(axis=1), [4, 3, 3])


def test_singleton_agglomerates_are_a_permutation():
    A = laplace((4,))
    part = build_partition(15, 3, Fraction(1, 2))
    R0 = build_restriction(part, 5)
    assert (R0.sum(axis=0) == 1).all() and (R0.sum(axis=1) == 1).all()
    cs = CoarseSpace(A, R0)
    Pi = R0.toarray()
    np.testing.assert_array_equal(cs.A0.toarray(), Pi @ A.toarray() @ Pi.T)
    np.testing.assert_allclose(np.linalg.eigvalsh(cs.A0.toarray()), np.linalg.eigvalsh(A.toarray()), atol=1e-13)


def test_identity_gives_block_sizes():
    part = build_partition(11, 4, Fraction(1, 2))
    A0 = galerkin_coarse(sp.identity(11), build_restriction(part, 1))
    np.testing.assert_array_equal(A0.toarray(), np.diag([3, 3, 3, 2]))


def test_small_galerkin_against_dense():
    A = laplace((3,))
    part = build_partition(7, 2, Fraction(1, 2))
    cs = CoarseSpace.agglomeration(A, part, 1)
    R0 = oracles.dense_agglomeration(part.sizes.tolist(), 1)
    np.testing.assert_allclose(cs.A0.toarray(), R0 @ A.toarray() @ R0.T, rtol=1e-14, atol=1e-15)


def test_q_out_of_range():
    part = build_partition(10, 3, Fraction(1, 2))
    with pytest.raises(ConfigurationError):
        build_restriction(part, 4)
    with pytest.raises(ConfigurationError):
        build_restriction(part, 0)


def test_zero_residual():
    A = laplace((5,))
    cs = CoarseSpace.agglomeration(A, build_partition(31, 4, Fraction(1, 2)), 2)
    assert not cs.apply_F(np.zeros(31)).any()


@pytest.mark.parametrize("levels,P,q", [((6,), 4, 3), ((3, 4), 7, 2), ((2, 3, 3), 5, 4), ((9,), 16, 8)])
def test_galerkin_and_projection_identities(levels, P, q):
    A = laplace(levels)
    N = A.shape[0]
    part = build_partition(N, P, Fraction(1, 2))
    cs = CoarseSpace.agglomeration(A, part, q)
    R0 = oracles.dense_agglomeration(part.sizes.tolist(), q)
    Ad = A.toarray()
    A0 = R0 @ Ad @ R0.T
    np.testing.assert_allclose(cs.A0.toarray(), A0, rtol=1e-12, atol=1e-12 * np.abs(A0).max())
    assert np.linalg.eigvalsh(A0).min() > 0
    assert (R0.sum(axis=0) == 1).all()
    rng = np.random.default_rng(P)
    for _ in range(50):
        r = rng.standard_normal(N)
        Fr = cs.apply_F(r)
        # F A F = F
        np.testing.assert_allclose(cs.apply_F(A @ Fr), Fr, rtol=0, atol=1e-12 * np.linalg.norm(Fr))
        # G A F = 0
        assert np.linalg.norm(cs.apply_G(A @ Fr)) <= 1e-12 * np.linalg.norm(A @ Fr)
        # symmetry of F
        s = rng.standard_normal(N)
        assert abs(s @ Fr - r @ cs.apply_F(s)) <= 1e-12 * np.linalg.norm(r) * np.linalg.norm(Fr) * 10
    y = rng.standard_normal(cs.n_coarse)
    np.testing.assert_allclose(cs.apply_F(A @ (R0.T @ y)), R0.T @ y, rtol=1e-12, atol=1e-12)


def test_weighted_constants_basis():
    part = build_partition(24, 4, Fraction(1, 2))
    w = compute_weights(part)
    R0 = nicolaides_restriction(part, w).toarray()
    np.testing.assert_allclose(R0.sum(axis=0), np.ones(24))
    assert R0.shape == (4, 24)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 12), st.integers(1, 6), st.integers(0, 100))
def test_restriction_structure(P, q, extra):
    N = P * q + extra
    part = build_partition(N, P, 0)
    R0 = build_restriction(part, q)
    assert R0.shape == (P * q, N)
    assert (np.asarray(R0.sum(axis=0)).ravel() == 1).all()
    sizes = np.asarray(R0.sum(axis=1)).ravel()
    for i in range(P):
        np.testing.assert_array_equal(sizes[i * q : (i + 1) * q], agglomerate_sizes(part.sizes[i], q))
