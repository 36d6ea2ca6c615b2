import math

import numpy as np
import pytest
import scipy.io
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from sfcdd import oracles
from sfcdd.errors import InvalidInputError, InvalidMatrixError
from sfcdd.grid import (
    GridSpec,
    assemble_laplace,
    diagonal_transform,
    discretize,
    energy_norm,
    export_matrix_market,
)
from sfcdd.sfc import sfc_sort


def test_one_dimensional_level_two():
    spec = GridSpec((2,))
    assert spec.n_points == 3 and spec.h == (0.25,)
    A = assemble_laplace(spec).toarray()
    np.testing.assert_array_equal(A, [[32, -16, 0], [-16, 32, -16], [0, -16, 32]])


def test_point_count_formula():
    assert GridSpec((3, 3)).n_points == 49
    assert GridSpec((2, 3, 1)).n_points == 3 * 7 * 1


def test_point_count_grids():
    spec = GridSpec.from_points((2560,))
    assert spec.levels == (12,) and spec.n_points == 2560
    assert spec.h == (1 / 2561,)
    assert GridSpec((3,), (7,)).points is None
    with pytest.raises(InvalidInputError):
        GridSpec((3,), (8,))
    with pytest.raises(InvalidInputError):
        GridSpec((0, 2))


@pytest.mark.parametrize("d", range(2, 7))
@pytest.mark.parametrize("L", range(3, 7))
def test_reaction_identity(d, L):
    full = discretize(GridSpec((L,) + (1,) * (d - 1)))
    line = discretize(GridSpec((L,)))
    # every other coordinate is 1, so the long coordinate identifies a point
    to_line = np.argsort(full.sfc_index[:, 0])
    A = full.A[to_line][:, to_line]
    # the one-dimensional curve is plain integer order
    np.testing.assert_array_equal(line.sfc_index[:, 0], np.arange(1, 2**L))
    A_1d = line.A
    diff = A - 8.0 * (d - 1) * sp.identity(2**L - 1)
    assert (diff != A_1d).nnz == 0


def test_diagonal_transform_scalar():
    s = diagonal_transform(2.0 * sp.identity(4, format="csr"))
    np.testing.assert_array_equal(s.A.toarray(), np.eye(4))
    np.testing.assert_allclose(s.scale, 1 / math.sqrt(2))


def test_diagonal_transform_1d():
    s = diagonal_transform(assemble_laplace(GridSpec((2,))))
    np.testing.assert_allclose(s.A.toarray(), [[1, -0.5, 0], [-0.5, 1, -0.5], [0, -0.5, 1]], rtol=0, atol=1e-15)


def test_diagonal_transform_random_spd():
    rng = np.random.default_rng(4)
    M = rng.standard_normal((5, 5))
    A = M @ M.T + 5 * np.eye(5)
    s = diagonal_transform(sp.csr_matrix(A))
    Ah = s.A.toarray()
    np.testing.assert_array_equal(np.diag(Ah), np.ones(5))
    np.testing.assert_allclose(Ah, Ah.T, rtol=0, atol=1e-15)
    assert np.linalg.eigvalsh(Ah).min() > 0
    # the dense oracle: T A T with T = diag(A)^-1/2
    T = np.diag(1 / np.sqrt(np.diag(A)))
    np.testing.assert_allclose(Ah, T @ A @ T, rtol=1e-14, atol=1e-14)


def test_diagonal_transform_rejects_nonpositive_diagonal():
    with pytest.raises(InvalidMatrixError):
        diagonal_transform(sp.diags([1.0, 0.0, 2.0]))


def test_energy_norm():
    A = assemble_laplace(GridSpec((2,)))
    assert energy_norm(A, np.zeros(3)) == 0.0
    assert energy_norm(A, np.ones(3)) == pytest.approx(math.sqrt(32), rel=1e-15)
    x = np.array([3.0, -4.0])
    assert energy_norm(sp.identity(2), x) == 5.0
    with pytest.raises(InvalidInputError):
        energy_norm(A, np.ones(4))


@pytest.mark.parametrize("levels", [(5,), (3, 4), (2, 3, 2), (4, 4), (2, 2, 2, 2)])
def test_matches_dense_stencil(levels):
    spec = GridSpec(levels)
    disc = discretize(spec)
    dense = oracles.dense_laplace(spec.shape)
    perm = disc.lex_perm
    np.testing.assert_array_equal(disc.A.toarray(), dense[np.ix_(perm, perm)])
    x = np.random.default_rng(1).standard_normal(spec.n_points)
    np.testing.assert_allclose(disc.A @ x, dense[np.ix_(perm, perm)] @ x, rtol=1e-12, atol=1e-12 * 64**2)


def test_rows_follow_curve_order():
    spec = GridSpec((3, 2))
    disc = discretize(spec)
    np.testing.assert_array_equal(disc.sfc_index, sfc_sort(spec.indices(), spec.ordering))
    shape = spec.shape
    lex = [np.ravel_multi_index(tuple(k - 1), shape) for k in disc.sfc_index]
    np.testing.assert_array_equal(lex, disc.lex_perm)


def test_sorted_column_indices():
    A = assemble_laplace(GridSpec((3, 3, 2)))
    for i in range(A.shape[0]):
        cols = A.indices[A.indptr[i] : A.indptr[i + 1]]
        assert (np.diff(cols) > 0).all()


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3).map(tuple), st.integers(0, 2**32 - 1))
def test_symmetric_positive_definite(levels, seed):
    A = assemble_laplace(GridSpec(levels))
    assert (A != A.T).nnz == 0
    assert (A.diagonal() > 0).all()
    rng = np.random.default_rng(seed)
    for _ in range(100):
        x = rng.standard_normal(A.shape[0])
        if np.any(x):
            assert x @ (A @ x) > 0


def test_matrix_market_round_trip(tmp_path):
    A = assemble_laplace(GridSpec((3, 2)))
    export_matrix_market(A, tmp_path / "a.mtx")
    B = scipy.io.mmread(str(tmp_path / "a.mtx")).tocsr()
    assert (A != B).nnz == 0
