import functools
import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sfcdd.errors import InvalidInputError, UnsupportedSizeError
from sfcdd.sfc import (
    HAVE_COMPILED,
    Ordering,
    SfcOrdering,
    cmp,
    grid_indices,
    hilbert_key,
    sfc_argsort,
    sfc_sort,
)

BACKENDS = ["numpy"] + (["compiled"] if HAVE_COMPILED else [])


def key_sort(levels):
    o = SfcOrdering(levels)
    idx = grid_indices(levels)
    keys = [hilbert_key(tuple(k), o) for k in idx]
    return idx[np.argsort(keys, kind="stable")]


def cmp_sort(levels):
    o = SfcOrdering(levels)
    pts = [tuple(int(v) for v in k) for k in grid_indices(levels)]
    return np.array(sorted(pts, key=functools.cmp_to_key(lambda a, b: int(cmp(a, b, o)))))


def test_one_dimensional_is_integer_order():
    o = SfcOrdering((4,))
    assert cmp((3,), (5,), o) is Ordering.LESS
    assert cmp((5,), (3,), o) is Ordering.GREATER
    assert all(hilbert_key((k,), o) == k for k in range(1, 16))


def test_equal_indices():
    o = SfcOrdering((3, 3))
    assert cmp((2, 5), (2, 5), o) is Ordering.EQUAL


def test_level_three_square_cmp_matches_key():
    np.testing.assert_array_equal(cmp_sort((3, 3)), key_sort((3, 3)))
    assert len(grid_indices((3, 3))) == 49


def test_four_cells_are_a_permutation():
    # one representative per quadrant on the level-2 grid; top digit of the key
    o = SfcOrdering((2, 2))
    keys = sorted(hilbert_key(c, o) >> 2 for c in itertools.product((1, 2), repeat=2))
    assert keys == [0, 1, 2, 3]


def test_three_dimensional_exhaustive_pairs():
    o = SfcOrdering((3, 3, 3))
    cells = list(itertools.product(range(1, 8), repeat=3))
    keys = [hilbert_key(c, o) for c in cells]
    assert len(set(keys)) == len(cells) == 343
    for a, b in itertools.combinations(range(len(cells)), 2):
        want = (keys[a] > keys[b]) - (keys[a] < keys[b])
        assert int(cmp(cells[a], cells[b], o)) == want


def test_anisotropic_matches_key_sort():
    np.testing.assert_array_equal(cmp_sort((2, 3)), key_sort((2, 3)))
    assert len(grid_indices((2, 3))) == 21


@pytest.mark.parametrize("backend", BACKENDS)
def test_sort_idempotent_and_order_independent(backend):
    levels = (3, 4)
    o = SfcOrdering(levels)
    s = sfc_sort(grid_indices(levels), o, backend)
    np.testing.assert_array_equal(sfc_sort(s, o, backend), s)
    np.testing.assert_array_equal(sfc_sort(s[::-1], o, backend), s)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("levels", [(5,), (2, 3), (3, 3), (4, 2), (2, 2, 2), (1, 3, 2), (2, 1, 2, 2), (3, 2, 2, 1)])
def test_backends_match_key_oracle(levels, backend):
    o = SfcOrdering(levels)
    np.testing.assert_array_equal(sfc_sort(grid_indices(levels), o, backend), key_sort(levels))


def test_backends_agree_on_large_grid():
    if not HAVE_COMPILED:
        pytest.skip("compiled backend not built")
    levels = (6, 5, 4)
    o = SfcOrdering(levels)
    idx = grid_indices(levels)
    np.testing.assert_array_equal(sfc_argsort(idx, o, "numpy"), sfc_argsort(idx, o, "compiled"))


@pytest.mark.parametrize("levels", [(6, 5, 4), (3, 3, 3, 3)])
def test_packed_key_and_comparison_sorts_agree(levels):
    if not HAVE_COMPILED:
        pytest.skip("compiled backend not built")
    from sfcdd import _sfc_core

    o = SfcOrdering(levels)
    coords = o.embed_array(grid_indices(levels))
    np.testing.assert_array_equal(
        _sfc_core.argsort(coords, o.resolution), _sfc_core.argsort(coords, o.resolution, comparison=True)
    )


def test_wide_keys_use_comparison_sort():
    """d * bits > 64: the compiled core cannot pack a key and must compare."""
    levels = (12,) * 6
    o = SfcOrdering(levels)
    rng = np.random.default_rng(4)
    idx = rng.integers(1, 2**12, size=(3000, 6))
    ref = sfc_argsort(idx, o, "numpy")
    for backend in BACKENDS:
        np.testing.assert_array_equal(sfc_argsort(idx, o, backend), ref)
    for i in range(0, 2999, 97):
        assert cmp(idx[ref[i]], idx[ref[i + 1]], o) is not Ordering.GREATER


def test_anisotropy_no_overflow():
    levels = (40,) + (1,) * 5
    o = SfcOrdering(levels)
    with pytest.raises(UnsupportedSizeError):
        hilbert_key((5,) + (1,) * 5, o)
    a, b = (2**39 + 1,) + (1,) * 5, (2**39 + 7,) + (1,) * 5
    assert cmp(a, b, o) is Ordering.LESS


def test_unknown_backend():
    with pytest.raises(InvalidInputError):
        sfc_argsort(grid_indices((2,)), SfcOrdering((2,)), backend="gpu")


levels_st = st.lists(st.integers(1, 4), min_size=1, max_size=4).map(tuple)


@st.composite
def index_triple(draw):
    levels = draw(levels_st)
    pt = st.tuples(*[st.integers(1, 2**l - 1) for l in levels])
    return levels, draw(pt), draw(pt), draw(pt)


@settings(max_examples=300, deadline=None)
@given(index_triple())
def test_strict_weak_ordering(data):
    levels, a, b, c = data
    o = SfcOrdering(levels)
    ab, ba = cmp(a, b, o), cmp(b, a, o)
    assert int(ab) == -int(ba)
    assert (ab is Ordering.EQUAL) == (a == b)
    if ab is Ordering.LESS and cmp(b, c, o) is Ordering.LESS:
        assert cmp(a, c, o) is Ordering.LESS


@settings(max_examples=300, deadline=None)
@given(index_triple())
def test_cmp_agrees_with_key(data):
    levels, a, b, _ = data
    o = SfcOrdering(levels)
    ka, kb = hilbert_key(a, o), hilbert_key(b, o)
    assert int(cmp(a, b, o)) == (ka > kb) - (ka < kb)


@settings(max_examples=200, deadline=None)
@given(index_triple(), st.integers(1, 4))
def test_early_exit_consistency(data, m):
    """If the top ``m`` curve digits differ, the truncated comparison decides."""
    levels, a, b, _ = data
    o = SfcOrdering(levels)
    R = o.resolution
    m = min(m, R)
    ka, kb = hilbert_key(a, o), hilbert_key(b, o)
    shift = o.d * (R - m)
    ta, tb = ka >> shift, kb >> shift
    if ta != tb:
        assert int(cmp(a, b, o)) == (ta > tb) - (ta < tb)
