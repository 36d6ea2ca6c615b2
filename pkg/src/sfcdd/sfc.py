"""Hilbert-curve ordering of tensor-grid indices.

Grid indices ``k = (k_1, ..., k_d)`` with ``1 <= k_j <= 2**l_j - 1`` are
ordered along the isotropic d-dimensional Hilbert curve whose resolution is
``max(l)``. Coordinates of coarser directions are left-aligned on that
resolution, i.e. scaled by ``2**(max(l) - l_j)``, so a one-dimensional grid
keeps its natural order.

Two code paths exist for sorting:

* the compiled extension ``sfcdd._sfc_core`` packs the orthant digits of
  each point into one 64-bit key and sorts the keys when ``d * max(l) <= 64``;
  wider keys go through an introsort whose comparison descends the orthant
  tree and exits at the first differing level, and
* a numpy fallback that computes the per-level orthant digits for all
  points at once and sorts them lexicographically.

Both produce the same permutation; :func:`hilbert_key` is a literal
transpose-to-axes encoder kept as an independent oracle for tests.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInputError, UnsupportedSizeError

try:
    from . import _sfc_core
except ImportError:  # pragma: no cover - depends on the build
    _sfc_core = None

HAVE_COMPILED = _sfc_core is not None

MAX_DIM = 64
MAX_BITS = 63


class Ordering(enum.IntEnum):
    LESS = -1
    EQUAL = 0
    GREATER = 1


@dataclass(frozen=True)
class SfcOrdering:
    """Hilbert ordering for grids with level vector ``levels``."""

    levels: tuple
    curve: str = "hilbert"

    def __post_init__(self):
        levels = tuple(int(l) for l in self.levels)
        if not levels or min(levels) < 1:
            raise InvalidInputError(f"levels must be a non-empty vector of positive ints, got {self.levels}")
        if self.curve != "hilbert":
            raise InvalidInputError(f"unsupported curve {self.curve!r}")
        if len(levels) > MAX_DIM:
            raise UnsupportedSizeError(f"at most {MAX_DIM} dimensions are supported")
        if max(levels) > MAX_BITS:
            raise UnsupportedSizeError(f"levels above {MAX_BITS} are not supported")
        object.__setattr__(self, "levels", levels)

    @property
    def d(self) -> int:
        return len(self.levels)

    @property
    def resolution(self) -> int:
        return max(self.levels)

    @property
    def shifts(self) -> tuple:
        res = self.resolution
        return tuple(res - l for l in self.levels)

    def embed(self, k: Sequence[int]) -> list:
        """Left-align index ``k`` on the isotropic resolution."""
        if len(k) != self.d:
            raise InvalidInputError(f"index {tuple(k)} has dimension {len(k)}, expected {self.d}")
        out = []
        for kj, lj, s in zip(k, self.levels, self.shifts):
            kj = int(kj)
            if not 1 <= kj <= (1 << lj) - 1:
                raise InvalidInputError(f"coordinate {kj} outside [1, {(1 << lj) - 1}]")
            out.append(kj << s)
        return out

    def embed_array(self, indices: np.ndarray) -> np.ndarray:
        idx = np.asarray(indices, dtype=np.int64)
        if idx.ndim != 2 or idx.shape[1] != self.d:
            raise InvalidInputError(f"expected an (N, {self.d}) index array, got shape {idx.shape}")
        upper = (np.int64(1) << np.asarray(self.levels, dtype=np.int64)) - 1
        if idx.size and ((idx.min(axis=0) < 1).any() or (idx.max(axis=0) > upper).any()):
            raise InvalidInputError("index coordinates outside the interior grid")
        shifts = np.asarray(self.shifts, dtype=np.uint64)
        return np.ascontiguousarray(idx.astype(np.uint64) << shifts)


def cmp(a: Sequence[int], b: Sequence[int], ordering: SfcOrdering) -> Ordering:
    """Compare two grid indices along the Hilbert curve.

    Walks the 2^d-tree from the top bit, applying one rotation per level,
    and returns as soon as the orthant digits of ``a`` and ``b`` differ.
    No full key is ever formed.
    """
    wa = ordering.embed(a)
    wb = ordering.embed(b)
    if wa == wb:
        return Ordering.EQUAL
    d = ordering.d
    ta = tb = 0
    for lvl in range(ordering.resolution - 1, -1, -1):
        ga = gb = 0
        for i in range(d):
            ga ^= (wa[i] >> lvl) & 1
            gb ^= (wb[i] >> lvl) & 1
            da, db = ga ^ ta, gb ^ tb
            if da != db:
                return Ordering.LESS if da < db else Ordering.GREATER
        ta ^= ga
        tb ^= gb
        q = 1 << lvl
        p = q - 1
        for w in (wa, wb):
            for i in range(d):
                if w[i] & q:
                    w[0] ^= p
                else:
                    t = (w[0] ^ w[i]) & p
                    w[0] ^= t
                    w[i] ^= t
    return Ordering.EQUAL  # pragma: no cover - unreachable for distinct embeddings


def hilbert_key(a: Sequence[int], ordering: SfcOrdering, max_bits: int = 64) -> int:
    """Full Hilbert key of ``a`` (transpose-to-axes encoding, then bit interleave).

    Only meant for small instances; raises :class:`UnsupportedSizeError` when
    the key would not fit in ``max_bits`` bits.
    """
    b = ordering.resolution
    n = ordering.d
    if n * b > max_bits:
        raise UnsupportedSizeError(f"key needs {n * b} bits, budget is {max_bits}")
    x = ordering.embed(a)
    m = 1 << (b - 1)
    q = m
    while q > 1:
        p = q - 1
        for i in range(n):
            if x[i] & q:
                x[0] ^= p
            else:
                t = (x[0] ^ x[i]) & p
                x[0] ^= t
                x[i] ^= t
        q >>= 1
    for i in range(1, n):
        x[i] ^= x[i - 1]
    t = 0
    q = m
    while q > 1:
        if x[n - 1] & q:
            t ^= q - 1
        q >>= 1
    for i in range(n):
        x[i] ^= t
    key = 0
    for lvl in range(b - 1, -1, -1):
        for i in range(n):
            key = (key << 1) | ((x[i] >> lvl) & 1)
    return key


def grid_indices(levels: Sequence[int]) -> np.ndarray:
    """All interior indices of the grid in lexicographic order (first axis slowest)."""
    axes = [np.arange(1, 2 ** int(l), dtype=np.int64) for l in levels]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


def hilbert_digits(coords: np.ndarray, bits: int) -> np.ndarray:
    """Orthant digit of every point at every level, coarsest level first.

    ``coords`` are embedded (left-aligned) coordinates. Row-wise lexicographic
    order of the result is the Hilbert order.
    """
    w = np.array(coords, dtype=np.uint64, copy=True)
    n, d = w.shape
    if d > MAX_DIM:
        raise UnsupportedSizeError(f"at most {MAX_DIM} dimensions are supported")
    digits = np.empty((n, bits), dtype=np.uint64)
    t = np.zeros(n, dtype=np.uint64)
    one = np.uint64(1)
    for col, lvl in enumerate(range(bits - 1, -1, -1)):
        sh = np.uint64(lvl)
        g = np.zeros(n, dtype=np.uint64)
        digit = np.zeros(n, dtype=np.uint64)
        for i in range(d):
            g ^= (w[:, i] >> sh) & one
            digit = (digit << one) | (g ^ t)
        digits[:, col] = digit
        if lvl == 0:
            break
        t ^= g
        q = np.uint64(1 << lvl)
        p = np.uint64((1 << lvl) - 1)
        for i in range(d):
            hit = (w[:, i] & q) != 0
            w[hit, 0] ^= p
            if i:
                miss = ~hit
                tt = (w[miss, 0] ^ w[miss, i]) & p
                w[miss, 0] ^= tt
                w[miss, i] ^= tt
    return digits


def sfc_argsort(indices: np.ndarray, ordering: SfcOrdering, backend: str | None = None) -> np.ndarray:
    """Permutation that sorts ``indices`` (an ``(N, d)`` array) along the curve.

    ``backend`` is ``"compiled"``, ``"numpy"`` or ``None`` for the best
    available one.
    """
    coords = ordering.embed_array(indices)
    if backend is None:
        backend = "compiled" if HAVE_COMPILED else "numpy"
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise InvalidInputError("compiled backend is not available in this build")
        return _sfc_core.argsort(coords, ordering.resolution)
    if backend == "numpy":
        if len(coords) == 0:
            return np.zeros(0, dtype=np.int64)
        digits = hilbert_digits(coords, ordering.resolution)
        return np.lexsort(digits[:, ::-1].T).astype(np.int64)
    raise InvalidInputError(f"unknown backend {backend!r}")


def sfc_sort(indices: np.ndarray, ordering: SfcOrdering, backend: str | None = None) -> np.ndarray:
    """Return ``indices`` reordered along the Hilbert curve."""
    idx = np.asarray(indices, dtype=np.int64)
    return idx[sfc_argsort(idx, ordering, backend=backend)]
