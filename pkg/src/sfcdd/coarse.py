"""Algebraic agglomeration coarse space and the balancing operators."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConfigurationError, InvalidMatrixError
from .partition import OverlapWeights, Partition


def agglomerate_sizes(n: int, q: int) -> np.ndarray:
    base, r = divmod(int(n), int(q))
    sizes = np.full(q, base, dtype=np.int64)
    sizes[:r] += 1
    return sizes


def build_restriction(part: Partition, q: int) -> sp.csr_matrix:
    """0/1 restriction with ``q`` piecewise-constant agglomerates per block.

    Row ``i*q + m`` is the indicator of the ``m``-th consecutive chunk of the
    non-overlapping block ``i``.
    """
    q = int(q)
    if q < 1 or q > int(part.sizes.min()):
        raise ConfigurationError(f"q must lie in [1, {int(part.sizes.min())}], got {q}")
    row = np.empty(part.N, dtype=np.int64)
    for i in range(part.P):
        labels = np.repeat(np.arange(q), agglomerate_sizes(part.sizes[i], q))
        row[part.core_start[i] : part.core_start[i] + part.sizes[i]] = i * q + labels
    R0 = sp.csr_matrix((np.ones(part.N), (row, np.arange(part.N))), shape=(part.P * q, part.N))
    R0.sort_indices()
    return R0


def nicolaides_restriction(part: Partition, weights: OverlapWeights) -> sp.csr_matrix:
    """Weighted subdomain constants ``R_i^T D_i R_i 1`` as coarse basis, one per subdomain."""
    rows, cols, vals = [], [], []
    for i in range(part.P):
        w = part.window(i)
        rows.append(np.full(len(w), i))
        cols.append(w)
        vals.append(np.broadcast_to(weights.D[i], w.shape))
    R0 = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(part.P, part.N)
    )
    R0.sort_indices()
    return R0


def galerkin_coarse(A: sp.spmatrix, R0: sp.spmatrix) -> sp.csr_matrix:
    if A.shape[0] != R0.shape[1] or A.shape[1] != R0.shape[1]:
        raise ConfigurationError(f"incompatible shapes A {A.shape}, R0 {R0.shape}")
    A0 = (R0 @ A @ R0.T).tocsr()
    A0.sort_indices()
    return A0


class CoarseSpace:
    """Restriction, Galerkin matrix and its factorization (computed once).

    ``apply_F`` and ``apply_G`` act matrix-free; neither ``F`` nor ``G`` is
    ever assembled.
    """

    def __init__(self, A: sp.spmatrix, R0: sp.spmatrix):
        self.A = sp.csr_matrix(A)
        self.R0 = sp.csr_matrix(R0)
        self.RT = self.R0.T.tocsr()
        self.A0 = galerkin_coarse(self.A, self.R0)
        try:
            self._lu = spla.splu(self.A0.tocsc())
        except RuntimeError as exc:
            raise InvalidMatrixError(f"coarse matrix is singular: {exc}") from exc

    @classmethod
    def agglomeration(cls, A, part: Partition, q: int) -> "CoarseSpace":
        return cls(A, build_restriction(part, q))

    @property
    def n_coarse(self) -> int:
        return self.R0.shape[0]

    def solve(self, rc: np.ndarray) -> np.ndarray:
        return self._lu.solve(rc)

    def apply_F(self, r: np.ndarray) -> np.ndarray:
        return self.RT @ self._lu.solve(self.R0 @ r)

    def apply_G(self, r: np.ndarray) -> np.ndarray:
        return r - self.A @ self.apply_F(r)

    def apply_GT(self, r: np.ndarray) -> np.ndarray:
        return r - self.apply_F(self.A @ r)
