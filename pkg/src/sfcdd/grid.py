"""Finite-difference model problem on anisotropic tensor grids."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .errors import InvalidInputError, InvalidMatrixError, ResourceError
from .sfc import SfcOrdering, grid_indices, sfc_argsort

MAX_POINTS = 10**7


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid on the unit cube.

    By default direction ``j`` has ``2**l_j - 1`` interior points and mesh
    width ``2**-l_j``. ``points`` overrides the interior point counts (mesh
    width ``1/(n_j + 1)``); ``levels`` then only sets the curve resolution
    and must satisfy ``n_j <= 2**l_j - 1``.
    """

    levels: tuple
    points: tuple | None = None

    def __post_init__(self):
        levels = tuple(int(l) for l in self.levels)
        if not levels or min(levels) < 1:
            raise InvalidInputError(f"levels must be positive integers, got {self.levels}")
        object.__setattr__(self, "levels", levels)
        if self.points is not None:
            points = tuple(int(n) for n in self.points)
            if len(points) != len(levels):
                raise InvalidInputError("points and levels differ in length")
            if any(n < 1 or n > 2**l - 1 for n, l in zip(points, levels)):
                raise InvalidInputError(f"point counts {points} do not fit levels {levels}")
            if points == tuple(2**l - 1 for l in levels):
                points = None
            object.__setattr__(self, "points", points)

    @classmethod
    def from_points(cls, points) -> "GridSpec":
        """Grid with the given interior point counts, curve resolution as small as possible."""
        points = tuple(int(n) for n in points)
        if not points or min(points) < 1:
            raise InvalidInputError(f"point counts must be positive, got {points}")
        return cls(tuple(n.bit_length() for n in points), points)

    @property
    def d(self) -> int:
        return len(self.levels)

    @property
    def shape(self) -> tuple:
        if self.points is not None:
            return self.points
        return tuple(2**l - 1 for l in self.levels)

    @property
    def h(self) -> tuple:
        return tuple(1.0 / (n + 1) for n in self.shape)

    @property
    def n_points(self) -> int:
        return int(np.prod(self.shape, dtype=object))

    @property
    def ordering(self) -> SfcOrdering:
        return SfcOrdering(self.levels)

    def indices(self) -> np.ndarray:
        """All interior indices, lexicographic order (first axis slowest)."""
        if self.points is None:
            return grid_indices(self.levels)
        axes = [np.arange(1, n + 1, dtype=np.int64) for n in self.shape]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass(frozen=True)
class TransformedSystem:
    """Diagonally scaled system ``T A T``, ``T b`` with ``T = diag(A)**-1/2``."""

    A: sp.csr_matrix
    b: np.ndarray
    scale: np.ndarray

    def untransform(self, xhat: np.ndarray) -> np.ndarray:
        return self.scale * xhat

    def transform(self, x: np.ndarray) -> np.ndarray:
        return x / self.scale


@dataclass
class Discretization:
    """Stiffness matrix with rows in curve order plus the ordering itself.

    Row ``i`` of ``A`` belongs to grid index ``sfc_index[i]``.
    """

    spec: GridSpec
    A: sp.csr_matrix
    sfc_index: np.ndarray
    lex_perm: np.ndarray = field(repr=False)


def _laplace_1d(n: int) -> sp.csr_matrix:
    inv_h2 = float((n + 1) ** 2)
    main = np.full(n, 2.0 * inv_h2)
    off = np.full(n - 1, -inv_h2)
    return sp.diags([off, main, off], [-1, 0, 1], format="csr")


def assemble_lexicographic(spec: GridSpec, coefficient=None) -> sp.csr_matrix:
    """Central-difference Laplacian with zero Dirichlet data, lexicographic rows.

    ``coefficient`` optionally gives one positive scale per direction, a
    constant-diffusion hook; the model problem uses ones.
    """
    if spec.n_points > MAX_POINTS:
        raise ResourceError(f"N = {spec.n_points} exceeds the budget of {MAX_POINTS} points")
    coeff = np.ones(spec.d) if coefficient is None else np.asarray(coefficient, dtype=float)
    if coeff.shape != (spec.d,) or (coeff <= 0).any():
        raise InvalidInputError("coefficient must hold one positive value per direction")
    eyes = [sp.identity(n, format="csr") for n in spec.shape]
    terms = []
    for j, n in enumerate(spec.shape):
        factors = eyes[:j] + [coeff[j] * _laplace_1d(n)] + eyes[j + 1 :]
        terms.append(reduce(lambda a, b: sp.kron(a, b, format="csr"), factors))
    A = reduce(lambda a, b: a + b, terms).tocsr()
    A.sort_indices()
    return A


def discretize(spec: GridSpec, backend: str | None = None, coefficient=None) -> Discretization:
    """Assemble the model problem with rows permuted into Hilbert order."""
    A_lex = assemble_lexicographic(spec, coefficient)
    idx = spec.indices()
    perm = sfc_argsort(idx, spec.ordering, backend=backend)
    A = A_lex[perm][:, perm].tocsr()
    A.sort_indices()
    return Discretization(spec=spec, A=A, sfc_index=idx[perm], lex_perm=perm)


def assemble_laplace(spec: GridSpec, backend: str | None = None) -> sp.csr_matrix:
    return discretize(spec, backend=backend).A


def diagonal_transform(A: sp.spmatrix, b: np.ndarray | None = None) -> TransformedSystem:
    A = sp.csr_matrix(A)
    diag = A.diagonal()
    if (diag <= 0).any():
        raise InvalidMatrixError("diagonal scaling needs a strictly positive diagonal")
    scale = 1.0 / np.sqrt(diag)
    T = sp.diags(scale)
    Ahat = (T @ A @ T).tocsr()
    # unit diagonal exactly, not up to rounding of s*a*s
    Ahat.setdiag(1.0)
    Ahat.sort_indices()
    if b is None:
        b = np.zeros(A.shape[0])
    return TransformedSystem(A=Ahat, b=scale * np.asarray(b, dtype=float), scale=scale)


def energy_norm(A: sp.spmatrix, x: np.ndarray) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (A.shape[1],):
        raise InvalidInputError(f"vector of shape {x.shape} does not match matrix {A.shape}")
    return float(np.sqrt(max(x @ (A @ x), 0.0)))


def export_matrix_market(A: sp.spmatrix, path: str | Path) -> None:
    scipy.io.mmwrite(str(path), sp.coo_matrix(A))
