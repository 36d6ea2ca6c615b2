"""Additive Schwarz operators on cyclic SFC windows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .coarse import CoarseSpace, nicolaides_restriction
from .errors import ConfigurationError, InvalidMatrixError
from .partition import OverlapWeights, Partition, compute_weights, is_half_integer

VARIANTS = ("plain-one-level", "plain-two-level", "balanced", "nicolaides", "deflated")
WEIGHTINGS = ("none", "omega", "D")


def extract_local(A: sp.csr_matrix, window: np.ndarray) -> sp.csr_matrix:
    """``R_i A R_i^T`` for a window given as global positions in local order."""
    Ai = A[window][:, window].tocsr()
    Ai.sort_indices()
    return Ai


class SubdomainSolver:
    """Sparse direct factorization of one local matrix, computed once."""

    def __init__(self, i: int, window: np.ndarray, A_local: sp.spmatrix):
        self.i = int(i)
        self.window = np.asarray(window, dtype=np.int64)
        self.A_local = sp.csr_matrix(A_local)
        try:
            self._lu = spla.splu(self.A_local.tocsc())
        except RuntimeError as exc:
            raise InvalidMatrixError(f"local matrix {i} is singular: {exc}") from exc

    @classmethod
    def from_global(cls, A: sp.csr_matrix, part: Partition, i: int) -> "SubdomainSolver":
        w = part.window(i)
        return cls(i, w, extract_local(A, w))

    def solve(self, r_local: np.ndarray) -> np.ndarray:
        return self._lu.solve(r_local)


@dataclass(frozen=True)
class PreconditionerSpec:
    variant: str = "balanced"
    weighting: str = "omega"
    gamma: object = 0.5
    q: int = 1
    coarse_basis: str = "agglomeration"

    def __post_init__(self):
        if self.coarse_basis not in ("agglomeration", "weighted-constants"):
            raise ConfigurationError(f"unknown coarse basis {self.coarse_basis!r}")
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}, choose from {VARIANTS}")
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(f"unknown weighting {self.weighting!r}, choose from {WEIGHTINGS}")

    @property
    def symmetric(self) -> bool:
        if self.variant == "deflated":
            return False
        return self.weighting != "D" or is_half_integer(self.gamma)

    @property
    def two_level(self) -> bool:
        return self.variant != "plain-one-level"


class SchwarzPreconditioner:
    """Application of ``C^{-1}`` for one of the supported variants.

    ``solvers`` is a plain list indexed by subdomain. A fault simulation may
    swap entries in and out; an ``alive`` mask passed to :meth:`apply` drops
    the corresponding fine terms for that call.
    """

    def __init__(
        self,
        A: sp.spmatrix,
        part: Partition,
        spec: PreconditionerSpec,
        coarse: CoarseSpace | None = None,
        weights: OverlapWeights | None = None,
        solvers: list | None = None,
    ):
        self.A = sp.csr_matrix(A)
        self.part = part
        self.spec = spec
        if spec.two_level and coarse is None:
            raise ConfigurationError(f"variant {spec.variant} needs a coarse space")
        self.coarse = coarse
        self.weights = weights if weights is not None else compute_weights(part)
        if solvers is None:
            solvers = [SubdomainSolver.from_global(self.A, part, i) for i in range(part.P)]
        self.solvers = solvers
        self.windows = [s.window for s in solvers]
        if spec.weighting == "none":
            self._scale = [None] * part.P
        elif spec.weighting == "omega":
            self._scale = [float(w) for w in self.weights.omega]
        else:
            self._scale = list(self.weights.D)

    @property
    def P(self) -> int:
        return self.part.P

    @property
    def N(self) -> int:
        return self.part.N

    @property
    def symmetric(self) -> bool:
        return self.spec.symmetric

    def apply_one_level(self, r: np.ndarray, alive=None) -> np.ndarray:
        """Weighted sum of extended local solves, ascending subdomain order."""
        out = np.zeros_like(r, dtype=float)
        for i in range(self.P):
            if alive is not None and not alive[i]:
                continue
            w = self.windows[i]
            corr = self.solvers[i].solve(r[w])
            s = self._scale[i]
            if s is not None:
                corr = s * corr
            out[w] += corr
        return out

    def apply_two_level(self, r, alive=None, coarse_alive: bool = True) -> np.ndarray:
        out = self.apply_one_level(r, alive)
        if coarse_alive:
            out += self.coarse.apply_F(r)
        return out

    def apply_balanced(self, r, alive=None) -> np.ndarray:
        c = self.coarse
        return c.apply_GT(self.apply_one_level(c.apply_G(r), alive)) + c.apply_F(r)

    def apply_deflated(self, r, alive=None) -> np.ndarray:
        c = self.coarse
        return c.apply_GT(self.apply_one_level(r, alive)) + c.apply_F(r)

    def apply_nicolaides(self, r, alive=None) -> np.ndarray:
        return self.apply_two_level(r, alive)

    def apply(self, r: np.ndarray, alive=None) -> np.ndarray:
        v = self.spec.variant
        if v == "plain-one-level":
            return self.apply_one_level(r, alive)
        if v == "plain-two-level":
            return self.apply_two_level(r, alive)
        if v == "balanced":
            return self.apply_balanced(r, alive)
        if v == "deflated":
            return self.apply_deflated(r, alive)
        return self.apply_nicolaides(r, alive)

    __call__ = apply

    def dense(self, alive=None) -> np.ndarray:
        """Assemble ``C^{-1}`` column by column; small problems only."""
        eye = np.eye(self.N)
        return np.column_stack([self.apply(eye[:, k], alive) for k in range(self.N)])


def build_preconditioner(
    A: sp.spmatrix, part: Partition, spec: PreconditionerSpec, coarse: CoarseSpace | None = None
) -> SchwarzPreconditioner:
    """Set up subdomain factorizations and, for two-level variants, the coarse space."""
    A = sp.csr_matrix(A)
    weights = compute_weights(part)
    if spec.two_level and coarse is None:
        if spec.coarse_basis == "weighted-constants":
            coarse = CoarseSpace(A, nicolaides_restriction(part, weights))
        else:
            coarse = CoarseSpace.agglomeration(A, part, spec.q)
    return SchwarzPreconditioner(A, part, spec, coarse=coarse, weights=weights)
