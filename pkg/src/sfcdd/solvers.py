"""Richardson, (flexible) PCG, Lanczos extreme eigenvalues and rate metrics.

Both iterations run in cycles. A cycle is one preconditioner application
and an optional fault hook sits at its boundaries: ``hook.begin_cycle``
hands back the iteration vectors (possibly rebuilt from per-processor copies)
together with a mask of subdomains whose local solve succeeded, and
``hook.commit`` stores the updated vectors again. Without a hook the vectors
stay in the driver and every subdomain takes part.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg

from .errors import (
    ConfigurationError,
    EstimationError,
    InvalidInputError,
    NumericalBreakdownError,
    RecoveryFailedError,
)
from .grid import energy_norm

CONVERGED = "converged"
RECOVERY_FAILED = "recovery-failed"
MAX_ITER = "max-iter"
DIVERGED = "diverged"

DEFAULT_TOL = 1e-8
DIVERGENCE_FACTOR = 10.0


# ---------------------------------------------------------------------------
# spectral estimate


@dataclass(frozen=True)
class SpectralEstimate:
    lam_min: float
    lam_max: float
    iterations: int = 0
    tol: float = 0.0
    converged: bool = True

    def __post_init__(self):
        if not 0 < self.lam_min <= self.lam_max * (1 + 1e-12):
            raise EstimationError(f"invalid eigenvalue pair ({self.lam_min}, {self.lam_max})")

    @property
    def kappa(self) -> float:
        return self.lam_max / self.lam_min

    @property
    def xi_opt(self) -> float:
        """Damping that minimizes the Richardson contraction factor."""
        return 2.0 / (self.lam_min + self.lam_max)

    @property
    def rate_opt(self) -> float:
        return 1.0 - 2.0 / (1.0 + self.kappa)

    def rate(self, xi: float) -> float:
        return max(abs(1 - xi * self.lam_min), abs(1 - xi * self.lam_max))


def estimate_extremes(
    A,
    precond,
    tol: float = 1e-8,
    max_matvec: int | None = None,
    seed: int = 0,
    v0: np.ndarray | None = None,
) -> SpectralEstimate:
    """Extreme eigenvalues of ``C^{-1} A`` by Lanczos in the ``A`` inner product.

    The preconditioned operator is self-adjoint with respect to
    ``(u, v)_A = u^T A v`` whenever ``C^{-1}`` is symmetric. The basis is
    fully reorthogonalized. The iteration stops once both extreme Ritz values
    change by less than ``tol`` (relative) and their residuals are below
    ``sqrt(tol)`` times the Ritz value, or when the Krylov space is invariant.
    """
    N = A.shape[0]
    cap = max_matvec if max_matvec is not None else 5 * N
    cap = min(cap, N)
    if v0 is None:
        v0 = np.random.default_rng(seed).uniform(-1.0, 1.0, N)
    Av = A @ v0
    nrm = math.sqrt(v0 @ Av)
    if nrm == 0:
        raise EstimationError("start vector has zero energy")
    V = np.empty((min(cap, 64) + 1, N))
    AV = np.empty_like(V)
    V[0], AV[0] = v0 / nrm, Av / nrm
    alphas, betas = [], []
    prev = None
    theta = (np.nan, np.nan)
    for k in range(cap):
        w = precond(AV[k])
        alpha = float(w @ AV[k])
        alphas.append(alpha)
        # two passes of Gram-Schmidt against the whole basis
        for _ in range(2):
            w = w - (AV[: k + 1] @ w) @ V[: k + 1]
        Aw = A @ w
        beta = math.sqrt(max(w @ Aw, 0.0))
        evals, evecs = scipy.linalg.eigh_tridiagonal(np.array(alphas), np.array(betas))
        theta = (float(evals[0]), float(evals[-1]))
        res = (abs(beta * evecs[-1, 0]), abs(beta * evecs[-1, -1]))
        invariant = beta <= tol * abs(theta[1])
        if invariant:
            return SpectralEstimate(theta[0], theta[1], k + 1, tol, True)
        if prev is not None:
            change = max(abs(theta[j] - prev[j]) / abs(theta[j]) for j in range(2))
            small_res = all(res[j] <= math.sqrt(tol) * abs(theta[j]) for j in range(2))
            if change < tol and small_res:
                return SpectralEstimate(theta[0], theta[1], k + 1, tol, True)
        prev = theta
        betas.append(beta)
        if k + 1 == len(V):
            V = np.concatenate((V, np.empty_like(V)))
            AV = np.concatenate((AV, np.empty_like(AV)))
        V[k + 1], AV[k + 1] = w / beta, Aw / beta
    if cap == N and len(alphas) == N:
        return SpectralEstimate(theta[0], theta[1], N, tol, True)
    raise EstimationError(f"Lanczos did not converge within {cap} steps", partial=theta)


# ---------------------------------------------------------------------------
# records and metrics


@dataclass(frozen=True)
class RateSummary:
    rho_ave: float
    rho_asy: float
    K: int
    K_tilde: int
    truncated: bool = False


def k_tilde(K: int) -> int:
    return max(5, math.ceil(0.05 * K))


def iterations_from_rate(rho_ave: float, tol: float = DEFAULT_TOL) -> int:
    """Iterations that an exactly geometric decay with rate ``rho_ave`` needs."""
    if not 0 < rho_ave < 1:
        raise InvalidInputError(f"rate must lie in (0, 1), got {rho_ave}")
    return math.ceil(math.log(tol) / math.log(rho_ave))


def convergence_rates(errors) -> RateSummary:
    """Average and asymptotic rates of an error history ``errors[0..K]``."""
    e = np.asarray(getattr(errors, "errors", errors), dtype=float)
    K = len(e) - 1
    if K < 1:
        raise InvalidInputError("need at least one iteration")
    Kt = k_tilde(K)
    truncated = Kt > K
    span = min(Kt, K)
    rho_ave = (e[K] / e[0]) ** (1.0 / K)
    rho_asy = (e[K] / e[K - span]) ** (1.0 / span)
    return RateSummary(float(rho_ave), float(rho_asy), K, Kt, truncated)


@dataclass
class ConvergenceRecord:
    """Error history of one solve. ``errors[0]`` is the initial error.

    ``n_faults[k]`` counts the failed subdomain solves in the cycle that
    produced iterate ``k`` (zero for ``k = 0``).
    """

    solver: str
    errors: list = field(default_factory=list)
    n_faults: list = field(default_factory=list)
    status: str = MAX_ITER
    fault_log: list = field(default_factory=list)
    message: str = ""
    wall_time: float = field(default=0.0, compare=False)

    @property
    def K(self) -> int:
        return len(self.errors) - 1

    @property
    def converged(self) -> bool:
        return self.status == CONVERGED

    def rates(self) -> RateSummary:
        return convergence_rates(self.errors)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["K"] = self.K
        if self.K >= 1 and self.errors[-1] > 0:
            d["rates"] = asdict(self.rates())
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "ConvergenceRecord":
        keys = ("solver", "errors", "n_faults", "status", "fault_log", "message", "wall_time")
        return cls(**{k: data[k] for k in keys if k in data})

    @classmethod
    def from_json(cls, text: str) -> "ConvergenceRecord":
        return cls.from_dict(json.loads(text))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["iteration", "a_norm_error", "n_faults"])
        for k, (e, f) in enumerate(zip(self.errors, self.n_faults)):
            w.writerow([k, repr(float(e)), int(f)])
        return buf.getvalue()

    @staticmethod
    def parse_csv(text: str) -> tuple[list, list]:
        rows = list(csv.DictReader(io.StringIO(text)))
        return [float(r["a_norm_error"]) for r in rows], [int(r["n_faults"]) for r in rows]


# ---------------------------------------------------------------------------
# iterations


class NoFaults:
    """Hook used when fault simulation is off: vectors stay in the driver."""

    def start(self, vectors: dict) -> None:
        pass

    def begin_cycle(self, k: int, vectors: dict):
        return vectors, None, 0

    def commit(self, vectors: dict) -> None:
        pass

    def log(self) -> list:
        return []


def random_initial_iterate(N: int, seed, A) -> np.ndarray:
    """Uniform entries in [-1, 1], rescaled to unit energy norm."""
    rng = np.random.default_rng(seed)
    while True:
        x = rng.uniform(-1.0, 1.0, int(N))
        nrm = energy_norm(A, x)
        if nrm > 0:
            return x / nrm


def _default_error(A):
    return lambda x: energy_norm(A, x)


def _finish(rec, e0, e, tol):
    if e <= tol * e0:
        rec.status = CONVERGED
        return True
    if not np.isfinite(e) or e > DIVERGENCE_FACTOR * e0:
        rec.status = DIVERGED
        return True
    return False


def richardson(
    A,
    b,
    precond,
    xi: float,
    x0: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = 10_000,
    error_fn=None,
    faults=None,
) -> ConvergenceRecord:
    """Damped linear iteration ``x <- x + xi * C^{-1} (b - A x)``."""
    if not xi > 0:
        raise ConfigurationError(f"damping must be positive, got {xi}")
    err = error_fn or _default_error(A)
    hook = faults or NoFaults()
    t0 = time.perf_counter()
    x = np.array(x0, dtype=float)
    rec = ConvergenceRecord("richardson")
    e0 = err(x)
    rec.errors.append(e0)
    rec.n_faults.append(0)
    hook.start({"x": x})
    try:
        for k in range(max_iter):
            vec, alive, nf = hook.begin_cycle(k, {"x": x})
            x = vec["x"]
            r = b - A @ x
            x = x + xi * precond(r, alive)
            hook.commit({"x": x})
            e = err(x)
            rec.errors.append(e)
            rec.n_faults.append(nf)
            if _finish(rec, e0, e, tol):
                break
    except RecoveryFailedError as exc:
        rec.status = RECOVERY_FAILED
        rec.message = str(exc)
    rec.fault_log = hook.log()
    rec.wall_time = time.perf_counter() - t0
    return rec


def pcg(
    A,
    b,
    precond,
    x0: np.ndarray,
    tol: float = DEFAULT_TOL,
    max_iter: int = 10_000,
    flexible: bool = False,
    error_fn=None,
    faults=None,
) -> ConvergenceRecord:
    """Preconditioned conjugate gradients.

    ``flexible`` switches to the Polak-Ribiere type coefficient
    ``beta = z_new . (r_new - r_old) / (z_old . r_old)``, which tolerates a
    preconditioner that is not symmetric or changes between iterations.
    """
    err = error_fn or _default_error(A)
    hook = faults or NoFaults()
    t0 = time.perf_counter()
    x = np.array(x0, dtype=float)
    r = b - A @ x
    p = np.zeros_like(x)
    r_prev = r
    rz_old = None
    rec = ConvergenceRecord("pcg-flexible" if flexible else "pcg")
    e0 = err(x)
    rec.errors.append(e0)
    rec.n_faults.append(0)

    def pack():
        v = {"x": x, "r": r, "p": p}
        if flexible:
            v["r_prev"] = r_prev
        return v

    hook.start(pack())
    try:
        for k in range(max_iter):
            vec, alive, nf = hook.begin_cycle(k, pack())
            x, r, p = vec["x"], vec["r"], vec["p"]
            if flexible:
                r_prev = vec["r_prev"]
            z = precond(r, alive)
            rz = float(r @ z)
            if k == 0:
                beta = 0.0
            elif flexible:
                beta = (rz - float(z @ r_prev)) / rz_old
            else:
                beta = rz / rz_old
            p = z + beta * p
            q = A @ p
            pq = float(p @ q)
            if not pq > 0:
                raise NumericalBreakdownError(f"nonpositive curvature {pq} in iteration {k}")
            alpha = rz / pq
            if flexible:
                r_prev = r
            x = x + alpha * p
            r = r - alpha * q
            rz_old = rz
            hook.commit(pack())
            e = err(x)
            rec.errors.append(e)
            rec.n_faults.append(nf)
            if _finish(rec, e0, e, tol):
                break
    except RecoveryFailedError as exc:
        rec.status = RECOVERY_FAILED
        rec.message = str(exc)
    rec.fault_log = hook.log()
    rec.wall_time = time.perf_counter() - t0
    return rec


# ---------------------------------------------------------------------------
# stochastic subspace correction with random subsets


def random_subset_iteration(
    A,
    precond,
    x0: np.ndarray,
    n_iter: int,
    p: int,
    rng: np.random.Generator,
    mode: str = "uniform",
    xi: float | None = None,
    lam_max: float | None = None,
    b: np.ndarray | None = None,
) -> np.ndarray:
    """Squared energy errors of the randomized additive iteration.

    Each step solves only the subproblems in a random index set ``I_k`` and
    adds ``xi_k * omega_i`` times their corrections, with ``omega_0 = 1`` for
    the coarse problem. ``mode="uniform"`` draws ``p`` indices uniformly from
    all ``P + 1`` problems and uses a fixed ``xi``; ``mode="coarse-always"``
    keeps the coarse problem, draws ``p`` of the ``P`` fine ones and uses
    ``xi_k = p / (P * lam_max)``. The exact solution is taken to be zero.
    """
    if precond.spec.weighting != "omega" or precond.coarse is None:
        raise ConfigurationError("the randomized iteration needs an omega-weighted two-level splitting")
    P = precond.P
    if b is None:
        b = np.zeros(A.shape[0])
    x = np.array(x0, dtype=float)
    out = np.empty(n_iter + 1)
    out[0] = energy_norm(A, x) ** 2
    for k in range(n_iter):
        if mode == "uniform":
            if not 1 <= p <= P + 1:
                raise ConfigurationError(f"subset size {p} outside [1, {P + 1}]")
            chosen = rng.choice(P + 1, size=p, replace=False)
            coarse_alive = bool((chosen == 0).any())
            alive = np.zeros(P, dtype=bool)
            alive[chosen[chosen > 0] - 1] = True
            step = xi
        elif mode == "coarse-always":
            if not 0 <= p <= P:
                raise ConfigurationError(f"subset size {p} outside [0, {P}]")
            alive = np.zeros(P, dtype=bool)
            alive[rng.choice(P, size=p, replace=False)] = True
            coarse_alive = True
            step = p / (P * lam_max)
        else:
            raise ConfigurationError(f"unknown mode {mode!r}")
        r = b - A @ x
        x = x + step * precond.apply_two_level(r, alive, coarse_alive=coarse_alive)
        out[k + 1] = energy_norm(A, x) ** 2
    return out


def uniform_subset_bound(est: SpectralEstimate, xi: float, p_seq, P: int) -> np.ndarray:
    """Product bound on the expected squared error, subsets drawn from all ``P + 1`` problems."""
    lx = est.lam_max * xi
    fac = 1.0 - lx * (2.0 - lx) * np.asarray(p_seq, dtype=float) / (est.kappa * (P + 1))
    return np.concatenate(([1.0], np.cumprod(fac)))


def coarse_always_bound(est: SpectralEstimate, p_seq, P: int) -> np.ndarray:
    """Product bound when the coarse problem never fails."""
    fac = 1.0 - np.asarray(p_seq, dtype=float) ** 2 / (est.kappa * P**2)
    return np.concatenate(([1.0], np.cumprod(fac)))
