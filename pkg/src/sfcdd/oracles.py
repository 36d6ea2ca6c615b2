"""Dense reference constructions used to cross-check the sparse code paths.

Everything here works on small dense numpy arrays with explicit loops and
shares no code with the production modules apart from input data.
"""

from __future__ import annotations

import itertools

import numpy as np


def dense_laplace(shape) -> np.ndarray:
    """Central-difference Laplacian, lexicographic order, by explicit stencil loops."""
    shape = tuple(int(n) for n in shape)
    pts = list(itertools.product(*[range(n) for n in shape]))
    index = {p: k for k, p in enumerate(pts)}
    A = np.zeros((len(pts), len(pts)))
    for p, k in index.items():
        for j, n in enumerate(shape):
            inv_h2 = float((n + 1) ** 2)
            A[k, k] += 2.0 * inv_h2
            for step in (-1, 1):
                nb = list(p)
                nb[j] += step
                nb = tuple(nb)
                if nb in index:
                    A[k, index[nb]] -= inv_h2
    return A


def dense_window_restriction(window, N: int) -> np.ndarray:
    R = np.zeros((len(window), N))
    for r, j in enumerate(window):
        R[r, j] = 1.0
    return R


def dense_agglomeration(sizes, q: int) -> np.ndarray:
    """0/1 restriction: ``q`` consecutive chunks per block, larger chunks first."""
    N = int(sum(sizes))
    R0 = np.zeros((len(sizes) * q, N))
    start = 0
    for i, n in enumerate(sizes):
        base, extra = divmod(int(n), q)
        pos = start
        for m in range(q):
            width = base + (1 if m < extra else 0)
            R0[i * q + m, pos : pos + width] = 1.0
            pos += width
        start += int(n)
    return R0


def dense_cyclic_windows(N: int, P: int, gamma: float) -> list:
    """Windows from first principles: count neighbouring block shares point by point."""
    base, extra = divmod(N, P)
    sizes = [base + (1 if i < extra else 0) for i in range(P)]
    starts = [sum(sizes[:i]) for i in range(P)]
    whole = int(np.floor(gamma))
    eta = gamma - whole
    wins = []
    for i in range(P):
        idx = []
        for k in range(whole, 0, -1):
            b = (i - k) % P
            idx += list(range(starts[b], starts[b] + sizes[b]))
        if eta:
            b = (i - whole - 1) % P
            take = int(np.ceil(eta * sizes[b] - 1e-12))
            left = list(range(starts[b] + sizes[b] - take, starts[b] + sizes[b]))
            idx = left + idx
        idx += list(range(starts[i], starts[i] + sizes[i]))
        for k in range(1, whole + 1):
            b = (i + k) % P
            idx += list(range(starts[b], starts[b] + sizes[b]))
        if eta:
            b = (i + whole + 1) % P
            take = int(np.floor(eta * sizes[b] + 1e-12))
            idx += list(range(starts[b], starts[b] + take))
        wins.append(idx)
    return wins


def dense_schwarz(A: np.ndarray, windows, scales, R0: np.ndarray | None, variant: str) -> np.ndarray:
    """Dense ``C^{-1}`` for one of the Schwarz variants.

    ``scales[i]`` is a scalar or a vector over window ``i`` (``None`` for one).
    """
    N = A.shape[0]
    C1 = np.zeros((N, N))
    for w, s in zip(windows, scales):
        R = dense_window_restriction(w, N)
        Ai_inv = np.linalg.inv(R @ A @ R.T)
        D = np.eye(len(w)) if s is None else np.diag(np.broadcast_to(s, (len(w),)))
        C1 += R.T @ D @ Ai_inv @ R
    if variant == "plain-one-level":
        return C1
    F = R0.T @ np.linalg.inv(R0 @ A @ R0.T) @ R0
    G = np.eye(N) - A @ F
    if variant in ("plain-two-level", "nicolaides"):
        return C1 + F
    if variant == "balanced":
        return G.T @ C1 @ G + F
    if variant == "deflated":
        return G.T @ C1 + F
    raise ValueError(variant)


def dense_extremes(C: np.ndarray, A: np.ndarray) -> tuple:
    """Extreme eigenvalues of ``C A`` for symmetric ``C`` via the similar matrix ``A^1/2 C A^1/2``."""
    w, V = np.linalg.eigh(A)
    Ah = (V * np.sqrt(w)) @ V.T
    ev = np.linalg.eigvalsh(Ah @ C @ Ah)
    return float(ev[0]), float(ev[-1])
