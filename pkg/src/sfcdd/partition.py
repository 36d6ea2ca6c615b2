"""Balanced splitting of the curve-ordered index vector and cyclic overlap.

Positions are 0-based and intervals half-open. An overlapping subdomain is a
cyclic window of the ordered index vector stored as ``(start, length)``;
position ``p`` of the window is global position ``(start + p) % N``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import ConfigurationError, InvalidInputError


def as_fraction(gamma) -> Fraction:
    """Exact value of an overlap parameter given as float, str or Fraction."""
    if isinstance(gamma, Fraction):
        return gamma
    return Fraction(str(gamma)).limit_denominator(10**6)


def split_nonoverlapping(N: int, P: int) -> tuple[np.ndarray, np.ndarray]:
    """Sizes and start positions of ``P`` consecutive blocks covering ``N`` points.

    The first ``N mod P`` blocks get one extra point.
    """
    N, P = int(N), int(P)
    if P < 1 or P > N:
        raise ConfigurationError(f"need 1 <= P <= N, got P={P}, N={N}")
    base, r = divmod(N, P)
    sizes = np.full(P, base, dtype=np.int64)
    sizes[:r] += 1
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    return sizes, starts


def enlarge_overlap(sizes: np.ndarray, gamma) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic windows grown by ``gamma`` neighbouring blocks on each side.

    The fractional part ``eta`` adds the last ``ceil(eta * N_k)`` points of the
    block ``floor(gamma) + 1`` to the left and the first ``floor(eta * N_k)``
    points of the block ``floor(gamma) + 1`` to the right.
    """
    g = as_fraction(gamma)
    sizes = np.asarray(sizes, dtype=np.int64)
    P = len(sizes)
    if g < 0:
        raise ConfigurationError(f"overlap must be nonnegative, got {gamma}")
    if 2 * g + 1 > P:
        raise ConfigurationError(f"overlap {gamma} needs at least {2 * g + 1} subdomains, have {P}")
    whole = math.floor(g)
    eta = g - whole
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    N = int(sizes.sum())
    win_start = np.empty(P, dtype=np.int64)
    win_len = np.empty(P, dtype=np.int64)
    for i in range(P):
        left = sum(int(sizes[(i - k) % P]) for k in range(1, whole + 1))
        right = sum(int(sizes[(i + k) % P]) for k in range(1, whole + 1))
        if eta:
            left += math.ceil(eta * int(sizes[(i - whole - 1) % P]))
            right += math.floor(eta * int(sizes[(i + whole + 1) % P]))
        win_start[i] = (starts[i] - left) % N
        win_len[i] = sizes[i] + left + right
    return win_start, win_len


@dataclass(frozen=True)
class Partition:
    N: int
    P: int
    gamma: Fraction
    sizes: np.ndarray
    core_start: np.ndarray
    win_start: np.ndarray
    win_len: np.ndarray

    @property
    def core_stop(self) -> np.ndarray:
        return self.core_start + self.sizes

    def core(self, i: int) -> np.ndarray:
        return np.arange(self.core_start[i], self.core_start[i] + self.sizes[i], dtype=np.int64)

    def window(self, i: int) -> np.ndarray:
        return (self.win_start[i] + np.arange(self.win_len[i], dtype=np.int64)) % self.N

    def windows(self) -> list:
        return [self.window(i) for i in range(self.P)]

    def contains(self, i: int, j) -> np.ndarray:
        """Whether global position(s) ``j`` lie in window ``i``."""
        return (np.asarray(j) - self.win_start[i]) % self.N < self.win_len[i]

    def local_position(self, i: int, j) -> np.ndarray:
        return (np.asarray(j) - self.win_start[i]) % self.N

    def owner(self, j: int) -> int:
        """Subdomain whose non-overlapping block holds position ``j``."""
        return int(np.searchsorted(self.core_start, j, side="right") - 1)

    def coverage_counts(self) -> np.ndarray:
        """Number of windows containing each position."""
        diff = np.zeros(self.N + 1, dtype=np.int64)
        for s, n in zip(self.win_start, self.win_len):
            stop = s + n
            if stop <= self.N:
                diff[s] += 1
                diff[stop] -= 1
            else:
                diff[s] += 1
                diff[self.N] -= 1
                diff[0] += 1
                diff[stop - self.N] -= 1
        return np.cumsum(diff[:-1])

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "P": self.P,
            "gamma": str(self.gamma),
            "sizes": self.sizes.tolist(),
            "core_start": self.core_start.tolist(),
            "win_start": self.win_start.tolist(),
            "win_len": self.win_len.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)

    @classmethod
    def from_dict(cls, data: dict) -> "Partition":
        return cls(
            N=int(data["N"]),
            P=int(data["P"]),
            gamma=Fraction(data["gamma"]),
            sizes=np.asarray(data["sizes"], dtype=np.int64),
            core_start=np.asarray(data["core_start"], dtype=np.int64),
            win_start=np.asarray(data["win_start"], dtype=np.int64),
            win_len=np.asarray(data["win_len"], dtype=np.int64),
        )

    def __eq__(self, other):
        if not isinstance(other, Partition):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def build_partition(N: int, P: int, gamma) -> Partition:
    sizes, starts = split_nonoverlapping(N, P)
    win_start, win_len = enlarge_overlap(sizes, gamma)
    return Partition(
        N=int(N),
        P=int(P),
        gamma=as_fraction(gamma),
        sizes=sizes,
        core_start=starts,
        win_start=win_start,
        win_len=win_len,
    )


def coverage_count(part: Partition, j: int) -> int:
    if not 0 <= j < part.N:
        raise InvalidInputError(f"position {j} outside [0, {part.N})")
    return int(sum(part.contains(i, j) for i in range(part.P)))


@dataclass(frozen=True)
class OverlapWeights:
    """Diagonal partition-of-unity weights ``D_i`` and scalars ``omega_i``."""

    D: list
    omega: np.ndarray

    def is_uniform(self) -> bool:
        return all((Di == w).all() for Di, w in zip(self.D, self.omega))


def compute_weights(part: Partition) -> OverlapWeights:
    counts = part.coverage_counts()
    D = [1.0 / counts[part.window(i)] for i in range(part.P)]
    omega = np.array([Di.max() for Di in D])
    return OverlapWeights(D=D, omega=omega)


def is_half_integer(gamma) -> bool:
    return (2 * as_fraction(gamma)).denominator == 1
