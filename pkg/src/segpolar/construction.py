"""Polar code construction over the binary erasure channel.

Channel indices exposed by this module are 1-based, in natural u-order.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def log2_exact(n: int) -> int:
    if not is_power_of_two(n):
        raise ValueError(f"expected a power of two, got {n}")
    return n.bit_length() - 1


@dataclass(frozen=True)
class ReliabilityProfile:
    """Symmetric capacities of the N synthesized channels.

    ``capacity[i - 1]`` is the capacity of channel ``i``.
    """

    capacity: np.ndarray
    epsilon: float | None = None

    def __post_init__(self):
        cap = np.asarray(self.capacity, dtype=np.float64)
        if not is_power_of_two(cap.size):
            raise ValueError(f"profile length must be a power of two, got {cap.size}")
        if np.any(cap < 0.0) or np.any(cap > 1.0):
            raise ValueError("capacities must lie in [0, 1]")
        cap.setflags(write=False)
        object.__setattr__(self, "capacity", cap)

    @property
    def n_channels(self) -> int:
        return int(self.capacity.size)

    def __len__(self) -> int:
        return self.n_channels


def bec_polarize(epsilon: float, N: int) -> ReliabilityProfile:
    """Capacities of the polarized channels of a BEC with erasure probability `epsilon`."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"epsilon must be in [0, 1], got {epsilon}")
    n = log2_exact(N)
    cap = np.array([1.0 - epsilon])
    for _ in range(n):
        nxt = np.empty(2 * cap.size)
        nxt[0::2] = cap * cap
        nxt[1::2] = 2.0 * cap - cap * cap
        cap = nxt
    return ReliabilityProfile(cap, epsilon=epsilon)


def select_unfrozen(profile: ReliabilityProfile, count: int) -> list[int]:
    """Return the `count` most reliable channel indices (1-based, ascending).

    Equal capacities are ranked by index, the larger index being preferred.
    """
    N = profile.n_channels
    if not 0 <= count <= N:
        raise ValueError(f"cannot select {count} channels out of {N}")
    # lexsort: last key is primary
    ranking = np.lexsort((np.arange(N), profile.capacity))
    chosen = ranking[N - count:] + 1
    return sorted(int(i) for i in chosen)


def bit_reversal_perm(N: int) -> list[int]:
    """1-based bit-reversal permutation of length `N`."""
    n = log2_exact(N)
    out = []
    for i in range(N):
        r = int(format(i, f"0{n}b")[::-1], 2) if n else 0
        out.append(r + 1)
    return out


def bit_reversal_indices(N: int) -> np.ndarray:
    """0-based bit-reversal permutation as an index array."""
    return np.asarray(bit_reversal_perm(N), dtype=np.int64) - 1


@dataclass
class PolarCodeSpec:
    """Everything encoder and decoder must agree on."""

    N: int
    K: int
    m: int
    unfrozen_set: list[int]
    profile: ReliabilityProfile | None = None
    use_bit_reversal: bool = True
    epsilon: float | None = None
    _mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        log2_exact(self.N)
        if self.K < 0 or self.m < 0:
            raise ValueError("K and m must be nonnegative")
        A = [int(i) for i in self.unfrozen_set]
        if len(A) != self.K + self.m:
            raise ValueError(f"|unfrozen_set| = {len(A)} but K + m = {self.K + self.m}")
        if self.K + self.m > self.N:
            raise ValueError(f"K + m = {self.K + self.m} exceeds N = {self.N}")
        if any(b <= a for a, b in zip(A, A[1:])):
            raise ValueError("unfrozen_set must be strictly increasing")
        if A and (A[0] < 1 or A[-1] > self.N):
            raise ValueError("unfrozen indices must lie in 1..N")
        self.unfrozen_set = A
        if self.profile is not None and self.profile.n_channels != self.N:
            raise ValueError("profile length does not match N")
        if self.epsilon is None and self.profile is not None:
            self.epsilon = self.profile.epsilon
        mask = np.zeros(self.N, dtype=np.bool_)
        mask[np.asarray(A, dtype=np.int64) - 1] = True
        mask.setflags(write=False)
        self._mask = mask

    @property
    def n(self) -> int:
        return self.N.bit_length() - 1

    @property
    def info_mask(self) -> np.ndarray:
        """0-based boolean mask, True at unfrozen positions."""
        return self._mask

    @property
    def frozen_mask(self) -> np.ndarray:
        return ~self._mask

    @classmethod
    def from_bec(cls, N: int, K: int, m: int = 0, epsilon: float = 0.5,
                 use_bit_reversal: bool = True) -> "PolarCodeSpec":
        profile = bec_polarize(epsilon, N)
        return cls(N, K, m, select_unfrozen(profile, K + m), profile,
                   use_bit_reversal=use_bit_reversal, epsilon=epsilon)

    def to_dict(self) -> dict:
        return {
            "N": self.N,
            "K": self.K,
            "m": self.m,
            "epsilon": self.epsilon,
            "unfrozen_set": list(self.unfrozen_set),
            "use_bit_reversal": self.use_bit_reversal,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PolarCodeSpec":
        eps = d.get("epsilon")
        profile = bec_polarize(eps, d["N"]) if eps is not None else None
        return cls(d["N"], d["K"], d["m"], list(d["unfrozen_set"]), profile,
                   use_bit_reversal=d.get("use_bit_reversal", True), epsilon=eps)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def export_capacity_profile(profile: ReliabilityProfile, unfrozen_set: Sequence[int],
                            path: str | Path) -> Path:
    """Write ``index,capacity,unfrozen`` rows, one per channel.

    Raises OSError if the file cannot be written.
    """
    path = Path(path)
    flagged = set(int(i) for i in unfrozen_set)
    try:
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index", "capacity", "unfrozen"])
            for i, c in enumerate(profile.capacity, start=1):
                w.writerow([i, repr(float(c)), int(i in flagged)])
    except OSError as exc:
        raise OSError(f"cannot write capacity profile to {path}: {exc}") from exc
    return path
