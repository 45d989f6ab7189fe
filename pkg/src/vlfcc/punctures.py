"""Pseudo-random rate-compatible puncturing schedules.

A schedule is one fixed permutation of the N mother-codeword symbol
positions: the transmitter sends positions order[0], order[1], ... so the
set of symbols available after n receptions is always the prefix
order[0..n) (higher-rate codes nested inside lower-rate ones).  Past the
last decode point N_m the transmitter repeats the first N_m entries and the
receiver restarts from scratch.

The permutation is produced by a Fisher-Yates shuffle driven by raw 64-bit
words from numpy's Philox4x64-10 counter-based bit generator, with modulo
rejection (draws >= floor(2^64 / bound) * bound are discarded).  This pins
the schedule to (N, seed) alone: no dependence on numpy Generator method
implementations, identical on every platform.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["TransmissionSchedule", "make_schedule", "symbol_at", "fisher_yates_permutation"]

_WORD_BATCH = 256


class _PhiloxWords:
    """Buffered raw 64-bit word stream from a seeded Philox generator."""

    def __init__(self, seed: int):
        self._bg = np.random.Philox(key=np.uint64(seed))
        self._buf: list[int] = []

    def next(self) -> int:
        if not self._buf:
            self._buf = self._bg.random_raw(_WORD_BATCH).tolist()
            self._buf.reverse()
        return self._buf.pop()


def fisher_yates_permutation(n: int, seed: int) -> np.ndarray:
    """Deterministic permutation of {0..n-1} from a Philox word stream."""
    order = list(range(n))
    words = _PhiloxWords(seed)
    for i in range(n - 1, 0, -1):
        bound = i + 1
        limit = (2**64 // bound) * bound
        w = words.next()
        while w >= limit:
            w = words.next()
        j = w % bound
        order[i], order[j] = order[j], order[i]
    return np.asarray(order, dtype=np.int64)


@dataclass(frozen=True)
class TransmissionSchedule:
    """Transmission order over mother positions plus the decode-point grid."""

    N: int
    order: np.ndarray
    decode_points: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        self.order.setflags(write=False)

    @property
    def increments(self) -> tuple[int, ...]:
        prev = 0
        out = []
        for n in self.decode_points:
            out.append(n - prev)
            prev = n
        return tuple(out)

    @property
    def block_length(self) -> int:
        """Repeat period: symbols per transmission block (the last decode point)."""
        return self.decode_points[-1]


def make_schedule(N: int, seed: int, decode_points) -> TransmissionSchedule:
    """Build the seeded symbol schedule; same (N, seed) always gives the same order."""
    if N < 1:
        raise ValueError("N must be >= 1")
    pts = tuple(int(n) for n in decode_points)
    if not pts:
        raise ValueError("decode_points must be nonempty")
    prev = 0
    for n in pts:
        if n <= prev:
            raise ValueError(f"decode_points must be strictly increasing, got {pts}")
        prev = n
    if pts[-1] > N:
        raise ValueError(f"decode point {pts[-1]} exceeds mother length {N}")
    order = fisher_yates_permutation(N, seed)
    return TransmissionSchedule(N, order, pts, int(seed))


def symbol_at(sched: TransmissionSchedule, n: int) -> int:
    """Mother position of the n-th transmitted symbol (n >= 1); the stream
    repeats the first block_length entries after each block."""
    if n < 1:
        raise ValueError("symbol index n must be >= 1")
    period = sched.block_length
    return int(sched.order[(n - 1) % period])
