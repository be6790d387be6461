"""Segment-level HARQ with chase combining of full-codeword repeats.

A failed segment CRC triggers one more transmission of the whole codeword
(a u-segment has no channel image of its own). The fresh LLR word is added
to the running sum and only the failed segment onwards is decoded again;
decisions of earlier segments stay committed.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Sequence, Union

import numpy as np

from .allocation import SegmentPlan
from .construction import PolarCodeSpec
from .decoder import DecodeOutcome, Decoder

RetransmitSource = Union[Callable[[], np.ndarray], Iterator[np.ndarray], Iterable[np.ndarray]]


class SourceExhausted(RuntimeError):
    """The retransmission source ran out of observations."""


def mrc_combine(accumulated, fresh) -> np.ndarray:
    """Maximum-ratio combining of equal-SNR observations: LLRs add."""
    acc = np.asarray(accumulated, dtype=np.float64)
    new = np.asarray(fresh, dtype=np.float64)
    if acc.shape != new.shape:
        raise ValueError(f"cannot combine LLR words of shapes {acc.shape} and {new.shape}")
    return acc + new


@dataclass
class HarqState:
    T: int
    combined_llrs: np.ndarray
    committed: np.ndarray
    i: int = 1
    retransmissions_used: int = 0

    def __post_init__(self):
        if self.T < 1:
            raise ValueError(f"transmission budget T must be at least 1, got {self.T}")
        if not 1 <= self.i <= self.T:
            raise ValueError(f"transmission count {self.i} outside [1, {self.T}]")

    def can_retransmit(self) -> bool:
        return self.i < self.T

    def absorb(self, fresh) -> None:
        if not self.can_retransmit():
            raise RuntimeError("transmission budget exhausted")
        self.combined_llrs = mrc_combine(self.combined_llrs, fresh)
        self.i += 1
        self.retransmissions_used += 1


@dataclass
class HarqOutcome:
    outcome: DecodeOutcome
    retransmissions: int
    state: HarqState = field(repr=False)

    @property
    def success(self) -> bool:
        return self.outcome.success


def _puller(source: RetransmitSource) -> Callable[[], np.ndarray]:
    if callable(source):
        return source
    it = iter(source)

    def pull():
        try:
            return next(it)
        except StopIteration:
            raise SourceExhausted("retransmission source has no more observations") from None

    return pull


def harq_decode(initial_llrs, spec: PolarCodeSpec, plan: SegmentPlan, L: int, T: int,
                retransmit_source: RetransmitSource, quantized: bool = False,
                decoder: Decoder | None = None) -> HarqOutcome:
    """Decode with up to ``T - 1`` retransmissions shared by all segments of the frame.

    `retransmit_source` is a zero-argument callable or an iterable yielding
    fresh N-LLR observations of the same codeword.
    """
    dec = decoder or Decoder(spec, plan, L, quantized)
    llrs = np.asarray(initial_llrs, dtype=np.float64)
    state = HarqState(T, llrs.copy(), np.zeros(spec.N, dtype=np.uint8))
    pull = _puller(retransmit_source)
    first = 0
    while True:
        out = dec.decode(state.combined_llrs, first, state.committed)
        if out.success or not state.can_retransmit():
            return HarqOutcome(out, state.retransmissions_used, state)
        # earlier segments stay as decided; retry the failed one on more energy
        first = out.segments_completed
        state.committed = out.u_estimate.copy()
        fresh = np.asarray(pull(), dtype=np.float64)
        if fresh.shape != (spec.N,):
            raise ValueError(f"retransmission must carry {spec.N} LLRs, got shape {fresh.shape}")
        state.absorb(fresh)


@dataclass(frozen=True)
class RetransmissionStats:
    frames: int
    average: float
    distribution: dict[int, int]


def retransmission_stats(frames: Sequence[int] | Iterable) -> RetransmissionStats:
    """Mean and histogram of per-frame retransmission counts.

    Accepts plain counts or objects with a ``retransmissions`` attribute.
    """
    counts = [int(getattr(f, "retransmissions", f)) for f in frames]
    if not counts:
        return RetransmissionStats(0, 0.0, {})
    return RetransmissionStats(len(counts), sum(counts) / len(counts), dict(sorted(Counter(counts).items())))
