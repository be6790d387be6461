"""Successive-cancellation decoders for polar codes.

Path metrics are penalties: each decision adds ``ln(1 + exp(-(1 - 2u) L))``
where ``L`` is the bit's LLR, so the most likely path has the smallest
penalty. Penalties accumulate over frozen positions too, which makes the
final penalty of a path equal to ``-ln P(u | y)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernel
from .allocation import SegmentPlan
from .codec import FrameLayout, _bitrev, frame_layout, generator_matrix
from .construction import PolarCodeSpec, log2_exact
from .crc import CrcSpec

max_star = _kernel.max_star
llr_f = _kernel.llr_f
llr_g = _kernel.llr_g
quantize_llr = _kernel.quantize
penalty_increment = _kernel.penalty_increment

VARIANTS = ("SC", "SCL", "CA-SCL", "PSCL", "TCA-SCL")


@dataclass
class DecoderConfig:
    L: int = 8
    variant: str = "TCA-SCL"
    quantized: bool = False
    early_terminate: bool = True

    def __post_init__(self):
        if self.L < 1:
            raise ValueError(f"list size must be at least 1, got {self.L}")
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown decoder variant {self.variant!r}; choose from {VARIANTS}")
        if self.variant == "SC" and self.L != 1:
            self.L = 1


@dataclass
class DecodeOutcome:
    u_estimate: np.ndarray
    payload: np.ndarray
    success: bool
    segments_completed: int
    P: int
    penalty: float
    survivors: list[tuple[np.ndarray, float]] = field(default_factory=list, repr=False)

    @property
    def segments_decoded(self) -> int:
        """Segments whose decoding was carried out, counting a failed one."""
        if self.success:
            return self.P
        return min(self.P, self.segments_completed + 1)


def _zero_width_plan(spec: PolarCodeSpec) -> SegmentPlan:
    # a single unchecked segment; its "payload" is every unfrozen bit
    return SegmentPlan(1, [(1, spec.N)], [len(spec.unfrozen_set)], [0], [CrcSpec(0)],
                       crc_mode="uniform")


class Decoder:
    """Segmented list decoder bound to one code and segment plan.

    With a single width-0 segment this is plain SCL (plain SC for L = 1);
    with a single checked segment it is CA-SCL; with several segments it is
    PSCL or TCA-SCL depending on how the plan's CRC widths were chosen.
    """

    def __init__(self, spec: PolarCodeSpec, plan: SegmentPlan | None = None, L: int = 8,
                 quantized: bool = False):
        if L < 1:
            raise ValueError(f"list size must be at least 1, got {L}")
        self.spec = spec
        self.L = int(L)
        self.quantized = bool(quantized)
        if plan is None:
            plan = _zero_width_plan(spec)
            payload_pos = np.flatnonzero(spec.info_mask).astype(np.int64)
            info = payload_pos
            self.layout = FrameLayout(
                N=spec.N, K=info.size, info_pos=info,
                seg_ptr=np.array([0, info.size], dtype=np.int64),
                seg_start=np.array([0], dtype=np.int64),
                seg_end=np.array([spec.N], dtype=np.int64),
                widths=np.zeros(1, dtype=np.int64), feedbacks=np.zeros(1, dtype=np.int64),
                payload_pos=payload_pos,
                payload_ptr=np.array([0, info.size], dtype=np.int64),
            )
        else:
            self.layout = frame_layout(spec, plan)
        self.plan = plan
        self._frozen = np.ascontiguousarray(spec.frozen_mask)
        self._perm = _bitrev(spec.N) if spec.use_bit_reversal else None

    @property
    def P(self) -> int:
        return self.layout.P

    def _channel(self, llrs) -> np.ndarray:
        llrs = np.asarray(llrs, dtype=np.float64)
        if llrs.shape != (self.spec.N,):
            raise ValueError(f"expected {self.spec.N} channel LLRs, got shape {llrs.shape}")
        if self._perm is not None:
            llrs = llrs[self._perm]
        return np.ascontiguousarray(llrs)

    def _run(self, llrs, first_seg: int, committed: np.ndarray):
        lay = self.layout
        return _kernel.decode_segments(
            self._channel(llrs), self._frozen, lay.seg_start, lay.seg_end, lay.seg_ptr,
            lay.info_pos, lay.widths, lay.feedbacks, first_seg, committed, self.L,
            self.quantized,
        )

    def decode(self, llrs, first_segment: int = 0, committed=None,
               keep_survivors: bool = True) -> DecodeOutcome:
        """Decode one frame of channel LLRs.

        Segments before `first_segment` are pinned to `committed`, whose
        entries before that segment's start must hold earlier decisions.
        """
        if committed is None:
            committed = np.zeros(self.spec.N, dtype=np.uint8)
        else:
            committed = np.ascontiguousarray(committed, dtype=np.uint8)
        u, pen, passed, failed, _leaf, cand_u, cand_pen, n_cand = self._run(
            llrs, int(first_segment), committed)
        survivors = []
        if keep_survivors:
            survivors = [(cand_u[k].copy(), float(cand_pen[k])) for k in range(n_cand)]
        return DecodeOutcome(
            u_estimate=u,
            payload=u[self.layout.payload_pos],
            success=not failed,
            segments_completed=int(passed),
            P=self.P,
            penalty=float(pen),
            survivors=survivors,
        )

    def leaf_llrs(self, llrs, decisions) -> np.ndarray:
        """Decision LLR of every bit index on the path fixed by `decisions`."""
        committed = np.ascontiguousarray(decisions, dtype=np.uint8)
        if committed.shape != (self.spec.N,):
            raise ValueError("need one decision per bit index")
        out = self._run(llrs, self.P, committed)
        return out[4]


def sc_decode(channel_llrs, spec: PolarCodeSpec, plan: SegmentPlan | None = None,
              quantized: bool = False) -> DecodeOutcome:
    """Successive cancellation; LLR ties decide 0. No CRC is checked."""
    dec = Decoder(spec, None, 1, quantized)
    out = dec.decode(channel_llrs)
    if plan is not None:
        out.payload = out.u_estimate[frame_layout(spec, plan).payload_pos]
    return out


def scl_decode(channel_llrs, spec: PolarCodeSpec, L: int, plan: SegmentPlan | None = None,
               quantized: bool = False) -> DecodeOutcome:
    """List decoding without CRC; returns the smallest-penalty path."""
    dec = Decoder(spec, None, L, quantized)
    out = dec.decode(channel_llrs)
    if plan is not None:
        out.payload = out.u_estimate[frame_layout(spec, plan).payload_pos]
    return out


def ca_scl_decode(channel_llrs, spec: PolarCodeSpec, plan: SegmentPlan, L: int,
                  quantized: bool = False) -> DecodeOutcome:
    """List decoding with one terminal CRC over the whole payload."""
    if plan.P != 1:
        raise ValueError("CA-SCL takes a single-segment plan")
    return Decoder(spec, plan, L, quantized).decode(channel_llrs)


def segmented_decode(channel_llrs, spec: PolarCodeSpec, plan: SegmentPlan, L: int,
                     quantized: bool = False) -> DecodeOutcome:
    """Segment-by-segment list decoding with early termination on CRC failure."""
    return Decoder(spec, plan, L, quantized).decode(channel_llrs)


def make_decoder(spec: PolarCodeSpec, plan: SegmentPlan | None, config: DecoderConfig) -> Decoder:
    """Decoder for a configured variant; SC and SCL ignore the plan's CRCs."""
    if config.variant in ("SC", "SCL"):
        return Decoder(spec, None, 1 if config.variant == "SC" else config.L, config.quantized)
    if plan is None:
        raise ValueError(f"{config.variant} needs a segment plan")
    if config.variant == "CA-SCL" and plan.P != 1:
        raise ValueError("CA-SCL takes a single-segment plan")
    return Decoder(spec, plan, config.L, config.quantized)


# -- reference evaluations (small N) -----------------------------------------------------

def llr_recursive(channel_llrs: Sequence[float], decisions: Sequence[int], i: int,
                  use_bit_reversal: bool = True) -> float:
    """LLR of bit `i` (1-based) given earlier decisions, by direct recursion.

    Splits the channel word into halves and the decisions into odd/even
    subsequences, as in Arikan's construction with ``G = B F^{(x)n}``.
    """
    y = np.asarray(channel_llrs, dtype=np.float64)
    N = y.size
    log2_exact(N)
    if not use_bit_reversal:
        y = y[_bitrev(N)]
    u = np.asarray(decisions, dtype=np.uint8)[: i - 1]
    return _llr_rec(y, u, i)


def _llr_rec(y: np.ndarray, u: np.ndarray, i: int) -> float:
    N = y.size
    if N == 1:
        return float(y[0])
    k = (i + 1) // 2
    head = u[: 2 * k - 2]
    u_o, u_e = head[0::2], head[1::2]
    a = _llr_rec(y[: N // 2], u_o ^ u_e, k)
    b = _llr_rec(y[N // 2:], u_e, k)
    if i % 2:
        return float(llr_f(a, b))
    return float(llr_g(a, b, u[2 * k - 2]))


def brute_force_llr_oracle(channel_llrs: Sequence[float], prior_decisions: Sequence[int], i: int,
                           use_bit_reversal: bool = True) -> float:
    """LLR of bit `i` (1-based) by summing the channel likelihood over all later bits.

    The channel LLRs act as per-bit likelihood ratios, so
    ``ln W(y | x) = sum_j (1 - 2 x_j) llr_j / 2`` up to a constant.
    """
    y = np.asarray(channel_llrs, dtype=np.float64)
    N = y.size
    if N > 16:
        raise ValueError("brute-force oracle limited to N <= 16")
    G = generator_matrix(N, use_bit_reversal).astype(np.int64)
    prefix = np.asarray(prior_decisions, dtype=np.int64)[: i - 1]
    rest = N - i
    tails = np.array(list(itertools.product((0, 1), repeat=rest)), dtype=np.int64)
    tails = tails.reshape(2 ** rest, rest)
    logw = []
    for ui in (0, 1):
        U = np.hstack([np.tile(prefix, (tails.shape[0], 1)),
                       np.full((tails.shape[0], 1), ui), tails])
        X = (U @ G) % 2
        ll = ((1 - 2 * X) * y).sum(axis=1) / 2.0
        top = ll.max()
        logw.append(top + np.log(np.exp(ll - top).sum()))
    return float(logw[0] - logw[1])
