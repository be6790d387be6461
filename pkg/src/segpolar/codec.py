"""Frame assembly and polar encoding."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .allocation import SegmentPlan
from .construction import PolarCodeSpec, bit_reversal_indices, log2_exact
from .crc import int_to_bits, lfsr_remainder


@dataclass(frozen=True)
class FrameLayout:
    """0-based positions of payload and CRC bits, per segment.

    ``seg_ptr[k]:seg_ptr[k+1]`` slices ``info_pos`` to segment k's unfrozen
    positions; the last ``widths[k]`` of those carry the segment CRC.
    """

    N: int
    K: int
    info_pos: np.ndarray
    seg_ptr: np.ndarray
    seg_start: np.ndarray
    seg_end: np.ndarray
    widths: np.ndarray
    feedbacks: np.ndarray
    payload_pos: np.ndarray
    payload_ptr: np.ndarray

    @property
    def P(self) -> int:
        return int(self.widths.size)


def frame_layout(spec: PolarCodeSpec, plan: SegmentPlan) -> FrameLayout:
    if plan.boundaries[-1][1] != spec.N:
        raise ValueError("segment plan does not cover the code length")
    if sum(plan.payload_per_segment) != spec.K:
        raise ValueError(
            f"plan carries {sum(plan.payload_per_segment)} payload bits, code expects K = {spec.K}"
        )
    info = np.flatnonzero(spec.info_mask).astype(np.int64)
    seg_ptr = [0]
    payload = []
    payload_ptr = [0]
    for (s, e), w in zip(plan.boundaries, plan.crc_widths):
        idx = info[(info >= s - 1) & (info <= e - 1)]
        seg_ptr.append(seg_ptr[-1] + idx.size)
        payload.extend(idx[: idx.size - w].tolist())
        payload_ptr.append(len(payload))
    return FrameLayout(
        N=spec.N,
        K=spec.K,
        info_pos=info,
        seg_ptr=np.asarray(seg_ptr, dtype=np.int64),
        seg_start=np.asarray([s - 1 for s, _ in plan.boundaries], dtype=np.int64),
        seg_end=np.asarray([e for _, e in plan.boundaries], dtype=np.int64),
        widths=np.asarray(plan.crc_widths, dtype=np.int64),
        feedbacks=np.asarray([c.feedback if c.width else 0 for c in plan.crc_specs],
                             dtype=np.int64),
        payload_pos=np.asarray(payload, dtype=np.int64),
        payload_ptr=np.asarray(payload_ptr, dtype=np.int64),
    )


def assemble_frame(payload, spec: PolarCodeSpec, plan: SegmentPlan,
                   layout: FrameLayout | None = None) -> np.ndarray:
    """Place payload and per-segment CRC bits into the u-word (frozen bits are 0)."""
    bits = np.asarray(payload, dtype=np.uint8)
    if bits.shape != (spec.K,):
        raise ValueError(f"payload must hold K = {spec.K} bits, got {bits.size}")
    layout = layout or frame_layout(spec, plan)
    u = np.zeros(spec.N, dtype=np.uint8)
    u[layout.payload_pos] = bits
    for k in range(layout.P):
        w = int(layout.widths[k])
        if w == 0:
            continue
        reg = lfsr_remainder(bits, layout.payload_ptr[k], layout.payload_ptr[k + 1],
                             w, layout.feedbacks[k])
        crc_pos = layout.info_pos[layout.seg_ptr[k + 1] - w: layout.seg_ptr[k + 1]]
        u[crc_pos] = int_to_bits(reg, w)
    return u


def extract_payload(u_hat, spec: PolarCodeSpec, plan: SegmentPlan,
                    layout: FrameLayout | None = None) -> np.ndarray:
    layout = layout or frame_layout(spec, plan)
    return np.asarray(u_hat, dtype=np.uint8)[layout.payload_pos].copy()


@lru_cache(maxsize=None)
def _bitrev(N: int) -> np.ndarray:
    idx = bit_reversal_indices(N)
    idx.setflags(write=False)
    return idx


def polar_encode(u, spec: PolarCodeSpec | None = None, *, use_bit_reversal: bool | None = None
                 ) -> np.ndarray:
    """Butterfly evaluation of ``x = u B_N F^{(x)n}`` over GF(2).

    Works on a single word or on a batch stacked along the first axis.
    """
    x = np.array(u, dtype=np.uint8)
    N = x.shape[-1]
    if spec is not None and N != spec.N:
        raise ValueError(f"u-word length {N} does not match N = {spec.N}")
    log2_exact(N)
    if use_bit_reversal is None:
        use_bit_reversal = True if spec is None else spec.use_bit_reversal
    lead = x.shape[:-1]
    h = 1
    while h < N:
        v = x.reshape(lead + (N // (2 * h), 2, h))
        v[..., 0, :] ^= v[..., 1, :]
        h *= 2
    if use_bit_reversal:
        x = x[..., _bitrev(N)]
    return x


def kernel_power(n: int) -> np.ndarray:
    """F^{(x)n} by explicit Kronecker products."""
    F = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    G = np.ones((1, 1), dtype=np.uint8)
    for _ in range(n):
        G = np.kron(G, F)
    return G


def generator_matrix(N: int, use_bit_reversal: bool = True) -> np.ndarray:
    n = log2_exact(N)
    G = kernel_power(n).astype(np.int64)
    if use_bit_reversal:
        B = np.zeros((N, N), dtype=np.int64)
        B[np.arange(N), bit_reversal_indices(N)] = 1
        G = (B @ G) % 2
    return G.astype(np.uint8)


def matrix_encode_oracle(u, spec: PolarCodeSpec | None = None, *,
                         use_bit_reversal: bool | None = None) -> np.ndarray:
    """Reference encoder: explicit GF(2) product with the generator matrix."""
    u = np.asarray(u, dtype=np.int64)
    N = u.shape[-1]
    if N > 4096:
        raise ValueError("matrix oracle limited to N <= 4096")
    if use_bit_reversal is None:
        use_bit_reversal = True if spec is None else spec.use_bit_reversal
    G = generator_matrix(N, use_bit_reversal).astype(np.int64)
    return ((u @ G) % 2).astype(np.uint8)
