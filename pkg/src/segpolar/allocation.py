"""Segmentation of the u-word and allocation of the CRC budget across segments.

Segment boundaries are 1-based inclusive ``(start, end)`` pairs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .construction import PolarCodeSpec, ReliabilityProfile, is_power_of_two
from .crc import CrcSpec

Boundaries = list[tuple[int, int]]


@dataclass
class SegmentPlan:
    P: int
    boundaries: Boundaries
    unfrozen_per_segment: list[int]
    crc_widths: list[int]
    crc_specs: list[CrcSpec]
    virtual_lengths: list[float] = field(default_factory=list)
    partition_mode: str = "code"
    crc_mode: str = "tailored"

    def __post_init__(self):
        if not (len(self.boundaries) == len(self.unfrozen_per_segment)
                == len(self.crc_widths) == len(self.crc_specs) == self.P):
            raise ValueError("segment plan fields disagree on the segment count")
        expect = 1
        for start, end in self.boundaries:
            if start != expect or end < start:
                raise ValueError(f"segments must be contiguous and ascending, got {self.boundaries}")
            expect = end + 1
        for w, cap, spec in zip(self.crc_widths, self.unfrozen_per_segment, self.crc_specs):
            if not 0 <= w <= cap:
                raise ValueError(f"CRC width {w} outside [0, {cap}]")
            if spec.width != w:
                raise ValueError("crc_specs widths disagree with crc_widths")

    @property
    def m(self) -> int:
        return sum(self.crc_widths)

    @property
    def payload_per_segment(self) -> list[int]:
        return [c - w for c, w in zip(self.unfrozen_per_segment, self.crc_widths)]

    def to_dict(self) -> dict:
        return {
            "P": self.P,
            "partition_mode": self.partition_mode,
            "crc_mode": self.crc_mode,
            "segments": [
                {"start": s, "end": e, "crc_width": c.width, "poly_hex": f"0x{c.poly_hex:X}"}
                for (s, e), c in zip(self.boundaries, self.crc_specs)
            ],
            "virtual_lengths": [float(v) for v in self.virtual_lengths],
        }

    @classmethod
    def from_dict(cls, d: dict, spec: PolarCodeSpec) -> "SegmentPlan":
        bounds = [(int(s["start"]), int(s["end"])) for s in d["segments"]]
        specs = []
        for s in d["segments"]:
            poly = s.get("poly_hex", 0)
            poly = int(poly, 16) if isinstance(poly, str) else int(poly)
            specs.append(CrcSpec(int(s["crc_width"]), poly))
        return cls(
            P=len(bounds),
            boundaries=bounds,
            unfrozen_per_segment=count_unfrozen(spec.unfrozen_set, bounds),
            crc_widths=[c.width for c in specs],
            crc_specs=specs,
            virtual_lengths=list(d.get("virtual_lengths", [])),
            partition_mode=d.get("partition_mode", "code"),
            crc_mode=d.get("crc_mode", "tailored"),
        )


def partition_code_bits(N: int, P: int) -> Boundaries:
    """Split 1..N into P equal contiguous ranges."""
    if not is_power_of_two(P) or N % P:
        raise ValueError(f"P = {P} must be a power of two dividing N = {N}")
    size = N // P
    return [(k * size + 1, (k + 1) * size) for k in range(P)]


def partition_info_bits(spec: PolarCodeSpec, P: int) -> Boundaries:
    """Split 1..N so that each range holds (K + m) / P unfrozen indices."""
    A = spec.unfrozen_set
    if P < 1 or len(A) % P:
        raise ValueError(f"P = {P} does not divide K + m = {len(A)}")
    share = len(A) // P
    bounds = []
    start = 1
    for k in range(P - 1):
        end = A[(k + 1) * share - 1]
        bounds.append((start, end))
        start = end + 1
    bounds.append((start, spec.N))
    return bounds


def count_unfrozen(unfrozen_set: Sequence[int], boundaries: Boundaries) -> list[int]:
    A = np.asarray(unfrozen_set, dtype=np.int64)
    return [int(np.count_nonzero((A >= s) & (A <= e))) for s, e in boundaries]


def mean_capacity(profile: ReliabilityProfile, unfrozen_set: Sequence[int]) -> float:
    if len(unfrozen_set) == 0:
        raise ValueError("mean capacity of an empty unfrozen set is undefined")
    idx = np.asarray(unfrozen_set, dtype=np.int64) - 1
    return float(np.mean(profile.capacity[idx]))


def virtual_value(capacity: float, mean: float) -> float:
    """Virtual value J of a channel with the given capacity.

    Less reliable channels than the mean map above 1, more reliable ones below.
    """
    if capacity <= 0.0:
        raise ValueError("virtual value undefined for a zero-capacity channel")
    if mean >= 1.0:
        return 1.0
    ratio = mean / capacity
    if ratio >= 1.0:
        return 1.0 + (ratio - 1.0) / (2.0 * (1.0 - mean))
    return 1.0 - (1.0 - ratio) / (2.0 * (1.0 - mean))


def virtual_lengths(profile: ReliabilityProfile, unfrozen_set: Sequence[int],
                    boundaries: Boundaries) -> list[float]:
    mean = mean_capacity(profile, unfrozen_set)
    out = []
    for s, e in boundaries:
        out.append(sum(virtual_value(float(profile.capacity[i - 1]), mean)
                       for i in unfrozen_set if s <= i <= e))
    return out


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5)


def adjust_allocation(vl: Sequence[float], m: int,
                      capacity: Sequence[int] | None = None) -> list[int]:
    """Integer CRC widths proportional to the virtual lengths, summing to `m`.

    The P - 1 shares closest to an integer are rounded first (ties to the
    lowest segment), the remaining segment absorbs the difference. If
    `capacity` is given, widths are then clamped into ``[0, capacity[k]]``;
    otherwise only negative widths are repaired.
    """
    P = len(vl)
    if P == 0:
        raise ValueError("need at least one segment")
    if m < 0 or any(v < 0 for v in vl):
        raise ValueError("virtual lengths and CRC budget must be nonnegative")
    if capacity is not None and m > sum(capacity):
        raise ValueError(f"CRC budget {m} exceeds the {sum(capacity)} unfrozen slots")
    if m == 0:
        return [0] * P
    total = float(sum(vl))
    if total <= 0.0:
        raise ValueError("virtual lengths sum to zero")
    raw = [m * v / total for v in vl]
    widths = [0] * P
    unmarked = list(range(P))
    for _ in range(P - 1):
        k = min(unmarked, key=lambda j: (abs(round_half_up(raw[j]) - raw[j]), j))
        widths[k] = round_half_up(raw[k])
        unmarked.remove(k)
    last = unmarked[0]
    widths[last] = m - sum(widths[j] for j in range(P) if j != last)
    cap = list(capacity) if capacity is not None else [m] * P
    return _clamp(widths, raw, cap)


def _clamp(widths: list[int], raw: list[float], cap: list[int]) -> list[int]:
    P = len(widths)
    w = list(widths)
    excess = 0
    for k in range(P):
        if w[k] > cap[k]:
            excess += w[k] - cap[k]
            w[k] = cap[k]
        elif w[k] < 0:
            excess += w[k]
            w[k] = 0
    while excess > 0:
        open_ = [k for k in range(P) if w[k] < cap[k]]
        k = max(open_, key=lambda j: (raw[j] - w[j], -j))
        w[k] += 1
        excess -= 1
    while excess < 0:
        open_ = [k for k in range(P) if w[k] > 0]
        k = min(open_, key=lambda j: (raw[j] - w[j], j))
        w[k] -= 1
        excess += 1
    return w


def build_segment_plan(spec: PolarCodeSpec, P: int, partition_mode: str = "code",
                       crc_mode: str = "tailored",
                       polys: Mapping[int, int] | Sequence[int] | None = None) -> SegmentPlan:
    """Segment the code and assign one CRC per segment.

    `polys` overrides the default polynomial table, either per width
    (mapping) or per segment (sequence).
    """
    if partition_mode == "code":
        bounds = partition_code_bits(spec.N, P)
    elif partition_mode == "info":
        bounds = partition_info_bits(spec, P)
    else:
        raise ValueError(f"unknown partition mode {partition_mode!r}")
    counts = count_unfrozen(spec.unfrozen_set, bounds)

    if spec.profile is not None and spec.unfrozen_set:
        vls = virtual_lengths(spec.profile, spec.unfrozen_set, bounds)
    else:
        vls = [float(c) for c in counts]

    if crc_mode == "tailored":
        widths = adjust_allocation(vls, spec.m, counts)
    elif crc_mode == "uniform":
        if spec.m % P:
            raise ValueError(f"uniform CRC allocation needs P = {P} to divide m = {spec.m}")
        widths = [spec.m // P] * P
        for w, c in zip(widths, counts):
            if w > c:
                raise ValueError(f"uniform CRC width {w} exceeds a segment's {c} unfrozen slots")
    else:
        raise ValueError(f"unknown crc mode {crc_mode!r}")

    specs = []
    for k, w in enumerate(widths):
        if polys is None:
            poly = None
        elif isinstance(polys, Mapping):
            poly = polys.get(w)
        else:
            poly = polys[k]
        specs.append(CrcSpec.named(w, poly))
    return SegmentPlan(P, bounds, counts, widths, specs, vls, partition_mode, crc_mode)


def single_crc_plan(spec: PolarCodeSpec, poly_hex: int | None = None) -> SegmentPlan:
    """One segment covering the whole word with a single terminal CRC (CA-SCL)."""
    polys = None if poly_hex is None else [poly_hex]
    return build_segment_plan(spec, 1, "code", "uniform", polys)
