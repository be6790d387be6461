"""BPSK over AWGN and the Monte Carlo FER/BER harness.

SNR points are Eb/N0 in dB with rate ``R = K / N``; the CRC counts as
overhead. Frame ``f`` of every point draws its payload and noise from
``default_rng(seed ^ f)``, so all SNR points and decoder variants see the
same payloads and the same (scaled) noise realisations. Frames run in
fixed-size blocks and the stop rule is checked after each block in block
order, which keeps results identical for any worker count.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from statistics import NormalDist
from typing import Callable, Iterable, Sequence

import numpy as np

from .allocation import SegmentPlan
from .codec import assemble_frame, polar_encode
from .construction import PolarCodeSpec
from .decoder import Decoder, DecoderConfig, make_decoder
from .harq import harq_decode

CSV_HEADER = ("ebn0_db", "frames", "frame_errors", "fer", "ber", "avg_list_size", "avg_retx",
              "ci_low", "ci_high")
SNR_CONVENTION = "Eb/N0 in dB, R = K/N (CRC bits counted as overhead)"
_Z95 = NormalDist().inv_cdf(0.975)


def noise_sigma(ebn0_db: float, rate: float) -> float:
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"code rate must lie in (0, 1], got {rate}")
    return math.sqrt(1.0 / (2.0 * rate * 10.0 ** (ebn0_db / 10.0)))


@dataclass(frozen=True)
class ChannelPoint:
    ebn0_db: float
    rate: float
    seed: int = 0

    def __post_init__(self):
        if not math.isfinite(self.ebn0_db):
            raise ValueError("Eb/N0 must be finite")
        noise_sigma(self.ebn0_db, self.rate)

    @property
    def sigma(self) -> float:
        return noise_sigma(self.ebn0_db, self.rate)


def transmit(x_word, point: ChannelPoint | float, rng: np.random.Generator) -> np.ndarray:
    """BPSK map (0 -> +1), add N(0, sigma^2) noise, return LLRs ``2 y / sigma^2``.

    `point` may also be a bare noise standard deviation.
    """
    sigma = point.sigma if isinstance(point, ChannelPoint) else float(point)
    s = 1.0 - 2.0 * np.asarray(x_word, dtype=np.float64)
    y = s + rng.normal(0.0, sigma, s.shape)
    return 2.0 * y / (sigma * sigma)


def avg_list_size(records, L: int, P: int, mode: str = "segmented") -> float:
    """Average list size over frame records.

    Each record is ``(segments_decoded, retransmissions)`` or an object with
    those attributes. ``mode="segmented"`` gives ``L sum(P_i) / (P F)``;
    ``mode="harq"`` adds the retransmission counts to the numerator.
    """
    if mode not in ("segmented", "harq"):
        raise ValueError(f"unknown mode {mode!r}")
    total = 0
    F = 0
    for rec in records:
        if isinstance(rec, (tuple, list)):
            p_i, r_i = (rec[0], rec[1] if len(rec) > 1 else 0)
        elif isinstance(rec, (int, np.integer)):
            p_i, r_i = rec, 0
        else:
            p_i, r_i = rec.segments_decoded, getattr(rec, "retransmissions", 0)
        total += int(p_i) + (int(r_i) if mode == "harq" else 0)
        F += 1
    if F == 0:
        raise ValueError("need at least one frame record")
    return L * total / (P * F)


def wilson_interval(errors: int, trials: int, z: float = _Z95) -> tuple[float, float]:
    if trials <= 0:
        return 0.0, 1.0
    p = errors / trials
    denom = 1.0 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if errors == 0 else max(0.0, centre - half)
    hi = 1.0 if errors == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class StopRule:
    min_errors: int = 100
    max_frames: int = 10 ** 6
    block: int = 1000

    def __post_init__(self):
        if self.min_errors < 1 or self.max_frames < 1 or self.block < 1:
            raise ValueError("stop rule fields must be positive")

    def done(self, frames: int, errors: int) -> bool:
        return errors >= self.min_errors or frames >= self.max_frames


@dataclass
class Tally:
    frames: int = 0
    frame_errors: int = 0
    bit_errors: int = 0
    payload_bits: int = 0
    segments: int = 0
    retx: int = 0
    failures: int = 0

    def add(self, other: "Tally") -> None:
        for k, v in asdict(other).items():
            setattr(self, k, getattr(self, k) + v)


@dataclass
class SimPoint:
    ebn0_db: float
    frames: int
    frame_errors: int
    fer: float
    ber: float
    avg_list_size: float
    avg_retransmissions: float
    wilson_ci_low: float
    wilson_ci_high: float
    avg_list_size_no_retx: float = 0.0
    early_terminations: int = 0

    def csv_row(self) -> list[str]:
        return [f"{self.ebn0_db:g}", str(self.frames), str(self.frame_errors),
                f"{self.fer:.6e}", f"{self.ber:.6e}", f"{self.avg_list_size:.6f}",
                f"{self.avg_retransmissions:.6f}", f"{self.wilson_ci_low:.6e}",
                f"{self.wilson_ci_high:.6e}"]


@dataclass
class SimReport:
    points: list[SimPoint]
    config: dict = field(default_factory=dict)

    @property
    def snr(self) -> np.ndarray:
        return np.array([p.ebn0_db for p in self.points])

    @property
    def fer(self) -> np.ndarray:
        return np.array([p.fer for p in self.points])

    def point(self, ebn0_db: float) -> SimPoint:
        for p in self.points:
            if abs(p.ebn0_db - ebn0_db) < 1e-9:
                return p
        raise KeyError(f"no point at {ebn0_db} dB")

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        buf.write(f"# snr_convention: {SNR_CONVENTION}\n")
        buf.write(f"# config: {json.dumps(self.config, sort_keys=True)}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in self.points:
            w.writerow(p.csv_row())
        text = buf.getvalue()
        if path is not None:
            try:
                with open(path, "w", encoding="utf-8") as fh:
                    fh.write(text)
            except OSError as exc:
                raise OSError(f"cannot write report to {path}: {exc}") from exc
        return text


@dataclass(frozen=True)
class _Job:
    spec: PolarCodeSpec
    plan: SegmentPlan | None
    config: DecoderConfig
    T: int
    sigma: float
    seed: int


def _frame_word(dec: Decoder, spec, plan, rng):
    lay = dec.layout
    bits = rng.integers(0, 2, size=lay.payload_pos.size, dtype=np.uint8)
    if plan is not None and dec.plan is plan:
        u = assemble_frame(bits, spec, plan, lay)
    else:
        u = np.zeros(spec.N, dtype=np.uint8)
        u[lay.payload_pos] = bits
    return bits, polar_encode(u, spec)


def _run_block(job: _Job, start: int, stop: int) -> Tally:
    dec = make_decoder(job.spec, job.plan, job.config)
    t = Tally()
    sigma = job.sigma
    for f in range(start, stop):
        rng = np.random.default_rng(job.seed ^ f)
        bits, x = _frame_word(dec, job.spec, job.plan, rng)
        llrs = transmit(x, sigma, rng)
        if job.T > 1:
            res = harq_decode(llrs, job.spec, dec.plan, dec.L, job.T,
                              lambda: transmit(x, sigma, rng), decoder=dec)
            out, r = res.outcome, res.retransmissions
        else:
            out, r = dec.decode(llrs, keep_survivors=False), 0
        nerr = int(np.count_nonzero(out.payload != bits))
        t.frames += 1
        t.frame_errors += int(nerr > 0 or not out.success)
        t.failures += int(not out.success)
        t.bit_errors += nerr
        t.payload_bits += bits.size
        t.segments += out.segments_decoded
        t.retx += r
    return t


def _sweep_point(job: _Job, stop_rule: StopRule, pool, width: int) -> Tally:
    total = Tally()
    B = stop_rule.block
    nblocks = -(-stop_rule.max_frames // B)
    k = 0
    while k < nblocks and not stop_rule.done(total.frames, total.frame_errors):
        ranges = [(b * B, min((b + 1) * B, stop_rule.max_frames))
                  for b in range(k, min(k + width, nblocks))]
        if pool is None:
            results = (_run_block(job, a, b) for a, b in ranges)
        else:
            results = pool.map(_run_block, [job] * len(ranges), *zip(*ranges))
        for res in results:
            total.add(res)
            k += 1
            if stop_rule.done(total.frames, total.frame_errors):
                break
    return total


def run_fer_sweep(spec: PolarCodeSpec, plan: SegmentPlan | None, decoder_config: DecoderConfig,
                  snr_grid: Sequence[float], stop_rule: StopRule | None = None, seed: int = 0,
                  T: int = 1, workers: int = 1,
                  progress: Callable[[SimPoint], None] | None = None) -> SimReport:
    """Simulate every Eb/N0 point of `snr_grid`; ``T > 1`` enables HARQ."""
    grid = [float(s) for s in snr_grid]
    if not grid:
        raise ValueError("SNR grid is empty")
    if T < 1:
        raise ValueError(f"transmission budget T must be at least 1, got {T}")
    if workers < 1:
        raise ValueError(f"workers must be at least 1, got {workers}")
    stop_rule = stop_rule or StopRule()
    rate = spec.K / spec.N
    dec = make_decoder(spec, plan, decoder_config)
    L, P = dec.L, dec.P
    config = {
        "N": spec.N, "K": spec.K, "m": spec.m, "epsilon": spec.epsilon,
        "plan": plan.to_dict() if plan is not None else None,
        "variant": decoder_config.variant, "L": L, "quantized": decoder_config.quantized,
        "T": T, "seed": seed, "snr_grid": grid,
        "stop_rule": asdict(stop_rule),
    }
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    points = []
    try:
        for snr in grid:
            job = _Job(spec, plan, decoder_config, T, noise_sigma(snr, rate), seed)
            t = _sweep_point(job, stop_rule, pool, workers)
            lo, hi = wilson_interval(t.frame_errors, t.frames)
            pt = SimPoint(
                ebn0_db=snr, frames=t.frames, frame_errors=t.frame_errors,
                fer=t.frame_errors / t.frames,
                ber=t.bit_errors / t.payload_bits if t.payload_bits else 0.0,
                avg_list_size=L * (t.segments + t.retx) / (P * t.frames),
                avg_retransmissions=t.retx / t.frames,
                wilson_ci_low=lo, wilson_ci_high=hi,
                avg_list_size_no_retx=L * t.segments / (P * t.frames),
                early_terminations=t.failures,
            )
            points.append(pt)
            if progress is not None:
                progress(pt)
    finally:
        if pool is not None:
            pool.shutdown()
    return SimReport(points, config)


def _curve(report) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(report, SimReport):
        return report.snr, report.fer
    arr = np.asarray(report, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError("expected a SimReport or (snr, fer) pairs")
    return arr[:, 0], arr[:, 1]


def snr_at_fer(report, target_fer: float) -> float:
    """SNR where the curve first falls through `target_fer` (log-FER linear in dB)."""
    snr, fer = _curve(report)
    order = np.argsort(snr)
    snr, fer = snr[order], fer[order]
    lt = math.log10(target_fer)
    for k in range(len(snr) - 1):
        f0, f1 = fer[k], fer[k + 1]
        if f0 >= target_fer > f1 or (f0 == target_fer):
            if f0 == target_fer:
                return float(snr[k])
            if f1 <= 0.0:
                raise ValueError(f"FER hits zero at {snr[k + 1]} dB; cannot interpolate in log domain")
            a, b = math.log10(f0), math.log10(f1)
            return float(snr[k] + (lt - a) / (b - a) * (snr[k + 1] - snr[k]))
    if len(snr) and fer[-1] == target_fer:
        return float(snr[-1])
    raise ValueError(f"curve does not bracket FER = {target_fer}")


def dB_gain_at_fer(report_a, report_b, target_fer: float) -> float:
    """How much less SNR curve b needs than curve a to reach `target_fer`."""
    return snr_at_fer(report_a, target_fer) - snr_at_fer(report_b, target_fer)


def read_report_csv(path) -> tuple[list[dict], dict]:
    """Rows and config of a report written by :meth:`SimReport.to_csv`."""
    config = {}
    rows = []
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    body = []
    for line in lines:
        if line.startswith("# config: "):
            config = json.loads(line[len("# config: "):])
        elif not line.startswith("#"):
            body.append(line)
    for rec in csv.DictReader(body):
        rows.append({k: float(v) for k, v in rec.items()})
    return rows, config


def records_from(outcomes: Iterable) -> list[tuple[int, int]]:
    """(segments_decoded, retransmissions) pairs from decode or HARQ outcomes."""
    out = []
    for o in outcomes:
        inner = getattr(o, "outcome", o)
        out.append((inner.segments_decoded, getattr(o, "retransmissions", 0)))
    return out
