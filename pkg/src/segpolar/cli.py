"""Command-line interface.

Values resolve as: command-line flag, then the ``--config`` JSON file, then
the built-in default. Every file written embeds the resolved configuration.
"""

from __future__ import annotations

import argparse
import json
import secrets
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Sequence

import numpy as np

from .allocation import SegmentPlan, build_segment_plan
from .archmodel import ArchParams, report_csv, report_text
from .codec import assemble_frame, frame_layout, polar_encode
from .construction import PolarCodeSpec, bec_polarize, export_capacity_profile, is_power_of_two
from .crc import POLY_TABLE
from .decoder import VARIANTS, DecoderConfig, make_decoder
from .sim import StopRule, run_fer_sweep

HARD_LLR = 10.0


class ConfigError(ValueError):
    def __init__(self, name: str, message: str):
        super().__init__(f"invalid config field '{name}': {message}")
        self.field = name


@dataclass
class RunConfig:
    N: int = 1024
    K: int = 512
    m: int = 32
    epsilon: float = 0.5
    P: int = 4
    crc_mode: str = "tailored"
    partition_mode: str = "code"
    polynomials: dict[str, str] | None = None
    variant: str = "TCA-SCL"
    L: int = 8
    quantized: bool = False
    snr: list[float] = field(default_factory=lambda: [1.0, 1.5, 2.0, 2.5])
    min_errors: int = 100
    max_frames: int = 10 ** 6
    seed: int | None = None
    T: int = 1
    workers: int = 1
    code: str | None = None
    out: str | None = None

    def validate(self) -> None:
        if not isinstance(self.N, int) or self.N < 2 or not is_power_of_two(self.N):
            raise ConfigError("N", f"{self.N!r} is not a power of two >= 2")
        if not isinstance(self.K, int) or self.K < 1:
            raise ConfigError("K", f"{self.K!r} must be a positive integer")
        if not isinstance(self.m, int) or self.m < 0:
            raise ConfigError("m", f"{self.m!r} must be a nonnegative integer")
        if self.K + self.m > self.N:
            raise ConfigError("m", f"K + m = {self.K + self.m} exceeds N = {self.N}")
        if not isinstance(self.epsilon, (int, float)) or not 0.0 <= self.epsilon <= 1.0:
            raise ConfigError("epsilon", f"{self.epsilon!r} is outside [0, 1]")
        if not isinstance(self.P, int) or self.P < 1 or not is_power_of_two(self.P) \
                or self.N % self.P:
            raise ConfigError("P", f"{self.P!r} must be a power of two dividing N")
        if self.crc_mode not in ("tailored", "uniform"):
            raise ConfigError("crc_mode", f"{self.crc_mode!r} is not 'tailored' or 'uniform'")
        if self.partition_mode not in ("code", "info"):
            raise ConfigError("partition_mode", f"{self.partition_mode!r} is not 'code' or 'info'")
        if self.variant not in VARIANTS:
            raise ConfigError("variant", f"{self.variant!r} is not one of {', '.join(VARIANTS)}")
        if not isinstance(self.L, int) or self.L < 1:
            raise ConfigError("L", f"{self.L!r} must be a positive integer")
        if self.variant == "CA-SCL" and self.P != 1:
            raise ConfigError("P", "CA-SCL uses a single segment; set P = 1")
        if not self.snr:
            raise ConfigError("snr", "SNR grid is empty")
        if self.min_errors < 1:
            raise ConfigError("min_errors", "must be positive")
        if self.max_frames < 1:
            raise ConfigError("max_frames", "must be positive")
        if not isinstance(self.T, int) or self.T < 1:
            raise ConfigError("T", f"{self.T!r} must be a positive integer")
        if not isinstance(self.workers, int) or self.workers < 1:
            raise ConfigError("workers", f"{self.workers!r} must be a positive integer")
        if self.seed is not None and (not isinstance(self.seed, int) or self.seed < 0):
            raise ConfigError("seed", f"{self.seed!r} must be a nonnegative integer")
        if self.polynomials is not None:
            for w, poly in self.polynomials.items():
                try:
                    int(w), int(poly, 16) if isinstance(poly, str) else int(poly)
                except (TypeError, ValueError):
                    raise ConfigError("polynomials", f"bad entry {w!r}: {poly!r}") from None


_FIELD_NAMES = {f.name for f in fields(RunConfig)}


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError("config", f"{path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError("config", "top level must be an object")
    unknown = sorted(set(data) - _FIELD_NAMES)
    if unknown:
        raise ConfigError(unknown[0], "unknown field")
    return data


def resolve(args: argparse.Namespace) -> RunConfig:
    values = load_config(getattr(args, "config", None))
    for name in _FIELD_NAMES:
        v = getattr(args, name, None)
        if v is not None:
            values[name] = v
    cfg = RunConfig(**values)
    cfg.validate()
    return cfg


def _polys(cfg: RunConfig):
    if not cfg.polynomials:
        return None
    return {int(w): (int(p, 16) if isinstance(p, str) else int(p))
            for w, p in cfg.polynomials.items()}


def build_code(cfg: RunConfig) -> tuple[PolarCodeSpec, SegmentPlan]:
    if cfg.code:
        return load_code(cfg.code)
    spec = PolarCodeSpec.from_bec(cfg.N, cfg.K, cfg.m, cfg.epsilon)
    mode = cfg.crc_mode
    if cfg.P == 1:
        mode = "uniform"
    try:
        plan = build_segment_plan(spec, cfg.P, cfg.partition_mode, mode, _polys(cfg))
    except ValueError as exc:
        raise ConfigError("P", str(exc)) from exc
    return spec, plan


def code_document(spec: PolarCodeSpec, plan: SegmentPlan, cfg: RunConfig | None = None) -> dict:
    doc = {"code": spec.to_dict(), "plan": plan.to_dict()}
    if cfg is not None:
        doc["config"] = asdict(cfg)
    return doc


def load_code(path: str) -> tuple[PolarCodeSpec, SegmentPlan]:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
        spec = PolarCodeSpec.from_dict(doc["code"])
        plan = SegmentPlan.from_dict(doc["plan"], spec)
    except OSError as exc:
        raise ConfigError("code", f"cannot read {path}: {exc}") from exc
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError("code", f"{path} is not a valid code document: {exc}") from exc
    return spec, plan


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ConfigError("out", f"cannot write {out}: {exc}") from exc


def _config_line(payload: dict) -> str:
    return f"# config: {json.dumps(payload, sort_keys=True)}\n"


def read_bits(path: str) -> np.ndarray:
    text = _read_text(path)
    chars = "".join(c for line in text.splitlines() if not line.startswith("#")
                    for c in line if not c.isspace())
    if not chars:
        raise ConfigError("input", f"{path} holds no bits")
    if set(chars) - {"0", "1"}:
        raise ConfigError("input", f"{path} may only contain 0 and 1")
    return np.frombuffer(chars.encode(), dtype=np.uint8) - ord("0")


def read_llrs(path: str, fmt: str = "auto") -> np.ndarray:
    """Channel values from a text file.

    ``llr``: whitespace-separated floats. ``bits``: a 0/1 string of hard
    decisions, mapped to LLRs of magnitude ``HARD_LLR``. ``auto`` picks
    ``bits`` when the file is a packed 0/1 string, as written by ``encode``.
    """
    text = _read_text(path)
    tokens = " ".join(line for line in text.splitlines() if not line.startswith("#")).split()
    if not tokens:
        raise ConfigError("input", f"{path} holds no values")
    if fmt == "auto":
        packed = all(set(t) <= {"0", "1"} for t in tokens) and any(len(t) > 1 for t in tokens)
        fmt = "bits" if packed else "llr"
    if fmt == "bits":
        bits = read_bits(path).astype(np.float64)
        return HARD_LLR * (1.0 - 2.0 * bits)
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ConfigError("input", f"{path}: {exc}") from exc


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError("input", f"cannot read {path}: {exc}") from exc


# -- subcommands -------------------------------------------------------------------------

def cmd_construct(args) -> int:
    cfg = resolve(args)
    spec, plan = build_code(cfg)
    print(f"code: N={spec.N} K={spec.K} m={spec.m} epsilon={spec.epsilon}")
    print("segments: " + " ".join(f"[{s},{e}]" for s, e in plan.boundaries))
    print("unfrozen per segment: " + ",".join(str(c) for c in plan.unfrozen_per_segment))
    if plan.virtual_lengths:
        total = sum(plan.virtual_lengths)
        norm = [v * spec.m / total for v in plan.virtual_lengths] if total else []
        print("virtual lengths: " + ",".join(f"{v:.4f}" for v in plan.virtual_lengths))
        print("normalized to m: " + ",".join(f"{v:.2f}" for v in norm))
    print("crc widths: " + ",".join(str(w) for w in plan.crc_widths))
    if cfg.out:
        _emit(json.dumps(code_document(spec, plan, cfg), indent=2) + "\n", cfg.out)
        print(f"wrote {cfg.out}")
    return 0


def cmd_simulate(args) -> int:
    cfg = resolve(args)
    if cfg.seed is None:
        cfg.seed = secrets.randbits(63)
        print(f"seed: {cfg.seed}", file=sys.stderr)
    spec, plan = build_code(cfg)
    dcfg = DecoderConfig(cfg.L, cfg.variant, cfg.quantized)
    rule = StopRule(cfg.min_errors, cfg.max_frames, min(1000, cfg.max_frames))

    def show(pt):
        print(f"{pt.ebn0_db:6.2f} dB  frames={pt.frames:8d}  errors={pt.frame_errors:6d}  "
              f"FER={pt.fer:.3e}  L_avg={pt.avg_list_size:.3f}", file=sys.stderr)

    report = run_fer_sweep(spec, plan, dcfg, cfg.snr, rule, cfg.seed, cfg.T, cfg.workers, show)
    report.config["run"] = asdict(cfg)
    _emit(report.to_csv(), cfg.out)
    return 0


def cmd_arch_report(args) -> int:
    try:
        params = ArchParams(N=args.n, K=args.k, m=args.crc, L=args.list_size, P=args.segments,
                            q=args.q, T_CA=args.t_ca, crc_latencies=tuple(args.crc_latency or ()),
                            F=args.fold_overhead)
    except ValueError as exc:
        raise ConfigError("arch", str(exc)) from exc
    if args.format == "csv":
        text = report_csv(params)
    elif args.format == "text":
        text = report_text(params)
    else:
        text = report_text(params) + "\n" + report_csv(params)
    _emit(text, args.out)
    return 0


def cmd_encode(args) -> int:
    cfg = resolve(args)
    spec, plan = build_code(cfg)
    payload = read_bits(args.input)
    if payload.size != spec.K:
        raise ConfigError("input", f"payload has {payload.size} bits, code expects K = {spec.K}")
    x = polar_encode(assemble_frame(payload, spec, plan), spec)
    text = _config_line(code_document(spec, plan)) + "".join(map(str, x.tolist())) + "\n"
    _emit(text, cfg.out)
    return 0


def cmd_decode(args) -> int:
    cfg = resolve(args)
    spec, plan = build_code(cfg)
    llrs = read_llrs(args.input, args.input_format)
    if llrs.size != spec.N:
        raise ConfigError("input", f"got {llrs.size} channel values, code length is N = {spec.N}")
    dec = make_decoder(spec, plan, DecoderConfig(cfg.L, cfg.variant, cfg.quantized))
    out = dec.decode(llrs, keep_survivors=False)
    payload = out.u_estimate[frame_layout(spec, plan).payload_pos]
    status = "ok" if out.success else f"crc failure in segment {out.segments_completed + 1}"
    print(f"decode: {status}", file=sys.stderr)
    text = (_config_line({**code_document(spec, plan), "variant": cfg.variant, "L": cfg.L,
                          "success": out.success})
            + "".join(map(str, payload.tolist())) + "\n")
    _emit(text, cfg.out)
    return 0 if out.success else 1


def cmd_export_profile(args) -> int:
    cfg = resolve(args)
    if cfg.out is None:
        raise ConfigError("out", "export-profile needs --out")
    spec, _ = build_code(cfg)
    profile = spec.profile or bec_polarize(cfg.epsilon, cfg.N)
    export_capacity_profile(profile, spec.unfrozen_set, cfg.out)
    print(f"wrote {cfg.out}")
    return 0


# -- parser ------------------------------------------------------------------------------

def _snr_list(text: str) -> list[float]:
    """Comma list ``1,1.5,2`` or range ``start:stop:step`` (stop inclusive)."""
    try:
        if ":" in text:
            a, b, s = (float(v) for v in text.split(":"))
            if s <= 0:
                raise ValueError("step must be positive")
            count = int(round((b - a) / s)) + 1
            return [round(a + k * s, 10) for k in range(count)]
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad SNR list {text!r}: {exc}") from None


def _poly_map(text: str) -> dict[str, str]:
    out = {}
    for item in text.split(","):
        try:
            w, p = item.split("=")
            int(w), int(p, 16)
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad polynomial entry {item!r}; use WIDTH=0xHEX")
        out[w.strip()] = p.strip()
    return out


def _code_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("code")
    g.add_argument("--config", help="JSON run configuration")
    g.add_argument("--code", help="code document written by 'construct'")
    g.add_argument("--n", dest="N", type=int)
    g.add_argument("--k", dest="K", type=int)
    g.add_argument("--crc", dest="m", type=int, help="total CRC bits")
    g.add_argument("--epsilon", type=float, help="BEC erasure probability for construction")
    g.add_argument("--segments", dest="P", type=int)
    g.add_argument("--crc-mode", dest="crc_mode", choices=("tailored", "uniform"))
    g.add_argument("--partition", dest="partition_mode", choices=("code", "info"))
    g.add_argument("--polys", dest="polynomials", type=_poly_map,
                   help=f"WIDTH=0xHEX overrides, defaults: "
                        + ",".join(f"{w}=0x{p:X}" for w, p in POLY_TABLE.items()))
    g.add_argument("--out", help="output path (stdout if omitted)")


def _decoder_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("decoder")
    g.add_argument("--variant", choices=VARIANTS)
    g.add_argument("--list-size", "-L", dest="L", type=int)
    g.add_argument("--quantized", action="store_const", const=True, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="segpolar",
                                 description="Segmented CRC-aided polar code toolkit")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("construct", help="build a code and its CRC allocation")
    _code_args(p)
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("simulate", help="Monte Carlo FER/BER sweep")
    _code_args(p)
    _decoder_args(p)
    p.add_argument("--snr", type=_snr_list, help="Eb/N0 points: '1,1.5,2' or '1:3:0.25'")
    p.add_argument("--min-errors", dest="min_errors", type=int)
    p.add_argument("--max-frames", dest="max_frames", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--harq-t", dest="T", type=int, help="transmission budget per frame")
    p.add_argument("--workers", type=int)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("arch-report", help="hardware cost table")
    p.add_argument("--n", type=int, default=1024)
    p.add_argument("--k", type=int, default=512)
    p.add_argument("--crc", type=int, default=32)
    p.add_argument("--list-size", "-L", dest="list_size", type=int, default=2)
    p.add_argument("--segments", type=int, default=4)
    p.add_argument("--q", type=int, default=8, help="LLR bits")
    p.add_argument("--t-ca", dest="t_ca", type=int, default=2655,
                   help="CA-SCL latency in cycles")
    p.add_argument("--crc-latency", dest="crc_latency", type=int, nargs="*",
                   help="inner segment CRC latencies T_1..T_{P-1} (default 1 each)")
    p.add_argument("--fold-overhead", dest="fold_overhead", type=int, default=0)
    p.add_argument("--format", choices=("text", "csv", "both"), default="both")
    p.add_argument("--out")
    p.set_defaults(func=cmd_arch_report)

    p = sub.add_parser("encode", help="payload bits -> codeword bits")
    _code_args(p)
    p.add_argument("--input", required=True, help="text file of K payload bits")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="channel LLRs or hard bits -> payload bits")
    _code_args(p)
    _decoder_args(p)
    p.add_argument("--input", required=True, help="N LLRs, or N hard bits as a 0/1 string")
    p.add_argument("--input-format", dest="input_format", choices=("auto", "llr", "bits"),
                   default="auto")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("export-profile", help="write the channel capacity profile as CSV")
    _code_args(p)
    p.set_defaults(func=cmd_export_profile)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
