"""Segmented CRC-aided polar codes: construction, decoding, HARQ and cost models."""

from .allocation import SegmentPlan, build_segment_plan, single_crc_plan
from .codec import assemble_frame, extract_payload, polar_encode
from .construction import PolarCodeSpec, ReliabilityProfile, bec_polarize, select_unfrozen
from .crc import CrcSpec, crc_append, crc_remainder, crc_verify
from .decoder import (Decoder, DecodeOutcome, DecoderConfig, ca_scl_decode, sc_decode,
                      scl_decode, segmented_decode)
from .harq import harq_decode, mrc_combine

__version__ = "0.1.0"
