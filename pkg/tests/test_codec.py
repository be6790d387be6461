import itertools

import numpy as np
import pytest

from segpolar.allocation import build_segment_plan
from segpolar.codec import assemble_frame, extract_payload, frame_layout, polar_encode
from segpolar.construction import PolarCodeSpec
from segpolar.crc import CrcSpec, crc_verify


def kron_generator(N, bit_reverse=True):
    """Independent G = B_N F^{(x)n}: rows of F^{(x)n} reordered by reversed row index."""
    F = np.array([[1, 0], [1, 1]], dtype=np.int64)
    G = np.array([[1]], dtype=np.int64)
    while G.shape[0] < N:
        G = np.kron(G, F)
    if bit_reverse:
        n = N.bit_length() - 1
        rev = [int(format(i, f"0{n}b")[::-1], 2) if n else 0 for i in range(N)]
        G = G[rev]
    return G


@pytest.mark.parametrize("N", [1, 2, 4, 8])
@pytest.mark.parametrize("brev", [True, False])
def test_encoder_exhaustive_small(N, brev):
    G = kron_generator(N, brev)
    words = np.array(list(itertools.product((0, 1), repeat=N)), dtype=np.uint8)
    got = polar_encode(words, use_bit_reversal=brev)
    assert np.array_equal(got, (words.astype(np.int64) @ G) % 2)


def test_encoder_random_large():
    G = kron_generator(1024)
    u = np.random.default_rng(3).integers(0, 2, (200, 1024)).astype(np.uint8)
    assert np.array_equal(polar_encode(u), (u.astype(np.int64) @ G) % 2)


def test_encoder_is_involution_without_reversal():
    u = np.random.default_rng(0).integers(0, 2, 64).astype(np.uint8)
    assert np.array_equal(polar_encode(polar_encode(u, use_bit_reversal=False),
                                       use_bit_reversal=False), u)


def test_encoder_rejects_bad_length():
    with pytest.raises(ValueError):
        polar_encode(np.zeros(6, dtype=np.uint8))


def test_assemble_places_segment_crcs():
    spec = PolarCodeSpec.from_bec(1024, 512, 32)
    plan = build_segment_plan(spec, 4)
    lay = frame_layout(spec, plan)
    payload = np.random.default_rng(5).integers(0, 2, 512).astype(np.uint8)
    u = assemble_frame(payload, spec, plan)
    assert not u[spec.frozen_mask].any()
    assert np.array_equal(extract_payload(u, spec, plan), payload)
    for k, (spec_k, w) in enumerate(zip(plan.crc_specs, plan.crc_widths)):
        seg_bits = u[lay.info_pos[lay.seg_ptr[k]:lay.seg_ptr[k + 1]]]
        assert seg_bits.size == plan.unfrozen_per_segment[k]
        assert crc_verify(seg_bits, spec_k)
        assert w == spec_k.width


def test_assemble_rejects_wrong_payload():
    spec = PolarCodeSpec.from_bec(64, 36, 8)
    plan = build_segment_plan(spec, 2)
    with pytest.raises(ValueError):
        assemble_frame(np.zeros(35, dtype=np.uint8), spec, plan)
