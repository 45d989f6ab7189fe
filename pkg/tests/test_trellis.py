"""Trellis construction, encoding, and distance-spectrum checks."""
from __future__ import annotations

import numpy as np
import pytest

from vlfcc.trellis import (
    REFERENCE_CODES,
    TAIL_BITING,
    TERMINATED,
    GeneratorSet,
    build_trellis,
    distance_spectrum,
    encode,
)

TOY = GeneratorSet(nu=2, polys=(0o7, 0o5, 0o3))


def test_reference_code_table():
    table = {
        64: ((0o117, 0o127, 0o155), 6, 15, 3, 21),
        256: ((0o575, 0o623, 0o727), 8, 18, 1, 25),
        1024: ((0o2325, 0o2731, 0o3747), 10, 22, 7, 34),
    }
    assert set(REFERENCE_CODES) == set(table)
    for states, (polys, nu, d_free, a_dfree, depth) in table.items():
        info = REFERENCE_CODES[states]
        assert info.gens.polys == polys
        assert info.gens.nu == nu
        assert info.d_free == d_free
        assert info.a_dfree == a_dfree
        assert info.traceback_depth == depth


@pytest.mark.parametrize("states", [64, 256, 1024])
def test_distance_spectrum_matches_reference(states):
    info = REFERENCE_CODES[states]
    ds = distance_spectrum(info.gens)
    assert ds.converged
    assert ds.d_free == info.d_free
    assert ds.multiplicity == info.a_dfree


def test_generator_set_validation():
    with pytest.raises(ValueError):
        GeneratorSet(nu=0, polys=(1, 1, 1))
    with pytest.raises(ValueError):
        GeneratorSet(nu=2, polys=(0o17, 0o5, 0o3))  # degree exceeds nu
    with pytest.raises(ValueError):
        GeneratorSet(nu=2, polys=(0o2, 0o5, 0o3))  # lacks both end taps


def test_trellis_transitions_shift_register():
    tr = build_trellis(TOY)
    n_states = 1 << TOY.nu
    assert tr.next_state.shape == (n_states, 2)
    for s in range(n_states):
        for b in range(2):
            assert tr.next_state[s, b] == ((s << 1) | b) & (n_states - 1)


def test_encode_terminated_known_vector():
    # g = (7,5,3) octal: taps 111, 101, 011; register holds the last two inputs.
    msg = np.array([1, 0, 1, 1], dtype=np.uint8)
    cw = encode(TOY, msg, TERMINATED)
    assert cw.shape == (3 * (len(msg) + TOY.nu),)
    expect = []
    reg = 0
    for b in list(msg) + [0, 0]:
        reg = ((reg << 1) | b) & 0b111
        for poly in (0b111, 0b101, 0b011):
            expect.append(bin(reg & poly).count("1") & 1)
    assert cw.tolist() == expect


def test_encode_tail_biting_wraps_register():
    msg = np.array([1, 0, 0, 1, 1, 0, 1, 0], dtype=np.uint8)
    cw = encode(TOY, msg, TAIL_BITING)
    assert cw.shape == (3 * len(msg),)
    expect = []
    reg = (msg[-2] << 1) | msg[-1]  # preload with the last nu inputs
    for b in msg:
        reg = ((reg << 1) | int(b)) & 0b111
        for poly in (0b111, 0b101, 0b011):
            expect.append(bin(reg & poly).count("1") & 1)
    assert cw.tolist() == expect


def test_encode_tail_biting_requires_k_ge_nu():
    with pytest.raises(ValueError):
        encode(TOY, np.array([1], dtype=np.uint8), TAIL_BITING)


def test_encode_linear_over_gf2():
    rng = np.random.default_rng(5)
    a = rng.integers(0, 2, 10, dtype=np.uint8)
    b = rng.integers(0, 2, 10, dtype=np.uint8)
    for mode in (TERMINATED, TAIL_BITING):
        ca = encode(TOY, a, mode)
        cb = encode(TOY, b, mode)
        cab = encode(TOY, a ^ b, mode)
        assert np.array_equal(cab, ca ^ cb)


def test_out_pattern_packing():
    tr = build_trellis(TOY)
    # out_pattern[state, bit] packs (g1, g2, g3) outputs as a 3-bit index.
    for s in range(4):
        for b in range(2):
            reg = ((s << 1) | b) & 0b111
            bits = [bin(reg & poly).count("1") & 1 for poly in (0b111, 0b101, 0b011)]
            assert tr.out_pattern[s, b] == (bits[0] << 2) | (bits[1] << 1) | bits[2]
