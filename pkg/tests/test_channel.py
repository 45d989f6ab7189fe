"""Channel model, LLR, and information-density tests."""
from __future__ import annotations

import math

import numpy as np
import pytest

from vlfcc.channel import (
    ChannelSpec,
    bsc,
    biawgn,
    biawgn_db,
    capacity,
    capacity_awgn_real,
    channel_from_json,
    channel_to_json,
    info_density_bound,
    info_density_step,
    llr_of,
    transmit,
)


def test_spec_validation():
    with pytest.raises(ValueError):
        bsc(0.0)
    with pytest.raises(ValueError):
        bsc(0.5)
    with pytest.raises(ValueError):
        biawgn(0.0)
    assert bsc(0.05).kind == "bsc"
    assert biawgn_db(2.0).kind == "biawgn"
    assert biawgn_db(2.0).param == pytest.approx(10 ** 0.2)


def test_bsc_transmit_and_llr():
    spec = bsc(0.11)
    rng = np.random.default_rng(3)
    bits = rng.integers(0, 2, 5000, dtype=np.uint8)
    obs = transmit(bits, spec, rng)
    flips = (obs.y.astype(np.uint8) != bits).mean()
    assert abs(flips - 0.11) < 0.02
    mag = math.log((1 - 0.11) / 0.11)
    # LLR sign encodes the received bit, magnitude is constant
    np.testing.assert_allclose(np.abs(obs.llr), mag, rtol=1e-12)
    assert np.array_equal(obs.llr > 0, obs.y == 0)


def test_awgn_transmit_and_llr():
    spec = biawgn_db(2.0)
    eta = spec.param
    rng = np.random.default_rng(4)
    bits = np.zeros(20000, dtype=np.uint8)
    obs = transmit(bits, spec, rng)
    # bit 0 -> +1 with noise variance 1/eta
    assert abs(obs.y.mean() - 1.0) < 0.02
    assert abs(obs.y.var() - 1.0 / eta) < 0.02
    np.testing.assert_allclose(obs.llr, 2.0 * eta * obs.y, rtol=1e-12)
    np.testing.assert_allclose(llr_of(spec, obs.y), obs.llr, rtol=1e-12)


def test_transmit_deterministic_for_fixed_rng():
    spec = biawgn_db(2.0)
    bits = np.array([0, 1, 1, 0, 1], dtype=np.uint8)
    a = transmit(bits, spec, np.random.default_rng(9)).y
    b = transmit(bits, spec, np.random.default_rng(9)).y
    assert np.array_equal(a, b)


def test_bsc_capacity_closed_form():
    p = 0.05
    hb = -p * math.log2(p) - (1 - p) * math.log2(1 - p)
    assert capacity(bsc(p)) == pytest.approx(1.0 - hb, rel=1e-12)
    assert capacity(bsc(p)) == pytest.approx(0.71360, abs=5e-6)


def test_awgn_capacity_quadrature():
    # BI-AWGN capacity at 2 dB; quadrature should be stable to ~1e-9.
    c = capacity(biawgn_db(2.0))
    assert c == pytest.approx(0.642149, abs=2e-6)
    # and it is below the unconstrained real-input capacity
    eta = 10 ** 0.2
    assert c < capacity_awgn_real(eta)
    assert capacity_awgn_real(eta) == pytest.approx(0.5 * math.log2(1 + eta), rel=1e-12)


def test_info_density_bound_values():
    assert info_density_bound(bsc(0.05)) == pytest.approx(math.log2(2 * 0.95), rel=1e-12)
    assert info_density_bound(biawgn_db(2.0)) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("spec", [bsc(0.05), biawgn_db(2.0)])
def test_info_density_mean_is_capacity(spec):
    rng = np.random.default_rng(11)
    steps = info_density_step(spec, rng, size=200_000)
    assert steps.max() <= info_density_bound(spec) + 1e-12
    assert steps.mean() == pytest.approx(capacity(spec), abs=5e-3)


def test_channel_json_round_trip():
    for spec in (bsc(0.05), biawgn_db(2.0)):
        d = channel_to_json(spec)
        back = channel_from_json(d)
        assert back == spec
    with pytest.raises(ValueError):
        channel_from_json({"kind": "laplace", "param": 1.0})
