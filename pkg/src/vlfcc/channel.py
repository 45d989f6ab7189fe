"""Memoryless binary-input channels: BSC and BI-AWGN.

BI-AWGN convention: BPSK amplitude 1 (bit b -> x = 1 - 2b), noise variance
1/eta, so eta is the linear SNR.  LLRs are natural-log likelihood ratios
log P(y|x=0) - log P(y|x=1); information densities are in bits (base 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "ChannelSpec",
    "Observation",
    "bsc",
    "biawgn",
    "biawgn_db",
    "transmit",
    "llr_of",
    "capacity",
    "capacity_awgn_real",
    "info_density_bound",
    "info_density_step",
    "channel_to_json",
    "channel_from_json",
]

BSC = "bsc"
BIAWGN = "biawgn"

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class ChannelSpec:
    """Channel variant plus its single parameter (crossover p or linear SNR eta)."""

    kind: str
    param: float

    def __post_init__(self) -> None:
        if self.kind == BSC:
            if not (0.0 < self.param < 0.5):
                raise ValueError(f"BSC crossover must be in (0, 0.5), got {self.param}")
        elif self.kind == BIAWGN:
            if not self.param > 0.0:
                raise ValueError(f"BI-AWGN SNR must be positive, got {self.param}")
        else:
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @property
    def p(self) -> float:
        if self.kind != BSC:
            raise AttributeError("p is only defined for the BSC")
        return self.param

    @property
    def snr(self) -> float:
        if self.kind != BIAWGN:
            raise AttributeError("snr is only defined for the BI-AWGN channel")
        return self.param

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)

    def describe(self) -> str:
        if self.kind == BSC:
            return f"bsc(p={self.param:g})"
        return f"biawgn({self.snr_db:g} dB)"


def channel_to_json(spec: ChannelSpec) -> dict:
    return {"kind": spec.kind, "param": spec.param}


def channel_from_json(d: dict) -> ChannelSpec:
    return ChannelSpec(d["kind"], float(d["param"]))


def bsc(p: float) -> ChannelSpec:
    return ChannelSpec(BSC, float(p))


def biawgn(snr_linear: float) -> ChannelSpec:
    return ChannelSpec(BIAWGN, float(snr_linear))


def biawgn_db(snr_db: float) -> ChannelSpec:
    return ChannelSpec(BIAWGN, 10.0 ** (float(snr_db) / 10.0))


@dataclass(frozen=True)
class Observation:
    """Raw channel outputs and their LLRs, one entry per sent symbol."""

    y: np.ndarray
    llr: np.ndarray


def transmit(bits, spec: ChannelSpec, rng: np.random.Generator) -> Observation:
    """Send bits through the channel, returning outputs and LLRs."""
    b = np.asarray(bits, dtype=np.uint8)
    if spec.kind == BSC:
        flips = rng.random(b.size) < spec.param
        y = (b ^ flips).astype(np.int8)
        c = math.log((1.0 - spec.param) / spec.param)
        return Observation(y, (1.0 - 2.0 * y) * c)
    x = 1.0 - 2.0 * b.astype(np.float64)
    sigma = 1.0 / math.sqrt(spec.param)
    y = x + sigma * rng.standard_normal(b.size)
    return Observation(y, 2.0 * spec.param * y)


def llr_of(spec: ChannelSpec, y: np.ndarray) -> np.ndarray:
    """LLRs for raw outputs (hard bits for BSC, reals for BI-AWGN)."""
    if spec.kind == BSC:
        c = math.log((1.0 - spec.param) / spec.param)
        return (1.0 - 2.0 * np.asarray(y, dtype=np.float64)) * c
    return 2.0 * spec.param * np.asarray(y, dtype=np.float64)


def _binary_entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -(p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p))


_GH_NODES = 128


def capacity(spec: ChannelSpec) -> float:
    """Channel capacity in bits/use (equiprobable binary inputs).

    BSC: 1 - h_b(p) closed form.  BI-AWGN: C = 1 - E[log2(1 + e^{-2 eta Y X})]
    evaluated by Gauss-Hermite quadrature over the Gaussian noise.
    """
    if spec.kind == BSC:
        return 1.0 - _binary_entropy(spec.param)
    eta = spec.param
    nodes, weights = np.polynomial.hermite.hermgauss(_GH_NODES)
    # E_{Z~N(0,1)}[g(Z)] = (1/sqrt(pi)) * sum w_i g(sqrt(2) x_i); conditioned
    # on x=+1 (symmetric channel), y = 1 + Z/sqrt(eta).
    z = math.sqrt(2.0) * nodes
    expo = -2.0 * eta - 2.0 * math.sqrt(eta) * z
    g = np.logaddexp(0.0, expo) / _LN2
    return 1.0 - float(np.dot(weights, g)) / math.sqrt(math.pi)


def capacity_awgn_real(snr_linear: float) -> float:
    """Real-input AWGN capacity (1/2)log2(1+eta), used only as an overlay."""
    return 0.5 * math.log2(1.0 + snr_linear)


def info_density_bound(spec: ChannelSpec) -> float:
    """Supremum B of the per-symbol information density, in bits."""
    if spec.kind == BSC:
        return math.log2(2.0 * (1.0 - spec.param))
    return 1.0


def info_density_step(spec: ChannelSpec, rng: np.random.Generator, size: int = 1) -> np.ndarray:
    """i.i.d. samples of the per-symbol information density i(X;Y) in bits,
    with X equiprobable on the input alphabet."""
    if spec.kind == BSC:
        p = spec.param
        match = rng.random(size) >= p
        return np.where(match, math.log2(2.0 * (1.0 - p)), math.log2(2.0 * p))
    eta = spec.param
    x = 1.0 - 2.0 * rng.integers(0, 2, size=size).astype(np.float64)
    y = x + rng.standard_normal(size) / math.sqrt(eta)
    return 1.0 - np.logaddexp(0.0, -2.0 * eta * x * y) / _LN2
