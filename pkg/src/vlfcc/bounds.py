"""Random-coding achievability bounds via information-density hitting times.

The scheme-independent bound says a VLF code with M messages and error
target epsilon exists with average length E[tau], where tau is the first n
at which the accumulated information density reaches
gamma = log2((M-1)/epsilon).  For channels whose per-symbol information
density is bounded by B (BSC, BI-AWGN), Wald's equality gives the closed
form E[tau] <= (gamma + B)/C.  Repeat-after-N and m-transmission variants
restart the accumulator each block and, in the latter case, test the
threshold only at the decode grid; both reduce to renewal-ratio estimates
over single-block Monte-Carlo walks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, capacity, info_density_bound, info_density_step

__all__ = [
    "BoundPoint",
    "TailEstimate",
    "gamma_threshold",
    "wald_bound",
    "mc_tau_tail",
    "vlf_achievability",
    "repeat_after_n_bound",
    "m_transmission_bound",
]

DEFAULT_WALKS = 100_000
_CHUNK = 4096


@dataclass(frozen=True)
class BoundPoint:
    """One (average blocklength, rate) achievability point."""

    k: int
    ell: float
    rate: float
    gamma: float
    method: str
    stderr: float = 0.0
    n_walks: int = 0

    def __post_init__(self) -> None:
        if self.ell <= 0.0:
            raise ValueError("average blocklength bound must be positive")


@dataclass(frozen=True)
class TailEstimate:
    """First-passage statistics of the information-density walk.

    hit_counts[n] = walks whose first threshold crossing is at step n
    (index 0 unused); censored = walks with no crossing by the horizon.
    """

    gamma: float
    horizon: int
    n_walks: int
    hit_counts: np.ndarray
    censored: int

    def tails(self) -> np.ndarray:
        """P[tau > n] for n = 0..horizon."""
        later = np.cumsum(self.hit_counts[::-1])[::-1]  # hits at step > n-1
        out = np.empty(self.horizon + 1, dtype=np.float64)
        out[:-1] = (later[1:] + self.censored) / self.n_walks
        out[-1] = self.censored / self.n_walks
        return out

    def tail_stderrs(self) -> np.ndarray:
        t = self.tails()
        return np.sqrt(t * (1.0 - t) / self.n_walks)

    def expected_tau(self) -> tuple[float, float]:
        """Mean and standard error of min(tau, horizon)."""
        n = np.arange(self.horizon + 1, dtype=np.float64)
        w = self.hit_counts.astype(np.float64)
        total = self.n_walks
        s1 = float(np.dot(n, w)) + self.censored * self.horizon
        s2 = float(np.dot(n * n, w)) + self.censored * self.horizon**2
        mean = s1 / total
        var = max(s2 / total - mean * mean, 0.0)
        return mean, math.sqrt(var / total)


def gamma_threshold(k: int, epsilon: float) -> float:
    """gamma = log2((M-1)/epsilon) with M = 2^k message values."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if not (0.0 < epsilon <= 1.0):
        raise ValueError("epsilon must be in (0, 1]")
    # log2(2^k - 1) = k + log2(1 - 2^-k); the correction underflows to 0
    # beyond double precision, which is the correct rounding.
    return k + math.log2(1.0 - 2.0 ** (-k)) - math.log2(epsilon)


def wald_bound(spec: ChannelSpec, k: int, epsilon: float) -> BoundPoint:
    """Closed-form E[tau] <= (gamma + B)/C for bounded info density."""
    b = info_density_bound(spec)  # raises for unbounded channels
    c = capacity(spec)
    gamma = gamma_threshold(k, epsilon)
    ell = (gamma + b) / c
    return BoundPoint(k=k, ell=ell, rate=k / ell, gamma=gamma, method="wald")


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def _first_crossing_counts(
    spec: ChannelSpec,
    gamma: float,
    checkpoints: np.ndarray,
    n_walks: int,
    rng: np.random.Generator,
) -> tuple[np.ndarray, int]:
    """First checkpoint where the walk's running sum is >= gamma.

    Returns (counts per checkpoint, censored walks).  The threshold is
    tested at the listed times only; between checkpoints the sum may cross
    and fall back without stopping the walk.
    """
    horizon = int(checkpoints[-1])
    cols = checkpoints - 1  # cumsum column holding the sum after N_i steps
    counts = np.zeros(checkpoints.size, dtype=np.int64)
    censored = 0
    done = 0
    while done < n_walks:
        b = min(_CHUNK, n_walks - done)
        steps = info_density_step(spec, rng, (b, horizon))
        sums = np.cumsum(steps, axis=1)[:, cols]
        crossed = sums >= gamma
        hit_any = crossed.any(axis=1)
        first = np.argmax(crossed, axis=1)
        np.add.at(counts, first[hit_any], 1)
        censored += int(b - hit_any.sum())
        done += b
    return counts, censored


def mc_tau_tail(
    spec: ChannelSpec,
    gamma: float,
    horizon: int,
    *,
    n_walks: int = DEFAULT_WALKS,
    seed=0,
) -> TailEstimate:
    """Estimate P[tau > n] for n = 0..horizon by Monte-Carlo walks."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if n_walks < 2:
        raise ValueError("need at least 2 walks")
    hit = np.zeros(horizon + 1, dtype=np.int64)
    if gamma <= 0.0:
        # the empty sum already meets the threshold: tau = 0 surely
        return TailEstimate(gamma, horizon, n_walks, hit, 0)
    rng = _rng(seed)
    checkpoints = np.arange(1, horizon + 1, dtype=np.int64)
    counts, censored = _first_crossing_counts(spec, gamma, checkpoints, n_walks, rng)
    hit[1:] = counts
    est = TailEstimate(gamma, horizon, n_walks, hit, censored)
    if censored / n_walks > 0.5:
        raise ValueError(
            f"horizon {horizon} too small: P[tau > horizon] ~ {censored / n_walks:.2f}"
        )
    return est


def vlf_achievability(
    spec: ChannelSpec,
    k: int,
    epsilon: float,
    *,
    n_walks: int = DEFAULT_WALKS,
    seed=0,
    horizon: int | None = None,
) -> BoundPoint:
    """Monte-Carlo E[tau] for the unrestricted decode-every-symbol bound."""
    gamma = gamma_threshold(k, epsilon)
    if horizon is None:
        # first passage concentrates near the Wald value; 4x leaves a
        # negligible censored mass for these light-tailed walks
        horizon = max(4 * math.ceil(wald_bound(spec, k, epsilon).ell), 16)
    est = mc_tau_tail(spec, gamma, horizon, n_walks=n_walks, seed=seed)
    ell, se = est.expected_tau()
    return BoundPoint(k=k, ell=ell, rate=k / ell, gamma=gamma, method="vlf",
                      stderr=se, n_walks=n_walks)


def _ratio_bound(
    counts: np.ndarray,
    censored: int,
    n_walks: int,
    checkpoints: np.ndarray,
    k: int,
    gamma: float,
    method: str,
) -> BoundPoint:
    """ell = E[min(tau, N_m)]/(1 - P[tau > N_m]) with delta-method stderr."""
    hits = int(counts.sum())
    if hits == 0:
        raise ValueError("no walk met the threshold within the block: "
                         "the repeat bound requires P[tau <= N_m] > 0")
    nm = float(checkpoints[-1])
    vals = checkpoints.astype(np.float64)
    w = counts.astype(np.float64)
    s_c = float(np.dot(vals, w)) + censored * nm
    s_c2 = float(np.dot(vals * vals, w)) + censored * nm * nm
    c_bar = s_c / n_walks
    q_bar = censored / n_walks
    var_c = max(s_c2 / n_walks - c_bar * c_bar, 0.0)
    var_q = max(q_bar * (1.0 - q_bar), 0.0)
    # censored walks contribute c = N_m exactly, so E[cq] = N_m * q_bar
    cov_cq = nm * q_bar - c_bar * q_bar
    denom = 1.0 - q_bar
    ell = c_bar / denom
    g_c = 1.0 / denom
    g_q = c_bar / (denom * denom)
    var_ell = (g_c * g_c * var_c + 2.0 * g_c * g_q * cov_cq + g_q * g_q * var_q) / n_walks
    return BoundPoint(k=k, ell=ell, rate=k / ell, gamma=gamma, method=method,
                      stderr=math.sqrt(max(var_ell, 0.0)), n_walks=n_walks)


def repeat_after_n_bound(
    spec: ChannelSpec,
    k: int,
    epsilon: float,
    n_block: int,
    *,
    n_walks: int = DEFAULT_WALKS,
    seed=0,
) -> BoundPoint:
    """Repeat-after-N bound: threshold tested after every symbol of a block."""
    if n_block < 1:
        raise ValueError("N must be >= 1")
    gamma = gamma_threshold(k, epsilon)
    rng = _rng(seed)
    checkpoints = np.arange(1, n_block + 1, dtype=np.int64)
    counts, censored = _first_crossing_counts(spec, gamma, checkpoints, n_walks, rng)
    return _ratio_bound(counts, censored, n_walks, checkpoints, k, gamma, "repeat_after_n")


def m_transmission_bound(
    spec: ChannelSpec,
    k: int,
    epsilon: float,
    increments,
    *,
    n_walks: int = DEFAULT_WALKS,
    seed=0,
) -> BoundPoint:
    """m-transmission bound: threshold tested at the decode grid only."""
    inc = [int(i) for i in increments]
    if not inc or any(i < 1 for i in inc):
        raise ValueError("increments must be positive integers")
    gamma = gamma_threshold(k, epsilon)
    rng = _rng(seed)
    checkpoints = np.cumsum(np.asarray(inc, dtype=np.int64))
    counts, censored = _first_crossing_counts(spec, gamma, checkpoints, n_walks, rng)
    return _ratio_bound(counts, censored, n_walks, checkpoints, k, gamma, "m_transmission")
