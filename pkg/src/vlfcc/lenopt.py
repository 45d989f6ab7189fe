"""Transmission-length selection for m-transmission schemes.

Pipeline: (1) estimate the retransmission probability of the fixed-length
scheme at a coarse grid of blocklengths by Monte-Carlo, (2) interpolate with
a low-degree polynomial in the log domain, clamped to [0, 1] and corrected
to be non-increasing, (3) minimize the expected-latency objective over
integer increment vectors by coordinate descent with two-coordinate
diagonal steps and random restarts.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelSpec, channel_from_json, channel_to_json
from .trellis import TAIL_BITING, GeneratorSet
from .vlfsim import DECLARE_ERROR, CampaignConfig, StoppingPolicy, _run_chunk, _Sums, _TrialEngine

__all__ = [
    "GridSample",
    "RetransmissionModel",
    "LengthVector",
    "InfeasibleLengths",
    "estimate_retrans_grid",
    "fit_logpoly",
    "objective_latency",
    "optimize_lengths",
    "save_model",
    "load_model",
]

GRID_POINTS = 9
DEFAULT_MIN_TRIGGERS = 100
_CHUNK = 512


class InfeasibleLengths(ValueError):
    """No increment vector satisfies the requested constraints."""


@dataclass(frozen=True)
class LengthVector:
    """Positive integer increments I_1..I_m with their cumulative grid."""

    increments: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.increments:
            raise ValueError("need at least one increment")
        if any(int(i) != i or i < 1 for i in self.increments):
            raise ValueError("increments must be positive integers")

    @property
    def m(self) -> int:
        return len(self.increments)

    @property
    def cumulative(self) -> tuple[int, ...]:
        out, t = [], 0
        for i in self.increments:
            t += i
            out.append(t)
        return tuple(out)

    @property
    def total(self) -> int:
        return sum(self.increments)


@dataclass(frozen=True)
class GridSample:
    """Retransmission probability measured at one fixed blocklength."""

    n_sim: int
    p_hat: float
    stderr: float
    triggers: int
    trials: int


@dataclass(frozen=True)
class RetransmissionModel:
    """Fitted retransmission curve P(N) for N = 1..n_max."""

    k: int
    n_max: int
    samples: tuple[GridSample, ...]
    curve: np.ndarray  # P(N) at index N-1; in [0, 1], non-increasing
    degree: int
    coeffs: tuple[float, ...]  # log-domain polynomial, ascending powers
    residuals: tuple[float, ...]  # log-domain, one per positive sample
    outliers: tuple[int, ...]  # indices into samples with large residuals
    degenerate: bool = False  # all samples were zero

    def __post_init__(self) -> None:
        c = np.asarray(self.curve, dtype=np.float64)
        if c.shape != (self.n_max,):
            raise ValueError("curve must have one value per N in 1..n_max")
        if np.any(c < 0.0) or np.any(c > 1.0):
            raise ValueError("curve values must lie in [0, 1]")
        if np.any(np.diff(c) > 1e-12):
            raise ValueError("curve must be non-increasing")
        c.setflags(write=False)
        object.__setattr__(self, "curve", c)

    def p_retrans(self, n: int) -> float:
        """Modeled probability that N = n symbols still trigger retransmission."""
        if not (1 <= n <= self.n_max):
            raise ValueError(f"N = {n} outside the modeled range 1..{self.n_max}")
        return float(self.curve[n - 1])


def _grid_lengths(k: int) -> np.ndarray:
    """Nine blocklengths from k to 3k in (rounded) k/4 steps."""
    return np.unique(np.round(np.linspace(k, 3 * k, GRID_POINTS)).astype(np.int64))


def estimate_retrans_grid(
    gens: GeneratorSet,
    spec: ChannelSpec,
    epsilon: float,
    k: int,
    *,
    mode: str = TAIL_BITING,
    schedule_seed: int = 12345,
    min_triggers: int = DEFAULT_MIN_TRIGGERS,
    max_trials_per_point: int = 500_000,
    seed: int = 0,
) -> list[GridSample]:
    """Measure fixed-length NACK rates on the standard blocklength grid.

    Each grid point simulates single-shot transmission at that blocklength
    (one decode per trial) until min_triggers retransmission-triggering
    words accumulate, so the relative error is comparable across points.
    """
    samples = []
    for n_sim in _grid_lengths(k):
        config = CampaignConfig(
            gens=gens,
            mode=mode,
            k=k,
            channel=spec,
            policy=StoppingPolicy.reliability(epsilon, on_final_nack=DECLARE_ERROR),
            decode_points=(int(n_sim),),
            schedule_seed=schedule_seed,
        )
        engine = _TrialEngine(config)
        sums = _Sums(stops_at=np.zeros(1, dtype=np.int64))
        while sums.declared < min_triggers and sums.n < max_trials_per_point:
            count = min(_CHUNK, max_trials_per_point - sums.n)
            sums.add_chunk(_run_chunk(engine, (seed, int(n_sim)), sums.n, count))
        p = sums.declared / sums.n
        samples.append(
            GridSample(
                n_sim=int(n_sim),
                p_hat=p,
                stderr=math.sqrt(max(p * (1.0 - p), 0.0) / sums.n),
                triggers=sums.declared,
                trials=sums.n,
            )
        )
    return samples


def fit_logpoly(
    samples,
    k: int,
    *,
    degree: int = 3,
    n_max: int | None = None,
    outlier_sigma: float = 3.0,
) -> RetransmissionModel:
    """Least-squares polynomial fit of log P over the sampled blocklengths.

    The fitted curve is evaluated for every N in 1..n_max, clamped to
    [0, 1], pinned to 1 below N = k (fewer symbols than message bits can
    never satisfy the stopping rule), and made non-increasing by a running
    minimum so the optimizer cannot exploit interpolation wiggles.
    """
    samples = tuple(samples)
    if n_max is None:
        n_max = 3 * k
    pos = [s for s in samples if s.p_hat > 0.0]
    if not pos:
        curve = np.zeros(n_max)
        curve[: min(k - 1, n_max)] = 1.0
        curve = np.minimum.accumulate(curve)
        return RetransmissionModel(k, n_max, samples, curve, degree, (), (), (),
                                   degenerate=True)
    if len(pos) < degree + 1:
        raise ValueError(
            f"need at least {degree + 1} grid points with positive estimates, got {len(pos)}"
        )
    pos_idx = [i for i, s in enumerate(samples) if s.p_hat > 0.0]
    xs = np.array([samples[i].n_sim for i in pos_idx], dtype=np.float64)
    ys = np.log([samples[i].p_hat for i in pos_idx])
    poly = np.polynomial.Polynomial.fit(xs, ys, degree)
    resid = ys - poly(xs)
    rms = float(np.sqrt(np.mean(resid**2)))
    outliers = tuple(
        pos_idx[j] for j in range(len(pos_idx))
        if abs(resid[j]) > outlier_sigma * max(rms, 1e-12)
    )
    grid_n = np.arange(1, n_max + 1, dtype=np.float64)
    curve = np.exp(poly(grid_n))
    curve = np.clip(curve, 0.0, 1.0)
    curve[: min(k - 1, n_max)] = 1.0
    curve = np.minimum.accumulate(curve)
    coeffs = tuple(float(c) for c in poly.convert().coef)
    return RetransmissionModel(
        k, n_max, samples, curve, degree, coeffs,
        tuple(float(r) for r in resid), outliers,
    )


def objective_latency(model: RetransmissionModel, lv: LengthVector) -> float:
    """Expected latency of the m-transmission scheme under the fitted model.

    lambda = (I_1 + sum_{i=1}^{m-1} I_{i+1} P(N_i)) / (1 - P(N_m)): the
    (i+1)-th increment is sent exactly when the decode at N_i failed, and
    the denominator accounts for whole-block repeats.
    """
    cum = lv.cumulative
    p_final = model.p_retrans(cum[-1])
    if p_final >= 1.0:
        raise ValueError(f"P(N_m={cum[-1]}) = 1: expected latency diverges")
    numer = float(lv.increments[0])
    for i in range(1, lv.m):
        numer += lv.increments[i] * model.p_retrans(cum[i - 1])
    return numer / (1.0 - p_final)


def _heuristic_start(k: int, m: int) -> tuple[int, ...] | None:
    """First-transmission-heavy starting point used for m = 5 searches."""
    if m != 5:
        return None
    inc = (round(1.5 * k), round(k / 4), round(k / 4), round(k / 4), round(0.75 * k))
    return tuple(max(1, int(i)) for i in inc)


def _random_start(rng: np.random.Generator, m: int, cap: int) -> tuple[int, ...]:
    hi = max(cap // m, 1)
    return tuple(int(v) for v in rng.integers(1, hi + 1, size=m))


def optimize_lengths(
    model: RetransmissionModel,
    m: int,
    *,
    restarts: int = 100,
    seed: int = 0,
    cap: int | None = None,
    require_final_below: float | None = None,
) -> tuple[LengthVector, float]:
    """Coordinate descent + pairwise diagonal steps from random restarts.

    Returns the best (lengths, latency) found.  cap bounds N_m (default:
    the model's range).  require_final_below additionally demands
    P(N_m) < that value, reported as infeasible when no N_m <= cap
    satisfies it.  Ties across restarts resolve to the lexicographically
    smallest increment vector.
    """
    if m < 1:
        raise ValueError("m must be >= 1")
    if restarts < 1:
        raise ValueError("restarts must be >= 1")
    cap = model.n_max if cap is None else int(cap)
    if not (m <= cap <= model.n_max):
        raise ValueError(f"cap must lie in [{m}, {model.n_max}]")

    # the final decode must land where the model gives P < 1, or the
    # expected latency diverges; the curve is non-increasing so this is a
    # simple lower bound on N_m
    live = np.nonzero(model.curve[:cap] < 1.0)[0]
    if live.size == 0:
        raise InfeasibleLengths(
            f"the model predicts certain retransmission at every N <= {cap}"
        )
    min_total = max(m, int(live[0]) + 1)
    if require_final_below is not None:
        feas = np.nonzero(model.curve[:cap] < require_final_below)[0]
        if feas.size == 0:
            raise InfeasibleLengths(
                f"P(N) >= {require_final_below:g} for every N <= {cap}: "
                "no final blocklength meets the target"
            )
        min_total = max(min_total, int(feas[0]) + 1)
    if min_total > cap:
        raise InfeasibleLengths(f"no feasible N_m in [{min_total}, {cap}]")

    def feasible(inc: tuple[int, ...]) -> bool:
        if any(i < 1 for i in inc):
            return False
        total = sum(inc)
        return min_total <= total <= cap

    cache: dict[tuple[int, ...], float] = {}

    def objective(inc: tuple[int, ...]) -> float:
        val = cache.get(inc)
        if val is None:
            val = objective_latency(model, LengthVector(inc))
            cache[inc] = val
        return val

    def force_feasible(inc: tuple[int, ...]) -> tuple[int, ...]:
        inc = list(inc)
        short = min_total - sum(inc)
        if short > 0:
            inc[-1] += short
        over = sum(inc) - cap
        if over > 0:
            for i in range(m - 1, -1, -1):
                take = min(over, inc[i] - 1)
                inc[i] -= take
                over -= take
            if over > 0:
                raise InfeasibleLengths(f"cap {cap} cannot hold {m} positive increments")
        return tuple(inc)

    def descend(start: tuple[int, ...]) -> tuple[float, tuple[int, ...]]:
        cur = start
        val = objective(cur)
        while True:
            # single-coordinate +-1 passes to a fixed point
            improved = True
            while improved:
                improved = False
                for i in range(m):
                    for d in (1, -1):
                        cand = list(cur)
                        cand[i] += d
                        cand = tuple(cand)
                        if feasible(cand) and objective(cand) < val:
                            cur, val = cand, objective(cand)
                            improved = True
            # best two-coordinate diagonal step, then loop if it helped
            best_cand, best_val = None, val
            for i in range(m):
                for j in range(i + 1, m):
                    for di in (1, -1):
                        for dj in (1, -1):
                            cand = list(cur)
                            cand[i] += di
                            cand[j] += dj
                            cand = tuple(cand)
                            if feasible(cand):
                                v = objective(cand)
                                if v < best_val:
                                    best_cand, best_val = cand, v
            if best_cand is None:
                return val, cur
            cur, val = best_cand, best_val

    results = []
    heur = _heuristic_start(model.k, m)
    for r in range(restarts):
        rng = np.random.Generator(np.random.Philox(np.random.SeedSequence((seed, r))))
        if r == 0 and heur is not None:
            try:
                start = force_feasible(heur)
            except InfeasibleLengths:
                start = force_feasible(_random_start(rng, m, cap))
        else:
            start = force_feasible(_random_start(rng, m, cap))
        results.append(descend(start))
    best_val, best_inc = min(results, key=lambda t: (t[0], t[1]))
    return LengthVector(best_inc), best_val


def model_to_jsonable(model: RetransmissionModel, fingerprint: dict | None = None) -> dict:
    return {
        "fingerprint": fingerprint,
        "k": model.k,
        "n_max": model.n_max,
        "samples": [vars(s) for s in model.samples],
        "curve": model.curve.tolist(),
        "degree": model.degree,
        "coeffs": list(model.coeffs),
        "residuals": list(model.residuals),
        "outliers": list(model.outliers),
        "degenerate": model.degenerate,
    }


def model_from_jsonable(d: dict) -> RetransmissionModel:
    return RetransmissionModel(
        k=d["k"],
        n_max=d["n_max"],
        samples=tuple(GridSample(**s) for s in d["samples"]),
        curve=np.asarray(d["curve"], dtype=np.float64),
        degree=d["degree"],
        coeffs=tuple(d["coeffs"]),
        residuals=tuple(d["residuals"]),
        outliers=tuple(d["outliers"]),
        degenerate=d["degenerate"],
    )


def save_model(path: str, model: RetransmissionModel, fingerprint: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_jsonable(model, fingerprint), fh, indent=1)


def load_model(path: str, fingerprint: dict | None = None) -> RetransmissionModel | None:
    """Load a cached model; None when missing or fingerprint-mismatched."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            d = json.load(fh)
    except FileNotFoundError:
        return None
    if fingerprint is not None and d.get("fingerprint") != fingerprint:
        return None
    return model_from_jsonable(d)


def grid_fingerprint(
    gens: GeneratorSet,
    spec: ChannelSpec,
    epsilon: float,
    k: int,
    *,
    mode: str = TAIL_BITING,
    schedule_seed: int = 12345,
    min_triggers: int = DEFAULT_MIN_TRIGGERS,
    seed: int = 0,
) -> dict:
    """Identity of a grid-estimation run, for JSON cache validation."""
    return {
        "nu": gens.nu,
        "polys": list(gens.octal()),
        "mode": mode,
        "channel": channel_to_json(spec),
        "epsilon": epsilon,
        "k": k,
        "schedule_seed": schedule_seed,
        "min_triggers": min_triggers,
        "seed": seed,
    }
