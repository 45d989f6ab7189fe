"""Decision-feedback VLF simulation engine.

Protocol per trial: draw a uniform message, encode with the rate-1/3 mother
code, send symbols in the schedule's pseudo-random order.  At each decode
point the receiver decodes using only the current block's symbols; it ACKs
when the stopping policy is satisfied (word posterior >= 1-epsilon, or the
CRC of the decoded word checks).  After the last decode point of a block the
transmitter either restarts the block from scratch (repeat-forever) or the
receiver declares an error (peak-latency mode).

Campaigns run trials in fixed-size chunks with counter-derived per-trial
seeds (Philox keyed by SeedSequence(master_seed, spawn_key=(0, trial))).
Chunk summaries are integers only and are reduced strictly in chunk order,
so reports are byte-identical for a fixed master seed under any worker
count; speculative chunks computed past the stop condition are discarded.
"""

from __future__ import annotations

import collections
import dataclasses
import json
import logging
import math
import multiprocessing
import os
from dataclasses import dataclass
from statistics import NormalDist

import numpy as np

from . import _kernels as K
from .channel import BSC, ChannelSpec, transmit
from .crc import CrcPoly, crc_append
from .punctures import make_schedule
from .trellis import TAIL_BITING, TERMINATED, GeneratorSet, build_trellis

__all__ = [
    "StoppingPolicy",
    "TrialResult",
    "EstimatorReport",
    "CampaignConfig",
    "run_trial",
    "run_campaign",
    "latency_from_nack",
    "confidence_interval",
]

logger = logging.getLogger(__name__)

REPEAT_FOREVER = "repeat"
DECLARE_ERROR = "declare_error"

_MAX_ATTEMPTS = 100_000
_TRIAL_STREAM = 0  # spawn-key namespace for per-trial generators


@dataclass(frozen=True)
class StoppingPolicy:
    """Reliability-threshold or CRC stopping, plus the after-last-NACK mode."""

    kind: str  # "reliability" | "crc"
    epsilon: float | None = None
    crc: CrcPoly | None = None
    on_final_nack: str = REPEAT_FOREVER

    def __post_init__(self) -> None:
        if self.kind == "reliability":
            if self.epsilon is None or not (0.0 < self.epsilon < 0.5):
                raise ValueError("reliability stopping needs epsilon in (0, 0.5)")
        elif self.kind == "crc":
            if self.crc is None:
                raise ValueError("crc stopping needs a CrcPoly")
        else:
            raise ValueError(f"unknown stopping policy {self.kind!r}")
        if self.on_final_nack not in (REPEAT_FOREVER, DECLARE_ERROR):
            raise ValueError(f"unknown final-NACK mode {self.on_final_nack!r}")

    @classmethod
    def reliability(cls, epsilon: float, on_final_nack: str = REPEAT_FOREVER) -> "StoppingPolicy":
        return cls("reliability", epsilon=epsilon, on_final_nack=on_final_nack)

    @classmethod
    def crc_check(cls, poly: CrcPoly, on_final_nack: str = REPEAT_FOREVER) -> "StoppingPolicy":
        return cls("crc", crc=poly, on_final_nack=on_final_nack)


@dataclass(frozen=True)
class TrialResult:
    tau: int
    success: bool
    attempts: int
    stop_index: int | None  # 0-based decode-point index of the ACK, None if declared error
    declared_error: bool
    nack_counts: np.ndarray  # NACKs tallied at each decode point over this trial
    msg: np.ndarray
    msg_hat: np.ndarray | None
    log_posterior: float


@dataclass(frozen=True)
class EstimatorReport:
    k: int
    S: int
    errors: int
    declared_errors: int
    lambda_hat: float
    sigma_lambda: float
    Rt_hat: float
    Pue_hat: float
    sigma_ue: float
    ci_level: float
    ci: tuple[float, float]
    nack_prob: tuple[float, ...]  # survival P[no ACK at any of N_1..N_i | block]
    blocks_started: int
    decode_points: tuple[int, ...]
    master_seed: int
    schedule_seed: int
    partial: bool
    trace: tuple[dict, ...] = ()


@dataclass(frozen=True)
class CampaignConfig:
    """One simulation campaign: code, channel, policy, decode grid."""

    gens: GeneratorSet
    mode: str
    k: int  # information bits (CRC check bits excluded)
    channel: ChannelSpec
    policy: StoppingPolicy
    decode_points: tuple[int, ...] | None = None  # None -> decode after every symbol
    schedule_seed: int = 12345

    def __post_init__(self) -> None:
        if self.mode not in (TERMINATED, TAIL_BITING):
            raise ValueError(f"unknown termination mode {self.mode!r}")
        if self.k < 1:
            raise ValueError("k must be >= 1")

    @property
    def k_in(self) -> int:
        """Encoder input bits: info bits plus CRC width under CRC stopping."""
        if self.policy.kind == "crc":
            return self.k + self.policy.crc.width
        return self.k

    @property
    def mother_length(self) -> int:
        stages = self.k_in + (self.gens.nu if self.mode == TERMINATED else 0)
        if self.mode == TAIL_BITING and self.k_in < self.gens.nu:
            raise ValueError(f"tail-biting requires k_in >= nu ({self.k_in} < {self.gens.nu})")
        return 3 * stages

    def schedule(self) -> TransmissionSchedule:
        n = self.mother_length
        pts = self.decode_points if self.decode_points is not None else tuple(range(1, n + 1))
        return make_schedule(n, self.schedule_seed, pts)


class _TrialEngine:
    """Per-process context: trellis tables, schedule arrays, buffers."""

    def __init__(self, config: CampaignConfig):
        self.config = config
        trellis = build_trellis(config.gens)
        self.pat = np.ascontiguousarray(trellis.out_pattern)
        self.nu = config.gens.nu
        self.k_in = config.k_in
        self.k = config.k
        self.tb_flag = 1 if config.mode == TAIL_BITING else 0
        sched = config.schedule()
        self.schedule = sched
        self.block_len = sched.block_length
        self.order_prefix = np.ascontiguousarray(sched.order[: self.block_len])
        self.dp = np.asarray(sched.decode_points, dtype=np.int64)
        self.m = self.dp.size
        pol = config.policy
        if pol.kind == "crc":
            self.policy_code = K.POLICY_CRC
            self.log_threshold = 0.0
            self.crc_full = pol.crc.full_mask
            self.crc_width = pol.crc.width
        else:
            self.policy_code = K.POLICY_RELIABILITY
            self.log_threshold = math.log1p(-pol.epsilon)
            self.crc_full = 0
            self.crc_width = 0
        self.declare_mode = pol.on_final_nack == DECLARE_ERROR
        self.is_bsc = config.channel.kind == BSC
        n_mother = config.mother_length
        self._cw = np.empty(n_mother, dtype=np.uint8)
        self._msg_hat = np.empty(self.k_in, dtype=np.uint8)

    def draw_message(self, rng: np.random.Generator) -> np.ndarray:
        info = rng.integers(0, 2, self.k, dtype=np.uint8)
        if self.policy_code == K.POLICY_CRC:
            return crc_append(info, self.config.policy.crc)
        return info

    def run_one(self, rng: np.random.Generator) -> TrialResult:
        cfg = self.config
        msg = self.draw_message(rng)
        K.encode_kernel(msg, self.pat, self.nu, self.tb_flag == 0, self._cw)
        block_bits = self._cw[self.order_prefix]
        attempts = 0
        nack_counts = np.zeros(self.m, dtype=np.int64)
        while True:
            attempts += 1
            if attempts > _MAX_ATTEMPTS:
                raise RuntimeError("trial exceeded the retransmission-attempt guard")
            obs = transmit(block_bits, cfg.channel, rng)
            llr_true = obs.llr
            llr_metric = np.sign(llr_true) if self.is_bsc else llr_true
            j, success, log_post = K.run_block(
                llr_true,
                llr_metric,
                self.order_prefix,
                self.dp,
                self.pat,
                self.nu,
                self.k_in,
                self.tb_flag,
                self.policy_code,
                self.log_threshold,
                self.crc_full,
                self.crc_width,
                msg,
                self._msg_hat,
            )
            if j >= 0:
                nack_counts[:j] += 1
                tau = (attempts - 1) * self.block_len + int(self.dp[j])
                return TrialResult(
                    tau, bool(success), attempts, int(j), False,
                    nack_counts, msg, self._msg_hat.copy(), float(log_post),
                )
            nack_counts += 1
            if self.declare_mode:
                tau = self.block_len
                return TrialResult(
                    tau, False, attempts, None, True,
                    nack_counts, msg, None, float("nan"),
                )


def trial_rng(master_seed: int, trial_index: int) -> np.random.Generator:
    """Counter-derived per-trial generator; any worker can build any trial."""
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(_TRIAL_STREAM, trial_index))
    return np.random.Generator(np.random.Philox(ss))


def run_trial(config: CampaignConfig, trial_seed: int, trial_index: int = 0) -> TrialResult:
    """Execute one protocol trial (trial_seed acts as the master seed)."""
    engine = _TrialEngine(config)
    return engine.run_one(trial_rng(trial_seed, trial_index))


@dataclass
class _Sums:
    """Exact integer accumulators; merging is order-insensitive but we merge
    in chunk order anyway so floats derived later are reproducible."""

    n: int = 0
    sum_tau: int = 0
    sum_tau2: int = 0
    errors: int = 0
    declared: int = 0
    blocks: int = 0
    full_nack_blocks: int = 0  # blocks that NACKed at every decode point
    stops_at: np.ndarray | None = None  # ACK counts per 0-based decode index

    def add_chunk(self, other: "_Sums") -> None:
        self.n += other.n
        self.sum_tau += other.sum_tau
        self.sum_tau2 += other.sum_tau2
        self.errors += other.errors
        self.declared += other.declared
        self.blocks += other.blocks
        self.full_nack_blocks += other.full_nack_blocks
        if self.stops_at is None:
            self.stops_at = other.stops_at.copy()
        else:
            self.stops_at += other.stops_at

    def to_jsonable(self) -> dict:
        d = dataclasses.asdict(self)
        d["stops_at"] = None if self.stops_at is None else self.stops_at.tolist()
        return d

    @classmethod
    def from_jsonable(cls, d: dict) -> "_Sums":
        s = cls(**{**d, "stops_at": None})
        if d["stops_at"] is not None:
            s.stops_at = np.asarray(d["stops_at"], dtype=np.int64)
        return s


def _run_chunk(engine: _TrialEngine, master_seed: int, start: int, count: int) -> _Sums:
    sums = _Sums(stops_at=np.zeros(engine.m, dtype=np.int64))
    for t in range(start, start + count):
        res = engine.run_one(trial_rng(master_seed, t))
        sums.n += 1
        sums.sum_tau += res.tau
        sums.sum_tau2 += res.tau * res.tau
        sums.blocks += res.attempts
        if res.declared_error:
            sums.declared += 1
            sums.full_nack_blocks += res.attempts
        else:
            sums.full_nack_blocks += res.attempts - 1
            sums.stops_at[res.stop_index] += 1
            if not res.success:
                sums.errors += 1
    return sums


_WORKER_ENGINE: _TrialEngine | None = None
_WORKER_SEED: int | None = None


def _worker_init(config: CampaignConfig, master_seed: int) -> None:
    global _WORKER_ENGINE, _WORKER_SEED
    _WORKER_ENGINE = _TrialEngine(config)
    _WORKER_SEED = master_seed


def _worker_chunk(args: tuple[int, int]) -> _Sums:
    start, count = args
    return _run_chunk(_WORKER_ENGINE, _WORKER_SEED, start, count)


def confidence_interval(p_hat: float, S: int, level: float = 0.95) -> tuple[float, float]:
    """Gaussian-approximation interval p_hat +- y*sqrt(p(1-p)/S)."""
    if S < 1:
        raise ValueError("S must be >= 1")
    if not (0.0 < level < 1.0):
        raise ValueError("confidence level must be in (0, 1)")
    y = NormalDist().inv_cdf(0.5 + level / 2.0)
    hw = y * math.sqrt(max(p_hat * (1.0 - p_hat), 0.0) / S)
    return (p_hat - hw, p_hat + hw)


def latency_from_nack(nack_prob, increments) -> float:
    """Expected stopping time from block survival probabilities.

    nack_prob[i-1] = P[no ACK at any of the first i decode points of a block]
    (the quantity campaigns report).  The increment sent after the i-th NACK
    is I_{i+1}, so

        lambda = (I_1 + sum_{i=1}^{m-1} I_{i+1} * nack_prob[i-1]) / (1 - nack_prob[m-1])

    With unit increments this is the decode-every-symbol formula
    sum_{n<N} P[tau > n] / (1 - P[tau > N]).
    """
    q = [float(x) for x in nack_prob]
    inc = [int(i) for i in increments]
    if len(q) != len(inc):
        raise ValueError("nack_prob and increments must have equal length")
    if not inc:
        raise ValueError("need at least one transmission length")
    if q[-1] >= 1.0:
        raise ValueError("P_NACK at the final decode point is 1: latency diverges")
    numer = float(inc[0])
    for i in range(1, len(inc)):
        numer += inc[i] * q[i - 1]
    return numer / (1.0 - q[-1])


def _report_from_sums(
    config: CampaignConfig,
    sums: _Sums,
    master_seed: int,
    ci_level: float,
    partial: bool,
    trace: tuple[dict, ...],
) -> EstimatorReport:
    S = sums.n
    lam = sums.sum_tau / S
    var_lam = sums.sum_tau2 / S - lam * lam
    pue = sums.errors / S
    sigma_ue = math.sqrt(max(pue * (1.0 - pue), 0.0))
    # survival at index i (1-based): blocks that NACKed through the first i
    # points = full-NACK blocks + blocks that ACKed at some later point.
    suffix = np.cumsum(sums.stops_at[::-1])[::-1]  # suffix[i] = stops at index >= i
    m = sums.stops_at.size
    nack = tuple(
        (sums.full_nack_blocks + (suffix[i] if i < m else 0)) / sums.blocks
        for i in range(1, m + 1)
    )
    sched = config.schedule()
    return EstimatorReport(
        k=config.k,
        S=S,
        errors=sums.errors,
        declared_errors=sums.declared,
        lambda_hat=lam,
        sigma_lambda=math.sqrt(max(var_lam, 0.0)),
        Rt_hat=config.k * (1.0 - pue) / lam,
        Pue_hat=pue,
        sigma_ue=sigma_ue,
        ci_level=ci_level,
        ci=confidence_interval(pue, S, ci_level),
        nack_prob=nack,
        blocks_started=sums.blocks,
        decode_points=sched.decode_points,
        master_seed=master_seed,
        schedule_seed=config.schedule_seed,
        partial=partial,
        trace=trace,
    )


def run_campaign(
    config: CampaignConfig,
    *,
    master_seed: int,
    min_errors: int | None = None,
    max_trials: int | None = None,
    workers: int = 1,
    chunk_size: int = 1024,
    ci_level: float = 0.95,
    checkpoint_path: str | None = None,
    keep_trace: bool = False,
    log_every: int = 64,
) -> EstimatorReport:
    """Run trials until min_errors undetected errors or max_trials trials.

    Deterministic for a fixed master_seed under any worker count: trials are
    seeded by index, chunk boundaries are fixed, and chunk summaries are
    reduced in index order with the stop rule evaluated on that prefix.
    """
    if min_errors is None and max_trials is None:
        raise ValueError("need min_errors or max_trials")
    if min_errors is not None and min_errors < 1:
        raise ValueError("min_errors must be >= 1")
    if max_trials is not None and max_trials < 1:
        raise ValueError("max_trials must be >= 1")

    engine_probe = _TrialEngine(config)  # validates config early
    total = _Sums(stops_at=np.zeros(engine_probe.m, dtype=np.int64))
    chunks_done = 0
    trace: list[dict] = []

    ckpt_meta = {
        "master_seed": master_seed,
        "chunk_size": chunk_size,
        "config": _config_fingerprint(config),
    }
    if checkpoint_path and os.path.exists(checkpoint_path):
        with open(checkpoint_path, "r", encoding="utf-8") as fh:
            saved = json.load(fh)
        if saved.get("meta") == ckpt_meta:
            total = _Sums.from_jsonable(saved["sums"])
            chunks_done = saved["chunks_done"]
            trace = list(saved.get("trace", []))
            logger.info("resumed campaign at chunk %d (S=%d)", chunks_done, total.n)
        else:
            logger.warning("checkpoint %s does not match this campaign; ignoring", checkpoint_path)

    def chunk_bounds(idx: int) -> tuple[int, int]:
        start = idx * chunk_size
        count = chunk_size
        if max_trials is not None:
            count = min(count, max_trials - start)
        return start, count

    def stopped(s: _Sums) -> bool:
        if min_errors is not None and s.errors >= min_errors:
            return True
        if max_trials is not None and s.n >= max_trials:
            return True
        return False

    def on_chunk(s: _Sums) -> None:
        nonlocal chunks_done
        total.add_chunk(s)
        chunks_done += 1
        if keep_trace:
            lam = total.sum_tau / total.n
            trace.append(
                {
                    "S": total.n,
                    "errors": total.errors,
                    "Pue": total.errors / total.n,
                    "lambda": lam,
                    "sigma_lambda": math.sqrt(max(total.sum_tau2 / total.n - lam * lam, 0.0)),
                }
            )
        if chunks_done % log_every == 0:
            logger.info(
                "campaign progress: S=%d errors=%d lambda=%.2f",
                total.n, total.errors, total.sum_tau / total.n,
            )
        if checkpoint_path and chunks_done % 16 == 0:
            _save_checkpoint(checkpoint_path, ckpt_meta, total, chunks_done, trace)

    if not stopped(total):
        if workers <= 1:
            idx = chunks_done
            while not stopped(total):
                start, count = chunk_bounds(idx)
                if count <= 0:
                    break
                on_chunk(_run_chunk(engine_probe, master_seed, start, count))
                idx += 1
        else:
            # Sliding window of in-flight chunks, consumed strictly in index
            # order; chunks computed speculatively past the stop point are
            # discarded, so the reduced prefix matches the single-worker run.
            window = 2 * workers
            with multiprocessing.Pool(
                processes=workers, initializer=_worker_init, initargs=(config, master_seed)
            ) as pool:
                pending: collections.deque = collections.deque()
                idx = chunks_done
                while True:
                    while len(pending) < window:
                        start, count = chunk_bounds(idx)
                        if count <= 0:
                            break
                        pending.append(pool.apply_async(_worker_chunk, ((start, count),)))
                        idx += 1
                    if not pending:
                        break
                    on_chunk(pending.popleft().get())
                    if stopped(total):
                        break

    if checkpoint_path:
        _save_checkpoint(checkpoint_path, ckpt_meta, total, chunks_done, trace)
    partial = bool(min_errors is not None and total.errors < min_errors)
    return _report_from_sums(config, total, master_seed, ci_level, partial, tuple(trace))


def _config_fingerprint(config: CampaignConfig) -> dict:
    pol = config.policy
    return {
        "nu": config.gens.nu,
        "polys": list(config.gens.octal()),
        "mode": config.mode,
        "k": config.k,
        "channel": [config.channel.kind, config.channel.param],
        "policy": [pol.kind, pol.epsilon, pol.crc.koopman if pol.crc else None, pol.on_final_nack],
        "decode_points": list(config.decode_points) if config.decode_points else None,
        "schedule_seed": config.schedule_seed,
    }


def _save_checkpoint(path: str, meta: dict, sums: _Sums, chunks_done: int, trace: list) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(
            {"meta": meta, "sums": sums.to_jsonable(), "chunks_done": chunks_done, "trace": trace},
            fh,
        )
    os.replace(tmp, path)
