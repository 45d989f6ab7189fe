"""ML decoding with exact word posteriors.

The posterior reported for the decoded word is the exact normalized
likelihood P(W = w_hat | y) = L(w_hat) / sum_w L(w) over the decoding
codebook (terminated or tail-biting), computed by forward sum recursions
with per-stage normalization; the decoded word itself comes from a
max-metric pass.  Equal-likelihood ties resolve to the lexicographically
smallest message (first bit most significant).

Decoders accept an optional `metric_llrs` array used only for the argmax
decisions.  Passing sign(llr) for BSC inputs makes every path metric an
exact multiple of 0.5, so ties are resolved reproducibly and identically to
the brute-force oracle; the reported likelihood/posterior always uses the
true LLRs.  Unsent (punctured) positions carry zero LLR.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .trellis import TAIL_BITING, TERMINATED, Trellis

__all__ = [
    "DecodeOutcome",
    "viterbi",
    "rova_terminated",
    "rova_tailbiting",
    "brute_force_map",
]

BRUTE_FORCE_MAX_K = 14


@dataclass(frozen=True)
class DecodeOutcome:
    msg_hat: np.ndarray
    posterior: float
    ml_metric: float


def _llr_arrays(trellis: Trellis, llrs, metric_llrs, mode: str) -> tuple[np.ndarray, np.ndarray, int]:
    arr = np.ascontiguousarray(llrs, dtype=np.float64)
    if arr.ndim != 1 or arr.size % 3 != 0:
        raise ValueError("llrs must cover all 3n mother positions")
    n_stages = arr.size // 3
    if mode == TERMINATED:
        k = n_stages - trellis.nu
        if k < 1:
            raise ValueError("terminated llrs too short for this code")
    else:
        k = n_stages
        if k < trellis.nu:
            raise ValueError(f"tail-biting requires k >= nu ({k} < {trellis.nu})")
    if metric_llrs is None:
        metric = arr
    else:
        metric = np.ascontiguousarray(metric_llrs, dtype=np.float64)
        if metric.shape != arr.shape:
            raise ValueError("metric_llrs must match llrs in shape")
    return arr, metric, k


def _ml_decode(trellis: Trellis, metric: np.ndarray, k: int, mode: str) -> np.ndarray:
    bm8 = K.build_bm8(metric, metric.size // 3)
    msg = np.empty(k, dtype=np.uint8)
    if mode == TERMINATED:
        K.ml_backward_greedy(bm8, trellis.out_pattern, trellis.nu, k, 0, 0, msg)
    else:
        K.tb_ml_decode(bm8, trellis.out_pattern, trellis.nu, k, msg)
    return msg


def _true_metric(trellis: Trellis, msg: np.ndarray, llrs: np.ndarray, mode: str) -> float:
    cw = np.empty(llrs.size, dtype=np.uint8)
    K.encode_kernel(msg, trellis.out_pattern, trellis.nu, mode == TERMINATED, cw)
    return float(K.path_metric_kernel(cw, llrs))


def viterbi(trellis: Trellis, llrs, mode: str, metric_llrs=None) -> tuple[np.ndarray, float]:
    """ML message and its log-likelihood path metric (natural log, additive
    constant shared by all codewords)."""
    arr, metric, k = _llr_arrays(trellis, llrs, metric_llrs, mode)
    msg = _ml_decode(trellis, metric, k, mode)
    return msg, _true_metric(trellis, msg, arr, mode)


def _outcome(trellis: Trellis, arr, metric, k, mode) -> DecodeOutcome:
    msg = _ml_decode(trellis, metric, k, mode)
    ml = _true_metric(trellis, msg, arr, mode)
    bm8_true = K.build_bm8(arr, arr.size // 3)
    if mode == TERMINATED:
        log_den = K.term_sum_pass(bm8_true, trellis.out_pattern, trellis.nu, k)
    else:
        log_den = K.tb_sum_pass(bm8_true, trellis.out_pattern, trellis.nu)
    posterior = math.exp(min(ml - log_den, 0.0))
    return DecodeOutcome(msg, posterior, ml)


def rova_terminated(trellis: Trellis, llrs, metric_llrs=None) -> DecodeOutcome:
    """Decode a terminated codeword and report the exact word posterior."""
    arr, metric, k = _llr_arrays(trellis, llrs, metric_llrs, TERMINATED)
    return _outcome(trellis, arr, metric, k, TERMINATED)


def rova_tailbiting(trellis: Trellis, llrs, metric_llrs=None) -> DecodeOutcome:
    """Decode a tail-biting codeword and report the exact word posterior.

    The sum and max passes propagate (state x start-state) matrices, which is
    the 2^nu start-constrained recursions run jointly; the denominator is the
    trace of the final sum matrix.
    """
    arr, metric, k = _llr_arrays(trellis, llrs, metric_llrs, TAIL_BITING)
    return _outcome(trellis, arr, metric, k, TAIL_BITING)


def _all_messages(k: int) -> np.ndarray:
    """All 2^k messages, row index == message value (bit 0 most significant)."""
    idx = np.arange(1 << k, dtype=np.uint32)
    cols = [(idx >> (k - 1 - t)) & 1 for t in range(k)]
    return np.stack(cols, axis=1).astype(np.uint8)


def encode_batch(trellis: Trellis, msgs: np.ndarray, mode: str) -> np.ndarray:
    """Codeword matrix (n_msgs, 3*stages), vectorized over messages."""
    m, k = msgs.shape
    nu = trellis.nu
    n_stages = k + nu if mode == TERMINATED else k
    cw = np.empty((m, 3 * n_stages), dtype=np.uint8)
    states = np.zeros(m, dtype=np.int64)
    if mode == TAIL_BITING:
        for i in range(1, nu + 1):
            states |= msgs[:, k - i].astype(np.int64) << (i - 1)
    mask = trellis.n_states - 1
    for t in range(n_stages):
        b = msgs[:, t].astype(np.int64) if t < k else np.zeros(m, dtype=np.int64)
        cw[:, 3 * t : 3 * t + 3] = trellis.out_bits[states, b]
        states = ((states << 1) | b) & mask
    return cw


def brute_force_map(trellis: Trellis, llrs, mode: str, metric_llrs=None) -> DecodeOutcome:
    """Exhaustive MAP oracle: enumerate all messages, exact softmax posterior.

    Ties broken toward the smaller message value (lexicographic in bits,
    first bit most significant).  Guarded at k <= 14.
    """
    arr, metric, k = _llr_arrays(trellis, llrs, metric_llrs, mode)
    if k > BRUTE_FORCE_MAX_K:
        raise ValueError(f"brute force limited to k <= {BRUTE_FORCE_MAX_K}, got {k}")
    msgs = _all_messages(k)
    cw = encode_batch(trellis, msgs, mode)
    pm = 1.0 - 2.0 * cw.astype(np.float64)
    scores_true = pm @ (0.5 * arr)
    scores_metric = scores_true if metric is arr else pm @ (0.5 * metric)
    best = int(np.argmax(scores_metric))  # first max == smallest message value
    mx = scores_true.max()
    log_den = mx + math.log(np.exp(scores_true - mx).sum())
    posterior = math.exp(min(scores_true[best] - log_den, 0.0))
    return DecodeOutcome(msgs[best], posterior, float(scores_true[best]))
