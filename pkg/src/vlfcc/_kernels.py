"""Numba kernels for trellis decoding and per-block trial execution.

Metric conventions (shared with rova.py):

* Branch metrics are natural-log likelihood contributions: a stage with
  mother LLRs (l1,l2,l3) assigns pattern idx (bits g1,g2,g3) the metric
  sum_j +-l_j/2 (+ for output bit 0, - for bit 1).  Codeword likelihoods
  then satisfy log L(w) = path_metric(w) + const, the constant cancelling
  in every posterior.
* Decoding decisions run on a separate "metric LLR" array.  For the BSC the
  callers pass sign(llr), making every path metric an exact multiple of 0.5
  in float64, so equal-likelihood ties compare exactly and the documented
  lexicographic tie-break is bit-reproducible.  For the BI-AWGN the metric
  LLRs are simply the true LLRs (ties have probability zero).
* Tie-break: lexicographically smallest message (first bit most
  significant), realized by a backward best-completion DP plus a forward
  walk that takes bit 0 whenever it still achieves the optimum.
* Tail-biting passes propagate (state x start-state) matrices, equivalent
  to running all 2^nu start-constrained decoders jointly.

State arithmetic mirrors trellis.py: predecessors of state s are s>>1 and
(s>>1)|2^(nu-1); the input bit entering state s is s & 1.
"""

from __future__ import annotations

import numpy as np
from numba import njit

NEG_INF = -np.inf


@njit(cache=True)
def update_bm8(bm8, mother_llr, stage):
    """Recompute the 8 branch metrics of one trellis stage from mother LLRs."""
    l1 = mother_llr[3 * stage]
    l2 = mother_llr[3 * stage + 1]
    l3 = mother_llr[3 * stage + 2]
    for idx in range(8):
        v = -0.5 * l1 if (idx >> 2) & 1 else 0.5 * l1
        v += -0.5 * l2 if (idx >> 1) & 1 else 0.5 * l2
        v += -0.5 * l3 if idx & 1 else 0.5 * l3
        bm8[stage, idx] = v


@njit(cache=True)
def build_bm8(mother_llr, n_stages):
    bm8 = np.empty((n_stages, 8))
    for t in range(n_stages):
        update_bm8(bm8, mother_llr, t)
    return bm8


@njit(cache=True)
def term_sum_pass(bm8, pat, nu, k):
    """Natural-log sum of exp(path metric) over all terminated codewords.

    Stages t >= k carry forced zero inputs; the path set is state 0 to
    state 0.  Per-stage max normalization keeps the recursion in range.
    """
    s = 1 << nu
    half = s >> 1
    n_total = bm8.shape[0]
    alpha = np.zeros(s)
    alpha[0] = 1.0
    new = np.empty(s)
    w8 = np.empty(8)
    acc = 0.0
    for t in range(n_total):
        mx = bm8[t, 0]
        for i in range(1, 8):
            if bm8[t, i] > mx:
                mx = bm8[t, i]
        for i in range(8):
            w8[i] = np.exp(bm8[t, i] - mx)
        acc += mx
        free = t < k
        for jn in range(s):
            if (jn & 1) == 1 and not free:
                new[jn] = 0.0
                continue
            b = jn & 1
            p0 = jn >> 1
            p1 = p0 | half
            new[jn] = alpha[p0] * w8[pat[p0, b]] + alpha[p1] * w8[pat[p1, b]]
        m = 0.0
        for jn in range(s):
            if new[jn] > m:
                m = new[jn]
        acc += np.log(m)
        inv = 1.0 / m
        for jn in range(s):
            alpha[jn] = new[jn] * inv
    return acc + np.log(alpha[0])


@njit(cache=True)
def tb_sum_pass(bm8, pat, nu):
    """Natural-log sum of exp(path metric) over all tail-biting codewords.

    A[state, start] accumulates the per-start forward sums jointly; the
    denominator is the trace (paths with start == end).
    """
    s = 1 << nu
    half = s >> 1
    k = bm8.shape[0]
    A = np.eye(s)
    Anew = np.empty((s, s))
    w8 = np.empty(8)
    acc = 0.0
    for t in range(k):
        mx = bm8[t, 0]
        for i in range(1, 8):
            if bm8[t, i] > mx:
                mx = bm8[t, i]
        for i in range(8):
            w8[i] = np.exp(bm8[t, i] - mx)
        acc += mx
        for jn in range(s):
            b = jn & 1
            p0 = jn >> 1
            p1 = p0 | half
            w0 = w8[pat[p0, b]]
            w1 = w8[pat[p1, b]]
            for c in range(s):
                Anew[jn, c] = A[p0, c] * w0 + A[p1, c] * w1
        m = 0.0
        for jn in range(s):
            for c in range(s):
                if Anew[jn, c] > m:
                    m = Anew[jn, c]
        acc += np.log(m)
        inv = 1.0 / m
        for jn in range(s):
            for c in range(s):
                A[jn, c] = Anew[jn, c] * inv
    trace = 0.0
    for c in range(s):
        trace += A[c, c]
    return acc + np.log(trace)


@njit(cache=True)
def tb_max_diag(bm8, pat, nu):
    """Best path metric from each start state back to itself (tail-biting)."""
    s = 1 << nu
    half = s >> 1
    k = bm8.shape[0]
    V = np.full((s, s), NEG_INF)
    for c in range(s):
        V[c, c] = 0.0
    Vnew = np.empty((s, s))
    for t in range(k):
        for jn in range(s):
            b = jn & 1
            p0 = jn >> 1
            p1 = p0 | half
            lw0 = bm8[t, pat[p0, b]]
            lw1 = bm8[t, pat[p1, b]]
            for c in range(s):
                a = V[p0, c] + lw0
                bb = V[p1, c] + lw1
                Vnew[jn, c] = a if a >= bb else bb
        for jn in range(s):
            for c in range(s):
                V[jn, c] = Vnew[jn, c]
    diag = np.empty(s)
    for c in range(s):
        diag[c] = V[c, c]
    return diag


@njit(cache=True)
def ml_backward_greedy(bm8, pat, nu, k, start_state, end_state, msg_out):
    """Lexicographically-smallest ML message for fixed start and end states.

    Backward DP of best completion metrics, then a forward walk preferring
    input 0 whenever it still attains the optimum; stages t >= k are forced
    zero inputs.  Returns the optimal path metric.
    """
    s = 1 << nu
    mask = s - 1
    n_total = bm8.shape[0]
    beta = np.full((n_total + 1, s), NEG_INF)
    beta[n_total, end_state] = 0.0
    for t in range(n_total - 1, -1, -1):
        for st in range(s):
            ns0 = (st << 1) & mask
            best = beta[t + 1, ns0] + bm8[t, pat[st, 0]]
            if t < k:
                ns1 = ns0 | 1
                alt = beta[t + 1, ns1] + bm8[t, pat[st, 1]]
                if alt > best:
                    best = alt
            beta[t, st] = best
    total = beta[0, start_state]
    st = start_state
    for t in range(n_total):
        ns0 = (st << 1) & mask
        m0 = beta[t + 1, ns0] + bm8[t, pat[st, 0]]
        if t < k:
            ns1 = ns0 | 1
            m1 = beta[t + 1, ns1] + bm8[t, pat[st, 1]]
        else:
            ns1 = ns0
            m1 = NEG_INF
        if m0 >= m1:
            if t < k:
                msg_out[t] = 0
            st = ns0
        else:
            msg_out[t] = 1
            st = ns1
    return total


@njit(cache=True)
def lex_less(a, b, n):
    for i in range(n):
        if a[i] != b[i]:
            return a[i] < b[i]
    return False


@njit(cache=True)
def tb_ml_decode(bm8, pat, nu, k, msg_out):
    """Exact tail-biting ML decode with lexicographic tie-break over all
    tied start states.  Returns the ML metric."""
    s = 1 << nu
    diag = tb_max_diag(bm8, pat, nu)
    best = diag[0]
    for c in range(1, s):
        if diag[c] > best:
            best = diag[c]
    cand = np.empty(k, dtype=np.uint8)
    first = True
    for sigma in range(s):
        if diag[sigma] == best:
            ml_backward_greedy(bm8, pat, nu, k, sigma, sigma, cand)
            if first or lex_less(cand, msg_out, k):
                for i in range(k):
                    msg_out[i] = cand[i]
                first = False
    return best


@njit(cache=True)
def encode_kernel(msg, pat, nu, terminated, cw_out):
    """Encode into cw_out (mother positions); tail-biting preloads the
    register with the last nu message bits."""
    k = msg.shape[0]
    s = 1 << nu
    mask = s - 1
    if terminated:
        st = 0
        n_stages = k + nu
    else:
        st = 0
        for i in range(1, nu + 1):
            st |= int(msg[k - i]) << (i - 1)
        n_stages = k
    for t in range(n_stages):
        b = int(msg[t]) if t < k else 0
        p = pat[st, b]
        cw_out[3 * t] = (p >> 2) & 1
        cw_out[3 * t + 1] = (p >> 1) & 1
        cw_out[3 * t + 2] = p & 1
        st = ((st << 1) | b) & mask


@njit(cache=True)
def path_metric_kernel(cw, mother_llr):
    """Sum of (1-2c_j) * llr_j / 2 over mother positions."""
    total = 0.0
    for j in range(cw.shape[0]):
        if cw[j]:
            total -= 0.5 * mother_llr[j]
        else:
            total += 0.5 * mother_llr[j]
    return total


@njit(cache=True)
def crc_remainder_kernel(bits, n, full_mask, width):
    rem = 0
    for i in range(n):
        rem = (rem << 1) | bits[i]
        if (rem >> width) & 1:
            rem ^= full_mask
    return rem


# Stopping-policy codes for run_block.
POLICY_RELIABILITY = 0
POLICY_CRC = 1


@njit(cache=True)
def run_block(
    llr_true,
    llr_metric,
    order,
    decode_points,
    pat,
    nu,
    k_in,
    tail_biting,
    policy,
    log_threshold,
    crc_full,
    crc_width,
    msg,
    msg_hat_out,
):
    """Execute the decode attempts of one transmission block.

    llr_true/llr_metric hold the block's received symbols in transmission
    order (length = last decode point).  Returns (stop_index, success,
    log_posterior): stop_index = -1 if every decode point NACKed, else the
    index of the accepting decode point.  Decode points with fewer symbols
    than input bits are provable NACKs (posterior <= 2^(n-k) <= 1/2 and any
    CRC acceptance would be vacuous) and are skipped without decoding.
    """
    n_stages = k_in + nu if tail_biting == 0 else k_in
    n_mother = 3 * n_stages
    mother_true = np.zeros(n_mother)
    mother_metric = np.zeros(n_mother)
    bm8_true = np.zeros((n_stages, 8))
    bm8_metric = np.zeros((n_stages, 8))
    cw = np.empty(n_mother, dtype=np.uint8)
    prev = 0
    m = decode_points.shape[0]
    for j in range(m):
        r = decode_points[j]
        for idx in range(prev, r):
            q = order[idx]
            mother_true[q] = llr_true[idx]
            mother_metric[q] = llr_metric[idx]
        for idx in range(prev, r):
            stg = order[idx] // 3
            update_bm8(bm8_true, mother_true, stg)
            update_bm8(bm8_metric, mother_metric, stg)
        prev = r
        if r < k_in:
            continue
        if tail_biting == 1:
            tb_ml_decode(bm8_metric, pat, nu, k_in, msg_hat_out)
        else:
            ml_backward_greedy(bm8_metric, pat, nu, k_in, 0, 0, msg_hat_out)
        if policy == POLICY_CRC:
            if crc_remainder_kernel(msg_hat_out, k_in, crc_full, crc_width) == 0:
                ok = True
                for i in range(k_in):
                    if msg_hat_out[i] != msg[i]:
                        ok = False
                        break
                return j, ok, np.nan
        else:
            encode_kernel(msg_hat_out, pat, nu, tail_biting == 0, cw)
            ml_true = path_metric_kernel(cw, mother_true)
            if tail_biting == 1:
                log_den = tb_sum_pass(bm8_true, pat, nu)
            else:
                log_den = term_sum_pass(bm8_true, pat, nu, k_in)
            log_post = ml_true - log_den
            if log_post >= log_threshold:
                ok = True
                for i in range(k_in):
                    if msg_hat_out[i] != msg[i]:
                        ok = False
                        break
                return j, ok, log_post
    return -1, False, np.nan
