"""Acceptance gate: one test per release criterion, with pinned tolerances.

Each test prints a single ``[Axx] PASS/FAIL`` line (written through the
capture so it is always visible) carrying the measured numbers, then asserts.
Seeds and trial budgets are frozen, so every run reproduces the same values
bit for bit.  Expected total runtime is 15-25 minutes on one core; the
hours-scale 1024-state campaign only runs when VLFCC_RUN_SLOW=1 is set.

Known deviation: the 12-bit CRC failure-case check (A06b) asserts the
published reference band and FAILS by design; see README "Known deviations".
"""
from __future__ import annotations

import itertools
import math
import os
import time

import numpy as np
import pytest

from vlfcc.bounds import (
    gamma_threshold,
    m_transmission_bound,
    repeat_after_n_bound,
    vlf_achievability,
    wald_bound,
)
from vlfcc.channel import bsc, biawgn_db, capacity, transmit
from vlfcc.crc import CrcPoly
from vlfcc.lenopt import (
    LengthVector,
    RetransmissionModel,
    estimate_retrans_grid,
    fit_logpoly,
    objective_latency,
    optimize_lengths,
)
from vlfcc.punctures import make_schedule
from vlfcc.rova import brute_force_map, rova_tailbiting, rova_terminated
from vlfcc.trellis import (
    REFERENCE_CODES,
    TAIL_BITING,
    TERMINATED,
    GeneratorSet,
    build_trellis,
    distance_spectrum,
    encode,
)
from vlfcc.vlfsim import (
    CampaignConfig,
    StoppingPolicy,
    confidence_interval,
    run_campaign,
)
from vlfcc import cli

GENS64 = REFERENCE_CODES[64].gens
AWGN2 = biawgn_db(2.0)
EPS = 1e-3

# Reliability-rule campaign reports collected for the global epsilon sweep.
REPORTS: dict[str, object] = {}


def verdict(capsys, tag, ok, detail):
    line = f"[{tag}] {'PASS' if ok else 'FAIL'}  {detail}"
    with capsys.disabled():
        print("\n" + line, flush=True)
    assert ok, line


def test_a01_code_table_fidelity(capsys):
    """Distance spectra of the three reference codes match the pinned table."""
    t0 = time.time()
    expect = {64: (15, 3), 256: (18, 1), 1024: (22, 7)}
    got = {}
    for states, (d_free, mult) in expect.items():
        ds = distance_spectrum(REFERENCE_CODES[states].gens)
        got[states] = (ds.d_free, ds.multiplicity, ds.converged)
    ok = all(got[s][:2] == expect[s] and got[s][2] for s in expect)
    verdict(capsys, "A01", ok,
            f"spectra {got} vs {expect} in {time.time() - t0:.1f}s")


def test_a02_posterior_oracle_equivalence(capsys):
    """Exact posteriors match an exhaustive MAP oracle on 10^4 instances."""
    t0 = time.time()
    gens_by_nu = {
        2: GeneratorSet(2, (0o7, 0o5, 0o3)),
        3: GeneratorSet(3, (0o13, 0o15, 0o17)),
        4: GeneratorSet(4, (0o23, 0o31, 0o37)),
    }
    trellises = {nu: build_trellis(g) for nu, g in gens_by_nu.items()}
    channels = (bsc(0.08), AWGN2)
    n_instances = 10_000
    worst_rel = 0.0
    mismatches = 0
    rng = np.random.default_rng(20260825)
    for i in range(n_instances):
        nu = int(rng.integers(2, 5))
        gens, tr = gens_by_nu[nu], trellises[nu]
        k = int(rng.integers(4, 11))
        mode = TAIL_BITING if (k >= nu and rng.integers(2)) else TERMINATED
        spec = channels[int(rng.integers(2))]
        msg = rng.integers(0, 2, k, dtype=np.uint8)
        cw = encode(gens, msg, mode)
        N = cw.size
        sched = make_schedule(N, seed=int(rng.integers(1, 1 << 30)), decode_points=(N,))
        n_obs = int(rng.integers(1, N + 1))
        obs = transmit(cw[sched.order[:n_obs]], spec, rng)
        llrs = np.zeros(N)
        llrs[sched.order[:n_obs]] = obs.llr
        metric = llrs
        if spec.kind == "bsc":
            metric = np.zeros(N)
            metric[sched.order[:n_obs]] = np.sign(obs.llr)
        fn = rova_tailbiting if mode == TAIL_BITING else rova_terminated
        got = fn(tr, llrs, metric)
        want = brute_force_map(tr, llrs, mode, metric)
        if not np.array_equal(got.msg_hat, want.msg_hat):
            mismatches += 1
            continue
        rel = abs(got.posterior - want.posterior) / max(want.posterior, 1e-300)
        worst_rel = max(worst_rel, rel)
    ok = mismatches == 0 and worst_rel <= 1e-9
    verdict(capsys, "A02", ok,
            f"{n_instances} instances, {mismatches} message mismatches, "
            f"worst posterior rel err {worst_rel:.2e} in {time.time() - t0:.0f}s")


def test_a03_epsilon_soundness_k16_preset(capsys):
    """64-state k=16 five-transmission campaign hits the reference P_UE band."""
    t0 = time.time()
    cfg = CampaignConfig(
        gens=GENS64, mode=TAIL_BITING, k=16, channel=AWGN2,
        policy=StoppingPolicy.reliability(EPS),
        decode_points=(30, 33, 36, 41, 48), schedule_seed=12345)
    rep = run_campaign(cfg, master_seed=12345, min_errors=100, max_trials=900_000)
    REPORTS["a03_k16_m5"] = rep
    lo, hi = 0.5 * 2.26e-4, 2.0 * 2.26e-4
    ok = rep.errors >= 100 and lo <= rep.Pue_hat <= hi
    verdict(capsys, "A03", ok,
            f"P_UE={rep.Pue_hat:.3e} in [{lo:.2e},{hi:.2e}], errors={rep.errors}, "
            f"S={rep.S}, CI-hi={rep.ci[1]:.3e} in {time.time() - t0:.0f}s")


def test_a04_bsc_headline_point(capsys):
    """64-state TBCC k=24 on BSC(0.05): latency 44.1 and throughput 0.543 (5%)."""
    t0 = time.time()
    cfg = CampaignConfig(
        gens=GENS64, mode=TAIL_BITING, k=24, channel=bsc(0.05),
        policy=StoppingPolicy.reliability(EPS), schedule_seed=12345)
    rep = run_campaign(cfg, master_seed=20260825, min_errors=25, max_trials=120_000)
    REPORTS["a04_bsc_headline"] = rep
    lam_ok = abs(rep.lambda_hat - 44.1) / 44.1 <= 0.05
    rt_ok = abs(rep.Rt_hat - 0.543) / 0.543 <= 0.05
    ok = lam_ok and rt_ok and rep.errors >= 25
    verdict(capsys, "A04", ok,
            f"lambda={rep.lambda_hat:.3f} (ref 44.1), Rt={rep.Rt_hat:.4f} (ref 0.543), "
            f"errors={rep.errors}, S={rep.S} in {time.time() - t0:.0f}s")


def test_a05_awgn_m5_proxy(capsys):
    """64-state k=64 five-transmission proxy: P_UE at reference order 2.60e-4."""
    t0 = time.time()
    cfg = CampaignConfig(
        gens=GENS64, mode=TAIL_BITING, k=64, channel=AWGN2,
        policy=StoppingPolicy.reliability(EPS),
        decode_points=(121, 133, 146, 163, 192), schedule_seed=12345)
    rep = run_campaign(cfg, master_seed=12345, min_errors=25, max_trials=400_000)
    REPORTS["a05_awgn_m5_proxy"] = rep
    ok = rep.errors >= 25 and 2.60e-5 <= rep.Pue_hat <= 2.60e-3
    verdict(capsys, "A05", ok,
            f"proxy P_UE={rep.Pue_hat:.3e} in [2.6e-5,2.6e-3], errors={rep.errors}, "
            f"S={rep.S}, lambda={rep.lambda_hat:.1f} in {time.time() - t0:.0f}s")


@pytest.mark.skipif(not os.environ.get("VLFCC_RUN_SLOW"),
                    reason="hours-scale 1024-state campaign; set VLFCC_RUN_SLOW=1")
def test_a05b_awgn_m5_full(capsys):
    """1024-state k=64 {106,9,9,12,22}: latency 121.0 and throughput 0.529 (5%)."""
    t0 = time.time()
    cfg = CampaignConfig(
        gens=REFERENCE_CODES[1024].gens, mode=TAIL_BITING, k=64, channel=AWGN2,
        policy=StoppingPolicy.reliability(EPS),
        decode_points=(106, 115, 124, 136, 158), schedule_seed=12345)
    rep = run_campaign(cfg, master_seed=12345, min_errors=25, max_trials=400_000)
    REPORTS["a05b_awgn_m5_full"] = rep
    lam_ok = abs(rep.lambda_hat - 121.0) / 121.0 <= 0.05
    rt_ok = abs(rep.Rt_hat - 0.529) / 0.529 <= 0.05
    ok = lam_ok and rt_ok and rep.errors >= 25
    verdict(capsys, "A05b", ok,
            f"lambda={rep.lambda_hat:.2f} (ref 121.0), Rt={rep.Rt_hat:.4f} (ref 0.529), "
            f"errors={rep.errors}, S={rep.S} in {time.time() - t0:.0f}s")


def test_a06a_crc_16bit_comparison(capsys):
    """16-bit 0x8810 at k+A=64: P_UE within [0.3, 3] x 2.538e-4."""
    t0 = time.time()
    cfg = CampaignConfig(
        gens=GENS64, mode=TAIL_BITING, k=48, channel=AWGN2,
        policy=StoppingPolicy.crc_check(CrcPoly.from_koopman_hex("0x8810")),
        schedule_seed=12345)
    rep = run_campaign(cfg, master_seed=12345, min_errors=25, max_trials=120_000)
    lo, hi = 0.3 * 2.538e-4, 3.0 * 2.538e-4
    ok = lo <= rep.Pue_hat <= hi
    verdict(capsys, "A06a", ok,
            f"P_UE={rep.Pue_hat:.3e} in [{lo:.2e},{hi:.2e}], errors={rep.errors}, "
            f"S={rep.S}, lambda={rep.lambda_hat:.1f} in {time.time() - t0:.0f}s")


def test_a06b_crc_12bit_failure_case(capsys):
    """12-bit 0xc07 at k+A=24 against the published reference band.

    KNOWN DEVIATION (expected FAIL): the reference value 1.479e-1 is not
    reproducible under exact-ML decoding with any documented register
    convention; this implementation measures ~8.5e-4, consistent with the
    neighboring reference rows (k+A=34: 1.43e-3 vs 1.036e-3; 48: 1.86e-3 vs
    2.935e-3; 64: 1.95e-3 vs 3.504e-3).  See README "Known deviations".
    """
    t0 = time.time()
    cfg = CampaignConfig(
        gens=GENS64, mode=TAIL_BITING, k=12, channel=AWGN2,
        policy=StoppingPolicy.crc_check(CrcPoly.from_koopman_hex("0xc07")),
        schedule_seed=12345)
    rep = run_campaign(cfg, master_seed=12345, max_trials=20_000)
    lo, hi = 0.1 * 1.479e-1, 10.0 * 1.479e-1
    ok = rep.Pue_hat > 1e-3 and lo <= rep.Pue_hat <= hi
    verdict(capsys, "A06b", ok,
            f"P_UE={rep.Pue_hat:.3e} vs reference band [{lo:.2e},{hi:.2e}] "
            f"(known deviation, see README), errors={rep.errors}, S={rep.S} "
            f"in {time.time() - t0:.0f}s")


def test_a07_bounds(capsys):
    """Wald closed form, Monte-Carlo dominance, grid equivalence, capacity."""
    t0 = time.time()
    fails = []
    # closed form vs independent hand evaluation
    for spec, label in ((bsc(0.05), "bsc"), (AWGN2, "awgn")):
        if spec.kind == "bsc":
            p = spec.param
            cap = 1.0 + p * math.log2(p) + (1 - p) * math.log2(1 - p)
            bmax = math.log2(2 * (1 - p))
        else:
            cap = capacity(spec)
            bmax = 1.0
        for k in (8, 32, 128):
            gamma = math.log2((2.0 ** k - 1) / EPS)
            want = (gamma + bmax) / cap
            got = wald_bound(spec, k, EPS)
            if abs(got.ell - want) / want > 1e-6:
                fails.append(f"wald {label} k={k}")
            if got.rate > capacity(spec) + 1e-12:
                fails.append(f"rate>cap {label} k={k}")
    # Monte-Carlo Thm-1 expectation sits at or below Wald within 3 sigma
    for spec, label in ((bsc(0.05), "bsc"), (AWGN2, "awgn")):
        for k in (8, 16, 32, 64, 128):
            wald = wald_bound(spec, k, EPS)
            mc = vlf_achievability(spec, k, EPS, n_walks=20_000, seed=41)
            if mc.ell > wald.ell + 3.0 * mc.stderr:
                fails.append(f"mc>wald {label} k={k}: {mc.ell:.2f} vs {wald.ell:.2f}")
            if mc.rate > capacity(spec) + 1e-9:
                fails.append(f"mc rate>cap {label} k={k}")
    # unit-increment grid == free stopping, same seed, exact
    free = repeat_after_n_bound(AWGN2, 12, EPS, n_block=120, n_walks=10_000, seed=7)
    grid = m_transmission_bound(AWGN2, 12, EPS, increments=(1,) * 120, n_walks=10_000, seed=7)
    if abs(grid.ell - free.ell) > 1e-9 * free.ell:
        fails.append(f"grid {grid.ell} != free {free.ell}")
    verdict(capsys, "A07", not fails,
            f"wald rel<=1e-6, MC<=Wald+3sig over k in {{8..128}} x 2 channels, "
            f"unit-grid==free ({grid.ell:.3f}), rates<=capacity; "
            f"violations: {fails or 'none'} in {time.time() - t0:.0f}s")


def _synth_model(k, n_max, rate):
    curve = np.ones(n_max)
    for n in range(k, n_max + 1):
        curve[n - 1] = math.exp(-rate * (n - k + 1))
    return RetransmissionModel(k=k, n_max=n_max, samples=(),
                               curve=np.minimum.accumulate(curve), degree=0,
                               coeffs=(), residuals=(), outliers=(),
                               degenerate=False)


def test_a08_optimizer(capsys):
    """Exhaustive-search agreement for m<=3; k=16 model within 2% of {30,3,3,5,7}."""
    t0 = time.time()
    fails = []
    models = [_synth_model(10, 42, 0.35), _synth_model(8, 40, 0.5),
              _synth_model(14, 45, 0.18)]
    for mi, model in enumerate(models):
        for m in (1, 2, 3):
            lv, lam = optimize_lengths(model, m, restarts=40, seed=1)
            best = None
            cap = model.n_max
            for combo in itertools.product(range(1, cap + 1), repeat=m):
                if sum(combo) > cap:
                    continue
                try:
                    val = objective_latency(model, LengthVector(combo))
                except ValueError:
                    continue
                if best is None or (val, combo) < best:
                    best = (val, combo)
            if tuple(lv.increments) != best[1] or abs(lam - best[0]) > 1e-9:
                fails.append(f"model{mi} m={m}: {lv.increments} vs {best[1]}")
    # measured 64-state k=16 model at 2 dB
    samples = estimate_retrans_grid(GENS64, AWGN2, EPS, 16, seed=0, min_triggers=100)
    model = fit_logpoly(samples, 16)
    lv, lam = optimize_lengths(model, 5, restarts=100, seed=0)
    ref = objective_latency(model, LengthVector((30, 3, 3, 5, 7)))
    ratio = lam / ref
    if ratio > 1.02:
        fails.append(f"k16 ratio {ratio:.4f} > 1.02")
    verdict(capsys, "A08", not fails,
            f"exhaustive match 3 models x m<=3; k16 objective {lam:.3f} vs "
            f"{ref:.3f} at {{30,3,3,5,7}} (ratio {ratio:.4f} <= 1.02); "
            f"violations: {fails or 'none'} in {time.time() - t0:.0f}s")


def test_a09_estimator_statistics(capsys):
    """Latency-estimate precision and binomial CI half-width identities."""
    rep = REPORTS.get("a04_bsc_headline")
    assert rep is not None, "headline campaign must run first (A04)"
    # sigma_lambda is the per-trial spread; the estimate's std error is /sqrt(S)
    rel_std = rep.sigma_lambda / math.sqrt(rep.S) / rep.lambda_hat
    p = 1e-3
    _, hi100 = confidence_interval(p, int(100 / p))
    _, hi25 = confidence_interval(p, int(25 / p))
    w100 = (hi100 - p) / p
    w25 = (hi25 - p) / p
    ok = rel_std < 0.01 and abs(w100 - 0.2) <= 0.01 and abs(w25 - 0.4) <= 0.01
    verdict(capsys, "A09", ok,
            f"lambda rel std {100 * rel_std:.3f}% < 1%; CI half-widths "
            f"{w100:.4f}~0.2 (100 errors), {w25:.4f}~0.4 (25 errors)")


def test_a10_determinism_across_workers(capsys, tmp_path):
    """Preset re-run with different worker counts: byte-identical CSV."""
    t0 = time.time()
    outs = []
    for workers in (1, 3):
        out = tmp_path / f"w{workers}"
        rc = cli.main(["simulate", "--preset", "fig7-estimator",
                       "--out-dir", str(out), "--seed", "12345",
                       "--max-trials", "3000", "--workers", str(workers)])
        assert rc == 0
        blobs = [(out / "results.csv").read_bytes()]
        blobs += [p.read_bytes() for p in sorted(out.glob("trace-*.csv"))]
        outs.append(blobs)
    ok = outs[0] == outs[1] and len(outs[0]) >= 2 and all(outs[0])
    verdict(capsys, "A10", ok,
            f"fig7-estimator 3000 trials, workers 1 vs 3: "
            f"{'identical' if ok else 'DIFFERENT'} results + trace CSVs "
            f"({sum(map(len, outs[0]))} bytes) in {time.time() - t0:.0f}s")


def test_a11_global_epsilon_soundness(capsys):
    """All reliability campaigns in this suite keep the 95% CI upper <= 1e-3.

    Campaigns with fewer than 25 errors are excluded: their binomial CI is
    not meaningfully Gaussian and each is already bounded by its own test.
    """
    rows = []
    ok = True
    for name, rep in sorted(REPORTS.items()):
        if rep.errors < 25:
            continue
        hi = rep.ci[1]
        rows.append(f"{name}: CI-hi={hi:.3e}")
        ok = ok and hi <= EPS
    assert rows, "no reliability campaigns were registered"
    verdict(capsys, "A11", ok, "; ".join(rows) + f" (all <= {EPS})")
