"""Retransmission-curve fitting and incremental-length optimization."""
from __future__ import annotations

import itertools

import numpy as np
import pytest

from vlfcc.lenopt import (
    GridSample,
    InfeasibleLengths,
    LengthVector,
    RetransmissionModel,
    fit_logpoly,
    load_model,
    objective_latency,
    optimize_lengths,
    save_model,
)


def synthetic_model(k=16, n_max=60, rate=0.25, floor=0.0):
    """Exponentially decaying retransmission curve pinned to 1 below k."""
    curve = np.ones(n_max, dtype=np.float64)
    for n in range(k, n_max + 1):
        curve[n - 1] = max(floor, np.exp(-rate * (n - k + 1)))
    curve = np.minimum.accumulate(curve)
    return RetransmissionModel(
        k=k, n_max=n_max, samples=(), curve=curve, degree=0,
        coeffs=(), residuals=(), outliers=(), degenerate=False,
    )


def brute_force_optimum(model, m, cap):
    best = None
    # first increment carries the rest of the feasibility burden
    for combo in itertools.product(range(1, cap + 1), repeat=m):
        if sum(combo) > cap:
            continue
        lv = LengthVector(combo)
        try:
            lam = objective_latency(model, lv)
        except ValueError:
            continue
        key = (lam, combo)
        if best is None or key < best:
            best = key
    return best


def test_length_vector_validation():
    lv = LengthVector((30, 3, 3, 5, 7))
    assert lv.m == 5
    assert lv.total == 48
    assert lv.cumulative == (30, 33, 36, 41, 48)
    with pytest.raises(ValueError):
        LengthVector(())
    with pytest.raises(ValueError):
        LengthVector((10, 0, 5))


def test_objective_latency_hand_value():
    model = synthetic_model(k=8, n_max=40, rate=0.5)
    lv = LengthVector((12, 6))
    p1 = model.p_retrans(12)
    p2 = model.p_retrans(18)
    want = (12 + 6 * p1) / (1 - p2)
    assert objective_latency(model, lv) == pytest.approx(want, rel=1e-12)


def test_objective_rejects_certain_retransmission():
    model = synthetic_model(k=8, n_max=40, rate=0.5)
    with pytest.raises(ValueError):
        objective_latency(model, LengthVector((4, 2)))  # still in the p=1 zone


@pytest.mark.parametrize("m", [1, 2, 3])
def test_optimizer_matches_exhaustive_search(m):
    model = synthetic_model(k=10, n_max=45, rate=0.35)
    cap = 45
    lv, lam = optimize_lengths(model, m, restarts=40, seed=1, cap=cap)
    want_lam, want_combo = brute_force_optimum(model, m, cap)
    assert tuple(lv.increments) == want_combo
    assert lam == pytest.approx(want_lam, rel=1e-12)


def test_optimizer_deterministic():
    model = synthetic_model(k=12, n_max=50, rate=0.3)
    a = optimize_lengths(model, 3, restarts=25, seed=7)
    b = optimize_lengths(model, 3, restarts=25, seed=7)
    assert a == b


def test_optimizer_infeasible_when_cap_too_small():
    model = synthetic_model(k=20, n_max=80, rate=0.2)
    with pytest.raises(InfeasibleLengths):
        optimize_lengths(model, 2, restarts=5, seed=0, cap=10)


def test_optimizer_final_constraint():
    model = synthetic_model(k=10, n_max=60, rate=0.25)
    target = 1e-3
    lv, lam = optimize_lengths(model, 3, restarts=30, seed=2,
                               require_final_below=target)
    assert model.p_retrans(lv.total) < target
    with pytest.raises(InfeasibleLengths):
        optimize_lengths(model, 2, restarts=5, seed=0, cap=20,
                         require_final_below=1e-12)


def test_fit_logpoly_recovers_exponential_curve():
    # Samples drawn exactly from log p = a - b n are fit exactly by degree 1.
    k, n_max = 12, 48
    a, b = 3.0, 0.35
    samples = tuple(
        GridSample(n_sim=n, p_hat=float(np.exp(a - b * n)), stderr=1e-6,
                   triggers=200, trials=10_000)
        for n in range(k, n_max + 1, 4)
    )
    model = fit_logpoly(samples, k, degree=1, n_max=n_max)
    assert not model.degenerate
    for n in range(k + 2, n_max + 1):
        want = min(1.0, float(np.exp(a - b * n)))
        assert model.p_retrans(n) == pytest.approx(want, rel=1e-6)
    assert model.outliers == ()


def test_fit_logpoly_flags_outliers():
    k, n_max = 12, 48
    a, b = 2.0, 0.3
    pts = []
    for i, n in enumerate(range(k, n_max + 1, 3)):
        p = float(np.exp(a - b * n))
        if i == 5:
            p *= 1e3  # gross outlier
        pts.append(GridSample(n_sim=n, p_hat=p, stderr=1e-6, triggers=100, trials=1000))
    model = fit_logpoly(tuple(pts), k, degree=1, n_max=n_max)
    assert 5 in model.outliers


def test_fit_logpoly_degenerate_all_zero():
    k = 8
    pts = tuple(GridSample(n_sim=n, p_hat=0.0, stderr=0.0, triggers=0, trials=1000)
                for n in range(k, 25, 2))
    model = fit_logpoly(pts, k, degree=3, n_max=24)
    assert model.degenerate
    assert model.p_retrans(24) == 0.0


def test_model_save_load_round_trip(tmp_path):
    model = synthetic_model()
    path = str(tmp_path / "model.json")
    save_model(path, model, fingerprint={"tag": 1})
    back = load_model(path, fingerprint={"tag": 1})
    assert back is not None
    assert back.k == model.k
    np.testing.assert_allclose(back.curve, model.curve, rtol=1e-15)
    assert load_model(path, fingerprint={"tag": 2}) is None
    assert load_model(str(tmp_path / "missing.json"), fingerprint={"tag": 1}) is None


def test_model_validation():
    with pytest.raises(ValueError):
        RetransmissionModel(k=4, n_max=3, samples=(),
                            curve=np.array([0.5, 0.7, 0.9]),
                            degree=0, coeffs=(), residuals=(), outliers=(),
                            degenerate=False)  # increasing curve
