"""Command-line experiment orchestration.

Subcommands: simulate (protocol campaigns), bounds (achievability curves),
optimize (transmission-length selection).  Experiments come from a JSON
config file or a named preset; outputs are UTF-8 CSV with a fixed column
order plus a JSON mirror, every row carrying the master seed and a hash of
the resolved config.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import os
import sys

import numpy as np

from . import bounds as bounds_mod
from . import lenopt
from .channel import ChannelSpec, biawgn_db, bsc, channel_to_json
from .crc import CrcPoly
from .trellis import REFERENCE_CODES, TAIL_BITING, TERMINATED, GeneratorSet
from .vlfsim import (
    DECLARE_ERROR,
    REPEAT_FOREVER,
    CampaignConfig,
    EstimatorReport,
    StoppingPolicy,
    run_campaign,
)

__all__ = ["main", "ConfigError", "SIMULATE_PRESETS", "BOUNDS_PRESETS", "OPTIMIZE_PRESETS"]

logger = logging.getLogger(__name__)

DEFAULT_SEED = 12345
DEFAULT_MIN_ERRORS = 25
DEFAULT_MAX_TRIALS = 200_000

SIM_COLUMNS = [
    "label", "k", "nu", "mode", "policy", "epsilon", "crc", "channel", "param",
    "S", "errors", "declared_errors", "lambda", "lambda_stddev", "Rt",
    "Pue", "Pue_ci_lo", "Pue_ci_hi", "nack_probs", "decode_points",
    "blocks_started", "partial", "schedule_seed", "seed", "config_hash",
]
BOUND_COLUMNS = [
    "k", "ell", "rate", "gamma", "method", "stderr", "n_walks",
    "channel", "param", "epsilon", "seed", "config_hash",
]
TRACE_COLUMNS = ["S", "errors", "Pue", "lambda", "sigma_lambda"]


class ConfigError(ValueError):
    """Invalid experiment config; the message names the offending field."""


# ---------------------------------------------------------------- parsing

def _expect_keys(d: dict, path: str, required: tuple, optional: tuple = ()) -> None:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    unknown = sorted(set(d) - set(required) - set(optional))
    if unknown:
        raise ConfigError(f"{path}: unknown keys {unknown}")
    missing = sorted(set(required) - set(d))
    if missing:
        raise ConfigError(f"{path}: missing keys {missing}")


def _parse_code(d, path: str) -> GeneratorSet:
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: expected an object")
    if "states" in d:
        _expect_keys(d, path, ("states",))
        if d["states"] not in REFERENCE_CODES:
            raise ConfigError(f"{path}.states: no built-in code with {d['states']} states")
        return REFERENCE_CODES[d["states"]].gens
    _expect_keys(d, path, ("nu", "polys"))
    polys = d["polys"]
    if not (isinstance(polys, list) and len(polys) == 3):
        raise ConfigError(f"{path}.polys: expected three octal generator strings")
    try:
        return GeneratorSet.from_octal(int(d["nu"]), tuple(str(p) for p in polys))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_channel(d, path: str) -> ChannelSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{path}: expected an object with a 'kind' key")
    try:
        if d["kind"] == "bsc":
            _expect_keys(d, path, ("kind", "p"))
            return bsc(float(d["p"]))
        if d["kind"] == "biawgn":
            _expect_keys(d, path, ("kind",), ("snr_db", "snr"))
            if ("snr_db" in d) == ("snr" in d):
                raise ConfigError(f"{path}: give exactly one of snr_db or snr")
            if "snr_db" in d:
                return biawgn_db(float(d["snr_db"]))
            return ChannelSpec("biawgn", float(d["snr"]))
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown channel {d['kind']!r}")


def _parse_policy(d, path: str, on_final_nack: str) -> StoppingPolicy:
    if not isinstance(d, dict) or "kind" not in d:
        raise ConfigError(f"{path}: expected an object with a 'kind' key")
    try:
        if d["kind"] == "reliability":
            _expect_keys(d, path, ("kind", "epsilon"))
            return StoppingPolicy.reliability(float(d["epsilon"]), on_final_nack)
        if d["kind"] == "crc":
            _expect_keys(d, path, ("kind", "koopman"))
            return StoppingPolicy.crc_check(CrcPoly.from_koopman_hex(d["koopman"]), on_final_nack)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    raise ConfigError(f"{path}.kind: unknown policy {d['kind']!r}")


def _parse_lengths(v, path: str) -> tuple[int, ...] | None:
    if v is None or v == "every_symbol":
        return None
    if isinstance(v, list) and v and all(isinstance(i, int) and i >= 1 for i in v):
        return tuple(v)
    raise ConfigError(f"{path}: expected 'every_symbol' or a list of positive increments")


RUN_KEYS_REQ = ("label", "code", "k", "channel", "policy")
RUN_KEYS_OPT = ("mode", "lengths", "on_final_nack", "schedule_seed",
                "min_errors", "max_trials", "trace")


def _parse_run(d, path: str) -> dict:
    _expect_keys(d, path, RUN_KEYS_REQ, RUN_KEYS_OPT)
    mode = d.get("mode", TAIL_BITING)
    if mode not in (TERMINATED, TAIL_BITING):
        raise ConfigError(f"{path}.mode: unknown mode {mode!r}")
    nack = d.get("on_final_nack", REPEAT_FOREVER)
    if nack not in (REPEAT_FOREVER, DECLARE_ERROR):
        raise ConfigError(f"{path}.on_final_nack: unknown value {nack!r}")
    if not (isinstance(d["k"], int) and d["k"] >= 1):
        raise ConfigError(f"{path}.k: expected a positive integer")
    lengths = _parse_lengths(d.get("lengths"), f"{path}.lengths")
    config = CampaignConfig(
        gens=_parse_code(d["code"], f"{path}.code"),
        mode=mode,
        k=d["k"],
        channel=_parse_channel(d["channel"], f"{path}.channel"),
        policy=_parse_policy(d["policy"], f"{path}.policy", nack),
        decode_points=None if lengths is None else tuple(np.cumsum(lengths).tolist()),
        schedule_seed=int(d.get("schedule_seed", DEFAULT_SEED)),
    )
    try:
        config.schedule()  # cross-field validation: lengths vs mother length
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return {
        "label": str(d["label"]),
        "config": config,
        "min_errors": d.get("min_errors"),
        "max_trials": d.get("max_trials"),
        "trace": bool(d.get("trace", False)),
    }


def parse_simulate_config(doc) -> list[dict]:
    _expect_keys(doc, "<config>", ("runs",))
    runs = doc["runs"]
    if not (isinstance(runs, list) and runs):
        raise ConfigError("runs: expected a non-empty list")
    parsed = [_parse_run(r, f"runs[{i}]") for i, r in enumerate(runs)]
    labels = [r["label"] for r in parsed]
    if len(set(labels)) != len(labels):
        raise ConfigError("runs: labels must be unique")
    return parsed


BOUND_METHODS = ("wald", "vlf", "repeat_after_n", "m_transmission")


def parse_bounds_config(doc) -> dict:
    _expect_keys(doc, "<config>", ("channel", "epsilon", "k_values", "methods"),
                 ("n_walks", "repeat_n_factor", "m5_lengths"))
    spec = _parse_channel(doc["channel"], "channel")
    eps = float(doc["epsilon"])
    ks = doc["k_values"]
    if not (isinstance(ks, list) and ks and all(isinstance(k, int) and k >= 1 for k in ks)):
        raise ConfigError("k_values: expected a non-empty list of positive integers")
    methods = doc["methods"]
    bad = [m for m in methods if m not in BOUND_METHODS]
    if bad:
        raise ConfigError(f"methods: unknown {bad}; valid: {list(BOUND_METHODS)}")
    m5 = {}
    for key, val in (doc.get("m5_lengths") or {}).items():
        m5[int(key)] = _parse_lengths(val, f"m5_lengths[{key}]")
    if "m_transmission" in methods:
        missing = [k for k in ks if k not in m5]
        if missing:
            raise ConfigError(f"m5_lengths: required for every k when using "
                              f"m_transmission; missing {missing}")
    return {
        "spec": spec,
        "epsilon": eps,
        "k_values": ks,
        "methods": list(methods),
        "n_walks": int(doc.get("n_walks", bounds_mod.DEFAULT_WALKS)),
        "repeat_n_factor": int(doc.get("repeat_n_factor", 3)),
        "m5_lengths": m5,
    }


def parse_optimize_config(doc) -> dict:
    _expect_keys(doc, "<config>", ("k", "epsilon", "m"),
                 ("code", "mode", "channel", "restarts", "cap", "require_final_below",
                  "schedule_seed", "min_triggers", "max_trials_per_point", "cache",
                  "degree", "synthetic_curve"))
    out = {
        "k": int(doc["k"]),
        "epsilon": float(doc["epsilon"]),
        "m": int(doc["m"]),
        "restarts": int(doc.get("restarts", 100)),
        "cap": None if doc.get("cap") is None else int(doc["cap"]),
        "require_final_below": (None if doc.get("require_final_below") is None
                                else float(doc["require_final_below"])),
        "schedule_seed": int(doc.get("schedule_seed", DEFAULT_SEED)),
        "min_triggers": int(doc.get("min_triggers", lenopt.DEFAULT_MIN_TRIGGERS)),
        "max_trials_per_point": int(doc.get("max_trials_per_point", 500_000)),
        "cache": doc.get("cache"),
        "degree": int(doc.get("degree", 3)),
    }
    if "synthetic_curve" in doc:
        curve = doc["synthetic_curve"]
        if not (isinstance(curve, list) and curve):
            raise ConfigError("synthetic_curve: expected a non-empty list of probabilities")
        out["synthetic_curve"] = [float(x) for x in curve]
        if "code" in doc or "channel" in doc:
            raise ConfigError("synthetic_curve replaces code/channel estimation; "
                              "remove the code and channel keys")
    else:
        for key in ("code", "channel"):
            if key not in doc:
                raise ConfigError(f"{key}: required unless synthetic_curve is given")
        out["gens"] = _parse_code(doc["code"], "code")
        out["mode"] = doc.get("mode", TAIL_BITING)
        out["spec"] = _parse_channel(doc["channel"], "channel")
    return out


# ---------------------------------------------------------------- presets

TABLE3_LENGTHS_64 = {
    16: (30, 3, 3, 5, 7), 32: (57, 6, 7, 9, 16), 48: (88, 9, 10, 13, 24),
    64: (121, 12, 13, 17, 29), 91: (178, 17, 18, 22, 38), 128: (261, 23, 24, 30, 46),
}
TABLE3_LENGTHS_1024 = {
    16: (29, 4, 4, 4, 7), 32: (56, 5, 5, 7, 12), 48: (80, 7, 7, 9, 16),
    64: (106, 9, 9, 12, 22), 91: (151, 13, 14, 17, 31), 128: (223, 17, 18, 24, 44),
}
HEURISTIC_K64 = (96, 16, 16, 16, 48)

_RELIABILITY = {"kind": "reliability", "epsilon": 1e-3}


def _every_symbol_runs(channel: dict) -> list[dict]:
    runs = []
    for states in (64, 256, 1024):
        for k in (8, 16, 24, 32, 48, 64, 91):
            runs.append({
                "label": f"term{states}-k{k}",
                "code": {"states": states}, "mode": TERMINATED, "k": k,
                "channel": channel, "policy": dict(_RELIABILITY),
            })
    for k in (8, 14, 16, 24, 32, 48, 64, 91):
        runs.append({
            "label": f"tbcc64-k{k}",
            "code": {"states": 64}, "mode": TAIL_BITING, "k": k,
            "channel": channel, "policy": dict(_RELIABILITY),
        })
    return runs


def _m5_runs(channel: dict) -> list[dict]:
    runs = []
    for states, table in ((64, TABLE3_LENGTHS_64), (1024, TABLE3_LENGTHS_1024)):
        for k, lengths in table.items():
            runs.append({
                "label": f"tbcc{states}-k{k}-m5",
                "code": {"states": states}, "mode": TAIL_BITING, "k": k,
                "channel": channel, "policy": dict(_RELIABILITY),
                "lengths": list(lengths),
            })
    return runs


def _preset_fig4() -> dict:
    runs = []
    for states in (64, 1024):
        for eps in (1e-3, 1e-4):
            for snr_db in (0.0, 1.0, 2.0, 3.0, 4.0, 5.0):
                runs.append({
                    "label": f"tbcc{states}-eps{eps:g}-snr{snr_db:g}",
                    "code": {"states": states}, "mode": TAIL_BITING, "k": 64,
                    "channel": {"kind": "biawgn", "snr_db": snr_db},
                    "policy": {"kind": "reliability", "epsilon": eps},
                    "lengths": list(HEURISTIC_K64),
                })
    return {"runs": runs}


def _preset_fig5() -> dict:
    return {"runs": [
        {"label": "tbcc64-k64-m5", "code": {"states": 64}, "mode": TAIL_BITING,
         "k": 64, "channel": {"kind": "biawgn", "snr_db": 2.0},
         "policy": dict(_RELIABILITY), "lengths": list(TABLE3_LENGTHS_64[64])},
        {"label": "tbcc1024-k64-m5", "code": {"states": 1024}, "mode": TAIL_BITING,
         "k": 64, "channel": {"kind": "biawgn", "snr_db": 2.0},
         "policy": dict(_RELIABILITY), "lengths": list(TABLE3_LENGTHS_1024[64])},
    ]}


def _preset_table4() -> dict:
    runs = []
    for koopman, width, inputs in (
        ("0x8810", 16, (24, 30, 34, 40, 48, 64, 91, 128, 181)),
        ("0xc07", 12, (24, 34, 48, 64, 91, 128, 181)),
    ):
        for ka in inputs:
            runs.append({
                "label": f"crc{width}-ka{ka}",
                "code": {"states": 64}, "mode": TAIL_BITING, "k": ka - width,
                "channel": {"kind": "biawgn", "snr_db": 2.0},
                "policy": {"kind": "crc", "koopman": koopman},
            })
    return {"runs": runs}


def _preset_fig7() -> dict:
    return {"runs": [{
        "label": "tbcc64-k24-trace",
        "code": {"states": 64}, "mode": TAIL_BITING, "k": 24,
        "channel": {"kind": "bsc", "p": 0.05}, "policy": dict(_RELIABILITY),
        "trace": True, "min_errors": 100,
    }]}


SIMULATE_PRESETS = {
    "fig2-bsc": lambda: {"runs": _every_symbol_runs({"kind": "bsc", "p": 0.05})},
    "fig3-awgn-mN": lambda: {"runs": _every_symbol_runs({"kind": "biawgn", "snr_db": 2.0})},
    "fig3-awgn-m5": lambda: {"runs": _m5_runs({"kind": "biawgn", "snr_db": 2.0})},
    "table3": lambda: {"runs": _m5_runs({"kind": "biawgn", "snr_db": 2.0})},
    "fig4-snr-sweep": _preset_fig4,
    "fig5-nack": _preset_fig5,
    "table4-crc": _preset_table4,
    "fig7-estimator": _preset_fig7,
}

BOUNDS_PRESETS = {
    "fig2-bsc": lambda: {
        "channel": {"kind": "bsc", "p": 0.05}, "epsilon": 1e-3,
        "k_values": [2, 4, 8, 12, 16, 24, 32, 48, 64, 91, 128],
        "methods": ["wald", "vlf", "repeat_after_n"],
    },
    "fig3-awgn": lambda: {
        "channel": {"kind": "biawgn", "snr_db": 2.0}, "epsilon": 1e-3,
        "k_values": [2, 4, 8, 12, 16, 24, 32, 48, 64, 91, 128],
        "methods": ["wald", "vlf", "repeat_after_n"],
    },
    "fig3-awgn-m5": lambda: {
        "channel": {"kind": "biawgn", "snr_db": 2.0}, "epsilon": 1e-3,
        "k_values": sorted(TABLE3_LENGTHS_64),
        "methods": ["m_transmission"],
        "m5_lengths": {str(k): list(v) for k, v in TABLE3_LENGTHS_64.items()},
    },
}

OPTIMIZE_PRESETS = {
    "table3-64state-k16": lambda: {
        "code": {"states": 64}, "k": 16,
        "channel": {"kind": "biawgn", "snr_db": 2.0},
        "epsilon": 1e-3, "m": 5, "restarts": 100, "cache": "model-64state-k16.json",
    },
    "cap180-64state-k64": lambda: {
        "code": {"states": 64}, "k": 64,
        "channel": {"kind": "biawgn", "snr_db": 2.0},
        "epsilon": 1e-3, "m": 5, "restarts": 100, "cap": 180,
        "require_final_below": 1e-3, "cache": "model-64state-k64.json",
    },
    "synthetic-demo": lambda: {
        "k": 12, "epsilon": 1e-3, "m": 2, "restarts": 20,
        "synthetic_curve": [min(1.0, float(np.exp(2.0 - 0.35 * n))) for n in range(1, 37)],
    },
}


# ---------------------------------------------------------------- output

def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _join_floats(vals) -> str:
    return ";".join(repr(float(v)) for v in vals)


def config_hash(doc) -> str:
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()[:12]


def _report_row(label: str, report: EstimatorReport, config: CampaignConfig,
                chash: str) -> dict:
    pol = config.policy
    return {
        "label": label,
        "k": config.k,
        "nu": config.gens.nu,
        "mode": config.mode,
        "policy": pol.kind,
        "epsilon": "" if pol.epsilon is None else repr(pol.epsilon),
        "crc": "" if pol.crc is None else hex(pol.crc.koopman),
        "channel": config.channel.kind,
        "param": repr(config.channel.param),
        "S": report.S,
        "errors": report.errors,
        "declared_errors": report.declared_errors,
        "lambda": repr(report.lambda_hat),
        "lambda_stddev": repr(report.sigma_lambda),
        "Rt": repr(report.Rt_hat),
        "Pue": repr(report.Pue_hat),
        "Pue_ci_lo": repr(report.ci[0]),
        "Pue_ci_hi": repr(report.ci[1]),
        "nack_probs": _join_floats(report.nack_prob),
        "decode_points": ";".join(str(i) for i in report.decode_points),
        "blocks_started": report.blocks_started,
        "partial": int(report.partial),
        "schedule_seed": report.schedule_seed,
        "seed": report.master_seed,
        "config_hash": chash,
    }


def _write_csv(path: str, columns: list[str], rows: list[dict]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for row in rows:
            w.writerow({c: _fmt(row[c]) for c in columns})


def _write_json(path: str, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------- commands

def cmd_simulate(doc: dict, args) -> int:
    runs = parse_simulate_config(doc)
    chash = config_hash(doc)
    os.makedirs(args.out_dir, exist_ok=True)
    ckpt_dir = os.path.join(args.out_dir, "checkpoints")
    os.makedirs(ckpt_dir, exist_ok=True)
    rows = []
    for i, run in enumerate(runs):
        label = run["label"]
        min_errors = args.min_errors or run["min_errors"] or DEFAULT_MIN_ERRORS
        max_trials = args.max_trials or run["max_trials"] or DEFAULT_MAX_TRIALS
        logger.info("run %d/%d %s: min_errors=%d max_trials=%d",
                    i + 1, len(runs), label, min_errors, max_trials)
        report = run_campaign(
            run["config"],
            master_seed=args.seed,
            min_errors=min_errors,
            max_trials=max_trials,
            workers=args.workers,
            checkpoint_path=os.path.join(ckpt_dir, f"{label}-{chash}.json"),
            keep_trace=run["trace"],
        )
        rows.append(_report_row(label, report, run["config"], chash))
        if run["trace"]:
            _write_csv(os.path.join(args.out_dir, f"trace-{label}.csv"),
                       TRACE_COLUMNS, list(report.trace))
    _write_csv(os.path.join(args.out_dir, "results.csv"), SIM_COLUMNS, rows)
    _write_json(os.path.join(args.out_dir, "results.json"),
                {"config_hash": chash, "seed": args.seed, "rows": rows})
    print(f"wrote {len(rows)} rows to {os.path.join(args.out_dir, 'results.csv')}")
    return 0


def cmd_bounds(doc: dict, args) -> int:
    cfg = parse_bounds_config(doc)
    chash = config_hash(doc)
    os.makedirs(args.out_dir, exist_ok=True)
    spec, eps = cfg["spec"], cfg["epsilon"]
    rows = []
    for k in cfg["k_values"]:
        for method in cfg["methods"]:
            seed = (args.seed, k, BOUND_METHODS.index(method))
            if method == "wald":
                pt = bounds_mod.wald_bound(spec, k, eps)
            elif method == "vlf":
                pt = bounds_mod.vlf_achievability(spec, k, eps,
                                                  n_walks=cfg["n_walks"], seed=seed)
            elif method == "repeat_after_n":
                pt = bounds_mod.repeat_after_n_bound(spec, k, eps, cfg["repeat_n_factor"] * k,
                                                     n_walks=cfg["n_walks"], seed=seed)
            else:
                pt = bounds_mod.m_transmission_bound(spec, k, eps, cfg["m5_lengths"][k],
                                                     n_walks=cfg["n_walks"], seed=seed)
            rows.append({
                "k": k, "ell": repr(pt.ell), "rate": repr(pt.rate),
                "gamma": repr(pt.gamma), "method": pt.method, "stderr": repr(pt.stderr),
                "n_walks": pt.n_walks, "channel": spec.kind, "param": repr(spec.param),
                "epsilon": repr(eps), "seed": args.seed, "config_hash": chash,
            })
            logger.info("bound %s k=%d: ell=%.3f rate=%.4f", method, k, pt.ell, pt.rate)
    _write_csv(os.path.join(args.out_dir, "bounds.csv"), BOUND_COLUMNS, rows)
    _write_json(os.path.join(args.out_dir, "bounds.json"),
                {"config_hash": chash, "seed": args.seed, "rows": rows})
    print(f"wrote {len(rows)} rows to {os.path.join(args.out_dir, 'bounds.csv')}")
    return 0


def cmd_optimize(doc: dict, args) -> int:
    cfg = parse_optimize_config(doc)
    chash = config_hash(doc)
    os.makedirs(args.out_dir, exist_ok=True)
    k = cfg["k"]
    if "synthetic_curve" in cfg:
        curve = np.clip(np.asarray(cfg["synthetic_curve"], dtype=np.float64), 0.0, 1.0)
        curve = np.minimum.accumulate(curve)
        model = lenopt.RetransmissionModel(k, curve.size, (), curve, 0, (), (), ())
    else:
        fp = lenopt.grid_fingerprint(cfg["gens"], cfg["spec"], cfg["epsilon"], k,
                                     mode=cfg["mode"], schedule_seed=cfg["schedule_seed"],
                                     min_triggers=cfg["min_triggers"], seed=args.seed)
        cache_path = (os.path.join(args.out_dir, cfg["cache"]) if cfg["cache"] else None)
        model = lenopt.load_model(cache_path, fp) if cache_path else None
        if model is None:
            samples = lenopt.estimate_retrans_grid(
                cfg["gens"], cfg["spec"], cfg["epsilon"], k,
                mode=cfg["mode"], schedule_seed=cfg["schedule_seed"],
                min_triggers=cfg["min_triggers"],
                max_trials_per_point=cfg["max_trials_per_point"], seed=args.seed)
            model = lenopt.fit_logpoly(samples, k, degree=cfg["degree"])
            if cache_path:
                lenopt.save_model(cache_path, model, fp)
        else:
            logger.info("loaded cached retransmission model from %s", cache_path)
    out_path = os.path.join(args.out_dir, "optimize.json")
    try:
        lv, lam = lenopt.optimize_lengths(
            model, cfg["m"], restarts=cfg["restarts"], seed=args.seed,
            cap=cfg["cap"], require_final_below=cfg["require_final_below"])
    except lenopt.InfeasibleLengths as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        _write_json(out_path, {"feasible": False, "reason": str(exc),
                               "k": k, "m": cfg["m"], "cap": cfg["cap"],
                               "seed": args.seed, "config_hash": chash})
        return 0
    payload = {
        "feasible": True,
        "k": k, "m": cfg["m"],
        "increments": list(lv.increments),
        "cumulative": list(lv.cumulative),
        "latency": lam,
        "throughput_at_target": k / lam,
        "model": lenopt.model_to_jsonable(model),
        "seed": args.seed, "config_hash": chash,
    }
    _write_json(out_path, payload)
    print(f"optimal increments {list(lv.increments)} with predicted latency {lam:.3f}")
    return 0


# ---------------------------------------------------------------- driver

def _load_doc(args, presets: dict) -> dict:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("give exactly one of --config or --preset")
    if args.preset is not None:
        if args.preset not in presets:
            raise ConfigError(f"unknown preset {args.preset!r}; "
                              f"available: {sorted(presets)}")
        return presets[args.preset]()
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {args.config}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlfcc",
        description="Variable-length feedback coding experiments with "
                    "punctured convolutional codes.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("simulate", "run decision-feedback protocol campaigns"),
        ("bounds", "compute random-coding achievability bounds"),
        ("optimize", "select m-transmission lengths"),
    ):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON experiment config")
        p.add_argument("--preset", help="named built-in experiment")
        p.add_argument("--seed", type=int, default=DEFAULT_SEED,
                       help="master seed (default %(default)s)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes for campaigns (default 1)")
        p.add_argument("--min-errors", type=int, default=None,
                       help="override per-run undetected-error stop rule")
        p.add_argument("--max-trials", type=int, default=None,
                       help="override per-run trial cap")
        p.add_argument("--out-dir", default="out", help="output directory")
        p.add_argument("--verbose", action="store_true", help="log progress to stderr")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    presets = {"simulate": SIMULATE_PRESETS, "bounds": BOUNDS_PRESETS,
               "optimize": OPTIMIZE_PRESETS}[args.command]
    handler = {"simulate": cmd_simulate, "bounds": cmd_bounds,
               "optimize": cmd_optimize}[args.command]
    try:
        doc = _load_doc(args, presets)
        return handler(doc, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
