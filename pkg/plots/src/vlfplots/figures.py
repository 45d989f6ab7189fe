"""Figure rendering for variable-length feedback coding experiment outputs.

Reads only the documented CSV schemas produced by the ``vlfcc`` command line
(``results.csv``, ``bounds.csv``, ``trace-*.csv``) and renders static charts.
Output is deterministic: fixed styling, pinned SVG hash salt, no timestamps,
so re-rendering identical inputs yields byte-identical vector files.
"""
from __future__ import annotations

import csv
import glob
import math
import os
import warnings
from dataclasses import dataclass, field

import matplotlib
import numpy as np

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "vlfplots"

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

FIGURE_IDS = ("fig2", "fig3", "fig4", "fig5", "fig7", "fig8")

# one fixed palette slot per series key, assigned in sorted-key order
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
           "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#7f7f7f")
BOUND_STYLES = {
    "wald": {"color": "0.25", "linestyle": "--"},
    "vlf": {"color": "0.25", "linestyle": "-"},
    "repeat_after_n": {"color": "0.45", "linestyle": "-."},
    "m_transmission": {"color": "0.45", "linestyle": ":"},
}
_LN2 = math.log(2.0)


@dataclass(frozen=True)
class FigureSpec:
    """One renderable chart: a figure id plus concrete input file paths.

    ``inputs`` maps role names (``sim``, ``sim_m5``, ``bounds``,
    ``bounds_m5``, ``trace``) to CSV paths; the ``trace`` role holds a tuple
    of paths.  ``styles`` overrides per-series matplotlib keyword arguments,
    keyed by (states, mode, policy).
    """

    figure: str
    inputs: dict = field(default_factory=dict)
    xlim: tuple | None = None
    ylim: tuple | None = None
    styles: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.figure not in FIGURE_IDS:
            raise ValueError(f"unknown figure {self.figure!r}; "
                             f"expected one of {', '.join(FIGURE_IDS)}")
        for role in self.inputs:
            if role not in ("sim", "sim_m5", "bounds", "bounds_m5", "trace"):
                raise ValueError(f"unknown input role {role!r}")


def default_inputs(figure: str, in_dir: str) -> dict:
    """Conventional input paths for a figure inside one directory."""
    if figure in ("fig7", "fig8"):
        traces = tuple(sorted(glob.glob(os.path.join(in_dir, "trace-*.csv"))))
        return {"trace": traces}
    inputs = {"sim": os.path.join(in_dir, "results.csv")}
    if figure in ("fig2", "fig3"):
        inputs["bounds"] = os.path.join(in_dir, "bounds.csv")
    if figure == "fig3":
        inputs["sim_m5"] = os.path.join(in_dir, "results-m5.csv")
        inputs["bounds_m5"] = os.path.join(in_dir, "bounds-m5.csv")
    return inputs


def load_rows(path: str, required: tuple) -> list[dict]:
    """Read a CSV and check the header for the columns a renderer needs."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise ValueError(f"{path}: missing required column(s): "
                             + ", ".join(missing))
        return list(reader)


def _optional_rows(spec: FigureSpec, role: str, required: tuple) -> list[dict]:
    """Rows for an overlay role; a missing or empty file degrades to []."""
    path = spec.inputs.get(role)
    if not path:
        return []
    if not os.path.exists(path):
        warnings.warn(f"{spec.figure}: input {role!r} not found at {path}; "
                      "curve omitted", RuntimeWarning, stacklevel=3)
        return []
    rows = load_rows(path, required)
    if not rows:
        warnings.warn(f"{spec.figure}: input {role!r} at {path} has no rows; "
                      "curve omitted", RuntimeWarning, stacklevel=3)
    return rows


def capacity(kind: str, param: float) -> float:
    """Capacity in bits/use for the reference line (equiprobable inputs)."""
    if kind == "bsc":
        p = param
        if p in (0.0, 1.0):
            return 1.0
        return 1.0 + p * math.log2(p) + (1.0 - p) * math.log2(1.0 - p)
    if kind == "biawgn":
        eta = param
        nodes, weights = np.polynomial.hermite.hermgauss(128)
        z = math.sqrt(2.0) * nodes
        g = np.logaddexp(0.0, -2.0 * eta - 2.0 * math.sqrt(eta) * z) / _LN2
        return 1.0 - float(np.dot(weights, g)) / math.sqrt(math.pi)
    raise ValueError(f"unknown channel kind {kind!r}")


def _channel_of(rows: list[dict], path_hint: str) -> tuple[str, float]:
    pairs = {(r["channel"], float(r["param"])) for r in rows}
    if len(pairs) != 1:
        raise ValueError(f"{path_hint}: expected one (channel, param) pair, "
                         f"found {sorted(pairs)}")
    return next(iter(pairs))


def _series_key(row: dict) -> tuple:
    return (2 ** int(row["nu"]), row["mode"], row["policy"])


def _series_style(spec: FigureSpec, key: tuple, index: int) -> dict:
    style = {"color": PALETTE[index % len(PALETTE)], "marker": "o",
             "markersize": 4, "linewidth": 1.2}
    style.update(spec.styles.get(key, {}))
    return style


def _series_label(key: tuple, suffix: str = "") -> str:
    states, mode, policy = key
    mode_txt = "tail-biting" if mode == "tail_biting" else mode
    pol_txt = "" if policy == "reliability" else f", {policy}"
    return f"{states}-state {mode_txt}{pol_txt}{suffix}"


def _new_axes(spec: FigureSpec):
    fig, ax = plt.subplots(figsize=(6.4, 4.4), dpi=100)
    if spec.xlim is not None:
        ax.set_xlim(*spec.xlim)
    if spec.ylim is not None:
        ax.set_ylim(*spec.ylim)
    return fig, ax


def _plot_rate_vs_latency(spec: FigureSpec, ax, role: str, suffix: str,
                          start_index: int) -> tuple[int, tuple | None]:
    """Simulated throughput-vs-latency series from one results CSV."""
    rows = _optional_rows(spec, role, ("nu", "mode", "policy", "lambda", "Rt",
                                       "channel", "param", "k"))
    if not rows:
        return start_index, None
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(_series_key(row), []).append(row)
    idx = start_index
    for key in sorted(groups):
        pts = sorted(groups[key], key=lambda r: (float(r["lambda"])))
        x = [float(r["lambda"]) for r in pts]
        y = [float(r["Rt"]) for r in pts]
        ax.plot(x, y, label=_series_label(key, suffix),
                **_series_style(spec, key, idx))
        idx += 1
    return idx, _channel_of(rows, str(spec.inputs[role]))


def _plot_bounds(spec: FigureSpec, ax, role: str, suffix: str) -> tuple | None:
    rows = _optional_rows(spec, role, ("k", "ell", "rate", "method",
                                       "channel", "param"))
    if not rows:
        return None
    groups: dict[str, list[dict]] = {}
    for row in rows:
        groups.setdefault(row["method"], []).append(row)
    for method in sorted(groups):
        pts = sorted(groups[method], key=lambda r: float(r["ell"]))
        x = [float(r["ell"]) for r in pts]
        y = [float(r["rate"]) for r in pts]
        style = BOUND_STYLES.get(method, {"color": "0.25", "linestyle": "-"})
        ax.plot(x, y, label=f"{method.replace('_', '-')} bound{suffix}",
                linewidth=1.0, **style)
    return _channel_of(rows, str(spec.inputs[role]))


def _render_rate_latency(spec: FigureSpec, roles: tuple):
    """Shared body of the two rate-vs-latency charts."""
    fig, ax = _new_axes(spec)
    channels = []
    idx = 0
    for role, suffix in roles:
        if role.startswith("bounds"):
            ch = _plot_bounds(spec, ax, role, suffix)
        else:
            idx, ch = _plot_rate_vs_latency(spec, ax, role, suffix, idx)
        if ch is not None:
            channels.append(ch)
    if not channels:
        plt.close(fig)
        raise ValueError(f"{spec.figure}: no input data; checked "
                         + ", ".join(str(spec.inputs[r]) for r, _ in roles
                                     if spec.inputs.get(r)))
    if len(set(channels)) != 1:
        plt.close(fig)
        raise ValueError(f"{spec.figure}: inputs mix channels {channels}")
    kind, param = channels[0]
    ax.axhline(capacity(kind, param), color="0.6", linestyle=":",
               linewidth=1.0, label="capacity")
    ax.set_xlabel("average latency (channel uses)")
    ax.set_ylabel("throughput (bits/channel use)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, loc="lower right")
    return fig


def render_fig2(spec: FigureSpec):
    return _render_rate_latency(spec, (("sim", ""), ("bounds", "")))


def render_fig3(spec: FigureSpec):
    return _render_rate_latency(
        spec, (("sim", ""), ("sim_m5", ", m=5"),
               ("bounds", ""), ("bounds_m5", ", m=5")))


def render_fig4(spec: FigureSpec):
    """Throughput against SNR, one series per (states, epsilon)."""
    rows = _optional_rows(spec, "sim", ("nu", "mode", "policy", "epsilon",
                                        "channel", "param", "Rt"))
    if not rows:
        raise ValueError(f"{spec.figure}: no input data at "
                         f"{spec.inputs.get('sim')}")
    bad = {r["channel"] for r in rows} - {"biawgn"}
    if bad:
        raise ValueError(f"{spec.figure}: expected biawgn rows only, "
                         f"found channel {sorted(bad)}")
    fig, ax = _new_axes(spec)
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        key = (2 ** int(row["nu"]), float(row["epsilon"]))
        groups.setdefault(key, []).append(row)
    for idx, key in enumerate(sorted(groups)):
        pts = sorted(groups[key], key=lambda r: float(r["param"]))
        snr_db = [10.0 * math.log10(float(r["param"])) for r in pts]
        y = [float(r["Rt"]) for r in pts]
        states, eps = key
        style = _series_style(spec, key, idx)
        ax.plot(snr_db, y, label=f"{states}-state, eps={eps:g}", **style)
    lo = min(10.0 * math.log10(float(r["param"])) for r in rows)
    hi = max(10.0 * math.log10(float(r["param"])) for r in rows)
    grid = np.linspace(lo, hi, 41)
    cap = [capacity("biawgn", 10.0 ** (s / 10.0)) for s in grid]
    ax.plot(grid, cap, color="0.6", linestyle=":", linewidth=1.0,
            label="capacity")
    ax.set_xlabel("SNR (dB)")
    ax.set_ylabel("throughput (bits/channel use)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, loc="lower right")
    return fig


def render_fig5(spec: FigureSpec):
    """Stopping-rule failure probability at each cumulative decode length."""
    rows = _optional_rows(spec, "sim", ("label", "nu", "mode", "policy",
                                        "nack_probs", "decode_points"))
    if not rows:
        raise ValueError(f"{spec.figure}: no input data at "
                         f"{spec.inputs.get('sim')}")
    fig, ax = _new_axes(spec)
    for idx, row in enumerate(rows):
        points = [int(v) for v in row["decode_points"].split(";")]
        probs = [float(v) for v in row["nack_probs"].split(";")]
        if len(points) != len(probs):
            raise ValueError(f"{spec.inputs['sim']}: row {row['label']!r} has "
                             f"{len(points)} decode_points but "
                             f"{len(probs)} nack_probs")
        key = _series_key(row)
        style = _series_style(spec, key, idx)
        ax.plot(points, probs, label=_series_label(key), **style)
    ax.set_yscale("log")
    ax.set_xlabel("cumulative blocklength (channel uses)")
    ax.set_ylabel("NACK probability")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7, loc="upper right")
    return fig


def _trace_series(spec: FigureSpec, required: tuple) -> list[tuple]:
    paths = spec.inputs.get("trace") or ()
    series = []
    for path in paths:
        if not os.path.exists(path):
            warnings.warn(f"{spec.figure}: trace file not found at {path}; "
                          "curve omitted", RuntimeWarning, stacklevel=3)
            continue
        rows = load_rows(path, required)
        if not rows:
            warnings.warn(f"{spec.figure}: trace at {path} has no rows; "
                          "curve omitted", RuntimeWarning, stacklevel=3)
            continue
        name = os.path.basename(path)
        name = name[len("trace-"):] if name.startswith("trace-") else name
        series.append((name.removesuffix(".csv"), rows))
    if not series:
        raise ValueError(f"{spec.figure}: no trace rows found in "
                         + (", ".join(paths) or "(no trace inputs)"))
    return series


def render_fig7(spec: FigureSpec):
    """Running latency estimate against simulated trials, with a 1-sigma band."""
    fig, ax = _new_axes(spec)
    for idx, (name, rows) in enumerate(_trace_series(
            spec, ("S", "lambda", "sigma_lambda"))):
        s = np.array([float(r["S"]) for r in rows])
        lam = np.array([float(r["lambda"]) for r in rows])
        sig = np.array([float(r["sigma_lambda"]) for r in rows])
        color = PALETTE[idx % len(PALETTE)]
        ax.fill_between(s, lam - sig, lam + sig, color=color, alpha=0.2,
                        linewidth=0)
        ax.plot(s, lam, color=color, linewidth=1.2, label=name)
    ax.set_xlabel("simulated trials")
    ax.set_ylabel("latency estimate (channel uses)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=7, loc="upper right")
    return fig


def render_fig8(spec: FigureSpec):
    """Running undetected-error-rate estimate against simulated trials."""
    fig, ax = _new_axes(spec)
    for idx, (name, rows) in enumerate(_trace_series(spec, ("S", "Pue"))):
        s = np.array([float(r["S"]) for r in rows])
        pue = np.array([float(r["Pue"]) for r in rows])
        color = PALETTE[idx % len(PALETTE)]
        ax.plot(s, np.maximum(pue, 1e-12), color=color, linewidth=1.2,
                label=name)
    ax.set_yscale("log")
    ax.set_xlabel("simulated trials")
    ax.set_ylabel("undetected-error rate estimate")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7, loc="upper right")
    return fig


RENDERERS = {
    "fig2": render_fig2,
    "fig3": render_fig3,
    "fig4": render_fig4,
    "fig5": render_fig5,
    "fig7": render_fig7,
    "fig8": render_fig8,
}


def render(spec: FigureSpec, out_dir: str,
           formats: tuple = ("svg", "png")) -> list[str]:
    """Render one figure to ``out_dir``; returns the written paths."""
    for ext in formats:
        if ext not in ("svg", "png"):
            raise ValueError(f"unsupported format {ext!r}")
    fig = RENDERERS[spec.figure](spec)
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for ext in formats:
        path = os.path.join(out_dir, f"{spec.figure}.{ext}")
        if ext == "svg":
            fig.savefig(path, format="svg", metadata={"Date": None})
        else:
            fig.savefig(path, format="png")
        paths.append(path)
    plt.close(fig)
    return paths
