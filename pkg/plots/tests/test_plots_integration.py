"""End-to-end: render charts from CSV produced by the actual vlfcc CLI."""
import json

import pytest

vlfcc_cli = pytest.importorskip("vlfcc.cli",
                                reason="primary package not installed")

from vlfplots import FigureSpec, default_inputs, render  # noqa: E402

CONFIG = {"runs": [
    {"label": "tiny-k12", "k": 12, "code": {"states": 64},
     "mode": "tail_biting",
     "channel": {"kind": "bsc", "p": 0.05},
     "policy": {"kind": "reliability", "epsilon": 1e-3},
     "lengths": [20, 8, 8], "max_trials": 512, "trace": True},
    {"label": "tiny-k8", "k": 8, "code": {"states": 64},
     "mode": "tail_biting",
     "channel": {"kind": "bsc", "p": 0.05},
     "policy": {"kind": "reliability", "epsilon": 1e-3},
     "lengths": [14, 5, 5], "max_trials": 512},
]}


def test_simulate_then_render(tmp_path):
    cfg = tmp_path / "runs.json"
    cfg.write_text(json.dumps(CONFIG))
    out = tmp_path / "sim"
    assert vlfcc_cli.main(["simulate", "--config", str(cfg),
                           "--out-dir", str(out), "--seed", "7"]) == 0

    for fid in ("fig2", "fig5"):
        spec = FigureSpec(fid, {"sim": str(out / "results.csv")})
        paths = render(spec, str(tmp_path / "figs"), formats=("svg",))
        assert (tmp_path / "figs" / f"{fid}.svg").exists()
        assert len(paths) == 1

    spec = FigureSpec("fig7", default_inputs("fig7", str(out)))
    render(spec, str(tmp_path / "figs"))
    assert (tmp_path / "figs" / "fig7.png").exists()

    # determinism straight off the real pipeline output
    spec2 = FigureSpec("fig5", {"sim": str(out / "results.csv")})
    a = render(spec2, str(tmp_path / "r1"), formats=("svg",))
    b = render(spec2, str(tmp_path / "r2"), formats=("svg",))
    assert open(a[0], "rb").read() == open(b[0], "rb").read()
