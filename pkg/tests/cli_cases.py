"""Small run configs covering every CLI verb, shared by the CLI and acceptance tests."""

import json
from pathlib import Path

from biflab.cli import main

BH = {"kind": "branner_hubbard", "degree": 3}
BH_SEED = [[-0.69054526, -0.29586821], [-0.00381151, 1.33251206]]


def run_verb(verb, cfg, out, name=None):
    """Run one verb in-process; returns the exit code."""
    argv = [verb] + ([name] if name else []) + ["--json", json.dumps(cfg), "--out", str(out)]
    return main(argv)


def cases(work: Path):
    """(label, verb, experiment name, config) in dependency order; inputs live in ``work``."""
    cert = str(work / "m2" / "misiurewicz_certificate.json")
    window = str(work / "win" / "renorm_window.json")
    neutral = str(work / "neu" / "neutral_solution.json")
    grid = str(work / "bnd" / "render.grid")
    box = [-2.5, 1.5, -2, 2]
    return [
        ("m2", "find-misiurewicz", None,
         {"constraints": [{"critical_index": 0, "preperiod": 2, "period": 1}], "start": [[-1.9, 0]]}),
        ("sweep", "find-misiurewicz", None,
         {"sweep": {"center": [[-0.85, 0]], "radius": 1.35, "k": 1, "max_preperiod": 2, "max_period": 2,
                    "n_seeds": 32}, "seed": 3}),
        ("esc", "render", None, {"target": "escape", "box": box, "resolution": 64, "depth": 100}),
        ("act", "render", None, {"target": "activity", "box": box, "resolution": 24, "depth": 50}),
        ("bif", "render", None, {"target": "bif_density", "box": box, "resolution": 24, "depth": 50}),
        ("lya", "render", None, {"target": "lyapunov", "box": box, "resolution": 12, "depth": 50}),
        ("bnd", "render", None, {"target": "boundary", "box": box, "resolution": 64, "depth": 100}),
        ("per", "solve-per", None, {"n": 2, "w": [0.5, 0.5], "start": [[-1.0, 0.1]]}),
        ("cont", "continue-per", None, {"n": 1, "theta_a": 0.1, "theta_b": 0.4, "steps": 8, "start": [[0.2, 0.2]]}),
        ("neu", "solve-neutral", None, {"periods": [1], "thetas": [0.5], "starts": [[[-0.7, 0]]]}),
        ("win", "find-window", None, {"certificate": cert, "critical_index": 0,
                                      "search": {"seed": [[-1.77, 0]], "radius": 0.1}}),
        ("baby", "baby-mandel", None, {"window": window, "resolution": 41, "max_iter": 100}),
        ("str", "straighten-check", None, {"window": window, "zeta": [-1, 0], "mode": "center"}),
        ("emb", "embed-sample", None, {"certificate": cert, "zetas": [[-2, 0]],
                                       "search": {"seed": [[-1.77, 0]], "radius": 0.1}}),
        ("box", "boxdim", None, {"grid": grid, "threshold": 0.5}),
        ("p2n", "experiment", "prerep_to_neutral",
         {"thetas": [0.5], "certificate": cert, "radii": [0.2, 0.1], "n_seeds": 8}),
        ("n2p", "experiment", "neutral_to_prerep", {"neutral": neutral, "radii": [0.2], "n_seeds": 16}),
        ("strat", "experiment", "stratification", {"family": BH, "window_half": 0.05, "resolution": 32,
                                                   "n_probe": 3}),
    ]


def run_all(work: Path):
    """Run every case into ``work/<label>``; returns {label: exit code}."""
    codes = {}
    for label, verb, name, cfg in cases(work):
        codes[label] = run_verb(verb, cfg, work / label, name)
    return codes


def snapshot(work: Path) -> dict:
    """Bytes of every output file below ``work``, keyed by relative path."""
    return {str(p.relative_to(work)): p.read_bytes() for p in sorted(work.rglob("*")) if p.is_file()}
