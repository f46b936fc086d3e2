import json
import os
import shutil
import subprocess
import sys

import numpy as np
import pytest
from scipy import ndimage

from biflab import cli
from biflab.currents import GridField

import cli_cases as cc

BOX = [-2.5, 1.5, -2, 2]


@pytest.fixture(scope="module")
def work(tmp_path_factory):
    w = tmp_path_factory.mktemp("cli")
    codes = cc.run_all(w)
    assert all(c == 0 for c in codes.values()), codes
    return w


def _render(tmp_path, label, **cfg):
    assert cc.run_verb("render", {"box": BOX, **cfg}, tmp_path / label) == 0
    return json.loads((tmp_path / label / "render.json").read_text()), GridField.load(tmp_path / label / "render.grid")


# ---------------------------------------------------------------------------
# verbs

def test_every_verb_covered():
    verbs = {v for _, v, _, _ in cc.cases(cc.Path("."))} | {"verify"}
    assert verbs == set(cli.VERBS) | {"experiment", "verify"}
    names = {n for _, v, n, _ in cc.cases(cc.Path(".")) if v == "experiment"}
    assert names == set(cli.EXPERIMENT_SCHEMAS)


def test_every_artifact_verifies(work):
    docs = [p for p in work.rglob("*.json") if not p.name.endswith(".grid.json")]
    assert len(docs) >= 18
    for p in docs:
        rep = cli.verify_artifact(p)
        assert rep["passed"], (p, rep)


def test_verbs_deterministic(work):
    # configs point at inputs under the work directory, so rerun there
    before = cc.snapshot(work)
    for label, verb, name, cfg in cc.cases(work):
        shutil.rmtree(work / label)
        assert cc.run_verb(verb, cfg, work / label, name) == 0
    assert cc.snapshot(work) == before


def test_certificate_artifact(work):
    doc = json.loads((work / "m2" / "misiurewicz_certificate.json").read_text())
    assert doc["type"] == "misiurewicz_certificate"
    assert abs(complex(*doc["lambda"][0]) + 2) < 1e-12
    assert abs(complex(*doc["transversality_det"]) + 8) < 1e-8


# ---------------------------------------------------------------------------
# render

def test_escape_render_twice(tmp_path):
    a, ga = _render(tmp_path, "a", target="escape", resolution=512)
    b, gb = _render(tmp_path, "b", target="escape", resolution=512)
    assert (tmp_path / "a" / "render.png").read_bytes() == (tmp_path / "b" / "render.png").read_bytes()
    assert (tmp_path / "a" / "render.grid").read_bytes() == (tmp_path / "b" / "render.grid").read_bytes()
    assert a["interior_pixels"] == b["interior_pixels"]
    # area of M is about 1.506: roughly 7.3k of 262k pixels of size (4/511)^2
    assert 0.9 * 1.506 <= a["interior_pixels"] * (4 / 511) ** 2 <= 1.1 * 1.506
    assert np.array_equal(ga.values < 0, gb.values < 0)


def test_activity_overlay_matches_escape_boundary(tmp_path):
    _, esc = _render(tmp_path, "esc", target="escape", resolution=128, depth=200)
    _, act = _render(tmp_path, "act", target="activity", resolution=128, depth=50)
    inside = esc.values < 0
    boundary = (inside & ~ndimage.binary_erosion(inside)) | (ndimage.binary_dilation(inside) & ~inside)
    near = ndimage.binary_dilation(act.values == 1, iterations=2)
    cover = near[boundary].mean()
    print(f"activity overlay covers {cover:.4f} of {boundary.sum()} escape-boundary pixels")
    assert cover >= 0.98


@pytest.mark.parametrize("res", [0, 2, [0, 10]])
def test_zero_resolution_rejected(tmp_path, res, capsys):
    assert cc.run_verb("render", {"box": BOX, "resolution": res}, tmp_path) == 2
    assert "resolution" in capsys.readouterr().err
    assert not any(tmp_path.iterdir())


def test_unknown_key_rejected(tmp_path):
    assert cc.run_verb("solve-per", {"n": 1, "w": [0.5, 0], "start": [[0, 0]], "bogus": 1}, tmp_path) == 2


def test_bad_config_json(tmp_path):
    assert cli.main(["render", "--json", "{not json", "--out", str(tmp_path)]) == 2


def test_missing_config_file(tmp_path):
    assert cli.main(["render", "--config", str(tmp_path / "absent.json")]) == 4


def test_convergence_failure_exit(tmp_path):
    # the landing cycle at the cusp is not repelling
    cfg = {"constraints": [{"critical_index": 0, "preperiod": 1000, "period": 1}], "start": [[0.25, 0]]}
    assert cc.run_verb("find-misiurewicz", cfg, tmp_path) == 3


def test_tolerance_override(tmp_path):
    cfg = {"n": 1, "w": [0.5, 0], "start": [[0.2, 0]], "tolerances": {"no.such.tolerance": 1.0}}
    assert cc.run_verb("solve-per", cfg, tmp_path) == 2


# ---------------------------------------------------------------------------
# verify

def test_verify_stored_certificate(work, capsys):
    assert cli.main(["verify", str(work / "m2" / "misiurewicz_certificate.json")]) == 0
    assert json.loads(capsys.readouterr().out)["passed"]


def test_verify_tampered_multiplier(work, tmp_path, capsys):
    doc = json.loads((work / "m2" / "misiurewicz_certificate.json").read_text())
    doc["landing_cycle_multipliers"][0] = [3.0, 0.0]
    p = tmp_path / "tampered.json"
    p.write_text(json.dumps(doc))
    assert cli.main(["verify", str(p)]) == 3
    rep = json.loads(capsys.readouterr().out)
    assert not rep["passed"] and "landing_multipliers" in rep["failed"]


def test_verify_truncated_file(work, tmp_path):
    text = (work / "m2" / "misiurewicz_certificate.json").read_text()
    p = tmp_path / "trunc.json"
    p.write_text(text[: len(text) // 2])
    with pytest.raises(cli.UnknownArtifactType):
        cli.verify_artifact(p)
    assert cli.main(["verify", str(p)]) == 2


def test_verify_unknown_type(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"type": "teapot"}))
    with pytest.raises(cli.UnknownArtifactType):
        cli.verify_artifact(p)


# ---------------------------------------------------------------------------
# help, threads, entry point

@pytest.mark.parametrize("verb", sorted(set(cli.VERBS) | {"experiment", "verify"}))
def test_help_lists_tolerances(verb, capsys):
    from biflab.config import TOLERANCES
    with pytest.raises(SystemExit) as info:
        cli.main([verb, "--help"])
    assert info.value.code == 0
    out = capsys.readouterr().out
    for name, t in TOLERANCES.items():
        assert name in out and f"[{t.module}]" in out


def test_threads_env(tmp_path, monkeypatch):
    import numba
    monkeypatch.setenv("BIFLAB_THREADS", "1")
    assert cc.run_verb("render", {"box": BOX, "resolution": 16, "threads": 4}, tmp_path) == 0
    assert numba.get_num_threads() == 1


def test_console_script(tmp_path):
    exe = shutil.which("biflab") or None
    cmd = [exe] if exe else [sys.executable, "-m", "biflab.cli"]
    cfg = {"n": 1, "w": [0.5, 0], "start": [[0.2, 0]]}
    res = subprocess.run(cmd + ["solve-per", "--json", json.dumps(cfg), "--out", str(tmp_path)],
                         capture_output=True, text=True, env={**os.environ, "BIFLAB_THREADS": "1"})
    assert res.returncode == 0, res.stderr
    doc = json.loads((tmp_path / "per_solution.json").read_text())
    assert abs(complex(*doc["lambda"][0]) - (0.25 - 0.0625)) < 1e-10
