"""Command-line entry point: ``biflab VERB --config FILE``.

Every verb reads a JSON run config, validates it against the verb's schema
(unknown keys rejected) before computing anything, applies the
``tolerances`` block and writes JSON, PNG and GridField artifacts to the
output directory.  Outputs depend only on (config, seed).

Exit codes: 0 success, 2 validation, 3 convergence failure (and failed
``verify``), 4 I/O.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import warnings
from pathlib import Path

import jsonschema
import numpy as np

from . import _kernels, config, currents, cycles, experiments, misiurewicz, renorm
from .errors import BiflabError, SchemaError, UnknownArtifactType
from .family import Family, ParameterSlice, branner_hubbard, from_json as family_from_json, quadratic

# ---------------------------------------------------------------------------
# schemas

COMPLEX = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
PARAM = {"type": "array", "items": COMPLEX, "minItems": 1}
DOC = {"anyOf": [{"type": "string"}, {"type": "object"}], "description": "artifact file path or inline object"}
RES = {"type": "integer", "minimum": 3}
POS_INT = {"type": "integer", "minimum": 1}
RADIUS = {"type": "number", "exclusiveMinimum": 0}


def _obj(props: dict, required=()) -> dict:
    return {"type": "object", "properties": props, "required": list(required), "additionalProperties": False}


FAMILY = _obj({
    "kind": {"enum": ["quadratic", "branner_hubbard", "generic", "rational"]},
    "degree": {"type": "integer", "minimum": 2},
    "param_dim": POS_INT,
    "params": {"type": "object"},
}, ["kind"])

COMMON = {
    "family": FAMILY,
    "tolerances": {"type": "object", "propertyNames": {"enum": sorted(config.TOLERANCES)},
                   "additionalProperties": {"type": "number"}},
    "seed": {"type": "integer", "minimum": 0},
    "output": {"type": "string"},
    "threads": POS_INT,
}

CHART = _obj({"base": PARAM, "u": PARAM, "v": PARAM}, ["base", "u", "v"])
BOX = {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4}
SEARCH = _obj({"seed": PARAM, "radius": RADIUS, "max_multiple": POS_INT, "n_seeds": POS_INT,
               "return_times": {"type": "array", "items": POS_INT, "minItems": 1}})
CONSTRAINT = _obj({"critical_index": {"type": "integer", "minimum": 0}, "preperiod": POS_INT, "period": POS_INT},
                  ["critical_index", "preperiod", "period"])
WINDOW_SOURCE = {
    "window": DOC,
    "certificate": DOC,
    "critical_index": {"type": "integer", "minimum": 0},
    "search": SEARCH,
}


def _verb(props: dict, required=(), any_of=None) -> dict:
    s = _obj({**COMMON, **props}, required)
    if any_of:
        s["anyOf"] = [{"required": r} for r in any_of]
    return s


SCHEMAS = {
    "render": _verb({
        "target": {"enum": ["escape", "activity", "bif_density", "lyapunov", "boundary"]},
        "critical_index": {"type": "integer", "minimum": 0},
        "chart": CHART,
        "box": BOX,
        "resolution": {"anyOf": [RES, {"type": "array", "items": RES, "minItems": 2, "maxItems": 2}]},
        "depth": POS_INT,
        "log_scale": {"type": "boolean"},
    }, ["box", "resolution"]),
    "solve-per": _verb({"n": POS_INT, "w": COMPLEX, "start": PARAM, "z_seed": COMPLEX, "direction": PARAM},
                       ["n", "w", "start"]),
    "continue-per": _verb({"n": POS_INT, "theta_a": {"type": "number"}, "theta_b": {"type": "number"},
                           "steps": {"type": "integer", "minimum": 0}, "start": PARAM, "z_seed": COMPLEX},
                          ["n", "theta_a", "theta_b", "steps", "start"]),
    "solve-neutral": _verb({"periods": {"type": "array", "items": POS_INT, "minItems": 1},
                            "thetas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                            "starts": {"type": "array", "items": PARAM, "minItems": 1}},
                           ["periods", "thetas", "starts"]),
    "find-misiurewicz": _verb({
        "constraints": {"type": "array", "items": CONSTRAINT, "minItems": 1},
        "start": PARAM,
        "deflate": {"type": "boolean"},
        "sweep": _obj({"center": PARAM, "radius": RADIUS, "k": POS_INT, "max_preperiod": POS_INT,
                       "max_period": POS_INT, "n_seeds": POS_INT},
                      ["center", "radius", "k", "max_preperiod", "max_period", "n_seeds"]),
    }, any_of=[["constraints", "start"], ["sweep"]]),
    "find-window": _verb({**WINDOW_SOURCE, "R": RADIUS}, ["certificate"]),
    "baby-mandel": _verb({**WINDOW_SOURCE, "resolution": RES, "max_iter": POS_INT, "R_param": RADIUS,
                          "compare_model": {"type": "boolean"}}, any_of=[["window"], ["certificate"]]),
    "straighten-check": _verb({**WINDOW_SOURCE, "zeta": COMPLEX,
                               "mode": {"enum": ["center", "multiplier", "neutral"]}},
                              ["zeta"], any_of=[["window"], ["certificate"]]),
    "embed-sample": _verb({"certificate": DOC, "zetas": {"type": "array", "items": COMPLEX, "minItems": 1},
                           "search": SEARCH}, ["certificate", "zetas"]),
    "boxdim": _verb({"png": {"type": "string"}, "grid": {"type": "string"}, "threshold": {"type": "number"},
                     "points": {"type": "array", "items": COMPLEX}, "min_box": POS_INT, "max_box": POS_INT},
                    any_of=[["png"], ["grid"], ["points"]]),
}

RADII = {"type": "array", "items": RADIUS}
EXPERIMENT_SCHEMAS = {
    "prerep_to_neutral": _verb({"thetas": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                                "certificate": DOC, "radii": RADII, "n_seeds": POS_INT}, ["thetas"]),
    "neutral_to_prerep": _verb({"neutral": DOC, "radii": RADII, "n_seeds": POS_INT, "max_preperiod": POS_INT,
                                "max_period": POS_INT, "k": POS_INT, "guided": {"type": "boolean"}}, ["neutral"]),
    "stratification": _verb({"chart": CHART, "box": BOX, "resolution": RES, "ball_radius": RADIUS,
                             "n_probe": POS_INT, "depth": POS_INT, "ratio_max": RADIUS,
                             "passive": {"type": "integer", "minimum": 0},
                             "active": {"type": "integer", "minimum": 0},
                             "window_seed": PARAM, "window_half": RADIUS}),
}

KEY_HELP = {
    "family": "family descriptor, e.g. {\"kind\": \"branner_hubbard\", \"degree\": 3} (default quadratic)",
    "tolerances": "overrides of the tolerance table below",
    "seed": "RNG seed (default 0)",
    "output": "output directory (overridden by --out)",
    "threads": "worker threads (overridden by BIFLAB_THREADS)",
}

VERB_HELP = {
    "render": "escape-time / activity / bifurcation-density image of a 2-real-dim chart",
    "solve-per": "parameter on Per_n(w) and its cycle",
    "continue-per": "follow Per_n(exp(2 pi i theta)) between two angles",
    "solve-neutral": "parameter with k prescribed neutral cycles",
    "find-misiurewicz": "solve and certify critical relations (or sweep a polydisk)",
    "find-window": "renormalization window near a Misiurewicz certificate",
    "baby-mandel": "membership bitmap of the renormalized family in a window",
    "straighten-check": "observable straightening diagnostic at a model parameter",
    "embed-sample": "realize model inputs in the k windows of a joint certificate",
    "boxdim": "box-counting dimension of a bitmap, grid or point set",
    "experiment": "batch experiments: prerep_to_neutral, neutral_to_prerep, stratification",
    "verify": "re-derive every invariant of a stored artifact",
}


# ---------------------------------------------------------------------------
# helpers


def _cp(v) -> complex:
    return complex(v[0], v[1])


def _param(v) -> np.ndarray:
    return np.array([_cp(z) for z in v], dtype=complex)


def _cj(z):
    z = complex(z)
    return [z.real, z.imag]


def _default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, (tuple, set)):
        return list(o)
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def dumps(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, default=_default) + "\n"


class Context:
    """Validated config plus output handling for one verb run."""

    def __init__(self, cfg: dict, out: Path, base_dir: Path):
        self.cfg = cfg
        self.out = out
        self.base_dir = base_dir
        self.family = family_from_json(cfg["family"]) if "family" in cfg else quadratic()
        self.seed = int(cfg.get("seed", 0))
        self.written: list[str] = []

    def load(self, value) -> dict:
        if isinstance(value, dict):
            return value
        path = Path(value)
        if not path.is_absolute():
            path = self.base_dir / path
        with open(path) as fh:
            return json.load(fh)

    def write_json(self, name: str, doc: dict) -> None:
        doc = dict(doc)
        doc.setdefault("family", self.family.to_json())
        self.out.mkdir(parents=True, exist_ok=True)
        (self.out / name).write_text(dumps(doc))
        self.written.append(name)

    def path(self, name: str) -> Path:
        self.out.mkdir(parents=True, exist_ok=True)
        self.written.append(name)
        return self.out / name


def _certificate(ctx: Context, value) -> misiurewicz.MisiurewiczCertificate:
    doc = ctx.load(value)
    if doc.get("type") != "misiurewicz_certificate":
        raise SchemaError("certificate must be a misiurewicz_certificate artifact")
    return misiurewicz.MisiurewiczCertificate.from_json(doc)


def _search(cfg) -> renorm.WindowSearch | None:
    s = cfg.get("search")
    if s is None:
        return None
    kw = dict(s)
    if "seed" in kw:
        kw["seed"] = _param(kw["seed"])
    if "return_times" in kw:
        kw["return_times"] = tuple(kw["return_times"])
    return renorm.WindowSearch(**kw)


def _window(ctx: Context) -> renorm.RenormWindow:
    cfg = ctx.cfg
    if "window" in cfg:
        doc = ctx.load(cfg["window"])
        if doc.get("type") != "renorm_window":
            raise SchemaError("window must be a renorm_window artifact")
        return renorm.window_from_json(doc)
    cert = _certificate(ctx, cfg["certificate"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", renorm.WindowTooDistorted)
        return renorm.find_renorm_window(ctx.family, cert, cfg.get("critical_index"), _search(cfg))


def _grid_hash(values) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()


def _family_for(doc) -> Family:
    if "family" in doc:
        return family_from_json(doc["family"])
    lam = doc.get("lambda") or doc.get("center") or []
    return quadratic() if len(lam) <= 1 else branner_hubbard(len(lam) + 1)


# ---------------------------------------------------------------------------
# verbs


def _render_field(family, target, i, chart, box, nx, ny, depth):
    if target == "escape":
        return currents.escape_field(family, i, chart, box, nx, ny, depth)
    if target == "activity":
        return currents.activity_field(family, i, chart, box, nx, ny, min(depth, 200))
    if target == "bif_density":
        return currents.bif_density(family, i, chart, box, nx, ny, depth)
    if target == "lyapunov":
        return currents.lyapunov_density(family, chart, box, nx, ny, depth)
    bits = currents.boundary_bitmap(family, i, chart, box, nx, ny, depth)
    return currents.GridField(box, bits.astype(float), {"kind": "boundary", "depth": depth, "critical_index": i})


def _render_setup(cfg, family):
    res = cfg["resolution"]
    nx, ny = (res, res) if isinstance(res, int) else res
    box = currents.Box(*cfg["box"])
    if "chart" in cfg:
        chart = currents.Chart(_param(cfg["chart"]["base"]), _param(cfg["chart"]["u"]), _param(cfg["chart"]["v"]))
    else:
        chart = currents.Chart.complex_line(np.zeros(family.param_dim, dtype=complex))
    return chart, box, nx, ny


def verb_render(ctx: Context) -> int:
    cfg = ctx.cfg
    chart, box, nx, ny = _render_setup(cfg, ctx.family)
    target = cfg.get("target", "escape")
    i = int(cfg.get("critical_index", 0))
    depth = int(cfg.get("depth", 200))
    fld = _render_field(ctx.family, target, i, chart, box, nx, ny, depth)
    fld.save(ctx.path("render.grid"))
    ctx.written.append("render.grid.json")
    if target == "boundary":
        currents.save_bitmap_png(ctx.path("render.png"), fld.values > 0)
    elif target == "escape":
        # bounded pixels (escape time -1) drawn black, escaping ones by log escape time
        v = np.where(fld.values < 0, 0.0, np.log1p(np.maximum(fld.values, 0)) + 1.0)
        currents.save_png(ctx.path("render.png"), v)
    else:
        fld.to_png(ctx.path("render.png"), log_scale=bool(cfg.get("log_scale", target != "activity")))
    summary = {"type": "render", "target": target, "critical_index": i, "depth": depth, "nx": nx, "ny": ny,
               "box": list(box.as_tuple()), "chart": chart.to_json(), "grid_sha256": _grid_hash(fld.values)}
    if target == "escape":
        summary["interior_pixels"] = int(np.sum(fld.values < 0))
    elif target == "boundary":
        summary["boundary_pixels"] = int(np.sum(fld.values > 0))
    else:
        summary["mass"] = fld.mass()
    ctx.write_json("render.json", summary)
    return 0


def verb_solve_per(ctx: Context) -> int:
    cfg = ctx.cfg
    slc = None
    start = _param(cfg["start"])
    if "direction" in cfg:
        slc = ParameterSlice(start, _param(cfg["direction"])[None, :])
    sol = cycles.solve_per(ctx.family, int(cfg["n"]), _cp(cfg["w"]), start,
                           _cp(cfg["z_seed"]) if "z_seed" in cfg else None, slc)
    doc = sol.to_json()
    doc["w"] = cfg["w"]
    ctx.write_json("per_solution.json", doc)
    return 0


def verb_continue_per(ctx: Context) -> int:
    cfg = ctx.cfg
    path = cycles.continue_per(ctx.family, int(cfg["n"]), float(cfg["theta_a"]), float(cfg["theta_b"]),
                               int(cfg["steps"]), _param(cfg["start"]),
                               _cp(cfg["z_seed"]) if "z_seed" in cfg else None)
    ctx.write_json("continuation.json", {"type": "per_continuation", "n": int(cfg["n"]),
                                         "path": [{"theta": th, "lambda": [_cj(z) for z in lam]}
                                                  for th, lam in path]})
    return 0


def verb_solve_neutral(ctx: Context) -> int:
    cfg = ctx.cfg
    spec = cycles.NeutralTargetSpec(tuple(cfg["periods"]), tuple(cfg["thetas"]))
    sol = cycles.solve_multi_neutral(ctx.family, spec, [_param(s) for s in cfg["starts"]])
    ctx.write_json("neutral_solution.json", sol.to_json())
    return 0


def verb_find_misiurewicz(ctx: Context) -> int:
    cfg = ctx.cfg
    if "sweep" in cfg:
        s = cfg["sweep"]
        win = misiurewicz.Window(_param(s["center"]), float(s["radius"]))
        certs = misiurewicz.multi_misiurewicz_sweep(ctx.family, win, s["k"], s["max_preperiod"], s["max_period"],
                                                    s["n_seeds"], seed=ctx.seed)
        ctx.write_json("misiurewicz_sweep.json", {"type": "misiurewicz_sweep",
                                                  "certificates": [c.to_json() for c in certs]})
        return 0
    cons = [misiurewicz.MisiurewiczConstraint(**c) for c in cfg["constraints"]]
    cert = misiurewicz.solve_misiurewicz(ctx.family, cons, _param(cfg["start"]), deflate=bool(cfg.get("deflate")))
    ctx.write_json("misiurewicz_certificate.json", cert.to_json())
    return 0


def verb_find_window(ctx: Context) -> int:
    cfg = ctx.cfg
    cert = _certificate(ctx, cfg["certificate"])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", renorm.WindowTooDistorted)
        win = renorm.find_renorm_window(ctx.family, cert, cfg.get("critical_index"), _search(cfg), R=cfg.get("R"))
    ctx.write_json("renorm_window.json", win.to_json())
    return 0


def verb_baby_mandel(ctx: Context) -> int:
    cfg = ctx.cfg
    win = _window(ctx)
    res = int(cfg.get("resolution", 257))
    max_iter = int(cfg.get("max_iter", 200))
    bm = renorm.baby_mandelbrot(win, res, max_iter, cfg.get("R_param"))
    currents.save_bitmap_png(ctx.path("baby_mandel.png"), bm.grid)
    doc = {"type": "baby_mandelbrot", "window": win.to_json(), "resolution": res, "max_iter": max_iter,
           "R_param": bm.R_param, "member_pixels": int(bm.grid.sum()), "area": bm.area()}
    if cfg.get("compare_model", True):
        model = renorm.model_mandelbrot(res, max_iter, bm.R_param)
        doc["model_area"] = model.area()
        doc["area_ratio"] = bm.area() / model.area()
    ctx.write_json("baby_mandel.json", doc)
    return 0


def verb_straighten_check(ctx: Context) -> int:
    cfg = ctx.cfg
    win = _window(ctx)
    diag = renorm.straightening_check(win, _cp(cfg["zeta"]), cfg.get("mode", "center"))
    doc = diag.to_json()
    doc["window"] = win.to_json()
    ctx.write_json("straightening.json", doc)
    return 0


def verb_embed_sample(ctx: Context) -> int:
    cfg = ctx.cfg
    cert = _certificate(ctx, cfg["certificate"])
    sample = renorm.product_embedding_sample(ctx.family, cert, [_cp(z) for z in cfg["zetas"]],
                                             search=_search(cfg), seed=ctx.seed)
    ctx.write_json("embedding_sample.json", sample.to_json())
    return 0


def verb_boxdim(ctx: Context) -> int:
    cfg = ctx.cfg
    if "png" in cfg:
        from PIL import Image

        p = Path(cfg["png"])
        img = np.asarray(Image.open(p if p.is_absolute() else ctx.base_dir / p).convert("L"))
        data = img[::-1] > 127
    elif "grid" in cfg:
        p = Path(cfg["grid"])
        fld = currents.GridField.load(p if p.is_absolute() else ctx.base_dir / p)
        data = fld.values > cfg.get("threshold", 0.0)
    else:
        data = np.array([_cp(z) for z in cfg["points"]])
    est = renorm.boxdim(data, int(cfg.get("min_box", 1)), cfg.get("max_box"))
    ctx.write_json("boxdim.json", est.to_json())
    return 0


def _experiment(ctx: Context, name: str) -> int:
    cfg = ctx.cfg
    fam = ctx.family
    radii = tuple(cfg.get("radii", experiments.DEFAULT_RADII))
    n_seeds = int(cfg.get("n_seeds", config.tol("experiments.seeds")))
    if name == "prerep_to_neutral":
        cert = _certificate(ctx, cfg["certificate"]) if "certificate" in cfg else None
        rep = experiments.experiment_prerep_to_neutral(fam, cfg["thetas"], cert, radii, n_seeds, ctx.seed)
    elif name == "neutral_to_prerep":
        doc = ctx.load(cfg["neutral"])
        if doc.get("type") != "neutral_solution":
            raise SchemaError("neutral must be a neutral_solution artifact")
        rep = experiments.experiment_neutral_to_prerep(
            fam, cycles.neutral_from_json(doc), radii, n_seeds, ctx.seed, int(cfg.get("max_preperiod", 3)),
            int(cfg.get("max_period", 3)), cfg.get("k"), bool(cfg.get("guided", True)))
    else:
        if "chart" in cfg:
            c = cfg["chart"]
            chart = currents.Chart(_param(c["base"]), _param(c["u"]), _param(c["v"]))
        else:
            kw = {"seed": _param(cfg["window_seed"])} if "window_seed" in cfg else {}
            chart = experiments.stratification_window(fam, int(cfg.get("passive", 0)), int(cfg.get("active", 1)),
                                                      **kw)
        h = float(cfg.get("window_half", 0.05))
        box = tuple(cfg.get("box", (-h, h, -h, h)))
        ratio_max = float(cfg.get("ratio_max", 1e-3))
        doc = experiments.experiment_stratification(fam, chart, box, int(cfg.get("resolution", 64)),
                                                    float(cfg.get("ball_radius", 0.02)), int(cfg.get("n_probe", 5)),
                                                    int(cfg.get("depth", 200)), ratio_max)
        doc["ratio_max"] = ratio_max
        ctx.write_json("stratification.json", doc)
        print(f"stratification: ball {doc['ball_center']} active c{doc['active']} ratio {doc['ratio']:.3g}")
        return 0
    ctx.write_json(f"{name}.json", rep.to_json())
    (ctx.path(f"{name}.txt")).write_text(rep.summary_table() + "\n")
    print(rep.summary_table())
    return 0


VERBS = {
    "render": verb_render,
    "solve-per": verb_solve_per,
    "continue-per": verb_continue_per,
    "solve-neutral": verb_solve_neutral,
    "find-misiurewicz": verb_find_misiurewicz,
    "find-window": verb_find_window,
    "baby-mandel": verb_baby_mandel,
    "straighten-check": verb_straighten_check,
    "embed-sample": verb_embed_sample,
    "boxdim": verb_boxdim,
}


# ---------------------------------------------------------------------------
# verify


def _all(checks: dict) -> bool:
    return all(bool(v) for v in checks.values())


def _verify_cert_doc(doc):
    fam = _family_for(doc)
    return misiurewicz.verify_certificate(fam, misiurewicz.MisiurewiczCertificate.from_json(doc))


def _verify_report(doc) -> dict:
    fam = _family_for(doc)
    start = _param(doc["start"])
    checks = {}
    dists = []
    for j, tr in enumerate(doc["trials"]):
        found = tr.get("found")
        if found is None:
            dists.append(None)
            continue
        if found["type"] == "neutral_solution":
            sol = cycles.neutral_from_json(found)
            ok = _all(cycles.verify_neutral(fam, sol)) and sol.residual <= 1e-8
            lam = sol.lam
        else:
            ok = _all(_verify_cert_doc({**found, "family": doc["family"]}))
            lam = _param(found["lambda"])
        d = float(np.linalg.norm(lam - start))
        checks[f"trial_{j}_verified"] = bool(ok)
        checks[f"trial_{j}_distance"] = tr["distance"] is not None and abs(d - tr["distance"]) <= 1e-12 * (1 + d)
        dists.append(d if ok else None)
    mono = all(x is not None for x in dists) and all(b <= a * (1 + 1e-9) for a, b in zip(dists, dists[1:]))
    checks["success_flag"] = (bool(dists) and mono) == bool(doc["success"])
    return checks


def _verify_stratification(doc) -> dict:
    fam = _family_for(doc)
    chart = currents.Chart.from_json(doc["chart"])
    x, y = doc["ball_center"]
    rho = doc["ball_radius"]
    ball = currents.Box(x - rho, x + rho, y - rho, y + rho)
    lam = chart(x, y)
    direction = chart.u if np.allclose(chart.v, 1j * chart.u) else None
    radius = rho * float(np.linalg.norm(chart.u))
    checks = {}
    a = doc["active"]
    for i in range(fam.n_critical):
        status = currents.activity_test(fam, i, lam, radius, depth=doc["depth"], direction=direction).status
        checks[f"c{i}_status"] = status == ("Active" if i == a else "Passive")
    masses = [experiments._disk_mass(currents.bif_density(fam, i, chart, ball, doc["resolution"], doc["resolution"],
                                                          doc["depth"]), x, y, rho) for i in range(fam.n_critical)]
    checks["masses"] = bool(np.allclose(masses, doc["masses"], rtol=1e-9, atol=1e-300))
    worst = max(masses[i] for i in doc["passive"])
    checks["ratio"] = masses[a] > 0 and worst <= doc.get("ratio_max", 1e-3) * masses[a]
    return checks


def _verify_render(doc) -> dict:
    fam = _family_for(doc)
    chart = currents.Chart.from_json(doc["chart"])
    box = currents.Box(*doc["box"])
    fld = _render_field(fam, doc["target"], doc["critical_index"], chart, box, doc["nx"], doc["ny"], doc["depth"])
    return {"grid_sha256": _grid_hash(fld.values) == doc["grid_sha256"]}


def _verify_baby(doc) -> dict:
    win = renorm.window_from_json(doc["window"])
    checks = {f"window_{k}": v for k, v in renorm.verify_window(win, doc["window"]).items()}
    bm = renorm.baby_mandelbrot(win, doc["resolution"], doc["max_iter"], doc["R_param"])
    checks["member_pixels"] = int(bm.grid.sum()) == doc["member_pixels"]
    return checks


def _verify_straightening(doc) -> dict:
    win = renorm.window_from_json(doc["window"])
    diag = renorm.straightening_check(win, _cp(doc["zeta"]), doc["mode"])
    return {"passed": diag.passed, "stored_passed": bool(doc["passed"])}


def _verify_continuation(doc) -> dict:
    fam = _family_for(doc)
    n = doc["n"]
    ok = True
    for pt in doc["path"]:
        w = complex(math.cos(2 * math.pi * pt["theta"]), math.sin(2 * math.pi * pt["theta"]))
        cyc = cycles.periodic_points(fam, _param(pt["lambda"]), n, exact=False)
        ok = ok and any(c.period == n and abs(c.multiplier - w) <= 1e-6 for c in cyc)
    return {"path_on_curve": bool(ok)}


def _verify_boxdim(doc) -> dict:
    from scipy import stats

    e, c = np.array(doc["scales"]), np.array(doc["counts"], dtype=float)
    fit = stats.linregress(np.log(1 / e), np.log(c))
    return {"slope": abs(fit.slope - doc["dimension"]) <= 1e-9 * (1 + abs(fit.slope))}


VERIFIERS = {
    "misiurewicz_certificate": _verify_cert_doc,
    "misiurewicz_sweep": lambda d: {f"certificate_{j}": _all(_verify_cert_doc({**c, "family": d["family"]}))
                                    for j, c in enumerate(d["certificates"])},
    "per_solution": lambda d: cycles.verify_per(_family_for(d), cycles.per_from_json(d),
                                                _cp(d["w"]) if "w" in d else None),
    "neutral_solution": lambda d: cycles.verify_neutral(_family_for(d), cycles.neutral_from_json(d)),
    "per_continuation": _verify_continuation,
    "renorm_window": lambda d: renorm.verify_window(renorm.window_from_json(d), d),
    "product_embedding_sample": lambda d: renorm.verify_embedding_sample(_family_for(d), d),
    "straightening_diagnostic": _verify_straightening,
    "baby_mandelbrot": _verify_baby,
    "density_experiment_report": _verify_report,
    "stratification_report": _verify_stratification,
    "render": _verify_render,
    "boxdim": _verify_boxdim,
}


def verify_artifact(path) -> dict:
    """Re-check a stored artifact; returns {"type", "checks", "passed"}.

    Raises :class:`UnknownArtifactType` for unreadable, truncated or
    unrecognized files.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UnknownArtifactType(f"{path}: not a JSON artifact ({exc})") from None
    kind = doc.get("type") if isinstance(doc, dict) else None
    if kind not in VERIFIERS:
        raise UnknownArtifactType(f"{path}: unknown artifact type {kind!r}")
    try:
        checks = VERIFIERS[kind](doc)
    except (KeyError, TypeError, IndexError) as exc:
        raise UnknownArtifactType(f"{path}: malformed {kind} artifact ({exc!r})") from None
    checks = {k: bool(v) for k, v in checks.items()}
    return {"type": kind, "checks": checks, "passed": _all(checks), "failed": sorted(k for k, v in checks.items() if not v)}


# ---------------------------------------------------------------------------
# argument parsing and dispatch


def _epilog(schema: dict | None) -> str:
    parts = []
    if schema is not None:
        keys = sorted(schema["properties"])
        parts.append("config keys: " + ", ".join(keys))
        for k in ("family", "tolerances", "seed", "output", "threads"):
            parts.append(f"  {k}: {KEY_HELP[k]}")
    parts.append(config.help_table())
    return "\n".join(parts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="biflab", description="Numerical bifurcation-current laboratory.",
                                formatter_class=argparse.RawDescriptionHelpFormatter, epilog=config.help_table())
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")
    for verb in list(VERBS) + ["experiment", "verify"]:
        schema = SCHEMAS.get(verb)
        sp = sub.add_parser(verb, help=VERB_HELP[verb], description=VERB_HELP[verb],
                            formatter_class=argparse.RawDescriptionHelpFormatter, epilog=_epilog(schema))
        if verb == "verify":
            sp.add_argument("file", help="artifact JSON file")
            sp.add_argument("--out", help="also write the report to this directory")
            continue
        if verb == "experiment":
            sp.add_argument("name", choices=sorted(EXPERIMENT_SCHEMAS))
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--config", help="run config JSON file")
        src.add_argument("--json", help="inline run config JSON")
        sp.add_argument("--out", help="output directory (default: config 'output' or '.')")
    return p


def _load_config(args) -> tuple[dict, Path]:
    if args.config:
        path = Path(args.config)
        with open(path) as fh:
            text = fh.read()
        base = path.resolve().parent
    else:
        text = args.json or "{}"
        base = Path.cwd()
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"config is not valid JSON: {exc}") from None
    if not isinstance(cfg, dict):
        raise SchemaError("config must be a JSON object")
    return cfg, base


def _validate(cfg: dict, schema: dict) -> None:
    try:
        jsonschema.validate(cfg, schema)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise SchemaError(f"config rejected at {where}: {exc.message}") from None


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.verb == "verify":
        rep = verify_artifact(args.file)
        text = dumps(rep)
        if args.out:
            Path(args.out).mkdir(parents=True, exist_ok=True)
            (Path(args.out) / "verify.json").write_text(text)
        sys.stdout.write(text)
        return 0 if rep["passed"] else 3
    cfg, base = _load_config(args)
    schema = EXPERIMENT_SCHEMAS[args.name] if args.verb == "experiment" else SCHEMAS[args.verb]
    _validate(cfg, schema)
    out = Path(args.out or cfg.get("output", "."))
    threads = os.environ.get("BIFLAB_THREADS") or cfg.get("threads")
    if threads:
        _kernels.set_threads(int(threads))
    ctx = Context(cfg, out, base)
    with config.overrides(cfg.get("tolerances")), np.errstate(all="ignore"):
        if args.verb == "experiment":
            code = _experiment(ctx, args.name)
        else:
            code = VERBS[args.verb](ctx)
    for name in ctx.written:
        print(out / name)
    return code


def main(argv=None) -> int:
    try:
        return run(argv)
    except (SchemaError, UnknownArtifactType, ValueError, KeyError) as exc:
        print(f"biflab: validation error: {exc}", file=sys.stderr)
        return 2
    except BiflabError as exc:
        print(f"biflab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"biflab: I/O error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
