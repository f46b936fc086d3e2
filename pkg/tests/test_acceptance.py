"""Acceptance suite: one test per primary criterion, each reporting a pass/fail line with its runtime.

The lines are printed as the tests run (visible with ``-s``) and again in the
terminal summary.
"""

import math
import shutil
import time
import warnings
from contextlib import contextmanager

import numpy as np
import pytest

from biflab import experiments as ex
from biflab import renorm
from biflab.currents import Chart4, wedge_masses
from biflab.cycles import neutral_from_json, solve_per, verify_neutral
from biflab.misiurewicz import MisiurewiczConstraint as MC
from biflab.misiurewicz import solve_misiurewicz, verify_certificate
from biflab.potential import lyapunov

import cli_cases as cc

RESULTS = []


@contextmanager
def criterion(number, title, budget, spent=0.0):
    """Time the body, record a result line and enforce the runtime budget (seconds).

    ``spent`` adds time already used by a fixture feeding this criterion.
    """
    t0 = time.perf_counter() - spent
    detail = {}
    ok = False
    try:
        yield detail
        ok = True
    finally:
        dt = time.perf_counter() - t0
        within = dt < budget
        status = "PASS" if ok and within else "FAIL"
        note = ", ".join(f"{k}={v}" for k, v in detail.items())
        line = f"[{status}] criterion {number:2d}: {title} ({dt:.1f} s of {budget:g} s){': ' + note if note else ''}"
        RESULTS.append(line)
        print(line)
    assert within, f"criterion {number} took {dt:.1f} s, budget {budget} s"


def _quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", renorm.WindowTooDistorted)
        return fn(*a, **kw)


def test_01_per_closed_forms(quad):
    with criterion(1, "Per_1 and Per_2 closed forms", 10) as d:
        rng = np.random.default_rng(20240601)
        r = 1.5 * np.sqrt(rng.uniform(0, 1, 200))
        ws = r * np.exp(2j * np.pi * rng.uniform(0, 1, 200))
        e1 = e2 = 0.0
        for w in ws:
            # z^2 + zeta = z with 2z = w; the 2-cycle multiplier is 4 zeta + 4
            z1 = w / 2 - w * w / 4
            z2 = -1 + w / 4
            if abs(w - 1) > 1e-6:  # w = 1 is the cusp, excluded from Per_1 solving
                e1 = max(e1, abs(solve_per(quad, 1, w, [z1 + 0.05]).lam[0] - z1))
            e2 = max(e2, abs(solve_per(quad, 2, w, [z2 + 0.05]).lam[0] - z2))
        d["err1"], d["err2"] = f"{e1:.1e}", f"{e2:.1e}"
        assert e1 <= 1e-9 and e2 <= 1e-9


def test_02_lyapunov(quad):
    with criterion(2, "Lyapunov exponents of z^2 and z^2 - 2", 30) as d:
        for zeta, tol_ in ((0.0, 1e-3), (-2.0, 5e-3)):
            est = lyapunov(quad, [zeta], 10000)
            d[f"L({zeta:g})"] = f"{est.mc:.5f}"
            assert abs(est.mc - math.log(2)) <= tol_
            assert est.agrees(3.0)


def test_03_misiurewicz_certificates(quad):
    with criterion(3, "Misiurewicz certificates at -2 and i", 5) as d:
        c = solve_misiurewicz(quad, [MC(0, 2, 1)], [-1.9])
        assert abs(c.lam[0] + 2) < 1e-12
        assert abs(c.transversality_det + 8) <= 1e-6
        assert c.certified and all(verify_certificate(quad, c).values())
        c = solve_misiurewicz(quad, [MC(0, 2, 2)], [0.9j])
        assert abs(c.lam[0] - 1j) < 1e-12
        # 2-cycle {i - 1, -i}: multiplier 4 (i - 1)(-i) = 4 (1 + i)
        assert abs(c.landing_cycle_multipliers[0] - 4 * (1 + 1j)) <= 1e-8
        assert c.certified
        d["det(-2)"] = "-8"


def test_04_self_wedge_vanishes(bh3, bh_cert):
    with criterion(4, "self-wedge vanishing on a 128^4 cubic window", 300) as d:
        wm = wedge_masses(bh3, Chart4.coordinate(bh_cert.lam, 0.02), 128, 3)
        mixed = wm.masses[(0, 1)]
        for i in (0, 1):
            d[f"ratio{i}"] = f"{wm.masses[(i, i)] / mixed:.4f}"
            assert wm.masses[(i, i)] <= 0.05 * mixed


def test_05_baby_mandelbrot(quad, cert_m2):
    with criterion(5, "period-3 baby Mandelbrot", 120) as d:
        w = _quiet(renorm.find_renorm_window, quad, cert_m2, 0, renorm.WindowSearch(seed=-1.77, radius=0.1))
        assert w.n1 == 3
        for zeta, per in ((0, 3), (-1, 6)):
            diag = renorm.straightening_check(w, zeta, "center")
            assert diag.passed and diag.period == per and abs(diag.multiplier) < 1e-6
        ratio = renorm.baby_mandelbrot(w, 201, 200).area() / renorm.model_mandelbrot(201, 200).area()
        d["area_ratio"] = f"{ratio:.3f}"
        assert 0.5 <= ratio <= 2.0


@pytest.mark.parametrize("zetas", [(0, 0), (-2, -2)])
def test_06_product_embedding(bh3, bh_cert, zetas):
    with criterion(6, f"product embedding at {zetas}", 120) as d:
        wins = [_quiet(renorm.find_renorm_window, bh3, bh_cert, i, renorm.WindowSearch(radius=0.05)) for i in (0, 1)]
        s = renorm.product_embedding_sample(bh3, bh_cert, zetas, windows=wins)
        d["residual"] = f"{s.residual:.1e}"
        if zetas == (0, 0):
            assert s.residual <= 1e-9
            assert all(f["passed"] and f["multiplier"] < 1e-6 for f in s.per_factor_diagnostics)
        else:
            cons = [MC(f["critical_index"], f["steps"][1], f["steps"][0] - f["steps"][1]) for f in s.factors]
            cert = solve_misiurewicz(bh3, cons, s.lam)
            assert cert.certified and cert.rank == 2 and np.linalg.norm(cert.lam - s.lam) < 1e-9


@pytest.fixture(scope="module")
def neutral_report(bh3, bh_cert):
    t0 = time.perf_counter()
    rep = ex.experiment_prerep_to_neutral(bh3, (0.5, 1 / 3), bh_cert, radii=(0.2, 0.1, 0.05))
    return rep, time.perf_counter() - t0


def test_07a_prerep_to_neutral(bh3, neutral_report):
    rep, dt = neutral_report
    with criterion(7, "Misiurewicz -> neutral distance curve, k=2", 600, spent=dt) as d:
        dist = rep.distances
        d["distances"] = "[" + ", ".join(f"{x:.4f}" for x in dist) + "]"
        assert all(x is not None for x in dist)
        assert all(b <= a * (1 + 1e-9) for a, b in zip(dist, dist[1:]))
        assert rep.final_distance <= 0.05
        sol = neutral_from_json(rep.trials[-1]["found"])
        assert sol.jacobian_rank == 2 and sol.residual <= 1e-8
        assert all(verify_neutral(bh3, sol).values())


def test_07b_neutral_to_prerep(bh3, neutral_report):
    rep, _ = neutral_report
    sol = neutral_from_json(rep.trials[-1]["found"])
    with criterion(7, "neutral -> Misiurewicz round trip, k=2", 600) as d:
        back = ex.experiment_neutral_to_prerep(bh3, sol, radii=(0.2, 0.1, 0.05))
        d["distances"] = "[" + ", ".join("None" if x is None else f"{x:.4f}" for x in back.distances) + "]"
        for r, x in zip((0.2, 0.1, 0.05), back.distances):
            assert x is not None and x <= r
        assert back.success


def test_08_stratification(bh3):
    with criterion(8, "stratification ball with one active critical point", 300) as d:
        chart = ex.stratification_window(bh3)
        rep = ex.experiment_stratification(bh3, chart, (-0.05, 0.05, -0.05, 0.05))
        a, p = rep["active"], rep["passive"]
        d["active"] = f"c{a}"
        d["ratio"] = f"{rep['masses'][p[0]] / rep['masses'][a]:.2e}"
        assert len(p) == 1 and rep["masses"][a] > 0
        assert rep["masses"][p[0]] <= 1e-3 * rep["masses"][a]


def test_09_holder_probe(quad, cert_m2):
    with criterion(9, "Hoelder probe on quadratic window centers", 60) as d:
        w = _quiet(renorm.find_renorm_window, quad, cert_m2, 0, renorm.WindowSearch(seed=-1.77, radius=0.1))
        est = renorm.holder_exponent_probe(renorm.center_distance_pairs(renorm.window_center_samples(w, 8)))
        d["exponent"], d["r2"] = f"{est.exponent:.3f}", f"{est.r2:.3f}"
        assert 0.8 <= est.exponent <= 1.2 and est.r2 > 0.95


def test_10_cli_determinism(tmp_path):
    with criterion(10, "every CLI verb byte-identical across two runs", 600) as d:
        work = tmp_path / "work"
        codes = cc.run_all(work)
        assert all(c == 0 for c in codes.values()), codes
        first = cc.snapshot(work)
        shutil.rmtree(work)
        cc.run_all(work)
        second = cc.snapshot(work)
        d["files"] = len(first)
        assert first.keys() == second.keys()
        assert [k for k in first if first[k] != second[k]] == []
