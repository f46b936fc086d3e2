import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biflab.currents import Box, Chart, boundary_bitmap, escape_time
from biflab.cycles import (Cycle, NeutralTargetSpec, continue_per, make_cycle, neutral_from_json,
                           periodic_points, solve_multi_neutral, solve_per, verify_neutral)
from biflab.errors import CyclesCollided, PeriodTooLarge
from biflab.family import eval_map


def _sets_close(a, b, tol=1e-10):
    a, b = np.asarray(sorted(a, key=lambda z: (z.real, z.imag))), np.asarray(sorted(b, key=lambda z: (z.real, z.imag)))
    return len(a) == len(b) and np.max(np.abs(a - b)) < tol


# ---------------------------------------------------------------------------
# periodic points

def test_fixed_points_of_z2(quad):
    cyc = periodic_points(quad, [0.0], 1)
    got = sorted(((c.points[0], c.multiplier) for c in cyc), key=lambda p: abs(p[0]))
    assert len(got) == 2
    assert abs(got[0][0]) < 1e-12 and abs(got[0][1]) < 1e-12
    assert abs(got[1][0] - 1) < 1e-12 and abs(got[1][1] - 2) < 1e-12


def test_period_two_of_z2(quad):
    cyc = periodic_points(quad, [0.0], 2)
    assert len(cyc) == 1
    w = cmath.exp(2j * math.pi / 3)
    assert _sets_close(cyc[0].points, [w, w.conjugate()])
    assert abs(cyc[0].multiplier - 4) < 1e-10


def test_basilica_two_cycle(quad):
    cyc = periodic_points(quad, [-1.0], 2)
    assert len(cyc) == 1
    assert _sets_close(cyc[0].points, [0, -1])
    assert cyc[0].classification == "superattracting"


def test_period_too_large(quad):
    with pytest.raises(PeriodTooLarge):
        periodic_points(quad, [0.0], 30)


@pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
def test_root_count(quad, bh3, n):
    rng = np.random.default_rng(n)
    for fam in (quad, bh3):
        if fam.degree**n > 4096:
            continue
        for _ in range(20 if fam is quad else 4):
            lam = rng.uniform(-1, 1, fam.param_dim) + 1j * rng.uniform(-1, 1, fam.param_dim)
            total = sum(c.period * c.multiplicity for c in periodic_points(fam, lam, n, exact=False))
            assert total == fam.degree**n


@settings(max_examples=25, deadline=None)
@given(st.floats(-1.5, 0.3), st.floats(-1, 1), st.integers(0, 5))
def test_multiplier_representative_invariance(quad_x, quad_y, shift):
    from biflab.family import quadratic
    fam = quadratic()
    lam = [complex(quad_x, quad_y)]
    for c in periodic_points(fam, lam, 4):
        k = shift % c.period
        other = make_cycle(fam, lam, c.points[k], c.period)
        assert abs(other.multiplier - c.multiplier) <= 1e-12 * max(1.0, abs(c.multiplier))


def test_cycle_invariants(bh3):
    lam = np.array([0.3 + 0.2j, 0.5 - 0.1j])
    for c in periodic_points(bh3, lam, 3):
        pts = np.array(c.points)
        img = np.array([eval_map(bh3, lam, z) for z in pts])
        assert np.max(np.abs(img - np.roll(pts, -1))) < 1e-9 * (1 + np.max(np.abs(pts)))
        recomputed = make_cycle(bh3, lam, pts[0], 3).multiplier
        assert abs(recomputed - c.multiplier) <= 1e-10 * max(1, abs(c.multiplier))


def test_classification_thresholds():
    assert Cycle((0j,), 0j).classification == "superattracting"
    assert Cycle((0j,), 0.5 + 0j).classification == "attracting"
    assert Cycle((0j,), cmath.exp(0.3j)).classification == "neutral"
    assert Cycle((0j,), 1.5 + 0j).classification == "repelling"
    assert abs(Cycle((0j,), cmath.exp(2j * math.pi * 0.25)).rotation - 0.25) < 1e-12


# ---------------------------------------------------------------------------
# Per_n(w)

def test_per_center(quad):
    lam, cyc = solve_per(quad, 1, 0, [0.1])
    assert abs(lam[0]) < 1e-10 and cyc.classification == "superattracting"


def test_per_closed_form_period_one(quad):
    rng = np.random.default_rng(7)
    r = np.sqrt(rng.uniform(0, 1, 100))
    ws = r * np.exp(2j * np.pi * rng.uniform(0, 1, 100))
    for w in ws:
        expect = w / 2 - w * w / 4
        sol = solve_per(quad, 1, w, [expect + 0.01])
        assert abs(sol.lam[0] - expect) < 1e-10
        assert sol.residual <= 1e-10


def test_per_closed_form_invariant(quad):
    # period 1: zeta = w/2 - w^2/4, period 2: multiplier 4(zeta + 1)
    rng = np.random.default_rng(11)
    r = 1.5 * np.sqrt(rng.uniform(0, 1, 200))
    ws = r * np.exp(2j * np.pi * rng.uniform(0, 1, 200))
    err = 0.0
    for w in ws:
        if abs(w - 1) < 1e-3:
            continue
        expect1 = w / 2 - w * w / 4
        err = max(err, abs(solve_per(quad, 1, w, [expect1 + 0.01]).lam[0] - expect1))
        expect2 = -1 + w / 4
        err = max(err, abs(solve_per(quad, 2, w, [expect2 + 0.01]).lam[0] - expect2))
    assert err < 1e-9


def test_per_golden_mean_on_cardioid(quad):
    g = (math.sqrt(5) - 1) / 2
    w = cmath.exp(2j * math.pi * g)
    zeta = solve_per(quad, 1, w, [0.0]).lam[0]
    assert abs(zeta - (w / 2 - w * w / 4)) < 1e-10
    # 1024^2 pixels over [-2, 0.5] x [-1.25, 1.25]; probe a 9x9 patch around zeta
    h = 2.5 / 1023
    ix, iy = round((zeta.real + 2) / h), round((zeta.imag + 1.25) / h)
    x0, y0 = -2 + (ix - 4) * h, -1.25 + (iy - 4) * h
    box = Box(x0, x0 + 8 * h, y0, y0 + 8 * h)
    bits = boundary_bitmap(quad, 0, Chart.complex_line([0]), box, 9, 9, depth=400)
    assert bits[3:6, 3:6].any()
    xs, ys, _, _ = box.axes(9, 9)
    lams = (xs[None, 3:6] + 1j * ys[3:6, None])[..., None]
    et, _ = escape_time(quad, 0, lams, 2000)
    assert (et >= 0).any() and (et < 0).any()


def test_per_rejects_parabolic(quad):
    with pytest.raises(ValueError):
        solve_per(quad, 1, 1.0, [0.25])


# ---------------------------------------------------------------------------
# continuation

def test_cardioid_closes(quad):
    path = continue_per(quad, 1, 0.0, 1.0, 256, [0.25])
    thetas = np.array([p[0] for p in path])
    lams = np.array([p[1][0] for p in path])
    assert abs(lams[-1] - lams[0]) < 1e-8
    w = np.exp(2j * np.pi * thetas)
    assert np.max(np.abs(lams - (w / 2 - w * w / 4))) < 1e-8


def test_period_two_circle(quad):
    path = continue_per(quad, 2, 0.02, 0.98, 64, [-0.75])
    for th, lam in path:
        assert abs(lam[0] - (-1 + cmath.exp(2j * math.pi * th) / 4)) < 1e-8


def test_degenerate_continuation(quad):
    path = continue_per(quad, 1, 0.3, 0.3, 10, [0.0])
    assert len(path) == 1


# ---------------------------------------------------------------------------
# multi-neutral

def test_single_target_matches_solve_per(quad):
    spec = NeutralTargetSpec((2,), (0.3,))
    ns = solve_multi_neutral(quad, spec, [[-1.0 + 0.1j]])
    ps = solve_per(quad, 2, spec.multipliers[0], [-1.0 + 0.1j])
    assert abs(ns.lam[0] - ps.lam[0]) < 1e-12
    assert ns.jacobian_rank == 1


@pytest.fixture(scope="module")
def bh_neutral(bh3):
    rng = np.random.default_rng(2024)
    seeds = [rng.uniform(-2, 2, 2) + 1j * rng.uniform(-2, 2, 2) for _ in range(64)]
    seeds = [s * min(1.0, 2 / np.max(np.abs(s))) for s in seeds]
    return solve_multi_neutral(bh3, NeutralTargetSpec((1, 1), (0.5, 1 / 3)), seeds)


def test_bh_two_neutral_fixed_points(bh_neutral):
    sol = bh_neutral
    assert sol.residual <= 1e-8 and sol.jacobian_rank == 2
    assert sol.min_cycle_separation > 1e-6
    targets = sol.spec.multipliers
    for c, w in zip(sol.cycles, targets):
        assert abs(c.multiplier - w) < 1e-8


def test_bh_neutral_roundtrip(bh3, bh_neutral):
    # re-solving the periodic points at lambda recovers both targets
    fixed = periodic_points(bh3, bh_neutral.lam, 1)
    for w in bh_neutral.spec.multipliers:
        assert min(abs(c.multiplier - w) for c in fixed) < 1e-7
    back = neutral_from_json(bh_neutral.to_json())
    assert np.allclose(back.lam, bh_neutral.lam) and back.jacobian_rank == 2
    assert all(verify_neutral(bh3, back).values())


def test_cycles_collided(bh3):
    spec = NeutralTargetSpec((1, 1), (0.5, 0.5))
    lam = np.array([0.4 + 0.3j, 0.2 - 0.5j])
    z = periodic_points(bh3, lam, 1)[0].points[0]
    with pytest.raises(CyclesCollided):
        solve_multi_neutral(bh3, spec, [(lam, np.array([z, z]))])


@pytest.mark.parametrize("thetas", [(1.0,), (0.0,), (2.0,)])
def test_integer_rotation_rejected(thetas):
    with pytest.raises(ValueError):
        NeutralTargetSpec((1,), thetas)


def test_spec_shape_checked():
    with pytest.raises(ValueError):
        NeutralTargetSpec((1, 2), (0.5,))
    with pytest.raises(ValueError):
        NeutralTargetSpec((0,), (0.5,))
