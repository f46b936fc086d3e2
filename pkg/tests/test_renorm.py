import json
import warnings

import numpy as np
import pytest

from biflab import renorm
from biflab.currents import activity_test, escape_time
from biflab.errors import InsufficientScales, InsufficientSpread, NoCenterFound, OutsideChart
from biflab.family import ParameterSlice
from biflab.misiurewicz import MisiurewiczConstraint as MC
from biflab.misiurewicz import solve_misiurewicz, verify_certificate
from biflab.renorm import WindowSearch

# frozen high-precision oracles (mpmath Newton, 40 digits)
CENTER3 = -1.7548776662466927600495      # real root of z^3 + 2 z^2 + z + 1
ANCHOR6 = -1.772892903381623799434128    # f^6(0) = 0 seeded at CENTER3 - 0.02
TIP3 = -1.790327491999345703396901954    # f^7(0) = f^4(0): tip of the period-3 copy


def _quiet(fn, *a, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", renorm.WindowTooDistorted)
        return fn(*a, **kw)


# ---------------------------------------------------------------------------
# windows

def test_period_three_center(quad_window):
    w = quad_window
    assert w.n1 == 3
    assert abs(w.center[0] - CENTER3) < 1e-12
    assert abs(np.polyval([1, 2, 1, 1], w.center[0])) < 1e-12


def test_period_six_anchor(quad_window):
    w = quad_window
    assert abs(w.slice.point([w.anchor_t])[0] - ANCHOR6) < 1e-12
    assert abs(w.psi(-1)[0] - ANCHOR6) < 1e-12
    assert w.scale != 0 and w.h_sup >= 0
    assert w.epsilon_ok == (w.h_sup < 0.25)


def test_window_json_round_trip(quad_window, bh_windows):
    for w in [quad_window, *bh_windows]:
        doc = json.loads(json.dumps(w.to_json()))
        back = renorm.window_from_json(doc)
        checks = renorm.verify_window(back, doc)
        assert all(checks.values()), checks


def test_tampered_window_fails(quad_window):
    doc = quad_window.to_json()
    doc["center_t"][0] += 1e-4
    checks = renorm.verify_window(renorm.window_from_json(doc), quad_window.to_json())
    assert not checks["center_superattracting"] or not checks["center_position"]


def test_passive_slice_has_no_center(bh3, bh_cert):
    base = np.array([0, 3], dtype=complex)
    direction = np.array([1, 0], dtype=complex)
    assert activity_test(bh3, 0, base, 0.1, direction=direction).status == "Passive"
    with pytest.raises(NoCenterFound):
        renorm.find_renorm_window(bh3, bh_cert, 0, WindowSearch(seed=base, radius=0.1),
                                  slice=ParameterSlice(base, direction[None, :]))


def test_bh_windows(bh3, bh_windows):
    for i, w in enumerate(bh_windows):
        assert w.critical_index == i and w.n1 >= 1
        assert w.h_sup_core < w.h_sup


@pytest.fixture(scope="module")
def five_windows(quad, bh3, cert_m2, bh_cert):
    cert_i = solve_misiurewicz(quad, [MC(0, 2, 2)], [0.9j])
    return [
        (quad, cert_m2, 0, dict(seed=-1.77, radius=0.1)),
        (quad, cert_m2, 0, dict(seed=-1.9408, radius=0.02)),
        (quad, cert_i, 0, dict(radius=0.1)),
        (bh3, bh_cert, 0, dict(radius=0.05)),
        (bh3, bh_cert, 1, dict(radius=0.05)),
    ]


def test_shrinking_search_never_worsens(five_windows):
    for fam, cert, i, kw in five_windows:
        wide = _quiet(renorm.find_renorm_window, fam, cert, i, WindowSearch(**kw))
        kw = dict(kw, radius=kw["radius"] / 2)
        narrow = _quiet(renorm.find_renorm_window, fam, cert, i, WindowSearch(**kw))
        # equal windows agree only to rounding
        assert narrow.h_sup <= wide.h_sup * (1 + 1e-9)
        assert narrow.h_sup_core <= wide.h_sup_core * (1 + 1e-9)


def test_anchor_consistency(quad_window, bh_windows):
    for w in [quad_window, *bh_windows]:
        d0 = renorm.straightening_check(w, 0, "center")
        d1 = renorm.straightening_check(w, -1, "center")
        assert d0.passed and d0.period == w.n1 and abs(d0.multiplier) < 1e-6
        assert d1.passed and d1.period == 2 * w.n1 and abs(d1.multiplier) < 1e-6


# ---------------------------------------------------------------------------
# baby Mandelbrot sets

@pytest.fixture(scope="module")
def model_m():
    return renorm.model_mandelbrot(201, 200)


def test_baby_center_member(quad_window, bh_windows):
    for w in [quad_window, *bh_windows]:
        assert renorm.baby_mandelbrot(w, 51, 200).member(0j)


def test_baby_zeta_four_escapes(quad_window):
    b = renorm.baby_mandelbrot(quad_window, 101, 200, R_param=5.0)
    assert not b.member(4 + 0j)
    # model orbit 0 -> 4 -> 20 leaves D(0, 20) at the second step
    assert abs(4**2 + 4) >= 20


def test_baby_area_ratio(quad_window, bh_windows, model_m):
    for w in [quad_window, *bh_windows]:
        b = renorm.baby_mandelbrot(w, 201, 200)
        assert 0.5 <= b.area() / model_m.area() <= 2.0


def test_model_matches_escape_engine(quad, model_m):
    xs = np.linspace(-2.5, 2.5, 201)
    et, _ = escape_time(quad, 0, (xs[None, :] + 1j * xs[:, None])[..., None], 200, radius=20.0)
    assert np.array_equal(et < 0, model_m.grid)


# ---------------------------------------------------------------------------
# straightening

def test_neutral_cardioid_point(quad_window, bh_windows):
    for w in [quad_window, *bh_windows]:
        d = renorm.straightening_check(w, -0.75, "neutral")
        assert d.passed and d.period == w.n1
        assert abs(abs(d.multiplier) - 1) < 1e-8
        assert d.distance <= 5 * w.h_sup_core * abs(w.scale) * np.linalg.norm(w.slice.directions[0])


def test_multiplier_mode_on_model():
    w = renorm.identity_window()
    d = renorm.straightening_check(w, -0.1 + 0.1j, "multiplier")
    assert d.passed and d.distance < 1e-10


def test_straightening_outside_chart(quad_window):
    with pytest.raises(OutsideChart):
        renorm.straightening_check(quad_window, 3.0, "center")


def test_straightening_rejects_non_center(quad_window):
    with pytest.raises(ValueError):
        renorm.straightening_check(quad_window, 0.1, "center")


# ---------------------------------------------------------------------------
# product embedding

def test_single_factor_reduces_to_chart(quad, cert_m2, quad_window):
    for z in (0, -1):
        s = renorm.product_embedding_sample(quad, cert_m2, [z], windows=[quad_window])
        assert np.allclose(s.lam, quad_window.psi(z), atol=1e-12)
    tip = renorm.product_embedding_sample(quad, cert_m2, [-2], windows=[quad_window])
    assert abs(tip.lam[0] - TIP3) < 1e-12


def test_bh_centers(bh3, bh_cert, bh_windows):
    s = renorm.product_embedding_sample(bh3, bh_cert, (0, 0), windows=bh_windows)
    assert s.residual <= 1e-9
    for d, w in zip(s.per_factor_diagnostics, bh_windows):
        assert d["passed"] and d["exact_period"] == w.n1 and d["multiplier"] < 1e-6
    assert all(renorm.verify_embedding_sample(bh3, json.loads(json.dumps(s.to_json()))).values())


def test_bh_misiurewicz_inputs(bh3, bh_cert, bh_windows):
    s = renorm.product_embedding_sample(bh3, bh_cert, (-2, -2), windows=bh_windows)
    assert all(d["passed"] for d in s.per_factor_diagnostics)
    cons = [MC(f["critical_index"], f["steps"][1], f["steps"][0] - f["steps"][1]) for f in s.factors]
    cert = solve_misiurewicz(bh3, cons, s.lam)
    assert cert.certified and cert.rank == 2
    assert np.linalg.norm(cert.lam - s.lam) < 1e-9
    assert all(verify_certificate(bh3, cert).values())


def test_factor_independence(bh3, bh_cert, bh_windows):
    # moving zeta_2 keeps lambda inside the tube of factor 1
    from biflab.renorm import _factor, _factor_diagnostic
    f0 = _factor(bh_windows[0], 0)
    for z2 in (0, -1, -2, CENTER3):
        s = renorm.product_embedding_sample(bh3, bh_cert, (0, z2), windows=bh_windows)
        assert _factor_diagnostic(bh3, s.lam, 0, f0)["passed"]


def test_embedding_rejects_bad_input(bh3, bh_cert, bh_windows):
    with pytest.raises(ValueError):
        renorm.product_embedding_sample(bh3, bh_cert, (0,), windows=bh_windows)
    with pytest.raises(ValueError):
        renorm.product_embedding_sample(bh3, bh_cert, (0.1, 0), windows=bh_windows)


# ---------------------------------------------------------------------------
# estimators

def test_boxdim_square():
    assert abs(renorm.boxdim(np.ones((256, 256), bool)).dimension - 2.0) <= 0.05


def test_boxdim_segment():
    bits = np.zeros((256, 256), bool)
    bits[100, :] = True
    assert abs(renorm.boxdim(bits).dimension - 1.0) <= 0.05


def test_boxdim_points():
    t = np.random.default_rng(0).uniform(size=20000)
    assert abs(renorm.boxdim(t + 0.3j * t).dimension - 1.0) <= 0.05


def test_boxdim_boundary_of_m(quad, capsys):
    xs = np.linspace(-2.25, 0.75, 2048)
    ys = np.linspace(-1.5, 1.5, 2048)
    et, _ = escape_time(quad, 0, (xs[None, :] + 1j * ys[:, None])[..., None], 200)
    inside = et < 0
    core = inside & np.roll(inside, 1, 0) & np.roll(inside, -1, 0) & np.roll(inside, 1, 1) & np.roll(inside, -1, 1)
    est = renorm.boxdim(inside & ~core)
    print(f"boundary of M, 2048^2: box dimension {est.dimension:.3f}, R^2 {est.r2:.4f}")
    assert 1.1 <= est.dimension <= 2.0 and est.r2 > 0.98


def test_boxdim_insufficient_scales():
    with pytest.raises(InsufficientScales):
        renorm.boxdim(np.ones((8, 8), bool))
    with pytest.raises(InsufficientScales):
        renorm.boxdim(np.zeros(0, complex))


def test_holder_affine():
    rng = np.random.default_rng(1)
    d = 10 ** rng.uniform(-4, 0, 200)
    est = renorm.holder_exponent_probe(np.c_[d, 0.37 * d])
    assert abs(est.exponent - 1.0) <= 0.02 and est.ci_low <= 1.0 <= est.ci_high


def test_holder_constant_map():
    d = 10 ** np.linspace(-4, 0, 100)
    with pytest.raises(InsufficientSpread):
        renorm.holder_exponent_probe(np.c_[d, np.zeros_like(d)])


def test_holder_narrow_spread():
    d = np.linspace(0.1, 0.5, 100)
    with pytest.raises(InsufficientSpread):
        renorm.holder_exponent_probe(np.c_[d, d])


def test_holder_quadratic_window(quad_window):
    samples = renorm.window_center_samples(quad_window, 8)
    est = renorm.holder_exponent_probe(renorm.center_distance_pairs(samples))
    assert 0.8 <= est.exponent <= 1.2
