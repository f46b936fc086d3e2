import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from biflab.errors import NotPolynomial
from biflab.family import branner_hubbard, eval_map, quadratic
from biflab.potential import equilibrium_sample, green, lyapunov, write_lyapunov_csv, write_sample_csv

# 2^-60 log|f^60(0)| for z^2 + 4, 400-digit mpmath iteration
G_ZETA4 = 0.75017839144364417318


def test_green_examples(quad):
    assert green(quad, [0], 2).value == pytest.approx(math.log(2), abs=1e-12)
    g = green(quad, [0], 0.5)
    assert g.value == 0 and g.converged
    assert green(quad, [4], 0).value == pytest.approx(G_ZETA4, abs=1e-12)


def test_green_rejects_non_polynomial():
    class Fake:
        is_polynomial = False
    with pytest.raises(NotPolynomial):
        green(Fake(), [0], 1)


@settings(max_examples=200, deadline=None)
@given(zeta=st.complex_numbers(max_magnitude=2, allow_nan=False),
       z=st.complex_numbers(min_magnitude=2.5, max_magnitude=50, allow_nan=False))
def test_green_functional_equation(zeta, z):
    fam = quadratic()
    g0 = green(fam, [zeta], z).value
    g1 = green(fam, [zeta], eval_map(fam, [zeta], z)).value
    assert g0 > 0
    assert g1 == pytest.approx(2 * g0, abs=1e-9)


def test_green_functional_equation_cubic(bh3):
    rng = np.random.default_rng(1)
    for _ in range(50):
        lam = rng.normal(size=2) + 1j * rng.normal(size=2)
        z = 10 * np.exp(2j * np.pi * rng.uniform())
        g0 = green(bh3, lam, z).value
        g1 = green(bh3, lam, eval_map(bh3, lam, z)).value
        if g0 > 0:
            assert g1 == pytest.approx(3 * g0, abs=1e-9)


def test_equilibrium_sample_examples(quad):
    s = equilibrium_sample(quad, [0], 1000, seed=3)
    assert np.max(np.abs(np.abs(s.points) - 1)) < 1e-6
    s = equilibrium_sample(quad, [-2], 1000, seed=3)
    assert np.max(np.abs(s.points.imag)) <= 1e-6 and np.max(np.abs(s.points.real)) <= 2 + 1e-9
    assert len(equilibrium_sample(quad, [0], 0).points) == 0


def test_equilibrium_sample_reproducible(quad):
    a = equilibrium_sample(quad, [-0.1 + 0.7j], 200, seed=7).points
    b = equilibrium_sample(quad, [-0.1 + 0.7j], 200, seed=7).points
    assert np.array_equal(a, b)


def test_lyapunov_examples(quad):
    est = lyapunov(quad, [0], 10000)
    assert est.mc == pytest.approx(math.log(2), abs=1e-3)
    est = lyapunov(quad, [-2], 10000)
    assert est.mc == pytest.approx(math.log(2), abs=5e-3) and est.agrees()
    est = lyapunov(quad, [0.1], 10000)
    assert est.mc == pytest.approx(math.log(2), abs=1e-3)
    assert est.green_formula == pytest.approx(math.log(2), abs=1e-6)


def test_lyapunov_cross_check_random_parameters(quad):
    rng = np.random.default_rng(11)
    for k in range(50):
        zeta = complex(rng.uniform(-2, 1), rng.uniform(-1, 1))
        est = lyapunov(quad, [zeta], 2000, seed=k)
        assert est.agrees(3.0), (zeta, est)
        assert est.mc >= 0.5 * math.log(2) - 5e-2


def test_lyapunov_cubic_cross_check(bh3):
    est = lyapunov(bh3, [0.3 + 0.2j, 0.8 - 0.4j], 4000)
    assert est.agrees(3.0)


def test_csv_exports(tmp_path, quad):
    est = lyapunov(quad, [0.1], 500)
    write_lyapunov_csv(tmp_path / "l.csv", [([0.1], est)])
    rows = list(csv.reader(open(tmp_path / "l.csv")))
    assert rows[0] == ["re_lambda0", "im_lambda0", "L_mc", "L_green", "stderr", "n_points", "seed"]
    assert float(rows[1][2]) == est.mc
    write_sample_csv(tmp_path / "s.csv", equilibrium_sample(quad, [0], 10))
    assert len(list(csv.reader(open(tmp_path / "s.csv")))) == 11
