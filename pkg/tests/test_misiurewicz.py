import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biflab.errors import LandingNotRepelling, RescueExhausted
from biflab.family import ParameterSlice, iterate
from biflab.misiurewicz import MisiurewiczCertificate
from biflab.misiurewicz import MisiurewiczConstraint as MC
from biflab.misiurewicz import (multi_misiurewicz_sweep, solve_misiurewicz, transversality_rescue,
                                verify_certificate, with_flag)

from conftest import BH_CONSTRAINTS


def test_constraint_validation():
    with pytest.raises(ValueError):
        MC(0, 0, 1)
    with pytest.raises(ValueError):
        MC(0, 1, 0)


def test_minus_two(cert_m2):
    c = cert_m2
    assert abs(c.lam[0] + 2) < 1e-12
    assert abs(c.landing_cycles[0][0] - 2) < 1e-12
    assert abs(c.landing_cycle_multipliers[0] - 4) < 1e-10
    assert abs(c.transversality_det + 8) < 1e-8
    assert c.certified and c.rank == 1


def test_zeta_i(quad):
    c = solve_misiurewicz(quad, [MC(0, 2, 2)], [0.9j])
    assert abs(c.lam[0] - 1j) < 1e-12
    cyc = sorted(c.landing_cycles[0], key=lambda z: z.real)
    assert abs(cyc[0] - (1j - 1)) < 1e-10 and abs(cyc[1] + 1j) < 1e-10
    m = c.landing_cycle_multipliers[0]
    assert abs(m - 4 * (1 + 1j)) < 1e-9 and abs(m) > 1


def test_parabolic_collision_refused(quad):
    # near the cusp the long relation collides with the (barely) attracting fixed point
    with pytest.raises(LandingNotRepelling):
        solve_misiurewicz(quad, [MC(0, 1000, 1)], [0.25])


def test_certificate_invariants(bh_cert):
    c = bh_cert
    assert c.residual <= 1e-10
    assert all(abs(m) > 1 + 1e-8 for m in c.landing_cycle_multipliers)
    rows = np.linalg.norm(c.g_jacobian, axis=1)
    assert abs(c.transversality_det) > 1e-8 * np.prod(rows)
    assert c.rank == 2


def test_orbit_round_trip(bh3, bh_cert):
    # c_i returns to the landing cycle, up to the multiplier's amplification of the residual
    for con, cyc, m in zip(bh_cert.constraints, bh_cert.landing_cycles, bh_cert.landing_cycle_multipliers):
        c = bh3.critical(con.critical_index, bh_cert.lam)
        pts = iterate(bh3, bh_cert.lam, c, con.preperiod + 3 * con.period).points[con.preperiod:]
        cyc = np.asarray(cyc)
        for j, z in enumerate(pts):
            gain = max(1.0, abs(m)) ** np.ceil(j / con.period)
            assert np.min(np.abs(z - cyc)) <= 1e-8 * gain


def test_row_swap_flips_sign(bh3, bh_cert):
    swapped = solve_misiurewicz(bh3, BH_CONSTRAINTS[::-1], bh_cert.lam)
    assert np.allclose(swapped.lam, bh_cert.lam, atol=1e-12)
    assert abs(swapped.transversality_det + bh_cert.transversality_det) <= 1e-8 * abs(bh_cert.transversality_det)


@settings(max_examples=10, deadline=None)
@given(st.complex_numbers(min_magnitude=0.2, max_magnitude=5, allow_nan=False, allow_infinity=False),
       st.complex_numbers(min_magnitude=0.2, max_magnitude=5, allow_nan=False, allow_infinity=False))
def test_direction_scaling(s0, s1):
    from biflab.family import branner_hubbard
    from conftest import BH_SEED
    fam = branner_hubbard(3)
    base = solve_misiurewicz(fam, BH_CONSTRAINTS, BH_SEED)
    slc = ParameterSlice(base.lam, np.diag([s0, s1]))
    scaled = solve_misiurewicz(fam, BH_CONSTRAINTS, base.lam, slice=slc)
    expect = base.transversality_det * s0 * s1
    assert abs(scaled.transversality_det - expect) <= 1e-8 * abs(expect)
    assert scaled.certified == base.certified


def test_json_round_trip(bh3, bh_cert, tmp_path):
    doc = bh_cert.to_json()
    p = tmp_path / "cert.json"
    p.write_text(json.dumps(doc))
    back = MisiurewiczCertificate.from_json(json.loads(p.read_text()))
    assert np.array_equal(back.lam, bh_cert.lam)
    assert back.transversality_det == bh_cert.transversality_det
    assert all(verify_certificate(bh3, back).values())


def test_tampered_certificate_fails(bh3, bh_cert):
    doc = bh_cert.to_json()
    doc["lambda"][0][0] += 1e-4
    checks = verify_certificate(bh3, MisiurewiczCertificate.from_json(doc))
    assert not checks["residual"]
    doc = bh_cert.to_json()
    doc["transversality_det"][0] *= 2
    assert not verify_certificate(bh3, MisiurewiczCertificate.from_json(doc))["transversality_det"]


# ---------------------------------------------------------------------------
# sweeps

def test_bh_sweep_rank_two(bh3):
    certs = multi_misiurewicz_sweep(bh3, ([0, 0], 2.0), 2, 4, 3, 512, seed=1)
    assert certs
    assert all(c.rank == 2 and c.certified for c in certs)
    assert [c.residual for c in certs] == sorted(c.residual for c in certs)
    lams = np.array([c.lam for c in certs])
    d = np.linalg.norm(lams[:, None] - lams[None, :], axis=-1) + np.eye(len(certs))
    assert d.min() > 1e-6


def test_quadratic_sweep_known_points(quad):
    certs = multi_misiurewicz_sweep(quad, ([-0.85], 1.35), 1, 3, 2, 256, seed=0)
    lams = np.array([c.lam[0] for c in certs])
    assert np.min(np.abs(lams + 2)) < 1e-10
    assert min(np.min(np.abs(lams - 1j)), np.min(np.abs(lams + 1j))) < 1e-10


def test_empty_sweep(bh3):
    assert multi_misiurewicz_sweep(bh3, ([0, 0], 2.0), 2, 4, 3, 0) == []


# ---------------------------------------------------------------------------
# rescue

def test_rescue_passthrough(bh3, bh_cert):
    assert transversality_rescue(bh3, bh_cert) is bh_cert


def test_rescue_doubled_constraint(bh3, bh_cert):
    bad = with_flag(bh_cert, False)
    from dataclasses import replace
    bad = replace(bad, constraints=(MC(0, 3, 1), MC(0, 3, 1)), requested=())
    with pytest.raises(RescueExhausted):
        transversality_rescue(bh3, bad, budget=64)


def test_rescue_near_certificate(bh3, bh_cert):
    out = transversality_rescue(bh3, with_flag(bh_cert, False), budget=64)
    assert out.certified and out.rank == 2
    assert all(verify_certificate(bh3, out).values())
