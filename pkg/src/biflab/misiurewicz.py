"""Misiurewicz parameters: critical points falling onto repelling cycles.

A constraint ``(i, m, p)`` asks for ``f^(m+p)(c_i) = f^m(c_i)``.  Solutions are
certified by the repelling margin of the landing cycle and by the
transversality of the constraint hypersurfaces, measured through the
Jacobian of ``chi_i(lambda) = f^m(c_i(lambda)) - a_i(lambda)`` where
``a_i`` is the holomorphically continued landing point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ._numerics import critical_orbit_jet, critical_orbit_jets, damped_newton, orbit, orbit_jet
from .config import tol
from .errors import DegenerateJacobian, LandingNotRepelling, NoConvergence, RescueExhausted
from .family import Family, ParameterSlice, as_param


@dataclass(frozen=True)
class MisiurewiczConstraint:
    critical_index: int
    preperiod: int
    period: int

    def __post_init__(self):
        if self.preperiod < 1 or self.period < 1 or self.critical_index < 0:
            raise ValueError("need critical_index >= 0, preperiod >= 1, period >= 1")

    def to_json(self):
        return {"critical_index": self.critical_index, "preperiod": self.preperiod, "period": self.period}


def _cjson(v):
    return [[complex(x).real, complex(x).imag] for x in np.ravel(v)]


def _cparse(v):
    return np.array([complex(a, b) for a, b in v], dtype=complex)


@dataclass(frozen=True)
class MisiurewiczCertificate:
    """Solved critical relations with their certificates.

    ``g_jacobian`` is the Jacobian of the defining relations
    ``f^(m+p)(c_i) - f^m(c_i)`` in the slice coordinates and
    ``transversality_det`` its determinant; ``chi_jacobian`` is the Jacobian
    of the landing map chi.  Row i of the former equals row i of the latter
    times ``(landing multiplier_i - 1)``.
    """

    lam: np.ndarray
    constraints: tuple
    landing_cycle_multipliers: tuple
    landing_cycles: tuple
    residual: float
    chi_jacobian: np.ndarray
    g_jacobian: np.ndarray
    transversality_det: complex
    certified: bool
    rank: int
    slice_base: np.ndarray = None
    slice_directions: np.ndarray = None
    requested: tuple = ()
    meta: dict = field(default_factory=dict)

    @property
    def k(self) -> int:
        return len(self.constraints)

    def to_json(self) -> dict:
        return {
            "type": "misiurewicz_certificate",
            "lambda": _cjson(self.lam),
            "constraints": [c.to_json() for c in self.constraints],
            "landing_cycle_multipliers": _cjson(self.landing_cycle_multipliers),
            "landing_cycles": [_cjson(c) for c in self.landing_cycles],
            "residual": self.residual,
            "chi_jacobian": [_cjson(r) for r in self.chi_jacobian],
            "g_jacobian": [_cjson(r) for r in self.g_jacobian],
            "transversality_det": [self.transversality_det.real, self.transversality_det.imag],
            "certified": self.certified,
            "rank": self.rank,
            "slice": {"base": _cjson(self.slice_base), "directions": [_cjson(d) for d in self.slice_directions]},
            "arithmetic": "IEEE double precision with margins; not interval-certified",
        }

    @classmethod
    def from_json(cls, doc) -> "MisiurewiczCertificate":
        return cls(
            lam=_cparse(doc["lambda"]),
            constraints=tuple(MisiurewiczConstraint(**c) for c in doc["constraints"]),
            landing_cycle_multipliers=tuple(_cparse(doc["landing_cycle_multipliers"])),
            landing_cycles=tuple(tuple(_cparse(c)) for c in doc["landing_cycles"]),
            residual=float(doc["residual"]),
            chi_jacobian=np.array([_cparse(r) for r in doc["chi_jacobian"]]),
            g_jacobian=np.array([_cparse(r) for r in doc["g_jacobian"]]),
            transversality_det=complex(*doc["transversality_det"]),
            certified=bool(doc["certified"]),
            rank=int(doc["rank"]),
            slice_base=_cparse(doc["slice"]["base"]),
            slice_directions=np.array([_cparse(d) for d in doc["slice"]["directions"]]),
        )

    def slice(self) -> ParameterSlice:
        return ParameterSlice(self.slice_base, self.slice_directions)


def _default_slice(family, seed, k):
    if k == family.param_dim:
        return ParameterSlice.full(seed)
    return ParameterSlice(seed, np.eye(family.param_dim, dtype=complex)[:k])


def _primes(n):
    out, k = [], 2
    while k * k <= n:
        if n % k == 0:
            out.append(k)
            while n % k == 0:
                n //= k
        k += 1
    return out + ([n] if n > 1 else [])


def _deflation_pairs(m, p):
    """Orbit differences f^a(c) - f^b(c) vanishing on shorter preperiods or periods."""
    pairs = {(m - 1 + p, m - 1), (p, 0)} if m >= 1 else set()
    pairs |= {(m + p // r, m) for r in _primes(p)}
    pairs.discard((m + p, m))
    return sorted(pairs)


def _relations(family, slc, constraints, deflate=False):
    """Residuals f^(m+p)(c_i) - f^m(c_i) and their slice Jacobian.

    With ``deflate`` each row is divided by the orbit differences that also
    vanish when c_i is periodic or has a shorter preperiod, so that Newton
    is not drawn into superattracting centers.
    """
    k = len(constraints)

    def F(t):
        lam, dlam = slc.point_jacobian(t)
        r = np.empty(k, dtype=complex)
        J = np.empty((k, len(t)), dtype=complex)
        with np.errstate(all="ignore"):
            for row, con in enumerate(constraints):
                m, n = con.preperiod, con.preperiod + con.period
                dens = _deflation_pairs(m, con.period) if deflate else []
                steps = {m, n} | {x for d in dens for x in d}
                jets = critical_orbit_jets(family, lam, con.critical_index, steps)
                v = jets[n][0] - jets[m][0]
                g = jets[n][1] - jets[m][1]
                for a, b in dens:
                    d = jets[a][0] - jets[b][0]
                    v, g = v / d, (g - v * (jets[a][1] - jets[b][1]) / d) / d
                r[row] = v
                J[row] = g @ dlam
        return r, J

    return F


def _minimal_shape(family, lam, con, check):
    """Smallest (m, p) describing the orbit of c_i; m may drop to 0."""
    c = family.critical(con.critical_index, lam)
    pts = orbit(family, lam, c, con.preperiod + con.period)
    y = pts[con.preperiod]
    scale = 1 + abs(y)
    p = next((q for q in range(1, con.period + 1)
              if con.period % q == 0 and abs(orbit(family, lam, y, q)[-1] - y) <= check * scale), con.period)
    m = con.preperiod
    while m > 0 and abs(pts[m - 1] - pts[m - 1 + p]) <= check * scale:
        m -= 1
    return m, p


def _landing(family, lam, y, p):
    """Refine the periodic landing point and return (a, multiplier, da/dlambda, cycle)."""
    z = complex(y)
    for _ in range(8):
        jet = orbit_jet(family, lam, z, p)
        step = (jet.z - z) / (jet.dz - 1)
        if not np.isfinite(step):
            break
        z -= step
        if abs(step) <= 1e-16 * (1 + abs(z)):
            break
    jet = orbit_jet(family, lam, z, p)
    mult = complex(jet.dz)
    da = -jet.dl / (jet.dz - 1)
    return z, mult, da, tuple(complex(w) for w in orbit(family, lam, z, p - 1))


def _certify(family, slc, t, constraints, residual, requested):
    lam, dlam = slc.point_jacobian(t)
    check = tol("misiurewicz.orbit_check")
    shapes = []
    mults, cycles, chi_rows = [], [], []
    for con in constraints:
        m, p = _minimal_shape(family, lam, con, check)
        shapes.append((con.critical_index, m, p))
        zm, gm, _ = critical_orbit_jet(family, lam, con.critical_index, m)
        a, mult, da, cyc = _landing(family, lam, zm, p)
        mults.append(mult)
        cycles.append(cyc)
        chi_rows.append((gm - da) @ dlam)
    for (i, m, p), mult in zip(shapes, mults):
        if m == 0 or abs(mult) <= 1 + tol("misiurewicz.repelling_margin"):
            raise LandingNotRepelling(
                f"critical point {i} lands on a cycle with |multiplier| = {abs(mult):.6g}", multiplier=mult)
    relabeled = tuple(MisiurewiczConstraint(i, m, p) for i, m, p in shapes)
    # the Jacobian of the relabeled relations is the transversality witness
    _, G = _relations(family, slc, relabeled)(t)
    det = complex(np.linalg.det(G)) if G.shape[0] == G.shape[1] else complex("nan")
    norms = np.prod(np.linalg.norm(G, axis=1))
    certified = bool(G.shape[0] == G.shape[1] and abs(det) > tol("misiurewicz.tol_trans") * norms)
    sv = np.linalg.svd(G, compute_uv=False)
    rank = int(np.sum(sv > tol("misiurewicz.tol_trans") * max(sv.max(), 1e-300)))
    return MisiurewiczCertificate(
        lam=lam, constraints=relabeled, landing_cycle_multipliers=tuple(mults), landing_cycles=tuple(cycles),
        residual=float(residual), chi_jacobian=np.array(chi_rows), g_jacobian=G, transversality_det=det,
        certified=certified, rank=rank if certified else min(rank, len(constraints) - 1),
        slice_base=np.array(slc.base), slice_directions=np.array(slc.directions), requested=tuple(requested),
    )


def _confined(slc, F, region):
    if region is None:
        return F

    def G(t):
        if not region(slc.base + np.asarray(t) @ slc.directions):
            raise ArithmeticError("Newton left the search region")
        return F(t)

    return G


def solve_misiurewicz(family: Family, constraints, seed, slice: ParameterSlice | None = None,
                      newton_tol: float | None = None, max_iter: int | None = None,
                      deflate: bool = False, region=None) -> MisiurewiczCertificate:
    """Solve the critical relations near ``seed`` and certify the result.

    ``deflate`` runs a first Newton phase on the deflated relations (useful
    for long relations seeded near hyperbolic centers); the final polish and
    the certificate always use the plain relations.  ``region`` (a
    predicate on parameters) confines Newton: trial points outside it are
    rejected as failed steps.

    Raises :class:`LandingNotRepelling` if some landing cycle is not repelling
    with margin, and :class:`DegenerateJacobian` (carrying the uncertified
    solution) when the relations do not meet transversely.
    """
    newton_tol = tol("misiurewicz.newton_tol") if newton_tol is None else newton_tol
    constraints = tuple(constraints)
    seed = as_param(family, seed)
    slc = slice if slice is not None else _default_slice(family, seed, len(constraints))
    if slc.dim < len(constraints):
        raise ValueError("slice dimension must be at least the number of constraints")
    F = _confined(slc, _relations(family, slc, constraints), region)
    t0 = slc.project(seed)
    if deflate:
        Fd = _confined(slc, _relations(family, slc, constraints, deflate=True), region)
        pre = damped_newton(Fd, t0, tol=newton_tol * 1e-3,
                            max_iter=60, max_backtracks=16, xtol=1e-14)
        if np.isfinite(pre.residual):
            t0 = pre.x
    # polish below the acceptance tolerance, then judge against it
    res = damped_newton(F, t0, tol=newton_tol * 1e-3,
                        max_iter=int(tol("cycles.max_iter")) if max_iter is None else max_iter, max_backtracks=int(tol("cycles.max_backtracks")))
    if not (res.residual <= newton_tol):
        raise NoConvergence(f"critical relations not solved (residual {res.residual:.3g})", residual=res.residual)
    cert = _certify(family, slc, res.x, constraints, res.residual, constraints)
    if not cert.certified:
        raise DegenerateJacobian(f"transversality fails: |det| = {abs(cert.transversality_det):.3g}",
                                 certificate=cert)
    return cert


def verify_certificate(family: Family, cert: MisiurewiczCertificate) -> dict:
    """Recompute every invariant of a stored certificate; returns {name: bool}."""
    lam = np.asarray(cert.lam, dtype=complex)
    slc = cert.slice()
    t = slc.project(lam)
    checks = {}
    r, G = _relations(family, slc, cert.constraints)(t)
    checks["residual"] = bool(np.linalg.norm(r) <= 10 * tol("misiurewicz.newton_tol"))
    oc = tol("misiurewicz.orbit_check")
    mults_ok, orbit_ok = True, True
    for con, mult, cyc in zip(cert.constraints, cert.landing_cycle_multipliers, cert.landing_cycles):
        c = family.critical(con.critical_index, lam)
        pts = orbit(family, lam, c, con.preperiod + 3 * con.period)
        cyc = np.asarray(cyc)
        tail = pts[con.preperiod:]
        # a residual-sized landing error is amplified by the cycle multiplier once per period
        gain = max(1.0, abs(mult)) ** np.ceil(np.arange(len(tail)) / con.period)
        err = np.min(np.abs(tail[:, None] - cyc[None, :]), axis=1)
        if np.any(err > oc * (1 + np.abs(cyc).max()) * gain):
            orbit_ok = False
        zm = pts[con.preperiod]
        _, m_now, _, _ = _landing(family, lam, zm, con.period)
        if abs(m_now - mult) > 1e-8 * (1 + abs(mult)) or abs(m_now) <= 1 + tol("misiurewicz.repelling_margin"):
            mults_ok = False
    checks["orbit_round_trip"] = orbit_ok
    checks["landing_multipliers"] = mults_ok
    det = complex(np.linalg.det(G))
    checks["transversality_det"] = bool(abs(det - cert.transversality_det) <= 1e-6 * (1 + abs(det)))
    checks["transversal"] = bool(abs(det) > tol("misiurewicz.tol_trans") * np.prod(np.linalg.norm(G, axis=1)))
    return checks


# ---------------------------------------------------------------------------
# sweeps and rescue

@dataclass(frozen=True)
class Window:
    """Polydisk |lambda_j - center_j| <= radius."""

    center: np.ndarray
    radius: float

    def sample(self, rng, n):
        m = len(self.center)
        r = self.radius * np.sqrt(rng.uniform(size=(n, m)))
        ang = rng.uniform(0, 2 * np.pi, size=(n, m))
        return self.center[None, :] + r * np.exp(1j * ang)

    def contains(self, lam) -> bool:
        return bool(np.all(np.abs(np.asarray(lam) - self.center) <= self.radius * (1 + 1e-12)))


def _as_window(window, family):
    if isinstance(window, Window):
        return window
    center, radius = window
    return Window(as_param(family, center), float(radius))


def multi_misiurewicz_sweep(family: Family, window, k: int, max_preperiod: int, max_period: int,
                            n_seeds: int, seed: int = 0, shapes=None, deflate: bool = False,
                            starts=None, confine: bool = False) -> list:
    """Multi-start search for certified k-fold Misiurewicz parameters in a polydisk window.

    Each start draws a parameter uniformly from the window and a constraint
    shape per critical point ``0..k-1``; only fully certified solutions
    inside the window are kept, deduplicated and sorted by residual.
    ``shapes`` (a list of k-tuples of (preperiod, period)) replaces the
    random shapes, used cyclically; ``starts`` replaces the random start
    points (``n_seeds`` is then ignored); ``confine`` keeps every Newton
    iterate inside the window.
    """
    window = _as_window(window, family)
    rng = np.random.default_rng(seed)
    if starts is None:
        starts = window.sample(rng, n_seeds)
    starts = np.asarray(starts, dtype=complex)
    n_seeds = len(starts)
    drawn = rng.integers(1, [max_preperiod + 1, max_period + 1], size=(n_seeds, k, 2))
    if shapes:
        drawn = [shapes[j % len(shapes)] for j in range(n_seeds)]
    found: list[MisiurewiczCertificate] = []
    for s, sh in zip(starts, drawn):
        cons = tuple(MisiurewiczConstraint(i, int(m), int(p)) for i, (m, p) in enumerate(sh))
        try:
            cert = solve_misiurewicz(family, cons, s, deflate=deflate,
                                     region=window.contains if confine else None)
        except (NoConvergence, LandingNotRepelling, DegenerateJacobian, ArithmeticError,
                np.linalg.LinAlgError):
            continue
        if window.contains(cert.lam):
            found.append(cert)
    return dedup_certificates(found)


def dedup_certificates(certs) -> list:
    radius = tol("misiurewicz.dedup")
    out: list[MisiurewiczCertificate] = []
    for c in sorted(certs, key=lambda c: (c.residual, tuple(np.round(np.abs(c.lam), 12)))):
        if all(np.linalg.norm(c.lam - o.lam) > radius for o in out):
            out.append(c)
    return out


def transversality_rescue(family: Family, certificate: MisiurewiczCertificate, budget: int = 64,
                          radius: float = 1e-2, seed: int = 0) -> MisiurewiczCertificate:
    """Re-seed around a degenerate solution until a transverse one is found."""
    if certificate.certified:
        return certificate
    cons = certificate.requested or certificate.constraints
    idx = [c.critical_index for c in cons]
    if len(set(idx)) < len(idx):
        raise RescueExhausted("a critical point is constrained twice; every solution is degenerate")
    rng = np.random.default_rng(seed)
    lam0 = np.asarray(certificate.lam, dtype=complex)
    for attempt in range(budget):
        r = radius * (1 + attempt / 8)
        start = lam0 + r * (rng.normal(size=lam0.shape) + 1j * rng.normal(size=lam0.shape))
        try:
            return solve_misiurewicz(family, cons, start)
        except (NoConvergence, LandingNotRepelling, DegenerateJacobian, ArithmeticError,
                np.linalg.LinAlgError):
            continue
    raise RescueExhausted(f"no transverse solution within {budget} attempts")


def with_flag(cert: MisiurewiczCertificate, certified: bool) -> MisiurewiczCertificate:
    return replace(cert, certified=certified)
