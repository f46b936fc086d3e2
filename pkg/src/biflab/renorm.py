"""Quadratic-like renormalization windows, baby Mandelbrot copies and embeddings.

A window along a one-dimensional parameter slice is an affine chart
``psi(zeta) = slice.point(t_c + zeta * scale)`` in which the return map
``f^n1`` near the critical point ``c_i``, rescaled by
``w = alpha(lambda) (z - c_i)`` with ``alpha = (f^n1)''(c_i) / 2``, reads

    w -> w**2 + zeta + h(w, zeta).

The chart is fitted to two superattracting anchors (model centers 0 and -1)
and ``h`` is measured by sampling.  Hybrid conjugacy itself is never
constructed; it is checked through observable consequences only (periods of
centers, multipliers of attracting and neutral cycles).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import _kernels
from ._numerics import critical_orbit_jet, critical_orbit_jets, damped_newton, orbit, orbit_jet
from .config import tol
from .cycles import minimal_period, periodic_points, solve_per
from .errors import (AlternationDiverged, ChartDegenerate, FactorDiagnosticFailed, InsufficientScales,
                     InsufficientSpread, NoCenterFound, NoConvergence, OutsideChart, PolishFailed,
                     WindowTooDistorted, WrongExactPeriod)
from .family import Family, ParameterSlice, _horner, as_param, quadratic

PROXY_NOTE = "hybrid conjugacy checked through observable consequences only"

# ---------------------------------------------------------------------------
# model quadratic family


def model_center_period(zeta, max_q: int = 64, tol_center: float = 1e-9) -> int | None:
    """Period of the superattracting model orbit of 0 under z^2 + zeta, if any."""
    z = 0j
    for q in range(1, max_q + 1):
        z = z * z + zeta
        if abs(z) < tol_center:
            return q
        if abs(z) > 4:
            return None
    return None


def model_misiurewicz(zeta, max_pre: int = 8, max_per: int = 8, tol_rel: float = 1e-9):
    """Minimal (preperiod, period) of 0 under z^2 + zeta, or None."""
    pts = [0j]
    for _ in range(max_pre + max_per):
        pts.append(pts[-1] ** 2 + zeta)
    for m in range(1, max_pre + 1):
        for p in range(1, max_per + 1):
            if abs(pts[m + p] - pts[m]) <= tol_rel * (1 + abs(pts[m])):
                return m, p
    return None


def model_attracting_cycle(zeta, burn: int = 4000, max_q: int = 64):
    """(period, multiplier) of the attracting model cycle at ``zeta``."""
    z = 0j
    for _ in range(burn):
        z = z * z + zeta
        if abs(z) > 4:
            raise ValueError("model orbit escapes: zeta is outside M")
    for q in range(1, max_q + 1):
        pts = [z]
        for _ in range(q):
            pts.append(pts[-1] ** 2 + zeta)
        if abs(pts[-1] - z) < 1e-10:
            w = complex(np.prod([2 * p for p in pts[:-1]]))
            if abs(w) < 1:
                return q, w
    raise ValueError("no attracting model cycle detected")


def model_neutral_cycle(zeta, max_q: int = 8, tol_neutral: float = 1e-6):
    """(period, multiplier) of a neutral model cycle at ``zeta``."""
    q_fam = quadratic()
    for q in range(1, max_q + 1):
        for c in periodic_points(q_fam, [zeta], q):
            if abs(abs(c.multiplier) - 1) < tol_neutral:
                return q, c.multiplier
    raise ValueError("no neutral model cycle at this parameter")


def model_centers(max_period: int, radius: float = 2.0) -> list:
    """All centers (zeta, period) of hyperbolic components of M with period <= max_period."""
    fam = quadratic()
    out = []
    for q in range(1, max_period + 1):
        N = 2 ** (q - 1)
        k = np.arange(N)
        z = radius * np.exp(2j * np.pi * (k + 0.25) / N) * (1 + 1e-3 * np.cos(5.0 * k))
        for _ in range(500):
            val, grad, _ = critical_orbit_jet(fam, z[:, None], 0, q)
            with np.errstate(all="ignore"):
                ratio = val / grad[:, 0]
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1.0)
            s = (1.0 / diff).sum(axis=1) - 1.0
            with np.errstate(all="ignore"):
                w = ratio / (1.0 - ratio * s)
            w[~np.isfinite(w)] = 0
            z = z - w
            if np.max(np.abs(w)) < 1e-15:
                break
        for zeta in z:
            if model_center_period(zeta, q, 1e-8) == q:
                out.append((complex(zeta), q))
    return out


# ---------------------------------------------------------------------------
# windows


@dataclass(frozen=True)
class WindowSearch:
    """Where to look for the superattracting center of a window.

    ``seed`` is a parameter point (default: the certificate parameter);
    centers must land within ``radius`` of it.  Candidate return times are
    ``p, 2p, ..., max_multiple * p`` with ``p`` the certificate period.
    """

    seed: object = None
    radius: float = 0.1
    max_multiple: int = 8
    n_seeds: int = 9
    return_times: tuple | None = None


@dataclass(frozen=True, eq=False)
class RenormWindow:
    family: Family
    slice: ParameterSlice
    critical_index: int
    n1: int
    center_t: complex
    scale: complex
    R: float
    h_sup: float
    h_sup_core: float
    epsilon_ok: bool
    anchor_t: complex
    meta: dict = field(default_factory=dict)

    def t(self, zeta):
        return self.center_t + np.asarray(zeta) * self.scale

    def psi(self, zeta) -> np.ndarray:
        return self.slice.point([self.t(zeta)])

    @property
    def center(self) -> np.ndarray:
        return self.slice.point([self.center_t])

    def to_json(self) -> dict:
        cj = lambda z: [complex(z).real, complex(z).imag]  # noqa: E731
        return {
            "type": "renorm_window",
            "family": self.family.to_json(),
            "critical_index": self.critical_index,
            "return_time": self.n1,
            "center": [cj(z) for z in self.center],
            "center_t": cj(self.center_t),
            "scale": cj(self.scale),
            "anchor_t": cj(self.anchor_t),
            "R": self.R,
            "h_sup": self.h_sup,
            "h_sup_core": self.h_sup_core,
            "epsilon_ok": self.epsilon_ok,
            "anchor": [cj(z) for z in self.slice.point([self.anchor_t])],
            "slice": {"base": [cj(z) for z in self.slice.base],
                      "directions": [[cj(z) for z in d] for d in self.slice.directions],
                      "corrected": bool(self.slice.relations),
                      "held_constraints": [c.to_json() for c in self.meta.get("held", ())]},
            "meta": {"alpha": cj(self.meta.get("alpha", 0j)),
                     "return_times_tried": list(self.meta.get("return_times_tried", ())),
                     "search_seed": [cj(z) for z in self.meta.get("search_seed", ())],
                     "search_radius": self.meta.get("search_radius")},
            "note": PROXY_NOTE,
        }


def window_from_json(doc) -> RenormWindow:
    """Rebuild a window (slice corrector included) from :meth:`RenormWindow.to_json`."""
    from .family import from_json as family_from_json
    from .misiurewicz import MisiurewiczConstraint

    cp = lambda v: complex(v[0], v[1])  # noqa: E731
    fam = family_from_json(doc["family"])
    sl = doc["slice"]
    held = tuple(MisiurewiczConstraint(**c) for c in sl.get("held_constraints", []))
    base = np.array([cp(z) for z in sl["base"]])
    dirs = np.array([[cp(z) for z in d] for d in sl["directions"]])
    rels = tuple(_misiurewicz_relation(fam, c) for c in held)
    slc = ParameterSlice(base, dirs, relations=rels)
    dm = doc.get("meta", {})
    meta = {"held": held, "alpha": cp(dm.get("alpha", [0, 0]))}
    if dm.get("search_radius") is not None:
        meta["search_seed"] = np.array([cp(z) for z in dm["search_seed"]])
        meta["search_radius"] = float(dm["search_radius"])
    return RenormWindow(fam, slc, int(doc["critical_index"]), int(doc["return_time"]), cp(doc["center_t"]),
                        cp(doc["scale"]), float(doc["R"]), float(doc["h_sup"]), float(doc["h_sup_core"]),
                        bool(doc["epsilon_ok"]), cp(doc["anchor_t"]), meta)


def verify_window(window: RenormWindow, stored: dict | None = None) -> dict:
    """Re-derive a window: both anchors superattracting with exact periods, chart and h_sup."""
    fam, i, n1 = window.family, window.critical_index, window.n1
    checks = {}
    for name, t, n in (("center", window.center_t, n1), ("anchor", window.anchor_t, 2 * n1)):
        lam = window.slice.point([t])
        c = complex(fam.critical(i, lam))
        p = minimal_period(fam, lam, c, n, tol_cycle=1e-8)
        _, mult = _cycle_through(fam, lam, c, n)
        checks[f"{name}_period"] = p == n
        checks[f"{name}_superattracting"] = bool(abs(mult) < tol("renorm.center_mult"))
        if stored is not None:
            key = "center" if name == "center" else "anchor"
            ref = np.array([complex(*z) for z in stored[key]])
            checks[f"{name}_position"] = bool(np.linalg.norm(lam - ref) <= 1e-9 * (1 + np.linalg.norm(ref)))
    checks["scale"] = bool(abs((window.center_t - window.anchor_t) - window.scale) <= 1e-12 * (1 + abs(window.scale)))
    core = perturbation_sup(fam, window.slice, i, n1, window.center_t, window.scale, 2.0)
    checks["h_sup_core"] = bool(abs(core - window.h_sup_core) <= 1e-6 * (1 + window.h_sup_core))
    checks["epsilon_flag"] = window.epsilon_ok == bool(window.h_sup < tol("renorm.delta_emp"))
    return checks


def _misiurewicz_relation(family, con):
    def rel(lam):
        lam = np.asarray(lam, dtype=complex)
        z1, g1, _ = critical_orbit_jet(family, lam, con.critical_index, con.preperiod + con.period)
        z0, g0, _ = critical_orbit_jet(family, lam, con.critical_index, con.preperiod)
        if lam.ndim == 1:
            return np.array([z1 - z0]), (g1 - g0)[None, :]
        return (z1 - z0)[:, None], (g1 - g0)[:, None, :]
    rel.batched = True
    return rel


def window_slice(family: Family, certificate, critical_index: int) -> ParameterSlice:
    """1-d slice through the certificate keeping every other critical relation satisfied."""
    lam = np.asarray(certificate.lam, dtype=complex)
    others = [c for c in certificate.constraints if c.critical_index != critical_index]
    if not others:
        if certificate.slice_directions is not None and len(certificate.slice_directions) == 1:
            return ParameterSlice(lam, certificate.slice_directions)
        return ParameterSlice.line(lam)
    rels = tuple(_misiurewicz_relation(family, c) for c in others)
    G = np.concatenate([r(lam)[1] for r in rels])
    _, _, vh = np.linalg.svd(G)
    direction = vh[-1].conj()
    return ParameterSlice(lam, direction[None, :], relations=rels)


def _center_system(family, slc, i, n):
    def F(t):
        lam, dlam = slc.point_jacobian(t)
        z, g, _ = critical_orbit_jet(family, lam, i, n)
        c = family.critical(i, lam)
        gc = family.critical_grad(i, lam)
        return np.array([z - c]), ((g - gc) @ dlam).reshape(1, -1)
    return F


def _solve_center(family, slc, i, n, t0, tol_res=1e-11, box=None):
    F0 = _center_system(family, slc, i, n)
    t0 = complex(t0)

    def F(t):
        # keep Newton inside the search region; trial points outside count as failures
        if box is not None and abs(t[0] - t0) > box:
            raise ArithmeticError("left the search region")
        return F0(t)

    res = damped_newton(F, np.atleast_1d(t0), tol=tol_res * 1e-2, max_iter=60, max_backtracks=16, xtol=1e-14)
    if not np.isfinite(res.residual) or res.residual > tol_res:
        return None
    t = complex(res.x[0])
    lam = slc.point([t])
    c = complex(family.critical(i, lam))
    if minimal_period(family, lam, c, n, tol_cycle=1e-8) != n:
        return None
    dF = F(res.x)[1][0, 0]
    if not np.isfinite(dF) or abs(dF) < 1e-12:
        return None
    return t, complex(dF)


def _alpha(family, lam, i, n1):
    lam = np.asarray(lam, dtype=complex)
    c = family.critical(i, lam)
    jet = orbit_jet(family, lam, c, n1, second=True)
    return c, jet.ddz / 2


def _slice_points(slc, ts):
    ts = np.asarray(ts, dtype=complex)
    lam = slc.base + ts[..., None] * slc.directions[0]
    if not slc.relations:
        return lam
    if not all(getattr(r, "batched", False) for r in slc.relations):
        flat = [slc.point([t]) for t in ts.ravel()]
        return np.array(flat).reshape(ts.shape + (len(slc.base),))
    # batched corrector, same iteration as ParameterSlice.point_jacobian
    x0 = lam.reshape(-1, len(slc.base))
    E = slc.correction
    s = np.zeros((len(x0), E.shape[0]), dtype=complex)
    with np.errstate(all="ignore"):
        for _ in range(60):
            x = x0 + s @ E
            parts = [r(x) for r in slc.relations]
            v = np.concatenate([p[0] for p in parts], axis=1)
            g = np.concatenate([p[1] for p in parts], axis=1)
            A = g @ E.T
            ok = np.isfinite(v).all(axis=1) & np.isfinite(A).all(axis=(1, 2))
            ok &= np.abs(np.linalg.det(np.where(ok[:, None, None], A, np.eye(A.shape[1])))) > 0
            ds = np.zeros_like(s)
            ds[ok] = np.linalg.solve(A[ok], -v[ok][..., None])[..., 0]
            s = s + ds
            if np.max(np.abs(ds)) <= 1e-15 * (1 + np.max(np.abs(x0))):
                break
    return (x0 + s @ E).reshape(lam.shape)


def _disk_grid(R, n):
    xs = np.linspace(-R, R, n)
    g = (xs[None, :] + 1j * xs[:, None]).ravel()
    return g[np.abs(g) <= R * (1 + 1e-12)]


def perturbation_sup(family, slc, i, n1, center_t, scale, R, n=32) -> float:
    """sup |h| of the rescaled return map against w^2 + zeta on an n^4 sample of D(0, R)^2."""
    zetas = _disk_grid(R, n)
    ws = _disk_grid(R, n)
    lams = _slice_points(slc, center_t + zetas * scale)
    c, alpha = _alpha(family, lams, i, n1)
    a = family.coefficients(lams)
    z = c[:, None] + ws[None, :] / alpha[:, None]
    with np.errstate(all="ignore"):
        for _ in range(n1):
            z = _horner(a[:, None, :], z)[0]
        h = alpha[:, None] * (z - c[:, None]) - ws[None, :] ** 2 - zetas[:, None]
    h = np.abs(h)
    return float(np.max(np.where(np.isfinite(h), h, np.inf)))


def find_renorm_window(family: Family, certificate, critical_index: int | None = None,
                       search: WindowSearch | None = None, slice: ParameterSlice | None = None,
                       R: float | None = None) -> RenormWindow:
    """Locate a quadratic-like window for ``c_i`` near a Misiurewicz certificate.

    (a) Newton on ``f^n1(c_i) = c_i`` along the slice for candidate return
    times, keeping the smallest one with an exact-period center within the
    search radius; (b) the period-2 n1 center seeded one estimated scale
    away fixes ``scale = t_c - t_(-1)``; (c) ``h_sup`` samples the rescaled
    return map on D(0, R)^2 (``h_sup_core`` on D(0, 2)^2).
    """
    search = search or WindowSearch()
    R = tol("renorm.R") if R is None else R
    cons = list(certificate.constraints)
    if critical_index is None:
        critical_index = cons[0].critical_index
    con = next((c for c in cons if c.critical_index == critical_index), cons[0])
    slc = slice if slice is not None else window_slice(family, certificate, critical_index)
    seed = certificate.lam if search.seed is None else as_param(family, search.seed)
    t_seed = complex(slc.project(seed)[0])
    scale_dir = np.linalg.norm(slc.directions[0])
    r_t = search.radius / scale_dir
    rng = np.random.default_rng(0)
    ring = [t_seed] + [t_seed + 0.5 * r_t * np.exp(2j * np.pi * (k + rng.uniform()) / (search.n_seeds - 1))
                       for k in range(max(search.n_seeds - 1, 0))]
    times = search.return_times or tuple(con.period * k for k in range(1, search.max_multiple + 1))
    found = None
    tried = []
    for n1 in times:
        best = None
        for t0 in ring:
            sol = _solve_center(family, slc, critical_index, n1, t0, box=2 * r_t)
            if sol is None:
                continue
            t, dF = sol
            if abs(t - t_seed) <= r_t and (best is None or abs(t - t_seed) < abs(best[0] - t_seed)):
                best = (t, dF)
        tried.append(n1)
        if best is not None:
            found = (n1, *best)
            break
    if found is None:
        raise NoCenterFound(f"no superattracting center for return times {tried} within radius {search.radius}")
    n1, t_c, dF = found
    lam_c = slc.point([t_c])
    _, alpha = _alpha(family, lam_c, critical_index, n1)
    alpha = complex(alpha)
    s0 = 1.0 / (alpha * dF)
    anchor = None
    for f in (1.0, 0.8, 1.25, 0.6, 1.6):
        sol = _solve_center(family, slc, critical_index, 2 * n1, t_c - f * s0, box=3 * abs(s0))
        if sol is not None and abs(sol[0] - t_c) > 1e-9 * (1 + abs(t_c)):
            anchor = sol[0]
            break
    if anchor is None:
        raise NoCenterFound(f"period-{2 * n1} anchor not found near the center")
    scale = t_c - anchor
    if abs(scale) * scale_dir < tol("renorm.chart_min"):
        raise ChartDegenerate(f"|scale| = {abs(scale):.3g} below the chart minimum")
    h_sup = perturbation_sup(family, slc, critical_index, n1, t_c, scale, R)
    h_core = perturbation_sup(family, slc, critical_index, n1, t_c, scale, 2.0)
    ok = bool(h_sup < tol("renorm.delta_emp"))
    held = tuple(c for c in cons if c.critical_index != critical_index) if slice is None else ()
    win = RenormWindow(family, slc, critical_index, n1, t_c, scale, R, h_sup, h_core, ok, anchor,
                       {"alpha": alpha, "scale_estimate": s0, "return_times_tried": tried, "held": held,
                        "search_seed": np.asarray(seed, dtype=complex), "search_radius": float(search.radius)})
    if not ok:
        warnings.warn(f"window h_sup = {h_sup:.3g} >= delta_emp", WindowTooDistorted, stacklevel=2)
    return win


# ---------------------------------------------------------------------------
# baby Mandelbrot sets


@dataclass(frozen=True, eq=False)
class BabyMandelbrot:
    window: RenormWindow | None
    grid: np.ndarray
    R_param: float
    meta: dict = field(default_factory=dict)

    @property
    def pixel_area(self) -> float:
        n = self.grid.shape[0]
        return (2 * self.R_param / (n - 1)) ** 2

    def area(self) -> float:
        """Member area in model (zeta) units."""
        return float(self.grid.sum() * self.pixel_area)

    def member(self, zeta) -> bool:
        n = self.grid.shape[0]
        h = 2 * self.R_param / (n - 1)
        j = int(round((zeta.imag + self.R_param) / h))
        i = int(round((zeta.real + self.R_param) / h))
        return bool(self.grid[j, i])


def _escape_grid(family, slc, i, n1, ts, max_iter, R):
    lams = _slice_points(slc, ts)
    flat = lams.reshape(-1, family.param_dim)
    c, alpha = _alpha(family, flat, i, n1)
    a = np.ascontiguousarray(family.coefficients(flat))
    esc = _kernels.renorm_escape(a, np.ascontiguousarray(c), np.ascontiguousarray(alpha), n1, max_iter, float(R))
    return esc.reshape(ts.shape)


def baby_mandelbrot(window: RenormWindow, resolution: int = 256, max_iter: int = 200,
                    R_param: float | None = None) -> BabyMandelbrot:
    """Membership bitmap of the true renormalized family on [-R_param, R_param]^2 (zeta units).

    Row j holds Im zeta = -R_param + j h; the centre pixel is zeta = 0 when
    ``resolution`` is odd.
    """
    R_param = tol("renorm.R_param") if R_param is None else R_param
    xs = np.linspace(-R_param, R_param, resolution)
    zetas = xs[None, :] + 1j * xs[:, None]
    esc = _escape_grid(window.family, window.slice, window.critical_index, window.n1,
                       window.t(zetas), max_iter, window.R)
    return BabyMandelbrot(window, esc < 0, R_param, {"max_iter": max_iter, "resolution": resolution,
                                                      "R": window.R})


def identity_window(R: float | None = None) -> RenormWindow:
    """The quadratic family itself as a window (n1 = 1, unit scale)."""
    R = tol("renorm.R") if R is None else R
    fam = quadratic()
    slc = ParameterSlice.line([0j])
    return RenormWindow(fam, slc, 0, 1, 0j, 1 + 0j, R, 0.0, 0.0, True, -1 + 0j, {"model": True})


def model_mandelbrot(resolution: int = 256, max_iter: int = 200, R_param: float | None = None,
                     R: float | None = None) -> BabyMandelbrot:
    """Model M rendered by the same escape engine as the baby copies."""
    return baby_mandelbrot(identity_window(R), resolution, max_iter, R_param)


# ---------------------------------------------------------------------------
# straightening diagnostics


@dataclass(frozen=True)
class StraighteningDiagnostic:
    mode: str
    zeta: complex
    passed: bool
    period: int | None = None
    multiplier: complex | None = None
    target: complex | None = None
    distance: float | None = None
    lam: np.ndarray | None = None
    note: str = PROXY_NOTE

    def to_json(self) -> dict:
        cj = lambda z: None if z is None else [complex(z).real, complex(z).imag]  # noqa: E731
        return {"type": "straightening_diagnostic", "mode": self.mode, "zeta": cj(self.zeta),
                "passed": self.passed, "period": self.period, "multiplier": cj(self.multiplier),
                "target": cj(self.target), "distance": self.distance,
                "lambda": None if self.lam is None else [cj(z) for z in self.lam], "note": self.note}


def _cycle_through(family, lam, z0, n, steps=30):
    """Newton-refined periodic point of period n near z0, and its multiplier."""
    z = complex(z0)
    for _ in range(steps):
        jet = orbit_jet(family, lam, z, n)
        if not np.isfinite(jet.z):
            raise PolishFailed("orbit overflow while refining the cycle")
        dz = complex(jet.dz)
        if abs(dz - 1) < 1e-300:
            break
        step = (complex(jet.z) - z) / (dz - 1)
        z -= step
        if abs(step) < 1e-15 * (1 + abs(z)):
            break
    jet = orbit_jet(family, lam, z, n)
    return z, complex(jet.dz)


def straightening_check(window: RenormWindow, zeta, mode: str = "center") -> StraighteningDiagnostic:
    """Numerical proxy of the straightening at model parameter ``zeta``.

    center: a model center of period q must correspond to a superattracting
    cycle of period q n1 (|multiplier| < renorm.center_mult after Newton).
    multiplier: the attracting cycle at psi(zeta) must carry the model
    multiplier within renorm.tol_straight.  neutral: solve for the neutral
    multiplier of the model in the window and report the parameter distance
    to psi(zeta), which must be at most 5 h_sup_core |scale|.
    """
    zeta = complex(zeta)
    if abs(zeta) > tol("renorm.R_param"):
        raise OutsideChart(f"|zeta| = {abs(zeta):.3g} outside the chart domain")
    fam, slc, i, n1 = window.family, window.slice, window.critical_index, window.n1
    if mode == "center":
        q = model_center_period(zeta)
        if q is None:
            raise ValueError("zeta is not a model center")
        n = q * n1
        sol = _solve_center(fam, slc, i, n, window.t(zeta), box=abs(window.scale))
        if sol is None:
            raise PolishFailed(f"no exact period-{n} center near psi(zeta)")
        lam = slc.point([sol[0]])
        c = complex(fam.critical(i, lam))
        _, mult = _cycle_through(fam, lam, c, n)
        return StraighteningDiagnostic("center", zeta, abs(mult) < tol("renorm.center_mult"), n, mult, 0j,
                                       float(np.linalg.norm(lam - window.psi(zeta))), lam)
    if mode == "multiplier":
        q, w = model_attracting_cycle(zeta)
        n = q * n1
        lam = window.psi(zeta)
        z = complex(fam.critical(i, lam))
        a = fam.coefficients(lam)
        with np.errstate(all="ignore"):
            for _ in range(2000 * n):
                z = complex(_horner(a, z)[0])
        if not np.isfinite(z) or abs(z) > fam.escape_radius(lam):
            return StraighteningDiagnostic("multiplier", zeta, False, n, None, w, None, lam)
        z, mult = _cycle_through(fam, lam, z, n)
        ok = minimal_period(fam, lam, z, n) == n and abs(mult - w) <= tol("renorm.tol_straight")
        return StraighteningDiagnostic("multiplier", zeta, bool(ok), n, mult, w, abs(mult - w), lam)
    if mode == "neutral":
        q, w = model_neutral_cycle(zeta)
        n = q * n1
        seed = window.psi(zeta)
        try:
            sol = solve_per(fam, n, w, seed, slice=slc)
        except (NoConvergence, WrongExactPeriod) as exc:
            raise PolishFailed(f"neutral cycle not found near psi(zeta): {exc}") from exc
        dist = float(np.linalg.norm(sol.lam - seed))
        bound = 5 * window.h_sup_core * abs(window.scale) * np.linalg.norm(slc.directions[0])
        return StraighteningDiagnostic("neutral", zeta, dist <= bound, n, sol.cycle.multiplier, w, dist, sol.lam)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# product embedding


@dataclass(frozen=True)
class ProductEmbeddingSample:
    model_input: tuple
    lam: np.ndarray
    per_factor_diagnostics: tuple
    residual: float
    sweeps: int
    factors: tuple = ()
    raw_residual: float = 0.0

    def to_json(self) -> dict:
        cj = lambda z: [complex(z).real, complex(z).imag]  # noqa: E731
        return {"type": "product_embedding_sample", "model_input": [cj(z) for z in self.model_input],
                "lambda": [cj(z) for z in self.lam], "residual": self.residual, "sweeps": self.sweeps,
                "raw_residual": self.raw_residual, "factors": list(self.factors), "diagnostics": list(self.per_factor_diagnostics),
                "note": PROXY_NOTE}


def _primes(n):
    out, k = [], 2
    while k * k <= n:
        if n % k == 0:
            out.append(k)
            while n % k == 0:
                n //= k
        k += 1
    if n > 1:
        out.append(n)
    return out


def _factor(window: RenormWindow, zeta):
    """Defining relation of factor ``zeta`` as (kind, (hi, lo), deflation pairs).

    The relation is ``f^hi(c) - f^lo(c)`` divided by the differences that
    vanish on shorter preperiods or periods, so Newton cannot settle on the
    superattracting center that also solves the undeflated Misiurewicz
    equation (or on a lower-period center).
    """
    n1 = window.n1
    q = model_center_period(zeta)
    if q is not None:
        n = q * n1
        return ("center", (n, 0), tuple((n // r, 0) for r in _primes(n)))
    mp = model_misiurewicz(zeta)
    if mp is not None:
        m, p = mp
        # g^(m-1)(0) is the symmetric partner of a cycle point, so f lands one step later
        lo, per = (m - 1) * n1 + 1, p * n1
        dens = [(lo - 1 + per, lo - 1)] + [(lo + per // r, lo) for r in _primes(per)]
        return ("misiurewicz", (lo + per, lo), tuple(dens))
    raise ValueError(f"model input {zeta} is neither a center nor a Misiurewicz point")


def _factor_value(family, lam, i, fac, raw=False):
    _, (hi, lo), dens = fac
    steps = {hi, lo} | {x for d in dens for x in d}
    jets = critical_orbit_jets(family, lam, i, steps)
    N = jets[hi][0] - jets[lo][0]
    gN = jets[hi][1] - jets[lo][1]
    if raw:
        return complex(N), gN
    D, gD = 1.0 + 0j, np.zeros_like(gN)
    with np.errstate(all="ignore"):
        for a, b in dens:
            d, gd = jets[a][0] - jets[b][0], jets[a][1] - jets[b][1]
            gD = gD * d + D * gd
            D = D * d
        v = N / D
        return complex(v), (gN - v * gD) / D


def _factor_diagnostic(family, lam, i, fac) -> dict:
    kind, (hi, lo), _ = fac
    c = complex(family.critical(i, lam))
    if kind == "center":
        p = minimal_period(family, lam, c, hi, tol_cycle=1e-8)
        _, mult = _cycle_through(family, lam, c, hi)
        ok = p == hi and abs(mult) < tol("renorm.center_mult")
        return {"factor": "center", "period": hi, "exact_period": p, "multiplier": abs(mult), "passed": bool(ok)}
    y = orbit(family, lam, c, lo)[-1]
    per = hi - lo
    p = minimal_period(family, lam, y, per, tol_cycle=1e-8)
    _, mult = _cycle_through(family, lam, y, per)
    ok = p is not None and abs(mult) > 1 + tol("misiurewicz.repelling_margin")
    return {"factor": "misiurewicz", "preperiod": lo, "period": per, "exact_period": p,
            "landing_multiplier": abs(mult), "passed": bool(ok)}


def product_embedding_sample(family: Family, certificate, zetas, windows=None, search: WindowSearch | None = None,
                             seed: int = 0) -> ProductEmbeddingSample:
    """Parameter realizing model inputs ``zetas`` in the k windows of a joint certificate.

    Alternating projection: factor j's relation is re-solved by 1-d Newton
    along column j of the (pseudo-)inverse Jacobian of all factor relations,
    in ascending order, until the joint residual is at most
    ``renorm.joint_tol``; one random-order retry precedes AlternationDiverged.
    """
    zetas = tuple(complex(z) for z in zetas)
    cons = list(certificate.constraints)
    if len(zetas) != len(cons):
        raise ValueError("need one model input per certified critical point")
    idx = [c.critical_index for c in cons]
    if windows is None:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", WindowTooDistorted)
            windows = [find_renorm_window(family, certificate, i, search) for i in idx]
    facs = [_factor(w, z) for w, z in zip(windows, zetas)]
    lam_star = np.asarray(certificate.lam, dtype=complex)
    lam0 = lam_star + sum(w.psi(z) - lam_star for w, z in zip(windows, zetas))
    joint_tol = tol("renorm.joint_tol")
    max_sweeps = int(tol("renorm.max_sweeps"))
    # every iterate stays inside the search disks that defined the windows
    # (the chart disk around the prediction for windows built without one)
    disks = []
    for w in windows:
        if "search_radius" in w.meta:
            disks.append((w.meta["search_seed"], w.meta["search_radius"]))
        else:
            disks.append((lam0, tol("renorm.R_param") * abs(w.scale) * np.linalg.norm(w.slice.directions[0])))

    def inside(lam):
        return all(np.linalg.norm(lam - c) <= r for c, r in disks)

    def residual(lam):
        return float(np.linalg.norm([_factor_value(family, lam, i, f)[0] for i, f in zip(idx, facs)]))

    def run(order):
        lam = lam0.copy()
        for sweep in range(1, max_sweeps + 1):
            J = np.array([_factor_value(family, lam, i, f)[1] for i, f in zip(idx, facs)])
            if not np.all(np.isfinite(J)):
                return None, sweep
            V = np.linalg.pinv(J)
            for j in order:
                v = V[:, j]
                i, f = idx[j], facs[j]

                def F(s, v=v, i=i, f=f, base=lam):
                    val, g = _factor_value(family, base + s[0] * v, i, f)
                    if not inside(base + s[0] * v):
                        val = complex("nan")
                    return np.array([val]), np.array([[g @ v]])

                res = damped_newton(F, np.zeros(1, dtype=complex), tol=joint_tol * 1e-3, max_iter=60)
                if np.isfinite(res.residual):
                    lam = lam + res.x[0] * v
            r = residual(lam)
            if not np.isfinite(r):
                return None, sweep
            if r <= joint_tol:
                return lam, sweep
        return None, max_sweeps

    order = list(range(len(zetas)))
    lam, sweeps = run(order)
    if lam is None:
        order = list(np.random.default_rng(seed).permutation(len(zetas)))
        lam, sweeps = run(order)
    if lam is None:
        raise AlternationDiverged(f"joint residual above {joint_tol} after {max_sweeps} sweeps")
    if not inside(lam):
        raise AlternationDiverged("alternation left the chart domain of the windows")
    diags = []
    for j, (i, f) in enumerate(zip(idx, facs)):
        d = _factor_diagnostic(family, lam, i, f)
        diags.append(d)
        if not d["passed"]:
            raise FactorDiagnosticFailed(f"factor {j} fails its diagnostic: {d}", factor=j)
    return ProductEmbeddingSample(zetas, lam, tuple(diags), residual(lam), sweeps,
                                  tuple({"kind": k, "steps": list(st), "critical_index": i,
                                         "deflation": [list(d) for d in dens]}
                                        for i, (k, st, dens) in zip(idx, facs)),
                                  float(np.linalg.norm([_factor_value(family, lam, i, f, raw=True)[0]
                                                        for i, f in zip(idx, facs)])))


# ---------------------------------------------------------------------------
# dimension and regularity estimators


@dataclass(frozen=True)
class BoxDimension:
    dimension: float
    r2: float
    stderr: float
    scales: tuple
    counts: tuple

    def to_json(self):
        return {"type": "boxdim", "dimension": self.dimension, "r2": self.r2, "stderr": self.stderr,
                "scales": list(self.scales), "counts": list(self.counts)}


def boxdim(data, min_box: int = 1, max_box: int | None = None) -> BoxDimension:
    """Box-counting dimension of a 2-d bitset or of a point set.

    Bitsets are counted with dyadic boxes of ``min_box .. max_box`` pixels;
    point sets (complex array or (N, 2) reals) are normalized to their
    bounding square and binned at dyadic scales down to 2^-10.
    """
    arr = np.asarray(data)
    if arr.dtype == bool and arr.ndim == 2:
        n = max(arr.shape)
        size = 1 << int(math.ceil(math.log2(n)))
        bits = np.zeros((size, size), bool)
        bits[: arr.shape[0], : arr.shape[1]] = arr
        max_box = max_box or size // 4
        sizes = [s for s in (1 << k for k in range(0, 32)) if min_box <= s <= max_box]
        counts = []
        for s in sizes:
            m = size // s
            counts.append(int(bits.reshape(m, s, m, s).any(axis=(1, 3)).sum()))
        eps = [s / size for s in sizes]
    else:
        pts = arr.astype(complex) if np.iscomplexobj(arr) or arr.ndim == 1 else arr[:, 0] + 1j * arr[:, 1]
        if pts.size == 0:
            raise InsufficientScales("empty point set")
        lo = np.array([pts.real.min(), pts.imag.min()])
        span = max(np.ptp(pts.real), np.ptp(pts.imag)) or 1.0
        u = np.stack([(pts.real - lo[0]) / span, (pts.imag - lo[1]) / span], axis=1)
        eps, counts = [], []
        for k in range(2, 11):
            m = 1 << k
            cells = np.minimum((u * m).astype(np.int64), m - 1)
            counts.append(len(np.unique(cells[:, 0] * m + cells[:, 1])))
            eps.append(1.0 / m)
    pairs = [(e, c) for e, c in zip(eps, counts) if c > 0]
    if len(pairs) < 4:
        raise InsufficientScales(f"only {len(pairs)} usable dyadic scales (need 4)")
    e, c = np.array(pairs).T
    fit = stats.linregress(np.log(1 / e), np.log(c))
    return BoxDimension(float(fit.slope), float(fit.rvalue**2), float(fit.stderr),
                        tuple(float(x) for x in e), tuple(int(x) for x in c))


@dataclass(frozen=True)
class HolderEstimate:
    exponent: float
    ci_low: float
    ci_high: float
    r2: float
    n_pairs: int

    def to_json(self):
        return {"type": "holder_estimate", "exponent": self.exponent, "ci": [self.ci_low, self.ci_high],
                "r2": self.r2, "n_pairs": self.n_pairs}


def holder_exponent_probe(pairs, min_pairs: int = 50, min_decades: float = 2.0) -> HolderEstimate:
    """Regression exponent of log(parameter distance) against log(model distance)."""
    arr = np.asarray(list(pairs), dtype=float).reshape(-1, 2)
    arr = arr[(arr[:, 0] > 0) & (arr[:, 1] > 0) & np.all(np.isfinite(arr), axis=1)]
    if len(arr) < min_pairs:
        raise InsufficientSpread(f"{len(arr)} usable pairs (need {min_pairs})")
    x, y = np.log10(arr[:, 0]), np.log10(arr[:, 1])
    if x.max() - x.min() < min_decades:
        raise InsufficientSpread(f"model distances span {x.max() - x.min():.2f} decades (need {min_decades})")
    fit = stats.linregress(x, y)
    q = stats.t.ppf(0.975, len(arr) - 2)
    return HolderEstimate(float(fit.slope), float(fit.slope - q * fit.stderr), float(fit.slope + q * fit.stderr),
                          float(fit.rvalue**2), len(arr))


def window_center_samples(window: RenormWindow, max_period: int = 8, match: float = 0.2) -> list:
    """(zeta, lambda) for model centers of period <= max_period realized in the window.

    Each model center is polished to an exact-period q n1 center from the
    chart prediction; correspondence is kept only when the polished point
    stays within ``match * |scale|`` of the prediction and is not shared.
    """
    out = []
    for zeta, q in model_centers(max_period, 2.0):
        if abs(zeta) > tol("renorm.R_param"):
            continue
        sol = _solve_center(window.family, window.slice, window.critical_index, q * window.n1, window.t(zeta),
                            box=2 * match * abs(window.scale))
        if sol is None or abs(sol[0] - window.t(zeta)) > match * abs(window.scale):
            continue
        out.append((zeta, sol[0]))
    ts = np.array([t for _, t in out])
    keep = [k for k in range(len(out)) if np.sum(np.abs(ts - ts[k]) < 1e-10 * (1 + abs(ts[k]))) == 1]
    return [(out[k][0], window.slice.point([out[k][1]])) for k in keep]


def center_distance_pairs(samples) -> list:
    pairs = []
    for a in range(len(samples)):
        for b in range(a + 1, len(samples)):
            pairs.append((abs(samples[a][0] - samples[b][0]), float(np.linalg.norm(samples[a][1] - samples[b][1]))))
    return pairs


def verify_embedding_sample(family: Family, doc: dict) -> dict:
    """Re-derive a stored embedding sample: joint residual and per-factor diagnostics."""
    lam = np.array([complex(*z) for z in doc["lambda"]])
    facs = [(f["critical_index"], (f["kind"], tuple(f["steps"]), tuple(tuple(d) for d in f["deflation"])))
            for f in doc["factors"]]
    with np.errstate(all="ignore"):
        r = float(np.linalg.norm([_factor_value(family, lam, i, f)[0] for i, f in facs]))
    checks = {"joint_residual": bool(np.isfinite(r) and r <= 10 * tol("renorm.joint_tol"))}
    for j, (i, f) in enumerate(facs):
        checks[f"factor_{j}"] = bool(_factor_diagnostic(family, lam, i, f)["passed"])
    return checks
