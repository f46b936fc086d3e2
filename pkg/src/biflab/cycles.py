"""Periodic orbits, multipliers and solvers for multiplier loci.

The loci ``Per_n(w)`` (parameters with a cycle of exact period ``n`` and
multiplier ``w``) are never built as polynomials.  They are reached by Newton's
method on the pair of equations

    f_lambda^n(z) - z = 0,     (f_lambda^n)'(z) - w = 0

in the unknowns (slice coordinate, cycle point), and exact periods are
certified by testing orbit minimality.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from ._numerics import damped_newton, multiplier, orbit, orbit_jet
from .config import tol
from .errors import (ContinuationStalled, CyclesCollided, NoConvergence, PeriodTooLarge,
                     RankDeficient, RootSolveFailure, WrongExactPeriod)
from .family import Family, ParameterSlice, _horner, as_param


def classify(m: complex) -> str:
    r = abs(m)
    if r < 1e-8:
        return "superattracting"
    if r < 1 - 1e-8:
        return "attracting"
    if abs(r - 1) <= 1e-8:
        return "neutral"
    return "repelling"


@dataclass(frozen=True)
class Cycle:
    points: tuple
    multiplier: complex
    multiplicity: int = 1

    @property
    def period(self) -> int:
        return len(self.points)

    @property
    def classification(self) -> str:
        return classify(self.multiplier)

    @property
    def rotation(self) -> float | None:
        """arg(multiplier) / 2pi in [0, 1) for neutral cycles."""
        if self.classification != "neutral":
            return None
        return (cmath.phase(self.multiplier) / (2 * math.pi)) % 1.0

    def to_json(self) -> dict:
        return {
            "points": [[z.real, z.imag] for z in self.points],
            "multiplier": [self.multiplier.real, self.multiplier.imag],
            "multiplicity": self.multiplicity,
            "classification": self.classification,
        }


def minimal_period(family: Family, lam, z, n: int, tol_cycle: float | None = None) -> int | None:
    """Smallest p dividing n with |f^p(z) - z| <= tol (1 + |z|), or None."""
    tol_cycle = tol("cycles.tol_cycle") if tol_cycle is None else tol_cycle
    pts = orbit(family, lam, z, n)
    for p in range(1, n + 1):
        if n % p == 0 and abs(pts[p] - pts[0]) <= tol_cycle * (1 + abs(pts[0])):
            return p
    return None


def make_cycle(family: Family, lam, z, p: int, multiplicity: int = 1) -> Cycle:
    pts = orbit(family, lam, z, p - 1)
    return Cycle(tuple(complex(w) for w in pts), multiplier(family, lam, pts), multiplicity)


# ---------------------------------------------------------------------------
# root finding for f^n(z) = z

def julia_radius(a) -> float:
    """Radius outside which |f(z)| > |z|; bounds all periodic points."""
    d = a.shape[-1] - 1
    return max(1.0, (1.0 + np.abs(a[:d]).sum()) / abs(a[d]))


def _ratio(family, lam, z, n, big: float = 1e40):
    """g / g' for g(z) = f^n(z) - z.

    Orbits that pass ``big`` are frozen there: beyond it f(z) / (z f'(z)) is
    1/d to working precision, so z_n / z_n' = (z_k / z_k') d^(k - n) and the
    step stays accurate where f^n itself would overflow.
    """
    a = family.coefficients(lam)
    d = family.degree
    zk = np.array(z, dtype=complex)
    dk = np.ones_like(zk)
    r = np.zeros_like(zk)
    done = np.zeros(zk.shape, bool)
    with np.errstate(all="ignore"):
        for k in range(n):
            f, f1, _ = _horner(a, zk)
            zk = np.where(done, zk, f)
            dk = np.where(done, dk, f1 * dk)
            new = ~done & ~(np.abs(zk) <= big)
            r[new] = zk[new] / dk[new] * float(d) ** (k + 1 - n)
            done |= new
            zk[done] = 0.0
        out = np.where(done, r, (zk - z) / (dk - 1))
    bad = ~np.isfinite(out)
    out[bad] = z[bad] / d**n
    return out


def aberth(family: Family, lam, n: int, max_iter: int = 500, tol_step: float = 1e-14) -> np.ndarray:
    """All d^n roots of f^n(z) - z by Aberth-Ehrlich simultaneous iteration.

    The correction g/g' is evaluated through the orbit itself instead of an
    expanded coefficient list, which keeps it accurate at high degree.
    """
    a = family.coefficients(lam)
    N = family.degree**n
    R = julia_radius(a)
    k = np.arange(N)
    z = R * np.exp(2j * np.pi * (k + 0.25) / N) * (1 + 1e-3 * np.cos(7.0 * k))
    for _ in range(max_iter):
        ratio = _ratio(family, lam, z, n)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        s = (1.0 / diff).sum(axis=1) - 1.0
        with np.errstate(all="ignore"):
            w = ratio / (1.0 - ratio * s)
        w[~np.isfinite(w)] = 0.0
        z = z - w
        if np.max(np.abs(w) / (1 + np.abs(z))) <= tol_step:
            break
    else:
        if not np.all(np.isfinite(z)):
            raise RootSolveFailure("Aberth iteration diverged")
    return _polish(family, lam, z, n)


def _polish(family, lam, z, n, steps=6):
    for _ in range(steps):
        jet = orbit_jet(family, lam, z, n)
        with np.errstate(all="ignore"):
            dz = (jet.z - z) / (jet.dz - 1)
        ok = np.isfinite(dz) & (np.abs(dz) < 1e-3 * (1 + np.abs(z)))
        z = np.where(ok, z - np.where(ok, dz, 0), z)
    return z


def newton_grid_roots(family: Family, lam, n: int, grid: int = 64) -> np.ndarray:
    """Multi-start Newton for f^n(z) = z from a grid covering the Julia set."""
    a = family.coefficients(lam)
    R = julia_radius(a)
    xs = np.linspace(-R, R, grid)
    z = (xs[None, :] + 1j * xs[:, None]).ravel()
    for _ in range(200):
        jet = orbit_jet(family, lam, z, n)
        with np.errstate(all="ignore"):
            step = (jet.z - z) / (jet.dz - 1)
        step[~np.isfinite(step)] = 0.0
        big = np.abs(step) > R
        step[big] *= R / np.abs(step[big])
        z = z - step
        if np.all(np.abs(step) < 1e-14 * (1 + np.abs(z))):
            break
    jet = orbit_jet(family, lam, z, n)
    good = np.isfinite(jet.z) & (np.abs(jet.z - z) <= 1e-9 * (1 + np.abs(z)))
    roots = _dedup(z[good], tol("cycles.dedup"))
    # close the root set under f: every orbit point is again a root
    a_pts = [roots]
    for _ in range(n - 1):
        a_pts.append(_horner(a, a_pts[-1])[0])
    roots = _dedup(np.concatenate(a_pts), tol("cycles.dedup"))
    return _complete_roots(family, lam, n, roots)


def _complete_roots(family, lam, n, roots, max_iter: int = 500, tol_step: float = 1e-14):
    """Recover roots the grid missed: Aberth steps on the missing ones, found ones held fixed."""
    N = family.degree**n
    m = N - len(roots)
    if m <= 0:
        return roots
    R = julia_radius(family.coefficients(lam))
    k = np.arange(m)
    z = 1.1 * R * np.exp(2j * np.pi * (k + 0.37) / m) * (1 + 1e-3 * np.cos(5.0 * k))
    for _ in range(max_iter):
        ratio = _ratio(family, lam, z, n)
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, 1.0)
        s = (1.0 / diff).sum(axis=1) - 1.0 + (1.0 / (z[:, None] - roots[None, :])).sum(axis=1)
        with np.errstate(all="ignore"):
            w = ratio / (1.0 - ratio * s)
        w[~np.isfinite(w)] = 0.0
        z = z - w
        if np.max(np.abs(w) / (1 + np.abs(z))) <= tol_step:
            break
    return np.concatenate([roots, _polish(family, lam, z, n)])


def _dedup(z, radius):
    out = []
    for w in z[np.argsort(z.real)]:
        if not any(abs(w - u) <= radius * (1 + abs(u)) for u in out[-64:]):
            out.append(w)
    return np.array(out, dtype=complex)


def _clusters(z, radius):
    """Group nearly equal roots; returns list of index arrays."""
    order = np.argsort(z.real)
    groups: list[list[int]] = []
    for i in order:
        for g in groups[-32:]:
            if abs(z[i] - z[g[0]]) <= radius * (1 + abs(z[g[0]])):
                g.append(i)
                break
        else:
            groups.append([i])
    return groups


def periodic_points(family: Family, lam, n: int, exact: bool = True) -> list[Cycle]:
    """Cycles of f_lambda whose period divides n (exact period n by default).

    Each returned cycle carries the multiplicity of its points as roots of
    f^n(z) - z, so that sum(period * multiplicity) over all divisor cycles
    equals d**n when every root is found.
    """
    lam = as_param(family, lam)
    N = family.degree**n
    if n < 1 or N > tol("cycles.max_points"):
        raise PeriodTooLarge(f"d^n = {N} exceeds the supported maximum")
    if N <= tol("cycles.aberth_max_degree"):
        roots = aberth(family, lam, n)
    else:
        roots = newton_grid_roots(family, lam, n)
    if not np.all(np.isfinite(roots)):
        raise RootSolveFailure("non-finite periodic points")
    groups = _clusters(roots, 1e-6)
    reps = np.array([roots[g].mean() for g in groups])
    mult = np.array([len(g) for g in groups])
    assigned = np.zeros(len(reps), bool)
    cycles = []
    for i in np.argsort(-np.abs(reps)):
        if assigned[i]:
            continue
        z = reps[i]
        p = minimal_period(family, lam, z, n, tol_cycle=1e-6) or n
        pts = orbit(family, lam, z, p - 1)
        idx = []
        for w in pts:
            j = int(np.argmin(np.abs(reps - w)))
            idx.append(j)
            assigned[j] = True
        cyc_pts = reps[idx] if len(set(idx)) == p else pts
        cycles.append(Cycle(tuple(complex(w) for w in cyc_pts),
                            multiplier(family, lam, cyc_pts), int(mult[i])))
    if exact:
        cycles = [c for c in cycles if c.period == n]
    return cycles


# ---------------------------------------------------------------------------
# Newton systems on multiplier loci

def _cycle_system(family, slc, periods, targets):
    k = len(periods)

    def F(x):
        t, zs = x[:k], x[k:]
        lam, dlam = slc.point_jacobian(t)
        r = np.empty(2 * k, dtype=complex)
        J = np.zeros((2 * k, 2 * k), dtype=complex)
        for j, (n, w) in enumerate(zip(periods, targets)):
            jet = orbit_jet(family, lam, zs[j], n, second=True)
            r[2 * j] = jet.z - zs[j]
            r[2 * j + 1] = jet.dz - w
            J[2 * j, :k] = jet.dl @ dlam
            J[2 * j, k + j] = jet.dz - 1
            J[2 * j + 1, :k] = jet.ddzl @ dlam
            J[2 * j + 1, k + j] = jet.ddz
        return r, J

    return F


def multiplier_jacobian(family, slc, t, periods, zs) -> np.ndarray:
    """d(multiplier_j) / d t along the continued cycles, shape (k, slice dim)."""
    lam, dlam = slc.point_jacobian(t)
    rows = []
    for n, z in zip(periods, zs):
        jet = orbit_jet(family, lam, z, n, second=True)
        dz_dlam = -jet.dl / (jet.dz - 1)
        rows.append((jet.ddzl + jet.ddz * dz_dlam) @ dlam)
    return np.array(rows)


def _default_slice(family, seed, k):
    seed = as_param(family, seed)
    if k == family.param_dim:
        return ParameterSlice.full(seed)
    return ParameterSlice(seed, np.eye(family.param_dim, dtype=complex)[:k])


def _pick_cycles(family, lam, periods, targets):
    """Seed cycle points: per target the cycle of that period closest in multiplier."""
    used = set()
    zs = []
    cache = {}
    for n, w in zip(periods, targets):
        if n not in cache:
            cache[n] = periodic_points(family, lam, n)
        best = None
        for ci, c in enumerate(cache[n]):
            if (n, ci) in used:
                continue
            if best is None or abs(c.multiplier - w) < abs(cache[n][best].multiplier - w):
                best = ci
        if best is None:
            raise NoConvergence(f"no cycle of period {n} available as seed")
        used.add((n, best))
        zs.append(cache[n][best].points[0])
    return zs


@dataclass(frozen=True)
class PerSolution:
    lam: np.ndarray
    cycle: Cycle
    residual: float
    t: np.ndarray

    def __iter__(self):
        yield self.lam
        yield self.cycle

    def to_json(self) -> dict:
        return {"type": "per_solution", "lambda": _cjson(self.lam), "cycle": self.cycle.to_json(),
                "residual": self.residual, "period": self.cycle.period}


def _cjson(v):
    return [[complex(x).real, complex(x).imag] for x in np.atleast_1d(v)]


@dataclass(frozen=True)
class NeutralTargetSpec:
    periods: tuple
    thetas: tuple

    def __post_init__(self):
        object.__setattr__(self, "periods", tuple(int(n) for n in self.periods))
        object.__setattr__(self, "thetas", tuple(float(t) for t in self.thetas))
        if len(self.periods) != len(self.thetas) or not self.periods:
            raise ValueError("periods and thetas must be non-empty and of equal length")
        if any(n < 1 for n in self.periods):
            raise ValueError("periods must be >= 1")
        if any(float(t).is_integer() for t in self.thetas):
            raise ValueError("rotation numbers must not be integers")

    @property
    def k(self) -> int:
        return len(self.periods)

    @property
    def multipliers(self) -> tuple:
        return tuple(cmath.exp(2j * math.pi * t) for t in self.thetas)


@dataclass(frozen=True)
class NeutralSolution:
    lam: np.ndarray
    cycles: tuple
    residual: float
    jacobian_rank: int
    min_cycle_separation: float
    singular_values: tuple = ()
    spec: NeutralTargetSpec | None = None
    meta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {
            "type": "neutral_solution",
            "lambda": _cjson(self.lam),
            "cycles": [c.to_json() for c in self.cycles],
            "residual": self.residual,
            "jacobian_rank": self.jacobian_rank,
            "min_cycle_separation": self.min_cycle_separation,
            "singular_values": list(self.singular_values),
            "periods": list(self.spec.periods) if self.spec else None,
            "thetas": list(self.spec.thetas) if self.spec else None,
        }


def _solve_system(family, slc, periods, targets, t0, zs0, newton_tol):
    F = _cycle_system(family, slc, periods, targets)
    x0 = np.concatenate([np.atleast_1d(t0), np.asarray(zs0, dtype=complex)])
    # divergent seeds overflow on the way out; they are rejected by the caller
    with np.errstate(all="ignore"):
        res = damped_newton(F, x0, tol=newton_tol, max_iter=int(tol("cycles.max_iter")),
                            max_backtracks=int(tol("cycles.max_backtracks")))
    k = len(periods)
    return res, res.x[:k], res.x[k:]


def _cycles_at(family, lam, periods, zs):
    cycles = []
    for n, z in zip(periods, zs):
        p = minimal_period(family, lam, z, n)
        if p != n:
            raise WrongExactPeriod(f"orbit of {z} has exact period {p}, not {n}", period=p)
        cycles.append(make_cycle(family, lam, z, n))
    return cycles


def _separation(cycles):
    sep = math.inf
    for i in range(len(cycles)):
        for j in range(i + 1, len(cycles)):
            a = np.array(cycles[i].points)
            b = np.array(cycles[j].points)
            sep = min(sep, float(np.min(np.abs(a[:, None] - b[None, :]))))
    return sep


def solve_multi_neutral(family: Family, spec: NeutralTargetSpec, seeds, slice: ParameterSlice | None = None,
                        newton_tol: float | None = None) -> NeutralSolution:
    """Parameter with k distinct cycles of prescribed periods and multipliers.

    ``seeds`` is a list of parameter points or ``(point, cycle_points)``
    pairs.  Without cycle points, each target is seeded with the cycle of
    the requested period whose multiplier is closest at the seed parameter.
    The best (smallest residual) certified solution is returned.
    """
    newton_tol = tol("cycles.newton_tol") if newton_tol is None else newton_tol
    k = spec.k
    if k > family.n_critical and family.kind != "generic":
        raise ValueError("k exceeds the number of marked critical points")
    targets = spec.multipliers
    failures = {"collided": 0, "rank": 0, "period": 0, "noconv": 0}
    best, best_rank_def = None, None
    best_res = math.inf
    for s in seeds:
        if isinstance(s, tuple) and len(s) == 2 and np.ndim(s[1]) == 1 and len(s[1]) == k:
            lam_s, zs0 = s
        else:
            lam_s, zs0 = s, None
        lam_s = as_param(family, lam_s)
        slc = slice if slice is not None else _default_slice(family, lam_s, k)
        if slc.dim != k:
            raise ValueError("slice dimension must equal k")
        try:
            if zs0 is None:
                zs0 = _pick_cycles(family, lam_s, spec.periods, targets)
        except (NoConvergence, RootSolveFailure):
            failures["noconv"] += 1
            continue
        res, t, zs = _solve_system(family, slc, spec.periods, targets, slc.project(lam_s), zs0, newton_tol)
        if not res.converged:
            failures["noconv"] += 1
            continue
        lam = slc.point(t)
        try:
            cycles = _cycles_at(family, lam, spec.periods, zs)
        except WrongExactPeriod:
            failures["period"] += 1
            continue
        sep = _separation(cycles) if k > 1 else math.inf
        if sep <= tol("cycles.tol_sep"):
            failures["collided"] += 1
            continue
        MJ = multiplier_jacobian(family, slc, t, spec.periods, zs)
        sv = np.linalg.svd(MJ, compute_uv=False)
        rank = int(np.sum(sv > tol("cycles.rank_rel") * sv.max())) if sv.max() > 0 else 0
        sol = NeutralSolution(lam, tuple(cycles), res.residual, rank, sep,
                              tuple(float(x) for x in sv), spec, {"t": t})
        if rank < k:
            failures["rank"] += 1
            best_rank_def = best_rank_def or sol
            continue
        if res.residual < best_res:
            best, best_res = sol, res.residual
    if best is not None:
        return best
    if failures["collided"]:
        raise CyclesCollided(f"cycles merged in {failures['collided']} converged runs")
    if best_rank_def is not None:
        raise RankDeficient("multiplier Jacobian is rank deficient", solution=best_rank_def)
    if failures["period"]:
        raise WrongExactPeriod("solutions converged to divisor periods")
    raise NoConvergence(f"no seed converged ({failures})")


def solve_per(family: Family, n: int, w: complex, seed, z_seed=None, slice: ParameterSlice | None = None,
              newton_tol: float | None = None, _allow_parabolic: bool = False) -> PerSolution:
    """Parameter on Per_n(w) near ``seed`` together with its cycle.

    ``slice`` is a one-dimensional parameter slice (default: the first
    coordinate line through ``seed``).  ``z_seed`` seeds the cycle point;
    without it the period-n cycle with the closest multiplier at ``seed`` is
    used.  Raises :class:`WrongExactPeriod` if Newton lands on a cycle of a
    smaller period.
    """
    w = complex(w)
    if abs(w - 1) < 1e-14 and not _allow_parabolic:
        raise ValueError("w = 1 is excluded: exact period is ambiguous on Per_n(1)")
    newton_tol = tol("cycles.newton_tol") if newton_tol is None else newton_tol
    seed = as_param(family, seed)
    slc = slice if slice is not None else _default_slice(family, seed, 1)
    if z_seed is None:
        cands = sorted(periodic_points(family, seed, n), key=lambda c: abs(c.multiplier - w))
        z_cands = [c.points[0] for c in cands[:4]]
        if not z_cands:
            raise NoConvergence(f"no cycle of exact period {n} at the seed")
    else:
        z_cands = [complex(z_seed)]
    last = None
    for z0 in z_cands:
        res, t, zs = _solve_system(family, slc, (n,), (w,), slc.project(seed), [z0], newton_tol)
        if not res.converged:
            last = NoConvergence(f"Newton stalled at residual {res.residual:.3g}", residual=res.residual)
            continue
        lam = slc.point(t)
        p = minimal_period(family, lam, zs[0], n)
        cyc = make_cycle(family, lam, zs[0], n)
        if p != n:
            last = WrongExactPeriod(f"converged to a cycle of exact period {p}", period=p,
                                    result=PerSolution(lam, cyc, res.residual, t))
            continue
        return PerSolution(lam, cyc, res.residual, t)
    raise last


def continue_per(family: Family, n: int, theta_a: float, theta_b: float, steps: int, seed,
                 z_seed=None, slice: ParameterSlice | None = None) -> list:
    """Follow Per_n(exp(2 pi i theta)) from theta_a to theta_b.

    Tangent predictor plus Newton corrector; the step is halved on corrector
    failure down to ``cycles.step_min``.  Returns a list of
    ``(theta, lambda)`` pairs; raises :class:`ContinuationStalled` carrying
    the partial path when it cannot advance.
    """
    seed = as_param(family, seed)
    slc = slice if slice is not None else _default_slice(family, seed, 1)
    w0 = cmath.exp(2j * math.pi * theta_a)
    start = solve_per(family, n, w0, seed, z_seed, slc, _allow_parabolic=True)
    path = [(float(theta_a), start.lam)]
    if steps <= 0 or theta_a == theta_b:
        return path
    x = np.concatenate([start.t, [start.cycle.points[0]]])
    h0 = (theta_b - theta_a) / steps
    h = h0
    theta = theta_a
    step_min = tol("cycles.step_min")
    newton_tol = tol("cycles.newton_tol")
    while (theta_b - theta) * np.sign(h0) > 1e-15:
        h = math.copysign(min(abs(h), abs(theta_b - theta)), h0)
        w = cmath.exp(2j * math.pi * theta)
        _, J = _cycle_system(family, slc, (n,), (w,))(x)
        tangent = np.linalg.lstsq(J, np.array([0, 2j * math.pi * w]), rcond=None)[0]
        th_new = theta + h
        w_new = cmath.exp(2j * math.pi * th_new)
        pred = x + h * tangent
        F = _cycle_system(family, slc, (n,), (w_new,))
        res = damped_newton(F, pred, tol=newton_tol, max_iter=50)
        ok = res.converged
        if ok:
            lam = slc.point(res.x[:1])
            ok = minimal_period(family, lam, res.x[1], n) == n
            # reject jumps to another branch
            ok = ok and np.linalg.norm(res.x - pred) <= 0.5 * abs(h) * np.linalg.norm(tangent) + 1e-6
        if ok:
            x, theta = res.x, th_new
            path.append((float(theta), lam))
            h = h0
        else:
            h /= 2
            if abs(h) < step_min:
                raise ContinuationStalled(f"step fell below {step_min} at theta={theta}", path)
    return path


def _cparse(v):
    return np.array([complex(x, y) for x, y in v])


def neutral_from_json(doc) -> NeutralSolution:
    cycles = tuple(Cycle(tuple(_cparse(c["points"])), complex(*c["multiplier"]), c.get("multiplicity", 1))
                   for c in doc["cycles"])
    spec = NeutralTargetSpec(doc["periods"], doc["thetas"]) if doc.get("periods") else None
    return NeutralSolution(_cparse(doc["lambda"]), cycles, float(doc["residual"]), int(doc["jacobian_rank"]),
                           float(doc["min_cycle_separation"]), tuple(doc.get("singular_values", ())), spec)


def per_from_json(doc) -> PerSolution:
    c = doc["cycle"]
    cyc = Cycle(tuple(_cparse(c["points"])), complex(*c["multiplier"]), c.get("multiplicity", 1))
    return PerSolution(_cparse(doc["lambda"]), cyc, float(doc["residual"]), np.zeros(0))


def _recheck_cycle(family, lam, z, n, w, stored):
    """Exact period, closure and multiplier of a stored cycle, recomputed from its first point."""
    tol_m = 10 * tol("cycles.newton_tol")
    p = minimal_period(family, lam, z, n)
    fresh = make_cycle(family, lam, z, n)
    return {
        "exact_period": p == n,
        "multiplier_target": bool(abs(fresh.multiplier - w) <= tol_m),
        "multiplier_stored": bool(abs(fresh.multiplier - stored) <= tol_m * (1 + abs(stored))),
    }


def verify_per(family: Family, sol: PerSolution, w=None) -> dict:
    """Re-derive a Per_n(w) solution: period, multiplier and cycle closure."""
    w = sol.cycle.multiplier if w is None else complex(w)
    return _recheck_cycle(family, sol.lam, sol.cycle.points[0], sol.cycle.period, w, sol.cycle.multiplier)


def verify_neutral(family: Family, sol: NeutralSolution) -> dict:
    """Re-derive a multi-neutral solution from scratch; returns {check: bool}."""
    lam = np.asarray(sol.lam, dtype=complex)
    targets = sol.spec.multipliers if sol.spec else tuple(c.multiplier for c in sol.cycles)
    checks = {"exact_period": True, "multiplier_target": True, "multiplier_stored": True}
    for c, w in zip(sol.cycles, targets):
        for key, ok in _recheck_cycle(family, lam, c.points[0], c.period, w, c.multiplier).items():
            checks[key] &= ok
    fresh = [make_cycle(family, lam, c.points[0], c.period) for c in sol.cycles]
    checks["separated"] = len(fresh) < 2 or _separation(fresh) > tol("cycles.tol_sep")
    k = len(sol.cycles)
    slc = _default_slice(family, lam, k)
    MJ = multiplier_jacobian(family, slc, slc.project(lam), [c.period for c in sol.cycles],
                             [c.points[0] for c in sol.cycles])
    sv = np.linalg.svd(MJ, compute_uv=False)
    rank = int(np.sum(sv > tol("cycles.rank_rel") * sv.max())) if sv.max() > 0 else 0
    checks["rank"] = rank == k and rank == sol.jacobian_rank
    return {k_: bool(v) for k_, v in checks.items()}
