"""Batch experiments composing the solver modules.

* prerep -> neutral: from a certified k-fold Misiurewicz parameter, look for
  parameters with k prescribed neutral cycles in shrinking balls.
* neutral -> prerep: from a multi-neutral parameter, look for certified
  k-fold Misiurewicz parameters in shrinking balls.
* stratification: a ball where exactly one critical point is active and the
  other carries (numerically) no bifurcation mass.

Every reported parameter is re-verified from scratch before it enters a
report.  Reports are plain dicts of JSON scalars so that serialization with
sorted keys is byte-identical across runs with the same (config, seed).
"""

from __future__ import annotations

import cmath
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .currents import Box, Chart, activity_test, bif_density, escape_time
from .cycles import NeutralSolution, NeutralTargetSpec, solve_multi_neutral, solve_per, verify_neutral
from .errors import BiflabError, ChartDegenerate, NoCenterFound, NoCertificateAvailable, NotFound
from .family import Family, ParameterSlice, as_param
from .misiurewicz import MisiurewiczCertificate, Window, multi_misiurewicz_sweep, verify_certificate
from .renorm import WindowSearch, WindowTooDistorted, _alpha, find_renorm_window

SHRINK_NOTE = "success = a hit at every radius with nonincreasing distances (our operationalization of density)"
DISTANCE_NOTE = "distance is the Euclidean norm in the family's parameter chart"

DEFAULT_RADII = (0.2, 0.1, 0.05, 0.02)


def _cj(z):
    return [float(complex(z).real), float(complex(z).imag)]


def _lam_json(lam):
    return [_cj(z) for z in np.atleast_1d(lam)]


@dataclass
class DensityExperimentReport:
    name: str
    k: int
    thetas: tuple
    family: dict
    start: np.ndarray
    trials: list = field(default_factory=list)
    shrink_curve: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    @property
    def distances(self) -> list:
        return [d for _, d in self.shrink_curve]

    @property
    def nonincreasing(self) -> bool:
        d = self.distances
        if any(x is None for x in d):
            return False
        # the same parameter re-found at a smaller radius may differ by rounding
        return all(b <= a * (1 + 1e-9) for a, b in zip(d, d[1:]))

    @property
    def success(self) -> bool:
        return bool(self.shrink_curve) and self.nonincreasing

    @property
    def final_distance(self):
        return self.distances[-1] if self.shrink_curve else None

    def to_json(self) -> dict:
        return {
            "type": "density_experiment_report",
            "name": self.name,
            "k": self.k,
            "thetas": list(self.thetas),
            "family": self.family,
            "start": _lam_json(self.start),
            "trials": self.trials,
            "shrink_curve": [{"radius": r, "distance": d} for r, d in self.shrink_curve],
            "nonincreasing": self.nonincreasing,
            "success": self.success,
            "final_distance": self.final_distance,
            "config": self.config,
            "notes": [SHRINK_NOTE, DISTANCE_NOTE],
        }

    def summary_table(self) -> str:
        lines = [f"{self.name}  k={self.k}", f"{'radius':>8}  {'distance':>12}  verified"]
        for (r, d), tr in zip(self.shrink_curve, self.trials):
            ds = "miss" if d is None else f"{d:.6g}"
            lines.append(f"{r:>8.4g}  {ds:>12}  {tr.get('verified', False)}")
        lines.append(f"success: {self.success}")
        return "\n".join(lines)


def _ball_sample(rng, center, r, n):
    """Uniform points in the Euclidean ball of radius r around ``center`` in C^m = R^2m."""
    m = len(center)
    g = rng.normal(size=(n, 2 * m))
    g /= np.linalg.norm(g, axis=1, keepdims=True)
    rad = r * rng.uniform(size=(n, 1)) ** (1.0 / (2 * m))
    g *= rad
    return center[None, :] + g[:, :m] + 1j * g[:, m:]


def find_rank_k_certificate(family: Family, k: int, window=None, max_preperiod: int = 3, max_period: int = 3,
                            n_seeds: int = 128, seed: int = 0) -> MisiurewiczCertificate:
    """First rank-k certificate from a sweep (default window: polydisk of radius 2 at 0)."""
    window = window or Window(np.zeros(family.param_dim, dtype=complex), 2.0)
    for cert in multi_misiurewicz_sweep(family, window, k, max_preperiod, max_period, n_seeds, seed):
        if cert.rank >= k:
            return cert
    raise NoCertificateAvailable(f"no rank-{k} certificate in {n_seeds} sweep starts")


def _cardioid(theta):
    """Model parameter whose fixed point has multiplier exp(2 pi i theta), and that fixed point."""
    w = cmath.exp(2j * math.pi * theta)
    return w / 2 - w * w / 4, w / 2


def experiment_prerep_to_neutral(family: Family, thetas, certificate: MisiurewiczCertificate | None = None,
                                 radii=DEFAULT_RADII, n_seeds: int = 256, seed: int = 0) -> DensityExperimentReport:
    """Nearest k-neutral parameter to a k-fold Misiurewicz parameter, per search radius.

    At each radius every certified critical point gets a renormalization
    window within that radius (return time n1_j); the target cycles have
    periods n1_j and sit at the cardioid point of the model.  The first seed
    is the product-chart prediction, the rest are uniform in the ball.
    """
    thetas = tuple(float(t) for t in thetas)
    NeutralTargetSpec((1,) * len(thetas), thetas)  # rejects integer rotation numbers
    k = len(thetas)
    if certificate is None:
        certificate = find_rank_k_certificate(family, k, seed=seed)
    if certificate.rank < k or len(certificate.constraints) < k:
        raise NoCertificateAvailable(f"certificate has rank {certificate.rank}, need {k}")
    lam_star = np.asarray(certificate.lam, dtype=complex)
    idx = [c.critical_index for c in certificate.constraints[:k]]
    report = DensityExperimentReport("prerep_to_neutral", k, thetas, family.to_json(), lam_star,
                                     config={"radii": list(radii), "n_seeds": n_seeds, "seed": seed,
                                             "certificate": certificate.to_json()})
    models = [_cardioid(t) for t in thetas]
    for r in radii:
        rng = np.random.default_rng([seed, int(round(r * 1e6))])
        trial = {"radius": r, "found": None, "distance": None, "verified": False, "seeds": 0}
        try:
            with warnings.catch_warnings():
                # distorted windows still locate the neutral targets; h_sup is recorded instead
                warnings.simplefilter("ignore", WindowTooDistorted)
                wins = [find_renorm_window(family, certificate, i, WindowSearch(radius=r)) for i in idx]
        except (NoCenterFound, ChartDegenerate) as exc:
            trial["miss"] = f"no window: {exc}"
            report.trials.append(trial)
            report.shrink_curve.append((r, None))
            continue
        spec = NeutralTargetSpec(tuple(w.n1 for w in wins), thetas)
        trial["periods"] = list(spec.periods)
        trial["h_sup"] = [w.h_sup for w in wins]
        lam0 = lam_star + sum(w.psi(z) - lam_star for w, (z, _) in zip(wins, models))
        starts = np.concatenate([lam0[None, :], _ball_sample(rng, lam_star, r, max(n_seeds - 1, 0))])[:n_seeds]
        best: NeutralSolution | None = None
        for s in starts:
            zs = []
            for i, w, (_, fix) in zip(idx, wins, models):
                c, alpha = _alpha(family, s, i, w.n1)
                zs.append(complex(c) + fix / complex(alpha))
            if not np.all(np.isfinite(zs)):
                continue
            try:
                sol = solve_multi_neutral(family, spec, [(s, np.array(zs))])
            except (BiflabError, ArithmeticError, np.linalg.LinAlgError):
                continue
            if best is None or np.linalg.norm(sol.lam - lam_star) < np.linalg.norm(best.lam - lam_star):
                best = sol
        trial["seeds"] = int(len(starts))
        if best is None:
            trial["miss"] = "no seed converged"
            report.shrink_curve.append((r, None))
        else:
            checks = verify_neutral(family, best)
            d = float(np.linalg.norm(best.lam - lam_star))
            trial.update({"found": best.to_json(), "distance": d, "checks": checks,
                          "verified": all(checks.values()) and best.residual <= 1e-8})
            report.shrink_curve.append((r, d if trial["verified"] else None))
        report.trials.append(trial)
    return report


GUIDED_SHAPES = ((2, 1), (2, 2), (3, 1))


def _guided_shapes(periods):
    """Constraint shapes (m n, p n) suggested by the neutral cycle periods n.

    Near a parameter with a neutral cycle of period n the critical point is
    renormalizable with return time n, and the small Mandelbrot copy carries
    Misiurewicz points of shape (m n, p n) for each model shape (m, p).
    """
    out = []
    for order in sorted(set(itertools.permutations(periods))):
        for m, p in GUIDED_SHAPES:
            out.append(tuple((m * n, p * n) for n in order))
    return out


def _limb_starts(family, neutral, r, budget, n_dirs: int = 8):
    """Starts near principal Misiurewicz points of limbs p/q next to a neutral parameter (k = 1).

    The limb roots are where the neutral cycle reaches multiplier
    exp(2 pi i p/q) (solved with ``solve_per`` from the neutral parameter);
    the limb tip, of shape (q n, n), lies about |d lambda / d theta| / (2 pi q^2)
    outside the root.  Limbs are taken in order of increasing q among those
    whose predicted root distance is below r / 2.
    """
    cyc = neutral.cycles[0]
    n = cyc.period
    theta = cmath.phase(cyc.multiplier) / (2 * math.pi) % 1.0
    lam0 = np.asarray(neutral.lam, dtype=complex)
    # |d lambda / d theta| from a nearby point on the same Per curve
    try:
        near = solve_per(family, n, cmath.exp(2j * math.pi * (theta + 1e-4)), lam0, z_seed=cyc.points[0])
    except BiflabError:
        return [], []
    speed = float(np.linalg.norm(near.lam - lam0)) / 1e-4
    shapes, starts = [], []
    for q in range(2, 400):
        p = round(theta * q)
        for pp in sorted({p - 1, p, p + 1}):
            if pp <= 0 or pp >= q or math.gcd(pp, q) != 1 or abs(pp / q - theta) < 1e-12:
                continue
            if speed * abs(pp / q - theta) > r / 2:
                continue
            try:
                root = solve_per(family, n, cmath.exp(2j * math.pi * pp / q), lam0, z_seed=cyc.points[0])
            except BiflabError:
                continue
            if np.linalg.norm(root.lam - lam0) > r / 2:
                continue
            d = speed / (2 * math.pi * q * q)
            for j in range(n_dirs):
                e = np.zeros_like(lam0)
                e[0] = d * cmath.exp(2j * math.pi * j / n_dirs)
                starts.append(root.lam + e)
                shapes.append(((q * n, n),))
            if len(starts) >= budget:
                return shapes[:budget], starts[:budget]
        if len(starts) >= budget:
            break
    return shapes, starts


def experiment_neutral_to_prerep(family: Family, neutral: NeutralSolution, radii=DEFAULT_RADII,
                                 n_seeds: int = 256, seed: int = 0, max_preperiod: int = 3,
                                 max_period: int = 3, k: int | None = None, guided: bool = True) -> DensityExperimentReport:
    """Nearest certified k-fold Misiurewicz parameter to a neutral parameter, per radius.

    Each radius runs a random-shape sweep confined to the polydisk around
    the neutral parameter (deflated Newton start); with ``guided`` half of
    the seed budget instead uses shapes derived from the neutral cycle
    periods.  Hits must lie in the Euclidean ball and pass certificate
    re-verification.
    """
    lam0 = np.asarray(neutral.lam, dtype=complex)
    k = len(neutral.cycles) if k is None else k
    thetas = tuple(neutral.spec.thetas) if neutral.spec else ()
    periods = [c.period for c in neutral.cycles][:k]
    report = DensityExperimentReport("neutral_to_prerep", k, thetas, family.to_json(), lam0,
                                     config={"radii": list(radii), "n_seeds": n_seeds, "seed": seed,
                                             "max_preperiod": max_preperiod, "max_period": max_period,
                                             "guided": guided, "neutral": neutral.to_json()})
    n_guided = n_seeds // 2 if guided else 0
    for r in radii:
        rs = seed + int(round(r * 1e6))
        win = Window(lam0, r)
        certs = multi_misiurewicz_sweep(family, win, k, max_preperiod, max_period, n_seeds - n_guided, seed=rs,
                                        deflate=True, confine=True)
        if n_guided and k == 1:
            shapes, starts = _limb_starts(family, neutral, r, n_guided)
            if starts:
                certs = certs + multi_misiurewicz_sweep(family, win, k, max_preperiod, max_period, len(starts),
                                                        shapes=shapes, deflate=True, starts=starts, confine=True)
        elif n_guided:
            # guided starts: the neutral parameter, then geometric shells r, r/2, ... inside the ball
            rng = np.random.default_rng(rs + 1)
            n_shell = max(1, int(math.log2(r / 1e-4)))
            radii_s = r * 0.5 ** (np.arange(n_guided - 1) % n_shell)
            starts = [lam0] + [Window(lam0, rr).sample(rng, 1)[0] for rr in radii_s]
            certs = certs + multi_misiurewicz_sweep(family, win, k, max_preperiod, max_period, n_guided,
                                                    shapes=_guided_shapes(periods), deflate=True,
                                                    starts=starts, confine=True)
        good = []
        for c in certs:
            if c.rank < k:
                continue
            checks = verify_certificate(family, c)
            d = float(np.linalg.norm(c.lam - lam0))
            if all(checks.values()) and d <= r:
                good.append((d, c, checks))
        trial = {"radius": r, "found": None, "distance": None, "verified": False, "candidates": len(certs)}
        if good:
            d, c, checks = min(good, key=lambda x: (x[0], x[1].residual))
            trial.update({"found": c.to_json(), "distance": d, "checks": checks, "verified": True})
            report.shrink_curve.append((r, d))
        else:
            trial["miss"] = "no verified certificate in the ball"
            report.shrink_curve.append((r, None))
        report.trials.append(trial)
    return report


# ---------------------------------------------------------------------------
# stratification


def stratification_window(family: Family, passive: int = 0, active: int = 1, seed=(1.7, 0.05),
                          depth: int = 2000) -> Chart:
    """Complex line through a parameter where ``c_passive`` is a superattracting fixed point
    and ``c_active`` sits on its activity locus.

    The first condition is solved with Per_1(0) along the last coordinate;
    the second by bisection on escape of ``c_active`` along the first
    coordinate.  The returned chart is tilted so that both coordinates vary.
    """
    seed = as_param(family, seed)
    e_last = np.eye(family.param_dim, dtype=complex)[-1]
    crit = complex(family.critical(passive, seed))
    sol = solve_per(family, 1, 0.0, seed, z_seed=crit, slice=ParameterSlice(seed, e_last[None, :]))
    lam = sol.lam
    e0 = np.eye(family.param_dim, dtype=complex)[0]
    def escapes(x):
        return escape_time(family, active, (lam + (x - lam[0].real) * e0)[None, :], depth)[0][0] >= 0

    xs = lam[0].real + np.linspace(0, 4, 401)
    flags = [escapes(x) for x in xs]
    if flags[0] or not any(flags):
        raise NotFound("no escape transition for the active critical point along the first coordinate",
                       evidence={"seed": _lam_json(lam)})
    j = flags.index(True)
    lo, hi = xs[j - 1], xs[j]
    for _ in range(50):
        mid = 0.5 * (lo + hi)
        if escapes(mid):
            hi = mid
        else:
            lo = mid
    base = lam + (lo - lam[0].real) * e0
    direction = e0 + 0.3 * e_last
    return Chart.complex_line(base, direction)


def _disk_mass(field, cx, cy, rho):
    xs, ys, hx, hy = field.box.axes(field.nx, field.ny)
    X, Y = np.meshgrid(xs, ys)
    mask = (X - cx) ** 2 + (Y - cy) ** 2 <= rho**2
    return float(field.values[mask].sum() * hx * hy)


def experiment_stratification(family: Family, chart: Chart, box, resolution: int = 64, ball_radius: float = 0.02,
                              n_probe: int = 5, depth: int = 200, ratio_max: float = 1e-3) -> dict:
    """Ball in a 2-real-dim chart where exactly one critical point is active.

    Candidate ball centers form an ``n_probe`` x ``n_probe`` grid in ``box``;
    at each, every critical point gets an activity verdict.  For candidates
    with one Active and one Passive point the bifurcation densities of both
    are integrated over the ball; the first (closest to the box center) with
    passive/active mass ratio at most ``ratio_max`` is reported.
    """
    box = box if isinstance(box, Box) else None if _zero_area(box) else Box(*box)
    if box is None:
        raise NotFound("empty window", evidence={"probes": []})
    n_crit = family.n_critical
    probes = []
    cx0, cy0 = 0.5 * (box.x0 + box.x1), 0.5 * (box.y0 + box.y1)
    xs = np.linspace(box.x0, box.x1, n_probe)
    ys = np.linspace(box.y0, box.y1, n_probe)
    pts = sorted(((x, y) for y in ys for x in xs), key=lambda p: (math.hypot(p[0] - cx0, p[1] - cy0), p[1], p[0]))
    direction = chart.u if np.allclose(chart.v, 1j * chart.u) else None
    for x, y in pts:
        lam = chart(x, y)
        radius = ball_radius * float(np.linalg.norm(chart.u))
        verdicts = [activity_test(family, i, lam, radius, depth=depth, direction=direction).status
                    for i in range(n_crit)]
        probe = {"center": [float(x), float(y)], "lambda": _lam_json(lam), "status": verdicts}
        probes.append(probe)
        act = [i for i, s in enumerate(verdicts) if s == "Active"]
        pas = [i for i, s in enumerate(verdicts) if s == "Passive"]
        if len(act) != 1 or len(pas) != n_crit - 1:
            continue
        ball = Box(x - ball_radius, x + ball_radius, y - ball_radius, y + ball_radius)
        masses = {}
        for i in range(n_crit):
            fld = bif_density(family, i, chart, ball, resolution, resolution, depth)
            masses[i] = _disk_mass(fld, x, y, ball_radius)
        a = act[0]
        worst = max(masses[i] for i in pas)
        probe["masses"] = [masses[i] for i in range(n_crit)]
        if masses[a] > 0 and worst <= ratio_max * masses[a]:
            return {
                "type": "stratification_report",
                "family": family.to_json(),
                "chart": chart.to_json(),
                "box": list(box.as_tuple()),
                "ball_center": [float(x), float(y)],
                "ball_lambda": _lam_json(lam),
                "ball_radius": ball_radius,
                "active": a,
                "passive": pas,
                "masses": [masses[i] for i in range(n_crit)],
                "ratio": worst / masses[a],
                "resolution": resolution,
                "depth": depth,
                "probes": probes,
            }
    raise NotFound("no ball with exactly one active critical point and negligible passive mass",
                   evidence={"probes": probes})


def _zero_area(b) -> bool:
    x0, x1, y0, y1 = b
    return not (x1 > x0 and y1 > y0)
