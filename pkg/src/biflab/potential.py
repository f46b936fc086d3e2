"""Green functions, equilibrium-measure sampling and Lyapunov exponents."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .config import tol
from .errors import NotPolynomial, RootSolveFailure
from .family import Family, _horner, as_param


_FAR = 1e100


@dataclass(frozen=True)
class GreenEvaluation:
    value: float
    depth: int
    converged: bool


def _require_polynomial(family):
    if not getattr(family, "is_polynomial", False):
        raise NotPolynomial("potential theory is implemented for polynomial families only")


def green(family: Family, lam, z, max_depth: int = 500, escape_radius: float | None = None) -> GreenEvaluation:
    """Green function G_lambda(z) = lim d^-n log+|f^n(z)|.

    Once |z_n| exceeds the escape radius the limit is read off as
    ``d^-n (log|z_n| + log|a_d| / (d - 1))``.  Orbits that stay bounded for
    ``max_depth`` steps get the value 0.
    """
    _require_polynomial(family)
    lam = as_param(family, lam)
    a = family.coefficients(lam)
    d = family.degree
    R = family.escape_radius(lam) if escape_radius is None else escape_radius
    L = math.log(abs(a[d])) / (d - 1)
    z = complex(z)
    with np.errstate(all="ignore"):
        for n in range(max_depth + 1):
            if abs(z) > R:
                # a few extra steps shrink the O(|z_n|^-2) telescoping error
                while abs(z) < _FAR:
                    w = complex(_horner(a, z)[0])
                    if not math.isfinite(abs(w)):
                        break
                    z = w
                    n += 1
                return GreenEvaluation((math.log(abs(z)) + L) / d**n, n, True)
            z = complex(_horner(a, z)[0])
    return GreenEvaluation(0.0, max_depth, True)


def preimages(a, z) -> np.ndarray:
    """All d solutions of f(w) = z for each entry of ``z``; shape (..., d)."""
    z = np.asarray(z, dtype=complex)
    d = a.shape[-1] - 1
    lead = a[d]
    flat = z.reshape(-1)
    if d == 2:
        # w = (-b +- sqrt(b^2 - 4 a (c - z))) / 2a
        disc = np.sqrt(a[1] ** 2 - 4 * lead * (a[0] - flat))
        w = np.stack([(-a[1] + disc) / (2 * lead), (-a[1] - disc) / (2 * lead)], axis=-1)
    else:
        comp = np.zeros((flat.size, d, d), dtype=complex)
        comp[:, 1:, :-1] = np.eye(d - 1)
        tail = -a[:d] / lead
        comp[:, :, -1] = tail
        comp[:, 0, -1] = -(a[0] - flat) / lead
        w = np.linalg.eigvals(comp)
    return w.reshape(z.shape + (d,))


@dataclass(frozen=True)
class EquilibriumSample:
    points: np.ndarray
    seed: int
    burn_in: int
    meta: dict = field(default_factory=dict)


def _start_point(a):
    """Most repelling fixed point: it lies on the Julia set."""
    b = a.copy()
    b[1] -= 1.0
    roots = np.roots(b[::-1])
    der = np.abs(_horner(a, roots)[1])
    return complex(roots[np.argmax(der)])


def equilibrium_sample(family: Family, lam, n_points: int, seed: int = 0,
                       burn_in: int | None = None) -> EquilibriumSample:
    """Random backward orbit approximating the maximal-entropy measure.

    Each step replaces the current point by one of its ``d`` preimages chosen
    uniformly at random; the first ``burn_in`` points are discarded.
    """
    _require_polynomial(family)
    burn_in = int(tol("potential.burn_in")) if burn_in is None else burn_in
    lam = as_param(family, lam)
    a = family.coefficients(lam)
    d = family.degree
    rng = np.random.default_rng(seed)
    retries = int(tol("potential.branch_retries"))
    pts = np.empty(n_points, dtype=complex)
    if n_points == 0:
        return EquilibriumSample(pts, seed, burn_in)
    z = _start_point(a)
    scale = 1.0 + np.abs(a).sum()
    for k in range(burn_in + n_points):
        w = preimages(a, z)
        if not np.all(np.isfinite(w)):
            raise RootSolveFailure(f"inverse branch solve failed at z={z}")
        j = int(rng.integers(d))
        for _ in range(retries):
            # at a critical value two branches merge; any choice is valid but
            # the merged root is ill-conditioned, so redraw a distinct branch
            others = np.delete(w, j)
            if np.min(np.abs(others - w[j])) > 1e-12 * scale:
                break
            j = int(rng.integers(d))
        z = complex(w[j])
        if k >= burn_in:
            pts[k - burn_in] = z
    return EquilibriumSample(pts, seed, burn_in, {"start": "most repelling fixed point"})


@dataclass(frozen=True)
class LyapunovEstimate:
    mc: float
    green_formula: float
    stderr: float
    n_points: int
    seed: int
    burn_in: int
    refine_depth: int

    @property
    def agreement(self) -> float:
        return abs(self.mc - self.green_formula)

    def agrees(self, n_sigma: float = 3.0) -> bool:
        # floor absorbs rounding when the integrand is constant on the sample
        return self.agreement <= n_sigma * self.stderr + 1e-12


def lyapunov_green(family: Family, lam, max_depth: int = 500) -> float:
    """log d + sum of G over all critical points of f_lambda."""
    lam = as_param(family, lam)
    a = family.coefficients(lam)
    der = np.polynomial.polynomial.polyder(a)
    crits = np.roots(der[::-1])
    return math.log(family.degree) + sum(green(family, lam, c, max_depth).value for c in crits)


def lyapunov(family: Family, lam, n_points: int = 10000, seed: int = 0,
             refine_depth: int | None = None, burn_in: int | None = None) -> LyapunovEstimate:
    """Monte Carlo estimate of L = int log|f'| dmu with a Green-formula cross-check.

    Every equilibrium sample is replaced by its ``d**refine_depth`` preimages
    and log|f'| is averaged over them; the preimages are again distributed
    by the balanced measure, so the estimator stays unbiased while most of
    the sample variance is removed.  The standard error uses batch means
    over the (correlated) backward chain.
    """
    if refine_depth is None:
        refine_depth = int(math.log(tol("potential.refine_points")) / math.log(family.degree) + 1e-9)
    sample = equilibrium_sample(family, lam, n_points, seed, burn_in)
    lam = as_param(family, lam)
    a = family.coefficients(lam)
    cross = lyapunov_green(family, lam)
    if n_points == 0:
        return LyapunovEstimate(float("nan"), cross, float("inf"), 0, seed, sample.burn_in, refine_depth)
    level = sample.points[:, None]
    for _ in range(refine_depth):
        level = preimages(a, level).reshape(n_points, -1)
    with np.errstate(divide="ignore"):
        vals = np.log(np.abs(_horner(a, level)[1])).mean(axis=1)
    vals = vals[np.isfinite(vals)]
    mc = float(vals.mean())
    b = int(tol("potential.batch_size"))
    nb = len(vals) // b
    if nb >= 2:
        means = vals[: nb * b].reshape(nb, b).mean(axis=1)
        se = float(means.std(ddof=1) / math.sqrt(nb))
    else:
        se = float(vals.std(ddof=1) / math.sqrt(len(vals))) if len(vals) > 1 else float("inf")
    return LyapunovEstimate(mc, cross, se, n_points, seed, sample.burn_in, refine_depth)


def write_lyapunov_csv(path, rows) -> None:
    """Rows are (lam, LyapunovEstimate); one line per parameter."""
    rows = list(rows)
    m = len(np.atleast_1d(rows[0][0])) if rows else 1
    header = [f"re_lambda{i}" for i in range(m)] + [f"im_lambda{i}" for i in range(m)]
    header += ["L_mc", "L_green", "stderr", "n_points", "seed"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for lam, est in rows:
            lam = np.atleast_1d(np.asarray(lam, dtype=complex))
            w.writerow([repr(float(x)) for x in lam.real] + [repr(float(x)) for x in lam.imag]
                       + [repr(est.mc), repr(est.green_formula), repr(est.stderr), est.n_points, est.seed])


def write_sample_csv(path, sample: EquilibriumSample) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["re", "im", "seed", "burn_in"])
        for z in sample.points:
            w.writerow([repr(float(z.real)), repr(float(z.imag)), sample.seed, sample.burn_in])
