"""Holomorphic polynomial families with marked critical points.

A family is stored as a table of monomials: every term is
``coef * lambda**exp * z**zpow`` with ``lambda`` in C^m.  Marked critical
points are polynomials in ``lambda`` stored the same way.  All derivatives
(in ``z`` and in ``lambda``) are computed from these tables, never by finite
differences.

Arrays of parameters have shape ``(..., m)``; coefficient arrays have shape
``(..., d + 1)`` with the constant term first.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .config import tol
from .errors import CollidedCriticalPoints, EscapeEvent, NotPolynomial

KINDS = ("quadratic", "branner_hubbard", "generic")


def _frozen(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


def _monomials(lam, exps):
    """lam ** exps summed over the last axis: shape (..., T)."""
    lam = np.asarray(lam, dtype=complex)
    if exps.shape[0] == 0:
        return np.zeros(lam.shape[:-1] + (0,), dtype=complex)
    return np.prod(lam[..., None, :] ** exps, axis=-1)


def _monomial_grad(lam, exps):
    """d/dlambda_i of every monomial: shape (..., m, T)."""
    lam = np.asarray(lam, dtype=complex)
    m = exps.shape[1]
    out = []
    for i in range(m):
        e = exps.copy()
        e[:, i] = np.maximum(e[:, i] - 1, 0)
        out.append(exps[:, i] * _monomials(lam, e))
    return np.stack(out, axis=-2)


@dataclass(frozen=True, eq=False)
class Family:
    """A polynomial family ``f_lambda(z)`` with marked critical points.

    Use :func:`quadratic`, :func:`branner_hubbard` or :func:`generic` to
    build one.  Instances are immutable and safe to share across threads.
    """

    kind: str
    degree: int
    param_dim: int
    zpow: np.ndarray
    exps: np.ndarray
    coef: np.ndarray
    crit_exps: tuple
    crit_coef: tuple
    descriptor: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NotPolynomial(f"unsupported family kind {self.kind!r}")
        if self.degree < 2 or self.param_dim < 1:
            raise ValueError("need degree >= 2 and param_dim >= 1")
        sel = np.zeros((len(self.zpow), self.degree + 1))
        sel[np.arange(len(self.zpow)), self.zpow] = 1.0
        object.__setattr__(self, "_sel", sel)

    is_polynomial = True

    @property
    def n_critical(self) -> int:
        return len(self.crit_coef)

    # coefficients -----------------------------------------------------
    def coefficients(self, lam):
        """z-coefficients of f_lambda, constant term first."""
        M = _monomials(lam, self.exps) * self.coef
        return M @ self._sel

    def coefficient_grad(self, lam):
        """d a_j / d lambda_i, shape (..., m, d + 1)."""
        G = _monomial_grad(lam, self.exps) * self.coef
        return G @ self._sel

    def critical(self, i, lam):
        lam = np.asarray(lam, dtype=complex)
        return (_monomials(lam, self.crit_exps[i]) * self.crit_coef[i]).sum(-1)

    def critical_grad(self, i, lam):
        lam = np.asarray(lam, dtype=complex)
        return (_monomial_grad(lam, self.crit_exps[i]) * self.crit_coef[i]).sum(-1)

    def escape_radius(self, lam) -> float:
        """max(floor, 2 * sum of |coefficients|) at ``lam``."""
        a = np.abs(self.coefficients(lam))
        return max(tol("core.escape_radius_floor"), 2.0 * float(np.max(np.sum(a, axis=-1))))

    def leading_log(self, lam):
        """log|a_d| / (d - 1), the additive constant of the Green function."""
        a = self.coefficients(lam)[..., self.degree]
        return np.log(np.abs(a)) / (self.degree - 1)

    def to_json(self) -> dict:
        return dict(self.descriptor)

    def __repr__(self):
        return f"Family({self.descriptor})"


# constructors ---------------------------------------------------------------

def quadratic() -> Family:
    """``p_zeta(z) = z**2 + zeta`` with the marked critical point 0."""
    return Family(
        kind="quadratic", degree=2, param_dim=1,
        zpow=_frozen([2, 0], int), exps=_frozen([[0], [1]], int),
        coef=_frozen([1, 1], complex),
        crit_exps=(_frozen(np.zeros((0, 1)), int),), crit_coef=(_frozen([], complex),),
        descriptor={"kind": "quadratic", "degree": 2},
    )


def branner_hubbard(d: int = 3) -> Family:
    """Branner-Hubbard family of degree ``d`` in the chart (c_1..c_{d-2}, a).

    P(z) = z**d / d + sum_{j=2}^{d-1} (-1)**(d-j) sigma_{d-j}(c) z**j / j + a**d,
    whose critical points are 0, c_1, ..., c_{d-2}.
    """
    if d < 3:
        raise ValueError("Branner-Hubbard family needs d >= 3")
    m = d - 1
    zpow, exps, coef = [d], [[0] * m], [1.0 / d]
    for j in range(2, d):
        k = d - j
        for subset in itertools.combinations(range(d - 2), k):
            e = [0] * m
            for s in subset:
                e[s] = 1
            zpow.append(j)
            exps.append(e)
            coef.append((-1) ** k / j)
    e = [0] * m
    e[m - 1] = d
    zpow.append(0)
    exps.append(e)
    coef.append(1.0)
    crit_exps = [np.zeros((0, m), int)]
    crit_coef = [np.zeros(0, complex)]
    for i in range(d - 2):
        e = np.zeros((1, m), int)
        e[0, i] = 1
        crit_exps.append(e)
        crit_coef.append(np.ones(1, complex))
    return Family(
        kind="branner_hubbard", degree=d, param_dim=m,
        zpow=_frozen(zpow, int), exps=_frozen(exps, int), coef=_frozen(coef, complex),
        crit_exps=tuple(_frozen(e, int) for e in crit_exps),
        crit_coef=tuple(_frozen(c, complex) for c in crit_coef),
        descriptor={"kind": "branner_hubbard", "degree": d},
    )


def _parse_terms(terms, m):
    exps, coef = [], []
    for t in terms:
        e = list(t.get("exp", [0] * m))
        if len(e) != m:
            raise ValueError(f"monomial exponent {e} does not match param_dim {m}")
        c = t["coef"]
        exps.append(e)
        coef.append(complex(c[0], c[1]) if isinstance(c, (list, tuple)) else complex(c))
    return np.array(exps, int).reshape(-1, m), np.array(coef, complex)


def generic(degree: int, param_dim: int, coefficients, critical_points, check: bool = True) -> Family:
    """Family given by explicit coefficient tables.

    ``coefficients[j]`` is a list of ``{"coef": [re, im], "exp": [...]}``
    monomials making up the coefficient of ``z**j``; ``critical_points`` is a
    list of such lists, one per marked critical point.
    """
    if len(coefficients) != degree + 1:
        raise ValueError("need degree + 1 coefficient entries")
    zpow, exps, coef = [], [], []
    for j, terms in enumerate(coefficients):
        e, c = _parse_terms(terms, param_dim)
        zpow += [j] * len(c)
        exps.append(e)
        coef.append(c)
    crit = [_parse_terms(t, param_dim) for t in critical_points]
    fam = Family(
        kind="generic", degree=degree, param_dim=param_dim,
        zpow=_frozen(zpow, int), exps=_frozen(np.concatenate(exps), int),
        coef=_frozen(np.concatenate(coef), complex),
        crit_exps=tuple(_frozen(e, int) for e, _ in crit),
        crit_coef=tuple(_frozen(c, complex) for _, c in crit),
        descriptor={"kind": "generic", "degree": degree, "param_dim": param_dim,
                    "params": {"coefficients": coefficients, "critical_points": critical_points}},
    )
    if check:
        rng = np.random.default_rng(0)
        for _ in range(8):
            lam = rng.normal(size=param_dim) + 1j * rng.normal(size=param_dim)
            a = fam.coefficients(lam)
            scale = 1.0 + np.abs(a).sum()
            for i in range(fam.n_critical):
                c = fam.critical(i, lam)
                if abs(_horner(a, c)[1]) > 1e-9 * scale * (1 + abs(c)) ** degree:
                    raise ValueError(f"marked point {i} is not critical")
    return fam


def from_json(doc) -> Family:
    """Build a family from its JSON description (dict or JSON string)."""
    if isinstance(doc, str):
        doc = json.loads(doc)
    kind = doc.get("kind")
    if kind == "quadratic":
        return quadratic()
    if kind == "branner_hubbard":
        return branner_hubbard(int(doc.get("degree", 3)))
    if kind == "generic":
        p = doc["params"]
        return generic(int(doc["degree"]), int(doc["param_dim"]),
                       p["coefficients"], p["critical_points"])
    if kind == "rational":
        raise NotPolynomial("rational families are reserved but not supported by the solvers")
    raise ValueError(f"unknown family kind {kind!r}")


# evaluation -------------------------------------------------------------------

def _horner(a, z):
    """Value, first and second z-derivative of the polynomial with coefficients a."""
    d = a.shape[-1] - 1
    p = a[..., d] * np.ones_like(z, dtype=complex)
    dp = np.zeros_like(p)
    ddp = np.zeros_like(p)
    for j in range(d - 1, -1, -1):
        ddp = ddp * z + 2 * dp
        dp = dp * z + p
        p = p * z + a[..., j]
    return p, dp, ddp


def _horner_grad(ga, z):
    """Parameter derivative f_lambda(z) and its z-derivative, shape (..., m)."""
    zz = np.asarray(z)[..., None]
    p, dp, _ = _horner(ga, zz)
    return p, dp


def _checked(v):
    if not np.all(np.isfinite(v)):
        raise EscapeEvent("evaluation overflowed")
    return v


def as_param(family: Family, lam) -> np.ndarray:
    lam = np.atleast_1d(np.asarray(lam, dtype=complex))
    if lam.shape[-1] != family.param_dim:
        raise ValueError(f"parameter must have {family.param_dim} coordinates")
    return lam


def eval_map(family: Family, lam, z) -> complex:
    """f_lambda(z).  Raises EscapeEvent on overflow."""
    a = family.coefficients(as_param(family, lam))
    with np.errstate(all="ignore"):
        return complex(_checked(_horner(a, complex(z))[0]))


def derivative_z(family: Family, lam, z) -> complex:
    a = family.coefficients(as_param(family, lam))
    with np.errstate(all="ignore"):
        return complex(_checked(_horner(a, complex(z))[1]))


def derivative_param(family: Family, lam, z, direction=None):
    """d f_lambda(z) / d lambda; contracted with ``direction`` if given."""
    ga = family.coefficient_grad(as_param(family, lam))
    with np.errstate(all="ignore"):
        g = _checked(_horner_grad(ga, complex(z))[0])
    if direction is None:
        return g
    return complex(np.dot(g, np.asarray(direction, dtype=complex)))


@dataclass(frozen=True)
class Orbit:
    points: tuple
    escaped: bool
    escape_time: int | None


def iterate(family: Family, lam, z, n: int, escape_radius: float | None = None) -> Orbit:
    """Forward orbit z, f(z), ..., f^n(z), truncated at the first |z| > radius."""
    if n < 0:
        raise ValueError("n must be >= 0")
    lam = as_param(family, lam)
    R = family.escape_radius(lam) if escape_radius is None else escape_radius
    a = family.coefficients(lam)
    z = complex(z)
    pts = [z]
    if abs(z) > R:
        return Orbit(tuple(pts), True, 0)
    with np.errstate(all="ignore"):
        for k in range(1, n + 1):
            z = complex(_horner(a, z)[0])
            pts.append(z)
            if not math.isfinite(abs(z)) or abs(z) > R:
                return Orbit(tuple(pts), True, k)
    return Orbit(tuple(pts), False, None)


@dataclass(frozen=True)
class CriticalPoint:
    value: complex
    multiplicity: int  # order of vanishing of f'
    local_degree: int

    @property
    def simple(self) -> bool:
        return self.local_degree == 2


def critical_points(family: Family, lam) -> list[CriticalPoint]:
    """Marked critical points at ``lam`` with their multiplicities."""
    lam = as_param(family, lam)
    vals = [complex(family.critical(i, lam)) for i in range(family.n_critical)]
    eps = tol("core.critical_collision")
    for i, j in itertools.combinations(range(len(vals)), 2):
        if abs(vals[i] - vals[j]) <= eps * (1 + abs(vals[i])):
            raise CollidedCriticalPoints(f"c_{i} and c_{j} coincide at {vals[i]}")
    a = family.coefficients(lam)
    d = family.degree
    out = []
    for c in vals:
        # order of vanishing of f' at c from successive derivatives
        b = a.copy()
        scale = 1.0 + np.abs(a).sum()
        mult = 0
        for k in range(1, d + 1):
            b = np.polynomial.polynomial.polyder(b)
            if abs(np.polynomial.polynomial.polyval(c, b)) > 1e-9 * scale * (1 + abs(c)) ** d:
                mult = k - 1
                break
        if mult >= 2:
            raise CollidedCriticalPoints(f"critical point {c} has multiplicity {mult}")
        out.append(CriticalPoint(c, mult, mult + 1))
    return out


# parameter slices ---------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ParameterSlice:
    """Affine slice ``lambda = base + t @ directions`` with optional corrector.

    ``relations`` is a sequence of callables ``rel(lam) -> (values, grad)``
    (``values`` shape ``(r,)``, ``grad`` shape ``(r, m)``) that are kept at
    zero by a Newton correction along ``correction`` (shape ``(r, m)``).
    """

    base: np.ndarray
    directions: np.ndarray
    relations: tuple = ()
    correction: np.ndarray | None = None
    corrector_tol: float = 1e-12

    def __post_init__(self):
        base = np.atleast_1d(np.asarray(self.base, dtype=complex))
        D = np.atleast_2d(np.asarray(self.directions, dtype=complex))
        if D.shape[1] != base.shape[0]:
            raise ValueError("directions must live in the parameter space")
        if np.linalg.matrix_rank(D) < D.shape[0]:
            raise ValueError("slice directions must be linearly independent")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "directions", D)
        if self.relations and self.correction is None:
            _, g = self._rel(base)
            object.__setattr__(self, "correction", np.conj(g) / np.linalg.norm(g, axis=1, keepdims=True))

    @property
    def dim(self) -> int:
        return self.directions.shape[0]

    @classmethod
    def line(cls, base, direction=None, **kw):
        base = np.atleast_1d(np.asarray(base, dtype=complex))
        if direction is None:
            direction = np.zeros_like(base)
            direction[0] = 1.0
        return cls(base, np.atleast_2d(direction), **kw)

    @classmethod
    def full(cls, base):
        base = np.atleast_1d(np.asarray(base, dtype=complex))
        return cls(base, np.eye(base.shape[0], dtype=complex))

    def _rel(self, lam):
        vals, grads = [], []
        for r in self.relations:
            v, g = r(lam)
            vals.append(np.atleast_1d(v))
            grads.append(np.atleast_2d(g))
        return np.concatenate(vals), np.concatenate(grads)

    def project(self, lam) -> np.ndarray:
        """Least-squares slice coordinate of a parameter point."""
        lam = np.atleast_1d(np.asarray(lam, dtype=complex))
        t, *_ = np.linalg.lstsq(self.directions.T, lam - self.base, rcond=None)
        return t

    def point(self, t) -> np.ndarray:
        return self.point_jacobian(t)[0]

    def point_jacobian(self, t):
        """Parameter point and d lambda / d t (shape (m, k)) at slice coordinate t."""
        t = np.atleast_1d(np.asarray(t, dtype=complex))
        lam = self.base + t @ self.directions
        J = self.directions.T.copy()
        if not self.relations:
            return lam, J
        E = self.correction
        s = np.zeros(E.shape[0], dtype=complex)
        for _ in range(60):
            x = lam + s @ E
            v, g = self._rel(x)
            if not np.all(np.isfinite(v)):
                break
            if np.linalg.norm(v) <= self.corrector_tol * (1 + np.linalg.norm(x)):
                break
            ds = np.linalg.lstsq(g @ E.T, -v, rcond=None)[0]
            s = s + ds
            if np.linalg.norm(ds) <= 1e-15 * (1 + np.linalg.norm(x)):
                break
        x = lam + s @ E
        v, g = self._rel(x)
        # implicit differentiation of the corrected graph
        ds_dt = -np.linalg.lstsq(g @ E.T, g @ self.directions.T, rcond=None)[0]
        return x, J + E.T @ ds_dt

    def corrector_residual(self, t) -> float:
        if not self.relations:
            return 0.0
        return float(np.linalg.norm(self._rel(self.point(t))[0]))
