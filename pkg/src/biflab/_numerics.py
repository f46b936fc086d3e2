"""Orbit jets and the damped Newton driver used by all solvers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .family import Family, _horner, _horner_grad


@dataclass
class Jet:
    """Derivatives of ``z_n = f_lambda^n(z_0)``.

    ``dz`` is d z_n / d z_0, ``dl`` the partial derivative in lambda (shape
    ``(..., m)``), ``ddz`` and ``ddzl`` the second derivatives
    d^2 z_n / d z_0^2 and d^2 z_n / d z_0 d lambda (only when requested).
    """

    z: np.ndarray
    dz: np.ndarray
    dl: np.ndarray
    ddz: np.ndarray | None = None
    ddzl: np.ndarray | None = None


def orbit_jet(family: Family, lam, z0, n: int, second: bool = False) -> Jet:
    lam = np.asarray(lam, dtype=complex)
    a = family.coefficients(lam)
    ga = family.coefficient_grad(lam)
    z = np.asarray(z0, dtype=complex) * np.ones(lam.shape[:-1], dtype=complex)
    A = np.ones_like(z)
    B = np.zeros(z.shape + (family.param_dim,), dtype=complex)
    C = np.zeros_like(z) if second else None
    D = np.zeros_like(B) if second else None
    with np.errstate(all="ignore"):
        for _ in range(n):
            f, f1, f2 = _horner(a, z)
            fl, flz = _horner_grad(ga, z)
            if second:
                D = f2[..., None] * A[..., None] * B + flz * A[..., None] + f1[..., None] * D
                C = f2 * A * A + f1 * C
            B = f1[..., None] * B + fl
            A = f1 * A
            z = f
    return Jet(z, A, B, C, D)


def critical_orbit_jet(family: Family, lam, i: int, n: int) -> tuple:
    """f^n(c_i(lambda)) and its total lambda-gradient."""
    lam = np.asarray(lam, dtype=complex)
    c = family.critical(i, lam)
    jet = orbit_jet(family, lam, c, n)
    grad = jet.dl + jet.dz[..., None] * family.critical_grad(i, lam)
    return jet.z, grad, jet.dz


def critical_orbit_jets(family: Family, lam, i: int, steps) -> dict:
    """{n: (f^n(c_i), total lambda-gradient)} for every n in ``steps``, one pass."""
    lam = np.asarray(lam, dtype=complex)
    a = family.coefficients(lam)
    ga = family.coefficient_grad(lam)
    z = complex(family.critical(i, lam))
    B = np.asarray(family.critical_grad(i, lam), dtype=complex)
    out = {}
    with np.errstate(all="ignore"):
        for n in range(max(steps) + 1):
            if n in steps:
                out[n] = (z, B.copy())
            f, f1, _ = _horner(a, z)
            fl, _ = _horner_grad(ga, z)
            B = f1 * B + fl
            z = complex(f)
    return out


def orbit(family: Family, lam, z0, n: int) -> np.ndarray:
    """Points z_0 .. z_n (length n + 1)."""
    a = family.coefficients(np.asarray(lam, dtype=complex))
    out = np.empty(n + 1, dtype=complex)
    z = complex(z0)
    out[0] = z
    with np.errstate(all="ignore"):
        for k in range(1, n + 1):
            z = complex(_horner(a, z)[0])
            out[k] = z
    return out


def multiplier(family: Family, lam, points) -> complex:
    a = family.coefficients(np.asarray(lam, dtype=complex))
    with np.errstate(all="ignore"):
        return complex(np.prod(_horner(a, np.asarray(points, dtype=complex))[1]))


@dataclass
class NewtonResult:
    x: np.ndarray
    residual: float
    iterations: int
    converged: bool


def damped_newton(F, x0, tol: float = 1e-10, max_iter: int = 200,
                  max_backtracks: int = 40, xtol: float = 0.0) -> NewtonResult:
    """Backtracking Newton for a square (or least-squares) complex system.

    ``F(x)`` returns ``(residual, jacobian)``.  A step is halved until the
    residual norm decreases; non-finite trial points count as failures.
    With ``xtol > 0`` iteration also stops once a full step is below
    ``xtol * (1 + |x|)`` (rounding floor reached).
    """
    x = np.asarray(x0, dtype=complex).copy()
    try:
        r, J = F(x)
    except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError):
        return NewtonResult(x, np.inf, 0, False)
    norm = np.linalg.norm(r) if np.all(np.isfinite(r)) else np.inf
    if not np.isfinite(norm):
        return NewtonResult(x, np.inf, 0, False)
    for it in range(max_iter):
        if norm <= tol:
            return NewtonResult(x, float(norm), it, True)
        if not np.all(np.isfinite(J)):
            break
        try:
            dx = np.linalg.lstsq(J, -r, rcond=None)[0]
        except np.linalg.LinAlgError:
            break
        if xtol > 0 and np.linalg.norm(dx) <= xtol * (1 + np.linalg.norm(x)):
            try:
                rn, Jn = F(x + dx)
            except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError):
                break
            if np.all(np.isfinite(rn)) and np.linalg.norm(rn) <= norm:
                x, norm = x + dx, np.linalg.norm(rn)
            break
        alpha = 1.0
        for _ in range(max_backtracks):
            xn = x + alpha * dx
            try:
                rn, Jn = F(xn)
            except (FloatingPointError, ArithmeticError, np.linalg.LinAlgError):
                rn = None
            if rn is not None and np.all(np.isfinite(rn)):
                nn = np.linalg.norm(rn)
                if nn < norm:
                    x, r, J, norm = xn, rn, Jn, nn
                    break
            alpha *= 0.5
        else:
            break
    return NewtonResult(x, float(norm), max_iter, bool(norm <= tol))
