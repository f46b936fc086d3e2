"""Compiled per-point kernels for parameter-space grids."""

from __future__ import annotations

import math
import warnings

import numba
import numpy as np
from numba import njit, prange

GREEN = 0
FUBINI_STUDY = 1
_BIG = 1e30
_FAR = 1e100

# an outdated system TBB only triggers a fallback to another threading layer
warnings.filterwarnings("ignore", message="The TBB threading layer requires", category=numba.NumbaWarning)


@njit(cache=True)
def _coeffs(lam, zpow, exps, coef, out):
    for j in range(out.shape[0]):
        out[j] = 0.0
    for t in range(coef.shape[0]):
        v = coef[t]
        for i in range(lam.shape[0]):
            for _ in range(exps[t, i]):
                v *= lam[i]
        out[zpow[t]] += v


@njit(cache=True)
def _poly(lam, exps, coef):
    s = 0j
    for t in range(coef.shape[0]):
        v = coef[t]
        for i in range(lam.shape[0]):
            for _ in range(exps[t, i]):
                v *= lam[i]
        s += v
    return s


@njit(cache=True)
def _horner(a, z):
    d = a.shape[0] - 1
    p = a[d]
    for j in range(d - 1, -1, -1):
        p = p * z + a[j]
    return p


_CHUNK = 4096


@njit(cache=True)
def _potential_one(z, depth, radius, mode, a):
    d = a.shape[0] - 1
    cut = radius if mode == GREEN else _BIG
    for k in range(1, depth + 1):
        z = _horner(a, z)
        r = abs(z)
        if r > cut or not math.isfinite(r):
            kk = k
            if mode == GREEN:
                while r < _FAR and kk < k + 64:
                    w = _horner(a, z)
                    if not math.isfinite(abs(w)):
                        break
                    z = w
                    r = abs(z)
                    kk += 1
            if not math.isfinite(r):
                r = cut
            L = math.log(abs(a[d])) / (d - 1)
            g = (math.log(r) + L) / float(d) ** kk
            if mode == GREEN:
                return g, k
            return g - L / float(d) ** depth, k
    if mode == GREEN:
        return 0.0, -1
    return 0.5 * math.log1p(abs(z) ** 2) / float(d) ** depth, -1


@njit(parallel=True, cache=True)
def critical_potential(lams, zpow, exps, coef, cexps, ccoef, depth, radius, mode):
    """Potential of a critical orbit at every parameter row of ``lams``.

    mode GREEN: d^-k (log|z_k| + log|a_d|/(d-1)) once |z_k| passes ``radius``
    (iterating on to |z| ~ 1e100 first), 0 if the orbit stays bounded for
    ``depth`` steps.
    mode FUBINI_STUDY: d^-depth * log(1 + |z_depth|^2) / 2, with the escaped
    tail extrapolated once |z| exceeds 1e30.
    Returns (values, escape_time) with escape_time = -1 for bounded orbits.
    """
    n = lams.shape[0]
    d = int(zpow.max())
    vals = np.zeros(n)
    esc = np.full(n, -1, dtype=np.int64)
    nchunks = (n + _CHUNK - 1) // _CHUNK
    for c in prange(nchunks):
        a = np.empty(d + 1, dtype=np.complex128)
        for p in range(c * _CHUNK, min(n, (c + 1) * _CHUNK)):
            lam = lams[p]
            _coeffs(lam, zpow, exps, coef, a)
            v, e = _potential_one(_poly(lam, cexps, ccoef), depth, radius, mode, a)
            vals[p] = v
            esc[p] = e
    return vals, esc


@njit(parallel=True, cache=True)
def critical_potentials(lams, zpow, exps, coef, cexps, ccoef, depth, radius, mode):
    """``critical_potential`` for several critical points in one pass.

    ``cexps`` (q, T, m) and ``ccoef`` (q, T) are zero-padded monomial tables
    of the q critical points; returns values of shape (q, n).
    """
    n = lams.shape[0]
    q = ccoef.shape[0]
    d = int(zpow.max())
    vals = np.zeros((q, n))
    nchunks = (n + _CHUNK - 1) // _CHUNK
    for c in prange(nchunks):
        a = np.empty(d + 1, dtype=np.complex128)
        for p in range(c * _CHUNK, min(n, (c + 1) * _CHUNK)):
            lam = lams[p]
            _coeffs(lam, zpow, exps, coef, a)
            for j in range(q):
                v, e = _potential_one(_poly(lam, cexps[j], ccoef[j]), depth, radius, mode, a)
                vals[j, p] = v
    return vals


@njit(parallel=True, cache=True)
def slab_potentials(base, e1, e2, x1, ax, zpow, exps, coef, cexps, ccoef, depth, radius, mode):
    """Potentials on the slab lambda = base + (x1 + i y1) e1 + (x2 + i y2) e2, (y1, x2, y2) in ax^3."""
    n = ax.shape[0]
    q = ccoef.shape[0]
    d = int(zpow.max())
    m = base.shape[0]
    vals = np.zeros((q, n, n, n))
    for i in prange(n):
        a = np.empty(d + 1, dtype=np.complex128)
        lam = np.empty(m, dtype=np.complex128)
        w1 = complex(x1, ax[i])
        for j in range(n):
            for k in range(n):
                w2 = complex(ax[j], ax[k])
                for t in range(m):
                    lam[t] = base[t] + w1 * e1[t] + w2 * e2[t]
                _coeffs(lam, zpow, exps, coef, a)
                for c in range(q):
                    v, e = _potential_one(_poly(lam, cexps[c], ccoef[c]), depth, radius, mode, a)
                    vals[c, i, j, k] = v
    return vals


@njit(parallel=True, cache=True)
def orbit_bound(lams, zpow, exps, coef, cexps, ccoef, depth, radius):
    """Escape time (or -1) and max |z_k| of critical orbits, per parameter row."""
    n = lams.shape[0]
    d = int(zpow.max())
    esc = np.full(n, -1, dtype=np.int64)
    zmax = np.zeros(n)
    for p in prange(n):
        a = np.empty(d + 1, dtype=np.complex128)
        lam = lams[p]
        _coeffs(lam, zpow, exps, coef, a)
        z = _poly(lam, cexps, ccoef)
        m = abs(z)
        for k in range(1, depth + 1):
            z = _horner(a, z)
            r = abs(z)
            if r > radius or not math.isfinite(r):
                esc[p] = k
                break
            if r > m:
                m = r
        zmax[p] = m
    return esc, zmax


@njit(parallel=True, cache=True)
def renorm_escape(coeffs, c, alpha, n1, max_iter, R):
    """Iterate w -> alpha (f^n1(c + w / alpha) - c) from w = 0, per parameter row.

    Returns the first step at which |w| > R, or -1 if the orbit stays in
    D(0, R) for ``max_iter`` steps.
    """
    n = coeffs.shape[0]
    out = np.full(n, -1, dtype=np.int64)
    for p in prange(n):
        a = coeffs[p]
        z = c[p]
        for k in range(1, max_iter + 1):
            for _ in range(n1):
                z = _horner(a, z)
            w = alpha[p] * (z - c[p])
            if not (abs(w) <= R):
                out[p] = k
                break
    return out


def stacked_crit_tables(family, indices):
    tabs = [crit_tables(family, i) for i in indices]
    T = max(1, max(len(c) for _, c in tabs))
    E = np.zeros((len(tabs), T, family.param_dim), dtype=np.int64)
    C = np.zeros((len(tabs), T), dtype=np.complex128)
    for j, (e, c) in enumerate(tabs):
        E[j, :len(c)] = e
        C[j, :len(c)] = c
    return E, C


def set_threads(n: int | None) -> None:
    if n:
        numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))


def family_tables(family):
    return (np.ascontiguousarray(family.zpow, dtype=np.int64),
            np.ascontiguousarray(family.exps, dtype=np.int64),
            np.ascontiguousarray(family.coef, dtype=np.complex128))


def crit_tables(family, i):
    e = np.ascontiguousarray(family.crit_exps[i], dtype=np.int64).reshape(-1, family.param_dim)
    return e, np.ascontiguousarray(family.crit_coef[i], dtype=np.complex128)
