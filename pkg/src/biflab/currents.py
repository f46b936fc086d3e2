"""Numerical bifurcation currents of marked critical points.

The current of a critical point ``c_i`` has the local potential
``g_i(lambda) = G_lambda(c_i(lambda))``.  On a real 2-dimensional chart its
density is the discrete Laplacian of ``g_i`` divided by ``2 pi``; on a
complex 2-dimensional chart the mixed wedge of two currents is the mixed
complex Monge-Ampere density of their potentials.  Densities are returned
as :class:`GridField` objects and all mass statements are relative.
"""

from __future__ import annotations

import json
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .config import tol
from .errors import GridMismatch, NotPolynomial
from .family import Family, _horner, as_param

MAGIC = b"BIFGRID1"

# ---------------------------------------------------------------------------
# charts and grid fields


@dataclass(frozen=True)
class Chart:
    """Real 2-dimensional chart ``lambda(x, y) = base + x * u + y * v``.

    A complex line through ``base`` in direction ``w`` is ``u = w, v = i w``;
    a real coordinate plane of C^m uses two real unit vectors.
    """

    base: np.ndarray
    u: np.ndarray
    v: np.ndarray

    @classmethod
    def complex_line(cls, base, direction=None):
        base = np.atleast_1d(np.asarray(base, dtype=complex))
        w = np.zeros_like(base)
        w[0] = 1.0
        if direction is not None:
            w = np.asarray(direction, dtype=complex)
        return cls(base, w, 1j * w)

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)[..., None]
        y = np.asarray(y, dtype=float)[..., None]
        return self.base + x * self.u + y * self.v

    def to_json(self):
        f = lambda a: [[complex(z).real, complex(z).imag] for z in a]  # noqa: E731
        return {"base": f(self.base), "u": f(self.u), "v": f(self.v)}

    @classmethod
    def from_json(cls, doc):
        f = lambda a: np.array([complex(x, y) for x, y in a])  # noqa: E731
        return cls(f(doc["base"]), f(doc["u"]), f(doc["v"]))


@dataclass(frozen=True)
class Box:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("degenerate box")

    def axes(self, nx, ny, pad=0):
        hx = (self.x1 - self.x0) / (nx - 1)
        hy = (self.y1 - self.y0) / (ny - 1)
        xs = self.x0 + hx * np.arange(-pad, nx + pad)
        ys = self.y0 + hy * np.arange(-pad, ny + pad)
        return xs, ys, hx, hy

    def as_tuple(self):
        return (self.x0, self.x1, self.y0, self.y1)


@dataclass(frozen=True)
class GridField:
    """Scalar field on an ``nx`` by ``ny`` grid over ``box``; ``values[j, i]`` sits at (x_i, y_j)."""

    box: Box
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ny, nx = self.values.shape
        if nx < 3 or ny < 3:
            raise ValueError("GridField needs at least 3 x 3 samples")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("GridField values must be finite")

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[0]

    @property
    def cell_area(self) -> float:
        _, _, hx, hy = self.box.axes(self.nx, self.ny)
        return hx * hy

    def mass(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def save(self, path) -> None:
        """Flat binary (magic, box, nx, ny, float64 LE row-major) plus a ``.json`` sidecar."""
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<4d", *self.box.as_tuple()))
            fh.write(struct.pack("<2I", self.nx, self.ny))
            fh.write(np.ascontiguousarray(self.values, dtype="<f8").tobytes())
        with open(str(path) + ".json", "w") as fh:
            json.dump(self.meta, fh, sort_keys=True, indent=1, default=_jsonable)

    @classmethod
    def load(cls, path) -> "GridField":
        with open(path, "rb") as fh:
            data = fh.read()
        if len(data) < 48 or data[:8] != MAGIC:
            raise ValueError(f"{path} is not a BIFGRID1 file")
        box = Box(*struct.unpack("<4d", data[8:40]))
        nx, ny = struct.unpack("<2I", data[40:48])
        vals = np.frombuffer(data[48:], dtype="<f8")
        if vals.size != nx * ny:
            raise ValueError(f"{path}: truncated grid payload")
        try:
            with open(str(path) + ".json") as fh:
                meta = json.load(fh)
        except FileNotFoundError:
            meta = {}
        return cls(box, vals.reshape(ny, nx).astype(float), meta)

    def to_png(self, path, log_scale: bool = False, vmin=None, vmax=None) -> None:
        save_png(path, self.values, log_scale=log_scale, vmin=vmin, vmax=vmax)


def _jsonable(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(type(o))


# Colormap: piecewise-linear ramp black -> purple -> red -> orange -> pale
# yellow over [0, 1] (anchors at 0, 0.25, 0.5, 0.75, 1).  Row 0 of the image
# is the top of the box (largest y).
COLORMAP = np.array([
    [0, 0, 0],
    [87, 16, 110],
    [188, 55, 84],
    [249, 142, 9],
    [252, 255, 164],
], dtype=float)


def colorize(values, log_scale=False, vmin=None, vmax=None) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if log_scale:
        v = np.log10(np.maximum(v, 0) + 1e-300)
        if vmin is None:
            vmin = max(v.max() - 8, v.min())
    vmin = v.min() if vmin is None else vmin
    vmax = v.max() if vmax is None else vmax
    s = np.clip((v - vmin) / (vmax - vmin) if vmax > vmin else np.zeros_like(v), 0, 1)
    pos = s * (len(COLORMAP) - 1)
    k = np.minimum(pos.astype(int), len(COLORMAP) - 2)
    frac = (pos - k)[..., None]
    rgb = COLORMAP[k] * (1 - frac) + COLORMAP[k + 1] * frac
    return np.round(rgb).astype(np.uint8)[::-1]


def save_png(path, values, log_scale=False, vmin=None, vmax=None) -> None:
    from PIL import Image

    Image.fromarray(colorize(values, log_scale, vmin, vmax), "RGB").save(path, optimize=False)


def save_bitmap_png(path, bits) -> None:
    """1-bit PNG, member pixels white, top row = largest y."""
    from PIL import Image

    Image.fromarray(np.asarray(bits, dtype=bool)[::-1]).convert("1").save(path, optimize=False)


# ---------------------------------------------------------------------------
# potentials and escape times on parameter grids


def _require_polynomial(family):
    if not getattr(family, "is_polynomial", False):
        raise NotPolynomial("currents are implemented for polynomial families only")


def critical_potential(family: Family, i: int, lams, depth: int, mode: str = "green", radius=None):
    """Potential of the orbit of ``c_i`` at parameters ``lams`` (shape (..., m)).

    ``mode="green"`` gives ``G_lambda(c_i(lambda))`` (0 for orbits bounded up
    to ``depth``); ``mode="fubini_study"`` gives the depth-``depth`` smooth
    approximant ``d^-depth * log(1 + |f^depth(c_i)|^2) / 2``.
    """
    _require_polynomial(family)
    lams = np.asarray(lams, dtype=complex)
    shape = lams.shape[:-1]
    flat = np.ascontiguousarray(lams.reshape(-1, family.param_dim))
    if radius is None:
        radius = family.escape_radius(flat) if mode == "green" else 1e30
    code = _kernels.GREEN if mode == "green" else _kernels.FUBINI_STUDY
    vals, esc = _kernels.critical_potential(flat, *_kernels.family_tables(family),
                                            *_kernels.crit_tables(family, i), int(depth), float(radius), code)
    return vals.reshape(shape), esc.reshape(shape)


def escape_time(family: Family, i: int, lams, depth: int, radius=None):
    """First n with |f^n(c_i)| > radius (or -1) and max |f^n(c_i)| before it."""
    lams = np.asarray(lams, dtype=complex)
    shape = lams.shape[:-1]
    flat = np.ascontiguousarray(lams.reshape(-1, family.param_dim))
    radius = family.escape_radius(flat) if radius is None else radius
    esc, zmax = _kernels.orbit_bound(flat, *_kernels.family_tables(family),
                                     *_kernels.crit_tables(family, i), int(depth), float(radius))
    return esc.reshape(shape), zmax.reshape(shape)


def potential_field(family, i, chart: Chart, box: Box, nx, ny, depth, mode="green", pad=0) -> np.ndarray:
    xs, ys, _, _ = box.axes(nx, ny, pad)
    lams = chart(xs[None, :], ys[:, None])
    return critical_potential(family, i, lams, depth, mode)[0]


def escape_field(family, i, chart: Chart, box: Box, nx, ny, depth, radius=None) -> GridField:
    xs, ys, _, _ = box.axes(nx, ny)
    esc, _ = escape_time(family, i, chart(xs[None, :], ys[:, None]), depth, radius)
    return GridField(box, esc.astype(float), {"kind": "escape_time", "depth": depth, "critical_index": i,
                                              "chart": chart.to_json(), "family": family.to_json()})


# ---------------------------------------------------------------------------
# activity


@dataclass(frozen=True)
class ActivityVerdict:
    status: str
    evidence: float
    radius: float
    reason: str = ""

    def to_json(self):
        return {"status": self.status, "evidence": self.evidence, "radius": self.radius, "reason": self.reason}


def _disk_probe(family, i, lam0s, radius, depth, w, n_radii, n_angles, escape_radius=None):
    """Escape flags and pre-escape derivative maxima on polar disks around each row of ``lam0s``.

    Returns arrays of shape (P, S) for P centers and S = 1 + n_radii n_angles samples.
    """
    r = radius * np.arange(1, n_radii + 1) / n_radii
    ang = 2 * np.pi * np.arange(n_angles) / n_angles
    t = np.concatenate([[0.0], (r[:, None] * np.exp(1j * ang[None, :])).ravel()])
    P, S = lam0s.shape[0], len(t)
    lams = (lam0s[:, None, :] + t[None, :, None] * w).reshape(P * S, -1)
    R = family.escape_radius(lams) if escape_radius is None else escape_radius
    a = family.coefficients(lams)
    z = family.critical(i, lams)
    dz = family.critical_grad(i, lams) @ w
    dl = np.einsum("nmd,m->nd", family.coefficient_grad(lams), w)  # d a_j / dt
    escaped = np.zeros(P * S, bool)
    dmax = np.zeros(P * S)
    with np.errstate(all="ignore"):
        for _ in range(depth):
            f, f1, _ = _horner(a, z)
            ft = _horner(dl, z)[0]
            dz = f1 * dz + ft
            z = f
            escaped |= ~(np.abs(z) <= R)
            live = ~escaped
            dmax[live] = np.maximum(dmax[live], np.abs(dz[live]))
    return escaped.reshape(P, S), dmax.reshape(P, S)


def _verdict(escaped, dmax, radius) -> ActivityVerdict:
    n = len(escaped)
    n_esc = int(escaped.sum())
    bounded_max = float(dmax[~escaped].max()) if n_esc < n else 0.0
    if 0 < n_esc < n:
        return ActivityVerdict("Active", min(n_esc, n - n_esc) / n, radius, "escape and capture coexist")
    # derivatives are recorded up to the step before escape: an orbit that lingers
    # near a repelling cycle before escaping also witnesses non-normality
    if float(dmax.max()) > tol("currents.active_derivative"):
        return ActivityVerdict("Active", math.log10(float(dmax.max())), radius, "parameter derivative blows up")
    if n_esc == n:
        return ActivityVerdict("Passive", 1.0, radius, "every sampled orbit escapes")
    if bounded_max < tol("currents.passive_derivative"):
        return ActivityVerdict("Passive", math.log10(max(bounded_max, 1e-300)), radius,
                               "orbits bounded with small parameter derivative")
    return ActivityVerdict("Undecided", math.log10(bounded_max), radius, "bounded, moderate derivative growth")


def _unit_direction(family, direction):
    w = np.zeros(family.param_dim, dtype=complex)
    w[0] = 1.0
    if direction is not None:
        w = np.asarray(direction, dtype=complex)
        w = w / np.linalg.norm(w)
    return w


def activity_test(family: Family, i: int, lam0, radius: float, depth: int = 50, direction=None,
                  n_radii: int = 8, n_angles: int = 16, escape_radius=None) -> ActivityVerdict:
    """Probe normality of ``lambda -> f^n(c_i(lambda))`` on a disk.

    The disk ``lam0 + t * direction``, ``|t| <= radius`` is sampled on a polar
    grid.  Active: escaping and bounded samples coexist, or the derivative
    along the disk exceeds ``currents.active_derivative`` (before escape).  Passive: every
    sample escapes, or every orbit stays bounded with derivative below
    ``currents.passive_derivative``.  Anything else is Undecided.
    """
    lam0 = as_param(family, lam0)
    w = _unit_direction(family, direction)
    esc, dmax = _disk_probe(family, i, lam0[None, :], radius, depth, w, n_radii, n_angles, escape_radius)
    return _verdict(esc[0], dmax[0], radius)


def activity_field(family, i, chart: Chart, box: Box, nx, ny, depth=50, radius=None,
                   chunk: int = 4096) -> GridField:
    """Activity verdict per pixel (1 Active, 0 Passive, 0.5 Undecided); probe radius defaults to one cell."""
    xs, ys, hx, hy = box.axes(nx, ny)
    radius = max(hx, hy) if radius is None else radius
    code = {"Active": 1.0, "Passive": 0.0, "Undecided": 0.5}
    direction = chart.u if np.allclose(chart.v, 1j * chart.u) else None
    w = _unit_direction(family, direction)
    X, Y = np.meshgrid(xs, ys)
    lams = chart(X.ravel(), Y.ravel())
    vals = np.empty(len(lams))
    for s in range(0, len(lams), chunk):
        esc, dmax = _disk_probe(family, i, lams[s:s + chunk], radius, depth, w, 2, 8)
        for k in range(esc.shape[0]):
            vals[s + k] = code[_verdict(esc[k], dmax[k], radius).status]
    return GridField(box, vals.reshape(ny, nx), {"kind": "activity", "depth": depth, "critical_index": i,
                                                 "probe_radius": radius})


# ---------------------------------------------------------------------------
# densities


def _clamp(values, eps_rel=None):
    eps_rel = tol("currents.eps_neg") if eps_rel is None else eps_rel
    scale = float(np.max(np.abs(values))) if values.size else 0.0
    floor = -eps_rel * scale
    bad = values < floor
    return np.where(bad, floor, values), int(bad.sum())


def laplacian_density(g: np.ndarray, hx: float, hy: float) -> np.ndarray:
    """5-point Laplacian of a padded potential grid divided by 2 pi (interior only)."""
    lap = ((g[1:-1, 2:] - 2 * g[1:-1, 1:-1] + g[1:-1, :-2]) / hx**2
           + (g[2:, 1:-1] - 2 * g[1:-1, 1:-1] + g[:-2, 1:-1]) / hy**2)
    return lap / (2 * math.pi)


def bif_density(family: Family, i: int, chart: Chart, box: Box, nx: int, ny: int, depth: int = 200,
                mode: str = "green") -> GridField:
    """Density of the bifurcation current of ``c_i`` on a real 2-dimensional chart."""
    _require_polynomial(family)
    _, _, hx, hy = box.axes(nx, ny)
    g = potential_field(family, i, chart, box, nx, ny, depth, mode, pad=1)
    dens, n_neg = _clamp(laplacian_density(g, hx, hy))
    meta = {"kind": "bif_density", "critical_index": i, "depth": depth, "mode": mode,
            "negative_clamped": n_neg, "chart": chart.to_json(), "family": family.to_json()}
    return GridField(box, dens, meta)


def boundary_bitmap(family: Family, i: int, chart: Chart, box: Box, nx: int, ny: int,
                    depth: int = 200) -> np.ndarray:
    """Pixels within one cell of the activity boundary, by potential-based distance estimation.

    A pixel is marked when its critical orbit stays bounded for ``depth``
    steps, or when ``g / |grad g|`` (the distance estimate to the zero set of
    the potential) is below one cell.  Unlike a plain escape bitmap this
    keeps filaments thinner than a pixel.
    """
    _, _, hx, hy = box.axes(nx, ny)
    g = potential_field(family, i, chart, box, nx, ny, depth, "green", pad=1)
    gx = (g[1:-1, 2:] - g[1:-1, :-2]) / (2 * hx)
    gy = (g[2:, 1:-1] - g[:-2, 1:-1]) / (2 * hy)
    c = g[1:-1, 1:-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        dist = np.where(c > 0, c / np.hypot(gx, gy), 0.0)
    return (c == 0) | (dist < max(hx, hy))


def lyapunov_density(family: Family, chart: Chart, box: Box, nx: int, ny: int, depth: int = 200) -> GridField:
    """Density of the bifurcation current dd^c L = sum_i T_i on a real 2-dimensional chart.

    For polynomials ``L = log d + sum_i G(c_i)`` over all critical points, so
    summing the marked-point densities covers every critical point exactly
    when the marked list is complete.
    """
    fields = [bif_density(family, i, chart, box, nx, ny, depth) for i in range(family.n_critical)]
    vals = sum(f.values for f in fields)
    return GridField(box, vals, {"kind": "bif_density_total", "depth": depth})


# ---------------------------------------------------------------------------
# mixed Monge-Ampere on 2-complex-dimensional charts


@dataclass(frozen=True)
class Chart4:
    """``lambda = base + (x1 + i y1) e1 + (x2 + i y2) e2`` on a cube of half-width ``half``."""

    base: np.ndarray
    e1: np.ndarray
    e2: np.ndarray
    half: float

    @classmethod
    def coordinate(cls, base, half):
        base = np.asarray(base, dtype=complex)
        eye = np.eye(len(base), dtype=complex)
        return cls(base, eye[0], eye[1], float(half))

    def axis(self, n, pad=1):
        h = 2 * self.half / (n - 1)
        return -self.half + h * np.arange(-pad, n + pad), h

    def __call__(self, x1, y1, x2, y2):
        w1 = (np.asarray(x1) + 1j * np.asarray(y1))[..., None]
        w2 = (np.asarray(x2) + 1j * np.asarray(y2))[..., None]
        return self.base + w1 * self.e1 + w2 * self.e2

    def to_json(self):
        f = lambda a: [[complex(z).real, complex(z).imag] for z in a]  # noqa: E731
        return {"base": f(self.base), "e1": f(self.e1), "e2": f(self.e2), "half": self.half}


@dataclass(frozen=True)
class PotentialGrid4:
    """Potential sampled on a padded 4-dimensional grid, axes (x1, y1, x2, y2)."""

    chart: Chart4
    values: np.ndarray
    h: float
    meta: dict = field(default_factory=dict)


def potential_grid4(family: Family, i: int, chart: Chart4, n: int, depth: int,
                    mode: str = "fubini_study") -> PotentialGrid4:
    ax, h = chart.axis(n)
    X1, Y1, X2, Y2 = np.meshgrid(ax, ax, ax, ax, indexing="ij")
    vals, _ = critical_potential(family, i, chart(X1, Y1, X2, Y2), depth, mode)
    return PotentialGrid4(chart, vals, h, {"critical_index": i, "depth": depth, "mode": mode})


def _hessian_entries(prev, cur, nxt, h):
    """Complex Hessian (u11, u22, Re u12, Im u12) on the interior of slab ``cur``.

    Slabs are indexed (y1, x2, y2); ``prev``/``nxt`` are the neighbouring x1 slabs.
    """
    c = cur[1:-1, 1:-1, 1:-1]
    h2 = h * h
    uxx1 = (nxt[1:-1, 1:-1, 1:-1] - 2 * c + prev[1:-1, 1:-1, 1:-1]) / h2
    uyy1 = (cur[2:, 1:-1, 1:-1] - 2 * c + cur[:-2, 1:-1, 1:-1]) / h2
    uxx2 = (cur[1:-1, 2:, 1:-1] - 2 * c + cur[1:-1, :-2, 1:-1]) / h2
    uyy2 = (cur[1:-1, 1:-1, 2:] - 2 * c + cur[1:-1, 1:-1, :-2]) / h2

    def mixed_x1(k_plus, k_minus):
        return (k_plus(nxt) - k_minus(nxt) - k_plus(prev) + k_minus(prev)) / (4 * h2)

    ux1x2 = mixed_x1(lambda s: s[1:-1, 2:, 1:-1], lambda s: s[1:-1, :-2, 1:-1])
    ux1y2 = mixed_x1(lambda s: s[1:-1, 1:-1, 2:], lambda s: s[1:-1, 1:-1, :-2])
    uy1x2 = (cur[2:, 2:, 1:-1] - cur[2:, :-2, 1:-1] - cur[:-2, 2:, 1:-1] + cur[:-2, :-2, 1:-1]) / (4 * h2)
    uy1y2 = (cur[2:, 1:-1, 2:] - cur[2:, 1:-1, :-2] - cur[:-2, 1:-1, 2:] + cur[:-2, 1:-1, :-2]) / (4 * h2)
    u11 = (uxx1 + uyy1) / 4
    u22 = (uxx2 + uyy2) / 4
    re12 = (ux1x2 + uy1y2) / 4
    im12 = (ux1y2 - uy1x2) / 4
    return u11, u22, re12, im12


def _mixed(hu, hv):
    u11, u22, ur, ui = hu
    v11, v22, vr, vi = hv
    # u11 v22 + u22 v11 - u12 v21 - u21 v12, written symmetrically in (u, v)
    return (u11 * v22 + u22 * v11) - 2 * (ur * vr + ui * vi)


@dataclass(frozen=True)
class WedgeField:
    """Mixed Monge-Ampere density on the interior of a 4-dimensional grid."""

    values: np.ndarray
    h: float
    negative_clamped: int
    meta: dict = field(default_factory=dict)

    def mass(self) -> float:
        return float(self.values.sum() * self.h**4)


def wedge_density(u: PotentialGrid4, v: PotentialGrid4) -> WedgeField:
    """Density of dd^c u ^ dd^c v by central differences of one grid step."""
    if u.values.shape != v.values.shape or abs(u.h - v.h) > 1e-15 * abs(u.h) or u.chart != v.chart:
        raise GridMismatch("potentials are not sampled on the same grid")
    U, V = u.values, v.values
    n = U.shape[0] - 2
    out = np.empty((n, n, n, n))
    for k in range(1, n + 1):
        hu = _hessian_entries(U[k - 1], U[k], U[k + 1], u.h)
        hv = hu if v is u else _hessian_entries(V[k - 1], V[k], V[k + 1], u.h)
        out[k - 1] = _mixed(hu, hv)
    vals, n_neg = _clamp(out)
    return WedgeField(vals, u.h, n_neg, {"pair": [u.meta.get("critical_index"), v.meta.get("critical_index")]})


class _ClampedSum:
    """Streaming total of max(x, -eps * max|x|) with the max known only at the end.

    Negative values are accumulated in a fine logarithmic histogram (count
    and sum per bin), so the clamp can be applied after the last slab.
    """

    edges = np.linspace(-320, 320, 64001)

    def __init__(self):
        self.pos = 0.0
        self.absmax = 0.0
        self.counts = np.zeros(len(self.edges) - 1)
        self.sums = np.zeros(len(self.edges) - 1)

    def add(self, x):
        self.absmax = max(self.absmax, float(np.max(np.abs(x))))
        self.pos += float(x[x > 0].sum())
        neg = -x[x < 0]
        if neg.size:
            k = np.clip(((np.log10(neg) + 320) * 100).astype(np.int64), 0, len(self.counts) - 1)
            self.counts += np.bincount(k, minlength=len(self.counts))
            self.sums += np.bincount(k, weights=neg, minlength=len(self.counts))

    def total(self, eps_rel=None):
        eps_rel = tol("currents.eps_neg") if eps_rel is None else eps_rel
        thr = eps_rel * self.absmax
        if thr <= 0:
            return self.pos, 0
        cut = math.log10(thr)
        below = self.edges[1:] <= cut
        neg = self.sums[below].sum() + thr * self.counts[~below].sum()
        return self.pos - neg, int(self.counts[~below].sum())


@dataclass(frozen=True)
class WedgeMasses:
    """Total masses of the mixed densities on a streamed 4-dimensional grid."""

    masses: dict
    negative_clamped: dict
    block_masses: dict
    n: int
    h: float
    meta: dict = field(default_factory=dict)

    def to_json(self):
        return {"masses": {f"{i},{j}": m for (i, j), m in self.masses.items()},
                "negative_clamped": {f"{i},{j}": m for (i, j), m in self.negative_clamped.items()},
                "n": self.n, "h": self.h, **self.meta}


def wedge_masses(family: Family, chart: Chart4, n: int, depth: int, pairs=((0, 0), (1, 1), (0, 1)),
                 mode: str = "fubini_study", block: int | None = None) -> WedgeMasses:
    """Stream the mixed densities of ``pairs`` over an ``n**4`` grid, slab by slab in x1.

    Only three potential slabs per critical point are held in memory.
    ``block`` (a divisor of n) additionally accumulates unclamped masses
    over ``block**4`` cells for localisation checks.
    """
    ax, h = chart.axis(n)
    idx = sorted({i for p in pairs for i in p})

    tables = _kernels.family_tables(family)
    crit = _kernels.stacked_crit_tables(family, idx)
    code = _kernels.GREEN if mode == "green" else _kernels.FUBINI_STUDY

    if mode == "green":
        corners = chart(*np.meshgrid(*(ax[[0, -1]],) * 4, indexing="ij"))
        radius = 2 * family.escape_radius(corners.reshape(-1, family.param_dim))
    else:
        radius = 1e30

    def slab(k):
        vals = _kernels.slab_potentials(chart.base, chart.e1, chart.e2, float(ax[k]), ax, *tables, *crit,
                                        int(depth), float(radius), code)
        return {i: vals[j] for j, i in enumerate(idx)}

    acc = {p: _ClampedSum() for p in pairs}
    nb = n // block if block else 0
    blocks = {p: np.zeros((nb,) * 4) for p in pairs} if block else {}
    prev, cur = slab(0), slab(1)
    for k in range(1, n + 1):
        nxt = slab(k + 1)
        hes = {i: _hessian_entries(prev[i], cur[i], nxt[i], h) for i in idx}
        for p in pairs:
            dens = _mixed(hes[p[0]], hes[p[1]])
            acc[p].add(dens)
            if block:
                b = dens.reshape(nb, block, nb, block, nb, block).sum(axis=(1, 3, 5))
                blocks[p][(k - 1) // block] += b * h**4
        prev, cur = cur, nxt
    masses, negs = {}, {}
    for p in pairs:
        tot, nneg = acc[p].total()
        masses[p] = tot * h**4
        negs[p] = nneg
    return WedgeMasses(masses, negs, blocks, n, h, {"depth": depth, "mode": mode, "chart": chart.to_json()})
