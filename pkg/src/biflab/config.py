"""Central registry of numerical tolerances and knobs.

Every solver reads its defaults from :data:`TOLERANCES`; the CLI exposes the
same table (module-qualified names) in ``--help`` and accepts overrides in the
``tolerances`` block of a run config.
"""

from __future__ import annotations

import contextlib
from dataclasses import dataclass


@dataclass(frozen=True)
class Tol:
    default: float
    module: str
    help: str


TOLERANCES: dict[str, Tol] = {
    # dynamics-core
    "core.escape_radius_floor": Tol(1e3, "family", "lower bound of the default escape radius"),
    "core.critical_collision": Tol(1e-12, "family", "distance below which marked critical points collide"),
    # potential
    "potential.burn_in": Tol(50, "potential", "discarded inverse-branch steps"),
    "potential.branch_retries": Tol(8, "potential", "resampling attempts at a critical value"),
    "potential.refine_points": Tol(64, "potential", "max preimages averaged per Lyapunov sample (d**depth)"),
    "potential.batch_size": Tol(100, "potential", "batch length for batch-means standard errors"),
    # currents
    "currents.eps_neg": Tol(1e-6, "currents", "negative-density clamp, relative to max |density|"),
    "currents.active_derivative": Tol(1e8, "currents", "|d/dlambda c_n| above which a point is Active"),
    "currents.passive_derivative": Tol(1e3, "currents", "|d/dlambda c_n| below which a bounded disk is Passive"),
    # cycles
    "cycles.newton_tol": Tol(1e-10, "cycles", "residual tolerance for periodic-orbit Newton"),
    "cycles.max_iter": Tol(200, "cycles", "outer Newton iterations"),
    "cycles.max_backtracks": Tol(40, "cycles", "step halvings per Newton iteration"),
    "cycles.tol_cycle": Tol(1e-8, "cycles", "orbit-closure tolerance for exact-period tests"),
    "cycles.tol_sep": Tol(1e-6, "cycles", "minimal separation between distinct cycles"),
    "cycles.rank_rel": Tol(1e-6, "cycles", "singular values above rank_rel*sigma_max count toward rank"),
    "cycles.dedup": Tol(1e-8, "cycles", "deduplication radius for multi-start root finding"),
    "cycles.aberth_max_degree": Tol(256, "cycles", "largest degree solved by simultaneous iteration"),
    "cycles.max_points": Tol(4096, "cycles", "largest d**n accepted by periodic_points"),
    "cycles.step_min": Tol(1e-6, "cycles", "smallest continuation step in theta"),
    # misiurewicz
    "misiurewicz.newton_tol": Tol(1e-10, "misiurewicz", "residual tolerance for critical-relation Newton"),
    "misiurewicz.repelling_margin": Tol(1e-8, "misiurewicz", "required |multiplier| - 1 of the landing cycle"),
    "misiurewicz.tol_trans": Tol(1e-8, "misiurewicz", "|det| threshold relative to the row-norm product"),
    "misiurewicz.dedup": Tol(1e-6, "misiurewicz", "parameter distance merging sweep certificates"),
    "misiurewicz.orbit_check": Tol(1e-8, "misiurewicz", "round-trip distance to the landing cycle"),
    # renorm
    "renorm.R": Tol(20.0, "renorm", "disk radius of the quadratic-like model"),
    "renorm.R_param": Tol(2.5, "renorm", "extent of the model parameter grid"),
    "renorm.delta_emp": Tol(0.25, "renorm", "empirical bound on sup|h| for a good window"),
    "renorm.chart_min": Tol(1e-14, "renorm", "smallest admissible |scale|"),
    "renorm.center_mult": Tol(1e-6, "renorm", "|multiplier| accepted as superattracting"),
    "renorm.tol_straight": Tol(1e-3, "renorm", "multiplier agreement in multiplier mode"),
    "renorm.joint_tol": Tol(1e-9, "renorm", "joint residual of product-embedding samples"),
    "renorm.max_sweeps": Tol(100, "renorm", "alternating-projection sweeps"),
    # experiments
    "experiments.seeds": Tol(256, "experiments", "seed budget per radius"),
}


_ACTIVE: dict = {}


def tol(name: str, overrides: dict | None = None):
    """Return the value of tolerance ``name``, honouring ``overrides`` and active overrides."""
    if overrides and name in overrides:
        return overrides[name]
    if name in _ACTIVE:
        return _ACTIVE[name]
    return TOLERANCES[name].default


@contextlib.contextmanager
def overrides(values: dict | None):
    """Temporarily replace tolerance defaults (unknown names raise KeyError)."""
    values = dict(values or {})
    unknown = sorted(set(values) - set(TOLERANCES))
    if unknown:
        raise KeyError(f"unknown tolerances: {', '.join(unknown)}")
    saved = dict(_ACTIVE)
    _ACTIVE.update(values)
    try:
        yield
    finally:
        _ACTIVE.clear()
        _ACTIVE.update(saved)


def help_table() -> str:
    lines = ["tolerances (name = default  [module] meaning):"]
    for name, t in TOLERANCES.items():
        lines.append(f"  {name} = {t.default:g}  [{t.module}] {t.help}")
    return "\n".join(lines)
