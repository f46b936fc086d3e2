"""Numerical laboratory for bifurcation currents of polynomial families.

Modules: ``family`` (families, iteration, critical points), ``potential``
(Green function, equilibrium sampling, Lyapunov exponent), ``currents``
(bifurcation-current densities and wedge masses), ``cycles`` (periodic
orbits, Per_n(w), multi-neutral solver), ``misiurewicz`` (critical
relations and their certificates), ``renorm`` (renormalization windows,
baby Mandelbrot copies, product embedding, dimension estimators),
``experiments`` (batch density and stratification experiments) and ``cli``.
"""

from .config import TOLERANCES, overrides, tol
from .family import Family, ParameterSlice, branner_hubbard, from_json as family_from_json, generic, quadratic

__version__ = "0.1.0"

__all__ = ["Family", "ParameterSlice", "TOLERANCES", "branner_hubbard", "family_from_json", "generic",
           "overrides", "quadratic", "tol"]
