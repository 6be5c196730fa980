"""Dimensionless formulation: everything at fixed (alpha, u) is one problem.

With X = x / L and T = omega_V t the shutter problem depends on the opacity
alpha and on u = V / E only, so relative frequencies are computed on any
concrete barrier with those two numbers.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from tunneltime.exceptions import BracketError, TunnelTimeError, ValidationError
from tunneltime.extensions import pool
from tunneltime.quantities import BarrierSpec
from tunneltime.solver import build_model
from tunneltime.tfa import omega_av, relative_frequency
from tunneltime.transients import find_tmax

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Reference:
    V: float = 0.3
    m_rel: float = 0.067


DEFAULT_REFERENCE = Reference()


@dataclass(frozen=True)
class DimensionlessPoint:
    alpha: float
    u: float
    X: float
    T: float

    def __post_init__(self):
        for name in ("alpha", "u", "T"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be > 0", field=name)


def instantiate(alpha, u, reference=DEFAULT_REFERENCE):
    if not alpha > 0:
        raise ValidationError(f"alpha must be > 0, got {alpha}", field="alpha")
    if not u > 0:
        raise ValidationError(f"u must be > 0, got {u}", field="u")
    probe = BarrierSpec(V=reference.V, L=1.0, m_rel=reference.m_rel, E=reference.V)
    L = alpha * math.sqrt(probe.h2m / reference.V)
    return BarrierSpec(V=reference.V, L=L, m_rel=reference.m_rel, E=reference.V / u)


@lru_cache(maxsize=64)
def cached_model(spec, tail_tol):
    return build_model(spec, tail_tol)


def rescaled_relative_frequency(alpha, u, X, T, reference=DEFAULT_REFERENCE, tail_tol=1e-4):
    point = DimensionlessPoint(alpha, u, X, T)
    spec = instantiate(point.alpha, point.u, reference)
    model = cached_model(spec, tail_tol)
    x = point.X * spec.L
    t = point.T / model.kin.omega_V
    return omega_av(model, model.region(x), x, t) / model.kin.omega_V


@dataclass(frozen=True)
class OpacityPoint:
    alpha: float
    omega_rel: float | None
    T_max: float | None
    error: str = ""

    @property
    def found(self):
        return self.omega_rel is not None


@dataclass(frozen=True)
class OpacityCurve:
    u: float
    points: tuple

    @property
    def alpha_grid(self):
        return np.array([p.alpha for p in self.points])

    @property
    def omega_rel_at_tmax(self):
        return [p.omega_rel for p in self.points]


OPACITY_HEADER = ["alpha", "omega_rel_at_tmax", "t_max_dimensionless", "found", "error"]


def opacity_point(alpha, u, reference=DEFAULT_REFERENCE, tail_tol=1e-4):
    try:
        spec = instantiate(alpha, u, reference)
        model = cached_model(spec, tail_tol)
        peak = find_tmax(model, spec.L)
        if not peak.found:
            return OpacityPoint(alpha=alpha, omega_rel=None, T_max=None)
        value = relative_frequency(model, spec.L, peak.t_max)
        return OpacityPoint(alpha=alpha, omega_rel=value, T_max=peak.t_max * model.kin.omega_V)
    except TunnelTimeError as e:
        log.warning("opacity point alpha=%g u=%g failed: %s", alpha, u, e)
        return OpacityPoint(alpha=alpha, omega_rel=None, T_max=None, error=str(e))


def opacity_scan(u_list, alpha_grid, reference=DEFAULT_REFERENCE, tail_tol=1e-4, workers=None):
    alpha_grid = np.asarray(alpha_grid, dtype=float)
    if alpha_grid.size == 0 or np.any(alpha_grid <= 0) or np.any(np.diff(alpha_grid) <= 0):
        raise ValidationError("alpha grid must be positive and strictly increasing", field="alpha_grid")
    if not u_list or any(u <= 0 for u in u_list):
        raise ValidationError("u values must be > 0", field="u")
    jobs = [(u, float(a)) for u in u_list for a in alpha_grid]
    points = pool.map(lambda job: opacity_point(job[1], job[0], reference, tail_tol), jobs, workers)
    n = alpha_grid.size
    return [OpacityCurve(u=u, points=tuple(points[i * n:(i + 1) * n])) for i, u in enumerate(u_list)]


def opacity_rows(curve):
    return [[p.alpha, p.omega_rel, p.T_max, p.found, p.error] for p in curve.points]


@dataclass(frozen=True)
class OpacityWindow:
    u: float
    alpha_min: float
    alpha_max: float
    monotone_existence: bool


def _bisect(predicate, lo, hi, tol):
    """predicate(lo) is False, predicate(hi) is True; shrink to width tol."""
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if predicate(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def find_window(u_large=300.0, reference=DEFAULT_REFERENCE, bisect_tol=1e-3,
                alpha_range=(1.5, 4.5), scan_points=13, tail_tol=1e-4, workers=None):
    if u_large < 100:
        raise ValidationError(f"u_large must be >= 100, got {u_large}", field="u_large")
    if not bisect_tol > 0:
        raise ValidationError("bisect_tol must be > 0", field="bisect_tol")
    grid = np.linspace(alpha_range[0], alpha_range[1], scan_points)
    coarse = opacity_scan([u_large], grid, reference, tail_tol, workers)[0].points
    exists = [p.found for p in coarse]

    monotone = all(not a or b for a, b in zip(exists, exists[1:]))
    if not monotone:
        log.warning("resonance existence is not monotone in alpha for u=%g: %s", u_large, exists)

    i_min = next((i for i in range(1, len(exists)) if exists[i] and not exists[i - 1]), None)
    if i_min is None:
        raise BracketError(
            f"no onset of time-domain resonances for u={u_large:g} in alpha {tuple(alpha_range)}",
            interval=tuple(alpha_range),
        )
    alpha_min = _bisect(
        lambda a: opacity_point(a, u_large, reference, tail_tol).found,
        grid[i_min - 1], grid[i_min], bisect_tol,
    )

    i_max = next(
        (i for i in range(i_min + 1, len(coarse))
         if coarse[i].found and coarse[i - 1].found
         and coarse[i - 1].omega_rel < 1.0 <= coarse[i].omega_rel),
        None,
    )
    if i_max is None:
        raise BracketError(
            f"omega_av/omega_V at t_max never crosses 1 for u={u_large:g} in alpha "
            f"({grid[i_min]:.4g}, {alpha_range[1]:.4g})",
            interval=(float(grid[i_min]), float(alpha_range[1])),
        )

    def above_cutoff(alpha):
        point = opacity_point(alpha, u_large, reference, tail_tol)
        if not point.found:
            raise BracketError(f"resonance vanished at alpha={alpha:g} while bisecting",
                               interval=(float(grid[i_max - 1]), float(grid[i_max])))
        return point.omega_rel >= 1.0

    alpha_max = _bisect(above_cutoff, grid[i_max - 1], grid[i_max], bisect_tol)
    log.info("opacity window u=%g: %.4f <= alpha <= %.4f", u_large, alpha_min, alpha_max)
    return OpacityWindow(u=u_large, alpha_min=alpha_min, alpha_max=alpha_max, monotone_existence=monotone)
