"""Density time series at a probe and detection of the time-domain resonance."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks

from tunneltime.exceptions import TunnelTimeError, ValidationError
from tunneltime.extensions import pool
from tunneltime.quantities import group_velocity
from tunneltime.solver import build_model, psi

log = logging.getLogger(__name__)

COARSE_POINTS = 2000
REFINE_TOL = 1e-6
# local maxima shallower than this fraction of the window maximum are ripples
PROMINENCE_REL = 1e-3


@dataclass(frozen=True)
class TransientProfile:
    x_probe: float
    t_grid: np.ndarray
    density: np.ndarray
    normalized: bool
    t_max: float | None = None
    peak_value: float | None = None
    detection_window: tuple | None = None
    secondary_maxima: tuple = ()


@dataclass(frozen=True)
class PeakResult:
    t_max: float | None
    peak_value: float | None
    window: tuple
    secondary_maxima: tuple = field(default=())

    @property
    def found(self):
        return self.t_max is not None


def check_grid(t_grid):
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < 2:
        raise ValidationError("time grid needs at least two points", field="t_grid")
    if np.any(t <= 0):
        raise ValidationError("time grid entries must be > 0 fs", field="t_grid")
    if np.any(np.diff(t) <= 0):
        raise ValidationError("time grid must be strictly increasing", field="t_grid")
    return t


def density(model, x, t, normalize=True):
    values = np.abs(psi(model, x, t)) ** 2
    return values / model.transmission if normalize else values


def density_series(model, x, t_grid, normalize=True):
    t = check_grid(t_grid)
    return TransientProfile(
        x_probe=float(x), t_grid=t, density=density(model, x, t, normalize), normalized=normalize
    )


def default_window(model):
    spec = model.spec
    t_hi = max(100.0, 20.0 * spec.L / group_velocity(spec, model.kin.k))
    return 0.05, t_hi


def find_tmax(model, x, window=None, coarse_points=COARSE_POINTS, refine_tol=REFINE_TOL,
              prominence_rel=PROMINENCE_REL):
    """Earliest significant interior maximum of |psi(x, t)|^2 on a log grid, refined by golden section."""
    t_lo, t_hi = window or default_window(model)
    if not 0 < t_lo < t_hi:
        raise ValidationError(f"invalid window ({t_lo}, {t_hi})", field="window")
    if coarse_points < 3:
        raise ValidationError("coarse_points must be >= 3", field="coarse_points")
    t = np.geomspace(t_lo, t_hi, coarse_points)
    d = density(model, x, t)
    peaks, _ = find_peaks(d, prominence=prominence_rel * d.max())
    if peaks.size == 0:
        return PeakResult(t_max=None, peak_value=None, window=(t_lo, t_hi))

    i = int(peaks[0])
    secondary = tuple(float(t[j]) for j in peaks[1:])
    lo, mid, hi = t[i - 1], t[i], t[i + 1]

    def objective(s):
        return -float(density(model, x, s))

    t_max, peak = mid, d[i]
    if d[i] > d[i - 1] and d[i] > d[i + 1]:
        res = minimize_scalar(
            objective, bracket=(lo, mid, hi), method="golden", options={"xtol": refine_tol}
        )
        if lo < res.x < hi and -res.fun >= peak:
            t_max, peak = float(res.x), -float(res.fun)
    return PeakResult(t_max=float(t_max), peak_value=float(peak), window=(t_lo, t_hi),
                      secondary_maxima=secondary)


def profile_with_peak(model, x, t_grid, window=None):
    profile = density_series(model, x, t_grid)
    peak = find_tmax(model, x, window)
    return TransientProfile(
        x_probe=profile.x_probe,
        t_grid=profile.t_grid,
        density=profile.density,
        normalized=True,
        t_max=peak.t_max,
        peak_value=peak.peak_value,
        detection_window=peak.window,
        secondary_maxima=peak.secondary_maxima,
    )


@dataclass(frozen=True)
class BasinRow:
    L: float
    t_max: float | None
    peak_value: float | None
    found: bool
    error: str = ""


BASIN_HEADER = ["L_nm", "t_max_fs", "peak_value", "found", "error"]


def basin_scan(spec_template, L_grid, tail_tol=1e-4, workers=None):
    L_grid = np.asarray(L_grid, dtype=float)
    if np.any(L_grid <= 0) or np.any(np.diff(L_grid) <= 0):
        raise ValidationError("L grid must be positive and increasing", field="L_grid")

    def row(L):
        try:
            spec = spec_template.replace(L=float(L))
            model = build_model(spec, tail_tol)
            peak = find_tmax(model, spec.L)
        except TunnelTimeError as e:
            log.warning("basin row L=%g failed: %s", L, e)
            return BasinRow(L=float(L), t_max=None, peak_value=None, found=False, error=str(e))
        log.debug("basin row L=%g t_max=%s", L, peak.t_max)
        return BasinRow(L=float(L), t_max=peak.t_max, peak_value=peak.peak_value, found=peak.found)

    return pool.map(row, L_grid, workers)


def basin_rows(rows):
    return [[r.L, r.t_max, r.peak_value, r.found, r.error] for r in rows]
