"""Time-frequency analysis of the transient amplitude.

omega_av = -Im[(1/psi) dpsi/dt] and sigma = |Re[(1/psi) dpsi/dt]|, both in 1/fs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from tunneltime.exceptions import NodeError, TunnelTimeError, ValidationError
from tunneltime.extensions import pool
from tunneltime.solver import INTERNAL, build_model, dpsi_dt, psi_external, psi_internal
from tunneltime.transients import check_grid, find_tmax

log = logging.getLogger(__name__)

NODE_GUARD = 1e-12

TUNNELING = "tunneling"
NON_TUNNELING = "non-tunneling"
NO_RESONANCE = "no-resonance"


def _psi(model, region, x, t):
    return psi_internal(model, x, t) if region == INTERNAL else psi_external(model, x, t)


def reference_amplitude(model, x):
    if model.is_free:
        return 1.0
    if x < model.spec.L:
        return abs(model.stationary_plus.phi(x))
    return abs(model.stationary_plus.t_amp)


def log_derivative(model, region, x, t):
    value = _psi(model, region, x, t)
    if abs(value) < NODE_GUARD * reference_amplitude(model, x):
        raise NodeError(f"psi({x} nm, {t} fs) is at a node; the local frequency is undefined")
    return complex(dpsi_dt(model, region, x, t)) / value


def omega_av(model, region, x, t):
    return -log_derivative(model, region, x, t).imag


def sigma(model, region, x, t):
    return abs(log_derivative(model, region, x, t).real)


def relative_frequency(model, x, t):
    omega_V = _cutoff(model)
    return omega_av(model, model.region(x), x, t) / omega_V


def _cutoff(model):
    if model.kin.omega_V <= 0:
        raise ValidationError("relative frequency needs V > 0", field="V")
    return model.kin.omega_V


@dataclass(frozen=True)
class Spectrogram:
    x_probe: float
    t_grid: np.ndarray
    omega_rel: np.ndarray
    sigma: np.ndarray
    valid: np.ndarray
    t_max_marker: float | None = None


SPECTROGRAM_HEADER = ["t_fs", "omega_rel", "sigma_per_fs", "valid"]


def spectrogram(model, x, t_grid, with_marker=True):
    t = check_grid(t_grid)
    region = model.region(x)
    values = _psi(model, region, x, t)
    derivs = dpsi_dt(model, region, x, t)
    magnitude = np.abs(values)
    valid = magnitude >= NODE_GUARD * magnitude.max()
    ratio = np.where(valid, derivs / np.where(valid, values, 1.0), np.nan)
    marker = None
    if with_marker:
        marker = find_tmax(model, x).t_max
    return Spectrogram(
        x_probe=float(x),
        t_grid=t,
        omega_rel=-ratio.imag / _cutoff(model),
        sigma=np.abs(ratio.real),
        valid=valid,
        t_max_marker=marker,
    )


def spectrogram_rows(spec_gram):
    rows = []
    for t, w, s, ok in zip(spec_gram.t_grid, spec_gram.omega_rel, spec_gram.sigma, spec_gram.valid):
        rows.append([float(t), float(w) if ok else None, float(s) if ok else None, bool(ok)])
    return rows


@dataclass(frozen=True)
class PositionRow:
    x: float
    x_over_L: float
    t_max: float | None
    omega_rel: float | None
    error: str = ""

    @property
    def found(self):
        return self.t_max is not None


POSITION_HEADER = ["x_over_L", "x_nm", "t_max_fs", "omega_rel_at_tmax", "found", "error"]


def position_scan(model, x_grid, window=None, workers=None):
    x_grid = np.asarray(x_grid, dtype=float)
    if np.any(x_grid <= 0) or np.any(np.diff(x_grid) <= 0):
        raise ValidationError("x grid must be positive and increasing", field="x_grid")
    L = model.spec.L

    def row(x):
        x = float(x)
        try:
            peak = find_tmax(model, x, window)
            if not peak.found:
                return PositionRow(x=x, x_over_L=x / L, t_max=None, omega_rel=None)
            value = relative_frequency(model, x, peak.t_max)
        except TunnelTimeError as e:
            log.warning("position row x=%g failed: %s", x, e)
            return PositionRow(x=x, x_over_L=x / L, t_max=None, omega_rel=None, error=str(e))
        return PositionRow(x=x, x_over_L=x / L, t_max=peak.t_max, omega_rel=value)

    return pool.map(row, x_grid, workers)


def position_rows(rows):
    return [[r.x_over_L, r.x, r.t_max, r.omega_rel, r.found, r.error] for r in rows]


def cutoff_crossing(rows):
    """First x/L where omega_rel at t_max rises through 1, linearly interpolated."""
    usable = [r for r in rows if r.omega_rel is not None]
    for before, after in zip(usable, usable[1:]):
        if before.omega_rel < 1.0 <= after.omega_rel:
            frac = (1.0 - before.omega_rel) / (after.omega_rel - before.omega_rel)
            return before.x_over_L + frac * (after.x_over_L - before.x_over_L)
    return None


@dataclass(frozen=True)
class Classification:
    label: str
    t_max: float | None = None
    omega_rel: float | None = None
    sigma: float | None = None


def classify_tunneling(model, x, window=None):
    peak = find_tmax(model, x, window)
    if not peak.found:
        return Classification(NO_RESONANCE)
    region = model.region(x)
    ratio = log_derivative(model, region, x, peak.t_max)
    value = -ratio.imag / _cutoff(model)
    label = TUNNELING if value < 1.0 else NON_TUNNELING
    return Classification(label, peak.t_max, value, abs(ratio.real))


def energy_position_scan(spec, energies, x_grid, tail_tol=1e-4, workers=None):
    """position_scan repeated for several incidence energies on one barrier, keyed by E."""
    if not energies:
        raise ValidationError("at least one energy is needed", field="E")
    scans = {}
    for E in energies:
        model = build_model(spec.replace(E=float(E)), tail_tol, workers=workers)
        scans[float(E)] = position_scan(model, x_grid, workers=workers)
    return scans
