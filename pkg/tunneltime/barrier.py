"""Stationary scattering off the rectangular barrier.

Inside the barrier every quantity is written with cos(q s) and sin(q s)/q, which
are even in q and regular at q = 0, so the E = V case needs no separate code path
beyond the small-argument series in `_sin_over_q`.
"""
from __future__ import annotations

import cmath
from dataclasses import dataclass

import numpy as np

from tunneltime.exceptions import ValidationError
from tunneltime.quantities import derive_kinematics

SERIES_CUTOFF = 1e-4


def interior_wavenumber(k, U):
    value = complex(k) * complex(k) - U
    if value.imag == 0:
        # +0j keeps the tunneling branch at q = +i kappa
        value = complex(value.real, 0.0)
    return cmath.sqrt(value)


def _sin_over_q(q, s):
    """sin(q s) / q, continuous through q = 0."""
    s = np.asarray(s, dtype=float)
    qs = q * s
    small = np.abs(qs) < SERIES_CUTOFF
    with np.errstate(invalid="ignore", divide="ignore"):
        exact = np.sin(qs) / q if q != 0 else s
    series = s * (1.0 - qs * qs / 6.0)
    out = np.where(small, series, exact)
    return out[()] if out.ndim == 0 else out


def outgoing_difference(k, q, U):
    """q - k, taken as -U / (q + k) when the plain subtraction would cancel."""
    if abs(q + k) > abs(k):
        return -U / (q + k)
    return q - k


def transmission_denominator(k, U, L):
    """D(k) = (q+k)^2 e^{-iqL} - (q-k)^2 e^{iqL} and its magnitude scale."""
    q = interior_wavenumber(k, U)
    left = (q + k) ** 2 * cmath.exp(-1j * q * L)
    right = outgoing_difference(k, q, U) ** 2 * cmath.exp(1j * q * L)
    return left - right, max(abs(left), abs(right))


@dataclass(frozen=True)
class StationaryState:
    k: float
    q: complex
    t_amp: complex
    r_amp: complex
    a_plus: complex | None
    a_minus: complex | None
    L: float

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        tol = 1e-12 * max(self.L, 1.0)
        if np.any(x < -tol) or np.any(x > self.L + tol):
            raise ValidationError(f"x must lie in [0, {self.L}] nm", field="x")
        return x

    def phi(self, x):
        x = self._check(x)
        s = x - self.L
        edge = self.t_amp * cmath.exp(1j * self.k * self.L)
        return edge * (np.cos(self.q * s) + 1j * self.k * _sin_over_q(self.q, s))

    def phi_prime(self, x):
        x = self._check(x)
        s = x - self.L
        edge = self.t_amp * cmath.exp(1j * self.k * self.L)
        return edge * (-self.q * self.q * _sin_over_q(self.q, s) + 1j * self.k * np.cos(self.q * s))


def stationary_state(spec, sign=1):
    if sign not in (1, -1):
        raise ValidationError("sign must be +1 or -1", field="sign")
    kin = derive_kinematics(spec)
    k = sign * kin.k
    L = spec.L
    q = interior_wavenumber(k, kin.U)
    s_L = complex(_sin_over_q(q, L))
    cos_L = cmath.cos(q * L)
    reduced = 4.0 * k * cos_L - 2j * (q * q + k * k) * s_L
    t_amp = 4.0 * k * cmath.exp(-1j * k * L) / reduced
    edge = t_amp * cmath.exp(1j * k * L)
    r_amp = edge * (cos_L - 1j * k * s_L) - 1.0
    if abs(q) * L < SERIES_CUTOFF:
        a_plus = a_minus = None
    else:
        a_plus = edge * cmath.exp(-1j * q * L) * (q + k) / (2.0 * q)
        a_minus = edge * cmath.exp(1j * q * L) * (q - k) / (2.0 * q)
    return StationaryState(k=k, q=q, t_amp=t_amp, r_amp=r_amp, a_plus=a_plus, a_minus=a_minus, L=L)


def phi(state, x):
    return state.phi(x)


def transmission_probability(spec):
    return abs(stationary_state(spec, 1).t_amp) ** 2
