"""Faddeeva function w(z) and the Moshinsky shutter kernel.

w(z) itself comes from scipy.special.wofz. The Moshinsky kernel never calls it
in the lower half-plane: there it is rewritten through w(z) = 2 exp(-z^2) - w(-z)
with the exponential folded into a plane-wave factor that stays bounded.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import wofz

from tunneltime.exceptions import OutOfRangeError, ValidationError
from tunneltime.quantities import UNITS

TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
ROT = np.exp(-0.25j * np.pi)


@dataclass(frozen=True)
class MoshinskyArgs:
    x: float
    t: float
    q: complex
    mass_energy_scale: float
    hbar: float = UNITS.hbar

    def __post_init__(self):
        if not self.t > 0:
            raise ValidationError(f"t must be > 0 fs, got {self.t}", field="t")
        if not self.mass_energy_scale > 0:
            raise ValidationError("mass_energy_scale must be > 0", field="mass_energy_scale")


def _check_finite(values, what):
    if not np.all(np.isfinite(values)):
        raise OutOfRangeError(f"{what} is not representable in double precision")
    return values


def faddeeva_w(z):
    """w(z) = exp(-z^2) erfc(-iz) for scalar or array z."""
    z = np.asarray(z, dtype=complex)
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    if not np.all(np.isfinite(z)):
        raise ValidationError("faddeeva_w needs a finite argument", field="z")
    lower = z.imag < 0
    out = np.empty_like(z)
    out[~lower] = wofz(z[~lower])
    if np.any(lower):
        zl = z[lower]
        with np.errstate(over="ignore", invalid="ignore"):
            out[lower] = 2.0 * np.exp(-zl * zl) - wofz(-zl)
    _check_finite(out, "w(z)")
    return complex(out[0]) if scalar else out


def faddeeva_w_prime(z, w=None):
    """w'(z) = -2 z w(z) + 2i/sqrt(pi)."""
    if w is None:
        w = faddeeva_w(z)
    return -2.0 * np.asarray(z) * w + 1j * TWO_OVER_SQRT_PI


def _kernel(x, t, q, h2m, hbar, with_derivative):
    t = np.asarray(t, dtype=float)
    if np.any(~(t > 0)):
        raise ValidationError("Moshinsky kernel needs t > 0", field="t")
    x, t, q = np.broadcast_arrays(np.asarray(x, dtype=float), t, np.asarray(q, dtype=complex))
    shape = x.shape
    x, t, q = (np.atleast_1d(a).ravel() for a in (x, t, q))
    rate = h2m / hbar
    tau = rate * t
    sqrt_tau = np.sqrt(tau)
    z = 1j * ROT * (x - 2.0 * q * tau) / (2.0 * sqrt_tau)
    chirp = np.exp(1j * x * x / (4.0 * tau))
    upper = z.imag >= 0

    M = np.empty(z.shape, dtype=complex)
    dM = np.empty(z.shape, dtype=complex) if with_derivative else None

    zu = z[upper]
    wu = wofz(zu)
    M[upper] = 0.5 * chirp[upper] * wu

    lower = ~upper
    zl = -z[lower]
    wl = wofz(zl)
    ql, xl, taul = q[lower], x[lower], tau[lower]
    with np.errstate(over="ignore", invalid="ignore"):
        plane = np.exp(1j * (ql * xl - ql * ql * taul))
        M[lower] = plane - 0.5 * chirp[lower] * wl

    if with_derivative:
        dchirp = -1j * x * x * rate / (4.0 * tau * tau)
        dz = 1j * ROT * rate * (-q / (2.0 * sqrt_tau) - x / (4.0 * tau * sqrt_tau))
        dM[upper] = 0.5 * chirp[upper] * (
            dchirp[upper] * wu + faddeeva_w_prime(zu, wu) * dz[upper]
        )
        with np.errstate(over="ignore", invalid="ignore"):
            dM[lower] = -1j * ql * ql * rate * plane - 0.5 * chirp[lower] * (
                dchirp[lower] * wl - faddeeva_w_prime(zl, wl) * dz[lower]
            )
        _check_finite(dM, "dM/dt")

    _check_finite(M, "Moshinsky function")
    M = M.reshape(shape)
    return M, (dM.reshape(shape) if with_derivative else None)


def moshinsky(x, t, q, h2m, hbar=UNITS.hbar):
    """Vectorised M(x, q, t); x, t, q broadcast against each other."""
    return _kernel(x, t, q, h2m, hbar, with_derivative=False)[0]


def moshinsky_with_dt(x, t, q, h2m, hbar=UNITS.hbar):
    """Vectorised (M, dM/dt)."""
    return _kernel(x, t, q, h2m, hbar, with_derivative=True)


def moshinsky_M(args):
    M = moshinsky(args.x, args.t, args.q, args.mass_energy_scale, args.hbar)
    return complex(M.item())


def moshinsky_M_dt(args):
    _, dM = moshinsky_with_dt(args.x, args.t, args.q, args.mass_energy_scale, args.hbar)
    return complex(dM.item())


def moshinsky_direct(x, t, q, h2m, hbar=UNITS.hbar):
    """Unfolded 1/2 exp(i m x^2 / 2 hbar t) w(i y_q); overflows for poles at large t."""
    tau = h2m * np.asarray(t, dtype=float) / hbar
    z = 1j * ROT * (x - 2.0 * np.asarray(q) * tau) / (2.0 * np.sqrt(tau))
    return 0.5 * np.exp(1j * np.asarray(x) ** 2 / (4.0 * tau)) * faddeeva_w(z)
