"""Complex resonance poles of the rectangular barrier and their Gamow states."""
from __future__ import annotations

import cmath
import logging
import math
from dataclasses import dataclass

import numpy as np

from tunneltime.barrier import (
    interior_wavenumber,
    outgoing_difference,
    transmission_denominator,
)
from tunneltime.exceptions import (
    ConvergenceError,
    PoleCollisionError,
    ValidationError,
)
from tunneltime.extensions import pool
from tunneltime.quantities import derive_kinematics

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10
MAX_ITER = 100
# rounding in e^{iqL} grows with |qL|; the floor keeps high poles attainable
ROUNDING_FLOOR = 64 * np.finfo(float).eps


@dataclass(frozen=True)
class ResonancePole:
    n: int
    k: complex
    E: complex
    residual: float

    @property
    def a(self):
        return self.k.real

    @property
    def b(self):
        return -self.k.imag

    def mirrored(self):
        """k_{-n} = -conj(k_n)."""
        k = -self.k.conjugate()
        return ResonancePole(n=-self.n, k=k, E=self.E.conjugate(), residual=self.residual)


def scaled_residual(k, spec):
    kin = derive_kinematics(spec)
    D, scale = transmission_denominator(k, kin.U, spec.L)
    return abs(D) / scale


def _newton(n, U, L, delta):
    """Newton on qL + 2i Log(k + q) - i ln U - n pi, whose roots are the zeros of D.

    Returns the root and the step sizes taken, one per iteration.
    """
    k = cmath.sqrt(U + (n * math.pi / L) ** 2) - 1j * delta
    steps = []
    for iteration in range(1, MAX_ITER + 1):
        q = interior_wavenumber(k, U)
        h = q * L + 2j * cmath.log(k + q) - 1j * math.log(U) - n * math.pi
        step = h * q / (L * k + 2j)
        k -= step
        steps.append(abs(step))
        if abs(step) <= 1e-15 * abs(k):
            break
        # stalled at rounding level
        if len(steps) > 2 and abs(step) <= 1e-12 * abs(k) and steps[-1] >= steps[-2]:
            break
    else:
        raise ConvergenceError(
            f"pole {n}: Newton did not converge in {MAX_ITER} iterations", index=n
        )
    order = _observed_order(steps, 1e-12 * abs(k))
    log.debug("pole %d converged in %d iterations (observed order %s)", n, iteration, order)
    return k, steps


def _observed_order(steps, floor=0.0):
    """log(e2 / e1) / log(e1 / e0) over the last three steps above floor."""
    usable = [s for s in steps if s > floor]
    if len(usable) < 3:
        return None
    e0, e1, e2 = usable[-3:]
    if e0 == e1 or e1 == 0 or e2 == 0:
        return None
    return math.log(e2 / e1) / math.log(e1 / e0)


def residual_tolerance(k, L):
    return max(RESIDUAL_TOL, ROUNDING_FLOOR * abs(k) * L)


def find_pole(spec, n):
    kin = derive_kinematics(spec)
    k, _ = _newton(n, kin.U, spec.L, 0.1 / spec.L)
    if not (k.real > 0 and k.imag < 0):
        raise ConvergenceError(f"pole {n} left the fourth quadrant: {k}", index=n)
    residual = scaled_residual(k, spec)
    if residual > residual_tolerance(k, spec.L):
        raise ConvergenceError(f"pole {n}: residual {residual:.3e} above tolerance", index=n)
    return ResonancePole(n=n, k=k, E=spec.h2m * k * k, residual=residual)


def find_poles(spec, count, start=1, workers=None):
    """Poles n = start .. start + count - 1, ordered by n."""
    if count < 1:
        raise ValidationError(f"count must be >= 1, got {count}", field="count")
    if spec.is_free:
        raise ValidationError("a free shutter (V = 0 or L = 0) has no resonance poles", field="V")
    poles = pool.map(lambda n: find_pole(spec, n), range(start, start + count), workers)
    _check_distinct(poles)
    return tuple(poles)


def _check_distinct(poles):
    for before, after in zip(poles, poles[1:]):
        if not after.a > before.a:
            raise PoleCollisionError(
                f"poles {before.n} and {after.n} are not ordered: {before.k}, {after.k}"
            )
    ks = np.array([p.k for p in poles])
    gaps = np.abs(ks[:, None] - ks[None, :]) + np.eye(len(ks)) * np.inf
    if len(ks) > 1 and gaps.min() <= 1e-8:
        i, j = np.unravel_index(np.argmin(gaps), gaps.shape)
        raise PoleCollisionError(f"poles {poles[i].n} and {poles[j].n} collided at {poles[i].k}")


@dataclass(frozen=True)
class ResonantState:
    pole: ResonancePole
    q: complex
    c_plus: complex
    c_minus: complex
    u0: complex
    uL: complex
    L: float

    @property
    def k(self):
        return self.pole.k

    def u(self, x):
        x = np.asarray(x, dtype=float)
        return self.c_plus * np.exp(1j * self.q * x) + self.c_minus * np.exp(-1j * self.q * x)

    def du(self, x):
        x = np.asarray(x, dtype=float)
        return 1j * self.q * (
            self.c_plus * np.exp(1j * self.q * x) - self.c_minus * np.exp(-1j * self.q * x)
        )

    def norm_integral(self):
        """Closed form of  int_0^L u^2 dx + i (u(0)^2 + u(L)^2) / 2k."""
        return _norm(self.q, self.k, self.c_plus, self.c_minus, self.L)

    def mirrored(self):
        """u_{-n}(x) = conj(u_n(x))."""
        return ResonantState(
            pole=self.pole.mirrored(),
            q=self.q.conjugate(),
            c_plus=self.c_minus.conjugate(),
            c_minus=self.c_plus.conjugate(),
            u0=self.u0.conjugate(),
            uL=self.uL.conjugate(),
            L=self.L,
        )


def _norm(q, k, c_plus, c_minus, L):
    e_plus = cmath.exp(2j * q * L)
    e_minus = cmath.exp(-2j * q * L)
    integral = (
        c_plus**2 * (e_plus - 1.0) / (2j * q)
        + c_minus**2 * (1.0 - e_minus) / (2j * q)
        + 2.0 * c_plus * c_minus * L
    )
    u0 = c_plus + c_minus
    uL = c_plus * cmath.exp(1j * q * L) + c_minus * cmath.exp(-1j * q * L)
    return integral + 1j * (u0**2 + uL**2) / (2.0 * k)


def resonant_state(spec, pole):
    residual = scaled_residual(pole.k, spec)
    if residual > 1e2 * residual_tolerance(pole.k, spec.L):
        raise ValidationError(
            f"pole {pole.n} ({pole.k}) is not a pole of this barrier (residual {residual:.3e})",
            field="pole",
        )
    kin = derive_kinematics(spec)
    k, L = pole.k, spec.L
    q = interior_wavenumber(k, kin.U)
    # u'(0) = -ik u(0) fixes c_plus / c_minus = (q - k) / (q + k)
    c_plus, c_minus = outgoing_difference(k, q, kin.U), q + k
    scale = 1.0 / cmath.sqrt(_norm(q, k, c_plus, c_minus, L))
    c_plus, c_minus = c_plus * scale, c_minus * scale
    u0 = c_plus + c_minus
    uL = c_plus * cmath.exp(1j * q * L) + c_minus * cmath.exp(-1j * q * L)
    return ResonantState(pole=pole, q=q, c_plus=c_plus, c_minus=c_minus, u0=u0, uL=uL, L=L)


def siegert_residuals(state):
    """Relative violation of u'(0) = -ik u(0) and u'(L) = ik u(L)."""
    k = state.k
    left = abs(state.du(0.0) + 1j * k * state.u0) / abs(k * state.u0)
    right = abs(state.du(state.L) - 1j * k * state.uL) / abs(k * state.uL)
    return float(left), float(right)


@dataclass(frozen=True)
class ExpansionTerm:
    """Coefficients of one pole in the internal and external expansions."""

    state: ResonantState
    factor: complex
    T_n: complex

    def phi_n_at(self, x):
        return self.factor * self.state.u(x)


def expansion_coefficients(spec, k, state):
    if not k > 0:
        raise ValidationError(f"k must be > 0, got {k}", field="k")
    kn = state.k
    factor = 2j * k * state.u0 / (k * k - kn * kn)
    T_n = factor * state.uL * cmath.exp(-1j * kn * spec.L)
    return ExpansionTerm(state=state, factor=factor, T_n=T_n)


def completeness_sum(states, x, x2):
    """S_N(x, x') over n = +-1 .. +-N; shrinks towards zero as N grows."""
    total = 0j
    for state in states:
        term = complex(state.u(x) * state.u(x2)) / state.k
        total += term - term.conjugate()
    return total


POLE_HEADER = ["n", "re_k", "im_k", "re_E", "im_E", "residual"]


def pole_rows(poles):
    return [[p.n, p.k.real, p.k.imag, p.E.real, p.E.imag, p.residual] for p in poles]
