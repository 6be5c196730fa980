"""Transient wavefunction of the quantum shutter from the resonance expansion.

Inside the barrier

    psi_i(x, t) = phi_k(x) M(0, k, t) - phi_-k(x) M(0, -k, t) - sum_n phi_n(x) M(0, k_n, t)

and beyond it

    psi_e(x, t) = T_k M(x, k, t) - T_-k M(x, -k, t) - sum_n T_n M(x, k_n, t)

where the sums run over n = +-1 .. +-N. The internal kernels are taken at x = 0:
the x dependence of the internal solution sits entirely in phi_k(x) and u_n(x).

Both pole sums converge only algebraically in N. Beyond the last kept pole the
kernel is replaced by its large-|k_n| series

    M(x, k_n, t) ~ i e^{ix^2/4tau} / (2 sqrt(pi)) sum_m c_m z_n^-(2m+1),
    z_n = -i e^{-i pi/4} sqrt(tau) (k_n - x / 2tau),

and the moments of phi_n(x) and T_n over the omitted poles come in closed form
from the Green's function (tunneltime.greens).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from tunneltime.barrier import stationary_state
from tunneltime.exceptions import TruncationError, ValidationError
from tunneltime.faddeeva import ROT, moshinsky, moshinsky_with_dt
from tunneltime.greens import odd_moments, transmitted_moments
from tunneltime.quantities import derive_kinematics, tau
from tunneltime.resonances import expansion_coefficients, find_poles, resonant_state

log = logging.getLogger(__name__)

# Both pole sums enter with -1. A -i in front of the external sum breaks the
# x = L continuity between the two expansions; pinned by
# test_solver.py::test_pole_prefactors_are_frozen.
INTERNAL_POLE_PREFACTOR = -1.0
EXTERNAL_POLE_PREFACTOR = -1.0

POLE_CHUNK = 16
DEFAULT_POLE_CAP = 1024
# the pole sums converge in n / alpha^2, so opaque barriers need proportionally more
POLES_PER_OPACITY = 64
# complex entries per evaluation block (rows x poles)
BLOCK_ELEMENTS = 1 << 19
# probe times in units of 1/omega_V, so equal (alpha, u) pick equal pole counts
PROBE_T = np.geomspace(0.05, 25.0, 40)

# w(z) ~ i / (sqrt(pi) z) sum_m c_m z^-2m for large |z|
TAIL_ORDERS = (1, 3, 5)
TAIL_WEIGHTS = (1.0, 0.5, 0.75)

INTERNAL = "internal"
EXTERNAL = "external"


@dataclass(frozen=True)
class WaveModel:
    spec: object
    kin: object
    states: tuple
    stationary_plus: object
    stationary_minus: object
    tail_tol: float
    tail_estimate: float = 0.0
    pole_k: np.ndarray = field(default=None, repr=False, compare=False)
    pole_factor: np.ndarray = field(default=None, repr=False, compare=False)
    pole_T: np.ndarray = field(default=None, repr=False, compare=False)
    pole_q: np.ndarray = field(default=None, repr=False, compare=False)
    pole_c: np.ndarray = field(default=None, repr=False, compare=False)

    @property
    def pole_count(self):
        return len(self.states)

    @property
    def is_free(self):
        return self.spec.is_free

    @property
    def transmission(self):
        """|T_k|^2."""
        return abs(self.stationary_plus.t_amp) ** 2

    def region(self, x):
        return INTERNAL if x < self.spec.L else EXTERNAL

    def psi(self, x, t):
        return psi(self, x, t)

    def dpsi_dt(self, x, t):
        return dpsi_dt(self, self.region(x), x, t)

    def metadata(self):
        return {
            "pole_count": self.pole_count,
            "tail_tol": self.tail_tol,
            "tail_estimate": self.tail_estimate,
            "transmission": self.transmission,
        }


def _frozen(values, dtype=complex):
    arr = np.array(values, dtype=dtype)
    arr.flags.writeable = False
    return arr


def _assemble(spec, kin, states, tail_tol, tail_estimate=0.0):
    plus = stationary_state(spec, 1)
    minus = stationary_state(spec, -1)
    everything = list(states) + [s.mirrored() for s in states]
    terms = [expansion_coefficients(spec, kin.k, s) for s in everything]
    return WaveModel(
        spec=spec,
        kin=kin,
        states=tuple(states),
        stationary_plus=plus,
        stationary_minus=minus,
        tail_tol=tail_tol,
        tail_estimate=tail_estimate,
        pole_k=_frozen([s.k for s in everything]),
        pole_factor=_frozen([t.factor for t in terms]),
        pole_T=_frozen([t.T_n for t in terms]),
        pole_q=_frozen([s.q for s in everything]),
        pole_c=_frozen([[s.c_plus, s.c_minus] for s in everything]),
    )


def model_from_states(spec, states, tail_tol=1e-2):
    """WaveModel with a fixed set of resonant states, no adaptive truncation."""
    return _assemble(spec, derive_kinematics(spec), states, tail_tol)


def pole_cap_for(spec):
    """Default pole cap: DEFAULT_POLE_CAP, raised with the opacity alpha^2 = U L^2."""
    alpha = derive_kinematics(spec).alpha
    return max(DEFAULT_POLE_CAP, int(math.ceil(POLES_PER_OPACITY * alpha * alpha)))


def build_model(spec, tail_tol=1e-4, pole_cap=None, workers=None, t_floor=None):
    """Resonance expansion truncated where the neglected poles fall below tail_tol.

    The tail beyond N poles is estimated by the pairs N+1 .. 2N, so the loop keeps
    doubling the pole set until some N <= count / 2 meets the tolerance. Probe times
    start at t_floor (fs) when given, else at PROBE_T[0] / omega_V.
    """
    if not 0 < tail_tol <= 1e-2:
        raise ValidationError(f"tail_tol must lie in (0, 1e-2], got {tail_tol}", field="tail_tol")
    kin = derive_kinematics(spec)
    if spec.is_free:
        return _assemble(spec, kin, (), tail_tol)

    cap = pole_cap_for(spec) if pole_cap is None else pole_cap
    probes_x = np.array([0.0, spec.L / 2, spec.L, 2 * spec.L])
    probes_t = PROBE_T / kin.omega_V
    if t_floor is not None:
        if not 0 < t_floor < probes_t[-1]:
            raise ValidationError(f"t_floor must lie in (0, {probes_t[-1]:.3g}) fs", field="t_floor")
        probes_t = np.geomspace(t_floor, probes_t[-1], PROBE_T.size)
    states = []
    while True:
        want = min(cap, max(POLE_CHUNK, 2 * len(states)))
        if want <= len(states):
            raise TruncationError(
                f"tail tolerance {tail_tol:g} not reached with {cap} poles"
            )
        poles = find_poles(spec, want - len(states), start=len(states) + 1, workers=workers)
        states.extend(resonant_state(spec, p) for p in poles)
        model = _assemble(spec, kin, states, tail_tol)
        tails = _tail_estimates(model, probes_x, probes_t)
        below = np.nonzero(tails <= tail_tol)[0]
        if below.size:
            N = int(below[0]) + 1
            log.info(
                "build_model V=%g L=%g E=%g: %d poles, tail %.2e",
                spec.V, spec.L, spec.E, N, tails[N - 1],
            )
            return _assemble(spec, kin, states[:N], tail_tol, float(tails[N - 1]))
        log.debug("build_model: %d poles not enough (best tail %.2e)", len(states), tails.min())


def _tail_estimates(model, probes_x, times):
    """Relative size of pairs N+1 .. 2N for N = 1 .. count // 2, worst probe position.

    Each pair is measured as max_t |pair term| / max_t |psi|.
    """
    N = model.pole_count
    worst = np.zeros(N // 2)
    for x in probes_x:
        xs = np.full_like(times, x)
        contrib, total = _pole_terms(model, model.region(x), xs, times)
        pairs = np.abs(contrib[:, :N] + contrib[:, N:]).max(axis=0) / np.abs(total).max()
        running = np.concatenate(([0.0], np.cumsum(pairs)))
        cut = np.arange(1, N // 2 + 1)
        worst = np.maximum(worst, running[2 * cut] - running[cut])
    return worst


def _check_domain(model, region, x, t, allow_zero_t):
    if region == INTERNAL and (np.any(x < 0) or np.any(x > model.spec.L)):
        raise ValidationError(f"internal region needs 0 <= x <= {model.spec.L} nm", field="x")
    if region == EXTERNAL and np.any(x < model.spec.L):
        raise ValidationError(f"external region needs x >= {model.spec.L} nm", field="x")
    if region not in (INTERNAL, EXTERNAL):
        raise ValidationError(f"unknown region {region!r}", field="region")
    bad = t < 0 if allow_zero_t else t <= 0
    if np.any(bad) or not np.all(np.isfinite(t)):
        raise ValidationError("t must be > 0 fs", field="t")


def _pole_terms(model, region, x, t, derivative=False):
    """Per-pole contributions (with prefactor) and the full psi (or dpsi/dt)."""
    h2m, k = model.spec.h2m, model.kin.k
    kernel = moshinsky_with_dt if derivative else moshinsky
    pick = (lambda pair: pair[1]) if derivative else (lambda value: value)

    if model.is_free or region == EXTERNAL:
        Mk = pick(kernel(x, t, k, h2m))
        Mmk = pick(kernel(x, t, -k, h2m))
        if model.is_free:
            head = Mk - Mmk
        else:
            head = model.stationary_plus.t_amp * Mk - model.stationary_minus.t_amp * Mmk
        if model.pole_count == 0:
            return np.zeros(x.shape + (0,), dtype=complex), head
        Mn = pick(kernel(x[:, None], t[:, None], model.pole_k[None, :], h2m))
        contrib = EXTERNAL_POLE_PREFACTOR * model.pole_T[None, :] * Mn
        tail, asymptotic = _external_tail(model, x, t, derivative)
        total = head + contrib.sum(axis=1) + EXTERNAL_POLE_PREFACTOR * tail
        return contrib - EXTERNAL_POLE_PREFACTOR * asymptotic, total

    zero = np.zeros_like(x)
    Mk = pick(kernel(zero, t, k, h2m))
    Mmk = pick(kernel(zero, t, -k, h2m))
    head = model.stationary_plus.phi(x) * Mk - model.stationary_minus.phi(x) * Mmk
    phase = np.exp(1j * model.pole_q[None, :] * x[:, None])
    u = model.pole_c[None, :, 0] * phase + model.pole_c[None, :, 1] / phase
    phi_n = model.pole_factor[None, :] * u
    Mn = pick(kernel(zero[:, None], t[:, None], model.pole_k[None, :], h2m))
    contrib = INTERNAL_POLE_PREFACTOR * phi_n * Mn
    if model.pole_count == 0:
        return contrib, head

    series = _tail_series(model, t, derivative)
    moments = _moments(model, x)
    tail = np.zeros(x.shape, dtype=complex)
    asymptotic = np.zeros(contrib.shape, dtype=complex)
    for A, Q, j in zip(series, moments, TAIL_ORDERS):
        kept = phi_n * model.pole_k[None, :] ** (-j)
        tail += A * (2j * k * Q - kept.sum(axis=1))
        asymptotic += A[:, None] * kept
    total = head + contrib.sum(axis=1) + INTERNAL_POLE_PREFACTOR * tail
    # what each pole adds beyond its share of the closed-form tail
    return contrib - INTERNAL_POLE_PREFACTOR * asymptotic, total


def _external_tail(model, x, t, derivative):
    """Omitted-pole part of sum_n T_n M(x, k_n, t), plus each kept pole's own series term.

    With c = x / 2tau the series reads sum_m g_m(t) (k_n - c)^-(2m+1); its time
    derivative also needs the even moments, since dc/dt = -c / t.
    """
    reduced = tau(model.spec, t)
    c = x / (2.0 * reduced)
    chirp = np.exp(1j * x * x / (4.0 * reduced))
    root = -1j * ROT * np.sqrt(reduced)
    orders = tuple(range(1, TAIL_ORDERS[-1] + 2))
    b_min = float(-model.pole_k.imag.max())
    R = transmitted_moments(model.kin.k, c, model.kin.U, model.spec.L, b_min, orders)
    shifted = model.pole_k[None, :] - c[:, None]
    power = {j: shifted ** (-j) for j in orders}
    omitted = {j: R[j - 1] - (model.pole_T[None, :] * power[j]).sum(axis=1) for j in orders}

    tail = np.zeros(x.shape, dtype=complex)
    asymptotic = np.zeros(shifted.shape, dtype=complex)
    for weight, j in zip(TAIL_WEIGHTS, TAIL_ORDERS):
        g = 0.5j / np.sqrt(np.pi) * weight * chirp * root ** (-j)
        if derivative:
            dg = g * (-1j * x * x / (4.0 * reduced * t) - 0.5 * j / t)
            tail += dg * omitted[j] + g * j * omitted[j + 1] * (-c / t)
        else:
            tail += g * omitted[j]
            asymptotic += g[:, None] * model.pole_T[None, :] * power[j]
    return tail, asymptotic


def _tail_series(model, t, derivative):
    """A_m(t) with M(0, q, t) ~ sum_m A_m(t) q^-(2m+1) for |q| >> 1 / sqrt(tau)."""
    root = -1j * ROT * np.sqrt(tau(model.spec, t))
    series = []
    for c, j in zip(TAIL_WEIGHTS, TAIL_ORDERS):
        A = 0.5j / np.sqrt(np.pi) * c * root ** (-j)
        series.append(-0.5 * j * A / t if derivative else A)
    return series


def _moments(model, x):
    """Q_j at each x, evaluated once per distinct position."""
    spec = model.spec
    positions, inverse = np.unique(x, return_inverse=True)
    k_min = float(np.abs(model.pole_k).min())
    Q = odd_moments(model.kin.k, positions, model.kin.U, spec.L, k_min, TAIL_ORDERS)
    return Q[:, inverse.ravel()]


def _evaluate(model, region, x, t, derivative):
    x = np.asarray(x, dtype=float)
    t = np.asarray(t, dtype=float)
    xb, tb = np.broadcast_arrays(x, t)
    shape = xb.shape
    xf, tf = xb.ravel().copy(), tb.ravel().copy()
    _check_domain(model, region, xf, tf, allow_zero_t=not derivative)
    out = np.zeros(xf.shape, dtype=complex)
    # t = 0 is the initial condition itself, which vanishes for x >= 0
    live = np.nonzero(tf > 0)[0]
    rows = max(16, BLOCK_ELEMENTS // max(1, 2 * model.pole_count))
    for start in range(0, live.size, rows):
        idx = live[start:start + rows]
        out[idx] = _pole_terms(model, region, xf[idx], tf[idx], derivative)[1]
    out = out.reshape(shape)
    return complex(out) if out.ndim == 0 else out


def psi_internal(model, x, t):
    return _evaluate(model, INTERNAL, x, t, derivative=False)


def psi_external(model, x, t):
    return _evaluate(model, EXTERNAL, x, t, derivative=False)


def psi(model, x, t):
    """Dispatch on position: internal for x < L, external otherwise."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return _evaluate(model, model.region(float(x)), x, t, derivative=False)
    x, t = np.broadcast_arrays(x, np.asarray(t, dtype=float))
    out = np.empty(x.shape, dtype=complex)
    inside = x < model.spec.L
    if np.any(inside):
        out[inside] = psi_internal(model, x[inside], t[inside])
    if np.any(~inside):
        out[~inside] = psi_external(model, x[~inside], t[~inside])
    return out


def dpsi_dt(model, region, x, t):
    return _evaluate(model, region, x, t, derivative=True)


def free_shutter(spec, x, t):
    """M(x, k, t) - M(x, -k, t): the shutter solution with no barrier."""
    k = derive_kinematics(spec).k
    return moshinsky(x, t, k, spec.h2m) - moshinsky(x, t, -k, spec.h2m)
