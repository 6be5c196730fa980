"""Crank-Nicolson finite-difference integrator for the shutter problem.

Independent of the resonance expansion: it marches

    i hbar dpsi/dt = -(hbar^2 / 2m) psi'' + V(x) psi

on a uniform grid with Dirichlet walls far enough away that nothing
reflected from them reaches a probe before t_final.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from tunneltime.exceptions import NumericalError, ValidationError
from tunneltime.quantities import UNITS, derive_kinematics, group_velocity, tau
from tunneltime.solver import build_model, psi

log = logging.getLogger(__name__)

NORM_DRIFT_TOL = 1e-10
# roundoff per step once the march is long
DRIFT_PER_STEP = 1e-14
SAFETY = 3.0
# largest wall-reflected amplitude tolerated at a probe
ISOLATION_TOL = 1e-6
# comparisons start once the initial discontinuity has dispersed
SETTLE_T = 0.5
# phase advanced per step by the fastest mode a probe still sees after SETTLE_T
PHASE_STEP = 0.02
# Gaussian width (nm) of the probe average used for observed orders
ORDER_SMOOTHING = 0.1


def reflection_speed(spec, safety=SAFETY):
    """hbar k_est / m with k_est = safety * max(k, sqrt(U)), in nm/fs."""
    kin = derive_kinematics(spec)
    k_est = safety * max(kin.k, math.sqrt(kin.U))
    return group_velocity(spec, k_est)


def grid_speed(spec, dx):
    """Largest group velocity of the discrete Laplacian, 2 h2m / (hbar dx), in nm/fs."""
    return group_velocity(spec, 1.0 / dx)


def tail_reach(spec, t_final, tol):
    """Wall gap after which the mirrored shutter tail is below tol at t_final.

    Far from the shutter |psi| ~ 4 k tau^{3/2} / (sqrt(pi) D^2) for a path of
    length D, and any path via a wall is at least twice the gap.
    """
    kin = derive_kinematics(spec)
    reduced = tau(spec, t_final)
    return reduced**0.75 * math.sqrt(kin.k / (math.sqrt(math.pi) * tol))


def isolation_reach(spec, dx, t_final, tol=ISOLATION_TOL):
    """Gap needed between each wall and the nearest probe or the shutter.

    tol = 0 asks for the grid bound alone, which no discrete mode outruns.
    """
    fast = grid_speed(spec, dx) * t_final
    if tol > 0:
        fast = min(fast, tail_reach(spec, t_final, tol))
    return max(reflection_speed(spec) * t_final, fast)


@dataclass(frozen=True)
class GridSpec:
    x_left: float
    x_right: float
    dx: float
    dt: float
    t_final: float
    probes: tuple
    output_dt: float = 0.05

    def validate(self, spec, isolation_tol=ISOLATION_TOL):
        if not (self.dx > 0 and self.dt > 0 and self.t_final > 0 and self.output_dt > 0):
            raise ValidationError("dx, dt, t_final and output_dt must be > 0", field="grid")
        if not self.x_left < 0 <= spec.L < self.x_right:
            raise ValidationError(
                f"grid must satisfy x_left < 0 <= L < x_right, got ({self.x_left}, {self.x_right})",
                field="grid",
            )
        if not self.probes:
            raise ValidationError("at least one probe is needed", field="probes")
        if any(not self.x_left < p < self.x_right for p in self.probes):
            raise ValidationError("probes must lie inside the grid", field="probes")
        reach = isolation_reach(spec, self.dx, self.t_final, isolation_tol)
        if self.x_right - max(self.probes) <= reach or -self.x_left <= reach:
            raise ValidationError(
                f"domain too small: wall reflections travel {reach:.4g} nm before t_final",
                field="grid",
            )
        stride = self.output_dt / self.dt
        if abs(stride - round(stride)) > 1e-9 * stride:
            raise ValidationError("output_dt must be a multiple of dt", field="output_dt")

    @property
    def stride(self):
        return max(1, round(self.output_dt / self.dt))

    def nodes(self):
        i_left = round(self.x_left / self.dx)
        i_right = round(self.x_right / self.dx)
        return self.dx * np.arange(i_left, i_right + 1)

    def refined(self, dx_factor=1, dt_factor=1):
        return replace(self, dx=self.dx / dx_factor, dt=self.dt / dt_factor)

    def widened(self, spec, reach):
        """Same grid with both walls at least reach * 1.05 away."""
        x_left, x_right = _walls(spec, self.probes, reach, self.dx)
        return replace(self, x_left=min(self.x_left, x_left), x_right=max(self.x_right, x_right))


def _walls(spec, probes, reach, dx):
    reach = 1.05 * reach
    kin = derive_kinematics(spec)
    # left wall on a node of the incident standing wave
    half_wave = math.pi / kin.k
    x_left = -half_wave * (math.floor(reach / half_wave) + 1)
    return x_left, max(probes) + reach + dx


def phase_step_dt(spec, probes):
    """dt = PHASE_STEP / omega for the fastest wavenumber reaching max(probes) by SETTLE_T."""
    kin = derive_kinematics(spec)
    c = max(max(probes) / (2.0 * tau(spec, SETTLE_T)), kin.k, math.sqrt(kin.U))
    return PHASE_STEP * UNITS.hbar / (spec.h2m * c * c)


def default_grid(spec, t_final=20.0, probes=None, dx=None, dt=None, output_dt=0.05,
                 isolation_tol=ISOLATION_TOL):
    """Grid with dx = L/400, dt from `phase_step_dt` rounded to divide output_dt."""
    if probes is None:
        probes = (spec.L / 2, spec.L, 2 * spec.L) if spec.L > 0 else (1.0, 2.0)
    probes = tuple(float(p) for p in probes)
    if dx is None:
        dx = spec.L / 400 if spec.L > 0 else 0.01
    if dt is None:
        dt = phase_step_dt(spec, probes)
    dt = output_dt / math.ceil(output_dt / dt)
    x_left, x_right = _walls(spec, probes, isolation_reach(spec, dx, t_final, isolation_tol), dx)
    return GridSpec(x_left=x_left, x_right=x_right, dx=dx, dt=dt, t_final=t_final,
                    probes=probes, output_dt=output_dt)


@dataclass(frozen=True)
class OracleRun:
    times: np.ndarray
    probes: tuple
    values: np.ndarray
    norm_drift: float
    steps: int

    def density(self):
        return np.abs(self.values) ** 2


PROBE_HEADER = ["t_fs", "probe_x_nm", "re_psi", "im_psi", "density"]


def probe_rows(run):
    rows = []
    for i, t in enumerate(run.times):
        for j, x in enumerate(run.probes):
            value = run.values[i, j]
            rows.append([float(t), x, value.real, value.imag, abs(value) ** 2])
    return rows


def _potential(spec, x, dx):
    V = np.where((x > 0) & (x < spec.L), spec.V, 0.0)
    edges = np.isclose(x, 0.0, atol=1e-9 * dx) | np.isclose(x, spec.L, atol=1e-9 * dx)
    if spec.L > 0:
        V = np.where(edges, 0.5 * spec.V, V)
    return V


def _probe_weights(x, probes, smoothing=0.0):
    """(index slice, weights) per probe.

    Linear interpolation, or with smoothing > 0 a normalised Gaussian of that
    width over the nodes within five widths.
    """
    stencil = []
    for p in probes:
        if smoothing > 0:
            lo = int(np.searchsorted(x, p - 5 * smoothing))
            hi = int(np.searchsorted(x, p + 5 * smoothing, side="right"))
            g = np.exp(-0.5 * ((x[lo:hi] - p) / smoothing) ** 2)
            stencil.append((slice(lo, hi), g / g.sum()))
            continue
        i = int(np.searchsorted(x, p) - 1)
        i = min(max(i, 0), x.size - 2)
        w = (p - x[i]) / (x[i + 1] - x[i])
        stencil.append((slice(i, i + 2), np.array([1 - w, w])))
    return stencil


def drift_bound(n_steps):
    return max(NORM_DRIFT_TOL, DRIFT_PER_STEP * n_steps)


def evolve(spec, grid, smoothing=0.0, isolation_tol=ISOLATION_TOL):
    """March the shutter state to grid.t_final and sample the probes every output_dt.

    smoothing > 0 replaces point values by Gaussian averages of that width.
    """
    grid.validate(spec, isolation_tol)
    kin = derive_kinematics(spec)
    x_all = grid.nodes()
    x = x_all[1:-1]
    dx = grid.dx
    n_steps = round(grid.t_final / grid.dt)

    coef = spec.h2m / (dx * dx)
    diag = 2.0 * coef + _potential(spec, x, dx)
    off = np.full(x.size - 1, -coef)
    H = sparse.diags([off, diag, off], [-1, 0, 1], format="csc")
    I = sparse.identity(x.size, format="csc")
    step = 0.5j * grid.dt / UNITS.hbar
    A = (I + step * H).tocsc()
    B = (I - step * H).tocsr()
    try:
        lu = splu(A)
    except RuntimeError as e:
        raise NumericalError(f"Crank-Nicolson factorisation failed: {e}") from e

    state = np.where(x < 0, 2j * np.sin(kin.k * x), 0.0).astype(complex)
    norm0 = float(np.sum(np.abs(state) ** 2) * dx)
    stencil = _probe_weights(x, grid.probes, smoothing)

    def sample(values):
        return [w @ values[s] for s, w in stencil]

    times, samples = [0.0], [sample(state)]
    stride = grid.stride
    for n in range(1, n_steps + 1):
        state = lu.solve(B @ state)
        if n % stride == 0:
            times.append(n * grid.dt)
            samples.append(sample(state))

    if not np.all(np.isfinite(state)):
        raise NumericalError("Crank-Nicolson state became non-finite")
    drift = abs(float(np.sum(np.abs(state) ** 2) * dx) - norm0) / norm0
    bound = drift_bound(n_steps)
    if drift > bound:
        raise NumericalError(f"norm drift {drift:.3e} exceeds {bound:.3g} after {n_steps} steps")
    log.info("evolve: %d nodes, %d steps, norm drift %.2e", x.size, n_steps, drift)
    return OracleRun(
        times=np.array(times),
        probes=grid.probes,
        values=np.array(samples, dtype=complex),
        norm_drift=drift,
        steps=n_steps,
    )


@dataclass(frozen=True)
class ConvergenceReport:
    p_dx: float
    p_dt: float
    dx_errors: tuple
    dt_errors: tuple
    monotone: bool


def _settled(run):
    return run.values[run.times >= SETTLE_T]


def _level_differences(runs):
    return tuple(
        float(np.abs(_settled(fine) - _settled(coarse)).max())
        for coarse, fine in zip(runs, runs[1:])
    )


def _order(differences):
    e1, e2 = differences[-2], differences[-1]
    if e1 <= 0 or e2 <= 0:
        raise NumericalError("refinement differences vanished; observed order undefined")
    return math.log2(e1 / e2)


def convergence_study(spec, base_grid, refinements=3, smoothing=ORDER_SMOOTHING):
    """Observed orders in dx and dt from successive halvings of the base grid.

    Every level shares one domain, wide enough for the finest dx to be isolated
    from its walls. Probe values are Gaussian averages of width `smoothing`:
    the grid-scale ripple of the initial discontinuity does not shrink with dt
    and must not enter the differences.
    """
    if refinements < 3:
        raise ValidationError("convergence study needs >= 3 refinement levels", field="refinements")
    finest = base_grid.dx / 2 ** (refinements - 1)
    grid = base_grid.widened(spec, isolation_reach(spec, finest, base_grid.t_final, tol=0.0))
    log.info("convergence study on [%.4g, %.4g] nm", grid.x_left, grid.x_right)

    def run(level):
        return evolve(spec, level, smoothing=smoothing, isolation_tol=0.0)

    dx_runs = [run(grid.refined(dx_factor=2**i)) for i in range(refinements)]
    dt_runs = [dx_runs[0]] + [run(grid.refined(dt_factor=2**i)) for i in range(1, refinements)]
    dx_errors = _level_differences(dx_runs)
    dt_errors = _level_differences(dt_runs)
    monotone = all(b < a for a, b in zip(dx_errors, dx_errors[1:])) and all(
        b < a for a, b in zip(dt_errors, dt_errors[1:])
    )
    if not monotone:
        log.warning("non-monotone refinement errors: dx %s dt %s", dx_errors, dt_errors)
    report = ConvergenceReport(
        p_dx=_order(dx_errors),
        p_dt=_order(dt_errors),
        dx_errors=dx_errors,
        dt_errors=dt_errors,
        monotone=monotone,
    )
    log.info("convergence study: p_dx=%.3f p_dt=%.3f", report.p_dx, report.p_dt)
    return report


@dataclass(frozen=True)
class OracleComparison:
    max_rel_deviation: float
    per_probe: tuple
    pole_count: int


COMPARISON_HEADER = ["probe_x_nm", "max_rel_deviation"]


def compare_with_solver(spec, grid, tail_tol=1e-4, run=None):
    """Relative L-infinity deviation of |psi|^2 between the expansion and the oracle."""
    run = run or evolve(spec, grid)
    model = build_model(spec, tail_tol)
    mask = run.times >= SETTLE_T
    t = run.times[mask]
    per_probe = []
    for j, x in enumerate(run.probes):
        reference = np.abs(run.values[mask, j]) ** 2
        analytic = np.abs(psi(model, x, t)) ** 2
        per_probe.append(float(np.abs(analytic - reference).max() / np.abs(analytic).max()))
    result = OracleComparison(max(per_probe), tuple(per_probe), model.pole_count)
    log.info("oracle comparison: max relative deviation %.3e", result.max_rel_deviation)
    return result


def comparison_rows(comparison, probes):
    return [[x, d] for x, d in zip(probes, comparison.per_probe)]
