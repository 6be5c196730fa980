import math
from dataclasses import replace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from tunneltime.exceptions import ValidationError
from tunneltime.oracle import (
    ISOLATION_TOL,
    NORM_DRIFT_TOL,
    PROBE_HEADER,
    GridSpec,
    compare_with_solver,
    convergence_study,
    default_grid,
    drift_bound,
    evolve,
    grid_speed,
    isolation_reach,
    phase_step_dt,
    probe_rows,
    reflection_speed,
    tail_reach,
)
from tunneltime.quantities import BarrierSpec
from tunneltime.solver import free_shutter

FREE = BarrierSpec(V=0.0, L=4.0, m_rel=0.067, E=0.1)


@pytest.fixture(scope="module")
def free_run():
    grid = default_grid(FREE, t_final=2.0, dx=0.02, probes=(1.0, 2.0, 4.0))
    return grid, evolve(FREE, grid)


def test_norm_is_conserved(free_run):
    _, run = free_run
    assert run.norm_drift <= drift_bound(run.steps)


def test_drift_bound_grows_with_the_step_count():
    assert drift_bound(1000) == NORM_DRIFT_TOL
    # drift seen over the 6.9e5 steps of the old dt = L/400 acceptance grid
    assert drift_bound(690_000) > 1.97e-10


def test_free_run_matches_the_shutter_solution(free_run):
    grid, run = free_run
    keep = run.times >= 0.5
    for j, x in enumerate(grid.probes):
        exact = np.abs(free_shutter(FREE, x, run.times[keep])) ** 2
        numeric = run.density()[keep, j]
        assert np.abs(numeric - exact).max() / exact.max() <= 5e-3


def test_probe_series_layout(free_run):
    grid, run = free_run
    assert run.times[0] == 0.0
    assert run.times[-1] == pytest.approx(grid.t_final)
    assert_allclose(np.diff(run.times), grid.output_dt)
    assert run.values.shape == (run.times.size, len(grid.probes))
    assert np.all(run.values[0] == 0)
    rows = probe_rows(run)
    assert len(rows) == run.times.size * len(grid.probes)
    assert len(rows[0]) == len(PROBE_HEADER)


def test_default_grid_respects_the_reflection_bound(tunneling_spec):
    grid = default_grid(tunneling_spec)
    grid.validate(tunneling_spec)
    assert grid.dx == pytest.approx(tunneling_spec.L / 400)
    assert grid.probes == (2.0, 4.0, 8.0)
    reach = isolation_reach(tunneling_spec, grid.dx, grid.t_final)
    assert -grid.x_left > reach and grid.x_right - 8.0 > reach
    assert reach > reflection_speed(tunneling_spec) * grid.t_final
    # long runs are limited by the tail, short ones by the grid bandwidth
    assert reach == pytest.approx(tail_reach(tunneling_spec, grid.t_final, ISOLATION_TOL))
    assert isolation_reach(FREE, 0.04, 1.0) == pytest.approx(grid_speed(FREE, 0.04) * 1.0)


def test_default_time_step(tunneling_spec):
    grid = default_grid(tunneling_spec, probes=(tunneling_spec.L,))
    assert grid.dt <= phase_step_dt(tunneling_spec, grid.probes)
    assert grid.output_dt / grid.dt == pytest.approx(round(grid.output_dt / grid.dt))
    assert default_grid(tunneling_spec).dt < grid.dt


def test_tail_reach_matches_the_shutter_tail():
    t = 2.0
    gap = tail_reach(FREE, t, 1e-4)
    # the shortest path via a wall is twice the gap
    far = free_shutter(FREE, 2 * gap, np.array([t]))[0]
    assert abs(far) == pytest.approx(1e-4, rel=1e-2)


@pytest.mark.parametrize("spec", [FREE, BarrierSpec(V=0.3, L=4.0, m_rel=0.067, E=0.001)])
def test_doubling_the_domain_changes_nothing(spec):
    grid = default_grid(spec, t_final=2.0, dx=0.04, probes=(1.0, 2.0), isolation_tol=0.0)
    wide = replace(grid, x_left=2 * grid.x_left, x_right=2 * grid.x_right)
    near = evolve(spec, grid, isolation_tol=0.0)
    far = evolve(spec, wide, isolation_tol=0.0)
    scale = np.abs(far.values).max()
    assert np.abs(near.values - far.values).max() <= 1e-6 * scale


def test_small_domain_is_rejected(tunneling_spec):
    grid = GridSpec(x_left=-20.0, x_right=30.0, dx=0.01, dt=1e-4, t_final=20.0, probes=(4.0,))
    with pytest.raises(ValidationError):
        evolve(tunneling_spec, grid)


@pytest.mark.parametrize("changes", [
    {"dx": 0.0},
    {"probes": ()},
    {"probes": (1e4,)},
    {"output_dt": 0.05 + 3.3e-5},
    {"x_left": 1.0},
    {"x_right": 12.0},
])
def test_invalid_grids(changes):
    grid = default_grid(FREE, t_final=1.0, dx=0.02)
    values = {**grid.__dict__, **changes}
    with pytest.raises(ValidationError):
        GridSpec(**values).validate(FREE)


def test_widened_grid_keeps_the_left_wall_on_a_node(tunneling_spec):
    grid = default_grid(tunneling_spec, t_final=1.0, dx=0.04, probes=(4.0,))
    wide = grid.widened(tunneling_spec, 3 * (grid.x_right - 4.0))
    half_wave = math.pi / math.sqrt(tunneling_spec.E / tunneling_spec.h2m)
    assert wide.x_left < grid.x_left and wide.x_right > grid.x_right
    assert wide.x_left / half_wave == pytest.approx(round(wide.x_left / half_wave))
    assert grid.widened(tunneling_spec, 1.0) == grid


def test_convergence_study_needs_three_levels():
    with pytest.raises(ValidationError):
        convergence_study(FREE, default_grid(FREE, t_final=1.0, dx=0.04), refinements=2)


def test_convergence_orders_on_the_free_shutter():
    base = default_grid(FREE, t_final=1.0, dx=0.04, probes=(1.0, 2.0))
    report = convergence_study(FREE, base, refinements=3)
    assert len(report.dx_errors) == 2 and len(report.dt_errors) == 2
    assert report.monotone
    assert 1.8 <= report.p_dx <= 2.2
    assert 1.8 <= report.p_dt <= 2.2


@pytest.mark.slow
def test_convergence_orders_are_second_order(tunneling_spec):
    base = default_grid(tunneling_spec, t_final=3.0, dx=0.04, probes=(2.0, 4.0))
    report = convergence_study(tunneling_spec, base, refinements=3)
    assert 1.8 <= report.p_dx <= 2.2
    assert 1.8 <= report.p_dt <= 2.2


@pytest.mark.slow
def test_expansion_matches_finite_differences(tunneling_spec):
    result = compare_with_solver(tunneling_spec, default_grid(tunneling_spec))
    assert result.max_rel_deviation <= 1e-3
