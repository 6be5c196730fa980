import numpy as np
import pytest

from tunneltime.exceptions import ValidationError
from tunneltime.quantities import derive_kinematics
from tunneltime.resonances import find_pole
from tunneltime.scaling import (
    OPACITY_HEADER,
    DimensionlessPoint,
    Reference,
    find_window,
    instantiate,
    opacity_rows,
    opacity_scan,
    rescaled_relative_frequency,
)
from tunneltime.transients import find_tmax


def test_instantiate_round_trips_alpha_and_u():
    for alpha, u in [(2.9054, 300.0), (2.1, 5.0), (3.2, 10.0)]:
        for reference in (Reference(), Reference(V=1.0, m_rel=0.1)):
            kin = derive_kinematics(instantiate(alpha, u, reference))
            assert kin.alpha == pytest.approx(alpha, rel=1e-12)
            assert kin.u == pytest.approx(u, rel=1e-12)


def test_instantiate_reference_barrier(tunneling_spec):
    kin = derive_kinematics(tunneling_spec)
    spec = instantiate(kin.alpha, kin.u)
    assert spec.E == pytest.approx(0.001, rel=1e-12)
    assert spec.L == pytest.approx(4.0, rel=1e-12)
    assert instantiate(2.9054, 300.0).E == pytest.approx(0.001)


@pytest.mark.parametrize("alpha, u", [(0.0, 300.0), (2.0, 0.0), (-1.0, 5.0)])
def test_instantiate_rejects_non_positive(alpha, u):
    with pytest.raises(ValidationError):
        instantiate(alpha, u)


def test_dimensionless_point_validation():
    with pytest.raises(ValidationError):
        DimensionlessPoint(alpha=2.0, u=10.0, X=1.0, T=0.0)


def test_equal_alpha_and_u_give_equal_relative_frequencies():
    rng = np.random.default_rng(7)
    alpha, u = 2.9054, 300.0
    first, second = Reference(V=0.3), Reference(V=1.0)
    for X, T in zip(rng.uniform(0.05, 3.0, 50), rng.uniform(0.2, 10.0, 50)):
        a = rescaled_relative_frequency(alpha, u, X, T, first)
        b = rescaled_relative_frequency(alpha, u, X, T, second)
        assert abs(a - b) <= 1e-8


def test_reference_peak_in_dimensionless_form(tunneling_model):
    kin = tunneling_model.kin
    peak = find_tmax(tunneling_model, tunneling_model.spec.L)
    value = rescaled_relative_frequency(kin.alpha, kin.u, 1.0, peak.t_max * kin.omega_V)
    assert value < 1.0


def test_opacity_scan_structure():
    curves = opacity_scan([300.0], [1.5, 2.5, 3.0])
    curve = curves[0]
    assert curve.u == 300.0
    assert list(curve.alpha_grid) == [1.5, 2.5, 3.0]
    assert not curve.points[0].found
    assert curve.points[1].found and curve.points[1].omega_rel < 1.0
    rows = opacity_rows(curve)
    assert len(rows) == 3 and len(rows[0]) == len(OPACITY_HEADER)


@pytest.mark.parametrize("u_list, grid", [([300.0], [3.0, 2.0]), ([], [2.0]), ([0.0], [2.0])])
def test_opacity_scan_validation(u_list, grid):
    with pytest.raises(ValidationError):
        opacity_scan(u_list, grid)


def test_find_window_validation():
    with pytest.raises(ValidationError):
        find_window(u_large=10.0)
    with pytest.raises(ValidationError):
        find_window(u_large=300.0, bisect_tol=0.0)


@pytest.mark.slow
def test_all_opacities_in_the_window_are_under_the_barrier():
    grid = np.linspace(2.4, 3.2, 9)
    for curve in opacity_scan([5.0, 10.0, 300.0], grid):
        values = curve.omega_rel_at_tmax
        assert all(v is not None for v in values), curve.u
        assert all(v < 1.0 for v in values)


def first_pole_crossing(u, lo=2.0, hi=2.4):
    """alpha where Re E_1 of the first pole reaches V."""
    def above(alpha):
        spec = instantiate(alpha, u)
        return find_pole(spec, 1).E.real >= spec.V
    while hi - lo > 1e-4:
        mid = 0.5 * (lo + hi)
        lo, hi = (lo, mid) if above(mid) else (mid, hi)
    return 0.5 * (lo + hi)


def test_first_pole_crosses_the_barrier_top_inside_the_scan():
    assert first_pole_crossing(300.0) == pytest.approx(2.1515, abs=2e-3)


@pytest.mark.slow
def test_opacity_window():
    window = find_window(300.0)
    # onset of the peak follows the first pole crossing the barrier top
    assert window.alpha_min == pytest.approx(first_pole_crossing(300.0), abs=0.02)
    assert window.alpha_min == pytest.approx(2.156, abs=0.02)
    assert window.alpha_max == pytest.approx(3.3, abs=0.1)
    assert window.alpha_min < window.alpha_max


@pytest.mark.slow
def test_window_upper_edge_saturates_for_large_u():
    assert abs(find_window(1000.0).alpha_max - find_window(300.0).alpha_max) < 0.05
