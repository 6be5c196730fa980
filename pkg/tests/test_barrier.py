import numpy as np
import pytest
from numpy.testing import assert_allclose

from tunneltime.barrier import (
    interior_wavenumber,
    stationary_state,
    transmission_denominator,
    transmission_probability,
)
from tunneltime.exceptions import ValidationError
from tunneltime.quantities import BarrierSpec, derive_kinematics


def spec_at(E, V=0.3, L=4.0):
    return BarrierSpec(V=V, L=L, m_rel=0.067, E=E)


@pytest.mark.parametrize("E", [1e-4, 0.001, 0.1, 0.2999, 0.3, 0.3001, 0.45, 2.0])
def test_unitarity(E):
    state = stationary_state(spec_at(E))
    assert abs(state.r_amp) ** 2 + abs(state.t_amp) ** 2 == pytest.approx(1.0, abs=1e-12)


def test_tunneling_branch_is_imaginary():
    kin = derive_kinematics(spec_at(0.001))
    q = interior_wavenumber(kin.k, kin.U)
    assert q.real == 0.0
    assert q.imag > 0


@pytest.mark.parametrize("E", [0.001, 0.3, 0.45])
def test_matching_at_both_edges(E):
    state = stationary_state(spec_at(E))
    k, L = state.k, state.L
    # left: e^{ikx} + r e^{-ikx}
    assert_allclose(state.phi(0.0), 1 + state.r_amp, rtol=1e-12)
    assert_allclose(state.phi_prime(0.0), 1j * k * (1 - state.r_amp), rtol=1e-10)
    # right: t e^{ikx}
    assert_allclose(state.phi(L), state.t_amp * np.exp(1j * k * L), rtol=1e-12)
    assert_allclose(state.phi_prime(L), 1j * k * state.t_amp * np.exp(1j * k * L), rtol=1e-10)


def test_interior_solves_stationary_equation():
    spec = spec_at(0.001)
    state = stationary_state(spec)
    kin = derive_kinematics(spec)
    x = np.linspace(0.5, 3.5, 7)
    h = 1e-4
    d2 = (state.phi(x + h) - 2 * state.phi(x) + state.phi(x - h)) / h**2
    assert_allclose(-d2, (kin.k**2 - kin.U) * state.phi(x), rtol=1e-5)


def test_continuous_through_q_zero():
    below, at, above = (stationary_state(spec_at(E)) for E in (0.3 - 1e-9, 0.3, 0.3 + 1e-9))
    assert at.a_plus is None
    assert abs(below.t_amp - at.t_amp) < 1e-6
    assert abs(above.t_amp - at.t_amp) < 1e-6


def test_opposite_incidence_is_the_mirror_image():
    spec = spec_at(0.001)
    plus, minus = stationary_state(spec, 1), stationary_state(spec, -1)
    x = np.linspace(0.0, spec.L, 9)
    assert_allclose(minus.phi(x), np.conj(plus.phi(x)), rtol=1e-12)


def test_reference_transmission_is_small_and_stable(tunneling_spec):
    value = transmission_probability(tunneling_spec)
    assert 0 < value < 1e-2
    assert transmission_probability(tunneling_spec) == value


def test_transmission_grows_with_energy():
    values = [transmission_probability(spec_at(E)) for E in (0.001, 0.01, 0.1, 0.25)]
    assert values == sorted(values)


def test_free_barrier_is_transparent():
    state = stationary_state(BarrierSpec(V=0.0, L=4.0, m_rel=0.067, E=0.01))
    assert abs(state.t_amp * np.exp(1j * state.k * state.L)) == pytest.approx(1.0)
    assert abs(state.r_amp) < 1e-12


def test_denominator_vanishes_only_at_poles(tunneling_spec):
    kin = derive_kinematics(tunneling_spec)
    D, scale = transmission_denominator(kin.k, kin.U, tunneling_spec.L)
    assert abs(D) / scale > 1e-3


def test_outside_domain_is_rejected(tunneling_spec):
    state = stationary_state(tunneling_spec)
    with pytest.raises(ValidationError):
        state.phi(tunneling_spec.L + 0.1)
    with pytest.raises(ValidationError):
        stationary_state(tunneling_spec, 0)


@pytest.mark.parametrize("E, L", [(0.05, 10.0), (0.001, 8.5), (0.2, 20.0)])
def test_deep_tunneling_asymptote(E, L):
    spec = spec_at(E, L=L)
    kin = derive_kinematics(spec)
    kappa = np.sqrt(kin.U - kin.k**2)
    assert kappa * L >= 6
    ratio = E / spec.V
    expected = 16 * ratio * (1 - ratio) * np.exp(-2 * kappa * L)
    assert transmission_probability(spec) == pytest.approx(expected, rel=1e-2)


def test_unitarity_over_random_barriers():
    rng = np.random.default_rng(20261018)
    for _ in range(200):
        V, L, m_rel, E = rng.uniform([0.01, 0.1, 0.02, 1e-4], [1.0, 20.0, 1.0, 2.0])
        state = stationary_state(BarrierSpec(V=V, L=L, m_rel=m_rel, E=E))
        assert abs(state.r_amp) ** 2 + abs(state.t_amp) ** 2 == pytest.approx(1.0, abs=1e-10)
