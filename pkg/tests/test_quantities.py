import math

import pytest

from tunneltime.exceptions import ValidationError
from tunneltime.quantities import (
    UNITS,
    BarrierSpec,
    derive_kinematics,
    group_velocity,
    tau,
)


def test_kinematics_of_reference_barrier(tunneling_spec):
    kin = derive_kinematics(tunneling_spec)
    h2m = 0.0380998 / 0.067
    assert kin.k == pytest.approx(math.sqrt(0.001 / h2m), rel=1e-14)
    assert kin.U == pytest.approx(0.3 / h2m, rel=1e-14)
    assert kin.omega_V == pytest.approx(0.3 / UNITS.hbar, rel=1e-14)
    assert kin.alpha == pytest.approx(math.sqrt(0.3 / h2m) * 4.0, rel=1e-14)
    assert kin.alpha == pytest.approx(2.9054, abs=1e-3)
    assert kin.u == pytest.approx(300.0)


def test_tau(tunneling_spec):
    assert tau(tunneling_spec, 2.0) == pytest.approx(2.0 * tunneling_spec.h2m / UNITS.hbar)


def test_group_velocity_is_hbar_k_over_m(tunneling_spec):
    k = derive_kinematics(tunneling_spec).k
    m_over_hbar = UNITS.hbar / (2 * tunneling_spec.h2m)
    assert group_velocity(tunneling_spec, k) == pytest.approx(k / m_over_hbar)


@pytest.mark.parametrize("field, value", [
    ("V", -0.1),
    ("L", -1.0),
    ("m_rel", 0.0),
    ("E", 0.0),
    ("E", -0.001),
    ("V", float("nan")),
    ("L", float("inf")),
])
def test_invalid_spec_names_the_field(field, value):
    values = {"V": 0.3, "L": 4.0, "m_rel": 0.067, "E": 0.001}
    values[field] = value
    with pytest.raises(ValidationError) as info:
        BarrierSpec(**values)
    assert info.value.field == field
    assert info.value.exit_code == 2


def test_free_shutter_specs():
    assert BarrierSpec(V=0.0, L=4.0, m_rel=0.067, E=0.001).is_free
    assert BarrierSpec(V=0.3, L=0.0, m_rel=0.067, E=0.001).is_free
    assert not BarrierSpec(V=0.3, L=4.0, m_rel=0.067, E=0.001).is_free


def test_replace_revalidates(tunneling_spec):
    wider = tunneling_spec.replace(L=8.0)
    assert wider.L == 8.0 and wider.V == tunneling_spec.V
    with pytest.raises(ValidationError):
        tunneling_spec.replace(E=-1.0)


def test_derive_kinematics_needs_a_spec():
    with pytest.raises(ValidationError):
        derive_kinematics({"V": 0.3})
