"""Units, physical constants and the barrier problem definition.

Lengths are nm, times fs, energies eV, wavenumbers 1/nm and frequencies 1/fs
throughout the package.
"""
import math
from dataclasses import dataclass, asdict

from tunneltime.exceptions import ValidationError


@dataclass(frozen=True)
class UnitSystem:
    hbar: float = 0.6582119569  # eV fs
    hbar2_over_2me: float = 0.0380998  # eV nm^2


UNITS = UnitSystem()


@dataclass(frozen=True)
class BarrierSpec:
    """Rectangular barrier of height V on [0, L] hit by a cutoff wave of energy E.

    V = 0 or L = 0 is accepted and describes the free shutter.
    """

    V: float
    L: float
    m_rel: float
    E: float

    def __post_init__(self):
        for name in ("V", "L", "m_rel", "E"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise ValidationError(f"{name} must be finite, got {value}", field=name)
        if self.V < 0:
            raise ValidationError(f"V must be >= 0 eV, got {self.V}", field="V")
        if self.L < 0:
            raise ValidationError(f"L must be >= 0 nm, got {self.L}", field="L")
        if self.m_rel <= 0:
            raise ValidationError(f"m_rel must be > 0, got {self.m_rel}", field="m_rel")
        if self.E <= 0:
            raise ValidationError(f"E must be > 0 eV, got {self.E}", field="E")

    @property
    def h2m(self):
        """hbar^2 / 2m for this effective mass, eV nm^2."""
        return UNITS.hbar2_over_2me / self.m_rel

    @property
    def is_free(self):
        return self.V == 0 or self.L == 0

    def replace(self, **changes):
        values = asdict(self)
        values.update(changes)
        return BarrierSpec(**values)

    def as_dict(self):
        return {"V_eV": self.V, "L_nm": self.L, "m_rel": self.m_rel, "E_eV": self.E}


@dataclass(frozen=True)
class Kinematics:
    k: float
    U: float
    omega_V: float
    alpha: float
    u: float


def derive_kinematics(spec):
    if not isinstance(spec, BarrierSpec):
        raise ValidationError("expected a BarrierSpec", field="spec")
    h2m = spec.h2m
    U = spec.V / h2m
    return Kinematics(
        k=math.sqrt(spec.E / h2m),
        U=U,
        omega_V=spec.V / UNITS.hbar,
        alpha=math.sqrt(U) * spec.L,
        u=spec.V / spec.E,
    )


def tau(spec, t):
    """Reduced time hbar t / 2m in nm^2; the Moshinsky kernel depends on t only through it."""
    return spec.h2m * t / UNITS.hbar


def group_velocity(spec, k):
    """hbar k / m in nm/fs."""
    return 2.0 * spec.h2m * k / UNITS.hbar
