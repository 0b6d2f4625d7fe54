"""Trap configuration and derived light-shift quantities.

Sign conventions, fixed once here and relied on everywhere else:

* The trap laser detuning Delta is signed and negative for a red-detuned
  trap. eta = omega_hfs / Delta inherits that sign, so the full-depth
  differential light shift delta0 = eta * U0 / hbar is negative.
* The gamma-distribution time constant K = 2*hbar / (|eta| * k_B * T) is
  stored as a positive magnitude; the sign information lives in delta0.
* A hotter atom samples less intensity, so its mean shift moves from
  delta0 toward zero: delta_ls(E) = delta0 * (1 - E / (2*U0)). This is
  the harmonic-approximation average and crosses zero at E = 2*U0.

Everything in SI units.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_T2_STAR_PER_K = 1.67  # reversible dephasing time in units of K


@dataclass(frozen=True)
class PhysConstants:
    """Fundamental constants plus the atom-specific inputs (cesium defaults)."""

    hbar: float = 1.054571817e-34        # J s
    k_B: float = 1.380649e-23            # J/K
    atom_mass: float = 2.20694695e-25    # kg, Cs-133
    omega_hfs: float = 2 * math.pi * 9.192631770e9  # rad/s, ground-state splitting

    def __post_init__(self):
        for name in ("hbar", "k_B", "atom_mass", "omega_hfs"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v > 0):
                raise ConfigError(f"PhysConstants.{name} must be finite and positive, got {v!r}")


@dataclass(frozen=True)
class TrapConfig:
    """Standing-wave dipole trap description.

    depth_U0 is the full optical potential depth in joules (0 is accepted
    as the trap-off boundary case). effective_detuning_Delta is signed and
    must be negative (red detuned). waist feeds only the radial frequency.
    """

    depth_U0: float                      # J
    temperature_T: float                 # K
    wavelength: float = 1.064e-6         # m
    effective_detuning_Delta: float = -2 * math.pi * 64e12  # rad/s, signed
    waist: float = 20e-6                 # m
    constants: PhysConstants = field(default_factory=PhysConstants)

    def __post_init__(self):
        def _finite(name):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise ConfigError(f"TrapConfig.{name} must be finite, got {v!r}")
            return v

        if _finite("depth_U0") < 0:
            raise ConfigError(f"TrapConfig.depth_U0 must be >= 0, got {self.depth_U0!r}")
        if _finite("temperature_T") <= 0:
            raise ConfigError(f"TrapConfig.temperature_T must be > 0, got {self.temperature_T!r}")
        if _finite("wavelength") <= 0:
            raise ConfigError(f"TrapConfig.wavelength must be > 0, got {self.wavelength!r}")
        if _finite("waist") <= 0:
            raise ConfigError(f"TrapConfig.waist must be > 0, got {self.waist!r}")
        if _finite("effective_detuning_Delta") >= 0:
            raise ConfigError(
                "TrapConfig.effective_detuning_Delta must be negative for a "
                f"red-detuned trap, got {self.effective_detuning_Delta!r}"
            )


@dataclass(frozen=True)
class DerivedTrapParams:
    """Quantities derived from a TrapConfig by derive_trap_params."""

    eta: float          # dimensionless, signed (negative here)
    delta0: float       # rad/s, full-depth differential light shift, signed
    K: float            # s, positive magnitude; inf when depth is zero
    T2_star: float      # s, = 1.67 * K
    omega_axial: float  # rad/s
    omega_radial: float  # rad/s
    depth_U0: float     # J, carried for downstream formulas
    hbar: float         # J s, carried for downstream formulas


def derive_trap_params(trap: TrapConfig) -> DerivedTrapParams:
    """Compute eta, delta0, K, T2*, and trap frequencies from a TrapConfig.

    Pure function of its input. depth_U0 = 0 is the trap-off sentinel:
    every atom then sees zero differential shift, so K and T2* are
    reported as inf and the trap frequencies as 0.
    """
    c = trap.constants
    eta = c.omega_hfs / trap.effective_detuning_Delta
    U0 = trap.depth_U0
    if U0 == 0.0:
        return DerivedTrapParams(
            eta=eta, delta0=0.0, K=math.inf, T2_star=math.inf,
            omega_axial=0.0, omega_radial=0.0, depth_U0=0.0, hbar=c.hbar,
        )
    delta0 = eta * U0 / c.hbar
    K = 2.0 * c.hbar / (abs(eta) * c.k_B * trap.temperature_T)
    k = 2 * math.pi / trap.wavelength
    omega_axial = k * math.sqrt(2 * U0 / c.atom_mass)
    omega_radial = 2.0 / trap.waist * math.sqrt(U0 / c.atom_mass)
    return DerivedTrapParams(
        eta=eta, delta0=delta0, K=K, T2_star=_T2_STAR_PER_K * K,
        omega_axial=omega_axial, omega_radial=omega_radial,
        depth_U0=U0, hbar=c.hbar,
    )


def mean_lightshift(energy, params: DerivedTrapParams):
    """Average differential light shift of an atom with total energy E.

    delta_ls(E) = delta0 * (1 - E / (2*U0)); the magnitude shrinks with
    energy and crosses zero at E = 2*U0. Accepts scalars or arrays.
    """
    e = np.asarray(energy, dtype=float)
    if np.any(e < 0):
        raise ConfigError("mean_lightshift: energy must be >= 0")
    if params.depth_U0 == 0.0:
        out = np.zeros_like(e)
        return float(out) if out.ndim == 0 else out
    out = params.delta0 * (1.0 - e / (2.0 * params.depth_U0))
    return float(out) if out.ndim == 0 else out
