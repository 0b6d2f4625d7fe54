"""Classical axial dynamics of a trapped atom in an accelerated standing wave.

The trap is translated with a piecewise-constant (bang-bang) acceleration
profile. In the comoving frame the equation of motion is

    m * z'' = -dU/dz - m * a(t),      U(z) = U0 * sin^2(k z),

integrated with a velocity-Verlet (leapfrog) scheme, i.e. symplectic and
second order. The full sinusoidal potential matters here: at the energies
of interest (a third of the trap depth) the motion is strongly anharmonic.
Acceleration jumps are the physics under test, so every profile segment is
integrated with a step that divides its duration exactly.
"""

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError
from .trap import TrapConfig
from .dephasing import EnsembleSpec, sample_energy

DEFAULT_STEPS_PER_PERIOD = 500     # default dt = T_axial / 500
MIN_STEPS_PER_PERIOD = 200         # precondition on caller-supplied dt
DEFAULT_ROUND_TRIP_HOLD = 3e-3     # s, the state-mixing window between legs


# ---------------------------------------------------------------------------
# acceleration profiles

@dataclass(frozen=True)
class AccelProfile:
    """Piecewise-constant acceleration segments (duration_s, accel_mps2)."""

    segments: tuple

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ConfigError("AccelProfile needs at least one segment")
        for dur, acc in self.segments:
            if dur < 0 or not math.isfinite(dur) or not math.isfinite(acc):
                raise ConfigError(f"bad profile segment ({dur!r}, {acc!r})")

    @property
    def duration(self):
        return sum(d for d, _ in self.segments)

    def displacement(self):
        """Exact kinematic displacement of the trap over the profile."""
        z = v = 0.0
        for dur, acc in self.segments:
            z += v * dur + 0.5 * acc * dur * dur
            v += acc * dur
        return z

    def final_velocity(self):
        return sum(acc * dur for dur, acc in self.segments)

    def jump_times(self):
        """Times of acceleration discontinuities, including the endpoints
        when the profile starts or ends at nonzero acceleration."""
        accels = [0.0] + [a for _, a in self.segments] + [0.0]
        times = [0.0]
        t = 0.0
        for dur, _ in self.segments:
            t += dur
            times.append(t)
        times.append(t)
        return [times[i] for i in range(1, len(accels))
                if accels[i] != accels[i - 1]]

    def jump_count(self):
        return len(self.jump_times())

    def time_reversed(self):
        return AccelProfile(tuple((d, a) for d, a in reversed(self.segments)))

    def mirrored(self):
        return AccelProfile(tuple((d, -a) for d, a in self.segments))


def make_accel_profile(distance, duration, kind="bang-bang-one-way",
                       hold=DEFAULT_ROUND_TRIP_HOLD) -> AccelProfile:
    """Bang-bang transport profile: +a then -a with a = 4 d / t_move^2.

    kind='round-trip' appends a zero-acceleration hold and the mirrored
    return leg; the hold keeps the six acceleration jumps distinct and
    defaults to the 3 ms state-mixing window of the echo sequence.
    """
    if distance < 0:
        raise ConfigError("make_accel_profile: distance must be >= 0")
    if duration <= 0:
        raise ConfigError("make_accel_profile: duration must be > 0")
    a = 4.0 * distance / duration ** 2
    leg_out = ((duration / 2, a), (duration / 2, -a))
    if kind == "bang-bang-one-way":
        return AccelProfile(leg_out)
    if kind == "round-trip":
        if hold <= 0:
            raise ConfigError("round-trip profile needs hold > 0 to keep the "
                              "six acceleration jumps distinct")
        leg_back = ((duration / 2, -a), (duration / 2, a))
        return AccelProfile(leg_out + ((hold, 0.0),) + leg_back)
    raise ConfigError(f"unknown profile kind {kind!r}")


# ---------------------------------------------------------------------------
# trap geometry and orbits

@dataclass(frozen=True)
class AtomPhaseState:
    position: float  # m, comoving frame
    velocity: float  # m/s
    energy: float    # J, zero at the well bottom

    def __post_init__(self):
        if self.energy < 0:
            raise ConfigError("AtomPhaseState.energy must be >= 0")


def potential_energy(z, trap: TrapConfig):
    k = 2 * math.pi / trap.wavelength
    return trap.depth_U0 * np.sin(k * np.asarray(z)) ** 2


def total_energy(z, v, trap: TrapConfig):
    m = trap.constants.atom_mass
    return 0.5 * m * np.asarray(v) ** 2 + potential_energy(z, trap)


def atom_state(z, v, trap: TrapConfig) -> AtomPhaseState:
    return AtomPhaseState(float(z), float(v), float(total_energy(z, v, trap)))


def axial_period(trap: TrapConfig):
    k = 2 * math.pi / trap.wavelength
    omega = k * math.sqrt(2 * trap.depth_U0 / trap.constants.atom_mass)
    return 2 * math.pi / omega


def _elliptic_K(mpar):
    """Complete elliptic integral of the first kind via the AGM."""
    if not 0.0 <= mpar < 1.0:
        raise ConfigError(f"elliptic parameter must be in [0, 1), got {mpar!r}")
    a, b = 1.0, math.sqrt(1.0 - mpar)
    while abs(a - b) > 1e-15 * a:
        a, b = 0.5 * (a + b), math.sqrt(a * b)
    return math.pi / (2 * a)


def orbit_period(energy, trap: TrapConfig):
    """Anharmonic oscillation period at a given energy (pendulum law)."""
    if not 0.0 <= energy < trap.depth_U0:
        raise ConfigError("orbit_period: energy must be in [0, U0) for a bound orbit")
    return axial_period(trap) * (2.0 / math.pi) * _elliptic_K(energy / trap.depth_U0)


def orbit_states(energy, n_phases, trap: TrapConfig):
    """(z, v) pairs sampled uniformly in time along the closed orbit.

    This is the 'uniform oscillation phase' ensemble used for heating
    scans; translating the profile by j * T_orbit / n_phases permutes the
    set, which makes the max-over-phase translation invariant.
    """
    if n_phases < 1:
        raise ConfigError("orbit_states: n_phases must be >= 1")
    if energy == 0.0:
        return np.zeros(n_phases), np.zeros(n_phases)
    m = trap.constants.atom_mass
    torb = orbit_period(energy, trap)
    n_steps = 8192
    dt = torb / n_steps
    k2 = 4 * math.pi / trap.wavelength
    coef = trap.depth_U0 * (2 * math.pi / trap.wavelength) / m
    z, v = 0.0, math.sqrt(2 * energy / m)
    zs = np.empty(n_steps)
    vs = np.empty(n_steps)
    a_h = -coef * math.sin(k2 * z)
    for i in range(n_steps):
        zs[i], vs[i] = z, v
        v += 0.5 * dt * a_h
        z += dt * v
        a_h = -coef * math.sin(k2 * z)
        v += 0.5 * dt * a_h
    idx = (np.arange(n_phases) * n_steps) // n_phases
    return zs[idx].copy(), vs[idx].copy()


# ---------------------------------------------------------------------------
# integration

def _resolve_dt(trap, dt):
    t_ax = axial_period(trap)
    if dt is None:
        return t_ax / DEFAULT_STEPS_PER_PERIOD
    if dt > t_ax / MIN_STEPS_PER_PERIOD:
        raise ConfigError(
            f"dt = {dt!r} too coarse; need dt <= T_axial/{MIN_STEPS_PER_PERIOD} "
            f"= {t_ax / MIN_STEPS_PER_PERIOD!r}")
    return dt


def _leapfrog(z, v, profile: AccelProfile, trap: TrapConfig, dt_target,
              recorder=None):
    """Vectorized leapfrog through the profile. Returns (z, v, escaped);
    escaped latches whenever the comoving energy reaches U0."""
    m = trap.constants.atom_mass
    U0 = trap.depth_U0
    k = 2 * math.pi / trap.wavelength
    k2 = 2 * k
    coef = U0 * k / m
    z = np.array(z, dtype=float, copy=True)
    v = np.array(v, dtype=float, copy=True)
    escaped = np.zeros(z.shape, dtype=bool)
    t = 0.0
    if recorder is not None:
        recorder(t, z, v)
    for dur, acc in profile.segments:
        if dur == 0.0:
            continue
        nstep = max(1, math.ceil(dur / dt_target))
        dt = dur / nstep
        a_h = -coef * np.sin(k2 * z) - acc
        for _ in range(nstep):
            v += 0.5 * dt * a_h
            z += dt * v
            cos2 = np.cos(k2 * z)
            a_h = -coef * np.sin(k2 * z) - acc
            v += 0.5 * dt * a_h
            t += dt
            energy = 0.5 * m * v * v + 0.5 * U0 * (1.0 - cos2)
            escaped |= energy >= U0
            if recorder is not None:
                recorder(t, z, v)
    return z, v, escaped


@dataclass(frozen=True)
class Trajectory:
    t_s: np.ndarray
    z_m: np.ndarray
    v_mps: np.ndarray
    E_over_U0: np.ndarray


def integrate_trajectory(initial: AtomPhaseState, profile: AccelProfile,
                         trap: TrapConfig, dt=None, record_stride=None):
    """Integrate one atom through a profile.

    Returns (final AtomPhaseState, Trajectory, escaped flag). The
    trajectory is sampled every `record_stride` steps (default about 50
    points per axial period). An atom whose energy reaches U0 is flagged
    as escaped but keeps being integrated for survival accounting.
    """
    dt_target = _resolve_dt(trap, dt)
    if record_stride is None:
        record_stride = max(1, int(round(axial_period(trap) / dt_target / 50)))
    rec_t, rec_z, rec_v = [], [], []
    counter = [0]

    def recorder(t, z, v):
        if counter[0] % record_stride == 0:
            rec_t.append(t)
            rec_z.append(float(z[0]))
            rec_v.append(float(v[0]))
        counter[0] += 1

    z, v, escaped = _leapfrog(np.array([initial.position]),
                              np.array([initial.velocity]),
                              profile, trap, dt_target, recorder)
    final = atom_state(z[0], v[0], trap)
    t_arr = np.array(rec_t)
    z_arr = np.array(rec_z)
    v_arr = np.array(rec_v)
    e_arr = total_energy(z_arr, v_arr, trap) / trap.depth_U0
    return final, Trajectory(t_arr, z_arr, v_arr, e_arr), bool(escaped[0])


def write_trajectory_csv(path, traj: Trajectory):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t_s,z_m,v_mps,E_over_U0\n")
        for t, z, v, e in zip(traj.t_s, traj.z_m, traj.v_mps, traj.E_over_U0):
            fh.write(f"{t:.12g},{z:.12g},{v:.12g},{e:.12g}\n")


# ---------------------------------------------------------------------------
# heating statistics

@dataclass(frozen=True)
class HeatingStats:
    max_gain: float        # J
    mean_gain: float       # J
    gains: np.ndarray      # J, per initial phase
    escaped: np.ndarray    # bool, per initial phase
    e0: float              # J
    n_phases: int


def heating_stats(e0, n_phases, profile: AccelProfile, trap: TrapConfig,
                  dt=None) -> HeatingStats:
    """Energy gain of the profile over a uniform scan of initial phases
    at fixed energy e0. Reports the max and mean of E_final - E_initial."""
    if n_phases < 32:
        raise ConfigError("heating_stats: n_phases must be >= 32")
    dt_target = _resolve_dt(trap, dt)
    z0, v0 = orbit_states(e0, n_phases, trap)
    z, v, escaped = _leapfrog(z0, v0, profile, trap, dt_target)
    gains = total_energy(z, v, trap) - e0
    return HeatingStats(max_gain=float(gains.max()), mean_gain=float(gains.mean()),
                        gains=gains, escaped=escaped, e0=e0, n_phases=n_phases)


@dataclass(frozen=True)
class HeatingTable:
    """Energy gains on a (relative energy x phase) grid for fast sampling."""

    e_fracs: np.ndarray    # of U0, ascending
    gains: np.ndarray      # J, shape (n_e, n_phases)
    escaped: np.ndarray    # bool, same shape
    u0: float              # J

    def sample(self, energies, phase_idx):
        """Linear interpolation in energy at a sampled phase column.

        energies outside the grid are clamped to the boundary rows; an
        atom already at or above U0 is reported as escaped outright.
        """
        e = np.asarray(energies, dtype=float)
        idx = np.asarray(phase_idx, dtype=int)
        frac = np.clip(e / self.u0, self.e_fracs[0], self.e_fracs[-1])
        hi = np.searchsorted(self.e_fracs, frac, side="right").clip(1, len(self.e_fracs) - 1)
        lo = hi - 1
        wts = (frac - self.e_fracs[lo]) / (self.e_fracs[hi] - self.e_fracs[lo])
        gains = self.gains[lo, idx] * (1.0 - wts) + self.gains[hi, idx] * wts
        esc = self.escaped[lo, idx] | self.escaped[hi, idx] | (e >= self.u0)
        return gains, esc


def build_heating_table(profile: AccelProfile, trap: TrapConfig, e_fracs=None,
                        n_phases=64, dt=None) -> HeatingTable:
    if e_fracs is None:
        e_fracs = np.concatenate(([0.0], np.linspace(0.05, 0.9, 11)))
    e_fracs = np.asarray(e_fracs, dtype=float)
    dt_target = _resolve_dt(trap, dt)
    n_e = len(e_fracs)
    z0 = np.empty((n_e, n_phases))
    v0 = np.empty((n_e, n_phases))
    for i, f in enumerate(e_fracs):
        z0[i], v0[i] = orbit_states(f * trap.depth_U0, n_phases, trap)
    # one batched integration over the whole (energy x phase) grid
    z, v, esc = _leapfrog(z0.ravel(), v0.ravel(), profile, trap, dt_target)
    gains = (total_energy(z, v, trap)).reshape(n_e, n_phases) - e_fracs[:, None] * trap.depth_U0
    return HeatingTable(e_fracs=e_fracs, gains=gains,
                        escaped=esc.reshape(n_e, n_phases), u0=trap.depth_U0)


# ---------------------------------------------------------------------------
# trap ramps and survival

def adiabatic_ramp(energy, U0_from, U0_to):
    """Adiabatic-invariant energy rescaling for a slow depth change.

    omega scales as sqrt(U0), so E' = E * sqrt(U0_to / U0_from); the atom
    is lost when E' reaches the new depth. Vectorized over energies.
    """
    if U0_from <= 0 or U0_to <= 0:
        raise ConfigError("adiabatic_ramp: depths must be > 0")
    e = np.asarray(energy, dtype=float)
    e_new = e * math.sqrt(U0_to / U0_from)
    lost = e_new >= U0_to
    if e_new.ndim == 0:
        return float(e_new), bool(lost)
    return e_new, lost


def survival_fraction(ensemble: EnsembleSpec, pipeline, trap: TrapConfig, rng,
                      n_atoms=2000, n_phases=64, dt=None, e_fracs=None):
    """Monte-Carlo fraction of atoms that survive a ramp/transport pipeline.

    pipeline entries: ('ramp', U0_from, U0_to) or ('transport', profile).
    Ramps update the working trap depth for the following stages. Losses
    are attributed to pipeline stages only, so an empty pipeline returns 1.
    """
    energies = np.atleast_1d(sample_energy(ensemble, rng, size=n_atoms))
    alive = np.ones(energies.shape, dtype=bool)
    current = trap
    for op in pipeline:
        if op[0] == "ramp":
            _, u_from, u_to = op
            if abs(u_from - current.depth_U0) > 1e-9 * u_from:
                raise ConfigError("ramp start depth does not match the current trap depth")
            energies, lost = adiabatic_ramp(energies, u_from, u_to)
            alive &= ~lost
            current = replace(current, depth_U0=u_to)
        elif op[0] == "transport":
            _, profile = op
            table = build_heating_table(profile, current, n_phases=n_phases,
                                        dt=dt, e_fracs=e_fracs)
            phase_idx = rng.integers(0, table.gains.shape[1], size=len(energies))
            gains, esc = table.sample(energies, phase_idx)
            energies = energies + gains
            alive &= ~esc & (energies < current.depth_U0)
        else:
            raise ConfigError(f"unknown pipeline op {op!r}")
    return float(np.mean(alive))
