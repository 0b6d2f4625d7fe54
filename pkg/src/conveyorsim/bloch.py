"""Bloch-vector evolution for the two-level clock transition.

Conventions (any consistent set works; this is the simplest one that
reproduces w(t) = cos(delta*t) for a Ramsey pair and
w = -cos(d_delta*tau_pi) for an echo with a detuning step):

* state (u, v, w); the qubit starts in (0, 0, -1).
* a pulse of area theta and phase phi rotates the state by theta about
  the equatorial axis (cos phi, sin phi, 0). Instantaneous pulses ignore
  the detuning; finite-duration pulses rotate by Omega_eff * tau about
  the tilted torque axis (Omega*cos phi, Omega*sin phi, delta).
* free evolution precesses (u, v) by delta*t about +w.

All operations are rotations (plus optional T1 shrinkage), so the Bloch
norm is preserved to floating-point accuracy.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

_NORM_TOL = 1e-9


@dataclass(frozen=True)
class BlochVector:
    u: float
    v: float
    w: float

    def __post_init__(self):
        n2 = self.u * self.u + self.v * self.v + self.w * self.w
        if not math.isfinite(n2) or n2 > 1.0 + _NORM_TOL:
            raise ConfigError(f"Bloch vector norm^2 = {n2!r} exceeds 1")

    def as_array(self):
        return np.array([self.u, self.v, self.w], dtype=float)

    @staticmethod
    def from_array(arr):
        return BlochVector(float(arr[0]), float(arr[1]), float(arr[2]))


GROUND = BlochVector(0.0, 0.0, -1.0)  # prepared clock state


@dataclass(frozen=True)
class PulseParams:
    area: float                     # rad
    rabi_frequency_Omega: float = 2 * math.pi * 10e3  # rad/s
    phase: float = 0.0              # rad
    mode: str = "instantaneous"     # or "finite-duration"

    def __post_init__(self):
        if self.area < 0:
            raise ConfigError(f"PulseParams.area must be >= 0, got {self.area!r}")
        if self.mode not in ("instantaneous", "finite-duration"):
            raise ConfigError(f"PulseParams.mode unknown: {self.mode!r}")
        if self.mode == "finite-duration" and self.rabi_frequency_Omega <= 0:
            raise ConfigError("PulseParams.rabi_frequency_Omega must be > 0 in finite-duration mode")

    @property
    def duration(self):
        if self.mode == "instantaneous":
            return 0.0
        return self.area / self.rabi_frequency_Omega


# ---------------------------------------------------------------------------
# sequence segments

@dataclass(frozen=True)
class Pulse:
    params: PulseParams

    @property
    def duration(self):
        return self.params.duration


@dataclass(frozen=True)
class FreeEvolution:
    duration: float  # s

    def __post_init__(self):
        if self.duration < 0:
            raise ConfigError("FreeEvolution.duration must be >= 0")


@dataclass(frozen=True)
class TransportSegment:
    """Marks a trap-displacement interval; the Bloch engine only precesses
    through it, energy/position bookkeeping happens in the shot simulator."""

    duration: float        # s
    displacement: float    # m, signed change of the trap position
    profile: object = None  # transport.AccelProfile when dynamics are wanted

    def __post_init__(self):
        if self.duration < 0:
            raise ConfigError("TransportSegment.duration must be >= 0")


@dataclass(frozen=True)
class MixingWindow:
    """State-mixing laser window. Free precession still applies here; the
    incoherent collapse itself is applied by the shot simulator, which
    knows the atom position."""

    duration: float  # s

    def __post_init__(self):
        if self.duration < 0:
            raise ConfigError("MixingWindow.duration must be >= 0")


@dataclass(frozen=True)
class PulseSequence:
    segments: tuple

    def __post_init__(self):
        if len(self.segments) == 0:
            raise ConfigError("PulseSequence must contain at least one segment")

    @property
    def span(self):
        return sum(s.duration for s in self.segments)


def pi_half(phase=0.0, mode="instantaneous", rabi=2 * math.pi * 10e3):
    return Pulse(PulseParams(area=math.pi / 2, phase=phase, mode=mode,
                             rabi_frequency_Omega=rabi))


def pi_pulse(phase=0.0, mode="instantaneous", rabi=2 * math.pi * 10e3):
    return Pulse(PulseParams(area=math.pi, phase=phase, mode=mode,
                             rabi_frequency_Omega=rabi))


def ramsey_sequence(t):
    """pi/2 - free(t) - pi/2, both pulses sharing phase 0."""
    return PulseSequence((pi_half(), FreeEvolution(t), pi_half()))


def echo_sequence(t, tau_pi):
    """pi/2 - free(tau_pi) - pi - free(t - tau_pi) - pi/2."""
    if t < tau_pi:
        raise ConfigError(f"echo sequence needs t >= tau_pi, got t={t!r} tau_pi={tau_pi!r}")
    return PulseSequence((pi_half(), FreeEvolution(tau_pi), pi_pulse(),
                          FreeEvolution(t - tau_pi), pi_half()))


# ---------------------------------------------------------------------------
# rotations (array kernels; all public ops funnel through these)

def rotate_about_axis(states, axis, angle):
    """Rodrigues rotation of (..., 3) states about unit axes.

    `axis` is one axis (shape (3,)) or per-state axes broadcastable to the
    states' shape; `angle` is a scalar or broadcasts against states[..., 0].
    """
    s = np.asarray(states, dtype=float)
    n = np.broadcast_to(np.asarray(axis, dtype=float), s.shape)
    c = np.asarray(np.cos(angle), dtype=float)[..., None]
    si = np.asarray(np.sin(angle), dtype=float)[..., None]
    ndots = np.sum(s * n, axis=-1, keepdims=True)
    cross = np.cross(n, s)
    return s * c + cross * si + n * ndots * (1.0 - c)


def rotate_about_w(states, angle):
    """Precession of (u, v) by `angle` about +w; w untouched. Vectorized:
    `angle` may be an array broadcasting against states[..., 0]."""
    s = np.asarray(states, dtype=float)
    c, si = np.cos(angle), np.sin(angle)
    out = np.empty_like(s)
    out[..., 0] = s[..., 0] * c - s[..., 1] * si
    out[..., 1] = s[..., 0] * si + s[..., 1] * c
    out[..., 2] = s[..., 2]
    return out


def pulse_axis_angle(pulse: PulseParams, detuning=0.0):
    """Rotation axis and angle realized by a pulse at the given detuning."""
    if pulse.mode == "instantaneous":
        return np.array([math.cos(pulse.phase), math.sin(pulse.phase), 0.0]), pulse.area
    om = pulse.rabi_frequency_Omega
    om_eff = math.hypot(om, detuning)
    tau = pulse.area / om
    axis = np.array([om * math.cos(pulse.phase), om * math.sin(pulse.phase), detuning]) / om_eff
    return axis, om_eff * tau


def apply_pulse(state: BlochVector, pulse: PulseParams, detuning=0.0) -> BlochVector:
    """Rotate the state by one microwave pulse."""
    axis, angle = pulse_axis_angle(pulse, detuning)
    return BlochVector.from_array(rotate_about_axis(state.as_array(), axis, angle))


def free_evolve(state: BlochVector, total_detuning, duration) -> BlochVector:
    """Free precession for `duration` at a constant total detuning."""
    if duration < 0:
        raise ConfigError("free_evolve: duration must be >= 0")
    return BlochVector.from_array(
        rotate_about_w(state.as_array(), total_detuning * duration))


def relax_T1(state: BlochVector, duration, T1) -> BlochVector:
    """Population relaxation toward the fully mixed state (w -> 0).

    The scattering channel mixes the two hyperfine states, so w decays
    toward 0 rather than to a pole; u and v shrink with the same constant.
    """
    if T1 is None:
        return state
    if T1 <= 0:
        raise ConfigError("relax_T1: T1 must be > 0 (or None to disable)")
    if duration < 0:
        raise ConfigError("relax_T1: duration must be >= 0")
    f = math.exp(-duration / T1)
    return BlochVector(state.u * f, state.v * f, state.w * f)


# Gauss-Legendre nodes for integrating a detuning timeline across a segment.
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


def _segment_phase(timeline, t0, t1):
    """Integral of timeline(t) over [t0, t1] by fixed-order quadrature.

    Exact for timelines that are smooth (e.g. constant) within a segment;
    sequences are built so that detuning jumps only land on boundaries.
    """
    if t1 == t0:
        return 0.0
    mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
    vals = np.array([timeline(mid + half * x) for x in _GL_NODES], dtype=float)
    if not np.all(np.isfinite(vals)):
        raise ConfigError(f"detuning timeline undefined on [{t0!r}, {t1!r}]")
    return float(np.dot(vals, _GL_WEIGHTS) * half)


def run_sequence(seq: PulseSequence, detuning_timeline, initial: BlochVector = GROUND,
                 T1=None):
    """Run a pulse sequence against a detuning timeline (callable t -> rad/s).

    Pulses use the timeline value at their start. Free evolution,
    transport, and mixing segments all precess by the integrated
    detuning over their span (the mixing collapse is not applied here).
    Returns (final_state, P3) with P3 = (w + 1) / 2.
    """
    if callable(detuning_timeline):
        timeline = detuning_timeline
    else:
        const = float(detuning_timeline)
        timeline = lambda t: const  # noqa: E731

    state = initial.as_array()
    t = 0.0
    for seg in seq.segments:
        if isinstance(seg, Pulse):
            det = timeline(t)
            if not math.isfinite(det):
                raise ConfigError(f"detuning timeline undefined at t={t!r}")
            axis, angle = pulse_axis_angle(seg.params, det)
            state = rotate_about_axis(state, axis, angle)
            t += seg.duration
        elif isinstance(seg, (FreeEvolution, TransportSegment, MixingWindow)):
            phase = _segment_phase(timeline, t, t + seg.duration)
            state = rotate_about_w(state, phase)
            t += seg.duration
        else:
            raise ConfigError(f"unknown sequence segment {seg!r}")
        if T1 is not None and seg.duration > 0:
            state = state * math.exp(-seg.duration / T1)
    final = BlochVector.from_array(state)
    return final, (final.w + 1.0) / 2.0
