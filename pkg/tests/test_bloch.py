import math

import numpy as np
import pytest

from conveyorsim import (BlochVector, ConfigError, FreeEvolution, GROUND,
                         MixingWindow, Pulse, PulseParams, PulseSequence,
                         apply_pulse, echo_sequence, free_evolve, ramsey_sequence,
                         relax_T1, run_sequence)
from conveyorsim.bloch import pulse_axis_angle, rotate_about_axis


def bloch_rhs(s, omega_vec):
    return np.cross(omega_vec, s)


def rk4_pulse(state, pulse, detuning, n_steps=4096):
    """Independent oracle: integrate dS/dt = Omega_vec x S through the pulse."""
    om = pulse.rabi_frequency_Omega
    omega_vec = np.array([om * math.cos(pulse.phase), om * math.sin(pulse.phase), detuning])
    tau = pulse.area / om
    dt = tau / n_steps
    s = state.as_array()
    for _ in range(n_steps):
        k1 = bloch_rhs(s, omega_vec)
        k2 = bloch_rhs(s + 0.5 * dt * k1, omega_vec)
        k3 = bloch_rhs(s + 0.5 * dt * k2, omega_vec)
        k4 = bloch_rhs(s + dt * k3, omega_vec)
        s = s + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return s


class TestApplyPulse:
    def test_pi_inverts_population(self):
        out = apply_pulse(GROUND, PulseParams(area=math.pi))
        assert out.w == pytest.approx(1.0, abs=1e-12)
        assert abs(out.u) < 1e-12 and abs(out.v) < 1e-12

    def test_pi_half_reaches_equator(self):
        out = apply_pulse(GROUND, PulseParams(area=math.pi / 2))
        assert out.w == pytest.approx(0.0, abs=1e-12)
        assert math.hypot(out.u, out.v) == pytest.approx(1.0, abs=1e-12)

    def test_instantaneous_ignores_detuning(self):
        a = apply_pulse(GROUND, PulseParams(area=math.pi / 2), detuning=0.0)
        b = apply_pulse(GROUND, PulseParams(area=math.pi / 2), detuning=1e5)
        assert a == b

    def test_finite_duration_matches_rk4_oracle(self):
        omega = 2 * math.pi * 10e3
        pulse = PulseParams(area=math.pi, rabi_frequency_Omega=omega, mode="finite-duration")
        got = apply_pulse(GROUND, pulse, detuning=omega)
        want = rk4_pulse(GROUND, pulse, detuning=omega)
        assert np.allclose(got.as_array(), want, atol=1e-9)

    def test_finite_duration_random_cases_match_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(5):
            omega = 2 * math.pi * rng.uniform(5e3, 20e3)
            pulse = PulseParams(area=rng.uniform(0.3, 2.5) * math.pi,
                                rabi_frequency_Omega=omega,
                                phase=rng.uniform(0, 2 * math.pi),
                                mode="finite-duration")
            det = rng.uniform(-1.5, 1.5) * omega
            got = apply_pulse(GROUND, pulse, detuning=det)
            want = rk4_pulse(GROUND, pulse, detuning=det)
            assert np.allclose(got.as_array(), want, atol=1e-9)

    def test_modes_converge_monotonically(self):
        # fixed area and detuning, growing Rabi frequency
        instant = apply_pulse(GROUND, PulseParams(area=math.pi / 2))
        det = 2 * math.pi * 2e3
        errs = []
        for omega in (2 * math.pi * 8e3 * 2 ** k for k in range(6)):
            fin = apply_pulse(GROUND, PulseParams(area=math.pi / 2, mode="finite-duration",
                                                  rabi_frequency_Omega=omega), detuning=det)
            errs.append(np.linalg.norm(fin.as_array() - instant.as_array()))
        assert all(b < a for a, b in zip(errs, errs[1:]))


class TestFreeEvolve:
    def test_zero_duration_identity(self):
        s = BlochVector(0.6, -0.3, 0.5)
        assert free_evolve(s, 12345.0, 0.0) == s

    def test_full_revolution(self):
        s = BlochVector(1.0, 0.0, 0.0)
        out = free_evolve(s, 2 * math.pi, 1.0)
        assert np.allclose(out.as_array(), s.as_array(), atol=1e-12)

    def test_rotation_matrix_oracle(self):
        beta = math.pi / 3
        out = free_evolve(BlochVector(1.0, 0.0, 0.0), beta, 1.0)
        R = np.array([[math.cos(beta), -math.sin(beta), 0],
                      [math.sin(beta), math.cos(beta), 0],
                      [0, 0, 1]])
        assert np.allclose(out.as_array(), R @ np.array([1.0, 0, 0]), atol=1e-12)

    def test_norm_preserved_random(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            vec = rng.normal(size=3)
            vec /= np.linalg.norm(vec)
            s = BlochVector(*vec)
            pulse = PulseParams(area=rng.uniform(0, 3 * math.pi), phase=rng.uniform(0, 2 * math.pi))
            out = free_evolve(apply_pulse(s, pulse), rng.normal() * 1e4, rng.uniform(0, 1e-3))
            norm = np.linalg.norm(out.as_array())
            assert norm == pytest.approx(1.0, abs=1e-9)


class TestRelaxT1:
    def test_zero_duration(self):
        s = BlochVector(0.1, 0.2, -0.9)
        assert relax_T1(s, 0.0, 8.0) == s

    def test_one_time_constant(self):
        out = relax_T1(BlochVector(0, 0, -1.0), 8.0, 8.0)
        assert out.w == pytest.approx(-1.0 / math.e, rel=1e-12)

    def test_disabled(self):
        s = BlochVector(0.1, 0.2, -0.9)
        assert relax_T1(s, 5.0, None) == s


class TestRunSequence:
    def test_resonant_ramsey_full_transfer(self):
        final, p3 = run_sequence(ramsey_sequence(1e-3), 0.0)
        assert p3 == pytest.approx(1.0, abs=1e-12)
        assert final.w == pytest.approx(1.0, abs=1e-12)

    def test_ramsey_pi_phase(self):
        t = 1e-3
        final, p3 = run_sequence(ramsey_sequence(t), math.pi / t)
        assert final.w == pytest.approx(-1.0, abs=1e-9)
        assert p3 == pytest.approx(0.0, abs=1e-9)

    def test_ramsey_reproduces_cosine_random(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            det = rng.normal() * 2e4
            t = rng.uniform(0.1e-3, 3e-3)
            final, _ = run_sequence(ramsey_sequence(t), det)
            assert final.w == pytest.approx(math.cos(det * t), abs=1e-9)

    def test_echo_rephases_any_constant_detuning(self):
        rng = np.random.default_rng(12)
        for _ in range(10):
            det = rng.normal() * 3e4
            tau = rng.uniform(0.5e-3, 5e-3)
            final, p3 = run_sequence(echo_sequence(2 * tau, tau), det)
            assert final.w == pytest.approx(-1.0, abs=1e-9)

    def test_echo_detuning_step_identity(self):
        # detuning dbar before the pi pulse, dbar + step after it
        rng = np.random.default_rng(13)
        for _ in range(10):
            dbar = rng.normal() * 2e4
            step = rng.normal() * 5e3
            tau = rng.uniform(0.5e-3, 4e-3)

            def timeline(t, tau=tau, dbar=dbar, step=step):
                return dbar if t < tau else dbar + step

            final, _ = run_sequence(echo_sequence(2 * tau, tau), timeline)
            assert final.w == pytest.approx(-math.cos(step * tau), abs=1e-9)

    def test_mixing_window_passes_time(self):
        # a mixing window precesses like free evolution of the same length
        det = 2 * math.pi * 700.0
        tau = 2e-3
        seq_a = PulseSequence((Pulse(PulseParams(area=math.pi / 2)), FreeEvolution(tau),
                               Pulse(PulseParams(area=math.pi / 2))))
        seq_b = PulseSequence((Pulse(PulseParams(area=math.pi / 2)), FreeEvolution(tau / 2),
                               MixingWindow(tau / 2), Pulse(PulseParams(area=math.pi / 2))))
        wa = run_sequence(seq_a, det)[0].w
        wb = run_sequence(seq_b, det)[0].w
        assert wa == pytest.approx(wb, abs=1e-12)

    def test_undefined_timeline_rejected(self):
        with pytest.raises(ConfigError):
            run_sequence(ramsey_sequence(1e-3), lambda t: float("nan"))

    def test_norm_bound_enforced(self):
        with pytest.raises(ConfigError):
            BlochVector(1.0, 1.0, 1.0)

    def test_empty_sequence_rejected(self):
        with pytest.raises(ConfigError):
            PulseSequence(())


class TestKernels:
    def test_rotation_kernel_batched_axes(self):
        rng = np.random.default_rng(5)
        states = rng.normal(size=(6, 3))
        states /= np.linalg.norm(states, axis=1, keepdims=True)
        axes = rng.normal(size=(6, 3))
        axes /= np.linalg.norm(axes, axis=1, keepdims=True)
        angles = rng.uniform(0, 2 * math.pi, size=6)
        batch = rotate_about_axis(states, axes, angles)
        for i in range(6):
            single = rotate_about_axis(states[i], axes[i], angles[i])
            assert np.allclose(batch[i], single, atol=1e-12)

    def test_pulse_axis_tilts_with_detuning(self):
        p = PulseParams(area=math.pi, mode="finite-duration",
                        rabi_frequency_Omega=2 * math.pi * 1e4)
        axis, angle = pulse_axis_angle(p, detuning=2 * math.pi * 1e4)
        assert axis[2] == pytest.approx(1 / math.sqrt(2), rel=1e-12)
        assert angle == pytest.approx(math.sqrt(2) * math.pi, rel=1e-12)
