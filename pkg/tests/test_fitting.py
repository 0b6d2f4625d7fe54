import math

import numpy as np
import pytest

from conveyorsim import (AllanCurve, ConfigError, NumericError,
                         estimate_fringe_frequency, fit_echo, fit_ramsey,
                         fit_visibility_decay)
from conveyorsim.fitting import echo_model, ramsey_model, gauss_newton, _jacobian


def make_ramsey(ts, p, form="paper", noise=0.0, rng=None):
    y = ramsey_model(ts, np.asarray(p, dtype=float), form=form)
    if noise > 0:
        y = y + noise * rng.standard_normal(ts.size)
    return y


TRUE_P = (0.30, 0.29, 0.9e-3, 2 * math.pi * 2800.0, 0.15)


class TestFitRamsey:
    def test_noiseless_recovery(self):
        ts = np.linspace(0, 2.2e-3, 90)
        y = make_ramsey(ts, TRUE_P)
        fit = fit_ramsey((ts, y), model_form="paper")
        for name, val in zip(("offset", "amplitude", "T2_star", "fringe_frequency", "phase"),
                             TRUE_P):
            assert fit.parameters[name] == pytest.approx(val, rel=1e-6), name
        assert fit.converged

    def test_noiseless_recovery_exact_form(self):
        ts = np.linspace(0, 2.2e-3, 90)
        y = ramsey_model(ts, np.asarray(TRUE_P), form="exact")
        fit = fit_ramsey((ts, y), model_form="exact")
        assert fit.parameters["T2_star"] == pytest.approx(TRUE_P[2], rel=1e-6)

    def test_idempotence_on_manifold(self):
        ts = np.linspace(0, 2.2e-3, 70)
        rng = np.random.default_rng(5)
        y = make_ramsey(ts, TRUE_P, noise=0.01, rng=rng)
        first = fit_ramsey((ts, y))
        p1 = [first.parameters[k] for k in ("offset", "amplitude", "T2_star",
                                            "fringe_frequency", "phase")]
        resampled = ramsey_model(ts, np.asarray(p1))
        second = fit_ramsey((ts, resampled))
        for k in ("offset", "amplitude", "T2_star", "fringe_frequency"):
            assert second.parameters[k] == pytest.approx(first.parameters[k], rel=1e-9)

    def test_residual_orthogonal_to_jacobian(self):
        ts = np.linspace(0, 2.2e-3, 70)
        rng = np.random.default_rng(6)
        y = make_ramsey(ts, TRUE_P, noise=0.012, rng=rng)
        fit = fit_ramsey((ts, y))
        p = np.array([fit.parameters[k] for k in ("offset", "amplitude", "T2_star",
                                                  "fringe_frequency", "phase")])

        def residual(q):
            return ramsey_model(ts, q) - y

        r = residual(p)
        J = _jacobian(residual, p, r)
        g = J.T @ r
        scale = np.linalg.norm(J, axis=0) * np.linalg.norm(r)
        assert np.all(np.abs(g) / np.maximum(scale, 1e-30) < 1e-5)

    def test_stderr_grows_with_noise(self):
        ts = np.linspace(0, 2.2e-3, 70)
        errs = []
        for noise in (0.005, 0.01, 0.02, 0.04):
            acc = 0.0
            for seed in range(6):
                rng = np.random.default_rng(100 + seed)
                y = make_ramsey(ts, TRUE_P, noise=noise, rng=rng)
                fit = fit_ramsey((ts, y, np.full(ts.size, noise)))
                acc += fit.stderrs["T2_star"]
            errs.append(acc / 6)
        assert all(b > a for a, b in zip(errs, errs[1:]))

    def test_too_few_points_rejected(self):
        with pytest.raises(ConfigError):
            fit_ramsey((np.linspace(0, 1e-3, 5), np.ones(5)))

    def test_constant_data_flagged(self):
        ts = np.linspace(0, 1e-3, 30)
        with pytest.raises(NumericError):
            fit_ramsey((ts, np.full(ts.size, 0.4)))


class TestFitEcho:
    def test_noiseless_recovery_and_center(self):
        tau = 8e-3
        p = (0.31, 0.27, 9e-3, 2 * math.pi * 700.0, 0.0)
        ts = np.linspace(2 * tau - 2e-3, 2 * tau + 2e-3, 60)
        y = echo_model(ts, tau, np.asarray(p))
        fit = fit_echo((ts, y), tau)
        assert fit.parameters["amplitude"] == pytest.approx(p[1], rel=1e-6)
        assert fit.extras["visibility"] == pytest.approx(p[1] / p[0], rel=1e-6)
        # the fitted lineshape dips at t = 2 tau_pi, within one grid step
        dense = np.linspace(ts[0], ts[-1], 4001)
        pv = [fit.parameters[k] for k in ("offset", "amplitude", "T2_star",
                                          "fringe_frequency", "phase")]
        curve = echo_model(dense, tau, np.asarray(pv))
        t_min = dense[np.argmin(curve)]
        assert abs(t_min - 2 * tau) < (ts[1] - ts[0])

    def test_scan_must_cover_center(self):
        tau = 8e-3
        ts = np.linspace(10e-3, 12e-3, 20)
        with pytest.raises(ConfigError):
            fit_echo((ts, np.cos(ts * 1e3)), tau)


class TestVisibilityDecay:
    def test_gaussian_sigma_recovery(self):
        taus = np.linspace(2e-3, 60e-3, 10)
        v0, sigma = 0.93, 45.0
        v = v0 * np.exp(-0.5 * (sigma * taus) ** 2)
        fit = fit_visibility_decay(taus, v)
        assert fit.parameters["V0"] == pytest.approx(v0, rel=1e-6)
        assert fit.parameters["sigma"] == pytest.approx(sigma, rel=1e-6)

    def test_allan_curve_scale_recovery(self):
        delta0 = -2 * math.pi * 300.0
        curve = lambda tau: 0.01 * math.sqrt(tau / 0.2)
        taus = np.linspace(10e-3, 120e-3, 8)
        scale_true = 1.4
        v = np.array([math.exp(-(scale_true * curve(t) * delta0 * t) ** 2) for t in taus])
        fit = fit_visibility_decay(taus, v, model="allan-curve", delta0=delta0, allan=curve)
        assert fit.parameters["sigma_scale"] == pytest.approx(scale_true, rel=1e-6)

    def test_band_brackets_intermediate_curve(self):
        delta0 = -2 * math.pi * 300.0
        best = AllanCurve(np.array([1e-3, 1.0]), np.array([0.001, 0.001 * math.sqrt(1000)]))
        worst = AllanCurve(np.array([1e-3, 1.0]), np.array([0.01, 0.01 * math.sqrt(1000)]))
        mid = lambda tau: 0.004 * math.sqrt(tau / 1e-3)
        taus = np.linspace(10e-3, 100e-3, 6)
        v = np.array([math.exp(-(mid(t) * delta0 * t) ** 2) for t in taus])
        fit = fit_visibility_decay(taus, v, model="allan-curve", delta0=delta0,
                                   allan=mid, allan_pair=(best, worst))
        lo, hi = fit.extras["band_low"], fit.extras["band_high"]
        assert np.all(v >= lo - 1e-12)
        assert np.all(v <= hi + 1e-12)

    def test_too_few_points(self):
        with pytest.raises(ConfigError):
            fit_visibility_decay([1e-3, 2e-3], [0.9, 0.8])


class TestFringeFrequency:
    def test_pure_cosine_uniform_grid(self):
        f = 2750.0
        ts = np.linspace(0, 3e-3, 120)
        y = np.cos(2 * math.pi * f * ts + 0.3)
        got = estimate_fringe_frequency((ts, y))
        assert got / (2 * math.pi) == pytest.approx(f, rel=0.02)

    def test_model_data_within_ten_percent(self):
        ts = np.linspace(0, 2.2e-3, 70)
        y = make_ramsey(ts, TRUE_P)
        got = estimate_fringe_frequency((ts, y))
        assert got == pytest.approx(TRUE_P[3], rel=0.10)

    def test_constant_data_flagged_zero(self):
        ts = np.linspace(0, 1e-3, 40)
        assert estimate_fringe_frequency((ts, np.full(40, 0.2))) == 0.0

    def test_nonuniform_grid_periodogram(self):
        rng = np.random.default_rng(9)
        ts = np.sort(rng.uniform(0, 3e-3, size=90))
        f = 2000.0
        y = np.cos(2 * math.pi * f * ts)
        got = estimate_fringe_frequency((ts, y))
        assert got / (2 * math.pi) == pytest.approx(f, rel=0.05)


class TestEngine:
    def test_gauss_newton_on_rosenbrock_residuals(self):
        def resid(p):
            return np.array([10 * (p[1] - p[0] ** 2), 1 - p[0]])

        p, converged, iters, cost = gauss_newton(resid, np.array([-1.2, 1.0]))
        assert converged
        assert np.allclose(p, [1.0, 1.0], atol=1e-8)

    def test_result_serializes(self):
        ts = np.linspace(0, 2.2e-3, 40)
        y = make_ramsey(ts, TRUE_P)
        fit = fit_ramsey((ts, y))
        text = fit.to_json()
        import json
        payload = json.loads(text)
        assert payload["model"] == "ramsey-paper"
        assert payload["converged"] is True
