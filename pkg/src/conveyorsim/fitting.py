"""Weighted least-squares fits of fringe scans and visibility decays.

The engine is a damped Gauss-Newton iteration: the damping factor starts
at 1e-3, multiplies by 10 on a rejected step and divides by 10 on an
accepted one, with the damping applied to the scaled normal matrix
(J^T J + lam * diag(J^T J)). Jacobians are forward differences with step
max(1e-8, 1e-6 * |p|). Convergence: relative parameter change < 1e-10 or
relative cost change < 1e-12, capped at 200 iterations (returning the
best point seen with the convergence flag cleared). Fringe fits
multi-start over pulse phases {0, pi/2, pi, 3pi/2}.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .dephasing import ENVELOPE_CURVATURE, T2_STAR_PER_K

DAMPING_START = 1e-3
DAMPING_GROW = 10.0
DAMPING_SHRINK = 10.0
MAX_ITERATIONS = 200
PARAM_TOL = 1e-10
COST_TOL = 1e-12
PHASE_STARTS = (0.0, math.pi / 2, math.pi, 3 * math.pi / 2)


@dataclass
class FitResult:
    parameters: dict
    stderrs: dict
    residual_norm: float
    converged: bool
    iterations: int
    model: str
    extras: dict = field(default_factory=dict)

    def to_json(self, indent=2):
        payload = {
            "model": self.model,
            "parameters": self.parameters,
            "stderrs": self.stderrs,
            "residual_norm": self.residual_norm,
            "converged": self.converged,
            "iterations": self.iterations,
            "extras": {k: (v.tolist() if isinstance(v, np.ndarray) else v)
                       for k, v in self.extras.items()},
        }
        return json.dumps(payload, indent=indent)

    def summary(self):
        parts = [f"{k}={v:.6g}+-{self.stderrs.get(k, float('nan')):.2g}"
                 for k, v in self.parameters.items()]
        flag = "" if self.converged else " [NOT CONVERGED]"
        return f"{self.model}: " + " ".join(parts) + flag


# ---------------------------------------------------------------------------
# engine

def _jacobian(fun, p, r0):
    J = np.empty((r0.size, p.size))
    for j in range(p.size):
        step = max(1e-8, 1e-6 * abs(p[j]))
        q = p.copy()
        q[j] += step
        J[:, j] = (fun(q) - r0) / step
    return J


def gauss_newton(fun, p0):
    """Minimize |fun(p)|^2. Returns (p, converged, iterations, cost)."""
    p = np.asarray(p0, dtype=float).copy()
    r = fun(p)
    cost = float(r @ r)
    lam = DAMPING_START
    converged = False
    it = 0
    for it in range(1, MAX_ITERATIONS + 1):
        J = _jacobian(fun, p, r)
        g = J.T @ r
        H = J.T @ J
        d = np.diag(H).copy()
        d[d <= 0] = 1.0
        accepted = False
        while lam < 1e14:
            try:
                step = np.linalg.solve(H + lam * np.diag(d), -g)
            except np.linalg.LinAlgError:
                lam *= DAMPING_GROW
                continue
            trial = p + step
            rt = fun(trial)
            ct = float(rt @ rt)
            if math.isfinite(ct) and ct < cost:
                rel_dp = np.max(np.abs(step) / np.maximum(np.abs(p), 1e-30))
                rel_dc = abs(cost - ct) / max(cost, 1e-300)
                p, r, cost = trial, rt, ct
                lam = max(lam / DAMPING_SHRINK, 1e-14)
                accepted = True
                if rel_dp < PARAM_TOL or rel_dc < COST_TOL:
                    converged = True
                break
            lam *= DAMPING_GROW
        if not accepted:
            # no downhill step found: treat the current point as stationary
            converged = True
        if converged:
            break
    return p, converged, it, cost


def _covariance(fun, p, weighted):
    r = fun(p)
    J = _jacobian(fun, p, r)
    H = J.T @ J
    # pseudo-inverse keeps degenerate fits (flat data) finite
    cov = np.linalg.pinv(H)
    if not weighted:
        dof = max(r.size - p.size, 1)
        cov = cov * (float(r @ r) / dof)
    return cov, J, r


def _prepare_weights(y, stderr):
    if stderr is None:
        return np.ones_like(y), False
    s = np.asarray(stderr, dtype=float)
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        return np.ones_like(y), False
    return 1.0 / s, True


# ---------------------------------------------------------------------------
# fringe models

def _envelope(t, T2, form):
    T2 = abs(T2)
    if form == "paper":
        return (1.0 + ENVELOPE_CURVATURE * (t / T2) ** 2) ** -0.75
    K = T2 / math.sqrt(math.exp(4.0 / 3.0) - 1.0)
    return (1.0 + (t / K) ** 2) ** -0.75


def _chirp(t, T2, form):
    if form == "paper":
        return 0.0
    K = abs(T2) / math.sqrt(math.exp(4.0 / 3.0) - 1.0)
    return 1.5 * np.arctan(t / K)


def ramsey_model(t, params, form="paper"):
    """offset + amplitude * alpha(t) * cos(w t + phase [+ chirp])."""
    off, amp, T2, w, ph = params
    return off + amp * _envelope(t, T2, form) * np.cos(w * t + ph + _chirp(t, T2, form))


def echo_model(t, tau_pi, params, form="paper"):
    """offset + amplitude * (-alpha(s) cos(w s + phase [+ chirp])), s = t - 2 tau_pi."""
    off, amp, T2, w, ph = params
    s = t - 2.0 * tau_pi
    return off - amp * _envelope(s, T2, form) * np.cos(w * s + ph + _chirp(s, T2, form))


def _normalize_fringe_params(p):
    """Fold sign degeneracies: amplitude >= 0, T2 > 0, phase in (-pi, pi]."""
    off, amp, T2, w, ph = p
    T2 = abs(T2)
    if amp < 0:
        amp, ph = -amp, ph + math.pi
    if w < 0:
        w, ph = -w, -ph
    ph = math.remainder(ph, 2 * math.pi)
    return np.array([off, amp, T2, w, ph])


_FRINGE_NAMES = ("offset", "amplitude", "T2_star", "fringe_frequency", "phase")


def _fit_fringe(x, y, stderr, model_fn, p0_base, model_label, t2_starts=None):
    wts, weighted = _prepare_weights(y, stderr)

    def residual(p):
        return (model_fn(x, p) - y) * wts

    if t2_starts is None:
        t2_starts = (p0_base[2],)
    best = None
    for t2_0 in t2_starts:
        for ph0 in PHASE_STARTS:
            p0 = p0_base.copy()
            p0[2] = t2_0
            p0[4] = ph0
            p, conv, iters, cost = gauss_newton(residual, p0)
            if best is None or cost < best[3]:
                best = (p, conv, iters, cost)
    p, conv, iters, cost = best
    p = _normalize_fringe_params(p)
    cov, J, r = _covariance(residual, p, weighted)
    errs = np.sqrt(np.abs(np.diag(cov)))
    params = dict(zip(_FRINGE_NAMES, (float(v) for v in p)))
    stderrs = dict(zip(_FRINGE_NAMES, (float(v) for v in errs)))
    return FitResult(parameters=params, stderrs=stderrs,
                     residual_norm=float(math.sqrt(cost)), converged=conv,
                     iterations=iters, model=model_label,
                     extras={}), cov, J


def fit_ramsey(data, model_form="paper") -> FitResult:
    """Fit a Ramsey scan to offset + amplitude * alpha(t) cos(w t + phase).

    `data` is a DataSet or an (x, y, stderr) triple. Weights are 1/stderr^2
    when stderrs are supplied and positive.
    """
    x, y, stderr = _unpack(data)
    if x.size < 8:
        raise ConfigError("fit_ramsey: need at least 8 points")
    if np.ptp(y) <= 0:
        raise NumericError("fit_ramsey: constant data, nothing to fit")
    w0 = estimate_fringe_frequency((x, y))
    if w0 == 0.0:
        raise NumericError("fit_ramsey: no fringe frequency found (flat spectrum)")
    span = float(x.max() - x.min())
    if w0 * span < math.pi:
        raise ConfigError("fit_ramsey: grid spans less than half a fringe period")
    p0 = np.array([float(np.mean(y)), float(np.ptp(y) / 2), span / 3, w0, 0.0])

    def model_fn(t, p):
        return ramsey_model(t, p, form=model_form)

    result, _, _ = _fit_fringe(x, y, stderr, model_fn, p0, f"ramsey-{model_form}")
    return result


def fit_echo(data, tau_pi, model_form="paper") -> FitResult:
    """Fit an echo scan around t = 2 tau_pi; adds the fringe visibility
    (amplitude over offset, the achievable contrast) to the result."""
    x, y, stderr = _unpack(data)
    if x.size < 8:
        raise ConfigError("fit_echo: need at least 8 points")
    if np.ptp(y) <= 0:
        raise NumericError("fit_echo: constant data, nothing to fit")
    if x.min() > 2 * tau_pi or x.max() < 2 * tau_pi:
        raise ConfigError("fit_echo: scan does not cover t = 2 tau_pi")
    s = x - 2 * tau_pi
    w0 = estimate_fringe_frequency((s, y))
    if w0 == 0.0:
        raise NumericError("fit_echo: no fringe frequency found (flat spectrum)")
    span = float(x.max() - x.min())
    p0 = np.array([float(np.mean(y)), float(np.ptp(y) / 2), span, w0, 0.0])

    def model_fn(t, p):
        return echo_model(t, tau_pi, p, form=model_form)

    # the envelope scale is weakly constrained by a narrow fringe window,
    # so multi-start it alongside the pulse phase
    result, cov, _ = _fit_fringe(x, y, stderr, model_fn, p0, f"echo-{model_form}",
                                 t2_starts=(span / 3, span, 3 * span, 10 * span))
    off = result.parameters["offset"]
    amp = result.parameters["amplitude"]
    if off <= 0:
        raise NumericError("fit_echo: non-positive offset, visibility undefined")
    vis = amp / off
    var = (cov[1, 1] / off ** 2 + (amp ** 2 / off ** 4) * cov[0, 0]
           - 2 * (amp / off ** 3) * cov[0, 1])
    result.extras["visibility"] = float(vis)
    result.extras["visibility_err"] = float(math.sqrt(abs(var)))
    result.extras["achievable_max"] = float(off)
    result.extras["tau_pi"] = float(tau_pi)
    return result


def fit_visibility_decay(tau_pi, visibility, visibility_err=None, *,
                         model="gaussian-sigma", delta0=None, allan=None,
                         allan_pair=None) -> FitResult:
    """Fit a visibility-vs-tau_pi series.

    model='gaussian-sigma' fits V0 * exp(-sigma^2 tau^2 / 2) for (V0, sigma).
    model='allan-curve' fits V0 * exp(-(c * sigma_A(tau) * delta0 * tau)^2)
    for (V0, c) against a supplied Allan curve (or callable) and delta0.
    When `allan_pair` provides two curves, the best/worst-case visibility
    band (V0 = 1) is attached to the extras.
    """
    tau = np.asarray(tau_pi, dtype=float)
    vis = np.asarray(visibility, dtype=float)
    if tau.size < 4:
        raise ConfigError("fit_visibility_decay: need at least 4 points")
    wts, weighted = _prepare_weights(vis, visibility_err)

    if model == "gaussian-sigma":
        names = ("V0", "sigma")
        v0_guess = float(np.clip(vis.max(), 1e-3, 1.0))
        idx = np.argmin(np.abs(vis - v0_guess / 2))
        sig_guess = 1.5 / max(tau[idx], tau[1])

        def model_fn(p):
            v0, sg = p
            return v0 * np.exp(-0.5 * (sg * tau) ** 2)

        p0 = np.array([v0_guess, sig_guess])
    elif model == "allan-curve":
        if delta0 is None or allan is None:
            raise ConfigError("fit_visibility_decay: allan-curve model needs delta0 and allan")
        names = ("V0", "sigma_scale")
        sig_a = np.array([_sigma_of(allan, t) for t in tau])

        def model_fn(p):
            v0, c = p
            return v0 * np.exp(-(c * sig_a * delta0 * tau) ** 2)

        p0 = np.array([float(np.clip(vis.max(), 1e-3, 1.0)), 1.0])
    else:
        raise ConfigError(f"unknown visibility model {model!r}")

    def residual(p):
        return (model_fn(p) - vis) * wts

    p, conv, iters, cost = gauss_newton(residual, p0)
    p = np.abs(p)
    cov, _, _ = _covariance(residual, p, weighted)
    errs = np.sqrt(np.abs(np.diag(cov)))
    extras = {}
    if allan_pair is not None:
        lo_curve, hi_curve = allan_pair
        v_a = np.array([math.exp(-(_sigma_of(lo_curve, t) * (delta0 or 0.0) * t) ** 2)
                        for t in tau])
        v_b = np.array([math.exp(-(_sigma_of(hi_curve, t) * (delta0 or 0.0) * t) ** 2)
                        for t in tau])
        extras["band_low"] = np.minimum(v_a, v_b)
        extras["band_high"] = np.maximum(v_a, v_b)
    return FitResult(parameters=dict(zip(names, (float(v) for v in p))),
                     stderrs=dict(zip(names, (float(v) for v in errs))),
                     residual_norm=float(math.sqrt(cost)), converged=conv,
                     iterations=iters, model=f"visibility-{model}", extras=extras)


def _sigma_of(allan, tau):
    if hasattr(allan, "interpolate"):
        return allan.interpolate(tau)
    return float(allan(tau))


# ---------------------------------------------------------------------------
# fringe-frequency initializer

def estimate_fringe_frequency(data):
    """Dominant nonzero angular frequency (rad/s) of mean-subtracted data.

    Uniform grids use a zero-padded FFT with parabolic peak refinement;
    nonuniform grids fall back to a periodogram scanned up to the Nyquist
    limit of the median spacing. Constant data returns 0.0.
    """
    x, y, _ = _unpack(data)
    if x.size < 8:
        raise ConfigError("estimate_fringe_frequency: need at least 8 points")
    y = y - np.mean(y)
    if np.ptp(y) == 0.0:
        return 0.0
    dx = np.diff(x)
    if np.min(dx) <= 0:
        raise ConfigError("estimate_fringe_frequency: grid must be increasing")
    uniform = np.max(np.abs(dx - dx[0])) < 1e-9 * abs(dx[0])
    if uniform:
        n_pad = 8 * x.size
        spec = np.abs(np.fft.rfft(y, n=n_pad))
        freqs = np.fft.rfftfreq(n_pad, d=dx[0])
        spec[0] = 0.0
        i = int(np.argmax(spec))
        f = _parabolic_peak(freqs, spec, i)
        return 2 * math.pi * f
    median_dx = float(np.median(dx))
    f_nyq = 0.5 / median_dx
    freqs = np.linspace(f_nyq / 512, f_nyq, 2048)
    omega = 2 * math.pi * freqs
    c = np.cos(np.outer(omega, x))
    s = np.sin(np.outer(omega, x))
    power = (c @ y) ** 2 + (s @ y) ** 2
    i = int(np.argmax(power))
    f = _parabolic_peak(freqs, power, i)
    return 2 * math.pi * f


def _parabolic_peak(xs, ys, i):
    if i <= 0 or i >= len(ys) - 1:
        return float(xs[i])
    y0, y1, y2 = ys[i - 1], ys[i], ys[i + 1]
    denom = y0 - 2 * y1 + y2
    if denom == 0:
        return float(xs[i])
    shift = 0.5 * (y0 - y2) / denom
    shift = float(np.clip(shift, -1.0, 1.0))
    return float(xs[i] + shift * (xs[i + 1] - xs[i]))


def _unpack(data):
    if hasattr(data, "x") and hasattr(data, "p3_mean"):
        return (np.asarray(data.x, dtype=float),
                np.asarray(data.p3_mean, dtype=float),
                np.asarray(data.p3_stderr, dtype=float))
    if isinstance(data, tuple) and len(data) == 2:
        x, y = data
        return np.asarray(x, dtype=float), np.asarray(y, dtype=float), None
    if isinstance(data, tuple) and len(data) == 3:
        x, y, s = data
        return (np.asarray(x, dtype=float), np.asarray(y, dtype=float),
                None if s is None else np.asarray(s, dtype=float))
    raise ConfigError(f"cannot interpret fit data {type(data)!r}")
