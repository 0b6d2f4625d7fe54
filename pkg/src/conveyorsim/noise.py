"""Homogeneous dephasing: Allan statistics of the trap-beam beat signal,
pointing-noise synthesis, the Gaussian detuning-jump model, and the echo
visibility it predicts.

The beat-signal amplitude is proportional to the trap depth, so a relative
amplitude fluctuation sigma_A maps to a detuning fluctuation through the
full-depth light shift: sigma(tau_pi) = sqrt(2) * |delta0| * sigma_A(tau_pi),
the sqrt(2) coming from differencing the two averaging windows of the echo.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class NoiseRecord:
    """Uniformly sampled, normalized beat-signal amplitude (mean about 1)."""

    sample_period: float  # s
    samples: np.ndarray   # dimensionless

    def __post_init__(self):
        object.__setattr__(self, "samples", np.asarray(self.samples, dtype=float))
        if self.sample_period <= 0:
            raise ConfigError("NoiseRecord.sample_period must be > 0")
        if self.samples.ndim != 1 or self.samples.size < 2:
            raise ConfigError("NoiseRecord needs at least 2 samples")
        if not np.all(np.isfinite(self.samples)):
            raise ConfigError("NoiseRecord samples must all be finite")

    @property
    def duration(self):
        return self.sample_period * self.samples.size


@dataclass(frozen=True)
class AllanCurve:
    taus: np.ndarray     # s, strictly increasing
    sigma_A: np.ndarray  # dimensionless Allan deviation

    def __post_init__(self):
        object.__setattr__(self, "taus", np.asarray(self.taus, dtype=float))
        object.__setattr__(self, "sigma_A", np.asarray(self.sigma_A, dtype=float))
        if self.taus.ndim != 1 or self.taus.size != self.sigma_A.size:
            raise ConfigError("AllanCurve: taus and sigma_A must be 1D and equal length")
        if np.any(np.diff(self.taus) <= 0):
            raise ConfigError("AllanCurve: taus must be strictly increasing")
        if np.any(self.sigma_A < 0):
            raise ConfigError("AllanCurve: sigma_A must be >= 0")

    def interpolate(self, tau):
        """Log-log linear interpolation; extrapolation is refused."""
        if tau < self.taus[0] or tau > self.taus[-1]:
            raise NumericError(
                f"tau = {tau!r} s outside the Allan curve range "
                f"[{self.taus[0]!r}, {self.taus[-1]!r}]; refusing to extrapolate")
        if np.any(self.sigma_A <= 0):
            # zero deviations break the log map; fall back to linear
            return float(np.interp(tau, self.taus, self.sigma_A))
        return float(np.exp(np.interp(math.log(tau), np.log(self.taus),
                                      np.log(self.sigma_A))))


@dataclass(frozen=True)
class VisibilityModel:
    """Inputs of the echo-visibility prediction V(2 tau_pi)."""

    delta0: float          # rad/s
    V0: float = 1.0        # initial visibility
    allan: object = None   # AllanCurve or callable tau -> sigma_A
    sigma_scale: float = 1.0  # worst-case multiplier on sigma_A

    def __post_init__(self):
        if not 0.0 <= self.V0 <= 1.0:
            raise ConfigError("VisibilityModel.V0 must be in [0, 1]")
        if self.allan is None:
            raise ConfigError("VisibilityModel.allan must be an AllanCurve or callable")

    def sigma_A(self, tau):
        if isinstance(self.allan, AllanCurve):
            return self.sigma_scale * self.allan.interpolate(tau)
        return self.sigma_scale * float(self.allan(tau))


def allan_variance(record: NoiseRecord, tau):
    """Two-sample variance of adjacent non-overlapping bin averages:

        sigma_A^2(tau) = (1/m) * sum_k (xbar_{k+1} - xbar_k)^2 / 2

    with xbar_k the average over the k-th interval of length tau and
    m = (number of bins - 1). tau must be an integer multiple of the
    sample period and the record must span at least two bins.
    """
    n_per = tau / record.sample_period
    n_round = round(n_per)
    if n_round < 1 or abs(n_per - n_round) > 1e-6 * max(n_per, 1.0):
        raise ConfigError(
            f"tau = {tau!r} is not an integer multiple of the sample period "
            f"{record.sample_period!r}")
    n_bins = record.samples.size // n_round
    if n_bins < 2:
        raise ConfigError(
            f"record too short: {record.samples.size} samples give {n_bins} "
            f"bin(s) of width tau = {tau!r}")
    trimmed = record.samples[:n_bins * n_round]
    means = trimmed.reshape(n_bins, n_round).mean(axis=1)
    diffs = np.diff(means)
    return float(np.mean(diffs * diffs) / 2.0)


def allan_deviation(record: NoiseRecord, tau):
    return math.sqrt(allan_variance(record, tau))


def allan_deviation_curve(record: NoiseRecord, taus) -> AllanCurve:
    taus = np.asarray(sorted(taus), dtype=float)
    return AllanCurve(taus, np.array([allan_deviation(record, t) for t in taus]))


def synthesize_beat_record(kind, target, reference_tau, duration, sample_period,
                           rng) -> NoiseRecord:
    """Generate a normalized beat record whose Allan deviation at the
    reference tau equals `target`.

    kind: 'white' (sigma_A ~ 1/sqrt(tau)), 'random-walk' (sigma_A ~ sqrt(tau)),
    or 'band-limited' (white noise boxcar-smoothed over reference_tau / 4).
    The raw noise is rescaled so the re-estimated deviation at reference_tau
    matches the target exactly; the 20% self-check then holds by
    construction and is still asserted.
    """
    if target < 0:
        raise ConfigError("synthesize_beat_record: target must be >= 0")
    if duration < 10 * reference_tau:
        raise ConfigError("synthesize_beat_record: duration must be >= 10 * reference_tau")
    n = int(round(duration / sample_period))
    if n < 2:
        raise ConfigError("synthesize_beat_record: record would be shorter than 2 samples")
    if target == 0.0:
        return NoiseRecord(sample_period, np.ones(n))

    if kind == "white":
        raw = rng.standard_normal(n)
    elif kind == "random-walk":
        raw = np.cumsum(rng.standard_normal(n))
    elif kind == "band-limited":
        width = max(1, int(round(reference_tau / 4 / sample_period)))
        white = rng.standard_normal(n + width - 1)
        raw = np.convolve(white, np.ones(width) / width, mode="valid")
    else:
        raise ConfigError(f"unknown noise kind {kind!r}")

    raw = raw - raw.mean()
    probe = NoiseRecord(sample_period, 1.0 + raw)
    realized = allan_deviation(probe, reference_tau)
    if realized <= 0:
        raise NumericError(f"target {target!r} unreachable for kind {kind!r}")
    record = NoiseRecord(sample_period, 1.0 + raw * (target / realized))

    check = allan_deviation(record, reference_tau)
    if not (0.8 * target <= check <= 1.2 * target):
        raise NumericError(
            f"synthesized record misses the target: {check!r} vs {target!r}")
    return record


def sample_detuning_jump(sigma, rng, size=None):
    """Zero-mean Gaussian detuning difference between the echo halves (rad/s)."""
    if sigma < 0:
        raise ConfigError("sample_detuning_jump: sigma must be >= 0")
    if sigma == 0.0:
        return 0.0 if size is None else np.zeros(size)
    return rng.normal(0.0, sigma, size=size)


def detuning_sigma(tau_pi, model: VisibilityModel):
    """sigma(tau_pi) = sqrt(2) * |delta0| * sigma_A(tau_pi)."""
    return math.sqrt(2.0) * abs(model.delta0) * model.sigma_A(tau_pi)


def echo_visibility(tau_pi, model: VisibilityModel):
    """Predicted echo visibility V(2 tau_pi) = V0 * exp[-sigma_A^2 delta0^2 tau_pi^2].

    Equivalent to averaging -cos(d_delta * tau_pi) over the Gaussian jump
    distribution with sigma(tau_pi) = sqrt(2) |delta0| sigma_A(tau_pi).
    """
    if tau_pi < 0:
        raise ConfigError("echo_visibility: tau_pi must be >= 0")
    if tau_pi == 0.0:
        return model.V0
    sa = model.sigma_A(tau_pi)
    return model.V0 * math.exp(-(sa * model.delta0 * tau_pi) ** 2)


# ---------------------------------------------------------------------------
# CSV interchange

def write_noise_record(path, record: NoiseRecord):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("time_s,amplitude\n")
        for i, a in enumerate(record.samples):
            fh.write(f"{i * record.sample_period:.12g},{a:.12g}\n")


def read_noise_record(path) -> NoiseRecord:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "time_s,amplitude":
            raise ConfigError(f"{path}: expected header 'time_s,amplitude', got {header!r}")
        times, amps = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t_s, a_s = line.split(",")
            times.append(float(t_s))
            amps.append(float(a_s))
    if len(times) < 2:
        raise ConfigError(f"{path}: need at least 2 samples")
    periods = np.diff(times)
    if np.max(np.abs(periods - periods[0])) > 1e-6 * max(abs(periods[0]), 1e-12):
        raise ConfigError(f"{path}: samples are not uniformly spaced")
    return NoiseRecord(float(periods[0]), np.array(amps))


def write_allan_curve(path, curve: AllanCurve):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tau_s,sigma_A\n")
        for t, s in zip(curve.taus, curve.sigma_A):
            fh.write(f"{t:.12g},{s:.12g}\n")


def read_allan_curve(path) -> AllanCurve:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "tau_s,sigma_A":
            raise ConfigError(f"{path}: expected header 'tau_s,sigma_A', got {header!r}")
        taus, sig = [], []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            t_s, s_s = line.split(",")
            taus.append(float(t_s))
            sig.append(float(s_s))
    return AllanCurve(np.array(taus), np.array(sig))
