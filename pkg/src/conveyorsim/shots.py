"""Shot-level Monte-Carlo simulation of the full measurement chain.

One shot mirrors one experimental repetition: a batch of atoms is loaded
(Poisson-distributed count by default), each survives the transfer into
the standing-wave trap with a fixed probability, is optically pumped into
the clock state with the preparation efficiency (failures stay behind as
F=4 spectators that never respond to the microwaves), receives a thermal
energy and the matching differential light shift, and is evolved through
the pulse sequence. Homogeneous pointing noise enters an echo shot as a
single Gaussian detuning jump applied after the pi pulse, common to every
atom in the shot. Transport segments add heating drawn from a
phase-scanned energy-gain table and shift the light shift accordingly;
the state-mixing window collapses atoms near the beam with the integrated
scattering probability. Detection converts w into an F-state draw and
applies the push-out survival probabilities; P3 is the detected count
over the initial count, exactly as measured.

Reproducibility: every random draw comes from a stream derived from
(seed, point_index, shot_index), so results are bit-identical no matter
how points are distributed over worker threads.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict, replace

import numpy as np

from .errors import ConfigError
from .trap import TrapConfig, derive_trap_params, mean_lightshift
from .dephasing import EnsembleSpec, sample_energy
from .bloch import rotate_about_axis, rotate_about_w
from .noise import AllanCurve
from .transport import make_accel_profile, build_heating_table, AccelProfile


@dataclass(frozen=True)
class DetectionModel:
    """Push-out detection: survival probabilities by hyperfine state."""

    p_survive_given_F4: float = 0.01
    p_survive_given_F3: float = 0.95

    def __post_init__(self):
        for name in ("p_survive_given_F4", "p_survive_given_F3"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"DetectionModel.{name} must be in [0, 1], got {v!r}")
        if self.p_survive_given_F3 <= self.p_survive_given_F4:
            raise ConfigError("DetectionModel: F3 survival must exceed F4 survival")


@dataclass(frozen=True)
class MixingLaserConfig:
    scattering_rate_peak: float = 2e3   # 1/s (2 photons per ms)
    waist: float = 50e-6                # m
    window_duration: float = 3e-3       # s
    center_position: float = 0.0        # m, the preparation site

    def __post_init__(self):
        if self.scattering_rate_peak < 0:
            raise ConfigError("MixingLaserConfig.scattering_rate_peak must be >= 0")
        if self.waist <= 0:
            raise ConfigError("MixingLaserConfig.waist must be > 0")
        if self.window_duration < 0:
            raise ConfigError("MixingLaserConfig.window_duration must be >= 0")

    def rate_at(self, z):
        dz = np.asarray(z) - self.center_position
        return self.scattering_rate_peak * np.exp(-2.0 * dz ** 2 / self.waist ** 2)


@dataclass(frozen=True)
class TransportConfig:
    """Out-and-back displacement wrapped around the pi pulse."""

    distance: float = 1e-3      # m
    leg_duration: float = 2e-3  # s
    heating_phases: int = 64
    heating_dt: float | None = None

    def __post_init__(self):
        if self.distance <= 0:
            raise ConfigError("TransportConfig.distance must be > 0")
        if self.leg_duration <= 0:
            raise ConfigError("TransportConfig.leg_duration must be > 0")
        if self.heating_phases < 8:
            raise ConfigError("TransportConfig.heating_phases must be >= 8")

    def out_profile(self) -> AccelProfile:
        return make_accel_profile(self.distance, self.leg_duration, "bang-bang-one-way")

    def back_profile(self) -> AccelProfile:
        return self.out_profile().mirrored()


@dataclass(frozen=True)
class PointingNoise:
    """Trap-depth fluctuation inputs: an Allan deviation curve (or callable
    tau -> sigma_A) plus a misalignment multiplier for worst-case studies."""

    allan: object
    scale: float = 1.0

    def sigma_A(self, tau):
        if isinstance(self.allan, AllanCurve):
            return self.scale * self.allan.interpolate(tau)
        return self.scale * float(self.allan(tau))


@dataclass(frozen=True)
class SweepSpec:
    kind: str             # 'ramsey' or 'echo'
    values: tuple         # delay grid t (s), strictly increasing
    tau_pi: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if self.kind not in ("ramsey", "echo"):
            raise ConfigError(f"SweepSpec.kind must be 'ramsey' or 'echo', got {self.kind!r}")
        if len(self.values) == 0:
            raise ConfigError("SweepSpec.values must be non-empty")
        if any(b <= a for a, b in zip(self.values, self.values[1:])):
            raise ConfigError("SweepSpec.values must be strictly increasing")
        if self.kind == "echo":
            if self.tau_pi is None or self.tau_pi <= 0:
                raise ConfigError("SweepSpec: echo sweeps need tau_pi > 0")


@dataclass(frozen=True)
class ExperimentConfig:
    trap: TrapConfig
    sweep: SweepSpec
    detuning: float = 0.0               # rad/s, microwave detuning
    shots_per_point: int = 30
    atoms_per_shot: int = 50
    atom_number_mode: str = "poisson"   # or 'fixed'
    prep_efficiency: float = 0.8
    transfer_survival: float = 0.8
    extra_survival: float = 1.0         # e.g. losses from lowering the trap
    detection: DetectionModel = field(default_factory=DetectionModel)
    noise: PointingNoise | None = None
    transport: TransportConfig | None = None
    mixing: MixingLaserConfig | None = None
    t1: float | None = None
    truncate_at_depth: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.shots_per_point < 1 or self.atoms_per_shot < 1:
            raise ConfigError("ExperimentConfig: counts must be >= 1")
        for name in ("prep_efficiency", "transfer_survival", "extra_survival"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"ExperimentConfig.{name} must be in [0, 1], got {v!r}")
        if self.atom_number_mode not in ("poisson", "fixed"):
            raise ConfigError(f"ExperimentConfig.atom_number_mode unknown: {self.atom_number_mode!r}")
        if self.t1 is not None and self.t1 <= 0:
            raise ConfigError("ExperimentConfig.t1 must be > 0 or None")
        if self.sweep.kind == "echo":
            self._segment_times()  # validates the layout

    def _segment_times(self):
        """Echo timing: pi/2 at 0, out leg right after it, pi at tau_pi,
        mixing window right after the pi pulse, back leg after the window,
        final pi/2 at the swept t. Raises when the pieces do not fit."""
        tau_pi = self.sweep.tau_pi
        t_leg = self.transport.leg_duration if self.transport else 0.0
        t_mix = self.mixing.window_duration if self.mixing else 0.0
        if tau_pi < t_leg:
            raise ConfigError(f"tau_pi = {tau_pi!r} shorter than the transport leg {t_leg!r}")
        t_min = tau_pi + t_mix + t_leg
        first = self.sweep.values[0]
        if first < t_min:
            raise ConfigError(
                f"echo scan start {first!r} s collides with the mixing window and "
                f"return transport (needs t >= {t_min!r} s)")
        return t_leg, t_mix


@dataclass
class DataSet:
    x: np.ndarray
    p3_mean: np.ndarray
    p3_stderr: np.ndarray
    atoms_detected: np.ndarray
    atoms_initial: np.ndarray
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# reproducible stream derivation

def rng_stream(seed, point_index, shot_index=None, atom_index=None):
    """Independent, reproducible generator for (seed, point, shot, atom).

    Streams are derived through SeedSequence spawn keys, so identical
    indices give identical streams regardless of execution order.
    """
    key = [int(point_index)]
    if shot_index is not None:
        key.append(int(shot_index))
    if atom_index is not None:
        key.append(int(atom_index))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(key))
    return np.random.default_rng(ss)


def derive_seed(seed, *key):
    """Stable 63-bit sub-seed for nested experiment runs."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)


# ---------------------------------------------------------------------------
# mixing collapse

def scatter_probability_along(trajectory_t, trajectory_z, cfg: MixingLaserConfig):
    """1 - exp(-integral of rate(z(t)) dt) along a stored trajectory."""
    t = np.asarray(trajectory_t, dtype=float)
    z = np.asarray(trajectory_z, dtype=float)
    if t.size < 2:
        raise ConfigError("scatter_probability_along: need at least 2 samples")
    integral = float(np.trapezoid(cfg.rate_at(z), t))
    return 1.0 - math.exp(-integral)


def mixing_collapse(state, trajectory, cfg: MixingLaserConfig, rng):
    """Apply the state-mixing laser to one atom.

    `trajectory` is (times, positions) over the mixing window. With the
    integrated scattering probability the state collapses to the fully
    mixed (0, 0, 0); otherwise it is returned unchanged.
    """
    from .bloch import BlochVector

    p = scatter_probability_along(trajectory[0], trajectory[1], cfg)
    if rng.random() < p:
        return BlochVector(0.0, 0.0, 0.0)
    return state


# ---------------------------------------------------------------------------
# experiment engine

_PULSE_AXIS = np.array([1.0, 0.0, 0.0])

_TABLE_CACHE = {}


def _cached_table(profile, trap, n_phases, dt):
    key = (profile.segments, trap.depth_U0, trap.wavelength,
           trap.constants.atom_mass, n_phases, dt)
    table = _TABLE_CACHE.get(key)
    if table is None:
        table = build_heating_table(profile, trap, n_phases=n_phases, dt=dt)
        _TABLE_CACHE[key] = table
    return table


def _heating_tables(cfg: ExperimentConfig):
    if cfg.transport is None:
        return None
    out = _cached_table(cfg.transport.out_profile(), cfg.trap,
                        cfg.transport.heating_phases, cfg.transport.heating_dt)
    back = _cached_table(cfg.transport.back_profile(), cfg.trap,
                         cfg.transport.heating_phases, cfg.transport.heating_dt)
    return out, back


def _build_timeline(cfg: ExperimentConfig, t):
    """Ordered events for one swept delay t. Events:
    ('pulse', area), ('free', dur), ('transport', dur, which, dz), ('mixing', dur)."""
    if cfg.sweep.kind == "ramsey":
        return (("pulse", math.pi / 2), ("free", t), ("pulse", math.pi / 2))
    tau_pi = cfg.sweep.tau_pi
    t_leg, t_mix = cfg._segment_times()
    ev = [("pulse", math.pi / 2)]
    if cfg.transport is not None:
        ev.append(("transport", t_leg, 0, cfg.transport.distance))
    ev.append(("free", tau_pi - t_leg))
    ev.append(("pulse", math.pi))
    if cfg.mixing is not None:
        ev.append(("mixing", t_mix))
    if cfg.transport is not None:
        ev.append(("transport", t_leg, 1, -cfg.transport.distance))
    ev.append(("free", t - tau_pi - t_mix - t_leg))
    ev.append(("pulse", math.pi / 2))
    return tuple(ev)


def _run_point(cfg: ExperimentConfig, params, point_index, tables):
    t = cfg.sweep.values[point_index]
    events = _build_timeline(cfg, t)
    U0 = cfg.trap.depth_U0
    ensemble = EnsembleSpec(
        temperature_T=cfg.trap.temperature_T,
        truncation_energy=U0 if cfg.truncate_at_depth else None,
        k_B=cfg.trap.constants.k_B)
    sigma_jump = 0.0
    if cfg.noise is not None and cfg.sweep.kind == "echo":
        sigma_jump = math.sqrt(2.0) * abs(params.delta0) * cfg.noise.sigma_A(cfg.sweep.tau_pi)

    detected_total = 0
    initial_total = 0
    for shot in range(cfg.shots_per_point):
        rng = rng_stream(cfg.seed, point_index, shot)
        if cfg.atom_number_mode == "poisson":
            n0 = int(rng.poisson(cfg.atoms_per_shot))
        else:
            n0 = cfg.atoms_per_shot
        initial_total += n0
        if n0 == 0:
            continue
        in_trap = rng.random(n0) < cfg.transfer_survival * cfg.extra_survival
        pumped = rng.random(n0) < cfg.prep_efficiency
        energies = np.atleast_1d(sample_energy(ensemble, rng, size=n0))
        delta_ls = np.asarray(mean_lightshift(energies, params))
        jump = float(rng.normal(0.0, sigma_jump)) if sigma_jump > 0 else 0.0

        states = np.zeros((n0, 3))
        states[:, 2] = -1.0
        alive = in_trap.copy()
        detuning = cfg.detuning + delta_ls     # per atom
        position = 0.0
        pi_seen = False

        for event in events:
            kind = event[0]
            if kind == "pulse":
                area = event[1]
                states = rotate_about_axis(states, _PULSE_AXIS, area)
                if area == math.pi:
                    pi_seen = True
                    if jump != 0.0:
                        detuning = detuning + jump
                continue
            dur = event[1]
            if dur > 0:
                states = rotate_about_w(states, detuning * dur)
                if cfg.t1 is not None:
                    states = states * math.exp(-dur / cfg.t1)
            if kind == "transport":
                _, _, which, dz = event
                table = tables[which]
                phase_idx = rng.integers(0, table.gains.shape[1], size=n0)
                gains, esc = table.sample(energies, phase_idx)
                energies = np.maximum(energies + gains, 0.0)
                alive &= ~esc & (energies < U0)
                delta_ls = np.asarray(mean_lightshift(np.minimum(energies, 2 * U0), params))
                detuning = cfg.detuning + delta_ls + (jump if pi_seen else 0.0)
                position += dz
            elif kind == "mixing":
                p_scatter = 1.0 - math.exp(-float(cfg.mixing.rate_at(position)) * dur)
                collapsed = rng.random(n0) < p_scatter
                states[collapsed] = 0.0

        w = states[:, 2]
        p_f3 = np.where(pumped, np.clip((w + 1.0) / 2.0, 0.0, 1.0), 0.0)
        is_f3 = rng.random(n0) < p_f3
        p_surv = np.where(is_f3, cfg.detection.p_survive_given_F3,
                          cfg.detection.p_survive_given_F4)
        detected = alive & (rng.random(n0) < p_surv)
        detected_total += int(detected.sum())

    p_hat = detected_total / initial_total if initial_total else 0.0
    p_eff = (detected_total + 1) / (initial_total + 2) if initial_total else 0.0
    stderr = math.sqrt(p_eff * (1.0 - p_eff) / initial_total) if initial_total else 0.0
    return detected_total, initial_total, p_hat, stderr


def run_experiment(cfg: ExperimentConfig, threads=1) -> DataSet:
    """Simulate the configured scan and return the per-point P3 data."""
    params = derive_trap_params(cfg.trap)
    tables = _heating_tables(cfg)
    n = len(cfg.sweep.values)

    def work(i):
        return _run_point(cfg, params, i, tables)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(work, range(n)))
    else:
        rows = [work(i) for i in range(n)]

    det = np.array([r[0] for r in rows], dtype=int)
    ini = np.array([r[1] for r in rows], dtype=int)
    p3 = np.array([r[2] for r in rows])
    err = np.array([r[3] for r in rows])
    return DataSet(x=np.array(cfg.sweep.values), p3_mean=p3, p3_stderr=err,
                   atoms_detected=det, atoms_initial=ini,
                   metadata=config_metadata(cfg))


@dataclass
class VisibilitySeries:
    tau_pi: np.ndarray
    visibility: np.ndarray
    visibility_err: np.ndarray
    fits: list
    datasets: list


def run_visibility_series(cfg: ExperimentConfig, tau_pis, fringe_periods=1.25,
                          fringe_points=16, extraction="fit", model_form="paper",
                          threads=1) -> VisibilitySeries:
    """Echo visibility versus tau_pi.

    For each tau_pi an echo fringe scan is simulated in a window around
    t = 2 tau_pi and the visibility extracted, either from the lineshape
    fit (amplitude over offset) or as a peak-to-peak contrast estimate.
    """
    from .fitting import fit_echo

    params = derive_trap_params(cfg.trap)
    fringe = abs(cfg.detuning + params.delta0)
    if fringe == 0:
        raise ConfigError("run_visibility_series: zero fringe frequency; "
                          "set a microwave detuning")
    period = 2 * math.pi / fringe
    half = fringe_periods * period
    vis, vis_err, fits, datasets = [], [], [], []
    for j, tau_pi in enumerate(tau_pis):
        grid = np.linspace(2 * tau_pi - half, 2 * tau_pi + half, fringe_points)
        sub = replace(cfg, sweep=SweepSpec("echo", tuple(grid), tau_pi=float(tau_pi)),
                      seed=derive_seed(cfg.seed, 7001, j))
        data = run_experiment(sub, threads=threads)
        datasets.append(data)
        if extraction == "fit":
            fit = fit_echo(data, tau_pi, model_form=model_form)
            fits.append(fit)
            vis.append(fit.extras["visibility"])
            vis_err.append(fit.extras["visibility_err"])
        elif extraction == "peak-to-peak":
            hi, lo = float(np.max(data.p3_mean)), float(np.min(data.p3_mean))
            denom = hi + lo
            vis.append((hi - lo) / denom if denom > 0 else 0.0)
            vis_err.append(float(np.mean(data.p3_stderr)) * 2 / max(denom, 1e-12))
            fits.append(None)
        else:
            raise ConfigError(f"unknown extraction {extraction!r}")
    return VisibilitySeries(tau_pi=np.asarray(tau_pis, dtype=float),
                            visibility=np.array(vis),
                            visibility_err=np.array(vis_err),
                            fits=fits, datasets=datasets)


# ---------------------------------------------------------------------------
# serialization

def config_metadata(cfg: ExperimentConfig) -> dict:
    md = asdict(cfg)
    md["noise"] = None if cfg.noise is None else {
        "scale": cfg.noise.scale,
        "allan": ("curve" if isinstance(cfg.noise.allan, AllanCurve) else "callable"),
    }
    return _jsonable(md)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.integer, np.floating)):
        return obj.item()
    return obj


def write_dataset_csv(path, data: DataSet):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("x_s,p3_mean,p3_stderr,n_detected,n_initial\n")
        for x, p, e, d, n in zip(data.x, data.p3_mean, data.p3_stderr,
                                 data.atoms_detected, data.atoms_initial):
            fh.write(f"{x:.12g},{p:.12g},{e:.12g},{int(d)},{int(n)}\n")
    meta_path = str(path) + ".meta.json"
    with open(meta_path, "w", encoding="utf-8") as fh:
        json.dump(data.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_dataset_csv(path) -> DataSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "x_s,p3_mean,p3_stderr,n_detected,n_initial":
            raise ConfigError(f"{path}: unexpected header {header!r}")
        rows = []
        for line in fh:
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 5:
                raise ConfigError(f"{path}: malformed row {line!r}")
            rows.append(parts)
    if not rows:
        raise ConfigError(f"{path}: empty data set")
    meta = {}
    try:
        with open(str(path) + ".meta.json", "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except FileNotFoundError:
        pass
    return DataSet(
        x=np.array([float(r[0]) for r in rows]),
        p3_mean=np.array([float(r[1]) for r in rows]),
        p3_stderr=np.array([float(r[2]) for r in rows]),
        atoms_detected=np.array([int(r[3]) for r in rows]),
        atoms_initial=np.array([int(r[4]) for r in rows]),
        metadata=meta)


def write_visibility_csv(path, series: VisibilitySeries):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("tau_pi_s,visibility,visibility_err\n")
        for t, v, e in zip(series.tau_pi, series.visibility, series.visibility_err):
            fh.write(f"{t:.12g},{v:.12g},{e:.12g}\n")
