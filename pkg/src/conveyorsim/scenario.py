"""Scenario files: a flat, typed key = value format with one section per
subsystem and explicit unit suffixes on every physical quantity.

Values are kept verbatim as canonical strings, so a scenario round-trips
through parse/format byte-for-byte. The schema is versioned; unknown
sections or keys are hard errors, reported with their full path.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ScenarioError
from .units import parse_quantity
from .trap import TrapConfig, derive_trap_params
from .shots import (ExperimentConfig, SweepSpec, DetectionModel, MixingLaserConfig,
                    TransportConfig, PointingNoise)

SCHEMA_VERSION = 1

# key -> (type, required, default-as-string-or-None)
# types: 'int', 'float', 'bool', 'str', 'choice:a|b', 'q:<si-unit>'
_SCHEMA = {
    None: {
        "schema": ("int", True, None),
        "name": ("str", True, None),
        "kind": ("choice:ramsey|echo|echo-visibility", True, None),
    },
    "trap": {
        "depth": ("q:J", True, None),
        "temperature": ("q:K", True, None),
        "wavelength": ("q:m", False, "1.064 um"),
        "effective_detuning": ("q:rad/s", False, "-64 THz"),
        "waist": ("q:m", False, "20 um"),
    },
    "sequence": {
        "detuning": ("q:rad/s", False, "0 Hz"),
        "sweep_start": ("q:s", False, None),
        "sweep_stop": ("q:s", False, None),
        "sweep_points": ("int", False, None),
        "tau_pi": ("q:s", False, None),
    },
    "atoms": {
        "shots_per_point": ("int", False, "30"),
        "atoms_per_shot": ("int", False, "50"),
        "atom_number_mode": ("choice:poisson|fixed", False, "poisson"),
        "prep_efficiency": ("float", False, "0.8"),
        "transfer_survival": ("float", False, "0.8"),
        "extra_survival": ("float", False, "1.0"),
        "truncate_at_depth": ("bool", False, "false"),
        "t1": ("q:s", False, None),
    },
    "detection": {
        "p_survive_f4": ("float", False, "0.01"),
        "p_survive_f3": ("float", False, "0.95"),
    },
    "noise": {
        "kind": ("choice:power-law", False, "power-law"),
        "sigma_at_ref": ("float", True, None),
        "ref_tau": ("q:s", True, None),
        "exponent": ("float", False, "0.5"),
        "scale": ("float", False, "1.0"),
    },
    "transport": {
        "distance": ("q:m", True, None),
        "leg_duration": ("q:s", True, None),
        "heating_phases": ("int", False, "64"),
    },
    "mixing": {
        "peak_rate": ("float", False, "2000"),   # 1/s
        "waist": ("q:m", False, "50 um"),
        "window": ("q:s", False, "3 ms"),
        "center": ("q:m", False, "0 m"),
    },
    "visibility": {
        "tau_pi_start": ("q:s", True, None),
        "tau_pi_stop": ("q:s", True, None),
        "tau_pi_points": ("int", True, None),
        "fringe_points": ("int", False, "16"),
        "fringe_periods": ("float", False, "1.25"),
        "extraction": ("choice:fit|peak-to-peak", False, "fit"),
    },
    "run": {
        "seed": ("int", False, "1"),
    },
    "analysis": {
        "fit": ("choice:none|ramsey|echo", False, "none"),
        "form": ("choice:paper|exact", False, "paper"),
    },
    "outputs": {
        "data": ("str", False, None),
        "fit": ("str", False, None),
        "plot": ("str", False, None),
    },
}

_OPTIONAL_SECTIONS = {"noise", "transport", "mixing", "visibility", "outputs", "analysis"}


@dataclass
class Scenario:
    """Parsed scenario: canonical strings per (section, key)."""

    top: dict = field(default_factory=dict)
    sections: dict = field(default_factory=dict)

    @property
    def name(self):
        return self.top.get("name", "")

    @property
    def kind(self):
        return self.top.get("kind", "")

    def get(self, section, key):
        table = self.top if section is None else self.sections.get(section, {})
        spec = _SCHEMA[section].get(key)
        if spec is None:
            raise ScenarioError(f"unknown key [{section}] {key}")
        typ, _req, default = spec
        raw = table.get(key, default)
        if raw is None:
            return None
        return _parse_value(section, key, typ, raw)


def _parse_value(section, key, typ, raw):
    path = f"[{section}] {key}" if section else key
    try:
        if typ == "int":
            return int(raw)
        if typ == "float":
            return float(raw)
        if typ == "bool":
            if raw.lower() in ("true", "yes", "1"):
                return True
            if raw.lower() in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        if typ == "str":
            return raw
        if typ.startswith("choice:"):
            options = typ.split(":", 1)[1].split("|")
            if raw not in options:
                raise ValueError(f"{raw!r} not one of {options}")
            return raw
        if typ.startswith("q:"):
            return parse_quantity(raw, typ.split(":", 1)[1])
    except ScenarioError:
        raise
    except Exception as exc:
        raise ScenarioError(f"{path}: cannot parse {raw!r} ({exc})") from None
    raise ScenarioError(f"{path}: unknown schema type {typ!r}")


def parse_scenario(text) -> Scenario:
    sc = Scenario()
    section = None
    for lineno, rawline in enumerate(text.splitlines(), start=1):
        line = rawline.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            if section not in _SCHEMA or section is None:
                raise ScenarioError(f"line {lineno}: unknown section [{section}]")
            sc.sections.setdefault(section, {})
            continue
        if "=" not in line:
            raise ScenarioError(f"line {lineno}: expected 'key = value', got {rawline!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        table = _SCHEMA[section]
        if key not in table:
            where = f"[{section}] " if section else ""
            raise ScenarioError(f"line {lineno}: unknown key {where}{key}")
        target = sc.top if section is None else sc.sections[section]
        if key in target:
            raise ScenarioError(f"line {lineno}: duplicate key {key}")
        # canonicalize by parsing now; keep the raw string for round-trips
        _parse_value(section, key, table[key][0], value)
        target[key] = value
    _validate(sc)
    return sc


def _validate(sc: Scenario):
    for key, (typ, required, default) in _SCHEMA[None].items():
        if required and key not in sc.top:
            raise ScenarioError(f"missing required key {key}")
    if sc.get(None, "schema") != SCHEMA_VERSION:
        raise ScenarioError(f"unsupported schema version {sc.top.get('schema')!r}")
    for section, table in _SCHEMA.items():
        if section is None:
            continue
        present = section in sc.sections
        if not present:
            if section in _OPTIONAL_SECTIONS or section in ("detection", "atoms", "run"):
                continue
            raise ScenarioError(f"missing required section [{section}]")
        for key, (typ, required, default) in table.items():
            if required and key not in sc.sections[section]:
                raise ScenarioError(f"missing required key [{section}] {key}")
    kind = sc.get(None, "kind")
    if kind in ("ramsey", "echo"):
        for key in ("sweep_start", "sweep_stop", "sweep_points"):
            if sc.get("sequence", key) is None:
                raise ScenarioError(f"kind {kind}: [sequence] {key} is required")
    if kind == "echo" and sc.get("sequence", "tau_pi") is None:
        raise ScenarioError("kind echo: [sequence] tau_pi is required")
    if kind == "echo-visibility" and "visibility" not in sc.sections:
        raise ScenarioError("kind echo-visibility: section [visibility] is required")


def format_scenario(sc: Scenario) -> str:
    lines = []
    for key in _SCHEMA[None]:
        if key in sc.top:
            lines.append(f"{key} = {sc.top[key]}")
    for section in _SCHEMA:
        if section is None or section not in sc.sections:
            continue
        lines.append("")
        lines.append(f"[{section}]")
        for key in _SCHEMA[section]:
            if key in sc.sections[section]:
                lines.append(f"{key} = {sc.sections[section][key]}")
    return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_scenario(fh.read())


def save_scenario(path, sc: Scenario):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(format_scenario(sc))


# ---------------------------------------------------------------------------
# building runtime objects

def power_law_sigma(sigma_at_ref, ref_tau, exponent):
    def sigma(tau):
        return sigma_at_ref * (tau / ref_tau) ** exponent
    return sigma


def build_experiment(sc: Scenario, seed_override=None) -> ExperimentConfig:
    trap = TrapConfig(
        depth_U0=sc.get("trap", "depth"),
        temperature_T=sc.get("trap", "temperature"),
        wavelength=sc.get("trap", "wavelength"),
        effective_detuning_Delta=sc.get("trap", "effective_detuning"),
        waist=sc.get("trap", "waist"),
    )
    kind = sc.get(None, "kind")
    if kind in ("ramsey", "echo"):
        grid = np.linspace(sc.get("sequence", "sweep_start"),
                           sc.get("sequence", "sweep_stop"),
                           sc.get("sequence", "sweep_points"))
        sweep = SweepSpec(kind=kind, values=tuple(grid),
                          tau_pi=sc.get("sequence", "tau_pi"))
    else:
        # placeholder window around the first tau_pi; the visibility driver
        # regenerates the sweep per point
        tau0 = sc.get("visibility", "tau_pi_start")
        sweep = _visibility_window(sc, trap, tau0)
    noise = None
    if "noise" in sc.sections:
        noise = PointingNoise(
            allan=power_law_sigma(sc.get("noise", "sigma_at_ref"),
                                  sc.get("noise", "ref_tau"),
                                  sc.get("noise", "exponent")),
            scale=sc.get("noise", "scale"))
    transport = None
    if "transport" in sc.sections:
        transport = TransportConfig(
            distance=sc.get("transport", "distance"),
            leg_duration=sc.get("transport", "leg_duration"),
            heating_phases=sc.get("transport", "heating_phases"))
    mixing = None
    if "mixing" in sc.sections:
        mixing = MixingLaserConfig(
            scattering_rate_peak=sc.get("mixing", "peak_rate"),
            waist=sc.get("mixing", "waist"),
            window_duration=sc.get("mixing", "window"),
            center_position=sc.get("mixing", "center"))
    seed = seed_override if seed_override is not None else sc.get("run", "seed")
    return ExperimentConfig(
        trap=trap,
        sweep=sweep,
        detuning=sc.get("sequence", "detuning"),
        shots_per_point=sc.get("atoms", "shots_per_point"),
        atoms_per_shot=sc.get("atoms", "atoms_per_shot"),
        atom_number_mode=sc.get("atoms", "atom_number_mode"),
        prep_efficiency=sc.get("atoms", "prep_efficiency"),
        transfer_survival=sc.get("atoms", "transfer_survival"),
        extra_survival=sc.get("atoms", "extra_survival"),
        detection=DetectionModel(
            p_survive_given_F4=sc.get("detection", "p_survive_f4"),
            p_survive_given_F3=sc.get("detection", "p_survive_f3")),
        noise=noise,
        transport=transport,
        mixing=mixing,
        t1=sc.get("atoms", "t1"),
        truncate_at_depth=sc.get("atoms", "truncate_at_depth"),
        seed=seed,
    )


def _visibility_window(sc: Scenario, trap, tau_pi):
    params = derive_trap_params(trap)
    fringe = abs(sc.get("sequence", "detuning") + params.delta0)
    if fringe == 0:
        raise ScenarioError("echo-visibility scenario needs a nonzero fringe frequency")
    period = 2 * math.pi / fringe
    half = sc.get("visibility", "fringe_periods") * period
    pts = sc.get("visibility", "fringe_points")
    grid = np.linspace(2 * tau_pi - half, 2 * tau_pi + half, pts)
    return SweepSpec(kind="echo", values=tuple(grid), tau_pi=float(tau_pi))


def visibility_tau_grid(sc: Scenario):
    return np.linspace(sc.get("visibility", "tau_pi_start"),
                       sc.get("visibility", "tau_pi_stop"),
                       sc.get("visibility", "tau_pi_points"))


# ---------------------------------------------------------------------------
# presets

def _scenario_from(text) -> Scenario:
    return parse_scenario(text)


# Trap temperatures are inferred values: they reproduce the target
# reversible dephasing times T2* through K = 2 hbar / (|eta| k_B T).
PRESETS = {
    # Ramsey scan in the 1.0 mK trap; T chosen for T2* = 0.86 ms,
    # scan window 0..2 ms at ~8 points per fringe. Peak P3 ~ 0.6 from
    # 0.8 pumping x 0.8 transfer x 0.95 detection survival.
    "fig1a": """\
schema = 1
name = fig1a
kind = ramsey

[trap]
depth = 1.0 mK
temperature = 0.20653 mK

[sequence]
detuning = 0 Hz
sweep_start = 0 ms
sweep_stop = 1.6 ms
sweep_points = 41

[run]
seed = 20030411

[analysis]
fit = ramsey

[outputs]
data = fig1a_data.csv
fit = fig1a_fit.json
plot = fig1a_plot.svg
""",
    # Ramsey scan in the lowered 0.04 mK trap; T gives T2* = 18.9 ms and
    # the extra 0.5 survival models the hot-atom loss while lowering,
    # which caps P3 near 0.3.
    "fig1b": """\
schema = 1
name = fig1b
kind = ramsey

[trap]
depth = 0.04 mK
temperature = 9.3976 uK

[sequence]
detuning = 0 Hz
sweep_start = 0 ms
sweep_stop = 35 ms
sweep_points = 36

[atoms]
extra_survival = 0.5

[run]
seed = 20030412

[analysis]
fit = ramsey

[outputs]
data = fig1b_data.csv
fit = fig1b_fit.json
plot = fig1b_plot.svg
""",
    # Echo visibility decay in the 0.04 mK trap under pointing noise
    # (power-law Allan deviation, 1% at 200 ms; the measured envelope
    # reached a few percent beyond 100 ms, well-overlapped beams sit
    # lower). Echoes stay pronounced out to 2 tau_pi = 300 ms.
    "fig1c": """\
schema = 1
name = fig1c
kind = echo-visibility

[trap]
depth = 0.04 mK
temperature = 9.3976 uK

[sequence]
detuning = -400 Hz

[noise]
sigma_at_ref = 0.01
ref_tau = 200 ms

[visibility]
tau_pi_start = 15 ms
tau_pi_stop = 150 ms
tau_pi_points = 6

[run]
seed = 20030413

[outputs]
data = fig1c_visibility.csv
plot = fig1c_plot.svg
""",
    # Echo in the 0.1 mK transport trap with the state-mixing beam on and
    # the atoms left in place: the beam sits on them and erases the fringe.
    "fig3a": """\
schema = 1
name = fig3a
kind = echo

[trap]
depth = 0.1 mK
temperature = 0.02 mK

[sequence]
detuning = -400 Hz
sweep_start = 14.2 ms
sweep_stop = 17.8 ms
sweep_points = 16
tau_pi = 8 ms

[atoms]
shots_per_point = 150

[noise]
sigma_at_ref = 0.005
ref_tau = 200 ms

[mixing]

[run]
seed = 20030414

[analysis]
fit = echo

[outputs]
data = fig3a_data.csv
fit = fig3a_fit.json
plot = fig3a_plot.svg
""",
    # Same echo with the atoms moved 1 mm away while the mixing beam is
    # on: the fringe survives the round trip.
    "fig3b": """\
schema = 1
name = fig3b
kind = echo

[trap]
depth = 0.1 mK
temperature = 0.02 mK

[sequence]
detuning = -400 Hz
sweep_start = 14.2 ms
sweep_stop = 17.8 ms
sweep_points = 16
tau_pi = 8 ms

[atoms]
shots_per_point = 150

[noise]
sigma_at_ref = 0.005
ref_tau = 200 ms

[transport]
distance = 1 mm
leg_duration = 2 ms

[mixing]

[run]
seed = 20030415

[analysis]
fit = echo

[outputs]
data = fig3b_data.csv
fit = fig3b_fit.json
plot = fig3b_plot.svg
""",
    # Echo visibility decay with transport: bang-bang heating shortens the
    # coherence time relative to the fixed-trap case.
    "fig3c": """\
schema = 1
name = fig3c
kind = echo-visibility

[trap]
depth = 0.1 mK
temperature = 0.02 mK

[sequence]
detuning = -400 Hz

[noise]
sigma_at_ref = 0.005
ref_tau = 200 ms

[transport]
distance = 1 mm
leg_duration = 2 ms

[mixing]

[visibility]
tau_pi_start = 7 ms
tau_pi_stop = 100 ms
tau_pi_points = 8

[run]
seed = 20030416

[outputs]
data = fig3c_visibility.csv
plot = fig3c_plot.svg
""",
}


def preset_names():
    return sorted(PRESETS)


def load_preset(name) -> Scenario:
    try:
        text = PRESETS[name]
    except KeyError:
        raise ScenarioError(
            f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None
    return parse_scenario(text)
