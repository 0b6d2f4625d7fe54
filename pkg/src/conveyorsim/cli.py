"""Command-line interface.

Subcommands: simulate, fit, allan, transport, plot, presets.
Exit codes: 0 success, 2 configuration error, 3 numeric/convergence error,
4 I/O error. The default output directory comes from --out or the
CONVEYORSIM_OUT environment variable, falling back to the working directory.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from .errors import ConfigError, NumericError, ScenarioError
from .units import parse_quantity
from . import scenario as scen
from .shots import (run_experiment, run_visibility_series, write_dataset_csv,
                    read_dataset_csv, write_visibility_csv)
from .noise import read_noise_record, allan_deviation_curve, write_allan_curve
from .trap import TrapConfig, derive_trap_params
from .transport import (make_accel_profile, heating_stats, orbit_states,
                        integrate_trajectory, atom_state, write_trajectory_csv)
from .fitting import fit_ramsey, fit_echo
from .plotting import plot_dataset, plot_visibility

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_IO = 4


def _out_dir(args):
    out = args.out or os.environ.get("CONVEYORSIM_OUT") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_presets(args):
    if args.action == "list":
        for name in scen.preset_names():
            sc = scen.load_preset(name)
            print(f"{name:8s} {sc.kind}")
        return EXIT_OK
    sc = scen.load_preset(args.name)
    sys.stdout.write(scen.format_scenario(sc))
    return EXIT_OK


def _load_cli_scenario(args):
    if args.preset and args.scenario:
        raise ScenarioError("give either --scenario or --preset, not both")
    if args.preset:
        return scen.load_preset(args.preset)
    if args.scenario:
        return scen.load_scenario(args.scenario)
    raise ScenarioError("simulate needs --scenario FILE or --preset NAME")


def _cmd_simulate(args):
    sc = _load_cli_scenario(args)
    out = _out_dir(args)
    cfg = scen.build_experiment(sc, seed_override=args.seed)
    name = sc.name or "scenario"
    outputs = sc.sections.get("outputs", {})

    if sc.kind == "echo-visibility":
        taus = scen.visibility_tau_grid(sc)
        series = run_visibility_series(
            cfg, taus,
            fringe_periods=sc.get("visibility", "fringe_periods"),
            fringe_points=sc.get("visibility", "fringe_points"),
            extraction=sc.get("visibility", "extraction"),
            threads=args.threads)
        data_path = out / outputs.get("data", f"{name}_visibility.csv")
        write_visibility_csv(data_path, series)
        print(f"wrote {data_path}")
        for j, ds in enumerate(series.datasets):
            write_dataset_csv(out / f"{name}_scan{j:02d}.csv", ds)
        if "plot" in outputs:
            plot_path = out / outputs["plot"]
            plot_visibility(plot_path, series, title=name)
            print(f"wrote {plot_path}")
        return EXIT_OK

    data = run_experiment(cfg, threads=args.threads)
    data_path = out / outputs.get("data", f"{name}_data.csv")
    write_dataset_csv(data_path, data)
    print(f"wrote {data_path}")

    fit = None
    fit_kind = sc.get("analysis", "fit") if "analysis" in sc.sections else "none"
    if fit_kind and fit_kind != "none":
        form = sc.get("analysis", "form")
        if fit_kind == "ramsey":
            fit = fit_ramsey(data, model_form=form)
        else:
            fit = fit_echo(data, cfg.sweep.tau_pi, model_form=form)
        fit_path = out / outputs.get("fit", f"{name}_fit.json")
        with open(fit_path, "w", encoding="utf-8") as fh:
            fh.write(fit.to_json())
            fh.write("\n")
        print(fit.summary())
        print(f"wrote {fit_path}")
        if not fit.converged:
            raise NumericError(f"fit did not converge for {name}")
    if "plot" in outputs:
        plot_path = out / outputs["plot"]
        plot_dataset(plot_path, data, fit=fit, title=name)
        print(f"wrote {plot_path}")
    return EXIT_OK


def _cmd_fit(args):
    data = read_dataset_csv(args.data)
    if args.model == "ramsey":
        fit = fit_ramsey(data, model_form=args.form)
    else:
        if args.tau_pi is None:
            raise ConfigError("echo fits need --tau-pi")
        tau_pi = parse_quantity(args.tau_pi, "s")
        fit = fit_echo(data, tau_pi, model_form=args.form)
    print(fit.summary())
    out_path = Path(args.out) if args.out else Path(str(args.data) + ".fit.json")
    with open(out_path, "w", encoding="utf-8") as fh:
        fh.write(fit.to_json())
        fh.write("\n")
    print(f"wrote {out_path}")
    if not fit.converged:
        raise NumericError("fit did not converge")
    return EXIT_OK


def _cmd_allan(args):
    record = read_noise_record(args.record)
    taus = [parse_quantity(t, "s") for t in args.tau.split(",")]
    curve = allan_deviation_curve(record, taus)
    out_path = Path(args.out) if args.out else Path(str(args.record) + ".allan.csv")
    write_allan_curve(out_path, curve)
    for t, s in zip(curve.taus, curve.sigma_A):
        print(f"tau = {t:.6g} s: sigma_A = {s:.6g}")
    print(f"wrote {out_path}")
    return EXIT_OK


def _cmd_transport(args):
    depth = parse_quantity(args.depth, "J")
    temperature = parse_quantity(args.temperature, "K")
    trap = TrapConfig(depth_U0=depth, temperature_T=temperature)
    profile = make_accel_profile(parse_quantity(args.distance, "m"),
                                 parse_quantity(args.duration, "s"),
                                 kind=args.kind)
    e0 = args.e0_frac * depth
    stats = heating_stats(e0, args.phases, profile, trap)
    report = {
        "profile_kind": args.kind,
        "acceleration_mps2": 4 * parse_quantity(args.distance, "m")
                             / parse_quantity(args.duration, "s") ** 2,
        "jump_count": profile.jump_count(),
        "e0_over_U0": args.e0_frac,
        "n_phases": args.phases,
        "max_gain_over_U0": stats.max_gain / depth,
        "mean_gain_over_U0": stats.mean_gain / depth,
        "escaped_fraction": float(np.mean(stats.escaped)),
    }
    out = _out_dir(args)
    report_path = out / "transport_report.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(f"max dE/U0 = {report['max_gain_over_U0']:.4f}, "
          f"mean dE/U0 = {report['mean_gain_over_U0']:.4f} "
          f"over {args.phases} phases ({profile.jump_count()} jumps)")
    print(f"wrote {report_path}")

    z0, v0 = orbit_states(e0, max(args.phases, 1), trap)
    initial = atom_state(z0[0], v0[0], trap)
    _, traj, _ = integrate_trajectory(initial, profile, trap)
    traj_path = out / "transport_trajectory.csv"
    write_trajectory_csv(traj_path, traj)
    print(f"wrote {traj_path}")
    return EXIT_OK


def _cmd_plot(args):
    data = read_dataset_csv(args.data)
    fit = None
    if args.fit:
        with open(args.fit, "r", encoding="utf-8") as fh:
            fit = json.load(fh)
    out_path = Path(args.out) if args.out else Path(str(args.data) + ".svg")
    plot_dataset(out_path, data, fit=fit, title=Path(args.data).stem)
    print(f"wrote {out_path}")
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="conveyorsim",
        description="Simulate and analyze hyperfine-qubit coherence in a "
                    "standing-wave dipole trap, including trap transport.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario and write its data files")
    p.add_argument("--scenario", help="scenario file path")
    p.add_argument("--preset", help="built-in scenario name (see 'presets list')")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--threads", type=int, default=1,
                   help="worker threads over swept points (never changes results)")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("fit", help="fit a data CSV")
    p.add_argument("data")
    p.add_argument("--model", choices=("ramsey", "echo"), required=True)
    p.add_argument("--form", choices=("paper", "exact"), default="paper")
    p.add_argument("--tau-pi", default=None, help="echo pulse delay, e.g. '8 ms'")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("allan", help="Allan deviation of a beat-signal record")
    p.add_argument("record", help="CSV with header time_s,amplitude")
    p.add_argument("--tau", required=True, help="comma list of averaging times, e.g. '0.1 s,0.2 s'")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_allan)

    p = sub.add_parser("transport", help="bang-bang transport heating report")
    p.add_argument("--distance", default="1 mm")
    p.add_argument("--duration", default="2 ms", help="one leg")
    p.add_argument("--depth", default="0.1 mK")
    p.add_argument("--temperature", default="0.02 mK")
    p.add_argument("--e0-frac", type=float, default=0.3, help="initial energy / U0")
    p.add_argument("--phases", type=int, default=64)
    p.add_argument("--kind", choices=("bang-bang-one-way", "round-trip"),
                   default="round-trip")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_transport)

    p = sub.add_parser("plot", help="render a data CSV (and optional fit) to SVG")
    p.add_argument("data")
    p.add_argument("--fit", default=None, help="fit JSON to overlay")
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_plot)

    p = sub.add_parser("presets", help="list or show built-in scenarios")
    p.add_argument("action", choices=("list", "show"))
    p.add_argument("name", nargs="?", default=None)
    p.set_defaults(func=_cmd_presets)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "presets" and args.action == "show" and not args.name:
            raise ScenarioError("presets show needs a name")
        return args.func(args)
    except (ScenarioError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
