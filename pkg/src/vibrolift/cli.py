"""Command-line front end.

Every subcommand writes machine-readable output: JSON summaries on stdout and
CSV or JSON tables in files. A JSON ``--config`` file may supply any option
by its long name (dashes or underscores); flags given on the command line
win over it. Exit status is 0 on success, 2 for invalid input and 3 for
runtime failures such as a diverging simulation.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import (DEFAULT_ALPHAS, NondimensionalPoint, feasibility_report, f_n_max,
                       optimal_f_n, sweep, v_ave_closed_form)
from .dynamics import (STANDARD_GRAVITY, FrictionPair, TransportConfig, period_displacements,
                       simulate, steady_state_velocity)
from .errors import NotConvergedError, ValidationError, VibroliftError
from .fitting import fit, load_trace
from .waveforms import (load_sampled_waveform, optimal_switch_fractions, optimal_waveform,
                        sawtooth_waveform)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_RUNTIME = 3


class _UsageError(ValidationError):
    pass


def _float_list(text):
    try:
        values = [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty list")
    return values


def _grid(text):
    """``start:stop:num`` (inclusive linspace) or a comma-separated list."""
    text = str(text)
    if ":" in text:
        parts = text.split(":")
        try:
            start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        except (ValueError, IndexError):
            raise argparse.ArgumentTypeError(f"grid must be start:stop:num, got {text!r}")
        if len(parts) != 3 or num < 1 or not stop >= start:
            raise argparse.ArgumentTypeError(f"grid must be start:stop:num, got {text!r}")
        return list(np.linspace(start, stop, num))
    return _float_list(text)


def _pair(text):
    values = _float_list(text)
    if len(values) != 2:
        raise argparse.ArgumentTypeError(f"expected lo,hi, got {text!r}")
    return values


def _add_physics(p, *, mus=0.7, need_alpha=True):
    g = p.add_argument_group("physical parameters")
    g.add_argument("--mus", type=float, default=mus, help="static friction coefficient")
    g.add_argument("--muk", type=float, default=0.6, help="kinetic friction coefficient")
    g.add_argument("--fn", type=float, default=5.0, help="normal force per part weight")
    if need_alpha:
        g.add_argument("--alpha", type=float, default=10.0, help="a_max / g")
    g.add_argument("--period", type=float, default=0.05, help="drive period (s)")
    g.add_argument("--mass", type=float, default=0.009, help="part mass (kg)")
    g.add_argument("--gravity", type=float, default=STANDARD_GRAVITY, help="(m/s^2)")
    g.add_argument("--dual-surface", action="store_true",
                   help="part squeezed between two surfaces moving together")


def _add_output(p, formats=("csv", "json")):
    p.add_argument("--out", type=Path, help="output file")
    p.add_argument("--format", choices=formats, default=formats[0])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vibrolift", description=__doc__.split("\n\n")[0])
    parser.add_argument("--config", type=Path, help="JSON file with option defaults")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate a part and summarise its transport")
    _add_physics(p)
    p.add_argument("--waveform", choices=("optimal", "sawtooth", "file"), default="optimal")
    p.add_argument("--waveform-file", type=Path, help="t,a samples for --waveform file")
    p.add_argument("--margin", type=float, default=1.0,
                   help="scale on the optimal rise acceleration")
    p.add_argument("--up-fraction", type=float, default=0.8, help="sawtooth rise fraction")
    p.add_argument("--up-accel", type=float, help="sawtooth rise acceleration / g")
    p.add_argument("--periods", type=int, default=20)
    p.add_argument("--steps", type=int, default=2000, help="output samples per period")
    _add_output(p)
    p.set_defaults(handler=cmd_simulate)

    p = sub.add_parser("sweep", help="tabulate closed-form velocity over (alpha, f_n)")
    p.add_argument("--mus", type=float, default=0.7)
    p.add_argument("--muk", type=float, default=0.6)
    p.add_argument("--alphas", type=_grid, default=list(DEFAULT_ALPHAS))
    p.add_argument("--fn-grid", type=_grid, default="1:40:400")
    p.add_argument("--verify-sim", type=int, default=0,
                   help="cross-check this many random feasible points by simulation")
    p.add_argument("--period", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    _add_output(p)
    p.set_defaults(handler=cmd_sweep)

    p = sub.add_parser("optimal-fn", help="normal force maximising transport speed")
    p.add_argument("--mus", type=float, default=0.7)
    p.add_argument("--muk", type=float, default=0.6)
    p.add_argument("--alpha", type=float, default=10.0)
    p.set_defaults(handler=cmd_optimal_fn)

    p = sub.add_parser("feasibility", help="check the necessary transport bounds")
    p.add_argument("--mus", type=float, default=0.7)
    p.add_argument("--muk", type=float, default=0.6)
    p.add_argument("--fn", type=float, default=5.0)
    p.add_argument("--alpha", type=float, default=10.0)
    p.set_defaults(handler=cmd_feasibility)

    p = sub.add_parser("fit", help="calibrate mu_k and normal forces from traces")
    p.add_argument("traces", nargs="*", type=Path, help="trace files")
    p.add_argument("--mus", type=float, default=0.72)
    p.add_argument("--mass", type=float, default=0.009)
    p.add_argument("--gravity", type=float, default=STANDARD_GRAVITY)
    p.add_argument("--muk-bounds", type=_pair, default=[0.1, None])
    p.add_argument("--fn-bounds", type=_pair, default=[0.01, 5.0],
                   help="normal force search range (N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--particles", type=int, default=60)
    p.add_argument("--max-iter", type=int, default=200)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--smooth", type=int, default=5)
    p.add_argument("--upsample", type=int, default=8)
    _add_output(p, formats=("json",))
    p.set_defaults(handler=cmd_fit)
    return parser


def _subparser(parser, name):
    for action in parser._subparsers._group_actions:
        if name in action.choices:
            return action.choices[name]
    raise KeyError(name)


def _apply_config(parser, argv):
    """Load ``--config`` and install its values as subcommand defaults."""
    first, _ = parser.parse_known_args(argv)
    if first.config is None:
        return
    try:
        data = json.loads(first.config.read_text())
    except OSError as exc:
        raise _UsageError(f"cannot read config {first.config}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise _UsageError(f"{first.config}: invalid JSON ({exc})") from None
    if not isinstance(data, dict):
        raise _UsageError(f"{first.config}: top level must be an object")
    sub = _subparser(parser, first.command)
    known = {a.dest: a for a in sub._actions if a.dest not in ("help", "handler")}
    defaults = {}
    for key, value in data.items():
        dest = key.replace("-", "_")
        if dest not in known:
            raise _UsageError(f"{first.config}: unknown key {key!r} for {first.command}")
        action = known[dest]
        if action.type is not None and value is not None and not isinstance(value, list):
            try:
                value = action.type(value)
            except (argparse.ArgumentTypeError, ValueError, TypeError) as exc:
                raise _UsageError(f"{first.config}: bad value for {key!r}: {exc}") from None
        if action.choices is not None and value not in action.choices:
            raise _UsageError(f"{first.config}: {key!r} must be one of {list(action.choices)}")
        defaults[dest] = value
    sub.set_defaults(**defaults)


def _emit(obj, stream=None):
    print(json.dumps(obj, indent=2, sort_keys=True), file=stream or sys.stdout)


def _transport_config(args, with_alpha=True):
    m_eff = args.mass / 2 if args.dual_surface else args.mass
    if not (args.fn > 0 and math.isfinite(args.fn)):
        raise ValidationError(f"--fn must be positive, got {args.fn}")
    a_max = args.alpha * args.gravity if with_alpha and args.alpha is not None else None
    return TransportConfig(part_mass=args.mass, normal_force=args.fn * m_eff * args.gravity,
                           gravity=args.gravity, a_max=a_max, period=args.period,
                           dual_surface=args.dual_surface)


def _write_trajectory(traj, path, fmt):
    if fmt == "csv":
        traj.to_csv(path)
        return
    labels = {0: "Sticking", 1: "SlippingUp", 2: "SlippingDown"}
    data = {"t": traj.t.tolist(), "z_S": traj.z_s.tolist(), "v_S": traj.v_s.tolist(),
            "a_S": traj.a_s.tolist(), "z_P": traj.z_p.tolist(), "v_P": traj.v_p.tolist(),
            "mode": [labels[int(m)] for m in traj.mode]}
    Path(path).write_text(json.dumps(data))


def cmd_simulate(args) -> int:
    fric = FrictionPair(args.mus, args.muk)
    if args.periods < 4:
        raise ValidationError("--periods must be at least 4")
    extra = {}
    if args.waveform == "file":
        if args.waveform_file is None:
            raise _UsageError("--waveform file needs --waveform-file")
        waveform = load_sampled_waveform(args.waveform_file)
        args.period = waveform.period
        cfg = _transport_config(args)
    elif args.waveform == "sawtooth":
        cfg = _transport_config(args)
        up = args.up_accel
        if up is None:
            up = 0.9 * max(fric.mu_s * cfg.f_n - 1, 0.0)
        waveform = sawtooth_waveform(cfg, args.up_fraction, up * args.gravity, fric)
    else:
        cfg = _transport_config(args)
        waveform = optimal_waveform(fric, cfg, margin=args.margin)
        t1, t2 = optimal_switch_fractions(fric, cfg.f_n, cfg.alpha)
        extra = {"T1_over_T": t1, "T2_over_T": t2,
                 "v_norm_closed_form": v_ave_closed_form(NondimensionalPoint.from_config(fric, cfg))}

    traj = simulate(waveform, fric, cfg, args.periods, steps_per_period=args.steps)
    warmup = min(10, args.periods - 3)
    try:
        v_ave = steady_state_velocity(traj, warmup=warmup)
        converged = True
    except NotConvergedError:
        v_ave = float(period_displacements(traj)[-3:].mean() / traj.period)
        converged = False
    gT = cfg.gravity * waveform.period
    summary = {
        "waveform": waveform.name,
        "f_n": cfg.f_n,
        "alpha": cfg.alpha if cfg.a_max is not None else None,
        "v_ave": v_ave,
        "v_norm": v_ave / gT if gT > 0 else None,
        "converged": converged,
        "mode_fractions": traj.mode_fractions(),
        "min_part_velocity": float(traj.v_p.min()),
        "final_part_position": float(traj.z_p[-1]),
        **extra,
    }
    if cfg.a_max is not None and cfg.gravity > 0:
        summary["violated_bounds"] = feasibility_report(
            NondimensionalPoint.from_config(fric, cfg)).violated
    if args.out is not None:
        _write_trajectory(traj, args.out, args.format)
        summary["trajectory"] = str(args.out)
    _emit(summary)
    return EXIT_OK


def cmd_sweep(args) -> int:
    fric = FrictionPair(args.mus, args.muk)
    result = sweep(fric, args.alphas, args.fn_grid, verify_sim=args.verify_sim,
                   seed=args.seed, period=args.period)
    summary = result.optimum_summary()
    summary["rows"] = len(result.alphas) * len(result.f_n)
    if args.format == "json":
        table = result.to_json() + "\n"
    else:
        lines = []
        _csv_rows(lines, result)
        table = "".join(lines)
    if args.out is not None:
        Path(args.out).write_text(table)
        _emit(summary)
    else:
        sys.stdout.write(table)
        _emit(summary, sys.stderr)
    return EXIT_OK


def _csv_rows(lines, result):
    class _Sink:
        def write(self, s):
            lines.append(s)

    writer = csv.writer(_Sink(), lineterminator="\n")
    writer.writerow(["alpha", "f_n", "v_norm", "feasible"])
    for a, f, v, ok in result.rows():
        writer.writerow([repr(a), repr(f), repr(v), int(ok)])


def cmd_optimal_fn(args) -> int:
    fric = FrictionPair(args.mus, args.muk)
    f_star, v_star = optimal_f_n(args.alpha, fric)
    t1, t2 = optimal_switch_fractions(fric, f_star, args.alpha)
    _emit({"alpha": args.alpha, "mu_s": fric.mu_s, "mu_k": fric.mu_k, "f_n_star": f_star,
           "v_norm_star": v_star, "f_n_min": 1 / fric.mu_s,
           "f_n_max": f_n_max(args.alpha, fric.mu_k), "T1_over_T": t1, "T2_over_T": t2})
    return EXIT_OK


def cmd_feasibility(args) -> int:
    report = feasibility_report(NondimensionalPoint(args.fn, args.alpha, args.mus, args.muk))
    data = report.to_dict()
    data["violated"] = report.violated
    data["v_norm_closed_form"] = v_ave_closed_form(report.point)
    _emit(data)
    return EXIT_OK


def cmd_fit(args) -> int:
    if not args.traces:
        raise _UsageError("fit needs at least one trace file")
    traces = []
    for path in args.traces:
        try:
            trace = load_trace(path)
        except OSError as exc:
            raise ValidationError(f"{path}: {exc.strerror}") from None
        trace.name = str(path)
        traces.append(trace)
    lo, hi = args.muk_bounds
    result = fit(traces, mu_s=args.mus, part_mass=args.mass, gravity=args.gravity,
                 mu_k_bounds=(lo, hi), normal_force_bounds=tuple(args.fn_bounds),
                 seed=args.seed, smooth=args.smooth, upsample=args.upsample,
                 n_particles=args.particles, max_iter=args.max_iter, restarts=args.restarts)
    report = result.to_json() + "\n"
    if args.out is not None:
        Path(args.out).write_text(report)
        _emit({"mu_k": result.mu_k, "normal_forces": [float(f) for f in result.normal_forces],
               "mean_normalized_error": float(np.mean(result.normalized_errors)),
               "report": str(args.out)})
    else:
        sys.stdout.write(report)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        try:
            _apply_config(parser, argv)
            args = parser.parse_args(argv)
        except SystemExit as exc:  # usage errors and --help
            return exc.code if isinstance(exc.code, int) else EXIT_VALIDATION
        return args.handler(args)
    except ValidationError as exc:
        print(f"vibrolift: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except VibroliftError as exc:
        print(f"vibrolift: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"vibrolift: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
