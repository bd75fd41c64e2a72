"""Command-line front end.

Subcommands ``df``, ``simulate``, ``harmonics`` and ``step`` write CSV data
files and one ``manifest.json`` per run into ``--out``.  Settings come from
built-in defaults, then an optional TOML ``--config`` file (top-level keys
for the global options, one table per subcommand), then flags.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

import argparse
import csv
import datetime
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import __version__
from .architectures import (ArchitectureA, ArchitectureB, DoubleIntegrator,
                            build_pid)
from .base import TimeSeries
from .describing import DfQuery, GammaSolveError, df_fractional
from .higs import FractionalHIGS, HigsParams, higs_response
from .simulation import (SimConfig, SimulationError, estimate_df,
                         harmonic_spectrum, linear_loop_oracle,
                         simulate_closed_loop, step_metrics)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

GLOBAL_DEFAULTS = {"out": ".", "dt": None, "duration": None, "parallel": 1}

DEFAULTS = {
    "df": {"filter": "higs", "alpha": [1.0], "wh": 1.0, "kh": 1.0, "wr": 1.0,
           "beta": 0.5, "ehat": 1.0, "wmin": 0.01, "wmax": 100.0, "points": 200,
           "source": "closed_form", "samples_per_period": 10_000},
    "simulate": {"filter": "higs", "input": "sine", "alpha": [1.0], "wh": 1.0,
                 "kh": 1.0, "wr": 1.0, "beta": 0.5, "omega": 1.0,
                 "amplitude": 1.0, "periods": 2.0, "memory": "full",
                 "samples_per_period": 10_000},
    "harmonics": {"alpha": [0.68], "beta": [0.5], "wh": 1.0, "kh": 1.0,
                  "wr": 1.0, "omega": 100.0, "ehat": 1.0, "n_max": 9,
                  "sweep_points": 0, "source": "empirical",
                  "samples_per_period": 10_000},
    "step": {"wc": 200 * math.pi, "alpha": [0.0, 0.5, 1.0], "mass": 1.0,
             "wr": None, "architecture": "a", "beta": None, "amplitude": 1.0,
             "oracle": False},
}
STEP_DT, STEP_DURATION = 1e-5, 0.2


class ConfigError(ValueError):
    pass


def _float_list(text):
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _global_options(parser, suppress):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, metavar="PATH",
                        help="TOML file mirroring the flags")
    parser.add_argument("--out", default=default, metavar="DIR",
                        help="output directory (default: current directory)")
    parser.add_argument("--dt", type=float, default=default, help="sample period [s]")
    parser.add_argument("--duration", type=float, default=default,
                        help="simulated time [s]")
    parser.add_argument("--parallel", type=int, default=default, metavar="N",
                        help="worker processes for independent runs")


def _filter_options(p, with_beta_list=False):
    p.add_argument("--alpha", type=_float_list, help="order(s), comma separated")
    p.add_argument("--wh", type=float, help="integral frequency omega_h")
    p.add_argument("--kh", type=float, help="gain value k_h")
    p.add_argument("--wr", type=float, help="architecture a cut-off omega_r")
    if with_beta_list:
        p.add_argument("--beta", type=_float_list, help="architecture b blend(s)")
    else:
        p.add_argument("--beta", type=float, help="architecture b blend")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="frachigs", description="Fractional-order HIGS analysis and simulation.")
    parser.add_argument("--version", action="version", version=__version__)
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("df", parents=[common], help="describing-function table")
    _filter_options(p)
    p.add_argument("--filter", choices=["higs", "a", "b"])
    p.add_argument("--ehat", type=float, help="input amplitude")
    p.add_argument("--wmin", type=float)
    p.add_argument("--wmax", type=float)
    p.add_argument("--points", type=int)
    p.add_argument("--source", choices=["closed_form", "empirical", "both"])
    p.add_argument("--samples-per-period", type=int, dest="samples_per_period")

    p = sub.add_parser("simulate", parents=[common], help="time-domain response")
    _filter_options(p)
    p.add_argument("--filter", choices=["higs", "a", "b"])
    p.add_argument("--input", choices=["sine", "multisine", "step"])
    p.add_argument("--omega", type=float, help="input frequency [rad/s]")
    p.add_argument("--amplitude", type=float)
    p.add_argument("--periods", type=float, help="duration in input periods")
    p.add_argument("--memory", choices=["full", "since_switch"])
    p.add_argument("--samples-per-period", type=int, dest="samples_per_period")

    p = sub.add_parser("harmonics", parents=[common], help="harmonic comparison")
    _filter_options(p, with_beta_list=True)
    p.add_argument("--omega", type=float)
    p.add_argument("--ehat", type=float)
    p.add_argument("--n-max", type=int, dest="n_max")
    p.add_argument("--sweep-points", type=int, dest="sweep_points",
                   help="alpha/beta grid size for the third-harmonic table")
    p.add_argument("--source", choices=["closed_form", "empirical"])
    p.add_argument("--samples-per-period", type=int, dest="samples_per_period")

    p = sub.add_parser("step", parents=[common], help="closed-loop step response")
    p.add_argument("--wc", type=float, help="crossover frequency [rad/s]")
    p.add_argument("--alpha", type=_float_list)
    p.add_argument("--mass", type=float)
    p.add_argument("--wr", type=float)
    p.add_argument("--architecture", choices=["a", "b"])
    p.add_argument("--beta", type=float)
    p.add_argument("--amplitude", type=float)
    p.add_argument("--oracle", action="store_true", default=None,
                   help="compare alpha=0 against the linear ODE oracle")
    return parser


def _load_config(path):
    if path is None:
        return {}
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from exc


def resolve(args):
    """Merge defaults, config file and flags into ``(globals, options)``."""
    cmd = args.command
    raw = _load_config(getattr(args, "config", None))
    known = set(GLOBAL_DEFAULTS) | set(DEFAULTS)
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    section = raw.get(cmd, {})
    if not isinstance(section, dict):
        raise ConfigError(f"[{cmd}] must be a table")
    bad = set(section) - set(DEFAULTS[cmd])
    if bad:
        raise ConfigError(f"unknown keys in [{cmd}]: {sorted(bad)}")
    glob = dict(GLOBAL_DEFAULTS)
    glob.update({k: raw[k] for k in GLOBAL_DEFAULTS if k in raw})
    glob.update({k: getattr(args, k) for k in GLOBAL_DEFAULTS
                 if getattr(args, k, None) is not None})
    opts = dict(DEFAULTS[cmd])
    opts.update(section)
    opts.update({k: getattr(args, k) for k in DEFAULTS[cmd]
                 if getattr(args, k, None) is not None})
    for key in ("alpha", "beta"):
        if isinstance(DEFAULTS[cmd].get(key), list) and not isinstance(opts[key], list):
            opts[key] = [opts[key]]
    _validate(glob, opts)
    return glob, opts


def _validate(glob, opts):
    if glob["dt"] is not None and not glob["dt"] > 0:
        raise ConfigError("dt must be positive")
    if glob["duration"] is not None and not glob["duration"] > 0:
        raise ConfigError("duration must be positive")
    if not isinstance(glob["parallel"], int) or glob["parallel"] < 1:
        raise ConfigError("parallel must be a positive integer")
    for a in opts.get("alpha") or []:
        if not 0.0 <= float(a) <= 1.0:
            raise ConfigError(f"alpha must lie in [0, 1], got {a}")
    beta = opts.get("beta")
    for b in (beta if isinstance(beta, list) else [beta]):
        if b is not None and not 0.0 <= float(b) <= 1.0:
            raise ConfigError(f"beta must lie in [0, 1], got {b}")
    for key in ("wh", "kh"):
        if key in opts and not opts[key] >= 0:
            raise ConfigError(f"{key} must be >= 0")
    for key in ("wr", "omega", "ehat", "amplitude", "mass", "wc", "wmin", "wmax"):
        if opts.get(key) is not None and key in opts and not opts[key] > 0:
            raise ConfigError(f"{key} must be positive")
    if "wmin" in opts and not opts["wmin"] < opts["wmax"]:
        raise ConfigError("wmin must be below wmax")
    for key in ("points", "n_max", "samples_per_period"):
        if key in opts and not int(opts[key]) >= 1:
            raise ConfigError(f"{key} must be >= 1")


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def _map(func, tasks, workers):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(func, tasks))
    return [func(t) for t in tasks]


def _make_filter(kind, alpha, opts, beta=None):
    if kind == "higs":
        return FractionalHIGS(opts["wh"], opts["kh"], alpha,
                              memory=opts.get("memory", "full"))
    if kind == "a":
        return ArchitectureA(opts["wh"], opts["kh"], alpha, opts["wr"])
    return ArchitectureB(opts["wh"], opts["kh"], opts["beta"] if beta is None else beta)


def _closed_form(kind, alpha, omega, opts, beta=None):
    if kind == "higs":
        pt = df_fractional(DfQuery(omega, opts["ehat"],
                                   HigsParams(opts["wh"], opts["kh"], alpha)))
        return pt.value, pt.gamma
    return _make_filter(kind, alpha, opts, beta).describing_function(omega, opts["ehat"]), math.nan


def _sine_config(omega, opts, glob):
    if glob["dt"] is None and glob["duration"] is None:
        return SimConfig.for_sine(omega, opts["samples_per_period"])
    dt = glob["dt"] or 2 * math.pi / (omega * opts["samples_per_period"])
    duration = glob["duration"] or 14 * 2 * math.pi / omega
    return SimConfig(dt, duration, 10)


def _df_task(task):
    kind, alpha, omega, source, opts, glob = task
    if source == "closed_form":
        value, gamma = _closed_form(kind, alpha, omega, opts)
    else:
        filt = _make_filter(kind, alpha, opts)
        value = estimate_df(filt, omega, opts["ehat"], _sine_config(omega, opts, glob)).value
        gamma = math.nan
    return alpha, omega, value, gamma, source


def cmd_df(glob, opts, out):
    omegas = np.logspace(math.log10(opts["wmin"]), math.log10(opts["wmax"]),
                         int(opts["points"]))
    sources = (["closed_form", "empirical"] if opts["source"] == "both"
               else [opts["source"]])
    tasks = [(opts["filter"], float(a), float(w), s, opts, glob)
             for s in sources for a in opts["alpha"] for w in omegas]
    rows = []
    for alpha, w, value, gamma, source in _map(_df_task, tasks, glob["parallel"]):
        mag = abs(value)
        rows.append((alpha, w, 20 * math.log10(mag) if mag > 0 else -math.inf,
                     math.degrees(math.atan2(value.imag, value.real)), gamma, source))
    path = _write_csv(out / "df.csv", ["alpha", "omega_rad_s", "mag_db", "phase_deg",
                                       "gamma_rad", "source"], rows)
    return [path], {}


def _input_signal(opts, glob):
    w, amp = opts["omega"], opts["amplitude"]
    dt = glob["dt"] or 2 * math.pi / (w * opts["samples_per_period"])
    duration = glob["duration"] or opts["periods"] * 2 * math.pi / w
    funcs = {
        "sine": lambda t: amp * np.sin(w * t),
        "multisine": lambda t: amp * (np.sin(w * t) + 0.7 * np.sin(3 * w * t)),
        "step": lambda t: amp * np.ones_like(t),
    }
    return TimeSeries.from_function(funcs[opts["input"]], duration, dt)


def _simulate_task(task):
    kind, alpha, opts, glob = task
    ts = _input_signal(opts, glob)
    if kind == "higs":
        out, events, modes = higs_response(HigsParams(opts["wh"], opts["kh"], alpha), ts,
                                           memory=opts["memory"], return_modes=True)
        u = out.values
    else:
        filt = _make_filter(kind, alpha, opts).fit(dt=ts.dt)
        u = filt.transform(ts.values)
        inner = filt.chain_.steps[0][1] if kind == "a" else filt.blend_.branches[0][1]
        modes = inner.modes_
    if not np.all(np.isfinite(u)):
        raise SimulationError("non-finite filter output")
    return alpha, ts, u, modes


def cmd_simulate(glob, opts, out):
    tasks = [(opts["filter"], float(a), opts, glob) for a in opts["alpha"]]
    files = []
    for alpha, ts, u, modes in _map(_simulate_task, tasks, glob["parallel"]):
        labels = np.where(modes, "integrator", "gain")
        rows = zip(ts.t, ts.values, u, labels)
        files.append(_write_csv(out / f"simulate_alpha_{alpha:g}.csv",
                                ["t", "e", "u", "mode"], rows))
    return files, {}


def _harmonic_task(task):
    kind, param, opts, glob = task
    alpha, beta = (param, None) if kind == "a" else (1.0, param)
    w, n_max = opts["omega"], int(opts["n_max"])
    filt = _make_filter(kind, alpha, opts, beta)
    if opts["source"] == "closed_form":
        coefs = {n: (filt.describing_function(w, opts["ehat"], n) if n % 2 else 0j)
                 for n in range(1, n_max + 1)}
    else:
        spec = harmonic_spectrum(filt, w, opts["ehat"], _sine_config(w, opts, glob), n_max)
        coefs = spec.harmonics
    return kind, param, coefs


def cmd_harmonics(glob, opts, out):
    tasks = ([("a", float(a), opts, glob) for a in opts["alpha"]]
             + [("b", float(b), opts, glob) for b in opts["beta"]])
    rows = []
    for kind, param, coefs in _map(_harmonic_task, tasks, glob["parallel"]):
        ref = abs(coefs[1])
        for n, c in sorted(coefs.items()):
            rows.append((kind, param, n, abs(c), abs(c) / ref if ref > 0 else math.nan,
                         math.degrees(math.atan2(c.imag, c.real))))
    files = [_write_csv(out / "harmonics.csv",
                        ["architecture", "parameter", "n", "magnitude",
                         "relative_magnitude", "phase_deg"], rows)]
    k = int(opts["sweep_points"])
    if k > 0:
        grid = np.linspace(0.0, 1.0, k + 1)[1:]
        sweep = dict(opts, n_max=3)
        tasks = ([("a", float(a), sweep, glob) for a in grid]
                 + [("b", float(b), sweep, glob) for b in grid])
        rows = []
        for kind, param, coefs in _map(_harmonic_task, tasks, glob["parallel"]):
            c1, c3 = coefs[1], coefs[3]
            rows.append((kind, param, math.degrees(math.atan2(c1.imag, c1.real)),
                         abs(c3) / abs(c1)))
        files.append(_write_csv(out / "third_harmonic.csv",
                                ["architecture", "parameter", "phase_deg",
                                 "third_relative"], rows))
    return files, {}


def _pid(alpha, opts):
    return build_pid(opts["wc"], alpha, omega_r=opts["wr"],
                     architecture=opts["architecture"], beta=opts["beta"])


def _step_task(task):
    alpha, opts, glob = task
    dt = glob["dt"] or STEP_DT
    duration = glob["duration"] or STEP_DURATION
    cfg = SimConfig(dt, duration, 0)
    amp = opts["amplitude"]
    ref = TimeSeries.from_function(lambda t: amp * np.ones_like(t), duration, dt)
    y, _ = simulate_closed_loop(_pid(alpha, opts), DoubleIntegrator(opts["mass"]), ref, cfg)
    return alpha, y, step_metrics(y, amp)


def cmd_step(glob, opts, out):
    tasks = [(float(a), opts, glob) for a in opts["alpha"]]
    results = _map(_step_task, tasks, glob["parallel"])
    t = results[0][1].t
    cols = [r[1].values for r in results]
    files = [_write_csv(out / "step.csv",
                        ["t"] + [f"y_alpha_{r[0]:g}" for r in results],
                        zip(t, *cols))]
    rows = [(a, m.overshoot, m.settling_time, m.rise_time, m.steady_state_error, m.settled)
            for a, _, m in results]
    files.append(_write_csv(out / "step_metrics.csv",
                            ["alpha", "overshoot_pct", "settling_time_s", "rise_time_s",
                             "steady_state_error", "settled"], rows))
    extra = {}
    if opts["oracle"]:
        linear = [r for r in results if r[0] == 0.0]
        if not linear or opts["architecture"] == "b" and opts["beta"] not in (None, 0.0):
            raise ConfigError("--oracle needs a linear run: alpha = 0 (and beta unset or 0)")
        y = linear[0][1]
        ctrl = _pid(0.0, opts)
        ref = linear_loop_oracle(ctrl.linear_transfer_function(),
                                 DoubleIntegrator(opts["mass"]), y.t, opts["amplitude"])
        rel = float(np.sqrt(np.mean((y.values - ref) ** 2) / np.mean(ref ** 2)))
        files.append(_write_csv(out / "step_oracle.csv", ["t", "y_sim", "y_oracle"],
                                zip(y.t, y.values, ref)))
        extra["oracle_relative_rms"] = rel
    return files, extra


COMMANDS = {"df": cmd_df, "simulate": cmd_simulate, "harmonics": cmd_harmonics,
            "step": cmd_step}


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def run(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        glob, opts = resolve(args)
        out = Path(glob["out"])
        out.mkdir(parents=True, exist_ok=True)
        files, extra = COMMANDS[args.command](glob, opts, out)
    except (SimulationError, GammaSolveError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    manifest = {
        "command": args.command,
        "config": _json_safe({**glob, args.command: opts}),
        "version": __version__,
        "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "files": [str(Path(f).name) for f in files],
        **_json_safe(extra),
    }
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2)
    return EXIT_OK


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
